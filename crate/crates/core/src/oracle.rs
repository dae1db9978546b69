//! Exact-diagonalization references: ground-state paths, the filter
//! reconstruction of the ground projector, the perturbative form of the
//! generator, exact adiabatic transport and light-cone measurements.
//!
//! States are only ever compared through projectors, fidelities and
//! expectations, so the free global phase of eigenvectors never matters. For
//! two pure states `‖|a⟩⟨a| − |b⟩⟨b|‖ = sqrt(1 − |⟨a|b⟩|²)`.

use std::fmt::Write as _;

use faer::Mat;

use crate::filter::{FilterSpec, TimeQuadrature};
use crate::fit::{plane_fit, PlaneFit};
use crate::hamiltonian::{ground_state, ParamHamiltonian};
use crate::heisenberg::{evolve_propagator, EvolutionConfig, FullSource};
use crate::lattice::{Site, SiteSet};
use crate::linalg::{self, CMat, ZERO};
use crate::operators::{DenseOperator, LocalOperator, Pauli, PauliString};
use crate::quasiadiabatic::{full_generator, Abscissa, DecayCurve, EigenBasis};
use crate::{c64, Error, Result};

/// Largest lattice handled by the exact references.
pub const MAX_ORACLE_SITES: usize = 12;

fn check_size(h: &ParamHamiltonian) -> Result<()> {
    let n = h.lattice().num_sites();
    if n > MAX_ORACLE_SITES {
        Err(Error::WindowCap { sites: n, cap: MAX_ORACLE_SITES })
    } else {
        Ok(())
    }
}

fn dot(a: &[c64], b: &[c64]) -> c64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn matvec(m: &CMat, v: &[c64]) -> Vec<c64> {
    let n = m.nrows();
    let mut out = vec![ZERO; n];
    for (j, vj) in v.iter().enumerate() {
        if *vj == ZERO {
            continue;
        }
        for (i, o) in out.iter_mut().enumerate() {
            *o += m[(i, j)] * vj;
        }
    }
    out
}

fn norm(v: &[c64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// `‖|a⟩⟨a| − |b⟩⟨b|‖` for unit vectors.
pub fn projector_distance(a: &[c64], b: &[c64]) -> f64 {
    let ov = dot(a, b);
    a.iter().zip(b).map(|(x, y)| (y - x * ov).norm_sqr()).sum::<f64>().sqrt()
}

fn column(m: &CMat, j: usize) -> Vec<c64> {
    (0..m.nrows()).map(|i| m[(i, j)]).collect()
}

/// Ground vector of the full `H(s)`.
pub fn ground_vector(h: &ParamHamiltonian, s: f64) -> Result<(f64, f64, Vec<c64>)> {
    check_size(h)?;
    let r = ground_state(&h.full(s)?, s)?;
    Ok((r.ground_energy, r.gap, r.ground_vector.unwrap()))
}

/// Ground energies, gaps and ground projectors along an `s` grid.
#[derive(Debug, Clone)]
pub struct ExactPath {
    pub s_grid: Vec<f64>,
    pub energies: Vec<f64>,
    pub gaps: Vec<f64>,
    vectors: Vec<Vec<c64>>,
    window: SiteSet,
}

impl ExactPath {
    pub fn compute(h: &ParamHamiltonian, s_grid: &[f64]) -> Result<Self> {
        let mut energies = Vec::new();
        let mut gaps = Vec::new();
        let mut vectors = Vec::new();
        for &s in s_grid {
            let (e, g, v) = ground_vector(h, s)?;
            energies.push(e);
            gaps.push(g);
            vectors.push(v);
        }
        Ok(Self { s_grid: s_grid.to_vec(), energies, gaps, vectors, window: h.lattice().sites() })
    }

    pub fn ground_vector(&self, k: usize) -> &[c64] {
        &self.vectors[k]
    }

    /// `P(s_k) = |Ω(s_k)⟩⟨Ω(s_k)|`.
    pub fn projector(&self, k: usize) -> DenseOperator {
        let v = &self.vectors[k];
        let n = v.len();
        DenseOperator::new(self.window.clone(), Mat::from_fn(n, n, |i, j| v[i] * v[j].conj())).unwrap()
    }

    /// Largest `‖P(s_{k+1}) − P(s_k)‖ / Δs` along the grid.
    pub fn lipschitz_estimate(&self) -> f64 {
        (1..self.s_grid.len())
            .map(|k| projector_distance(&self.vectors[k], &self.vectors[k - 1]) / (self.s_grid[k] - self.s_grid[k - 1]))
            .fold(0.0, f64::max)
    }
}

/// `ω_s(A) = ⟨Ω(s)|A|Ω(s)⟩`.
pub fn exact_expectation(h: &ParamHamiltonian, s: f64, a: &LocalOperator) -> Result<f64> {
    let (_, _, v) = ground_vector(h, s)?;
    let ad = a.embed(&h.lattice().sites())?;
    Ok(ad.expectation(&v).re)
}

/// Residuals of the spectral filter reconstruction of `P(s)`.
#[derive(Debug, Clone)]
pub struct ProjectorCheck {
    pub gap: f64,
    pub gamma: f64,
    /// `‖Σ_k χ̂(E_k − Ω)|k⟩⟨k| − P(s)‖`.
    pub spectral_residual: f64,
    /// Closed form of the same residual, `max_{k>0} |χ̂(E_k − Ω)|`.
    pub leakage: f64,
    /// `‖P_quadrature − P_spectral‖` with `χ̂` replaced by its time-quadrature
    /// image.
    pub quadrature_agreement: Option<f64>,
    /// Set when `γ ≥ ΔE(s)`, where the reconstruction is not expected to hold.
    pub cutoff_violated: bool,
}

/// Compares the spectral filter reconstruction of `P(s)` against the exact
/// projector and, when a time rule is given, against its quadrature image.
pub fn projector_filter_check(
    h: &ParamHamiltonian,
    s: f64,
    spec: &FilterSpec,
    quadrature: Option<&TimeQuadrature>,
) -> Result<ProjectorCheck> {
    check_size(h)?;
    let basis = EigenBasis::new(&h.full(s)?)?;
    let e = basis.values();
    let omega = e[0];
    let gap = e.get(1).map_or(f64::INFINITY, |e1| e1 - omega);
    let u = basis.vectors();
    let p = {
        let v = column(u, 0);
        let n = v.len();
        Mat::from_fn(n, n, |i, j| v[i] * v[j].conj())
    };
    let spectral = linalg::spectral_apply(e, u.as_ref(), |x| c64::new(spec.chi_hat(x - omega), 0.0));
    let spectral_residual = linalg::hermitian_norm(linalg::symmetrize((&spectral - &p).as_ref()).as_ref())?;
    let leakage = e[1..].iter().map(|x| spec.chi_hat(x - omega).abs()).fold(0.0, f64::max);
    let quadrature_agreement = if let Some(q) = quadrature {
        let spread = e[e.len() - 1] - omega;
        if spread > q.omega_max() {
            return Err(Error::InvalidInput(format!(
                "time rule resolves {} < spectral spread {spread}",
                q.omega_max()
            )));
        }
        let quad = linalg::spectral_apply(e, u.as_ref(), |x| c64::new(q.chi_hat(x - omega), 0.0));
        Some(linalg::hermitian_norm(linalg::symmetrize((&quad - &spectral).as_ref()).as_ref())?)
    } else {
        None
    };
    Ok(ProjectorCheck {
        gap,
        gamma: spec.gamma(),
        spectral_residual,
        leakage,
        quadrature_agreement,
        cutoff_violated: spec.gamma() >= gap,
    })
}

/// `‖ i K(s)|Ω⟩ − (Ω𝟙 − H)⁺ H'|Ω⟩ ‖` with the untruncated generator.
pub fn pt_generator_check(h: &ParamHamiltonian, s: f64, spec: &FilterSpec) -> Result<f64> {
    check_size(h)?;
    let all = h.lattice().sites();
    let basis = EigenBasis::new(&h.full(s)?)?;
    let e = basis.values();
    if e.len() > 1 && e[1] - e[0] < crate::hamiltonian::DEGENERACY_THRESHOLD {
        return Err(Error::DegenerateGround { gap: e[1] - e[0], threshold: crate::hamiltonian::DEGENERACY_THRESHOLD });
    }
    let u = basis.vectors();
    let psi = column(u, 0);
    let k = full_generator(h, s, spec)?;
    let lhs: Vec<c64> = matvec(k.matrix(), &psi).into_iter().map(|x| x * linalg::I).collect();
    let (_, hp) = h.region_parts(&all)?;
    let hpsi = matvec(hp.embed(&all)?.matrix(), &psi);
    let mut rhs = vec![ZERO; psi.len()];
    for m in 1..e.len() {
        let col = column(u, m);
        let c = dot(&col, &hpsi) / (e[0] - e[m]);
        for (r, x) in rhs.iter_mut().zip(&col) {
            *r += c * x;
        }
    }
    let diff: Vec<c64> = lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect();
    Ok(norm(&diff))
}

/// Projector error of a transported state along a grid.
#[derive(Debug, Clone)]
pub struct TransportReport {
    pub ds: f64,
    pub s_grid: Vec<f64>,
    pub errors: Vec<f64>,
}

impl TransportReport {
    pub fn max_error(&self) -> f64 {
        self.errors.iter().copied().fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,projector_error\n");
        for (s, e) in self.s_grid.iter().zip(&self.errors) {
            writeln!(out, "{s},{e}").unwrap();
        }
        out
    }
}

/// Integrates `d|ψ⟩/ds = −[P(s), P'(s)]|ψ⟩` from `|Ω(0)⟩` over `[0, 1]` with
/// `steps` exponential-midpoint steps. `P'` at the midpoint is the central
/// difference `(P(s_{k+1}) − P(s_k))/Δs`.
pub fn exact_adiabatic_transport(h: &ParamHamiltonian, steps: usize) -> Result<TransportReport> {
    check_size(h)?;
    if steps == 0 {
        return Err(Error::InvalidInput("transport needs at least one step".into()));
    }
    let ds = 1.0 / steps as f64;
    let (_, _, mut prev) = ground_vector(h, 0.0)?;
    let mut psi = prev.clone();
    let mut s_grid = vec![0.0];
    let mut errors = vec![0.0];
    let dim = psi.len();
    let outer = |v: &[c64]| Mat::from_fn(dim, dim, |i, j| v[i] * v[j].conj());
    for k in 0..steps {
        let s1 = (k + 1) as f64 * ds;
        let (_, _, mid) = ground_vector(h, s1 - 0.5 * ds)?;
        let (_, _, next) = ground_vector(h, s1)?;
        let pm = outer(&mid);
        let dp = Mat::from_fn(dim, dim, |i, j| (next[i] * next[j].conj() - prev[i] * prev[j].conj()) / ds);
        // −[P, P'] = i·G with G = i[P, P'] Hermitian.
        let comm = &pm * &dp - &dp * &pm;
        let g = Mat::from_fn(dim, dim, |i, j| comm[(i, j)] * linalg::I);
        let g = linalg::symmetrize(g.as_ref());
        let (vals, vecs) = linalg::hermitian_eigen(g.as_ref())?;
        let step = linalg::spectral_apply(&vals, vecs.as_ref(), |x| c64::new((x * ds).cos(), (x * ds).sin()));
        psi = matvec(&step, &psi);
        s_grid.push(s1);
        errors.push(projector_distance(&psi, &next));
        prev = next;
    }
    Ok(TransportReport { ds, s_grid, errors })
}

/// Integrates `dV/ds = i K(s) V` with the untruncated generator and reports
/// `‖V P(0) V† − P(s)‖` on the grid.
pub fn full_generator_transport(
    h: &ParamHamiltonian,
    spec: &FilterSpec,
    cfg: &EvolutionConfig,
) -> Result<TransportReport> {
    check_size(h)?;
    let src = FullSource::new(h, spec);
    let traj = evolve_propagator(&src, cfg)?;
    let (_, _, psi0) = ground_vector(h, 0.0)?;
    let mut errors = Vec::new();
    for st in &traj.states {
        let moved = matvec(st.v.matrix(), &psi0);
        let (_, _, target) = ground_vector(h, st.s)?;
        errors.push(projector_distance(&moved, &target));
    }
    Ok(TransportReport { ds: cfg.ds, s_grid: cfg.s_grid.clone(), errors })
}

/// Heisenberg evolution `τ_t(A) = e^{iHt} A e^{−iHt}` under a fixed basis.
pub struct Dynamics {
    basis: EigenBasis,
}

impl Dynamics {
    pub fn new(h: &DenseOperator) -> Result<Self> {
        Ok(Self { basis: EigenBasis::new(h)? })
    }

    pub fn window(&self) -> &SiteSet {
        self.basis.window()
    }

    pub fn evolve(&self, a: &DenseOperator, t: f64) -> Result<DenseOperator> {
        let a = a.embed_into(self.basis.window())?;
        let u = self.basis.vectors();
        let e = self.basis.values();
        let tilde = u.adjoint() * a.matrix() * u;
        let n = e.len();
        let phased = Mat::from_fn(n, n, |i, j| tilde[(i, j)] * c64::new(0.0, (e[i] - e[j]) * t).exp());
        DenseOperator::new(self.basis.window().clone(), u * &phased * u.adjoint())
    }
}

/// `‖[A, B]‖` for Hermitian `A` and a Pauli string `B`.
fn commutator_norm(a: &DenseOperator, b: &PauliString) -> Result<f64> {
    let c = a.pauli_right(b)?.sub(&a.pauli_left(b)?)?;
    let herm = c.scale(linalg::I);
    linalg::hermitian_norm(linalg::symmetrize(herm.matrix().as_ref()).as_ref())
}

/// Light-cone scan of `‖[τ_t(A), B_d]‖`.
#[derive(Debug, Clone)]
pub struct ConeReport {
    /// `(t, d, ‖[τ_t(A), B_d]‖)`.
    pub values: Vec<(f64, usize, f64)>,
    /// Plane fit of `log value ≈ c − v d + κ t` over the fit region.
    pub fit: Option<PlaneFit>,
    pub fit_points: usize,
}

impl ConeReport {
    pub fn velocity(&self) -> Option<f64> {
        self.fit.map(|f| -f.a)
    }

    pub fn rate(&self) -> Option<f64> {
        self.fit.map(|f| f.b)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,distance,comm_norm\n");
        for (t, d, v) in &self.values {
            writeln!(out, "{t},{d},{v}").unwrap();
        }
        out
    }

    /// Fit summary block.
    pub fn summary(&self) -> String {
        match self.fit {
            Some(f) => format!(
                "{{ v: {}, kappa: {}, intercept: {}, residual_rms: {}, fit_points: {} }}\n",
                -f.a, f.b, f.c, f.rms, self.fit_points
            ),
            None => "{ fit: none }\n".into(),
        }
    }
}

/// Values below this are excluded from the cone fit as numerical noise.
pub const CONE_NOISE_FLOOR: f64 = 1e-12;
/// Values at or above this are excluded from the cone fit as saturated.
pub const CONE_SATURATION: f64 = 0.5;

/// Measures `‖[τ_t(A), B_d]‖` for `A` at the origin and `B_d` the single-site
/// Pauli `b_axis` at distance `d` along the first axis, under `H(s)`.
pub fn lr_cone_scan(
    h: &ParamHamiltonian,
    s: f64,
    a: &LocalOperator,
    b_axis: Pauli,
    distances: &[usize],
    t_grid: &[f64],
) -> Result<ConeReport> {
    check_size(h)?;
    let l = h.lattice();
    let dynamics = Dynamics::new(&h.full(s)?)?;
    let ad = a.embed(dynamics.window())?;
    let mut values = Vec::new();
    for &t in t_grid {
        let at = dynamics.evolve(&ad, t)?;
        for &d in distances {
            let site = l.site(&if l.dim() == 1 { vec![d as i64] } else { vec![d as i64, 0] })?;
            let b = PauliString::single(site, b_axis);
            values.push((t, d, commutator_norm(&at, &b)?));
        }
    }
    let pts: Vec<(f64, f64, f64)> = values
        .iter()
        .filter(|(_, _, v)| *v > CONE_NOISE_FLOOR && *v < CONE_SATURATION)
        .map(|(t, d, v)| (*d as f64, *t, v.ln()))
        .collect();
    if pts.is_empty() {
        return Err(Error::InvalidInput("light-cone fit region is empty".into()));
    }
    let fit = plane_fit(&pts).ok();
    Ok(ConeReport { values, fit, fit_points: pts.len() })
}

/// `‖τ_t^{H_{Λ_α}}(A) − τ_t^{H_{Λ_{α−1}}}(A)‖` for each `α` in the list.
pub fn boundary_difference_scan(
    h: &ParamHamiltonian,
    s: f64,
    a: &LocalOperator,
    alphas: &[usize],
    t: f64,
) -> Result<DecayCurve> {
    check_size(h)?;
    let l = h.lattice();
    let center = Site::ORIGIN;
    let evolved = |alpha: usize| -> Result<DenseOperator> {
        let region = l.ball(&center, alpha)?;
        let window = h.window(&region)?.union(&a.support());
        let dynamics = Dynamics::new(&h.assemble_on(s, &region, &window)?)?;
        dynamics.evolve(&a.embed(&window)?, t)
    };
    let mut points = Vec::new();
    for &alpha in alphas {
        if alpha == 0 {
            return Err(Error::InvalidInput("boundary differences start at alpha = 1".into()));
        }
        let outer = evolved(alpha)?;
        let inner = evolved(alpha - 1)?;
        let diff = outer.sub(&inner)?;
        let v = linalg::hermitian_norm(linalg::symmetrize(diff.matrix().as_ref()).as_ref())?;
        points.push((alpha as f64, v));
    }
    DecayCurve::new(Abscissa::Alpha, points)
}
