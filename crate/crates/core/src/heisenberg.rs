//! Truncated propagators `dV/ds = i K̃(s) V`, evolved observables
//! `Ã(s) = V† A V` and approximate ground-state expectations.

use std::fmt::Write as _;

use faer::Mat;

use crate::filter::FilterSpec;
use crate::hamiltonian::ParamHamiltonian;
use crate::lattice::{Site, SiteSet};
use crate::linalg::{self, CMat, ONE, ZERO};
use crate::operators::{DenseOperator, LocalOperator};
use crate::quasiadiabatic::{full_generator, Abscissa, DecayCurve, GeneratorLayout};
use crate::{c64, Error, Result};

/// A Hermitian generator `K(s)` on a fixed window.
pub trait Generator {
    fn window(&self) -> &SiteSet;
    fn eval(&self, s: f64) -> Result<CMat>;
}

/// `K̃_{α,β}(s)` for a fixed layout.
pub struct TruncatedSource<'a> {
    h: &'a ParamHamiltonian,
    spec: &'a FilterSpec,
    layout: GeneratorLayout,
}

impl<'a> TruncatedSource<'a> {
    pub fn new(
        h: &'a ParamHamiltonian,
        spec: &'a FilterSpec,
        alpha: usize,
        beta: usize,
        center: &Site,
    ) -> Result<Self> {
        Ok(Self { h, spec, layout: GeneratorLayout::new(h, alpha, beta, center)? })
    }
}

impl Generator for TruncatedSource<'_> {
    fn window(&self) -> &SiteSet {
        &self.layout.window
    }

    fn eval(&self, s: f64) -> Result<CMat> {
        Ok(self.layout.evaluate(self.h, s, self.spec)?.into_matrix())
    }
}

/// The untruncated `K(s)` on the whole lattice.
pub struct FullSource<'a> {
    h: &'a ParamHamiltonian,
    spec: &'a FilterSpec,
    window: SiteSet,
}

impl<'a> FullSource<'a> {
    pub fn new(h: &'a ParamHamiltonian, spec: &'a FilterSpec) -> Self {
        Self { h, spec, window: h.lattice().sites() }
    }
}

impl Generator for FullSource<'_> {
    fn window(&self) -> &SiteSet {
        &self.window
    }

    fn eval(&self, s: f64) -> Result<CMat> {
        Ok(full_generator(self.h, s, self.spec)?.into_matrix())
    }
}

/// Integration settings.
#[derive(Debug, Clone)]
pub struct EvolutionConfig {
    pub s_grid: Vec<f64>,
    pub ds: f64,
    /// Unitarity defect above which the propagator is re-projected.
    pub unitarity_tol: f64,
    /// Defect above which the run fails.
    pub repair_limit: f64,
    /// Rerun at `ds/2` and require the final propagators to agree.
    pub halving_check: bool,
    pub halving_tol: f64,
}

impl EvolutionConfig {
    pub fn new(s_grid: Vec<f64>, ds: f64) -> Result<Self> {
        let cfg = Self { s_grid, ds, unitarity_tol: 1e-8, repair_limit: 1e-6, halving_check: false, halving_tol: 1e-6 };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `s = 0, 1/k, ..., 1`.
    pub fn uniform(points: usize, ds: f64) -> Result<Self> {
        if points < 2 {
            return Err(Error::InvalidInput("s grid needs at least two points".into()));
        }
        Self::new((0..points).map(|k| k as f64 / (points - 1) as f64).collect(), ds)
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.s_grid;
        if g.is_empty() || g[0] != 0.0 {
            return Err(Error::InvalidInput("s grid must start at 0".into()));
        }
        if g.windows(2).any(|w| w[1] < w[0]) || g.iter().any(|s| !(0.0..=1.0).contains(s)) {
            return Err(Error::InvalidInput("s grid must be ascending within [0, 1]".into()));
        }
        if !(self.ds.is_finite() && self.ds > 0.0) {
            return Err(Error::InvalidInput(format!("step size must be positive, got {}", self.ds)));
        }
        if !(self.unitarity_tol > 0.0 && self.repair_limit >= self.unitarity_tol) {
            return Err(Error::InvalidInput("unitarity tolerances must satisfy 0 < tol <= limit".into()));
        }
        Ok(())
    }
}

/// `V(s)` with its unitarity defect after any repair.
#[derive(Debug, Clone)]
pub struct PropagatorState {
    pub s: f64,
    pub v: DenseOperator,
    pub defect: f64,
}

/// Propagators at each grid point.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<PropagatorState>,
    pub steps: usize,
    pub repairs: usize,
    /// `‖V_{ds}(s_last) − V_{ds/2}(s_last)‖` when the halving check ran.
    pub halving_change: Option<f64>,
}

impl Trajectory {
    pub fn window(&self) -> &SiteSet {
        self.states[0].v.window()
    }

    pub fn max_defect(&self) -> f64 {
        self.states.iter().map(|p| p.defect).fold(0.0, f64::max)
    }

    pub fn last(&self) -> &PropagatorState {
        self.states.last().unwrap()
    }
}

fn i_times(k: &CMat, v: &CMat) -> CMat {
    let kv = k * v;
    let n = kv.nrows();
    Mat::from_fn(n, kv.ncols(), |i, j| kv[(i, j)] * linalg::I)
}

fn axpy(v: &CMat, h: f64, k: &CMat) -> CMat {
    Mat::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)] + k[(i, j)] * h)
}

fn run(gen: &dyn Generator, cfg: &EvolutionConfig, ds: f64) -> Result<Trajectory> {
    let window = gen.window().clone();
    let dim = 1usize << window.len();
    let mut v = linalg::identity(dim);
    let mut states = vec![PropagatorState { s: 0.0, v: DenseOperator::new(window.clone(), v.clone())?, defect: 0.0 }];
    let mut s = 0.0;
    let mut k_s = gen.eval(s)?;
    let (mut steps, mut repairs) = (0usize, 0usize);
    let mut defect = 0.0;
    for &target in &cfg.s_grid[1..] {
        let span = target - s;
        let n = if span > 0.0 { (span / ds - 1e-9).ceil().max(1.0) as usize } else { 0 };
        for k in 0..n {
            let s1 = s + span * (k + 1) as f64 / n as f64;
            let s0 = s + span * k as f64 / n as f64;
            let h = s1 - s0;
            let k_mid = gen.eval(s0 + 0.5 * h)?;
            let k_end = gen.eval(s1)?;
            let a1 = i_times(&k_s, &v);
            let a2 = i_times(&k_mid, &axpy(&v, 0.5 * h, &a1));
            let a3 = i_times(&k_mid, &axpy(&v, 0.5 * h, &a2));
            let a4 = i_times(&k_end, &axpy(&v, h, &a3));
            v = Mat::from_fn(dim, dim, |i, j| {
                v[(i, j)] + (a1[(i, j)] + a2[(i, j)] * 2.0 + a3[(i, j)] * 2.0 + a4[(i, j)]) * (h / 6.0)
            });
            defect = linalg::unitarity_defect(v.as_ref())?;
            if defect > cfg.repair_limit {
                return Err(Error::Integration(format!(
                    "unitarity defect {defect:e} at s = {s1} exceeds {:e}",
                    cfg.repair_limit
                )));
            }
            if defect > cfg.unitarity_tol {
                v = linalg::polar_unitary(v.as_ref())?;
                defect = linalg::unitarity_defect(v.as_ref())?;
                repairs += 1;
            }
            k_s = k_end;
            steps += 1;
        }
        s = target;
        states.push(PropagatorState { s, v: DenseOperator::new(window.clone(), v.clone())?, defect });
    }
    Ok(Trajectory { states, steps, repairs, halving_change: None })
}

/// Integrates `dV/ds = i K(s) V` from `V(0) = 𝟙` with classical RK4, hitting
/// every grid point exactly. With `halving_check` the run is repeated at
/// `ds/2` and the returned trajectory is the finer one.
pub fn evolve_propagator(gen: &dyn Generator, cfg: &EvolutionConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let coarse = run(gen, cfg, cfg.ds)?;
    if !cfg.halving_check {
        return Ok(coarse);
    }
    let mut fine = run(gen, cfg, cfg.ds / 2.0)?;
    let change = coarse.last().v.distance(&fine.last().v)?;
    if change > cfg.halving_tol {
        return Err(Error::Integration(format!(
            "halving the step changed V({}) by {change:e} (tolerance {:e})",
            fine.last().s,
            cfg.halving_tol
        )));
    }
    fine.halving_change = Some(change);
    Ok(fine)
}

/// `Ã(s) = V(s)† A V(s)` at every grid point.
pub fn evolve_observable(traj: &Trajectory, a: &LocalOperator) -> Result<Vec<DenseOperator>> {
    let ad = a.embed(traj.window())?;
    traj.states.iter().map(|p| p.v.dagger().multiply_strict(&ad)?.multiply_strict(&p.v)).collect()
}

/// A computational-basis product state; bit 0 on a site is spin up.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProductState {
    down: SiteSet,
}

impl ProductState {
    pub fn all_up() -> Self {
        Self { down: SiteSet::new() }
    }

    pub fn with_down(down: SiteSet) -> Self {
        Self { down }
    }

    /// Basis index on `window`.
    pub fn index(&self, window: &SiteSet) -> usize {
        let k = window.len();
        window.iter().enumerate().filter(|(_, s)| self.down.contains(s)).map(|(i, _)| 1usize << (k - 1 - i)).sum()
    }

    pub fn vector(&self, window: &SiteSet) -> Vec<c64> {
        let mut v = vec![ZERO; 1usize << window.len()];
        v[self.index(window)] = ONE;
        v
    }

    /// Errors unless the state is an eigenvector of `H(0)` restricted to the
    /// terms supported inside `window`, within `1e-8`.
    pub fn check_eigenstate(&self, h: &ParamHamiltonian, window: &SiteSet) -> Result<()> {
        let mut interior = SiteSet::new();
        for j in h.lattice().sites().iter() {
            if h.term_support(j)?.is_subset(window) {
                interior.insert(*j);
            }
        }
        let d = h.assemble_on(0.0, &interior, window)?;
        let b = self.index(window);
        let m = d.matrix();
        let e = m[(b, b)];
        let residual: f64 = (0..m.nrows())
            .map(|i| if i == b { (m[(i, b)] - e).norm_sqr() } else { m[(i, b)].norm_sqr() })
            .sum::<f64>()
            .sqrt();
        if residual > 1e-8 {
            return Err(Error::InvalidInput(format!(
                "initial state is not an eigenstate of H(0) on the window (residual {residual:e})"
            )));
        }
        Ok(())
    }
}

/// One row of an expectation report.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectationRow {
    pub s: f64,
    pub approx: f64,
    pub oracle: Option<f64>,
    pub defect: f64,
}

impl ExpectationRow {
    pub fn abs_error(&self) -> Option<f64> {
        self.oracle.map(|o| (self.approx - o).abs())
    }
}

#[derive(Debug, Clone)]
pub struct ExpectationReport {
    pub rows: Vec<ExpectationRow>,
    pub alpha: usize,
    pub beta: usize,
    pub gamma: f64,
}

impl ExpectationReport {
    pub fn max_error(&self) -> Option<f64> {
        self.rows.iter().map(|r| r.abs_error()).collect::<Option<Vec<_>>>().map(|v| v.into_iter().fold(0.0, f64::max))
    }

    /// Columns `s,omega_approx,omega_oracle,abs_error,alpha,beta,gamma,unitarity_defect`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,omega_approx,omega_oracle,abs_error,alpha,beta,gamma,unitarity_defect\n");
        for r in &self.rows {
            let o = r.oracle.map(|v| v.to_string()).unwrap_or_default();
            let e = r.abs_error().map(|v| v.to_string()).unwrap_or_default();
            writeln!(out, "{},{},{o},{e},{},{},{},{}", r.s, r.approx, self.alpha, self.beta, self.gamma, r.defect)
                .unwrap();
        }
        out
    }
}

/// `ω'_s(A) = ⟨ψ₀|V† A V|ψ₀⟩` along the trajectory.
pub fn expectation(traj: &Trajectory, a: &LocalOperator, psi0: &ProductState) -> Result<Vec<ExpectationRow>> {
    let window = traj.window();
    let ad = a.embed(window)?;
    let b = psi0.index(window);
    let m = ad.matrix();
    let dim = m.nrows();
    traj.states
        .iter()
        .map(|p| {
            let col: Vec<c64> = (0..dim).map(|i| p.v.matrix()[(i, b)]).collect();
            let mut acc = ZERO;
            for j in 0..dim {
                let mut row = ZERO;
                for i in 0..dim {
                    row += col[i].conj() * m[(i, j)];
                }
                acc += row * col[j];
            }
            Ok(ExpectationRow { s: p.s, approx: acc.re, oracle: None, defect: p.defect })
        })
        .collect()
}

/// Runs the truncated evolution around `center` and reports `ω'_s(A)`.
#[allow(clippy::too_many_arguments)]
pub fn truncated_expectation(
    h: &ParamHamiltonian,
    spec: &FilterSpec,
    alpha: usize,
    beta: usize,
    center: &Site,
    cfg: &EvolutionConfig,
    a: &LocalOperator,
    psi0: &ProductState,
) -> Result<(ExpectationReport, Trajectory)> {
    let src = TruncatedSource::new(h, spec, alpha, beta, center)?;
    psi0.check_eigenstate(h, src.window())?;
    let traj = evolve_propagator(&src, cfg)?;
    let rows = expectation(&traj, a, psi0)?;
    Ok((ExpectationReport { rows, alpha, beta, gamma: spec.gamma() }, traj))
}

/// `Ã_{α,β}(s)` at the end of `[0, s]`.
#[allow(clippy::too_many_arguments)]
pub fn evolved_at(
    h: &ParamHamiltonian,
    spec: &FilterSpec,
    alpha: usize,
    beta: usize,
    center: &Site,
    a: &LocalOperator,
    s: f64,
    ds: f64,
) -> Result<DenseOperator> {
    let src = TruncatedSource::new(h, spec, alpha, beta, center)?;
    let traj = evolve_propagator(&src, &EvolutionConfig::new(vec![0.0, s], ds)?)?;
    Ok(evolve_observable(&traj, a)?.pop().unwrap())
}

/// Differences `‖Ã_{x} − Ã_{ref}‖` along a list of truncation radii, with
/// the other radius held at its reference value.
#[allow(clippy::too_many_arguments)]
pub fn truncation_error_curve(
    h: &ParamHamiltonian,
    spec: &FilterSpec,
    a: &LocalOperator,
    center: &Site,
    s: f64,
    ds: f64,
    vary: Abscissa,
    radii: &[usize],
    alpha_ref: usize,
    beta_ref: usize,
) -> Result<DecayCurve> {
    let reference = evolved_at(h, spec, alpha_ref, beta_ref, center, a, s, ds)?;
    let mut points = Vec::with_capacity(radii.len());
    for &r in radii {
        let (al, be) = match vary {
            Abscissa::Alpha => (r, beta_ref),
            Abscissa::Beta => (alpha_ref, r),
            _ => return Err(Error::InvalidInput("truncation curves vary alpha or beta".into())),
        };
        let value = if (al, be) == (alpha_ref, beta_ref) {
            0.0
        } else {
            evolved_at(h, spec, al, be, center, a, s, ds)?.distance(&reference)?
        };
        points.push((r as f64, value));
    }
    DecayCurve::new(vary, points)
}
