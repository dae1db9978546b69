//! The filter map `F_s`, shell terms `k_α`, their decay curves, and truncated
//! generators `K̃_{α,β}(s) = Σ_{j ∈ Λ_α} F^{H_{Λ_β(j)}}(h'_j)`.
//!
//! `F_s` is evaluated spectrally: in an eigenbasis `{E_m}` of the restricting
//! Hamiltonian, `F(M)_{mn} = w(E_m - E_n) M_{mn}`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use faer::Mat;

use crate::filter::{FilterSpec, SpectralWeight};
use crate::fit::{power_law_fit, PowerLawFit};
use crate::hamiltonian::{ParamHamiltonian, RestrictedHamiltonian};
use crate::lattice::{Site, SiteSet};
use crate::linalg::{self, CMat};
use crate::operators::{DenseOperator, LocalOperator};
use crate::{Error, Result};

/// Largest window that may be fully diagonalized.
pub const MAX_EIGEN_SITES: usize = 13;

/// Eigendecomposition of a Hermitian operator on a window.
#[derive(Debug, Clone)]
pub struct EigenBasis {
    window: SiteSet,
    values: Vec<f64>,
    vectors: CMat,
}

impl EigenBasis {
    pub fn new(h: &DenseOperator) -> Result<Self> {
        if h.window().len() > MAX_EIGEN_SITES {
            return Err(Error::WindowCap { sites: h.window().len(), cap: MAX_EIGEN_SITES });
        }
        let defect = h.hermiticity_defect();
        if defect > 1e-10 {
            return Err(Error::NotHermitian(defect));
        }
        let (values, vectors) = linalg::hermitian_eigen(h.matrix().as_ref())?;
        Ok(Self { window: h.window().clone(), values, vectors })
    }

    /// Basis of `H_region(s)` on its own window.
    pub fn of_region(h: &ParamHamiltonian, s: f64, region: &SiteSet) -> Result<Self> {
        Self::new(&h.assemble(s, region)?)
    }

    pub fn window(&self) -> &SiteSet {
        &self.window
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn vectors(&self) -> &CMat {
        &self.vectors
    }

    /// `F(M)` for `M` supported in the window (embedded if needed).
    pub fn filter(&self, m: &DenseOperator, w: &SpectralWeight) -> Result<DenseOperator> {
        let m = m.embed_into(&self.window)?;
        let u = &self.vectors;
        let tilde = u.adjoint() * m.matrix() * u;
        let n = self.values.len();
        let scaled = Mat::from_fn(n, n, |i, j| w.eval(self.values[i] - self.values[j]) * tilde[(i, j)]);
        let back = u * &scaled * u.adjoint();
        DenseOperator::new(self.window.clone(), back)
    }

    /// `F(M)` for a Pauli-sum `M`.
    pub fn filter_local(&self, m: &LocalOperator, w: &SpectralWeight) -> Result<DenseOperator> {
        self.filter(&m.embed(&self.window)?, w)
    }
}

/// `F_s^{H_r}(M)` with `M` on (a subset of) the restricted window.
pub fn f_s(m: &DenseOperator, hr: &RestrictedHamiltonian, w: &SpectralWeight) -> Result<DenseOperator> {
    EigenBasis::new(&hr.dense)?.filter(m, w)
}

/// `k_{j,α}(s)` on the window of `H_{Λ_α(j)}`.
#[derive(Debug, Clone)]
pub struct QuasiLocalTerm {
    pub center: Site,
    pub alpha: usize,
    pub s: f64,
    pub operator: DenseOperator,
}

impl QuasiLocalTerm {
    pub fn norm(&self) -> Result<f64> {
        linalg::hermitian_norm(linalg::symmetrize(self.operator.matrix().as_ref()).as_ref())
    }
}

/// `F^{H_{Λ_α(j)}(s)}(h'_j)` on its own window.
pub fn filtered_hprime(
    h: &ParamHamiltonian,
    s: f64,
    j: &Site,
    alpha: usize,
    w: &SpectralWeight,
) -> Result<DenseOperator> {
    let region = h.lattice().ball(j, alpha)?;
    EigenBasis::of_region(h, s, &region)?.filter_local(&h.hprime_term(j)?, w)
}

/// All shell terms `k_{j,0..=α_max}(s)`, sharing each restricted
/// diagonalization between neighbouring shells.
pub fn shell_terms(
    h: &ParamHamiltonian,
    s: f64,
    j: &Site,
    alpha_max: usize,
    spec: &FilterSpec,
) -> Result<Vec<QuasiLocalTerm>> {
    let w = spec.weight();
    let mut out = Vec::with_capacity(alpha_max + 1);
    let mut prev: Option<DenseOperator> = None;
    for alpha in 0..=alpha_max {
        let cur = filtered_hprime(h, s, j, alpha, &w)?;
        let k = match &prev {
            None => cur.clone(),
            Some(p) => cur.sub(&p.embed_into(cur.window())?)?,
        };
        out.push(QuasiLocalTerm { center: *j, alpha, s, operator: k });
        prev = Some(cur);
    }
    Ok(out)
}

/// `k_{j,α}(s) = F^{H_{Λ_α}}(h'_j) - F^{H_{Λ_{α-1}}}(h'_j)`, with
/// `k_0 = F^{H_{Λ_0}}(h'_j)`.
pub fn shell_term(h: &ParamHamiltonian, s: f64, j: &Site, alpha: usize, spec: &FilterSpec) -> Result<QuasiLocalTerm> {
    let w = spec.weight();
    let cur = filtered_hprime(h, s, j, alpha, &w)?;
    let operator = if alpha == 0 {
        cur
    } else {
        let prev = filtered_hprime(h, s, j, alpha - 1, &w)?;
        cur.sub(&prev.embed_into(cur.window())?)?
    };
    Ok(QuasiLocalTerm { center: *j, alpha, s, operator })
}

/// What a decay curve is plotted against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Abscissa {
    Alpha,
    Beta,
    Distance,
    Time,
}

impl Abscissa {
    pub fn label(self) -> &'static str {
        match self {
            Abscissa::Alpha => "alpha",
            Abscissa::Beta => "beta",
            Abscissa::Distance => "distance",
            Abscissa::Time => "t",
        }
    }
}

/// Norms against a strictly increasing abscissa, with an optional fitted
/// power-law envelope and free-form report parameters.
#[derive(Debug, Clone)]
pub struct DecayCurve {
    pub abscissa: Abscissa,
    pub points: Vec<(f64, f64)>,
    pub envelope: Option<PowerLawFit>,
    pub params: BTreeMap<String, f64>,
}

impl DecayCurve {
    pub fn new(abscissa: Abscissa, points: Vec<(f64, f64)>) -> Result<Self> {
        if points.windows(2).any(|p| p[1].0 <= p[0].0) {
            return Err(Error::InvalidInput("decay curve abscissa must be strictly increasing".into()));
        }
        Ok(Self { abscissa, points, envelope: None, params: BTreeMap::new() })
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.1).collect()
    }

    /// Points with `x ≥ from`.
    pub fn tail(&self, from: f64) -> Vec<(f64, f64)> {
        self.points.iter().copied().filter(|p| p.0 >= from).collect()
    }

    /// Whether each value with `x ≥ from` is at most its predecessor.
    pub fn is_nonincreasing_from(&self, from: f64) -> bool {
        self.tail(from).windows(2).all(|p| p[1].1 <= p[0].1)
    }

    /// Fits `value ≈ A x^p` on points with `x ≥ from` and stores it as the
    /// envelope. Requires positive abscissae and values.
    pub fn fit_power_law_tail(&mut self, from: f64) -> Result<PowerLawFit> {
        let tail = self.tail(from);
        let xs: Vec<f64> = tail.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = tail.iter().map(|p| p.1).collect();
        let f = power_law_fit(&xs, &ys)?;
        self.envelope = Some(f);
        Ok(f)
    }

    /// CSV with columns `x,value,envelope_fit` and `#` header comments.
    pub fn to_csv(&self, meta: &[(&str, String)]) -> String {
        let mut out = String::new();
        for (k, v) in meta {
            writeln!(out, "# {k} = {v}").unwrap();
        }
        writeln!(out, "# abscissa = {}", self.abscissa.label()).unwrap();
        if let Some(f) = &self.envelope {
            writeln!(out, "# envelope = {} * x^{}", f.prefactor, f.exponent).unwrap();
        }
        for (k, v) in &self.params {
            writeln!(out, "# {k} = {v}").unwrap();
        }
        out.push_str("x,value,envelope_fit\n");
        for (x, v) in &self.points {
            let env = match &self.envelope {
                Some(f) if *x > 0.0 => format!("{}", f.prefactor * x.powf(f.exponent)),
                _ => String::new(),
            };
            writeln!(out, "{x},{v},{env}").unwrap();
        }
        out
    }
}

/// `(α, ‖k_{j,α}(s)‖)` for `α = 0..=α_max`.
pub fn shell_decay_curve(
    h: &ParamHamiltonian,
    s: f64,
    j: &Site,
    alpha_max: usize,
    spec: &FilterSpec,
) -> Result<DecayCurve> {
    let terms = shell_terms(h, s, j, alpha_max, spec)?;
    let points = terms.iter().map(|k| Ok((k.alpha as f64, k.norm()?))).collect::<Result<Vec<_>>>()?;
    DecayCurve::new(Abscissa::Alpha, points)
}

/// Expected decay onset `α* = ⌈c/Δ⌉`.
pub fn decay_onset(c: f64, gap: f64) -> usize {
    (c / gap).ceil().max(0.0) as usize
}

/// `K̃_{α,β}(s)` around `center`.
#[derive(Debug, Clone)]
pub struct TruncatedGenerator {
    pub alpha: usize,
    pub beta: usize,
    pub s: f64,
    pub center: Site,
    pub operator: DenseOperator,
}

/// Generator centers and evaluation regions of `K̃_{α,β}`, grouped by region so
/// that centers sharing a restricted Hamiltonian share its diagonalization.
#[derive(Debug, Clone)]
pub struct GeneratorLayout {
    pub alpha: usize,
    pub beta: usize,
    pub center: Site,
    pub window: SiteSet,
    groups: Vec<(SiteSet, LocalOperator)>,
}

impl GeneratorLayout {
    pub fn new(h: &ParamHamiltonian, alpha: usize, beta: usize, center: &Site) -> Result<Self> {
        let l = h.lattice();
        let centers = l.ball(center, alpha)?;
        let mut by_region: BTreeMap<SiteSet, LocalOperator> = BTreeMap::new();
        let mut window = SiteSet::new();
        for j in &centers {
            let region = l.ball(j, beta)?;
            window = window.union(&h.window(&region)?);
            let slot = by_region.entry(region).or_default();
            *slot = slot.add(&h.hprime_term(j)?);
        }
        if window.len() > MAX_EIGEN_SITES {
            return Err(Error::WindowCap { sites: window.len(), cap: MAX_EIGEN_SITES });
        }
        Ok(Self { alpha, beta, center: *center, window, groups: by_region.into_iter().collect() })
    }

    /// Number of distinct restricted Hamiltonians.
    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    /// `K̃_{α,β}(s)` on the layout window.
    pub fn evaluate(&self, h: &ParamHamiltonian, s: f64, spec: &FilterSpec) -> Result<DenseOperator> {
        let w = spec.weight();
        let mut total = DenseOperator::zeros(&self.window)?;
        for (region, hprime) in &self.groups {
            let basis = EigenBasis::of_region(h, s, region)?;
            let term = basis.filter_local(hprime, &w)?;
            total = total.add(&term.embed_into(&self.window)?)?;
        }
        Ok(total)
    }
}

pub fn assemble_truncated_generator(
    h: &ParamHamiltonian,
    s: f64,
    alpha: usize,
    beta: usize,
    spec: &FilterSpec,
    center: &Site,
) -> Result<TruncatedGenerator> {
    let layout = GeneratorLayout::new(h, alpha, beta, center)?;
    let operator = layout.evaluate(h, s, spec)?;
    Ok(TruncatedGenerator { alpha, beta, s, center: *center, operator })
}

/// The untruncated `K(s) = Σ_j F^{H(s)}(h'_j)` on the whole lattice.
pub fn full_generator(h: &ParamHamiltonian, s: f64, spec: &FilterSpec) -> Result<DenseOperator> {
    let all = h.lattice().sites();
    let basis = EigenBasis::new(&h.assemble_on(s, &all, &all)?)?;
    let (_, hp) = h.region_parts(&all)?;
    basis.filter_local(&hp, &spec.weight())
}

/// Partial sums of `Σ_α ‖k_α‖ (1+2α(α+1))² (2+2α)^η` and bound bookkeeping.
#[derive(Debug, Clone)]
pub struct SummabilityReport {
    pub l: u32,
    pub norms: Vec<f64>,
    pub weights: Vec<f64>,
    pub partial_sums: Vec<f64>,
    /// The full weighted sum up to `α_max`.
    pub sum: f64,
    /// Relative change of the sum between `α_max/2` and `α_max`.
    pub relative_change: f64,
    pub converged: bool,
    /// Smallest `c_l` with `‖k_α‖ ≤ c_l / (γ^l α^{l-1})` on the measured `α ≥ 1`.
    pub c_l: f64,
    /// `σ(l) = c_l Σ_{α≥1} weight(α)/α^{l-1}` over the measured range.
    pub sigma_l: f64,
    /// `σ(l)/γ^l`.
    pub s1_bound: f64,
}

/// Summability weight `(1+2α(α+1))² (2+2α)^η`.
pub fn summability_weight(alpha: usize, eta: usize) -> f64 {
    let a = alpha as f64;
    (1.0 + 2.0 * a * (a + 1.0)).powi(2) * (2.0 + 2.0 * a).powi(eta as i32)
}

/// Builds the report from shell norms `‖k_0‖..‖k_{α_max}‖`.
pub fn summability_from_norms(norms: &[f64], eta: usize, gamma: f64, l: u32) -> Result<SummabilityReport> {
    if (l as usize) < 7 + eta {
        return Err(Error::InvalidInput(format!("summability order l = {l} must be at least {}", 7 + eta)));
    }
    if norms.len() < 3 {
        return Err(Error::InvalidInput("summability needs shell norms up to at least alpha = 2".into()));
    }
    let weights: Vec<f64> = (0..norms.len()).map(|a| summability_weight(a, eta)).collect();
    let mut partial_sums = Vec::with_capacity(norms.len());
    let mut acc = 0.0;
    for (n, w) in norms.iter().zip(&weights) {
        acc += n * w;
        partial_sums.push(acc);
    }
    let alpha_max = norms.len() - 1;
    let half = partial_sums[alpha_max / 2];
    let sum = acc;
    let relative_change = if sum == 0.0 { 0.0 } else { (sum - half).abs() / sum.abs() };
    let c_l =
        (1..norms.len()).map(|a| norms[a] * gamma.powi(l as i32) * (a as f64).powi(l as i32 - 1)).fold(0.0, f64::max);
    let sigma_l = c_l * (1..norms.len()).map(|a| weights[a] / (a as f64).powi(l as i32 - 1)).sum::<f64>();
    Ok(SummabilityReport {
        l,
        norms: norms.to_vec(),
        weights,
        partial_sums,
        sum,
        relative_change,
        converged: relative_change < 0.01,
        c_l,
        sigma_l,
        s1_bound: sigma_l / gamma.powi(l as i32),
    })
}

pub fn summability_check(
    h: &ParamHamiltonian,
    s: f64,
    spec: &FilterSpec,
    l: u32,
    alpha_max: usize,
) -> Result<SummabilityReport> {
    let curve = shell_decay_curve(h, s, &Site::ORIGIN, alpha_max, spec)?;
    summability_from_norms(&curve.values(), h.lattice().dim(), spec.gamma(), l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::c64;
    use crate::lattice::Lattice;
    use crate::operators::Pauli;

    fn model(n: usize, lambda: f64) -> ParamHamiltonian {
        ParamHamiltonian::perturbed_classical(Lattice::chain(n).unwrap(), lambda)
    }

    #[test]
    fn filter_of_hamiltonian_vanishes() {
        let h = model(4, 0.2);
        let d = h.full(0.5).unwrap();
        let b = EigenBasis::new(&d).unwrap();
        let f = b.filter(&d, &FilterSpec::new(0.8).unwrap().weight()).unwrap();
        assert!(f.op_norm().unwrap() < 1e-12);
    }

    #[test]
    fn filter_outside_support_is_resolvent() {
        let h = model(3, 0.3);
        let spec = FilterSpec::new(0.8).unwrap();
        let d = h.full(1.0).unwrap();
        let b = EigenBasis::new(&d).unwrap();
        let x0 = LocalOperator::single(Site::ORIGIN, Pauli::X).embed(b.window()).unwrap();
        let f = b.filter(&x0, &spec.weight()).unwrap();
        let u = b.vectors();
        let ft = u.adjoint() * f.matrix() * u;
        let mt = u.adjoint() * x0.matrix() * u;
        let e = b.values();
        for i in 0..e.len() {
            for j in 0..e.len() {
                let de = e[i] - e[j];
                if de.abs() >= spec.gamma() {
                    let want = mt[(i, j)] * c64::new(0.0, 1.0 / de);
                    assert!((ft[(i, j)] - want).norm() < 1e-12);
                }
            }
        }
        assert!(f.hermiticity_defect() < 1e-12);
        let bound = spec.weight().sup_norm() * x0.op_norm().unwrap();
        assert!(f.op_norm().unwrap() <= bound * (1.0 + 1e-9));
    }

    #[test]
    fn vanishing_perturbation_gives_zero_terms() {
        let h = model(6, 0.0);
        let spec = FilterSpec::new(1.0).unwrap();
        let c = shell_decay_curve(&h, 0.5, &Site::ORIGIN, 2, &spec).unwrap();
        assert!(c.values().iter().all(|v| *v == 0.0));
        let k = assemble_truncated_generator(&h, 0.5, 1, 1, &spec, &Site::ORIGIN).unwrap();
        assert!(k.operator.op_norm().unwrap() == 0.0);
    }

    #[test]
    fn shell_terms_match_single_evaluations() {
        let h = model(6, 0.2);
        let spec = FilterSpec::new(0.9).unwrap();
        let all = shell_terms(&h, 0.7, &Site::new_1d(2), 2, &spec).unwrap();
        for k in &all {
            let one = shell_term(&h, 0.7, &Site::new_1d(2), k.alpha, &spec).unwrap();
            assert!(one.operator.max_abs_diff(&k.operator).unwrap() < 1e-14);
            assert_eq!(k.operator.window(), &h.window(&h.lattice().ball(&Site::new_1d(2), k.alpha).unwrap()).unwrap());
        }
    }

    #[test]
    fn shell_terms_are_hermitian_and_telescope() {
        let h = model(6, 0.2);
        let spec = FilterSpec::new(0.9).unwrap();
        let terms = shell_terms(&h, 1.0, &Site::ORIGIN, 5, &spec).unwrap();
        let all = h.lattice().sites();
        let mut total = DenseOperator::zeros(&all).unwrap();
        for k in &terms {
            assert!(k.operator.hermiticity_defect() < 1e-10);
            total = total.add(&k.operator.embed_into(&all).unwrap()).unwrap();
        }
        let basis = EigenBasis::new(&h.full(1.0).unwrap()).unwrap();
        let direct = basis.filter_local(&h.hprime_term(&Site::ORIGIN).unwrap(), &spec.weight()).unwrap();
        assert!(total.distance(&direct).unwrap() < 1e-9);
    }

    #[test]
    fn shell_terms_are_translation_covariant() {
        let h = model(6, 0.25);
        let l = *h.lattice();
        let spec = FilterSpec::new(0.9).unwrap();
        for alpha in 0..3 {
            let at0 = shell_term(&h, 0.6, &Site::ORIGIN, alpha, &spec).unwrap();
            for j in 1..6 {
                let v = Site::new_1d(j);
                let atj = shell_term(&h, 0.6, &v, alpha, &spec).unwrap();
                let moved = at0.operator.translate(&l, &v).unwrap();
                assert!(moved.max_abs_diff(&atj.operator).unwrap() < 1e-10);
            }
        }
    }

    #[test]
    fn full_window_truncation_is_exact() {
        let h = model(6, 0.2);
        let spec = FilterSpec::new(0.9).unwrap();
        let k = assemble_truncated_generator(&h, 0.4, 3, 3, &spec, &Site::ORIGIN).unwrap();
        let full = full_generator(&h, 0.4, &spec).unwrap();
        assert!(k.operator.distance(&full).unwrap() < 1e-10);
        assert!(k.operator.hermiticity_defect() < 1e-10);
    }

    #[test]
    fn layout_groups_centers_with_equal_regions() {
        let h = model(6, 0.2);
        let full = GeneratorLayout::new(&h, 3, 3, &Site::ORIGIN).unwrap();
        assert_eq!(full.num_groups(), 1);
        let local = GeneratorLayout::new(&h, 1, 1, &Site::ORIGIN).unwrap();
        assert_eq!(local.num_groups(), 3);
        assert_eq!(local.window.len(), 6);
    }

    #[test]
    fn filter_matches_time_domain_oracle_on_two_sites() {
        // F(M) = ∫ χ(t) ∫_0^t e^{iuH} M e^{-iuH} du dt, with the inner integral done
        // in closed form per matrix element and the outer by the time rule.
        let h = model(2, 0.2);
        let spec = FilterSpec::new(0.8).unwrap();
        let d = h.full(1.0).unwrap();
        let b = EigenBasis::new(&d).unwrap();
        let x0 = LocalOperator::single(Site::ORIGIN, Pauli::X).embed(b.window()).unwrap();
        let spectral = b.filter(&x0, &spec.weight()).unwrap();
        let e = b.values();
        let spread = e[e.len() - 1] - e[0];
        let q = spec.time_quadrature(spread).unwrap();
        let u = b.vectors();
        let mt = u.adjoint() * x0.matrix() * u;
        let n = e.len();
        let ft = Mat::from_fn(n, n, |i, j| {
            let om = e[i] - e[j];
            let kernel = q.integrate_chi(|t| {
                if om == 0.0 {
                    c64::new(t, 0.0)
                } else {
                    (c64::new(0.0, om * t).exp() - 1.0) / c64::new(0.0, om)
                }
            });
            kernel * mt[(i, j)]
        });
        let timed = DenseOperator::new(b.window().clone(), u * &ft * u.adjoint()).unwrap();
        assert!(timed.max_abs_diff(&spectral).unwrap() < 1e-7);
    }

    #[test]
    fn summability_bookkeeping() {
        let norms = [0.1, 0.05, 0.004, 0.0004, 0.00002];
        let r = summability_from_norms(&norms, 1, 0.9, 8).unwrap();
        assert_eq!(r.weights[0], 2.0);
        assert_eq!(r.weights[1], 100.0);
        assert!((r.sum - r.partial_sums[4]).abs() < 1e-15);
        let bound_ok = (1..5).all(|a| norms[a] <= r.c_l / (0.9f64.powi(8) * (a as f64).powi(7)) * (1.0 + 1e-12));
        assert!(bound_ok);
        assert!(summability_from_norms(&norms, 1, 0.9, 7).is_err());
        let zero = summability_from_norms(&[0.0; 5], 1, 0.9, 8).unwrap();
        assert!(zero.converged && zero.sum == 0.0);
    }

    #[test]
    fn decay_curve_requires_increasing_abscissa() {
        assert!(DecayCurve::new(Abscissa::Alpha, vec![(1.0, 1.0), (1.0, 0.5)]).is_err());
        let mut c = DecayCurve::new(Abscissa::Alpha, vec![(1.0, 1.0), (2.0, 0.125), (4.0, 1.0 / 64.0)]).unwrap();
        let f = c.fit_power_law_tail(1.0).unwrap();
        assert!((f.exponent + 3.0).abs() < 1e-12);
        assert!(c.is_nonincreasing_from(1.0));
        assert!(c.to_csv(&[("n", "4".into())]).contains("x,value,envelope_fit\n1,1,"));
    }

    #[test]
    fn window_cap_applies_to_generators() {
        let h = ParamHamiltonian::perturbed_classical(Lattice::square(4).unwrap(), 0.1);
        let r = GeneratorLayout::new(&h, 1, 1, &Site::ORIGIN);
        assert!(matches!(r, Err(Error::WindowCap { .. })));
    }
}
