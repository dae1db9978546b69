//! The smooth spectral filter `χ̂_γ`, its time-domain transform `χ_γ` and the
//! frequency weight `w(ω)` that realizes the filter map.
//!
//! Fourier convention: `χ̂(ω) = ∫ χ(t) e^{iωt} dt`, so that
//! `χ(t) = (1/2π) ∫ χ̂(ω) e^{-iωt} dω` and `∫ χ = χ̂(0) = 1`.
//!
//! `χ̂_γ` is exactly 1 on `[-γ/3, γ/3]`, exactly 0 for `|ω| ≥ γ`, and on each
//! transition band equals `1 - S(x)` where `x ∈ [-1, 1]` is the band coordinate
//! and `S` is the normalized integral of the mollifier `exp(-1/(1-x²))`. `S` is
//! built antisymmetric about the band centre, so `χ̂_γ(2γ/3) = 1/2` exactly.

use std::f64::consts::PI;

use crate::c64;
use crate::quadrature::GaussLegendre;
use crate::{Error, Result};

/// Tolerance of the node-doubling certificate for `χ(t)`.
pub const CHI_TIME_TOL: f64 = 1e-10;

fn mollifier(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - x * x)).exp()
    }
}

/// Filter parameters and the quadrature rules derived from them.
#[derive(Debug, Clone)]
pub struct FilterSpec {
    gamma: f64,
    mollifier_nodes: usize,
    time_nodes: usize,
    t_max_factor: f64,
    rule: GaussLegendre,
    time_rule: GaussLegendre,
    norm: f64,
}

impl FilterSpec {
    pub const DEFAULT_MOLLIFIER_NODES: usize = 64;
    pub const DEFAULT_TIME_NODES: usize = 16;
    pub const DEFAULT_T_MAX_FACTOR: f64 = 500.0;

    pub fn new(gamma: f64) -> Result<Self> {
        Self::with_quadrature(
            gamma,
            Self::DEFAULT_MOLLIFIER_NODES,
            Self::DEFAULT_TIME_NODES,
            Self::DEFAULT_T_MAX_FACTOR,
        )
    }

    /// `time_nodes` is the Gauss-Legendre order per time panel and
    /// `t_max_factor` sets the truncation time `T_max = t_max_factor / γ`.
    pub fn with_quadrature(gamma: f64, mollifier_nodes: usize, time_nodes: usize, t_max_factor: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::InvalidInput(format!("filter cutoff must be positive, got {gamma}")));
        }
        if mollifier_nodes < 2 || time_nodes < 2 {
            return Err(Error::InvalidInput("quadrature node counts must be at least 2".into()));
        }
        if !(t_max_factor.is_finite() && t_max_factor > 0.0) {
            return Err(Error::InvalidInput(format!("truncation factor must be positive, got {t_max_factor}")));
        }
        let rule = GaussLegendre::new(mollifier_nodes);
        let half = rule.integrate(-1.0, 0.0, mollifier);
        Ok(Self {
            gamma,
            mollifier_nodes,
            time_nodes,
            t_max_factor,
            rule,
            time_rule: GaussLegendre::new(time_nodes),
            norm: 2.0 * half,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn mollifier_nodes(&self) -> usize {
        self.mollifier_nodes
    }

    pub fn time_nodes(&self) -> usize {
        self.time_nodes
    }

    pub fn t_max(&self) -> f64 {
        self.t_max_factor / self.gamma
    }

    pub fn t_max_factor(&self) -> f64 {
        self.t_max_factor
    }

    /// The same filter at a different cutoff.
    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::with_quadrature(gamma, self.mollifier_nodes, self.time_nodes, self.t_max_factor)
    }

    /// Errors unless `γ < gap`.
    pub fn check_below_gap(&self, gap: f64) -> Result<()> {
        if self.gamma < gap {
            Ok(())
        } else {
            Err(Error::FilterCutoff { gamma: self.gamma, gap })
        }
    }

    /// Normalization of the mollifier integral over `[-1, 1]`.
    pub fn mollifier_norm(&self) -> f64 {
        self.norm
    }

    /// Smooth step `S(x)`: 0 at `x = -1`, 1/2 at 0, 1 at `x = 1`.
    fn step(&self, x: f64) -> f64 {
        if x <= -1.0 {
            0.0
        } else if x >= 1.0 {
            1.0
        } else if x <= 0.0 {
            self.rule.integrate(-1.0, x, mollifier) / self.norm
        } else {
            1.0 - self.step(-x)
        }
    }

    fn band_coordinate(&self, a: f64) -> f64 {
        (a - 2.0 * self.gamma / 3.0) / (self.gamma / 3.0)
    }

    pub fn chi_hat(&self, omega: f64) -> f64 {
        let a = omega.abs();
        if a <= self.gamma / 3.0 {
            1.0
        } else if a >= self.gamma {
            0.0
        } else {
            1.0 - self.step(self.band_coordinate(a))
        }
    }

    /// `dχ̂/dω` in closed form.
    pub fn chi_hat_derivative(&self, omega: f64) -> f64 {
        let a = omega.abs();
        if a <= self.gamma / 3.0 || a >= self.gamma {
            return 0.0;
        }
        let rho = mollifier(self.band_coordinate(a)) / (self.norm * self.gamma / 3.0);
        -rho * omega.signum()
    }

    /// Largest `|d^j χ̂/dω^j|` on a dense grid, by central finite differences.
    pub fn chi_hat_derivative_bound(&self, j: usize) -> Result<f64> {
        if j > 6 {
            return Err(Error::InvalidInput(format!("derivative order {j} exceeds 6")));
        }
        if j == 0 {
            return Ok(1.0);
        }
        let h = self.gamma / 200.0;
        let points = 4000;
        let mut worst = 0.0f64;
        for k in 0..=points {
            let omega = self.gamma * 1.1 * k as f64 / points as f64;
            worst = worst.max(central_difference(|x| self.chi_hat(x), omega, h, j).abs());
        }
        Ok(worst)
    }

    /// `χ(t)` with the given number of panels on the band integral.
    fn chi_time_panels(&self, t: f64, panels: usize) -> f64 {
        let g = self.gamma;
        let base = 1.0 / (PI * self.norm);
        if t == 0.0 {
            return base * self.norm * 2.0 * g / 3.0;
        }
        let f = |x: f64| mollifier(x) * ((2.0 * g / 3.0 + x * g / 3.0) * t).sin();
        base * self.time_rule.composite(-1.0, 1.0, panels, f) / t
    }

    fn panels_for(&self, t: f64) -> usize {
        let phase = t.abs() * self.gamma * 2.0 / 3.0;
        16 + (phase / (PI / 2.0)).ceil() as usize
    }

    /// `χ_γ(t)`, certified by doubling the panel count.
    pub fn chi_time(&self, t: f64) -> Result<f64> {
        let t = t.abs();
        let p = self.panels_for(t);
        let a = self.chi_time_panels(t, p);
        let b = self.chi_time_panels(t, 2 * p);
        if (a - b).abs() > CHI_TIME_TOL {
            return Err(Error::Quadrature(format!("chi({t}) changed by {:e} under node doubling", (a - b).abs())));
        }
        Ok(b)
    }

    /// `χ_γ(t)` without the doubling certificate.
    pub fn chi_time_fast(&self, t: f64) -> f64 {
        let t = t.abs();
        self.chi_time_panels(t, self.panels_for(t))
    }

    /// `w(ω) = (χ̂(ω) - 1)/(iω) = i(1 - χ̂(ω))/ω`, with `w(0) = 0`.
    pub fn spectral_weight(&self, omega: f64) -> c64 {
        if omega.abs() <= self.gamma / 3.0 {
            return c64::new(0.0, 0.0);
        }
        c64::new(0.0, (1.0 - self.chi_hat(omega)) / omega)
    }

    pub fn weight(&self) -> SpectralWeight {
        SpectralWeight { spec: self.clone() }
    }

    /// Symmetric time rule on `[-T_max, T_max]` resolving integrands that
    /// oscillate at frequencies up to `omega_max`.
    pub fn time_quadrature(&self, omega_max: f64) -> Result<TimeQuadrature> {
        TimeQuadrature::new(self, omega_max, 1)
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `j`-th central difference of `f` at `x` with step `h`.
pub fn central_difference(f: impl Fn(f64) -> f64, x: f64, h: f64, j: usize) -> f64 {
    let mut acc = 0.0;
    for k in 0..=j {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * binomial(j, k) * f(x + (j as f64 / 2.0 - k as f64) * h);
    }
    acc / h.powi(j as i32)
}

/// The frequency weight that realizes the filter map:
/// `F(M)_{mn} = w(E_m - E_n) M_{mn}` in an eigenbasis of `H`.
#[derive(Debug, Clone)]
pub struct SpectralWeight {
    spec: FilterSpec,
}

impl SpectralWeight {
    pub fn spec(&self) -> &FilterSpec {
        &self.spec
    }

    pub fn eval(&self, omega: f64) -> c64 {
        self.spec.spectral_weight(omega)
    }

    /// `sup |w|`, attained inside the transition band and at most `3/γ`.
    pub fn sup_norm(&self) -> f64 {
        let g = self.spec.gamma;
        (0..=2000)
            .map(|k| g / 3.0 + (2.0 * g / 3.0) * k as f64 / 2000.0)
            .map(|w| self.eval(w).norm())
            .fold(0.0, f64::max)
    }
}

/// Composite Gauss-Legendre nodes on `[0, T_max]` with tabulated `χ(t)`.
/// Integrals over `[-T_max, T_max]` are formed by pairing `t` with `-t`.
#[derive(Debug, Clone)]
pub struct TimeQuadrature {
    nodes: Vec<(f64, f64)>,
    chi: Vec<f64>,
    t_max: f64,
    omega_max: f64,
}

impl TimeQuadrature {
    fn new(spec: &FilterSpec, omega_max: f64, refine: usize) -> Result<Self> {
        let t_max = spec.t_max();
        let top = omega_max.abs() + spec.gamma;
        let width = PI / top;
        let panels = refine * ((t_max / width).ceil() as usize).max(1);
        let nodes = spec.time_rule.composite_rule(0.0, t_max, panels);
        let chi = nodes.iter().map(|(t, _)| spec.chi_time_fast(*t)).collect();
        Ok(Self { nodes, chi, t_max, omega_max: omega_max.abs() })
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    /// Largest frequency the rule resolves.
    pub fn omega_max(&self) -> f64 {
        self.omega_max
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `∫ χ(t) g(t) dt` over `[-T_max, T_max]`.
    pub fn integrate_chi(&self, g: impl Fn(f64) -> c64) -> c64 {
        let mut acc = c64::new(0.0, 0.0);
        for ((t, w), chi) in self.nodes.iter().zip(&self.chi) {
            acc += (g(*t) + g(-*t)) * (w * chi);
        }
        acc
    }

    /// `∫ χ(t) e^{iωt} dt`, the quadrature image of `χ̂(ω)`.
    pub fn chi_hat(&self, omega: f64) -> f64 {
        self.nodes.iter().zip(&self.chi).map(|((t, w), chi)| 2.0 * w * chi * (omega * t).cos()).sum()
    }

    /// `∫ χ(t) (e^{iωt} - 1)/(iω) dt`, the quadrature image of `w(ω)`.
    pub fn spectral_weight(&self, omega: f64) -> c64 {
        if omega == 0.0 {
            return c64::new(0.0, 0.0);
        }
        let im: f64 =
            self.nodes.iter().zip(&self.chi).map(|((t, w), chi)| 2.0 * w * chi * (1.0 - (omega * t).cos())).sum();
        c64::new(0.0, im / omega)
    }

    /// `∫ |χ(t)|² dt`.
    pub fn chi_squared_integral(&self) -> f64 {
        self.nodes.iter().zip(&self.chi).map(|((_, w), chi)| 2.0 * w * chi * chi).sum()
    }
}

/// Decay constants `C_j = max_t |χ_1(t)| t^j` on `t ∈ [t_lo, t_hi]` at `γ = 1`.
pub fn fit_decay_constants(spec: &FilterSpec, orders: &[u32], t_lo: f64, t_hi: f64, points: usize) -> Result<Vec<f64>> {
    let unit = spec.with_gamma(1.0)?;
    let grid = log_grid(t_lo, t_hi, points);
    let values: Vec<f64> = grid.iter().map(|&t| unit.chi_time(t)).collect::<Result<_>>()?;
    Ok(orders
        .iter()
        .map(|&j| grid.iter().zip(&values).map(|(t, v)| v.abs() * t.powi(j as i32)).fold(0.0, f64::max))
        .collect())
}

/// Largest ratio `|χ_γ(t)| / (C_j γ^{1-j} t^{-j})` over `t ∈ [t_lo/γ, t_hi/γ]`.
/// A value at most 1 means the envelope holds on the grid.
pub fn decay_envelope_ratio(spec: &FilterSpec, j: u32, c_j: f64, t_lo: f64, t_hi: f64, points: usize) -> Result<f64> {
    let g = spec.gamma();
    let mut worst = 0.0f64;
    for t in log_grid(t_lo / g, t_hi / g, points) {
        let bound = c_j / (g.powi(j as i32 - 1) * t.powi(j as i32));
        worst = worst.max(spec.chi_time(t)?.abs() / bound);
    }
    Ok(worst)
}

/// Logarithmically spaced points from `a` to `b` inclusive.
pub fn log_grid(a: f64, b: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![a];
    }
    let (la, lb) = (a.ln(), b.ln());
    (0..points).map(|k| (la + (lb - la) * k as f64 / (points - 1) as f64).exp()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(g: f64) -> FilterSpec {
        FilterSpec::new(g).unwrap()
    }

    /// Adaptive Simpson integration, independent of the Gauss-Legendre path.
    fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        #[allow(clippy::too_many_arguments)]
        fn rec(
            f: &dyn Fn(f64) -> f64,
            a: f64,
            b: f64,
            fa: f64,
            fm: f64,
            fb: f64,
            whole: f64,
            tol: f64,
            depth: u32,
        ) -> f64 {
            let m = 0.5 * (a + b);
            let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
            let (flm, frm) = (f(lm), f(rm));
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                left + right + (left + right - whole) / 15.0
            } else {
                rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                    + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
            }
        }
        let m = 0.5 * (a + b);
        let (fa, fm, fb) = (f(a), f(m), f(b));
        rec(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 50)
    }

    #[test]
    fn mollifier_norm_matches_adaptive_oracle() {
        let z = adaptive_simpson(&mollifier, -1.0, 1.0, 1e-15);
        assert!((spec(1.0).mollifier_norm() - z).abs() < 1e-13);
        assert!((z - 0.443_993_816_168_078_65).abs() < 1e-13);
    }

    #[test]
    fn chi_hat_examples() {
        for g in [0.5, 1.0, 2.0] {
            let f = spec(g);
            assert_eq!(f.chi_hat(0.0), 1.0);
            assert_eq!(f.chi_hat(g), 0.0);
            assert_eq!(f.chi_hat(-g), 0.0);
            assert_eq!(f.chi_hat(2.0 * g / 3.0), 0.5);
        }
    }

    #[test]
    fn chi_hat_band_matches_adaptive_oracle() {
        let f = spec(1.0);
        let z = adaptive_simpson(&mollifier, -1.0, 1.0, 1e-15);
        for omega in [0.4, 0.5, 0.6, 0.75, 0.9, 0.99] {
            let x = (omega - 2.0 / 3.0) * 3.0;
            let want = 1.0 - adaptive_simpson(&mollifier, -1.0, x, 1e-15) / z;
            assert!((f.chi_hat(omega) - want).abs() < 1e-12, "{omega}");
        }
        let half = f.chi_hat(0.5);
        assert!(half > 0.5 && half < 1.0);
    }

    #[test]
    fn chi_hat_is_exact_on_plateau_and_outside_support() {
        for g in [0.3, 1.0, 3.0] {
            let f = spec(g);
            for k in 0..=1000 {
                let w = g / 3.0 * k as f64 / 1000.0;
                assert_eq!(f.chi_hat(w), 1.0);
                assert_eq!(f.chi_hat(-w), 1.0);
                let out = g * (1.0 + 3.0 * k as f64 / 1000.0);
                assert_eq!(f.chi_hat(out), 0.0);
                assert_eq!(f.chi_hat(-out), 0.0);
            }
        }
    }

    #[test]
    fn chi_hat_is_even_monotone_and_bounded() {
        let f = spec(1.3);
        let mut prev = 1.0;
        for k in 0..=3000 {
            let w = 1.4 * k as f64 / 3000.0;
            let v = f.chi_hat(w);
            assert_eq!(v, f.chi_hat(-w));
            assert!((0.0..=1.0).contains(&v));
            assert!(v <= prev + 1e-15, "not monotone at {w}");
            prev = v;
        }
    }

    #[test]
    fn mollifier_node_doubling_is_converged() {
        let a = spec(1.0);
        let b = FilterSpec::with_quadrature(1.0, 128, 16, 500.0).unwrap();
        for k in 0..=500 {
            let w = k as f64 / 500.0;
            assert!((a.chi_hat(w) - b.chi_hat(w)).abs() < 1e-12, "{w}");
        }
    }

    #[test]
    fn derivative_closed_form_matches_differences() {
        let f = spec(1.0);
        for w in [0.4, 0.55, 0.7, 0.85, -0.6] {
            let fd = central_difference(|x| f.chi_hat(x), w, 1e-5, 1);
            assert!((fd - f.chi_hat_derivative(w)).abs() < 1e-7, "{w}");
        }
    }

    #[test]
    fn derivative_bound_scaling() {
        assert_eq!(spec(1.0).chi_hat_derivative_bound(0).unwrap(), 1.0);
        for j in 1..=3 {
            let a = spec(1.0).chi_hat_derivative_bound(j).unwrap();
            let b = spec(2.0).chi_hat_derivative_bound(j).unwrap();
            let want = 2f64.powi(j as i32);
            assert!((a / b / want - 1.0).abs() < 0.1, "j={j}: {}", a / b);
        }
        assert!(spec(1.0).chi_hat_derivative_bound(7).is_err());
    }

    #[test]
    fn plateau_differences_vanish() {
        let f = spec(1.0);
        for j in 1..=6 {
            for w in [-0.2, 0.0, 0.1, 0.2] {
                assert!(central_difference(|x| f.chi_hat(x), w, 0.005, j).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn chi_time_at_zero_and_symmetry() {
        let f = spec(1.0);
        assert!((f.chi_time(0.0).unwrap() - 2.0 / (3.0 * PI)).abs() < 1e-15);
        for t in [0.3, 2.0, 17.0, 101.0] {
            assert_eq!(f.chi_time(t).unwrap(), f.chi_time(-t).unwrap());
        }
    }

    #[test]
    fn chi_time_matches_direct_fourier_oracle() {
        // (1/π) ∫_0^γ χ̂(ω) cos(ωt) dω by adaptive Simpson.
        let f = spec(1.0);
        for t in [0.0, 1.0, 4.0, 12.5] {
            let direct = adaptive_simpson(&|w| f.chi_hat(w) * (w * t).cos(), 0.0, 1.0, 1e-13) / PI;
            assert!((f.chi_time(t).unwrap() - direct).abs() < 1e-10, "t={t}");
        }
    }

    #[test]
    fn chi_integrates_to_one() {
        let f = spec(1.0);
        let q = f.time_quadrature(0.0).unwrap();
        let total = q.integrate_chi(|_| c64::new(1.0, 0.0));
        assert!((total.re - 1.0).abs() < 1e-8, "{}", total.re);
        assert_eq!(total.im, 0.0);
    }

    #[test]
    fn parseval() {
        let f = spec(1.0);
        let rule = GaussLegendre::new(32);
        let lhs = rule.composite(0.0, 1.0, 24, |w| f.chi_hat(w).powi(2)) / PI;
        let rhs = f.time_quadrature(0.0).unwrap().chi_squared_integral();
        assert!((lhs - rhs).abs() < 1e-6, "{lhs} {rhs}");
    }

    #[test]
    fn spectral_weight_examples() {
        let g = 0.8;
        let f = spec(g);
        assert_eq!(f.spectral_weight(0.0), c64::new(0.0, 0.0));
        let w = f.spectral_weight(2.0 * g);
        assert!((w - c64::new(0.0, 1.0 / (2.0 * g))).norm() < 1e-15);
        let q = f.time_quadrature(g).unwrap();
        let oracle = q.spectral_weight(g / 2.0);
        assert!((oracle - f.spectral_weight(g / 2.0)).norm() < 1e-8);
        let oracle = q.spectral_weight(0.7 * g);
        assert!((oracle - f.spectral_weight(0.7 * g)).norm() < 1e-8);
    }

    #[test]
    fn spectral_weight_is_odd_and_imaginary() {
        let f = spec(1.0);
        for k in 0..=2000 {
            let w = 3.0 * k as f64 / 2000.0;
            let a = f.spectral_weight(w);
            assert_eq!(a.re, 0.0);
            assert_eq!(a, -f.spectral_weight(-w));
            if w >= 1.0 {
                assert!((a - c64::new(0.0, 1.0 / w)).norm() < 1e-15);
            }
        }
        let sup = f.weight().sup_norm();
        assert!(sup > 0.0 && sup <= 3.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(FilterSpec::new(0.0).is_err());
        assert!(FilterSpec::new(f64::NAN).is_err());
        assert!(FilterSpec::with_quadrature(1.0, 1, 16, 500.0).is_err());
        assert!(matches!(spec(1.0).check_below_gap(1.0), Err(Error::FilterCutoff { .. })));
    }

    #[test]
    fn decay_envelopes_transfer_across_gamma() {
        let base = spec(1.0);
        let orders = [2, 3, 4, 5];
        let c = fit_decay_constants(&base, &orders, 5.0, 50.0, 200).unwrap();
        for g in [0.5, 2.0] {
            let f = spec(g);
            for (j, c_j) in orders.iter().zip(&c) {
                let r = decay_envelope_ratio(&f, *j, *c_j, 5.0, 50.0, 200).unwrap();
                assert!(r <= 1.0 + 1e-9, "gamma={g} j={j} ratio={r}");
            }
        }
    }
}
