//! Least-squares fits used for decay envelopes and light-cone parameters.

use crate::{Error, Result};

/// `y ≈ intercept + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual.
    pub rms: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidInput("linear fit needs at least two paired points".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidInput("linear fit needs distinct abscissae".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rms = (xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum::<f64>() / n).sqrt();
    Ok(LinearFit { slope, intercept, rms })
}

/// `y ≈ prefactor · x^exponent`, fitted in log-log space. `rms` is in natural
/// log units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub prefactor: f64,
    pub rms: f64,
}

pub fn power_law_fit(xs: &[f64], ys: &[f64]) -> Result<PowerLawFit> {
    if xs.iter().chain(ys).any(|v| *v <= 0.0) {
        return Err(Error::InvalidInput("power-law fit needs positive data".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let f = linear_fit(&lx, &ly)?;
    Ok(PowerLawFit { exponent: f.slope, prefactor: f.intercept.exp(), rms: f.rms })
}

/// `y ≈ prefactor · exp(rate·x)`, fitted in log space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentialFit {
    pub rate: f64,
    pub prefactor: f64,
    pub rms: f64,
}

pub fn exponential_fit(xs: &[f64], ys: &[f64]) -> Result<ExponentialFit> {
    if ys.iter().any(|v| *v <= 0.0) {
        return Err(Error::InvalidInput("exponential fit needs positive data".into()));
    }
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let f = linear_fit(xs, &ly)?;
    Ok(ExponentialFit { rate: f.slope, prefactor: f.intercept.exp(), rms: f.rms })
}

/// `z ≈ c + a·x + b·y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneFit {
    pub c: f64,
    pub a: f64,
    pub b: f64,
    pub rms: f64,
}

/// Ordinary least squares for a plane through `(x, y, z)` samples.
pub fn plane_fit(points: &[(f64, f64, f64)]) -> Result<PlaneFit> {
    if points.len() < 3 {
        return Err(Error::InvalidInput("plane fit needs at least three points".into()));
    }
    let n = points.len() as f64;
    let mean = |f: fn(&(f64, f64, f64)) -> f64| points.iter().map(f).sum::<f64>() / n;
    let (mx, my, mz) = (mean(|p| p.0), mean(|p| p.1), mean(|p| p.2));
    let (mut sxx, mut sxy, mut syy, mut sxz, mut syz) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (x, y, z) in points {
        let (dx, dy, dz) = (x - mx, y - my, z - mz);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
        sxz += dx * dz;
        syz += dy * dz;
    }
    let det = sxx * syy - sxy * sxy;
    if det.abs() <= 1e-12 * (sxx * syy).max(f64::MIN_POSITIVE) {
        return Err(Error::InvalidInput("plane fit abscissae are collinear".into()));
    }
    let a = (sxz * syy - syz * sxy) / det;
    let b = (syz * sxx - sxz * sxy) / det;
    let c = mz - a * mx - b * my;
    let rms = (points.iter().map(|(x, y, z)| (z - c - a * x - b * y).powi(2)).sum::<f64>() / n).sqrt();
    Ok(PlaneFit { c, a, b, rms })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_line() {
        let xs = [0.0, 1.0, 2.0, 5.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 0.5 * x).collect();
        let f = linear_fit(&xs, &ys).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-14 && (f.intercept - 3.0).abs() < 1e-14 && f.rms < 1e-14);
    }

    #[test]
    fn recovers_power_law_and_exponential() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 0.7 * x.powf(-3.5)).collect();
        let p = power_law_fit(&xs, &ys).unwrap();
        assert!((p.exponent + 3.5).abs() < 1e-12 && (p.prefactor - 0.7).abs() < 1e-12);
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 2.0 * (-1.2 * x).exp()).collect();
        let e = exponential_fit(&xs, &ys).unwrap();
        assert!((e.rate + 1.2).abs() < 1e-12 && (e.prefactor - 2.0).abs() < 1e-12);
        assert!(power_law_fit(&xs, &[1.0, 0.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn recovers_plane_and_rejects_degenerate_input() {
        let pts: Vec<(f64, f64, f64)> = (0..4)
            .flat_map(|i| (0..3).map(move |j| (i as f64, j as f64 * 0.5, 1.0 - 2.0 * i as f64 + 0.75 * j as f64 * 0.5)))
            .collect();
        let f = plane_fit(&pts).unwrap();
        assert!((f.a + 2.0).abs() < 1e-12 && (f.b - 0.75).abs() < 1e-12 && (f.c - 1.0).abs() < 1e-12);
        let line = [(0.0, 0.0, 1.0), (1.0, 1.0, 2.0), (2.0, 2.0, 3.0)];
        assert!(plane_fit(&line).is_err());
    }
}
