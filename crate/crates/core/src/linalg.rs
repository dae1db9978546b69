//! Dense complex linear algebra on top of `faer`.
//!
//! Everything here runs sequentially (faer is built without rayon), so
//! results do not depend on thread scheduling.

use faer::{Mat, MatRef, Side};

use crate::{c64, Error, Result};

pub type CMat = Mat<c64>;

pub const ZERO: c64 = c64 { re: 0.0, im: 0.0 };
pub const ONE: c64 = c64 { re: 1.0, im: 0.0 };
pub const I: c64 = c64 { re: 0.0, im: 1.0 };

fn is_real(m: MatRef<'_, c64>) -> bool {
    (0..m.ncols()).all(|j| (0..m.nrows()).all(|i| m[(i, j)].im == 0.0))
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
///
/// Real symmetric inputs take the real solver and are promoted afterwards.
pub fn hermitian_eigen(m: MatRef<'_, c64>) -> Result<(Vec<f64>, CMat)> {
    let n = m.nrows();
    if is_real(m) {
        let re = Mat::<f64>::from_fn(n, n, |i, j| m[(i, j)].re);
        let evd = re.self_adjoint_eigen(Side::Lower).map_err(|_| Error::Eigen)?;
        let vals = (0..n).map(|k| evd.S()[k]).collect();
        let u = evd.U();
        let vecs = Mat::from_fn(n, n, |i, j| c64::new(u[(i, j)], 0.0));
        Ok((vals, vecs))
    } else {
        let evd = m.self_adjoint_eigen(Side::Lower).map_err(|_| Error::Eigen)?;
        let vals = (0..n).map(|k| evd.S()[k].re).collect();
        Ok((vals, evd.U().to_owned()))
    }
}

pub fn hermitian_eigenvalues(m: MatRef<'_, c64>) -> Result<Vec<f64>> {
    let n = m.nrows();
    if is_real(m) {
        let re = Mat::<f64>::from_fn(n, n, |i, j| m[(i, j)].re);
        re.self_adjoint_eigenvalues(Side::Lower).map_err(|_| Error::Eigen)
    } else {
        m.self_adjoint_eigenvalues(Side::Lower).map_err(|_| Error::Eigen)
    }
}

/// Largest `|a_ij - conj(a_ji)|`.
pub fn hermiticity_defect(m: MatRef<'_, c64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in 0..=j {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Operator norm (largest singular value) from the spectrum of `A†A`.
pub fn op_norm(m: MatRef<'_, c64>) -> Result<f64> {
    if m.nrows() == 0 {
        return Ok(0.0);
    }
    let gram = m.adjoint() * m;
    let gram = symmetrize(gram.as_ref());
    let top = hermitian_eigenvalues(gram.as_ref())?.into_iter().fold(0.0f64, f64::max);
    Ok(top.max(0.0).sqrt())
}

/// Largest `|λ|` of a Hermitian matrix.
pub fn hermitian_norm(m: MatRef<'_, c64>) -> Result<f64> {
    let vals = hermitian_eigenvalues(m)?;
    Ok(vals.iter().fold(0.0f64, |a, v| a.max(v.abs())))
}

/// `(A + A†) / 2`.
pub fn symmetrize(m: MatRef<'_, c64>) -> CMat {
    let n = m.nrows();
    Mat::from_fn(n, n, |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5)
}

pub fn identity(n: usize) -> CMat {
    Mat::from_fn(n, n, |i, j| if i == j { ONE } else { ZERO })
}

/// Largest absolute entry of `a - b`.
pub fn max_abs_diff(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            worst = worst.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    worst
}

/// `U diag(f(λ)) U†` for a Hermitian input with eigenpairs `(λ, U)`.
pub fn spectral_apply(vals: &[f64], vecs: MatRef<'_, c64>, f: impl Fn(f64) -> c64) -> CMat {
    let n = vals.len();
    let d: Vec<c64> = vals.iter().map(|&v| f(v)).collect();
    let scaled = Mat::from_fn(n, n, |i, j| vecs[(i, j)] * d[j]);
    &scaled * vecs.adjoint()
}

/// `‖V†V − 𝟙‖`.
pub fn unitarity_defect(v: MatRef<'_, c64>) -> Result<f64> {
    let n = v.ncols();
    let mut g = v.adjoint() * v;
    for k in 0..n {
        g[(k, k)] -= ONE;
    }
    hermitian_norm(symmetrize(g.as_ref()).as_ref())
}

/// Nearest unitary `V (V†V)^{-1/2}`.
pub fn polar_unitary(v: MatRef<'_, c64>) -> Result<CMat> {
    let g = symmetrize((v.adjoint() * v).as_ref());
    let (vals, vecs) = hermitian_eigen(g.as_ref())?;
    if vals.iter().any(|&x| x <= 0.0) {
        return Err(Error::Integration("propagator became singular".into()));
    }
    let inv_sqrt = spectral_apply(&vals, vecs.as_ref(), |x| c64::new(1.0 / x.sqrt(), 0.0));
    Ok(v * &inv_sqrt)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_hermitian(n: usize, seed: u64) -> CMat {
        let mut state = seed;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let a = Mat::from_fn(n, n, |_, _| c64::new(next(), next()));
        symmetrize(a.as_ref())
    }

    #[test]
    fn singular_value_and_eigenvalue_norms_agree() {
        for seed in 0..4 {
            let h = random_hermitian(64, seed);
            let a = op_norm(h.as_ref()).unwrap();
            let b = hermitian_norm(h.as_ref()).unwrap();
            assert!((a - b).abs() <= 1e-10 * b, "{a} vs {b}");
        }
    }

    #[test]
    fn eigen_reconstructs_input() {
        let h = random_hermitian(16, 7);
        let (vals, vecs) = hermitian_eigen(h.as_ref()).unwrap();
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        let back = spectral_apply(&vals, vecs.as_ref(), |x| c64::new(x, 0.0));
        assert!(max_abs_diff(back.as_ref(), h.as_ref()) < 1e-12);
    }

    #[test]
    fn polar_projection_restores_unitarity() {
        let h = random_hermitian(8, 3);
        let (vals, vecs) = hermitian_eigen(h.as_ref()).unwrap();
        let u = spectral_apply(&vals, vecs.as_ref(), |x| c64::new(x.cos(), x.sin()));
        let mut bent = u.clone();
        bent[(0, 0)] += c64::new(1e-7, 0.0);
        assert!(unitarity_defect(bent.as_ref()).unwrap() > 1e-8);
        let fixed = polar_unitary(bent.as_ref()).unwrap();
        assert!(unitarity_defect(fixed.as_ref()).unwrap() < 1e-13);
        assert!(max_abs_diff(fixed.as_ref(), u.as_ref()) < 1e-6);
    }
}
