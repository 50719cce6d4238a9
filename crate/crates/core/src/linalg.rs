//! Small dense complex kernels used throughout the simulator.
//!
//! Matrices are tiny (N antennas per AP, typically 1 to 8), so everything goes
//! through `nalgebra` dynamic matrices plus a few allocation-free helpers used
//! by the Monte Carlo loops.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// tr(A·B) without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> C64 {
    debug_assert_eq!(a.ncols(), b.nrows());
    debug_assert_eq!(a.nrows(), b.ncols());
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

pub fn real_trace(a: &CMatrix) -> f64 {
    a.diagonal().iter().map(|z| z.re).sum()
}

/// Largest entrywise deviation from Hermitian symmetry.
pub fn hermitian_defect(a: &CMatrix) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Average of A and A^H.
pub fn symmetrize(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()) * C64::new(0.5, 0.0)
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(a: &CMatrix) -> Vec<f64> {
    let mut ev: Vec<f64> = symmetrize(a).symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|x, y| x.total_cmp(y));
    ev
}

/// Principal square root of a Hermitian PSD matrix.
///
/// Negative eigenvalues no larger in magnitude than `clip_tol` are treated as
/// roundoff and clipped to zero; anything more negative is an error.
pub fn psd_sqrt(a: &CMatrix, clip_tol: f64) -> Result<CMatrix> {
    let n = a.nrows();
    if n == 0 {
        return Ok(a.clone());
    }
    let eig = symmetrize(a).symmetric_eigen();
    let mut scaled = eig.eigenvectors.clone();
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda < -clip_tol {
            return Err(Error::numerical(format!(
                "matrix is not positive semidefinite (eigenvalue {lambda:e}, tolerance {clip_tol:e})"
            )));
        }
        let s = lambda.max(0.0).sqrt();
        for i in 0..n {
            scaled[(i, j)] *= s;
        }
    }
    Ok(&scaled * eig.eigenvectors.adjoint())
}

/// Inverse of a Hermitian positive definite matrix.
pub fn hpd_inverse(a: &CMatrix) -> Result<CMatrix> {
    symmetrize(a)
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::numerical("matrix is not Hermitian positive definite"))
}

/// Draws a standard circularly-symmetric complex Gaussian, CN(0, 1).
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// out = A·x for a square A stored column-major.
pub fn mat_vec_into(a: &CMatrix, x: &[C64], out: &mut [C64]) {
    let n = a.nrows();
    out[..n].iter_mut().for_each(|o| *o = C64::new(0.0, 0.0));
    for (j, &xj) in x.iter().enumerate().take(a.ncols()) {
        let col = a.column(j);
        for i in 0..n {
            out[i] += col[i] * xj;
        }
    }
}

/// x^H·y
pub fn inner(x: &[C64], y: &[C64]) -> C64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

/// Relative Frobenius distance ‖a − b‖ / ‖b‖.
pub fn frobenius_rel(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).norm() / b.norm()
}
