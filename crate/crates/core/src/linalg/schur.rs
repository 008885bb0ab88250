//! Real Schur form and spectrum queries built on it.

use super::{DenseMatrix, HURWITZ_TOL_FACTOR};
use crate::error::{Error, Result};

/// Real Schur decomposition `A = U * T * U^T` with orthogonal `U` and
/// block upper triangular `T` (1x1 or 2x2 diagonal blocks).
#[derive(Debug, Clone)]
pub struct SchurForm {
    pub orthogonal: DenseMatrix,
    pub quasi_triangular: DenseMatrix,
}

const SCHUR_MAX_ITER: usize = 200_000;

/// Compute the real Schur form of a square matrix.
pub fn real_schur(a: &DenseMatrix) -> Result<SchurForm> {
    if !a.is_square() {
        return Err(Error::invalid(format!(
            "real Schur form requires a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let schur = nalgebra::linalg::Schur::try_new(a.to_na(), f64::EPSILON, SCHUR_MAX_ITER).ok_or(
        Error::NoConvergence {
            algorithm: "real Schur (Francis QR)",
            iterations: SCHUR_MAX_ITER,
        },
    )?;
    let (q, mut t) = schur.unpack();
    // Zero everything below the first subdiagonal so the quasi-triangular
    // structure is exact, and split the subdiagonal into blocks.
    let n = t.nrows();
    for i in 0..n {
        for j in 0..i.saturating_sub(1) {
            t[(i, j)] = 0.0;
        }
    }
    Ok(SchurForm {
        orthogonal: DenseMatrix::from_na(&q),
        quasi_triangular: DenseMatrix::from_na(&t),
    })
}

impl SchurForm {
    /// Diagonal block layout of `T`: `(start, size)` with size 1 or 2.
    pub fn blocks(&self) -> Vec<(usize, usize)> {
        let t = &self.quasi_triangular;
        let n = t.rows();
        let scale = t.frobenius_norm().max(1.0);
        let mut blocks = Vec::new();
        let mut i = 0;
        while i < n {
            if i + 1 < n && t[(i + 1, i)].abs() > f64::EPSILON * scale {
                blocks.push((i, 2));
                i += 2;
            } else {
                blocks.push((i, 1));
                i += 1;
            }
        }
        blocks
    }

    /// Eigenvalues as `(re, im)` pairs, read off the diagonal blocks.
    pub fn eigenvalues(&self) -> Vec<(f64, f64)> {
        let t = &self.quasi_triangular;
        let mut eigs = Vec::with_capacity(t.rows());
        for (start, size) in self.blocks() {
            if size == 1 {
                eigs.push((t[(start, start)], 0.0));
            } else {
                let a = t[(start, start)];
                let b = t[(start, start + 1)];
                let c = t[(start + 1, start)];
                let d = t[(start + 1, start + 1)];
                let mean = 0.5 * (a + d);
                let disc = 0.25 * (a - d) * (a - d) + b * c;
                if disc >= 0.0 {
                    let root = disc.sqrt();
                    eigs.push((mean + root, 0.0));
                    eigs.push((mean - root, 0.0));
                } else {
                    let im = (-disc).sqrt();
                    eigs.push((mean, im));
                    eigs.push((mean, -im));
                }
            }
        }
        eigs
    }

    pub fn spectral_abscissa(&self) -> f64 {
        self.eigenvalues()
            .iter()
            .fold(f64::NEG_INFINITY, |m, &(re, _)| m.max(re))
    }
}

/// Largest eigenvalue real part of a square matrix.
pub fn spectral_abscissa(a: &DenseMatrix) -> Result<f64> {
    Ok(real_schur(a)?.spectral_abscissa())
}

/// Hurwitz test against `alpha(A) < -tol_factor * ||A||_F`, reusing an
/// already-computed Schur form.
pub(crate) fn ensure_hurwitz_schur(schur: &SchurForm, a_fro: f64, tol_factor: f64) -> Result<()> {
    let abscissa = schur.spectral_abscissa();
    let tol = -tol_factor * a_fro.max(1.0);
    if abscissa >= tol {
        return Err(Error::NotHurwitz { abscissa, tol });
    }
    Ok(())
}

/// Check that `A` is Hurwitz with the default tolerance.
pub fn ensure_hurwitz(a: &DenseMatrix) -> Result<SchurForm> {
    ensure_hurwitz_with(a, HURWITZ_TOL_FACTOR)
}

/// Hurwitz test with a caller-chosen tolerance factor:
/// `alpha(A) < -tol_factor * ||A||_F`.
pub fn ensure_hurwitz_with(a: &DenseMatrix, tol_factor: f64) -> Result<SchurForm> {
    let schur = real_schur(a)?;
    ensure_hurwitz_schur(&schur, a.frobenius_norm(), tol_factor)?;
    Ok(schur)
}
