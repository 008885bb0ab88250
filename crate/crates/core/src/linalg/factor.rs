//! Symmetric PSD factorization into tall Gramian factors.

use super::{sym_eigen, DenseMatrix};
use crate::error::{Error, Result};

/// Which Gramian a factor was computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GramianSource {
    Controllability,
    QoObservability,
    LdObservability,
    General,
}

/// Tall factor `Z` with `G = Z Z^T` and the numerical rank that was kept.
#[derive(Debug, Clone)]
pub struct GramianFactor {
    pub factor: DenseMatrix,
    pub rank: usize,
    pub source: GramianSource,
}

impl GramianFactor {
    /// `Z Z^T`, the Gramian this factor represents.
    pub fn gramian(&self) -> DenseMatrix {
        self.factor.mul_tr(&self.factor)
    }
}

/// Factor a numerically PSD matrix as `G ~ Z Z^T` through its symmetric
/// eigendecomposition, keeping the eigenvalues above `rank_tol * lambda_max`.
///
/// Eigenvalues in `[-rank_tol * lambda_max, rank_tol * lambda_max]` are
/// treated as zero; anything more negative is an error reporting the most
/// negative eigenvalue.
pub fn psd_factor(g: &DenseMatrix, rank_tol: f64) -> Result<GramianFactor> {
    if !g.is_square() {
        return Err(Error::invalid("psd_factor requires a square matrix"));
    }
    if rank_tol < 0.0 {
        return Err(Error::invalid("rank_tol must be nonnegative"));
    }
    let (vals, vecs) = sym_eigen(g)?;
    let n = g.rows();
    let scale = vals.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let cut = rank_tol * scale;
    if let Some(&min) = vals.last() {
        if min < -cut {
            return Err(Error::Indefinite {
                min_eig: min,
                tol: cut,
            });
        }
    }
    let rank = vals.iter().filter(|&&v| v > cut).count();
    let mut z = DenseMatrix::zeros(n, rank);
    for (col, &v) in vals.iter().take(rank).enumerate() {
        let s = v.sqrt();
        for i in 0..n {
            z[(i, col)] = vecs[(i, col)] * s;
        }
    }
    Ok(GramianFactor {
        factor: z,
        rank,
        source: GramianSource::General,
    })
}
