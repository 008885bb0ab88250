//! Dense matrix kernels: storage, products, real Schur form, Lyapunov and
//! Sylvester solvers, symmetric factorization and SVD utilities.
//!
//! Everything in the crate is built on [`DenseMatrix`], a row-major `f64`
//! matrix sized for desk-scale problems (n up to a few hundred). The
//! decompositions are delegated to `nalgebra`; the matrix-equation solvers
//! on top of the Schur form are implemented here.

mod factor;
mod schur;
mod sylvester;

pub use factor::{psd_factor, GramianFactor, GramianSource};
pub use schur::{ensure_hurwitz, ensure_hurwitz_with, real_schur, spectral_abscissa, SchurForm};
pub use sylvester::{lyapunov_residual, solve_lyapunov, solve_sylvester, sylvester_residual};

use crate::error::{Error, Result};
use nalgebra::DMatrix;

/// Spectral-abscissa tolerance factor for the Hurwitz test:
/// `A` is accepted when `alpha(A) < -HURWITZ_TOL_FACTOR * ||A||_F`.
pub const HURWITZ_TOL_FACTOR: f64 = 1e-10;

/// Default relative tolerance for numerical-rank decisions on Gramian factors.
pub const DEFAULT_RANK_TOL: f64 = 1e-12;

/// Row-major dense matrix of `f64` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    /// Build a matrix from row-major data. Rejects empty shapes, shape/data
    /// mismatches and non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "matrix data length {} does not match shape {rows}x{cols}",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite entry {} at position ({}, {})",
                data[bad],
                bad / cols,
                bad % cols
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Build from nested rows (each inner slice is one row).
    pub fn from_nested(rows: &[&[f64]]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::invalid("ragged rows in matrix literal"));
        }
        Self::new(r, c, rows.concat())
    }

    /// All-zero matrix. Zero dimensions are allowed here so that empty
    /// bases and empty partition blocks are representable.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Diagonal matrix from the given entries.
    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Column vector.
    pub fn column(entries: &[f64]) -> Self {
        Self {
            rows: entries.len(),
            cols: 1,
            data: entries.to_vec(),
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// `self * other`.
    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(
            self.cols, other.rows,
            "matmul shape mismatch: {}x{} * {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self.data[i * self.cols + k];
                if aik == 0.0 {
                    continue;
                }
                let orow = &other.data[k * other.cols..(k + 1) * other.cols];
                let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, &b) in out_row.iter_mut().zip(orow) {
                    *o += aik * b;
                }
            }
        }
        out
    }

    /// `self^T * other` without materializing the transpose.
    pub fn tr_mul(&self, other: &Self) -> Self {
        assert_eq!(self.rows, other.rows, "tr_mul shape mismatch");
        let mut out = Self::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            for i in 0..self.cols {
                let aki = self.data[k * self.cols + i];
                if aki == 0.0 {
                    continue;
                }
                let orow = &other.data[k * other.cols..(k + 1) * other.cols];
                let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, &b) in out_row.iter_mut().zip(orow) {
                    *o += aki * b;
                }
            }
        }
        out
    }

    /// `self * other^T`.
    pub fn mul_tr(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.cols, "mul_tr shape mismatch");
        let mut out = Self::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            for j in 0..other.rows {
                let mut s = 0.0;
                for k in 0..self.cols {
                    s += self.data[i * self.cols + k] * other.data[j * other.cols + k];
                }
                out[(i, j)] = s;
            }
        }
        out
    }

    /// Matrix-vector product.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, x.len(), "matvec shape mismatch");
        let mut y = vec![0.0; self.rows];
        for (i, yi) in y.iter_mut().enumerate() {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            *yi = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
        y
    }

    /// `self^T * x`.
    pub fn tr_matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.rows, x.len(), "tr_matvec shape mismatch");
        let mut y = vec![0.0; self.cols];
        for (xi, row) in x.iter().zip(self.data.chunks(self.cols)) {
            for (yj, &a) in y.iter_mut().zip(row) {
                *yj += a * xi;
            }
        }
        y
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Self {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Self {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|a| a * s).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn trace(&self) -> f64 {
        assert!(self.is_square(), "trace of a non-square matrix");
        (0..self.rows).map(|i| self[(i, i)]).sum()
    }

    /// Frobenius inner product `<self, other>`.
    pub fn dot(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    /// `(self + self^T) / 2`.
    pub fn symmetrized(&self) -> Self {
        assert!(self.is_square(), "symmetrizing a non-square matrix");
        Self::from_fn(self.rows, self.cols, |i, j| {
            0.5 * (self[(i, j)] + self[(j, i)])
        })
    }

    /// Frobenius norm of the antisymmetric part.
    pub fn asymmetry(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.rows {
            for j in 0..i {
                let d = self[(i, j)] - self[(j, i)];
                s += d * d;
            }
        }
        (2.0 * s).sqrt()
    }

    /// Copy of the sub-block starting at `(r0, c0)` with the given shape.
    pub fn block(&self, r0: usize, c0: usize, nrows: usize, ncols: usize) -> Self {
        assert!(r0 + nrows <= self.rows && c0 + ncols <= self.cols, "block out of range");
        Self::from_fn(nrows, ncols, |i, j| self[(r0 + i, c0 + j)])
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, b: &Self) {
        assert!(r0 + b.rows <= self.rows && c0 + b.cols <= self.cols, "block out of range");
        for i in 0..b.rows {
            for j in 0..b.cols {
                self[(r0 + i, c0 + j)] = b[(i, j)];
            }
        }
    }

    /// Kronecker product `self (x) other`.
    pub fn kron(&self, other: &Self) -> Self {
        let mut out = Self::zeros(self.rows * other.rows, self.cols * other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self[(i, j)];
                if a == 0.0 {
                    continue;
                }
                for p in 0..other.rows {
                    for q in 0..other.cols {
                        out[(i * other.rows + p, j * other.cols + q)] = a * other[(p, q)];
                    }
                }
            }
        }
        out
    }

    pub(crate) fn to_na(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub(crate) fn from_na(m: &DMatrix<f64>) -> Self {
        let mut out = Self::zeros(m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                out[(i, j)] = m[(i, j)];
            }
        }
        out
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Eigen-decomposition of a symmetric matrix, eigenvalues descending.
/// Returns `(eigenvalues, eigenvectors)` with eigenvectors in columns.
pub fn sym_eigen(g: &DenseMatrix) -> Result<(Vec<f64>, DenseMatrix)> {
    if !g.is_square() {
        return Err(Error::invalid("symmetric eigendecomposition of a non-square matrix"));
    }
    let sym = g.symmetrized();
    let se = nalgebra::linalg::SymmetricEigen::try_new(sym.to_na(), f64::EPSILON, 100_000)
        .ok_or(Error::NoConvergence {
            algorithm: "symmetric eigendecomposition",
            iterations: 100_000,
        })?;
    let n = g.rows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| se.eigenvalues[b].partial_cmp(&se.eigenvalues[a]).unwrap());
    let values: Vec<f64> = order.iter().map(|&k| se.eigenvalues[k]).collect();
    let vectors = DenseMatrix::from_fn(n, n, |i, j| se.eigenvectors[(i, order[j])]);
    Ok((values, vectors))
}

/// Thin SVD with singular values sorted descending.
/// Returns `(u, sigma, v)` such that `m = u * diag(sigma) * v^T`.
pub fn svd(m: &DenseMatrix) -> Result<(DenseMatrix, Vec<f64>, DenseMatrix)> {
    let sv = nalgebra::linalg::SVD::try_new(m.to_na(), true, true, f64::EPSILON, 100_000).ok_or(
        Error::NoConvergence {
            algorithm: "singular value decomposition",
            iterations: 100_000,
        },
    )?;
    let u_na = sv.u.expect("svd computed with u");
    let vt_na = sv.v_t.expect("svd computed with v_t");
    let k = sv.singular_values.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        sv.singular_values[b]
            .partial_cmp(&sv.singular_values[a])
            .unwrap()
    });
    let sigma: Vec<f64> = order.iter().map(|&i| sv.singular_values[i]).collect();
    let u = DenseMatrix::from_fn(u_na.nrows(), k, |i, j| u_na[(i, order[j])]);
    let v = DenseMatrix::from_fn(vt_na.ncols(), k, |i, j| vt_na[(order[j], i)]);
    Ok((u, sigma, v))
}

/// Matrix exponential `e^A` (scaling-and-squaring Pade approximation).
pub fn expm(a: &DenseMatrix) -> DenseMatrix {
    assert!(a.is_square(), "matrix exponential of a non-square matrix");
    DenseMatrix::from_na(&a.to_na().exp())
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky(g: &DenseMatrix) -> Result<DenseMatrix> {
    if !g.is_square() {
        return Err(Error::invalid("cholesky of a non-square matrix"));
    }
    let ch = nalgebra::linalg::Cholesky::new(g.symmetrized().to_na()).ok_or(Error::Indefinite {
        min_eig: f64::NAN,
        tol: 0.0,
    })?;
    Ok(DenseMatrix::from_na(&ch.l()))
}

/// Solve the linear system `a * x = b` for square `a` via LU with pivoting.
pub fn solve_linear(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if !a.is_square() || a.rows() != b.rows() {
        return Err(Error::invalid("solve_linear shape mismatch"));
    }
    let lu = nalgebra::linalg::LU::new(a.to_na());
    match lu.solve(&b.to_na()) {
        Some(x) => Ok(DenseMatrix::from_na(&x)),
        None => Err(Error::RankDeficient("singular linear system".into())),
    }
}

/// Forward substitution `l * y = b` for lower-triangular `l`.
pub fn solve_lower_triangular(l: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = l.rows();
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for j in 0..i {
            s -= l[(i, j)] * y[j];
        }
        let d = l[(i, i)];
        if d.abs() < 1e-300 {
            return Err(Error::RankDeficient("zero pivot in triangular solve".into()));
        }
        y[i] = s / d;
    }
    Ok(y)
}

/// Numerical rank of a symmetric PSD matrix: eigenvalues above
/// `tol * lambda_max(|G|)`.
pub fn symmetric_rank(g: &DenseMatrix, tol: f64) -> Result<usize> {
    let (vals, _) = sym_eigen(g)?;
    let scale = vals.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Ok(0);
    }
    Ok(vals.iter().filter(|&&v| v > tol * scale).count())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constructors_reject_bad_input() {
        assert!(DenseMatrix::new(0, 2, vec![]).is_err());
        assert!(DenseMatrix::new(2, 2, vec![1.0; 3]).is_err());
        assert!(DenseMatrix::new(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(DenseMatrix::new(1, 2, vec![1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn product_and_transpose_agree_with_hand_result() {
        let a = DenseMatrix::from_nested(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
        let b = DenseMatrix::from_nested(&[&[5.0, 6.0], &[7.0, 8.0]]).unwrap();
        let ab = a.mul(&b);
        assert_eq!(ab.data(), &[19.0, 22.0, 43.0, 50.0]);
        assert_eq!(a.tr_mul(&b).data(), a.transpose().mul(&b).data());
        assert_eq!(a.mul_tr(&b).data(), a.mul(&b.transpose()).data());
    }

    #[test]
    fn sym_eigen_reconstructs() {
        let g = DenseMatrix::from_nested(&[&[2.0, 1.0, 0.0], &[1.0, 3.0, 0.5], &[0.0, 0.5, 1.0]])
            .unwrap();
        let (vals, vecs) = sym_eigen(&g).unwrap();
        assert!(vals.windows(2).all(|w| w[0] >= w[1]));
        let recon = vecs
            .mul(&DenseMatrix::from_diagonal(&vals))
            .mul(&vecs.transpose());
        assert!(recon.sub(&g).frobenius_norm() < 1e-12 * g.frobenius_norm());
    }

    #[test]
    fn svd_reconstructs_and_sorts() {
        let m = DenseMatrix::from_nested(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]]).unwrap();
        let (u, s, v) = svd(&m).unwrap();
        assert!(s.windows(2).all(|w| w[0] >= w[1]));
        let recon = u.mul(&DenseMatrix::from_diagonal(&s)).mul(&v.transpose());
        assert!(recon.sub(&m).frobenius_norm() < 1e-12 * m.frobenius_norm());
    }

    #[test]
    fn expm_of_zero_is_identity() {
        let z = DenseMatrix::zeros(3, 3);
        let e = expm(&z);
        assert!(e.sub(&DenseMatrix::identity(3)).frobenius_norm() < 1e-15);
    }

    #[test]
    fn kron_identity() {
        let a = DenseMatrix::from_nested(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
        let i2 = DenseMatrix::identity(2);
        let k = i2.kron(&a);
        assert_eq!(k.rows(), 4);
        assert_eq!(k[(0, 0)], 1.0);
        assert_eq!(k[(2, 2)], 1.0);
        assert_eq!(k[(3, 2)], 3.0);
        assert_eq!(k[(0, 2)], 0.0);
    }
}
