//! Model objects: the LD_QO system itself plus its two structural
//! rewritings (linear-output form and quadratic-bilinear form), and the
//! JSON/Matrix Market file formats.

mod io;

pub use io::{read_system, write_system, write_system_named};

use crate::error::{Error, Result};
use crate::linalg::{self, DenseMatrix};

/// Linear dynamics with quadratic output:
/// `x' = A x + B u`, `y = x^T M x`, with `M` symmetric.
///
/// `M` is symmetrized at construction, which leaves the output map
/// unchanged: `x^T M x = x^T (M + M^T)/2 x` for every `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct LdqoSystem {
    a: DenseMatrix,
    b: DenseMatrix,
    m: DenseMatrix,
}

impl LdqoSystem {
    /// Build an LD_QO system, symmetrizing the output weight.
    pub fn new(a: DenseMatrix, b: DenseMatrix, m_raw: DenseMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::invalid(format!(
                "A must be square, got {}x{}",
                a.rows(),
                a.cols()
            )));
        }
        let n = a.rows();
        if b.rows() != n {
            return Err(Error::invalid(format!(
                "B must have {} rows to match A, got {}",
                n,
                b.rows()
            )));
        }
        if m_raw.rows() != n || m_raw.cols() != n {
            return Err(Error::invalid(format!(
                "M must be {n}x{n} to match A, got {}x{}",
                m_raw.rows(),
                m_raw.cols()
            )));
        }
        Ok(Self {
            a,
            b,
            m: m_raw.symmetrized(),
        })
    }

    /// State dimension n.
    pub fn order(&self) -> usize {
        self.a.rows()
    }

    /// Input dimension m.
    pub fn inputs(&self) -> usize {
        self.b.cols()
    }

    pub fn a(&self) -> &DenseMatrix {
        &self.a
    }

    pub fn b(&self) -> &DenseMatrix {
        &self.b
    }

    pub fn m(&self) -> &DenseMatrix {
        &self.m
    }

    /// Output value `x^T M x` for a state vector.
    pub fn output(&self, x: &[f64]) -> f64 {
        let mx = self.m.matvec(x);
        x.iter().zip(&mx).map(|(a, b)| a * b).sum()
    }

    /// Error unless `A` is Hurwitz at the default tolerance.
    pub fn require_stable(&self) -> Result<()> {
        linalg::ensure_hurwitz(&self.a).map(|_| ())
    }

    /// Apply a state similarity `x = T z`, giving
    /// `(T^-1 A T, T^-1 B, T^T M T)` with the same input-output map.
    pub fn similarity(&self, t: &DenseMatrix, t_inv: &DenseMatrix) -> Result<Self> {
        let a = t_inv.mul(&self.a).mul(t);
        let b = t_inv.mul(&self.b);
        let m = t.tr_mul(&self.m).mul(t);
        Self::new(a, b, m)
    }
}

/// Classical linear system `x' = A x + B u`, `y = C x`.
#[derive(Debug, Clone, PartialEq)]
pub struct LdSystem {
    pub a: DenseMatrix,
    pub b: DenseMatrix,
    pub c: DenseMatrix,
}

impl LdSystem {
    pub fn new(a: DenseMatrix, b: DenseMatrix, c: DenseMatrix) -> Result<Self> {
        if !a.is_square() || b.rows() != a.rows() || c.cols() != a.rows() {
            return Err(Error::invalid(format!(
                "LD dimensions inconsistent: A {}x{}, B {}x{}, C {}x{}",
                a.rows(),
                a.cols(),
                b.rows(),
                b.cols(),
                c.rows(),
                c.cols()
            )));
        }
        Ok(Self { a, b, c })
    }

    pub fn order(&self) -> usize {
        self.a.rows()
    }
}

/// How to factor the output weight when rewriting to linear-output form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LdRewriteMode {
    /// Require `M` PSD and factor `M = C^T C` exactly (to rank tolerance).
    PsdOnly,
    /// Factor the spectral absolute value `|M| = C^T C` and record the
    /// eigenvalue signs; the caller opted in explicitly.
    AbsoluteSplit,
}

/// Result of the linear-output rewriting.
#[derive(Debug, Clone)]
pub struct LdRewrite {
    pub ld: LdSystem,
    /// Numerical rank of `M` (row count of `C`).
    pub rank: usize,
    pub mode: LdRewriteMode,
    /// Eigenvalue signs of the retained directions; `Some` only in
    /// `AbsoluteSplit` mode where `M = C^T diag(signs) C`.
    pub signs: Option<Vec<f64>>,
}

/// Rewrite an LD_QO system as an LD system with `C^T C = M` (PSD mode),
/// so that `y(t) = ||y_T(t)||_2^2` along trajectories.
pub fn to_ld(sys: &LdqoSystem, mode: LdRewriteMode, rank_tol: f64) -> Result<LdRewrite> {
    let n = sys.order();
    let (vals, vecs) = linalg::sym_eigen(sys.m())?;
    let scale = vals.iter().fold(0.0_f64, |mx, v| mx.max(v.abs()));
    let cut = rank_tol * scale;

    match mode {
        LdRewriteMode::PsdOnly => {
            if let Some(&min) = vals.last() {
                if min < -cut {
                    return Err(Error::Indefinite {
                        min_eig: min,
                        tol: cut,
                    });
                }
            }
            let kept: Vec<usize> = (0..n).filter(|&i| vals[i] > cut).collect();
            let q = kept.len().max(1);
            let mut c = DenseMatrix::zeros(q, n);
            for (row, &i) in kept.iter().enumerate() {
                let s = vals[i].max(0.0).sqrt();
                for j in 0..n {
                    c[(row, j)] = s * vecs[(j, i)];
                }
            }
            let ld = LdSystem::new(sys.a().clone(), sys.b().clone(), c)?;
            Ok(LdRewrite {
                ld,
                rank: kept.len(),
                mode,
                signs: None,
            })
        }
        LdRewriteMode::AbsoluteSplit => {
            let kept: Vec<usize> = (0..n).filter(|&i| vals[i].abs() > cut).collect();
            let q = kept.len().max(1);
            let mut c = DenseMatrix::zeros(q, n);
            let mut signs = Vec::with_capacity(kept.len());
            for (row, &i) in kept.iter().enumerate() {
                let s = vals[i].abs().sqrt();
                signs.push(vals[i].signum());
                for j in 0..n {
                    c[(row, j)] = s * vecs[(j, i)];
                }
            }
            let ld = LdSystem::new(sys.a().clone(), sys.b().clone(), c)?;
            Ok(LdRewrite {
                ld,
                rank: kept.len(),
                mode,
                signs: Some(signs),
            })
        }
    }
}

/// Quadratic-bilinear realization obtained by augmenting the output as a
/// state: `x_qb = [x; y]` with
/// `x_qb' = A_qb x_qb + B_qb u + H_qb (x_qb (x) x_qb) + sum_j u_j N_j x_qb`
/// and `y = C_qb x_qb`.
///
/// The output-selecting row of `C_qb` sits on the augmented (last)
/// coordinate; `H_qb` is nonzero only in its last row, which carries the
/// columns of `S = A^T M + M^T A` so that `H_qb (x_qb (x) x_qb) = x^T S x`.
#[derive(Debug, Clone, PartialEq)]
pub struct QbSystem {
    pub a_qb: DenseMatrix,
    pub b_qb: DenseMatrix,
    pub c_qb: DenseMatrix,
    pub h_qb: DenseMatrix,
    pub n_qb: Vec<DenseMatrix>,
}

impl QbSystem {
    /// Augmented state dimension (n + 1 for a rewrite of an order-n system).
    pub fn order(&self) -> usize {
        self.a_qb.rows()
    }

    pub fn inputs(&self) -> usize {
        self.b_qb.cols()
    }

    /// `H (x (x) x)` evaluated without materializing the Kronecker square.
    pub fn quadratic_term(&self, x: &[f64]) -> Vec<f64> {
        let nb = self.order();
        let mut out = vec![0.0; nb];
        for (i, out_i) in out.iter_mut().enumerate() {
            let row = self.h_qb.row(i);
            if row.iter().all(|&v| v == 0.0) {
                continue;
            }
            let mut acc = 0.0;
            for (a, &xa) in x.iter().enumerate() {
                if xa == 0.0 {
                    continue;
                }
                let seg = &row[a * nb..(a + 1) * nb];
                let dot: f64 = seg.iter().zip(x).map(|(h, xb)| h * xb).sum();
                acc += xa * dot;
            }
            *out_i = acc;
        }
        out
    }

    /// Output `C_qb x`.
    pub fn output(&self, x: &[f64]) -> f64 {
        self.c_qb.matvec(x)[0]
    }
}

/// Rewrite an LD_QO system as a quadratic-bilinear system with n + 1
/// states, m inputs and one (linear) output.
pub fn to_qb(sys: &LdqoSystem) -> QbSystem {
    let n = sys.order();
    let m = sys.inputs();
    let nb = n + 1;

    let mut a_qb = DenseMatrix::zeros(nb, nb);
    a_qb.set_block(0, 0, sys.a());
    let mut b_qb = DenseMatrix::zeros(nb, m);
    b_qb.set_block(0, 0, sys.b());
    let mut c_qb = DenseMatrix::zeros(1, nb);
    c_qb[(0, nb - 1)] = 1.0;

    // S = A^T M + M^T A drives the derivative of the quadratic output.
    let s = sys
        .a()
        .tr_mul(sys.m())
        .add(&sys.m().tr_mul(sys.a()));

    let mut h_qb = DenseMatrix::zeros(nb, nb * nb);
    for i in 0..n {
        for k in 0..n {
            // block i of the last row holds s_i^T (the i-th column of S)
            h_qb[(nb - 1, i * nb + k)] = s[(k, i)];
        }
    }

    let mut n_qb = Vec::with_capacity(m);
    for j in 0..m {
        let mut nj = DenseMatrix::zeros(nb, nb);
        for col in 0..n {
            let mut v = 0.0;
            for i in 0..n {
                v += sys.b()[(i, j)] * sys.m()[(i, col)];
            }
            nj[(nb - 1, col)] = 2.0 * v;
        }
        n_qb.push(nj);
    }

    QbSystem {
        a_qb,
        b_qb,
        c_qb,
        h_qb,
        n_qb,
    }
}
