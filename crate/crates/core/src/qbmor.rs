//! Quadratic-bilinear baseline: truncated quadratic-type Gramians for the
//! QB rewriting and the balanced truncation built on them.
//!
//! The augmented QB dynamics matrix is singular by construction (the
//! output state integrates), so the quadratic-type Lyapunov equations are
//! solved after shifting the augmented diagonal entry by `-eps`. The
//! Gramians are then the fixed-point limit of a Lyapunov iteration whose
//! right-hand side carries the Kronecker-quadratic and bilinear terms of
//! the previous iterate; `max_iter = 1` reproduces the classical truncated
//! Gramians (one quadratic correction on top of the linear part).

use crate::balancing::{square_root_projectors, Method, ReducedModel, ReductionOutcome};
use crate::error::{Error, Result};
use crate::linalg::{self, psd_factor, solve_lyapunov, DenseMatrix};
use crate::systems::{to_qb, LdqoSystem, QbSystem};

pub use crate::harness::simulate_qb;

/// Iteration settings for the quadratic-type Lyapunov equations.
#[derive(Debug, Clone, Copy)]
pub struct QbIterOptions {
    /// Diagonal shift applied to the augmented state only.
    pub eps: f64,
    /// Fixed-point iterations per Gramian. One iteration is the classical
    /// truncated-Gramian approximation.
    pub max_iter: usize,
    /// Relative-change threshold declaring convergence.
    pub tol: f64,
    /// Hard cap on the augmented dimension; the Kronecker-term congruences
    /// cost O(n^3) per nonzero tensor row and this module is meant for
    /// desk-scale systems.
    pub size_cap: usize,
}

impl QbIterOptions {
    pub fn new(eps: f64) -> Self {
        Self {
            eps,
            max_iter: 1,
            tol: 1e-10,
            size_cap: 80,
        }
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }
}

/// Spec default shift: `1e-6 ||A||_F`.
pub fn default_eps(sys: &LdqoSystem) -> f64 {
    1e-6 * sys.a().frobenius_norm().max(1.0)
}

/// Truncated quadratic-type Gramian pair of a QB system.
#[derive(Debug, Clone)]
pub struct QbGramians {
    pub p_qb: DenseMatrix,
    pub q_qb: DenseMatrix,
    /// Total Lyapunov iterations spent across both Gramians.
    pub iterations: usize,
    /// Both fixed points reached the relative-change tolerance.
    pub converged: bool,
    pub regularization_eps: f64,
}

fn shifted_dynamics(qb: &QbSystem, eps: f64) -> DenseMatrix {
    let nb = qb.order();
    let mut a = qb.a_qb.clone();
    a[(nb - 1, nb - 1)] -= eps;
    a
}

/// `G[i][j] = <Hm_i, left * Hm_j * right^T>` where `Hm_i` is row `i` of the
/// mode-1 matricization reshaped to `nb x nb`: evaluates
/// `H (left (x) right) H^T` without forming the Kronecker product.
fn kron_congruence(h: &DenseMatrix, left: &DenseMatrix, right: &DenseMatrix) -> DenseMatrix {
    let nb = h.rows();
    debug_assert_eq!(h.cols(), nb * nb);
    let nonzero: Vec<usize> = (0..nb)
        .filter(|&i| h.row(i).iter().any(|&v| v != 0.0))
        .collect();
    let mut out = DenseMatrix::zeros(nb, nb);
    for &j in &nonzero {
        let hm_j = DenseMatrix::from_fn(nb, nb, |a, b| h[(j, a * nb + b)]);
        let k_j = left.mul(&hm_j).mul_tr(right);
        for &i in &nonzero {
            let mut acc = 0.0;
            for a in 0..nb {
                let row = h.row(i);
                for b in 0..nb {
                    acc += row[a * nb + b] * k_j[(a, b)];
                }
            }
            out[(i, j)] = acc;
        }
    }
    out
}

/// Mode-2 matricization of the 3-tensor behind an `nb x nb^2` mode-1
/// matricization: `H2[j, i*nb + k] = H[i, j*nb + k]`.
pub fn mode2_matricization(h: &DenseMatrix) -> DenseMatrix {
    let nb = h.rows();
    debug_assert_eq!(h.cols(), nb * nb);
    DenseMatrix::from_fn(nb, nb * nb, |j, col| {
        let i = col / nb;
        let k = col % nb;
        h[(i, j * nb + k)]
    })
}

struct FixedPointOutcome {
    gramian: DenseMatrix,
    iterations: usize,
    converged: bool,
}

/// Lyapunov fixed point `X_{k+1} = solve(A, const + quad(X_k))` with
/// divergence detection: relative change growing three iterations in a row.
fn lyapunov_fixed_point(
    a: &DenseMatrix,
    rhs_const: &DenseMatrix,
    mut quad: impl FnMut(&DenseMatrix) -> DenseMatrix,
    max_iter: usize,
    tol: f64,
) -> Result<FixedPointOutcome> {
    let mut x = solve_lyapunov(a, rhs_const)?;
    let mut iterations = 0;
    let mut prev_change = f64::INFINITY;
    let mut growth_streak = 0usize;
    for _ in 0..max_iter {
        let rhs = rhs_const.add(&quad(&x)).symmetrized();
        let next = solve_lyapunov(a, &rhs)?;
        iterations += 1;
        let change = next.sub(&x).frobenius_norm() / next.frobenius_norm().max(1.0);
        x = next;
        if change <= tol {
            return Ok(FixedPointOutcome {
                gramian: x,
                iterations,
                converged: true,
            });
        }
        if change > prev_change {
            growth_streak += 1;
            if growth_streak >= 3 {
                return Err(Error::Diverged {
                    iterations,
                    last_change: change,
                });
            }
        } else {
            growth_streak = 0;
        }
        prev_change = change;
    }
    Ok(FixedPointOutcome {
        gramian: x,
        iterations,
        converged: false,
    })
}

/// Reachability-side fixed point:
/// `A_eps P + P A_eps^T + B B^T + H (P (x) P) H^T + sum_j N_j P N_j^T = 0`.
pub fn qb_reach_gramian(qb: &QbSystem, opts: &QbIterOptions) -> Result<FixedPoint> {
    check_size(qb, opts)?;
    let a_eps = shifted_dynamics(qb, opts.eps);
    linalg::ensure_hurwitz(&a_eps)?;
    let rhs = qb.b_qb.mul_tr(&qb.b_qb);
    let out = lyapunov_fixed_point(
        &a_eps,
        &rhs,
        |p| {
            let mut add = kron_congruence(&qb.h_qb, p, p);
            for nj in &qb.n_qb {
                add = add.add(&nj.mul(p).mul_tr(nj));
            }
            add
        },
        opts.max_iter,
        opts.tol,
    )?;
    Ok(FixedPoint {
        gramian: out.gramian,
        iterations: out.iterations,
        converged: out.converged,
    })
}

/// Observability-side fixed point with the mode-2 matricization and the
/// converged reachability Gramian:
/// `A_eps^T Q + Q A_eps + C^T C + H2 (P (x) Q) H2^T + sum_j N_j^T Q N_j = 0`.
pub fn qb_obs_gramian(qb: &QbSystem, p_qb: &DenseMatrix, opts: &QbIterOptions) -> Result<FixedPoint> {
    check_size(qb, opts)?;
    let a_eps = shifted_dynamics(qb, opts.eps);
    linalg::ensure_hurwitz(&a_eps)?;
    let rhs = qb.c_qb.tr_mul(&qb.c_qb);
    let h2 = mode2_matricization(&qb.h_qb);
    let out = lyapunov_fixed_point(
        &a_eps.transpose(),
        &rhs,
        |q| {
            let mut add = kron_congruence(&h2, p_qb, q);
            for nj in &qb.n_qb {
                add = add.add(&nj.tr_mul(q).mul(nj));
            }
            add
        },
        opts.max_iter,
        opts.tol,
    )?;
    Ok(FixedPoint {
        gramian: out.gramian,
        iterations: out.iterations,
        converged: out.converged,
    })
}

/// One Gramian from the fixed point.
#[derive(Debug, Clone)]
pub struct FixedPoint {
    pub gramian: DenseMatrix,
    pub iterations: usize,
    pub converged: bool,
}

fn check_size(qb: &QbSystem, opts: &QbIterOptions) -> Result<()> {
    if qb.order() > opts.size_cap {
        return Err(Error::invalid(format!(
            "QB system order {} exceeds the size cap {}; the Kronecker terms make larger \
             systems impractical here",
            qb.order(),
            opts.size_cap
        )));
    }
    Ok(())
}

/// Both truncated Gramians of a QB system.
pub fn qb_truncated_gramians(qb: &QbSystem, opts: &QbIterOptions) -> Result<QbGramians> {
    let reach = qb_reach_gramian(qb, opts)?;
    let obs = qb_obs_gramian(qb, &reach.gramian, opts)?;
    Ok(QbGramians {
        p_qb: reach.gramian,
        q_qb: obs.gramian,
        iterations: reach.iterations + obs.iterations,
        converged: reach.converged && obs.converged,
        regularization_eps: opts.eps,
    })
}

/// Residual of the reachability-side quadratic-type equation, recomputed
/// from scratch including the Kronecker term.
pub fn qb_reach_residual(qb: &QbSystem, eps: f64, p: &DenseMatrix) -> f64 {
    let a_eps = shifted_dynamics(qb, eps);
    let mut r = a_eps
        .mul(p)
        .add(&p.mul(&a_eps.transpose()))
        .add(&qb.b_qb.mul_tr(&qb.b_qb))
        .add(&kron_congruence(&qb.h_qb, p, p));
    for nj in &qb.n_qb {
        r = r.add(&nj.mul(p).mul_tr(nj));
    }
    r.frobenius_norm()
}

/// QB-transformation balanced truncation: rewrite to QB form, balance the
/// truncated Gramian pair, project every QB matrix. The result is a QB
/// system, not an LD_QO system; the type records that.
pub fn reduce_qbtbt(
    sys: &LdqoSystem,
    r: usize,
    opts: &QbIterOptions,
    rank_tol: f64,
) -> Result<ReductionOutcome> {
    let qb = to_qb(sys);
    let grams = qb_truncated_gramians(&qb, opts)?;
    let zp = psd_factor(&grams.p_qb, rank_tol)?;
    let zq = psd_factor(&grams.q_qb, rank_tol)?;
    let proj = square_root_projectors(&zp, &zq, r)?;

    let a_red = proj.w.tr_mul(&qb.a_qb).mul(&proj.v);
    let b_red = proj.w.tr_mul(&qb.b_qb);
    let c_red = qb.c_qb.mul(&proj.v);
    // H_hat = W^T H (V (x) V)
    let nb = qb.order();
    let mut h_red = DenseMatrix::zeros(r, r * r);
    for i in 0..nb {
        if qb.h_qb.row(i).iter().all(|&v| v == 0.0) {
            continue;
        }
        let hm_i = DenseMatrix::from_fn(nb, nb, |a, b| qb.h_qb[(i, a * nb + b)]);
        let projected = proj.v.tr_mul(&hm_i).mul(&proj.v); // V^T Hm_i V
        for row in 0..r {
            let wri = proj.w[(i, row)];
            if wri == 0.0 {
                continue;
            }
            for a in 0..r {
                for b in 0..r {
                    h_red[(row, a * r + b)] += wri * projected[(a, b)];
                }
            }
        }
    }
    let n_red: Vec<DenseMatrix> = qb
        .n_qb
        .iter()
        .map(|nj| proj.w.tr_mul(nj).mul(&proj.v))
        .collect();

    let reduced = QbSystem {
        a_qb: a_red.clone(),
        b_qb: b_red,
        c_qb: c_red,
        h_qb: h_red,
        n_qb: n_red,
    };
    // Stability is judged on the projection of the regularized dynamics:
    // the augmented integrator mode is neutral by construction.
    let a_eps_red = proj.w.tr_mul(&shifted_dynamics(&qb, opts.eps)).mul(&proj.v);
    let stability_ok = linalg::spectral_abscissa(&a_eps_red)
        .map(|al| al < 0.0)
        .unwrap_or(false);
    let sigma1 = proj.sigma_all[0];
    let gap_warning = r < proj.sigma_all.len()
        && proj.sigma_all[r - 1] - proj.sigma_all[r] <= crate::balancing::GAP_WARN_TOL * sigma1;
    Ok(ReductionOutcome {
        v: proj.v,
        w: proj.w,
        singular_values: proj.sigma_all,
        model: ReducedModel::Qb(reduced),
        method: Method::Qbtbt,
        stability_ok,
        gap_warning,
    })
}
