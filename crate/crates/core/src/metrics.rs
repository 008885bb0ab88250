//! H2 norm and inner product for quadratic-output systems, output error
//! bounds, the singular-value error identity, quadrature oracles for the
//! kernel definition, and the energy functionals.

use crate::error::{Error, Result};
use crate::gramians::{controllability_gramian, qo_observability_gramian};
use crate::harness::{simulate_ldqo, traj_linf, SignalSpec, SimOptions, Trajectory};
use crate::linalg::{self, solve_sylvester, DenseMatrix, DEFAULT_RANK_TOL};
use crate::systems::LdqoSystem;

/// Squared H2 norm: `trace(B^T Q B)` with `Q` the quadratic-output
/// observability Gramian.
pub fn h2_norm_sq(sys: &LdqoSystem) -> Result<f64> {
    let (p, _) = controllability_gramian(sys, DEFAULT_RANK_TOL)?;
    let (q, _) = qo_observability_gramian(sys, &p, DEFAULT_RANK_TOL)?;
    Ok(sys.b().tr_mul(&q).mul(sys.b()).trace())
}

/// H2 norm of an LD_QO system.
pub fn h2_norm(sys: &LdqoSystem) -> Result<f64> {
    Ok(h2_norm_sq(sys)?.max(0.0).sqrt())
}

/// H2 inner product between a system and a (usually reduced) second
/// system, via the two-stage Sylvester solve:
/// `A X + X A_hat^T + B B_hat^T = 0`,
/// `A^T Z + Z A_hat + M X M_hat = 0`,
/// `<H, H_hat> = trace(B^T Z B_hat)`.
pub fn h2_inner(h: &LdqoSystem, hhat: &LdqoSystem) -> Result<f64> {
    if h.inputs() != hhat.inputs() {
        return Err(Error::invalid("systems must share the input dimension"));
    }
    let x = solve_sylvester(
        h.a(),
        &hhat.a().transpose(),
        &h.b().mul_tr(hhat.b()),
    )?;
    let z = solve_sylvester(
        &h.a().transpose(),
        hhat.a(),
        &h.m().mul(&x).mul(hhat.m()),
    )?;
    Ok(h.b().tr_mul(&z).mul(hhat.b()).trace())
}

/// Relative magnitude below which a negative squared error is treated as
/// floating-point cancellation and clamped to zero.
const ERROR_SQ_CLAMP: f64 = 1e-10;

/// Squared H2 error `||H - H_hat||^2` from the triangle expansion
/// `||H||^2 + ||H_hat||^2 - 2 <H, H_hat>`, clamped at zero when the
/// cancellation is at round-off level.
pub fn h2_error_sq(h: &LdqoSystem, hhat: &LdqoSystem) -> Result<f64> {
    let n2 = h2_norm_sq(h)?;
    let nh2 = h2_norm_sq(hhat)?;
    let inner = h2_inner(h, hhat)?;
    let val = n2 + nh2 - 2.0 * inner;
    let scale = n2 + nh2;
    if val < -ERROR_SQ_CLAMP * scale.max(1e-300) {
        return Err(Error::invalid(format!(
            "inconsistent H2 error: squared value {val:.6e} is negative beyond round-off (scale {scale:.6e})"
        )));
    }
    Ok(val.max(0.0))
}

/// H2 error norm `||H - H_hat||`.
pub fn h2_error(h: &LdqoSystem, hhat: &LdqoSystem) -> Result<f64> {
    Ok(h2_error_sq(h, hhat)?.sqrt())
}

/// Everything the a posteriori output bound produces.
#[derive(Debug, Clone)]
pub struct ErrorBoundReport {
    pub h2_error: f64,
    pub u_tensor_l2: f64,
    /// `h2_error * u_tensor_l2`, bounding `max_t |y - y_hat|`.
    pub linf_bound: f64,
    /// Singular-value error identity, when a balanced context was given.
    pub hsv_identity_value: Option<f64>,
    /// Neglected-singular-value bound, when a balanced context was given.
    pub corollary_bound: Option<f64>,
    /// Measured `max_t |y - y_hat|` when a simulation was requested.
    pub observed_linf: Option<f64>,
}

/// A posteriori L-infinity output bound
/// `||y - y_hat||_Linf <= ||H - H_hat||_H2 ||u (x) u||_L2`.
///
/// Rejects signals that are not square integrable. The scalar signal
/// drives every input channel, so its tensor norm scales with the input
/// count (`||u(s1) (x) u(s2)||^2 = ||u(s1)||^2 ||u(s2)||^2`). When `sim`
/// is given, both systems are simulated under the signal and the observed
/// maximum output deviation is recorded alongside the bound.
pub fn linf_output_bound(
    h: &LdqoSystem,
    hhat: &LdqoSystem,
    signal: &SignalSpec,
    sim: Option<&SimOptions>,
) -> Result<ErrorBoundReport> {
    let t_support = sim.map(|s| s.t_final).unwrap_or(1e6);
    let u_tensor = h.inputs() as f64 * signal.u_tensor_l2(t_support)?;
    let err = h2_error(h, hhat)?;
    let mut report = ErrorBoundReport {
        h2_error: err,
        u_tensor_l2: u_tensor,
        linf_bound: err * u_tensor,
        hsv_identity_value: None,
        corollary_bound: None,
        observed_linf: None,
    };
    if let Some(opts) = sim {
        let prepared = signal.prepare();
        let y_full = simulate_ldqo(h, Some(&prepared), None, opts)?;
        let y_red = simulate_ldqo(hhat, Some(&prepared), None, opts)?;
        report.observed_linf = Some(traj_linf(&y_full, &y_red)?);
    }
    Ok(report)
}

/// Relative residual tolerance for accepting a `(system, sigma)` pair as
/// balanced.
pub const BALANCED_INPUT_TOL: f64 = 1e-6;

struct BalancedPartition {
    a12: DenseMatrix,
    a21: DenseMatrix,
    b1: DenseMatrix,
    b2: DenseMatrix,
    m12: DenseMatrix,
    m22: DenseMatrix,
    sigma1: Vec<f64>,
    sigma2: Vec<f64>,
}

fn partition_balanced(
    sys: &LdqoSystem,
    sigma: &[f64],
    r: usize,
) -> Result<(BalancedPartition, LdqoSystem)> {
    let n = sys.order();
    if sigma.len() != n {
        return Err(Error::invalid(format!(
            "sigma has {} entries for an order-{n} system",
            sigma.len()
        )));
    }
    if r == 0 || r > n {
        return Err(Error::invalid(format!("r = {r} outside 1..={n}")));
    }
    // verify the balanced equations before trusting the partition
    let sigma_mat = DenseMatrix::from_diagonal(sigma);
    let ctrl = sys
        .a()
        .mul(&sigma_mat)
        .add(&sigma_mat.mul_tr(sys.a()))
        .add(&sys.b().mul_tr(sys.b()));
    let ctrl_scale = sys.b().mul_tr(sys.b()).frobenius_norm().max(1.0);
    let obs = sys
        .a()
        .tr_mul(&sigma_mat)
        .add(&sigma_mat.mul(sys.a()))
        .add(&sys.m().mul(&sigma_mat).mul(sys.m()));
    let obs_scale = sys
        .m()
        .mul(&sigma_mat)
        .mul(sys.m())
        .frobenius_norm()
        .max(1.0);
    if ctrl.frobenius_norm() > BALANCED_INPUT_TOL * ctrl_scale
        || obs.frobenius_norm() > BALANCED_INPUT_TOL * obs_scale
    {
        return Err(Error::invalid(format!(
            "input is not balanced: residuals {:.3e} (controllability), {:.3e} (observability)",
            ctrl.frobenius_norm() / ctrl_scale,
            obs.frobenius_norm() / obs_scale
        )));
    }

    let s = n - r;
    let m_in = sys.inputs();
    let part = BalancedPartition {
        a12: sys.a().block(0, r, r, s),
        a21: sys.a().block(r, 0, s, r),
        b1: sys.b().block(0, 0, r, m_in),
        b2: sys.b().block(r, 0, s, m_in),
        m12: sys.m().block(0, r, r, s),
        m22: sys.m().block(r, r, s, s),
        sigma1: sigma[..r].to_vec(),
        sigma2: sigma[r..].to_vec(),
    };
    let reduced = LdqoSystem::new(
        sys.a().block(0, 0, r, r),
        part.b1.clone(),
        sys.m().block(0, 0, r, r),
    )?;
    Ok((part, reduced))
}

/// The two traces of the singular-value error expression:
/// `(tail_term, q_hat_term)` with
/// `tail_term = trace[(B2 B2^T + 2 Z2 A12 + 2 M_{:2}^T X M12 + 2 X2 A21^T) Sigma2]`
/// and `q_hat_term = trace[B1^T (Q_hat - Sigma1) B1] <= 0`.
fn hsv_error_terms(sys: &LdqoSystem, sigma: &[f64], r: usize) -> Result<(f64, f64, DenseMatrix)> {
    let (part, reduced) = partition_balanced(sys, sigma, r)?;
    let n = sys.order();
    let s = n - r;

    // Q_hat: observability Gramian of the truncated system, whose
    // controllability Gramian is exactly Sigma1.
    let sigma1_mat = DenseMatrix::from_diagonal(&part.sigma1);
    let m11 = reduced.m();
    let q_hat = crate::linalg::solve_lyapunov(
        &reduced.a().transpose(),
        &m11.mul(&sigma1_mat).mul(m11).symmetrized(),
    )?;

    // Cross solutions between the full and truncated systems.
    let x = solve_sylvester(
        sys.a(),
        &reduced.a().transpose(),
        &sys.b().mul_tr(reduced.b()),
    )?;
    let z = solve_sylvester(
        &sys.a().transpose(),
        reduced.a(),
        &sys.m().mul(&x).mul(m11),
    )?;

    let x1 = x.block(0, 0, r, r);
    let x2 = x.block(r, 0, s, r);
    let z2 = z.block(r, 0, s, r);

    let sigma2_mat = DenseMatrix::from_diagonal(&part.sigma2);
    // M_{:2}^T X = M12^T X1 + M22 X2
    let m2x = part.m12.tr_mul(&x1).add(&part.m22.mul(&x2));
    let tail = part
        .b2
        .mul_tr(&part.b2)
        .add(&z2.mul(&part.a12).scale(2.0))
        .add(&m2x.mul(&part.m12).scale(2.0))
        .add(&x2.mul_tr(&part.a21).scale(2.0));
    let tail_term = if s == 0 {
        0.0
    } else {
        tail.mul(&sigma2_mat).trace()
    };

    let d = q_hat.sub(&sigma1_mat);
    let q_hat_term = part.b1.tr_mul(&d).mul(&part.b1).trace();
    Ok((tail_term, q_hat_term, d))
}

/// Singular-value error identity: the exact value of
/// `||H - H_hat||_H2^2` for the order-r truncation of a balanced system,
/// written in the partition blocks and the neglected singular values.
pub fn hsv_error_identity(sys: &LdqoSystem, sigma: &[f64], r: usize) -> Result<f64> {
    let (tail, q_hat_term, _) = hsv_error_terms(sys, sigma, r)?;
    Ok(tail + q_hat_term)
}

/// Neglected-singular-value error bound: drops the (nonpositive)
/// `trace(B1^T (Q_hat - Sigma1) B1)` term, so it dominates the identity.
pub fn hsv_error_bound(sys: &LdqoSystem, sigma: &[f64], r: usize) -> Result<f64> {
    let (tail, _, _) = hsv_error_terms(sys, sigma, r)?;
    Ok(tail)
}

/// Largest eigenvalue of `Q_hat - Sigma1` (negative semi-definite in exact
/// arithmetic), for diagnostics on the corollary's proof obligation.
pub fn hsv_qhat_deficit_max_eig(sys: &LdqoSystem, sigma: &[f64], r: usize) -> Result<f64> {
    let (_, _, d) = hsv_error_terms(sys, sigma, r)?;
    let (vals, _) = linalg::sym_eigen(&d)?;
    Ok(vals.first().copied().unwrap_or(0.0))
}

/// 2-D composite-Simpson approximation of the kernel inner product
/// `int int trace(h(s1, s2) h_hat(s1, s2)^T) ds1 ds2` with
/// `h(s1, s2) = B^T e^{A^T s1} M e^{A s2} B`. Oracle for the Gramian-trace
/// characterization.
pub fn kernel_quadrature_inner(
    h: &LdqoSystem,
    hhat: &LdqoSystem,
    horizon: f64,
    panels: usize,
) -> Result<f64> {
    if h.inputs() != hhat.inputs() {
        return Err(Error::invalid("systems must share the input dimension"));
    }
    let panels = panels + panels % 2;
    let dt = horizon / panels as f64;
    let m_in = h.inputs();

    // propagated input responses e^{At} B on the grid
    let f_h = propagate_input_response(h, dt, panels);
    let f_g = propagate_input_response(hhat, dt, panels);
    // G_i = F_i^T M so that h(s_i, s_j) = G_i F_j
    let g_h: Vec<DenseMatrix> = f_h.iter().map(|f| f.tr_mul(h.m())).collect();
    let g_g: Vec<DenseMatrix> = f_g.iter().map(|f| f.tr_mul(hhat.m())).collect();

    let mut acc = 0.0;
    for i in 0..=panels {
        let wi = simpson_weight(i, panels);
        for j in 0..=panels {
            let wj = simpson_weight(j, panels);
            // trace(h h_hat^T) = <G_i F_j, G_hat_i F_hat_j>_F
            let hij = g_h[i].mul(&f_h[j]);
            let gij = g_g[i].mul(&f_g[j]);
            let mut dot = 0.0;
            for a in 0..m_in {
                for b in 0..m_in {
                    dot += hij[(a, b)] * gij[(a, b)];
                }
            }
            acc += wi * wj * dot;
        }
    }
    Ok(acc * (dt / 3.0) * (dt / 3.0))
}

/// 2-D Simpson approximation of `int int ||h||_F^2`: the squared H2 norm.
pub fn kernel_quadrature_norm(sys: &LdqoSystem, horizon: f64, panels: usize) -> Result<f64> {
    kernel_quadrature_inner(sys, sys, horizon, panels)
}

fn propagate_input_response(sys: &LdqoSystem, dt: f64, panels: usize) -> Vec<DenseMatrix> {
    let step = linalg::expm(&sys.a().scale(dt));
    let mut out = Vec::with_capacity(panels + 1);
    out.push(sys.b().clone());
    for k in 1..=panels {
        let next = step.mul(&out[k - 1]);
        out.push(next);
    }
    out
}

fn simpson_weight(k: usize, panels: usize) -> f64 {
    if k == 0 || k == panels {
        1.0
    } else if k % 2 == 1 {
        4.0
    } else {
        2.0
    }
}

/// Minimum input energy `E_c(x0) = 1/2 x0^T P^{-1} x0` needed to steer the
/// state to `x0`. Requires `P` positive definite.
pub fn controllability_energy(p: &DenseMatrix, x0: &[f64]) -> Result<f64> {
    if p.rows() != x0.len() {
        return Err(Error::invalid("x0 has the wrong length for P"));
    }
    let l = linalg::cholesky(p).map_err(|_| {
        Error::RankDeficient("P is singular or indefinite; controllability energy undefined".into())
    })?;
    // P^{-1} x0 via two triangular solves
    let y = linalg::solve_lower_triangular(&l, x0)?;
    // x0^T P^{-1} x0 = ||L^{-1} x0||^2
    Ok(0.5 * y.iter().map(|v| v * v).sum::<f64>())
}

/// Result of the output-energy bound check.
#[derive(Debug, Clone)]
pub struct EnergyCheck {
    /// `x0^T Q x0`.
    pub bound: f64,
    /// `int y^2 dt` over the simulated horizon with zero input.
    pub observed: f64,
    /// Whether the trajectory stayed inside the validity region: with
    /// `P = L L^T`, `sup_t ||L^{-1} x(t)|| <= 1`.
    pub delta_ok: bool,
}

/// Simulate the free response from `x0` and compare the output energy
/// against the Gramian bound `x0^T Q x0`. The bound is only claimed when
/// the trajectory verifies the containment condition (`delta_ok`).
pub fn observability_energy_check(
    sys: &LdqoSystem,
    q: &DenseMatrix,
    x0: &[f64],
    horizon: f64,
    dt: f64,
) -> Result<EnergyCheck> {
    let qx = q.matvec(x0);
    let bound = x0.iter().zip(&qx).map(|(a, b)| a * b).sum();

    let opts = SimOptions {
        t_final: horizon,
        dt,
        store_states: true,
    };
    let traj = simulate_ldqo(sys, None, Some(x0), &opts)?;
    let observed = output_energy(&traj);

    let (p, _) = controllability_gramian(sys, DEFAULT_RANK_TOL)?;
    let delta_ok = match linalg::cholesky(&p) {
        Ok(l) => {
            let states = traj.states.as_ref().expect("states stored");
            let mut ok = true;
            for x in states {
                let z = linalg::solve_lower_triangular(&l, x)?;
                let norm_sq: f64 = z.iter().map(|v| v * v).sum();
                if norm_sq > 1.0 + 1e-12 {
                    ok = false;
                    break;
                }
            }
            ok
        }
        Err(_) => false,
    };
    Ok(EnergyCheck {
        bound,
        observed,
        delta_ok,
    })
}

/// Trapezoid-rule `int y(t)^2 dt` over a trajectory.
pub fn output_energy(traj: &Trajectory) -> f64 {
    let y = &traj.outputs;
    if y.len() < 2 {
        return 0.0;
    }
    let mut s = 0.5 * (y[0] * y[0] + y[y.len() - 1] * y[y.len() - 1]);
    for v in &y[1..y.len() - 1] {
        s += v * v;
    }
    s * traj.dt
}
