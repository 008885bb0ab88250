//! Input signals, RK4 simulation, trajectory norms, benchmark model
//! generators and experiment sweeps.

pub mod experiment;
mod generators;
mod signals;

pub use generators::{gen_heat1d, gen_msd_chain, gen_random_stable, HeatOutputWeight, MsdConfig};
pub use signals::{PreparedSignal, SignalSpec};

use crate::error::{Error, Result};
use crate::linalg;
use crate::systems::{LdSystem, LdqoSystem, QbSystem};

/// Time grid with output samples; states are kept only on request.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub outputs: Vec<f64>,
    pub states: Option<Vec<Vec<f64>>>,
    pub dt: f64,
    /// Set when `dt * rho(A)` sits outside the RK4 stability interval; the
    /// run proceeds anyway.
    pub step_warning: bool,
}

/// Integrator settings. `t_final / dt` is rounded to the nearest step count.
#[derive(Debug, Clone, Copy)]
pub struct SimOptions {
    pub t_final: f64,
    pub dt: f64,
    pub store_states: bool,
}

impl SimOptions {
    pub fn new(t_final: f64, dt: f64) -> Self {
        Self {
            t_final,
            dt,
            store_states: false,
        }
    }

    pub fn with_states(mut self) -> Self {
        self.store_states = true;
        self
    }
}

/// RK4 stability interval on the negative real axis.
const RK4_REAL_STABILITY: f64 = 2.785;

fn check_options(n: usize, x0: Option<&[f64]>, opts: &SimOptions) -> Result<usize> {
    if !opts.dt.is_finite() || opts.dt <= 0.0 {
        return Err(Error::invalid("dt must be positive"));
    }
    if !opts.t_final.is_finite() || opts.t_final <= 0.0 {
        return Err(Error::invalid("t_final must be positive"));
    }
    if let Some(x0) = x0 {
        if x0.len() != n {
            return Err(Error::invalid(format!(
                "x0 has length {}, expected {n}",
                x0.len()
            )));
        }
    }
    Ok((opts.t_final / opts.dt).round().max(1.0) as usize)
}

fn spectral_radius_warning(a: &crate::linalg::DenseMatrix, dt: f64) -> bool {
    match linalg::real_schur(a) {
        Ok(schur) => {
            let rho = schur
                .eigenvalues()
                .iter()
                .fold(0.0_f64, |m, &(re, im)| m.max(re.hypot(im)));
            dt * rho > RK4_REAL_STABILITY
        }
        Err(_) => false,
    }
}

/// Classic fixed-step RK4 over `x' = f(t, x)`, observing the state at
/// every grid point (including t = 0).
fn rk4<F, O>(n: usize, x0: &[f64], steps: usize, dt: f64, mut f: F, mut observe: O) -> Result<()>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    O: FnMut(usize, f64, &[f64]),
{
    let mut x = x0.to_vec();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut stage = vec![0.0; n];
    observe(0, 0.0, &x);
    for step in 0..steps {
        let t = step as f64 * dt;
        f(t, &x, &mut k1);
        for i in 0..n {
            stage[i] = x[i] + 0.5 * dt * k1[i];
        }
        f(t + 0.5 * dt, &stage, &mut k2);
        for i in 0..n {
            stage[i] = x[i] + 0.5 * dt * k2[i];
        }
        f(t + 0.5 * dt, &stage, &mut k3);
        for i in 0..n {
            stage[i] = x[i] + dt * k3[i];
        }
        f(t + dt, &stage, &mut k4);
        let mut finite = true;
        for i in 0..n {
            x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            finite &= x[i].is_finite();
        }
        if !finite {
            return Err(Error::SimulationBlowUp {
                time: (step + 1) as f64 * dt,
            });
        }
        observe(step + 1, (step + 1) as f64 * dt, &x);
    }
    Ok(())
}

/// Simulate an LD_QO system under the given input signal (zero input when
/// `signal` is `None`), sampling `y = x^T M x` on the grid.
pub fn simulate_ldqo(
    sys: &LdqoSystem,
    signal: Option<&PreparedSignal>,
    x0: Option<&[f64]>,
    opts: &SimOptions,
) -> Result<Trajectory> {
    let n = sys.order();
    let steps = check_options(n, x0, opts)?;
    let m = sys.inputs();
    let zero = vec![0.0; n];
    let x_init = x0.unwrap_or(&zero);
    let mut times = Vec::with_capacity(steps + 1);
    let mut outputs = Vec::with_capacity(steps + 1);
    let mut states = opts.store_states.then(|| Vec::with_capacity(steps + 1));

    let a = sys.a();
    let b = sys.b();
    rk4(
        n,
        x_init,
        steps,
        opts.dt,
        |t, x, dx| {
            let ax = a.matvec(x);
            dx.copy_from_slice(&ax);
            if let Some(sig) = signal {
                let u = sig.value(t);
                if u != 0.0 {
                    // every input channel is driven by the same scalar signal
                    for (i, dxi) in dx.iter_mut().enumerate() {
                        let mut s = 0.0;
                        for j in 0..m {
                            s += b[(i, j)];
                        }
                        *dxi += s * u;
                    }
                }
            }
        },
        |_, t, x| {
            times.push(t);
            outputs.push(sys.output(x));
            if let Some(st) = states.as_mut() {
                st.push(x.to_vec());
            }
        },
    )?;
    Ok(Trajectory {
        times,
        outputs,
        states,
        dt: opts.dt,
        step_warning: spectral_radius_warning(a, opts.dt),
    })
}

/// Simulate an LD system and record the squared output norm
/// `||C x(t)||_2^2`, directly comparable against a quadratic output.
pub fn simulate_ld_sqnorm(
    ld: &LdSystem,
    signal: Option<&PreparedSignal>,
    x0: Option<&[f64]>,
    opts: &SimOptions,
) -> Result<Trajectory> {
    let n = ld.order();
    let steps = check_options(n, x0, opts)?;
    let m = ld.b.cols();
    let zero = vec![0.0; n];
    let x_init = x0.unwrap_or(&zero);
    let mut times = Vec::with_capacity(steps + 1);
    let mut outputs = Vec::with_capacity(steps + 1);
    let mut states = opts.store_states.then(|| Vec::with_capacity(steps + 1));
    rk4(
        n,
        x_init,
        steps,
        opts.dt,
        |t, x, dx| {
            let ax = ld.a.matvec(x);
            dx.copy_from_slice(&ax);
            if let Some(sig) = signal {
                let u = sig.value(t);
                if u != 0.0 {
                    for (i, dxi) in dx.iter_mut().enumerate() {
                        let mut s = 0.0;
                        for j in 0..m {
                            s += ld.b[(i, j)];
                        }
                        *dxi += s * u;
                    }
                }
            }
        },
        |_, t, x| {
            times.push(t);
            let y = ld.c.matvec(x);
            outputs.push(y.iter().map(|v| v * v).sum());
            if let Some(st) = states.as_mut() {
                st.push(x.to_vec());
            }
        },
    )?;
    Ok(Trajectory {
        times,
        outputs,
        states,
        dt: opts.dt,
        step_warning: spectral_radius_warning(&ld.a, opts.dt),
    })
}

/// Simulate a quadratic-bilinear system (zero initial state), sampling the
/// linear output `C_qb x`.
pub fn simulate_qb(
    qb: &QbSystem,
    signal: Option<&PreparedSignal>,
    opts: &SimOptions,
) -> Result<Trajectory> {
    let n = qb.order();
    let steps = check_options(n, None, opts)?;
    let m = qb.inputs();
    let x_init = vec![0.0; n];
    let mut times = Vec::with_capacity(steps + 1);
    let mut outputs = Vec::with_capacity(steps + 1);
    let mut states = opts.store_states.then(|| Vec::with_capacity(steps + 1));
    rk4(
        n,
        &x_init,
        steps,
        opts.dt,
        |t, x, dx| {
            let ax = qb.a_qb.matvec(x);
            dx.copy_from_slice(&ax);
            let quad = qb.quadratic_term(x);
            for (dxi, q) in dx.iter_mut().zip(&quad) {
                *dxi += q;
            }
            if let Some(sig) = signal {
                let u = sig.value(t);
                if u != 0.0 {
                    for (i, dxi) in dx.iter_mut().enumerate() {
                        let mut s = 0.0;
                        for j in 0..m {
                            s += qb.b_qb[(i, j)];
                        }
                        *dxi += s * u;
                    }
                    // bilinear terms u_j N_j x (same scalar on all channels)
                    for nj in &qb.n_qb {
                        let njx = nj.matvec(x);
                        for (dxi, v) in dx.iter_mut().zip(&njx) {
                            *dxi += u * v;
                        }
                    }
                }
            }
        },
        |_, t, x| {
            times.push(t);
            outputs.push(qb.output(x));
            if let Some(st) = states.as_mut() {
                st.push(x.to_vec());
            }
        },
    )?;
    Ok(Trajectory {
        times,
        outputs,
        states,
        dt: opts.dt,
        step_warning: spectral_radius_warning(&qb.a_qb, opts.dt),
    })
}

/// Max absolute difference of two outputs on matching grids.
pub fn traj_linf(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    if a.outputs.len() != b.outputs.len() || (a.dt - b.dt).abs() > 1e-12 * a.dt {
        return Err(Error::invalid("trajectories are on different grids"));
    }
    Ok(a.outputs
        .iter()
        .zip(&b.outputs)
        .fold(0.0, |m, (x, y)| m.max((x - y).abs())))
}

/// Max absolute output value.
pub fn traj_max_abs(a: &Trajectory) -> f64 {
    a.outputs.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Trapezoid-rule L2 norm of the output over the simulated window.
pub fn traj_l2(a: &Trajectory) -> f64 {
    trapezoid_sq(&a.outputs, a.dt).sqrt()
}

fn trapezoid_sq(values: &[f64], dt: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let mut s = 0.5 * (values[0] * values[0] + values[values.len() - 1] * values[values.len() - 1]);
    for v in &values[1..values.len() - 1] {
        s += v * v;
    }
    s * dt
}

/// `||u (x) u||_{L2}` for a signal: closed form for the built-in analytic
/// kinds, trapezoid quadrature of `||u||_{L2}^2` with the declared decay
/// tail for sampled kinds. Errors on signals that are not square
/// integrable.
pub fn u_tensor_l2(signal: &SignalSpec, t_final: f64) -> Result<f64> {
    signal.u_tensor_l2(t_final)
}
