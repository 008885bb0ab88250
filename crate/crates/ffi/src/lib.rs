//! C ABI for the qomor toolkit: opaque system handles, status codes and a
//! thread-local error message. Matrices cross the boundary as row-major
//! `double` buffers.
//!
//! Every function returns a [`QomorStatus`]; results come back through out
//! pointers. Handles are created by the constructors here and must be
//! released with [`qomor_system_free`].

use qomor::balancing::{reduce_ltbt, reduce_spbt, ReducedModel};
use qomor::error::Error;
use qomor::harness::{simulate_ldqo, SignalSpec, SimOptions};
use qomor::linalg::{DenseMatrix, DEFAULT_RANK_TOL};
use qomor::systems::{read_system, write_system, LdRewriteMode, LdqoSystem};
use std::cell::RefCell;
use std::ffi::{c_char, c_double, CStr, CString};

/// Status codes mirroring the CLI exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QomorStatus {
    Ok = 0,
    /// Invalid arguments or malformed input.
    Invalid = 2,
    /// Numerical failure (non-Hurwitz matrix, divergence, rank collapse).
    Numerical = 3,
    /// File system failure.
    Io = 4,
}

/// Reduction method selector.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QomorMethod {
    Spbt = 0,
    Ltbt = 1,
}

/// Input-signal selector for simulation and bounds.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct QomorSignal {
    /// 0: amplitude * exp(-param * t)
    /// 1: amplitude * exp(-t / param) * t^2
    /// 2: amplitude * sin(2 pi t / param) + offset
    pub kind: i32,
    pub amplitude: c_double,
    pub param: c_double,
    /// Offset for kind 2; ignored otherwise.
    pub offset: c_double,
}

/// Opaque handle around an LD_QO system.
pub struct QomorSystem {
    inner: LdqoSystem,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let sanitized = msg.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &Error) -> QomorStatus {
    match err.exit_code() {
        2 => QomorStatus::Invalid,
        4 => QomorStatus::Io,
        _ => QomorStatus::Numerical,
    }
}

fn fail(err: Error) -> QomorStatus {
    set_error(&err.to_string());
    status_of(&err)
}

fn invalid(msg: &str) -> QomorStatus {
    set_error(msg);
    QomorStatus::Invalid
}

/// Last error message raised on this thread; valid until the next failing
/// call on the same thread.
#[no_mangle]
pub extern "C" fn qomor_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

unsafe fn matrix_from_raw(rows: usize, cols: usize, data: *const c_double) -> Option<DenseMatrix> {
    if data.is_null() {
        return None;
    }
    let slice = std::slice::from_raw_parts(data, rows * cols);
    DenseMatrix::new(rows, cols, slice.to_vec()).ok()
}

/// Build a system from row-major `A` (n x n), `B` (n x m) and `M` (n x n).
/// `M` is symmetrized, which leaves the quadratic output unchanged.
///
/// # Safety
/// `a`, `b`, `m` must point to readable buffers of n*n, n*m and n*n
/// doubles; `out` must be a valid pointer to receive the handle.
#[no_mangle]
pub unsafe extern "C" fn qomor_system_new(
    n: usize,
    m: usize,
    a: *const c_double,
    b: *const c_double,
    m_weight: *const c_double,
    out: *mut *mut QomorSystem,
) -> QomorStatus {
    if out.is_null() {
        return invalid("out pointer is null");
    }
    let (Some(a), Some(b), Some(mw)) = (
        matrix_from_raw(n, n, a),
        matrix_from_raw(n, m, b),
        matrix_from_raw(n, n, m_weight),
    ) else {
        return invalid("null or non-finite matrix data");
    };
    match LdqoSystem::new(a, b, mw) {
        Ok(sys) => {
            *out = Box::into_raw(Box::new(QomorSystem { inner: sys }));
            QomorStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Read a system manifest from a UTF-8 path.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn qomor_system_read(
    path: *const c_char,
    out: *mut *mut QomorSystem,
) -> QomorStatus {
    if path.is_null() || out.is_null() {
        return invalid("null pointer");
    }
    let Ok(path) = CStr::from_ptr(path).to_str() else {
        return invalid("path is not valid UTF-8");
    };
    match read_system(path) {
        Ok(sys) => {
            *out = Box::into_raw(Box::new(QomorSystem { inner: sys }));
            QomorStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Write a system manifest.
///
/// # Safety
/// `sys` must be a live handle from this library; `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn qomor_system_write(
    sys: *const QomorSystem,
    path: *const c_char,
) -> QomorStatus {
    if sys.is_null() || path.is_null() {
        return invalid("null pointer");
    }
    let Ok(path) = CStr::from_ptr(path).to_str() else {
        return invalid("path is not valid UTF-8");
    };
    match write_system(&(*sys).inner, path) {
        Ok(()) => QomorStatus::Ok,
        Err(e) => fail(e),
    }
}

/// Release a handle. Passing NULL is a no-op.
///
/// # Safety
/// `sys` must be a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qomor_system_free(sys: *mut QomorSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

/// State dimension; 0 for a null handle.
///
/// # Safety
/// `sys` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn qomor_system_order(sys: *const QomorSystem) -> usize {
    if sys.is_null() {
        0
    } else {
        (*sys).inner.order()
    }
}

/// Input dimension; 0 for a null handle.
///
/// # Safety
/// `sys` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn qomor_system_inputs(sys: *const QomorSystem) -> usize {
    if sys.is_null() {
        0
    } else {
        (*sys).inner.inputs()
    }
}

/// Which matrix to copy out of a handle.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QomorMatrix {
    A = 0,
    B = 1,
    M = 2,
}

/// Copy one system matrix (row-major) into `buf`, which holds `cap`
/// doubles; `written` receives the entry count.
///
/// # Safety
/// `buf` must point to `cap` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn qomor_system_matrix(
    sys: *const QomorSystem,
    which: QomorMatrix,
    buf: *mut c_double,
    cap: usize,
    written: *mut usize,
) -> QomorStatus {
    if sys.is_null() || buf.is_null() || written.is_null() {
        return invalid("null pointer");
    }
    let sys = &(*sys).inner;
    let mat = match which {
        QomorMatrix::A => sys.a(),
        QomorMatrix::B => sys.b(),
        QomorMatrix::M => sys.m(),
    };
    let needed = mat.rows() * mat.cols();
    if cap < needed {
        return invalid("buffer too small");
    }
    std::ptr::copy_nonoverlapping(mat.data().as_ptr(), buf, needed);
    *written = needed;
    QomorStatus::Ok
}

/// Singular values of the chosen Gramian pair, descending. `buf` holds
/// `cap` doubles; `written` receives how many were produced.
///
/// # Safety
/// Pointer contracts as in [`qomor_system_matrix`].
#[no_mangle]
pub unsafe extern "C" fn qomor_singular_values(
    sys: *const QomorSystem,
    method: QomorMethod,
    buf: *mut c_double,
    cap: usize,
    written: *mut usize,
) -> QomorStatus {
    if sys.is_null() || buf.is_null() || written.is_null() {
        return invalid("null pointer");
    }
    let sys = &(*sys).inner;
    let result = (|| -> qomor::Result<Vec<f64>> {
        let (p, zp) = qomor::gramians::controllability_gramian(sys, DEFAULT_RANK_TOL)?;
        let zq = match method {
            QomorMethod::Spbt => {
                qomor::gramians::qo_observability_gramian(sys, &p, DEFAULT_RANK_TOL)?.1
            }
            QomorMethod::Ltbt => {
                let rewrite = qomor::systems::to_ld(sys, LdRewriteMode::PsdOnly, DEFAULT_RANK_TOL)?;
                qomor::gramians::ld_observability_gramian(&rewrite.ld, DEFAULT_RANK_TOL)?.1
            }
        };
        Ok(qomor::balancing::square_root_projectors(&zp, &zq, 1)?.sigma_all)
    })();
    match result {
        Ok(sigma) => {
            if cap < sigma.len() {
                return invalid("buffer too small");
            }
            std::ptr::copy_nonoverlapping(sigma.as_ptr(), buf, sigma.len());
            *written = sigma.len();
            QomorStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Reduce to order `r`; the result is a new LD_QO handle (for LTBT, the
/// induced quadratic-output model).
///
/// # Safety
/// `sys` live handle; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn qomor_reduce(
    sys: *const QomorSystem,
    method: QomorMethod,
    order: usize,
    out: *mut *mut QomorSystem,
) -> QomorStatus {
    if sys.is_null() || out.is_null() {
        return invalid("null pointer");
    }
    let sys = &(*sys).inner;
    let outcome = match method {
        QomorMethod::Spbt => reduce_spbt(sys, order, DEFAULT_RANK_TOL),
        QomorMethod::Ltbt => reduce_ltbt(sys, order, LdRewriteMode::PsdOnly, DEFAULT_RANK_TOL),
    };
    match outcome {
        Ok(outcome) => {
            let reduced = match outcome.model {
                ReducedModel::Ldqo(s) => s,
                ReducedModel::LdPair { induced, .. } => induced,
                ReducedModel::Qb(_) => unreachable!("spbt/ltbt stay in the LD_QO class"),
            };
            *out = Box::into_raw(Box::new(QomorSystem { inner: reduced }));
            QomorStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// H2 norm of a system.
///
/// # Safety
/// `sys` live handle; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn qomor_h2_norm(sys: *const QomorSystem, out: *mut c_double) -> QomorStatus {
    if sys.is_null() || out.is_null() {
        return invalid("null pointer");
    }
    match qomor::metrics::h2_norm(&(*sys).inner) {
        Ok(v) => {
            *out = v;
            QomorStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// H2 norm of the error system between a system and its reduction.
///
/// # Safety
/// Both handles live; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn qomor_h2_error(
    sys: *const QomorSystem,
    reduced: *const QomorSystem,
    out: *mut c_double,
) -> QomorStatus {
    if sys.is_null() || reduced.is_null() || out.is_null() {
        return invalid("null pointer");
    }
    match qomor::metrics::h2_error(&(*sys).inner, &(*reduced).inner) {
        Ok(v) => {
            *out = v;
            QomorStatus::Ok
        }
        Err(e) => fail(e),
    }
}

fn signal_from_c(sig: &QomorSignal) -> Option<SignalSpec> {
    match sig.kind {
        0 => Some(SignalSpec::exp_decay(sig.amplitude, sig.param)),
        1 => Some(SignalSpec::damped_quadratic(sig.amplitude, sig.param)),
        2 => Some(SignalSpec::sin_plus_offset(sig.amplitude, sig.param, sig.offset)),
        _ => None,
    }
}

/// Output-error bound data for a (system, reduction, signal) triple.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct QomorBoundReport {
    pub h2_error: c_double,
    pub u_tensor_l2: c_double,
    pub linf_bound: c_double,
    pub observed_linf: c_double,
}

/// A posteriori L-infinity bound, with both systems simulated under the
/// signal over `[0, t_final]` at step `dt`.
///
/// # Safety
/// Handles live; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn qomor_linf_bound(
    sys: *const QomorSystem,
    reduced: *const QomorSystem,
    signal: QomorSignal,
    t_final: c_double,
    dt: c_double,
    out: *mut QomorBoundReport,
) -> QomorStatus {
    if sys.is_null() || reduced.is_null() || out.is_null() {
        return invalid("null pointer");
    }
    let Some(spec) = signal_from_c(&signal) else {
        return invalid("unknown signal kind");
    };
    let opts = SimOptions::new(t_final, dt);
    match qomor::metrics::linf_output_bound(&(*sys).inner, &(*reduced).inner, &spec, Some(&opts)) {
        Ok(report) => {
            *out = QomorBoundReport {
                h2_error: report.h2_error,
                u_tensor_l2: report.u_tensor_l2,
                linf_bound: report.linf_bound,
                observed_linf: report.observed_linf.unwrap_or(f64::NAN),
            };
            QomorStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Simulate the quadratic output on a uniform grid. `y` must hold at least
/// `round(t_final / dt) + 1` doubles; `written` receives the sample count.
///
/// # Safety
/// `sys` live handle, `y` writable for `cap` doubles, `written` valid.
#[no_mangle]
pub unsafe extern "C" fn qomor_simulate(
    sys: *const QomorSystem,
    signal: QomorSignal,
    t_final: c_double,
    dt: c_double,
    y: *mut c_double,
    cap: usize,
    written: *mut usize,
) -> QomorStatus {
    if sys.is_null() || y.is_null() || written.is_null() {
        return invalid("null pointer");
    }
    let Some(spec) = signal_from_c(&signal) else {
        return invalid("unknown signal kind");
    };
    let prepared = spec.prepare();
    match simulate_ldqo(
        &(*sys).inner,
        Some(&prepared),
        None,
        &SimOptions::new(t_final, dt),
    ) {
        Ok(traj) => {
            if cap < traj.outputs.len() {
                return invalid("output buffer too small");
            }
            std::ptr::copy_nonoverlapping(traj.outputs.as_ptr(), y, traj.outputs.len());
            *written = traj.outputs.len();
            QomorStatus::Ok
        }
        Err(e) => fail(e),
    }
}
