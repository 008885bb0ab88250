//! Experiment sweeps: reduce a system with several methods and orders,
//! simulate against reference trajectories, evaluate bounds, and emit
//! CSV/JSON reports.
//!
//! Independent (method, order, signal) cells run concurrently (capped by
//! `QOMOR_THREADS`); results are merged in a fixed order so the emitted
//! files are byte-identical across runs, apart from the recorded
//! wall-clock times.

use super::generators::{gen_heat1d, gen_msd_chain, gen_random_stable, HeatOutputWeight, MsdConfig};
use super::signals::SignalSpec;
use super::{simulate_ldqo, simulate_qb, traj_linf, SimOptions, Trajectory};
use crate::balancing::{
    reduce_ltbt_with_factor, reduce_spbt_with_factors, Method, ReducedModel, ReductionOutcome,
};
use crate::error::{Error, Result};
use crate::linalg::DEFAULT_RANK_TOL;
use crate::metrics;
use crate::qbmor::{self, QbIterOptions};
use crate::systems::{read_system, to_ld, to_qb, LdRewriteMode, LdqoSystem};
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

/// Where the system under study comes from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SystemSource {
    File { file: String },
    Generator { generator: GeneratorSpec },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum GeneratorSpec {
    Heat1d {
        n: usize,
        #[serde(default = "default_diffusivity")]
        diffusivity: f64,
    },
    Msd {
        masses: usize,
        #[serde(default = "default_msd_damping")]
        damping: f64,
        #[serde(default = "default_msd_weighted")]
        weighted_states: usize,
        #[serde(default)]
        seed: u64,
    },
    Random {
        n: usize,
        m: usize,
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        indefinite: bool,
    },
}

fn default_diffusivity() -> f64 {
    0.05
}
fn default_msd_damping() -> f64 {
    0.4
}
fn default_msd_weighted() -> usize {
    100
}

/// Either an explicit order list or a singular-value threshold
/// (retain all `sigma_k >= threshold * sigma_1`).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OrderPolicy {
    List(Vec<usize>),
    Threshold { threshold: f64 },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_final: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_final: 40.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub system: SystemSource,
    pub methods: Vec<String>,
    pub orders: OrderPolicy,
    pub signals: Vec<SignalSpec>,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub seed: u64,
    /// Shift for the QBTBT Gramians; defaults to `1e-6 ||A||_F`.
    #[serde(default)]
    pub qb_eps: Option<f64>,
    #[serde(default = "default_qb_iters")]
    pub qb_max_iter: usize,
}

fn default_qb_iters() -> usize {
    1
}

impl ExperimentConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        serde_json::from_str(&text).map_err(|e| Error::Malformed {
            path: path.display().to_string(),
            reason: e.to_string(),
        })
    }
}

/// One (method, order, signal) cell of the sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellSummary {
    pub method: String,
    pub order: usize,
    pub signal: String,
    pub h2_norm_full: Option<f64>,
    pub h2_error: Option<f64>,
    pub hsv_identity: Option<f64>,
    pub corollary_bound: Option<f64>,
    pub linf_bound: Option<f64>,
    pub observed_linf: Option<f64>,
    pub runtime_ms: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub schema: u32,
    pub system_order: usize,
    pub system_inputs: usize,
    pub methods: Vec<String>,
    pub cells: Vec<CellSummary>,
}

struct MethodPlan {
    method: Method,
    sigma: Vec<f64>,
    orders: Vec<usize>,
    /// reduction per order, or the error that prevented it
    reductions: Vec<std::result::Result<ReductionOutcome, String>>,
    /// (h2_error, hsv_identity, corollary) per order where applicable
    h2: Vec<(Option<f64>, Option<f64>, Option<f64>)>,
}

fn parse_method(name: &str) -> Result<Method> {
    match name {
        "spbt" => Ok(Method::Spbt),
        "ltbt" => Ok(Method::Ltbt),
        "qbtbt" => Ok(Method::Qbtbt),
        other => Err(Error::invalid(format!(
            "unknown method '{other}' (expected spbt, ltbt or qbtbt)"
        ))),
    }
}

pub fn load_system(source: &SystemSource, base_dir: &Path) -> Result<LdqoSystem> {
    match source {
        SystemSource::File { file } => {
            let p = Path::new(file);
            let path = if p.is_absolute() {
                p.to_path_buf()
            } else {
                base_dir.join(p)
            };
            read_system(path)
        }
        SystemSource::Generator { generator } => match generator {
            GeneratorSpec::Heat1d { n, diffusivity } => gen_heat1d(
                *n,
                *diffusivity,
                &[0],
                &HeatOutputWeight::AverageTemperature,
            ),
            GeneratorSpec::Msd {
                masses,
                damping,
                weighted_states,
                seed,
            } => gen_msd_chain(&MsdConfig {
                masses: *masses,
                damping: *damping,
                weighted_states: (*weighted_states).min(2 * masses),
                seed: *seed,
                ..MsdConfig::default()
            }),
            GeneratorSpec::Random {
                n,
                m,
                seed,
                indefinite,
            } => gen_random_stable(*n, *m, *seed, *indefinite),
        },
    }
}

fn signal_label(spec: &SignalSpec) -> String {
    match spec {
        SignalSpec::SinPlusOffset { .. } => "sin_plus_offset".into(),
        SignalSpec::DampedQuadratic { .. } => "damped_quadratic".into(),
        SignalSpec::ExpDecay { .. } => "exp_decay".into(),
        SignalSpec::WhiteNoiseSampled { seed, .. } => format!("white_noise_{seed}"),
        SignalSpec::CustomSampled { .. } => "custom".into(),
    }
}

fn thread_cap() -> usize {
    std::env::var("QOMOR_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&v| v >= 1)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|v| v.get())
                .unwrap_or(1)
        })
}

fn orders_for(policy: &OrderPolicy, sigma: &[f64], n: usize) -> Result<Vec<usize>> {
    match policy {
        OrderPolicy::List(list) => {
            if list.is_empty() {
                return Err(Error::invalid("order list is empty"));
            }
            for &r in list {
                if r == 0 || r > n {
                    return Err(Error::invalid(format!("order {r} outside 1..={n}")));
                }
            }
            Ok(list.clone())
        }
        OrderPolicy::Threshold { threshold } => {
            if !(0.0..1.0).contains(threshold) {
                return Err(Error::invalid("threshold must lie in [0, 1)"));
            }
            let sigma1 = sigma.first().copied().unwrap_or(0.0);
            let r = sigma.iter().filter(|&&s| s >= threshold * sigma1).count();
            Ok(vec![r.max(1)])
        }
    }
}

fn format_float(v: f64) -> String {
    format!("{v}")
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn build_method_plan(
    method: Method,
    sys: &LdqoSystem,
    zp: &crate::linalg::GramianFactor,
    p_gram: &crate::linalg::DenseMatrix,
    orders_policy: &OrderPolicy,
    qb_opts: &QbIterOptions,
) -> Result<MethodPlan> {
    let n = sys.order();
    let plan = match method {
        Method::Spbt => {
            let (_, zq) =
                crate::gramians::qo_observability_gramian(sys, p_gram, DEFAULT_RANK_TOL)?;
            let probe = crate::balancing::square_root_projectors(zp, &zq, 1)?;
            let sigma = probe.sigma_all.clone();
            let orders = orders_for(orders_policy, &sigma, n)?;
            // balanced core at the numerical rank, for the
            // singular-value bounds
            let rank = sigma
                .iter()
                .filter(|&&s| s > crate::balancing::SIGMA_FLOOR * sigma[0])
                .count();
            let core = reduce_spbt_with_factors(sys, zp, &zq, rank).ok();
            let mut reductions = Vec::new();
            let mut h2 = Vec::new();
            for &r in &orders {
                match reduce_spbt_with_factors(sys, zp, &zq, r) {
                    Ok(outcome) => {
                        let reduced = outcome.model.as_ldqo().unwrap();
                        let h2e = metrics::h2_error(sys, reduced).ok();
                        let (ident, coro) = match (&core, r <= rank) {
                            (Some(core_outcome), true) => {
                                let core_sys = core_outcome.model.as_ldqo().unwrap();
                                let sig = &core_outcome.singular_values[..rank];
                                (
                                    metrics::hsv_error_identity(core_sys, sig, r).ok(),
                                    metrics::hsv_error_bound(core_sys, sig, r).ok(),
                                )
                            }
                            _ => (None, None),
                        };
                        reductions.push(Ok(outcome));
                        h2.push((h2e, ident, coro));
                    }
                    Err(e) => {
                        reductions.push(Err(e.to_string()));
                        h2.push((None, None, None));
                    }
                }
            }
            MethodPlan {
                method,
                sigma,
                orders,
                reductions,
                h2,
            }
        }
        Method::Ltbt => {
            let rewrite = to_ld(sys, LdRewriteMode::PsdOnly, DEFAULT_RANK_TOL)?;
            let (_, zq) =
                crate::gramians::ld_observability_gramian(&rewrite.ld, DEFAULT_RANK_TOL)?;
            let probe = crate::balancing::square_root_projectors(zp, &zq, 1)?;
            let sigma = probe.sigma_all.clone();
            let orders = orders_for(orders_policy, &sigma, n)?;
            let mut reductions = Vec::new();
            let mut h2 = Vec::new();
            for &r in &orders {
                match reduce_ltbt_with_factor(sys, &rewrite.ld, zp, r, DEFAULT_RANK_TOL) {
                    Ok(outcome) => {
                        let h2e = outcome
                            .model
                            .as_ldqo()
                            .and_then(|reduced| metrics::h2_error(sys, reduced).ok());
                        reductions.push(Ok(outcome));
                        h2.push((h2e, None, None));
                    }
                    Err(e) => {
                        reductions.push(Err(e.to_string()));
                        h2.push((None, None, None));
                    }
                }
            }
            MethodPlan {
                method,
                sigma,
                orders,
                reductions,
                h2,
            }
        }
        Method::Qbtbt => {
            let qb = to_qb(sys);
            let grams = qbmor::qb_truncated_gramians(&qb, qb_opts)?;
            let zp_qb = crate::linalg::psd_factor(&grams.p_qb, DEFAULT_RANK_TOL)?;
            let zq_qb = crate::linalg::psd_factor(&grams.q_qb, DEFAULT_RANK_TOL)?;
            let probe = crate::balancing::square_root_projectors(&zp_qb, &zq_qb, 1)?;
            let sigma = probe.sigma_all.clone();
            let orders = orders_for(orders_policy, &sigma, n + 1)?;
            let mut reductions = Vec::new();
            let mut h2 = Vec::new();
            for &r in &orders {
                match qbmor::reduce_qbtbt(sys, r, qb_opts, DEFAULT_RANK_TOL) {
                    Ok(outcome) => {
                        reductions.push(Ok(outcome));
                        h2.push((None, None, None));
                    }
                    Err(e) => {
                        reductions.push(Err(e.to_string()));
                        h2.push((None, None, None));
                    }
                }
            }
            MethodPlan {
                method,
                sigma,
                orders,
                reductions,
                h2,
            }
        }
    };
    Ok(plan)
}

/// Run the full sweep and write reports under `out_dir`:
/// `hsv_<method>.csv` per method, `traj_<method>_r<order>_<signal>.csv`
/// per cell, and `summary.json`.
pub fn run_experiment(
    config: &ExperimentConfig,
    out_dir: impl AsRef<Path>,
) -> Result<ExperimentSummary> {
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir).map_err(|e| Error::Io {
        path: out_dir.display().to_string(),
        source: e,
    })?;
    if config.methods.is_empty() {
        return Err(Error::invalid("methods list is empty"));
    }
    if config.signals.is_empty() {
        return Err(Error::invalid("signals list is empty"));
    }
    let methods: Vec<Method> = config
        .methods
        .iter()
        .map(|m| parse_method(m))
        .collect::<Result<_>>()?;

    let sys = load_system(&config.system, Path::new("."))?;
    sys.require_stable()?;
    let n = sys.order();

    // Shared controllability pair so the SPBT/LTBT comparison isolates the
    // observability side.
    let (p_gram, zp) = crate::gramians::controllability_gramian(&sys, DEFAULT_RANK_TOL)?;
    let h2_full = metrics::h2_norm(&sys).ok();

    let qb_eps = config.qb_eps.unwrap_or_else(|| qbmor::default_eps(&sys));
    let qb_opts = QbIterOptions::new(qb_eps).with_max_iter(config.qb_max_iter);

    // Stage 1 (sequential): per-method singular values and reductions.
    // A failure at this stage (an indefinite weight for the linear
    // rewrite, say) is confined to the method's cells.
    let mut plans: Vec<MethodPlan> = Vec::new();
    for &method in &methods {
        let built = build_method_plan(
            method,
            &sys,
            &zp,
            &p_gram,
            &config.orders,
            &qb_opts,
        );
        plans.push(match built {
            Ok(plan) => plan,
            Err(e) => MethodPlan {
                method,
                sigma: Vec::new(),
                orders: vec![0],
                reductions: vec![Err(e.to_string())],
                h2: vec![(None, None, None)],
            },
        });
    }

    // Stage 2: reference trajectories, one per signal.
    let sim = SimOptions::new(config.integrator.t_final, config.integrator.dt);
    let prepared: Vec<_> = config.signals.iter().map(|s| s.prepare()).collect();
    let full_trajs: Vec<std::result::Result<Trajectory, String>> = prepared
        .iter()
        .map(|sig| simulate_ldqo(&sys, Some(sig), None, &sim).map_err(|e| e.to_string()))
        .collect();

    // Stage 3 (parallel): per-cell simulation and bound evaluation.
    struct CellJob {
        plan_idx: usize,
        order_idx: usize,
        signal_idx: usize,
    }
    let mut jobs = Vec::new();
    for (pi, plan) in plans.iter().enumerate() {
        for oi in 0..plan.orders.len() {
            for si in 0..config.signals.len() {
                jobs.push(CellJob {
                    plan_idx: pi,
                    order_idx: oi,
                    signal_idx: si,
                });
            }
        }
    }

    type CellOutput = (CellSummary, Option<Vec<(f64, f64, f64, f64)>>);
    let results: Mutex<Vec<Option<CellOutput>>> =
        Mutex::new((0..jobs.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let workers = thread_cap().min(jobs.len().max(1));

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, Ordering::Relaxed);
                if idx >= jobs.len() {
                    break;
                }
                let job = &jobs[idx];
                let start = std::time::Instant::now();
                let plan = &plans[job.plan_idx];
                let signal = &config.signals[job.signal_idx];
                let mut cell = CellSummary {
                    method: plan.method.name().to_string(),
                    order: plan.orders[job.order_idx],
                    signal: signal_label(signal),
                    h2_norm_full: h2_full,
                    h2_error: plan.h2[job.order_idx].0,
                    hsv_identity: plan.h2[job.order_idx].1,
                    corollary_bound: plan.h2[job.order_idx].2,
                    linf_bound: None,
                    observed_linf: None,
                    runtime_ms: 0,
                    error: None,
                };
                let mut rows: Option<Vec<(f64, f64, f64, f64)>> = None;
                match (&plan.reductions[job.order_idx], &full_trajs[job.signal_idx]) {
                    (Err(e), _) => cell.error = Some(e.clone()),
                    (_, Err(e)) => cell.error = Some(format!("reference simulation: {e}")),
                    (Ok(outcome), Ok(y_full)) => {
                        let sig = &prepared[job.signal_idx];
                        let reduced_traj = match &outcome.model {
                            ReducedModel::Ldqo(red) => simulate_ldqo(red, Some(sig), None, &sim),
                            ReducedModel::LdPair { induced, .. } => {
                                simulate_ldqo(induced, Some(sig), None, &sim)
                            }
                            ReducedModel::Qb(qb) => simulate_qb(qb, Some(sig), &sim),
                        };
                        match reduced_traj {
                            Err(e) => cell.error = Some(format!("reduced simulation: {e}")),
                            Ok(y_red) => {
                                cell.observed_linf = traj_linf(y_full, &y_red).ok();
                                if let (Some(h2e), Ok(ut)) = (
                                    cell.h2_error,
                                    signal.u_tensor_l2(config.integrator.t_final),
                                ) {
                                    // the scalar signal drives every channel
                                    cell.linf_bound = Some(h2e * sys.inputs() as f64 * ut);
                                }
                                rows = Some(
                                    y_full
                                        .times
                                        .iter()
                                        .zip(&y_full.outputs)
                                        .zip(&y_red.outputs)
                                        .map(|((t, yf), yr)| (*t, *yf, *yr, (yf - yr).abs()))
                                        .collect(),
                                );
                            }
                        }
                    }
                }
                cell.runtime_ms = start.elapsed().as_millis() as u64;
                results.lock().unwrap()[idx] = Some((cell, rows));
            });
        }
    });

    // Stage 4 (sequential, stable order): emit reports.
    for plan in &plans {
        let mut csv = String::from("index,sigma,normalized\n");
        let sigma1 = plan.sigma.first().copied().unwrap_or(0.0);
        for (i, s) in plan.sigma.iter().enumerate() {
            csv.push_str(&format!(
                "{},{},{}\n",
                i + 1,
                format_float(*s),
                format_float(if sigma1 > 0.0 { s / sigma1 } else { 0.0 })
            ));
        }
        write_text(&out_dir.join(format!("hsv_{}.csv", plan.method.name())), &csv)?;
    }

    let collected = results.into_inner().unwrap();
    let mut cells = Vec::with_capacity(jobs.len());
    for slot in collected {
        let (cell, rows) = slot.expect("every cell computed");
        if let Some(rows) = rows {
            let mut csv = String::from("t,y_full,y_red,abs_err\n");
            for (t, yf, yr, ae) in rows {
                csv.push_str(&format!(
                    "{},{},{},{}\n",
                    format_float(t),
                    format_float(yf),
                    format_float(yr),
                    format_float(ae)
                ));
            }
            let path = out_dir.join(format!(
                "traj_{}_r{}_{}.csv",
                cell.method, cell.order, cell.signal
            ));
            write_text(&path, &csv)?;
        }
        cells.push(cell);
    }

    let summary = ExperimentSummary {
        schema: 1,
        system_order: n,
        system_inputs: sys.inputs(),
        methods: config.methods.clone(),
        cells,
    };
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    write_text(&out_dir.join("summary.json"), &text)?;
    Ok(summary)
}
