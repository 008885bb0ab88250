//! Command-line front end: model generation, reduction, singular values,
//! error bounds, simulation and experiment sweeps.
//!
//! Exit codes: 0 success, 2 validation error, 3 numerical failure,
//! 4 i/o error.

use clap::{Parser, Subcommand, ValueEnum};
use qomor::balancing::{reduce_ltbt, reduce_spbt, ReducedModel};
use qomor::error::{Error, Result};
use qomor::harness::experiment::{run_experiment, ExperimentConfig};
use qomor::harness::{
    gen_heat1d, gen_msd_chain, gen_random_stable, simulate_ldqo, HeatOutputWeight, MsdConfig,
    SignalSpec, SimOptions,
};
use qomor::linalg::DEFAULT_RANK_TOL;
use qomor::metrics;
use qomor::qbmor::{self, QbIterOptions};
use qomor::systems::{read_system, write_system, LdRewriteMode, QbSystem};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "qomor",
    version,
    about = "Balanced truncation and output error bounds for linear systems with quadratic output"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelKind {
    Heat1d,
    Msd,
    Random,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodKind {
    Spbt,
    Ltbt,
    Qbtbt,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a benchmark model and write it as a system manifest.
    Generate {
        #[arg(long, value_enum)]
        model: ModelKind,
        /// State dimension (must be even for the msd chain).
        #[arg(long)]
        n: usize,
        /// Input count (random model only).
        #[arg(long, default_value_t = 1)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Heat-chain diffusivity.
        #[arg(long, default_value_t = 0.05)]
        diffusivity: f64,
        /// Damping coefficient of the msd chain.
        #[arg(long, default_value_t = 0.4)]
        damping: f64,
        /// Number of squared state components in the msd output.
        #[arg(long, default_value_t = 100)]
        weighted_states: usize,
        /// Draw an indefinite output weight for the random model.
        #[arg(long, default_value_t = false)]
        indefinite: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reduce a system to the requested order.
    Reduce {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        method: MethodKind,
        /// Explicit reduced order.
        #[arg(long, conflicts_with = "threshold")]
        order: Option<usize>,
        /// Retain every singular value >= threshold * sigma_1 instead of
        /// giving an explicit order.
        #[arg(long)]
        threshold: Option<f64>,
        /// Regularization shift for qbtbt (default 1e-6 ||A||_F).
        #[arg(long)]
        eps: Option<f64>,
        /// Fixed-point iterations for the qbtbt Gramians.
        #[arg(long, default_value_t = 1)]
        qb_iters: usize,
        /// Factor the absolute value of an indefinite weight (ltbt only).
        #[arg(long, default_value_t = false)]
        absolute_split: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the singular-value sequence of a method to CSV.
    Hsv {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        method: MethodKind,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate the output error bounds for an SPBT reduction.
    Bounds {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        order: usize,
        /// Signal spec, e.g. `exp_decay`, `exp_decay:rate=0.25`,
        /// `damped_quadratic:tau=5`.
        #[arg(long)]
        signal: String,
        #[arg(long, default_value_t = 40.0)]
        t_final: f64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
    },
    /// Simulate a system under an input signal and write t,y to CSV.
    Simulate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        signal: String,
        #[arg(long)]
        t_final: f64,
        #[arg(long)]
        dt: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an experiment sweep described by a JSON config.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

/// Parse `name[:key=value,...]` into a signal spec.
fn parse_signal(text: &str) -> Result<SignalSpec> {
    let (name, params) = match text.split_once(':') {
        Some((n, p)) => (n, p),
        None => (text, ""),
    };
    let get = |key: &str, default: f64| -> Result<f64> {
        for pair in params.split(',').filter(|p| !p.is_empty()) {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("bad signal parameter '{pair}'")))?;
            if k == key {
                return v
                    .parse()
                    .map_err(|_| Error::invalid(format!("bad value for '{key}': {v}")));
            }
        }
        Ok(default)
    };
    match name {
        "exp_decay" => Ok(SignalSpec::exp_decay(
            get("amplitude", 1.0)?,
            get("rate", 0.25)?,
        )),
        "damped_quadratic" => Ok(SignalSpec::damped_quadratic(
            get("amplitude", 1.0)?,
            get("tau", 5.0)?,
        )),
        "sin_plus_offset" => Ok(SignalSpec::sin_plus_offset(
            get("amplitude", 1.0)?,
            get("period", 10.0)?,
            get("offset", 1.0)?,
        )),
        "white_noise" => Ok(SignalSpec::white_noise(
            get("seed", 0.0)? as u64,
            get("scale", 1.0)?,
            get("dt", 1e-3)?,
            get("t_final", 40.0)?,
        )),
        other => Err(Error::invalid(format!(
            "unknown signal '{other}' (expected exp_decay, damped_quadratic, sin_plus_offset or white_noise)"
        ))),
    }
}

fn write_qb_system(qb: &QbSystem, path: &PathBuf) -> Result<()> {
    let encode = |m: &qomor::DenseMatrix| -> Vec<Vec<String>> {
        (0..m.rows())
            .map(|i| (0..m.cols()).map(|j| format!("{}", m[(i, j)])).collect())
            .collect()
    };
    let doc = serde_json::json!({
        "type": "qb",
        "order": qb.order(),
        "inputs": qb.inputs(),
        "matrices": {
            "a_qb": encode(&qb.a_qb),
            "b_qb": encode(&qb.b_qb),
            "c_qb": encode(&qb.c_qb),
            "h_qb": encode(&qb.h_qb),
            "n_qb": qb.n_qb.iter().map(encode).collect::<Vec<_>>(),
        }
    });
    std::fs::write(path, serde_json::to_string_pretty(&doc).unwrap()).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate {
            model,
            n,
            m,
            seed,
            diffusivity,
            damping,
            weighted_states,
            indefinite,
            out,
        } => {
            let sys = match model {
                ModelKind::Heat1d => {
                    gen_heat1d(n, diffusivity, &[0], &HeatOutputWeight::AverageTemperature)?
                }
                ModelKind::Msd => {
                    if n % 2 != 0 {
                        return Err(Error::invalid(
                            "msd state dimension must be even (two states per mass)",
                        ));
                    }
                    gen_msd_chain(&MsdConfig {
                        masses: n / 2,
                        damping,
                        weighted_states: weighted_states.min(n),
                        seed,
                        ..MsdConfig::default()
                    })?
                }
                ModelKind::Random => gen_random_stable(n, m, seed, indefinite)?,
            };
            write_system(&sys, &out)?;
            println!("wrote order-{} system to {}", sys.order(), out.display());
            Ok(())
        }
        Command::Reduce {
            input,
            method,
            order,
            threshold,
            eps,
            qb_iters,
            absolute_split,
            out,
        } => {
            let sys = read_system(&input)?;
            let order = match (order, threshold) {
                (Some(r), None) => r,
                (None, Some(theta)) => {
                    if !(0.0..1.0).contains(&theta) {
                        return Err(Error::invalid("threshold must lie in [0, 1)"));
                    }
                    let (p, zp) =
                        qomor::gramians::controllability_gramian(&sys, DEFAULT_RANK_TOL)?;
                    let sigma = match method {
                        MethodKind::Ltbt => {
                            let rewrite = qomor::systems::to_ld(
                                &sys,
                                LdRewriteMode::PsdOnly,
                                DEFAULT_RANK_TOL,
                            )?;
                            let (_, zq) = qomor::gramians::ld_observability_gramian(
                                &rewrite.ld,
                                DEFAULT_RANK_TOL,
                            )?;
                            qomor::balancing::square_root_projectors(&zp, &zq, 1)?.sigma_all
                        }
                        _ => {
                            let (_, zq) = qomor::gramians::qo_observability_gramian(
                                &sys,
                                &p,
                                DEFAULT_RANK_TOL,
                            )?;
                            qomor::balancing::square_root_projectors(&zp, &zq, 1)?.sigma_all
                        }
                    };
                    sigma
                        .iter()
                        .filter(|&&s| s >= theta * sigma[0])
                        .count()
                        .max(1)
                }
                _ => {
                    return Err(Error::invalid(
                        "give exactly one of --order or --threshold",
                    ))
                }
            };
            let outcome = match method {
                MethodKind::Spbt => reduce_spbt(&sys, order, DEFAULT_RANK_TOL)?,
                MethodKind::Ltbt => {
                    let mode = if absolute_split {
                        LdRewriteMode::AbsoluteSplit
                    } else {
                        LdRewriteMode::PsdOnly
                    };
                    reduce_ltbt(&sys, order, mode, DEFAULT_RANK_TOL)?
                }
                MethodKind::Qbtbt => {
                    let eps = eps.unwrap_or_else(|| qbmor::default_eps(&sys));
                    let opts = QbIterOptions::new(eps).with_max_iter(qb_iters);
                    qbmor::reduce_qbtbt(&sys, order, &opts, DEFAULT_RANK_TOL)?
                }
            };
            match &outcome.model {
                ReducedModel::Ldqo(red) | ReducedModel::LdPair { induced: red, .. } => {
                    write_system(red, &out)?;
                }
                ReducedModel::Qb(qb) => write_qb_system(qb, &out)?,
            }
            if outcome.gap_warning {
                eprintln!(
                    "warning: sigma_{order} and sigma_{} are nearly equal; the stability \
                     theorem's spectral-gap hypothesis may be violated",
                    order + 1
                );
            }
            let diag = serde_json::json!({
                "method": outcome.method.name(),
                "order": order,
                "singular_values": outcome.singular_values,
                "stability_ok": outcome.stability_ok,
                "gap_warning": outcome.gap_warning,
            });
            println!("{}", serde_json::to_string_pretty(&diag).unwrap());
            Ok(())
        }
        Command::Hsv { input, method, out } => {
            let sys = read_system(&input)?;
            let (p, zp) = qomor::gramians::controllability_gramian(&sys, DEFAULT_RANK_TOL)?;
            let sigma = match method {
                MethodKind::Spbt => {
                    let (_, zq) =
                        qomor::gramians::qo_observability_gramian(&sys, &p, DEFAULT_RANK_TOL)?;
                    qomor::balancing::square_root_projectors(&zp, &zq, 1)?.sigma_all
                }
                MethodKind::Ltbt => {
                    let rewrite =
                        qomor::systems::to_ld(&sys, LdRewriteMode::PsdOnly, DEFAULT_RANK_TOL)?;
                    let (_, zq) =
                        qomor::gramians::ld_observability_gramian(&rewrite.ld, DEFAULT_RANK_TOL)?;
                    qomor::balancing::square_root_projectors(&zp, &zq, 1)?.sigma_all
                }
                MethodKind::Qbtbt => {
                    return Err(Error::invalid(
                        "hsv supports spbt and ltbt; qbtbt singular values come from the \
                         compare sweep",
                    ))
                }
            };
            let mut csv = String::from("index,sigma,normalized\n");
            for (i, s) in sigma.iter().enumerate() {
                csv.push_str(&format!("{},{},{}\n", i + 1, s, s / sigma[0]));
            }
            std::fs::write(&out, csv).map_err(|e| Error::Io {
                path: out.display().to_string(),
                source: e,
            })?;
            println!("wrote {} singular values to {}", sigma.len(), out.display());
            Ok(())
        }
        Command::Bounds {
            input,
            order,
            signal,
            t_final,
            dt,
        } => {
            let sys = read_system(&input)?;
            let spec = parse_signal(&signal)?;
            let outcome = reduce_spbt(&sys, order, DEFAULT_RANK_TOL)?;
            let reduced = outcome.model.as_ldqo().unwrap();
            let sim = SimOptions::new(t_final, dt);
            let mut report = metrics::linf_output_bound(&sys, reduced, &spec, Some(&sim))?;
            // singular-value bounds from the balanced core
            let sigma1 = outcome.singular_values[0];
            let rank = outcome
                .singular_values
                .iter()
                .filter(|&&s| s > qomor::balancing::SIGMA_FLOOR * sigma1)
                .count();
            if order <= rank {
                if let Ok(core) = reduce_spbt(&sys, rank, DEFAULT_RANK_TOL) {
                    let core_sys = core.model.as_ldqo().unwrap();
                    let sig = &core.singular_values[..rank];
                    report.hsv_identity_value =
                        metrics::hsv_error_identity(core_sys, sig, order).ok();
                    report.corollary_bound = metrics::hsv_error_bound(core_sys, sig, order).ok();
                }
            }
            let doc = serde_json::json!({
                "order": order,
                "h2_error": report.h2_error,
                "u_tensor_l2": report.u_tensor_l2,
                "linf_bound": report.linf_bound,
                "hsv_identity": report.hsv_identity_value,
                "corollary_bound": report.corollary_bound,
                "observed_linf": report.observed_linf,
            });
            println!("{}", serde_json::to_string_pretty(&doc).unwrap());
            Ok(())
        }
        Command::Simulate {
            input,
            signal,
            t_final,
            dt,
            out,
        } => {
            let sys = read_system(&input)?;
            let spec = parse_signal(&signal)?;
            let prepared = spec.prepare();
            let traj = simulate_ldqo(&sys, Some(&prepared), None, &SimOptions::new(t_final, dt))?;
            if traj.step_warning {
                eprintln!(
                    "warning: dt = {dt} is large for the spectral radius of A; \
                     the integration may be inaccurate"
                );
            }
            let mut csv = String::from("t,y\n");
            for (t, y) in traj.times.iter().zip(&traj.outputs) {
                csv.push_str(&format!("{t},{y}\n"));
            }
            std::fs::write(&out, csv).map_err(|e| Error::Io {
                path: out.display().to_string(),
                source: e,
            })?;
            println!("wrote {} samples to {}", traj.times.len(), out.display());
            Ok(())
        }
        Command::Compare { config, out_dir } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            let summary = run_experiment(&cfg, &out_dir)?;
            let failed = summary.cells.iter().filter(|c| c.error.is_some()).count();
            println!(
                "ran {} cells ({} failed); reports in {}",
                summary.cells.len(),
                failed,
                out_dir.display()
            );
            Ok(())
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
