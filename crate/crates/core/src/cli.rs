//! Command-line pipeline: subcommand dispatch, artifact writing, and the
//! exit-code contract (0 success, 1 failed certificate or non-Cauchy sweep,
//! 2 schema violation, 3 unreadable file, 4 numerical failure).

use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde::Serialize;

use crate::artifacts;
use crate::certify;
use crate::config::{parse_config_file, RunConfig};
use crate::control::{self, OptimizeOptions};
use crate::error::{Error, Result};
use crate::reparam;
use crate::viscous::{self, Drive};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CERTIFIED_FAILURE: i32 = 1;
pub const EXIT_SCHEMA: i32 = 2;
pub const EXIT_UNREADABLE: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    SolveViscous,
    SolveAutonomous,
    Reparam,
    ExtractBv,
    Certify,
    JumpTransient,
    Optimize,
}

/// Flag-level overrides of the configuration.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub profile: Option<String>,
    /// Pre-computed parametrized trajectory for `certify`.
    pub input: Option<PathBuf>,
}

pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Config { .. } | Error::Argument(_) | Error::Domain(_) => EXIT_SCHEMA,
        Error::Io(_) => EXIT_UNREADABLE,
        Error::Json(_) => EXIT_SCHEMA,
        Error::Numerical { .. } | Error::StepFailure { .. } | Error::Invariant(_) => EXIT_NUMERICAL,
    }
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    error: String,
    exit_code: i32,
    config_hash: Option<&'a str>,
}

/// Loads the configuration, executes the subcommand, and returns the exit
/// code; all failures also emit a JSON error report when the output
/// directory is available.
pub fn run(command: Command, config_path: &Path, overrides: &Overrides) -> i32 {
    if let Some(threads) = overrides.threads.or_else(|| {
        std::env::var("RATEBV_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    }) {
        // A global pool can be initialized once per process; later calls are
        // reported and ignored.
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            log::debug!("thread pool already initialized: {e}");
        }
    }

    let mut config = match parse_config_file(config_path) {
        Ok(config) => config,
        Err(err) => {
            eprintln!("error: {err}");
            return exit_code_for(&err);
        }
    };
    if let Some(out) = &overrides.out {
        config.output.directory = out.display().to_string();
    }
    if let Some(profile) = &overrides.profile {
        config.certify.profile = profile.clone();
        if certify::ToleranceProfile::by_name(profile).is_none() {
            eprintln!("error: unknown profile {profile:?}");
            return EXIT_SCHEMA;
        }
    }
    if let Some(seed) = overrides.seed {
        if let Some(control) = &mut config.control {
            control.seed = seed;
        }
    }

    let out_dir = PathBuf::from(&config.output.directory);
    if let Err(err) = std::fs::create_dir_all(&out_dir) {
        eprintln!("error: cannot create output directory: {err}");
        return EXIT_UNREADABLE;
    }
    let hash = config.hash();
    if let Err(err) = std::fs::write(out_dir.join("effective_config.json"), config.effective_json())
    {
        eprintln!("error: cannot write effective config: {err}");
        return EXIT_UNREADABLE;
    }

    match execute(command, &config, overrides, &out_dir, &hash) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            let code = exit_code_for(&err);
            let report = ErrorReport {
                error: err.to_string(),
                exit_code: code,
                config_hash: Some(&hash),
            };
            let _ = artifacts::write_json(&out_dir.join("error.json"), &hash, &report);
            code
        }
    }
}

fn wants(config: &RunConfig, format: &str) -> bool {
    config.output.formats.iter().any(|f| f == format)
}

#[derive(Serialize)]
struct ViscousSummary {
    epsilon: f64,
    tau: f64,
    delta: f64,
    steps: usize,
    t_final: f64,
    max_edb_residual: f64,
    terminal_gap: Option<f64>,
    converged: Option<bool>,
}

fn execute(
    command: Command,
    config: &RunConfig,
    overrides: &Overrides,
    out_dir: &Path,
    hash: &str,
) -> Result<i32> {
    let spec = config.problem_spec()?;
    let z0 = config.initial_state();
    match command {
        Command::SolveViscous => {
            let load = config.load_path()?;
            let traj =
                viscous::solve_viscous(&spec, &load, &z0, config.solver.epsilon, config.solver.tau)?;
            let residuals = viscous::edb_residual(&spec, &traj, Drive::Path(&load))?;
            let summary = ViscousSummary {
                epsilon: traj.epsilon,
                tau: config.solver.tau,
                delta: 0.0,
                steps: traj.steps(),
                t_final: traj.t_final(),
                max_edb_residual: residuals.iter().fold(0.0, |a, r| a.max(r.abs())),
                terminal_gap: None,
                converged: None,
            };
            if wants(config, "csv") {
                artifacts::write_viscous_csv(&out_dir.join("viscous.csv"), hash, &traj)?;
            }
            if wants(config, "json") {
                artifacts::write_json(&out_dir.join("viscous.json"), hash, &summary)?;
            }
            Ok(EXIT_OK)
        }
        Command::SolveAutonomous => {
            let ell_star = required_vector(&config.solver.ell_star, "solver.ell_star")?;
            let run = viscous::solve_autonomous(
                &spec,
                &ell_star,
                &z0,
                config.solver.delta,
                config.solver.tau,
                config.solver.stop_gap,
                config.horizon_cap(&spec),
            )?;
            let residuals =
                viscous::edb_residual(&spec, &run.trajectory, Drive::Constant(&ell_star))?;
            let summary = ViscousSummary {
                epsilon: 0.0,
                tau: config.solver.tau,
                delta: config.solver.delta,
                steps: run.trajectory.steps(),
                t_final: run.trajectory.t_final(),
                max_edb_residual: residuals.iter().fold(0.0, |a, r| a.max(r.abs())),
                terminal_gap: Some(run.terminal_gap),
                converged: Some(run.converged),
            };
            if wants(config, "csv") {
                artifacts::write_viscous_csv(&out_dir.join("autonomous.csv"), hash, &run.trajectory)?;
            }
            if wants(config, "json") {
                artifacts::write_json(&out_dir.join("autonomous.json"), hash, &summary)?;
            }
            Ok(EXIT_OK)
        }
        Command::Reparam => {
            let load = config.load_path()?;
            let traj =
                viscous::solve_viscous(&spec, &load, &z0, config.solver.epsilon, config.solver.tau)?;
            let ptraj = reparam::reparametrize(&spec, &traj, &load, config.reparam.s_samples)?;
            if wants(config, "csv") {
                artifacts::write_param_csv(&out_dir.join("param.csv"), hash, &ptraj)?;
            }
            if wants(config, "json") {
                artifacts::write_json(
                    &out_dir.join("param.json"),
                    hash,
                    &serde_json::json!({
                        "s_final": ptraj.s_final(),
                        "samples": ptraj.len(),
                        "provenance": ptraj.provenance,
                    }),
                )?;
            }
            Ok(EXIT_OK)
        }
        Command::ExtractBv => {
            let load = config.load_path()?;
            let (candidate, report) = reparam::extract_bv(
                &spec,
                &load,
                &z0,
                &config.reparam.eps_list,
                &config.extract_options(),
            )?;
            if wants(config, "csv") {
                artifacts::write_param_csv(&out_dir.join("bv_candidate.csv"), hash, &candidate)?;
            }
            if wants(config, "json") {
                artifacts::write_json(&out_dir.join("convergence.json"), hash, &report)?;
            }
            Ok(if report.cauchy {
                EXIT_OK
            } else {
                EXIT_CERTIFIED_FAILURE
            })
        }
        Command::Certify => {
            let load = config.load_path()?;
            let ptraj = match &overrides.input {
                Some(path) => artifacts::read_param_csv(path)?,
                None => {
                    reparam::extract_bv(
                        &spec,
                        &load,
                        &z0,
                        &config.reparam.eps_list,
                        &config.extract_options(),
                    )?
                    .0
                }
            };
            let report = certify::certify(&spec, &load, &z0, &ptraj, &config.tolerance_profile())?;
            if wants(config, "json") {
                artifacts::write_json(&out_dir.join("certificate.json"), hash, &report)?;
            }
            Ok(if report.passed {
                EXIT_OK
            } else {
                EXIT_CERTIFIED_FAILURE
            })
        }
        Command::JumpTransient => {
            let ell_star = required_vector(&config.solver.ell_star, "solver.ell_star")?;
            let z_a = required_vector(&config.solver.z_a, "solver.z_a")?;
            let jt = certify::jump_transient(
                &spec,
                &ell_star,
                &z_a,
                None,
                config.solver.delta,
                config.solver.tau,
                config.solver.stop_gap,
                config.horizon_cap(&spec),
            )?;
            if wants(config, "csv") {
                artifacts::write_viscous_csv(&out_dir.join("transient.csv"), hash, &jt.run.trajectory)?;
            }
            if wants(config, "json") {
                artifacts::write_json(
                    &out_dir.join("transient.json"),
                    hash,
                    &serde_json::json!({
                        "z_end": jt.z_end.as_slice(),
                        "terminal_gap": jt.run.terminal_gap,
                        "converged": jt.run.converged,
                        "steps": jt.run.trajectory.steps(),
                    }),
                )?;
            }
            Ok(EXIT_OK)
        }
        Command::Optimize => {
            let load = config.load_path()?;
            let control = config.control.as_ref().ok_or_else(|| Error::Config {
                path: "control".into(),
                message: "section required for optimization".into(),
            })?;
            if control.budget == 0 {
                return Err(Error::Numerical {
                    op: "control search",
                    iterations: 0,
                    residual: f64::NAN,
                });
            }
            let objective = config.control_objective()?;
            let options = OptimizeOptions {
                optimizer: control.optimizer.clone(),
                budget: control.budget,
                fidelity: control.fidelity.clone(),
                final_extraction: config.extract_options(),
                final_eps_list: config.reparam.eps_list.clone(),
                profile: config.tolerance_profile(),
                seed: control.seed,
            };
            let result = control::optimize(&spec, &z0, &objective, &load, &options)?;
            if wants(config, "json") {
                artifacts::write_json(
                    &out_dir.join("control_result.json"),
                    hash,
                    &serde_json::json!({
                        "best_objective": result.best_objective,
                        "best_misfit": result.best_misfit,
                        "best_h1": result.best_h1,
                        "evaluations": result.evaluations,
                        "coercivity_ok": result.coercivity_ok,
                        "history": result.history,
                        "certificate": result.certificate,
                    }),
                )?;
                artifacts::write_json(
                    &out_dir.join("best_load.json"),
                    hash,
                    &serde_json::json!({
                        "node_times": result.best_load.node_times(),
                        "node_values": result
                            .best_load
                            .node_values()
                            .iter()
                            .map(|v| v.iter().copied().collect::<Vec<_>>())
                            .collect::<Vec<_>>(),
                    }),
                )?;
            }
            if wants(config, "csv") {
                artifacts::write_param_csv(&out_dir.join("best_state.csv"), hash, &result.state)?;
            }
            Ok(if result.certificate.passed {
                EXIT_OK
            } else {
                EXIT_CERTIFIED_FAILURE
            })
        }
    }
}

fn required_vector(field: &Option<Vec<f64>>, path: &str) -> Result<DVector<f64>> {
    field
        .as_ref()
        .map(|v| DVector::from_vec(v.clone()))
        .ok_or_else(|| Error::Config {
            path: path.into(),
            message: "required for this subcommand".into(),
        })
}
