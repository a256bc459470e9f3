use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ratebv::cli::{self, Command, Overrides};

/// Balanced-viscosity solutions of rate-independent systems: solve, certify,
/// and optimally control.
#[derive(Parser)]
#[command(name = "ratebv", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(clap::Args, Clone)]
struct CommonArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides output.directory).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed of any randomized optimizer restart.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (falls back to RATEBV_THREADS, then all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Certification tolerance profile.
    #[arg(long, value_parser = ["strict", "standard"])]
    profile: Option<String>,
}

#[derive(Subcommand)]
enum Sub {
    /// Integrate the viscously regularized system on [0, T].
    SolveViscous(CommonArgs),
    /// Integrate the autonomous constant-load system until stability.
    SolveAutonomous(CommonArgs),
    /// Reparametrize a single viscous solve by contact-potential arc length.
    Reparam(CommonArgs),
    /// Run the vanishing-viscosity sweep and extract a BV candidate.
    ExtractBv(CommonArgs),
    /// Certify a BV candidate (freshly extracted, or from --input).
    Certify {
        #[command(flatten)]
        common: CommonArgs,
        /// Parametrized-trajectory CSV to certify instead of extracting.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Integrate the heteroclinic transient of a jump at frozen load.
    JumpTransient(CommonArgs),
    /// Minimize j(z(S)) + alpha * |load|_H1 over load node values.
    Optimize(CommonArgs),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (command, common, input) = match cli.command {
        Sub::SolveViscous(c) => (Command::SolveViscous, c, None),
        Sub::SolveAutonomous(c) => (Command::SolveAutonomous, c, None),
        Sub::Reparam(c) => (Command::Reparam, c, None),
        Sub::ExtractBv(c) => (Command::ExtractBv, c, None),
        Sub::Certify { common, input } => (Command::Certify, common, input),
        Sub::JumpTransient(c) => (Command::JumpTransient, c, None),
        Sub::Optimize(c) => (Command::Optimize, c, None),
    };
    let overrides = Overrides {
        out: common.out,
        seed: common.seed,
        threads: common.threads,
        profile: common.profile,
        input,
    };
    ExitCode::from(cli::run(command, &common.config, &overrides) as u8)
}
