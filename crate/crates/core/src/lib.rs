//! Balanced-viscosity analysis of finite-dimensional rate-independent
//! systems.
//!
//! The crate integrates viscously regularized evolutions, reparametrizes them
//! by contact-potential arc length, extracts vanishing-viscosity limit
//! candidates, certifies them against the defining conditions of normalized
//! parametrized balanced-viscosity solutions, and runs an outer
//! Tikhonov-regularized load optimization constrained to certified states.

pub mod artifacts;
pub mod certify;
pub mod cli;
pub mod config;
pub mod control;
pub mod error;
mod kernels;
pub mod model;
pub mod reparam;
pub mod viscous;

pub use certify::{
    certify, chain_rule_residual, detect_g, jump_transient, lambda_recover, CertificateReport,
    JumpTransient, ToleranceProfile,
};
pub use control::{
    optimize, reduced_objective, ControlResult, Evaluation, Fidelity, OptimizeOptions,
    OptimizerKind,
};
pub use config::{parse_config_file, parse_config_str, RunConfig};
pub use error::{Error, Result};
pub use model::{ControlObjective, CustomF, JKind, LoadPath, Nonconvexity, ProblemSpec};
pub use reparam::{
    arclength, extract_bv, reparametrize, ConvergencePair, ConvergenceReport, ExtractOptions,
    ParamTrajectory, SweepMember, TauRule,
};
pub use viscous::{
    edb_residual, nu_delta_initial, solve_autonomous, solve_viscous, AutonomousRun, Drive,
    ViscousTrajectory,
};
