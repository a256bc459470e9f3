//! JSON run configuration: schema, validation with field-path diagnostics,
//! default materialization, and the provenance hash embedded in artifacts.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::certify::ToleranceProfile;
use crate::control::{Fidelity, OptimizerKind};
use crate::error::{Error, Result};
use crate::model::{ControlObjective, LoadPath, Nonconvexity, ProblemSpec};
use crate::reparam::TauRule;

fn cfg_err(path: &str, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.to_string(),
        message: message.into(),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum FSection {
    Zero,
    DoubleWell { beta: f64 },
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub n: usize,
    /// Row-major symmetric positive-definite operators.
    pub a: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub kappa: Vec<f64>,
    pub f: FSection,
    #[serde(default = "default_q")]
    pub q: f64,
    /// Initial state; zeros when omitted.
    #[serde(default)]
    pub z0: Option<Vec<f64>>,
}

fn default_q() -> f64 {
    1.0
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct LoadSection {
    pub node_times: Vec<f64>,
    pub node_values: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default)]
    pub delta: f64,
    #[serde(default = "default_stop_gap")]
    pub stop_gap: f64,
    /// Time cap of autonomous runs; a spectral heuristic when omitted.
    #[serde(default)]
    pub horizon_cap: Option<f64>,
    /// Frozen load of autonomous runs and jump transients.
    #[serde(default)]
    pub ell_star: Option<Vec<f64>>,
    /// Start state of jump transients.
    #[serde(default)]
    pub z_a: Option<Vec<f64>>,
}

fn default_epsilon() -> f64 {
    1e-3
}
fn default_tau() -> f64 {
    1e-4
}
fn default_stop_gap() -> f64 {
    1e-8
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            epsilon: default_epsilon(),
            tau: default_tau(),
            delta: 0.0,
            stop_gap: default_stop_gap(),
            horizon_cap: None,
            ell_star: None,
            z_a: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ReparamSection {
    #[serde(default = "default_eps_list")]
    pub eps_list: Vec<f64>,
    #[serde(default)]
    pub tau_rule: TauRule,
    #[serde(default = "default_s_samples")]
    pub s_samples: usize,
    #[serde(default)]
    pub extend_constant: bool,
}

fn default_eps_list() -> Vec<f64> {
    vec![1e-2, 1e-3, 1e-4]
}
fn default_s_samples() -> usize {
    2001
}

impl Default for ReparamSection {
    fn default() -> Self {
        Self {
            eps_list: default_eps_list(),
            tau_rule: TauRule::default(),
            s_samples: default_s_samples(),
            extend_constant: false,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CertifySection {
    #[serde(default = "default_profile")]
    pub profile: String,
    /// Jump-detection threshold; spec-dependent default when omitted.
    #[serde(default)]
    pub gap_threshold: Option<f64>,
}

fn default_profile() -> String {
    "standard".into()
}

impl Default for CertifySection {
    fn default() -> Self {
        Self {
            profile: default_profile(),
            gap_threshold: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveSection {
    pub z_des: Vec<f64>,
    pub alpha: f64,
    #[serde(default = "default_j_kind")]
    pub j_kind: String,
}

fn default_j_kind() -> String {
    "v_norm_distance".into()
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ControlSection {
    pub objective: ObjectiveSection,
    #[serde(default)]
    pub optimizer: OptimizerKind,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default = "default_fidelity")]
    pub fidelity: Fidelity,
    #[serde(default)]
    pub seed: u64,
}

fn default_budget() -> usize {
    200
}
fn default_fidelity() -> Fidelity {
    Fidelity::SurrogateEps {
        epsilon: 1e-2,
        tau: 1e-3,
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_directory")]
    pub directory: String,
    #[serde(default = "default_formats")]
    pub formats: Vec<String>,
}

fn default_directory() -> String {
    "out".into()
}
fn default_formats() -> Vec<String> {
    vec!["csv".into(), "json".into()]
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: default_directory(),
            formats: default_formats(),
        }
    }
}

/// Validated run configuration with all defaults materialized.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub load: LoadSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub reparam: ReparamSection,
    #[serde(default)]
    pub certify: CertifySection,
    #[serde(default)]
    pub control: Option<ControlSection>,
    #[serde(default)]
    pub output: OutputSection,
}

/// Parses, validates, and materializes a configuration from JSON text.
pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let mut config: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config {
        path: "<schema>".into(),
        message: e.to_string(),
    })?;
    validate(&mut config)?;
    Ok(config)
}

/// Parses a configuration file; unreadable files map to the I/O error class.
pub fn parse_config_file(path: &std::path::Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text)
}

fn validate(config: &mut RunConfig) -> Result<()> {
    let n = config.model.n;
    if n == 0 {
        return Err(cfg_err("model.n", "state dimension must be positive"));
    }
    let check_matrix = |name: &str, rows: &Vec<Vec<f64>>| -> Result<()> {
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(cfg_err(name, format!("expected an {n} x {n} matrix")));
        }
        Ok(())
    };
    check_matrix("model.a", &config.model.a)?;
    check_matrix("model.v", &config.model.v)?;
    if config.model.kappa.len() != n {
        return Err(cfg_err("model.kappa", format!("expected {n} entries")));
    }
    for (i, &k) in config.model.kappa.iter().enumerate() {
        if !(k > 0.0) {
            return Err(cfg_err(
                &format!("model.kappa[{i}]"),
                "must be strictly positive",
            ));
        }
    }
    if let FSection::DoubleWell { beta } = config.model.f {
        if !(beta >= 0.0) {
            return Err(cfg_err("model.f.beta", "must be nonnegative"));
        }
    }
    if !(config.model.q >= 0.0) {
        return Err(cfg_err("model.q", "must be nonnegative"));
    }
    match &config.model.z0 {
        Some(z0) if z0.len() != n => {
            return Err(cfg_err("model.z0", format!("expected {n} entries")))
        }
        Some(_) => {}
        None => config.model.z0 = Some(vec![0.0; n]),
    }

    if config.load.node_times.len() < 2 {
        return Err(cfg_err("load.node_times", "need at least two nodes"));
    }
    if config.load.node_times[0] != 0.0 {
        return Err(cfg_err("load.node_times[0]", "load must start at t = 0"));
    }
    if config.load.node_times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(cfg_err("load.node_times", "must be strictly increasing"));
    }
    if config.load.node_values.len() != config.load.node_times.len() {
        return Err(cfg_err("load.node_values", "one value row per node time"));
    }
    for (k, row) in config.load.node_values.iter().enumerate() {
        if row.len() != n {
            return Err(cfg_err(
                &format!("load.node_values[{k}]"),
                format!("expected {n} entries"),
            ));
        }
    }

    if !(config.solver.epsilon > 0.0) {
        return Err(cfg_err("solver.epsilon", "must be positive"));
    }
    if !(config.solver.tau > 0.0) {
        return Err(cfg_err("solver.tau", "must be positive"));
    }
    if !(config.solver.delta >= 0.0) {
        return Err(cfg_err("solver.delta", "must be nonnegative"));
    }
    if !(config.solver.stop_gap > 0.0) {
        return Err(cfg_err("solver.stop_gap", "must be positive"));
    }
    if let Some(ell) = &config.solver.ell_star {
        if ell.len() != n {
            return Err(cfg_err("solver.ell_star", format!("expected {n} entries")));
        }
    }
    if let Some(z_a) = &config.solver.z_a {
        if z_a.len() != n {
            return Err(cfg_err("solver.z_a", format!("expected {n} entries")));
        }
    }

    if config.reparam.eps_list.iter().any(|&e| !(e > 0.0)) {
        return Err(cfg_err("reparam.eps_list", "entries must be positive"));
    }
    if config.reparam.eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(cfg_err("reparam.eps_list", "must be strictly decreasing"));
    }
    if config.reparam.s_samples < 2 {
        return Err(cfg_err("reparam.s_samples", "need at least two samples"));
    }
    if let TauRule::Proportional { factor } = config.reparam.tau_rule {
        if !(factor > 0.0) {
            return Err(cfg_err("reparam.tau_rule.factor", "must be positive"));
        }
    }

    if ToleranceProfile::by_name(&config.certify.profile).is_none() {
        return Err(cfg_err(
            "certify.profile",
            "unknown profile (expected \"strict\" or \"standard\")",
        ));
    }
    if let Some(threshold) = config.certify.gap_threshold {
        if !(threshold > 0.0) {
            return Err(cfg_err("certify.gap_threshold", "must be positive"));
        }
    }

    if let Some(control) = &config.control {
        if control.objective.z_des.len() != n {
            return Err(cfg_err(
                "control.objective.z_des",
                format!("expected {n} entries"),
            ));
        }
        if !(control.objective.alpha > 0.0) {
            return Err(cfg_err("control.objective.alpha", "must be positive"));
        }
        if control.objective.j_kind != "v_norm_distance" {
            return Err(cfg_err(
                "control.objective.j_kind",
                "unknown objective kind",
            ));
        }
    }

    for fmt in &config.output.formats {
        if fmt != "csv" && fmt != "json" {
            return Err(cfg_err("output.formats", format!("unknown format {fmt:?}")));
        }
    }
    Ok(())
}

impl RunConfig {
    /// Canonical JSON of the materialized configuration.
    pub fn effective_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Provenance hash embedded in every artifact.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.effective_json().as_bytes());
        hex_string(&hasher.finalize())
    }

    pub fn problem_spec(&self) -> Result<ProblemSpec> {
        let n = self.model.n;
        let flat_a: Vec<f64> = self.model.a.iter().flatten().copied().collect();
        let flat_v: Vec<f64> = self.model.v.iter().flatten().copied().collect();
        let f = match self.model.f {
            FSection::Zero => Nonconvexity::Zero,
            FSection::DoubleWell { beta } => Nonconvexity::DoubleWell { beta },
        };
        ProblemSpec::new(
            DMatrix::from_row_slice(n, n, &flat_a),
            DMatrix::from_row_slice(n, n, &flat_v),
            DVector::from_vec(self.model.kappa.clone()),
            f,
            self.model.q,
        )
    }

    pub fn load_path(&self) -> Result<LoadPath> {
        LoadPath::new(
            self.load.node_times.clone(),
            self.load
                .node_values
                .iter()
                .map(|row| DVector::from_vec(row.clone()))
                .collect(),
        )
    }

    pub fn initial_state(&self) -> DVector<f64> {
        DVector::from_vec(
            self.model
                .z0
                .clone()
                .unwrap_or_else(|| vec![0.0; self.model.n]),
        )
    }

    pub fn tolerance_profile(&self) -> ToleranceProfile {
        let mut profile = ToleranceProfile::by_name(&self.certify.profile)
            .expect("profile validated at parse time");
        if self.certify.gap_threshold.is_some() {
            profile.gap_threshold = self.certify.gap_threshold;
        }
        profile
    }

    pub fn extract_options(&self) -> crate::reparam::ExtractOptions {
        crate::reparam::ExtractOptions {
            tau_rule: self.reparam.tau_rule.clone(),
            s_samples: self.reparam.s_samples,
            extend_constant: self.reparam.extend_constant,
            gap_threshold: self.certify.gap_threshold,
        }
    }

    pub fn control_objective(&self) -> Result<ControlObjective> {
        let control = self
            .control
            .as_ref()
            .ok_or_else(|| cfg_err("control", "section required for optimization"))?;
        ControlObjective::new(
            DVector::from_vec(control.objective.z_des.clone()),
            control.objective.alpha,
        )
    }

    /// Horizon cap of autonomous runs: configured, or a spectral heuristic
    /// (a thousand viscous relaxation times).
    pub fn horizon_cap(&self, spec: &ProblemSpec) -> f64 {
        self.solver
            .horizon_cap
            .unwrap_or_else(|| 1e3 * spec.lambda_max_v() / spec.lambda_min_a())
    }
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
