//! Certification of parametrized trajectories against the defining
//! conditions of normalized parametrized balanced-viscosity solutions:
//! complementarity, normalization, energy-dissipation balance, jump-regime
//! structure, multiplier recovery, a priori bounds, and chain-rule residuals.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{LoadPath, ProblemSpec};
use crate::reparam::ParamTrajectory;
use crate::viscous::{self, AutonomousRun};

/// Default jump-detection threshold. It must sit well above the viscous drag
/// gap of the finest sweep member (of order epsilon times the rate) and well
/// below order-one jump gaps; at the default sweep depths 1e-2 times the
/// largest weight balances both sides.
pub fn default_gap_threshold(spec: &ProblemSpec) -> f64 {
    1e-2 * spec.kappa().max()
}

/// Tolerances of a certification run.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ToleranceProfile {
    pub name: String,
    pub normalization: f64,
    pub complementarity: f64,
    pub edb: f64,
    pub chain_rule: f64,
    /// Jump-detection threshold; `None` materializes the spec-dependent
    /// default into the report.
    pub gap_threshold: Option<f64>,
    /// Admissible `t_hat` variation on the closure of a jump component.
    pub plateau: f64,
}

impl ToleranceProfile {
    pub fn standard() -> Self {
        Self {
            name: "standard".into(),
            normalization: 2e-2,
            complementarity: 1e-3,
            edb: 5e-2,
            chain_rule: 5e-2,
            gap_threshold: None,
            plateau: 1e-10,
        }
    }

    pub fn strict() -> Self {
        Self {
            name: "strict".into(),
            normalization: 1e-3,
            complementarity: 1e-4,
            edb: 1e-2,
            chain_rule: 1e-2,
            gap_threshold: None,
            plateau: 1e-10,
        }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "standard" => Some(Self::standard()),
            "strict" => Some(Self::strict()),
            _ => None,
        }
    }
}

/// Detects the jump regime: nodes with `gap > threshold`, grouped into
/// maximal runs; isolated single-node runs are discarded since the limit set
/// is open.
pub fn detect_g(gap: &[f64], threshold: f64) -> (Vec<bool>, Vec<(usize, usize)>) {
    let mut mask: Vec<bool> = gap.iter().map(|&g| g > threshold).collect();
    let mut components = Vec::new();
    let mut j = 0;
    while j < mask.len() {
        if mask[j] {
            let start = j;
            while j + 1 < mask.len() && mask[j + 1] {
                j += 1;
            }
            if j == start {
                mask[start] = false;
            } else {
                components.push((start, j));
            }
        }
        j += 1;
    }
    (mask, components)
}

/// Result of the multiplier recovery.
#[derive(Clone, Debug)]
pub struct LambdaRecovery {
    pub lambda: Vec<f64>,
    /// Nodes on `G` where the discrete derivative was too small to divide by.
    pub degenerate_nodes: Vec<usize>,
}

/// Recovers the viscous multiplier `lambda = gap / |z_hat'|_V` on the jump
/// regime (zero elsewhere), with central differences in the interior.
pub fn lambda_recover(spec: &ProblemSpec, ptraj: &ParamTrajectory) -> LambdaRecovery {
    let m = ptraj.len();
    let h = ptraj.h_s();
    let mut lambda = vec![0.0; m];
    let mut degenerate = Vec::new();
    for j in 0..m {
        if !ptraj.g_mask[j] {
            continue;
        }
        let dz = vector_derivative(&ptraj.z_hat, &ptraj.g_mask, j, h);
        let speed = spec.v_norm(&dz);
        if speed < 1e-12 {
            degenerate.push(j);
        } else {
            lambda[j] = ptraj.gap[j] / speed;
        }
    }
    LambdaRecovery {
        lambda,
        degenerate_nodes: degenerate,
    }
}

/// Residual of the inclusion `0 in dR(z') + lambda V z' + DE(t_hat, z_hat)`
/// at interior jump-regime nodes, in the componentwise subgradient sense.
pub fn lambda_inclusion_residual(
    spec: &ProblemSpec,
    ptraj: &ParamTrajectory,
    load: &LoadPath,
) -> Result<f64> {
    let m = ptraj.len();
    let h = ptraj.h_s();
    let mut worst: f64 = 0.0;
    for j in 1..m.saturating_sub(1) {
        if !(ptraj.g_mask[j] && ptraj.g_mask[j - 1] && ptraj.g_mask[j + 1]) {
            continue;
        }
        let dz = vector_derivative(&ptraj.z_hat, &ptraj.g_mask, j, h);
        let de = spec.energy_grad(&ptraj.z_hat[j], &load.value(ptraj.t_hat[j]))?;
        let force = -(spec.v() * &dz) * ptraj.lambda[j] - de;
        worst = worst.max(crate::kernels::prox_certificate_residual(
            spec.kappa(),
            &dz,
            &force,
        ));
    }
    Ok(worst)
}

/// Difference stencil at node `j`: central in regime interiors, one-sided at
/// the trajectory endpoints and wherever the jump-regime mask switches, so
/// no stencil straddles the kink at a regime boundary.
fn stencil(j: usize, mask: &[bool]) -> (usize, usize) {
    let m = mask.len();
    if j == 0 {
        return (0, 1);
    }
    if j + 1 == m {
        return (m - 2, m - 1);
    }
    let (before, here, after) = (mask[j - 1], mask[j], mask[j + 1]);
    if here != before && here == after {
        (j, j + 1)
    } else if here == before && here != after {
        (j - 1, j)
    } else {
        (j - 1, j + 1)
    }
}

fn vector_derivative(values: &[DVector<f64>], mask: &[bool], j: usize, h: f64) -> DVector<f64> {
    let (l, r) = stencil(j, mask);
    (&values[r] - &values[l]) / ((r - l) as f64 * h)
}

fn scalar_derivative(values: &[f64], mask: &[bool], j: usize, h: f64) -> f64 {
    let (l, r) = stencil(j, mask);
    (values[r] - values[l]) / ((r - l) as f64 * h)
}

/// Audit of one jump component.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GComponentReport {
    pub start_index: usize,
    pub end_index: usize,
    pub s_start: f64,
    pub s_end: f64,
    pub t_hat_variation: f64,
    pub t_constant: bool,
    pub lambda_positive_interior: bool,
    pub min_interior_lambda: f64,
    /// Discrete `sum h / lambda` over the component; diverges towards the
    /// endpoints for true jump transients (diagnostic only).
    pub inv_lambda_sum: f64,
}

/// A priori estimate audit with the explicit constants of the
/// finite-dimensional instantiation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AprioriReport {
    pub state_sup: f64,
    pub state_bound: f64,
    pub state_ok: bool,
    pub s_value: f64,
    pub s_bound: f64,
    pub s_ok: bool,
    /// Defect of `S = T + total dissipation` (normalization integrated over
    /// the arc-length interval).
    pub s_identity_defect: f64,
    pub s_identity_ok: bool,
}

/// Residuals and pass/fail flags for every certified condition.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CertificateReport {
    pub profile: ToleranceProfile,
    pub gap_threshold: f64,
    pub normalization_defect: f64,
    pub complementarity_defect: f64,
    pub edb_defect: f64,
    pub endpoint_t_ok: bool,
    pub endpoint_z_ok: bool,
    /// The stored jump-set witness separates the regimes (positive gap on
    /// it, below-threshold gap off it).
    pub mask_consistent: bool,
    pub g_components: Vec<GComponentReport>,
    pub degenerate_lambda_nodes: usize,
    pub lambda_inclusion_residual: f64,
    pub force_sup: f64,
    pub force_sup_off_g: f64,
    pub force_bound_ok: bool,
    pub apriori: AprioriReport,
    pub chain_rule_defect: f64,
    pub load_chain_defect: f64,
    pub passed: bool,
}

/// Certifies a parametrized trajectory against the solution conditions at
/// the given tolerance profile.
pub fn certify(
    spec: &ProblemSpec,
    load: &LoadPath,
    z0: &DVector<f64>,
    ptraj: &ParamTrajectory,
    profile: &ToleranceProfile,
) -> Result<CertificateReport> {
    if ptraj.n() != spec.n() || load.dim() != spec.n() || z0.len() != spec.n() {
        return Err(Error::Argument("dimension mismatch".into()));
    }
    if ptraj.len() < 3 {
        return Err(Error::Argument("trajectory needs at least 3 nodes".into()));
    }
    let m = ptraj.len();
    let h = ptraj.h_s();
    let t_final = load.t_final();
    let threshold = profile
        .gap_threshold
        .unwrap_or_else(|| default_gap_threshold(spec));

    // A finalized candidate asserts its own jump set; the certificate
    // verifies the provided witness. Trajectories without one (raw
    // reparametrizations, external files) get the detection heuristic.
    let (g_mask, components, mask_consistent) = if ptraj.g_mask.iter().any(|&b| b) {
        let mask = ptraj.g_mask.clone();
        let mut components = Vec::new();
        let mut j = 0;
        while j < mask.len() {
            if mask[j] {
                let start = j;
                while j + 1 < mask.len() && mask[j + 1] {
                    j += 1;
                }
                components.push((start, j));
            }
            j += 1;
        }
        // The witness must separate the regimes: positive gap on it, gap at
        // most the detection threshold off it.
        let consistent = ptraj
            .gap
            .iter()
            .zip(mask.iter())
            .all(|(&g, &in_g)| if in_g { g > 0.0 } else { g <= threshold });
        (mask, components, consistent)
    } else {
        let (mask, components) = detect_g(&ptraj.gap, threshold);
        (mask, components, true)
    };
    let masked = ParamTrajectory {
        g_mask: g_mask.clone(),
        ..ptraj.clone()
    };
    let recovery = lambda_recover(spec, &masked);
    let masked = ParamTrajectory {
        lambda: recovery.lambda.clone(),
        ..masked
    };

    // Normalization and complementarity, central differences in the interior.
    let mut normalization_defect: f64 = 0.0;
    let mut complementarity_defect: f64 = 0.0;
    for j in 0..m {
        let tp = scalar_derivative(&ptraj.t_hat, &g_mask, j, h);
        complementarity_defect = complementarity_defect.max(tp * ptraj.gap[j]);
        if j == 0 || j + 1 == m {
            continue;
        }
        let dz = vector_derivative(&ptraj.z_hat, &g_mask, j, h);
        let mut total = tp + spec.r_value(&dz);
        if g_mask[j] {
            total += spec.v_norm(&dz) * ptraj.gap[j];
        }
        normalization_defect = normalization_defect.max((total - 1.0).abs());
    }

    // Energy-dissipation balance, trapezoidal in the dissipation weight and
    // the work term.
    let e0 = spec.energy(z0, &load.value(0.0))?;
    let mut edb_defect: f64 = 0.0;
    let mut acc = 0.0;
    let mut diss_total = 0.0;
    for j in 0..m - 1 {
        let dz = &ptraj.z_hat[j + 1] - &ptraj.z_hat[j];
        let mut diss = spec.r_value(&dz);
        if g_mask[j] && g_mask[j + 1] {
            diss += spec.v_norm(&dz) * 0.5 * (ptraj.gap[j] + ptraj.gap[j + 1]);
        }
        let dl = load.value(ptraj.t_hat[j + 1]) - load.value(ptraj.t_hat[j]);
        let z_avg = 0.5 * (&ptraj.z_hat[j] + &ptraj.z_hat[j + 1]);
        acc += diss + dl.dot(&z_avg);
        diss_total += diss;
        let e = spec.energy(&ptraj.z_hat[j + 1], &load.value(ptraj.t_hat[j + 1]))?;
        edb_defect = edb_defect.max((e + acc - e0).abs());
    }

    // Endpoints.
    let endpoint_t_ok = (ptraj.t_hat[0]).abs() <= 1e-9 * t_final.max(1.0)
        && (ptraj.t_hat[m - 1] - t_final).abs() <= 1e-9 * t_final.max(1.0);
    let endpoint_z_ok =
        spec.v_norm(&(&ptraj.z_hat[0] - z0)) <= 1e-9 * (1.0 + spec.v_norm(z0));

    // Jump components.
    let mut g_reports = Vec::with_capacity(components.len());
    for &(i0, i1) in &components {
        let t_slice = &ptraj.t_hat[i0..=i1];
        let t_min = t_slice.iter().cloned().fold(f64::INFINITY, f64::min);
        let t_max = t_slice.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let variation = t_max - t_min;
        let interior = (i0 + 1)..i1;
        let min_lambda = interior
            .clone()
            .map(|j| masked.lambda[j])
            .fold(f64::INFINITY, f64::min);
        let lambda_positive = interior.len() == 0 || min_lambda > 0.0;
        let inv_lambda_sum = (i0..=i1)
            .filter(|&j| masked.lambda[j] > 0.0)
            .map(|j| h / masked.lambda[j])
            .sum();
        g_reports.push(GComponentReport {
            start_index: i0,
            end_index: i1,
            s_start: ptraj.s_grid[i0],
            s_end: ptraj.s_grid[i1],
            t_hat_variation: variation,
            t_constant: variation <= profile.plateau,
            lambda_positive_interior: lambda_positive,
            min_interior_lambda: if min_lambda.is_finite() { min_lambda } else { 0.0 },
            inv_lambda_sum,
        });
    }

    let lambda_inclusion = lambda_inclusion_residual(spec, &masked, load)?;

    // Driving-force bound: off the jump regime the force sits within the
    // stable box up to the detection threshold; on it the sup is reported
    // and must be finite.
    let r_box = spec.stable_set_dual_radius();
    let mut force_sup: f64 = 0.0;
    let mut force_sup_off_g: f64 = 0.0;
    for j in 0..m {
        let de = spec.energy_grad(&ptraj.z_hat[j], &load.value(ptraj.t_hat[j]))?;
        let norm = spec.v_dual_norm(&de);
        force_sup = force_sup.max(norm);
        if !g_mask[j] {
            force_sup_off_g = force_sup_off_g.max(norm);
        }
    }
    let force_bound_ok =
        force_sup.is_finite() && force_sup_off_g <= r_box + threshold + 1e-9;

    // A priori audits with explicit constants.
    let (sup_ell, var_ell) = spec.load_w11_data(load);
    let state_bound = viscous::state_bound(spec, e0, sup_ell, var_ell);
    let state_sup = ptraj
        .z_hat
        .iter()
        .map(|z| spec.a_norm(z))
        .fold(0.0, f64::max);
    let state_ok = state_sup <= state_bound + 1e-9;
    let diss_bound = e0.max(0.0) + spec.embedding_va() * state_bound * (sup_ell + var_ell);
    let s_value = ptraj.s_final();
    let s_bound = t_final + diss_bound;
    let s_scale = s_value.max(1.0);
    let s_ok = s_value <= s_bound + profile.normalization * s_scale;
    let s_identity_defect = (s_value - t_final - diss_total).abs();
    let s_identity_ok = s_identity_defect <= profile.normalization * s_scale;

    // Chain-rule residuals.
    let chain_rule_defect = chain_rule_residual(spec, &ptraj.z_hat)?;
    let load_chain_defect = load_chain_residual(spec, load, &ptraj.t_hat);

    let components_ok = g_reports
        .iter()
        .all(|c| c.t_constant && c.lambda_positive_interior);
    let passed = normalization_defect <= profile.normalization
        && complementarity_defect <= profile.complementarity
        && edb_defect <= profile.edb
        && chain_rule_defect <= profile.chain_rule
        && endpoint_t_ok
        && endpoint_z_ok
        && mask_consistent
        && components_ok
        && force_bound_ok
        && state_ok
        && s_ok
        && s_identity_ok;

    Ok(CertificateReport {
        profile: ToleranceProfile {
            gap_threshold: Some(threshold),
            ..profile.clone()
        },
        gap_threshold: threshold,
        normalization_defect,
        complementarity_defect,
        edb_defect,
        endpoint_t_ok,
        endpoint_z_ok,
        mask_consistent,
        g_components: g_reports,
        degenerate_lambda_nodes: recovery.degenerate_nodes.len(),
        lambda_inclusion_residual: lambda_inclusion,
        force_sup,
        force_sup_off_g,
        force_bound_ok,
        apriori: AprioriReport {
            state_sup,
            state_bound,
            state_ok,
            s_value,
            s_bound,
            s_ok,
            s_identity_defect,
            s_identity_ok,
        },
        chain_rule_defect,
        load_chain_defect,
        passed,
    })
}

/// Midpoint-rule residual of the integrated chain rule
/// `I(z_end) - I(z_0) = sum <D I(z_mid), dz>` along an ordered state path.
pub fn chain_rule_residual(spec: &ProblemSpec, path: &[DVector<f64>]) -> Result<f64> {
    if path.len() < 2 {
        return Err(Error::Argument("path needs at least 2 nodes".into()));
    }
    let mut acc = 0.0;
    for w in path.windows(2) {
        let mid = 0.5 * (&w[0] + &w[1]);
        acc += spec.stored_energy_grad(&mid)?.dot(&(&w[1] - &w[0]));
    }
    let exact = spec.stored_energy(path.last().unwrap())? - spec.stored_energy(&path[0])?;
    Ok((exact - acc).abs())
}

/// Composed-load identity defect
/// `sum |(ell o t_hat)(s_{j+1}) - (ell o t_hat)(s_j) - ell'(t_mid) dt_hat|`
/// aggregated in the dual norm; nonzero contributions only where a step
/// straddles a load node.
pub fn load_chain_residual(spec: &ProblemSpec, load: &LoadPath, t_hat: &[f64]) -> f64 {
    let mut acc = 0.0;
    for w in t_hat.windows(2) {
        let dt = w[1] - w[0];
        let dl = load.value(w[1]) - load.value(w[0]);
        let predicted = load.derivative(0.5 * (w[0] + w[1])) * dt;
        acc += spec.v_dual_norm(&(dl - predicted));
    }
    acc
}

/// A jump transient: the autonomous orbit at frozen load from (a nudge off)
/// the start of a jump component, intended to reproduce the component's end
/// state.
#[derive(Clone, Debug)]
pub struct JumpTransient {
    pub run: AutonomousRun,
    pub z_end: DVector<f64>,
}

/// Integrates the heteroclinic transient of a jump: starting from `z_a`
/// (nudged by `1e-6` towards `toward` if given, since the exact component
/// start is numerically stationary), runs the autonomous system at frozen
/// load until the stability gap falls below `stop_gap`.
pub fn jump_transient(
    spec: &ProblemSpec,
    ell_star: &DVector<f64>,
    z_a: &DVector<f64>,
    toward: Option<&DVector<f64>>,
    delta: f64,
    tau: f64,
    stop_gap: f64,
    horizon_cap: f64,
) -> Result<JumpTransient> {
    let mut start = z_a.clone();
    if let Some(target) = toward {
        let dir = target - z_a;
        let norm = dir.norm();
        if norm > 0.0 {
            start += dir * (1e-6 / norm);
        }
    }
    let run = viscous::solve_autonomous(spec, ell_star, &start, delta, tau, stop_gap, horizon_cap)?;
    let z_end = run.trajectory.states.last().unwrap().clone();
    Ok(JumpTransient { run, z_end })
}
