//! Contact-potential arc-length reparametrization of viscous trajectories and
//! the vanishing-viscosity extraction of a parametrized BV candidate.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certify;
use crate::error::{Error, Result};
use crate::model::{LoadPath, ProblemSpec};
use crate::viscous::{self, ViscousTrajectory};

/// One member of a vanishing-viscosity sweep.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SweepMember {
    pub epsilon: f64,
    pub tau: f64,
    pub s_final: f64,
}

/// A trajectory in arc-length parametrization: the triple `(S, t_hat, z_hat)`
/// sampled on a uniform s-grid, plus the stability gap, the viscous
/// multiplier, and the jump-regime mask.
#[derive(Clone, Debug)]
pub struct ParamTrajectory {
    /// Uniform grid on `[0, S]`.
    pub s_grid: Vec<f64>,
    pub t_hat: Vec<f64>,
    pub z_hat: Vec<DVector<f64>>,
    /// Stability gap `m(ell(t_hat), z_hat)` per node.
    pub gap: Vec<f64>,
    /// Viscous multiplier; zero until recovered, zero off `G`.
    pub lambda: Vec<f64>,
    /// Membership in the jump regime `G`; false until detected.
    pub g_mask: Vec<bool>,
    pub provenance: Vec<SweepMember>,
}

impl ParamTrajectory {
    pub fn len(&self) -> usize {
        self.s_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s_grid.is_empty()
    }

    pub fn s_final(&self) -> f64 {
        *self.s_grid.last().unwrap()
    }

    pub fn h_s(&self) -> f64 {
        self.s_final() / (self.len() - 1) as f64
    }

    pub fn n(&self) -> usize {
        self.z_hat[0].len()
    }

    /// Linear interpolation of `z_hat` at arc length `s`, constant beyond the
    /// endpoints.
    pub fn z_at(&self, s: f64) -> DVector<f64> {
        if s <= 0.0 {
            return self.z_hat[0].clone();
        }
        if s >= self.s_final() {
            return self.z_hat.last().unwrap().clone();
        }
        let h = self.h_s();
        let j = ((s / h) as usize).min(self.len() - 2);
        let theta = (s - self.s_grid[j]) / h;
        &self.z_hat[j] * (1.0 - theta) + &self.z_hat[j + 1] * theta
    }
}

/// Rule mapping a viscosity `epsilon` to the time step of its solve.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TauRule {
    /// `tau = factor * epsilon`.
    Proportional { factor: f64 },
    /// Explicit `(epsilon, tau)` pairs.
    Table { pairs: Vec<(f64, f64)> },
}

impl TauRule {
    pub fn tau_for(&self, epsilon: f64) -> Result<f64> {
        match self {
            TauRule::Proportional { factor } => {
                if !(*factor > 0.0) {
                    return Err(Error::Argument("tau factor must be positive".into()));
                }
                Ok(factor * epsilon)
            }
            TauRule::Table { pairs } => pairs
                .iter()
                .find(|(e, _)| (e - epsilon).abs() <= 1e-12 * epsilon.abs())
                .map(|&(_, t)| t)
                .ok_or_else(|| {
                    Error::Argument(format!("tau table has no entry for epsilon = {epsilon}"))
                }),
        }
    }
}

impl Default for TauRule {
    fn default() -> Self {
        TauRule::Proportional { factor: 0.1 }
    }
}

/// Cauchy comparison of two consecutive sweep members.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ConvergencePair {
    pub eps_coarse: f64,
    pub eps_fine: f64,
    /// sup-V distance after affine rescaling of both members to a common grid.
    pub d_affine: f64,
    /// sup-V distance after constant extension to the larger horizon.
    pub d_constant: f64,
    /// `|S_coarse - S_fine|`.
    pub s_gap: f64,
}

/// Cauchy table of a vanishing-viscosity sweep.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub pairs: Vec<ConvergencePair>,
    /// `(epsilon, S_epsilon)` per member, in sweep order.
    pub s_values: Vec<(f64, f64)>,
    pub cauchy_affine: bool,
    pub cauchy_constant: bool,
    /// Convention requested for the headline `cauchy` flag.
    pub extend_constant: bool,
    pub cauchy: bool,
}

/// Options of the vanishing-viscosity extraction.
#[derive(Clone, Debug)]
pub struct ExtractOptions {
    pub tau_rule: TauRule,
    pub s_samples: usize,
    /// Compare members by constant extension (the compactness convention)
    /// instead of affine rescaling.
    pub extend_constant: bool,
    /// Threshold of the jump-regime detection applied to the candidate;
    /// `None` uses the certify default.
    pub gap_threshold: Option<f64>,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        Self {
            tau_rule: TauRule::default(),
            s_samples: 2001,
            extend_constant: false,
            gap_threshold: None,
        }
    }
}

/// Arc length `s(t_k)` of a viscous trajectory:
/// `s(t_{k+1}) = s(t_k) + tau + tau * p(rate_k, -DE(t_mid, z_mid))` with
/// midpoint force evaluation. Strictly increasing since each increment is at
/// least `tau`.
pub fn arclength(
    spec: &ProblemSpec,
    traj: &ViscousTrajectory,
    load: &LoadPath,
) -> Result<Vec<f64>> {
    if traj.epsilon <= 0.0 {
        return Err(Error::Argument(
            "arc length is defined for epsilon-trajectories".into(),
        ));
    }
    if traj.n() != spec.n() || load.dim() != spec.n() {
        return Err(Error::Argument("trajectory/load dimension mismatch".into()));
    }
    if (traj.t_final() - load.t_final()).abs() > 1e-9 * load.t_final().max(1.0) {
        return Err(Error::Argument(
            "trajectory final time does not match the load".into(),
        ));
    }
    let mut s = Vec::with_capacity(traj.times.len());
    s.push(0.0);
    for k in 0..traj.steps() {
        let tau = traj.times[k + 1] - traj.times[k];
        let t_mid = 0.5 * (traj.times[k] + traj.times[k + 1]);
        let z_mid = 0.5 * (&traj.states[k] + &traj.states[k + 1]);
        let xi = spec.driving_force(&load.value(t_mid), &z_mid)?;
        let p = spec.contact_potential(&traj.rates[k], &xi)?;
        s.push(s[k] + tau * (1.0 + p));
    }
    Ok(s)
}

/// Inverts the arc-length map onto a uniform s-grid and transports the
/// trajectory: `t_hat = s^{-1}`, `z_hat = z o t_hat` by piecewise-linear
/// interpolation, with the stability gap filled per node. The multiplier and
/// the `G`-mask are left for certification.
pub fn reparametrize(
    spec: &ProblemSpec,
    traj: &ViscousTrajectory,
    load: &LoadPath,
    s_samples: usize,
) -> Result<ParamTrajectory> {
    if s_samples < 2 {
        return Err(Error::Argument("s_samples must be at least 2".into()));
    }
    let s = arclength(spec, traj, load)?;
    let s_final = *s.last().unwrap();
    let m = s_samples;
    let h = s_final / (m - 1) as f64;

    let mut s_grid = Vec::with_capacity(m);
    let mut t_hat = Vec::with_capacity(m);
    let mut z_hat = Vec::with_capacity(m);
    let mut k = 0usize;
    for j in 0..m {
        let sj = if j + 1 == m { s_final } else { j as f64 * h };
        while k + 2 < s.len() && s[k + 1] < sj {
            k += 1;
        }
        let theta = ((sj - s[k]) / (s[k + 1] - s[k])).clamp(0.0, 1.0);
        let t = traj.times[k] + theta * (traj.times[k + 1] - traj.times[k]);
        let z = &traj.states[k] * (1.0 - theta) + &traj.states[k + 1] * theta;
        s_grid.push(sj);
        t_hat.push(t);
        z_hat.push(z);
    }
    // Endpoints are exact by construction.
    *t_hat.last_mut().unwrap() = traj.t_final();
    *z_hat.last_mut().unwrap() = traj.states.last().unwrap().clone();

    let gap = s_grid
        .iter()
        .zip(t_hat.iter().zip(z_hat.iter()))
        .map(|(_, (t, z))| spec.stability_gap(&load.value(*t), z).map(|(g, _)| g))
        .collect::<Result<Vec<_>>>()?;

    let len = s_grid.len();
    Ok(ParamTrajectory {
        s_grid,
        t_hat,
        z_hat,
        gap,
        lambda: vec![0.0; len],
        g_mask: vec![false; len],
        provenance: vec![SweepMember {
            epsilon: traj.epsilon,
            tau: traj.times[1] - traj.times[0],
            s_final,
        }],
    })
}

/// Runs the vanishing-viscosity sweep, reports the pairwise Cauchy table
/// under both grid conventions, and returns the finest member as the BV
/// candidate with the jump structure finalized (mask, plateau, multiplier).
pub fn extract_bv(
    spec: &ProblemSpec,
    load: &LoadPath,
    z0: &DVector<f64>,
    eps_list: &[f64],
    options: &ExtractOptions,
) -> Result<(ParamTrajectory, ConvergenceReport)> {
    if eps_list.len() < 3 {
        return Err(Error::Argument("eps_list needs at least 3 entries".into()));
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) || eps_list.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::Argument(
            "eps_list must be strictly decreasing and positive".into(),
        ));
    }

    let members: Vec<ParamTrajectory> = eps_list
        .par_iter()
        .map(|&eps| {
            let tau = options.tau_rule.tau_for(eps)?;
            let traj = viscous::solve_viscous(spec, load, z0, eps, tau)?;
            reparametrize(spec, &traj, load, options.s_samples)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut pairs = Vec::with_capacity(members.len() - 1);
    for w in members.windows(2) {
        let (coarse, fine) = (&w[0], &w[1]);
        // Affine rescaling: node j of either member sits at the same fraction
        // of its own horizon, so nodes pair up directly.
        let d_affine = coarse
            .z_hat
            .iter()
            .zip(fine.z_hat.iter())
            .map(|(a, b)| spec.v_norm(&(a - b)))
            .fold(0.0, f64::max);
        // Constant extension to the common horizon.
        let s_max = coarse.s_final().max(fine.s_final());
        let m = coarse.len();
        let d_constant = (0..m)
            .map(|j| {
                let s = s_max * j as f64 / (m - 1) as f64;
                spec.v_norm(&(coarse.z_at(s) - fine.z_at(s)))
            })
            .fold(0.0, f64::max);
        pairs.push(ConvergencePair {
            eps_coarse: coarse.provenance[0].epsilon,
            eps_fine: fine.provenance[0].epsilon,
            d_affine,
            d_constant,
            s_gap: (coarse.s_final() - fine.s_final()).abs(),
        });
    }

    let strictly_decreasing = |f: &dyn Fn(&ConvergencePair) -> f64| {
        pairs.windows(2).all(|w| f(&w[1]) < f(&w[0]))
    };
    let cauchy_affine = strictly_decreasing(&|p: &ConvergencePair| p.d_affine);
    let cauchy_constant = strictly_decreasing(&|p: &ConvergencePair| p.d_constant);
    let cauchy = if options.extend_constant {
        cauchy_constant
    } else {
        cauchy_affine
    };
    if !cauchy {
        log::warn!("vanishing-viscosity sweep is not Cauchy under the requested convention");
    }

    let report = ConvergenceReport {
        pairs,
        s_values: members
            .iter()
            .map(|m| (m.provenance[0].epsilon, m.s_final()))
            .collect(),
        cauchy_affine,
        cauchy_constant,
        extend_constant: options.extend_constant,
        cauchy,
    };

    let mut candidate = members.into_iter().last().unwrap();
    candidate.provenance = eps_list
        .iter()
        .map(|&eps| SweepMember {
            epsilon: eps,
            tau: options.tau_rule.tau_for(eps).unwrap(),
            s_final: report
                .s_values
                .iter()
                .find(|(e, _)| *e == eps)
                .map(|(_, s)| *s)
                .unwrap(),
        })
        .collect();
    finalize_candidate(spec, load, &mut candidate, options.gap_threshold);

    Ok((candidate, report))
}

/// Stamps the limit structure onto the finest-viscosity member: detects the
/// jump regime, snaps `t_hat` to a constant on each detected component (the
/// limit object is constant there, the finite-viscosity member only
/// approximately so), and recovers the multiplier.
fn finalize_candidate(
    spec: &ProblemSpec,
    load: &LoadPath,
    ptraj: &mut ParamTrajectory,
    gap_threshold: Option<f64>,
) {
    let threshold = gap_threshold.unwrap_or_else(|| certify::default_gap_threshold(spec));
    let (mut mask, mut components) = certify::detect_g(&ptraj.gap, threshold);
    let m = ptraj.len();

    // The detection cuts at the threshold, but a jump's landing tail keeps a
    // positive, fast-vanishing gap below it until the state sticks or
    // resumes quasistatic drag. Growing a component while the gap decays
    // geometrically (with a lookahead so flat drag nodes stay out) keeps the
    // regime boundary where the gap is negligible.
    for c in 0..components.len() {
        let limit = if c + 1 < components.len() {
            components[c + 1].0 - 1
        } else {
            m - 1
        };
        let (_, ref mut i1) = components[c];
        while *i1 + 1 < limit
            && ptraj.gap[*i1 + 1] > 0.0
            && ptraj.gap[*i1 + 1] <= 0.5 * ptraj.gap[*i1]
            && ptraj.gap[*i1 + 2] <= 0.9 * ptraj.gap[*i1 + 1]
        {
            *i1 += 1;
            mask[*i1] = true;
        }
    }
    ptraj.g_mask = mask;
    for &(i0, i1) in &components {
        let mut plateau = ptraj.t_hat[i0..=i1].iter().sum::<f64>() / (i1 - i0 + 1) as f64;
        // A component touching the interval ends is pinned by the endpoint
        // values.
        if i0 == 0 {
            plateau = ptraj.t_hat[0];
        }
        if i1 == m - 1 {
            plateau = ptraj.t_hat[m - 1];
        }
        for t in &mut ptraj.t_hat[i0..=i1] {
            *t = plateau;
        }
    }
    // Snapping and blending moved `t_hat`, so the per-node forces changed;
    // refresh the gap series, then drop mask nodes whose refreshed gap
    // vanished (tail edges that stuck) so the witness keeps a positive gap
    // on all of `G`.
    for j in 0..m {
        ptraj.gap[j] = spec
            .stability_gap(&load.value(ptraj.t_hat[j]), &ptraj.z_hat[j])
            .map(|(g, _)| g)
            .unwrap_or(f64::NAN);
        if ptraj.gap[j] <= 0.0 {
            ptraj.g_mask[j] = false;
        }
    }
    let recovery = certify::lambda_recover(spec, ptraj);
    ptraj.lambda = recovery.lambda;
}
