//! Time integration of the viscously regularized system on `[0, T]` and of
//! the autonomous constant-load system on `R_+`, with per-step
//! energy-dissipation accounting.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kernels;
use crate::model::{LoadPath, ProblemSpec};

const MAX_INNER_ITERS: usize = 50_000;
const INCLUSION_TOL: f64 = 1e-9;

/// Discrete solution of a viscous evolution.
///
/// `epsilon > 0` marks the implicit epsilon-system driven by a time-dependent
/// load; `epsilon == 0` marks the autonomous delta-system at constant load,
/// whose viscosity is the fixed `V + delta A` term.
#[derive(Clone, Debug)]
pub struct ViscousTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    /// Difference quotients `(z_{k+1} - z_k) / tau_k`, one per step.
    pub rates: Vec<DVector<f64>>,
    /// `E(t_k, z_k)` per node.
    pub energies: Vec<f64>,
    /// `R(z_{k+1} - z_k)` per step.
    pub diss_r: Vec<f64>,
    /// Full quadratic viscous dissipation per step:
    /// `(eps/tau)|dz|_V^2`, or `(1/tau)|dz|_{V + delta A}^2` when autonomous.
    pub diss_visc: Vec<f64>,
    pub epsilon: f64,
    pub delta: f64,
}

impl ViscousTrajectory {
    pub fn n(&self) -> usize {
        self.states[0].len()
    }

    pub fn t_final(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn steps(&self) -> usize {
        self.rates.len()
    }
}

/// Result of an `R_+` run: the trajectory plus its terminal stability gap.
#[derive(Clone, Debug)]
pub struct AutonomousRun {
    pub trajectory: ViscousTrajectory,
    pub terminal_gap: f64,
    /// False when the horizon cap was reached before the gap threshold.
    pub converged: bool,
}

/// Load seen by a trajectory: a path for the epsilon-system, a frozen value
/// for the autonomous system.
#[derive(Clone, Copy, Debug)]
pub enum Drive<'a> {
    Path(&'a LoadPath),
    Constant(&'a DVector<f64>),
}

/// One implicit incremental-minimization step:
/// `z_{k+1} = argmin_v R(v - z_k) + eps/(2 tau) |v - z_k|_V^2 + E(t_{k+1}, v)`
/// solved by proximal gradient started at `z_k` (so that in nonconvex steps
/// the local minimizer reached by descent from the previous state is taken).
struct StepSolver {
    visc_over_tau: DMatrix<f64>,
    /// Lipschitz bound of the quadratic part of the smooth gradient.
    lip_quad: f64,
    /// Running curvature estimate including the F contribution, validated by
    /// a gradient-difference test each iteration.
    lip_est: f64,
}

impl StepSolver {
    fn new(spec: &ProblemSpec, epsilon: f64, tau: f64) -> Self {
        let visc_over_tau = spec.v() * (epsilon / tau);
        let lip_quad = (epsilon / tau) * spec.lambda_max_v() + spec.lambda_max_a();
        Self {
            visc_over_tau,
            lip_quad,
            lip_est: lip_quad,
        }
    }

    fn smooth_grad(
        &self,
        spec: &ProblemSpec,
        z_prev: &DVector<f64>,
        ell: &DVector<f64>,
        v: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        Ok(&self.visc_over_tau * (v - z_prev) + spec.energy_grad(v, ell)?)
    }

    /// Componentwise residual of the inclusion
    /// `0 in dR((v - z_prev)/tau) + eps V (v - z_prev)/tau + DE(t_{k+1}, v)`.
    fn inclusion_residual(
        &self,
        spec: &ProblemSpec,
        z_prev: &DVector<f64>,
        ell: &DVector<f64>,
        v: &DVector<f64>,
    ) -> Result<f64> {
        let dz = v - z_prev;
        let force = -(&self.visc_over_tau * &dz) - spec.energy_grad(v, ell)?;
        Ok(kernels::prox_certificate_residual(spec.kappa(), &dz, &force))
    }

    fn solve(
        &mut self,
        spec: &ProblemSpec,
        z_prev: &DVector<f64>,
        ell: &DVector<f64>,
    ) -> Result<(DVector<f64>, usize)> {
        let kappa = spec.kappa();
        let mut v = z_prev.clone();
        let mut residual = self.inclusion_residual(spec, z_prev, ell, &v)?;
        let mut iters = 0;
        while residual > INCLUSION_TOL {
            if iters >= MAX_INNER_ITERS {
                return Err(Error::Numerical {
                    op: "incremental step",
                    iterations: iters,
                    residual,
                });
            }
            let grad = self.smooth_grad(spec, z_prev, ell, &v)?;
            loop {
                let step = 1.0 / self.lip_est;
                let trial = DVector::from_fn(v.len(), |i, _| {
                    z_prev[i]
                        + kernels::soft_threshold(
                            v[i] - step * grad[i] - z_prev[i],
                            step * kappa[i],
                        )
                });
                let d = &trial - &v;
                let d_norm = d.norm();
                if d_norm == 0.0 {
                    // Exact fixed point of the proximal map at this step; the
                    // residual check above decides whether we are done.
                    v = trial;
                    break;
                }
                // Validate the curvature estimate on the actual move; the
                // absolute slack keeps the test meaningful at tiny steps.
                let grad_trial = self.smooth_grad(spec, z_prev, ell, &trial)?;
                let grad_jump = (&grad_trial - &grad).norm();
                if grad_jump <= self.lip_est * d_norm + 1e-12 * (1.0 + grad.norm()) {
                    v = trial;
                    self.lip_est = (self.lip_est * 0.9).max(self.lip_quad * 1e-2);
                    break;
                }
                self.lip_est *= 2.0;
                if self.lip_est > self.lip_quad * 1e14 {
                    return Err(Error::Numerical {
                        op: "incremental step curvature search",
                        iterations: iters,
                        residual,
                    });
                }
            }
            let new_residual = self.inclusion_residual(spec, z_prev, ell, &v)?;
            if new_residual >= residual && new_residual > INCLUSION_TOL {
                // No progress at the float resolution: tighten the step so the
                // proximal map contracts harder before giving up.
                self.lip_est *= 2.0;
                if self.lip_est > self.lip_quad * 1e14 {
                    return Err(Error::Numerical {
                        op: "incremental step",
                        iterations: iters,
                        residual: new_residual,
                    });
                }
            }
            residual = new_residual;
            iters += 1;
        }
        Ok((v, iters))
    }
}

/// Integrates the implicit incremental scheme for
/// `0 in dR(z') + eps V z' + DE(t, z)` on a uniform grid of step `tau`.
pub fn solve_viscous(
    spec: &ProblemSpec,
    load: &LoadPath,
    z0: &DVector<f64>,
    epsilon: f64,
    tau: f64,
) -> Result<ViscousTrajectory> {
    if !(epsilon > 0.0) {
        return Err(Error::Argument("epsilon must be positive".into()));
    }
    let t_final = load.t_final();
    if !(tau > 0.0) || tau > t_final {
        return Err(Error::Argument("tau must lie in (0, T]".into()));
    }
    if load.dim() != spec.n() {
        return Err(Error::Argument("load dimension does not match the system".into()));
    }
    spec.stored_energy(z0)?;

    let steps = (t_final / tau - 1e-9).ceil().max(1.0) as usize;
    let tau = t_final / steps as f64;

    let lambda = convexity_defect(spec, load, z0);
    if lambda > 0.0 && epsilon / tau < 2.0 * lambda {
        log::warn!(
            "step-size rule violated: eps/tau = {:.3e} < 2 lambda(rho) = {:.3e}; \
             incremental problems may be nonconvex",
            epsilon / tau,
            2.0 * lambda
        );
    }

    let mut solver = StepSolver::new(spec, epsilon, tau);
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut rates = Vec::with_capacity(steps);
    let mut energies = Vec::with_capacity(steps + 1);
    let mut diss_r = Vec::with_capacity(steps);
    let mut diss_visc = Vec::with_capacity(steps);

    times.push(0.0);
    states.push(z0.clone());
    energies.push(spec.energy(z0, &load.value(0.0))?);

    for k in 0..steps {
        let t_next = (k + 1) as f64 * tau;
        let ell_next = load.value(t_next);
        let z_prev = states.last().unwrap().clone();
        let (z_next, _) = solver.solve(spec, &z_prev, &ell_next).map_err(|e| match e {
            Error::Numerical { residual, .. } => Error::StepFailure {
                step: k,
                time: t_next,
                residual,
            },
            other => other,
        })?;
        let dz = &z_next - &z_prev;
        let energy = spec.energy(&z_next, &ell_next)?;
        if !energy.is_finite() {
            return Err(Error::Domain(format!(
                "non-finite energy at step {k} (t = {t_next:.6e})"
            )));
        }
        rates.push(&dz / tau);
        diss_r.push(spec.r_value(&dz));
        diss_visc.push(epsilon / tau * spec.v_norm(&dz).powi(2));
        times.push(t_next);
        states.push(z_next);
        energies.push(energy);
    }

    Ok(ViscousTrajectory {
        times,
        states,
        rates,
        energies,
        diss_r,
        diss_visc,
        epsilon,
        delta: 0.0,
    })
}

/// Estimate of the convexity defect on the sublevel ball reachable from the
/// given data; used for the `eps/tau >= 2 lambda(rho)` step-size warning.
fn convexity_defect(spec: &ProblemSpec, load: &LoadPath, z0: &DVector<f64>) -> f64 {
    if matches!(spec.f(), crate::model::Nonconvexity::Zero) {
        return 0.0;
    }
    let (sup_ell, var_ell) = spec.load_w11_data(load);
    let e0 = spec.stored_energy(z0).unwrap_or(0.0) - load.value(0.0).dot(z0);
    let rho = state_bound(spec, e0, sup_ell, var_ell);
    spec.lambda_convexity(rho, 400, 0x5eed)
}

/// A-norm bound on states implied by the energy-dissipation estimate:
/// from `1/2 |z|_A^2 <= E0 + c_e |z|_A (W + Linf)` with the `V -> A`
/// embedding constant `c_e`.
pub fn state_bound(spec: &ProblemSpec, e0: f64, sup_ell: f64, var_ell: f64) -> f64 {
    let ce = spec.embedding_va();
    let drive = ce * (sup_ell + var_ell);
    drive + (drive * drive + 2.0 * e0.max(0.0)).sqrt()
}

/// Integrates the autonomous system `z' = G_delta(-D I(z) + ell_*)` by the
/// explicit scheme `z_{k+1} = z_k + tau G_delta(xi(z_k))`, stopping when the
/// stability gap falls below `stop_gap` or time exceeds `horizon_cap`.
pub fn solve_autonomous(
    spec: &ProblemSpec,
    ell_star: &DVector<f64>,
    z0: &DVector<f64>,
    delta: f64,
    tau: f64,
    stop_gap: f64,
    horizon_cap: f64,
) -> Result<AutonomousRun> {
    if delta < 0.0 {
        return Err(Error::Argument("delta must be nonnegative".into()));
    }
    if !(tau > 0.0) {
        return Err(Error::Argument("tau must be positive".into()));
    }
    if !(stop_gap > 0.0) {
        return Err(Error::Argument("stop_gap must be positive".into()));
    }
    spec.stored_energy(z0)?;

    let visc = spec.v() + delta * spec.a();
    let mut times = vec![0.0];
    let mut states = vec![z0.clone()];
    let mut rates = Vec::new();
    let mut energies = vec![spec.energy(z0, ell_star)?];
    let mut diss_r = Vec::new();
    let mut diss_visc = Vec::new();

    let (mut gap, _) = spec.stability_gap(ell_star, states.last().unwrap())?;
    let mut t = 0.0;
    let mut converged = gap <= stop_gap;
    while !converged {
        if t >= horizon_cap {
            break;
        }
        let z = states.last().unwrap().clone();
        let xi = spec.driving_force(ell_star, &z)?;
        let rate = kernels::prox_weighted_l1(spec.kappa(), &visc, &xi)?;
        let dz = &rate * tau;
        let z_next = &z + &dz;
        let energy = spec.energy(&z_next, ell_star)?;
        if !energy.is_finite() {
            return Err(Error::Domain(format!("non-finite energy at t = {t:.6e}")));
        }
        t += tau;
        diss_r.push(spec.r_value(&dz));
        diss_visc.push(dz.dot(&(&visc * &dz)) / tau);
        rates.push(rate);
        times.push(t);
        states.push(z_next);
        energies.push(energy);
        gap = spec.stability_gap(ell_star, states.last().unwrap())?.0;
        converged = gap <= stop_gap;
    }

    Ok(AutonomousRun {
        trajectory: ViscousTrajectory {
            times,
            states,
            rates,
            energies,
            diss_r,
            diss_visc,
            epsilon: 0.0,
            delta,
        },
        terminal_gap: gap,
        converged,
    })
}

/// Per-node residual of the energy-dissipation balance in De Giorgi form:
/// stored energy change plus `R`, half-quadratic viscous dissipation, and the
/// conjugate term, against the external work (trapezoidal rule).
pub fn edb_residual(
    spec: &ProblemSpec,
    traj: &ViscousTrajectory,
    drive: Drive<'_>,
) -> Result<Vec<f64>> {
    if traj.n() != spec.n() {
        return Err(Error::Argument("trajectory dimension does not match the system".into()));
    }
    let metric = if traj.epsilon > 0.0 {
        traj.epsilon * spec.v()
    } else {
        spec.v() + traj.delta * spec.a()
    };
    match (&drive, traj.epsilon > 0.0) {
        (Drive::Path(load), true) => {
            if (load.t_final() - traj.t_final()).abs() > 1e-9 * load.t_final().max(1.0) {
                return Err(Error::Argument(
                    "trajectory final time does not match the load".into(),
                ));
            }
        }
        (Drive::Constant(_), false) => {}
        _ => {
            return Err(Error::Argument(
                "epsilon-trajectories take a load path, autonomous ones a constant load".into(),
            ))
        }
    }

    let ell_at = |t: f64| -> DVector<f64> {
        match drive {
            Drive::Path(load) => load.value(t),
            Drive::Constant(v) => v.clone(),
        }
    };

    let mut residuals = Vec::with_capacity(traj.times.len());
    residuals.push(0.0);
    let e0 = traj.energies[0];
    let mut acc = 0.0;
    for k in 0..traj.steps() {
        let (t0, t1) = (traj.times[k], traj.times[k + 1]);
        let tau = t1 - t0;
        let z_mid = 0.5 * (&traj.states[k] + &traj.states[k + 1]);
        let t_mid = 0.5 * (t0 + t1);
        let xi_mid = spec.driving_force(&ell_at(t_mid), &z_mid)?;
        let conj = spec.conj_quadratic(&metric, &xi_mid)?;
        let dz = &traj.states[k + 1] - &traj.states[k];
        let visc_half = 0.5 * dz.dot(&(&metric * &dz)) / tau;
        acc += traj.diss_r[k] + visc_half + tau * conj;
        if let Drive::Path(load) = drive {
            let dl = load.value(t1) - load.value(t0);
            let z_avg = 0.5 * (&traj.states[k] + &traj.states[k + 1]);
            acc += dl.dot(&z_avg);
        }
        residuals.push(traj.energies[k + 1] + acc - e0);
    }
    Ok(residuals)
}

/// Initial-speed bound of the delta-regularized autonomous system: returns
/// `nu_delta(0) = sqrt(|z'(0)|_V^2 + delta |z'(0)|_A^2)` and the distance
/// bound it must respect.
pub fn nu_delta_initial(
    spec: &ProblemSpec,
    delta: f64,
    ell_star: &DVector<f64>,
    z0: &DVector<f64>,
) -> Result<(f64, f64)> {
    if !(delta > 0.0) {
        return Err(Error::Argument("delta must be positive".into()));
    }
    let xi = spec.driving_force(ell_star, z0)?;
    let rate = spec.prox_gdelta(delta, &xi)?;
    let nu0 = (spec.v_norm(&rate).powi(2) + delta * spec.a_norm(&rate).powi(2)).sqrt();
    let (bound, _) = spec.force_gap(&xi)?;
    if nu0 > bound + 1e-9 {
        return Err(Error::Invariant(format!(
            "nu_delta(0) = {nu0:.12e} exceeds the distance bound {bound:.12e}"
        )));
    }
    Ok((nu0, bound))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Nonconvexity;

    fn vec1(x: f64) -> DVector<f64> {
        DVector::from_element(1, x)
    }

    fn play_spec() -> ProblemSpec {
        ProblemSpec::scalar(1.0, 1.0, 1.0, Nonconvexity::Zero).unwrap()
    }

    #[test]
    fn stationary_state_stays_put() {
        let spec = play_spec();
        let load = LoadPath::constant(1.0, vec1(0.0)).unwrap();
        let traj = solve_viscous(&spec, &load, &vec1(0.0), 1e-2, 1e-2).unwrap();
        for z in &traj.states {
            assert_eq!(z[0], 0.0);
        }
    }

    #[test]
    fn stationary_edb_residual_is_zero() {
        let spec = play_spec();
        let load = LoadPath::constant(1.0, vec1(0.0)).unwrap();
        let traj = solve_viscous(&spec, &load, &vec1(0.0), 1e-2, 1e-2).unwrap();
        let res = edb_residual(&spec, &traj, Drive::Path(&load)).unwrap();
        assert!(res.iter().all(|r| r.abs() < 1e-12));
    }

    #[test]
    fn scalar_play_tracks_closed_form() {
        let spec = play_spec();
        let load = LoadPath::new(vec![0.0, 2.0], vec![vec1(0.0), vec1(2.0)]).unwrap();
        let traj = solve_viscous(&spec, &load, &vec1(0.0), 1e-3, 1e-3).unwrap();
        let worst = traj
            .times
            .iter()
            .zip(&traj.states)
            .map(|(t, z)| (z[0] - (t - 1.0).max(0.0)).abs())
            .fold(0.0, f64::max);
        assert!(worst < 5e-3, "worst deviation {worst}");
    }

    #[test]
    fn autonomous_stationary_and_exponential() {
        let spec = play_spec();
        // Stable: force inside the box, zero steps of motion.
        let run = solve_autonomous(&spec, &vec1(0.5), &vec1(0.0), 0.0, 1e-3, 1e-8, 10.0).unwrap();
        assert!(run.converged);
        assert_eq!(run.trajectory.steps(), 0);

        // Unstable: z' = max(ell - z - kappa, 0) gives z(t) = 2(1 - e^{-t}).
        let run = solve_autonomous(&spec, &vec1(3.0), &vec1(0.0), 0.0, 1e-4, 1e-8, 50.0).unwrap();
        let idx = run
            .trajectory
            .times
            .iter()
            .position(|&t| (t - 5.0).abs() < 1e-9)
            .expect("t = 5 on the grid");
        let z5 = run.trajectory.states[idx][0];
        assert!((z5 - 2.0 * (1.0 - (-5.0_f64).exp())).abs() < 1e-3);
        assert!(run.converged);
        assert!(run.terminal_gap <= 1e-8);
    }

    #[test]
    fn autonomous_energy_is_nonincreasing() {
        let spec = play_spec();
        let run = solve_autonomous(&spec, &vec1(3.0), &vec1(0.0), 0.5, 1e-3, 1e-7, 50.0).unwrap();
        for w in run.trajectory.energies.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn per_step_incremental_energy_decrease() {
        let spec =
            ProblemSpec::scalar(1.0, 1.0, 1.0, Nonconvexity::DoubleWell { beta: 10.0 }).unwrap();
        let load = LoadPath::new(vec![0.0, 5.0], vec![vec1(0.0), vec1(5.0)]).unwrap();
        let eps = 1e-2;
        let tau = 1e-3;
        let traj = solve_viscous(&spec, &load, &vec1(-1.0), eps, tau).unwrap();
        for k in 0..traj.steps() {
            let ell_next = load.value(traj.times[k + 1]);
            let lhs = spec.energy(&traj.states[k + 1], &ell_next).unwrap()
                + traj.diss_r[k]
                + 0.5 * traj.diss_visc[k];
            let rhs = spec.energy(&traj.states[k], &ell_next).unwrap();
            assert!(lhs <= rhs + 1e-9, "step {k}: {lhs} > {rhs}");
        }
    }

    #[test]
    fn nu_delta_scalar_closed_form() {
        let spec = play_spec();
        let (nu, bound) = nu_delta_initial(&spec, 1.0, &vec1(3.0), &vec1(0.0)).unwrap();
        assert!((nu - 2.0_f64.sqrt()).abs() < 1e-10);
        assert!((bound - 2.0).abs() < 1e-12);

        let (nu, bound) = nu_delta_initial(&spec, 1.0, &vec1(0.5), &vec1(0.0)).unwrap();
        assert_eq!(nu, 0.0);
        assert_eq!(bound, 0.0);
    }
}
