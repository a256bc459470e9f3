//! Closed-form and self-convergence oracles for the time integrators.

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use ratebv::*;

fn vec1(x: f64) -> DVector<f64> {
    DVector::from_element(1, x)
}

fn play_spec() -> ProblemSpec {
    ProblemSpec::scalar(1.0, 1.0, 1.0, Nonconvexity::Zero).unwrap()
}

fn dw_spec() -> ProblemSpec {
    ProblemSpec::scalar(1.0, 1.0, 1.0, Nonconvexity::DoubleWell { beta: 10.0 }).unwrap()
}

fn dw_ramp() -> LoadPath {
    LoadPath::new(vec![0.0, 1.0], vec![vec1(0.0), vec1(5.0)]).unwrap()
}

/// Load value at the first crossing of the midpoint between the wells, a
/// proxy for the jump onset.
fn onset_load(traj: &ViscousTrajectory, load: &LoadPath) -> f64 {
    let k = traj
        .states
        .iter()
        .position(|z| z[0] > 0.0)
        .expect("no transition found");
    load.value(traj.times[k])[0]
}

#[test]
fn double_well_onset_matches_fine_reference() {
    let spec = dw_spec();
    // A unit-slope ramp: the onset-load shift is of the order of the
    // viscosity times the loading rate.
    let load = LoadPath::new(vec![0.0, 5.0], vec![vec1(0.0), vec1(5.0)]).unwrap();
    let coarse = solve_viscous(&spec, &load, &vec1(-1.0), 1e-3, 1e-4).unwrap();
    let fine = solve_viscous(&spec, &load, &vec1(-1.0), 1e-4, 1e-5).unwrap();
    let (lc, lf) = (onset_load(&coarse, &load), onset_load(&fine, &load));
    assert!((lc - lf).abs() < 2e-2, "onset loads {lc} vs {lf}");
    // The destabilization happens where the stable branch degenerates:
    // g(z) = 10 z^3 - 9 z has its local max at z = -sqrt(0.3), so the
    // quasistatic branch ends at load g(-sqrt(0.3)) + 1.
    let z_s = -(0.3f64).sqrt();
    let analytic = 10.0 * z_s.powi(3) - 9.0 * z_s + 1.0;
    assert!((lf - analytic).abs() < 2e-2, "onset {lf} vs analytic {analytic}");
}

#[test]
fn autonomous_two_step_sizes_agree_at_first_order() {
    let spec = dw_spec();
    // Destabilized start in the left well at a super-threshold load.
    let ell = vec1(4.5);
    let z0 = vec1(-0.4);
    let run = |tau: f64| solve_autonomous(&spec, &ell, &z0, 0.0, tau, 1e-10, 3.0).unwrap();
    let sup_diff = |a: &ViscousTrajectory, b: &ViscousTrajectory, ratio: usize| -> f64 {
        a.states
            .iter()
            .enumerate()
            .filter_map(|(k, z)| b.states.get(k * ratio).map(|w| (z[0] - w[0]).abs()))
            .fold(0.0, f64::max)
    };
    let (t1, t2, t4) = (run(4e-4), run(2e-4), run(1e-4));
    let d12 = sup_diff(&t1.trajectory, &t2.trajectory, 2);
    let d24 = sup_diff(&t2.trajectory, &t4.trajectory, 2);
    let order = (d12 / d24).log2();
    assert!(order >= 0.9, "empirical order {order} (d12 {d12}, d24 {d24})");
}

#[test]
fn autonomous_uniform_bounds_hold_with_computed_constants() {
    let spec = dw_spec();
    let ell = vec1(4.5);
    let z0 = vec1(-0.4);
    let delta = 0.3;
    let run = solve_autonomous(&spec, &ell, &z0, delta, 1e-4, 1e-8, 20.0).unwrap();
    // Energy bound: E nonincreasing at constant load implies an a-priori
    // A-norm ball around the data.
    let e0 = spec.energy(&z0, &ell).unwrap();
    let bound = {
        let ce = spec.embedding_va();
        let drive = ce * spec.v_dual_norm(&ell);
        drive + (drive * drive + 2.0 * e0.max(0.0)).sqrt()
    };
    for z in &run.trajectory.states {
        assert!(spec.a_norm(z) <= bound + 1e-9);
    }
    // Force bound: the inclusion confines -DE to the stable box plus the
    // viscous term.
    let visc = spec.v() + delta * spec.a();
    let r_box = {
        // kappa = 1, V = 1 in this scalar fixture.
        1.0
    };
    for (k, rate) in run.trajectory.rates.iter().enumerate() {
        let de = spec.energy_grad(&run.trajectory.states[k], &ell).unwrap();
        let lhs = spec.v_dual_norm(&de);
        let rhs = r_box + spec.v_dual_norm(&(&visc * rate));
        assert!(lhs <= rhs + 1e-6, "step {k}: {lhs} > {rhs}");
    }
}

#[test]
fn stationary_autonomous_run_is_constant_to_machine_precision() {
    let spec = play_spec();
    let run = solve_autonomous(&spec, &vec1(0.9), &vec1(0.0), 0.0, 1e-3, 1e-12, 5.0).unwrap();
    assert!(run.converged);
    assert_eq!(run.trajectory.steps(), 0);
    assert_eq!(run.trajectory.states[0][0], 0.0);
}

#[test]
fn edb_residual_bounded_by_first_order_in_tau() {
    let spec = play_spec();
    for tau in [1e-2, 1e-3, 1e-4] {
        let run = solve_autonomous(&spec, &vec1(3.0), &vec1(0.0), 0.0, tau, 1e-8, 50.0).unwrap();
        let res = edb_residual(&spec, &run.trajectory, Drive::Constant(&vec1(3.0))).unwrap();
        let max = res.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        assert!(max <= 10.0 * tau, "tau {tau}: residual {max}");
    }
}

#[test]
fn nu_delta_bound_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for trial in 0..100 {
        let n = rng.random_range(1..=5usize);
        let mut a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-0.4..0.4));
        a = &a * a.transpose() + DMatrix::identity(n, n);
        let mut v = DMatrix::from_fn(n, n, |_, _| rng.random_range(-0.4..0.4));
        v = &v * v.transpose() + DMatrix::identity(n, n) * rng.random_range(0.5..2.0);
        let kappa = DVector::from_fn(n, |_, _| rng.random_range(0.2..2.0));
        let f = if trial % 2 == 0 {
            Nonconvexity::Zero
        } else {
            Nonconvexity::DoubleWell {
                beta: rng.random_range(0.0..5.0),
            }
        };
        let spec = ProblemSpec::new(a, v, kappa, f, 1.0).unwrap();
        let delta = [1e-2, 1.0, 10.0][trial % 3];
        let z0 = DVector::from_fn(n, |_, _| rng.random_range(-1.5..1.5));
        let ell = DVector::from_fn(n, |_, _| rng.random_range(-3.0..3.0));
        // The assertion lives inside: an invariant violation is an error.
        let (nu0, bound) = nu_delta_initial(&spec, delta, &ell, &z0).unwrap();
        assert!(nu0 <= bound + 1e-9, "trial {trial}: {nu0} > {bound}");
    }
}

#[test]
fn viscous_rejects_bad_arguments() {
    let spec = play_spec();
    let load = LoadPath::constant(1.0, vec1(0.0)).unwrap();
    assert!(solve_viscous(&spec, &load, &vec1(0.0), 0.0, 1e-2).is_err());
    assert!(solve_viscous(&spec, &load, &vec1(0.0), 1e-3, 2.0).is_err());
    assert!(solve_viscous(&spec, &load, &vec1(f64::NAN), 1e-3, 1e-2).is_err());
    assert!(solve_autonomous(&spec, &vec1(0.0), &vec1(0.0), -1.0, 1e-2, 1e-8, 1.0).is_err());
    // Drive/trajectory mismatch in the residual.
    let traj = solve_viscous(&spec, &load, &vec1(0.0), 1e-3, 1e-2).unwrap();
    assert!(edb_residual(&spec, &traj, Drive::Constant(&vec1(0.0))).is_err());
}
