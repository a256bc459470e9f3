//! Shared fixtures and independent oracles for the integration and
//! acceptance suites.

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use ratebv::*;

pub fn vec1(x: f64) -> DVector<f64> {
    DVector::from_element(1, x)
}

pub fn random_spd(rng: &mut ChaCha8Rng, n: usize, shift: f64) -> DMatrix<f64> {
    let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-0.5..0.5));
    &m * m.transpose() + DMatrix::identity(n, n) * shift
}

pub fn random_spec(rng: &mut ChaCha8Rng, n: usize) -> ProblemSpec {
    let a = random_spd(rng, n, 1.0);
    let shift = rng.random_range(0.5..2.0);
    let v = random_spd(rng, n, shift);
    let kappa = DVector::from_fn(n, |_, _| rng.random_range(0.2..2.0));
    ProblemSpec::new(a, v, kappa, Nonconvexity::Zero, 1.0).unwrap()
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-scale..scale))
}

/// Brute-force oracle for the conjugate of the augmented dissipation: grid
/// over decompositions `eta = sigma + eta2 + eta3` with `sigma` in the
/// stable box, followed by a coordinate-descent polish. Independent of the
/// closed-form implementation path.
pub fn conj_brute_force(spec: &ProblemSpec, delta: f64, eta: &DVector<f64>) -> f64 {
    let n = spec.n();
    let chol_v = spec.v().clone().cholesky().unwrap();
    let chol_a = (spec.a() * delta).cholesky().unwrap();
    let objective = |sigma: &DVector<f64>, eta2: &DVector<f64>| -> f64 {
        let eta3 = eta - sigma - eta2;
        0.5 * eta2.dot(&chol_v.solve(eta2)) + 0.5 * eta3.dot(&chol_a.solve(&eta3))
    };
    let kappa = spec.kappa();
    let scale = eta.amax() + 1.0;
    let steps = if n == 1 { 200i64 } else { 24i64 };
    let mut best = (f64::INFINITY, DVector::zeros(n), DVector::zeros(n));
    let sigma_axis: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (-steps..=steps)
                .map(|k| kappa[i] * k as f64 / steps as f64)
                .collect()
        })
        .collect();
    let eta2_axis: Vec<f64> = (-steps..=steps)
        .map(|k| 2.0 * scale * k as f64 / steps as f64)
        .collect();
    let mut index = vec![0usize; 2 * n];
    loop {
        let sigma = DVector::from_fn(n, |i, _| sigma_axis[i][index[i]]);
        let eta2 = DVector::from_fn(n, |i, _| eta2_axis[index[n + i]]);
        let val = objective(&sigma, &eta2);
        if val < best.0 {
            best = (val, sigma, eta2);
        }
        let mut d = 0;
        loop {
            index[d] += 1;
            let limit = if d < n {
                sigma_axis[d].len()
            } else {
                eta2_axis.len()
            };
            if index[d] < limit {
                break;
            }
            index[d] = 0;
            d += 1;
            if d == 2 * n {
                break;
            }
        }
        if d == 2 * n {
            break;
        }
    }
    let (_, mut sigma, mut eta2) = best;
    let mut step = scale / steps as f64;
    for _ in 0..200 {
        let mut improved = false;
        for i in 0..n {
            for dir in [-1.0, 1.0] {
                loop {
                    let mut s_try = sigma.clone();
                    s_try[i] = (s_try[i] + dir * step).clamp(-kappa[i], kappa[i]);
                    if objective(&s_try, &eta2) < objective(&sigma, &eta2) {
                        sigma = s_try;
                        improved = true;
                    } else {
                        break;
                    }
                }
                loop {
                    let mut e_try = eta2.clone();
                    e_try[i] += dir * step;
                    if objective(&sigma, &e_try) < objective(&sigma, &eta2) {
                        eta2 = e_try;
                        improved = true;
                    } else {
                        break;
                    }
                }
            }
        }
        if !improved {
            step *= 0.5;
            if step < 1e-9 * scale {
                break;
            }
        }
    }
    objective(&sigma, &eta2)
}
