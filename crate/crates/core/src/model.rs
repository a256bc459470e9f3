//! Problem data for the semilinear rate-independent system and the pointwise
//! mathematical primitives built on it: energies, gradients, the stability
//! gap, the contact potential, proximal resolvents, conjugates, and variation
//! functionals.
//!
//! The state space is `R^n` carrying three norms: the energy norm `|.|_A`,
//! the viscosity norm `|.|_V`, and the weighted l1 norm underlying the
//! dissipation `R(v) = sum_i kappa_i |v_i|`. The stable set `dR(0)` is the
//! box `prod_i [-kappa_i, kappa_i]`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kernels;

/// User-supplied nonconvex term with analytic derivatives.
pub struct CustomF {
    pub value: Box<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>,
    pub gradient: Box<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>,
    pub hessian: Box<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>,
}

/// The nonconvexity `F` of the stored energy; built-in families carry
/// analytic gradients and Hessians.
#[derive(Clone)]
pub enum Nonconvexity {
    Zero,
    /// `F(z) = beta * sum_i (z_i^2 - 1)^2 / 4`.
    DoubleWell { beta: f64 },
    Custom(Arc<CustomF>),
}

impl fmt::Debug for Nonconvexity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Nonconvexity::Zero => write!(f, "Zero"),
            Nonconvexity::DoubleWell { beta } => write!(f, "DoubleWell {{ beta: {beta} }}"),
            Nonconvexity::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl Nonconvexity {
    fn value(&self, z: &DVector<f64>) -> f64 {
        match self {
            Nonconvexity::Zero => 0.0,
            Nonconvexity::DoubleWell { beta } => {
                beta / 4.0 * z.iter().map(|&x| (x * x - 1.0).powi(2)).sum::<f64>()
            }
            Nonconvexity::Custom(c) => (c.value)(z),
        }
    }

    fn gradient(&self, z: &DVector<f64>) -> DVector<f64> {
        match self {
            Nonconvexity::Zero => DVector::zeros(z.len()),
            Nonconvexity::DoubleWell { beta } => {
                DVector::from_fn(z.len(), |i, _| beta * z[i] * (z[i] * z[i] - 1.0))
            }
            Nonconvexity::Custom(c) => (c.gradient)(z),
        }
    }

    fn hessian(&self, z: &DVector<f64>) -> DMatrix<f64> {
        match self {
            Nonconvexity::Zero => DMatrix::zeros(z.len(), z.len()),
            Nonconvexity::DoubleWell { beta } => DMatrix::from_diagonal(&DVector::from_fn(
                z.len(),
                |i, _| beta * (3.0 * z[i] * z[i] - 1.0),
            )),
            Nonconvexity::Custom(c) => (c.hessian)(z),
        }
    }
}

/// The tuple `(n, A, V, kappa, F)` defining the rate-independent system.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    n: usize,
    a: DMatrix<f64>,
    v: DMatrix<f64>,
    kappa: DVector<f64>,
    f: Nonconvexity,
    /// Growth exponent of the Hessian bound on `F`; metadata reported with
    /// the convexity-defect constant.
    q: f64,
    chol_v: Cholesky<f64, Dyn>,
    lam_min_a: f64,
    lam_max_a: f64,
    lam_min_v: f64,
    lam_max_v: f64,
    /// `sup |z|_V / |z|_A`, the embedding constant of the energy space into
    /// the viscosity space.
    embed_va: f64,
}

fn check_spd(m: &DMatrix<f64>, name: &str) -> Result<(f64, f64)> {
    let scale = m.amax().max(1.0);
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * scale {
                return Err(Error::Domain(format!("{name} is not symmetric")));
            }
        }
    }
    let eig = m.clone().symmetric_eigen().eigenvalues;
    let (min, max) = (eig.min(), eig.max());
    if min <= 0.0 {
        return Err(Error::Domain(format!(
            "{name} is not positive definite (lambda_min = {min:.3e})"
        )));
    }
    Ok((min, max))
}

impl ProblemSpec {
    pub fn new(
        a: DMatrix<f64>,
        v: DMatrix<f64>,
        kappa: DVector<f64>,
        f: Nonconvexity,
        q: f64,
    ) -> Result<Self> {
        let n = kappa.len();
        if a.nrows() != n || a.ncols() != n || v.nrows() != n || v.ncols() != n {
            return Err(Error::Argument(format!(
                "operator dimensions must match kappa length {n}"
            )));
        }
        if kappa.iter().any(|&k| !(k > 0.0) || !k.is_finite()) {
            return Err(Error::Domain(
                "all dissipation weights kappa must be strictly positive".into(),
            ));
        }
        if q < 0.0 {
            return Err(Error::Domain("growth exponent q must be nonnegative".into()));
        }
        let (lam_min_a, lam_max_a) = check_spd(&a, "A")?;
        let (lam_min_v, lam_max_v) = check_spd(&v, "V")?;
        let chol_a = a
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Domain("A is not positive definite".into()))?;
        let chol_v = v
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Domain("V is not positive definite".into()))?;
        // Generalized eigenvalue: sup z^T V z / z^T A z = lambda_max(L^-1 V L^-T).
        let l_inv = chol_a.l().try_inverse().ok_or_else(|| {
            Error::Domain("Cholesky factor of A is singular".into())
        })?;
        let g = &l_inv * &v * l_inv.transpose();
        let embed_va = g.symmetric_eigen().eigenvalues.max().max(0.0).sqrt();
        Ok(Self {
            n,
            a,
            v,
            kappa,
            f,
            q,
            chol_v,
            lam_min_a,
            lam_max_a,
            lam_min_v,
            lam_max_v,
            embed_va,
        })
    }

    /// Scalar convenience constructor used throughout the tests.
    pub fn scalar(a: f64, v: f64, kappa: f64, f: Nonconvexity) -> Result<Self> {
        Self::new(
            DMatrix::from_element(1, 1, a),
            DMatrix::from_element(1, 1, v),
            DVector::from_element(1, kappa),
            f,
            1.0,
        )
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }
    pub fn kappa(&self) -> &DVector<f64> {
        &self.kappa
    }
    pub fn f(&self) -> &Nonconvexity {
        &self.f
    }
    pub fn q(&self) -> f64 {
        self.q
    }
    pub fn lambda_min_a(&self) -> f64 {
        self.lam_min_a
    }
    pub fn lambda_max_a(&self) -> f64 {
        self.lam_max_a
    }
    pub fn lambda_min_v(&self) -> f64 {
        self.lam_min_v
    }
    pub fn lambda_max_v(&self) -> f64 {
        self.lam_max_v
    }
    /// Embedding constant `sup |z|_V / |z|_A`.
    pub fn embedding_va(&self) -> f64 {
        self.embed_va
    }

    fn check_finite(&self, z: &DVector<f64>, what: &str) -> Result<()> {
        if z.len() != self.n {
            return Err(Error::Argument(format!(
                "{what} has dimension {} but the system has n = {}",
                z.len(),
                self.n
            )));
        }
        if z.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain(format!("{what} has non-finite entries")));
        }
        Ok(())
    }

    // ---- norms ------------------------------------------------------------

    pub fn a_norm(&self, z: &DVector<f64>) -> f64 {
        z.dot(&(&self.a * z)).max(0.0).sqrt()
    }

    pub fn v_norm(&self, z: &DVector<f64>) -> f64 {
        z.dot(&(&self.v * z)).max(0.0).sqrt()
    }

    /// Dual norm `|xi|_{V^{-1}} = sqrt(<xi, V^{-1} xi>)`.
    pub fn v_dual_norm(&self, xi: &DVector<f64>) -> f64 {
        xi.dot(&self.chol_v.solve(xi)).max(0.0).sqrt()
    }

    fn v_dual_inner(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        x.dot(&self.chol_v.solve(y))
    }

    // ---- energies and forces ----------------------------------------------

    /// Stored energy `I(z) = 1/2 <A z, z> + F(z)`.
    pub fn stored_energy(&self, z: &DVector<f64>) -> Result<f64> {
        self.check_finite(z, "state")?;
        let fv = self.f.value(z);
        if fv < -1e-12 {
            return Err(Error::Domain(format!(
                "nonconvex term F must be nonnegative (got {fv:.3e})"
            )));
        }
        Ok(0.5 * z.dot(&(&self.a * z)) + fv)
    }

    /// Total energy `E(t, z) = I(z) - <ell(t), z>` for a given load value.
    pub fn energy(&self, z: &DVector<f64>, ell_value: &DVector<f64>) -> Result<f64> {
        Ok(self.stored_energy(z)? - ell_value.dot(z))
    }

    /// `D I(z) = A z + D F(z)`.
    pub fn stored_energy_grad(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_finite(z, "state")?;
        Ok(&self.a * z + self.f.gradient(z))
    }

    /// `D_z E(t, z) = D I(z) - ell(t)`.
    pub fn energy_grad(&self, z: &DVector<f64>, ell_value: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.stored_energy_grad(z)? - ell_value)
    }

    /// Driving force `xi = -D I(z) + ell`.
    pub fn driving_force(&self, ell_value: &DVector<f64>, z: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(ell_value - self.stored_energy_grad(z)?)
    }

    // ---- dissipation ------------------------------------------------------

    /// `R(v) = sum_i kappa_i |v_i|`.
    pub fn r_value(&self, v: &DVector<f64>) -> f64 {
        v.iter()
            .zip(self.kappa.iter())
            .map(|(vi, ki)| ki * vi.abs())
            .sum()
    }

    /// Discrete `R`-variation `sum_k R(z_{k+1} - z_k)` along an ordered path.
    pub fn variation(&self, path: &[DVector<f64>]) -> f64 {
        path.windows(2).map(|w| self.r_value(&(&w[1] - &w[0]))).sum()
    }

    /// Distance of the driving force `-D I(z) + ell` to the stable set
    /// `dR(0)`, measured in the `V^{-1}` dual norm, plus the projection.
    pub fn stability_gap(
        &self,
        ell_value: &DVector<f64>,
        z: &DVector<f64>,
    ) -> Result<(f64, DVector<f64>)> {
        let xi = self.driving_force(ell_value, z)?;
        self.force_gap(&xi)
    }

    /// Same distance for an already-assembled force `xi`.
    pub fn force_gap(&self, xi: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        kernels::box_dual_distance(&self.v, &self.kappa, xi)
    }

    /// Vanishing-viscosity contact potential
    /// `p(v, xi) = R(v) + |v|_V * dist_V(xi, dR(0))`.
    pub fn contact_potential(&self, v: &DVector<f64>, xi: &DVector<f64>) -> Result<f64> {
        let (gap, _) = self.force_gap(xi)?;
        Ok(self.r_value(v) + self.v_norm(v) * gap)
    }

    /// Resolvent `G_delta(xi)`: the unique minimizer of
    /// `R(w) + 1/2 <(V + delta A) w, w> - <xi, w>`.
    pub fn prox_gdelta(&self, delta: f64, xi: &DVector<f64>) -> Result<DVector<f64>> {
        if delta < 0.0 {
            return Err(Error::Argument("delta must be nonnegative".into()));
        }
        self.check_finite(xi, "force")?;
        let m = &self.v + delta * &self.a;
        kernels::prox_weighted_l1(&self.kappa, &m, xi)
    }

    /// Conjugate `R_delta^*(eta)` of the augmented dissipation
    /// `R + 1/2 |.|_V^2 + delta/2 |.|_A^2`, evaluated through the
    /// inf-convolution closed form `1/2 dist(eta, dR(0))^2` in the dual
    /// norm of `V + delta A`.
    pub fn conj_rdelta(&self, delta: f64, eta: &DVector<f64>) -> Result<f64> {
        if delta < 0.0 {
            return Err(Error::Argument("delta must be nonnegative".into()));
        }
        self.check_finite(eta, "force")?;
        let w = &self.v + delta * &self.a;
        let (dist, _) = kernels::box_dual_distance(&w, &self.kappa, eta)?;
        Ok(0.5 * dist * dist)
    }

    /// `1/2 dist(eta, dR(0))^2` in the dual norm of an arbitrary SPD metric;
    /// used for the epsilon-scaled viscous conjugate.
    pub(crate) fn conj_quadratic(&self, metric: &DMatrix<f64>, eta: &DVector<f64>) -> Result<f64> {
        let (dist, _) = kernels::box_dual_distance(metric, &self.kappa, eta)?;
        Ok(0.5 * dist * dist)
    }

    /// Largest `V^{-1}` norm over the stable box; the dual radius bounding
    /// forces on stable regions.
    pub fn stable_set_dual_radius(&self) -> f64 {
        kernels::box_dual_radius(&self.v, &self.kappa)
    }

    /// Convexity-defect constant `lambda(rho)`: with
    /// `c_F(rho) = sup { (-lambda_min(D^2 F(z)))_+ : |z|_A <= rho }`
    /// estimated by sampling, returns `c_F(rho) / lambda_min(V)` so that
    /// `<D I(z1) - D I(z2), z1 - z2> >= 1/2 |z1-z2|_A^2 - lambda |z1-z2|_V^2`
    /// on the sublevel ball.
    pub fn lambda_convexity(&self, rho: f64, samples: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut c_f: f64 = negative_curvature(&self.f.hessian(&DVector::zeros(self.n)));
        for _ in 0..samples {
            let dir = DVector::from_fn(self.n, |_, _| rng.random_range(-1.0..1.0));
            let a_len = self.a_norm(&dir);
            if a_len == 0.0 {
                continue;
            }
            let radius = rho * rng.random::<f64>().powf(1.0 / self.n as f64);
            let z = dir * (radius / a_len);
            c_f = c_f.max(negative_curvature(&self.f.hessian(&z)));
        }
        c_f / self.lam_min_v
    }

    // ---- load norms ---------------------------------------------------------

    /// `H^1((0,T); V*)` norm of a piecewise-linear load, integrated in closed
    /// form on each segment (the integrand is quadratic in t).
    pub fn h1_norm(&self, load: &LoadPath) -> f64 {
        let mut sq = 0.0;
        for seg in 0..load.segments() {
            let (t0, t1) = (load.node_times[seg], load.node_times[seg + 1]);
            let h = t1 - t0;
            let a = &load.node_values[seg];
            let d = &load.node_values[seg + 1] - a;
            let aa = self.v_dual_inner(a, a);
            let ad = self.v_dual_inner(a, &d);
            let dd = self.v_dual_inner(&d, &d);
            sq += h * (aa + ad + dd / 3.0) + dd / h;
        }
        sq.max(0.0).sqrt()
    }

    /// `W^{1,1}` data of the load in dual norms: `(sup_t |ell|, int |ell'|)`.
    pub fn load_w11_data(&self, load: &LoadPath) -> (f64, f64) {
        let sup = load
            .node_values
            .iter()
            .map(|v| self.v_dual_norm(v))
            .fold(0.0, f64::max);
        let total_var = load
            .node_values
            .windows(2)
            .map(|w| self.v_dual_norm(&(&w[1] - &w[0])))
            .sum();
        (sup, total_var)
    }
}

fn negative_curvature(hess: &DMatrix<f64>) -> f64 {
    let min = hess.clone().symmetric_eigen().eigenvalues.min();
    (-min).max(0.0)
}

/// Piecewise-linear-in-time load `ell: [0, T] -> R^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadPath {
    node_times: Vec<f64>,
    node_values: Vec<DVector<f64>>,
}

impl LoadPath {
    pub fn new(node_times: Vec<f64>, node_values: Vec<DVector<f64>>) -> Result<Self> {
        if node_times.len() < 2 {
            return Err(Error::Argument("load needs at least two nodes".into()));
        }
        if node_times.len() != node_values.len() {
            return Err(Error::Argument(
                "load node times and values must have equal length".into(),
            ));
        }
        if node_times[0] != 0.0 {
            return Err(Error::Argument("load must start at t = 0".into()));
        }
        if node_times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Argument("load node times must be strictly increasing".into()));
        }
        if node_times.iter().any(|t| !t.is_finite())
            || node_values
                .iter()
                .any(|v| v.iter().any(|x| !x.is_finite()))
        {
            return Err(Error::Domain("load data must be finite".into()));
        }
        let dim = node_values[0].len();
        if node_values.iter().any(|v| v.len() != dim) {
            return Err(Error::Argument("load values must share one dimension".into()));
        }
        Ok(Self {
            node_times,
            node_values,
        })
    }

    /// Constant-in-time load, e.g. a frozen jump load `ell_*`.
    pub fn constant(t_final: f64, value: DVector<f64>) -> Result<Self> {
        Self::new(vec![0.0, t_final], vec![value.clone(), value])
    }

    pub fn t_final(&self) -> f64 {
        *self.node_times.last().unwrap()
    }

    pub fn dim(&self) -> usize {
        self.node_values[0].len()
    }

    pub fn segments(&self) -> usize {
        self.node_times.len() - 1
    }

    pub fn node_times(&self) -> &[f64] {
        &self.node_times
    }

    pub fn node_values(&self) -> &[DVector<f64>] {
        &self.node_values
    }

    fn segment_of(&self, t: f64) -> usize {
        match self
            .node_times
            .binary_search_by(|probe| probe.partial_cmp(&t).unwrap())
        {
            Ok(i) => i.min(self.segments() - 1),
            Err(i) => i.saturating_sub(1).min(self.segments() - 1),
        }
    }

    /// Linear interpolant; clamped to `[0, T]`.
    pub fn value(&self, t: f64) -> DVector<f64> {
        let t = t.clamp(0.0, self.t_final());
        let seg = self.segment_of(t);
        let (t0, t1) = (self.node_times[seg], self.node_times[seg + 1]);
        let theta = (t - t0) / (t1 - t0);
        &self.node_values[seg] * (1.0 - theta) + &self.node_values[seg + 1] * theta
    }

    /// Piecewise-constant derivative; right-continuous at interior nodes.
    pub fn derivative(&self, t: f64) -> DVector<f64> {
        let t = t.clamp(0.0, self.t_final());
        let seg = self.segment_of(t);
        let h = self.node_times[seg + 1] - self.node_times[seg];
        (&self.node_values[seg + 1] - &self.node_values[seg]) / h
    }
}

/// Target functional of the outer control problem.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlObjective {
    pub z_des: DVector<f64>,
    pub alpha: f64,
    pub j_kind: JKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JKind {
    /// `j(z) = |z - z_des|_V`.
    VNormDistance,
}

impl ControlObjective {
    pub fn new(z_des: DVector<f64>, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::Domain("Tikhonov parameter alpha must be positive".into()));
        }
        Ok(Self {
            z_des,
            alpha,
            j_kind: JKind::VNormDistance,
        })
    }

    pub fn j(&self, spec: &ProblemSpec, z: &DVector<f64>) -> f64 {
        match self.j_kind {
            JKind::VNormDistance => spec.v_norm(&(z - &self.z_des)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vec1(x: f64) -> DVector<f64> {
        DVector::from_element(1, x)
    }

    #[test]
    fn stored_energy_values() {
        let spec = ProblemSpec::scalar(1.0, 1.0, 1.0, Nonconvexity::Zero).unwrap();
        assert_eq!(spec.stored_energy(&vec1(0.0)).unwrap(), 0.0);
        assert_eq!(spec.stored_energy(&vec1(2.0)).unwrap(), 2.0);
        let dw = ProblemSpec::scalar(1.0, 1.0, 1.0, Nonconvexity::DoubleWell { beta: 10.0 }).unwrap();
        assert!((dw.stored_energy(&vec1(1.0)).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn non_finite_state_is_rejected() {
        let spec = ProblemSpec::scalar(1.0, 1.0, 1.0, Nonconvexity::Zero).unwrap();
        assert!(matches!(
            spec.stored_energy(&vec1(f64::NAN)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn gradient_linear_part() {
        let spec = ProblemSpec::new(
            DMatrix::identity(2, 2),
            DMatrix::identity(2, 2),
            DVector::from_vec(vec![1.0, 1.0]),
            Nonconvexity::Zero,
            1.0,
        )
        .unwrap();
        let z = DVector::from_vec(vec![1.0, 2.0]);
        assert_eq!(spec.stored_energy_grad(&z).unwrap(), z);
    }

    #[test]
    fn double_well_gradient_vanishes_at_bottom() {
        let spec = ProblemSpec::new(
            DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0])),
            DMatrix::identity(2, 2),
            DVector::from_vec(vec![1.0, 1.0]),
            Nonconvexity::DoubleWell { beta: 7.0 },
            1.0,
        )
        .unwrap();
        let ones = DVector::from_element(2, 1.0);
        let g = spec.stored_energy_grad(&ones).unwrap();
        assert!((g - spec.a() * ones).amax() < 1e-14);
    }

    #[test]
    fn stability_gap_interior_and_clamped() {
        let spec = ProblemSpec::scalar(1.0, 1.0, 1.0, Nonconvexity::Zero).unwrap();
        let (gap, proj) = spec.stability_gap(&vec1(0.5), &vec1(0.0)).unwrap();
        assert_eq!(gap, 0.0);
        assert!((proj[0] - 0.5).abs() < 1e-15);

        let spec2 = ProblemSpec::new(
            DMatrix::identity(2, 2),
            DMatrix::identity(2, 2),
            DVector::from_vec(vec![1.0, 1.0]),
            Nonconvexity::Zero,
            1.0,
        )
        .unwrap();
        let (gap, proj) = spec2
            .stability_gap(&DVector::from_vec(vec![3.0, 0.0]), &DVector::zeros(2))
            .unwrap();
        assert!((gap - 2.0).abs() < 1e-12);
        assert!((proj - DVector::from_vec(vec![1.0, 0.0])).amax() < 1e-12);
    }

    #[test]
    fn stability_gap_anisotropic_metric() {
        let spec = ProblemSpec::new(
            DMatrix::identity(2, 2),
            DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0])),
            DVector::from_vec(vec![1.0, 1.0]),
            Nonconvexity::Zero,
            1.0,
        )
        .unwrap();
        let (gap, proj) = spec
            .force_gap(&DVector::from_vec(vec![3.0, 0.0]))
            .unwrap();
        assert!((gap - 1.0).abs() < 1e-12);
        assert!((proj - DVector::from_vec(vec![1.0, 0.0])).amax() < 1e-12);
    }

    #[test]
    fn contact_potential_scalar() {
        let spec = ProblemSpec::scalar(1.0, 1.0, 1.0, Nonconvexity::Zero).unwrap();
        assert_eq!(
            spec.contact_potential(&vec1(0.0), &vec1(17.0)).unwrap(),
            0.0
        );
        let p = spec.contact_potential(&vec1(1.0), &vec1(3.0)).unwrap();
        assert!((p - 3.0).abs() < 1e-12);
    }

    #[test]
    fn prox_soft_threshold_scalar() {
        let spec = ProblemSpec::scalar(1.0, 1.0, 1.0, Nonconvexity::Zero).unwrap();
        assert_eq!(spec.prox_gdelta(0.5, &vec1(0.9)).unwrap()[0], 0.0);
        let w = spec.prox_gdelta(0.5, &vec1(2.5)).unwrap();
        assert!((w[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn conj_rdelta_scalar_matches_decomposition() {
        let spec = ProblemSpec::scalar(1.0, 1.0, 1.0, Nonconvexity::Zero).unwrap();
        assert_eq!(spec.conj_rdelta(1.0, &vec1(0.7)).unwrap(), 0.0);
        let c = spec.conj_rdelta(1.0, &vec1(3.0)).unwrap();
        assert!((c - 1.0).abs() < 1e-12);
    }

    #[test]
    fn r_value_and_variation() {
        let spec = ProblemSpec::new(
            DMatrix::identity(2, 2),
            DMatrix::identity(2, 2),
            DVector::from_vec(vec![1.0, 2.0]),
            Nonconvexity::Zero,
            1.0,
        )
        .unwrap();
        assert_eq!(spec.r_value(&DVector::zeros(2)), 0.0);
        assert_eq!(spec.r_value(&DVector::from_vec(vec![1.0, -1.0])), 3.0);

        let s1 = ProblemSpec::scalar(1.0, 1.0, 2.0, Nonconvexity::Zero).unwrap();
        let path = vec![vec1(0.0), vec1(1.0), vec1(0.0)];
        assert_eq!(s1.variation(&path), 4.0);
        assert_eq!(s1.variation(&[vec1(3.0), vec1(3.0)]), 0.0);
    }

    #[test]
    fn h1_norm_constant_and_ramp() {
        let spec = ProblemSpec::scalar(1.0, 1.0, 1.0, Nonconvexity::Zero).unwrap();
        let zero = LoadPath::constant(2.0, vec1(0.0)).unwrap();
        assert_eq!(spec.h1_norm(&zero), 0.0);

        let one = LoadPath::constant(2.0, vec1(1.0)).unwrap();
        assert!((spec.h1_norm(&one) - 2.0_f64.sqrt()).abs() < 1e-12);

        let ramp = LoadPath::new(vec![0.0, 1.0], vec![vec1(0.0), vec1(1.0)]).unwrap();
        assert!((spec.h1_norm(&ramp) - (4.0_f64 / 3.0).sqrt()).abs() < 1e-10);
    }

    #[test]
    fn load_path_validation_and_interpolation() {
        assert!(LoadPath::new(vec![0.0, 0.0], vec![vec1(0.0), vec1(1.0)]).is_err());
        assert!(LoadPath::new(vec![0.5, 1.0], vec![vec1(0.0), vec1(1.0)]).is_err());

        let load = LoadPath::new(
            vec![0.0, 1.0, 2.0],
            vec![vec1(0.0), vec1(2.0), vec1(1.0)],
        )
        .unwrap();
        assert!((load.value(0.5)[0] - 1.0).abs() < 1e-15);
        assert!((load.value(1.5)[0] - 1.5).abs() < 1e-15);
        assert!((load.derivative(0.25)[0] - 2.0).abs() < 1e-15);
        assert!((load.derivative(1.75)[0] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn lambda_convexity_of_double_well() {
        let spec = ProblemSpec::scalar(1.0, 2.0, 1.0, Nonconvexity::DoubleWell { beta: 10.0 }).unwrap();
        // The most negative curvature of F is -beta at the origin, scaled by
        // 1/lambda_min(V).
        let lam = spec.lambda_convexity(2.0, 200, 7);
        assert!((lam - 5.0).abs() < 1e-12);
        let zero = ProblemSpec::scalar(1.0, 1.0, 1.0, Nonconvexity::Zero).unwrap();
        assert_eq!(zero.lambda_convexity(2.0, 50, 7), 0.0);
    }
}
