//! Python bindings for the balanced-viscosity toolkit: the problem data,
//! the pointwise primitives, the solvers, and the certification pipeline.
//!
//! Reports with many fields (certificates, convergence tables) cross the
//! boundary as JSON strings; trajectories as typed classes with list
//! accessors.

use nalgebra::{DMatrix, DVector};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use ratebv::certify::ToleranceProfile;
use ratebv::control::{Fidelity, OptimizeOptions, OptimizerKind};
use ratebv::reparam::{ExtractOptions, TauRule};
use ratebv::{ControlObjective, LoadPath, Nonconvexity, ProblemSpec};

fn err_py(err: ratebv::Error) -> PyErr {
    match err {
        ratebv::Error::Argument(_) | ratebv::Error::Domain(_) | ratebv::Error::Config { .. } => {
            PyValueError::new_err(err.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn to_vector(values: Vec<f64>) -> DVector<f64> {
    DVector::from_vec(values)
}

fn to_matrix(rows: Vec<Vec<f64>>) -> PyResult<DMatrix<f64>> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("matrix must be square"));
    }
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Ok(DMatrix::from_row_slice(n, n, &flat))
}

fn json_string<T: serde::Serialize>(value: &T) -> PyResult<String> {
    serde_json::to_string_pretty(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// The rate-independent system `(A, V, kappa, F)` on `R^n`.
#[pyclass(name = "ProblemSpec", frozen)]
struct PyProblemSpec {
    inner: ProblemSpec,
}

#[pymethods]
impl PyProblemSpec {
    /// `f_kind` is "zero" or "double_well" (with `beta`).
    #[new]
    #[pyo3(signature = (a, v, kappa, f_kind="zero", beta=0.0, q=1.0))]
    fn new(
        a: Vec<Vec<f64>>,
        v: Vec<Vec<f64>>,
        kappa: Vec<f64>,
        f_kind: &str,
        beta: f64,
        q: f64,
    ) -> PyResult<Self> {
        let f = match f_kind {
            "zero" => Nonconvexity::Zero,
            "double_well" => Nonconvexity::DoubleWell { beta },
            other => {
                return Err(PyValueError::new_err(format!(
                    "unknown nonconvexity kind {other:?}"
                )))
            }
        };
        let inner = ProblemSpec::new(to_matrix(a)?, to_matrix(v)?, to_vector(kappa), f, q)
            .map_err(err_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    fn stored_energy(&self, z: Vec<f64>) -> PyResult<f64> {
        self.inner.stored_energy(&to_vector(z)).map_err(err_py)
    }

    fn stored_energy_grad(&self, z: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self
            .inner
            .stored_energy_grad(&to_vector(z))
            .map_err(err_py)?
            .iter()
            .copied()
            .collect())
    }

    fn r_value(&self, v: Vec<f64>) -> f64 {
        self.inner.r_value(&to_vector(v))
    }

    fn variation(&self, path: Vec<Vec<f64>>) -> f64 {
        let path: Vec<DVector<f64>> = path.into_iter().map(to_vector).collect();
        self.inner.variation(&path)
    }

    /// Distance of `-DI(z) + ell` to the stable box in the dual viscosity
    /// norm, with the projection point.
    fn stability_gap(&self, ell: Vec<f64>, z: Vec<f64>) -> PyResult<(f64, Vec<f64>)> {
        let (gap, sigma) = self
            .inner
            .stability_gap(&to_vector(ell), &to_vector(z))
            .map_err(err_py)?;
        Ok((gap, sigma.iter().copied().collect()))
    }

    fn contact_potential(&self, v: Vec<f64>, xi: Vec<f64>) -> PyResult<f64> {
        self.inner
            .contact_potential(&to_vector(v), &to_vector(xi))
            .map_err(err_py)
    }

    fn prox_gdelta(&self, delta: f64, xi: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self
            .inner
            .prox_gdelta(delta, &to_vector(xi))
            .map_err(err_py)?
            .iter()
            .copied()
            .collect())
    }

    fn conj_rdelta(&self, delta: f64, eta: Vec<f64>) -> PyResult<f64> {
        self.inner.conj_rdelta(delta, &to_vector(eta)).map_err(err_py)
    }

    fn h1_norm(&self, load: &PyLoadPath) -> f64 {
        self.inner.h1_norm(&load.inner)
    }

    fn lambda_convexity(&self, rho: f64, samples: usize, seed: u64) -> f64 {
        self.inner.lambda_convexity(rho, samples, seed)
    }
}

/// Piecewise-linear load `ell(t)`.
#[pyclass(name = "LoadPath", frozen)]
struct PyLoadPath {
    inner: LoadPath,
}

#[pymethods]
impl PyLoadPath {
    #[new]
    fn new(node_times: Vec<f64>, node_values: Vec<Vec<f64>>) -> PyResult<Self> {
        let inner = LoadPath::new(node_times, node_values.into_iter().map(to_vector).collect())
            .map_err(err_py)?;
        Ok(Self { inner })
    }

    fn value(&self, t: f64) -> Vec<f64> {
        self.inner.value(t).iter().copied().collect()
    }

    #[getter]
    fn t_final(&self) -> f64 {
        self.inner.t_final()
    }
}

/// Discrete viscous evolution.
#[pyclass(name = "ViscousTrajectory", frozen)]
struct PyViscousTrajectory {
    inner: ratebv::ViscousTrajectory,
    terminal_gap: Option<f64>,
    converged: Option<bool>,
}

#[pymethods]
impl PyViscousTrajectory {
    #[getter]
    fn times(&self) -> Vec<f64> {
        self.inner.times.clone()
    }

    #[getter]
    fn states(&self) -> Vec<Vec<f64>> {
        self.inner
            .states
            .iter()
            .map(|z| z.iter().copied().collect())
            .collect()
    }

    #[getter]
    fn energies(&self) -> Vec<f64> {
        self.inner.energies.clone()
    }

    #[getter]
    fn epsilon(&self) -> f64 {
        self.inner.epsilon
    }

    #[getter]
    fn terminal_gap(&self) -> Option<f64> {
        self.terminal_gap
    }

    #[getter]
    fn converged(&self) -> Option<bool> {
        self.converged
    }
}

/// Arc-length parametrized trajectory `(S, t_hat, z_hat)` with the per-node
/// stability gap, multiplier, and jump mask.
#[pyclass(name = "ParamTrajectory", frozen)]
struct PyParamTrajectory {
    inner: ratebv::ParamTrajectory,
}

#[pymethods]
impl PyParamTrajectory {
    #[getter]
    fn s_grid(&self) -> Vec<f64> {
        self.inner.s_grid.clone()
    }

    #[getter]
    fn t_hat(&self) -> Vec<f64> {
        self.inner.t_hat.clone()
    }

    #[getter]
    fn z_hat(&self) -> Vec<Vec<f64>> {
        self.inner
            .z_hat
            .iter()
            .map(|z| z.iter().copied().collect())
            .collect()
    }

    #[getter]
    fn gap(&self) -> Vec<f64> {
        self.inner.gap.clone()
    }

    #[getter]
    fn lambda_multiplier(&self) -> Vec<f64> {
        self.inner.lambda.clone()
    }

    #[getter]
    fn g_mask(&self) -> Vec<bool> {
        self.inner.g_mask.clone()
    }

    #[getter]
    fn s_final(&self) -> f64 {
        self.inner.s_final()
    }
}

/// Integrate the viscously regularized system on the load's time interval.
#[pyfunction]
fn solve_viscous(
    spec: &PyProblemSpec,
    load: &PyLoadPath,
    z0: Vec<f64>,
    epsilon: f64,
    tau: f64,
) -> PyResult<PyViscousTrajectory> {
    let traj = ratebv::solve_viscous(&spec.inner, &load.inner, &to_vector(z0), epsilon, tau)
        .map_err(err_py)?;
    Ok(PyViscousTrajectory {
        inner: traj,
        terminal_gap: None,
        converged: None,
    })
}

/// Integrate the autonomous constant-load system until the stability gap
/// falls below `stop_gap` or time exceeds `horizon_cap`.
#[pyfunction]
#[pyo3(signature = (spec, ell_star, z0, delta=0.0, tau=1e-4, stop_gap=1e-8, horizon_cap=1e3))]
fn solve_autonomous(
    spec: &PyProblemSpec,
    ell_star: Vec<f64>,
    z0: Vec<f64>,
    delta: f64,
    tau: f64,
    stop_gap: f64,
    horizon_cap: f64,
) -> PyResult<PyViscousTrajectory> {
    let run = ratebv::solve_autonomous(
        &spec.inner,
        &to_vector(ell_star),
        &to_vector(z0),
        delta,
        tau,
        stop_gap,
        horizon_cap,
    )
    .map_err(err_py)?;
    Ok(PyViscousTrajectory {
        inner: run.trajectory,
        terminal_gap: Some(run.terminal_gap),
        converged: Some(run.converged),
    })
}

/// Initial-speed bound `(nu_delta(0), dist bound)` of the delta-regularized
/// autonomous system.
#[pyfunction]
fn nu_delta_initial(
    spec: &PyProblemSpec,
    delta: f64,
    ell_star: Vec<f64>,
    z0: Vec<f64>,
) -> PyResult<(f64, f64)> {
    ratebv::nu_delta_initial(&spec.inner, delta, &to_vector(ell_star), &to_vector(z0))
        .map_err(err_py)
}

/// Run the vanishing-viscosity sweep; returns the BV candidate and the
/// Cauchy table as JSON.
#[pyfunction]
#[pyo3(signature = (spec, load, z0, eps_list, tau_factor=0.1, s_samples=2001, extend_constant=false))]
fn extract_bv(
    spec: &PyProblemSpec,
    load: &PyLoadPath,
    z0: Vec<f64>,
    eps_list: Vec<f64>,
    tau_factor: f64,
    s_samples: usize,
    extend_constant: bool,
) -> PyResult<(PyParamTrajectory, String)> {
    let options = ExtractOptions {
        tau_rule: TauRule::Proportional { factor: tau_factor },
        s_samples,
        extend_constant,
        gap_threshold: None,
    };
    let (candidate, convergence) =
        ratebv::extract_bv(&spec.inner, &load.inner, &to_vector(z0), &eps_list, &options)
            .map_err(err_py)?;
    Ok((
        PyParamTrajectory { inner: candidate },
        json_string(&convergence)?,
    ))
}

/// Certify a parametrized trajectory; returns `(passed, report_json)`.
#[pyfunction]
#[pyo3(signature = (spec, load, z0, ptraj, profile="standard"))]
fn certify(
    spec: &PyProblemSpec,
    load: &PyLoadPath,
    z0: Vec<f64>,
    ptraj: &PyParamTrajectory,
    profile: &str,
) -> PyResult<(bool, String)> {
    let profile = ToleranceProfile::by_name(profile)
        .ok_or_else(|| PyValueError::new_err(format!("unknown profile {profile:?}")))?;
    let report = ratebv::certify(
        &spec.inner,
        &load.inner,
        &to_vector(z0),
        &ptraj.inner,
        &profile,
    )
    .map_err(err_py)?;
    Ok((report.passed, json_string(&report)?))
}

/// Heteroclinic transient of a jump at frozen load; returns the orbit and
/// its terminal state.
#[pyfunction]
#[pyo3(signature = (spec, ell_star, z_a, toward=None, delta=0.0, tau=1e-4, stop_gap=1e-6, horizon_cap=1e3))]
#[allow(clippy::too_many_arguments)]
fn jump_transient(
    spec: &PyProblemSpec,
    ell_star: Vec<f64>,
    z_a: Vec<f64>,
    toward: Option<Vec<f64>>,
    delta: f64,
    tau: f64,
    stop_gap: f64,
    horizon_cap: f64,
) -> PyResult<(PyViscousTrajectory, Vec<f64>)> {
    let toward = toward.map(to_vector);
    let jt = ratebv::jump_transient(
        &spec.inner,
        &to_vector(ell_star),
        &to_vector(z_a),
        toward.as_ref(),
        delta,
        tau,
        stop_gap,
        horizon_cap,
    )
    .map_err(err_py)?;
    let z_end = jt.z_end.iter().copied().collect();
    Ok((
        PyViscousTrajectory {
            inner: jt.run.trajectory,
            terminal_gap: Some(jt.run.terminal_gap),
            converged: Some(jt.run.converged),
        },
        z_end,
    ))
}

/// Minimize `j(z_hat(S)) + alpha |ell|_H1` over load node values; returns a
/// JSON summary with the certified incumbent.
#[pyfunction]
#[pyo3(signature = (spec, z0, z_des, alpha, init_load, budget=200, surrogate_eps=1e-2, surrogate_tau=1e-3, init_step=1.0, final_eps_list=None, seed=0))]
#[allow(clippy::too_many_arguments)]
fn optimize(
    spec: &PyProblemSpec,
    z0: Vec<f64>,
    z_des: Vec<f64>,
    alpha: f64,
    init_load: &PyLoadPath,
    budget: usize,
    surrogate_eps: f64,
    surrogate_tau: f64,
    init_step: f64,
    final_eps_list: Option<Vec<f64>>,
    seed: u64,
) -> PyResult<String> {
    let objective = ControlObjective::new(to_vector(z_des), alpha).map_err(err_py)?;
    let options = OptimizeOptions {
        optimizer: OptimizerKind::NelderMead { init_step },
        budget,
        fidelity: Fidelity::SurrogateEps {
            epsilon: surrogate_eps,
            tau: surrogate_tau,
        },
        final_extraction: ExtractOptions::default(),
        final_eps_list: final_eps_list.unwrap_or_else(|| vec![1e-2, 1e-3, 1e-4]),
        profile: ToleranceProfile::standard(),
        seed,
    };
    let result = ratebv::optimize(
        &spec.inner,
        &to_vector(z0),
        &objective,
        &init_load.inner,
        &options,
    )
    .map_err(err_py)?;
    let summary = serde_json::json!({
        "best_objective": result.best_objective,
        "best_misfit": result.best_misfit,
        "best_h1": result.best_h1,
        "evaluations": result.evaluations,
        "coercivity_ok": result.coercivity_ok,
        "history": result.history,
        "certificate_passed": result.certificate.passed,
        "certificate": result.certificate,
        "best_load": {
            "node_times": result.best_load.node_times(),
            "node_values": result.best_load.node_values().iter()
                .map(|v| v.iter().copied().collect::<Vec<_>>()).collect::<Vec<_>>(),
        },
    });
    serde_json::to_string_pretty(&summary).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

#[pymodule]
fn _ratebv(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProblemSpec>()?;
    m.add_class::<PyLoadPath>()?;
    m.add_class::<PyViscousTrajectory>()?;
    m.add_class::<PyParamTrajectory>()?;
    m.add_function(wrap_pyfunction!(solve_viscous, m)?)?;
    m.add_function(wrap_pyfunction!(solve_autonomous, m)?)?;
    m.add_function(wrap_pyfunction!(nu_delta_initial, m)?)?;
    m.add_function(wrap_pyfunction!(extract_bv, m)?)?;
    m.add_function(wrap_pyfunction!(certify, m)?)?;
    m.add_function(wrap_pyfunction!(jump_transient, m)?)?;
    m.add_function(wrap_pyfunction!(optimize, m)?)?;
    Ok(())
}
