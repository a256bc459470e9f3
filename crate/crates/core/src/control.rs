//! Outer optimal-control loop: minimize `J = j(z_hat(S)) + alpha |ell|_H1`
//! over the node values of a piecewise-linear load, with the state produced
//! by the vanishing-viscosity pipeline.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certify::{self, CertificateReport, ToleranceProfile};
use crate::error::{Error, Result};
use crate::model::{ControlObjective, LoadPath, ProblemSpec};
use crate::reparam::{self, ExtractOptions, ParamTrajectory};
use crate::viscous;

/// State-solve fidelity of one reduced-objective evaluation.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Fidelity {
    /// One viscous solve at a fixed moderate viscosity; fast, used during
    /// the search.
    SurrogateEps { epsilon: f64, tau: f64 },
    /// The full vanishing-viscosity extraction.
    FullExtraction { eps_list: Vec<f64> },
}

/// Search algorithm over load node values.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerKind {
    NelderMead {
        /// Initial simplex edge length.
        #[serde(default = "default_simplex_step")]
        init_step: f64,
    },
    FdGradientDescent {
        /// Finite-difference step for the gradient estimate; the reduced map
        /// is nonsmooth at jump-onset loads, so gradients there are
        /// unreliable.
        #[serde(default = "default_fd_step")]
        h_fd: f64,
        #[serde(default = "default_descent_step")]
        init_step: f64,
    },
}

fn default_simplex_step() -> f64 {
    0.5
}
fn default_fd_step() -> f64 {
    1e-4
}
fn default_descent_step() -> f64 {
    0.5
}

impl Default for OptimizerKind {
    fn default() -> Self {
        OptimizerKind::NelderMead {
            init_step: default_simplex_step(),
        }
    }
}

/// Everything `optimize` needs besides the problem data.
#[derive(Clone, Debug)]
pub struct OptimizeOptions {
    pub optimizer: OptimizerKind,
    /// Cap on reduced-objective evaluations during the search.
    pub budget: usize,
    pub fidelity: Fidelity,
    /// Extraction used to certify the final incumbent.
    pub final_extraction: ExtractOptions,
    pub final_eps_list: Vec<f64>,
    pub profile: ToleranceProfile,
    pub seed: u64,
}

/// One reduced-objective evaluation.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub objective: f64,
    pub misfit: f64,
    pub h1: f64,
    pub state: ParamTrajectory,
}

/// Outcome of an optimization run.
#[derive(Clone, Debug)]
pub struct ControlResult {
    pub best_load: LoadPath,
    pub best_objective: f64,
    pub best_misfit: f64,
    pub best_h1: f64,
    /// `(evaluation index, incumbent objective)`, nonincreasing.
    pub history: Vec<(usize, f64)>,
    pub state: ParamTrajectory,
    pub certificate: CertificateReport,
    pub evaluations: usize,
    /// Every candidate at least as good as the start satisfied the
    /// Tikhonov coercivity bound `h1 <= (J_init - inf j) / alpha`.
    pub coercivity_ok: bool,
}

/// Solves the state system at the requested fidelity and evaluates
/// `J = j(z_hat(S)) + alpha * |ell|_H1`.
pub fn reduced_objective(
    spec: &ProblemSpec,
    z0: &DVector<f64>,
    load: &LoadPath,
    objective: &ControlObjective,
    fidelity: &Fidelity,
    extraction: &ExtractOptions,
) -> Result<Evaluation> {
    let state = match fidelity {
        Fidelity::SurrogateEps { epsilon, tau } => {
            let traj = viscous::solve_viscous(spec, load, z0, *epsilon, *tau)?;
            reparam::reparametrize(spec, &traj, load, extraction.s_samples)?
        }
        Fidelity::FullExtraction { eps_list } => {
            let (ptraj, _) = reparam::extract_bv(spec, load, z0, eps_list, extraction)?;
            ptraj
        }
    };
    let misfit = objective.j(spec, state.z_hat.last().unwrap());
    let h1 = spec.h1_norm(load);
    Ok(Evaluation {
        objective: misfit + objective.alpha * h1,
        misfit,
        h1,
        state,
    })
}

fn load_from_values(template: &LoadPath, values: &[f64]) -> Result<LoadPath> {
    let n = template.dim();
    let nodes = template.node_times().len();
    debug_assert_eq!(values.len(), nodes * n);
    let node_values = (0..nodes)
        .map(|k| DVector::from_row_slice(&values[k * n..(k + 1) * n]))
        .collect();
    LoadPath::new(template.node_times().to_vec(), node_values)
}

fn flatten_values(load: &LoadPath) -> Vec<f64> {
    load.node_values()
        .iter()
        .flat_map(|v| v.iter().copied())
        .collect()
}

/// Derivative-free or finite-difference search over load node values;
/// deterministic for fixed inputs, with the final incumbent re-solved at
/// full extraction fidelity and certified.
pub fn optimize(
    spec: &ProblemSpec,
    z0: &DVector<f64>,
    objective: &ControlObjective,
    init_load: &LoadPath,
    options: &OptimizeOptions,
) -> Result<ControlResult> {
    if options.budget == 0 {
        return Err(Error::Argument(
            "optimization budget must allow at least one evaluation".into(),
        ));
    }
    let mut tracker = SearchTracker::new(spec, z0, objective, init_load, options);
    let x0 = flatten_values(init_load);
    tracker.evaluate_first(&x0)?;

    match options.optimizer {
        OptimizerKind::NelderMead { init_step } => {
            nelder_mead(&mut tracker, x0, init_step)?;
        }
        OptimizerKind::FdGradientDescent { h_fd, init_step } => {
            fd_descent(&mut tracker, x0, h_fd, init_step)?;
        }
    }

    tracker.finish()
}

/// Shared evaluation bookkeeping of the searchers: budget, incumbents, and
/// the coercivity audit.
struct SearchTracker<'a> {
    spec: &'a ProblemSpec,
    z0: &'a DVector<f64>,
    objective: &'a ControlObjective,
    template: &'a LoadPath,
    options: &'a OptimizeOptions,
    evaluations: usize,
    initial_objective: f64,
    incumbent_x: Vec<f64>,
    incumbent: f64,
    history: Vec<(usize, f64)>,
    coercivity_ok: bool,
}

impl<'a> SearchTracker<'a> {
    fn new(
        spec: &'a ProblemSpec,
        z0: &'a DVector<f64>,
        objective: &'a ControlObjective,
        template: &'a LoadPath,
        options: &'a OptimizeOptions,
    ) -> Self {
        Self {
            spec,
            z0,
            objective,
            template,
            options,
            evaluations: 0,
            initial_objective: f64::INFINITY,
            incumbent_x: Vec::new(),
            incumbent: f64::INFINITY,
            history: Vec::new(),
            coercivity_ok: true,
        }
    }

    fn budget_left(&self) -> bool {
        self.evaluations < self.options.budget
    }

    /// Pure reduced-objective value of a candidate; failures count as
    /// infinite.
    fn value(&self, x: &[f64]) -> (f64, f64) {
        let eval = load_from_values(self.template, x).and_then(|load| {
            reduced_objective(
                self.spec,
                self.z0,
                &load,
                self.objective,
                &self.options.fidelity,
                &self.options.final_extraction,
            )
        });
        match eval {
            Ok(eval) => (eval.objective, eval.h1),
            Err(err) => {
                log::warn!("state solve failed during search: {err}");
                (f64::INFINITY, f64::NAN)
            }
        }
    }

    /// Sequential incumbent bookkeeping for one evaluated candidate.
    fn account(&mut self, x: &[f64], objective: f64, h1: f64) {
        self.evaluations += 1;
        if objective.is_finite() && objective <= self.initial_objective + 1e-12 {
            // Coercivity witness: J <= J_init and j >= 0 force
            // h1 <= (J_init - 0) / alpha.
            let bound = self.initial_objective / self.objective.alpha;
            if h1 > bound + 1e-9 * (1.0 + bound) {
                self.coercivity_ok = false;
            }
        }
        if objective < self.incumbent {
            self.incumbent = objective;
            self.incumbent_x = x.to_vec();
            self.history.push((self.evaluations, objective));
        }
    }

    /// Objective value for the searcher; failed solves count as infinite.
    fn f(&mut self, x: &[f64]) -> f64 {
        if !self.budget_left() {
            return f64::INFINITY;
        }
        let (objective, h1) = self.value(x);
        self.account(x, objective, h1);
        objective
    }

    fn evaluate_first(&mut self, x0: &[f64]) -> Result<()> {
        let first = self.f(x0);
        if !first.is_finite() {
            return Err(Error::Numerical {
                op: "initial control evaluation",
                iterations: 1,
                residual: f64::NAN,
            });
        }
        self.initial_objective = first;
        Ok(())
    }

    fn converged(&self) -> bool {
        // The objective is bounded below by zero; an incumbent at zero
        // cannot be improved.
        self.incumbent <= 1e-15
    }

    fn finish(self) -> Result<ControlResult> {
        let incumbent_x = self.incumbent_x.clone();
        let evaluations = self.evaluations;
        let history = self.history.clone();
        let coercivity_ok = self.coercivity_ok;
        if !self.incumbent.is_finite() {
            return Err(Error::Numerical {
                op: "control search",
                iterations: evaluations,
                residual: f64::NAN,
            });
        }
        let best_load = load_from_values(self.template, &incumbent_x)?;
        // Certification-grade re-solve of the final incumbent.
        let (state, _) = reparam::extract_bv(
            self.spec,
            &best_load,
            self.z0,
            &self.options.final_eps_list,
            &self.options.final_extraction,
        )?;
        let certificate = certify::certify(self.spec, &best_load, self.z0, &state, &self.options.profile)?;
        let misfit = self.objective.j(self.spec, state.z_hat.last().unwrap());
        let h1 = self.spec.h1_norm(&best_load);
        Ok(ControlResult {
            best_load,
            best_objective: misfit + self.objective.alpha * h1,
            best_misfit: misfit,
            best_h1: h1,
            history,
            state,
            certificate,
            evaluations,
            coercivity_ok,
        })
    }
}

/// Standard Nelder-Mead over load node values with an orthogonal initial
/// simplex; candidate evaluations inside one iteration share nothing and the
/// incumbent reduction is sequential in candidate order.
fn nelder_mead(tracker: &mut SearchTracker<'_>, x0: Vec<f64>, init_step: f64) -> Result<()> {
    let dim = x0.len();
    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    simplex.push((x0.clone(), tracker.initial_objective));
    for i in 0..dim {
        if !tracker.budget_left() || tracker.converged() {
            return Ok(());
        }
        let mut x = x0.clone();
        x[i] += init_step;
        let fx = tracker.f(&x);
        simplex.push((x, fx));
    }

    while tracker.budget_left() && !tracker.converged() {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
        let spread = simplex.last().unwrap().1 - simplex[0].1;
        if spread.abs() < 1e-14 * (1.0 + simplex[0].1.abs()) {
            break;
        }
        let centroid: Vec<f64> = (0..dim)
            .map(|i| simplex[..dim].iter().map(|(x, _)| x[i]).sum::<f64>() / dim as f64)
            .collect();
        let worst = simplex[dim].clone();
        let reflect: Vec<f64> = (0..dim)
            .map(|i| centroid[i] + alpha * (centroid[i] - worst.0[i]))
            .collect();
        let f_reflect = tracker.f(&reflect);

        if f_reflect < simplex[0].1 {
            let expand: Vec<f64> = (0..dim)
                .map(|i| centroid[i] + gamma * (centroid[i] - worst.0[i]))
                .collect();
            let f_expand = tracker.f(&expand);
            simplex[dim] = if f_expand < f_reflect {
                (expand, f_expand)
            } else {
                (reflect, f_reflect)
            };
        } else if f_reflect < simplex[dim - 1].1 {
            simplex[dim] = (reflect, f_reflect);
        } else {
            let contract: Vec<f64> = if f_reflect < worst.1 {
                (0..dim)
                    .map(|i| centroid[i] + rho * (reflect[i] - centroid[i]))
                    .collect()
            } else {
                (0..dim)
                    .map(|i| centroid[i] + rho * (worst.0[i] - centroid[i]))
                    .collect()
            };
            let f_contract = tracker.f(&contract);
            if f_contract < worst.1.min(f_reflect) {
                simplex[dim] = (contract, f_contract);
            } else {
                // Shrink towards the best vertex.
                let best = simplex[0].0.clone();
                for v in simplex.iter_mut().skip(1) {
                    for i in 0..dim {
                        v.0[i] = best[i] + sigma * (v.0[i] - best[i]);
                    }
                    v.1 = tracker.f(&v.0);
                    if !tracker.budget_left() {
                        break;
                    }
                }
            }
        }
    }
    Ok(())
}

/// Forward finite-difference gradient descent with backtracking; the
/// difference quotients of one iteration are evaluated concurrently.
fn fd_descent(
    tracker: &mut SearchTracker<'_>,
    mut x: Vec<f64>,
    h_fd: f64,
    init_step: f64,
) -> Result<()> {
    let dim = x.len();
    let mut fx = tracker.initial_objective;
    let mut step = init_step;
    while tracker.budget_left() && !tracker.converged() {
        // Concurrent forward differences, accounted sequentially in index
        // order for determinism.
        let probes: Vec<Vec<f64>> = (0..dim)
            .map(|i| {
                let mut xp = x.clone();
                xp[i] += h_fd;
                xp
            })
            .collect();
        let values: Vec<(f64, f64)> = probes.par_iter().map(|xp| tracker.value(xp)).collect();
        for (xp, &(fp, h1)) in probes.iter().zip(values.iter()) {
            tracker.account(xp, fp, h1);
            if !tracker.budget_left() {
                return Ok(());
            }
        }
        let grad: Vec<f64> = values.iter().map(|(fp, _)| (fp - fx) / h_fd).collect();
        if grad.iter().any(|g| !g.is_finite()) {
            log::warn!("non-finite finite-difference gradient; stopping descent");
            break;
        }
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if norm < 1e-12 {
            break;
        }
        // Backtracking line search.
        let mut improved = false;
        while tracker.budget_left() {
            let trial: Vec<f64> = x
                .iter()
                .zip(grad.iter())
                .map(|(xi, gi)| xi - step * gi / norm)
                .collect();
            let ft = tracker.f(&trial);
            if ft < fx {
                x = trial;
                fx = ft;
                step *= 1.5;
                improved = true;
                break;
            }
            step *= 0.5;
            if step < 1e-12 {
                break;
            }
        }
        if !improved {
            break;
        }
    }
    Ok(())
}
