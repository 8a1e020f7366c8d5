//! Most probable paths: direct minimization of the discretized OM functional
//! with pinned endpoints, plus Euler-Lagrange solvers used as an independent
//! check on the minimizer.

mod bvp;
mod descent;
mod precondition;
mod residual;
mod stationary;

use rayon::prelude::*;
use serde::Serialize;

pub use bvp::{
    euler_lagrange_rhs_example1, integrate_ivp, solve_el_bvp, solve_el_bvp_relaxation, solve_el_bvp_with,
    ShootingConfig, ShootingSolution,
};
pub use descent::{
    max_norm, minimize, minimize_preconditioned, DescentMethod, DescentOutcome, DescentSettings, LineSearch,
    Preconditioner,
};
pub use precondition::BlockTridiagonal;
pub use residual::{euler_lagrange_residual, euler_lagrange_residuals, example1_residual};
pub use stationary::{fd_block_hessian, newton_stationary, NewtonOutcome};

use crate::error::{Error, Result};
use crate::model::{DiscretePath, SdeModel};
use crate::om::{om_functional, om_value_and_gradient_with, Discretization, OmEvaluation};

#[derive(Clone, Debug, PartialEq)]
pub enum InitialPath {
    LinearInterpolation,
    /// Used as given except that its endpoint rows are overwritten with the
    /// requested endpoints.
    UserSupplied(DiscretePath),
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerConfig {
    pub max_iters: usize,
    /// Convergence threshold on the max-norm of the interior gradient.
    pub gradient_tolerance: f64,
    pub initial_path: InitialPath,
    pub line_search: LineSearch,
    pub method: DescentMethod,
    pub steps: usize,
    /// Discrete functional that is minimized. Reported OM values always use
    /// the node-centered form of [`om_functional`].
    pub objective: Discretization,
    /// Use the Gauss-Newton block tridiagonal preconditioner.
    pub preconditioned: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_iters: 5000,
            gradient_tolerance: 1e-8,
            initial_path: InitialPath::LinearInterpolation,
            line_search: LineSearch::default(),
            method: DescentMethod::default(),
            steps: 200,
            objective: Discretization::Midpoint,
            preconditioned: true,
        }
    }
}

impl OptimizerConfig {
    pub fn with_steps(mut self, steps: usize) -> Self {
        self.steps = steps;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps < 8 {
            return Err(Error::InvalidParameter(format!("grid steps must be at least 8, got {}", self.steps)));
        }
        if !(self.gradient_tolerance > 0.0) {
            return Err(Error::InvalidParameter("gradient tolerance must be positive".into()));
        }
        let ls = &self.line_search;
        if !(ls.shrink > 0.0 && ls.shrink < 1.0 && ls.sufficient_decrease > 0.0 && ls.sufficient_decrease < 1.0) {
            return Err(Error::InvalidParameter("line search needs shrink and sufficient_decrease in (0, 1)".into()));
        }
        if let InitialPath::UserSupplied(p) = &self.initial_path {
            if p.steps() != self.steps {
                return Err(Error::InvalidPath(format!(
                    "initial path has {} steps but the optimizer grid has {}",
                    p.steps(),
                    self.steps
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct OptimizeResult {
    #[serde(skip)]
    pub path: DiscretePath,
    pub om: OmEvaluation,
    /// Final value of the minimized objective.
    pub objective_value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Max-norm of the objective's interior gradient at the returned path.
    pub gradient_norm: f64,
    /// Max-norm of the Euler-Lagrange residual at interior nodes.
    pub el_residual: f64,
    /// Objective value after every accepted iteration.
    #[serde(skip)]
    pub om_history: Vec<f64>,
}

/// Minimizes the discretized OM functional over paths from `x_start` to
/// `x_end`. Non-convergence is reported through `converged`, not as an error.
pub fn minimize_om(
    model: &SdeModel,
    x_start: &[f64],
    x_end: &[f64],
    config: &OptimizerConfig,
) -> Result<OptimizeResult> {
    config.validate()?;
    let n = model.dimension();
    for x in [x_start, x_end] {
        if x.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: x.len() });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("endpoint".into()));
        }
    }
    let steps = config.steps;
    let mut template = match &config.initial_path {
        InitialPath::LinearInterpolation => DiscretePath::linear(steps, x_start, x_end)?,
        InitialPath::UserSupplied(p) => {
            if p.dimension() != n {
                return Err(Error::DimensionMismatch { expected: n, got: p.dimension() });
            }
            p.clone()
        }
    };
    template.node_mut(0).copy_from_slice(x_start);
    template.node_mut(steps).copy_from_slice(x_end);

    // Surface singular diffusion and similar hard failures up front.
    om_functional(model, &template)?;

    let interior = |path: &DiscretePath| path.values()[n..steps * n].to_vec();
    let x0 = interior(&template);
    let mut work = template.clone();
    let objective = |x: &[f64]| -> Option<(f64, Vec<f64>)> {
        work.values_mut()[n..steps * n].copy_from_slice(x);
        om_value_and_gradient_with(model, &work, config.objective).ok().map(|(om, g)| (om.total, g))
    };
    let settings = DescentSettings {
        method: config.method,
        line_search: config.line_search,
        max_iters: config.max_iters,
        gradient_tolerance: config.gradient_tolerance,
    };
    let mut scratch = template.clone();
    let mut gauss_newton = |x: &[f64], v: &[f64]| -> Option<Vec<f64>> {
        scratch.values_mut()[n..steps * n].copy_from_slice(x);
        BlockTridiagonal::gauss_newton(model, &scratch).ok()?.solve(v)
    };
    let preconditioner: Option<&mut Preconditioner<'_>> =
        if config.preconditioned { Some(&mut gauss_newton) } else { None };
    let outcome = minimize_preconditioned(x0, objective, preconditioner, &settings)
        .ok_or_else(|| Error::NonFinite("OM functional at the initial path".into()))?;
    debug_assert!(outcome.history.windows(2).all(|w| w[1] <= w[0]));

    let mut path = template;
    path.values_mut()[n..steps * n].copy_from_slice(&outcome.x);
    let om = om_functional(model, &path)?;
    let el_residual = euler_lagrange_residual(model, &path)?;
    if outcome.stalled && !outcome.converged {
        log::warn!(
            "line search stalled after {} iterations with gradient norm {:e}",
            outcome.iterations,
            max_norm(&outcome.gradient)
        );
    }
    Ok(OptimizeResult {
        path,
        om,
        objective_value: outcome.value,
        iterations: outcome.iterations,
        converged: outcome.converged,
        gradient_norm: max_norm(&outcome.gradient),
        el_residual,
        om_history: outcome.history,
    })
}

/// Newton iteration on the discrete Euler-Lagrange equations of the
/// objective, starting from `initial` (endpoints taken from it). Converges to
/// stationary points of any index, which matters when the functional has no
/// local minimum near the start.
pub fn stationary_path(
    model: &SdeModel,
    initial: &DiscretePath,
    objective: Discretization,
    tolerance: f64,
    max_iters: usize,
) -> Result<OptimizeResult> {
    let n = model.dimension();
    if initial.dimension() != n {
        return Err(Error::DimensionMismatch { expected: n, got: initial.dimension() });
    }
    let steps = initial.steps();
    om_functional(model, initial)?;
    let mut work = initial.clone();
    let gradient = |x: &[f64]| -> Option<Vec<f64>> {
        work.values_mut()[n..steps * n].copy_from_slice(x);
        om_value_and_gradient_with(model, &work, objective).ok().map(|(_, g)| g)
    };
    let x0 = initial.values()[n..steps * n].to_vec();
    let outcome = newton_stationary(x0, gradient, n, tolerance, max_iters)
        .ok_or_else(|| Error::NonFinite("OM gradient at the initial path".into()))?;
    let mut path = initial.clone();
    path.values_mut()[n..steps * n].copy_from_slice(&outcome.x);
    let om = om_functional(model, &path)?;
    let (value, _) = om_value_and_gradient_with(model, &path, objective)?;
    let el_residual = euler_lagrange_residual(model, &path)?;
    Ok(OptimizeResult {
        path,
        om,
        objective_value: value.total,
        iterations: outcome.iterations,
        converged: outcome.converged,
        gradient_norm: max_norm(&outcome.gradient),
        el_residual,
        om_history: Vec::new(),
    })
}

/// Deterministic starting path number `index`: the straight line for 0, the
/// line plus a sine bump of alternating sign and growing frequency otherwise.
pub fn multistart_initial_path(x_start: &[f64], x_end: &[f64], steps: usize, index: usize) -> Result<DiscretePath> {
    let mut path = DiscretePath::linear(steps, x_start, x_end)?;
    if index == 0 {
        return Ok(path);
    }
    let mode = ((index + 1) / 2) as f64;
    let sign = if index % 2 == 1 { 1.0 } else { -1.0 };
    let span = x_start.iter().zip(x_end).map(|(a, b)| (b - a).abs()).fold(1.0, f64::max);
    for k in 1..steps {
        let bump = sign * 0.5 * span * (std::f64::consts::PI * mode * path.time(k)).sin();
        path.node_mut(k).iter_mut().for_each(|v| *v += bump);
    }
    Ok(path)
}

/// Runs `starts` independent minimizations in parallel from
/// [`multistart_initial_path`] and returns all results with the index of the
/// lowest OM value among converged runs (or among all runs if none converged).
pub fn minimize_om_multistart(
    model: &SdeModel,
    x_start: &[f64],
    x_end: &[f64],
    config: &OptimizerConfig,
    starts: usize,
) -> Result<(Vec<OptimizeResult>, usize)> {
    if starts == 0 {
        return Err(Error::InvalidParameter("need at least one start".into()));
    }
    let results: Vec<OptimizeResult> = (0..starts)
        .into_par_iter()
        .map(|i| {
            let mut cfg = config.clone();
            if i > 0 || cfg.initial_path == InitialPath::LinearInterpolation {
                cfg.initial_path = InitialPath::UserSupplied(multistart_initial_path(x_start, x_end, cfg.steps, i)?);
            }
            minimize_om(model, x_start, x_end, &cfg)
        })
        .collect::<Result<_>>()?;
    let any_converged = results.iter().any(|r| r.converged);
    let best = results
        .iter()
        .enumerate()
        .filter(|(_, r)| r.converged || !any_converged)
        .min_by(|a, b| a.1.om.total.total_cmp(&b.1.om.total))
        .map(|(i, _)| i)
        .unwrap_or(0);
    Ok((results, best))
}
