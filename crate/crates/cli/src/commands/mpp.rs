use std::path::Path;

use ompath_core::optimize::{euler_lagrange_rhs_example1, example1_residual, minimize_om_multistart};
use ompath_core::{
    minimize_om, om_functional, solve_el_bvp, stationary_path, DiscretePath, ModelParams, OmEvaluation, OptimizeResult,
    SdeModel,
};
use serde::Serialize;

use super::{build_models, endpoints, write_path};
use crate::args::{MppArgs, OptimizerArgs};
use crate::error::{CliError, Result};
use crate::output::write_json;

/// Iteration cap for the Newton fallback.
const NEWTON_MAX_ITERS: usize = 60;

pub struct MppRun {
    pub result: OptimizeResult,
    pub solver: &'static str,
    /// Reported OM value of every start.
    pub start_oms: Vec<f64>,
    pub best_start: usize,
}

/// Minimizes the OM functional, optionally falling back to Newton on the
/// Euler-Lagrange equations.
pub fn most_probable_path(
    model: &SdeModel,
    start: &[f64],
    end: &[f64],
    opts: &OptimizerArgs,
    steps: usize,
) -> Result<MppRun> {
    let config = opts.config(steps);
    let (result, start_oms, best_start) = if opts.starts > 1 {
        let (runs, best) = minimize_om_multistart(model, start, end, &config, opts.starts)?;
        let oms = runs.iter().map(|r| r.om.total).collect();
        (runs.into_iter().nth(best).expect("best index is in range"), oms, best)
    } else {
        let r = minimize_om(model, start, end, &config)?;
        let om = r.om.total;
        (r, vec![om], 0)
    };
    let mut run = MppRun { result, solver: "minimizer", start_oms, best_start };
    if run.result.converged || !opts.newton_fallback {
        return Ok(run);
    }
    log::info!("{}: minimizer did not converge, trying Newton", model.name());
    let initial = DiscretePath::linear(steps, start, end)?;
    match stationary_path(model, &initial, config.objective, config.gradient_tolerance, NEWTON_MAX_ITERS) {
        Ok(n) if n.converged || n.gradient_norm < run.result.gradient_norm => {
            run.result = n;
            run.solver = "newton";
        }
        Ok(_) => {}
        Err(e) => log::warn!("Newton fallback failed: {e}"),
    }
    Ok(run)
}

#[derive(Clone, Debug, Serialize)]
pub struct ShootingReport {
    pub path_file: String,
    pub om: OmEvaluation,
    /// Sup-norm distance to the minimizer.
    pub sup_gap: f64,
    /// Closed-form Euler-Lagrange residual of the shooting path.
    pub residual: f64,
    /// Same residual of the minimizer.
    pub minimizer_residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MppReport {
    pub model: String,
    pub params: ModelParams,
    pub start: Vec<f64>,
    pub end: Vec<f64>,
    pub steps: usize,
    pub converged: bool,
    pub solver: String,
    pub iterations: usize,
    pub om: OmEvaluation,
    pub objective_value: f64,
    pub gradient_norm: f64,
    pub el_residual: f64,
    pub start_oms: Vec<f64>,
    pub best_start: usize,
    pub path_file: String,
    pub shooting: Option<ShootingReport>,
}

/// File stem for one member of a parameter sweep, e.g. `mpp_a5_b1`.
pub fn sweep_stem(params: &ModelParams) -> String {
    let mut stem = String::from("mpp");
    for (k, v) in params {
        stem.push_str(&format!("_{k}{v}"));
    }
    stem
}

/// Writes `<stem>.csv` and `<stem>.json` (plus `shooting.csv` for example1).
pub fn write_mpp(
    dir: &Path,
    stem: &str,
    name: &str,
    params: &ModelParams,
    start: &[f64],
    end: &[f64],
    run: &MppRun,
) -> Result<MppReport> {
    let r = &run.result;
    let path_file = format!("{stem}.csv");
    write_path(&dir.join(&path_file), &r.path)?;
    let shooting = if name == "example1" {
        let shot = solve_el_bvp(euler_lagrange_rhs_example1, start[0], end[0], r.path.steps())?;
        write_path(&dir.join("shooting.csv"), &shot)?;
        Some(ShootingReport {
            path_file: "shooting.csv".into(),
            om: om_functional(&ompath_core::builtin_model(name, params)?, &shot)?,
            sup_gap: r.path.max_abs_diff(&shot)?,
            residual: example1_residual(&shot)?,
            minimizer_residual: example1_residual(&r.path)?,
        })
    } else {
        None
    };
    let report = MppReport {
        model: name.to_string(),
        params: params.clone(),
        start: start.to_vec(),
        end: end.to_vec(),
        steps: r.path.steps(),
        converged: r.converged,
        solver: run.solver.to_string(),
        iterations: r.iterations,
        om: r.om,
        objective_value: r.objective_value,
        gradient_norm: r.gradient_norm,
        el_residual: r.el_residual,
        start_oms: run.start_oms.clone(),
        best_start: run.best_start,
        path_file,
        shooting,
    };
    write_json(&dir.join(format!("{stem}.json")), &report)?;
    Ok(report)
}

pub fn cmd_most_probable_path(args: &MppArgs) -> Result<()> {
    let models = build_models(&args.model, true)?;
    let sweep = args.model.a.len() > 1;
    let mut failed = Vec::new();
    for (params, model) in &models {
        let (start, end) = endpoints(&args.model.model, model, &args.start, &args.end)?;
        let run = most_probable_path(model, &start, &end, &args.optimizer, args.steps)?;
        let stem = if sweep { sweep_stem(params) } else { "mpp".to_string() };
        let report = write_mpp(&args.out, &stem, &args.model.model, params, &start, &end, &run)?;
        log::info!(
            "{stem}: OM {} (converged {}, gradient {:e})",
            report.om.total,
            report.converged,
            report.gradient_norm
        );
        if !report.converged {
            failed.push(stem);
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::NotConverged(format!("not converged: {}", failed.join(", "))))
    }
}
