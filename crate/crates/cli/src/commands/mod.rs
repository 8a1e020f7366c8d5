//! Subcommand implementations.

mod mpp;
mod reproduce;
mod tube;

use std::path::Path;

use ompath_core::io::{path_from_csv, path_to_csv};
use ompath_core::simulate::simulate_sample;
use ompath_core::{builtin_model, om_functional, DiscretePath, ModelParams, SdeModel, SimulationSpec};
use rayon::prelude::*;

use crate::args::{Command, ModelArgs, OmEvalArgs, RunConfig, SimulateArgs};
use crate::error::{CliError, Result};
use crate::output::{write_atomic, write_json};

pub use mpp::{cmd_most_probable_path, most_probable_path, MppReport, MppRun, ShootingReport};
pub use reproduce::{cmd_reproduce, ReproduceSummary};
pub use tube::cmd_tube;

pub fn run(config: RunConfig) -> Result<()> {
    match config.command {
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Mpp(a) => cmd_most_probable_path(&a),
        Command::Tube(a) => cmd_tube(&a),
        Command::OmEval(a) => cmd_om_eval(&a),
        Command::Reproduce(a) => cmd_reproduce(&a),
    }
}

fn parse_params(args: &ModelArgs) -> Result<ModelParams> {
    let mut params = ModelParams::new();
    for kv in &args.params {
        let (k, v) =
            kv.split_once('=').ok_or_else(|| CliError::Usage(format!("--param expects KEY=VALUE, got {kv:?}")))?;
        let v: f64 = v.trim().parse().map_err(|_| CliError::Usage(format!("--param {k}: {v:?} is not a number")))?;
        params.insert(k.trim().to_string(), v);
    }
    if let Some(b) = args.b {
        params.insert("b".into(), b);
    }
    Ok(params)
}

pub fn build_model(name: &str, params: &ModelParams, strict: bool) -> Result<SdeModel> {
    let model = builtin_model(name, params)?;
    for w in model.check_conditions(strict)? {
        log::warn!("{name}: {w}");
    }
    Ok(model)
}

/// One model per value of `--a` (or a single model without it).
pub fn build_models(args: &ModelArgs, allow_sweep: bool) -> Result<Vec<(ModelParams, SdeModel)>> {
    let base = parse_params(args)?;
    if args.a.len() > 1 && !allow_sweep {
        return Err(CliError::Usage("only `mpp` accepts a list for --a".into()));
    }
    let variants: Vec<ModelParams> = if args.a.is_empty() {
        vec![base]
    } else {
        args.a
            .iter()
            .map(|&a| {
                let mut p = base.clone();
                p.insert("a".into(), a);
                p
            })
            .collect()
    };
    variants.into_iter().map(|p| build_model(&args.model, &p, args.strict).map(|m| (p, m))).collect()
}

pub fn single_model(args: &ModelArgs) -> Result<SdeModel> {
    Ok(build_models(args, false)?.remove(0).1)
}

/// Metastable states (or the 0 -> 1 test endpoints) of the built-in models.
pub fn default_endpoints(model: &str, dimension: usize) -> Option<(Vec<f64>, Vec<f64>)> {
    match model {
        "example1" | "example2" => Some((vec![-2.0; dimension], vec![2.0; dimension])),
        "linear_test" => Some((vec![0.0; dimension], vec![1.0; dimension])),
        _ => None,
    }
}

fn state(given: &[f64], default: Option<&Vec<f64>>, flag: &str, dimension: usize) -> Result<Vec<f64>> {
    let v = if given.is_empty() {
        default.cloned().ok_or_else(|| CliError::Usage(format!("{flag} is required for this model")))?
    } else {
        given.to_vec()
    };
    if v.len() != dimension {
        return Err(CliError::Usage(format!("{flag} has {} values, the model has dimension {dimension}", v.len())));
    }
    Ok(v)
}

pub fn endpoints(name: &str, model: &SdeModel, start: &[f64], end: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = model.dimension();
    let defaults = default_endpoints(name, n);
    Ok((
        state(start, defaults.as_ref().map(|d| &d.0), "--start", n)?,
        state(end, defaults.as_ref().map(|d| &d.1), "--end", n)?,
    ))
}

pub fn read_path(file: &Path) -> Result<DiscretePath> {
    let text = std::fs::read_to_string(file).map_err(|e| CliError::io(file, e))?;
    path_from_csv(&text).map_err(|e| match e {
        ompath_core::Error::Csv { line, message } => CliError::Usage(format!("{}:{line}: {message}", file.display())),
        other => other.into(),
    })
}

pub fn write_path(file: &Path, path: &DiscretePath) -> Result<()> {
    write_atomic(file, path_to_csv(path).as_bytes())
}

/// Writes `sample_NNNN.csv` for every sample into `dir`; returns the file
/// names.
pub fn write_samples(dir: &Path, spec: &SimulationSpec) -> Result<Vec<String>> {
    spec.validate()?;
    (0..spec.samples)
        .into_par_iter()
        .map(|i| {
            let name = format!("sample_{i:04}.csv");
            write_path(&dir.join(&name), &simulate_sample(spec, i)?)?;
            Ok(name)
        })
        .collect()
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let model = single_model(&args.model)?;
    let defaults = default_endpoints(&args.model.model, model.dimension());
    let x0 = state(&args.x0, defaults.as_ref().map(|d| &d.0), "--x0", model.dimension())?;
    let spec = SimulationSpec::new(model, x0, args.steps, args.seed).with_samples(args.samples);
    let files = write_samples(&args.out, &spec)?;
    log::info!("wrote {} sample paths to {}", files.len(), args.out.display());
    Ok(())
}

pub fn cmd_om_eval(args: &OmEvalArgs) -> Result<()> {
    let model = single_model(&args.model)?;
    let path = read_path(&args.path)?;
    let om = om_functional(&model, &path)?;
    match &args.out {
        Some(file) => write_json(file, &om),
        None => {
            println!("{}", serde_json::to_string_pretty(&om)?);
            Ok(())
        }
    }
}
