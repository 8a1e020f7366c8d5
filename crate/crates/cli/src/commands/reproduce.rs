use std::collections::BTreeMap;
use std::path::Path;

use ompath_core::{ModelParams, SimulationSpec};
use rayon::prelude::*;
use serde::Serialize;

use super::mpp::{sweep_stem, write_mpp};
use super::{build_model, most_probable_path, write_samples};
use crate::args::{Method, Objective, OptimizerArgs, ReproduceArgs};
use crate::error::{CliError, Result};
use crate::output::{sha256_hex, write_json};

#[derive(Clone, Debug, Serialize)]
pub struct Example2Entry {
    pub a: f64,
    pub b: f64,
    /// `a^2 / b^2`.
    pub p: f64,
    pub om: f64,
    pub converged: bool,
    pub solver: String,
    pub gradient_norm: f64,
    pub path_file: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct ReproduceSummary {
    pub example1_om: f64,
    pub example1_shooting_om: f64,
    pub example1_sup_gap: f64,
    pub example1_converged: bool,
    /// Sorted by increasing P.
    pub example2: Vec<Example2Entry>,
    pub example2_all_converged: bool,
    /// `"decreasing"`, `"increasing"` or `"none"`: strict order of the
    /// example-2 OM values as P grows.
    pub example2_om_order: String,
    pub runtime_seconds: f64,
}

#[derive(Clone, Debug, Serialize)]
struct FileEntry {
    sha256: String,
    bytes: u64,
}

#[derive(Clone, Debug, Serialize)]
struct Figure {
    /// Path CSVs drawn in the figure, one curve each.
    files: Vec<String>,
    curves: usize,
}

#[derive(Clone, Debug, Serialize)]
struct Manifest {
    files: BTreeMap<String, FileEntry>,
    figures: BTreeMap<String, Figure>,
}

fn optimizer() -> OptimizerArgs {
    OptimizerArgs {
        method: Method::Lbfgs,
        memory: 12,
        no_precondition: false,
        objective: Objective::Midpoint,
        max_iters: 5000,
        tolerance: 1e-8,
        starts: 1,
        newton_fallback: true,
    }
}

pub fn om_order(oms: &[f64]) -> &'static str {
    if oms.len() < 2 {
        "none"
    } else if oms.windows(2).all(|w| w[1] < w[0]) {
        "decreasing"
    } else if oms.windows(2).all(|w| w[1] > w[0]) {
        "increasing"
    } else {
        "none"
    }
}

pub fn cmd_reproduce(args: &ReproduceArgs) -> Result<()> {
    let started = std::time::Instant::now();
    let out = &args.out;
    let opts = optimizer();

    let e1 = build_model("example1", &ModelParams::new(), false)?;
    let spec = SimulationSpec::new(e1.clone(), vec![-2.0], args.sim_steps, args.seed).with_samples(args.samples);
    let samples: Vec<String> =
        write_samples(&out.join("example1"), &spec)?.into_iter().map(|f| format!("example1/{f}")).collect();
    let run1 = most_probable_path(&e1, &[-2.0], &[2.0], &opts, args.steps)?;
    let rep1 = write_mpp(&out.join("example1"), "mpp", "example1", &ModelParams::new(), &[-2.0], &[2.0], &run1)?;
    let shooting = rep1.shooting.as_ref().expect("example1 always shoots");

    let mut scales = args.a.clone();
    scales.sort_by(|x, y| (x / args.b).abs().total_cmp(&(y / args.b).abs()));
    let reports = scales
        .par_iter()
        .map(|&a| {
            let params: ModelParams = [("a".to_string(), a), ("b".to_string(), args.b)].into_iter().collect();
            let model = build_model("example2", &params, false)?;
            let (start, end) = ([-2.0, -2.0], [2.0, 2.0]);
            let run = most_probable_path(&model, &start, &end, &opts, args.steps)?;
            let stem = sweep_stem(&params);
            let rep = write_mpp(&out.join("example2"), &stem, "example2", &params, &start, &end, &run)?;
            log::info!("example2 a={a}: OM {} converged {} ({})", rep.om.total, rep.converged, rep.solver);
            Ok(Example2Entry {
                a,
                b: args.b,
                p: a * a / (args.b * args.b),
                om: rep.om.total,
                converged: rep.converged,
                solver: rep.solver,
                gradient_norm: rep.gradient_norm,
                path_file: format!("example2/{}", rep.path_file),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let oms: Vec<f64> = reports.iter().map(|r| r.om).collect();
    let summary = ReproduceSummary {
        example1_om: rep1.om.total,
        example1_shooting_om: shooting.om.total,
        example1_sup_gap: shooting.sup_gap,
        example1_converged: rep1.converged,
        example2_all_converged: reports.iter().all(|r| r.converged),
        example2_om_order: om_order(&oms).to_string(),
        example2: reports,
        runtime_seconds: started.elapsed().as_secs_f64(),
    };
    write_json(&out.join("summary.json"), &summary)?;

    let mut figures = BTreeMap::new();
    let mut overlay = samples;
    overlay.extend(["example1/mpp.csv".to_string(), "example1/shooting.csv".to_string()]);
    let e2_files: Vec<String> = summary.example2.iter().map(|r| r.path_file.clone()).collect();
    for (name, files) in
        [("example1_overlay", overlay), ("example2_paths", e2_files.clone()), ("example2_comparison", e2_files)]
    {
        figures.insert(name.to_string(), Figure { curves: files.len(), files });
    }
    let manifest = Manifest { files: checksums(out)?, figures };
    write_json(&out.join("manifest.json"), &manifest)?;

    let mut failed: Vec<String> =
        summary.example2.iter().filter(|r| !r.converged).map(|r| r.path_file.clone()).collect();
    if !summary.example1_converged {
        failed.insert(0, "example1/mpp.csv".into());
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::NotConverged(format!("not converged: {}", failed.join(", "))))
    }
}

/// sha256 and size of every file under `root` except the manifest itself,
/// keyed by `/`-separated relative path.
fn checksums(root: &Path) -> Result<BTreeMap<String, FileEntry>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).map_err(|e| CliError::io(&dir, e))? {
            let path = entry.map_err(|e| CliError::io(&dir, e))?.path();
            if path.is_dir() {
                stack.push(path);
                continue;
            }
            let rel = path.strip_prefix(root).expect("walk stays under root");
            let key = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
            if key == "manifest.json" {
                continue;
            }
            let bytes = std::fs::read(&path).map_err(|e| CliError::io(&path, e))?;
            out.insert(key, FileEntry { sha256: sha256_hex(&bytes), bytes: bytes.len() as u64 });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::om_order;

    #[test]
    fn order_labels() {
        assert_eq!(om_order(&[3.0, 2.0, -1.0]), "decreasing");
        assert_eq!(om_order(&[1.0, 2.0]), "increasing");
        assert_eq!(om_order(&[1.0, 1.0]), "none");
        assert_eq!(om_order(&[1.0, 3.0, 2.0]), "none");
    }
}
