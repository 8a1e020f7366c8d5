use std::fmt::Write as _;

use ompath_core::tube::{ladder_csv, ratio_ladder, tube_ladder};
use ompath_core::{om_functional, DiscretePath, TubeQuery};
use serde_json::json;

use super::{endpoints, most_probable_path, read_path, single_model, write_path};
use crate::args::TubeArgs;
use crate::error::{CliError, Result};
use crate::output::{write_atomic, write_json};

pub fn cmd_tube(args: &TubeArgs) -> Result<()> {
    let model = single_model(&args.model)?;
    let (phi1, phi2, labels) = if args.mpp_vs_line {
        let (start, end) = endpoints(&args.model.model, &model, &args.start, &args.end)?;
        let run = most_probable_path(&model, &start, &end, &args.optimizer, args.steps)?;
        if !run.result.converged {
            log::warn!("minimizer did not converge; using its last iterate as the reference");
        }
        let line = DiscretePath::linear(args.steps, &start, &end)?;
        write_path(&args.out.join("mpp.csv"), &run.result.path)?;
        write_path(&args.out.join("line.csv"), &line)?;
        (run.result.path, Some(line), ["mpp.csv".to_string(), "line.csv".to_string()])
    } else {
        let file =
            args.reference.as_ref().ok_or_else(|| CliError::Usage("give --reference FILE or --mpp-vs-line".into()))?;
        let phi2 = args.compare.as_ref().map(|f| read_path(f)).transpose()?;
        let second = args.compare.as_ref().map(|f| f.display().to_string()).unwrap_or_default();
        (read_path(file)?, phi2, [file.display().to_string(), second])
    };

    match phi2 {
        Some(phi2) => {
            let rows = ratio_ladder(&model, &phi1, &phi2, &args.epsilon, args.alpha, args.samples, args.seed)?;
            for r in rows.iter().filter(|r| r.inconclusive) {
                log::warn!("ratio at eps={} is inconclusive ({} and {} hits)", r.epsilon, r.hits1, r.hits2);
            }
            write_atomic(&args.out.join("tube.csv"), ladder_csv(&rows).as_bytes())?;
            write_json(
                &args.out.join("tube.json"),
                &json!({
                    "model": args.model.model,
                    "reference1": labels[0],
                    "reference2": labels[1],
                    "seed": args.seed,
                    "checks": rows,
                }),
            )
        }
        None => {
            let query =
                TubeQuery::new(model.clone(), phi1.clone(), args.epsilon[0], args.alpha, args.samples, args.seed);
            let rows = tube_ladder(&query, &args.epsilon)?;
            let mut csv = String::from("epsilon,hits,samples,probability,stderr\n");
            for r in &rows {
                let _ = writeln!(csv, "{},{},{},{},{}", r.epsilon, r.hits, r.samples, r.probability, r.standard_error);
            }
            write_atomic(&args.out.join("tube.csv"), csv.as_bytes())?;
            write_json(
                &args.out.join("tube.json"),
                &json!({
                    "model": args.model.model,
                    "reference1": labels[0],
                    "om": om_functional(&model, &phi1)?.total,
                    "seed": args.seed,
                    "estimates": rows,
                }),
            )
        }
    }
}
