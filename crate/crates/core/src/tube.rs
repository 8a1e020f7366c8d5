//! Monte Carlo tube probabilities `P(||X - phi||_alpha <= eps)` and the
//! ratio law `log(P1 / P2) ~ -(OM(phi1) - OM(phi2)) / 2` for two tubes of the
//! same width.
//!
//! Samples are simulated on the reference path's grid starting at `phi(0)`.
//! Membership uses the discrete Hölder norm on that grid. In a ratio check
//! both tubes are tested against the same simulated paths.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::holder::{HolderParams, HolderScanner};
use crate::model::{DiscretePath, SdeModel};
use crate::om::om_functional;
use crate::simulate::{ensemble_map, SimulationSpec};

/// Below this many hits an estimate is flagged as low-statistics.
pub const LOW_STATISTICS_HITS: u64 = 200;

#[derive(Clone, Debug)]
pub struct TubeQuery {
    pub model: SdeModel,
    pub reference: DiscretePath,
    pub epsilon: f64,
    pub alpha: f64,
    pub samples: usize,
    pub seed: u64,
}

impl TubeQuery {
    pub fn new(model: SdeModel, reference: DiscretePath, epsilon: f64, alpha: f64, samples: usize, seed: u64) -> Self {
        Self { model, reference, epsilon, alpha, samples, seed }
    }

    fn validate(&self) -> Result<HolderParams> {
        check_reference(&self.model, &self.reference)?;
        check_epsilon(self.epsilon)?;
        if self.samples < 1 {
            return Err(Error::InvalidParameter("samples must be at least 1".into()));
        }
        HolderParams::new(self.alpha)
    }
}

fn check_reference(model: &SdeModel, path: &DiscretePath) -> Result<()> {
    if path.dimension() != model.dimension() {
        return Err(Error::DimensionMismatch { expected: model.dimension(), got: path.dimension() });
    }
    if path.steps() < 2 {
        return Err(Error::InvalidPath("reference path needs at least 2 steps".into()));
    }
    if !path.is_finite() {
        return Err(Error::NonFinite("reference path".into()));
    }
    Ok(())
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParameter(format!("tube radius must be positive, got {epsilon}")));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TubeEstimate {
    pub probability: f64,
    pub hits: u64,
    pub samples: u64,
    /// `sqrt(p (1 - p) / samples)`.
    pub standard_error: f64,
    pub epsilon: f64,
    pub alpha: f64,
    pub low_statistics: bool,
}

impl TubeEstimate {
    pub fn from_counts(hits: u64, samples: u64, epsilon: f64, alpha: f64) -> Self {
        let p = hits as f64 / samples as f64;
        Self {
            probability: p,
            hits,
            samples,
            standard_error: (p * (1.0 - p) / samples as f64).sqrt(),
            epsilon,
            alpha,
            low_statistics: hits < LOW_STATISTICS_HITS,
        }
    }
}

fn simulation_spec(model: &SdeModel, reference: &DiscretePath, samples: usize, seed: u64) -> SimulationSpec {
    SimulationSpec::new(model.clone(), reference.start().to_vec(), reference.steps(), seed).with_samples(samples)
}

fn deviation(sample: &DiscretePath, reference: &DiscretePath) -> DiscretePath {
    let values = sample.values().iter().zip(reference.values()).map(|(x, p)| x - p).collect();
    DiscretePath::new(reference.grid().to_vec(), values, reference.dimension())
        .expect("sample and reference share a grid")
}

/// Fraction of simulated paths inside the tube. Zero hits yield probability 0
/// with `low_statistics` set.
pub fn tube_probability(query: &TubeQuery) -> Result<TubeEstimate> {
    let params = query.validate()?;
    let scanner = HolderScanner::new(query.reference.grid(), params);
    let spec = simulation_spec(&query.model, &query.reference, query.samples, query.seed);
    let inside = ensemble_map(&spec, |_, x| scanner.within(&deviation(x, &query.reference), query.epsilon))?;
    let hits = inside.iter().filter(|&&b| b).count() as u64;
    let est = TubeEstimate::from_counts(hits, query.samples as u64, query.epsilon, query.alpha);
    if est.low_statistics {
        log::warn!("tube estimate at eps={} has only {} hits", query.epsilon, hits);
    }
    Ok(est)
}

/// Hit counts for every radius in `epsilons` from one ensemble. Each sample's
/// Hölder norm is computed once, so counts are nested by construction.
pub fn tube_ladder(query: &TubeQuery, epsilons: &[f64]) -> Result<Vec<TubeEstimate>> {
    let params = query.validate()?;
    for &e in epsilons {
        check_epsilon(e)?;
    }
    let scanner = HolderScanner::new(query.reference.grid(), params);
    let spec = simulation_spec(&query.model, &query.reference, query.samples, query.seed);
    let norms = ensemble_map(&spec, |_, x| scanner.norm(&deviation(x, &query.reference)))?;
    Ok(epsilons
        .iter()
        .map(|&e| {
            let hits = norms.iter().filter(|&&v| v <= e).count() as u64;
            TubeEstimate::from_counts(hits, query.samples as u64, e, query.alpha)
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioCheck {
    pub epsilon: f64,
    pub alpha: f64,
    pub samples: u64,
    pub hits1: u64,
    pub hits2: u64,
    /// Samples inside both tubes.
    pub hits_both: u64,
    pub om1: f64,
    pub om2: f64,
    /// `log(P1 / P2)`; `None` when either tube is empty.
    pub log_prob_ratio: Option<f64>,
    /// `-(OM1 - OM2) / 2`.
    pub om_prediction: f64,
    /// `|log_prob_ratio - om_prediction|`.
    pub agreement: Option<f64>,
    /// Delta-method standard error of the log ratio treating the two
    /// binomial estimates as independent: `sqrt((1-p1)/h1 + (1-p2)/h2)`.
    pub standard_error: Option<f64>,
    /// Same, including the covariance from the shared ensemble.
    pub paired_standard_error: Option<f64>,
    pub within_3se: Option<bool>,
    pub sign_agrees: Option<bool>,
    pub inconclusive: bool,
}

/// Estimates both tube probabilities from one ensemble started at the common
/// initial point and compares the log ratio with the OM prediction.
pub fn om_ratio_check(
    model: &SdeModel,
    phi1: &DiscretePath,
    phi2: &DiscretePath,
    epsilon: f64,
    alpha: f64,
    samples: usize,
    seed: u64,
) -> Result<RatioCheck> {
    Ok(ratio_ladder(model, phi1, phi2, &[epsilon], alpha, samples, seed)?.remove(0))
}

/// [`om_ratio_check`] at several radii using one ensemble.
pub fn ratio_ladder(
    model: &SdeModel,
    phi1: &DiscretePath,
    phi2: &DiscretePath,
    epsilons: &[f64],
    alpha: f64,
    samples: usize,
    seed: u64,
) -> Result<Vec<RatioCheck>> {
    check_reference(model, phi1)?;
    check_reference(model, phi2)?;
    if !phi1.same_grid(phi2) {
        return Err(Error::InvalidPath("both reference paths must share one grid".into()));
    }
    if phi1.start() != phi2.start() {
        return Err(Error::InvalidPath("reference paths must start at the same point".into()));
    }
    for &e in epsilons {
        check_epsilon(e)?;
    }
    if samples < 1 {
        return Err(Error::InvalidParameter("samples must be at least 1".into()));
    }
    let params = HolderParams::new(alpha)?;
    let om1 = om_functional(model, phi1)?.total;
    let om2 = om_functional(model, phi2)?.total;
    let scanner = HolderScanner::new(phi1.grid(), params);
    let spec = simulation_spec(model, phi1, samples, seed);
    let norms = ensemble_map(&spec, |_, x| (scanner.norm(&deviation(x, phi1)), scanner.norm(&deviation(x, phi2))))?;
    Ok(epsilons
        .iter()
        .map(|&e| {
            let mut counts = [0u64; 3];
            for &(n1, n2) in &norms {
                counts[0] += (n1 <= e) as u64;
                counts[1] += (n2 <= e) as u64;
                counts[2] += (n1 <= e && n2 <= e) as u64;
            }
            ratio_record(counts, samples as u64, om1, om2, e, alpha)
        })
        .collect())
}

fn ratio_record(counts: [u64; 3], samples: u64, om1: f64, om2: f64, epsilon: f64, alpha: f64) -> RatioCheck {
    let [h1, h2, h12] = counts;
    let om_prediction = -0.5 * (om1 - om2);
    let mut rec = RatioCheck {
        epsilon,
        alpha,
        samples,
        hits1: h1,
        hits2: h2,
        hits_both: h12,
        om1,
        om2,
        log_prob_ratio: None,
        om_prediction,
        agreement: None,
        standard_error: None,
        paired_standard_error: None,
        within_3se: None,
        sign_agrees: None,
        inconclusive: true,
    };
    if h1 == 0 || h2 == 0 {
        return rec;
    }
    let n = samples as f64;
    let (p1, p2) = (h1 as f64 / n, h2 as f64 / n);
    let log_ratio = (h1 as f64).ln() - (h2 as f64).ln();
    let var = (1.0 - p1) / h1 as f64 + (1.0 - p2) / h2 as f64;
    let se = var.sqrt();
    // Subtracting the covariance term leaves (1/n)(p1 + p2 - 2 p12) / (p1 p2).
    let paired = ((h1 + h2 - 2 * h12) as f64 / (h1 as f64 * h2 as f64)).sqrt();
    let diff = (log_ratio - om_prediction).abs();
    rec.log_prob_ratio = Some(log_ratio);
    rec.agreement = Some(diff);
    rec.standard_error = Some(se);
    rec.paired_standard_error = Some(paired);
    rec.within_3se = Some(diff <= 3.0 * se);
    rec.sign_agrees = Some(log_ratio.signum() == om_prediction.signum() && log_ratio != 0.0);
    rec.inconclusive = false;
    rec
}

/// CSV header for ladder sweeps.
pub const LADDER_HEADER: &str = "epsilon,hits1,hits2,log_ratio,om_prediction,stderr";

/// One CSV row per radius. Empty fields mark an inconclusive ratio.
pub fn ladder_csv(rows: &[RatioCheck]) -> String {
    let mut out = String::from(LADDER_HEADER);
    out.push('\n');
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.epsilon,
            r.hits1,
            r.hits2,
            opt(r.log_prob_ratio),
            r.om_prediction,
            opt(r.standard_error)
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{builtin_model, ModelParams};

    fn params(kv: &[(&str, f64)]) -> ModelParams {
        kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn degenerate_model_always_hits() {
        let m = builtin_model("zero_drift", &params(&[("sigma", 0.0)])).unwrap();
        let phi = DiscretePath::constant(32, &[0.7]).unwrap();
        let est = tube_probability(&TubeQuery::new(m, phi, 1e-9, 0.2, 50, 1)).unwrap();
        assert_eq!(est.probability, 1.0);
        assert_eq!(est.hits, 50);
        assert_eq!(est.standard_error, 0.0);
    }

    #[test]
    fn identical_tubes_give_zero_ratio() {
        let m = builtin_model("zero_drift", &params(&[])).unwrap();
        let phi = DiscretePath::constant(32, &[0.0]).unwrap();
        let r = om_ratio_check(&m, &phi, &phi, 2.5, 0.2, 2000, 3).unwrap();
        assert_eq!(r.log_prob_ratio, Some(0.0));
        assert_eq!(r.om_prediction, 0.0);
        assert_eq!(r.hits1, r.hits2);
        assert_eq!(r.paired_standard_error, Some(0.0));
    }

    #[test]
    fn empty_tube_is_inconclusive() {
        let m = builtin_model("zero_drift", &params(&[])).unwrap();
        let phi = DiscretePath::constant(32, &[0.0]).unwrap();
        let r = om_ratio_check(&m, &phi, &phi, 1e-6, 0.2, 100, 3).unwrap();
        assert!(r.inconclusive);
        assert_eq!(r.log_prob_ratio, None);
        let est = tube_probability(&TubeQuery::new(m, phi, 1e-6, 0.2, 100, 3)).unwrap();
        assert_eq!(est.probability, 0.0);
        assert!(est.low_statistics);
    }

    #[test]
    fn ladder_matches_single_estimates() {
        let m = builtin_model("zero_drift", &params(&[])).unwrap();
        let phi = DiscretePath::constant(64, &[0.0]).unwrap();
        let q = TubeQuery::new(m, phi, 2.5, 0.2, 3000, 11);
        let ladder = tube_ladder(&q, &[2.5, 2.0]).unwrap();
        assert!(ladder[1].hits > 0 && ladder[1].hits < ladder[0].hits);
        assert_eq!(ladder[0], tube_probability(&q).unwrap());
        let q2 = TubeQuery { epsilon: 2.0, ..q };
        assert_eq!(ladder[1], tube_probability(&q2).unwrap());
    }

    #[test]
    fn rejects_mismatched_references() {
        let m = builtin_model("zero_drift", &params(&[])).unwrap();
        let a = DiscretePath::constant(32, &[0.0]).unwrap();
        let b = DiscretePath::constant(16, &[0.0]).unwrap();
        let c = DiscretePath::constant(32, &[1.0]).unwrap();
        assert!(om_ratio_check(&m, &a, &b, 1.0, 0.2, 10, 0).is_err());
        assert!(om_ratio_check(&m, &a, &c, 1.0, 0.2, 10, 0).is_err());
        assert!(tube_probability(&TubeQuery::new(m, a, 0.0, 0.2, 10, 0)).is_err());
    }

    #[test]
    fn ladder_csv_layout() {
        let rec = ratio_record([10, 5, 4], 100, 1.0, 2.0, 0.5, 0.2);
        let csv = ladder_csv(&[rec]);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(LADDER_HEADER));
        let fields: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(fields[0], "0.5");
        assert_eq!(fields[4], "0.5");
        assert_eq!(fields[3].parse::<f64>().unwrap(), 10f64.ln() - 5f64.ln());
    }
}
