#![allow(dead_code)]

use ompath_core::{DiscretePath, ModelParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn params(kv: &[(&str, f64)]) -> ModelParams {
    kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Smooth random path: endpoints plus a few random sine modes per coordinate.
pub fn random_path(rng: &mut impl Rng, steps: usize, start: &[f64], end: &[f64], amplitude: f64) -> DiscretePath {
    let n = start.len();
    let coeffs: Vec<[f64; 3]> = (0..n).map(|_| [0; 3].map(|_| rng.random_range(-amplitude..amplitude))).collect();
    DiscretePath::from_fn(steps, n, |t, x| {
        for i in 0..n {
            let c = coeffs[i];
            let bumps: f64 = (1..=3).map(|m| c[m - 1] * (std::f64::consts::PI * m as f64 * t).sin()).sum();
            x[i] = start[i] + (end[i] - start[i]) * t + bumps;
        }
    })
    .unwrap()
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}
