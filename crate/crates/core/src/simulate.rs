//! Euler-Maruyama integration of `dX = f(t, X) dt + g(t) dW` on [0, 1].
//!
//! `X_{k+1} = X_k + f(t_k, X_k) h + g(t_k) ΔW_k`, with `g` taken at the left
//! endpoint of each step (Itô). Sample `i` of an ensemble draws its noise
//! from ChaCha8 stream `i` of the master seed, so results do not depend on
//! how samples are scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{DiscretePath, SdeModel};
use crate::om::SquareMatrix;

/// A sample is abandoned once any state component exceeds this magnitude.
pub const DIVERGENCE_BOUND: f64 = 1e6;

#[derive(Clone, Debug)]
pub struct SimulationSpec {
    pub model: SdeModel,
    pub x0: Vec<f64>,
    pub steps: usize,
    pub seed: u64,
    pub samples: usize,
}

impl SimulationSpec {
    pub fn new(model: SdeModel, x0: Vec<f64>, steps: usize, seed: u64) -> Self {
        Self { model, x0, steps, seed, samples: 1 }
    }

    pub fn with_samples(mut self, samples: usize) -> Self {
        self.samples = samples;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.x0.len() != self.model.dimension() {
            return Err(Error::DimensionMismatch { expected: self.model.dimension(), got: self.x0.len() });
        }
        if self.steps < 2 {
            return Err(Error::InvalidParameter(format!("steps must be at least 2, got {}", self.steps)));
        }
        if self.samples < 1 {
            return Err(Error::InvalidParameter("samples must be at least 1".into()));
        }
        if self.x0.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("initial state".into()));
        }
        Ok(())
    }
}

/// Independent generator for sample `index` of an ensemble seeded by `seed`.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// `steps * dimension` Brownian increments, each `N(0, 1/steps)`, drawn in
/// the same order the integrator consumes them.
pub fn brownian_increments(rng: &mut impl Rng, steps: usize, dimension: usize) -> Vec<f64> {
    let sqrt_h = (1.0 / steps as f64).sqrt();
    (0..steps * dimension).map(|_| sqrt_h * rng.sample::<f64, _>(StandardNormal)).collect()
}

struct Stepper<'a> {
    model: &'a SdeModel,
    h: f64,
    drift: Vec<f64>,
    noise: Vec<f64>,
    g: SquareMatrix,
}

impl<'a> Stepper<'a> {
    fn new(model: &'a SdeModel, steps: usize) -> Self {
        let n = model.dimension();
        Self { model, h: 1.0 / steps as f64, drift: vec![0.0; n], noise: vec![0.0; n], g: SquareMatrix::zeros(n) }
    }

    fn step(&mut self, t: f64, x: &[f64], dw: &[f64], next: &mut [f64]) {
        self.model.drift_into(t, x, &mut self.drift);
        self.model.diffusion_into(t, &mut self.g);
        self.g.mul_vec_into(dw, &mut self.noise);
        for i in 0..x.len() {
            next[i] = x[i] + self.drift[i] * self.h + self.noise[i];
        }
    }
}

fn diverged(x: &[f64]) -> bool {
    x.iter().any(|v| !v.is_finite() || v.abs() > DIVERGENCE_BOUND)
}

/// Integrates with caller-supplied increments (`steps * n` values, step-major).
/// Used to couple paths on nested grids.
pub fn integrate_increments(model: &SdeModel, x0: &[f64], increments: &[f64]) -> Result<DiscretePath> {
    let n = model.dimension();
    if x0.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: x0.len() });
    }
    if increments.is_empty() || increments.len() % n != 0 {
        return Err(Error::InvalidParameter(format!(
            "increment count {} is not a positive multiple of dimension {n}",
            increments.len()
        )));
    }
    let steps = increments.len() / n;
    let mut path = DiscretePath::constant(steps, x0)?;
    let mut stepper = Stepper::new(model, steps);
    let values = path.values_mut();
    for k in 0..steps {
        let t = k as f64 / steps as f64;
        let (head, tail) = values.split_at_mut((k + 1) * n);
        stepper.step(t, &head[k * n..], &increments[k * n..(k + 1) * n], &mut tail[..n]);
        if diverged(&tail[..n]) {
            return Err(Error::SimulationDiverged { step: k + 1, sample: None });
        }
    }
    Ok(path)
}

fn simulate_with_rng(spec: &SimulationSpec, rng: &mut ChaCha8Rng) -> Result<DiscretePath> {
    let n = spec.model.dimension();
    let steps = spec.steps;
    let sqrt_h = (1.0 / steps as f64).sqrt();
    let mut path = DiscretePath::constant(steps, &spec.x0)?;
    let mut stepper = Stepper::new(&spec.model, steps);
    let mut dw = vec![0.0; n];
    let values = path.values_mut();
    for k in 0..steps {
        for d in dw.iter_mut() {
            *d = sqrt_h * rng.sample::<f64, _>(StandardNormal);
        }
        let t = k as f64 / steps as f64;
        let (head, tail) = values.split_at_mut((k + 1) * n);
        stepper.step(t, &head[k * n..], &dw, &mut tail[..n]);
        if diverged(&tail[..n]) {
            return Err(Error::SimulationDiverged { step: k + 1, sample: None });
        }
    }
    Ok(path)
}

/// Sample `index` of the ensemble described by `spec`.
pub fn simulate_sample(spec: &SimulationSpec, index: usize) -> Result<DiscretePath> {
    let mut rng = sample_rng(spec.seed, index as u64);
    simulate_with_rng(spec, &mut rng).map_err(|e| match e {
        Error::SimulationDiverged { step, .. } => Error::SimulationDiverged { step, sample: Some(index) },
        other => other,
    })
}

/// One Euler-Maruyama path; identical to sample 0 of the ensemble.
pub fn euler_maruyama(spec: &SimulationSpec) -> Result<DiscretePath> {
    spec.validate()?;
    let mut rng = sample_rng(spec.seed, 0);
    simulate_with_rng(spec, &mut rng)
}

/// All `spec.samples` paths, in sample order.
pub fn simulate_ensemble(spec: &SimulationSpec) -> Result<Vec<DiscretePath>> {
    ensemble_map(spec, |_, path| path.clone())
}

/// Simulates every sample and maps it through `f` without keeping the paths.
/// Runs on the rayon pool; output order is sample order.
pub fn ensemble_map<T, F>(spec: &SimulationSpec, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, &DiscretePath) -> T + Sync + Send,
{
    spec.validate()?;
    (0..spec.samples).into_par_iter().map(|i| simulate_sample(spec, i).map(|path| f(i, &path))).collect()
}

/// Lazily simulates samples in order on the calling thread.
pub fn ensemble_iter(spec: &SimulationSpec) -> Result<impl Iterator<Item = Result<DiscretePath>> + '_> {
    spec.validate()?;
    Ok((0..spec.samples).map(move |i| simulate_sample(spec, i)))
}
