//! SDE models `dX = f(t, X) dt + g(t) dW` with time-varying additive noise.
//!
//! A model is a bundle of pure functions of `(t, x)`; it carries no state and
//! is cheap to clone (closures are reference counted), so the same model can
//! be shared by every worker of an ensemble.

mod builtin;
mod path;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use builtin::{builtin_model, BUILTIN_MODELS};
pub use path::{uniform_grid, DiscretePath, GRID_TOLERANCE};

use crate::error::{Error, Result};
use crate::om::SquareMatrix;

/// Parameters of a built-in model, keyed by name.
pub type ModelParams = BTreeMap<String, f64>;

pub type DriftFn = dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync;
pub type DiffusionFn = dyn Fn(f64, &mut SquareMatrix) + Send + Sync;
pub type JacobianFn = dyn Fn(f64, &[f64], &mut SquareMatrix) + Send + Sync;
pub type GradientFn = dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync;

/// Relative slack when comparing det g against declared bounds.
const DET_BOUND_SLACK: f64 = 1e-12;

/// Relative tolerance used when checking an analytic Jacobian against
/// central differences.
pub const JACOBIAN_CHECK_TOLERANCE: f64 = 1e-5;

/// Central-difference step for coordinate value `x`.
#[inline]
pub fn fd_step(x: f64) -> f64 {
    f64::max(1e-6, 1e-6 * x.abs())
}

#[derive(Clone)]
pub struct SdeModel {
    name: String,
    dimension: usize,
    drift: Arc<DriftFn>,
    diffusion: Arc<DiffusionFn>,
    drift_jacobian: Option<Arc<JacobianFn>>,
    divergence_gradient: Option<Arc<GradientFn>>,
    lipschitz_bound: Option<f64>,
    det_bounds: Option<(f64, f64)>,
}

impl fmt::Debug for SdeModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SdeModel")
            .field("name", &self.name)
            .field("dimension", &self.dimension)
            .field("analytic_jacobian", &self.drift_jacobian.is_some())
            .field("lipschitz_bound", &self.lipschitz_bound)
            .field("det_bounds", &self.det_bounds)
            .finish()
    }
}

impl SdeModel {
    pub fn new(
        name: impl Into<String>,
        dimension: usize,
        drift: impl Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
        diffusion: impl Fn(f64, &mut SquareMatrix) + Send + Sync + 'static,
    ) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidParameter("model dimension must be positive".into()));
        }
        Ok(Self {
            name: name.into(),
            dimension,
            drift: Arc::new(drift),
            diffusion: Arc::new(diffusion),
            drift_jacobian: None,
            divergence_gradient: None,
            lipschitz_bound: None,
            det_bounds: None,
        })
    }

    /// Analytic Jacobian, entry `(i, j) = d f^i / d x^j`.
    pub fn with_jacobian(mut self, jac: impl Fn(f64, &[f64], &mut SquareMatrix) + Send + Sync + 'static) -> Self {
        self.drift_jacobian = Some(Arc::new(jac));
        self
    }

    /// Analytic gradient in `x` of `Tr(grad f)(t, x)`.
    pub fn with_divergence_gradient(mut self, grad: impl Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.divergence_gradient = Some(Arc::new(grad));
        self
    }

    pub fn with_lipschitz_bound(mut self, bound: f64) -> Result<Self> {
        if !(bound > 0.0 && bound.is_finite()) {
            return Err(Error::InvalidParameter(format!("Lipschitz bound must be positive, got {bound}")));
        }
        self.lipschitz_bound = Some(bound);
        Ok(self)
    }

    /// Bounds `m <= det g(t) <= M` on [0, 1].
    pub fn with_det_bounds(mut self, m: f64, big_m: f64) -> Result<Self> {
        if !(m > 0.0 && m < big_m && big_m.is_finite()) {
            return Err(Error::InvalidParameter(format!("det bounds need 0 < m < M, got ({m}, {big_m})")));
        }
        self.det_bounds = Some((m, big_m));
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn lipschitz_bound(&self) -> Option<f64> {
        self.lipschitz_bound
    }

    pub fn det_bounds(&self) -> Option<(f64, f64)> {
        self.det_bounds
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        self.drift_jacobian.is_some()
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dimension {
            return Err(Error::DimensionMismatch { expected: self.dimension, got });
        }
        Ok(())
    }

    /// Unchecked drift evaluation into `out`.
    #[inline]
    pub fn drift_into(&self, t: f64, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dimension);
        (self.drift)(t, x, out)
    }

    #[inline]
    pub fn diffusion_into(&self, t: f64, out: &mut SquareMatrix) {
        (self.diffusion)(t, out)
    }

    pub fn diffusion(&self, t: f64) -> SquareMatrix {
        let mut g = SquareMatrix::zeros(self.dimension);
        self.diffusion_into(t, &mut g);
        g
    }

    /// Drift Jacobian: analytic when configured, central differences otherwise.
    pub fn jacobian_into(&self, t: f64, x: &[f64], out: &mut SquareMatrix) {
        match &self.drift_jacobian {
            Some(jac) => jac(t, x, out),
            None => self.fd_jacobian_into(t, x, out),
        }
    }

    /// Central-difference Jacobian regardless of any analytic one.
    pub fn fd_jacobian_into(&self, t: f64, x: &[f64], out: &mut SquareMatrix) {
        let n = self.dimension;
        let mut xp = x.to_vec();
        let mut fp = vec![0.0; n];
        let mut fm = vec![0.0; n];
        for j in 0..n {
            let step = fd_step(x[j]);
            xp[j] = x[j] + step;
            self.drift_into(t, &xp, &mut fp);
            xp[j] = x[j] - step;
            self.drift_into(t, &xp, &mut fm);
            xp[j] = x[j];
            for i in 0..n {
                out[(i, j)] = (fp[i] - fm[i]) / (2.0 * step);
            }
        }
    }

    pub fn fd_jacobian(&self, t: f64, x: &[f64]) -> SquareMatrix {
        let mut out = SquareMatrix::zeros(self.dimension);
        self.fd_jacobian_into(t, x, &mut out);
        out
    }

    /// Gradient in `x` of the trace of the drift Jacobian. Uses the analytic
    /// form when present, else central differences of the Jacobian trace.
    pub fn divergence_gradient_into(&self, t: f64, x: &[f64], out: &mut [f64]) {
        if let Some(grad) = &self.divergence_gradient {
            grad(t, x, out);
            return;
        }
        let n = self.dimension;
        let mut xp = x.to_vec();
        let mut jac = SquareMatrix::zeros(n);
        for j in 0..n {
            // Differencing a trace that may itself come from finite
            // differences: a wider outer step keeps the roundoff bounded.
            let step = if self.drift_jacobian.is_some() { fd_step(x[j]) } else { 1e-4 * x[j].abs().max(1.0) };
            xp[j] = x[j] + step;
            self.jacobian_into(t, &xp, &mut jac);
            let plus = jac.trace();
            xp[j] = x[j] - step;
            self.jacobian_into(t, &xp, &mut jac);
            let minus = jac.trace();
            xp[j] = x[j];
            out[j] = (plus - minus) / (2.0 * step);
        }
    }

    /// Central-difference time derivative of the drift at fixed `x`.
    pub fn drift_time_derivative_into(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let step = 1e-6;
        let mut fm = vec![0.0; self.dimension];
        self.drift_into(t + step, x, out);
        self.drift_into(t - step, x, &mut fm);
        for (o, m) in out.iter_mut().zip(&fm) {
            *o = (*o - m) / (2.0 * step);
        }
    }

    /// The same model with coordinates relabeled: coordinate `i` of the new
    /// model is coordinate `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<SdeModel> {
        let n = self.dimension;
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::InvalidParameter(format!("{perm:?} is not a permutation of 0..{n}")));
        }
        let perm: Arc<[usize]> = perm.into();
        let base = self.clone();

        // x_old[perm[i]] = x_new[i]
        let to_old = {
            let perm = perm.clone();
            move |x: &[f64]| {
                let mut old = vec![0.0; x.len()];
                for (i, &p) in perm.iter().enumerate() {
                    old[p] = x[i];
                }
                old
            }
        };

        let drift = {
            let (base, perm, to_old) = (base.clone(), perm.clone(), to_old.clone());
            move |t: f64, x: &[f64], out: &mut [f64]| {
                let mut f = vec![0.0; x.len()];
                base.drift_into(t, &to_old(x), &mut f);
                for (i, &p) in perm.iter().enumerate() {
                    out[i] = f[p];
                }
            }
        };
        let diffusion = {
            let (base, perm) = (base.clone(), perm.clone());
            move |t: f64, out: &mut SquareMatrix| {
                let g = base.diffusion(t);
                for (i, &p) in perm.iter().enumerate() {
                    for (j, &q) in perm.iter().enumerate() {
                        out[(i, j)] = g[(p, q)];
                    }
                }
            }
        };
        let mut model = SdeModel::new(format!("{}[perm {:?}]", self.name, &*perm), n, drift, diffusion)?;
        if self.drift_jacobian.is_some() {
            let (base, perm, to_old) = (base.clone(), perm.clone(), to_old.clone());
            model = model.with_jacobian(move |t, x, out| {
                let mut j = SquareMatrix::zeros(x.len());
                base.jacobian_into(t, &to_old(x), &mut j);
                for (a, &p) in perm.iter().enumerate() {
                    for (b, &q) in perm.iter().enumerate() {
                        out[(a, b)] = j[(p, q)];
                    }
                }
            });
        }
        if self.divergence_gradient.is_some() {
            let (base, perm) = (base.clone(), perm.clone());
            model = model.with_divergence_gradient(move |t, x, out| {
                let mut g = vec![0.0; x.len()];
                base.divergence_gradient_into(t, &to_old(x), &mut g);
                for (i, &p) in perm.iter().enumerate() {
                    out[i] = g[p];
                }
            });
        }
        model.lipschitz_bound = self.lipschitz_bound;
        model.det_bounds = self.det_bounds;
        Ok(model)
    }

    /// Stacks independent models into one block-diagonal model: drift acts
    /// component-wise and the diffusion is block diagonal.
    pub fn block_diagonal(blocks: &[SdeModel]) -> Result<SdeModel> {
        if blocks.is_empty() {
            return Err(Error::InvalidParameter("block_diagonal needs at least one block".into()));
        }
        let offsets: Arc<[usize]> = blocks
            .iter()
            .scan(0, |acc, m| {
                let o = *acc;
                *acc += m.dimension;
                Some(o)
            })
            .collect();
        let n: usize = blocks.iter().map(|m| m.dimension).sum();
        let blocks: Arc<[SdeModel]> = blocks.into();
        let name = blocks.iter().map(|m| m.name.as_str()).collect::<Vec<_>>().join("+");

        let drift = {
            let (blocks, offsets) = (blocks.clone(), offsets.clone());
            move |t: f64, x: &[f64], out: &mut [f64]| {
                for (m, &o) in blocks.iter().zip(offsets.iter()) {
                    let d = m.dimension;
                    m.drift_into(t, &x[o..o + d], &mut out[o..o + d]);
                }
            }
        };
        let diffusion = {
            let (blocks, offsets) = (blocks.clone(), offsets.clone());
            move |t: f64, out: &mut SquareMatrix| {
                out.fill(0.0);
                for (m, &o) in blocks.iter().zip(offsets.iter()) {
                    let g = m.diffusion(t);
                    for i in 0..m.dimension {
                        for j in 0..m.dimension {
                            out[(o + i, o + j)] = g[(i, j)];
                        }
                    }
                }
            }
        };
        let jacobian = {
            let (blocks, offsets) = (blocks.clone(), offsets.clone());
            move |t: f64, x: &[f64], out: &mut SquareMatrix| {
                out.fill(0.0);
                for (m, &o) in blocks.iter().zip(offsets.iter()) {
                    let d = m.dimension;
                    let mut j = SquareMatrix::zeros(d);
                    m.jacobian_into(t, &x[o..o + d], &mut j);
                    for a in 0..d {
                        for b in 0..d {
                            out[(o + a, o + b)] = j[(a, b)];
                        }
                    }
                }
            }
        };
        let divergence_gradient = {
            let (blocks, offsets) = (blocks.clone(), offsets.clone());
            move |t: f64, x: &[f64], out: &mut [f64]| {
                for (m, &o) in blocks.iter().zip(offsets.iter()) {
                    let d = m.dimension;
                    m.divergence_gradient_into(t, &x[o..o + d], &mut out[o..o + d]);
                }
            }
        };
        Ok(SdeModel::new(name, n, drift, diffusion)?
            .with_jacobian(jacobian)
            .with_divergence_gradient(divergence_gradient))
    }

    /// Checks conditions (C1)-(C3) numerically on a time grid and on probe
    /// points in `[0, 1] x [-3, 3]^n`. Violations are returned as warnings,
    /// or as an error when `strict` is set.
    pub fn check_conditions(&self, strict: bool) -> Result<Vec<String>> {
        let mut warnings = Vec::new();
        let n = self.dimension;

        for k in 0..=64 {
            let t = k as f64 / 64.0;
            let g = self.diffusion(t);
            if !g.is_finite() {
                warnings.push(format!("g({t}) has non-finite entries"));
                continue;
            }
            let det = g.determinant();
            match self.det_bounds {
                Some((m, big_m)) if !(m * (1.0 - DET_BOUND_SLACK) <= det && det <= big_m * (1.0 + DET_BOUND_SLACK)) => {
                    warnings.push(format!("(C2) det g({t}) = {det} outside [{m}, {big_m}]"));
                }
                None if g.relative_determinant().abs() < crate::om::SINGULARITY_THRESHOLD => {
                    warnings.push(format!("(C3) g({t}) is singular (det = {det})"));
                }
                _ => {}
            }
        }

        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut x = vec![0.0; n];
        let mut analytic = SquareMatrix::zeros(n);
        for _ in 0..100 {
            let t = rng.random_range(0.0..=1.0);
            x.iter_mut().for_each(|v| *v = rng.random_range(-3.0..=3.0));
            self.jacobian_into(t, &x, &mut analytic);
            if self.drift_jacobian.is_some() {
                let fd = self.fd_jacobian(t, &x);
                let scale = fd.as_slice().iter().fold(1.0_f64, |m, v| m.max(v.abs()));
                let err = analytic.max_abs_diff(&fd);
                if err > JACOBIAN_CHECK_TOLERANCE * scale {
                    warnings.push(format!(
                        "analytic Jacobian disagrees with finite differences at t={t}, x={x:?} (error {err:e})"
                    ));
                    break;
                }
            }
            if let Some(bound) = self.lipschitz_bound {
                let norm = spectral_norm(&analytic);
                if norm > bound {
                    warnings.push(format!("(C1) |grad f| = {norm} exceeds Lipschitz bound {bound} at t={t}, x={x:?}"));
                    break;
                }
            }
        }

        if strict && !warnings.is_empty() {
            return Err(Error::ConditionViolated(warnings.join("; ")));
        }
        for w in &warnings {
            log::warn!("model `{}`: {w}", self.name);
        }
        Ok(warnings)
    }
}

/// Largest singular value by power iteration on `A^T A`.
fn spectral_norm(a: &SquareMatrix) -> f64 {
    let n = a.order();
    let ata = a.transpose().matmul(a);
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut lambda = 0.0;
    for _ in 0..100 {
        let w = ata.mul_vec(&v);
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        lambda = norm;
        v = w.into_iter().map(|x| x / norm).collect();
    }
    lambda.sqrt()
}

/// `f(t, x)` with a dimension check.
pub fn eval_drift(model: &SdeModel, t: f64, x: &[f64]) -> Result<Vec<f64>> {
    model.check_dim(x.len())?;
    let mut out = vec![0.0; model.dimension];
    model.drift_into(t, x, &mut out);
    Ok(out)
}

/// `grad f(t, x)`, analytic if available, else central differences.
pub fn eval_drift_jacobian(model: &SdeModel, t: f64, x: &[f64]) -> Result<SquareMatrix> {
    model.check_dim(x.len())?;
    let mut out = SquareMatrix::zeros(model.dimension);
    model.jacobian_into(t, x, &mut out);
    Ok(out)
}
