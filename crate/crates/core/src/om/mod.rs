//! Onsager-Machlup functional on discrete paths.
//!
//! ```text
//! OM(phi) = int_0^1 |g(t)^-1 (phi' - f(t, phi))|^2 dt + int_0^1 Tr(g(t)^-1 grad f(t, phi) g(t)) dt
//! ```
//!
//! No factor 1/2 is applied here; tube probabilities scale like
//! `exp(-OM / 2)` and the tube module applies the half itself.
//!
//! Discretization: node velocities by central differences in the interior
//! and second-order one-sided differences at the two endpoints, then the
//! composite trapezoid rule over the nodes. Both are O(h^2).
//!
//! A second, cell-centered discretization (midpoint rule with the cell's
//! difference quotient as velocity) is provided for optimization. Central
//! differences leave even and odd nodes coupled only through the endpoint
//! stencils, so the node-centered functional admits an almost free sawtooth
//! mode and its discrete minimizer carries an O(h) zigzag. The cell-centered
//! form has no such mode.

mod matrix;

use serde::{Deserialize, Serialize};

pub use matrix::{mat_inverse, SquareMatrix, SINGULARITY_THRESHOLD};

use crate::error::{Error, Result};
use crate::model::{DiscretePath, SdeModel};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OmEvaluation {
    pub total: f64,
    /// `∫ |g^-1 (phi' - f)|^2 dt`, always nonnegative.
    pub drift_term: f64,
    /// `∫ Tr(g^-1 grad f g) dt`.
    pub divergence_term: f64,
    pub grid_size: usize,
}

/// Neumaier compensated summation.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Trapezoid weight of node `k` on a grid with `steps` steps.
#[inline]
pub(crate) fn trapezoid_weight(k: usize, steps: usize) -> f64 {
    let h = 1.0 / steps as f64;
    if k == 0 || k == steps {
        0.5 * h
    } else {
        h
    }
}

/// Finite-difference velocity stencil at node `k`: `(offset, coefficient)`
/// pairs such that `v_k = Σ coefficient * y_{k + offset}`, with the `1/h`
/// factor already applied.
pub(crate) fn velocity_stencil(k: usize, steps: usize) -> [(isize, f64); 3] {
    let inv2h = steps as f64 / 2.0;
    if k == 0 {
        [(0, -3.0 * inv2h), (1, 4.0 * inv2h), (2, -inv2h)]
    } else if k == steps {
        [(0, 3.0 * inv2h), (-1, -4.0 * inv2h), (-2, inv2h)]
    } else {
        [(1, inv2h), (-1, -inv2h), (0, 0.0)]
    }
}

/// Node velocities `phi'(t_k)`, row-major like the path values.
pub fn path_velocity(path: &DiscretePath) -> Result<Vec<f64>> {
    let steps = path.steps();
    if steps < 2 {
        return Err(Error::InvalidPath("velocity stencils need at least 2 steps".into()));
    }
    let n = path.dimension();
    let mut v = vec![0.0; path.len() * n];
    for k in 0..=steps {
        let row = &mut v[k * n..(k + 1) * n];
        for (offset, c) in velocity_stencil(k, steps) {
            if c == 0.0 {
                continue;
            }
            let node = path.node((k as isize + offset) as usize);
            for (r, y) in row.iter_mut().zip(node) {
                *r += c * y;
            }
        }
    }
    Ok(v)
}

fn check_point(model: &SdeModel, x: &[f64]) -> Result<()> {
    if x.len() != model.dimension() {
        return Err(Error::DimensionMismatch { expected: model.dimension(), got: x.len() });
    }
    Ok(())
}

/// `div^g f(t, x) = Tr(g(t)^-1 grad f(t, x) g(t))`, evaluated literally.
pub fn divergence_term(model: &SdeModel, t: f64, x: &[f64]) -> Result<f64> {
    check_point(model, x)?;
    let g = model.diffusion(t);
    let g_inv = g.inverse()?;
    let mut jac = SquareMatrix::zeros(model.dimension());
    model.jacobian_into(t, x, &mut jac);
    Ok(g_inv.matmul(&jac).matmul(&g).trace())
}

/// `Tr(grad f(t, x))`. Equal to [`divergence_term`] by cyclicity of the
/// trace; kept separate so the two routes can be checked against each other.
pub fn divergence_trace(model: &SdeModel, t: f64, x: &[f64]) -> Result<f64> {
    check_point(model, x)?;
    let mut jac = SquareMatrix::zeros(model.dimension());
    model.jacobian_into(t, x, &mut jac);
    Ok(jac.trace())
}

/// OM Lagrangian `|g^-1 (xdot - f)|^2 + div^g f` at one point.
pub fn om_integrand(model: &SdeModel, t: f64, x: &[f64], xdot: &[f64]) -> Result<f64> {
    check_point(model, x)?;
    check_point(model, xdot)?;
    let mut ws = NodeWorkspace::new(model.dimension());
    let (kinetic, divergence) = ws.evaluate(model, t, x, xdot)?;
    Ok(kinetic + divergence)
}

/// Scratch buffers for evaluating the Lagrangian at one node.
struct NodeWorkspace {
    f: Vec<f64>,
    residual: Vec<f64>,
    scaled: Vec<f64>,
    g: SquareMatrix,
    g_inv: SquareMatrix,
    jac: SquareMatrix,
}

impl NodeWorkspace {
    fn new(n: usize) -> Self {
        Self {
            f: vec![0.0; n],
            residual: vec![0.0; n],
            scaled: vec![0.0; n],
            g: SquareMatrix::zeros(n),
            g_inv: SquareMatrix::zeros(n),
            jac: SquareMatrix::zeros(n),
        }
    }

    /// Returns `(|g^-1 (v - f)|^2, Tr(g^-1 J g))` and leaves
    /// `scaled = g^-1 (v - f)` and the Jacobian in the workspace.
    fn evaluate(&mut self, model: &SdeModel, t: f64, x: &[f64], v: &[f64]) -> Result<(f64, f64)> {
        model.drift_into(t, x, &mut self.f);
        model.diffusion_into(t, &mut self.g);
        self.g_inv = self.g.inverse()?;
        model.jacobian_into(t, x, &mut self.jac);
        for i in 0..x.len() {
            self.residual[i] = v[i] - self.f[i];
        }
        self.g_inv.mul_vec_into(&self.residual, &mut self.scaled);
        let kinetic = self.scaled.iter().map(|s| s * s).sum();
        let divergence = self.g_inv.matmul(&self.jac).matmul(&self.g).trace();
        Ok((kinetic, divergence))
    }
}

/// Which discrete approximation of the OM integral to use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Discretization {
    /// Node velocities by central differences, trapezoid rule.
    #[default]
    NodeCentered,
    /// Cell velocities `(x_{k+1} - x_k) / h` at cell midpoints, midpoint rule.
    Midpoint,
}

/// Trapezoid quadrature of the OM Lagrangian along `path`.
pub fn om_functional(model: &SdeModel, path: &DiscretePath) -> Result<OmEvaluation> {
    evaluate(model, path, false).map(|(om, _)| om)
}

/// Gradient of [`om_functional`] with respect to the interior node values
/// (endpoints held fixed): `(N - 1) * n` entries, row-major by node.
pub fn om_path_gradient(model: &SdeModel, path: &DiscretePath) -> Result<Vec<f64>> {
    evaluate(model, path, true).map(|(_, g)| g)
}

/// Functional value and interior gradient in a single sweep.
pub fn om_value_and_gradient(model: &SdeModel, path: &DiscretePath) -> Result<(OmEvaluation, Vec<f64>)> {
    evaluate(model, path, true)
}

/// Value and interior gradient under the chosen [`Discretization`].
pub fn om_value_and_gradient_with(
    model: &SdeModel,
    path: &DiscretePath,
    discretization: Discretization,
) -> Result<(OmEvaluation, Vec<f64>)> {
    match discretization {
        Discretization::NodeCentered => evaluate(model, path, true),
        Discretization::Midpoint => evaluate_midpoint(model, path, true),
    }
}

/// Value under the chosen [`Discretization`].
pub fn om_functional_with(
    model: &SdeModel,
    path: &DiscretePath,
    discretization: Discretization,
) -> Result<OmEvaluation> {
    match discretization {
        Discretization::NodeCentered => evaluate(model, path, false).map(|(om, _)| om),
        Discretization::Midpoint => evaluate_midpoint(model, path, false).map(|(om, _)| om),
    }
}

fn check_path(model: &SdeModel, path: &DiscretePath) -> Result<()> {
    let n = model.dimension();
    if path.dimension() != n {
        return Err(Error::DimensionMismatch { expected: n, got: path.dimension() });
    }
    if !path.is_finite() {
        return Err(Error::NonFinite("path values".into()));
    }
    Ok(())
}

fn finish(
    drift_sum: CompensatedSum,
    div_sum: CompensatedSum,
    steps: usize,
    n: usize,
    mut grad: Vec<f64>,
    with_gradient: bool,
) -> Result<(OmEvaluation, Vec<f64>)> {
    let drift_term = drift_sum.value();
    let divergence_term = div_sum.value();
    let total = drift_term + divergence_term;
    if !total.is_finite() {
        return Err(Error::NonFinite(format!(
            "OM functional (drift term {drift_term}, divergence term {divergence_term})"
        )));
    }
    let om = OmEvaluation { total, drift_term, divergence_term, grid_size: steps };
    if with_gradient {
        grad.truncate(steps * n);
        grad.drain(..n);
    }
    Ok((om, grad))
}

fn evaluate_midpoint(model: &SdeModel, path: &DiscretePath, with_gradient: bool) -> Result<(OmEvaluation, Vec<f64>)> {
    check_path(model, path)?;
    let n = model.dimension();
    let steps = path.steps();
    let mut ws = NodeWorkspace::new(n);
    let mut drift_sum = CompensatedSum::default();
    let mut div_sum = CompensatedSum::default();
    let mut grad = if with_gradient { vec![0.0; path.len() * n] } else { Vec::new() };
    let (mut xm, mut v) = (vec![0.0; n], vec![0.0; n]);
    let mut momentum = vec![0.0; n];
    let mut pull = vec![0.0; n];
    let mut div_grad = vec![0.0; n];

    for k in 0..steps {
        let (t0, t1) = (path.time(k), path.time(k + 1));
        let h = t1 - t0;
        let tm = 0.5 * (t0 + t1);
        let (a, b) = (path.node(k), path.node(k + 1));
        for i in 0..n {
            xm[i] = 0.5 * (a[i] + b[i]);
            v[i] = (b[i] - a[i]) / h;
        }
        let (kinetic, divergence) = ws.evaluate(model, tm, &xm, &v)?;
        drift_sum.add(h * kinetic);
        div_sum.add(h * divergence);

        if with_gradient {
            ws.g_inv.mul_transpose_vec_into(&ws.scaled, &mut momentum);
            momentum.iter_mut().for_each(|m| *m *= 2.0);
            ws.jac.mul_transpose_vec_into(&momentum, &mut pull);
            model.divergence_gradient_into(tm, &xm, &mut div_grad);
            for i in 0..n {
                let position = 0.5 * h * (div_grad[i] - pull[i]);
                grad[k * n + i] += position - momentum[i];
                grad[(k + 1) * n + i] += position + momentum[i];
            }
        }
    }
    finish(drift_sum, div_sum, steps, n, grad, with_gradient)
}

fn evaluate(model: &SdeModel, path: &DiscretePath, with_gradient: bool) -> Result<(OmEvaluation, Vec<f64>)> {
    check_path(model, path)?;
    let n = model.dimension();
    let steps = path.steps();
    let velocity = path_velocity(path)?;
    let mut ws = NodeWorkspace::new(n);
    let mut drift_sum = CompensatedSum::default();
    let mut div_sum = CompensatedSum::default();

    // Full-node gradient; the endpoint rows are dropped at the end.
    let mut grad = if with_gradient { vec![0.0; path.len() * n] } else { Vec::new() };
    let mut momentum = vec![0.0; n];
    let mut pull = vec![0.0; n];
    let mut div_grad = vec![0.0; n];

    for k in 0..=steps {
        let t = path.time(k);
        let x = path.node(k);
        let v = &velocity[k * n..(k + 1) * n];
        let (kinetic, divergence) = ws.evaluate(model, t, x, v)?;
        let w = trapezoid_weight(k, steps);
        drift_sum.add(w * kinetic);
        div_sum.add(w * divergence);

        if with_gradient {
            // dL/dv = 2 g^-T g^-1 (v - f);  dL/dx = -J^T dL/dv + grad Tr(J)
            ws.g_inv.mul_transpose_vec_into(&ws.scaled, &mut momentum);
            momentum.iter_mut().for_each(|m| *m *= 2.0);
            ws.jac.mul_transpose_vec_into(&momentum, &mut pull);
            model.divergence_gradient_into(t, x, &mut div_grad);
            let row = &mut grad[k * n..(k + 1) * n];
            for i in 0..n {
                row[i] += w * (div_grad[i] - pull[i]);
            }
            for (offset, c) in velocity_stencil(k, steps) {
                if c == 0.0 {
                    continue;
                }
                let j = (k as isize + offset) as usize;
                let row = &mut grad[j * n..(j + 1) * n];
                for i in 0..n {
                    row[i] += w * c * momentum[i];
                }
            }
        }
    }

    finish(drift_sum, div_sum, steps, n, grad, with_gradient)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{builtin_model, ModelParams};

    fn params(kv: &[(&str, f64)]) -> ModelParams {
        kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn ex1() -> SdeModel {
        builtin_model("example1", &params(&[])).unwrap()
    }

    #[test]
    fn divergence_examples() {
        assert_eq!(divergence_term(&ex1(), 1.0, &[0.0]).unwrap(), 4.0);
        let m = SdeModel::new(
            "custom",
            2,
            |_, x, out| {
                out[0] = x[0] + 2.0 * x[1];
                out[1] = 3.0 * x[0] + 4.0 * x[1];
            },
            |_, g| {
                g[(0, 0)] = 2.0;
                g[(0, 1)] = 1.0;
                g[(1, 0)] = 1.0;
                g[(1, 1)] = 1.0;
            },
        )
        .unwrap();
        assert!((divergence_term(&m, 0.0, &[0.3, 0.1]).unwrap() - 5.0).abs() < 1e-8);
        let id = SdeModel::new(
            "identity_drift",
            3,
            |_, x, out| out.copy_from_slice(x),
            |t, g| {
                g.fill(0.0);
                g[(0, 0)] = 1.0 + t;
                g[(0, 2)] = 0.5;
                g[(1, 1)] = 2.0;
                g[(2, 2)] = 3.0;
            },
        )
        .unwrap();
        assert!((divergence_term(&id, 0.4, &[1.0, 2.0, 3.0]).unwrap() - 3.0).abs() < 1e-8);
    }

    #[test]
    fn integrand_examples() {
        let zero = builtin_model("zero_drift", &params(&[])).unwrap();
        assert_eq!(om_integrand(&zero, 0.3, &[17.0], &[1.0]).unwrap(), 1.0);
        assert_eq!(om_integrand(&ex1(), 0.0, &[-2.0], &[0.0]).unwrap(), 0.0);
        assert_eq!(om_integrand(&ex1(), 1.0, &[-2.0], &[0.0]).unwrap(), -8.0);
    }

    #[test]
    fn singular_diffusion_is_an_error() {
        let m = builtin_model("zero_drift", &params(&[("sigma", 0.0)])).unwrap();
        assert!(matches!(om_integrand(&m, 0.0, &[0.0], &[0.0]), Err(Error::SingularMatrix { .. })));
        let path = DiscretePath::constant(4, &[0.0]).unwrap();
        assert!(matches!(om_functional(&m, &path), Err(Error::SingularMatrix { .. })));
    }

    #[test]
    fn constant_path_example1() {
        let path = DiscretePath::constant(1000, &[-2.0]).unwrap();
        let om = om_functional(&ex1(), &path).unwrap();
        assert_eq!(om.drift_term, 0.0);
        assert!((om.divergence_term + 4.0).abs() < 1e-12);
        assert!((om.total + 4.0).abs() < 1e-6);
        assert_eq!(om.grid_size, 1000);
    }

    #[test]
    fn unit_speed_path_zero_drift() {
        let zero = builtin_model("zero_drift", &params(&[])).unwrap();
        let path = DiscretePath::from_scalar_fn(50, |t| t).unwrap();
        let om = om_functional(&zero, &path).unwrap();
        assert!((om.total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_path_has_flat_gradient_without_drift() {
        let zero = builtin_model("zero_drift", &params(&[("n", 2.0)])).unwrap();
        let path = DiscretePath::constant(20, &[0.7, -1.1]).unwrap();
        let g = om_path_gradient(&zero, &path).unwrap();
        assert_eq!(g.len(), 19 * 2);
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn velocity_is_exact_for_quadratics() {
        let path = DiscretePath::from_scalar_fn(10, |t| 3.0 * t * t - t + 2.0).unwrap();
        let v = path_velocity(&path).unwrap();
        for (k, vk) in v.iter().enumerate() {
            let t = path.time(k);
            assert!((vk - (6.0 * t - 1.0)).abs() < 1e-12, "node {k}: {vk}");
        }
    }

    #[test]
    fn non_finite_path_rejected() {
        let mut path = DiscretePath::constant(4, &[0.0]).unwrap();
        path.node_mut(2)[0] = f64::NAN;
        assert!(matches!(om_functional(&ex1(), &path), Err(Error::NonFinite(_))));
    }

    #[test]
    fn evaluation_serializes_with_documented_keys() {
        let om = OmEvaluation { total: 1.5, drift_term: 2.0, divergence_term: -0.5, grid_size: 10 };
        let json = serde_json::to_value(om).unwrap();
        for key in ["total", "drift_term", "divergence_term", "grid_size"] {
            assert!(json.get(key).is_some(), "{key}");
        }
    }
}
