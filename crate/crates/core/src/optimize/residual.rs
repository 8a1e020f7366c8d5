//! Euler-Lagrange residuals of the OM Lagrangian
//! `L(t, y, v) = |g^-1 (v - f)|^2 + Tr(grad f)`.
//!
//! With `A(t) = g^-T g^-1` and `p = dL/dv = 2 A (v - f)`:
//!
//! ```text
//! dL/dy  = -J^T p + grad_y Tr(J)
//! dp/dt  = 2 A'(v - f) + 2 A (y'' - f_t - J v)
//! E      = dL/dy - dp/dt
//! ```
//!
//! `y'` is taken by central differences and `y''` by the three-point second
//! difference; `A'` and `f_t` by central differences in time.

use super::bvp::euler_lagrange_rhs_example1;
use crate::error::{Error, Result};
use crate::model::{DiscretePath, SdeModel};
use crate::om::SquareMatrix;

const TIME_STEP: f64 = 1e-6;

fn metric(model: &SdeModel, t: f64) -> Result<SquareMatrix> {
    let g_inv = model.diffusion(t).inverse()?;
    Ok(g_inv.transpose().matmul(&g_inv))
}

/// Residual vectors `E_k` at interior nodes `k = 1..N-1`, row-major.
pub fn euler_lagrange_residuals(model: &SdeModel, path: &DiscretePath) -> Result<Vec<f64>> {
    let n = model.dimension();
    if path.dimension() != n {
        return Err(Error::DimensionMismatch { expected: n, got: path.dimension() });
    }
    let steps = path.steps();
    if steps < 2 {
        return Err(Error::InvalidPath("residual needs at least 2 steps".into()));
    }
    let h = path.step_size();
    let mut out = Vec::with_capacity((steps - 1) * n);
    let (mut f, mut f_t, mut div_grad) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut jac = SquareMatrix::zeros(n);
    let (mut mismatch, mut accel) = (vec![0.0; n], vec![0.0; n]);

    for k in 1..steps {
        let t = path.time(k);
        let (prev, y, next) = (path.node(k - 1), path.node(k), path.node(k + 1));
        let v: Vec<f64> = next.iter().zip(prev).map(|(a, b)| (a - b) / (2.0 * h)).collect();
        let a_dd: Vec<f64> = (0..n).map(|i| (next[i] - 2.0 * y[i] + prev[i]) / (h * h)).collect();

        model.drift_into(t, y, &mut f);
        model.jacobian_into(t, y, &mut jac);
        model.drift_time_derivative_into(t, y, &mut f_t);
        model.divergence_gradient_into(t, y, &mut div_grad);
        let a = metric(model, t)?;
        let a_plus = metric(model, t + TIME_STEP)?;
        let a_minus = metric(model, t - TIME_STEP)?;

        let jv = jac.mul_vec(&v);
        for i in 0..n {
            mismatch[i] = v[i] - f[i];
            accel[i] = a_dd[i] - f_t[i] - jv[i];
        }
        let p: Vec<f64> = a.mul_vec(&mismatch).into_iter().map(|x| 2.0 * x).collect();
        let mut pull = vec![0.0; n];
        jac.mul_transpose_vec_into(&p, &mut pull);
        let a_mis_plus = a_plus.mul_vec(&mismatch);
        let a_mis_minus = a_minus.mul_vec(&mismatch);
        let a_accel = a.mul_vec(&accel);
        for i in 0..n {
            let a_dot_term = (a_mis_plus[i] - a_mis_minus[i]) / (2.0 * TIME_STEP);
            let dp_dt = 2.0 * a_dot_term + 2.0 * a_accel[i];
            out.push(div_grad[i] - pull[i] - dp_dt);
        }
    }
    Ok(out)
}

/// Max-norm of [`euler_lagrange_residuals`] over interior nodes.
pub fn euler_lagrange_residual(model: &SdeModel, path: &DiscretePath) -> Result<f64> {
    Ok(euler_lagrange_residuals(model, path)?.iter().fold(0.0, |m, r| m.max(r.abs())))
}

/// `max_k |y''_k - rhs(t_k, y_k, y'_k)|` for the closed-form example-1
/// equation. Related to the generic residual by `E = -(2 / g^2)(y'' - rhs)`.
pub fn example1_residual(path: &DiscretePath) -> Result<f64> {
    if path.dimension() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: path.dimension() });
    }
    let steps = path.steps();
    if steps < 2 {
        return Err(Error::InvalidPath("residual needs at least 2 steps".into()));
    }
    let h = path.step_size();
    let y = path.values();
    Ok((1..steps)
        .map(|k| {
            let v = (y[k + 1] - y[k - 1]) / (2.0 * h);
            let acc = (y[k + 1] - 2.0 * y[k] + y[k - 1]) / (h * h);
            (acc - euler_lagrange_rhs_example1(path.time(k), y[k], v)).abs()
        })
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{builtin_model, ModelParams};

    #[test]
    fn constant_path_zero_drift_has_no_residual() {
        let m = builtin_model("zero_drift", &ModelParams::new()).unwrap();
        let path = DiscretePath::constant(30, &[1.5]).unwrap();
        assert_eq!(euler_lagrange_residual(&m, &path).unwrap(), 0.0);
    }

    #[test]
    fn generic_residual_matches_closed_form_equation() {
        // On a smooth path the generic residual equals -(2/g^2)(y'' - rhs)
        // up to the finite-difference error in A' and f_t.
        let m = builtin_model("example1", &ModelParams::new()).unwrap();
        let path = DiscretePath::from_scalar_fn(200, |t| -2.0 + 4.0 * t * t + 0.3 * (3.0 * t).sin()).unwrap();
        let generic = euler_lagrange_residuals(&m, &path).unwrap();
        let h = path.step_size();
        let y = path.values();
        for k in 1..path.steps() {
            let t = path.time(k);
            let v = (y[k + 1] - y[k - 1]) / (2.0 * h);
            let acc = (y[k + 1] - 2.0 * y[k] + y[k - 1]) / (h * h);
            let g = 1.0 + t;
            let expected = -2.0 / (g * g) * (acc - euler_lagrange_rhs_example1(t, y[k], v));
            let e = generic[k - 1];
            assert!((e - expected).abs() <= 1e-6 * (1.0 + expected.abs()), "node {k}: {e} vs {expected}");
        }
    }
}
