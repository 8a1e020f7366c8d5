use super::{ModelParams, SdeModel};
use crate::error::{Error, Result};

pub const BUILTIN_MODELS: [&str; 4] = ["example1", "example2", "linear_test", "zero_drift"];

/// Looks up a built-in model by name.
///
/// * `example1`: `f = t (4x - x^3)`, `g = t + 1` (double well, metastable at ±2).
/// * `example2`: two-factor fast/slow system with scales `a`, `b` (both
///   required):
///   `f = 0.04 (a^2 x1 (8 - x1 x2 - x1^2), b^2 x2 (8 - x1 x2 - x2^2))`,
///   `g = 0.4 diag(a (1 + t), b (2 + t))`.
/// * `linear_test`: `f = a x`, `g = (sigma0 + sigma1 t) I` in `n` dimensions.
///   Defaults `a = -1`, `sigma0 = 1`, `sigma1 = 0`, `n = 1`.
/// * `zero_drift`: `f = 0`, `g = sigma I`. Defaults `sigma = 1`, `n = 1`;
///   `sigma = 0` gives the degenerate no-noise model.
pub fn builtin_model(name: &str, params: &ModelParams) -> Result<SdeModel> {
    match name {
        "example1" => {
            check_keys(name, params, &[])?;
            example1()
        }
        "example2" => {
            check_keys(name, params, &["a", "b"])?;
            let a = required_positive(params, "a")?;
            let b = required_positive(params, "b")?;
            example2(a, b)
        }
        "linear_test" => {
            check_keys(name, params, &["a", "sigma0", "sigma1", "n"])?;
            let a = finite(params, "a", -1.0)?;
            let s0 = finite(params, "sigma0", 1.0)?;
            let s1 = finite(params, "sigma1", 0.0)?;
            let n = dimension(params)?;
            linear(a, s0, s1, n)
        }
        "zero_drift" => {
            check_keys(name, params, &["sigma", "n"])?;
            let sigma = finite(params, "sigma", 1.0)?;
            if sigma < 0.0 {
                return Err(Error::InvalidParameter(format!("sigma must be nonnegative, got {sigma}")));
            }
            zero_drift(sigma, dimension(params)?)
        }
        other => Err(Error::UnknownModel(other.to_string())),
    }
}

fn check_keys(name: &str, params: &ModelParams, allowed: &[&str]) -> Result<()> {
    for key in params.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(Error::InvalidParameter(format!(
                "model `{name}` has no parameter `{key}` (accepted: {allowed:?})"
            )));
        }
    }
    Ok(())
}

fn finite(params: &ModelParams, key: &str, default: f64) -> Result<f64> {
    let v = params.get(key).copied().unwrap_or(default);
    if !v.is_finite() {
        return Err(Error::InvalidParameter(format!("`{key}` must be finite, got {v}")));
    }
    Ok(v)
}

fn required_positive(params: &ModelParams, key: &str) -> Result<f64> {
    let v = *params.get(key).ok_or_else(|| Error::InvalidParameter(format!("missing required parameter `{key}`")))?;
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::InvalidParameter(format!("`{key}` must be positive, got {v}")));
    }
    Ok(v)
}

fn dimension(params: &ModelParams) -> Result<usize> {
    let n = params.get("n").copied().unwrap_or(1.0);
    if !(n >= 1.0 && n.fract() == 0.0 && n <= 1e6) {
        return Err(Error::InvalidParameter(format!("`n` must be a positive integer, got {n}")));
    }
    Ok(n as usize)
}

fn example1() -> Result<SdeModel> {
    SdeModel::new("example1", 1, |t, x, out| out[0] = t * (4.0 * x[0] - x[0].powi(3)), |t, g| g[(0, 0)] = t + 1.0)?
        .with_jacobian(|t, x, j| j[(0, 0)] = t * (4.0 - 3.0 * x[0] * x[0]))
        .with_divergence_gradient(|t, x, out| out[0] = -6.0 * t * x[0])
        .with_det_bounds(1.0, 2.0)
}

fn example2(a: f64, b: f64) -> Result<SdeModel> {
    let (a2, b2) = (a * a, b * b);
    SdeModel::new(
        "example2",
        2,
        move |_, x, out| {
            let (x1, x2) = (x[0], x[1]);
            out[0] = 0.04 * a2 * x1 * (8.0 - x1 * x2 - x1 * x1);
            out[1] = 0.04 * b2 * x2 * (8.0 - x1 * x2 - x2 * x2);
        },
        move |t, g| {
            g[(0, 0)] = 0.4 * a * (1.0 + t);
            g[(0, 1)] = 0.0;
            g[(1, 0)] = 0.0;
            g[(1, 1)] = 0.4 * b * (2.0 + t);
        },
    )?
    .with_jacobian(move |_, x, j| {
        let (x1, x2) = (x[0], x[1]);
        j[(0, 0)] = 0.04 * a2 * (8.0 - 2.0 * x1 * x2 - 3.0 * x1 * x1);
        j[(0, 1)] = -0.04 * a2 * x1 * x1;
        j[(1, 0)] = -0.04 * b2 * x2 * x2;
        j[(1, 1)] = 0.04 * b2 * (8.0 - 2.0 * x1 * x2 - 3.0 * x2 * x2);
    })
    .with_divergence_gradient(move |_, x, out| {
        let (x1, x2) = (x[0], x[1]);
        out[0] = 0.04 * (a2 * (-2.0 * x2 - 6.0 * x1) - 2.0 * b2 * x2);
        out[1] = 0.04 * (-2.0 * a2 * x1 + b2 * (-2.0 * x1 - 6.0 * x2));
    })
    // det g = 0.16 a b (1 + t)(2 + t) is increasing on [0, 1].
    .with_det_bounds(0.32 * a * b, 0.96 * a * b)
}

fn linear(a: f64, s0: f64, s1: f64, n: usize) -> Result<SdeModel> {
    let mut model = SdeModel::new(
        "linear_test",
        n,
        move |_, x, out| {
            for (o, xi) in out.iter_mut().zip(x) {
                *o = a * xi;
            }
        },
        move |t, g| {
            g.fill(0.0);
            for i in 0..g.order() {
                g[(i, i)] = s0 + s1 * t;
            }
        },
    )?
    .with_jacobian(move |_, _, j| {
        j.fill(0.0);
        for i in 0..j.order() {
            j[(i, i)] = a;
        }
    })
    .with_divergence_gradient(|_, _, out| out.iter_mut().for_each(|o| *o = 0.0));
    if a != 0.0 {
        model = model.with_lipschitz_bound(a.abs())?;
    }
    let (d0, d1) = (s0.powi(n as i32), (s0 + s1).powi(n as i32));
    let (lo, hi) = (d0.min(d1), d0.max(d1));
    if s0 > 0.0 && s0 + s1 > 0.0 && lo < hi {
        model = model.with_det_bounds(lo, hi)?;
    }
    Ok(model)
}

fn zero_drift(sigma: f64, n: usize) -> Result<SdeModel> {
    Ok(SdeModel::new(
        "zero_drift",
        n,
        |_, _, out| out.iter_mut().for_each(|o| *o = 0.0),
        move |_, g| {
            g.fill(0.0);
            for i in 0..g.order() {
                g[(i, i)] = sigma;
            }
        },
    )?
    .with_jacobian(|_, _, j| j.fill(0.0))
    .with_divergence_gradient(|_, _, out| out.iter_mut().for_each(|o| *o = 0.0)))
}
