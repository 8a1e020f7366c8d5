//! Scalar two-point boundary value problems `y'' = rhs(t, y, y')`,
//! `y(0) = y0`, `y(1) = y1`, solved by shooting (RK4 + secant on the initial
//! slope) with a finite-difference Newton relaxation as fallback.

use crate::error::{Error, Result};
use crate::model::DiscretePath;

/// Right-hand side of the Euler-Lagrange equation of the example-1 OM
/// Lagrangian `((y' - t(4y - y^3)) / (t + 1))^2 + t(4 - 3y^2)`, solved for `y''`:
///
/// ```text
/// y'' = (4y - y^3) + t(4y' - 3y^2 y') + 2(y' - t(4y - y^3)) / (1 + t)
///       - t(y' - t(4y - y^3))(4 - 3y^2) - 3ty(1 + t)^2
/// ```
pub fn euler_lagrange_rhs_example1(t: f64, y: f64, ydot: f64) -> f64 {
    let f = t * (4.0 * y - y.powi(3));
    let mismatch = ydot - f;
    (4.0 * y - y.powi(3)) + t * (4.0 * ydot - 3.0 * y * y * ydot) + 2.0 * mismatch / (1.0 + t)
        - t * mismatch * (4.0 - 3.0 * y * y)
        - 3.0 * t * y * (1.0 + t).powi(2)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShootingConfig {
    /// Range of initial slopes scanned for a sign change of the mismatch.
    pub slope_bracket: (f64, f64),
    /// Evenly spaced slopes tried across the bracket. Stiff problems only
    /// stay finite for a narrow slope window, so the default is dense.
    pub seed_slopes: usize,
    pub max_iterations: usize,
    /// Required `|y(1) - y1|`.
    pub tolerance: f64,
}

impl Default for ShootingConfig {
    fn default() -> Self {
        Self { slope_bracket: (-20.0, 20.0), seed_slopes: 161, max_iterations: 100, tolerance: 1e-8 }
    }
}

#[derive(Clone, Debug)]
pub struct ShootingSolution {
    pub path: DiscretePath,
    pub initial_slope: f64,
    pub mismatch: f64,
    pub iterations: usize,
}

/// Magnitude beyond which an IVP trajectory counts as blown up.
const BLOWUP: f64 = 1e8;

/// Classical RK4 for `y'' = rhs` from `(y0, slope)` over `steps` steps on
/// [0, 1]. Returns the node values, or `None` if the trajectory blows up.
pub fn integrate_ivp<F>(rhs: &F, y0: f64, slope: f64, steps: usize) -> Option<Vec<f64>>
where
    F: Fn(f64, f64, f64) -> f64,
{
    let h = 1.0 / steps as f64;
    let mut ys = Vec::with_capacity(steps + 1);
    let (mut y, mut v) = (y0, slope);
    ys.push(y);
    for k in 0..steps {
        let t = k as f64 * h;
        let (k1y, k1v) = (v, rhs(t, y, v));
        let (k2y, k2v) = (v + 0.5 * h * k1v, rhs(t + 0.5 * h, y + 0.5 * h * k1y, v + 0.5 * h * k1v));
        let (k3y, k3v) = (v + 0.5 * h * k2v, rhs(t + 0.5 * h, y + 0.5 * h * k2y, v + 0.5 * h * k2v));
        let (k4y, k4v) = (v + h * k3v, rhs(t + h, y + h * k3y, v + h * k3v));
        y += h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
        v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        if !(y.is_finite() && v.is_finite()) || y.abs() > BLOWUP || v.abs() > BLOWUP {
            return None;
        }
        ys.push(y);
    }
    Some(ys)
}

/// Shooting solve with the default [`ShootingConfig`].
pub fn solve_el_bvp<F>(rhs: F, y0: f64, y1: f64, steps: usize) -> Result<DiscretePath>
where
    F: Fn(f64, f64, f64) -> f64,
{
    solve_el_bvp_with(&rhs, y0, y1, steps, &ShootingConfig::default()).map(|s| s.path)
}

/// Shooting: scans `seed_slopes` initial slopes across the bracket, picks the
/// sign change nearest the straight-line slope `y1 - y0`, then refines with
/// safeguarded secant steps until the far-end mismatch is within tolerance.
pub fn solve_el_bvp_with<F>(
    rhs: &F,
    y0: f64,
    y1: f64,
    steps: usize,
    config: &ShootingConfig,
) -> Result<ShootingSolution>
where
    F: Fn(f64, f64, f64) -> f64,
{
    if steps < 2 {
        return Err(Error::InvalidParameter(format!("steps must be at least 2, got {steps}")));
    }
    if config.seed_slopes < 2 || !(config.slope_bracket.0 < config.slope_bracket.1) {
        return Err(Error::InvalidParameter("shooting needs >= 2 seeds and a nonempty bracket".into()));
    }
    let mismatch = |s: f64| integrate_ivp(rhs, y0, s, steps).map(|ys| ys[steps] - y1);

    let (lo, hi) = config.slope_bracket;
    let seeds: Vec<(f64, Option<f64>)> = (0..config.seed_slopes)
        .map(|i| {
            let s = lo + (hi - lo) * i as f64 / (config.seed_slopes - 1) as f64;
            (s, mismatch(s))
        })
        .collect();

    let straight = y1 - y0;
    let bracket = seeds
        .windows(2)
        .filter_map(|w| match (w[0], w[1]) {
            ((a, Some(fa)), (b, Some(fb))) if fa * fb <= 0.0 => Some(((a, fa), (b, fb))),
            _ => None,
        })
        .min_by(|x, y| {
            let dx = (0.5 * (x.0 .0 + x.1 .0) - straight).abs();
            let dy = (0.5 * (y.0 .0 + y.1 .0) - straight).abs();
            dx.total_cmp(&dy)
        });

    let (mut a, mut fa, mut b, mut fb, bracketed) = match bracket {
        Some(((a, fa), (b, fb))) => (a, fa, b, fb, true),
        None => {
            let mut finite: Vec<(f64, f64)> = seeds.iter().filter_map(|&(s, f)| f.map(|f| (s, f))).collect();
            if finite.len() < 2 {
                return Err(Error::NoConvergence(
                    "shooting: fewer than two seed slopes gave finite trajectories; try relaxation".into(),
                ));
            }
            finite.sort_by(|x, y| x.1.abs().total_cmp(&y.1.abs()));
            (finite[0].0, finite[0].1, finite[1].0, finite[1].1, false)
        }
    };

    for iteration in 0..config.max_iterations {
        let (best_s, best_f) = if fa.abs() <= fb.abs() { (a, fa) } else { (b, fb) };
        if best_f.abs() <= config.tolerance {
            let ys = integrate_ivp(rhs, y0, best_s, steps).expect("slope was finite before");
            let path = DiscretePath::from_values(steps, 1, ys)?;
            return Ok(ShootingSolution { path, initial_slope: best_s, mismatch: best_f, iterations: iteration });
        }
        let mut s = if fb != fa { b - fb * (b - a) / (fb - fa) } else { 0.5 * (a + b) };
        if bracketed && !(s > a.min(b) && s < a.max(b)) {
            s = 0.5 * (a + b);
        }
        let fs = match mismatch(s) {
            Some(f) => f,
            None if bracketed => {
                s = 0.5 * (a + b);
                match mismatch(s) {
                    Some(f) => f,
                    None => break,
                }
            }
            None => break,
        };
        if bracketed {
            // Illinois modification keeps the bracket and avoids one-sided stalls.
            if fs * fb < 0.0 {
                a = b;
                fa = fb;
            } else {
                fa *= 0.5;
            }
            b = s;
            fb = fs;
        } else {
            a = b;
            fa = fb;
            b = s;
            fb = fs;
        }
    }
    Err(Error::NoConvergence(format!(
        "shooting did not reach |y(1) - y1| <= {} after {} secant iterations; try the relaxation solver",
        config.tolerance, config.max_iterations
    )))
}

/// Finite-difference Newton relaxation of the BVP on the node grid:
/// `(y_{k+1} - 2y_k + y_{k-1}) / h^2 = rhs(t_k, y_k, (y_{k+1} - y_{k-1}) / 2h)`.
/// Second-order accurate. `initial` defaults to the straight line.
pub fn solve_el_bvp_relaxation<F>(
    rhs: F,
    y0: f64,
    y1: f64,
    steps: usize,
    initial: Option<&DiscretePath>,
) -> Result<DiscretePath>
where
    F: Fn(f64, f64, f64) -> f64,
{
    if steps < 2 {
        return Err(Error::InvalidParameter(format!("steps must be at least 2, got {steps}")));
    }
    let h = 1.0 / steps as f64;
    let mut y: Vec<f64> = match initial {
        Some(p) if p.steps() == steps && p.dimension() == 1 => p.values().to_vec(),
        Some(_) => return Err(Error::InvalidPath("initial guess must be scalar on the same grid".into())),
        None => (0..=steps).map(|k| y0 + (y1 - y0) * k as f64 * h).collect(),
    };
    y[0] = y0;
    y[steps] = y1;

    let residuals = |y: &[f64]| -> Vec<f64> {
        (1..steps)
            .map(|k| {
                let t = k as f64 * h;
                let v = (y[k + 1] - y[k - 1]) / (2.0 * h);
                (y[k + 1] - 2.0 * y[k] + y[k - 1]) / (h * h) - rhs(t, y[k], v)
            })
            .collect()
    };
    let norm = |r: &[f64]| r.iter().fold(0.0_f64, |m, x| m.max(x.abs()));

    let mut r = residuals(&y);
    for _ in 0..100 {
        let rn = norm(&r);
        if !rn.is_finite() {
            break;
        }
        if rn <= 1e-9 {
            return DiscretePath::from_values(steps, 1, y);
        }
        // Tridiagonal Jacobian of the residual in the interior unknowns.
        let m = steps - 1;
        let (mut lower, mut diag, mut upper) = (vec![0.0; m], vec![0.0; m], vec![0.0; m]);
        for k in 1..steps {
            let t = k as f64 * h;
            let v = (y[k + 1] - y[k - 1]) / (2.0 * h);
            let dy = f64::max(1e-7, 1e-7 * y[k].abs());
            let dv = f64::max(1e-7, 1e-7 * v.abs());
            let r_y = (rhs(t, y[k] + dy, v) - rhs(t, y[k] - dy, v)) / (2.0 * dy);
            let r_v = (rhs(t, y[k], v + dv) - rhs(t, y[k], v - dv)) / (2.0 * dv);
            let i = k - 1;
            lower[i] = 1.0 / (h * h) + r_v / (2.0 * h);
            diag[i] = -2.0 / (h * h) - r_y;
            upper[i] = 1.0 / (h * h) - r_v / (2.0 * h);
        }
        let delta = solve_tridiagonal(&lower, &diag, &upper, &r)
            .ok_or_else(|| Error::NoConvergence("relaxation: singular Newton system".into()))?;
        let mut damping = 1.0;
        loop {
            let trial: Vec<f64> = y
                .iter()
                .enumerate()
                .map(|(k, &yk)| if k == 0 || k == steps { yk } else { yk - damping * delta[k - 1] })
                .collect();
            let tr = residuals(&trial);
            if norm(&tr) < rn || damping < 1e-6 {
                y = trial;
                r = tr;
                break;
            }
            damping *= 0.5;
        }
    }
    Err(Error::NoConvergence("relaxation Newton iteration did not converge".into()))
}

/// Thomas algorithm; `lower[0]` and `upper[m-1]` are ignored.
fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let m = diag.len();
    let mut c = vec![0.0; m];
    let mut d = vec![0.0; m];
    let mut denom = diag[0];
    if denom == 0.0 {
        return None;
    }
    c[0] = upper[0] / denom;
    d[0] = rhs[0] / denom;
    for i in 1..m {
        denom = diag[i] - lower[i] * c[i - 1];
        if denom == 0.0 {
            return None;
        }
        c[i] = upper[i] / denom;
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / denom;
    }
    for i in (0..m - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Some(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example1_rhs_hand_values() {
        assert_eq!(euler_lagrange_rhs_example1(0.0, 0.0, 0.0), 0.0);
        assert_eq!(euler_lagrange_rhs_example1(0.0, 2.0, 0.0), 0.0);
        assert_eq!(euler_lagrange_rhs_example1(1.0, 0.0, 1.0), 1.0);
    }

    #[test]
    fn free_particle_is_a_straight_line() {
        let path = solve_el_bvp(|_, _, _| 0.0, 0.0, 1.0, 100).unwrap();
        for (k, y) in path.values().iter().enumerate() {
            assert!((y - path.time(k)).abs() < 1e-10);
        }
    }

    #[test]
    fn linear_bvp_matches_sinh() {
        let path = solve_el_bvp(|_, y, _| y, 0.0, 1.0, 400).unwrap();
        let s1 = 1f64.sinh();
        let err =
            path.values().iter().enumerate().map(|(k, y)| (y - path.time(k).sinh() / s1).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8, "error {err}");
    }

    #[test]
    fn relaxation_matches_sinh_to_second_order() {
        let path = solve_el_bvp_relaxation(|_, y, _| y, 0.0, 1.0, 400, None).unwrap();
        let s1 = 1f64.sinh();
        let err =
            path.values().iter().enumerate().map(|(k, y)| (y - path.time(k).sinh() / s1).abs()).fold(0.0, f64::max);
        assert!(err < 1e-5, "error {err}");
    }

    #[test]
    fn shooting_and_relaxation_agree_on_example1() {
        let shot = solve_el_bvp(euler_lagrange_rhs_example1, -2.0, 2.0, 400).unwrap();
        let relaxed = solve_el_bvp_relaxation(euler_lagrange_rhs_example1, -2.0, 2.0, 400, Some(&shot)).unwrap();
        assert!(shot.max_abs_diff(&relaxed).unwrap() < 1e-3);
        assert_eq!(shot.start(), &[-2.0]);
        assert!((shot.end()[0] - 2.0).abs() <= 1e-8);
    }

    #[test]
    fn shooting_reports_failure() {
        // No real solution reachable: y'' = 1e6 y^3 blows up for every seed.
        let err = solve_el_bvp(|_, y, _| 1e6 * y.powi(3) + 1e6, 0.0, 1.0, 50).unwrap_err();
        assert!(matches!(err, Error::NoConvergence(_)), "{err:?}");
    }
}
