//! Line-search descent on a flat parameter vector.
//!
//! Three direction rules share one backtracking (Armijo) line search:
//! steepest descent, Polak-Ribière+ conjugate gradients and limited-memory
//! BFGS. Every accepted step satisfies the sufficient-decrease condition, so
//! the objective never increases between accepted iterates.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum DescentMethod {
    GradientDescent,
    ConjugateGradient,
    Lbfgs { memory: usize },
}

impl Default for DescentMethod {
    fn default() -> Self {
        DescentMethod::Lbfgs { memory: 12 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineSearch {
    /// Step multiplier after a rejected trial.
    pub shrink: f64,
    /// Armijo constant `c1` in `f(x + a d) <= f(x) + c1 a g.d`.
    pub sufficient_decrease: f64,
    /// Trials per line search before giving up.
    pub max_trials: usize,
}

impl Default for LineSearch {
    fn default() -> Self {
        Self { shrink: 0.5, sufficient_decrease: 1e-4, max_trials: 80 }
    }
}

#[derive(Clone, Debug)]
pub struct DescentSettings {
    pub method: DescentMethod,
    pub line_search: LineSearch,
    pub max_iters: usize,
    /// Stop once the max-norm of the gradient is at or below this.
    pub gradient_tolerance: f64,
}

#[derive(Clone, Debug)]
pub struct DescentOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Objective value after each accepted iteration, starting with the
    /// initial point.
    pub history: Vec<f64>,
    /// True when the line search could no longer make progress.
    pub stalled: bool,
}

pub fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Applies an approximate inverse Hessian at `x` to a vector. Returning
/// `None` falls back to the unpreconditioned rule for that iteration.
pub type Preconditioner<'a> = dyn FnMut(&[f64], &[f64]) -> Option<Vec<f64>> + 'a;

/// Minimizes `objective`, which returns the value and gradient at a point or
/// `None` where it cannot be evaluated (treated as an infinitely bad trial).
pub fn minimize<F>(x0: Vec<f64>, objective: F, settings: &DescentSettings) -> Option<DescentOutcome>
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    minimize_preconditioned(x0, objective, None, settings)
}

/// [`minimize`] with an optional preconditioner. It scales steepest descent,
/// enters conjugate gradients as the inner-product metric and serves as the
/// initial inverse Hessian of L-BFGS.
pub fn minimize_preconditioned<F>(
    x0: Vec<f64>,
    mut objective: F,
    mut preconditioner: Option<&mut Preconditioner<'_>>,
    settings: &DescentSettings,
) -> Option<DescentOutcome>
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let (mut value, mut grad) = objective(&x0)?;
    let mut x = x0;
    let mut history = vec![value];
    let mut memory: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    // Previous direction with the previous preconditioned gradient and gradient.
    let mut previous: Option<(Vec<f64>, Vec<f64>, Vec<f64>)> = None;
    let mut last_step = f64::NAN;
    let mut iterations = 0;
    let mut stalled = false;
    let dim = x.len();

    while iterations < settings.max_iters {
        if max_norm(&grad) <= settings.gradient_tolerance {
            break;
        }
        let mut scaled = preconditioner.as_mut().and_then(|p| p(&x, &grad));
        let preconditioned = scaled.is_some();
        let mut dir = match settings.method {
            DescentMethod::GradientDescent => scaled.as_deref().unwrap_or(&grad).iter().map(|g| -g).collect(),
            DescentMethod::ConjugateGradient => {
                let z = scaled.as_deref().unwrap_or(&grad);
                conjugate_direction(&grad, z, previous.as_ref(), iterations % dim.max(1) == 0)
            }
            DescentMethod::Lbfgs { .. } => {
                let mut apply = |q: &[f64]| preconditioner.as_mut().and_then(|p| p(&x, q));
                lbfgs_direction(&grad, &memory, &mut apply)
            }
        };
        let mut slope = dot(&grad, &dir);
        if !(slope < 0.0) {
            memory.clear();
            previous = None;
            scaled = None;
            dir = grad.iter().map(|g| -g).collect();
            slope = dot(&grad, &dir);
        }

        let first_trial = match settings.method {
            _ if preconditioned => 1.0,
            DescentMethod::Lbfgs { .. } if !memory.is_empty() => 1.0,
            _ if last_step.is_finite() => (2.0 * last_step).min(1e6),
            _ => (1.0 / max_norm(&dir)).min(1.0),
        };

        let mut step = first_trial;
        let mut accepted = None;
        let mut trial = vec![0.0; dim];
        for _ in 0..settings.line_search.max_trials {
            for i in 0..dim {
                trial[i] = x[i] + step * dir[i];
            }
            if let Some((fv, gv)) = objective(&trial) {
                if fv.is_finite() && fv <= value + settings.line_search.sufficient_decrease * step * slope {
                    accepted = Some((fv, gv));
                    break;
                }
            }
            step *= settings.line_search.shrink;
        }

        let Some((new_value, new_grad)) = accepted else {
            if !memory.is_empty() || previous.is_some() {
                // Retry once from a fresh direction.
                memory.clear();
                previous = None;
                last_step = f64::NAN;
                if matches!(settings.method, DescentMethod::GradientDescent) {
                    stalled = true;
                    break;
                }
                continue;
            }
            stalled = true;
            break;
        };

        debug_assert!(new_value <= value);
        if let DescentMethod::Lbfgs { memory: m } = settings.method {
            let s: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = new_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &y);
            if sy > 1e-14 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
                if memory.len() == m.max(1) {
                    memory.pop_front();
                }
                memory.push_back((s, y, 1.0 / sy));
            }
        }
        let z = scaled.unwrap_or_else(|| grad.clone());
        let old_grad = std::mem::replace(&mut grad, new_grad);
        previous = Some((dir, z, old_grad));
        x.copy_from_slice(&trial);
        value = new_value;
        last_step = step;
        history.push(value);
        iterations += 1;
    }

    let converged = max_norm(&grad) <= settings.gradient_tolerance;
    Some(DescentOutcome { x, value, gradient: grad, iterations, converged, history, stalled })
}

/// Preconditioned Polak-Ribière+ direction `-z + beta d_prev`.
fn conjugate_direction(
    grad: &[f64],
    z: &[f64],
    previous: Option<&(Vec<f64>, Vec<f64>, Vec<f64>)>,
    restart: bool,
) -> Vec<f64> {
    match previous {
        Some((pd, pz, pg)) if !restart => {
            let denom = dot(pz, pg);
            let beta = if denom > 0.0 {
                let num: f64 = z.iter().zip(grad.iter().zip(pg)).map(|(zi, (g, p))| zi * (g - p)).sum();
                (num / denom).max(0.0)
            } else {
                0.0
            };
            z.iter().zip(pd).map(|(zi, d)| -zi + beta * d).collect()
        }
        _ => z.iter().map(|g| -g).collect(),
    }
}

/// Two-loop recursion. The initial inverse Hessian is the preconditioner
/// when it yields a value, otherwise the usual `s.y / y.y` scaling.
fn lbfgs_direction(
    grad: &[f64],
    memory: &VecDeque<(Vec<f64>, Vec<f64>, f64)>,
    initial: &mut dyn FnMut(&[f64]) -> Option<Vec<f64>>,
) -> Vec<f64> {
    let mut q: Vec<f64> = grad.to_vec();
    let mut alphas = Vec::with_capacity(memory.len());
    for (s, y, rho) in memory.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    match initial(&q) {
        Some(r) => q = r,
        None => {
            if let Some((s, y, _)) = memory.back() {
                let gamma = dot(s, y) / dot(y, y);
                q.iter_mut().for_each(|v| *v *= gamma);
            }
        }
    }
    for ((s, y, rho), a) in memory.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter().map(|v| -v).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> Option<(f64, Vec<f64>)> {
        let (a, b) = (x[0], x[1]);
        let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
        let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
        Some((f, g))
    }

    fn settings(method: DescentMethod, max_iters: usize) -> DescentSettings {
        DescentSettings { method, line_search: LineSearch::default(), max_iters, gradient_tolerance: 1e-8 }
    }

    #[test]
    fn lbfgs_solves_rosenbrock() {
        let out = minimize(vec![-1.2, 1.0], rosenbrock, &settings(DescentMethod::default(), 1000)).unwrap();
        assert!(out.converged, "{out:?}");
        assert!((out.x[0] - 1.0).abs() < 1e-6 && (out.x[1] - 1.0).abs() < 1e-6);
        assert!(out.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn all_methods_solve_a_quadratic() {
        let quad = |x: &[f64]| -> Option<(f64, Vec<f64>)> {
            let f = 0.5 * (x[0] * x[0] + 10.0 * x[1] * x[1]) - x[0];
            Some((f, vec![x[0] - 1.0, 10.0 * x[1]]))
        };
        for method in [DescentMethod::GradientDescent, DescentMethod::ConjugateGradient, DescentMethod::default()] {
            let out = minimize(vec![5.0, 5.0], quad, &settings(method, 20000)).unwrap();
            assert!(out.converged, "{method:?}: {out:?}");
            assert!((out.x[0] - 1.0).abs() < 1e-7 && out.x[1].abs() < 1e-7);
            assert!(out.history.windows(2).all(|w| w[1] <= w[0]), "{method:?}");
        }
    }

    #[test]
    fn exact_preconditioner_solves_quadratic_in_one_step() {
        let quad = |x: &[f64]| -> Option<(f64, Vec<f64>)> {
            let f = 0.5 * (x[0] * x[0] + 1e4 * x[1] * x[1]) - x[0];
            Some((f, vec![x[0] - 1.0, 1e4 * x[1]]))
        };
        for method in [DescentMethod::GradientDescent, DescentMethod::ConjugateGradient, DescentMethod::default()] {
            let mut inverse = |_: &[f64], v: &[f64]| Some(vec![v[0], v[1] * 1e-4]);
            let out = minimize_preconditioned(vec![5.0, 5.0], quad, Some(&mut inverse), &settings(method, 10)).unwrap();
            assert!(out.converged, "{method:?}: {out:?}");
            assert_eq!(out.iterations, 1, "{method:?}");
        }
    }

    #[test]
    fn reports_non_convergence() {
        let out = minimize(vec![-1.2, 1.0], rosenbrock, &settings(DescentMethod::GradientDescent, 5)).unwrap();
        assert!(!out.converged);
        assert_eq!(out.iterations, 5);
    }
}
