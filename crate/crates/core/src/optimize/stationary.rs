//! Damped Newton iteration on the discrete Euler-Lagrange equations
//! `grad OM_h(x) = 0`.
//!
//! The midpoint objective couples only neighbouring nodes, so its Hessian is
//! block tridiagonal. It is assembled from central differences of the
//! analytic gradient, perturbing every third node at once (3n gradient pairs
//! per Hessian). Steps are accepted by backtracking on `|grad|^2`, so the
//! iteration converges to stationary points of any index, not only minima.

use super::descent::max_norm;
use super::precondition::BlockTridiagonal;
use crate::om::SquareMatrix;

#[derive(Clone, Debug)]
pub struct NewtonOutcome {
    pub x: Vec<f64>,
    pub gradient: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Hessian of a block-tridiagonal objective from its gradient.
pub fn fd_block_hessian<G>(gradient: &mut G, x: &[f64], n: usize) -> Option<BlockTridiagonal>
where
    G: FnMut(&[f64]) -> Option<Vec<f64>>,
{
    let blocks = x.len() / n;
    let mut diag = vec![SquareMatrix::zeros(n); blocks];
    let mut upper = vec![SquareMatrix::zeros(n); blocks.saturating_sub(1)];
    let mut probe = x.to_vec();
    for color in 0..3 {
        for i in 0..n {
            let nodes: Vec<usize> = (color..blocks).step_by(3).collect();
            let steps: Vec<f64> = nodes.iter().map(|&k| 1e-5 * x[k * n + i].abs().max(1.0)).collect();
            for (&k, &d) in nodes.iter().zip(&steps) {
                probe[k * n + i] = x[k * n + i] + d;
            }
            let plus = gradient(&probe)?;
            for (&k, &d) in nodes.iter().zip(&steps) {
                probe[k * n + i] = x[k * n + i] - d;
            }
            let minus = gradient(&probe)?;
            for &k in &nodes {
                probe[k * n + i] = x[k * n + i];
            }
            for (&k, &d) in nodes.iter().zip(&steps) {
                // Column (k, i) lives in rows k - 1, k, k + 1.
                let column = |row: usize, r: usize| (plus[row * n + r] - minus[row * n + r]) / (2.0 * d);
                for r in 0..n {
                    diag[k][(r, i)] = column(k, r);
                    if k + 1 < blocks {
                        // Row k + 1 of column k is the lower block, i.e. upper[k]^T.
                        upper[k][(i, r)] = column(k + 1, r);
                    }
                }
            }
        }
    }
    // Symmetrize the diagonal blocks against differencing noise.
    for d in diag.iter_mut() {
        let t = d.transpose();
        for (a, b) in d.as_mut_slice().iter_mut().zip(t.as_slice()) {
            *a = 0.5 * (*a + b);
        }
    }
    Some(BlockTridiagonal::from_blocks(diag, upper))
}

/// Newton iteration for `gradient(x) = 0` with backtracking on `|g|^2`.
pub fn newton_stationary<G>(
    x0: Vec<f64>,
    mut gradient: G,
    n: usize,
    tolerance: f64,
    max_iters: usize,
) -> Option<NewtonOutcome>
where
    G: FnMut(&[f64]) -> Option<Vec<f64>>,
{
    let mut x = x0;
    let mut g = gradient(&x)?;
    let merit = |g: &[f64]| g.iter().map(|v| v * v).sum::<f64>();
    let mut iterations = 0;
    while iterations < max_iters && max_norm(&g) > tolerance {
        let hessian = fd_block_hessian(&mut gradient, &x, n)?;
        let neg: Vec<f64> = g.iter().map(|v| -v).collect();
        let Some(step) = hessian.solve(&neg) else { break };
        let current = merit(&g);
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let trial: Vec<f64> = x.iter().zip(&step).map(|(a, s)| a + scale * s).collect();
            if let Some(gt) = gradient(&trial) {
                if merit(&gt) <= (1.0 - 1e-4 * scale) * current {
                    accepted = Some((trial, gt));
                    break;
                }
            }
            scale *= 0.5;
        }
        let Some((xt, gt)) = accepted else { break };
        x = xt;
        g = gt;
        iterations += 1;
    }
    let converged = max_norm(&g) <= tolerance;
    Some(NewtonOutcome { x, gradient: g, iterations, converged })
}

#[cfg(test)]
mod tests {
    use super::*;

    // f(x) = sum_k (x_{k+1} - x_k)^2 + x_k^4 / 4 - x_k with fixed x_0 = x_{m+1} = 0
    fn chain_gradient(x: &[f64]) -> Option<Vec<f64>> {
        let m = x.len();
        let at = |k: isize| if k < 0 || k as usize >= m { 0.0 } else { x[k as usize] };
        Some((0..m as isize).map(|k| 2.0 * (2.0 * at(k) - at(k - 1) - at(k + 1)) + at(k).powi(3) - 1.0).collect())
    }

    #[test]
    fn fd_hessian_matches_tridiagonal_structure() {
        let x: Vec<f64> = (0..10).map(|i| 0.1 * i as f64).collect();
        let mut grad = chain_gradient;
        let h = fd_block_hessian(&mut grad, &x, 1).unwrap();
        let e3: Vec<f64> = (0..10).map(|i| if i == 3 { 1.0 } else { 0.0 }).collect();
        let col = h.apply(&e3);
        assert!((col[3] - (4.0 + 3.0 * 0.09)).abs() < 1e-6, "{col:?}");
        assert!((col[2] + 2.0).abs() < 1e-6 && (col[4] + 2.0).abs() < 1e-6);
        assert!(col[0].abs() < 1e-9 && col[6].abs() < 1e-9);
    }

    #[test]
    fn newton_converges_quadratically() {
        let out = newton_stationary(vec![0.0; 10], chain_gradient, 1, 1e-12, 20).unwrap();
        assert!(out.converged);
        assert!(out.iterations <= 8, "{}", out.iterations);
    }
}
