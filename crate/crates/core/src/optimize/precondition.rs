//! Gauss-Newton preconditioner for path objectives.
//!
//! The kinetic part of the midpoint objective is a sum of squares of cell
//! residuals `r_m = g(t_m)^-1 ((x_{k+1} - x_k) / h - f(t_m, x_m))`. Its
//! Gauss-Newton Hessian couples only neighbouring nodes, so it is block
//! tridiagonal with `n x n` blocks and is positive definite once the
//! endpoints are pinned. Solving with it costs `O(N n^3)`.

use crate::error::Result;
use crate::model::{DiscretePath, SdeModel};
use crate::om::SquareMatrix;

/// Block tridiagonal system over the interior nodes `1..N-1`.
#[derive(Clone, Debug)]
pub struct BlockTridiagonal {
    diag: Vec<SquareMatrix>,
    /// `upper[k]` couples interior node `k` to `k + 1`; the lower blocks are
    /// its transposes.
    upper: Vec<SquareMatrix>,
}

impl BlockTridiagonal {
    /// Gauss-Newton Hessian of `sum_m h |r_m|^2` at `path`.
    pub fn gauss_newton(model: &SdeModel, path: &DiscretePath) -> Result<Self> {
        let n = model.dimension();
        let steps = path.steps();
        let mut full_diag = vec![SquareMatrix::zeros(n); steps + 1];
        let mut full_upper = vec![SquareMatrix::zeros(n); steps];
        let mut g = SquareMatrix::zeros(n);
        let mut jac = SquareMatrix::zeros(n);
        let mut xm = vec![0.0; n];
        for m in 0..steps {
            let (t0, t1) = (path.time(m), path.time(m + 1));
            let h = t1 - t0;
            let (a, b) = (path.node(m), path.node(m + 1));
            for i in 0..n {
                xm[i] = 0.5 * (a[i] + b[i]);
            }
            let tm = 0.5 * (t0 + t1);
            model.diffusion_into(tm, &mut g);
            model.jacobian_into(tm, &xm, &mut jac);
            let g_inv = g.inverse()?;
            let mut left = SquareMatrix::zeros(n);
            let mut right = SquareMatrix::zeros(n);
            for i in 0..n {
                for j in 0..n {
                    let id = if i == j { 1.0 / h } else { 0.0 };
                    left[(i, j)] = -id - 0.5 * jac[(i, j)];
                    right[(i, j)] = id - 0.5 * jac[(i, j)];
                }
            }
            let left = g_inv.matmul(&left);
            let right = g_inv.matmul(&right);
            let (lt, rt) = (left.transpose(), right.transpose());
            add_scaled(&mut full_diag[m], &lt.matmul(&left), 2.0 * h);
            add_scaled(&mut full_diag[m + 1], &rt.matmul(&right), 2.0 * h);
            add_scaled(&mut full_upper[m], &lt.matmul(&right), 2.0 * h);
        }
        // Keep interior rows only.
        let diag = full_diag[1..steps].to_vec();
        let upper = full_upper[1..steps - 1].to_vec();
        Ok(Self { diag, upper })
    }

    /// `upper.len()` must be `diag.len() - 1` (or zero for an empty system).
    pub fn from_blocks(diag: Vec<SquareMatrix>, upper: Vec<SquareMatrix>) -> Self {
        debug_assert_eq!(upper.len(), diag.len().saturating_sub(1));
        Self { diag, upper }
    }

    pub fn blocks(&self) -> usize {
        self.diag.len()
    }

    /// `H x` for a row-major vector of interior node values.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.diag.first().map_or(0, SquareMatrix::order);
        let mut out = vec![0.0; x.len()];
        for k in 0..self.diag.len() {
            let row = &mut out[k * n..(k + 1) * n];
            add_product(row, &self.diag[k], &x[k * n..(k + 1) * n], false);
            if k + 1 < self.diag.len() {
                add_product(row, &self.upper[k], &x[(k + 1) * n..(k + 2) * n], false);
            }
            if k > 0 {
                add_product(row, &self.upper[k - 1], &x[(k - 1) * n..k * n], true);
            }
        }
        out
    }

    /// Solves `H x = rhs` by block elimination. `None` if a pivot block is
    /// singular.
    pub fn solve(&self, rhs: &[f64]) -> Option<Vec<f64>> {
        let count = self.diag.len();
        if count == 0 {
            return Some(Vec::new());
        }
        let n = self.diag[0].order();
        // Forward sweep: pivots D'_k = D_k - U_{k-1}^T D'_{k-1}^-1 U_{k-1}.
        let mut pivot_inv: Vec<SquareMatrix> = Vec::with_capacity(count);
        let mut y = rhs.to_vec();
        for k in 0..count {
            let mut pivot = self.diag[k].clone();
            if k > 0 {
                let lower = self.upper[k - 1].transpose();
                let factor = lower.matmul(&pivot_inv[k - 1]);
                let update = factor.matmul(&self.upper[k - 1]);
                for (p, u) in pivot.as_mut_slice().iter_mut().zip(update.as_slice()) {
                    *p -= u;
                }
                let prev: Vec<f64> = y[(k - 1) * n..k * n].to_vec();
                let shift = factor.mul_vec(&prev);
                for (yi, s) in y[k * n..(k + 1) * n].iter_mut().zip(shift) {
                    *yi -= s;
                }
            }
            pivot_inv.push(pivot.inverse().ok()?);
        }
        // Back substitution.
        let mut x = vec![0.0; rhs.len()];
        for k in (0..count).rev() {
            let mut r: Vec<f64> = y[k * n..(k + 1) * n].to_vec();
            if k + 1 < count {
                let next: Vec<f64> = x[(k + 1) * n..(k + 2) * n].to_vec();
                let coupling = self.upper[k].mul_vec(&next);
                for (ri, c) in r.iter_mut().zip(coupling) {
                    *ri -= c;
                }
            }
            let sol = pivot_inv[k].mul_vec(&r);
            x[k * n..(k + 1) * n].copy_from_slice(&sol);
        }
        x.iter().all(|v| v.is_finite()).then_some(x)
    }
}

fn add_scaled(target: &mut SquareMatrix, m: &SquareMatrix, scale: f64) {
    for (t, v) in target.as_mut_slice().iter_mut().zip(m.as_slice()) {
        *t += scale * v;
    }
}

fn add_product(out: &mut [f64], m: &SquareMatrix, x: &[f64], transpose: bool) {
    let y = if transpose { m.transpose().mul_vec(x) } else { m.mul_vec(x) };
    for (o, v) in out.iter_mut().zip(y) {
        *o += v;
    }
}
