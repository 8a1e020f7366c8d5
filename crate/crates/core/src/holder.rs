//! Discrete α-Hölder norms on the uniform grid.
//!
//! For a scalar path the norm is `sup_k |x_k| + max_{j<k} |x_k - x_j| / (t_k - t_j)^α`.
//! Vector paths average the per-coordinate quantities: `||x|| = (1/n) Σ_i ||x^i||`.
//!
//! The continuum supremum is replaced by the grid supremum. Every pair of
//! nodes is visited (no approximation), so any two paths compared on the same
//! grid are measured consistently.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::DiscretePath;

/// Grids with at most this many steps use the straight pair scan; longer grids
/// use the tiled parallel scan. Both visit every pair and agree exactly.
pub const EXACT_SCAN_LIMIT: usize = 4096;

/// Grids up to this size cache the `(t_k - t_j)^α` denominators.
const DENOMINATOR_CACHE_LIMIT: usize = 1024;

const TILE: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HolderParams {
    alpha: f64,
}

impl HolderParams {
    /// Accepts `0 < alpha < 1`; values at or above 1/4 are outside the range
    /// where the OM functional is known to exist and log a warning.
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParameter(format!("Hölder exponent must lie in (0, 1), got {alpha}")));
        }
        if alpha >= 0.25 {
            log::warn!("Hölder exponent {alpha} is outside (0, 1/4)");
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

/// Averaged sup norm `(1/n) Σ_i max_k |x_k^i|`.
pub fn sup_norm(path: &DiscretePath) -> f64 {
    let n = path.dimension();
    let total: f64 = (0..n).map(|i| path.nodes().map(|row| row[i].abs()).fold(0.0, f64::max)).sum();
    total / n as f64
}

/// Averaged Hölder seminorm over all grid pairs.
pub fn holder_seminorm(path: &DiscretePath, params: &HolderParams) -> f64 {
    HolderScanner::new(path.grid(), *params).seminorm(path)
}

/// `sup_norm + holder_seminorm`.
pub fn holder_norm(path: &DiscretePath, params: &HolderParams) -> f64 {
    HolderScanner::new(path.grid(), *params).norm(path)
}

/// Reusable pair scanner for one grid. Building it once and sharing it across
/// many paths (as the tube estimator does) amortizes the power evaluations.
#[derive(Clone, Debug)]
pub struct HolderScanner {
    params: HolderParams,
    grid: Vec<f64>,
    /// Row `j` holds `(t_k - t_j)^α` for `k = j+1..=N`.
    denominators: Option<Vec<f64>>,
    row_offsets: Vec<usize>,
}

impl HolderScanner {
    pub fn new(grid: &[f64], params: HolderParams) -> Self {
        let steps = grid.len().saturating_sub(1);
        let alpha = params.alpha;
        let (denominators, row_offsets) = if steps <= DENOMINATOR_CACHE_LIMIT {
            let mut offsets = Vec::with_capacity(grid.len());
            let mut table = Vec::with_capacity(grid.len() * steps / 2 + 1);
            for j in 0..grid.len() {
                offsets.push(table.len());
                for k in j + 1..grid.len() {
                    table.push((grid[k] - grid[j]).powf(alpha));
                }
            }
            (Some(table), offsets)
        } else {
            (None, Vec::new())
        };
        Self { params, grid: grid.to_vec(), denominators, row_offsets }
    }

    pub fn params(&self) -> HolderParams {
        self.params
    }

    fn check_grid(&self, path: &DiscretePath) {
        assert_eq!(path.len(), self.grid.len(), "path grid does not match scanner grid");
    }

    pub fn seminorm(&self, path: &DiscretePath) -> f64 {
        self.check_grid(path);
        let n = path.dimension();
        let mut xs = vec![0.0; path.len()];
        let mut total = 0.0;
        for i in 0..n {
            for (x, row) in xs.iter_mut().zip(path.nodes()) {
                *x = row[i];
            }
            total += self.coordinate_seminorm(&xs, |_| false);
        }
        total / n as f64
    }

    pub fn norm(&self, path: &DiscretePath) -> f64 {
        sup_norm(path) + self.seminorm(path)
    }

    /// `norm(path) <= epsilon`, stopping the scan as soon as the running
    /// maximum proves the answer is no. Agrees exactly with comparing
    /// [`HolderScanner::norm`] against `epsilon`.
    pub fn within(&self, path: &DiscretePath, epsilon: f64) -> bool {
        self.check_grid(path);
        let sup = sup_norm(path);
        if sup > epsilon {
            return false;
        }
        let n = path.dimension();
        let nf = n as f64;
        let mut xs = vec![0.0; path.len()];
        let mut acc = 0.0;
        for i in 0..n {
            for (x, row) in xs.iter_mut().zip(path.nodes()) {
                *x = row[i];
            }
            // Float addition is monotone, so a partial sum already above the
            // threshold means the full sum is too.
            let exceeds = |m: f64| sup + (acc + m) / nf > epsilon;
            let semi = self.coordinate_seminorm(&xs, exceeds);
            if exceeds(semi) {
                return false;
            }
            acc += semi;
        }
        sup + acc / nf <= epsilon
    }

    /// Max over pairs `j < k` of `|x_k - x_j| / (t_k - t_j)^α`. Returns early
    /// once `stop(running_max)` holds; the returned value is then a lower
    /// bound that already satisfies `stop`.
    fn coordinate_seminorm(&self, xs: &[f64], stop: impl Fn(f64) -> bool) -> f64 {
        let len = xs.len();
        let steps = len - 1;
        let alpha = self.params.alpha;
        let grid = &self.grid;
        let mut best = 0.0_f64;
        if let Some(table) = &self.denominators {
            for j in 0..len {
                let row = &table[self.row_offsets[j]..self.row_offsets[j] + (len - 1 - j)];
                let xj = xs[j];
                let mut row_max = 0.0_f64;
                for (d, xk) in row.iter().zip(&xs[j + 1..]) {
                    row_max = row_max.max((xk - xj).abs() / d);
                }
                if row_max > best {
                    best = row_max;
                    if stop(best) {
                        return best;
                    }
                }
            }
            best
        } else if steps <= EXACT_SCAN_LIMIT {
            for j in 0..len {
                let xj = xs[j];
                let tj = grid[j];
                let mut row_max = 0.0_f64;
                for k in j + 1..len {
                    row_max = row_max.max((xs[k] - xj).abs() / (grid[k] - tj).powf(alpha));
                }
                if row_max > best {
                    best = row_max;
                    if stop(best) {
                        return best;
                    }
                }
            }
            best
        } else {
            blocked_scan(xs, grid, alpha)
        }
    }
}

/// Tiled scan for long grids: the pair triangle is cut into `TILE x TILE`
/// blocks, row bands run in parallel and the band maxima are combined with
/// `max`, which is exact and order independent.
fn blocked_scan(xs: &[f64], grid: &[f64], alpha: f64) -> f64 {
    let len = xs.len();
    let bands: Vec<usize> = (0..len).step_by(TILE).collect();
    bands
        .par_iter()
        .map(|&j0| {
            let j1 = (j0 + TILE).min(len);
            let mut best = 0.0_f64;
            for k0 in (j0..len).step_by(TILE) {
                let k1 = (k0 + TILE).min(len);
                for j in j0..j1 {
                    let (xj, tj) = (xs[j], grid[j]);
                    for k in k0.max(j + 1)..k1 {
                        best = best.max((xs[k] - xj).abs() / (grid[k] - tj).powf(alpha));
                    }
                }
            }
            best
        })
        .reduce(|| 0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(values: &[f64]) -> DiscretePath {
        DiscretePath::from_values(values.len() - 1, 1, values.to_vec()).unwrap()
    }

    fn p(alpha: f64) -> HolderParams {
        HolderParams::new(alpha).unwrap()
    }

    #[test]
    fn rejects_alpha_outside_unit_interval() {
        assert!(HolderParams::new(0.0).is_err());
        assert!(HolderParams::new(1.0).is_err());
        assert!(HolderParams::new(0.5).is_ok());
    }

    #[test]
    fn sup_norm_examples() {
        assert_eq!(sup_norm(&DiscretePath::constant(4, &[0.0]).unwrap()), 0.0);
        assert_eq!(sup_norm(&scalar(&[0.0, 0.5, 1.0])), 1.0);
        let two_d = DiscretePath::from_values(2, 2, vec![0.0, 3.0, 1.0, -1.0, -0.5, 0.0]).unwrap();
        assert_eq!(sup_norm(&two_d), 2.0);
    }

    #[test]
    fn seminorm_examples() {
        assert_eq!(holder_seminorm(&DiscretePath::constant(10, &[3.0]).unwrap(), &p(0.2)), 0.0);
        let tent = scalar(&[0.0, 1.0, 0.0]);
        let expected = 2f64.powf(0.25);
        assert!((holder_seminorm(&tent, &p(0.25)) - expected).abs() < 1e-15);
        for alpha in [0.05, 0.2, 0.24, 0.7] {
            let line = DiscretePath::from_scalar_fn(64, |t| t).unwrap();
            assert!((holder_seminorm(&line, &p(alpha)) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn norm_of_identity_path() {
        let line = DiscretePath::from_scalar_fn(100, |t| t).unwrap();
        assert!((holder_norm(&line, &p(0.25)) - 2.0).abs() < 1e-15);
        assert_eq!(holder_norm(&DiscretePath::constant(5, &[0.0, 0.0]).unwrap(), &p(0.25)), 0.0);
    }

    #[test]
    fn within_matches_norm_at_boundary() {
        let line = DiscretePath::from_scalar_fn(100, |t| t).unwrap();
        let scanner = HolderScanner::new(line.grid(), p(0.25));
        let norm = scanner.norm(&line);
        assert!(scanner.within(&line, norm));
        assert!(!scanner.within(&line, norm - 1e-12));
    }

    #[test]
    fn scan_modes_agree_on_long_grid() {
        // Forces the uncached and tiled scans and compares them to the cached one.
        let xs: Vec<f64> = (0..=5000).map(|k| ((k as f64) * 0.37).sin() * (k as f64).sqrt()).collect();
        let grid = crate::model::uniform_grid(5000);
        let alpha = 0.2;
        let mut direct = 0.0_f64;
        for j in 0..xs.len() {
            for k in j + 1..xs.len() {
                direct = direct.max((xs[k] - xs[j]).abs() / (grid[k] - grid[j]).powf(alpha));
            }
        }
        assert_eq!(blocked_scan(&xs, &grid, alpha), direct);
        let scanner = HolderScanner::new(&grid, p(alpha));
        assert!(scanner.denominators.is_none());
        let path = DiscretePath::from_values(5000, 1, xs).unwrap();
        assert_eq!(scanner.seminorm(&path), direct);
    }
}
