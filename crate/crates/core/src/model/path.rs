use crate::error::{Error, Result};

/// Tolerance on grid uniformity and on the endpoint times 0 and 1.
pub const GRID_TOLERANCE: f64 = 1e-12;

/// A path sampled on the uniform grid `t_k = k / N`, `k = 0..=N`.
///
/// Values are stored row-major: node `k` occupies
/// `values[k * dimension..(k + 1) * dimension]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscretePath {
    grid: Vec<f64>,
    values: Vec<f64>,
    dimension: usize,
}

/// `N + 1` equally spaced nodes on [0, 1] with exact endpoints.
pub fn uniform_grid(steps: usize) -> Vec<f64> {
    (0..=steps).map(|k| k as f64 / steps as f64).collect()
}

impl DiscretePath {
    /// Validates and wraps a grid and its row-major values.
    pub fn new(grid: Vec<f64>, values: Vec<f64>, dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidPath("dimension must be positive".into()));
        }
        if grid.len() < 2 {
            return Err(Error::InvalidPath(format!("need at least 2 grid nodes, got {}", grid.len())));
        }
        let steps = grid.len() - 1;
        let h = 1.0 / steps as f64;
        for (k, &t) in grid.iter().enumerate() {
            if !t.is_finite() || (t - k as f64 * h).abs() > GRID_TOLERANCE {
                return Err(Error::InvalidPath(format!(
                    "grid is not uniform on [0, 1]: node {k} has t = {t}, expected {}",
                    k as f64 * h
                )));
            }
        }
        if values.len() != grid.len() * dimension {
            return Err(Error::InvalidPath(format!(
                "expected {} values ({} nodes x {dimension}), got {}",
                grid.len() * dimension,
                grid.len(),
                values.len()
            )));
        }
        Ok(Self { grid, values, dimension })
    }

    pub fn from_values(steps: usize, dimension: usize, values: Vec<f64>) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidPath("need at least one step".into()));
        }
        Self::new(uniform_grid(steps), values, dimension)
    }

    pub fn from_fn(steps: usize, dimension: usize, mut f: impl FnMut(f64, &mut [f64])) -> Result<Self> {
        if steps == 0 || dimension == 0 {
            return Err(Error::InvalidPath("steps and dimension must be positive".into()));
        }
        let grid = uniform_grid(steps);
        let mut values = vec![0.0; grid.len() * dimension];
        for (t, row) in grid.iter().zip(values.chunks_exact_mut(dimension)) {
            f(*t, row);
        }
        Ok(Self { grid, values, dimension })
    }

    pub fn from_scalar_fn(steps: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::from_fn(steps, 1, |t, out| out[0] = f(t))
    }

    pub fn constant(steps: usize, value: &[f64]) -> Result<Self> {
        Self::from_fn(steps, value.len(), |_, out| out.copy_from_slice(value))
    }

    /// Straight line from `start` at t = 0 to `end` at t = 1. The endpoint
    /// rows are copied bit-exactly.
    pub fn linear(steps: usize, start: &[f64], end: &[f64]) -> Result<Self> {
        if start.len() != end.len() {
            return Err(Error::DimensionMismatch { expected: start.len(), got: end.len() });
        }
        let mut path = Self::from_fn(steps, start.len(), |t, out| {
            for ((o, a), b) in out.iter_mut().zip(start).zip(end) {
                *o = a + t * (b - a);
            }
        })?;
        path.node_mut(0).copy_from_slice(start);
        path.node_mut(steps).copy_from_slice(end);
        Ok(path)
    }

    pub fn steps(&self) -> usize {
        self.grid.len() - 1
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn step_size(&self) -> f64 {
        1.0 / self.steps() as f64
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn time(&self, k: usize) -> f64 {
        self.grid[k]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn node(&self, k: usize) -> &[f64] {
        &self.values[k * self.dimension..(k + 1) * self.dimension]
    }

    pub fn node_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.values[k * self.dimension..(k + 1) * self.dimension]
    }

    pub fn nodes(&self) -> std::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.dimension)
    }

    pub fn start(&self) -> &[f64] {
        self.node(0)
    }

    pub fn end(&self) -> &[f64] {
        self.node(self.steps())
    }

    /// Samples of coordinate `i` across all nodes.
    pub fn coordinate(&self, i: usize) -> Vec<f64> {
        self.nodes().map(|row| row[i]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn same_grid(&self, other: &DiscretePath) -> bool {
        self.grid.len() == other.grid.len() && self.dimension == other.dimension
    }

    /// `self - other`, node by node.
    pub fn difference(&self, other: &DiscretePath) -> Result<DiscretePath> {
        self.check_compatible(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(Self { grid: self.grid.clone(), values, dimension: self.dimension })
    }

    pub fn scaled(&self, c: f64) -> DiscretePath {
        Self { grid: self.grid.clone(), values: self.values.iter().map(|v| c * v).collect(), dimension: self.dimension }
    }

    /// Every `stride`-th node. The stride must divide the step count so that
    /// the sub-grid still ends at t = 1.
    pub fn subsample(&self, stride: usize) -> Result<DiscretePath> {
        if stride == 0 || self.steps() % stride != 0 {
            return Err(Error::InvalidPath(format!("stride {stride} does not divide {} steps", self.steps())));
        }
        let grid = self.grid.iter().step_by(stride).copied().collect();
        let values = self.nodes().step_by(stride).flatten().copied().collect();
        Ok(Self { grid, values, dimension: self.dimension })
    }

    /// Largest absolute coordinate difference over all nodes.
    pub fn max_abs_diff(&self, other: &DiscretePath) -> Result<f64> {
        self.check_compatible(other)?;
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }

    fn check_compatible(&self, other: &DiscretePath) -> Result<()> {
        if self.dimension != other.dimension {
            return Err(Error::DimensionMismatch { expected: self.dimension, got: other.dimension });
        }
        if self.grid.len() != other.grid.len() {
            return Err(Error::InvalidPath(format!(
                "grid mismatch: {} vs {} nodes",
                self.grid.len(),
                other.grid.len()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_path_pins_endpoints() {
        let p = DiscretePath::linear(7, &[-2.0, 0.1], &[2.0, 0.3]).unwrap();
        assert_eq!(p.len(), 8);
        assert_eq!(p.start(), &[-2.0, 0.1]);
        assert_eq!(p.end(), &[2.0, 0.3]);
        assert_eq!(p.coordinate(1).len(), 8);
    }

    #[test]
    fn rejects_non_uniform_grid() {
        let err = DiscretePath::new(vec![0.0, 0.4, 1.0], vec![0.0; 3], 1).unwrap_err();
        assert!(matches!(err, Error::InvalidPath(_)));
        assert!(DiscretePath::new(vec![0.0, 0.5, 1.0], vec![0.0; 4], 1).is_err());
        assert!(DiscretePath::new(vec![0.0], vec![0.0], 1).is_err());
    }

    #[test]
    fn subsample_keeps_endpoints() {
        let p = DiscretePath::from_scalar_fn(8, |t| t * t).unwrap();
        let s = p.subsample(4).unwrap();
        assert_eq!(s.grid(), &[0.0, 0.5, 1.0]);
        assert_eq!(s.values(), &[0.0, 0.25, 1.0]);
        assert!(p.subsample(3).is_err());
    }
}
