//! Small dense row-major matrices: the diffusion matrix g(t), its inverse and
//! the drift Jacobian. Orders are tiny (n is the SDE dimension), so everything
//! here is straightforward O(n^3) elimination with partial pivoting.

use std::fmt;

use crate::error::{Error, Result};

/// Relative determinant below which a matrix is treated as singular.
///
/// The determinant is normalized by the Hadamard bound (product of row
/// norms), which makes the test invariant under row scaling.
pub const SINGULARITY_THRESHOLD: f64 = 1e-12;

#[derive(Clone, PartialEq)]
pub struct SquareMatrix {
    order: usize,
    entries: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(order: usize) -> Self {
        Self { order, entries: vec![0.0; order * order] }
    }

    pub fn identity(order: usize) -> Self {
        Self::scaled_identity(order, 1.0)
    }

    pub fn scaled_identity(order: usize, value: f64) -> Self {
        let mut m = Self::zeros(order);
        for i in 0..order {
            m[(i, i)] = value;
        }
        m
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds a matrix from row-major entries.
    pub fn from_row_major(order: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != order * order {
            return Err(Error::DimensionMismatch { expected: order * order, got: entries.len() });
        }
        Ok(Self { order, entries })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let order = rows.len();
        let mut entries = Vec::with_capacity(order * order);
        for row in rows {
            if row.len() != order {
                return Err(Error::DimensionMismatch { expected: order, got: row.len() });
            }
            entries.extend_from_slice(row);
        }
        Ok(Self { order, entries })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.entries
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.order..(i + 1) * self.order]
    }

    pub fn fill(&mut self, value: f64) {
        self.entries.iter_mut().for_each(|e| *e = value);
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|e| e.is_finite())
    }

    pub fn trace(&self) -> f64 {
        (0..self.order).map(|i| self[(i, i)]).sum()
    }

    pub fn transpose(&self) -> Self {
        let n = self.order;
        let mut t = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, rhs: &SquareMatrix) -> SquareMatrix {
        assert_eq!(self.order, rhs.order, "matrix order mismatch");
        let n = self.order;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.entries[i * n + j] += a * rhs.entries[k * n + j];
                }
            }
        }
        out
    }

    /// `out = self * v`
    pub fn mul_vec_into(&self, v: &[f64], out: &mut [f64]) {
        let n = self.order;
        debug_assert_eq!(v.len(), n);
        debug_assert_eq!(out.len(), n);
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row(i).iter().zip(v).map(|(a, b)| a * b).sum();
        }
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.order];
        self.mul_vec_into(v, &mut out);
        out
    }

    /// `out = self^T * v`
    pub fn mul_transpose_vec_into(&self, v: &[f64], out: &mut [f64]) {
        let n = self.order;
        out.iter_mut().for_each(|o| *o = 0.0);
        for i in 0..n {
            let vi = v[i];
            for j in 0..n {
                out[j] += self.entries[i * n + j] * vi;
            }
        }
    }

    /// Product of the Euclidean row norms, an upper bound on |det|.
    pub fn hadamard_bound(&self) -> f64 {
        (0..self.order).map(|i| self.row(i).iter().map(|x| x * x).sum::<f64>().sqrt()).product()
    }

    /// LU factorization with partial pivoting. Returns the packed factors,
    /// the pivot permutation and the permutation sign.
    fn lu(&self) -> (Vec<f64>, Vec<usize>, f64) {
        let n = self.order;
        let mut a = self.entries.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        for col in 0..n {
            let pivot = (col..n).max_by(|&r, &s| a[r * n + col].abs().total_cmp(&a[s * n + col].abs())).unwrap_or(col);
            if pivot != col {
                for j in 0..n {
                    a.swap(col * n + j, pivot * n + j);
                }
                perm.swap(col, pivot);
                sign = -sign;
            }
            let p = a[col * n + col];
            if p == 0.0 {
                continue;
            }
            for r in col + 1..n {
                let factor = a[r * n + col] / p;
                a[r * n + col] = factor;
                for j in col + 1..n {
                    a[r * n + j] -= factor * a[col * n + j];
                }
            }
        }
        (a, perm, sign)
    }

    pub fn determinant(&self) -> f64 {
        let n = self.order;
        if n == 0 {
            return 1.0;
        }
        let (lu, _, sign) = self.lu();
        sign * (0..n).map(|i| lu[i * n + i]).product::<f64>()
    }

    /// Determinant divided by the Hadamard bound, in [-1, 1].
    pub fn relative_determinant(&self) -> f64 {
        let bound = self.hadamard_bound();
        if bound == 0.0 {
            return 0.0;
        }
        self.determinant() / bound
    }

    /// Inverse by LU with partial pivoting.
    pub fn inverse(&self) -> Result<SquareMatrix> {
        let n = self.order;
        if !self.is_finite() {
            return Err(Error::NonFinite("matrix entries".into()));
        }
        let (lu, perm, sign) = self.lu();
        let det = sign * (0..n).map(|i| lu[i * n + i]).product::<f64>();
        let bound = self.hadamard_bound();
        if bound == 0.0 || (det / bound).abs() < SINGULARITY_THRESHOLD {
            return Err(Error::SingularMatrix { det });
        }
        let mut inv = Self::zeros(n);
        let mut col = vec![0.0; n];
        for j in 0..n {
            // Solve L U x = P e_j.
            for i in 0..n {
                col[i] = if perm[i] == j { 1.0 } else { 0.0 };
            }
            for i in 0..n {
                let mut s = col[i];
                for k in 0..i {
                    s -= lu[i * n + k] * col[k];
                }
                col[i] = s;
            }
            for i in (0..n).rev() {
                let mut s = col[i];
                for k in i + 1..n {
                    s -= lu[i * n + k] * col[k];
                }
                col[i] = s / lu[i * n + i];
            }
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        Ok(inv)
    }

    /// Solves `self * x = b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        Ok(self.inverse()?.mul_vec(b))
    }

    pub fn max_abs_diff(&self, other: &SquareMatrix) -> f64 {
        self.entries.iter().zip(&other.entries).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

impl std::ops::Index<(usize, usize)> for SquareMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.entries[i * self.order + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for SquareMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.entries[i * self.order + j]
    }
}

impl fmt::Debug for SquareMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<&[f64]> = (0..self.order).map(|i| self.row(i)).collect();
        f.debug_struct("SquareMatrix").field("rows", &rows).finish()
    }
}

/// Inverse of a square matrix; fails with [`Error::SingularMatrix`] when the
/// relative determinant falls below [`SINGULARITY_THRESHOLD`].
pub fn mat_inverse(m: &SquareMatrix) -> Result<SquareMatrix> {
    m.inverse()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_inverse_is_identity() {
        let i = SquareMatrix::identity(3);
        assert_eq!(mat_inverse(&i).unwrap(), i);
    }

    #[test]
    fn diagonal_inverse() {
        let inv = mat_inverse(&SquareMatrix::diagonal(&[2.0, 4.0])).unwrap();
        assert_eq!(inv, SquareMatrix::diagonal(&[0.5, 0.25]));
    }

    #[test]
    fn two_by_two_adjugate() {
        let m = SquareMatrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
        let inv = mat_inverse(&m).unwrap();
        let expected = SquareMatrix::from_rows(&[&[-2.0, 1.0], &[1.5, -0.5]]).unwrap();
        assert!(inv.max_abs_diff(&expected) < 1e-14, "{inv:?}");
        assert!(m.matmul(&inv).max_abs_diff(&SquareMatrix::identity(2)) < 1e-10);
        assert!((m.determinant() + 2.0).abs() < 1e-14);
    }

    #[test]
    fn singular_matrix_reports_determinant() {
        let m = SquareMatrix::from_rows(&[&[1.0, 2.0], &[2.0, 4.0]]).unwrap();
        match mat_inverse(&m) {
            Err(Error::SingularMatrix { det }) => assert!(det.abs() < 1e-12),
            other => panic!("expected singular error, got {other:?}"),
        }
        assert!(matches!(mat_inverse(&SquareMatrix::zeros(2)), Err(Error::SingularMatrix { .. })));
    }

    #[test]
    fn singularity_test_is_scale_invariant() {
        let tiny = SquareMatrix::scaled_identity(3, 1e-9);
        assert!(mat_inverse(&tiny).is_ok());
    }

    #[test]
    fn pivoting_handles_zero_leading_entry() {
        let m = SquareMatrix::from_rows(&[&[0.0, 1.0, 2.0], &[1.0, 0.0, 3.0], &[4.0, -3.0, 8.0]]).unwrap();
        let inv = m.inverse().unwrap();
        assert!(m.matmul(&inv).max_abs_diff(&SquareMatrix::identity(3)) < 1e-10);
        assert!(inv.matmul(&m).max_abs_diff(&SquareMatrix::identity(3)) < 1e-10);
    }

    #[test]
    fn transpose_vector_product() {
        let m = SquareMatrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
        let mut out = [0.0; 2];
        m.mul_transpose_vec_into(&[1.0, 1.0], &mut out);
        assert_eq!(out, [4.0, 6.0]);
        assert_eq!(m.transpose().mul_vec(&[1.0, 1.0]), vec![4.0, 6.0]);
    }
}
