//! Small dense row-major matrices and the few factorizations the rest of the
//! crate needs.
//!
//! Problem sizes here are tiny (the largest recurring solve is a least-squares
//! system with a few hundred rows and single-digit columns), so the routines
//! favor clarity and determinism over blocking or pivoting sophistication.

use alloc::vec;
use alloc::vec::Vec;
use num_traits::Float;

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    /// Number of rows.
    pub rows: usize,
    /// Number of columns.
    pub cols: usize,
    /// Row-major storage, `rows * cols` long.
    pub data: Vec<f64>,
}

impl Mat {
    /// All-zero matrix.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    /// Matrix wrapping existing row-major storage.
    ///
    /// Panics if `data` is not `rows * cols` long.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "storage does not match dimensions");
        Mat { rows, cols, data }
    }

    /// Element accessor.
    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    /// Element mutator.
    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    /// Borrow row `r` as a slice.
    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Copy of column `c`.
    pub fn col(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    /// Transposed copy.
    pub fn transpose(&self) -> Mat {
        let mut out = Mat::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.set(c, r, self.get(r, c));
            }
        }
        out
    }

    /// Matrix product `self * other`.
    ///
    /// Panics on inner-dimension mismatch.
    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "inner dimensions must agree");
        let mut out = Mat::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                if a == 0.0 {
                    continue;
                }
                for c in 0..other.cols {
                    out.data[r * out.cols + c] += a * other.get(k, c);
                }
            }
        }
        out
    }

    /// Matrix-vector product `self * x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, x.len(), "vector length must match columns");
        let mut out = vec![0.0; self.rows];
        for r in 0..self.rows {
            out[r] = dot(self.row(r), x);
        }
        out
    }

    /// Transpose-vector product `self^T * x`.
    pub fn tr_matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.rows, x.len(), "vector length must match rows");
        let mut out = vec![0.0; self.cols];
        for r in 0..self.rows {
            let xr = x[r];
            if xr == 0.0 {
                continue;
            }
            let row = self.row(r);
            for c in 0..self.cols {
                out[c] += row[c] * xr;
            }
        }
        out
    }

    /// Frobenius norm.
    pub fn fro_norm(&self) -> f64 {
        norm(&self.data)
    }
}

/// Dot product of equal-length slices.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for i in 0..a.len() {
        acc += a[i] * b[i];
    }
    acc
}

/// Euclidean norm of a slice.
#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Least-squares solution of `a x = b` via modified Gram-Schmidt QR.
///
/// Returns `None` when a column of `a` is (numerically) linearly dependent on
/// the ones before it, which is how callers detect rank deficiency. `a` must
/// have at least as many rows as columns.
pub fn solve_ls(a: &Mat, b: &[f64]) -> Option<Vec<f64>> {
    assert_eq!(a.rows, b.len(), "right-hand side must match rows");
    assert!(a.rows >= a.cols, "system must not be underdetermined");
    let m = a.rows;
    let n = a.cols;
    if n == 0 {
        return Some(Vec::new());
    }

    // Q is built column by column; R is upper triangular n x n.
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut r = Mat::zeros(n, n);
    let mut col_scale = 0.0f64;
    for j in 0..n {
        let mut v = a.col(j);
        let vnorm0 = norm(&v);
        col_scale = col_scale.max(vnorm0);
        for (i, qi) in q.iter().enumerate() {
            let proj = dot(qi, &v);
            r.set(i, j, proj);
            for k in 0..m {
                v[k] -= proj * qi[k];
            }
        }
        let vnorm = norm(&v);
        // Column is dependent when what survives orthogonalization is noise
        // relative to the largest column seen so far.
        if vnorm <= 1e-12 * col_scale.max(1e-300) {
            return None;
        }
        r.set(j, j, vnorm);
        for k in 0..m {
            v[k] /= vnorm;
        }
        q.push(v);
    }

    // x = R^-1 Q^T b by back substitution.
    let mut qtb = vec![0.0; n];
    for (i, qi) in q.iter().enumerate() {
        qtb[i] = dot(qi, b);
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut acc = qtb[i];
        for j in i + 1..n {
            acc -= r.get(i, j) * x[j];
        }
        x[i] = acc / r.get(i, i);
    }
    Some(x)
}

/// Eigendecomposition of a symmetric matrix by the cyclic Jacobi method.
///
/// Returns the eigenvalues in descending order and the matching unit
/// eigenvectors as the columns of the second result. Sweeps run until the
/// off-diagonal mass is negligible against the matrix norm or `max_sweeps`
/// is reached; for the symmetric positive semidefinite Gram matrices this
/// crate feeds it, a dozen sweeps are plenty.
pub fn sym_eigen(a: &Mat, max_sweeps: usize) -> (Vec<f64>, Mat) {
    assert_eq!(a.rows, a.cols, "matrix must be square");
    let n = a.rows;
    let mut m = a.clone();
    let mut v = Mat::zeros(n, n);
    for i in 0..n {
        v.set(i, i, 1.0);
    }
    let scale = a.fro_norm().max(1e-300);

    for _ in 0..max_sweeps {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += m.get(p, q) * m.get(p, q);
            }
        }
        if off.sqrt() <= 1e-14 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m.get(p, q);
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (m.get(q, q) - m.get(p, p)) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (theta * theta + 1.0).sqrt())
                } else {
                    -1.0 / (-theta + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // Two-sided rotation in the (p, q) plane.
                for k in 0..n {
                    let akp = m.get(k, p);
                    let akq = m.get(k, q);
                    m.set(k, p, c * akp - s * akq);
                    m.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = m.get(p, k);
                    let aqk = m.get(q, k);
                    m.set(p, k, c * apk - s * aqk);
                    m.set(q, k, s * apk + c * aqk);
                }
                m.set(p, q, 0.0);
                m.set(q, p, 0.0);
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| m.get(b, b).total_cmp(&m.get(a, a)));
    let values: Vec<f64> = order.iter().map(|&i| m.get(i, i)).collect();
    let mut vectors = Mat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for k in 0..n {
            vectors.set(k, dst, v.get(k, src));
        }
    }
    (values, vectors)
}

// ---------------------------------------------------------------------------
// tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    const TOL: f64 = 1e-12;

    #[test]
    fn matmul_hand_case() {
        let a = Mat::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]);
        let b = Mat::from_vec(2, 2, vec![5.0, 6.0, 7.0, 8.0]);
        let c = a.matmul(&b);
        assert_eq!(c.data, vec![19.0, 22.0, 43.0, 50.0]);
    }

    #[test]
    fn transpose_round_trip() {
        let a = Mat::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(a.transpose().transpose(), a);
    }

    #[test]
    fn matvec_agrees_with_matmul() {
        let a = Mat::from_vec(3, 2, vec![1.0, -1.0, 2.0, 0.5, 0.0, 3.0]);
        let x = vec![2.0, 4.0];
        let y = a.matvec(&x);
        assert_eq!(y, vec![-2.0, 6.0, 12.0]);
        let yt = a.tr_matvec(&vec![1.0, 1.0, 1.0]);
        assert_eq!(yt, vec![3.0, 2.5]);
    }

    #[test]
    fn solve_ls_square_exact() {
        let a = Mat::from_vec(2, 2, vec![2.0, 1.0, 1.0, 3.0]);
        let x = solve_ls(&a, &[5.0, 10.0]).unwrap();
        assert!((x[0] - 1.0).abs() < TOL);
        assert!((x[1] - 3.0).abs() < TOL);
    }

    #[test]
    fn solve_ls_overdetermined_matches_normal_equations() {
        // Fit y = 2t + 1 from 4 exact points; residual is zero so the LS
        // solution equals the generating coefficients.
        let a = Mat::from_vec(4, 2, vec![0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0, 1.0]);
        let b = [1.0, 3.0, 5.0, 7.0];
        let x = solve_ls(&a, &b).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-10);
        assert!((x[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn solve_ls_detects_dependent_columns() {
        let a = Mat::from_vec(3, 2, vec![1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        assert!(solve_ls(&a, &[1.0, 2.0, 3.0]).is_none());
    }

    #[test]
    fn sym_eigen_two_by_two_hand_case() {
        let a = Mat::from_vec(2, 2, vec![2.0, 1.0, 1.0, 2.0]);
        let (values, vectors) = sym_eigen(&a, 20);
        assert!((values[0] - 3.0).abs() < 1e-12);
        assert!((values[1] - 1.0).abs() < 1e-12);
        let r = 0.5f64.sqrt();
        // Eigenvector of 3 is [1, 1] / sqrt(2) up to sign.
        assert!((vectors.get(0, 0).abs() - r).abs() < 1e-12);
        assert!((vectors.get(1, 0).abs() - r).abs() < 1e-12);
        assert!((vectors.get(0, 0) - vectors.get(1, 0)).abs() < 1e-12);
    }

    #[test]
    fn sym_eigen_reconstructs_random_symmetric_matrices() {
        let mut rng = SeededRng::new(71);
        for _ in 0..5 {
            let n = 8;
            let mut a = Mat::zeros(n, n);
            for i in 0..n {
                for j in i..n {
                    let x = rng.uniform_in(-1.0, 1.0);
                    a.set(i, j, x);
                    a.set(j, i, x);
                }
            }
            let (values, vectors) = sym_eigen(&a, 30);
            // Descending order.
            for w in values.windows(2) {
                assert!(w[0] >= w[1] - 1e-12);
            }
            // Columns orthonormal.
            for i in 0..n {
                for j in 0..n {
                    let d = dot(&vectors.col(i), &vectors.col(j));
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((d - want).abs() < 1e-10, "gram({i},{j}) = {d}");
                }
            }
            // A v = lambda v for every pair.
            for j in 0..n {
                let v = vectors.col(j);
                let av = a.matvec(&v);
                for k in 0..n {
                    assert!((av[k] - values[j] * v[k]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn sym_eigen_identity_is_all_ones() {
        let mut a = Mat::zeros(4, 4);
        for i in 0..4 {
            a.set(i, i, 1.0);
        }
        let (values, _) = sym_eigen(&a, 5);
        assert!(values.iter().all(|&v| (v - 1.0).abs() < TOL));
    }
}
