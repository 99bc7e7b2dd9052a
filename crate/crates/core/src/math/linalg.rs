//! Dense `f64` helpers on slices plus a small row-major matrix.

use crate::error::{MopsError, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scale(alpha: f64, a: &[f64]) -> Vec<f64> {
    a.iter().map(|x| alpha * x).collect()
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|x| x.is_finite())
}

/// Weighted sum `sum_i w_i * v_i` of equally sized vectors.
pub fn weighted_sum(weights: &[f64], vectors: &[Vec<f64>]) -> Result<Vec<f64>> {
    if weights.len() != vectors.len() {
        return Err(MopsError::invalid(format!(
            "{} weights for {} vectors",
            weights.len(),
            vectors.len()
        )));
    }
    let dim = common_dim(vectors)?;
    let mut out = vec![0.0; dim];
    for (w, v) in weights.iter().zip(vectors) {
        axpy(*w, v, &mut out);
    }
    Ok(out)
}

/// Shared length of a non-empty list of vectors.
pub fn common_dim(vectors: &[Vec<f64>]) -> Result<usize> {
    let first = vectors
        .first()
        .ok_or_else(|| MopsError::invalid("empty vector list"))?;
    let dim = first.len();
    if let Some((i, v)) = vectors.iter().enumerate().find(|(_, v)| v.len() != dim) {
        return Err(MopsError::invalid(format!(
            "dimension mismatch: vector {i} has length {}, expected {dim}",
            v.len()
        )));
    }
    Ok(dim)
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = common_dim(rows)?;
        let data = rows.iter().flatten().copied().collect::<Vec<_>>();
        Mat::new(rows.len(), cols, data)
    }

    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(MopsError::invalid(format!(
                "shape {rows}x{cols} does not match {} entries",
                data.len()
            )));
        }
        if !all_finite(&data) {
            return Err(MopsError::numeric("matrix has non-finite entries"));
        }
        Ok(Mat { rows, cols, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Gram matrix `G_ij = <v_i, v_j>`.
    pub fn gram(vectors: &[Vec<f64>]) -> Result<Self> {
        common_dim(vectors)?;
        let n = vectors.len();
        let mut g = Mat::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = dot(&vectors[i], &vectors[j]);
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        Ok(g)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|r| dot(self.row(r), x)).collect()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.rows == self.cols
            && (0..self.rows)
                .all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }

    /// Cholesky factor test; succeeds iff the (symmetric) matrix is positive definite.
    pub fn is_positive_definite(&self) -> bool {
        if !self.is_symmetric(1e-12) {
            return false;
        }
        let n = self.rows;
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if s <= 0.0 {
                        return false;
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        true
    }

    /// Largest eigenvalue of a symmetric positive semidefinite matrix by power iteration.
    pub fn max_eigenvalue_psd(&self) -> f64 {
        let n = self.rows;
        if n == 0 {
            return 0.0;
        }
        let trace: f64 = (0..n).map(|i| self[(i, i)]).sum();
        if trace <= 0.0 {
            return 0.0;
        }
        let mut v = vec![1.0 / (n as f64).sqrt(); n];
        let mut lambda = 0.0;
        for _ in 0..500 {
            let w = self.matvec(&v);
            let nw = norm(&w);
            if nw == 0.0 {
                // uniform start is orthogonal to the range; restart off-axis
                v = (0..n).map(|i| (i + 1) as f64).collect();
                let nv = norm(&v);
                v.iter_mut().for_each(|x| *x /= nv);
                continue;
            }
            let next = nw;
            v = w.into_iter().map(|x| x / nw).collect();
            if (next - lambda).abs() <= 1e-14 * next {
                lambda = next;
                break;
            }
            lambda = next;
        }
        // power iteration underestimates; never exceed the trace bound
        lambda.min(trace)
    }

    /// Solves `A x = b` by Gaussian elimination with partial pivoting.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.rows;
        if self.cols != n || b.len() != n {
            return Err(MopsError::invalid("solve needs a square system"));
        }
        let mut a = self.data.clone();
        let mut x = b.to_vec();
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))
                .unwrap();
            if a[pivot * n + col].abs() < 1e-300 {
                return Err(MopsError::numeric("singular system"));
            }
            if pivot != col {
                for k in 0..n {
                    a.swap(pivot * n + k, col * n + k);
                }
                x.swap(pivot, col);
            }
            for r in col + 1..n {
                let f = a[r * n + col] / a[col * n + col];
                for k in col..n {
                    a[r * n + k] -= f * a[col * n + k];
                }
                x[r] -= f * x[col];
            }
        }
        for r in (0..n).rev() {
            let mut s = x[r];
            for k in r + 1..n {
                s -= a[r * n + k] * x[k];
            }
            x[r] = s / a[r * n + r];
        }
        Ok(x)
    }
}

impl std::ops::Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }
}
