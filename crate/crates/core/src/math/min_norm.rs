//! Minimum-norm point in the convex hull of a set of gradients.
//!
//! Solves `min_{w in simplex} 1/2 ||sum_i w_i g_i||^2` by projected gradient
//! descent on the Gram matrix with fixed step `1 / lambda_max(G)`, starting at
//! the uniform point. Iteration stops when the Frank-Wolfe duality gap, which
//! upper-bounds the objective suboptimality, drops below `tol * max_i G_ii`.

use super::linalg::{common_dim, dot, norm, weighted_sum, Mat};
use super::simplex::{project_simplex, WeightSimplex};
use crate::error::{MopsError, Result};

#[derive(Debug, Clone, Copy)]
pub struct MinNormOptions {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for MinNormOptions {
    fn default() -> Self {
        MinNormOptions {
            max_iter: 10_000,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MinNormSolution {
    pub weights: WeightSimplex,
    pub norm: f64,
    pub iterations: usize,
    pub gap: f64,
}

/// Min-norm simplex weights of `grads` and the achieved norm.
pub fn min_norm_weights(grads: &[Vec<f64>]) -> Result<(WeightSimplex, f64)> {
    let sol = min_norm_solve(grads, MinNormOptions::default())?;
    Ok((sol.weights, sol.norm))
}

pub fn min_norm_solve(grads: &[Vec<f64>], opts: MinNormOptions) -> Result<MinNormSolution> {
    common_dim(grads)?;
    if grads.iter().any(|g| g.iter().any(|x| !x.is_finite())) {
        return Err(MopsError::invalid("gradients must be finite"));
    }
    let gram = Mat::gram(grads)?;
    if gram.data().iter().any(|x| !x.is_finite()) {
        return Err(MopsError::numeric("gradient inner products overflow"));
    }
    let (mut weights, iterations, gap) = solve_gram(&gram, opts)?;
    let mut best = norm(&weighted_sum(weights.as_slice(), grads)?);
    // an early stop can leave the iterate above a vertex; never return worse than one
    for (i, g) in grads.iter().enumerate() {
        let n = norm(g);
        if n < best {
            best = n;
            weights = WeightSimplex::vertex(grads.len(), i);
        }
    }
    Ok(MinNormSolution {
        norm: best,
        weights,
        iterations,
        gap,
    })
}

/// Projected-gradient solve on a precomputed Gram matrix.
pub fn solve_gram(gram: &Mat, opts: MinNormOptions) -> Result<(WeightSimplex, usize, f64)> {
    let n = gram.rows();
    if n == 0 || gram.cols() != n {
        return Err(MopsError::invalid("gram matrix must be square and non-empty"));
    }
    let mut w = WeightSimplex::uniform(n);
    if n == 1 {
        return Ok((w, 0, 0.0));
    }
    let lambda = gram.max_eigenvalue_psd();
    let scale = (0..n).map(|i| gram[(i, i)]).fold(0.0, f64::max);
    if lambda <= 0.0 || scale <= 0.0 {
        // every gradient is zero; any weight is optimal, keep the uniform point
        return Ok((w, 0, 0.0));
    }
    let step = 1.0 / lambda;
    let threshold = opts.tol * scale;
    let mut gap = f64::INFINITY;
    for it in 0..opts.max_iter {
        let grad = gram.matvec(w.as_slice());
        let min_coord = grad.iter().copied().fold(f64::INFINITY, f64::min);
        gap = dot(&grad, w.as_slice()) - min_coord;
        if gap <= threshold {
            return Ok((w, it, gap));
        }
        let trial: Vec<f64> = w
            .as_slice()
            .iter()
            .zip(&grad)
            .map(|(wi, gi)| wi - step * gi)
            .collect();
        w = project_simplex(&trial)?;
    }
    Ok((w, opts.max_iter, gap))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Grid search over the 1- or 2-simplex.
    fn grid_min_norm(grads: &[Vec<f64>], step: f64) -> (Vec<f64>, f64) {
        let n = (1.0 / step).round() as usize;
        let mut best = (vec![], f64::INFINITY);
        let mut eval = |w: Vec<f64>| {
            let v = weighted_sum(&w, grads).unwrap();
            let nv = norm(&v);
            if nv < best.1 {
                best = (w, nv);
            }
        };
        match grads.len() {
            2 => (0..=n).for_each(|i| eval(vec![i as f64 * step, (n - i) as f64 * step])),
            3 => {
                for i in 0..=n {
                    for j in 0..=(n - i) {
                        eval(vec![i as f64 * step, j as f64 * step, (n - i - j) as f64 * step]);
                    }
                }
            }
            _ => unreachable!(),
        }
        best
    }

    #[test]
    fn antipodal_pair() {
        let (w, n) = min_norm_weights(&[vec![1.0, 0.0], vec![-1.0, 0.0]]).unwrap();
        assert!((w[0] - 0.5).abs() < 1e-9 && (w[1] - 0.5).abs() < 1e-9);
        assert!(n < 1e-9);
    }

    #[test]
    fn singleton() {
        let (w, n) = min_norm_weights(&[vec![3.0, 4.0]]).unwrap();
        assert_eq!(w.as_slice(), &[1.0]);
        assert_eq!(n, 5.0);
    }

    #[test]
    fn orthogonal_pair_matches_grid() {
        let grads = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let (gw, gn) = grid_min_norm(&grads, 1e-4);
        let (w, n) = min_norm_weights(&grads).unwrap();
        assert!((n - gn).abs() < 1e-3);
        assert!((n - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-3);
        assert!((w[0] - gw[0]).abs() < 1e-3 && (w[0] - 0.5).abs() < 1e-3);
    }

    #[test]
    fn all_zero_gradients_keep_uniform() {
        let (w, n) = min_norm_weights(&[vec![0.0; 3], vec![0.0; 3], vec![0.0; 3]]).unwrap();
        assert_eq!(w, WeightSimplex::uniform(3));
        assert_eq!(n, 0.0);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(matches!(
            min_norm_weights(&[vec![1.0], vec![1.0, 2.0]]),
            Err(MopsError::InvalidArgument(_))
        ));
        assert!(min_norm_weights(&[]).is_err());
    }

    #[test]
    fn triangle_around_origin_is_stationary() {
        let grads = vec![vec![1.0, 0.0], vec![-0.5, 0.866], vec![-0.5, -0.866]];
        let (w, n) = min_norm_weights(&grads).unwrap();
        assert!(n < 1e-3);
        for x in w.as_slice() {
            assert!((x - 1.0 / 3.0).abs() < 1e-3);
        }
    }

    #[test]
    fn power_of_two_scaling_is_exact() {
        let grads = vec![vec![0.3, -1.2, 0.7], vec![-0.4, 0.9, 0.1], vec![1.1, 0.2, -0.5]];
        let scaled: Vec<Vec<f64>> = grads.iter().map(|g| g.iter().map(|x| 4.0 * x).collect()).collect();
        let (w1, n1) = min_norm_weights(&grads).unwrap();
        let (w2, n2) = min_norm_weights(&scaled).unwrap();
        assert_eq!(w1, w2);
        assert_eq!(4.0 * n1, n2);
    }
}
