//! Quadratic multi-objective landscape in two dimensions.
//!
//! Agent `i` minimizes `(w - c_i)^T A_i (w - c_i)`. Stochastic gradients add
//! `sigma * xi` with `xi ~ N(0, I)`, which is the gradient of the stochastic
//! loss `(w - c_i)^T A_i (w - c_i) + sigma <xi, w>`; its expectation over `xi`
//! is the noiseless loss.

use crate::error::{MopsError, Result};
use crate::math::{Mat, WeightSimplex};

#[derive(Debug, Clone, PartialEq)]
pub struct ToyObjectiveSet {
    centers: Vec<[f64; 2]>,
    curvatures: Vec<Mat>,
    sigma: f64,
}

impl ToyObjectiveSet {
    pub fn new(centers: Vec<[f64; 2]>, curvatures: Vec<Mat>, sigma: f64) -> Result<Self> {
        if centers.is_empty() || centers.len() != curvatures.len() {
            return Err(MopsError::invalid("need one curvature matrix per center"));
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(MopsError::invalid(format!("noise level {sigma} must be nonnegative")));
        }
        for (i, a) in curvatures.iter().enumerate() {
            if a.rows() != 2 || a.cols() != 2 || !a.is_positive_definite() {
                return Err(MopsError::invalid(format!(
                    "curvature of agent {i} is not a symmetric positive definite 2x2 matrix"
                )));
            }
        }
        if centers.iter().flatten().any(|x| !x.is_finite()) {
            return Err(MopsError::invalid("centers must be finite"));
        }
        Ok(ToyObjectiveSet {
            centers,
            curvatures,
            sigma,
        })
    }

    /// Three identity-curvature bowls centered on an equilateral triangle
    /// around the origin: (1, 0), (-1/2, sqrt(3)/2), (-1/2, -sqrt(3)/2).
    pub fn symmetric(sigma: f64) -> Self {
        let h = 3f64.sqrt() / 2.0;
        ToyObjectiveSet::new(
            vec![[1.0, 0.0], [-0.5, h], [-0.5, -h]],
            vec![Mat::identity(2); 3],
            sigma,
        )
        .expect("default toy set is valid")
    }

    pub fn agents(&self) -> usize {
        self.centers.len()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn center(&self, i: usize) -> [f64; 2] {
        self.centers[i]
    }

    pub fn loss(&self, i: usize, w: &[f64]) -> f64 {
        let d = [w[0] - self.centers[i][0], w[1] - self.centers[i][1]];
        let ad = self.curvatures[i].matvec(&d);
        d[0] * ad[0] + d[1] * ad[1]
    }

    /// Noiseless (full-batch) gradient `2 A_i (w - c_i)`.
    pub fn grad(&self, i: usize, w: &[f64]) -> Vec<f64> {
        let d = [w[0] - self.centers[i][0], w[1] - self.centers[i][1]];
        self.curvatures[i].matvec(&d).into_iter().map(|v| 2.0 * v).collect()
    }

    /// Stochastic loss and gradient for the noise draw `xi`.
    pub fn stochastic(&self, i: usize, w: &[f64], xi: &[f64]) -> (f64, Vec<f64>) {
        let loss = self.loss(i, w) + self.sigma * (xi[0] * w[0] + xi[1] * w[1]);
        let mut g = self.grad(i, w);
        g[0] += self.sigma * xi[0];
        g[1] += self.sigma * xi[1];
        (loss, g)
    }

    /// Minimizer of the weighted objective `sum_i gamma_i loss_i`, a Pareto-stationary point.
    pub fn pareto_point(&self, gamma: &WeightSimplex) -> Result<[f64; 2]> {
        if gamma.len() != self.agents() {
            return Err(MopsError::invalid("weight count differs from agent count"));
        }
        let mut h = Mat::zeros(2, 2);
        let mut rhs = [0.0; 2];
        for i in 0..self.agents() {
            let a = &self.curvatures[i];
            let ac = a.matvec(&self.centers[i]);
            for r in 0..2 {
                rhs[r] += gamma[i] * ac[r];
                for c in 0..2 {
                    h[(r, c)] += gamma[i] * a[(r, c)];
                }
            }
        }
        let w = h.solve(&rhs)?;
        Ok([w[0], w[1]])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{finite_diff_grad, min_norm_weights, RngState};

    #[test]
    fn gradient_vanishes_at_center() {
        let set = ToyObjectiveSet::symmetric(0.1);
        for i in 0..3 {
            let c = set.center(i);
            assert!(set.grad(i, &c).iter().all(|v| v.abs() < 1e-15));
        }
    }

    #[test]
    fn centroid_is_stationary_for_uniform_weights() {
        let set = ToyObjectiveSet::symmetric(0.1);
        let w = set.pareto_point(&WeightSimplex::uniform(3)).unwrap();
        assert!(w[0].abs() < 1e-12 && w[1].abs() < 1e-12);
        let grads: Vec<Vec<f64>> = (0..3).map(|i| set.grad(i, &[0.0, 0.0])).collect();
        let (gamma, n) = min_norm_weights(&grads).unwrap();
        assert!(n < 1e-6);
        assert!(gamma.as_slice().iter().all(|g| (g - 1.0 / 3.0).abs() < 1e-6));
    }

    #[test]
    fn uniform_gradient_flow_reaches_origin() {
        // explicit Euler integration of the uniform-weight gradient flow
        let set = ToyObjectiveSet::symmetric(0.0);
        let mut rng = RngState::new(4, 0);
        for _ in 0..5 {
            let mut w = vec![rng.uniform_range(-3.0, 3.0), rng.uniform_range(-3.0, 3.0)];
            for _ in 0..5000 {
                let mut g = [0.0; 2];
                for i in 0..3 {
                    let gi = set.grad(i, &w);
                    g[0] += gi[0] / 3.0;
                    g[1] += gi[1] / 3.0;
                }
                w[0] -= 0.01 * g[0];
                w[1] -= 0.01 * g[1];
            }
            assert!((w[0] * w[0] + w[1] * w[1]).sqrt() < 1e-6);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let a = Mat::new(2, 2, vec![2.0, 0.5, 0.5, 1.0]).unwrap();
        let set = ToyObjectiveSet::new(vec![[0.3, -0.7]], vec![a], 0.0).unwrap();
        let w = [1.1, 0.4];
        let fd = finite_diff_grad(|x| set.loss(0, x), &w, 1e-5).unwrap();
        let g = set.grad(0, &w);
        for (a, b) in g.iter().zip(&fd) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn stochastic_gradient_is_loss_gradient() {
        let set = ToyObjectiveSet::symmetric(0.3);
        let xi = [0.8, -1.3];
        let w = [0.2, 0.9];
        let (_, g) = set.stochastic(1, &w, &xi);
        let fd = finite_diff_grad(|x| set.stochastic(1, x, &xi).0, &w, 1e-5).unwrap();
        for (a, b) in g.iter().zip(&fd) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn rejects_non_spd() {
        let bad = Mat::new(2, 2, vec![1.0, 2.0, 2.0, 1.0]).unwrap();
        assert!(matches!(
            ToyObjectiveSet::new(vec![[0.0, 0.0]], vec![bad], 0.1),
            Err(MopsError::InvalidArgument(_))
        ));
    }
}
