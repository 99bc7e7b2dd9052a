//! Optimization (O), generalization (G) and conflict (C) errors.
//!
//! All three take per-agent gradients over the joint parameter vector and a
//! weight vector on the simplex:
//!
//! - O-error: `||sum_i w_i grad L_i||`, plus the per-agent norms `||grad L_i||`.
//! - G-error: `||sum_i w_i (grad L_i^train - grad L_i^pop)||`.
//! - C-error: `||sum_i (w_i - w*_i) grad L_i||` where `w*` are the min-norm weights.

use crate::error::{MopsError, Result};
use crate::math::linalg::{common_dim, norm, sub, weighted_sum};
use crate::math::{min_norm_weights, WeightSimplex};

#[derive(Debug, Clone, PartialEq)]
pub struct OError {
    pub joint: f64,
    pub per_agent: Vec<f64>,
}

pub fn o_error(grads: &[Vec<f64>], weights: &WeightSimplex) -> Result<OError> {
    check(grads, weights)?;
    let joint = norm(&weighted_sum(weights.as_slice(), grads)?);
    Ok(OError {
        joint,
        per_agent: grads.iter().map(|g| norm(g)).collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GError {
    pub joint: f64,
    /// `||grad L_i^train - grad L_i^pop||` per agent.
    pub per_agent: Vec<f64>,
}

pub fn g_error(train: &[Vec<f64>], population: &[Vec<f64>], weights: &WeightSimplex) -> Result<GError> {
    if train.len() != population.len() {
        return Err(MopsError::invalid(format!(
            "{} training gradients but {} population gradients",
            train.len(),
            population.len()
        )));
    }
    check(train, weights)?;
    check(population, weights)?;
    if common_dim(train)? != common_dim(population)? {
        return Err(MopsError::invalid("training and population gradients differ in dimension"));
    }
    let diffs: Vec<Vec<f64>> = train.iter().zip(population).map(|(a, b)| sub(a, b)).collect();
    Ok(GError {
        joint: norm(&weighted_sum(weights.as_slice(), &diffs)?),
        per_agent: diffs.iter().map(|d| norm(d)).collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CError {
    pub value: f64,
    pub optimal_weights: WeightSimplex,
    /// The min-norm (Pareto stationarity) measure at the same point.
    pub min_norm: f64,
}

pub fn c_error(grads: &[Vec<f64>], weights: &WeightSimplex) -> Result<CError> {
    check(grads, weights)?;
    let (optimal, min_norm) = min_norm_weights(grads)?;
    let delta: Vec<f64> = weights
        .as_slice()
        .iter()
        .zip(optimal.as_slice())
        .map(|(w, o)| w - o)
        .collect();
    Ok(CError {
        value: norm(&weighted_sum(&delta, grads)?),
        optimal_weights: optimal,
        min_norm,
    })
}

fn check(grads: &[Vec<f64>], weights: &WeightSimplex) -> Result<()> {
    common_dim(grads)?;
    if grads.len() != weights.len() {
        return Err(MopsError::invalid(format!(
            "{} gradients for {} weights",
            grads.len(),
            weights.len()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::RngState;

    fn w(v: &[f64]) -> WeightSimplex {
        WeightSimplex::new(v.to_vec()).unwrap()
    }

    #[test]
    fn o_error_cases() {
        assert_eq!(o_error(&[vec![0.0; 3], vec![0.0; 3]], &w(&[0.5, 0.5])).unwrap().joint, 0.0);
        let single = o_error(&[vec![3.0, 4.0]], &w(&[1.0])).unwrap();
        assert_eq!(single.joint, 5.0);
        assert_eq!(single.per_agent, vec![5.0]);
        let cancel = o_error(&[vec![1.0, 0.0], vec![-1.0, 0.0]], &w(&[0.5, 0.5])).unwrap();
        assert_eq!(cancel.joint, 0.0);
        assert_eq!(cancel.per_agent, vec![1.0, 1.0]);
    }

    #[test]
    fn g_error_cases() {
        let train = vec![vec![1.0, 2.0], vec![-3.0, 0.5]];
        assert_eq!(g_error(&train, &train, &w(&[0.3, 0.7])).unwrap().joint, 0.0);
        let delta = [0.3, -0.4];
        let pop: Vec<Vec<f64>> = train
            .iter()
            .map(|g| vec![g[0] - delta[0], g[1] - delta[1]])
            .collect();
        let e = g_error(&train, &pop, &w(&[0.5, 0.5])).unwrap();
        assert!((e.joint - 0.5).abs() < 1e-12);
        assert!(g_error(&train, &train[..1], &w(&[0.5, 0.5])).is_err());
    }

    #[test]
    fn c_error_cases() {
        let grads = vec![vec![1.0, 0.0], vec![-1.0, 0.0]];
        let e = c_error(&grads, &w(&[1.0, 0.0])).unwrap();
        assert!((e.value - 1.0).abs() < 1e-9);
        let at_opt = c_error(&grads, &e.optimal_weights).unwrap();
        assert!(at_opt.value < 1e-12);
    }

    #[test]
    fn c_error_vanishes_at_min_norm_weights() {
        let mut rng = RngState::new(31, 0);
        for _ in 0..50 {
            let n = 2 + rng.index(3);
            let grads: Vec<Vec<f64>> = (0..n).map(|_| (0..4).map(|_| rng.gaussian()).collect()).collect();
            let (opt, mn) = min_norm_weights(&grads).unwrap();
            assert_eq!(c_error(&grads, &opt).unwrap().value, 0.0);
            // O-error at the optimal weights is the stationarity measure
            assert_eq!(o_error(&grads, &opt).unwrap().joint, mn);
        }
    }
}
