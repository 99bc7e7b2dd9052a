//! Probability simplex weights and Euclidean projection onto the simplex.

use serde::{Deserialize, Serialize};

use crate::error::{MopsError, Result};

/// Sum-to-one tolerance for a valid weight vector.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// Nonnegative weights summing to one, indexed by agent id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct WeightSimplex(Vec<f64>);

impl WeightSimplex {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(MopsError::invalid("weight vector is empty"));
        }
        if !is_on_simplex(&weights) {
            return Err(MopsError::invalid(format!(
                "weights {weights:?} are not on the probability simplex"
            )));
        }
        Ok(WeightSimplex(weights))
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform simplex needs at least one coordinate");
        WeightSimplex(vec![1.0 / n as f64; n])
    }

    /// All mass on coordinate `i`.
    pub fn vertex(n: usize, i: usize) -> Self {
        assert!(i < n);
        let mut w = vec![0.0; n];
        w[i] = 1.0;
        WeightSimplex(w)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for WeightSimplex {
    type Error = MopsError;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        WeightSimplex::new(v)
    }
}

impl From<WeightSimplex> for Vec<f64> {
    fn from(w: WeightSimplex) -> Self {
        w.0
    }
}

impl std::ops::Index<usize> for WeightSimplex {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

fn is_on_simplex(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite() && *x >= 0.0) && (v.iter().sum::<f64>() - 1.0).abs() <= SIMPLEX_TOL
}

/// Euclidean projection of `v` onto the probability simplex.
///
/// Sort-based exact algorithm: find the largest `k` such that the `k`-th
/// largest entry stays positive after subtracting the common threshold,
/// then clip. Points already on the simplex are returned unchanged, which
/// makes the projection exactly idempotent.
pub fn project_simplex(v: &[f64]) -> Result<WeightSimplex> {
    if v.is_empty() {
        return Err(MopsError::invalid("cannot project an empty vector"));
    }
    if !v.iter().all(|x| x.is_finite()) {
        return Err(MopsError::invalid("cannot project a non-finite vector"));
    }
    if is_on_simplex(v) {
        return Ok(WeightSimplex(v.to_vec()));
    }
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    let out: Vec<f64> = v.iter().map(|x| (x - theta).max(0.0)).collect();
    Ok(WeightSimplex(out))
}
