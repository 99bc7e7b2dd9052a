use crate::error::{MopsError, Result};
use crate::math::RngState;

use super::spec::LayerSpec;

/// Flat parameter storage for a contiguous run of layers.
///
/// Layer `k` occupies `data[offsets[k]..offsets[k + 1]]`: its weight matrix
/// (row-major, `out_dim x in_dim`) followed by its bias. `version` increases on
/// every in-place update so forward caches can detect staleness.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    data: Vec<f64>,
    offsets: Vec<usize>,
    version: u64,
}

impl ParamVector {
    pub fn zeros(layers: &[LayerSpec]) -> Self {
        let offsets = offsets_of(layers);
        let len = *offsets.last().unwrap();
        ParamVector {
            data: vec![0.0; len],
            offsets,
            version: 0,
        }
    }

    pub fn from_data(layers: &[LayerSpec], data: Vec<f64>) -> Result<Self> {
        let offsets = offsets_of(layers);
        let len = *offsets.last().unwrap();
        if data.len() != len {
            return Err(MopsError::invalid(format!(
                "expected {len} parameters, got {}",
                data.len()
            )));
        }
        Ok(ParamVector {
            data,
            offsets,
            version: 0,
        })
    }

    /// Scaled uniform init: every entry of layer `k` drawn from `U(-1/sqrt(in_k), 1/sqrt(in_k))`.
    pub fn init(layers: &[LayerSpec], rng: &mut RngState) -> Self {
        let mut p = ParamVector::zeros(layers);
        for (k, l) in layers.iter().enumerate() {
            let bound = 1.0 / (l.in_dim as f64).sqrt();
            for x in &mut p.data[p.offsets[k]..p.offsets[k + 1]] {
                *x = rng.uniform_range(-bound, bound);
            }
        }
        p
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn layer(&self, k: usize) -> &[f64] {
        &self.data[self.offsets[k]..self.offsets[k + 1]]
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    /// `params -= step * grad`
    pub fn apply_step(&mut self, step: f64, grad: &[f64]) -> Result<()> {
        if grad.len() != self.data.len() {
            return Err(MopsError::contract(format!(
                "gradient length {} does not match {} parameters",
                grad.len(),
                self.data.len()
            )));
        }
        for (p, g) in self.data.iter_mut().zip(grad) {
            *p -= step * g;
        }
        self.version += 1;
        Ok(())
    }

    pub fn set_data(&mut self, data: Vec<f64>) -> Result<()> {
        if data.len() != self.data.len() {
            return Err(MopsError::invalid("replacement parameter length mismatch"));
        }
        self.data = data;
        self.version += 1;
        Ok(())
    }

    /// Concatenation in layer order (e.g. agent part then shared part).
    pub fn concat(front: &ParamVector, back: &ParamVector) -> ParamVector {
        let mut data = front.data.clone();
        data.extend_from_slice(&back.data);
        let base = *front.offsets.last().unwrap();
        let mut offsets = front.offsets.clone();
        offsets.extend(back.offsets.iter().skip(1).map(|o| o + base));
        ParamVector {
            data,
            offsets,
            version: 0,
        }
    }
}

fn offsets_of(layers: &[LayerSpec]) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(layers.len() + 1);
    let mut acc = 0;
    offsets.push(0);
    for l in layers {
        acc += l.param_count();
        offsets.push(acc);
    }
    offsets
}
