//! Forward and backward passes over a slice of dense layers.
//!
//! Full-model and part-wise evaluation share the same per-layer loops, so a
//! chained agent -> shared evaluation performs the identical floating-point
//! operations as a single full-model pass.

use crate::error::{MopsError, Result};

use super::params::ParamVector;
use super::spec::{LayerSpec, ModelSpec, Part};

/// Activations retained by a forward pass for the matching backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCache {
    part: Part,
    params_version: u64,
    /// Input to each executed layer.
    inputs: Vec<Vec<f64>>,
    /// Pre-activation output of each executed layer.
    pre: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn part(&self) -> Part {
        self.part
    }

    pub fn layer_count(&self) -> usize {
        self.inputs.len()
    }

    pub fn params_version(&self) -> u64 {
        self.params_version
    }
}

/// Instrumented multiply-accumulate tally, in flops (2 per MAC).
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct MacCounter {
    pub flops: u64,
}

pub fn forward(
    spec: &ModelSpec,
    params: &ParamVector,
    part: Part,
    input: &[f64],
) -> Result<(Vec<f64>, ForwardCache)> {
    forward_counted(spec, params, part, input, &mut MacCounter::default())
}

pub fn forward_counted(
    spec: &ModelSpec,
    params: &ParamVector,
    part: Part,
    input: &[f64],
    counter: &mut MacCounter,
) -> Result<(Vec<f64>, ForwardCache)> {
    let layers = spec.layers_of(part);
    check_params(spec, params, part)?;
    let in_dim = spec.part_input_dim(part);
    if input.len() != in_dim {
        return Err(MopsError::invalid(format!(
            "input has {} entries, {part:?} part expects {in_dim}",
            input.len()
        )));
    }
    let mut cache = ForwardCache {
        part,
        params_version: params.version(),
        inputs: Vec::with_capacity(layers.len()),
        pre: Vec::with_capacity(layers.len()),
    };
    let mut x = input.to_vec();
    for (k, layer) in layers.iter().enumerate() {
        let pre = dense_forward(layer, params.layer(k), &x, counter);
        let out: Vec<f64> = pre.iter().map(|v| layer.activation.apply(*v)).collect();
        cache.inputs.push(x);
        cache.pre.push(pre);
        x = out;
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(MopsError::numeric(format!("{part:?} forward produced a non-finite output")));
    }
    Ok((x, cache))
}

/// Gradients of `<upstream, output>` with respect to the part's parameters
/// (flat, in `ParamVector` layout) and with respect to the part's input.
pub fn backward(
    spec: &ModelSpec,
    params: &ParamVector,
    cache: &ForwardCache,
    upstream: &[f64],
    part: Part,
) -> Result<(Vec<f64>, Vec<f64>)> {
    backward_counted(spec, params, cache, upstream, part, &mut MacCounter::default())
}

pub fn backward_counted(
    spec: &ModelSpec,
    params: &ParamVector,
    cache: &ForwardCache,
    upstream: &[f64],
    part: Part,
    counter: &mut MacCounter,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let layers = spec.layers_of(part);
    check_params(spec, params, part)?;
    if cache.part != part || cache.layer_count() != layers.len() {
        return Err(MopsError::contract(format!(
            "cache from {:?} part ({} layers) used for {part:?} backward",
            cache.part,
            cache.layer_count()
        )));
    }
    if cache.params_version != params.version() {
        return Err(MopsError::contract(format!(
            "stale forward cache: parameters at version {}, cache built at {}",
            params.version(),
            cache.params_version
        )));
    }
    let out_dim = spec.part_output_dim(part);
    if upstream.len() != out_dim {
        return Err(MopsError::invalid(format!(
            "upstream gradient has {} entries, expected {out_dim}",
            upstream.len()
        )));
    }
    let mut grads = vec![0.0; params.len()];
    let offsets = params.offsets();
    let mut delta_out = upstream.to_vec();
    for (k, layer) in layers.iter().enumerate().rev() {
        let delta: Vec<f64> = delta_out
            .iter()
            .zip(&cache.pre[k])
            .map(|(d, p)| d * layer.activation.derivative(*p))
            .collect();
        delta_out = dense_backward(
            layer,
            params.layer(k),
            &cache.inputs[k],
            &delta,
            &mut grads[offsets[k]..offsets[k + 1]],
            counter,
        );
    }
    Ok((grads, delta_out))
}

fn check_params(spec: &ModelSpec, params: &ParamVector, part: Part) -> Result<()> {
    let expected = spec.param_count(part);
    if params.len() != expected || params.offsets().len() != spec.layers_of(part).len() + 1 {
        return Err(MopsError::invalid(format!(
            "{part:?} part needs {expected} parameters, got {}",
            params.len()
        )));
    }
    Ok(())
}

fn dense_forward(layer: &LayerSpec, p: &[f64], x: &[f64], counter: &mut MacCounter) -> Vec<f64> {
    let (w, b) = p.split_at(layer.in_dim * layer.out_dim);
    let mut out = Vec::with_capacity(layer.out_dim);
    for o in 0..layer.out_dim {
        let row = &w[o * layer.in_dim..(o + 1) * layer.in_dim];
        let mut acc = b[o];
        for (wi, xi) in row.iter().zip(x) {
            acc += wi * xi;
            counter.flops += 2;
        }
        out.push(acc);
    }
    out
}

/// Writes weight and bias gradients into `g`, returns the input gradient.
fn dense_backward(
    layer: &LayerSpec,
    p: &[f64],
    x: &[f64],
    delta: &[f64],
    g: &mut [f64],
    counter: &mut MacCounter,
) -> Vec<f64> {
    let n_w = layer.in_dim * layer.out_dim;
    let (w, _) = p.split_at(n_w);
    let (gw, gb) = g.split_at_mut(n_w);
    let mut dx = vec![0.0; layer.in_dim];
    for o in 0..layer.out_dim {
        let d = delta[o];
        let row = &w[o * layer.in_dim..(o + 1) * layer.in_dim];
        let grow = &mut gw[o * layer.in_dim..(o + 1) * layer.in_dim];
        for i in 0..layer.in_dim {
            grow[i] = d * x[i];
            dx[i] += row[i] * d;
            counter.flops += 4;
        }
        gb[o] = d;
    }
    dx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{finite_diff_grad, RngState};
    use crate::model::spec::Activation;

    fn affine_1x1() -> (ModelSpec, ParamVector) {
        let spec = ModelSpec::new(vec![LayerSpec::dense(1, 1, Activation::Identity)], 1).unwrap();
        let p = ParamVector::from_data(&spec.layers, vec![2.0, 1.0]).unwrap();
        (spec, p)
    }

    #[test]
    fn zero_layer_gives_zero() {
        let spec = ModelSpec::new(vec![LayerSpec::dense(3, 2, Activation::Identity)], 1).unwrap();
        let p = ParamVector::zeros(&spec.layers);
        let (y, _) = forward(&spec, &p, Part::Full, &[1.0, -4.0, 9.0]).unwrap();
        assert_eq!(y, vec![0.0, 0.0]);
    }

    #[test]
    fn affine_forward_and_backward() {
        let (spec, p) = affine_1x1();
        let (y, cache) = forward(&spec, &p, Part::Full, &[3.0]).unwrap();
        assert_eq!(y, vec![7.0]);
        let (g, dx) = backward(&spec, &p, &cache, &[1.0], Part::Full).unwrap();
        assert_eq!(g, vec![3.0, 1.0]);
        assert_eq!(dx, vec![2.0]);
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let spec = ModelSpec::default_mlp(4, 3);
        let p = ParamVector::init(&spec.layers, &mut RngState::new(0, 0));
        let (_, cache) = forward(&spec, &p, Part::Full, &[0.1, 0.2, 0.3, 0.4]).unwrap();
        let (g, dx) = backward(&spec, &p, &cache, &[0.0; 3], Part::Full).unwrap();
        assert!(g.iter().chain(&dx).all(|v| *v == 0.0));
    }

    #[test]
    fn split_chain_equals_full() {
        let full_spec = ModelSpec::default_mlp(5, 3);
        let mut rng = RngState::new(9, 0);
        let p_full = ParamVector::init(&full_spec.layers, &mut rng);
        let x: Vec<f64> = (0..5).map(|_| rng.gaussian()).collect();
        let (y_full, _) = forward(&full_spec, &p_full, Part::Full, &x).unwrap();
        for boundary in 0..=4 {
            let spec = ModelSpec::new(full_spec.layers.clone(), boundary).unwrap();
            let n_a = spec.param_count(Part::Agent);
            let pa = ParamVector::from_data(spec.layers_of(Part::Agent), p_full.as_slice()[..n_a].to_vec()).unwrap();
            let ps = ParamVector::from_data(spec.layers_of(Part::Shared), p_full.as_slice()[n_a..].to_vec()).unwrap();
            let (z, _) = forward(&spec, &pa, Part::Agent, &x).unwrap();
            let (y, _) = forward(&spec, &ps, Part::Shared, &z).unwrap();
            assert_eq!(y, y_full, "boundary {boundary}");
        }
    }

    #[test]
    fn stale_cache_is_rejected() {
        let (spec, mut p) = affine_1x1();
        let (_, cache) = forward(&spec, &p, Part::Full, &[3.0]).unwrap();
        p.apply_step(0.1, &[1.0, 1.0]).unwrap();
        assert!(matches!(
            backward(&spec, &p, &cache, &[1.0], Part::Full),
            Err(MopsError::ContractViolation(_))
        ));
    }

    #[test]
    fn dimension_mismatch() {
        let (spec, p) = affine_1x1();
        assert!(matches!(
            forward(&spec, &p, Part::Full, &[1.0, 2.0]),
            Err(MopsError::InvalidArgument(_))
        ));
    }

    #[test]
    fn non_finite_output() {
        let (spec, p) = affine_1x1();
        assert!(matches!(
            forward(&spec, &p, Part::Full, &[f64::INFINITY]),
            Err(MopsError::NumericFailure(_))
        ));
    }

    #[test]
    fn relu_gradient_matches_finite_differences() {
        let spec = ModelSpec::new(
            vec![
                LayerSpec::dense(3, 4, Activation::Relu),
                LayerSpec::dense(4, 2, Activation::Tanh),
            ],
            1,
        )
        .unwrap();
        let mut rng = RngState::new(5, 0);
        let p = ParamVector::init(&spec.layers, &mut rng);
        let x = [0.7, -0.2, 0.4];
        let up = [0.3, -1.1];
        let (_, cache) = forward(&spec, &p, Part::Full, &x).unwrap();
        let (g, dx) = backward(&spec, &p, &cache, &up, Part::Full).unwrap();
        let f = |q: &[f64]| {
            let pv = ParamVector::from_data(&spec.layers, q.to_vec()).unwrap();
            let (y, _) = forward(&spec, &pv, Part::Full, &x).unwrap();
            y.iter().zip(&up).map(|(a, b)| a * b).sum::<f64>()
        };
        let fd = finite_diff_grad(f, p.as_slice(), 1e-6).unwrap();
        for (a, b) in g.iter().zip(&fd) {
            assert!((a - b).abs() <= 1e-6 * (1.0 + b.abs()), "{a} vs {b}");
        }
        let fx = |xi: &[f64]| {
            let (y, _) = forward(&spec, &p, Part::Full, xi).unwrap();
            y.iter().zip(&up).map(|(a, b)| a * b).sum::<f64>()
        };
        let fdx = finite_diff_grad(fx, &x, 1e-6).unwrap();
        for (a, b) in dx.iter().zip(&fdx) {
            assert!((a - b).abs() <= 1e-6 * (1.0 + b.abs()));
        }
    }
}
