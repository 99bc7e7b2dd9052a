use serde::{Deserialize, Serialize};

use super::spec::{ModelSpec, Part};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Forward,
    Backward,
    Inference,
}

/// Analytic flop count of one pass over a part: a dense layer costs
/// `2 in out` forward and `4 in out` backward (parameter and input gradients).
pub fn flops(spec: &ModelSpec, part: Part, phase: Phase) -> u64 {
    let per_layer = match phase {
        Phase::Forward | Phase::Inference => 2,
        Phase::Backward => 4,
    };
    spec.layers_of(part)
        .iter()
        .map(|l| per_layer * (l.in_dim * l.out_dim) as u64)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::RngState;
    use crate::model::net::{backward_counted, forward_counted, MacCounter};
    use crate::model::params::ParamVector;
    use crate::model::spec::{Activation, LayerSpec, Scheme};

    #[test]
    fn single_layer() {
        let spec = ModelSpec::new(vec![LayerSpec::dense(10, 5, Activation::Tanh)], 1).unwrap();
        assert_eq!(flops(&spec, Part::Full, Phase::Forward), 100);
        assert_eq!(flops(&spec, Part::Full, Phase::Backward), 200);
        assert_eq!(flops(&spec, Part::Full, Phase::Inference), 100);
    }

    #[test]
    fn additive_over_parts() {
        let base = ModelSpec::default_mlp(15, 5);
        for scheme in Scheme::ALL {
            let spec = base.with_scheme(scheme).unwrap();
            for phase in [Phase::Forward, Phase::Backward, Phase::Inference] {
                assert_eq!(
                    flops(&spec, Part::Full, phase),
                    flops(&spec, Part::Agent, phase) + flops(&spec, Part::Shared, phase)
                );
            }
        }
    }

    #[test]
    fn matches_instrumented_counter() {
        let mut rng = RngState::new(77, 0);
        for _ in 0..25 {
            let depth = 1 + rng.index(4);
            let mut dims = vec![1 + rng.index(9)];
            for _ in 0..depth {
                dims.push(1 + rng.index(9));
            }
            let layers: Vec<LayerSpec> = dims
                .windows(2)
                .map(|w| LayerSpec::dense(w[0], w[1], Activation::Tanh))
                .collect();
            let spec = ModelSpec::new(layers, rng.index(depth + 1)).unwrap();
            for part in [Part::Agent, Part::Shared, Part::Full] {
                let p = ParamVector::init(spec.layers_of(part), &mut rng);
                let x: Vec<f64> = (0..spec.part_input_dim(part)).map(|_| rng.gaussian()).collect();
                let mut fwd = MacCounter::default();
                let (y, cache) = forward_counted(&spec, &p, part, &x, &mut fwd).unwrap();
                assert_eq!(fwd.flops, flops(&spec, part, Phase::Forward));
                let mut bwd = MacCounter::default();
                backward_counted(&spec, &p, &cache, &y, part, &mut bwd).unwrap();
                assert_eq!(bwd.flops, flops(&spec, part, Phase::Backward));
            }
        }
    }
}
