use serde::{Deserialize, Serialize};

use crate::error::{MopsError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
    Identity,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    /// Derivative evaluated at the pre-activation value.
    pub fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let t = pre.tanh();
                1.0 - t * t
            }
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Dense layer followed by an elementwise activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn dense(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        LayerSpec {
            in_dim,
            out_dim,
            activation,
        }
    }

    pub fn param_count(&self) -> usize {
        self.in_dim * self.out_dim + self.out_dim
    }
}

/// Which contiguous slice of a partitioned model to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Part {
    Agent,
    Shared,
    Full,
}

/// How many layers stay with the agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Every layer is agent-specific; nothing is shared.
    None,
    /// Agent keeps only the input (embedding) layer.
    ShareTop,
    /// Agent keeps the input layer and the first half of the hidden layers.
    ShareDeep,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::None, Scheme::ShareTop, Scheme::ShareDeep];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::None => "none",
            Scheme::ShareTop => "share_top",
            Scheme::ShareDeep => "share_deep",
        }
    }

    /// Number of agent-specific layers for a model with `layers` dense layers.
    pub fn agent_layers(self, layers: usize) -> Result<usize> {
        match self {
            Scheme::None if layers >= 1 => Ok(layers),
            Scheme::ShareTop if layers >= 2 => Ok(1),
            // input layer + output head leave `layers - 2` hidden layers
            Scheme::ShareDeep if layers >= 4 => Ok(1 + (layers - 2) / 2),
            _ => Err(MopsError::invalid(format!(
                "scheme {} needs more than {layers} layers",
                self.name()
            ))),
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = MopsError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Scheme::None),
            "share_top" => Ok(Scheme::ShareTop),
            "share_deep" => Ok(Scheme::ShareDeep),
            other => Err(MopsError::invalid(format!("unknown scheme {other:?}"))),
        }
    }
}

/// Ordered layer list with a boundary: the first `boundary` layers are agent-specific,
/// the rest are hosted by the controller.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub layers: Vec<LayerSpec>,
    pub boundary: usize,
}

impl ModelSpec {
    pub fn new(layers: Vec<LayerSpec>, boundary: usize) -> Result<Self> {
        let spec = ModelSpec { layers, boundary };
        spec.validate()?;
        Ok(spec)
    }

    /// `input -> 32 tanh -> 16 identity -> 32 tanh -> output`, split after the 16-wide layer.
    pub fn default_mlp(input: usize, output: usize) -> Self {
        ModelSpec {
            layers: vec![
                LayerSpec::dense(input, 32, Activation::Tanh),
                LayerSpec::dense(32, 16, Activation::Identity),
                LayerSpec::dense(16, 32, Activation::Tanh),
                LayerSpec::dense(32, output, Activation::Identity),
            ],
            boundary: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(MopsError::invalid("model has no layers"));
        }
        if self.boundary > self.layers.len() {
            return Err(MopsError::invalid(format!(
                "boundary {} exceeds layer count {}",
                self.boundary,
                self.layers.len()
            )));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.in_dim == 0 || l.out_dim == 0 {
                return Err(MopsError::invalid(format!("layer {i} has a zero dimension")));
            }
        }
        for (i, w) in self.layers.windows(2).enumerate() {
            if w[0].out_dim != w[1].in_dim {
                return Err(MopsError::invalid(format!(
                    "layer {i} outputs {} but layer {} expects {}",
                    w[0].out_dim,
                    i + 1,
                    w[1].in_dim
                )));
            }
        }
        Ok(())
    }

    pub fn with_scheme(&self, scheme: Scheme) -> Result<Self> {
        let boundary = scheme.agent_layers(self.layers.len())?;
        ModelSpec::new(self.layers.clone(), boundary)
    }

    pub fn layers_of(&self, part: Part) -> &[LayerSpec] {
        match part {
            Part::Agent => &self.layers[..self.boundary],
            Part::Shared => &self.layers[self.boundary..],
            Part::Full => &self.layers,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(|l| l.out_dim).unwrap_or(0)
    }

    /// Width of the vector crossing the boundary (the E-interface embedding).
    pub fn embedding_dim(&self) -> usize {
        if self.boundary == 0 {
            self.input_dim()
        } else {
            self.layers[self.boundary - 1].out_dim
        }
    }

    /// Input width of a part; an empty part passes its input through unchanged.
    pub fn part_input_dim(&self, part: Part) -> usize {
        match part {
            Part::Agent | Part::Full => self.input_dim(),
            Part::Shared => self.embedding_dim(),
        }
    }

    pub fn part_output_dim(&self, part: Part) -> usize {
        match part {
            Part::Agent => self.embedding_dim(),
            Part::Shared | Part::Full => self.output_dim(),
        }
    }

    pub fn param_count(&self, part: Part) -> usize {
        self.layers_of(part).iter().map(LayerSpec::param_count).sum()
    }
}

/// Splits `spec` according to `scheme` into agent and shared specs.
///
/// The agent spec holds only agent layers (boundary = its layer count); the shared
/// spec holds the remaining layers (boundary = 0). An empty shared part is
/// represented as `None`.
pub fn split_model(spec: &ModelSpec, scheme: Scheme) -> Result<(ModelSpec, Option<ModelSpec>)> {
    spec.validate()?;
    let split = spec.with_scheme(scheme)?;
    let agent_layers = split.layers_of(Part::Agent).to_vec();
    let shared_layers = split.layers_of(Part::Shared).to_vec();
    let n_agent = agent_layers.len();
    let agent = ModelSpec::new(agent_layers, n_agent)?;
    let shared = if shared_layers.is_empty() {
        None
    } else {
        Some(ModelSpec::new(shared_layers, 0)?)
    };
    Ok((agent, shared))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn four_layer() -> ModelSpec {
        ModelSpec::default_mlp(15, 5)
    }

    #[test]
    fn none_keeps_everything_local() {
        let (a, s) = split_model(&four_layer(), Scheme::None).unwrap();
        assert_eq!(a.layers.len(), 4);
        assert!(s.is_none());
    }

    #[test]
    fn share_top_keeps_input_layer() {
        let (a, s) = split_model(&four_layer(), Scheme::ShareTop).unwrap();
        assert_eq!(a.layers.len(), 1);
        assert_eq!(s.unwrap().layers.len(), 3);
    }

    #[test]
    fn share_deep_keeps_half_the_hidden_layers() {
        let (a, s) = split_model(&four_layer(), Scheme::ShareDeep).unwrap();
        assert_eq!(a.layers.len(), 2);
        assert_eq!(a.embedding_dim(), 16);
        assert_eq!(s.unwrap().layers.len(), 2);
    }

    #[test]
    fn parts_concatenate_to_original() {
        let spec = four_layer();
        for scheme in Scheme::ALL {
            let (a, s) = split_model(&spec, scheme).unwrap();
            let mut layers = a.layers.clone();
            let shared_count = s.as_ref().map(|s| s.param_count(Part::Full)).unwrap_or(0);
            if let Some(s) = s {
                layers.extend(s.layers);
            }
            assert_eq!(layers, spec.layers);
            assert_eq!(a.param_count(Part::Full) + shared_count, spec.param_count(Part::Full));
        }
    }

    #[test]
    fn incompatible_schemes() {
        let one = ModelSpec::new(vec![LayerSpec::dense(3, 2, Activation::Tanh)], 1).unwrap();
        assert!(split_model(&one, Scheme::ShareTop).is_err());
        assert!(split_model(&one, Scheme::None).is_ok());
        let three = ModelSpec::new(
            vec![
                LayerSpec::dense(3, 4, Activation::Tanh),
                LayerSpec::dense(4, 4, Activation::Tanh),
                LayerSpec::dense(4, 2, Activation::Identity),
            ],
            1,
        )
        .unwrap();
        assert!(split_model(&three, Scheme::ShareDeep).is_err());
    }

    #[test]
    fn validation() {
        assert!(ModelSpec::new(vec![], 0).is_err());
        let bad = vec![
            LayerSpec::dense(3, 4, Activation::Tanh),
            LayerSpec::dense(5, 2, Activation::Tanh),
        ];
        assert!(ModelSpec::new(bad, 1).is_err());
        let ok = vec![LayerSpec::dense(3, 4, Activation::Tanh)];
        assert!(ModelSpec::new(ok, 2).is_err());
    }

    #[test]
    fn dense_param_count() {
        assert_eq!(LayerSpec::dense(10, 5, Activation::Relu).param_count(), 55);
    }

    #[test]
    fn spec_json_roundtrip() {
        let spec = four_layer();
        let json = serde_json::to_string(&spec).unwrap();
        assert!(json.contains("\"tanh\""));
        assert_eq!(serde_json::from_str::<ModelSpec>(&json).unwrap(), spec);
    }
}
