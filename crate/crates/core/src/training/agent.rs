use crate::error::{MopsError, Result};
use crate::math::{dot, RngState};
use crate::model::{backward_counted, forward_counted, ForwardCache, MacCounter, ModelSpec, ParamVector, Part};
use crate::protocol::{EmbeddingRecord, GradientRecord, SampleTag};
use crate::tasks::Dataset;

/// The agent-hosted part of an agent's model.
#[derive(Debug, Clone, PartialEq)]
pub enum AgentModel {
    /// Front layers of a partitioned MLP. `spec` is the full model with its boundary.
    Mlp { spec: ModelSpec, params: ParamVector },
    /// Identity map of the given width (toy task: the datum itself is uploaded).
    Passthrough { dim: usize },
}

impl AgentModel {
    pub fn embedding_dim(&self) -> usize {
        match self {
            AgentModel::Mlp { spec, .. } => spec.embedding_dim(),
            AgentModel::Passthrough { dim } => *dim,
        }
    }

    pub fn params(&self) -> Option<&ParamVector> {
        match self {
            AgentModel::Mlp { params, .. } => Some(params),
            AgentModel::Passthrough { .. } => None,
        }
    }
}

/// Where an agent's samples come from.
#[derive(Debug, Clone, PartialEq)]
pub enum AgentData {
    /// Uniform draws with replacement from a fixed training set.
    Windows(Dataset),
    /// Fresh standard gaussian vectors with empty labels.
    Noise { dim: usize },
}

#[derive(Debug, Clone)]
struct Emitted {
    round: u32,
    cache: Option<ForwardCache>,
}

/// One agent's state machine.
#[derive(Debug, Clone)]
pub struct AgentState {
    id: u16,
    model: AgentModel,
    data: AgentData,
    rng: RngState,
    beta: f64,
    seq: u32,
    primary: Option<Emitted>,
    extras: Vec<Emitted>,
    last_boundary: Option<(u32, Vec<f64>)>,
    flops: u64,
}

impl AgentState {
    pub fn new(id: u16, model: AgentModel, data: AgentData, rng: RngState, beta: f64) -> Result<Self> {
        match (&model, &data) {
            (AgentModel::Mlp { spec, params }, AgentData::Windows(d)) => {
                spec.validate()?;
                if params.len() != spec.param_count(Part::Agent) {
                    return Err(MopsError::invalid(format!(
                        "agent {id}: {} parameters for an agent part of {}",
                        params.len(),
                        spec.param_count(Part::Agent)
                    )));
                }
                if d.is_empty() || d.x[0].len() != spec.input_dim() || d.y[0].len() != spec.output_dim() {
                    return Err(MopsError::invalid(format!("agent {id}: dataset does not fit the model")));
                }
            }
            (AgentModel::Passthrough { dim }, AgentData::Noise { dim: n }) if dim == n => {}
            _ => return Err(MopsError::invalid(format!("agent {id}: model and data kinds do not match"))),
        }
        Ok(AgentState {
            id,
            model,
            data,
            rng,
            beta,
            seq: 0,
            primary: None,
            extras: Vec::new(),
            last_boundary: None,
            flops: 0,
        })
    }

    pub fn id(&self) -> u16 {
        self.id
    }

    pub fn model(&self) -> &AgentModel {
        &self.model
    }

    pub fn data(&self) -> &AgentData {
        &self.data
    }

    pub fn rng(&self) -> &RngState {
        &self.rng
    }

    pub fn flops(&self) -> u64 {
        self.flops
    }

    pub fn last_boundary(&self) -> Option<&(u32, Vec<f64>)> {
        self.last_boundary.as_ref()
    }

    /// Step (1): chain the boundary gradient of round `round - 1` through the
    /// cached forward pass of that round's primary sample and take an SGD step.
    /// Skipped at round 0.
    pub fn local_update(&mut self, round: u32) -> Result<()> {
        if round == 0 {
            return Ok(());
        }
        let (grad_round, g) = self.last_boundary.take().ok_or_else(|| {
            MopsError::contract(format!("agent {}: no boundary gradient before round {round}", self.id))
        })?;
        if grad_round + 1 != round {
            return Err(MopsError::contract(format!(
                "agent {}: boundary gradient from round {grad_round} used at round {round}",
                self.id
            )));
        }
        if g.len() != self.model.embedding_dim() {
            return Err(MopsError::contract(format!(
                "agent {}: boundary gradient width {} but embedding width {}",
                self.id,
                g.len(),
                self.model.embedding_dim()
            )));
        }
        let emitted = self.primary.take().ok_or_else(|| {
            MopsError::contract(format!("agent {}: no cached forward pass to update from", self.id))
        })?;
        if emitted.round != grad_round {
            return Err(MopsError::contract(format!(
                "agent {}: cached forward from round {} but gradient from round {grad_round}",
                self.id, emitted.round
            )));
        }
        if let (AgentModel::Mlp { spec, params }, Some(cache)) = (&mut self.model, emitted.cache) {
            let mut counter = MacCounter::default();
            let (grad, _) = backward_counted(spec, params, &cache, &g, Part::Agent, &mut counter)?;
            self.flops += counter.flops;
            params.apply_step(self.beta, &grad)?;
        }
        Ok(())
    }

    /// Step (2): draw `1 + n_extra` fresh samples and return their embeddings.
    pub fn emit(&mut self, round: u32, n_extra: usize) -> Result<Vec<EmbeddingRecord>> {
        let tags: &[SampleTag] = match n_extra {
            0 => &[SampleTag::Primary],
            2 => &[SampleTag::Primary, SampleTag::Extra1, SampleTag::Extra2],
            n => return Err(MopsError::invalid(format!("n_extra must be 0 or 2, got {n}"))),
        };
        self.extras.clear();
        let mut out = Vec::with_capacity(tags.len());
        for &tag in tags {
            let (x, y) = self.draw();
            let (z, cache) = self.embed(&x)?;
            let emitted = Emitted { round, cache };
            if tag == SampleTag::Primary {
                self.primary = Some(emitted);
            } else {
                self.extras.push(emitted);
            }
            out.push(EmbeddingRecord {
                agent_id: self.id,
                round,
                tag,
                seq: self.seq,
                z,
                y,
            });
            self.seq = self.seq.wrapping_add(1);
        }
        Ok(out)
    }

    /// Step (4): store the controller's boundary gradient for the next round.
    pub fn receive(&mut self, g: GradientRecord) -> Result<()> {
        if g.agent_id != self.id || g.tag != SampleTag::Primary {
            return Err(MopsError::protocol(format!(
                "agent {} received a gradient for agent {} tag {:?}",
                self.id, g.agent_id, g.tag
            )));
        }
        match &self.primary {
            Some(e) if e.round == g.round => {}
            _ => {
                return Err(MopsError::contract(format!(
                    "agent {}: gradient for round {} does not answer the pending embedding",
                    self.id, g.round
                )))
            }
        }
        self.last_boundary = Some((g.round, g.g_boundary));
        Ok(())
    }

    /// `<grad_agent l(extra1), grad_agent l(extra2)>` given the controller's boundary
    /// gradients for the two extra samples. Zero for parameter-free agents.
    pub fn extra_inner_product(&mut self, b1: &[f64], b2: &[f64]) -> Result<f64> {
        if self.extras.len() != 2 {
            return Err(MopsError::contract(format!("agent {}: no extra samples were emitted", self.id)));
        }
        let AgentModel::Mlp { spec, params } = &self.model else {
            return Ok(0.0);
        };
        let mut counter = MacCounter::default();
        let mut grads = Vec::with_capacity(2);
        for (e, b) in self.extras.iter().zip([b1, b2]) {
            let cache = e.cache.as_ref().expect("mlp agents cache every forward pass");
            grads.push(backward_counted(spec, params, cache, b, Part::Agent, &mut counter)?.0);
        }
        self.flops += counter.flops;
        Ok(dot(&grads[0], &grads[1]))
    }

    /// Agent-part forward on `x` without touching any state.
    pub fn infer(&self, x: &[f64]) -> Result<Vec<f64>> {
        match &self.model {
            AgentModel::Mlp { spec, params } => Ok(crate::model::forward(spec, params, Part::Agent, x)?.0),
            AgentModel::Passthrough { dim } => {
                if x.len() != *dim {
                    return Err(MopsError::invalid(format!("input has {} entries, expected {dim}", x.len())));
                }
                Ok(x.to_vec())
            }
        }
    }

    fn draw(&mut self) -> (Vec<f64>, Vec<f64>) {
        match &self.data {
            AgentData::Windows(d) => {
                let k = self.rng.index(d.len());
                (d.x[k].clone(), d.y[k].clone())
            }
            AgentData::Noise { dim } => ((0..*dim).map(|_| self.rng.gaussian()).collect(), Vec::new()),
        }
    }

    fn embed(&mut self, x: &[f64]) -> Result<(Vec<f64>, Option<ForwardCache>)> {
        match &self.model {
            AgentModel::Mlp { spec, params } => {
                let mut counter = MacCounter::default();
                let (z, cache) = forward_counted(spec, params, Part::Agent, x, &mut counter)?;
                self.flops += counter.flops;
                Ok((z, Some(cache)))
            }
            AgentModel::Passthrough { .. } => Ok((x.to_vec(), None)),
        }
    }
}
