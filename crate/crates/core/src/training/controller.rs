use crate::error::{MopsError, Result};
use crate::math::{axpy, dot, project_simplex, WeightSimplex};
use crate::model::{backward_counted, forward_counted, mse_loss_and_grad, MacCounter, ModelSpec, ParamVector, Part};
use crate::protocol::{EmbeddingRecord, GradientRecord, SampleTag};
use crate::tasks::ToyObjectiveSet;

use super::config::Algorithm;

/// The controller-hosted part of the model.
#[derive(Debug, Clone, PartialEq)]
pub enum SharedModel {
    /// Back layers of a partitioned MLP; `spec` is the full model with its boundary.
    /// An empty shared part returns the embedding as the prediction.
    Mlp { spec: ModelSpec, params: ParamVector },
    /// Toy task: the controller owns the 2-vector `w` and agent `i`'s loss is
    /// the noisy quadratic evaluated at the uploaded noise draw.
    Quadratic { set: ToyObjectiveSet, w: Vec<f64> },
}

impl SharedModel {
    pub fn params(&self) -> &[f64] {
        match self {
            SharedModel::Mlp { params, .. } => params.as_slice(),
            SharedModel::Quadratic { w, .. } => w,
        }
    }

    fn embedding_dim(&self) -> usize {
        match self {
            SharedModel::Mlp { spec, .. } => spec.embedding_dim(),
            SharedModel::Quadratic { w, .. } => w.len(),
        }
    }
}

/// Per-sample result of a shared-part evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct SharedEval {
    pub loss: f64,
    pub shared_grad: Vec<f64>,
    pub boundary_grad: Vec<f64>,
}

/// Shared-gradient terms of the dynamic weight update for one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightTerms {
    /// `<g1, g2>` over shared parameters.
    pub shared_dot: f64,
    pub boundary1: Vec<f64>,
    pub boundary2: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ControllerState {
    shared: SharedModel,
    weights: WeightSimplex,
    algorithm: Algorithm,
    beta: f64,
    eta: f64,
    round: u32,
    agents: usize,
    last_losses: Vec<f64>,
    flops: u64,
}

impl ControllerState {
    pub fn new(shared: SharedModel, weights: WeightSimplex, algorithm: Algorithm, beta: f64, eta: f64) -> Result<Self> {
        if let SharedModel::Mlp { spec, params } = &shared {
            spec.validate()?;
            if params.len() != spec.param_count(Part::Shared) {
                return Err(MopsError::invalid("shared parameters do not match the shared part"));
            }
        }
        let agents = weights.len();
        Ok(ControllerState {
            shared,
            weights,
            algorithm,
            beta,
            eta,
            round: 0,
            agents,
            last_losses: Vec::new(),
            flops: 0,
        })
    }

    pub fn shared(&self) -> &SharedModel {
        &self.shared
    }

    pub fn weights(&self) -> &WeightSimplex {
        &self.weights
    }

    pub fn round(&self) -> u32 {
        self.round
    }

    pub fn agents(&self) -> usize {
        self.agents
    }

    pub fn flops(&self) -> u64 {
        self.flops
    }

    /// Per-agent sample losses of the latest shared update, in agent order.
    pub fn last_losses(&self) -> &[f64] {
        &self.last_losses
    }

    /// Loss, shared-parameter gradient and boundary gradient of agent `agent`
    /// on one uploaded pair, at the current shared parameters.
    pub fn evaluate(&mut self, agent: usize, z: &[f64], y: &[f64]) -> Result<SharedEval> {
        if z.len() != self.shared.embedding_dim() {
            return Err(MopsError::contract(format!(
                "agent {agent}: embedding width {} but shared part expects {}",
                z.len(),
                self.shared.embedding_dim()
            )));
        }
        let eval = match &self.shared {
            SharedModel::Mlp { spec, params } => {
                let mut counter = MacCounter::default();
                let (pred, cache) = forward_counted(spec, params, Part::Shared, z, &mut counter)?;
                let (loss, dpred) = mse_loss_and_grad(&pred, y)?;
                let (shared_grad, boundary_grad) =
                    backward_counted(spec, params, &cache, &dpred, Part::Shared, &mut counter)?;
                self.flops += counter.flops;
                SharedEval {
                    loss,
                    shared_grad,
                    boundary_grad,
                }
            }
            SharedModel::Quadratic { set, w } => {
                if agent >= set.agents() {
                    return Err(MopsError::invalid(format!("toy task has no agent {agent}")));
                }
                let (loss, shared_grad) = set.stochastic(agent, w, z);
                SharedEval {
                    loss,
                    shared_grad,
                    boundary_grad: w.iter().map(|v| set.sigma() * v).collect(),
                }
            }
        };
        if !eval.loss.is_finite() {
            return Err(MopsError::numeric(format!("agent {agent}: non-finite loss")));
        }
        Ok(eval)
    }

    /// Step (3): one shared SGD step on the weighted sum of per-agent gradients.
    /// `records` must hold exactly one primary record per agent for the current round.
    pub fn shared_update(&mut self, records: &[EmbeddingRecord]) -> Result<Vec<GradientRecord>> {
        let ordered = self.check_records(records, SampleTag::Primary)?;
        let mut aggregate = vec![0.0; self.shared.params().len()];
        let mut out = Vec::with_capacity(self.agents);
        let mut losses = Vec::with_capacity(self.agents);
        for (i, r) in ordered.into_iter().enumerate() {
            let e = self.evaluate(i, &r.z, &r.y)?;
            axpy(self.weights[i], &e.shared_grad, &mut aggregate);
            losses.push(e.loss);
            out.push(GradientRecord {
                agent_id: r.agent_id,
                round: r.round,
                tag: SampleTag::Primary,
                g_boundary: e.boundary_grad,
            });
        }
        let beta = self.beta;
        match &mut self.shared {
            SharedModel::Mlp { params, .. } => params.apply_step(beta, &aggregate)?,
            SharedModel::Quadratic { w, .. } => axpy(-beta, &aggregate, w),
        }
        if self.shared.params().iter().any(|v| !v.is_finite()) {
            return Err(MopsError::numeric("shared parameters diverged"));
        }
        self.last_losses = losses;
        Ok(out)
    }

    /// Shared-gradient inner products and boundary gradients of each agent's
    /// two extra samples, at the current shared parameters.
    pub fn weight_terms(&mut self, extras: &[EmbeddingRecord]) -> Result<Vec<WeightTerms>> {
        if self.algorithm == Algorithm::Static {
            return Err(MopsError::contract("weight update requested under static weighting"));
        }
        let e1 = self.check_records(extras, SampleTag::Extra1)?;
        let e2 = self.check_records(extras, SampleTag::Extra2)?;
        let mut out = Vec::with_capacity(self.agents);
        for (i, (a, b)) in e1.into_iter().zip(e2).enumerate() {
            let g1 = self.evaluate(i, &a.z, &a.y)?;
            let g2 = self.evaluate(i, &b.z, &b.y)?;
            out.push(WeightTerms {
                shared_dot: dot(&g1.shared_grad, &g2.shared_grad),
                boundary1: g1.boundary_grad,
                boundary2: g2.boundary_grad,
            });
        }
        Ok(out)
    }

    /// `gamma_i <- gamma_i - eta * dots_i`, then projection onto the simplex.
    pub fn apply_weight_update(&mut self, dots: &[f64]) -> Result<&WeightSimplex> {
        if self.algorithm == Algorithm::Static {
            return Err(MopsError::contract("weight update requested under static weighting"));
        }
        if dots.len() != self.agents {
            return Err(MopsError::invalid(format!("{} inner products for {} agents", dots.len(), self.agents)));
        }
        if dots.iter().any(|d| !d.is_finite()) {
            return Err(MopsError::numeric("non-finite gradient inner product in weight update"));
        }
        if self.eta == 0.0 {
            return Ok(&self.weights);
        }
        let raw: Vec<f64> = self
            .weights
            .as_slice()
            .iter()
            .zip(dots)
            .map(|(g, d)| g - self.eta * d)
            .collect();
        self.weights = project_simplex(&raw)?;
        Ok(&self.weights)
    }

    /// Dynamic weight update from shared-parameter gradients only.
    pub fn weight_update(&mut self, extras: &[EmbeddingRecord]) -> Result<&WeightSimplex> {
        let dots: Vec<f64> = self.weight_terms(extras)?.iter().map(|t| t.shared_dot).collect();
        self.apply_weight_update(&dots)
    }

    /// Closes the current round.
    pub fn finish_round(&mut self) {
        self.round += 1;
    }

    /// Shared-part forward on an embedding without touching any state.
    pub fn infer(&self, z: &[f64]) -> Result<Vec<f64>> {
        match &self.shared {
            SharedModel::Mlp { spec, params } => Ok(crate::model::forward(spec, params, Part::Shared, z)
                .map_err(|e| match e {
                    MopsError::InvalidArgument(m) => MopsError::invalid(m),
                    other => other,
                })?
                .0),
            SharedModel::Quadratic { .. } => Err(MopsError::invalid("the toy task has no inference path")),
        }
    }

    fn check_records<'a>(&self, records: &'a [EmbeddingRecord], tag: SampleTag) -> Result<Vec<&'a EmbeddingRecord>> {
        let mut slots: Vec<Option<&EmbeddingRecord>> = vec![None; self.agents];
        for r in records.iter().filter(|r| r.tag == tag) {
            if r.round != self.round {
                return Err(MopsError::BarrierViolation(format!(
                    "record from round {} consumed during round {}",
                    r.round, self.round
                )));
            }
            let i = r.agent_id as usize;
            if i >= self.agents {
                return Err(MopsError::protocol(format!("record from unknown agent {i}")));
            }
            if slots[i].replace(r).is_some() {
                return Err(MopsError::BarrierViolation(format!("duplicate {tag:?} record from agent {i}")));
            }
        }
        slots
            .into_iter()
            .enumerate()
            .map(|(i, s)| {
                s.ok_or_else(|| {
                    MopsError::BarrierViolation(format!("missing {tag:?} record from agent {i} in round {}", self.round))
                })
            })
            .collect()
    }
}
