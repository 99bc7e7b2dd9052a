use crate::error::{MopsError, Result};
use crate::math::{RngState, WeightSimplex};
use crate::metrics::{c_error, g_error, o_error, to_csv_string, MetricsRecord};
use crate::model::{backward, forward, mse_loss_and_grad, ModelSpec, ParamVector, Part};
use crate::protocol::{
    decode, embedding_message_len, encode, gradient_message_len, ControlKind, ControlMessage, Endpoint, LoopbackHub,
    RoundMessage, Transport, CONTROLLER,
};
use crate::tasks::{gen_timeseries, population_sample, Dataset, Task, TimeSeriesTask, ToyObjectiveSet, WINDOW_IN, WINDOW_OUT};

use super::agent::{AgentData, AgentModel, AgentState};
use super::config::{Algorithm, Harness, TrainConfig, WeightGrads};
use super::controller::{ControllerState, SharedModel};

const SAMPLE_STREAM: u64 = 0x100;
const AGENT_INIT_STREAM: u64 = 0x200;
const SHARED_INIT_STREAM: u64 = 0x300;

/// Bytes on the wire per round: every agent uploads `samples` embedding
/// messages and receives one gradient message.
pub fn expected_round_bytes(agents: usize, samples: usize, e: usize, p: usize) -> u64 {
    (agents * (samples * embedding_message_len(e, p) + gradient_message_len(e))) as u64
}

/// Model specification used for time-series tasks under `scheme`.
pub fn timeseries_spec(scheme: crate::model::Scheme) -> Result<ModelSpec> {
    ModelSpec::default_mlp(WINDOW_IN, WINDOW_OUT).with_scheme(scheme)
}

struct AgentActor {
    state: AgentState,
    endpoint: Endpoint,
}

impl AgentActor {
    fn upload(&mut self, round: u32, n_extra: usize) -> Result<()> {
        self.state.local_update(round)?;
        for r in self.state.emit(round, n_extra)? {
            self.endpoint.send(CONTROLLER, encode(&RoundMessage::Embedding(r))?)?;
        }
        Ok(())
    }

    fn download(&mut self) -> Result<()> {
        let (from, bytes) = self.endpoint.recv()?;
        match decode(&bytes)? {
            RoundMessage::Gradient(g) if from == CONTROLLER => self.state.receive(g),
            other => Err(MopsError::protocol(format!(
                "agent {} expected a gradient from the controller, got type {} from {from}",
                self.state.id(),
                other.msg_type()
            ))),
        }
    }

    fn expect_control(&mut self) -> Result<ControlKind> {
        let (_, bytes) = self.endpoint.recv()?;
        match decode(&bytes)? {
            RoundMessage::Control(c) => Ok(c.kind),
            _ => Err(MopsError::protocol("expected a control message")),
        }
    }
}

enum EvalSets {
    Toy,
    TimeSeries { population: Vec<Dataset> },
}

/// Per-agent full-batch gradients over the joint parameter vector
/// `[shared | agent_0 | ... | agent_{n-1}]`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointGradients {
    pub train: Vec<Vec<f64>>,
    pub population: Vec<Vec<f64>>,
    /// Mean training loss per agent.
    pub train_loss: Vec<f64>,
}

/// A configured training session that can be stepped one round at a time.
pub struct Simulation {
    config: TrainConfig,
    agents: Vec<AgentActor>,
    controller: ControllerState,
    ctrl_endpoint: Endpoint,
    hub: LoopbackHub,
    eval: EvalSets,
    byte_base: u64,
    round: u32,
    records: Vec<MetricsRecord>,
}

impl Simulation {
    pub fn new(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let task = config.task.resolve(config.seed)?;
        let n = task.agents();
        let hub = LoopbackHub::new();
        let ctrl_endpoint = hub.register(CONTROLLER)?;
        let weights = config.initial_weights(n);
        let (states, shared, eval) = match &task {
            Task::Toy { set, init } => build_toy(&config, set, *init)?,
            Task::TimeSeries(ts) => build_timeseries(&config, ts)?,
        };
        let controller = ControllerState::new(shared, weights, config.algorithm, config.beta, config.eta)?;
        let mut agents = Vec::with_capacity(n);
        for state in states {
            let endpoint = hub.register(state.id())?;
            agents.push(AgentActor { state, endpoint });
        }
        let mut sim = Simulation {
            config,
            agents,
            controller,
            ctrl_endpoint,
            hub,
            eval,
            byte_base: 0,
            round: 0,
            records: Vec::new(),
        };
        sim.assign()?;
        sim.byte_base = sim.hub.total_bytes();
        Ok(sim)
    }

    fn assign(&mut self) -> Result<()> {
        let (boundary, embedding_dim) = match self.agents[0].state.model() {
            AgentModel::Mlp { spec, .. } => (spec.boundary, spec.embedding_dim()),
            AgentModel::Passthrough { dim } => (0, *dim),
        };
        let kind = ControlKind::Assign {
            scheme: self.config.scheme,
            boundary: boundary as u16,
            embedding_dim: embedding_dim as u32,
        };
        for a in &mut self.agents {
            let msg = RoundMessage::Control(ControlMessage {
                agent_id: a.state.id(),
                round: 0,
                kind,
            });
            self.ctrl_endpoint.send(a.state.id(), encode(&msg)?)?;
            if a.expect_control()? != kind {
                return Err(MopsError::protocol("partition assignment garbled in transit"));
            }
        }
        Ok(())
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn round(&self) -> u32 {
        self.round
    }

    pub fn is_finished(&self) -> bool {
        self.round as usize >= self.config.rounds
    }

    pub fn agents(&self) -> Vec<&AgentState> {
        self.agents.iter().map(|a| &a.state).collect()
    }

    pub fn controller(&self) -> &ControllerState {
        &self.controller
    }

    pub fn records(&self) -> &[MetricsRecord] {
        &self.records
    }

    /// Bytes sent over the E- and G-interfaces so far.
    pub fn bytes(&self) -> u64 {
        self.hub.total_bytes() - self.byte_base
    }

    pub fn bytes_per_round(&self) -> u64 {
        let e = self.controller_embedding_dim();
        let p = match self.agents[0].state.data() {
            AgentData::Windows(d) => d.y[0].len(),
            AgentData::Noise { .. } => 0,
        };
        expected_round_bytes(self.agents.len(), self.config.samples_per_round(), e, p)
    }

    fn controller_embedding_dim(&self) -> usize {
        self.agents[0].state.model().embedding_dim()
    }

    /// Runs one coordination round; errors carry the round index.
    pub fn step(&mut self) -> Result<()> {
        if self.is_finished() {
            return Err(MopsError::contract("all configured rounds have run"));
        }
        let t = self.round;
        self.step_inner(t).map_err(|e| e.at_round(t as usize))
    }

    fn step_inner(&mut self, t: u32) -> Result<()> {
        let dynamic = self.config.algorithm == Algorithm::Dynamic;
        let n_extra = if dynamic { 2 } else { 0 };
        let threaded = self.config.harness == Harness::Threaded;

        // (1) local updates and (2) embedding upload
        if threaded {
            let results: Vec<Result<()>> = std::thread::scope(|s| {
                let handles: Vec<_> = self
                    .agents
                    .iter_mut()
                    .map(|a| s.spawn(move || a.upload(t, n_extra)))
                    .collect();
                handles.into_iter().map(|h| h.join().expect("agent thread panicked")).collect()
            });
            results.into_iter().collect::<Result<()>>()?;
        } else {
            for a in &mut self.agents {
                a.upload(t, n_extra)?;
            }
        }

        // (3) barrier: the controller waits for every expected embedding
        let expected = self.agents.len() * (1 + n_extra);
        let mut records = Vec::with_capacity(expected);
        for _ in 0..expected {
            let (from, bytes) = self.ctrl_endpoint.recv()?;
            match decode(&bytes)? {
                RoundMessage::Embedding(r) if r.agent_id == from => records.push(r),
                other => {
                    return Err(MopsError::protocol(format!(
                        "controller expected an embedding from {from}, got type {} for agent {}",
                        other.msg_type(),
                        other.agent_id()
                    )))
                }
            }
        }
        records.sort_by_key(|r| (r.agent_id, r.tag.code()));

        if dynamic {
            let terms = self.controller.weight_terms(&records)?;
            let mut dots = Vec::with_capacity(terms.len());
            for (a, term) in self.agents.iter_mut().zip(&terms) {
                let mut d = term.shared_dot;
                if self.config.weight_grads == WeightGrads::Full {
                    d += a.state.extra_inner_product(&term.boundary1, &term.boundary2)?;
                }
                dots.push(d);
            }
            self.controller.apply_weight_update(&dots)?;
        }
        let grads = self.controller.shared_update(&records)?;
        for g in grads {
            let to = g.agent_id;
            self.ctrl_endpoint.send(to, encode(&RoundMessage::Gradient(g))?)?;
        }
        self.controller.finish_round();

        // (4) gradient distribution
        if threaded {
            let results: Vec<Result<()>> = std::thread::scope(|s| {
                let handles: Vec<_> = self.agents.iter_mut().map(|a| s.spawn(move || a.download())).collect();
                handles.into_iter().map(|h| h.join().expect("agent thread panicked")).collect()
            });
            results.into_iter().collect::<Result<()>>()?;
        } else {
            for a in &mut self.agents {
                a.download()?;
            }
        }
        self.round += 1;

        let k = self.config.metrics_every;
        if k > 0 && ((t as usize).is_multiple_of(k) || t as usize + 1 == self.config.rounds) {
            let rec = self.measure(t as usize)?;
            self.records.push(rec);
        }
        Ok(())
    }

    /// Runs all remaining rounds.
    pub fn run(&mut self) -> Result<()> {
        while !self.is_finished() {
            self.step()?;
        }
        Ok(())
    }

    pub fn into_trajectory(self) -> Trajectory {
        Trajectory {
            agents: self.agents.len(),
            bytes_per_round: self.bytes_per_round(),
            records: self.records,
        }
    }

    /// Full-batch per-agent gradients at the current parameters.
    pub fn joint_gradients(&self) -> Result<JointGradients> {
        match (&self.eval, self.controller.shared()) {
            (EvalSets::Toy, SharedModel::Quadratic { set, w }) => {
                let train: Vec<Vec<f64>> = (0..set.agents()).map(|i| set.grad(i, w)).collect();
                Ok(JointGradients {
                    population: train.clone(),
                    train_loss: (0..set.agents()).map(|i| set.loss(i, w)).collect(),
                    train,
                })
            }
            (EvalSets::TimeSeries { population }, SharedModel::Mlp { spec, params }) => {
                let n = self.agents.len();
                let agent_len = spec.param_count(Part::Agent);
                let dim = params.len() + n * agent_len;
                let mut out = JointGradients {
                    train: Vec::with_capacity(n),
                    population: Vec::with_capacity(n),
                    train_loss: Vec::with_capacity(n),
                };
                for (i, a) in self.agents.iter().enumerate() {
                    let ap = a.state.model().params().expect("time-series agents are MLPs");
                    let AgentData::Windows(train) = a.state.data() else {
                        unreachable!("time-series agents hold windows")
                    };
                    for (set, is_train) in [(train, true), (&population[i], false)] {
                        let (loss, ga, gs) = full_batch_gradient(spec, ap, params, set)?;
                        let mut joint = vec![0.0; dim];
                        joint[..gs.len()].copy_from_slice(&gs);
                        let off = params.len() + i * agent_len;
                        joint[off..off + agent_len].copy_from_slice(&ga);
                        if is_train {
                            out.train.push(joint);
                            out.train_loss.push(loss);
                        } else {
                            out.population.push(joint);
                        }
                    }
                }
                Ok(out)
            }
            _ => unreachable!("evaluation data always matches the shared model kind"),
        }
    }

    /// Metric snapshot at the current parameters; never mutates the simulation.
    pub fn measure(&self, round: usize) -> Result<MetricsRecord> {
        let grads = self.joint_gradients()?;
        if grads.train.iter().chain(&grads.population).flatten().any(|v| !v.is_finite()) {
            return Err(MopsError::numeric("full-batch gradient overflowed"));
        }
        let w = self.controller.weights();
        let o = o_error(&grads.train, w)?;
        let g = g_error(&grads.train, &grads.population, w)?;
        let c = c_error(&grads.train, w)?;
        let rec = MetricsRecord {
            round,
            o_err: o.joint,
            o_err_agents: o.per_agent,
            g_err: g.joint,
            g_err_agents: g.per_agent,
            c_err: c.value,
            min_norm: c.min_norm,
            gamma: w.as_slice().to_vec(),
            flops_agent: self.agents.iter().map(|a| a.state.flops()).sum(),
            flops_ctrl: self.controller.flops(),
            bytes: self.bytes(),
        };
        rec.validate()?;
        Ok(rec)
    }

    /// Per-agent outputs of the trained split model; no state is mutated.
    pub fn infer(&self, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        collaborative_inference(&self.agents(), &self.controller, inputs)
    }
}

/// Mean loss, agent-part gradient and shared-part gradient over a dataset.
pub fn full_batch_gradient(
    spec: &ModelSpec,
    agent: &ParamVector,
    shared: &ParamVector,
    data: &Dataset,
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let mut ga = vec![0.0; agent.len()];
    let mut gs = vec![0.0; shared.len()];
    let mut loss = 0.0;
    for (x, y) in data.x.iter().zip(&data.y) {
        let (z, ca) = forward(spec, agent, Part::Agent, x)?;
        let (pred, cs) = forward(spec, shared, Part::Shared, &z)?;
        let (l, d) = mse_loss_and_grad(&pred, y)?;
        let (s, gz) = backward(spec, shared, &cs, &d, Part::Shared)?;
        let (a, _) = backward(spec, agent, &ca, &gz, Part::Agent)?;
        loss += l;
        for (acc, v) in gs.iter_mut().zip(&s) {
            *acc += v;
        }
        for (acc, v) in ga.iter_mut().zip(&a) {
            *acc += v;
        }
    }
    let n = data.len() as f64;
    ga.iter_mut().for_each(|v| *v /= n);
    gs.iter_mut().for_each(|v| *v /= n);
    Ok((loss / n, ga, gs))
}

/// Agent-part forward followed by the controller's shared-part forward, per agent.
/// When nothing is shared the output is computed entirely by the agent.
pub fn collaborative_inference(
    agents: &[&AgentState],
    controller: &ControllerState,
    inputs: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>> {
    if inputs.len() != agents.len() {
        return Err(MopsError::invalid(format!(
            "{} inputs for {} agents",
            inputs.len(),
            agents.len()
        )));
    }
    agents
        .iter()
        .zip(inputs)
        .map(|(a, x)| {
            let z = a.infer(x)?;
            match (a.model(), controller.shared()) {
                (AgentModel::Mlp { spec, .. }, _) if spec.boundary == spec.layers.len() => Ok(z),
                _ => controller.infer(&z),
            }
        })
        .collect()
}

/// Metric records of a finished run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub agents: usize,
    pub bytes_per_round: u64,
    pub records: Vec<MetricsRecord>,
}

impl Trajectory {
    pub fn to_csv(&self) -> String {
        to_csv_string(&self.records, self.agents)
    }

    pub fn last(&self) -> Option<&MetricsRecord> {
        self.records.last()
    }

    /// Mean of `f` over records with `round >= from`.
    pub fn average_from(&self, from: usize, f: impl Fn(&MetricsRecord) -> f64) -> f64 {
        let tail: Vec<f64> = self.records.iter().filter(|r| r.round >= from).map(f).collect();
        if tail.is_empty() {
            f64::NAN
        } else {
            tail.iter().sum::<f64>() / tail.len() as f64
        }
    }
}

/// Runs every round of `config` and returns the metric trajectory.
pub fn run_training(config: TrainConfig) -> Result<Trajectory> {
    let mut sim = Simulation::new(config)?;
    sim.run()?;
    Ok(sim.into_trajectory())
}

type Built = (Vec<AgentState>, SharedModel, EvalSets);

fn build_toy(config: &TrainConfig, set: &ToyObjectiveSet, init: [f64; 2]) -> Result<Built> {
    let agents = (0..set.agents())
        .map(|i| {
            AgentState::new(
                i as u16,
                AgentModel::Passthrough { dim: 2 },
                AgentData::Noise { dim: 2 },
                RngState::new(config.seed, SAMPLE_STREAM + i as u64),
                config.beta,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let shared = SharedModel::Quadratic {
        set: set.clone(),
        w: init.to_vec(),
    };
    Ok((agents, shared, EvalSets::Toy))
}

fn build_timeseries(config: &TrainConfig, tasks: &[TimeSeriesTask]) -> Result<Built> {
    if tasks.len() > u16::MAX as usize {
        return Err(MopsError::invalid("too many agents"));
    }
    let spec = timeseries_spec(config.scheme)?;
    let split = ParamVector::zeros(spec.layers_of(Part::Agent)).len();
    let mut agents = Vec::with_capacity(tasks.len());
    let mut population = Vec::new();
    for (i, task) in tasks.iter().enumerate() {
        let full = ParamVector::init(&spec.layers, &mut RngState::new(config.seed, AGENT_INIT_STREAM + i as u64));
        let params = ParamVector::from_data(spec.layers_of(Part::Agent), full.as_slice()[..split].to_vec())?;
        let data = gen_timeseries(task)?;
        if config.metrics_every > 0 {
            let n_pop = ((config.n_pop_factor * data.len() as f64).ceil() as usize).max(1);
            population.push(population_sample(task, n_pop)?);
        }
        agents.push(AgentState::new(
            i as u16,
            AgentModel::Mlp {
                spec: spec.clone(),
                params,
            },
            AgentData::Windows(data),
            RngState::new(config.seed, SAMPLE_STREAM + i as u64),
            config.beta,
        )?);
    }
    let full = ParamVector::init(&spec.layers, &mut RngState::new(config.seed, SHARED_INIT_STREAM));
    let params = ParamVector::from_data(spec.layers_of(Part::Shared), full.as_slice()[split..].to_vec())?;
    Ok((agents, SharedModel::Mlp { spec, params }, EvalSets::TimeSeries { population }))
}

/// Initial weights of `config` resolved against its task.
pub fn initial_weights(config: &TrainConfig) -> Result<WeightSimplex> {
    Ok(config.initial_weights(config.task.resolve(config.seed)?.agents()))
}
