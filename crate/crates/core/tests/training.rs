use mops_core::math::{Mat, RngState, WeightSimplex};
use mops_core::model::{backward, forward, mse_loss_and_grad, ParamVector, Part};
use mops_core::protocol::{EmbeddingRecord, GradientRecord, SampleTag};
use mops_core::tasks::{Modality, TaskConfig, ToyObjectiveSet};
use mops_core::training::{
    run_training, timeseries_spec, AgentData, AgentModel, AgentState, Algorithm, ControllerState, Harness,
    SharedModel, Simulation, TrainConfig,
};
use mops_core::{MopsError, Scheme};

fn csi(scheme: Scheme, rounds: usize) -> TrainConfig {
    TrainConfig {
        scheme,
        rounds,
        beta: 0.01,
        task: TaskConfig::timeseries(&[Modality::Csi], 60),
        metrics_every: 0,
        ..Default::default()
    }
}

fn agent_params(sim: &Simulation, i: usize) -> Vec<f64> {
    sim.agents()[i].model().params().unwrap().as_slice().to_vec()
}

/// One agent with weight 1 performs plain SGD on the unsplit model.
#[test]
fn single_agent_matches_monolithic_sgd() {
    for scheme in Scheme::ALL {
        let rounds = 25;
        let mut sim = Simulation::new(csi(scheme, rounds)).unwrap();
        let spec = timeseries_spec(scheme).unwrap();
        let mut full = agent_params(&sim, 0);
        full.extend_from_slice(sim.controller().shared().params());
        let mut theta = ParamVector::from_data(&spec.layers, full).unwrap();
        let mut rng = sim.agents()[0].rng().clone();
        let AgentData::Windows(data) = sim.agents()[0].data().clone() else { panic!() };
        sim.run().unwrap();

        let split = spec.param_count(Part::Agent);
        let mut agent_ref = Vec::new();
        for t in 0..rounds {
            if t == rounds - 1 {
                agent_ref = theta.as_slice()[..split].to_vec();
            }
            let k = rng.index(data.len());
            let (pred, cache) = forward(&spec, &theta, Part::Full, &data.x[k]).unwrap();
            let (_, d) = mse_loss_and_grad(&pred, &data.y[k]).unwrap();
            let (g, _) = backward(&spec, &theta, &cache, &d, Part::Full).unwrap();
            theta.apply_step(0.01, &g).unwrap();
        }
        // the agent applies round t's gradient at the start of round t+1
        assert_eq!(agent_params(&sim, 0), agent_ref, "{scheme:?} agent part");
        assert_eq!(sim.controller().shared().params(), &theta.as_slice()[split..], "{scheme:?} shared part");
    }
}

#[test]
fn metrics_do_not_perturb_training() {
    let run = |every: usize| {
        let mut c = csi(Scheme::ShareTop, 30);
        c.algorithm = Algorithm::Dynamic;
        c.metrics_every = every;
        c.n_pop_factor = 1.0;
        let mut sim = Simulation::new(c).unwrap();
        sim.run().unwrap();
        (agent_params(&sim, 0), sim.controller().shared().params().to_vec(), sim.controller().weights().clone())
    };
    assert_eq!(run(0), run(1));
    assert_eq!(run(0), run(7));
}

#[test]
fn static_weights_never_move() {
    let traj = run_training(TrainConfig {
        rounds: 200,
        gamma_init: Some(WeightSimplex::new(vec![0.2, 0.3, 0.5]).unwrap()),
        metrics_every: 1,
        ..Default::default()
    })
    .unwrap();
    assert_eq!(traj.records.len(), 200);
    assert!(traj.records.iter().all(|r| r.gamma == vec![0.2, 0.3, 0.5]));
}

#[test]
fn dynamic_weights_stay_on_simplex() {
    let traj = run_training(TrainConfig {
        algorithm: Algorithm::Dynamic,
        rounds: 300,
        beta: 5e-3,
        eta: 0.5,
        metrics_every: 1,
        ..Default::default()
    })
    .unwrap();
    for r in &traj.records {
        assert!(r.gamma.iter().all(|&g| g >= 0.0));
        assert!((r.gamma.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    assert!(traj.records.iter().any(|r| r.gamma != traj.records[0].gamma));
}

#[test]
fn one_round_gives_one_record() {
    let traj = run_training(TrainConfig { rounds: 1, ..Default::default() }).unwrap();
    assert_eq!(traj.records.len(), 1);
    assert_eq!(traj.to_csv().lines().count(), 2);
}

#[test]
fn metrics_cadence_includes_final_round() {
    let traj = run_training(TrainConfig { rounds: 25, metrics_every: 10, ..Default::default() }).unwrap();
    let rounds: Vec<usize> = traj.records.iter().map(|r| r.round).collect();
    assert_eq!(rounds, vec![0, 10, 20, 24]);
}

#[test]
fn repeated_and_threaded_runs_are_identical() {
    let mut c = csi(Scheme::ShareDeep, 40);
    c.task = TaskConfig::timeseries(&Modality::ALL, 60);
    c.algorithm = Algorithm::Dynamic;
    c.metrics_every = 4;
    c.n_pop_factor = 2.0;
    let a = run_training(c.clone()).unwrap().to_csv();
    let b = run_training(c.clone()).unwrap().to_csv();
    c.harness = Harness::Threaded;
    let t = run_training(c).unwrap().to_csv();
    assert_eq!(a, b);
    assert_eq!(a, t);
}

#[test]
fn seeds_change_the_trajectory() {
    let mut c = csi(Scheme::ShareTop, 20);
    c.metrics_every = 1;
    c.n_pop_factor = 1.0;
    let a = run_training(c.clone()).unwrap().to_csv();
    c.seed = 1;
    assert_ne!(a, run_training(c).unwrap().to_csv());
}

fn toy_controller(algorithm: Algorithm, agents: usize) -> ControllerState {
    let set = ToyObjectiveSet::new(
        vec![[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0]][..agents].to_vec(),
        vec![Mat::identity(2); agents],
        0.0,
    )
    .unwrap();
    ControllerState::new(
        SharedModel::Quadratic { set, w: vec![0.0, 0.0] },
        WeightSimplex::uniform(agents),
        algorithm,
        0.1,
        0.1,
    )
    .unwrap()
}

#[test]
fn hand_set_weight_update() {
    let mut c = toy_controller(Algorithm::Dynamic, 2);
    let w = c.apply_weight_update(&[1.0, 0.0]).unwrap();
    assert!((w[0] - 0.45).abs() < 1e-12 && (w[1] - 0.55).abs() < 1e-12);
}

#[test]
fn equal_inner_products_leave_weights_alone() {
    let mut c = toy_controller(Algorithm::Dynamic, 3);
    let before = c.weights().clone();
    c.apply_weight_update(&[0.7, 0.7, 0.7]).unwrap();
    for i in 0..3 {
        assert!((c.weights()[i] - before[i]).abs() < 1e-15);
    }
}

#[test]
fn static_controller_rejects_weight_updates() {
    let mut c = toy_controller(Algorithm::Static, 2);
    assert!(matches!(c.apply_weight_update(&[1.0, 0.0]), Err(MopsError::ContractViolation(_))));
}

fn toy_record(agent: u16, round: u32, tag: SampleTag) -> EmbeddingRecord {
    EmbeddingRecord { agent_id: agent, round, tag, seq: 0, z: vec![0.1, -0.2], y: vec![] }
}

#[test]
fn shared_update_equals_weighted_gradient_step() {
    let mut c = toy_controller(Algorithm::Static, 2);
    let recs = [toy_record(0, 0, SampleTag::Primary), toy_record(1, 0, SampleTag::Primary)];
    c.shared_update(&recs).unwrap();
    // sigma = 0: grads are 2(w - c_i) = (-2, 0) and (2, 0), which cancel under uniform weights
    assert_eq!(c.shared().params(), &[0.0, 0.0]);
}

#[test]
fn barrier_violations() {
    let mut c = toy_controller(Algorithm::Static, 2);
    let missing = [toy_record(0, 0, SampleTag::Primary)];
    assert!(matches!(c.shared_update(&missing), Err(MopsError::BarrierViolation(_))));
    let duplicate = [toy_record(0, 0, SampleTag::Primary), toy_record(0, 0, SampleTag::Primary)];
    assert!(matches!(c.shared_update(&duplicate), Err(MopsError::BarrierViolation(_))));
    let late = [toy_record(0, 3, SampleTag::Primary), toy_record(1, 3, SampleTag::Primary)];
    assert!(matches!(c.shared_update(&late), Err(MopsError::BarrierViolation(_))));
}

fn mlp_agent() -> AgentState {
    let spec = timeseries_spec(Scheme::ShareTop).unwrap();
    let mut rng = RngState::new(3, 0);
    let params = ParamVector::init(spec.layers_of(Part::Agent), &mut rng);
    let task = TaskConfig::timeseries(&[Modality::Traffic], 40);
    let mops_core::tasks::Task::TimeSeries(ts) = task.resolve(3).unwrap() else { panic!() };
    let data = mops_core::tasks::gen_timeseries(&ts[0]).unwrap();
    AgentState::new(0, AgentModel::Mlp { spec, params }, AgentData::Windows(data), RngState::new(3, 1), 0.01).unwrap()
}

#[test]
fn stale_boundary_gradient_is_rejected() {
    let mut a = mlp_agent();
    a.emit(0, 0).unwrap();
    a.receive(GradientRecord { agent_id: 0, round: 0, tag: SampleTag::Primary, g_boundary: vec![0.0; 16] })
        .unwrap();
    assert!(matches!(a.local_update(2), Err(MopsError::ContractViolation(_))));
}

#[test]
fn gradient_for_unsent_round_is_rejected() {
    let mut a = mlp_agent();
    a.emit(0, 0).unwrap();
    let g = GradientRecord { agent_id: 0, round: 1, tag: SampleTag::Primary, g_boundary: vec![0.0; 16] };
    assert!(matches!(a.receive(g), Err(MopsError::ContractViolation(_))));
    assert!(matches!(a.local_update(1), Err(MopsError::ContractViolation(_))));
}

#[test]
fn emit_counts_and_distinct_extras() {
    let mut a = mlp_agent();
    let one = a.emit(0, 0).unwrap();
    assert_eq!(one.len(), 1);
    let three = a.emit(1, 2).unwrap();
    let tags: Vec<SampleTag> = three.iter().map(|r| r.tag).collect();
    assert_eq!(tags, [SampleTag::Primary, SampleTag::Extra1, SampleTag::Extra2]);
    assert_ne!(three[1].z, three[2].z);
    let seqs: Vec<u32> = three.iter().map(|r| r.seq).collect();
    assert_eq!(seqs, [1, 2, 3]);
    assert!(matches!(a.emit(2, 1), Err(MopsError::InvalidArgument(_))));
}

#[test]
fn inference_leaves_state_untouched() {
    let mut c = csi(Scheme::ShareDeep, 20);
    c.task = TaskConfig::timeseries(&Modality::ALL, 40);
    let mut sim = Simulation::new(c).unwrap();
    sim.run().unwrap();
    let before: Vec<Vec<f64>> = (0..3).map(|i| agent_params(&sim, i)).collect();
    let shared = sim.controller().shared().params().to_vec();
    let inputs: Vec<Vec<f64>> = (0..3).map(|i| (0..15).map(|k| (k as f64 * 0.1 + i as f64).sin()).collect()).collect();
    let out = sim.infer(&inputs).unwrap();
    assert_eq!(out.len(), 3);

    // collaborative inference equals the unsplit forward pass
    let spec = timeseries_spec(Scheme::ShareDeep).unwrap();
    for i in 0..3 {
        let mut full = before[i].clone();
        full.extend_from_slice(&shared);
        let p = ParamVector::from_data(&spec.layers, full).unwrap();
        assert_eq!(forward(&spec, &p, Part::Full, &inputs[i]).unwrap().0, out[i]);
        assert_eq!(agent_params(&sim, i), before[i]);
    }
    assert_eq!(sim.controller().shared().params(), &shared[..]);
}

#[test]
fn numeric_failure_carries_the_round() {
    let mut c = csi(Scheme::ShareTop, 500);
    c.beta = 5.0;
    let err = run_training(c).unwrap_err();
    assert!(matches!(err.root(), MopsError::NumericFailure(_)), "{err}");
    assert!(err.round().is_some());
}
