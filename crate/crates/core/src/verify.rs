//! Acceptance checks, shared by the `mops verify` command and the test suite.
//!
//! Each check regenerates the data it needs from fixed seeds and returns a
//! pass/fail verdict together with the measured quantities.

use std::time::Instant;

use crate::error::{MopsError, Result};
use crate::math::{finite_diff_grad, min_norm_weights, norm, Mat, RngState, WeightSimplex};
use crate::metrics::{dynamic_overhead, fit_constants, fit_rate_slope, RunObservation};
use crate::model::{
    backward, backward_counted, flops, forward, forward_counted, mse_loss_and_grad, Activation, LayerSpec, MacCounter,
    ModelSpec, ParamVector, Part, Phase, Scheme,
};
use crate::protocol::{
    decode, embedding_message_len, encode, gradient_message_len, random_message, EmbeddingRecord, GradientRecord,
    RoundMessage, SampleTag,
};
use crate::tasks::{Modality, TaskConfig, WINDOW_OUT};
use crate::training::{
    run_training, timeseries_spec, Algorithm, ControllerState, Harness, SharedModel, Simulation, TrainConfig,
    Trajectory,
};

/// Start point of the conflict check: close to agent 1's optimum, far from agent 0's.
pub const CONFLICT_TOY_INIT: [f64; 2] = [-0.5, 0.5];
/// Start point of the overhead check; the origin would put the static run at its own stationary point.
pub const OVERHEAD_TOY_INIT: [f64; 2] = [-1.0, 0.0];
/// Step size of the generalization-shape check.
pub const G_SHAPE_BETA: f64 = 0.01;
/// Step size of the sharing check.
pub const SHARING_BETA: f64 = 0.01;

/// Golden encoding of a gradient message: agent 1, round 0, `g = (1.0)`.
pub const GOLDEN_GRADIENT: [u8; 29] = [
    0x4D, 0x4F, 0x50, 0x53, 0x01, 0x02, 0x01, 0x00, 0x00, 0x00, 0x00, 0x00, 0x0D, 0x00, 0x00, 0x00, // header
    0x00, // tag: primary
    0x01, 0x00, 0x00, 0x00, // vector length
    0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0xF0, 0x3F, // 1.0
];

#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    /// Worker threads for independent runs.
    pub threads: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            threads: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
        }
    }
}

pub struct Criterion {
    pub id: u8,
    pub name: &'static str,
    /// Wall-clock budget; exceeding it fails the check.
    pub limit_seconds: Option<f64>,
    run: fn(&VerifyOptions) -> Result<(bool, String)>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct CheckOutcome {
    pub id: u8,
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl CheckOutcome {
    pub fn line(&self) -> String {
        format!(
            "[{}] {:>2} {}: {} ({:.1}s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            self.seconds
        )
    }
}

pub const CRITERIA: [Criterion; 10] = [
    Criterion { id: 1, name: "split-gradient exactness", limit_seconds: Some(10.0), run: split_gradient },
    Criterion { id: 2, name: "min-norm oracle equivalence", limit_seconds: Some(30.0), run: min_norm_oracle },
    Criterion { id: 3, name: "conflict resolution", limit_seconds: Some(60.0), run: conflict_resolution },
    Criterion { id: 4, name: "O-error rate", limit_seconds: Some(300.0), run: o_error_rate },
    Criterion { id: 5, name: "G-error shape", limit_seconds: Some(600.0), run: g_error_shape },
    Criterion { id: 6, name: "dynamic-weighting overhead", limit_seconds: Some(120.0), run: dynamic_overhead_check },
    Criterion { id: 7, name: "partition resource accounting", limit_seconds: None, run: resource_accounting },
    Criterion { id: 8, name: "sharing helps", limit_seconds: None, run: sharing_helps },
    Criterion { id: 9, name: "protocol conformance", limit_seconds: None, run: protocol_conformance },
    Criterion { id: 10, name: "determinism across harnesses", limit_seconds: None, run: determinism },
];

pub fn criterion(id: u8) -> Option<&'static Criterion> {
    CRITERIA.iter().find(|c| c.id == id)
}

pub fn run_criterion(c: &Criterion, opts: &VerifyOptions) -> CheckOutcome {
    let start = Instant::now();
    let result = (c.run)(opts);
    let seconds = start.elapsed().as_secs_f64();
    let (mut passed, mut detail) = match result {
        Ok(v) => v,
        Err(e) => (false, format!("error: {e}")),
    };
    if let Some(limit) = c.limit_seconds {
        if seconds > limit {
            passed = false;
            detail.push_str(&format!("; exceeded the {limit:.0}s budget"));
        }
    }
    CheckOutcome {
        id: c.id,
        name: c.name.to_string(),
        passed,
        detail,
        seconds,
    }
}

pub fn run_all(opts: &VerifyOptions) -> Vec<CheckOutcome> {
    CRITERIA.iter().map(|c| run_criterion(c, opts)).collect()
}

/// Order-preserving parallel map over independent jobs.
pub fn parallel_map<T, R, F>(items: Vec<T>, threads: usize, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync,
{
    let threads = threads.max(1).min(items.len().max(1));
    let jobs = std::sync::Mutex::new(items.into_iter().enumerate());
    let mut out: Vec<(usize, R)> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|_| {
                s.spawn(|| {
                    let mut done = Vec::new();
                    loop {
                        let next = jobs.lock().unwrap().next();
                        match next {
                            Some((i, item)) => done.push((i, f(item))),
                            None => break done,
                        }
                    }
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    });
    out.sort_by_key(|(i, _)| *i);
    out.into_iter().map(|(_, r)| r).collect()
}

fn run_all_configs(configs: Vec<TrainConfig>, opts: &VerifyOptions) -> Result<Vec<Trajectory>> {
    parallel_map(configs, opts.threads, run_training).into_iter().collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn toy_config(algorithm: Algorithm, rounds: usize, beta: f64, seed: u64) -> TrainConfig {
    TrainConfig {
        algorithm,
        rounds,
        beta,
        eta: 0.1,
        seed,
        task: TaskConfig::toy(0.1),
        metrics_every: 1,
        ..Default::default()
    }
}

// 1 ------------------------------------------------------------------------

fn random_spec(rng: &mut RngState) -> ModelSpec {
    let n = 1 + rng.index(4);
    let mut dims = vec![1 + rng.index(6)];
    let mut layers = Vec::with_capacity(n);
    for _ in 0..n {
        let out = 1 + rng.index(6);
        let act = if rng.bernoulli(0.5) { Activation::Tanh } else { Activation::Identity };
        layers.push(LayerSpec::dense(*dims.last().unwrap(), out, act));
        dims.push(out);
    }
    let boundary = rng.index(n + 1);
    ModelSpec::new(layers, boundary).expect("chained dims are consistent")
}

fn gaussian_vec(rng: &mut RngState, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gaussian()).collect()
}

/// Gradient through agent part -> E-interface -> controller -> G-interface -> agent part.
fn chained_gradient(spec: &ModelSpec, full: &[f64], x: &[f64], y: &[f64], round: u32) -> Result<Vec<f64>> {
    let split = spec.param_count(Part::Agent);
    let agent = ParamVector::from_data(spec.layers_of(Part::Agent), full[..split].to_vec())?;
    let shared = ParamVector::from_data(spec.layers_of(Part::Shared), full[split..].to_vec())?;
    let (z, cache) = forward(spec, &agent, Part::Agent, x)?;
    let up = encode(&RoundMessage::Embedding(EmbeddingRecord {
        agent_id: 0,
        round,
        tag: SampleTag::Primary,
        seq: round,
        z,
        y: y.to_vec(),
    }))?;
    let RoundMessage::Embedding(rec) = decode(&up)? else {
        return Err(MopsError::protocol("embedding did not survive the E-interface"));
    };
    let mut ctrl = ControllerState::new(
        SharedModel::Mlp { spec: spec.clone(), params: shared },
        WeightSimplex::uniform(1),
        Algorithm::Static,
        1.0,
        0.0,
    )?;
    let eval = ctrl.evaluate(0, &rec.z, &rec.y)?;
    let down = encode(&RoundMessage::Gradient(GradientRecord {
        agent_id: 0,
        round,
        tag: SampleTag::Primary,
        g_boundary: eval.boundary_grad,
    }))?;
    let RoundMessage::Gradient(g) = decode(&down)? else {
        return Err(MopsError::protocol("gradient did not survive the G-interface"));
    };
    let (mut grad, _) = backward(spec, &agent, &cache, &g.g_boundary, Part::Agent)?;
    grad.extend_from_slice(&eval.shared_grad);
    Ok(grad)
}

fn full_loss(spec: &ModelSpec, theta: &[f64], x: &[f64], y: &[f64]) -> Result<f64> {
    let p = ParamVector::from_data(&spec.layers, theta.to_vec())?;
    let (pred, _) = forward(spec, &p, Part::Full, x)?;
    Ok(mse_loss_and_grad(&pred, y)?.0)
}

fn split_gradient(_: &VerifyOptions) -> Result<(bool, String)> {
    let mut rng = RngState::new(0xC1, 0);
    let cases = 120;
    let mut inexact = 0;
    let mut worst = 0.0f64;
    for case in 0..cases {
        let spec = if case % 2 == 0 {
            ModelSpec::default_mlp(15, WINDOW_OUT).with_scheme(Scheme::ALL[(case / 2) % 3])?
        } else {
            random_spec(&mut rng)
        };
        let theta = ParamVector::init(&spec.layers, &mut rng).as_slice().to_vec();
        let x = gaussian_vec(&mut rng, spec.input_dim());
        let y = gaussian_vec(&mut rng, spec.output_dim());
        let chained = chained_gradient(&spec, &theta, &x, &y, case as u32)?;

        let whole = ParamVector::from_data(&spec.layers, theta.clone())?;
        let (pred, cache) = forward(&spec, &whole, Part::Full, &x)?;
        let (_, d) = mse_loss_and_grad(&pred, &y)?;
        let (mono, _) = backward(&spec, &whole, &cache, &d, Part::Full)?;
        if chained.len() != mono.len() || chained.iter().zip(&mono).any(|(a, b)| a.to_bits() != b.to_bits()) {
            inexact += 1;
        }

        let mut err = None;
        let fd = finite_diff_grad(
            |t| match full_loss(&spec, t, &x, &y) {
                Ok(v) => v,
                Err(e) => {
                    err = Some(e);
                    f64::NAN
                }
            },
            &theta,
            1e-5,
        );
        if let Some(e) = err {
            return Err(e);
        }
        let fd = fd?;
        let diff: Vec<f64> = fd.iter().zip(&chained).map(|(a, b)| a - b).collect();
        let rel = norm(&diff) / norm(&chained).max(1e-12);
        worst = worst.max(rel);
    }
    let passed = inexact == 0 && worst <= 1e-5;
    Ok((
        passed,
        format!("{cases} cases, {inexact} differ from monolithic backprop, worst finite-difference relative error {worst:.2e} (limit 1e-5)"),
    ))
}

// 2 ------------------------------------------------------------------------

fn grid_min_norm(grads: &[Vec<f64>], step: f64) -> (Vec<f64>, f64) {
    let g = Mat::gram(grads).expect("equal dims");
    let k = (1.0 / step).round() as usize;
    let q = |w: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..w.len() {
            for j in 0..w.len() {
                s += w[i] * w[j] * g[(i, j)];
            }
        }
        s.max(0.0)
    };
    let mut best = (Vec::new(), f64::INFINITY);
    match grads.len() {
        2 => {
            for a in 0..=k {
                let w = [a as f64 / k as f64, (k - a) as f64 / k as f64];
                let v = q(&w);
                if v < best.1 {
                    best = (w.to_vec(), v);
                }
            }
        }
        3 => {
            for a in 0..=k {
                for b in 0..=k - a {
                    let w = [a as f64 / k as f64, b as f64 / k as f64, (k - a - b) as f64 / k as f64];
                    let v = q(&w);
                    if v < best.1 {
                        best = (w.to_vec(), v);
                    }
                }
            }
        }
        _ => unreachable!("grid oracle covers 2 and 3 gradients"),
    }
    (best.0, best.1.sqrt())
}

fn min_norm_oracle(_: &VerifyOptions) -> Result<(bool, String)> {
    let mut rng = RngState::new(0xC2, 0);
    let mut worst_norm = 0.0f64;
    let mut worst_w = 0.0f64;
    for case in 0..50 {
        let n = 2 + case % 2;
        let dim = n - 1 + rng.index(5 - (n - 1));
        let grads: Vec<Vec<f64>> = (0..n).map(|_| gaussian_vec(&mut rng, dim)).collect();
        let (w, nrm) = min_norm_weights(&grads)?;
        let (gw, gn) = grid_min_norm(&grads, 1e-3);
        worst_norm = worst_norm.max((nrm - gn).abs());
        let dw: Vec<f64> = w.as_slice().iter().zip(&gw).map(|(a, b)| a - b).collect();
        worst_w = worst_w.max(norm(&dw));
    }
    Ok((
        worst_norm <= 1e-3,
        format!("50 sets, worst |norm - grid| {worst_norm:.2e} (limit 1e-3); worst ||w - w_grid|| {worst_w:.2e}"),
    ))
}

// 3 ------------------------------------------------------------------------

fn conflict_resolution(opts: &VerifyOptions) -> Result<(bool, String)> {
    let seeds = 0..5u64;
    let mut configs = Vec::new();
    for algorithm in [Algorithm::Static, Algorithm::Dynamic] {
        for seed in seeds.clone() {
            let mut c = toy_config(algorithm, 1000, 5e-4, seed);
            c.gamma_init = Some(WeightSimplex::vertex(3, 0));
            c.task.toy_init = Some(CONFLICT_TOY_INIT);
            configs.push(c);
        }
    }
    let runs = run_all_configs(configs, opts)?;
    let tail: Vec<f64> = runs.iter().map(|r| r.average_from(800, |m| m.c_err)).collect();
    let (st, dy) = tail.split_at(seeds.count());
    let (s, d) = (mean(st), mean(dy));
    let reduction = 1.0 - d / s;
    Ok((
        s >= 0.5 && reduction >= 0.5,
        format!("C-error over rounds 800-999: static {s:.4} (need >= 0.5), dynamic {d:.4}, reduction {:.1}% (need >= 50%)", 100.0 * reduction),
    ))
}

// 4 ------------------------------------------------------------------------

fn o_error_rate(opts: &VerifyOptions) -> Result<(bool, String)> {
    let ts = [250usize, 500, 1000, 2000, 4000];
    let seeds = 10u64;
    let configs: Vec<TrainConfig> = ts
        .iter()
        .flat_map(|&t| {
            (0..seeds).map(move |seed| toy_config(Algorithm::Static, t, 0.5 / (t as f64).sqrt(), seed))
        })
        .collect();
    let runs = run_all_configs(configs, opts)?;
    let avg: Vec<f64> = runs.iter().map(|r| r.average_from(0, |m| m.o_err)).collect();
    let series: Vec<(f64, f64)> = ts
        .iter()
        .enumerate()
        .map(|(k, &t)| (t as f64, mean(&avg[k * seeds as usize..(k + 1) * seeds as usize])))
        .collect();
    let slope = fit_rate_slope(&series)?;
    Ok((
        (-0.45..=-0.10).contains(&slope),
        format!("fitted slope {slope:.4} (need within [-0.45, -0.10])"),
    ))
}

// 5 ------------------------------------------------------------------------

/// Spearman rank correlation; ties get average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for k in i..=j {
                r[idx[k]] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let (mx, my) = (mean(&rx), mean(&ry));
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return 0.0;
    }
    cov / (vx * vy).sqrt()
}

fn g_error_shape(opts: &VerifyOptions) -> Result<(bool, String)> {
    let seeds = 10u64;
    let grid: [(usize, usize); 6] = [(100, 500), (300, 500), (1000, 500), (500, 200), (500, 800), (500, 3200)];
    let mut configs = Vec::new();
    for &(t, d) in &grid {
        for seed in 0..seeds {
            configs.push(TrainConfig {
                rounds: t,
                beta: G_SHAPE_BETA,
                seed,
                task: TaskConfig::timeseries(&[Modality::Csi], d),
                metrics_every: 10,
                n_pop_factor: 10.0,
                ..Default::default()
            });
        }
    }
    let runs = run_all_configs(configs, opts)?;
    let g: Vec<f64> = runs.iter().map(|r| r.average_from(0, |m| m.g_err)).collect();
    let s = seeds as usize;
    let at = |k: usize, seed: usize| g[k * s + seed];
    // rank correlation over all (setting, seed) runs
    let rho = |ks: [usize; 3], xs: [f64; 3]| {
        let (x, y): (Vec<f64>, Vec<f64>) =
            ks.iter().zip(xs).flat_map(|(&k, x)| (0..s).map(move |seed| (x, at(k, seed)))).unzip();
        spearman(&x, &y)
    };
    let per_seed = |ks: [usize; 3], xs: [f64; 3]| {
        mean(&(0..s).map(|seed| spearman(&xs, &ks.map(|k| at(k, seed)))).collect::<Vec<_>>())
    };
    let rho_t = rho([0, 1, 2], [100.0, 300.0, 1000.0]);
    let rho_d = rho([3, 4, 5], [200.0, 800.0, 3200.0]);
    let seed_t = per_seed([0, 1, 2], [100.0, 300.0, 1000.0]);
    let seed_d = per_seed([3, 4, 5], [200.0, 800.0, 3200.0]);
    let means: Vec<f64> = (0..grid.len()).map(|k| mean(&g[k * s..(k + 1) * s])).collect();
    let ratios: Vec<f64> = grid
        .iter()
        .zip(&means)
        .map(|(&(t, d), m)| m / (t as f64 / d as f64).sqrt())
        .collect();
    let spread = ratios.iter().cloned().fold(f64::MIN, f64::max) / ratios.iter().cloned().fold(f64::MAX, f64::min);
    let passed = rho_t >= 0.8 && rho_d <= -0.8 && spread < 3.0;
    Ok((
        passed,
        format!(
            "Spearman over {} runs: (T, G) {rho_t:.2} (need >= 0.8), (D, G) {rho_d:.2} (need <= -0.8); \
             per-seed mean (T, G) {seed_t:.2}, (D, G) {seed_d:.2}; \
             G/sqrt(T/D) spread {spread:.2}x (need < 3); mean G over (T,D) grid {:?}",
            3 * s,
            means.iter().map(|m| format!("{m:.4}")).collect::<Vec<_>>()
        ),
    ))
}

// 6 ------------------------------------------------------------------------

fn dynamic_overhead_check(opts: &VerifyOptions) -> Result<(bool, String)> {
    let settings: [(usize, f64); 4] = [(500, 1e-3), (1000, 5e-4), (2000, 2e-3), (1000, 5e-3)];
    let etas = [0.02, 0.1, 0.5];
    let seeds = 3u64;
    let mut keys = Vec::new();
    for &(t, beta) in &settings {
        keys.push((t, beta, Algorithm::Static, 0.0));
        for &eta in &etas {
            keys.push((t, beta, Algorithm::Dynamic, eta));
        }
    }
    let configs: Vec<TrainConfig> = keys
        .iter()
        .flat_map(|&(t, beta, algorithm, eta)| {
            (0..seeds).map(move |seed| {
                let mut c = toy_config(algorithm, t, beta, seed);
                c.eta = eta;
                c.task.toy_init = Some(OVERHEAD_TOY_INIT);
                c
            })
        })
        .collect();
    let runs = run_all_configs(configs, opts)?;
    let s = seeds as usize;
    let run_mean = |k: usize, f: fn(&crate::metrics::MetricsRecord) -> f64| {
        mean(&runs[k * s..(k + 1) * s].iter().map(|r| r.average_from(0, f)).collect::<Vec<_>>())
    };
    let avg: Vec<f64> = (0..keys.len()).map(|k| run_mean(k, |m| m.o_err)).collect();
    let avg_c: Vec<f64> = (0..keys.len()).map(|k| run_mean(k, |m| m.c_err)).collect();
    let obs: Vec<RunObservation> = keys
        .iter()
        .enumerate()
        .map(|(k, &(t, beta, algorithm, eta))| RunObservation {
            dynamic: algorithm == Algorithm::Dynamic,
            t: t as f64,
            beta,
            eta,
            d: 1.0,
            o_err: Some(avg[k]),
            g_err: None,
            c_err: (algorithm == Algorithm::Dynamic).then_some(avg_c[k]),
        })
        .collect();
    let fit = fit_constants(&obs)?;
    let mu_l_o = fit.constants.mu_l;
    let mu_l = fit.mu_l_from_c.unwrap_or(mu_l_o);
    let eta = 0.1;
    let term = dynamic_overhead(mu_l, eta);
    let lookup = |t: usize, b: f64, alg: Algorithm, e: f64| {
        keys.iter()
            .position(|&k| k == (t, b, alg, e))
            .map(|k| avg[k])
            .expect("matched setting is in the sweep")
    };
    let mut worst = f64::MIN;
    let mut rows = Vec::new();
    for &(t, beta) in &settings {
        let st = lookup(t, beta, Algorithm::Static, 0.0);
        let dy = lookup(t, beta, Algorithm::Dynamic, eta);
        worst = worst.max(dy - st);
        rows.push(format!("T={t} beta={beta}: {st:.4} vs {dy:.4}"));
    }
    Ok((
        worst <= 2.0 * term,
        format!(
            "static vs dynamic O-error at eta=0.1 ({}); largest excess {worst:.4}; \
             fitted mu_l {mu_l:.4} from the C fit ({mu_l_o:.4} from the O fit), 3 sqrt(eta mu_l^4/2) = {term:.4} (need excess <= {:.4})",
            rows.join(", "),
            2.0 * term
        ),
    ))
}

// 7 ------------------------------------------------------------------------

fn resource_accounting(_: &VerifyOptions) -> Result<(bool, String)> {
    let mut rng = RngState::new(0xC7, 0);
    let mut per_agent = Vec::new();
    let mut counters_match = true;
    let mut ratios = Vec::new();
    for scheme in [Scheme::ShareTop, Scheme::ShareDeep, Scheme::None] {
        let spec = timeseries_spec(scheme)?;
        let train = flops(&spec, Part::Agent, Phase::Forward) + flops(&spec, Part::Agent, Phase::Backward);
        per_agent.push(train);

        let full = ParamVector::init(&spec.layers, &mut rng);
        let split = spec.param_count(Part::Agent);
        let agent = ParamVector::from_data(spec.layers_of(Part::Agent), full.as_slice()[..split].to_vec())?;
        let x = gaussian_vec(&mut rng, spec.input_dim());
        let mut c = MacCounter::default();
        let (z, cache) = forward_counted(&spec, &agent, Part::Agent, &x, &mut c)?;
        let fwd = c.flops;
        backward_counted(&spec, &agent, &cache, &z, Part::Agent, &mut c)?;
        counters_match &= fwd == flops(&spec, Part::Agent, Phase::Forward) && c.flops == train;

        let mut cf = MacCounter::default();
        let (out, fcache) = forward_counted(&spec, &full, Part::Full, &x, &mut cf)?;
        let inference = cf.flops;
        counters_match &= inference == flops(&spec, Part::Full, Phase::Inference);
        backward_counted(&spec, &full, &fcache, &out, Part::Full, &mut cf)?;
        let per_round = cf.flops;
        ratios.push((scheme, inference, per_round));

        // the simulator's cumulative agent counter follows the same accounting
        let mut sim = Simulation::new(TrainConfig {
            scheme,
            rounds: 3,
            task: TaskConfig::timeseries(&[Modality::Traffic], 40),
            metrics_every: 0,
            ..Default::default()
        })?;
        sim.run()?;
        let expect = 3 * flops(&spec, Part::Agent, Phase::Forward) + 2 * flops(&spec, Part::Agent, Phase::Backward);
        counters_match &= sim.agents()[0].flops() == expect;
    }
    let ordered = per_agent[0] < per_agent[1] && per_agent[1] < per_agent[2];
    let inference_below = ratios.iter().all(|&(_, inf, tr)| inf < tr);
    let pct: Vec<String> = ratios
        .iter()
        .map(|(s, inf, tr)| format!("{} {:.1}%", s.name(), 100.0 * *inf as f64 / *tr as f64))
        .collect();
    Ok((
        ordered && counters_match && inference_below,
        format!(
            "agent training flops/round share_top {} < share_deep {} < none {}: {ordered}; \
             instrumented counters match: {counters_match}; inference/training per agent: {}",
            per_agent[0],
            per_agent[1],
            per_agent[2],
            pct.join(", ")
        ),
    ))
}

// 8 ------------------------------------------------------------------------

/// One-sided sign-test p-value of observing at least `wins` successes in `n` fair trials.
pub fn sign_test_p(wins: usize, n: usize) -> f64 {
    let mut c = 1.0f64;
    let mut tail = 0.0;
    for k in 0..=n {
        if k > 0 {
            c = c * (n - k + 1) as f64 / k as f64;
        }
        if k >= wins {
            tail += c;
        }
    }
    tail / 2f64.powi(n as i32)
}

fn sharing_helps(opts: &VerifyOptions) -> Result<(bool, String)> {
    let seeds = 10u64;
    let schemes = [Scheme::ShareTop, Scheme::None];
    let mut configs = Vec::new();
    for scheme in schemes {
        for seed in 0..seeds {
            configs.push(TrainConfig {
                scheme,
                rounds: 1000,
                beta: SHARING_BETA,
                seed,
                task: TaskConfig::timeseries(&Modality::ALL, 500),
                metrics_every: 1000,
                n_pop_factor: 1.0,
                ..Default::default()
            });
        }
    }
    let runs = run_all_configs(configs, opts)?;
    let final_o: Vec<f64> = runs
        .iter()
        .map(|r| mean(&r.last().expect("final round is measured").o_err_agents))
        .collect();
    let (top, none) = final_o.split_at(seeds as usize);
    let wins = top.iter().zip(none).filter(|(a, b)| a < b).count();
    let p = sign_test_p(wins, seeds as usize);
    let improvement = 1.0 - mean(top) / mean(none);
    Ok((
        improvement > 0.0 && p < 0.1,
        format!(
            "mean per-agent final O-error share_top {:.4} vs none {:.4} ({:+.1}%), share_top lower in {wins}/{seeds} seeds, sign-test p {p:.3} (need improvement > 0, p < 0.1)",
            mean(top),
            mean(none),
            100.0 * improvement
        ),
    ))
}

// 9 ------------------------------------------------------------------------

fn protocol_conformance(_: &VerifyOptions) -> Result<(bool, String)> {
    let golden = encode(&RoundMessage::Gradient(GradientRecord {
        agent_id: 1,
        round: 0,
        tag: SampleTag::Primary,
        g_boundary: vec![1.0],
    }))?;
    let golden_ok = golden == GOLDEN_GRADIENT && decode(&GOLDEN_GRADIENT)? == decode(&golden)?;

    let mut rng = RngState::new(0xC9, 0);
    let mut roundtrip_failures = 0;
    for _ in 0..10_000 {
        let m = random_message(&mut rng);
        if decode(&encode(&m)?)? != m {
            roundtrip_failures += 1;
        }
    }

    let mut byte_failures = Vec::new();
    let cases = [
        (TaskConfig::toy(0.1), Scheme::ShareTop, 3, 2, 0),
        (TaskConfig::timeseries(&Modality::ALL, 40), Scheme::ShareTop, 3, 32, WINDOW_OUT),
        (TaskConfig::timeseries(&Modality::ALL, 40), Scheme::ShareDeep, 3, 16, WINDOW_OUT),
        (TaskConfig::timeseries(&[Modality::Csi], 40), Scheme::None, 1, WINDOW_OUT, WINDOW_OUT),
    ];
    for (task, scheme, n, e, p) in cases {
        for algorithm in [Algorithm::Static, Algorithm::Dynamic] {
            let k = if algorithm == Algorithm::Static { 1 } else { 3 };
            let expect = (n * (k * embedding_message_len(e, p) + gradient_message_len(e))) as u64;
            let traj = run_training(TrainConfig {
                algorithm,
                scheme,
                rounds: 4,
                task: task.clone(),
                metrics_every: 1,
                n_pop_factor: 1.0,
                ..Default::default()
            })?;
            let bytes: Vec<u64> = traj.records.iter().map(|r| r.bytes).collect();
            let ok = bytes.iter().enumerate().all(|(i, b)| *b == (i as u64 + 1) * expect)
                && traj.bytes_per_round == expect;
            if !ok {
                byte_failures.push(format!("{:?}/{}/{algorithm:?}: {bytes:?} vs {expect}/round", task.modality, scheme.name()));
            }
        }
    }
    Ok((
        golden_ok && roundtrip_failures == 0 && byte_failures.is_empty(),
        format!(
            "golden gradient bytes match: {golden_ok}; 10000 fuzzed round trips, {roundtrip_failures} failures; \
             per-round byte counts off in {} of 8 configurations{}",
            byte_failures.len(),
            if byte_failures.is_empty() { String::new() } else { format!(" ({})", byte_failures.join("; ")) }
        ),
    ))
}

// 10 -----------------------------------------------------------------------

fn determinism(_: &VerifyOptions) -> Result<(bool, String)> {
    let configs = [
        TrainConfig {
            algorithm: Algorithm::Dynamic,
            rounds: 60,
            beta: 0.01,
            seed: 11,
            task: TaskConfig::timeseries(&Modality::ALL, 60),
            metrics_every: 5,
            n_pop_factor: 2.0,
            ..Default::default()
        },
        TrainConfig {
            algorithm: Algorithm::Static,
            scheme: Scheme::ShareDeep,
            rounds: 40,
            beta: 0.01,
            seed: 12,
            task: TaskConfig::timeseries(&[Modality::Demand, Modality::Csi], 60),
            metrics_every: 3,
            n_pop_factor: 2.0,
            ..Default::default()
        },
        toy_config(Algorithm::Dynamic, 300, 5e-3, 13),
    ];
    let mut identical = 0;
    for cfg in &configs {
        let csv = |h: Harness| -> Result<String> {
            let mut c = cfg.clone();
            c.harness = h;
            Ok(run_training(c)?.to_csv())
        };
        let single = csv(Harness::Single)?;
        let threaded = csv(Harness::Threaded)?;
        let again = csv(Harness::Single)?;
        if single == threaded && single == again {
            identical += 1;
        }
    }
    Ok((
        identical == configs.len(),
        format!(
            "{identical}/{} configurations give byte-identical metrics CSVs across single-threaded, threaded and repeated runs",
            configs.len()
        ),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spearman_basics() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[0.1, 0.5, 0.9]), 1.0);
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), -1.0);
        assert!((spearman(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn sign_test_values() {
        assert!((sign_test_p(10, 10) - 1.0 / 1024.0).abs() < 1e-15);
        assert!((sign_test_p(8, 10) - 56.0 / 1024.0).abs() < 1e-15);
        assert_eq!(sign_test_p(0, 10), 1.0);
    }

    #[test]
    fn parallel_map_keeps_order() {
        let v = parallel_map((0..50).collect(), 4, |x: i32| x * x);
        assert_eq!(v, (0..50).map(|x| x * x).collect::<Vec<_>>());
    }

    #[test]
    fn criteria_ids_are_unique_and_complete() {
        let ids: Vec<u8> = CRITERIA.iter().map(|c| c.id).collect();
        assert_eq!(ids, (1..=10).collect::<Vec<_>>());
    }
}
