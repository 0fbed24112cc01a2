//! Measurement harnesses for the correctness properties of the core: gradient
//! agreement with finite differences, mixer monotonicity, message audits over
//! pipes and queues, snapshot integrity under contention, shutdown under
//! random timing, hidden-state isolation and replay statistics.
//!
//! Each harness reports what it measured and leaves the verdict to the
//! caller, so the same code backs the integration tests and the acceptance
//! suite.

use std::sync::mpsc;
use std::thread;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::envsim::EnvSpec;
use crate::episode::{EpisodeRecord, EpisodeShape};
use crate::nets::loss::{batch_targets, loss_and_grad, masked_td_loss};
use crate::nets::{Execution, Layout, MixerKind, Model};
use crate::paramstore::SharedParamPool;
use crate::pipes::{obs_act_pipe, sample_queue, ActionReply, ObsRequest, PipeError, PipeSet, Poll};
use crate::replay::{ReplayPool, TrainingBatch};
use crate::runtime::{DecisionEngine, EpsilonSchedule, RuntimeError};

/// Small but non-degenerate dimensions for numeric checks.
pub fn check_layout(mixer: MixerKind) -> Layout {
    Layout { n_agents: 3, n_actions: 4, obs_dim: 5, state_dim: 6, hidden: 8, mixer, embed: 4 }
}

fn shape_of(layout: &Layout, episode_limit: usize) -> EpisodeShape {
    EpisodeShape {
        n_agents: layout.n_agents,
        n_actions: layout.n_actions,
        obs_dim: layout.obs_dim,
        state_dim: layout.state_dim,
        episode_limit,
    }
}

/// Random observations, states, availability masks, rewards and actions drawn
/// among the available ones.
pub fn random_episode<R: Rng + ?Sized>(shape: &EpisodeShape, len: usize, terminated: bool, rng: &mut R) -> EpisodeRecord {
    let spec = EnvSpec::new(shape.n_agents, shape.n_actions, shape.state_dim, shape.obs_dim, shape.episode_limit.max(len));
    let mut rec = EpisodeRecord::new(0, 0, &spec);
    for t in 0..=len {
        let obs: Vec<Vec<f64>> = (0..shape.n_agents)
            .map(|_| (0..shape.obs_dim).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let state: Vec<f64> = (0..shape.state_dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let avail: Vec<Vec<bool>> = (0..shape.n_agents)
            .map(|_| {
                let mut row: Vec<bool> = (0..shape.n_actions).map(|_| rng.random_bool(0.7)).collect();
                if !row.contains(&true) {
                    row[rng.random_range(0..shape.n_actions)] = true;
                }
                row
            })
            .collect();
        rec.push_observation(&obs, &state, &avail);
        if t < len {
            let joint: Vec<usize> = avail
                .iter()
                .map(|row| {
                    let ok: Vec<usize> = (0..row.len()).filter(|&a| row[a]).collect();
                    ok[rng.random_range(0..ok.len())]
                })
                .collect();
            rec.push_transition(&joint, rng.random_range(-1.0..1.0));
        }
    }
    rec.terminated = terminated;
    rec
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckConfig {
    pub mixer: MixerKind,
    pub episode_len: usize,
    pub batch: usize,
    pub coords_per_tensor: usize,
    pub h: f64,
    /// Lower bound on the denominator of the relative error, so coordinates
    /// whose true gradient is zero are compared absolutely.
    pub floor: f64,
    pub seed: u64,
}

impl GradCheckConfig {
    pub fn new(mixer: MixerKind, episode_len: usize, seed: u64) -> Self {
        Self { mixer, episode_len, batch: 3, coords_per_tensor: 20, h: 1e-5, floor: 1e-6, seed }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoordCheck {
    pub tensor: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_err: f64,
}

pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compares the analytic gradient of the masked TD loss against central
/// differences on randomly chosen coordinates of every tensor (all of them
/// when a tensor is smaller than `coords_per_tensor`). Targets come from a
/// separately initialised target model and are held fixed.
pub fn gradient_check(cfg: &GradCheckConfig) -> Vec<CoordCheck> {
    let layout = check_layout(cfg.mixer);
    let shape = shape_of(&layout, cfg.episode_len.max(1));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let model = Model::init(layout, cfg.seed);
    let target = Model::init(layout, cfg.seed ^ 0xfeed);
    let episodes: Vec<EpisodeRecord> =
        (0..cfg.batch).map(|b| random_episode(&shape, cfg.episode_len, b % 2 == 0, &mut rng)).collect();
    let views: Vec<_> = episodes.iter().map(|e| e.view()).collect();
    let targets = batch_targets(&target, &views, 0.99, Execution::Sequential);
    let (_, grad) = loss_and_grad(&model, &views, &targets, Execution::Sequential);

    let flat = model.flatten();
    let gflat = grad.flatten();
    let loss_at = |params: &[f64]| {
        let m = Model::unflatten(layout, params).expect("same layout");
        masked_td_loss(&m, &views, &targets, Execution::Sequential)
    };
    let mut out = Vec::new();
    let mut offset = 0;
    for (name, tensor) in model.tensors() {
        let n = tensor.len();
        let picks: Vec<usize> = if n <= cfg.coords_per_tensor {
            (0..n).collect()
        } else {
            rand::seq::index::sample(&mut rng, n, cfg.coords_per_tensor).into_vec()
        };
        for i in picks {
            let mut p = flat.clone();
            p[offset + i] = flat[offset + i] + cfg.h;
            let up = loss_at(&p);
            p[offset + i] = flat[offset + i] - cfg.h;
            let down = loss_at(&p);
            let numeric = (up - down) / (2.0 * cfg.h);
            let analytic = gflat[offset + i];
            out.push(CoordCheck {
                tensor: name.clone(),
                index: i,
                analytic,
                numeric,
                rel_err: relative_error(analytic, numeric, cfg.floor),
            });
        }
        offset += n;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonotonicityReport {
    pub draws: usize,
    /// Smallest central-difference estimate of dQ_total/dq_i seen.
    pub min_partial: f64,
    /// Smallest change of Q_total when one agent value grows by 1.
    pub min_unit_increase: f64,
}

/// Random monotonic mixers (dimensions, hypernetwork weights, agent values
/// and states all drawn per trial) probed one agent value at a time.
pub fn mono_mixer_monotonicity(draws: usize, seed: u64) -> MonotonicityReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-3;
    let mut report = MonotonicityReport { draws, min_partial: f64::INFINITY, min_unit_increase: f64::INFINITY };
    for _ in 0..draws {
        let layout = Layout {
            n_agents: rng.random_range(2..=6),
            n_actions: 2,
            obs_dim: 1,
            state_dim: rng.random_range(1..=8),
            hidden: 1,
            mixer: MixerKind::Mono,
            embed: rng.random_range(1..=8),
        };
        let mut flat = Model::zeros(layout).flatten();
        let scale = rng.random_range(0.1..3.0);
        for w in &mut flat[layout.agent_param_count()..] {
            *w = rng.random_range(-scale..scale);
        }
        let model = Model::unflatten(layout, &flat).expect("same layout");
        let state: Vec<f64> = (0..layout.state_dim).map(|_| rng.random_range(-2.0..2.0)).collect();
        let q: Vec<f64> = (0..layout.n_agents).map(|_| rng.random_range(-10.0..10.0)).collect();
        let mix = |q: &[f64]| model.mixer.forward(q, &state).expect("dimensions match");
        let base = mix(&q);
        for i in 0..layout.n_agents {
            let mut p = q.clone();
            p[i] = q[i] + h;
            let up = mix(&p);
            p[i] = q[i] - h;
            let down = mix(&p);
            p[i] = q[i] + 1.0;
            let unit = mix(&p);
            report.min_partial = report.min_partial.min((up - down) / (2.0 * h));
            report.min_unit_increase = report.min_unit_increase.min(unit - base);
        }
    }
    report
}

/// Whether the additive mixer returns exactly the left-to-right sum.
pub fn vdn_is_exact_sum(draws: usize, seed: u64) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..draws).all(|_| {
        let n = rng.random_range(1..=8);
        let layout = Layout { n_agents: n, n_actions: 2, obs_dim: 1, state_dim: 3, hidden: 1, mixer: MixerKind::Vdn, embed: 1 };
        let model = Model::zeros(layout);
        let q: Vec<f64> = (0..n).map(|_| rng.random_range(-1e3..1e3)).collect();
        let expected = q.iter().fold(0.0, |acc, x| acc + x);
        model.mixer.forward(&q, &[0.0; 3]).expect("dimensions match") == expected
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AuditReport {
    pub sent: u64,
    pub received: u64,
    pub lost: u64,
    pub duplicated: u64,
    pub misrouted: u64,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.sent == self.received && self.lost == 0 && self.duplicated == 0 && self.misrouted == 0
    }

    fn merge(&mut self, other: AuditReport) {
        self.sent += other.sent;
        self.received += other.received;
        self.lost += other.lost;
        self.duplicated += other.duplicated;
        self.misrouted += other.misrouted;
    }
}

/// Per-source sequence checker: every source must deliver `0, 1, 2, ...`.
#[derive(Debug, Default)]
struct Sequence {
    next: Vec<u64>,
    report: AuditReport,
}

impl Sequence {
    fn new(sources: usize) -> Self {
        Self { next: vec![0; sources], report: AuditReport::default() }
    }

    fn see(&mut self, source: usize, seq: u64) {
        self.report.received += 1;
        let Some(next) = self.next.get_mut(source) else {
            self.report.misrouted += 1;
            return;
        };
        if seq < *next {
            self.report.duplicated += 1;
        } else {
            self.report.lost += seq - *next;
            *next = seq + 1;
        }
    }

    fn finish(mut self, expected_per_source: u64) -> AuditReport {
        for &n in &self.next {
            self.report.lost += expected_per_source.saturating_sub(n);
        }
        self.report
    }
}

/// `actors` threads each make `round_trips` requests through their own pipe
/// to one worker that echoes the step index. Both directions are audited;
/// `sent` counts messages in both directions.
pub fn pipe_audit(actors: u32, round_trips: u64) -> Result<AuditReport, PipeError> {
    let (actor_ends, worker_ends): (Vec<_>, Vec<_>) = (0..actors).map(|id| obs_act_pipe(id, 2)).unzip();
    let mut set = PipeSet::new(worker_ends);
    thread::scope(|s| {
        let handles: Vec<_> = actor_ends
            .into_iter()
            .map(|mut end| {
                s.spawn(move || -> Result<AuditReport, PipeError> {
                    let me = end.actor_id();
                    let mut seq = Sequence::new(1);
                    for t in 0..round_trips {
                        let reply = end.request(ObsRequest {
                            actor_id: me,
                            env_time_step: t as u32,
                            per_agent_obs: vec![vec![t as f64]],
                            avail_actions: Vec::new(),
                            episode_done: false,
                        })?;
                        if reply.actor_id != me || reply.joint_action.len() != 1 {
                            seq.report.misrouted += 1;
                            seq.report.received += 1;
                            continue;
                        }
                        seq.see(0, reply.joint_action[0] as u64);
                    }
                    Ok(seq.finish(round_trips))
                })
            })
            .collect();

        let mut seq = Sequence::new(actors as usize);
        let mut sent = 0;
        loop {
            match set.poll(Duration::from_millis(50)) {
                Poll::AllClosed => break,
                Poll::Batch(batch) => {
                    for req in batch {
                        let step = req.per_agent_obs.first().and_then(|o| o.first()).copied().unwrap_or(-1.0);
                        if step != req.env_time_step as f64 {
                            seq.report.misrouted += 1;
                        }
                        seq.see(req.actor_id as usize, req.env_time_step as u64);
                        set.reply(ActionReply { actor_id: req.actor_id, joint_action: vec![req.env_time_step as usize] })?;
                        sent += 1;
                    }
                }
            }
        }
        let mut total = seq.finish(round_trips);
        total.sent = actors as u64 * round_trips + sent;
        for h in handles {
            total.merge(h.join().expect("audit actor panicked")?);
        }
        Ok(total)
    })
}

/// `producers` threads push `(producer, seq)` pairs into one bounded queue;
/// the consumer drains it until `Exhausted`.
pub fn queue_audit(producers: u32, per_producer: u64, capacity: usize) -> Result<AuditReport, PipeError> {
    let (tx, rx) = sample_queue::<(u32, u64)>(capacity);
    thread::scope(|s| {
        for p in 0..producers {
            let tx = tx.clone();
            s.spawn(move || -> Result<(), PipeError> {
                for i in 0..per_producer {
                    tx.push((p, i))?;
                }
                Ok(())
            });
        }
        drop(tx);
        let mut seq = Sequence::new(producers as usize);
        while let Some((p, i)) = rx.pop().into_item() {
            seq.see(p as usize, i);
        }
        let mut report = seq.finish(per_producer);
        report.sent = producers as u64 * per_producer;
        Ok(report)
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SnapshotStress {
    pub publishes: u64,
    pub fetches: u64,
    pub checksum_failures: u64,
    /// Snapshots whose contents disagree with their version.
    pub torn: u64,
    pub version_regressions: u64,
}

/// One writer publishes `publishes` snapshots whose every entry equals the
/// version they will get; `readers` threads fetch until they observe the last.
pub fn param_pool_stress(readers: usize, publishes: u64) -> SnapshotStress {
    let layout = Layout { n_agents: 1, n_actions: 1, obs_dim: 0, state_dim: 1, hidden: 1, mixer: MixerKind::Vdn, embed: 1 };
    let n = layout.param_count();
    let pool = SharedParamPool::new(layout, vec![0.0; n]).expect("layout-sized");
    let mut writer = pool.writer().expect("first writer");
    thread::scope(|s| {
        let handles: Vec<_> = (0..readers)
            .map(|_| {
                let mut reader = pool.reader();
                s.spawn(move || {
                    let mut r = SnapshotStress::default();
                    let mut last = 0;
                    loop {
                        match reader.fetch() {
                            Ok(snap) => {
                                r.fetches += 1;
                                if !snap.is_valid() {
                                    r.checksum_failures += 1;
                                }
                                if snap.data.iter().any(|&x| x != snap.version as f64) {
                                    r.torn += 1;
                                }
                                if snap.version < last {
                                    r.version_regressions += 1;
                                }
                                last = snap.version;
                                if snap.version == publishes {
                                    break;
                                }
                            }
                            Err(_) => r.checksum_failures += 1,
                        }
                    }
                    r
                })
            })
            .collect();
        for v in 1..=publishes {
            writer.publish(&vec![v as f64; n]).expect("layout-sized");
        }
        let mut total = SnapshotStress { publishes, ..SnapshotStress::default() };
        for h in handles {
            let r = h.join().expect("reader panicked");
            total.fetches += r.fetches;
            total.checksum_failures += r.checksum_failures;
            total.torn += r.torn;
            total.version_regressions += r.version_regressions;
        }
        total
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShutdownTrial {
    pub actors: u32,
    pub episodes_pushed: u64,
    pub episodes_popped: u64,
    pub requests_served: u64,
    pub requests_sent: u64,
    /// The worker saw `AllClosed` and the consumer saw `Exhausted` before
    /// the deadline.
    pub terminated: bool,
}

impl ShutdownTrial {
    pub fn is_clean(&self) -> bool {
        self.terminated && self.episodes_pushed == self.episodes_popped && self.requests_sent == self.requests_served
    }
}

/// Actors, a worker and a consumer wired as in a live run, with random
/// episode counts, episode lengths and sleeps. Termination relies only on
/// endpoint closure: `AllClosed` on the pipes and `Exhausted` on the queue.
pub fn shutdown_trial(seed: u64, deadline: Duration) -> ShutdownTrial {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let actors = rng.random_range(1..=4u32);
    let plans: Vec<(Vec<usize>, u64)> = (0..actors)
        .map(|_| {
            let episodes = rng.random_range(0..=4);
            let lens = (0..episodes).map(|_| rng.random_range(1..=6)).collect();
            (lens, rng.random())
        })
        .collect();
    let consumer_seed: u64 = rng.random();
    let expected_pushes: u64 = plans.iter().map(|(l, _)| l.len() as u64).sum();
    let expected_requests: u64 = plans.iter().map(|(l, _)| l.iter().map(|n| *n as u64 + 1).sum::<u64>()).sum();

    let (done_tx, done_rx) = mpsc::channel();
    thread::spawn(move || {
        let (actor_ends, worker_ends): (Vec<_>, Vec<_>) = (0..actors).map(|id| obs_act_pipe(id, 2)).unzip();
        let (qtx, qrx) = sample_queue::<u64>(2);
        let mut set = PipeSet::new(worker_ends);
        let (served, popped) = thread::scope(|s| {
            for ((mut end, (lens, actor_seed)), qtx) in actor_ends.into_iter().zip(plans).zip(std::iter::repeat_with(|| qtx.clone())) {
                s.spawn(move || {
                    let mut rng = ChaCha8Rng::seed_from_u64(actor_seed);
                    let me = end.actor_id();
                    for (e, len) in lens.into_iter().enumerate() {
                        for t in 0..=len {
                            if rng.random_bool(0.3) {
                                thread::sleep(Duration::from_micros(rng.random_range(0..300)));
                            }
                            let req = ObsRequest {
                                actor_id: me,
                                env_time_step: t as u32,
                                per_agent_obs: vec![vec![0.0]],
                                avail_actions: vec![vec![true]],
                                episode_done: t == len,
                            };
                            if end.request(req).is_err() {
                                return;
                            }
                        }
                        if qtx.push(e as u64).is_err() {
                            return;
                        }
                    }
                });
            }
            drop(qtx);
            let worker = s.spawn(move || {
                let mut served = 0u64;
                loop {
                    match set.poll(Duration::from_millis(5)) {
                        Poll::AllClosed => return served,
                        Poll::Batch(batch) => {
                            for req in batch {
                                served += 1;
                                let joint = if req.episode_done { Vec::new() } else { vec![0] };
                                let _ = set.reply(ActionReply { actor_id: req.actor_id, joint_action: joint });
                            }
                        }
                    }
                }
            });
            let consumer = s.spawn(move || {
                let mut rng = ChaCha8Rng::seed_from_u64(consumer_seed);
                let mut popped = 0u64;
                loop {
                    match qrx.pop_timeout(Duration::from_millis(rng.random_range(1..10))) {
                        Some(crate::pipes::Pop::Item(_)) => popped += 1,
                        Some(crate::pipes::Pop::Exhausted) => return popped,
                        None => {}
                    }
                }
            });
            (worker.join().unwrap_or(u64::MAX), consumer.join().unwrap_or(u64::MAX))
        });
        let _ = done_tx.send((served, popped));
    });

    match done_rx.recv_timeout(deadline) {
        Ok((served, popped)) => ShutdownTrial {
            actors,
            episodes_pushed: expected_pushes,
            episodes_popped: popped,
            requests_served: served,
            requests_sent: expected_requests,
            terminated: true,
        },
        Err(_) => ShutdownTrial {
            actors,
            episodes_pushed: expected_pushes,
            episodes_popped: 0,
            requests_served: 0,
            requests_sent: expected_requests,
            terminated: false,
        },
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IsolationReport {
    pub operations: usize,
    pub envs: usize,
    /// Environments whose final hidden state or action history differ from
    /// a replay of their own operations alone.
    pub mismatched_envs: usize,
    pub boundary_checks: u64,
    pub boundary_violations: u64,
}

#[derive(Debug, Clone)]
enum Op {
    Decide(Vec<Vec<f64>>),
    End,
}

/// Random interleaving of decisions and episode ends over `n_envs` slots of
/// one engine, compared slot by slot against fresh single-slot engines that
/// replay only that slot's operations.
pub fn hidden_state_isolation(n_envs: usize, operations: usize, seed: u64) -> Result<IsolationReport, RuntimeError> {
    let layout = check_layout(MixerKind::Vdn);
    let model = Model::init(layout, seed);
    let greedy = EpsilonSchedule::constant(0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x150);
    let avail = vec![vec![true; layout.n_actions]; layout.n_agents];
    let mut engine = DecisionEngine::new(model.clone(), n_envs, greedy, seed);
    let mut logs: Vec<Vec<Op>> = vec![Vec::new(); n_envs];
    let mut actions: Vec<Vec<Vec<usize>>> = vec![Vec::new(); n_envs];
    let mut report = IsolationReport { operations, envs: n_envs, ..IsolationReport::default() };
    for _ in 0..operations {
        let env = rng.random_range(0..n_envs);
        if rng.random_bool(0.15) {
            engine.end_episode(env);
            report.boundary_checks += 1;
            if !engine.hidden().env_is_zero(env).unwrap_or(false) {
                report.boundary_violations += 1;
            }
            logs[env].push(Op::End);
        } else {
            let obs: Vec<Vec<f64>> = (0..layout.n_agents)
                .map(|_| (0..layout.obs_dim).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            actions[env].push(engine.decide(env, &obs, &avail)?);
            logs[env].push(Op::Decide(obs));
        }
    }
    let stats = engine.stats();
    report.boundary_checks += stats.zero_start_checks;
    report.boundary_violations += stats.zero_start_violations;

    for env in 0..n_envs {
        let mut solo = DecisionEngine::new(model.clone(), 1, greedy, seed);
        let mut solo_actions = Vec::new();
        for op in &logs[env] {
            match op {
                Op::End => solo.end_episode(0),
                Op::Decide(obs) => solo_actions.push(solo.decide(0, obs, &avail)?),
            }
        }
        let same_hidden = (0..layout.n_agents).all(|a| engine.hidden().get(env, a).ok() == solo.hidden().get(0, a).ok());
        if !same_hidden || solo_actions != actions[env] {
            report.mismatched_envs += 1;
        }
    }
    Ok(report)
}

/// How often each of `pool_size` stored episodes is picked over `draws`
/// batches of `batch` episodes.
pub fn replay_sampling_counts(pool_size: usize, batch: usize, draws: usize, seed: u64) -> Vec<u64> {
    let layout = check_layout(MixerKind::Vdn);
    let shape = shape_of(&layout, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool = ReplayPool::new(shape, pool_size);
    for _ in 0..pool_size {
        pool.insert(random_episode(&shape, 1, true, &mut rng)).expect("well-formed");
    }
    let mut counts = vec![0u64; pool_size];
    for _ in 0..draws {
        for i in pool.sample_indices(batch, &mut rng).expect("pool holds enough") {
            counts[i] += 1;
        }
    }
    counts
}

/// Pearson statistic against the uniform distribution and its degrees of
/// freedom.
pub fn chi_square_uniform(counts: &[u64]) -> (f64, usize) {
    let total: u64 = counts.iter().sum();
    let expected = total as f64 / counts.len() as f64;
    let stat = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    (stat, counts.len().saturating_sub(1))
}

/// Largest absolute change in targets, loss or any gradient coordinate after
/// overwriting every padded cell of a batch with garbage, over `trials`
/// random batches of mixed lengths.
pub fn padded_cell_fuzz(trials: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for trial in 0..trials {
        let mixer = if trial % 2 == 0 { MixerKind::Mono } else { MixerKind::Vdn };
        let layout = check_layout(mixer);
        let shape = shape_of(&layout, 8);
        let model = Model::init(layout, rng.random());
        let target = Model::init(layout, rng.random());
        let episodes: Vec<EpisodeRecord> =
            (0..4).map(|_| random_episode(&shape, rng.random_range(1..=8), rng.random_bool(0.5), &mut rng)).collect();
        let clean = TrainingBatch::pad(&shape, &episodes);
        let mut dirty = clean.clone();
        fuzz_padding(&mut dirty, &mut rng);

        let evaluate = |batch: &TrainingBatch| {
            let views = batch.views();
            let targets = batch_targets(&target, &views, 0.99, Execution::Sequential);
            let (loss, grad) = loss_and_grad(&model, &views, &targets, Execution::Sequential);
            let mut out: Vec<f64> = targets.concat();
            out.push(loss);
            out.extend(grad.flatten());
            out
        };
        let a = evaluate(&clean);
        let b = evaluate(&dirty);
        for (x, y) in a.iter().zip(&b) {
            worst = worst.max((x - y).abs());
        }
    }
    worst
}

fn fuzz_padding<R: Rng + ?Sized>(batch: &mut TrainingBatch, rng: &mut R) {
    let (n, a, o, s, l) = (batch.n_agents, batch.n_actions, batch.obs_dim, batch.state_dim, batch.max_len);
    let slots = l + 1;
    for b in 0..batch.batch_size() {
        let len = batch.lengths[b];
        for t in len + 1..slots {
            for x in &mut batch.obs[(b * slots + t) * n * o..(b * slots + t + 1) * n * o] {
                *x = rng.random_range(-1e6..1e6);
            }
            for x in &mut batch.state[(b * slots + t) * s..(b * slots + t + 1) * s] {
                *x = rng.random_range(-1e6..1e6);
            }
            for x in &mut batch.avail[(b * slots + t) * n * a..(b * slots + t + 1) * n * a] {
                *x = rng.random_bool(0.5);
            }
        }
        for t in len..l {
            batch.rewards[b * l + t] = rng.random_range(-1e6..1e6);
            for x in &mut batch.actions[(b * l + t) * n..(b * l + t + 1) * n] {
                *x = rng.random_range(0..a);
            }
        }
    }
}
