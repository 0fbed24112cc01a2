use std::thread;
use std::time::{Duration, Instant};

use super::actor::{run_actor, ActorReport};
use super::learner::{run_learner, TrainReport};
use super::metrics::MetricsSink;
use super::worker::{run_aw_worker, run_worker, WorkerReport};
use super::{derive_seed, run_baseline, ActorConfig, Mode, Role, RunConfig, RuntimeError, Stream, Trainer};
use crate::episode::EpisodeShape;
use crate::nets::Model;
use crate::paramstore::SharedParamPool;
use crate::pipes::{obs_act_pipe, sample_queue, PipeError, PipeSet};

#[derive(Debug, Clone)]
pub struct RunReport {
    pub mode: Mode,
    pub live_envs: usize,
    pub total_episodes: u64,
    pub env_steps: u64,
    /// Start until the last actor finished its last episode.
    pub collection_time: Duration,
    /// Start until every role has exited.
    pub total_time: Duration,
    pub actors: Vec<ActorReport>,
    pub workers: Vec<WorkerReport>,
    pub train: TrainReport,
    pub model: Model,
}

impl RunReport {
    pub fn steps_per_sec(&self) -> f64 {
        self.env_steps as f64 / self.collection_time.as_secs_f64().max(1e-9)
    }

    pub fn episodes_per_sec(&self) -> f64 {
        self.total_episodes as f64 / self.collection_time.as_secs_f64().max(1e-9)
    }

    /// Episode returns of each actor in play order, by actor id.
    pub fn returns(&self) -> Vec<(u32, Vec<f64>)> {
        let mut out: Vec<_> = self.actors.iter().map(|a| (a.actor_id, a.returns.clone())).collect();
        out.sort_by_key(|(id, _)| *id);
        out
    }

    pub fn zero_start_violations(&self) -> u64 {
        self.workers.iter().map(|w| w.stats.zero_start_violations).sum()
    }

    pub fn mean_staleness(&self) -> f64 {
        let samples: Vec<u64> = self.workers.iter().flat_map(|w| w.staleness.iter().copied()).collect();
        if samples.is_empty() {
            return 0.0;
        }
        samples.iter().sum::<u64>() as f64 / samples.len() as f64
    }
}

pub fn run(cfg: &RunConfig, metrics: &MetricsSink) -> Result<RunReport, RuntimeError> {
    match cfg.mode {
        Mode::Baseline => run_baseline(cfg, metrics),
        Mode::Aw => run_aw(cfg, metrics),
        Mode::Awl => run_awl(cfg, metrics),
    }
}

fn join<T>(role: Role, h: thread::ScopedJoinHandle<'_, Result<T, RuntimeError>>) -> Result<T, RuntimeError> {
    match h.join() {
        Ok(r) => r.map_err(|e| e.in_role(role)),
        Err(_) => Err(RuntimeError::Panicked(role)),
    }
}

/// Picks the error most likely to be the cause: a closed pipe or queue is
/// usually the echo of another role's failure.
fn first_cause(errors: Vec<RuntimeError>) -> Option<RuntimeError> {
    let echo = |e: &RuntimeError| matches!(e.root(), RuntimeError::Pipe(PipeError::Closed));
    let pos = errors.iter().position(|e| !echo(e)).unwrap_or(0);
    errors.into_iter().nth(pos)
}

fn actor_configs(cfg: &RunConfig, worker: usize) -> Vec<ActorConfig> {
    (0..cfg.actors_per_worker)
        .map(|a| {
            let id = (worker * cfg.actors_per_worker + a) as u32;
            ActorConfig {
                actor_id: id,
                env: cfg.env.clone(),
                episodes: cfg.episodes_per_actor,
                seed: derive_seed(cfg.seed, Stream::Env, id as u64),
            }
        })
        .collect()
}

fn new_trainer(cfg: &RunConfig, init: &Model, metrics: &MetricsSink) -> Result<Trainer, RuntimeError> {
    let mut t = Trainer::new(
        cfg.learner.clone(),
        init.clone(),
        EpisodeShape::from(&cfg.env.spec()),
        derive_seed(cfg.seed, Stream::Learner, 0),
    )?
    .with_metrics(metrics.clone());
    if let Some(eval) = &cfg.eval {
        t = t.with_eval(eval.clone(), cfg.env.clone());
    }
    Ok(t)
}

fn finish(
    cfg: &RunConfig,
    start: Instant,
    actors: Vec<ActorReport>,
    workers: Vec<WorkerReport>,
    train: TrainReport,
    model: Model,
) -> RunReport {
    let last = actors.iter().map(|a| a.finished_at).max().unwrap_or(start);
    RunReport {
        mode: cfg.mode,
        live_envs: cfg.live_envs(),
        total_episodes: actors.iter().map(|a| a.episodes).sum(),
        env_steps: actors.iter().map(|a| a.env_steps).sum(),
        collection_time: last - start,
        total_time: start.elapsed(),
        actors,
        workers,
        train,
        model,
    }
}

/// Actors served by one worker that also trains.
pub fn run_aw(cfg: &RunConfig, metrics: &MetricsSink) -> Result<RunReport, RuntimeError> {
    let mut cfg = cfg.clone();
    cfg.mode = Mode::Aw;
    cfg.validate()?;
    let init = Model::init(cfg.layout(), cfg.seed);
    let pool = SharedParamPool::new(cfg.layout(), init.flatten())?;
    let trainer = new_trainer(&cfg, &init, metrics)?.with_writer(pool.writer()?);
    let (qtx, queue) = sample_queue(cfg.queue_capacity);
    let start = Instant::now();
    let cfg = &cfg;
    let (actor_results, worker_result) = thread::scope(|s| {
        let mut ends = Vec::new();
        let mut actors = Vec::new();
        for ac in actor_configs(cfg, 0) {
            let (ae, we) = obs_act_pipe(ac.actor_id, cfg.pipe_capacity);
            ends.push(we);
            let tx = qtx.clone();
            let m = metrics.clone();
            actors.push((ac.actor_id, s.spawn(move || run_actor(&ac, ae, tx, &m))));
        }
        drop(qtx);
        let pipes = PipeSet::new(ends);
        let seed = derive_seed(cfg.seed, Stream::Worker, 0);
        let worker = s.spawn(move || run_aw_worker(0, &cfg.worker, pipes, queue, trainer, seed, metrics));
        let actor_results: Vec<_> = actors.into_iter().map(|(id, h)| join(Role::Actor(id), h)).collect();
        (actor_results, join(Role::Worker(0), worker))
    });
    let mut errors = Vec::new();
    let mut actors = Vec::new();
    for r in actor_results {
        match r {
            Ok(a) => actors.push(a),
            Err(e) => errors.push(e),
        }
    }
    let worker = match worker_result {
        Ok(w) => Some(w),
        Err(e) => {
            errors.insert(0, e);
            None
        }
    };
    if let Some(e) = first_cause(errors) {
        return Err(e);
    }
    let (mut worker, model) = worker.expect("no errors");
    let train = worker.train.take().unwrap_or_default();
    Ok(finish(cfg, start, actors, vec![worker], train, model))
}

/// `workers` decision servers, each with `actors_per_worker` actors, plus a
/// learner fed by a shared sample queue and publishing to a parameter pool.
pub fn run_awl(cfg: &RunConfig, metrics: &MetricsSink) -> Result<RunReport, RuntimeError> {
    let mut cfg = cfg.clone();
    cfg.mode = Mode::Awl;
    cfg.validate()?;
    let init = Model::init(cfg.layout(), cfg.seed);
    let pool = SharedParamPool::new(cfg.layout(), init.flatten())?;
    let trainer = new_trainer(&cfg, &init, metrics)?.with_writer(pool.writer()?);
    let (qtx, queue) = sample_queue(cfg.queue_capacity);
    let start = Instant::now();
    let cfg = &cfg;
    let (actor_results, worker_results, learner_result) = thread::scope(|s| {
        let learner = s.spawn(move || run_learner(trainer, queue));
        let mut actors = Vec::new();
        let mut workers = Vec::new();
        for w in 0..cfg.workers {
            let mut ends = Vec::new();
            for ac in actor_configs(cfg, w) {
                let (ae, we) = obs_act_pipe(ac.actor_id, cfg.pipe_capacity);
                ends.push(we);
                let tx = qtx.clone();
                let m = metrics.clone();
                actors.push((ac.actor_id, s.spawn(move || run_actor(&ac, ae, tx, &m))));
            }
            let pipes = PipeSet::new(ends);
            let reader = pool.reader();
            let model = init.clone();
            let seed = derive_seed(cfg.seed, Stream::Worker, w as u64);
            let wid = w as u32;
            workers.push((wid, s.spawn(move || run_worker(wid, &cfg.worker, model, pipes, reader, seed, metrics))));
        }
        drop(qtx);
        let a: Vec<_> = actors.into_iter().map(|(id, h)| join(Role::Actor(id), h)).collect();
        let w: Vec<_> = workers.into_iter().map(|(id, h)| join(Role::Worker(id), h)).collect();
        (a, w, join(Role::Learner, learner))
    });
    let mut errors = Vec::new();
    let learner = match learner_result {
        Ok(l) => Some(l),
        Err(e) => {
            errors.push(e);
            None
        }
    };
    let mut workers = Vec::new();
    for r in worker_results {
        match r {
            Ok(w) => workers.push(w),
            Err(e) => errors.push(e),
        }
    }
    let mut actors = Vec::new();
    for r in actor_results {
        match r {
            Ok(a) => actors.push(a),
            Err(e) => errors.push(e),
        }
    }
    if let Some(e) = first_cause(errors) {
        return Err(e);
    }
    let (train, model) = learner.expect("no errors");
    Ok(finish(cfg, start, actors, workers, train, model))
}
