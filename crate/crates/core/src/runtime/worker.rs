use super::metrics::{MetricEvent, MetricsSink};
use super::{DecisionEngine, DecisionStats, RuntimeError, TrainReport, Trainer, WorkerConfig};
use crate::nets::Model;
use crate::paramstore::ParamReader;
use crate::pipes::{ActionReply, ObsRequest, PipeError, PipeSet, Poll, Pop, SampleQueue};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct WorkerReport {
    pub worker_id: u32,
    pub batches: u64,
    pub episodes_ended: u64,
    pub fetches: u64,
    /// Versions behind the latest publish, sampled just before each fetch.
    pub staleness: Vec<u64>,
    pub stats: DecisionStats,
    /// Set when the worker trained for itself.
    pub train: Option<TrainReport>,
}

impl WorkerReport {
    pub fn mean_staleness(&self) -> f64 {
        if self.staleness.is_empty() {
            return 0.0;
        }
        self.staleness.iter().sum::<u64>() as f64 / self.staleness.len() as f64
    }
}

/// Answers one batch of requests. Returns true if any episode ended.
fn serve(
    engine: &mut DecisionEngine,
    pipes: &PipeSet,
    batch: Vec<ObsRequest>,
    report: &mut WorkerReport,
    metrics: &MetricsSink,
) -> Result<bool, RuntimeError> {
    let mut ended = false;
    for req in batch {
        let slot = pipes.slot_of(req.actor_id).ok_or(PipeError::UnknownActor(req.actor_id))?;
        let joint_action = if req.episode_done {
            engine.end_episode(slot);
            report.episodes_ended += 1;
            ended = true;
            Vec::new()
        } else {
            engine.decide(slot, &req.per_agent_obs, &req.avail_actions)?
        };
        match pipes.reply(ActionReply { actor_id: req.actor_id, joint_action }) {
            Ok(()) => {}
            // the actor is gone; its pipe reports closed on the next poll
            Err(PipeError::Closed) => metrics.warn(format!("worker {}: actor {} hung up", report.worker_id, req.actor_id)),
            Err(e) => return Err(e.into()),
        }
    }
    report.batches += 1;
    Ok(ended)
}

/// Serves the actors behind `pipes` from parameter snapshots in the pool,
/// refreshing at episode boundaries and every `sync_period` batches, until
/// every actor has hung up.
pub fn run_worker(
    worker_id: u32,
    cfg: &WorkerConfig,
    model: Model,
    mut pipes: PipeSet,
    mut reader: ParamReader,
    seed: u64,
    metrics: &MetricsSink,
) -> Result<WorkerReport, RuntimeError> {
    cfg.validate()?;
    let mut engine = DecisionEngine::new(model, pipes.len(), cfg.epsilon, seed);
    let mut report = WorkerReport { worker_id, ..WorkerReport::default() };
    let mut fetch_due = true;
    loop {
        if fetch_due {
            let staleness = reader.staleness();
            let snap = reader.fetch()?;
            if snap.version != engine.version() || report.fetches == 0 {
                engine.load_flat(snap.version, &snap.data)?;
            }
            report.fetches += 1;
            report.staleness.push(staleness);
            metrics.send(MetricEvent::Fetch { worker_id, version: snap.version, staleness });
            fetch_due = false;
        }
        match pipes.poll(cfg.poll_timeout) {
            Poll::AllClosed => break,
            Poll::Batch(batch) if batch.is_empty() => {}
            Poll::Batch(batch) => {
                let ended = serve(&mut engine, &pipes, batch, &mut report, metrics)?;
                fetch_due = ended || report.batches.is_multiple_of(cfg.sync_period);
            }
        }
    }
    report.stats = engine.stats();
    Ok(report)
}

/// A worker that also trains: episodes from its own actors go through
/// `queue` into the trainer's replay, and owed train steps run between
/// decision rounds while the actors wait.
pub fn run_aw_worker(
    worker_id: u32,
    cfg: &WorkerConfig,
    mut pipes: PipeSet,
    queue: SampleQueue,
    mut trainer: Trainer,
    seed: u64,
    metrics: &MetricsSink,
) -> Result<(WorkerReport, Model), RuntimeError> {
    cfg.validate()?;
    let mut engine = DecisionEngine::new(trainer.model().clone(), pipes.len(), cfg.epsilon, seed);
    let mut report = WorkerReport { worker_id, ..WorkerReport::default() };
    loop {
        match pipes.poll(cfg.poll_timeout) {
            Poll::AllClosed => break,
            Poll::Batch(batch) if batch.is_empty() => {}
            Poll::Batch(batch) => {
                serve(&mut engine, &pipes, batch, &mut report, metrics)?;
            }
        }
        let mut arrived = false;
        while let Some(Pop::Item(e)) = queue.try_pop() {
            trainer.ingest(e)?;
            arrived = true;
        }
        if arrived {
            if trainer.train_owed()? > 0 {
                engine.load_model(trainer.model(), trainer.version());
            }
            trainer.maybe_eval()?;
        }
    }
    while let Pop::Item(e) = queue.pop() {
        trainer.ingest(e)?;
    }
    trainer.train_owed()?;
    trainer.maybe_eval()?;
    report.stats = engine.stats();
    let (train, model) = trainer.finish()?;
    report.train = Some(train);
    Ok((report, model))
}
