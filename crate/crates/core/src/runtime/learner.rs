use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::metrics::{MetricEvent, MetricsSink};
use super::{evaluate, EvalConfig, LearnerConfig, RuntimeError};
use crate::envsim::EnvConfig;
use crate::episode::{EpisodeRecord, EpisodeShape};
use crate::nets::checkpoint::Checkpoint;
use crate::nets::loss::{batch_targets, loss_and_grad};
use crate::nets::optim::{clip_grad_norm, Optimizer};
use crate::nets::{Execution, Model};
use crate::paramstore::ParamWriter;
use crate::pipes::{Pop, SampleQueue};
use crate::replay::{ReplayPool, TrainingBatch};

/// How long an idle learner waits on the queue before re-checking.
const IDLE_WAIT: Duration = Duration::from_millis(20);

/// Bootstrapped targets for every row of `batch`, zero-padded to the batch
/// length. Padded steps carry no meaning and are masked out of the loss.
pub fn compute_td_targets(batch: &TrainingBatch, target: &Model, gamma: f64, exec: Execution) -> Vec<Vec<f64>> {
    let mut rows = batch_targets(target, &batch.views(), gamma, exec);
    for row in &mut rows {
        row.resize(batch.max_len, 0.0);
    }
    rows
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    pub train_steps: u64,
    pub ingested: u64,
    pub publishes: u64,
    pub last_loss: Option<f64>,
    pub final_version: u64,
    pub evals: u64,
    pub warnings: Vec<String>,
}

/// Replay, canonical and target parameters, and the optimizer: everything
/// that turns episodes into parameter updates.
pub struct Trainer {
    cfg: LearnerConfig,
    model: Model,
    target: Model,
    optim: Optimizer,
    replay: ReplayPool,
    rng: ChaCha8Rng,
    writer: Option<ParamWriter>,
    metrics: MetricsSink,
    eval: Option<(EvalConfig, EnvConfig)>,
    next_eval: u64,
    report: TrainReport,
}

impl Trainer {
    pub fn new(cfg: LearnerConfig, model: Model, shape: EpisodeShape, seed: u64) -> Result<Self, RuntimeError> {
        cfg.validate()?;
        let n = model.layout.param_count();
        Ok(Self {
            optim: Optimizer::new(cfg.optimizer, cfg.lr, n),
            replay: ReplayPool::new(shape, cfg.replay_capacity),
            target: model.clone(),
            model,
            rng: ChaCha8Rng::seed_from_u64(seed),
            writer: None,
            metrics: MetricsSink::none(),
            eval: None,
            next_eval: 0,
            report: TrainReport::default(),
            cfg,
        })
    }

    /// Publish the parameters after every train step.
    pub fn with_writer(mut self, writer: ParamWriter) -> Self {
        self.writer = Some(writer);
        self
    }

    pub fn with_metrics(mut self, metrics: MetricsSink) -> Self {
        self.metrics = metrics;
        self
    }

    pub fn with_eval(mut self, eval: EvalConfig, env: EnvConfig) -> Self {
        self.next_eval = eval.every_episodes;
        if eval.every_episodes > 0 {
            self.eval = Some((eval, env));
        }
        self
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn target(&self) -> &Model {
        &self.target
    }

    pub fn replay(&self) -> &ReplayPool {
        &self.replay
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.cfg
    }

    pub fn steps(&self) -> u64 {
        self.report.train_steps
    }

    pub fn ingested(&self) -> u64 {
        self.report.ingested
    }

    /// Version of the parameters in [`Trainer::model`].
    pub fn version(&self) -> u64 {
        self.writer.as_ref().map_or(self.report.train_steps, |w| w.pool().latest_version())
    }

    pub fn ingest(&mut self, episode: EpisodeRecord) -> Result<(), RuntimeError> {
        self.replay.insert(episode)?;
        self.report.ingested += 1;
        Ok(())
    }

    /// Enough data to sample a batch.
    pub fn ready(&self) -> bool {
        self.replay.len() >= self.cfg.min_fill.max(self.cfg.batch_size)
    }

    /// Train steps allowed by the episodes ingested so far.
    pub fn budget(&self) -> u64 {
        (self.cfg.train_steps_per_ingest * self.report.ingested as f64).floor() as u64
    }

    /// Runs every train step currently owed; returns how many ran.
    pub fn train_owed(&mut self) -> Result<u64, RuntimeError> {
        let mut n = 0;
        while self.ready() && self.steps() < self.budget() {
            self.train_step()?;
            n += 1;
        }
        Ok(n)
    }

    pub fn train_step(&mut self) -> Result<f64, RuntimeError> {
        let batch = self.replay.sample(self.cfg.batch_size, &mut self.rng)?;
        self.train_on(&batch)
    }

    /// One update on a given batch. Returns the loss before the update.
    pub fn train_on(&mut self, batch: &TrainingBatch) -> Result<f64, RuntimeError> {
        let exec = self.cfg.exec;
        let targets = compute_td_targets(batch, &self.target, self.cfg.gamma, exec);
        let (loss, grad) = loss_and_grad(&self.model, &batch.views(), &targets, exec);
        let step = self.report.train_steps + 1;
        let mut g = grad.flatten();
        if !loss.is_finite() || g.iter().any(|x| !x.is_finite()) {
            let detail = format!(
                "parameters finite: {}, targets finite: {}",
                self.model.is_finite(),
                targets.iter().flatten().all(|y| y.is_finite())
            );
            return Err(RuntimeError::NonFiniteLoss { step, loss, detail });
        }
        if let Some(max) = self.cfg.grad_clip {
            clip_grad_norm(&mut g, max);
        }
        let mut params = self.model.flatten();
        self.optim.step(&mut params, &g);
        self.model.load_flat(&params)?;
        self.report.train_steps = step;
        self.report.last_loss = Some(loss);
        if step.is_multiple_of(self.cfg.target_sync) {
            self.target.clone_from(&self.model);
        }
        let version = match &mut self.writer {
            Some(w) => {
                self.report.publishes += 1;
                w.publish(&params)?
            }
            None => step,
        };
        if !self.cfg.train_cost_padding.is_zero() {
            std::thread::sleep(self.cfg.train_cost_padding);
        }
        self.metrics.send(MetricEvent::Train { step, loss, version });
        Ok(loss)
    }

    /// Evaluates the current parameters if enough episodes have arrived
    /// since the last evaluation.
    pub fn maybe_eval(&mut self) -> Result<(), RuntimeError> {
        let Some((eval, env)) = &self.eval else { return Ok(()) };
        if self.report.ingested < self.next_eval {
            return Ok(());
        }
        while self.next_eval <= self.report.ingested {
            self.next_eval += eval.every_episodes;
        }
        let res = evaluate(&self.model, env, eval.episodes, eval.epsilon, eval.seed, self.cfg.exec)?;
        self.report.evals += 1;
        self.metrics.send(MetricEvent::Eval {
            ingested: self.report.ingested,
            version: self.version(),
            mean_return: res.mean_return,
            solve_rate: res.solve_rate,
        });
        Ok(())
    }

    /// Writes the checkpoint if configured and returns the run's counters.
    pub fn finish(mut self) -> Result<(TrainReport, Model), RuntimeError> {
        if self.report.train_steps == 0 {
            let msg = format!(
                "no training happened: {} episodes ingested, {} needed before the first batch",
                self.report.ingested,
                self.cfg.min_fill.max(self.cfg.batch_size)
            );
            self.metrics.warn(msg.clone());
            self.report.warnings.push(msg);
        }
        self.report.final_version = self.version();
        if let Some(path) = &self.cfg.checkpoint {
            let ck = Checkpoint { layout: self.model.layout, version: self.report.final_version, params: self.model.flatten() };
            let file = std::fs::File::create(path).map_err(|e| RuntimeError::Io(format!("{}: {e}", path.display())))?;
            ck.write_to(std::io::BufWriter::new(file))?;
        }
        Ok((self.report, self.model))
    }
}

/// The learner loop: pull episodes, train while budget allows, publish after
/// every step, stop once every producer has finished and the queue is empty.
pub fn run_learner(mut trainer: Trainer, queue: SampleQueue) -> Result<(TrainReport, Model), RuntimeError> {
    'outer: loop {
        loop {
            match queue.try_pop() {
                Some(Pop::Item(e)) => trainer.ingest(e)?,
                Some(Pop::Exhausted) => break 'outer,
                None => break,
            }
        }
        if trainer.ready() && trainer.steps() < trainer.budget() {
            trainer.train_step()?;
            trainer.maybe_eval()?;
            continue;
        }
        trainer.maybe_eval()?;
        match queue.pop_timeout(IDLE_WAIT) {
            Some(Pop::Item(e)) => trainer.ingest(e)?,
            Some(Pop::Exhausted) => break,
            None => {}
        }
    }
    trainer.train_owed()?;
    trainer.maybe_eval()?;
    trainer.finish()
}
