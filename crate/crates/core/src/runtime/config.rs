use std::path::PathBuf;
use std::time::Duration;

use super::RuntimeError;
use crate::envsim::EnvConfig;
use crate::nets::optim::OptimizerKind;
use crate::nets::{Execution, Layout, MixerKind};
use crate::pipes::{DEFAULT_PIPE_CAPACITY, DEFAULT_QUEUE_CAPACITY};
use crate::replay::{DEFAULT_CAPACITY, DEFAULT_MIN_FILL};

fn invalid(msg: impl Into<String>) -> RuntimeError {
    RuntimeError::Config(msg.into())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActorConfig {
    pub actor_id: u32,
    pub env: EnvConfig,
    /// Episodes to play.
    pub episodes: u64,
    /// Environment seed.
    pub seed: u64,
}

impl ActorConfig {
    pub fn validate(&self) -> Result<(), RuntimeError> {
        if self.episodes == 0 {
            return Err(invalid("an actor must play at least one episode"));
        }
        Ok(self.env.validate()?)
    }
}

/// Linear annealing of the exploration rate over decisions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub anneal_steps: u64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        Self { start: 1.0, end: 0.05, anneal_steps: 50_000 }
    }
}

impl EpsilonSchedule {
    pub fn constant(eps: f64) -> Self {
        Self { start: eps, end: eps, anneal_steps: 0 }
    }

    pub fn value(&self, decision: u64) -> f64 {
        if self.anneal_steps == 0 || decision >= self.anneal_steps {
            return self.end;
        }
        let frac = decision as f64 / self.anneal_steps as f64;
        self.start + (self.end - self.start) * frac
    }

    pub fn validate(&self) -> Result<(), RuntimeError> {
        let ok = |x: f64| (0.0..=1.0).contains(&x);
        if !ok(self.start) || !ok(self.end) {
            return Err(invalid("epsilon must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkerConfig {
    pub epsilon: EpsilonSchedule,
    /// Refetch parameters after this many decision batches, on top of every
    /// episode boundary.
    pub sync_period: u64,
    pub poll_timeout: Duration,
}

impl Default for WorkerConfig {
    fn default() -> Self {
        Self { epsilon: EpsilonSchedule::default(), sync_period: 32, poll_timeout: Duration::from_millis(20) }
    }
}

impl WorkerConfig {
    pub fn validate(&self) -> Result<(), RuntimeError> {
        if self.sync_period == 0 {
            return Err(invalid("sync_period must be >= 1"));
        }
        self.epsilon.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerConfig {
    pub batch_size: usize,
    pub gamma: f64,
    pub lr: f64,
    /// Train steps between target network refreshes.
    pub target_sync: u64,
    /// Train steps owed per ingested episode.
    pub train_steps_per_ingest: f64,
    pub min_fill: usize,
    pub replay_capacity: usize,
    pub optimizer: OptimizerKind,
    pub grad_clip: Option<f64>,
    /// Extra time spent per train step, for isolating the cost of training.
    pub train_cost_padding: Duration,
    pub exec: Execution,
    /// Final parameters are written here when set.
    pub checkpoint: Option<PathBuf>,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            gamma: 0.99,
            lr: 5e-4,
            target_sync: 200,
            train_steps_per_ingest: 1.0,
            min_fill: DEFAULT_MIN_FILL,
            replay_capacity: DEFAULT_CAPACITY,
            optimizer: OptimizerKind::rmsprop(),
            grad_clip: Some(10.0),
            train_cost_padding: Duration::ZERO,
            exec: Execution::default(),
            checkpoint: None,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<(), RuntimeError> {
        if self.batch_size == 0 {
            return Err(invalid("batch_size must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(invalid("gamma must lie in [0, 1]"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(invalid("learning rate must be positive"));
        }
        if self.target_sync == 0 {
            return Err(invalid("target_sync must be >= 1"));
        }
        if !(self.train_steps_per_ingest >= 0.0 && self.train_steps_per_ingest.is_finite()) {
            return Err(invalid("train_steps_per_ingest must be >= 0"));
        }
        if self.replay_capacity < self.batch_size {
            return Err(invalid("replay_capacity must hold at least one batch"));
        }
        if let Some(c) = self.grad_clip {
            if !(c > 0.0) {
                return Err(invalid("grad_clip must be positive"));
            }
        }
        Ok(())
    }
}

/// Periodic frozen-parameter evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    /// Evaluate after every this many ingested episodes; 0 disables.
    pub every_episodes: u64,
    pub episodes: usize,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { every_episodes: 0, episodes: 20, epsilon: 0.0, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Baseline,
    Aw,
    Awl,
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Baseline => "baseline",
            Mode::Aw => "aw",
            Mode::Awl => "awl",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = RuntimeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "baseline" => Ok(Mode::Baseline),
            "aw" => Ok(Mode::Aw),
            "awl" => Ok(Mode::Awl),
            other => Err(invalid(format!("unknown mode {other:?}"))),
        }
    }
}

/// Everything needed to launch one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub env: EnvConfig,
    pub workers: usize,
    pub actors_per_worker: usize,
    pub episodes_per_actor: u64,
    pub hidden: usize,
    pub embed: usize,
    pub mixer: MixerKind,
    pub worker: WorkerConfig,
    pub learner: LearnerConfig,
    pub eval: Option<EvalConfig>,
    pub seed: u64,
    pub pipe_capacity: usize,
    pub queue_capacity: usize,
}

impl RunConfig {
    pub fn new(mode: Mode, env: EnvConfig, seed: u64) -> Self {
        Self {
            mode,
            env,
            workers: 1,
            actors_per_worker: 1,
            episodes_per_actor: 1,
            hidden: Layout::DEFAULT_HIDDEN,
            embed: Layout::DEFAULT_EMBED,
            mixer: MixerKind::Mono,
            worker: WorkerConfig::default(),
            learner: LearnerConfig::default(),
            eval: None,
            seed,
            pipe_capacity: DEFAULT_PIPE_CAPACITY,
            queue_capacity: DEFAULT_QUEUE_CAPACITY,
        }
    }

    pub fn layout(&self) -> Layout {
        let spec = self.env.spec();
        Layout {
            n_agents: spec.n_agents,
            n_actions: spec.n_actions,
            obs_dim: spec.obs_dim,
            state_dim: spec.state_dim,
            hidden: self.hidden,
            mixer: self.mixer,
            embed: self.embed,
        }
    }

    pub fn live_envs(&self) -> usize {
        self.workers * self.actors_per_worker
    }

    pub fn total_episodes(&self) -> u64 {
        self.live_envs() as u64 * self.episodes_per_actor
    }

    pub fn validate(&self) -> Result<(), RuntimeError> {
        self.env.validate()?;
        self.worker.validate()?;
        self.learner.validate()?;
        if self.workers == 0 || self.actors_per_worker == 0 {
            return Err(invalid("workers and actors_per_worker must be >= 1"));
        }
        if self.episodes_per_actor == 0 {
            return Err(invalid("episodes_per_actor must be >= 1"));
        }
        if self.hidden == 0 || self.embed == 0 {
            return Err(invalid("hidden and embed widths must be >= 1"));
        }
        match self.mode {
            Mode::Baseline if self.workers != 1 || self.actors_per_worker != 1 => {
                Err(invalid("baseline runs exactly one worker with one actor"))
            }
            Mode::Aw if self.workers != 1 => Err(invalid("aw runs a single worker")),
            _ => Ok(()),
        }
    }
}
