//! Actor, worker and learner roles, the coupled baseline, and the wiring
//! that runs them as the AW and AWL topologies.
//!
//! * AW: actors talk to one worker, which also owns replay and trains
//!   between decision rounds.
//! * AWL: several workers serve their actors from parameter snapshots while
//!   a separate learner trains on episodes pulled from the sample queue.
//! * Baseline: one environment, acting and training in a single loop.

mod actor;
mod baseline;
mod config;
mod decide;
mod eval;
mod learner;
pub mod metrics;
mod topology;
mod worker;

use std::fmt;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::envsim::EnvError;
use crate::nets::NetError;
use crate::paramstore::ParamError;
use crate::pipes::PipeError;
use crate::replay::ReplayError;

pub use actor::{play_episode, run_actor, run_actor_with_env, ActorReport};
pub use baseline::run_baseline;
pub use config::{ActorConfig, EpsilonSchedule, EvalConfig, LearnerConfig, Mode, RunConfig, WorkerConfig};
pub use decide::{DecisionEngine, DecisionStats};
pub use eval::{evaluate, EvalResult};
pub use learner::{compute_td_targets, run_learner, TrainReport, Trainer};
pub use metrics::{MetricEvent, MetricsSink};
pub use topology::{run, run_aw, run_awl, RunReport};
pub use worker::{run_aw_worker, run_worker, WorkerReport};

/// Which concurrent unit an error came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Actor(u32),
    Worker(u32),
    Learner,
    Baseline,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Role::Actor(i) => write!(f, "actor {i}"),
            Role::Worker(i) => write!(f, "worker {i}"),
            Role::Learner => write!(f, "learner"),
            Role::Baseline => write!(f, "baseline"),
        }
    }
}

#[derive(Error, Debug)]
pub enum RuntimeError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Pipe(#[from] PipeError),
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Replay(#[from] ReplayError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("non-finite loss {loss} at train step {step} ({detail})")]
    NonFiniteLoss { step: u64, loss: f64, detail: String },
    #[error("agent {agent} has no available action")]
    NoAvailableAction { agent: usize },
    #[error("i/o: {0}")]
    Io(String),
    #[error("{role} failed: {source}")]
    Role { role: Role, source: Box<RuntimeError> },
    #[error("{0} panicked")]
    Panicked(Role),
}

impl RuntimeError {
    pub fn in_role(self, role: Role) -> Self {
        match self {
            e @ (RuntimeError::Role { .. } | RuntimeError::Panicked(_)) => e,
            e => RuntimeError::Role { role, source: Box::new(e) },
        }
    }

    /// The innermost error, with role wrappers removed.
    pub fn root(&self) -> &RuntimeError {
        match self {
            RuntimeError::Role { source, .. } => source.root(),
            e => e,
        }
    }
}

/// Independent random streams derived from one experiment seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Env = 1,
    Worker = 2,
    Learner = 3,
    Eval = 4,
}

pub fn derive_seed(base: u64, stream: Stream, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(((stream as u64) << 32) ^ index);
    rng.next_u64()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_seeds_differ() {
        let a = derive_seed(1, Stream::Env, 0);
        assert_eq!(a, derive_seed(1, Stream::Env, 0));
        assert_ne!(a, derive_seed(1, Stream::Env, 1));
        assert_ne!(a, derive_seed(1, Stream::Worker, 0));
        assert_ne!(a, derive_seed(2, Stream::Env, 0));
    }

    #[test]
    fn role_wrapping_is_idempotent() {
        let e = RuntimeError::Config("x".into()).in_role(Role::Actor(3)).in_role(Role::Learner);
        assert_eq!(e.to_string(), "actor 3 failed: invalid configuration: x");
        assert!(matches!(e.root(), RuntimeError::Config(_)));
    }
}
