//! Channels between the roles.
//!
//! * [`obs_act_pipe`]: one bidirectional observation/action conduit per actor,
//!   with the worker multiplexing all of its actors through a [`PipeSet`].
//! * [`sample_queue`]: the multi-producer, single-consumer episode queue that
//!   carries whole trajectories from actors to whoever trains on them.
//!
//! Both are bounded and blocking. A consumer learns that the producers are
//! done only when a lane is empty *and* every sending endpoint has been
//! closed, never from a momentarily empty lane.

pub mod frame;
mod obsact;
mod queue;

use thiserror::Error;

pub use crate::episode::EpisodeRecord;
pub use obsact::{obs_act_pipe, ActionReply, ActorEnd, ObsRequest, PipeSet, Poll, WorkerEnd};
pub use queue::{sample_queue, Pop, QueueSender, SampleQueue};

/// Observation and action lane capacity per actor.
pub const DEFAULT_PIPE_CAPACITY: usize = 2;
/// Episodes buffered in a sample queue.
pub const DEFAULT_QUEUE_CAPACITY: usize = 64;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum PipeError {
    #[error("channel closed")]
    Closed,
    #[error("protocol violation: {0}")]
    ProtocolViolation(String),
    #[error("reply for actor {got} arrived on the pipe of actor {expected}")]
    Misrouted { expected: u32, got: u32 },
    #[error("no pipe for actor {0}")]
    UnknownActor(u32),
    #[error("frame: {0}")]
    Frame(String),
}
