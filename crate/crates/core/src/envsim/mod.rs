//! Multi-agent environments.
//!
//! Two concrete environments live here: [`MatrixGame`], a repeated cooperative
//! matrix game whose optimum can be enumerated, and [`SyntheticEnv`], which
//! emits seeded random tensors with configurable shapes and a simulated
//! per-step cost.

mod matrix;
mod synthetic;

use std::time::Duration;

use thiserror::Error;

pub use matrix::{optimal_joint_return, CoopMatrixGameSpec, MatrixGame, MAX_ENUMERATION};
pub use synthetic::SyntheticEnv;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum EnvError {
    #[error("invalid environment spec: {0}")]
    InvalidSpec(String),
    #[error("expected {expected} actions, got {got}")]
    WrongActionCount { expected: usize, got: usize },
    #[error("agent {agent}: action {action} is out of range")]
    ActionOutOfRange { agent: usize, action: usize },
    #[error("agent {agent}: action {action} is not available")]
    UnavailableAction { agent: usize, action: usize },
    #[error("episode already finished; call reset first")]
    EpisodeFinished,
    #[error("joint action space of size {size} is too large to enumerate")]
    TooLargeToEnumerate { size: f64 },
}

/// Tensor shapes and timing of an environment.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    pub n_agents: usize,
    pub n_actions: usize,
    pub obs_dim: usize,
    pub state_dim: usize,
    pub episode_limit: usize,
    /// Simulated cost of a single environment step.
    pub step_latency: Duration,
}

impl EnvSpec {
    pub fn new(
        n_agents: usize,
        n_actions: usize,
        state_dim: usize,
        obs_dim: usize,
        episode_limit: usize,
    ) -> Self {
        Self {
            n_agents,
            n_actions,
            obs_dim,
            state_dim,
            episode_limit,
            step_latency: Duration::ZERO,
        }
    }

    pub fn with_latency(mut self, latency: Duration) -> Self {
        self.step_latency = latency;
        self
    }

    /// Shapes of the standard StarCraft micro-management scenarios.
    pub fn scenario(name: &str) -> Option<Self> {
        // (actions, agents, state, obs, limit)
        let (a, n, s, o, l) = match name {
            "3m" => (9, 3, 48, 30, 60),
            "8m" => (14, 8, 168, 80, 120),
            "2s3z" => (11, 5, 120, 80, 120),
            "5m_vs_6m" => (12, 5, 98, 55, 70),
            _ => return None,
        };
        Some(Self::new(n, a, s, o, l))
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        let check = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(EnvError::InvalidSpec(what.to_string()))
            }
        };
        check(self.n_agents >= 1, "n_agents must be >= 1")?;
        check(self.n_actions >= 2, "n_actions must be >= 2")?;
        check(self.obs_dim >= 1, "obs_dim must be >= 1")?;
        check(self.state_dim >= 1, "state_dim must be >= 1")?;
        check(self.episode_limit >= 1, "episode_limit must be >= 1")
    }
}

/// What the environment emits after `reset` and every `step`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub per_agent_obs: Vec<Vec<f64>>,
    pub global_state: Vec<f64>,
    /// Team-shared reward of the transition that produced this result.
    pub reward: f64,
    pub done: bool,
    /// `done` because of a terminal condition rather than the episode limit.
    pub terminated: bool,
    pub avail_actions: Vec<Vec<bool>>,
}

impl StepResult {
    pub fn conforms_to(&self, spec: &EnvSpec) -> bool {
        self.per_agent_obs.len() == spec.n_agents
            && self.per_agent_obs.iter().all(|o| o.len() == spec.obs_dim)
            && self.global_state.len() == spec.state_dim
            && self.avail_actions.len() == spec.n_agents
            && self
                .avail_actions
                .iter()
                .all(|a| a.len() == spec.n_actions && a.iter().any(|&x| x))
    }
}

pub trait MultiAgentEnv: Send {
    fn spec(&self) -> &EnvSpec;

    fn reset(&mut self) -> StepResult;

    fn step(&mut self, joint_action: &[usize]) -> Result<StepResult, EnvError>;

    fn close(&mut self) {}

    /// Best achievable episode return, when the environment knows it.
    fn optimal_return(&self) -> Option<f64> {
        None
    }
}

/// Validates a joint action against the availability mask of the last result.
pub(crate) fn check_joint_action(
    spec: &EnvSpec,
    avail: &[Vec<bool>],
    joint_action: &[usize],
) -> Result<(), EnvError> {
    if joint_action.len() != spec.n_agents {
        return Err(EnvError::WrongActionCount {
            expected: spec.n_agents,
            got: joint_action.len(),
        });
    }
    for (agent, &action) in joint_action.iter().enumerate() {
        if action >= spec.n_actions {
            return Err(EnvError::ActionOutOfRange { agent, action });
        }
        if !avail[agent][action] {
            return Err(EnvError::UnavailableAction { agent, action });
        }
    }
    Ok(())
}

/// Recipe for building environment instances, one per actor.
#[derive(Debug, Clone, PartialEq)]
pub enum EnvConfig {
    Matrix(CoopMatrixGameSpec),
    Synthetic(EnvSpec),
}

impl EnvConfig {
    pub fn spec(&self) -> EnvSpec {
        match self {
            EnvConfig::Matrix(game) => game.env_spec(),
            EnvConfig::Synthetic(spec) => spec.clone(),
        }
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        match self {
            EnvConfig::Matrix(game) => game.validate(),
            EnvConfig::Synthetic(spec) => spec.validate(),
        }
    }

    pub fn build(&self, seed: u64) -> Result<Box<dyn MultiAgentEnv>, EnvError> {
        Ok(match self {
            EnvConfig::Matrix(game) => Box::new(MatrixGame::new(game.clone())?),
            EnvConfig::Synthetic(spec) => Box::new(SyntheticEnv::new(spec.clone(), seed)?),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenario_shapes() {
        let s = EnvSpec::scenario("3m").unwrap();
        assert_eq!((s.n_actions, s.n_agents, s.state_dim, s.obs_dim, s.episode_limit), (9, 3, 48, 30, 60));
        let s = EnvSpec::scenario("8m").unwrap();
        assert_eq!((s.n_actions, s.n_agents, s.state_dim, s.obs_dim, s.episode_limit), (14, 8, 168, 80, 120));
        let s = EnvSpec::scenario("2s3z").unwrap();
        assert_eq!((s.n_actions, s.n_agents, s.state_dim, s.obs_dim, s.episode_limit), (11, 5, 120, 80, 120));
        let s = EnvSpec::scenario("5m_vs_6m").unwrap();
        assert_eq!((s.n_actions, s.n_agents, s.state_dim, s.obs_dim, s.episode_limit), (12, 5, 98, 55, 70));
        assert!(EnvSpec::scenario("27m_vs_30m").is_none());
    }

    #[test]
    fn spec_validation() {
        assert!(EnvSpec::new(1, 2, 1, 1, 1).validate().is_ok());
        assert!(EnvSpec::new(0, 2, 1, 1, 1).validate().is_err());
        assert!(EnvSpec::new(1, 1, 1, 1, 1).validate().is_err());
        assert!(EnvSpec::new(1, 2, 0, 1, 1).validate().is_err());
        assert!(EnvSpec::new(1, 2, 1, 0, 1).validate().is_err());
        assert!(EnvSpec::new(1, 2, 1, 1, 0).validate().is_err());
    }
}
