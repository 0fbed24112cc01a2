//! Whole-episode trajectories and read-only views over them.

use thiserror::Error;

use crate::envsim::EnvSpec;

#[derive(Error, Debug, Clone, PartialEq)]
#[error("malformed episode: {0}")]
pub struct MalformedEpisode(pub String);

/// Dimensions every step of an episode must agree on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpisodeShape {
    pub n_agents: usize,
    pub n_actions: usize,
    pub obs_dim: usize,
    pub state_dim: usize,
    pub episode_limit: usize,
}

impl From<&EnvSpec> for EpisodeShape {
    fn from(spec: &EnvSpec) -> Self {
        Self {
            n_agents: spec.n_agents,
            n_actions: spec.n_actions,
            obs_dim: spec.obs_dim,
            state_dim: spec.state_dim,
            episode_limit: spec.episode_limit,
        }
    }
}

/// One complete game as recorded by an actor.
///
/// An episode of length `L` holds `L` actions and rewards and `L + 1`
/// observation slots (observations, states and availability masks): slot `t`
/// is what the agents saw before acting at step `t`, and slot `L` is the final
/// observation used for bootstrapping after a truncated episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub actor_id: u32,
    pub episode_index: u64,
    pub n_agents: usize,
    pub n_actions: usize,
    pub obs_dim: usize,
    pub state_dim: usize,
    /// `[L + 1, n_agents, obs_dim]`
    pub obs: Vec<f64>,
    /// `[L + 1, state_dim]`
    pub state: Vec<f64>,
    /// `[L + 1, n_agents, n_actions]`
    pub avail: Vec<bool>,
    /// `[L, n_agents]`
    pub actions: Vec<usize>,
    /// `[L]`
    pub rewards: Vec<f64>,
    /// Ended by a terminal condition (as opposed to the episode limit).
    pub terminated: bool,
}

impl EpisodeRecord {
    /// Empty record whose first observation slot still has to be pushed.
    pub fn new(actor_id: u32, episode_index: u64, spec: &EnvSpec) -> Self {
        Self {
            actor_id,
            episode_index,
            n_agents: spec.n_agents,
            n_actions: spec.n_actions,
            obs_dim: spec.obs_dim,
            state_dim: spec.state_dim,
            obs: Vec::new(),
            state: Vec::new(),
            avail: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            terminated: false,
        }
    }

    pub fn push_observation(&mut self, per_agent_obs: &[Vec<f64>], state: &[f64], avail: &[Vec<bool>]) {
        for o in per_agent_obs {
            self.obs.extend_from_slice(o);
        }
        self.state.extend_from_slice(state);
        for a in avail {
            self.avail.extend_from_slice(a);
        }
    }

    pub fn push_transition(&mut self, joint_action: &[usize], reward: f64) {
        self.actions.extend_from_slice(joint_action);
        self.rewards.push(reward);
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn episode_return(&self) -> f64 {
        self.rewards.iter().sum()
    }

    pub fn shape(&self) -> (usize, usize, usize, usize) {
        (self.n_agents, self.n_actions, self.obs_dim, self.state_dim)
    }

    /// Checks internal consistency and agreement with `shape`.
    pub fn validate(&self, shape: &EpisodeShape) -> Result<(), MalformedEpisode> {
        let bad = |msg: String| Err(MalformedEpisode(msg));
        if (self.n_agents, self.n_actions, self.obs_dim, self.state_dim)
            != (shape.n_agents, shape.n_actions, shape.obs_dim, shape.state_dim)
        {
            return bad(format!(
                "dims (agents {}, actions {}, obs {}, state {}) do not match expected {:?}",
                self.n_agents, self.n_actions, self.obs_dim, self.state_dim, shape
            ));
        }
        let l = self.len();
        if l == 0 {
            return bad("episode has no steps".into());
        }
        if l > shape.episode_limit {
            return bad(format!("length {l} exceeds limit {}", shape.episode_limit));
        }
        let slots = l + 1;
        if self.obs.len() != slots * self.n_agents * self.obs_dim {
            return bad(format!("obs tensor has {} values", self.obs.len()));
        }
        if self.state.len() != slots * self.state_dim {
            return bad(format!("state tensor has {} values", self.state.len()));
        }
        if self.avail.len() != slots * self.n_agents * self.n_actions {
            return bad(format!("avail tensor has {} values", self.avail.len()));
        }
        if self.actions.len() != l * self.n_agents {
            return bad(format!("action tensor has {} values", self.actions.len()));
        }
        if self.obs.iter().chain(&self.state).chain(&self.rewards).any(|x| !x.is_finite()) {
            return bad("non-finite value".into());
        }
        let view = self.view();
        for t in 0..l {
            for agent in 0..self.n_agents {
                let a = view.action(t, agent);
                if a >= self.n_actions || !view.avail(t, agent)[a] {
                    return bad(format!("step {t} agent {agent}: action {a} not available"));
                }
            }
        }
        Ok(())
    }

    pub fn view(&self) -> EpisodeView<'_> {
        EpisodeView {
            n_agents: self.n_agents,
            n_actions: self.n_actions,
            obs_dim: self.obs_dim,
            state_dim: self.state_dim,
            len: self.len(),
            terminated: self.terminated,
            obs: &self.obs,
            state: &self.state,
            avail: &self.avail,
            actions: &self.actions,
            rewards: &self.rewards,
        }
    }
}

/// Borrowed episode tensors, either from a record or from one row of a
/// padded training batch. Only slots `0..=len` (observations) and `0..len`
/// (actions, rewards) are ever read.
#[derive(Debug, Clone, Copy)]
pub struct EpisodeView<'a> {
    pub n_agents: usize,
    pub n_actions: usize,
    pub obs_dim: usize,
    pub state_dim: usize,
    pub len: usize,
    pub terminated: bool,
    pub obs: &'a [f64],
    pub state: &'a [f64],
    pub avail: &'a [bool],
    pub actions: &'a [usize],
    pub rewards: &'a [f64],
}

impl<'a> EpisodeView<'a> {
    pub fn obs(&self, t: usize, agent: usize) -> &'a [f64] {
        let start = (t * self.n_agents + agent) * self.obs_dim;
        &self.obs[start..start + self.obs_dim]
    }

    pub fn state(&self, t: usize) -> &'a [f64] {
        &self.state[t * self.state_dim..(t + 1) * self.state_dim]
    }

    pub fn avail(&self, t: usize, agent: usize) -> &'a [bool] {
        let start = (t * self.n_agents + agent) * self.n_actions;
        &self.avail[start..start + self.n_actions]
    }

    pub fn action(&self, t: usize, agent: usize) -> usize {
        self.actions[t * self.n_agents + agent]
    }

    /// The action taken before step `t`, if any.
    pub fn last_action(&self, t: usize, agent: usize) -> Option<usize> {
        (t > 0).then(|| self.action(t - 1, agent))
    }

    pub fn joint_action(&self, t: usize) -> &'a [usize] {
        &self.actions[t * self.n_agents..(t + 1) * self.n_agents]
    }

    pub fn reward(&self, t: usize) -> f64 {
        self.rewards[t]
    }
}
