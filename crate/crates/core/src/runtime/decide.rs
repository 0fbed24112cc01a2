use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EpsilonSchedule, RuntimeError};
use crate::hiddenstore::HiddenStateStore;
use crate::nets::{Layout, Model, NetError};

/// Counters kept by a [`DecisionEngine`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DecisionStats {
    pub decisions: u64,
    /// Episode starts at which the recurrent state was checked.
    pub zero_start_checks: u64,
    /// Episode starts whose recurrent state was not all zero.
    pub zero_start_violations: u64,
}

/// Epsilon-greedy action selection for a set of environments, each with its
/// own recurrent state and previous joint action.
#[derive(Debug, Clone)]
pub struct DecisionEngine {
    model: Model,
    version: u64,
    hidden: HiddenStateStore,
    last_actions: Vec<Option<usize>>,
    episode_start: Vec<bool>,
    rng: ChaCha8Rng,
    schedule: EpsilonSchedule,
    stats: DecisionStats,
}

impl DecisionEngine {
    pub fn new(model: Model, n_envs: usize, schedule: EpsilonSchedule, seed: u64) -> Self {
        let l = model.layout;
        let n_envs = n_envs.max(1);
        Self {
            hidden: HiddenStateStore::new(n_envs, l.n_agents, l.hidden),
            last_actions: vec![None; n_envs * l.n_agents],
            episode_start: vec![true; n_envs],
            rng: ChaCha8Rng::seed_from_u64(seed),
            schedule,
            stats: DecisionStats::default(),
            version: 0,
            model,
        }
    }

    pub fn layout(&self) -> Layout {
        self.model.layout
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn stats(&self) -> DecisionStats {
        self.stats
    }

    pub fn epsilon(&self) -> f64 {
        self.schedule.value(self.stats.decisions)
    }

    pub fn load_flat(&mut self, version: u64, flat: &[f64]) -> Result<(), NetError> {
        self.model.load_flat(flat)?;
        self.version = version;
        Ok(())
    }

    pub fn load_model(&mut self, model: &Model, version: u64) {
        self.model.clone_from(model);
        self.version = version;
    }

    /// Joint action for environment `slot`, at the scheduled exploration rate.
    pub fn decide(&mut self, slot: usize, obs: &[Vec<f64>], avail: &[Vec<bool>]) -> Result<Vec<usize>, RuntimeError> {
        let eps = self.epsilon();
        self.decide_with(slot, obs, avail, eps)
    }

    pub fn decide_with(
        &mut self,
        slot: usize,
        obs: &[Vec<f64>],
        avail: &[Vec<bool>],
        eps: f64,
    ) -> Result<Vec<usize>, RuntimeError> {
        let n = self.model.layout.n_agents;
        if obs.len() != n || avail.len() != n {
            return Err(NetError::DimensionMismatch { what: "agents", expected: n, got: obs.len().min(avail.len()) }.into());
        }
        if self.episode_start[slot] {
            self.stats.zero_start_checks += 1;
            if !self.hidden.env_is_zero(slot).map_err(|e| RuntimeError::Config(e.to_string()))? {
                self.stats.zero_start_violations += 1;
            }
            self.episode_start[slot] = false;
        }
        self.stats.decisions += 1;
        let mut joint = Vec::with_capacity(n);
        for agent in 0..n {
            let h_in = self.hidden.get(slot, agent).map_err(|e| RuntimeError::Config(e.to_string()))?;
            let out = self.model.agent.forward_indexed(
                &obs[agent],
                self.last_actions[slot * n + agent],
                agent,
                h_in,
                &avail[agent],
            )?;
            self.hidden.put(slot, agent, &out.hidden).map_err(|e| RuntimeError::Config(e.to_string()))?;
            let legal = avail[agent].iter().filter(|&&a| a).count();
            if legal == 0 {
                return Err(RuntimeError::NoAvailableAction { agent });
            }
            let explore = self.rng.random::<f64>() < eps;
            let action = if explore {
                let k = self.rng.random_range(0..legal);
                avail[agent].iter().enumerate().filter(|(_, &a)| a).nth(k).map(|(i, _)| i).unwrap()
            } else {
                out.greedy_action()
            };
            debug_assert!(avail[agent][action], "selected an unavailable action");
            self.last_actions[slot * n + agent] = Some(action);
            joint.push(action);
        }
        Ok(joint)
    }

    /// Forgets the recurrent state and previous action of environment `slot`.
    pub fn end_episode(&mut self, slot: usize) {
        let n = self.model.layout.n_agents;
        let _ = self.hidden.reset_env(slot);
        self.last_actions[slot * n..(slot + 1) * n].fill(None);
        self.episode_start[slot] = true;
    }

    pub fn hidden(&self) -> &HiddenStateStore {
        &self.hidden
    }
}
