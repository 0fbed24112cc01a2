use std::thread;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_joint_action, EnvError, EnvSpec, MultiAgentEnv, StepResult};

/// Probability that a non-default action is available on a given step.
const AVAIL_PROB: f64 = 0.8;

/// Environment with arbitrary tensor shapes and a simulated step cost.
///
/// Observations are uniform noise in `[-1, 1)` with a one-hot agent id in the
/// leading `n_agents` slots (when `obs_dim` leaves room for it). Action 0 is
/// always available. The reward is the fraction of agents that pick action 1
/// when the first noise feature of their observation is positive and action 0
/// otherwise, which gives a learner something to fit. Episodes always run to
/// `episode_limit` and end by truncation.
#[derive(Debug, Clone)]
pub struct SyntheticEnv {
    spec: EnvSpec,
    rng: ChaCha8Rng,
    t: usize,
    done: bool,
    last: Option<StepResult>,
}

impl SyntheticEnv {
    pub fn new(spec: EnvSpec, seed: u64) -> Result<Self, EnvError> {
        spec.validate()?;
        Ok(Self {
            spec,
            rng: ChaCha8Rng::seed_from_u64(seed),
            t: 0,
            done: true,
            last: None,
        })
    }

    fn id_slots(&self) -> usize {
        if self.spec.obs_dim > self.spec.n_agents {
            self.spec.n_agents
        } else {
            0
        }
    }

    fn emit(&mut self, reward: f64) -> StepResult {
        let spec = &self.spec;
        let ids = self.id_slots();
        let mut per_agent_obs = Vec::with_capacity(spec.n_agents);
        let mut avail_actions = Vec::with_capacity(spec.n_agents);
        for agent in 0..spec.n_agents {
            let mut obs = vec![0.0; spec.obs_dim];
            if ids > 0 {
                obs[agent] = 1.0;
            }
            for x in obs.iter_mut().skip(ids) {
                *x = self.rng.random_range(-1.0..1.0);
            }
            per_agent_obs.push(obs);
            let avail: Vec<bool> = (0..spec.n_actions)
                .map(|a| a == 0 || self.rng.random_bool(AVAIL_PROB))
                .collect();
            avail_actions.push(avail);
        }
        let global_state = (0..spec.state_dim)
            .map(|_| self.rng.random_range(-1.0..1.0))
            .collect();
        StepResult {
            per_agent_obs,
            global_state,
            reward,
            done: self.done,
            terminated: false,
            avail_actions,
        }
    }
}

impl MultiAgentEnv for SyntheticEnv {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self) -> StepResult {
        self.t = 0;
        self.done = false;
        let r = self.emit(0.0);
        self.last = Some(r.clone());
        r
    }

    fn step(&mut self, joint_action: &[usize]) -> Result<StepResult, EnvError> {
        let last = match (&self.last, self.done) {
            (Some(last), false) => last,
            _ => return Err(EnvError::EpisodeFinished),
        };
        check_joint_action(&self.spec, &last.avail_actions, joint_action)?;
        let ids = self.id_slots();
        let hits = joint_action
            .iter()
            .enumerate()
            .filter(|&(agent, &a)| {
                let cue = last.per_agent_obs[agent][ids.min(self.spec.obs_dim - 1)];
                a == usize::from(cue > 0.0)
            })
            .count();
        let reward = hits as f64 / self.spec.n_agents as f64;
        if !self.spec.step_latency.is_zero() {
            thread::sleep(self.spec.step_latency);
        }
        self.t += 1;
        self.done = self.t >= self.spec.episode_limit;
        let r = self.emit(reward);
        self.last = Some(r.clone());
        Ok(r)
    }
}
