//! Episode unrolling, TD targets and the masked squared TD loss.

use super::agent::{argmax, mask, StepCache};
use super::mixer::MixCache;
use super::{Model, NetError};
use crate::episode::EpisodeView;
pub use crate::par::Execution;
use crate::par::map_indexed;

/// Recorded forward pass of one episode through agent network and mixer.
#[derive(Debug, Default, Clone)]
pub struct EpisodeTape {
    steps: usize,
    /// `[agent][t]`
    agents: Vec<Vec<StepCache>>,
    /// `[t][agent]`
    chosen: Vec<Vec<usize>>,
    mix: Vec<Option<MixCache>>,
}

impl EpisodeTape {
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn is_empty(&self) -> bool {
        self.steps == 0
    }
}

impl Model {
    /// Per-step, per-agent Q-vectors over observation slots `0..slots`,
    /// starting from a zero hidden state.
    pub fn agent_q_sequence(&self, ep: &EpisodeView, slots: usize) -> Vec<Vec<Vec<f64>>> {
        let h = self.layout.hidden;
        let mut hidden = vec![vec![0.0; h]; ep.n_agents];
        (0..slots)
            .map(|t| {
                (0..ep.n_agents)
                    .map(|i| {
                        let x = self.agent.input(ep.obs(t, i), ep.last_action(t, i), i);
                        let (q, cache) = self.agent.step(x, &hidden[i]);
                        hidden[i] = cache.h;
                        q
                    })
                    .collect()
            })
            .collect()
    }

    /// Unrolls the episode's `len` steps, mixing the Q-values of the actions
    /// actually taken. Returns `Q_total` per step and records the tape.
    pub fn forward_episode(&self, ep: &EpisodeView, tape: &mut EpisodeTape) -> Vec<f64> {
        let n = ep.n_agents;
        let h = self.layout.hidden;
        *tape = EpisodeTape {
            steps: ep.len,
            agents: vec![Vec::with_capacity(ep.len); n],
            chosen: Vec::with_capacity(ep.len),
            mix: Vec::with_capacity(ep.len),
        };
        let mut hidden = vec![vec![0.0; h]; n];
        let mut q_tot = Vec::with_capacity(ep.len);
        for t in 0..ep.len {
            let mut chosen_q = vec![0.0; n];
            for i in 0..n {
                let x = self.agent.input(ep.obs(t, i), ep.last_action(t, i), i);
                let (q, cache) = self.agent.step(x, &hidden[i]);
                chosen_q[i] = q[ep.action(t, i)];
                hidden[i].clone_from(&cache.h);
                tape.agents[i].push(cache);
            }
            let (v, mc) = self.mixer.forward_cached(&chosen_q, ep.state(t));
            q_tot.push(v);
            tape.chosen.push(ep.joint_action(t).to_vec());
            tape.mix.push(mc);
        }
        q_tot
    }

    /// Gradient of `sum_t dq_tot[t] * Q_total[t]` with respect to every
    /// parameter, as a model-shaped tensor set.
    pub fn backward(&self, tape: &EpisodeTape, dq_tot: &[f64]) -> Result<Model, NetError> {
        if tape.is_empty() {
            return Err(NetError::NoTapeRecorded);
        }
        if dq_tot.len() != tape.steps {
            return Err(NetError::DimensionMismatch { what: "dq_tot", expected: tape.steps, got: dq_tot.len() });
        }
        let mut grad = Model::zeros(self.layout);
        let n = tape.agents.len();
        let a = self.layout.n_actions;
        // dq[agent][t] over the action vector
        let mut dq = vec![vec![vec![0.0; a]; tape.steps]; n];
        for t in 0..tape.steps {
            let d_agents = self.mixer.backward(tape.mix[t].as_ref(), dq_tot[t], &mut grad.mixer);
            for i in 0..n {
                dq[i][t][tape.chosen[t][i]] = d_agents[i];
            }
        }
        for i in 0..n {
            self.agent.backward_through_time(&tape.agents[i], &dq[i], &mut grad.agent);
        }
        Ok(grad)
    }
}

/// Bootstrapped targets `y[t] = r[t] + gamma * (1 - done[t]) * Q_tot'(t+1)`
/// where `Q_tot'` mixes, with the target mixer, each agent's greedy value
/// over its available actions at slot `t + 1`.
pub fn episode_targets(target: &Model, ep: &EpisodeView, gamma: f64) -> Vec<f64> {
    let bootstrap = gamma != 0.0;
    let q_next = if bootstrap {
        target.agent_q_sequence(ep, ep.len + 1)
    } else {
        Vec::new()
    };
    (0..ep.len)
        .map(|t| {
            let terminal = ep.terminated && t + 1 == ep.len;
            let r = ep.reward(t);
            if !bootstrap || terminal {
                return r;
            }
            let maxes: Vec<f64> = (0..ep.n_agents)
                .map(|i| {
                    let masked = mask(&q_next[t + 1][i], ep.avail(t + 1, i));
                    masked[argmax(&masked)]
                })
                .collect();
            let (next, _) = target.mixer.forward_cached(&maxes, ep.state(t + 1));
            r + gamma * next
        })
        .collect()
}

pub fn batch_targets(target: &Model, episodes: &[EpisodeView], gamma: f64, exec: Execution) -> Vec<Vec<f64>> {
    map_indexed(episodes.len(), exec, |b| episode_targets(target, &episodes[b], gamma))
}

fn valid_steps(episodes: &[EpisodeView]) -> usize {
    episodes.iter().map(|e| e.len).sum()
}

/// `0.5 * sum (y - Q_total)^2 / (number of valid steps)`.
pub fn masked_td_loss(model: &Model, episodes: &[EpisodeView], targets: &[Vec<f64>], exec: Execution) -> f64 {
    let count = valid_steps(episodes) as f64;
    let per_episode = map_indexed(episodes.len(), exec, |b| {
        let mut tape = EpisodeTape::default();
        let q = model.forward_episode(&episodes[b], &mut tape);
        q.iter().zip(&targets[b]).map(|(q, y)| 0.5 * (q - y) * (q - y)).sum::<f64>()
    });
    per_episode.iter().sum::<f64>() / count
}

/// Loss and its gradient with targets held fixed.
pub fn loss_and_grad(
    model: &Model,
    episodes: &[EpisodeView],
    targets: &[Vec<f64>],
    exec: Execution,
) -> (f64, Model) {
    let count = valid_steps(episodes) as f64;
    let per_episode = map_indexed(episodes.len(), exec, |b| {
        let mut tape = EpisodeTape::default();
        let q = model.forward_episode(&episodes[b], &mut tape);
        let mut loss = 0.0;
        let dq: Vec<f64> = q
            .iter()
            .zip(&targets[b])
            .map(|(q, y)| {
                loss += 0.5 * (q - y) * (q - y);
                (q - y) / count
            })
            .collect();
        let grad = model.backward(&tape, &dq).expect("tape recorded above");
        (loss, grad)
    });
    let mut total = 0.0;
    let mut grad = Model::zeros(model.layout);
    for (l, g) in &per_episode {
        total += l;
        grad.add_scaled(g, 1.0);
    }
    (total / count, grad)
}
