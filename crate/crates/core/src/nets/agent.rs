use super::linear::{sigmoid, Linear};
use super::{check_dim, Layout, NetError};

/// Surrogate Q-value for masked actions. Only used for action selection and
/// greedy maxima, never differentiated.
pub const MASKED_Q: f64 = -1e9;

/// Per-agent recurrent Q-network shared by all agents:
/// `fc_in -> GRU cell -> fc_out`. The input is the agent's observation
/// concatenated with a one-hot of its previous action (all zeros on the first
/// step) and a one-hot of its agent id.
#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    pub fc_in: Linear,
    pub gru_input: Linear,
    pub gru_hidden: Linear,
    pub fc_out: Linear,
    pub(crate) layout: Layout,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentOutput {
    pub q_values: Vec<f64>,
    /// `q_values` with unavailable actions replaced by [`MASKED_Q`].
    pub masked_q_values: Vec<f64>,
    pub hidden: Vec<f64>,
}

impl AgentOutput {
    /// Lowest-index action among the best available ones.
    pub fn greedy_action(&self) -> usize {
        argmax(&self.masked_q_values)
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn mask(q: &[f64], avail: &[bool]) -> Vec<f64> {
    q.iter()
        .zip(avail)
        .map(|(&v, &ok)| if ok { v } else { MASKED_Q })
        .collect()
}

/// Intermediate values of one recurrent step, kept for the backward pass.
#[derive(Debug, Clone)]
pub(crate) struct StepCache {
    pub x: Vec<f64>,
    pub e: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub r: Vec<f64>,
    pub z: Vec<f64>,
    pub n: Vec<f64>,
    /// `W_hn h_prev + b_hn`, the hidden contribution to the candidate gate.
    pub gh_n: Vec<f64>,
    pub h: Vec<f64>,
}

impl QNetwork {
    pub fn zeros(layout: &Layout) -> Self {
        let h = layout.hidden;
        Self {
            fc_in: Linear::zeros(h, layout.input_dim()),
            gru_input: Linear::zeros(3 * h, h),
            gru_hidden: Linear::zeros(3 * h, h),
            fc_out: Linear::zeros(layout.n_actions, h),
            layout: *layout,
        }
    }

    pub(crate) fn linears(&self) -> Vec<(&'static str, &Linear)> {
        vec![
            ("fc_in", &self.fc_in),
            ("gru_input", &self.gru_input),
            ("gru_hidden", &self.gru_hidden),
            ("fc_out", &self.fc_out),
        ]
    }

    pub(crate) fn linears_mut(&mut self) -> [&mut Linear; 4] {
        [&mut self.fc_in, &mut self.gru_input, &mut self.gru_hidden, &mut self.fc_out]
    }

    pub fn hidden_dim(&self) -> usize {
        self.layout.hidden
    }

    /// Builds `obs ++ onehot(last_action) ++ onehot(agent)`.
    pub fn input(&self, obs: &[f64], last_action: Option<usize>, agent: usize) -> Vec<f64> {
        let l = &self.layout;
        let mut x = Vec::with_capacity(l.input_dim());
        x.extend_from_slice(obs);
        let base = x.len();
        x.resize(base + l.n_actions + l.n_agents, 0.0);
        if let Some(a) = last_action {
            x[base + a] = 1.0;
        }
        x[base + l.n_actions + agent] = 1.0;
        x
    }

    /// One decision step for one agent. `last_action` and `agent_id` are
    /// one-hot vectors (`last_action` all zeros at the start of an episode).
    pub fn forward(
        &self,
        obs: &[f64],
        last_action: &[f64],
        agent_id: &[f64],
        hidden_in: &[f64],
        avail: &[bool],
    ) -> Result<AgentOutput, NetError> {
        let l = &self.layout;
        check_dim("obs", l.obs_dim, obs.len())?;
        check_dim("last_action", l.n_actions, last_action.len())?;
        check_dim("agent_id", l.n_agents, agent_id.len())?;
        check_dim("hidden_in", l.hidden, hidden_in.len())?;
        check_dim("avail", l.n_actions, avail.len())?;
        let mut x = Vec::with_capacity(l.input_dim());
        x.extend_from_slice(obs);
        x.extend_from_slice(last_action);
        x.extend_from_slice(agent_id);
        let (q, cache) = self.step(x, hidden_in);
        Ok(AgentOutput {
            masked_q_values: mask(&q, avail),
            q_values: q,
            hidden: cache.h,
        })
    }

    /// Same as [`QNetwork::forward`] with index-encoded action and agent id.
    pub fn forward_indexed(
        &self,
        obs: &[f64],
        last_action: Option<usize>,
        agent: usize,
        hidden_in: &[f64],
        avail: &[bool],
    ) -> Result<AgentOutput, NetError> {
        let l = &self.layout;
        check_dim("obs", l.obs_dim, obs.len())?;
        check_dim("hidden_in", l.hidden, hidden_in.len())?;
        check_dim("avail", l.n_actions, avail.len())?;
        if agent >= l.n_agents {
            return Err(NetError::DimensionMismatch { what: "agent_id", expected: l.n_agents, got: agent + 1 });
        }
        if let Some(a) = last_action {
            if a >= l.n_actions {
                return Err(NetError::DimensionMismatch { what: "last_action", expected: l.n_actions, got: a + 1 });
            }
        }
        let (q, cache) = self.step(self.input(obs, last_action, agent), hidden_in);
        Ok(AgentOutput {
            masked_q_values: mask(&q, avail),
            q_values: q,
            hidden: cache.h,
        })
    }

    pub(crate) fn step(&self, x: Vec<f64>, h_prev: &[f64]) -> (Vec<f64>, StepCache) {
        let h = self.layout.hidden;
        let e = self.fc_in.forward(&x);
        let gi = self.gru_input.forward(&e);
        let gh = self.gru_hidden.forward(h_prev);
        let mut r = vec![0.0; h];
        let mut z = vec![0.0; h];
        let mut n = vec![0.0; h];
        let mut h_new = vec![0.0; h];
        for k in 0..h {
            r[k] = sigmoid(gi[k] + gh[k]);
            z[k] = sigmoid(gi[h + k] + gh[h + k]);
            n[k] = (gi[2 * h + k] + r[k] * gh[2 * h + k]).tanh();
            h_new[k] = (1.0 - z[k]) * n[k] + z[k] * h_prev[k];
        }
        let q = self.fc_out.forward(&h_new);
        let cache = StepCache {
            x,
            e,
            h_prev: h_prev.to_vec(),
            r,
            z,
            n,
            gh_n: gh[2 * h..].to_vec(),
            h: h_new,
        };
        (q, cache)
    }

    /// Backpropagation through time for one agent. `dq[t]` is the loss
    /// gradient with respect to the Q-vector emitted at step `t`.
    pub(crate) fn backward_through_time(&self, caches: &[StepCache], dq: &[Vec<f64>], grad: &mut QNetwork) {
        let h = self.layout.hidden;
        let mut dh_next = vec![0.0; h];
        let mut dgi = vec![0.0; 3 * h];
        let mut dgh = vec![0.0; 3 * h];
        for (c, dq_t) in caches.iter().zip(dq).rev() {
            let mut dh = dh_next;
            self.fc_out.accumulate(&mut grad.fc_out, dq_t, &c.h);
            self.fc_out.backprop_input(dq_t, &mut dh);

            let mut dh_prev = vec![0.0; h];
            for k in 0..h {
                let (r, z, n) = (c.r[k], c.z[k], c.n[k]);
                let dn = dh[k] * (1.0 - z);
                let dz = dh[k] * (c.h_prev[k] - n);
                dh_prev[k] = dh[k] * z;
                let dan = dn * (1.0 - n * n);
                let dr = dan * c.gh_n[k];
                let dar = dr * r * (1.0 - r);
                let daz = dz * z * (1.0 - z);
                dgi[k] = dar;
                dgi[h + k] = daz;
                dgi[2 * h + k] = dan;
                dgh[k] = dar;
                dgh[h + k] = daz;
                dgh[2 * h + k] = dan * r;
            }
            self.gru_hidden.accumulate(&mut grad.gru_hidden, &dgh, &c.h_prev);
            self.gru_hidden.backprop_input(&dgh, &mut dh_prev);
            self.gru_input.accumulate(&mut grad.gru_input, &dgi, &c.e);
            let mut de = vec![0.0; h];
            self.gru_input.backprop_input(&dgi, &mut de);
            self.fc_in.accumulate(&mut grad.fc_in, &de, &c.x);
            dh_next = dh_prev;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nets::{MixerKind, Model};

    fn layout() -> Layout {
        Layout { n_agents: 3, n_actions: 4, obs_dim: 5, state_dim: 2, hidden: 6, mixer: MixerKind::Vdn, embed: 1 }
    }

    fn one_hot(n: usize, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        v
    }

    #[test]
    fn zero_params_give_zero_outputs() {
        let net = QNetwork::zeros(&layout());
        let out = net
            .forward(&[0.3, -1.0, 2.0, 0.5, 0.1], &one_hot(4, 2), &one_hot(3, 1), &[0.0; 6], &[true; 4])
            .unwrap();
        assert_eq!(out.q_values, vec![0.0; 4]);
        assert_eq!(out.hidden, vec![0.0; 6]);
    }

    #[test]
    fn masking_replaces_unavailable() {
        let model = Model::init(layout(), 3);
        let out = model
            .agent
            .forward(&[0.1; 5], &[0.0; 4], &one_hot(3, 0), &[0.0; 6], &[false, true, false, true])
            .unwrap();
        assert_eq!(out.masked_q_values[0], MASKED_Q);
        assert_eq!(out.masked_q_values[2], MASKED_Q);
        assert_eq!(out.masked_q_values[1], out.q_values[1]);
        assert!([1, 3].contains(&out.greedy_action()));
    }

    #[test]
    fn agent_id_changes_output() {
        let model = Model::init(layout(), 9);
        let run = |id| {
            model.agent.forward(&[0.2; 5], &[0.0; 4], &one_hot(3, id), &[0.0; 6], &[true; 4]).unwrap().q_values
        };
        assert_ne!(run(0), run(1));
        assert_ne!(run(1), run(2));
    }

    #[test]
    fn indexed_matches_one_hot() {
        let model = Model::init(layout(), 5);
        let h: Vec<f64> = (0..6).map(|k| k as f64 * 0.1).collect();
        let a = model.agent.forward(&[0.4; 5], &one_hot(4, 3), &one_hot(3, 2), &h, &[true; 4]).unwrap();
        let b = model.agent.forward_indexed(&[0.4; 5], Some(3), 2, &h, &[true; 4]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dimension_errors() {
        let net = QNetwork::zeros(&layout());
        assert!(matches!(
            net.forward(&[0.0; 4], &[0.0; 4], &one_hot(3, 0), &[0.0; 6], &[true; 4]),
            Err(NetError::DimensionMismatch { what: "obs", .. })
        ));
        assert!(matches!(
            net.forward(&[0.0; 5], &[0.0; 4], &one_hot(3, 0), &[0.0; 5], &[true; 4]),
            Err(NetError::DimensionMismatch { what: "hidden_in", .. })
        ));
        assert!(net.forward_indexed(&[0.0; 5], None, 3, &[0.0; 6], &[true; 4]).is_err());
    }

    #[test]
    fn argmax_prefers_lowest_index_on_ties() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[MASKED_Q, MASKED_Q, -5.0]), 2);
    }
}
