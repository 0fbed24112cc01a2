use super::linear::Linear;
use super::{check_dim, Layout, MixerKind, NetError};

/// Combines the chosen per-agent Q-values into `Q_total`.
#[derive(Debug, Clone, PartialEq)]
pub enum Mixer {
    /// Plain sum of the agent values.
    Vdn { n_agents: usize },
    Mono(MonoMixer),
}

/// Two-layer mixing network whose weights come from hypernetworks on the
/// global state. Mixing weights pass through `abs`, so `Q_total` is
/// non-decreasing in every agent value.
///
/// ```text
/// hidden  = elu(q^T |W1(s)| + b1(s))        W1(s): [agents, M], b1(s): [M]
/// Q_total = hidden . |w2(s)| + v(s)         w2(s): [M],         v(s): scalar
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct MonoMixer {
    pub hyper_w1: Linear,
    pub hyper_b1: Linear,
    pub hyper_w2: Linear,
    pub hyper_v: Linear,
    n_agents: usize,
    embed: usize,
}

/// Forward intermediates of a monotonic mix.
#[derive(Debug, Clone)]
pub struct MixCache {
    q: Vec<f64>,
    state: Vec<f64>,
    pre_w1: Vec<f64>,
    pre_a: Vec<f64>,
    hidden: Vec<f64>,
    pre_w2: Vec<f64>,
}

fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp() - 1.0
    }
}

fn elu_grad(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        x.exp()
    }
}

fn abs_grad(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl MonoMixer {
    pub(crate) fn linears(&self) -> Vec<(&'static str, &Linear)> {
        vec![
            ("hyper_w1", &self.hyper_w1),
            ("hyper_b1", &self.hyper_b1),
            ("hyper_w2", &self.hyper_w2),
            ("hyper_v", &self.hyper_v),
        ]
    }

    pub(crate) fn linears_mut(&mut self) -> [&mut Linear; 4] {
        [&mut self.hyper_w1, &mut self.hyper_b1, &mut self.hyper_w2, &mut self.hyper_v]
    }

    pub(crate) fn forward_cached(&self, q: &[f64], state: &[f64]) -> (f64, MixCache) {
        let m = self.embed;
        let pre_w1 = self.hyper_w1.forward(state);
        let b1 = self.hyper_b1.forward(state);
        let mut pre_a = b1;
        for (i, &qi) in q.iter().enumerate() {
            for j in 0..m {
                pre_a[j] += qi * pre_w1[i * m + j].abs();
            }
        }
        let hidden: Vec<f64> = pre_a.iter().map(|&a| elu(a)).collect();
        let pre_w2 = self.hyper_w2.forward(state);
        let v = self.hyper_v.forward(state)[0];
        let q_tot = hidden.iter().zip(&pre_w2).map(|(h, w)| h * w.abs()).sum::<f64>() + v;
        let cache = MixCache {
            q: q.to_vec(),
            state: state.to_vec(),
            pre_w1,
            pre_a,
            hidden,
            pre_w2,
        };
        (q_tot, cache)
    }

    /// Accumulates parameter gradients into `grad` and returns `dQ_total/dq`
    /// scaled by `dq_tot`.
    pub(crate) fn backward(&self, cache: &MixCache, dq_tot: f64, grad: &mut MonoMixer) -> Vec<f64> {
        let m = self.embed;
        let s = &cache.state;
        self.hyper_v.accumulate(&mut grad.hyper_v, &[dq_tot], s);

        let dpre_w2: Vec<f64> = cache
            .hidden
            .iter()
            .zip(&cache.pre_w2)
            .map(|(h, w)| dq_tot * h * abs_grad(*w))
            .collect();
        self.hyper_w2.accumulate(&mut grad.hyper_w2, &dpre_w2, s);

        let da: Vec<f64> = cache
            .pre_w2
            .iter()
            .zip(&cache.pre_a)
            .map(|(w, a)| dq_tot * w.abs() * elu_grad(*a))
            .collect();
        self.hyper_b1.accumulate(&mut grad.hyper_b1, &da, s);

        let mut dpre_w1 = vec![0.0; self.n_agents * m];
        let mut dq = vec![0.0; self.n_agents];
        for i in 0..self.n_agents {
            for j in 0..m {
                let w = cache.pre_w1[i * m + j];
                dpre_w1[i * m + j] = cache.q[i] * da[j] * abs_grad(w);
                dq[i] += w.abs() * da[j];
            }
        }
        self.hyper_w1.accumulate(&mut grad.hyper_w1, &dpre_w1, s);
        dq
    }
}

impl Mixer {
    pub fn zeros(layout: &Layout) -> Self {
        match layout.mixer {
            MixerKind::Vdn => Mixer::Vdn { n_agents: layout.n_agents },
            MixerKind::Mono => {
                let (n, m, s) = (layout.n_agents, layout.embed, layout.state_dim);
                Mixer::Mono(MonoMixer {
                    hyper_w1: Linear::zeros(n * m, s),
                    hyper_b1: Linear::zeros(m, s),
                    hyper_w2: Linear::zeros(m, s),
                    hyper_v: Linear::zeros(1, s),
                    n_agents: n,
                    embed: m,
                })
            }
        }
    }

    pub fn kind(&self) -> MixerKind {
        match self {
            Mixer::Vdn { .. } => MixerKind::Vdn,
            Mixer::Mono(_) => MixerKind::Mono,
        }
    }

    fn n_agents(&self) -> usize {
        match self {
            Mixer::Vdn { n_agents } => *n_agents,
            Mixer::Mono(m) => m.n_agents,
        }
    }

    /// `Q_total` for the chosen agent values under `global_state`.
    pub fn forward(&self, chosen_qs: &[f64], global_state: &[f64]) -> Result<f64, NetError> {
        check_dim("chosen_qs", self.n_agents(), chosen_qs.len())?;
        match self {
            Mixer::Vdn { .. } => Ok(chosen_qs.iter().sum()),
            Mixer::Mono(m) => {
                check_dim("global_state", m.hyper_v.cols, global_state.len())?;
                Ok(m.forward_cached(chosen_qs, global_state).0)
            }
        }
    }

    pub(crate) fn forward_cached(&self, q: &[f64], state: &[f64]) -> (f64, Option<MixCache>) {
        match self {
            Mixer::Vdn { .. } => (q.iter().sum(), None),
            Mixer::Mono(m) => {
                let (v, c) = m.forward_cached(q, state);
                (v, Some(c))
            }
        }
    }

    pub(crate) fn backward(&self, cache: Option<&MixCache>, dq_tot: f64, grad: &mut Mixer) -> Vec<f64> {
        match (self, cache, grad) {
            (Mixer::Mono(m), Some(c), Mixer::Mono(g)) => m.backward(c, dq_tot, g),
            _ => vec![dq_tot; self.n_agents()],
        }
    }
}
