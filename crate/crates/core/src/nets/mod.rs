//! Recurrent per-agent Q-network, VDN and monotonic mixers, and their
//! hand-written backward passes.
//!
//! All parameters of a [`Model`] flatten into one `f64` vector in a fixed
//! order:
//!
//! | group | tensors (each weight row-major `[out, in]`, then its bias) |
//! |-------|-------------------------------------------------------------|
//! | agent | `fc_in [H, obs+actions+agents]`, `gru_input [3H, H]`, `gru_hidden [3H, H]`, `fc_out [actions, H]` |
//! | mixer (monotonic only) | `hyper_w1 [agents*M, state]`, `hyper_b1 [M, state]`, `hyper_w2 [M, state]`, `hyper_v [1, state]` |
//!
//! The three GRU gate blocks are stacked in the order reset, update, new.

mod agent;
pub mod checkpoint;
mod linear;
pub mod loss;
mod mixer;
pub mod optim;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use agent::{AgentOutput, QNetwork, MASKED_Q};
pub use linear::Linear;
pub use mixer::{MixCache, Mixer, MonoMixer};
pub use loss::{EpisodeTape, Execution};

#[derive(Error, Debug, Clone, PartialEq)]
pub enum NetError {
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("flat parameter vector has length {got}, layout needs {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("backward called without a recorded forward pass")]
    NoTapeRecorded,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

pub(crate) fn check_dim(what: &'static str, expected: usize, got: usize) -> Result<(), NetError> {
    if expected == got {
        Ok(())
    } else {
        Err(NetError::DimensionMismatch { what, expected, got })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MixerKind {
    Vdn,
    Mono,
}

/// Every dimension needed to lay out a [`Model`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub n_agents: usize,
    pub n_actions: usize,
    pub obs_dim: usize,
    pub state_dim: usize,
    pub hidden: usize,
    pub mixer: MixerKind,
    pub embed: usize,
}

impl Layout {
    pub const DEFAULT_HIDDEN: usize = 64;
    pub const DEFAULT_EMBED: usize = 32;

    pub fn input_dim(&self) -> usize {
        self.obs_dim + self.n_actions + self.n_agents
    }

    pub fn agent_param_count(&self) -> usize {
        let h = self.hidden;
        (h * self.input_dim() + h) + 2 * (3 * h * h + 3 * h) + (self.n_actions * h + self.n_actions)
    }

    pub fn mixer_param_count(&self) -> usize {
        match self.mixer {
            MixerKind::Vdn => 0,
            MixerKind::Mono => {
                let (s, m, n) = (self.state_dim, self.embed, self.n_agents);
                (n * m * s + n * m) + (m * s + m) + (m * s + m) + (s + 1)
            }
        }
    }

    pub fn param_count(&self) -> usize {
        self.agent_param_count() + self.mixer_param_count()
    }
}

/// Agent network plus mixer; the unit that is trained, snapshotted and
/// checkpointed.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub layout: Layout,
    pub agent: QNetwork,
    pub mixer: Mixer,
}

impl Model {
    pub fn zeros(layout: Layout) -> Self {
        Self {
            layout,
            agent: QNetwork::zeros(&layout),
            mixer: Mixer::zeros(&layout),
        }
    }

    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every weight and bias,
    /// drawn in flat-layout order from a seeded stream.
    pub fn init(layout: Layout, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut model = Self::zeros(layout);
        model.for_each_linear_mut(|lin| lin.init_uniform(&mut rng));
        model
    }

    fn for_each_linear_mut(&mut self, mut f: impl FnMut(&mut Linear)) {
        for lin in self.agent.linears_mut() {
            f(lin);
        }
        if let Mixer::Mono(m) = &mut self.mixer {
            for lin in m.linears_mut() {
                f(lin);
            }
        }
    }

    fn linears(&self) -> Vec<(&'static str, &Linear)> {
        let mut out = self.agent.linears();
        if let Mixer::Mono(m) = &self.mixer {
            out.extend(m.linears());
        }
        out
    }

    /// Named parameter tensors in flat-layout order.
    pub fn tensors(&self) -> Vec<(String, &[f64])> {
        self.linears()
            .into_iter()
            .flat_map(|(name, lin)| {
                [
                    (format!("{name}.weight"), lin.weight.as_slice()),
                    (format!("{name}.bias"), lin.bias.as_slice()),
                ]
            })
            .collect()
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.layout.param_count());
        for (_, t) in self.tensors() {
            flat.extend_from_slice(t);
        }
        flat
    }

    pub fn unflatten(layout: Layout, flat: &[f64]) -> Result<Self, NetError> {
        let mut model = Self::zeros(layout);
        model.load_flat(flat)?;
        Ok(model)
    }

    /// Overwrites all parameters in place from a flat vector.
    pub fn load_flat(&mut self, flat: &[f64]) -> Result<(), NetError> {
        let expected = self.layout.param_count();
        if flat.len() != expected {
            return Err(NetError::LengthMismatch { expected, got: flat.len() });
        }
        let mut offset = 0;
        self.for_each_linear_mut(|lin| {
            for dst in [&mut lin.weight, &mut lin.bias] {
                let n = dst.len();
                dst.copy_from_slice(&flat[offset..offset + n]);
                offset += n;
            }
        });
        Ok(())
    }

    /// Adds `scale * other` element-wise.
    pub fn add_scaled(&mut self, other: &Model, scale: f64) {
        let mut src = other.flatten().into_iter();
        self.for_each_linear_mut(|lin| {
            for dst in [&mut lin.weight, &mut lin.bias] {
                for d in dst.iter_mut() {
                    *d += scale * src.next().expect("same layout");
                }
            }
        });
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.iter().all(|x| x.is_finite()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn layout(mixer: MixerKind) -> Layout {
        Layout { n_agents: 3, n_actions: 4, obs_dim: 5, state_dim: 6, hidden: 7, mixer, embed: 8 }
    }

    #[test]
    fn closed_form_count_3m() {
        let l = Layout { n_agents: 3, n_actions: 9, obs_dim: 30, state_dim: 48, hidden: 64, mixer: MixerKind::Mono, embed: 32 };
        // fc_in 64x42+64, GRU 2x(192x64+192), fc_out 9x64+9
        let agent = 64 * 42 + 64 + 2 * (192 * 64 + 192) + 9 * 64 + 9;
        assert_eq!(agent, 28_297);
        // hyper_w1 96x48+96, hyper_b1 32x48+32, hyper_w2 32x48+32, hyper_v 1x48+1
        let mixer = 96 * 48 + 96 + 32 * 48 + 32 + 32 * 48 + 32 + 48 + 1;
        assert_eq!(mixer, 7_889);
        assert_eq!(l.agent_param_count(), agent);
        assert_eq!(l.mixer_param_count(), mixer);
        let model = Model::init(l, 0);
        assert_eq!(model.flatten().len(), agent + mixer);
        assert_eq!(Layout { mixer: MixerKind::Vdn, ..l }.param_count(), agent);
    }

    #[test]
    fn length_mismatch() {
        let l = layout(MixerKind::Mono);
        let flat = Model::init(l, 1).flatten();
        let err = Model::unflatten(l, &flat[1..]).unwrap_err();
        assert_eq!(err, NetError::LengthMismatch { expected: flat.len(), got: flat.len() - 1 });
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let l = layout(MixerKind::Mono);
        let a = Model::init(l, 42);
        let b = Model::init(l, 42);
        assert_eq!(a.flatten().iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
                   b.flatten().iter().map(|x| x.to_bits()).collect::<Vec<_>>());
        assert_ne!(a, Model::init(l, 43));
        for (_, lin) in a.linears() {
            let bound = 1.0 / (lin.cols as f64).sqrt();
            assert!(lin.weight.iter().chain(&lin.bias).all(|x| x.abs() <= bound));
        }
    }

    #[test]
    fn tensor_order_is_documented_order() {
        let names: Vec<String> = Model::zeros(layout(MixerKind::Mono)).tensors().into_iter().map(|(n, _)| n).collect();
        assert_eq!(names, [
            "fc_in.weight", "fc_in.bias", "gru_input.weight", "gru_input.bias",
            "gru_hidden.weight", "gru_hidden.bias", "fc_out.weight", "fc_out.bias",
            "hyper_w1.weight", "hyper_w1.bias", "hyper_b1.weight", "hyper_b1.bias",
            "hyper_w2.weight", "hyper_w2.bias", "hyper_v.weight", "hyper_v.bias",
        ]);
    }

    proptest! {
        #[test]
        fn flatten_round_trip(seed in any::<u64>(), mono in any::<bool>()) {
            let l = layout(if mono { MixerKind::Mono } else { MixerKind::Vdn });
            let m = Model::init(l, seed);
            let flat = m.flatten();
            prop_assert_eq!(flat.len(), l.param_count());
            prop_assert_eq!(Model::unflatten(l, &flat).unwrap(), m);
        }
    }
}
