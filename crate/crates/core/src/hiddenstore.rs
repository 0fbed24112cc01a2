//! Recurrent hidden states indexed by `[environment, agent]`.
//!
//! Each environment a worker serves gets its own slice of agent slots, so
//! histories from concurrent episodes never mix. Only the latest state per
//! slot is kept; the learner recomputes full sequences from episode start.

use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum HiddenStoreError {
    #[error("slot (env {env_id}, agent {agent_id}) outside store of {n_envs} envs x {n_agents} agents")]
    IndexOutOfRange {
        env_id: usize,
        agent_id: usize,
        n_envs: usize,
        n_agents: usize,
    },
    #[error("hidden vector has length {got}, store width is {expected}")]
    WidthMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct HiddenStateStore {
    n_envs: usize,
    n_agents: usize,
    width: usize,
    data: Vec<f64>,
}

impl HiddenStateStore {
    /// All-zero store. Counts of zero are bumped to one.
    pub fn new(n_envs: usize, n_agents: usize, width: usize) -> Self {
        let (n_envs, n_agents, width) = (n_envs.max(1), n_agents.max(1), width.max(1));
        Self {
            n_envs,
            n_agents,
            width,
            data: vec![0.0; n_envs * n_agents * width],
        }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.n_envs, self.n_agents, self.width)
    }

    fn offset(&self, env_id: usize, agent_id: usize) -> Result<usize, HiddenStoreError> {
        if env_id >= self.n_envs || agent_id >= self.n_agents {
            return Err(HiddenStoreError::IndexOutOfRange {
                env_id,
                agent_id,
                n_envs: self.n_envs,
                n_agents: self.n_agents,
            });
        }
        Ok((env_id * self.n_agents + agent_id) * self.width)
    }

    pub fn get(&self, env_id: usize, agent_id: usize) -> Result<&[f64], HiddenStoreError> {
        let o = self.offset(env_id, agent_id)?;
        Ok(&self.data[o..o + self.width])
    }

    pub fn put(&mut self, env_id: usize, agent_id: usize, h: &[f64]) -> Result<(), HiddenStoreError> {
        if h.len() != self.width {
            return Err(HiddenStoreError::WidthMismatch { expected: self.width, got: h.len() });
        }
        let o = self.offset(env_id, agent_id)?;
        self.data[o..o + self.width].copy_from_slice(h);
        Ok(())
    }

    /// Zeroes every agent slot of `env_id` and nothing else.
    pub fn reset_env(&mut self, env_id: usize) -> Result<(), HiddenStoreError> {
        let start = self.offset(env_id, 0)?;
        let len = self.n_agents * self.width;
        self.data[start..start + len].fill(0.0);
        Ok(())
    }

    pub fn env_is_zero(&self, env_id: usize) -> Result<bool, HiddenStoreError> {
        let start = self.offset(env_id, 0)?;
        Ok(self.data[start..start + self.n_agents * self.width].iter().all(|&x| x == 0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nets::{Layout, MixerKind, Model};
    use proptest::prelude::*;

    #[test]
    fn init_zero() {
        let s = HiddenStateStore::new(4, 3, 64);
        assert_eq!(s.dims(), (4, 3, 64));
        for e in 0..4 {
            for a in 0..3 {
                assert_eq!(s.get(e, a).unwrap(), &[0.0; 64][..]);
            }
        }
        let s = HiddenStateStore::new(1, 1, 1);
        assert_eq!(s.get(0, 0).unwrap(), &[0.0]);
    }

    #[test]
    fn put_get_isolation() {
        let mut s = HiddenStateStore::new(3, 2, 4);
        let v = [1.0, 2.0, 3.0, 4.0];
        s.put(2, 1, &v).unwrap();
        assert_eq!(s.get(2, 1).unwrap(), &v);
        assert_eq!(s.get(0, 1).unwrap(), &[0.0; 4]);
        assert_eq!(s.get(2, 0).unwrap(), &[0.0; 4]);
    }

    #[test]
    fn out_of_range() {
        let mut s = HiddenStateStore::new(2, 2, 3);
        assert!(matches!(s.get(2, 0), Err(HiddenStoreError::IndexOutOfRange { env_id: 2, .. })));
        assert!(s.get(0, 2).is_err());
        assert!(s.put(5, 0, &[0.0; 3]).is_err());
        assert!(s.reset_env(2).is_err());
        assert!(matches!(s.put(0, 0, &[0.0; 2]), Err(HiddenStoreError::WidthMismatch { .. })));
    }

    #[test]
    fn reset_env_slice() {
        let mut s = HiddenStateStore::new(2, 2, 2);
        for e in 0..2 {
            for a in 0..2 {
                s.put(e, a, &[1.0 + e as f64, 1.0 + a as f64]).unwrap();
            }
        }
        s.reset_env(0).unwrap();
        assert!(s.env_is_zero(0).unwrap());
        assert_eq!(s.get(1, 0).unwrap(), &[2.0, 1.0]);
        assert_eq!(s.get(1, 1).unwrap(), &[2.0, 2.0]);
        let snapshot = s.clone();
        s.reset_env(0).unwrap();
        assert_eq!(s, snapshot);
    }

    #[test]
    fn reset_then_forward_matches_fresh_store() {
        let layout = Layout { n_agents: 2, n_actions: 3, obs_dim: 2, state_dim: 1, hidden: 5, mixer: MixerKind::Vdn, embed: 1 };
        let model = Model::init(layout, 4);
        let mut used = HiddenStateStore::new(2, 2, 5);
        for t in 0..4 {
            let h = model.agent.forward_indexed(&[t as f64, 1.0], Some(t % 3), 1, used.get(1, 1).unwrap(), &[true; 3]).unwrap().hidden;
            used.put(1, 1, &h).unwrap();
        }
        used.reset_env(1).unwrap();
        let fresh = HiddenStateStore::new(2, 2, 5);
        let a = model.agent.forward_indexed(&[0.5, 0.5], None, 1, used.get(1, 1).unwrap(), &[true; 3]).unwrap();
        let b = model.agent.forward_indexed(&[0.5, 0.5], None, 1, fresh.get(1, 1).unwrap(), &[true; 3]).unwrap();
        assert_eq!(a, b);
    }

    #[derive(Debug, Clone)]
    enum Op {
        Put(usize, usize, f64),
        Reset(usize),
    }

    fn op(n_envs: usize, n_agents: usize) -> impl Strategy<Value = Op> {
        prop_oneof![
            (0..n_envs, 0..n_agents, -10.0..10.0f64).prop_map(|(e, a, v)| Op::Put(e, a, v)),
            (0..n_envs).prop_map(Op::Reset),
        ]
    }

    fn apply(store: &mut HiddenStateStore, op: &Op, env_map: &dyn Fn(usize) -> usize) {
        match *op {
            Op::Put(e, a, v) => store.put(env_map(e), a, &[v, -v]).unwrap(),
            Op::Reset(e) => store.reset_env(env_map(e)).unwrap(),
        }
    }

    proptest! {
        #[test]
        fn interleaving_equals_per_env_replay(ops in prop::collection::vec(op(4, 3), 0..80)) {
            let mut shared = HiddenStateStore::new(4, 3, 2);
            for o in &ops {
                apply(&mut shared, o, &|e| e);
            }
            for env in 0..4 {
                let mut alone = HiddenStateStore::new(4, 3, 2);
                for o in ops.iter().filter(|o| matches!(o, Op::Put(e, _, _) | Op::Reset(e) if *e == env)) {
                    apply(&mut alone, o, &|e| e);
                }
                for a in 0..3 {
                    prop_assert_eq!(shared.get(env, a).unwrap(), alone.get(env, a).unwrap());
                }
            }
        }

        #[test]
        fn permutation_equivariance(ops in prop::collection::vec(op(4, 2), 0..60), perm in Just([0usize, 1, 2, 3]).prop_shuffle()) {
            let mut plain = HiddenStateStore::new(4, 2, 2);
            let mut permuted = HiddenStateStore::new(4, 2, 2);
            for o in &ops {
                apply(&mut plain, o, &|e| e);
                apply(&mut permuted, o, &|e| perm[e]);
            }
            for env in 0..4 {
                for a in 0..2 {
                    prop_assert_eq!(plain.get(env, a).unwrap(), permuted.get(perm[env], a).unwrap());
                }
            }
        }
    }
}
