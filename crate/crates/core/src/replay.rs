//! Episode replay pool with uniform mini-batch sampling.

use std::collections::VecDeque;
use std::io::{Read, Write};

use rand::Rng;
use thiserror::Error;

use crate::episode::{EpisodeRecord, EpisodeShape, EpisodeView, MalformedEpisode};
use crate::pipes::frame::Frame;

pub const DEFAULT_CAPACITY: usize = 5000;
pub const DEFAULT_MIN_FILL: usize = 32;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum ReplayError {
    #[error("malformed episode: {0}")]
    Malformed(#[from] MalformedEpisode),
    #[error("asked for {requested} episodes, pool holds {available}")]
    NotEnoughData { available: usize, requested: usize },
    #[error("episode dump: {0}")]
    Dump(String),
}

/// FIFO ring of whole episodes.
#[derive(Debug, Clone)]
pub struct ReplayPool {
    shape: EpisodeShape,
    capacity: usize,
    episodes: VecDeque<EpisodeRecord>,
    inserted: u64,
}

impl ReplayPool {
    pub fn new(shape: EpisodeShape, capacity: usize) -> Self {
        let capacity = capacity.max(1);
        Self { shape, capacity, episodes: VecDeque::with_capacity(capacity.min(1024)), inserted: 0 }
    }

    pub fn shape(&self) -> &EpisodeShape {
        &self.shape
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    /// Episodes ever inserted, evicted ones included.
    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    /// Stored episodes, oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &EpisodeRecord> {
        self.episodes.iter()
    }

    pub fn insert(&mut self, episode: EpisodeRecord) -> Result<(), ReplayError> {
        episode.validate(&self.shape)?;
        if self.episodes.len() == self.capacity {
            self.episodes.pop_front();
        }
        self.episodes.push_back(episode);
        self.inserted += 1;
        Ok(())
    }

    /// `batch` distinct positions, uniformly at random.
    pub fn sample_indices<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Result<Vec<usize>, ReplayError> {
        if batch == 0 || batch > self.episodes.len() {
            return Err(ReplayError::NotEnoughData { available: self.episodes.len(), requested: batch });
        }
        Ok(rand::seq::index::sample(rng, self.episodes.len(), batch).into_vec())
    }

    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Result<TrainingBatch, ReplayError> {
        let idx = self.sample_indices(batch, rng)?;
        Ok(TrainingBatch::pad(&self.shape, idx.iter().map(|&i| &self.episodes[i])))
    }

    /// Writes every stored episode as an episode frame, oldest first.
    pub fn dump<W: Write>(&self, w: &mut W) -> Result<(), ReplayError> {
        for e in &self.episodes {
            Frame::Episode(e.clone()).write_to(w).map_err(|e| ReplayError::Dump(e.to_string()))?;
        }
        Ok(())
    }

    /// Rebuilds a pool from a dump, validating every record.
    pub fn load<R: Read>(shape: EpisodeShape, capacity: usize, r: &mut R) -> Result<Self, ReplayError> {
        let mut pool = Self::new(shape, capacity);
        while let Some(frame) = Frame::read_from(r).map_err(|e| ReplayError::Dump(e.to_string()))? {
            match frame {
                Frame::Episode(e) => pool.insert(e)?,
                other => return Err(ReplayError::Dump(format!("unexpected {:?} frame", other.frame_type()))),
            }
        }
        Ok(pool)
    }
}

/// Episodes padded to a common length `max_len`.
///
/// Row-major tensors, batch index outermost:
/// obs `[B, max_len + 1, N, O]`, state `[B, max_len + 1, S]`,
/// avail `[B, max_len + 1, N, A]`, actions `[B, max_len, N]`,
/// rewards and mask `[B, max_len]`. Observation tensors carry one slot past
/// the last step for bootstrapping. Padding is zero (false for avail).
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingBatch {
    pub n_agents: usize,
    pub n_actions: usize,
    pub obs_dim: usize,
    pub state_dim: usize,
    pub max_len: usize,
    pub lengths: Vec<usize>,
    pub terminated: Vec<bool>,
    pub obs: Vec<f64>,
    pub state: Vec<f64>,
    pub avail: Vec<bool>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub mask: Vec<f64>,
}

impl TrainingBatch {
    pub fn pad<'a>(shape: &EpisodeShape, episodes: impl IntoIterator<Item = &'a EpisodeRecord>) -> Self {
        let episodes: Vec<&EpisodeRecord> = episodes.into_iter().collect();
        let (n, a, o, s) = (shape.n_agents, shape.n_actions, shape.obs_dim, shape.state_dim);
        let max_len = episodes.iter().map(|e| e.len()).max().unwrap_or(0);
        let b = episodes.len();
        let slots = max_len + 1;
        let mut batch = Self {
            n_agents: n,
            n_actions: a,
            obs_dim: o,
            state_dim: s,
            max_len,
            lengths: episodes.iter().map(|e| e.len()).collect(),
            terminated: episodes.iter().map(|e| e.terminated).collect(),
            obs: vec![0.0; b * slots * n * o],
            state: vec![0.0; b * slots * s],
            avail: vec![false; b * slots * n * a],
            actions: vec![0; b * max_len * n],
            rewards: vec![0.0; b * max_len],
            mask: vec![0.0; b * max_len],
        };
        for (i, e) in episodes.iter().enumerate() {
            let copy = |dst: &mut [f64], src: &[f64], row: usize| dst[i * row..i * row + src.len()].copy_from_slice(src);
            copy(&mut batch.obs, &e.obs, slots * n * o);
            copy(&mut batch.state, &e.state, slots * s);
            copy(&mut batch.rewards, &e.rewards, max_len);
            let row = slots * n * a;
            batch.avail[i * row..i * row + e.avail.len()].copy_from_slice(&e.avail);
            let row = max_len * n;
            batch.actions[i * row..i * row + e.actions.len()].copy_from_slice(&e.actions);
            batch.mask[i * max_len..i * max_len + e.len()].fill(1.0);
        }
        batch
    }

    pub fn batch_size(&self) -> usize {
        self.lengths.len()
    }

    pub fn mask_row(&self, b: usize) -> &[f64] {
        &self.mask[b * self.max_len..(b + 1) * self.max_len]
    }

    pub fn valid_steps(&self) -> usize {
        self.lengths.iter().sum()
    }

    /// One view per row. A view spans the padded row but only reads the
    /// first `lengths[b]` steps.
    pub fn views(&self) -> Vec<EpisodeView<'_>> {
        let slots = self.max_len + 1;
        let (n, a, o, s, l) = (self.n_agents, self.n_actions, self.obs_dim, self.state_dim, self.max_len);
        (0..self.batch_size())
            .map(|b| EpisodeView {
                n_agents: n,
                n_actions: a,
                obs_dim: o,
                state_dim: s,
                len: self.lengths[b],
                terminated: self.terminated[b],
                obs: &self.obs[b * slots * n * o..(b + 1) * slots * n * o],
                state: &self.state[b * slots * s..(b + 1) * slots * s],
                avail: &self.avail[b * slots * n * a..(b + 1) * slots * n * a],
                actions: &self.actions[b * l * n..(b + 1) * l * n],
                rewards: &self.rewards[b * l..(b + 1) * l],
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envsim::EnvSpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn spec() -> EnvSpec {
        EnvSpec::new(2, 3, 2, 2, 6)
    }

    pub(crate) fn episode(id: u64, len: usize, terminated: bool) -> EpisodeRecord {
        let mut e = EpisodeRecord::new(0, id, &spec());
        for t in 0..=len {
            let x = id as f64 + t as f64 * 0.1;
            e.push_observation(&[vec![x, 1.0], vec![-x, 0.5]], &[x, 2.0 * x], &[vec![true; 3], vec![true, false, true]]);
            if t < len {
                e.push_transition(&[t % 3, 2 * (t % 2)], x);
            }
        }
        e.terminated = terminated;
        e
    }

    fn shape() -> EpisodeShape {
        EpisodeShape::from(&spec())
    }

    #[test]
    fn fifo_eviction() {
        let mut pool = ReplayPool::new(shape(), 3);
        for i in 1..=4 {
            pool.insert(episode(i, 2, false)).unwrap();
        }
        assert_eq!(pool.iter().map(|e| e.episode_index).collect::<Vec<_>>(), vec![2, 3, 4]);
        assert_eq!(pool.inserted(), 4);
    }

    #[test]
    fn truncation_flag_passes_through() {
        let mut pool = ReplayPool::new(shape(), 3);
        pool.insert(episode(0, 6, false)).unwrap();
        pool.insert(episode(1, 6, true)).unwrap();
        let flags: Vec<bool> = pool.iter().map(|e| e.terminated).collect();
        assert_eq!(flags, vec![false, true]);
    }

    #[test]
    fn mismatched_obs_dim_rejected() {
        let mut pool = ReplayPool::new(shape(), 3);
        let mut e = episode(0, 2, false);
        e.obs_dim = 3;
        assert!(matches!(pool.insert(e), Err(ReplayError::Malformed(_))));
        assert!(pool.is_empty());
    }

    #[test]
    fn not_enough_data() {
        let mut pool = ReplayPool::new(shape(), 10);
        pool.insert(episode(0, 2, false)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(pool.sample(2, &mut rng).unwrap_err(), ReplayError::NotEnoughData { available: 1, requested: 2 });
    }

    #[test]
    fn exhaustive_draw_returns_everything() {
        let mut pool = ReplayPool::new(shape(), 10);
        for i in 0..4 {
            pool.insert(episode(i, 1 + i as usize, false)).unwrap();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut idx = pool.sample_indices(4, &mut rng).unwrap();
        idx.sort();
        assert_eq!(idx, vec![0, 1, 2, 3]);
    }

    #[test]
    fn padding_rule() {
        let shape = shape();
        let (short, long) = (episode(0, 3, true), episode(1, 5, false));
        let batch = TrainingBatch::pad(&shape, [&short, &long]);
        assert_eq!(batch.max_len, 5);
        assert_eq!(batch.mask_row(0), &[1.0, 1.0, 1.0, 0.0, 0.0]);
        assert_eq!(batch.mask_row(1), &[1.0; 5]);
        let views = batch.views();
        assert_eq!(views[0].len, 3);
        assert_eq!(views[0].obs(3, 1), short.view().obs(3, 1));
        assert_eq!(views[1].joint_action(4), long.view().joint_action(4));
        // padded cells are zero
        assert!(views[0].obs[4 * 2 * 2..].iter().all(|&x| x == 0.0));
        assert!(views[0].rewards[3..].iter().all(|&x| x == 0.0));
        assert!(!views[0].avail[4 * 2 * 3..].iter().any(|&x| x));
    }

    #[test]
    fn same_seed_same_samples() {
        let mut pool = ReplayPool::new(shape(), 20);
        for i in 0..20 {
            pool.insert(episode(i, 2, false)).unwrap();
        }
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..50).map(|_| pool.sample_indices(4, &mut rng).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(draw(3), draw(3));
        assert_ne!(draw(3), draw(4));
    }

    #[test]
    fn inclusion_is_uniform() {
        let mut pool = ReplayPool::new(shape(), 10);
        for i in 0..10 {
            pool.insert(episode(i, 1, false)).unwrap();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut counts = [0f64; 10];
        let draws = 100_000;
        for _ in 0..draws {
            let idx = pool.sample_indices(2, &mut rng).unwrap();
            assert_ne!(idx[0], idx[1]);
            for i in idx {
                counts[i] += 1.0;
            }
        }
        let expected = 2.0 * draws as f64 / 10.0;
        let stat: f64 = counts.iter().map(|c| (c - expected).powi(2) / expected).sum();
        let p = 1.0 - ChiSquared::new(9.0).unwrap().cdf(stat);
        assert!(p > 0.01, "chi-square {stat}, p = {p}");
    }

    #[test]
    fn dump_and_load() {
        let mut pool = ReplayPool::new(shape(), 5);
        for i in 0..7 {
            pool.insert(episode(i, 1 + (i as usize % 6), i % 2 == 0)).unwrap();
        }
        let mut buf = Vec::new();
        pool.dump(&mut buf).unwrap();
        let back = ReplayPool::load(shape(), 5, &mut buf.as_slice()).unwrap();
        assert_eq!(back.iter().collect::<Vec<_>>(), pool.iter().collect::<Vec<_>>());
    }
}
