//! Sample-collection throughput of the three topologies under one budget.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::driver::run_experiment;
use crate::BenchError;

/// Topologies to compare. Every mode plays `total_episodes` episodes.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareSpec {
    pub total_episodes: u64,
    pub aw_actors: usize,
    pub awl_workers: usize,
    pub awl_actors: usize,
}

impl Default for CompareSpec {
    fn default() -> Self {
        Self { total_episodes: 48, aw_actors: 4, awl_workers: 4, awl_actors: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub mode: String,
    pub live_envs: usize,
    pub episodes: u64,
    pub env_steps: u64,
    pub collection_time_s: f64,
    pub steps_per_sec: f64,
    pub episodes_per_sec: f64,
    pub ratio_vs_baseline: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareTable {
    pub rows: Vec<CompareRow>,
}

impl CompareTable {
    pub fn get(&self, mode: &str) -> Option<&CompareRow> {
        self.rows.iter().find(|r| r.mode == mode)
    }

    pub fn ratio(&self, num: &str, den: &str) -> f64 {
        match (self.get(num), self.get(den)) {
            (Some(a), Some(b)) => a.steps_per_sec / b.steps_per_sec,
            _ => f64::NAN,
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), BenchError> {
        let mut w = csv::Writer::from_path(path)?;
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

impl fmt::Display for CompareTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<9} {:>5} {:>9} {:>10} {:>10} {:>12} {:>8}", "mode", "envs", "episodes", "env steps", "time (s)", "steps/sec", "ratio")?;
        for r in &self.rows {
            writeln!(
                f,
                "{:<9} {:>5} {:>9} {:>10} {:>10.3} {:>12.1} {:>8.2}",
                r.mode, r.live_envs, r.episodes, r.env_steps, r.collection_time_s, r.steps_per_sec, r.ratio_vs_baseline
            )?;
        }
        Ok(())
    }
}

fn per_actor(total: u64, actors: usize, mode: &str) -> Result<u64, BenchError> {
    if actors == 0 || !total.is_multiple_of(actors as u64) {
        return Err(BenchError::Parity(format!(
            "{total} episodes cannot be split evenly over the {actors} actors of {mode}"
        )));
    }
    Ok(total / actors as u64)
}

/// The three configurations of a comparison, checked to consume identical
/// episode budgets before anything is launched.
pub fn comparison_configs(base: &ExperimentConfig, spec: &CompareSpec) -> Result<Vec<ExperimentConfig>, BenchError> {
    let layouts = [("baseline", 1, 1), ("aw", 1, spec.aw_actors), ("awl", spec.awl_workers, spec.awl_actors)];
    let mut out = Vec::new();
    for (mode, workers, actors) in layouts {
        let mut c = base.clone();
        c.mode = mode.into();
        c.workers = workers;
        c.actors = actors;
        c.episodes = per_actor(spec.total_episodes, workers * actors, mode)?;
        c.eval_every = 0;
        c.out = None;
        c.summary = None;
        c.checkpoint = None;
        out.push(c);
    }
    for c in &out {
        let budget = c.to_run_config()?.total_episodes();
        if budget != spec.total_episodes {
            return Err(BenchError::Parity(format!("{} would play {budget} episodes, not {}", c.mode, spec.total_episodes)));
        }
    }
    Ok(out)
}

pub fn throughput_compare(base: &ExperimentConfig, spec: &CompareSpec) -> Result<CompareTable, BenchError> {
    let mut rows = Vec::new();
    for c in comparison_configs(base, spec)? {
        log::info!("compare: running {}", c.mode);
        let out = run_experiment(&c)?;
        let s = out.summary;
        rows.push(CompareRow {
            mode: c.mode.clone(),
            live_envs: s.topology.live_envs,
            episodes: s.total_episodes,
            env_steps: s.env_steps,
            collection_time_s: s.collection_time_s,
            steps_per_sec: s.steps_per_sec,
            episodes_per_sec: s.episodes_per_sec,
            ratio_vs_baseline: 0.0,
        });
    }
    let base_sps = rows[0].steps_per_sec;
    for r in &mut rows {
        r.ratio_vs_baseline = r.steps_per_sec / base_sps;
    }
    Ok(CompareTable { rows })
}
