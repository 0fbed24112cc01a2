//! Launches a run, records its metrics and summarizes it.

use std::path::Path;
use std::time::Instant;

use marl_core::envsim::EnvConfig;
use marl_core::runtime::{self, evaluate, metrics, RunConfig, RunReport};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::metrics::{staleness_histogram, write_staleness_histogram, Clock, MetricsRow, Recorder};
use crate::BenchError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub mode: String,
    pub workers: usize,
    pub actors_per_worker: usize,
    pub live_envs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub env: String,
    pub topology: Topology,
    pub total_episodes: u64,
    pub env_steps: u64,
    pub collection_time_s: f64,
    pub wall_time_s: f64,
    pub steps_per_sec: f64,
    pub episodes_per_sec: f64,
    pub train_steps: u64,
    pub publishes: u64,
    pub final_loss: Option<f64>,
    /// Greedy evaluation of the final parameters when evaluation is on,
    /// otherwise the mean of the last tenth of training episodes.
    pub final_return: f64,
    pub solve_rate: Option<f64>,
    pub optimal_return: Option<f64>,
    pub snapshot_version: u64,
    pub mean_staleness: f64,
    /// `(staleness, count)` over every snapshot fetch by a worker.
    pub staleness_histogram: Vec<(u64, u64)>,
    pub zero_start_violations: u64,
    pub warnings: Vec<String>,
}

impl RunSummary {
    pub fn write_json(&self, path: &Path) -> Result<(), BenchError> {
        let json = serde_json::to_string_pretty(self).map_err(|e| BenchError::Io(e.to_string()))?;
        std::fs::write(path, json + "\n")?;
        Ok(())
    }
}

pub struct Outcome {
    pub summary: RunSummary,
    pub rows: Vec<MetricsRow>,
    pub report: RunReport,
}

fn optimum(env: &EnvConfig) -> Option<f64> {
    env.build(0).ok().and_then(|e| e.optimal_return())
}

/// Runs `cfg` to completion, streaming metrics rows to `cfg.out` as they
/// are produced and writing the JSON summary to `cfg.summary` if set.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Outcome, BenchError> {
    let run_cfg = cfg.to_run_config()?;
    run_with(cfg, &run_cfg)
}

pub fn run_with(cfg: &ExperimentConfig, run_cfg: &RunConfig) -> Result<Outcome, BenchError> {
    let start = Instant::now();
    let clock = if cfg.virtual_clock {
        Clock::Virtual { step_secs: cfg.virtual_step_secs() }
    } else {
        Clock::Wall(start)
    };
    let eval = run_cfg.eval.clone();
    let mut rec = Recorder::new(clock, eval.is_some(), cfg.log_every, cfg.out.as_deref())?;
    let (sink, events) = metrics::channel();
    let report = std::thread::scope(|s| {
        let handle = s.spawn(move || runtime::run(run_cfg, &sink));
        let mut record_err = None;
        for ev in events.iter() {
            if let Err(e) = rec.on_event(ev) {
                record_err.get_or_insert(e);
            }
        }
        let report = handle.join().map_err(|_| BenchError::Io("run thread panicked".into()))??;
        match record_err {
            Some(e) => Err(e),
            None => Ok(report),
        }
    })?;
    let evaluated_at_end = rec
        .rows()
        .last()
        .is_some_and(|r| r.eval_return.is_some() && r.episodes == report.total_episodes);
    if let Some(ev) = &eval {
        if ev.episodes > 0 && !evaluated_at_end {
            let res = evaluate(&report.model, &run_cfg.env, ev.episodes, ev.epsilon, ev.seed, run_cfg.learner.exec)?;
            rec.emit(Some(res.mean_return), res.solve_rate)?;
        }
    } else if rec.rows().last().map(|r| r.episodes) != Some(report.total_episodes) {
        rec.emit(None, None)?;
    }
    let final_eval = rec.rows().last().filter(|r| r.eval_return.is_some()).map(|r| (r.eval_return, r.solve_rate));
    let returns = rec.returns();
    let tail = &returns[returns.len() - (returns.len() / 10).max(1).min(returns.len())..];
    let tail_mean = if tail.is_empty() { 0.0 } else { tail.iter().sum::<f64>() / tail.len() as f64 };
    let mut warnings = rec.warnings().to_vec();
    warnings.extend(report.train.warnings.iter().filter(|w| !rec.warnings().contains(w)).cloned());
    let summary = RunSummary {
        seed: run_cfg.seed,
        env: cfg.env.describe(),
        topology: Topology {
            mode: run_cfg.mode.name().into(),
            workers: run_cfg.workers,
            actors_per_worker: run_cfg.actors_per_worker,
            live_envs: run_cfg.live_envs(),
        },
        total_episodes: report.total_episodes,
        env_steps: report.env_steps,
        collection_time_s: report.collection_time.as_secs_f64(),
        wall_time_s: start.elapsed().as_secs_f64(),
        steps_per_sec: report.steps_per_sec(),
        episodes_per_sec: report.episodes_per_sec(),
        train_steps: report.train.train_steps,
        publishes: report.train.publishes,
        final_loss: report.train.last_loss,
        final_return: final_eval.and_then(|(r, _)| r).unwrap_or(tail_mean),
        solve_rate: final_eval.and_then(|(_, s)| s),
        optimal_return: optimum(&run_cfg.env),
        snapshot_version: report.train.final_version,
        mean_staleness: report.mean_staleness(),
        staleness_histogram: staleness_histogram(report.workers.iter().flat_map(|w| w.staleness.iter().copied())),
        zero_start_violations: report.zero_start_violations(),
        warnings,
    };
    if let Some(path) = &cfg.out {
        write_staleness_histogram(path, &summary.staleness_histogram)?;
    }
    if let Some(path) = &cfg.summary {
        summary.write_json(path)?;
    }
    Ok(Outcome { summary, rows: rec.into_rows(), report })
}

/// Greedy return and solve rate over the course of training, one point per
/// evaluation.
pub fn learning_curve_eval(
    cfg: &ExperimentConfig,
    eval_every: u64,
    eval_episodes: usize,
) -> Result<Vec<MetricsRow>, BenchError> {
    let mut cfg = cfg.clone();
    cfg.eval_every = eval_every.max(1);
    cfg.eval_episodes = eval_episodes;
    let out = run_experiment(&cfg)?;
    Ok(out.rows.into_iter().filter(|r| r.eval_return.is_some()).collect())
}
