//! Experiment configuration: a flat TOML document with an `[env]` table.
//!
//! Every key can be overridden from the environment: `MARL_<KEY>` for
//! top-level keys and `MARL_ENV_<KEY>` for keys of the `[env]` table, e.g.
//! `MARL_EPISODES=20` or `MARL_ENV_STEP_LATENCY_MS=0.5`. Values are read as
//! TOML literals and fall back to plain strings.

use std::path::{Path, PathBuf};
use std::time::Duration;

use marl_core::envsim::{CoopMatrixGameSpec, EnvConfig, EnvSpec};
use marl_core::nets::optim::OptimizerKind;
use marl_core::nets::{Execution, MixerKind};
use marl_core::runtime::{EpsilonSchedule, EvalConfig, LearnerConfig, Mode, RunConfig, WorkerConfig};
use serde::{Deserialize, Serialize};

use crate::BenchError;

pub const ENV_PREFIX: &str = "MARL_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvSection {
    /// `matrix` or `synthetic`.
    pub kind: String,
    /// Shape preset for the synthetic environment.
    pub scenario: Option<String>,
    pub n_agents: Option<usize>,
    pub n_actions: Option<usize>,
    pub obs_dim: Option<usize>,
    pub state_dim: Option<usize>,
    pub episode_limit: Option<usize>,
    pub step_latency_ms: f64,
    /// Two-player payoff table, rows indexed by agent 0's action.
    pub payoff: Option<Vec<Vec<f64>>>,
    /// Payoff tensor for any number of agents, agent 0 most significant.
    pub payoff_flat: Option<Vec<f64>>,
    pub n_steps: usize,
}

impl Default for EnvSection {
    fn default() -> Self {
        Self {
            kind: "matrix".into(),
            scenario: None,
            n_agents: None,
            n_actions: None,
            obs_dim: None,
            state_dim: None,
            episode_limit: None,
            step_latency_ms: 0.0,
            payoff: None,
            payoff_flat: None,
            n_steps: 5,
        }
    }
}

/// The default matrix game: the diagonal joint action (0, 0) pays most.
pub fn default_payoff() -> Vec<Vec<f64>> {
    vec![vec![8.0, 2.0, 0.0], vec![2.0, 4.0, 1.0], vec![0.0, 1.0, 3.0]]
}

impl EnvSection {
    pub fn env_config(&self) -> Result<EnvConfig, BenchError> {
        let latency = ms(self.step_latency_ms, "step_latency_ms")?;
        match self.kind.as_str() {
            "matrix" => {
                let game = match (&self.payoff, &self.payoff_flat) {
                    (Some(_), Some(_)) => return Err(cfg_err("give either payoff or payoff_flat, not both")),
                    (_, Some(flat)) => CoopMatrixGameSpec::new(
                        self.n_agents.ok_or_else(|| cfg_err("payoff_flat needs n_agents"))?,
                        self.n_actions.ok_or_else(|| cfg_err("payoff_flat needs n_actions"))?,
                        flat.clone(),
                        self.n_steps,
                    ),
                    (Some(table), None) => CoopMatrixGameSpec::two_player(table, self.n_steps),
                    (None, None) => CoopMatrixGameSpec::two_player(&default_payoff(), self.n_steps),
                }
                .map_err(|e| cfg_err(e.to_string()))?;
                if latency != Duration::ZERO {
                    return Err(cfg_err("step_latency_ms applies to the synthetic environment only"));
                }
                Ok(EnvConfig::Matrix(game))
            }
            "synthetic" => {
                let name = self.scenario.as_deref().unwrap_or("3m");
                let base = EnvSpec::scenario(name).ok_or_else(|| cfg_err(format!("unknown scenario {name:?}")))?;
                let spec = EnvSpec::new(
                    self.n_agents.unwrap_or(base.n_agents),
                    self.n_actions.unwrap_or(base.n_actions),
                    self.state_dim.unwrap_or(base.state_dim),
                    self.obs_dim.unwrap_or(base.obs_dim),
                    self.episode_limit.unwrap_or(base.episode_limit),
                )
                .with_latency(latency);
                spec.validate().map_err(|e| cfg_err(e.to_string()))?;
                Ok(EnvConfig::Synthetic(spec))
            }
            other => Err(cfg_err(format!("unknown env kind {other:?}"))),
        }
    }

    pub fn describe(&self) -> String {
        match self.kind.as_str() {
            "synthetic" => format!("synthetic:{}", self.scenario.as_deref().unwrap_or("3m")),
            k => k.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// `baseline`, `aw` or `awl`.
    pub mode: String,
    /// Mandatory.
    pub seed: Option<u64>,
    pub workers: usize,
    /// Actors per worker.
    pub actors: usize,
    /// Episodes per actor.
    pub episodes: u64,
    pub hidden: usize,
    pub embed: usize,
    /// `mono` or `vdn`.
    pub mixer: String,
    pub batch_size: usize,
    pub gamma: f64,
    pub lr: f64,
    pub target_sync: u64,
    pub train_steps_per_ingest: f64,
    pub min_fill: usize,
    pub replay_capacity: usize,
    /// `rmsprop` or `sgd`.
    pub optimizer: String,
    /// Gradient norm clip; 0 disables.
    pub grad_clip: f64,
    /// Sleep added to every train step.
    pub train_cost_ms: f64,
    pub eps_start: f64,
    pub eps_end: f64,
    pub eps_anneal_steps: u64,
    pub sync_period: u64,
    /// Greedy evaluation every this many ingested episodes; 0 disables.
    pub eval_every: u64,
    pub eval_episodes: usize,
    /// Without evaluation, a metrics row every this many episodes.
    pub log_every: u64,
    pub out: Option<PathBuf>,
    pub summary: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    /// Stamp rows with simulated time (env steps x step duration) instead of
    /// the wall clock, making metrics files reproducible.
    pub virtual_clock: bool,
    /// Disable the data-parallel batch path.
    pub sequential: bool,
    pub env: EnvSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let l = LearnerConfig::default();
        let w = WorkerConfig::default();
        Self {
            mode: "awl".into(),
            seed: None,
            workers: 1,
            actors: 1,
            episodes: 100,
            hidden: 64,
            embed: 32,
            mixer: "mono".into(),
            batch_size: l.batch_size,
            gamma: l.gamma,
            lr: l.lr,
            target_sync: l.target_sync,
            train_steps_per_ingest: l.train_steps_per_ingest,
            min_fill: l.min_fill,
            replay_capacity: l.replay_capacity,
            optimizer: "rmsprop".into(),
            grad_clip: 10.0,
            train_cost_ms: 0.0,
            eps_start: w.epsilon.start,
            eps_end: w.epsilon.end,
            eps_anneal_steps: w.epsilon.anneal_steps,
            sync_period: w.sync_period,
            eval_every: 0,
            eval_episodes: 20,
            log_every: 10,
            out: None,
            summary: None,
            checkpoint: None,
            virtual_clock: false,
            sequential: false,
            env: EnvSection::default(),
        }
    }
}

fn cfg_err(msg: impl Into<String>) -> BenchError {
    BenchError::Config(msg.into())
}

fn ms(x: f64, what: &str) -> Result<Duration, BenchError> {
    if !(x >= 0.0 && x.is_finite()) {
        return Err(cfg_err(format!("{what} must be a non-negative number of milliseconds")));
    }
    Ok(Duration::from_secs_f64(x / 1000.0))
}

fn literal(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

impl ExperimentConfig {
    /// Parses a document and applies `MARL_*` overrides from `vars`.
    pub fn from_toml_str(doc: &str, vars: impl IntoIterator<Item = (String, String)>) -> Result<Self, BenchError> {
        let mut table: toml::Table = toml::from_str(doc).map_err(|e| cfg_err(e.to_string()))?;
        for (key, raw) in vars {
            let Some(rest) = key.strip_prefix(ENV_PREFIX) else { continue };
            let rest = rest.to_ascii_lowercase();
            let value = literal(&raw);
            if let Some(env_key) = rest.strip_prefix("env_") {
                let env = table.entry("env").or_insert_with(|| toml::Value::Table(toml::Table::new()));
                let toml::Value::Table(env) = env else { return Err(cfg_err("env must be a table")) };
                env.insert(env_key.to_string(), value);
            } else {
                table.insert(rest, value);
            }
        }
        table.try_into().map_err(|e: toml::de::Error| cfg_err(e.to_string()))
    }

    /// Reads a file, with overrides from the process environment.
    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let doc = std::fs::read_to_string(path).map_err(|e| BenchError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&doc, std::env::vars())
    }

    /// Defaults plus environment overrides, for runs without a file.
    pub fn from_env() -> Result<Self, BenchError> {
        Self::from_toml_str("", std::env::vars())
    }

    pub fn to_run_config(&self) -> Result<RunConfig, BenchError> {
        let mode: Mode = self.mode.parse().map_err(|_| cfg_err(format!("unknown mode {:?}", self.mode)))?;
        let seed = self.seed.ok_or_else(|| cfg_err("seed is mandatory"))?;
        let mixer = match self.mixer.as_str() {
            "mono" => MixerKind::Mono,
            "vdn" => MixerKind::Vdn,
            m => return Err(cfg_err(format!("unknown mixer {m:?}"))),
        };
        let optimizer = match self.optimizer.as_str() {
            "rmsprop" => OptimizerKind::rmsprop(),
            "sgd" => OptimizerKind::Sgd,
            o => return Err(cfg_err(format!("unknown optimizer {o:?}"))),
        };
        let mut cfg = RunConfig::new(mode, self.env.env_config()?, seed);
        cfg.workers = self.workers;
        cfg.actors_per_worker = self.actors;
        cfg.episodes_per_actor = self.episodes;
        cfg.hidden = self.hidden;
        cfg.embed = self.embed;
        cfg.mixer = mixer;
        cfg.worker = WorkerConfig {
            epsilon: EpsilonSchedule { start: self.eps_start, end: self.eps_end, anneal_steps: self.eps_anneal_steps },
            sync_period: self.sync_period,
            ..WorkerConfig::default()
        };
        cfg.learner = LearnerConfig {
            batch_size: self.batch_size,
            gamma: self.gamma,
            lr: self.lr,
            target_sync: self.target_sync,
            train_steps_per_ingest: self.train_steps_per_ingest,
            min_fill: self.min_fill,
            replay_capacity: self.replay_capacity,
            optimizer,
            grad_clip: (self.grad_clip > 0.0).then_some(self.grad_clip),
            train_cost_padding: ms(self.train_cost_ms, "train_cost_ms")?,
            exec: if self.sequential { Execution::Sequential } else { Execution::default() },
            checkpoint: self.checkpoint.clone(),
        };
        if self.eval_every > 0 {
            cfg.eval = Some(EvalConfig {
                every_episodes: self.eval_every,
                episodes: self.eval_episodes,
                epsilon: 0.0,
                seed: seed ^ 0x5eed,
            });
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Seconds of simulated time per environment step for the virtual clock.
    pub fn virtual_step_secs(&self) -> f64 {
        if self.env.step_latency_ms > 0.0 {
            self.env.step_latency_ms / 1000.0
        } else {
            1e-3
        }
    }
}

pub fn topology_banner(cfg: &RunConfig) -> String {
    format!(
        "topology: mode={} workers={} actors/worker={} live environments={} episodes/actor={} total episodes={}",
        cfg.mode.name(),
        cfg.workers,
        cfg.actors_per_worker,
        cfg.live_envs(),
        cfg.episodes_per_actor,
        cfg.total_episodes()
    )
}
