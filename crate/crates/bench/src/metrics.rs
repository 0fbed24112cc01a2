//! CSV metrics rows and the recorder that builds them from runtime events.

use std::fs::File;
use std::path::Path;
use std::time::Instant;

use marl_core::runtime::MetricEvent;
use serde::{Deserialize, Serialize};

use crate::BenchError;

pub const CSV_HEADER: [&str; 9] = [
    "wall_time_s",
    "env_steps",
    "episodes",
    "steps_per_sec",
    "loss",
    "eval_return",
    "solve_rate",
    "snapshot_version",
    "mean_staleness",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub wall_time_s: f64,
    pub env_steps: u64,
    pub episodes: u64,
    /// Over the interval since the previous row.
    pub steps_per_sec: f64,
    pub loss: Option<f64>,
    pub eval_return: Option<f64>,
    pub solve_rate: Option<f64>,
    pub snapshot_version: u64,
    pub mean_staleness: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Clock {
    Wall(Instant),
    /// Time is `env_steps * step_secs`.
    Virtual { step_secs: f64 },
}

impl Clock {
    fn now(&self, env_steps: u64) -> f64 {
        match self {
            Clock::Wall(start) => start.elapsed().as_secs_f64(),
            Clock::Virtual { step_secs } => env_steps as f64 * step_secs,
        }
    }
}

/// Folds runtime events into rows. A row is emitted at every evaluation
/// when evaluation is on, otherwise every `log_every` episodes.
pub struct Recorder {
    clock: Clock,
    by_eval: bool,
    log_every: u64,
    env_steps: u64,
    episodes: u64,
    loss: Option<f64>,
    version: u64,
    staleness_sum: u64,
    staleness_n: u64,
    last_t: f64,
    last_steps: u64,
    returns: Vec<f64>,
    warnings: Vec<String>,
    rows: Vec<MetricsRow>,
    writer: Option<csv::Writer<File>>,
}

impl Recorder {
    pub fn new(clock: Clock, by_eval: bool, log_every: u64, out: Option<&Path>) -> Result<Self, BenchError> {
        let writer = match out {
            Some(path) => {
                if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                    std::fs::create_dir_all(dir)?;
                }
                let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
                w.write_record(CSV_HEADER)?;
                w.flush()?;
                Some(w)
            }
            None => None,
        };
        Ok(Self {
            clock,
            by_eval,
            log_every: log_every.max(1),
            env_steps: 0,
            episodes: 0,
            loss: None,
            version: 0,
            staleness_sum: 0,
            staleness_n: 0,
            last_t: 0.0,
            last_steps: 0,
            returns: Vec::new(),
            warnings: Vec::new(),
            rows: Vec::new(),
            writer,
        })
    }

    pub fn on_event(&mut self, event: MetricEvent) -> Result<(), BenchError> {
        match event {
            MetricEvent::Episode { steps, episode_return, .. } => {
                self.env_steps += steps as u64;
                self.episodes += 1;
                self.returns.push(episode_return);
                if !self.by_eval && self.episodes.is_multiple_of(self.log_every) {
                    self.emit(None, None)?;
                }
            }
            MetricEvent::Train { loss, version, .. } => {
                self.loss = Some(loss);
                self.version = self.version.max(version);
            }
            MetricEvent::Fetch { staleness, .. } => {
                self.staleness_sum += staleness;
                self.staleness_n += 1;
            }
            MetricEvent::Eval { mean_return, solve_rate, .. } => self.emit(Some(mean_return), solve_rate)?,
            MetricEvent::Warning(w) => self.warnings.push(w),
        }
        Ok(())
    }

    pub fn emit(&mut self, eval_return: Option<f64>, solve_rate: Option<f64>) -> Result<(), BenchError> {
        let t = self.clock.now(self.env_steps);
        let dt = t - self.last_t;
        let steps_per_sec = if dt > 0.0 { (self.env_steps - self.last_steps) as f64 / dt } else { 0.0 };
        let row = MetricsRow {
            wall_time_s: t,
            env_steps: self.env_steps,
            episodes: self.episodes,
            steps_per_sec,
            loss: self.loss,
            eval_return,
            solve_rate,
            snapshot_version: self.version,
            mean_staleness: self.mean_staleness(),
        };
        if let Some(w) = &mut self.writer {
            w.serialize(&row)?;
            w.flush()?;
        }
        self.last_t = t;
        self.last_steps = self.env_steps;
        self.rows.push(row);
        Ok(())
    }

    pub fn mean_staleness(&self) -> f64 {
        if self.staleness_n == 0 {
            0.0
        } else {
            self.staleness_sum as f64 / self.staleness_n as f64
        }
    }

    pub fn rows(&self) -> &[MetricsRow] {
        &self.rows
    }

    pub fn returns(&self) -> &[f64] {
        &self.returns
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn into_rows(self) -> Vec<MetricsRow> {
        self.rows
    }
}

/// Counts of each observed snapshot staleness, ascending.
pub fn staleness_histogram(samples: impl IntoIterator<Item = u64>) -> Vec<(u64, u64)> {
    let mut counts = std::collections::BTreeMap::new();
    for s in samples {
        *counts.entry(s).or_insert(0u64) += 1;
    }
    counts.into_iter().collect()
}

/// `staleness,count` rows next to the metrics file: `m.csv` gets
/// `m.staleness.csv`.
pub fn write_staleness_histogram(metrics_path: &Path, histogram: &[(u64, u64)]) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_path(metrics_path.with_extension("staleness.csv"))?;
    w.write_record(["staleness", "count"])?;
    for (s, c) in histogram {
        w.write_record([s.to_string(), c.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a metrics file back, checking the header.
pub fn read_csv(path: &Path) -> Result<Vec<MetricsRow>, BenchError> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
    if header != CSV_HEADER {
        return Err(BenchError::Io(format!("unexpected header {header:?}")));
    }
    r.deserialize().map(|row| row.map_err(BenchError::from)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_every_log_interval_with_windowed_rate() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let mut rec = Recorder::new(Clock::Virtual { step_secs: 0.5 }, false, 2, Some(&path)).unwrap();
        for i in 0..5 {
            rec.on_event(MetricEvent::Episode { actor_id: 0, index: i, steps: 4, episode_return: 1.0 }).unwrap();
        }
        rec.on_event(MetricEvent::Train { step: 1, loss: 0.25, version: 1 }).unwrap();
        rec.emit(Some(3.0), Some(0.5)).unwrap();
        let rows = read_csv(&path).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].env_steps, 8);
        assert_eq!(rows[0].wall_time_s, 4.0);
        assert_eq!(rows[0].steps_per_sec, 2.0);
        assert_eq!(rows[0].loss, None);
        assert_eq!(rows[2].loss, Some(0.25));
        assert_eq!(rows[2].eval_return, Some(3.0));
        assert!(rows.windows(2).all(|w| w[0].wall_time_s <= w[1].wall_time_s));
    }

    #[test]
    fn staleness_histogram_file() {
        let hist = staleness_histogram([0, 2, 0, 1, 0]);
        assert_eq!(hist, vec![(0, 3), (1, 1), (2, 1)]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        write_staleness_histogram(&path, &hist).unwrap();
        let text = std::fs::read_to_string(dir.path().join("m.staleness.csv")).unwrap();
        assert_eq!(text, "staleness,count\n0,3\n1,1\n2,1\n");
    }
}
