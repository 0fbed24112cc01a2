//! Events the roles report to whoever drives the run.

use crossbeam_channel::{unbounded, Receiver, Sender};

#[derive(Debug, Clone, PartialEq)]
pub enum MetricEvent {
    Episode { actor_id: u32, index: u64, steps: usize, episode_return: f64 },
    Train { step: u64, loss: f64, version: u64 },
    /// A worker refreshed its parameters; `staleness` is how many versions
    /// behind it was just before.
    Fetch { worker_id: u32, version: u64, staleness: u64 },
    Eval { ingested: u64, version: u64, mean_return: f64, solve_rate: Option<f64> },
    Warning(String),
}

/// Cloneable producer side of the metrics channel. A disconnected or absent
/// consumer is not an error.
#[derive(Debug, Clone, Default)]
pub struct MetricsSink(Option<Sender<MetricEvent>>);

impl MetricsSink {
    pub fn none() -> Self {
        Self(None)
    }

    pub fn send(&self, event: MetricEvent) {
        if let Some(tx) = &self.0 {
            let _ = tx.send(event);
        }
    }

    pub fn warn(&self, msg: impl Into<String>) {
        let msg = msg.into();
        log::warn!("{msg}");
        self.send(MetricEvent::Warning(msg));
    }
}

pub fn channel() -> (MetricsSink, Receiver<MetricEvent>) {
    let (tx, rx) = unbounded();
    (MetricsSink(Some(tx)), rx)
}
