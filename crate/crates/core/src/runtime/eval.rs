use super::actor::play_episode;
use super::{derive_seed, DecisionEngine, EpsilonSchedule, RuntimeError, Stream};
use crate::envsim::EnvConfig;
use crate::nets::{Execution, Model};
use crate::par::map_indexed;

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub returns: Vec<f64>,
    pub mean_return: f64,
    /// Fraction of episodes reaching the known optimum, when there is one.
    pub solve_rate: Option<f64>,
}

/// Runs `episodes` episodes with frozen parameters at a fixed exploration
/// rate. Episode `i` uses its own environment and random streams, so the
/// result does not depend on how the episodes are scheduled.
pub fn evaluate(
    model: &Model,
    env: &EnvConfig,
    episodes: usize,
    epsilon: f64,
    seed: u64,
    exec: Execution,
) -> Result<EvalResult, RuntimeError> {
    let runs = map_indexed(episodes, exec, |i| -> Result<(f64, Option<f64>), RuntimeError> {
        let mut e = env.build(derive_seed(seed, Stream::Eval, i as u64))?;
        let mut engine = DecisionEngine::new(
            model.clone(),
            1,
            EpsilonSchedule::constant(epsilon),
            derive_seed(seed, Stream::Eval, (1 << 31) | i as u64),
        );
        let record = play_episode(e.as_mut(), 0, i as u64, |req| {
            engine.decide(0, &req.per_agent_obs, &req.avail_actions)
        })?;
        let optimum = e.optimal_return();
        e.close();
        Ok((record.episode_return(), optimum))
    });
    let mut returns = Vec::with_capacity(episodes);
    let mut optimum = None;
    for r in runs {
        let (ret, opt) = r?;
        returns.push(ret);
        optimum = opt;
    }
    let mean_return = if returns.is_empty() { 0.0 } else { returns.iter().sum::<f64>() / returns.len() as f64 };
    let solve_rate = optimum.filter(|_| !returns.is_empty()).map(|opt| {
        let tol = 1e-9 * opt.abs().max(1.0);
        returns.iter().filter(|&&r| r >= opt - tol).count() as f64 / returns.len() as f64
    });
    Ok(EvalResult { returns, mean_return, solve_rate })
}
