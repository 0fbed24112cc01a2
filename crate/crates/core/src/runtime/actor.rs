use std::time::Instant;

use super::metrics::{MetricEvent, MetricsSink};
use super::{ActorConfig, RuntimeError};
use crate::envsim::{EnvSpec, MultiAgentEnv};
use crate::episode::EpisodeRecord;
use crate::pipes::{ActorEnd, ObsRequest, QueueSender};

#[derive(Debug, Clone)]
pub struct ActorReport {
    pub actor_id: u32,
    pub episodes: u64,
    pub env_steps: u64,
    pub returns: Vec<f64>,
    pub first_episode: Option<EpisodeRecord>,
    pub finished_at: Instant,
}

/// Plays one episode, asking `decide` for every joint action.
pub fn play_episode(
    env: &mut dyn MultiAgentEnv,
    actor_id: u32,
    index: u64,
    mut decide: impl FnMut(&ObsRequest) -> Result<Vec<usize>, RuntimeError>,
) -> Result<EpisodeRecord, RuntimeError> {
    let spec: EnvSpec = env.spec().clone();
    let mut record = EpisodeRecord::new(actor_id, index, &spec);
    let mut res = env.reset();
    record.push_observation(&res.per_agent_obs, &res.global_state, &res.avail_actions);
    for t in 0.. {
        let req = ObsRequest {
            actor_id,
            env_time_step: t,
            per_agent_obs: res.per_agent_obs,
            avail_actions: res.avail_actions,
            episode_done: false,
        };
        let joint = decide(&req)?;
        res = env.step(&joint)?;
        record.push_transition(&joint, res.reward);
        record.push_observation(&res.per_agent_obs, &res.global_state, &res.avail_actions);
        if res.done {
            record.terminated = res.terminated;
            break;
        }
    }
    Ok(record)
}

/// Plays `cfg.episodes` episodes through the worker behind `pipe`, pushing
/// each finished one to `queue`.
pub fn run_actor(
    cfg: &ActorConfig,
    pipe: ActorEnd,
    queue: QueueSender,
    metrics: &MetricsSink,
) -> Result<ActorReport, RuntimeError> {
    cfg.validate()?;
    let env = cfg.env.build(cfg.seed)?;
    run_actor_with_env(cfg, env, pipe, queue, metrics)
}

/// [`run_actor`] with a caller-supplied environment. The environment is
/// closed and both endpoints released however the run ends.
pub fn run_actor_with_env(
    cfg: &ActorConfig,
    mut env: Box<dyn MultiAgentEnv>,
    mut pipe: ActorEnd,
    queue: QueueSender,
    metrics: &MetricsSink,
) -> Result<ActorReport, RuntimeError> {
    let result = act(cfg, env.as_mut(), &mut pipe, &queue, metrics);
    env.close();
    drop(pipe);
    queue.close();
    result
}

fn act(
    cfg: &ActorConfig,
    env: &mut dyn MultiAgentEnv,
    pipe: &mut ActorEnd,
    queue: &QueueSender,
    metrics: &MetricsSink,
) -> Result<ActorReport, RuntimeError> {
    let id = cfg.actor_id;
    let mut report = ActorReport {
        actor_id: id,
        episodes: 0,
        env_steps: 0,
        returns: Vec::new(),
        first_episode: None,
        finished_at: Instant::now(),
    };
    for index in 0..cfg.episodes {
        let record = play_episode(env, id, index, |req| Ok(pipe.request(req.clone())?.joint_action))?;
        let view = record.view();
        let last = view.len;
        pipe.request(ObsRequest {
            actor_id: id,
            env_time_step: last as u32,
            per_agent_obs: (0..record.n_agents).map(|i| view.obs(last, i).to_vec()).collect(),
            avail_actions: (0..record.n_agents).map(|i| view.avail(last, i).to_vec()).collect(),
            episode_done: true,
        })?;
        report.episodes += 1;
        report.env_steps += last as u64;
        report.returns.push(record.episode_return());
        metrics.send(MetricEvent::Episode {
            actor_id: id,
            index,
            steps: last,
            episode_return: record.episode_return(),
        });
        if report.first_episode.is_none() {
            report.first_episode = Some(record.clone());
        }
        queue.push(record)?;
    }
    report.finished_at = Instant::now();
    Ok(report)
}
