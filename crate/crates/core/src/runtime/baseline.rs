use std::time::Instant;

use super::actor::{play_episode, ActorReport};
use super::metrics::{MetricEvent, MetricsSink};
use super::topology::RunReport;
use super::{derive_seed, DecisionEngine, Mode, RunConfig, RuntimeError, Stream, Trainer, WorkerReport};
use crate::episode::EpisodeShape;
use crate::nets::Model;
use crate::paramstore::SharedParamPool;

/// One environment, acting and training in the same loop: after every
/// episode the owed train steps run before the next reset.
///
/// Seeds are derived exactly as for actor 0 and worker 0 of the
/// decoupled topologies, so a single-actor decoupled run sees the same first
/// episode.
pub fn run_baseline(cfg: &RunConfig, metrics: &MetricsSink) -> Result<RunReport, RuntimeError> {
    let mut cfg = cfg.clone();
    cfg.mode = Mode::Baseline;
    cfg.validate()?;
    baseline(&cfg, metrics).map_err(|e| e.in_role(super::Role::Baseline))
}

fn baseline(cfg: &RunConfig, metrics: &MetricsSink) -> Result<RunReport, RuntimeError> {
    let layout = cfg.layout();
    let spec = cfg.env.spec();
    let init = Model::init(layout, cfg.seed);
    let pool = SharedParamPool::new(layout, init.flatten())?;
    let mut trainer = Trainer::new(cfg.learner.clone(), init.clone(), EpisodeShape::from(&spec), derive_seed(cfg.seed, Stream::Learner, 0))?
        .with_writer(pool.writer()?)
        .with_metrics(metrics.clone());
    if let Some(eval) = &cfg.eval {
        trainer = trainer.with_eval(eval.clone(), cfg.env.clone());
    }
    let mut engine = DecisionEngine::new(init, 1, cfg.worker.epsilon, derive_seed(cfg.seed, Stream::Worker, 0));
    let mut env = cfg.env.build(derive_seed(cfg.seed, Stream::Env, 0))?;
    let start = Instant::now();
    let mut actor = ActorReport {
        actor_id: 0,
        episodes: 0,
        env_steps: 0,
        returns: Vec::new(),
        first_episode: None,
        finished_at: start,
    };
    let mut worker = WorkerReport::default();
    let result = (|| {
        for index in 0..cfg.episodes_per_actor {
            let record = play_episode(env.as_mut(), 0, index, |req| {
                worker.batches += 1;
                engine.decide(0, &req.per_agent_obs, &req.avail_actions)
            })?;
            engine.end_episode(0);
            worker.episodes_ended += 1;
            actor.episodes += 1;
            actor.env_steps += record.len() as u64;
            actor.returns.push(record.episode_return());
            metrics.send(MetricEvent::Episode {
                actor_id: 0,
                index,
                steps: record.len(),
                episode_return: record.episode_return(),
            });
            if actor.first_episode.is_none() {
                actor.first_episode = Some(record.clone());
            }
            trainer.ingest(record)?;
            if trainer.train_owed()? > 0 {
                engine.load_model(trainer.model(), trainer.version());
            }
            trainer.maybe_eval()?;
        }
        Ok::<_, RuntimeError>(())
    })();
    env.close();
    result?;
    actor.finished_at = Instant::now();
    worker.stats = engine.stats();
    let (train, model) = trainer.finish()?;
    Ok(RunReport {
        mode: Mode::Baseline,
        live_envs: 1,
        total_episodes: actor.episodes,
        env_steps: actor.env_steps,
        collection_time: actor.finished_at - start,
        total_time: start.elapsed(),
        actors: vec![actor],
        workers: vec![worker],
        train,
        model,
    })
}
