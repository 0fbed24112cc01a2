use marl_core::envsim::{CoopMatrixGameSpec, EnvConfig, EnvSpec};
use marl_core::runtime::{self, MetricsSink, Mode, RunConfig};

fn matrix() -> EnvConfig {
    let payoff = vec![vec![8.0, 2.0, 0.0], vec![2.0, 4.0, 1.0], vec![0.0, 1.0, 3.0]];
    EnvConfig::Matrix(CoopMatrixGameSpec::two_player(&payoff, 5).unwrap())
}

fn small(mode: Mode, env: EnvConfig, seed: u64) -> RunConfig {
    let mut cfg = RunConfig::new(mode, env, seed);
    cfg.hidden = 8;
    cfg.embed = 4;
    cfg.learner.batch_size = 4;
    cfg.learner.min_fill = 4;
    cfg
}

#[test]
fn awl_ingests_every_episode() {
    let mut cfg = small(Mode::Awl, matrix(), 1);
    cfg.workers = 3;
    cfg.actors_per_worker = 2;
    cfg.episodes_per_actor = 7;
    let r = runtime::run(&cfg, &MetricsSink::none()).unwrap();
    assert_eq!(r.live_envs, 6);
    assert_eq!(r.total_episodes, 42);
    assert_eq!(r.train.ingested, 42);
    assert_eq!(r.actors.iter().map(|a| a.episodes).sum::<u64>(), 42);
    assert_eq!(r.env_steps, 42 * 5);
    assert!(r.train.train_steps > 0 && r.train.train_steps <= 42);
    assert_eq!(r.train.publishes, r.train.train_steps);
    assert_eq!(r.zero_start_violations(), 0);
    assert_eq!(r.workers.iter().map(|w| w.episodes_ended).sum::<u64>(), 42);
}

#[test]
fn aw_trains_in_the_worker() {
    let mut cfg = small(Mode::Aw, matrix(), 2);
    cfg.actors_per_worker = 4;
    cfg.episodes_per_actor = 5;
    let r = runtime::run(&cfg, &MetricsSink::none()).unwrap();
    assert_eq!(r.train.ingested, 20);
    assert!(r.train.train_steps > 0);
    assert_eq!(r.zero_start_violations(), 0);
    assert_eq!(r.workers.len(), 1);
    assert_eq!(r.train.publishes, r.train.train_steps);
}

#[test]
fn baseline_and_single_actor_awl_agree_on_first_episode() {
    for env in [matrix(), EnvConfig::Synthetic(EnvSpec::scenario("3m").unwrap())] {
        let mut reports = Vec::new();
        for mode in [Mode::Baseline, Mode::Awl] {
            let mut cfg = small(mode, env.clone(), 42);
            cfg.episodes_per_actor = 3;
            reports.push(runtime::run(&cfg, &MetricsSink::none()).unwrap());
        }
        let first = |i: usize| reports[i].actors[0].first_episode.clone().unwrap();
        assert_eq!(first(0), first(1));
        assert!(!first(0).is_empty());
    }
}

#[test]
fn runs_are_seed_deterministic_in_episode_content() {
    let run = || {
        let mut cfg = small(Mode::Awl, matrix(), 8);
        cfg.workers = 2;
        cfg.actors_per_worker = 2;
        cfg.episodes_per_actor = 2;
        runtime::run(&cfg, &MetricsSink::none()).unwrap()
    };
    let (a, b) = (run(), run());
    let firsts = |r: &runtime::RunReport| {
        let mut v: Vec<_> = r.actors.iter().map(|a| (a.actor_id, a.first_episode.clone())).collect();
        v.sort_by_key(|(id, _)| *id);
        v
    };
    assert_eq!(firsts(&a), firsts(&b));
}

#[test]
fn invalid_topologies_rejected() {
    let mut cfg = small(Mode::Baseline, matrix(), 1);
    cfg.actors_per_worker = 2;
    assert!(runtime::run(&cfg, &MetricsSink::none()).is_err());
    let mut cfg = small(Mode::Aw, matrix(), 1);
    cfg.workers = 2;
    assert!(runtime::run(&cfg, &MetricsSink::none()).is_err());
}
