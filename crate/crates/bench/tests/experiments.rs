use std::process::Command;

use marl_bench::metrics::read_csv;
use marl_bench::{run_experiment, topology_banner, ExperimentConfig};
use statrs::distribution::{ContinuousCDF, Normal};

fn small(mode: &str, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        mode: mode.into(),
        seed: Some(seed),
        hidden: 8,
        embed: 4,
        batch_size: 4,
        min_fill: 4,
        episodes: 30,
        log_every: 5,
        ..ExperimentConfig::default()
    }
}

#[test]
fn baseline_writes_monotone_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small("baseline", 3);
    cfg.out = Some(dir.path().join("metrics.csv"));
    cfg.summary = Some(dir.path().join("summary.json"));
    let out = run_experiment(&cfg).unwrap();
    let rows = read_csv(cfg.out.as_ref().unwrap()).unwrap();
    assert!(rows.len() >= 6);
    assert!(rows.windows(2).all(|w| w[0].env_steps <= w[1].env_steps && w[0].episodes <= w[1].episodes));
    assert!(rows.windows(2).all(|w| w[0].wall_time_s <= w[1].wall_time_s));
    assert_eq!(out.summary.total_episodes, 30);
    assert_eq!(out.summary.env_steps, 150);
    assert!(out.summary.train_steps > 0);
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(cfg.summary.unwrap()).unwrap()).unwrap();
    assert_eq!(json["topology"]["live_envs"], 1);
}

#[test]
fn virtual_clock_baseline_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut bytes = Vec::new();
    for i in 0..2 {
        let mut cfg = small("baseline", 11);
        cfg.virtual_clock = true;
        cfg.eval_every = 10;
        cfg.eval_episodes = 4;
        cfg.out = Some(dir.path().join(format!("m{i}.csv")));
        run_experiment(&cfg).unwrap();
        bytes.push(std::fs::read(cfg.out.unwrap()).unwrap());
    }
    assert!(!bytes[0].is_empty());
    assert_eq!(bytes[0], bytes[1]);
}

// Uniform joint actions on the default 3x3 game: per-step reward mean 21/9
// and second moment 99/9, five steps per episode.
#[test]
fn uniform_policy_matches_closed_form_mean() {
    let mut cfg = small("awl", 5);
    cfg.workers = 2;
    cfg.actors = 2;
    cfg.episodes = 50;
    cfg.eps_start = 1.0;
    cfg.eps_end = 1.0;
    let out = run_experiment(&cfg).unwrap();
    let returns: Vec<f64> = out.report.returns().into_iter().flat_map(|(_, r)| r).collect();
    assert_eq!(returns.len(), 200);
    let mean_step = 21.0 / 9.0;
    let var_step = 99.0 / 9.0 - mean_step * mean_step;
    let expected = 5.0 * mean_step;
    let se = (5.0 * var_step / returns.len() as f64).sqrt();
    let z = Normal::new(0.0, 1.0).unwrap().inverse_cdf(1.0 - 1e-4 / 2.0);
    let mean = returns.iter().sum::<f64>() / returns.len() as f64;
    assert!((mean - expected).abs() < z * se, "mean {mean} vs {expected} (se {se})");
}

#[test]
fn banner_counts_live_environments() {
    let mut cfg = small("awl", 1);
    cfg.workers = 4;
    cfg.actors = 3;
    let banner = topology_banner(&cfg.to_run_config().unwrap());
    assert!(banner.contains("live environments=12"), "{banner}");
}

#[test]
fn cli_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_marl-bench");
    let code = |args: &[&str]| Command::new(bin).args(args).env_remove("MARL_SEED").output().unwrap().status.code();
    assert_eq!(code(&["run", "--mode", "aw"]), Some(3));
    assert_eq!(code(&["run", "--mode", "nope", "--seed", "1"]), Some(3));
    assert_eq!(code(&["run", "--config", "/nonexistent/x.toml", "--seed", "1"]), Some(5));
    assert_eq!(code(&["compare", "--seed", "1", "--episodes", "50"]), Some(6));
    assert_eq!(code(&["frobnicate"]), Some(2));
    let ok = Command::new(bin)
        .args(["run", "--mode", "aw", "--seed", "2", "--actors", "2", "--episodes", "3"])
        .output()
        .unwrap();
    assert!(ok.status.success());
    assert!(String::from_utf8_lossy(&ok.stdout).contains("live environments=2"));
}
