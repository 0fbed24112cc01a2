use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use marl_bench::{learning_curve_eval, run_experiment, throughput_compare, topology_banner, BenchError, CompareSpec, ExperimentConfig};

#[derive(Parser)]
#[command(name = "marl-bench", version, about = "Run and compare baseline, AW and AWL training topologies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML experiment file. Keys can be overridden with MARL_<KEY> and
    /// MARL_ENV_<KEY> environment variables.
    #[arg(long)]
    config: Option<PathBuf>,
    /// baseline, aw or awl.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Metrics CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// Actors per worker.
    #[arg(long)]
    actors: Option<usize>,
    /// Episodes per actor (for `compare`: the total budget of every mode).
    #[arg(long)]
    episodes: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment.
    Run(Common),
    /// Measure sample-collection throughput of all three topologies under
    /// one episode budget.
    Compare(Common),
    /// Run with periodic greedy evaluation and print the learning curve.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 50)]
        eval_every: u64,
        #[arg(long, default_value_t = 20)]
        eval_episodes: usize,
    },
}

fn load(c: &Common) -> Result<ExperimentConfig, BenchError> {
    let mut cfg = match &c.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::from_env()?,
    };
    if let Some(m) = &c.mode {
        cfg.mode = m.clone();
    }
    if let Some(s) = c.seed {
        cfg.seed = Some(s);
    }
    if let Some(o) = &c.out {
        cfg.out = Some(o.clone());
    }
    if let Some(w) = c.workers {
        cfg.workers = w;
    }
    if let Some(a) = c.actors {
        cfg.actors = a;
    }
    if let Some(e) = c.episodes {
        cfg.episodes = e;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), BenchError> {
    match cli.command {
        Command::Run(c) => {
            let cfg = load(&c)?;
            println!("{}", topology_banner(&cfg.to_run_config()?));
            let out = run_experiment(&cfg)?;
            let json = serde_json::to_string_pretty(&out.summary).map_err(|e| BenchError::Io(e.to_string()))?;
            println!("{json}");
        }
        Command::Compare(c) => {
            let mut cfg = load(&c)?;
            let csv = cfg.out.take();
            let spec = CompareSpec { total_episodes: c.episodes.unwrap_or(CompareSpec::default().total_episodes), ..CompareSpec::default() };
            let table = throughput_compare(&cfg, &spec)?;
            print!("{table}");
            println!("aw/baseline {:.2}  awl/aw {:.2}", table.ratio("aw", "baseline"), table.ratio("awl", "aw"));
            if let Some(path) = csv {
                table.write_csv(&path)?;
            }
        }
        Command::Eval { common, eval_every, eval_episodes } => {
            let cfg = load(&common)?;
            println!("{}", topology_banner(&cfg.to_run_config()?));
            for row in learning_curve_eval(&cfg, eval_every, eval_episodes)? {
                println!(
                    "episodes {:>7}  return {:>10.4}  solve rate {}",
                    row.episodes,
                    row.eval_return.unwrap_or(f64::NAN),
                    row.solve_rate.map_or("n/a".to_string(), |s| format!("{s:.3}"))
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
