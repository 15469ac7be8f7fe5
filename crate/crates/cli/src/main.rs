use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use cage_transport::harness::{load_runs, write_run_files};
use cage_transport::plot::{load_dump, replay_svg};
use cage_transport::{emit_plots, export_metrics, load_config, run_experiment, ExperimentOptions, RunResult, ScenarioConfig};
use clap::{Args, Parser, Subcommand};

/// Multi-robot caging and collective transport simulator.
#[derive(Debug, Parser)]
#[command(name = "cage-transport", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a config file and print its resolved values.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the first selected seed.
    Run(RunArgs),
    /// Run every selected seed, then export tables and plots.
    Sweep(RunArgs),
    /// Re-render plots from the run files in a directory.
    Plot {
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Render the last frame and object track of a state dump.
    Replay {
        /// A `*_state.jsonl` file written with --dump-state.
        dump: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// A count n (seeds 1..=n) or a comma-separated list; defaults to the config's seeds.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    max_ticks: Option<u64>,
    #[arg(long, default_value_t = 1)]
    parallel: usize,
    /// Write a line-delimited per-tick state dump for each seed.
    #[arg(long)]
    dump_state: bool,
}

fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let s = s.trim();
    if s.contains(',') {
        return s
            .split(',')
            .filter(|t| !t.trim().is_empty())
            .map(|t| t.trim().parse::<u64>().with_context(|| format!("bad seed {t:?}")))
            .collect();
    }
    let n: u64 = s.parse().with_context(|| format!("bad seed count {s:?}"))?;
    if n == 0 {
        bail!("seed count must be positive");
    }
    Ok((1..=n).collect())
}

fn load(config: Option<&Path>) -> Result<ScenarioConfig> {
    match config {
        Some(p) => Ok(load_config(p)?),
        None => Ok(ScenarioConfig::default()),
    }
}

fn execute(args: &RunArgs, single: bool) -> Result<bool> {
    let cfg = load(args.config.as_deref())?;
    let mut seeds = match &args.seeds {
        Some(s) => parse_seeds(s)?,
        None => cfg.seeds.clone(),
    };
    if single {
        seeds.truncate(1);
    }
    let opts = ExperimentOptions {
        parallel: args.parallel,
        dump_dir: args.dump_state.then(|| args.out.join("dumps")),
        max_ticks: args.max_ticks,
    };
    let runs = run_experiment(&cfg, &seeds, &opts)?;
    write_outputs(&runs, &args.out)?;
    let ok = runs.iter().filter(|r| r.metrics.success).count();
    for r in &runs {
        let m = &r.metrics;
        match &m.failure {
            None => println!(
                "seed {}: ok caging {:.1}s transport {} final error {}",
                m.seed,
                m.caging_time.unwrap_or(f64::NAN),
                m.transport_time.map_or("-".into(), |t| format!("{t:.1}s")),
                m.final_position_error.map_or("-".into(), |e| format!("{e:.3} m")),
            ),
            Some(f) => println!("seed {}: FAILED {f}", m.seed),
        }
    }
    println!("{ok}/{} runs succeeded; results in {}", runs.len(), args.out.display());
    Ok(ok == runs.len())
}

fn write_outputs(runs: &[RunResult], out: &Path) -> Result<()> {
    for r in runs {
        write_run_files(r, out)?;
    }
    let metrics: Vec<_> = runs.iter().map(|r| r.metrics.clone()).collect();
    export_metrics(&metrics, out)?;
    emit_plots(runs, out)?;
    Ok(())
}

fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Validate { config } => {
            let cfg = load_config(&config)?;
            println!(
                "{}: ok, {} robots, I_d {} m, d_T {:.4} m, path {:?} x{}, hash {}",
                config.display(),
                cfg.robot_count,
                cfg.caging.i_d,
                cfg.caging.d_t(),
                cfg.path.kind,
                cfg.path.waypoints,
                cfg.fingerprint()
            );
            Ok(true)
        }
        Command::Run(args) => execute(&args, true),
        Command::Sweep(args) => execute(&args, false),
        Command::Plot { out } => {
            let runs = load_runs(&out)?;
            if runs.is_empty() {
                println!("no run files in {}", out.display());
                return Ok(true);
            }
            let files = emit_plots(&runs, &out)?;
            println!("{} plots written to {}", files.len(), out.display());
            Ok(true)
        }
        Command::Replay { dump, out } => {
            let frames = load_dump(&dump)?;
            let Some(svg) = replay_svg(&frames) else {
                println!("{} holds no frames", dump.display());
                return Ok(true);
            };
            std::fs::create_dir_all(&out).with_context(|| out.display().to_string())?;
            let stem = dump.file_stem().and_then(|s| s.to_str()).unwrap_or("replay");
            let path = out.join(format!("{stem}.svg"));
            std::fs::write(&path, svg).with_context(|| path.display().to_string())?;
            println!("{} frames rendered to {}", frames.len(), path.display());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SWARM_LOG_LEVEL", "warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
