//! Multi-seed experiments and the comma-separated metric tables.
//!
//! Three tables are written per export, all carrying `schema_version` as
//! their first column:
//!
//! * `summary.csv`, one row per run (see [`SUMMARY_COLUMNS`]).
//! * `waypoints.csv`, one row per reached waypoint (see [`WAYPOINT_COLUMNS`]).
//! * `spacing.csv`, the inter-robot distance series (see [`SPACING_COLUMNS`]).
//!
//! Missing values are empty cells. Times are seconds, distances metres and
//! angles radians.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::config::ScenarioConfig;
use crate::sim::{run_single, EventRecord, RunMetrics, RunOptions, RunResult, SimError};

pub const SCHEMA_VERSION: u32 = 1;

pub const SUMMARY_COLUMNS: [&str; 16] = [
    "schema_version",
    "config_hash",
    "seed",
    "robot_count",
    "success",
    "failure",
    "caging_tick",
    "caging_time_s",
    "transport_time_s",
    "total_ticks",
    "cage_size",
    "final_spacing_m",
    "final_position_error_m",
    "final_yaw_error_rad",
    "termination_flags",
    "waypoints_reached",
];

pub const WAYPOINT_COLUMNS: [&str; 11] = [
    "schema_version",
    "config_hash",
    "seed",
    "waypoint",
    "tick",
    "centroid_estimate_error_m",
    "position_error_m",
    "yaw_error_rad",
    "effective_pushers",
    "effective_rotators",
    "rotated",
];

pub const SPACING_COLUMNS: [&str; 6] = ["schema_version", "config_hash", "seed", "tick", "mean_m", "std_m"];

pub const EVENT_COLUMNS: [&str; 5] = ["tick", "robot", "event", "task_id", "detail"];

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("seed {seed}: {source}")]
    Sim {
        seed: u64,
        #[source]
        source: SimError,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.to_path_buf(), source }
}

/// Base name shared by every file of one run.
pub fn run_stem(config_hash: &str, seed: u64) -> String {
    format!("{config_hash}_s{seed}")
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentOptions {
    /// Worker threads; 0 or 1 runs the seeds one after another.
    pub parallel: usize,
    /// Write a per-tick state dump for every seed into this directory.
    pub dump_dir: Option<PathBuf>,
    pub max_ticks: Option<u64>,
}

/// Runs every seed and returns the results in the order of `seeds`.
/// Stalled or timed-out runs come back as failed metrics, not errors.
pub fn run_experiment(cfg: &ScenarioConfig, seeds: &[u64], opts: &ExperimentOptions) -> Result<Vec<RunResult>, HarnessError> {
    let mut cfg = cfg.clone();
    if let Some(m) = opts.max_ticks {
        cfg.max_ticks = m;
    }
    let hash = cfg.fingerprint();
    if let Some(dir) = &opts.dump_dir {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let one = |seed: u64| -> Result<RunResult, HarnessError> {
        let dump = opts.dump_dir.as_ref().map(|d| d.join(format!("{}_state.jsonl", run_stem(&hash, seed))));
        let result = run_single(&cfg, seed, &RunOptions { trace: false, dump }).map_err(|source| HarnessError::Sim { seed, source })?;
        log::info!(
            "seed {seed}: success={} caging={:?}s transport={:?}s",
            result.metrics.success,
            result.metrics.caging_time,
            result.metrics.transport_time
        );
        Ok(result)
    };
    if opts.parallel > 1 {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(opts.parallel).build()?;
        pool.install(|| seeds.par_iter().map(|&s| one(s)).collect())
    } else {
        seeds.iter().map(|&s| one(s)).collect()
    }
}

/// Writes `<stem>_run.json` and `<stem>_events.csv` for one run.
pub fn write_run_files(result: &RunResult, out_dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let stem = run_stem(&result.metrics.config_hash, result.metrics.seed);
    let json_path = out_dir.join(format!("{stem}_run.json"));
    let text = serde_json::to_string(result).map_err(|source| HarnessError::Json { path: json_path.clone(), source })?;
    fs::write(&json_path, text).map_err(io_err(&json_path))?;
    let events_path = out_dir.join(format!("{stem}_events.csv"));
    write_events(&result.events, &events_path)?;
    Ok(vec![json_path, events_path])
}

fn write_events(events: &[EventRecord], path: &Path) -> Result<(), HarnessError> {
    let csv_err = |source| HarnessError::Csv { path: path.to_path_buf(), source };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(EVENT_COLUMNS).map_err(csv_err)?;
    for e in events {
        w.write_record([
            e.tick.to_string(),
            e.robot.to_string(),
            e.event.clone(),
            opt(e.task_id),
            e.detail.clone(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(io_err(path))
}

/// Loads every `*_run.json` in `dir`, sorted by file name.
pub fn load_runs(dir: &Path) -> Result<Vec<RunResult>, HarnessError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.ends_with("_run.json")))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).map_err(io_err(p))?;
            serde_json::from_str(&text).map_err(|source| HarnessError::Json { path: p.clone(), source })
        })
        .collect()
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExportedFiles {
    pub summary: PathBuf,
    pub waypoints: PathBuf,
    pub spacing: PathBuf,
}

/// Writes the three metric tables. Output depends only on `runs`, so
/// repeated exports are byte-identical.
pub fn export_metrics(runs: &[RunMetrics], out_dir: &Path) -> Result<ExportedFiles, HarnessError> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let files = ExportedFiles {
        summary: out_dir.join("summary.csv"),
        waypoints: out_dir.join("waypoints.csv"),
        spacing: out_dir.join("spacing.csv"),
    };
    let v = SCHEMA_VERSION.to_string();

    write_table(&files.summary, &SUMMARY_COLUMNS, runs.iter().map(|m| {
        vec![
            v.clone(),
            m.config_hash.clone(),
            m.seed.to_string(),
            m.robot_count.to_string(),
            m.success.to_string(),
            m.failure.clone().unwrap_or_default(),
            opt(m.caging_tick),
            opt(m.caging_time),
            opt(m.transport_time),
            m.total_ticks.to_string(),
            m.cage_size.to_string(),
            m.final_spacing.to_string(),
            opt(m.final_position_error),
            opt(m.final_yaw_error),
            m.termination_flags.to_string(),
            m.waypoints.len().to_string(),
        ]
    }))?;

    write_table(&files.waypoints, &WAYPOINT_COLUMNS, runs.iter().flat_map(|m| {
        let v = v.clone();
        m.waypoints.iter().map(move |w| {
            vec![
                v.clone(),
                m.config_hash.clone(),
                m.seed.to_string(),
                w.index.to_string(),
                w.tick.to_string(),
                w.centroid_estimate_error.to_string(),
                w.position_error.to_string(),
                w.yaw_error.to_string(),
                w.effective_pushers.to_string(),
                w.effective_rotators.to_string(),
                w.rotated.to_string(),
            ]
        })
    }))?;

    write_table(&files.spacing, &SPACING_COLUMNS, runs.iter().flat_map(|m| {
        let v = v.clone();
        m.spacing_series.iter().map(move |s| {
            vec![
                v.clone(),
                m.config_hash.clone(),
                m.seed.to_string(),
                s.tick.to_string(),
                s.mean.to_string(),
                s.std.to_string(),
            ]
        })
    }))?;
    Ok(files)
}

fn write_table(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<(), HarnessError> {
    let csv_err = |source| HarnessError::Csv { path: path.to_path_buf(), source };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(path))
}

/// Median of the present values; `None` when there are none.
pub fn median(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let mut v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}
