use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cage-transport"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(cmd: &mut Command) -> Output {
    cmd.env_remove("SWARM_LOG_LEVEL").output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn validate_accepts_shipped_configs() {
    for name in ["straight", "straight_rot", "zigzag", "caging_25", "large"] {
        let o = run(bin().args(["validate", "--config"]).arg(configs().join(format!("{name}.toml"))));
        assert_eq!(o.status.code(), Some(0), "{name}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(stdout(&o).contains("ok"));
    }
}

#[test]
fn validate_rejects_small_object_naming_rule() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.toml");
    std::fs::write(&cfg, "[object]\nwidth = 0.4\nheight = 0.2\n").unwrap();
    let o = run(bin().args(["validate", "--config"]).arg(&cfg));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("perimeter"));
}

#[test]
fn unknown_field_is_a_syntax_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "robot_cont = 3\n").unwrap();
    let o = run(bin().args(["validate", "--config"]).arg(&cfg));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("robot_cont"));
}

#[test]
fn sweep_writes_tables_plots_and_dumps() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run(bin()
        .args(["sweep", "--seeds", "1,2", "--parallel", "2", "--dump-state", "--config"])
        .arg(configs().join("straight.toml"))
        .arg("--out")
        .arg(&out));
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("2/2 runs succeeded"));
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
    let names: Vec<String> = std::fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    for suffix in ["_s1_run.json", "_s2_events.csv", "_s1_trajectory.svg", "_times.svg", "_errors.svg", "_effective.svg"] {
        assert!(names.iter().any(|n| n.ends_with(suffix)), "missing *{suffix} in {names:?}");
    }
    let dumps: Vec<PathBuf> = std::fs::read_dir(out.join("dumps")).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(dumps.len(), 2);

    let replay_dir = dir.path().join("replay");
    let o = run(bin().arg("replay").arg(&dumps[0]).arg("--out").arg(&replay_dir));
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read_dir(&replay_dir).unwrap().count(), 1);

    let before = std::fs::read(out.join(names.iter().find(|n| n.ends_with("_times.svg")).unwrap())).unwrap();
    let o = run(bin().args(["plot", "--out"]).arg(&out));
    assert_eq!(o.status.code(), Some(0));
    let after = std::fs::read(out.join(names.iter().find(|n| n.ends_with("_times.svg")).unwrap())).unwrap();
    assert_eq!(before, after);
}

#[test]
fn failed_run_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(bin()
        .args(["run", "--seeds", "1", "--max-ticks", "50", "--config"])
        .arg(configs().join("straight.toml"))
        .arg("--out")
        .arg(dir.path()));
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAILED"));
}

#[test]
fn plot_on_empty_dir_is_a_notice() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(bin().args(["plot", "--out"]).arg(dir.path()));
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("no run files"));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn log_level_comes_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["run", "--seeds", "1", "--max-ticks", "50", "--out"])
        .arg(dir.path())
        .env("SWARM_LOG_LEVEL", "info")
        .output()
        .unwrap();
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed 1"));
    let quiet = run(bin().args(["run", "--seeds", "1", "--max-ticks", "50", "--out"]).arg(dir.path()));
    assert!(!String::from_utf8_lossy(&quiet.stderr).contains("seed 1"));
}

#[test]
fn bad_seed_list_is_rejected() {
    let o = run(bin().args(["sweep", "--seeds", "x,2"]));
    assert_eq!(o.status.code(), Some(2));
}
