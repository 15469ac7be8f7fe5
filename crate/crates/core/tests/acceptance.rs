//! End-to-end acceptance checks. Each check prints one PASS/FAIL line and
//! the binary exits non-zero if any of them fails.

use std::f64::consts::{PI, TAU};
use std::time::{Duration, Instant};

use cage_transport::allocation::Branch;
use cage_transport::comms::{barrier_register, barrier_step, exchange, graph_diameter, propagate, quorum_count, Loss};
use cage_transport::config::{mass_for_size, ObjectSpec, PathKind, DEFAULT_DENSITY};
use cage_transport::geometry::{perimeter_length, ArcPoint};
use cage_transport::harness::write_run_files;
use cage_transport::sim::{CageSnapshot, TraceFrame};
use cage_transport::transport::{is_effective_pusher, resultant_force_oracle, TransportPhase};
use cage_transport::{
    export_metrics, run_experiment, run_single, BarrierStatus, ConvexPolygon, ExperimentOptions, ObjectBody, Replica,
    RunOptions, RunResult, ScenarioConfig, Vec2,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

type Outcome = Result<String, String>;

fn check(cond: bool, ok: impl Into<String>, fail: impl Into<String>) -> Outcome {
    if cond {
        Ok(ok.into())
    } else {
        Err(fail.into())
    }
}

// ---------------------------------------------------------------- polygons

/// Jittered regular polygons with no interior angle below 45 degrees.
fn random_polygons(count: usize, seed: u64) -> Vec<ConvexPolygon> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < count {
        let r = rng.random_range(0.5..1.2);
        let n = rng.random_range(3..9);
        let sector = TAU / n as f64;
        let phase = rng.random_range(0.0..sector);
        let pts: Vec<Vec2> = (0..n)
            .map(|i| {
                let a = phase + sector * (i as f64 + rng.random_range(-0.15..0.15));
                Vec2::from_angle(a) * (r * rng.random_range(0.85..1.0))
            })
            .collect();
        let Ok(poly) = ConvexPolygon::hull(&pts) else { continue };
        let v = poly.vertices();
        let m = v.len();
        let min_angle = (0..m)
            .map(|i| (v[(i + m - 1) % m] - v[i]).angle_between(v[(i + 1) % m] - v[i]))
            .fold(f64::INFINITY, f64::min);
        if m >= 3 && min_angle >= 45f64.to_radians() {
            out.push(poly);
        }
    }
    out
}

fn caging_config(poly: &ConvexPolygon) -> ScenarioConfig {
    let base = ScenarioConfig::default();
    let ring = perimeter_length(poly) + TAU * (base.caging.d_s + base.robot.radius);
    ScenarioConfig {
        robot_count: (ring / base.caging.i_d).ceil() as usize + 8,
        caging_only: true,
        object: ObjectSpec::polygon(poly),
        max_ticks: 20_000,
        ..base
    }
}

/// Cross-branch neighbours in the ring ordered by angle about the object.
fn ring_tip_pairs(cage: &CageSnapshot) -> Vec<(usize, usize)> {
    let mut order: Vec<usize> = (0..cage.members.len()).collect();
    let angle = |i: usize| (cage.members[i].position - cage.object_position).angle();
    order.sort_by(|&a, &b| angle(a).total_cmp(&angle(b)));
    let n = order.len();
    (0..n)
        .map(|k| (order[k], order[(k + 1) % n]))
        .filter(|&(a, b)| {
            let (ba, bb) = (cage.members[a].branch, cage.members[b].branch);
            matches!((ba, bb), (Branch::Left, Branch::Right) | (Branch::Right, Branch::Left))
        })
        .collect()
}

fn deepest(cage: &CageSnapshot, branch: Branch) -> Option<u32> {
    cage.members.iter().filter(|m| m.branch == branch).map(|m| m.depth).max()
}

fn parent_child_distances(cage: &CageSnapshot) -> Vec<f64> {
    let seed = cage.members.iter().find(|m| m.branch == Branch::Seed);
    cage.members
        .iter()
        .filter(|m| m.branch != Branch::Seed)
        .filter_map(|m| {
            let parent = if m.depth == 0 {
                seed
            } else {
                cage.members.iter().find(|p| p.branch == m.branch && p.depth + 1 == m.depth)
            };
            parent.map(|p| p.position.distance(m.position))
        })
        .collect()
}

struct PolygonRuns {
    runs: Vec<RunResult>,
    i_d: f64,
    wall: Duration,
}

fn polygon_runs() -> PolygonRuns {
    let polys = random_polygons(20, 2024);
    let t0 = Instant::now();
    let runs: Vec<RunResult> = polys
        .par_iter()
        .enumerate()
        .map(|(k, p)| run_single(&caging_config(p), k as u64 + 1, &RunOptions::default()).expect("run"))
        .collect();
    PolygonRuns { runs, i_d: ScenarioConfig::default().caging.i_d, wall: t0.elapsed() }
}

fn caging_terminates(p: &PolygonRuns) -> Outcome {
    let mut bad = Vec::new();
    for (k, r) in p.runs.iter().enumerate() {
        let Some(cage) = r.cage.as_ref().filter(|_| r.metrics.success) else {
            bad.push(format!("#{k}: {:?}", r.metrics.failure));
            continue;
        };
        let pairs = ring_tip_pairs(cage);
        let tips = (deepest(cage, Branch::Left), deepest(cage, Branch::Right));
        let ok = match pairs.as_slice() {
            [(a, b)] => {
                let (a, b) = (&cage.members[*a], &cage.members[*b]);
                let depths = if a.branch == Branch::Left { (a.depth, b.depth) } else { (b.depth, a.depth) };
                a.position.distance(b.position) <= cage.d_t && (Some(depths.0), Some(depths.1)) == tips
            }
            _ => false,
        };
        if !ok {
            bad.push(format!("#{k}: {} ring tip pairs", pairs.len()));
        }
    }
    let detail = format!("{}/{} closed in {:.1?}", p.runs.len() - bad.len(), p.runs.len(), p.wall);
    check(bad.is_empty() && p.wall <= Duration::from_secs(300), detail.clone(), format!("{detail}; {bad:?}"))
}

fn caging_spacing(p: &PolygonRuns) -> Outcome {
    let d: Vec<f64> = p.runs.iter().filter_map(|r| r.cage.as_ref()).flat_map(parent_child_distances).collect();
    let within = d.iter().filter(|x| (**x - p.i_d).abs() <= 0.1).count();
    let frac = within as f64 / d.len().max(1) as f64;
    let detail = format!("{within}/{} parent-child gaps within 0.1 m of {} m", d.len(), p.i_d);
    check(!d.is_empty() && frac >= 0.95, detail.clone(), detail)
}

// ---------------------------------------------------------------- transport

fn transport_runs(kind: PathKind, seeds: std::ops::RangeInclusive<u64>) -> Vec<RunResult> {
    let mut cfg = ScenarioConfig::default();
    cfg.path.kind = kind;
    let opts = RunOptions { trace: true, ..Default::default() };
    seeds.collect::<Vec<_>>().par_iter().map(|&s| run_single(&cfg, s, &opts).expect("run")).collect()
}

fn straight_delivery(runs: &[RunResult]) -> Outcome {
    let done: Vec<&RunResult> = runs.iter().filter(|r| r.metrics.success).collect();
    let worst = done.iter().filter_map(|r| r.metrics.final_position_error).fold(0.0, f64::max);
    let all_close = done.iter().all(|r| r.metrics.final_position_error.is_some_and(|e| e <= 0.15));
    let detail = format!("{}/{} done, worst final error {worst:.3} m", done.len(), runs.len());
    check(done.len() >= 9 && all_close, detail.clone(), detail)
}

fn rotation_schedule(runs: &[RunResult]) -> Outcome {
    let tol = 2.0 * 5.72f64.to_radians();
    let mut bad = Vec::new();
    let mut worst: f64 = 0.0;
    for r in runs {
        let m = &r.metrics;
        let rotated: Vec<usize> = m.waypoints.iter().filter(|w| w.rotated).map(|w| w.index).collect();
        let yaw = m.final_yaw_error.map_or(f64::INFINITY, f64::abs);
        worst = worst.max(yaw);
        if !m.success || rotated != [3, 6] || yaw > tol {
            bad.push(format!("seed {}: ok={} rotated at {rotated:?} yaw {:.3}", m.seed, m.success, yaw));
        }
    }
    let detail = format!("{} runs, worst final yaw error {:.2} deg", runs.len(), worst.to_degrees());
    check(bad.is_empty(), detail.clone(), format!("{detail}; {bad:?}"))
}

/// Within each push segment, after 5 s the distance to the active waypoint
/// never rises more than 0.01 m above its running minimum.
fn push_monotonic(runs: &[RunResult], dt: f64, d_tol: f64) -> Outcome {
    let transient = (5.0 / dt).round() as u64;
    let mut worst: f64 = 0.0;
    let mut segments = 0;
    let mut checked = 0usize;
    for r in runs {
        let frames = r.trace.as_deref().unwrap_or_default();
        let mut k = 0;
        while k < frames.len() {
            let Some(TransportPhase::Push(w)) = frames[k].majority else {
                k += 1;
                continue;
            };
            let start = frames[k].tick;
            let target = r.path[w].position;
            let mut best = f64::INFINITY;
            segments += 1;
            while k < frames.len() && frames[k].majority == Some(TransportPhase::Push(w)) {
                let d = frames[k].object_position.distance(target);
                if frames[k].tick >= start + transient && best > d_tol {
                    worst = worst.max(d - best);
                    checked += 1;
                    best = best.min(d);
                }
                k += 1;
            }
        }
    }
    let detail = format!("{segments} push segments, {checked} ticks checked, worst rise {worst:.4} m");
    check(checked > 0 && worst <= 0.01, detail.clone(), detail)
}

fn nearest_boundary(poly: &ConvexPolygon, p: Vec2) -> Vec2 {
    let v = poly.vertices();
    let n = v.len();
    (0..n)
        .map(|i| {
            let (a, b) = (v[i], v[(i + 1) % n]);
            let ab = b - a;
            let t = ((p - a).dot(ab) / ab.dot(ab)).clamp(0.0, 1.0);
            a + ab * t
        })
        .min_by(|a, b| a.distance(p).total_cmp(&b.distance(p)))
        .expect("non-empty polygon")
}

fn effective_classification(runs: &[RunResult], cfg: &ScenarioConfig) -> Outcome {
    let shape = cfg.object.polygon_shape().expect("shape");
    let theta_p = cfg.pushing.theta_p_deg.to_radians();
    let mut compared = 0usize;
    let mut mismatches = Vec::new();
    for r in runs {
        for f in r.trace.as_deref().unwrap_or_default() {
            let poly = ObjectBody::new(&shape, f.object_position, f.object_yaw, 1.0, 0.0, 0.0).world_polygon();
            for rb in &f.robots {
                let brute = rb.tau_local.is_some_and(|tau| {
                    let to_obj = nearest_boundary(&poly, rb.position) - rb.position;
                    let to_tau = tau - rb.position;
                    let cos = to_obj.dot(to_tau) / (to_obj.norm() * to_tau.norm());
                    to_obj.norm() > 0.0 && to_tau.norm() > 0.0 && cos.clamp(-1.0, 1.0).acos() < theta_p
                });
                compared += 1;
                if brute != rb.effective && mismatches.len() < 5 {
                    mismatches.push(format!("seed {} tick {} robot {}", r.metrics.seed, f.tick, rb.id));
                }
            }
        }
    }
    let detail = format!("{compared} robot-ticks compared");
    check(compared > 0 && mismatches.is_empty(), detail.clone(), format!("{detail}; mismatches {mismatches:?}"))
}

fn frame_count(runs: &[RunResult]) -> usize {
    runs.iter().map(|r| r.trace.as_deref().map_or(0, <[TraceFrame]>::len)).sum()
}

// ---------------------------------------------------------------- oracles

/// Disc of radius `radius`: the effective arc for target direction `t`
/// spans `theta_p` either side of the point facing away from `t`, and the
/// integrated inward normal over a CCW arc from c to d is `(d - c).perp()`.
fn disc_force(samples: usize) -> Outcome {
    let theta_p = 115f64.to_radians();
    let radius = 1.3;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let t = Vec2::from_angle(rng.random_range(-PI..PI));
        let mid = t.angle() + PI;
        let (lo, hi) = (mid - theta_p, mid + theta_p);
        let arc: Vec<ArcPoint> = (0..samples)
            .map(|i| {
                let phi = lo + (hi - lo) * i as f64 / (samples - 1) as f64;
                let n = Vec2::from_angle(phi);
                ArcPoint { position: n * radius, inward_normal: -n, arclength: radius * (phi - lo) }
            })
            .collect();
        let interior = &arc[1..samples - 1];
        if !interior.iter().all(|a| is_effective_pusher(-a.position, t, theta_p)) {
            return Err("interior arc sample classified ineffective".into());
        }
        let outside = Vec2::from_angle(hi + 0.01) * radius;
        if is_effective_pusher(-outside, t, theta_p) {
            return Err("sample beyond the arc classified effective".into());
        }
        let got = resultant_force_oracle(&arc).map_err(|e| e.to_string())?;
        let expect = (arc[samples - 1].position - arc[0].position).perp();
        worst = worst.max((got - expect).norm() / expect.norm());
    }
    let detail = format!("worst relative error {:.3}% at {samples} samples", worst * 100.0);
    check(worst <= 0.02, detail.clone(), detail)
}

fn random_connected_graph(n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    let link = |adj: &mut Vec<Vec<usize>>, a: usize, b: usize| {
        if a != b && !adj[a].contains(&b) {
            adj[a].push(b);
            adj[b].push(a);
        }
    };
    for i in 1..n {
        let j = rng.random_range(0..i);
        link(&mut adj, i, j);
    }
    for _ in 0..rng.random_range(0..n) {
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        link(&mut adj, a, b);
    }
    adj
}

fn stigmergy_convergence(trials: usize) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for trial in 0..trials {
        let n = rng.random_range(2..=50);
        let graph = random_connected_graph(n, &mut rng);
        let mut replicas: Vec<Replica<u32>> = (0..n).map(|i| Replica::new(i as u32)).collect();
        let keys = ["a", "b", "c", "d"];
        // (key, version, writer) of every local write.
        let mut writes: Vec<(&str, u64, u32)> = Vec::new();
        for _ in 0..rng.random_range(1..40) {
            let w = rng.random_range(0..n);
            let key = keys[rng.random_range(0..keys.len())];
            let version = replicas[w].put(key, rng.random());
            writes.push((key, version, w as u32));
            if rng.random_bool(0.3) {
                let drop = rng.random_range(0.0..0.5);
                exchange(&mut replicas, &graph, false, Some(Loss { drop_probability: drop, rng: &mut rng }));
            }
        }
        while propagate(&mut replicas, &graph) > 0 {}
        for _ in 0..graph_diameter(&graph) {
            propagate(&mut replicas, &graph);
        }
        for key in keys {
            let winner = writes
                .iter()
                .filter(|w| w.0 == key)
                .max_by(|a, b| a.1.cmp(&b.1).then(b.2.cmp(&a.2)))
                .map(|w| (w.1, w.2));
            for r in &replicas {
                let got = r.entry(key).map(|e| (e.version, e.writer_id));
                if got != winner {
                    return Err(format!("trial {trial}: node {} holds {got:?} for {key}, expected {winner:?}", r.owner()));
                }
            }
        }
    }
    Ok(format!("{trials} random graphs and workloads converged"))
}

fn barrier_safety(schedules: usize) -> Outcome {
    let population = 25;
    let need = quorum_count(0.9, population);
    if need != 23 {
        return Err(format!("quorum for {population} is {need}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut passes = 0usize;
    for s in 0..schedules {
        let graph = random_connected_graph(population, &mut rng);
        let mut replicas: Vec<Replica<u8>> = (0..population).map(|i| Replica::new(i as u32)).collect();
        let mut order: Vec<usize> = (0..population).collect();
        order.shuffle(&mut rng);
        // Some schedules stop one short of the quorum.
        let registering = if s % 4 == 0 { need - 1 } else { population };
        let mut registered = 0;
        for tick in 0..400 {
            if registered < registering && rng.random_bool(0.3) {
                barrier_register(&mut replicas[order[registered]], "wp", 1);
                registered += 1;
            }
            exchange(&mut replicas, &graph, tick % 7 == 0, Some(Loss { drop_probability: 0.2, rng: &mut rng }));
            for r in &replicas {
                if barrier_step(r, "wp", population, 0.9) == BarrierStatus::Pass {
                    if registered < need {
                        return Err(format!("schedule {s}: robot {} passed with {registered} registered", r.owner()));
                    }
                    passes += 1;
                }
            }
        }
    }
    Ok(format!("{schedules} schedules, {passes} passes, none below {need}/{population}"))
}

fn masses() -> Outcome {
    let cases = [((2.0, 2.0), 5.56), ((3.6, 6.0), 30.024), ((7.2, 12.0), 120.096)];
    let got: Vec<f64> = cases.iter().map(|((w, h), _)| mass_for_size(*w, *h, DEFAULT_DENSITY)).collect();
    let ok = cases.iter().zip(&got).all(|((_, m), g)| (g - m).abs() <= 1e-9 * m);
    check(ok, format!("{got:?} kg"), format!("{got:?} kg"))
}

fn caging_scaling() -> Outcome {
    let t0 = Instant::now();
    let seeds: Vec<u64> = (1..=5).collect();
    let opts = ExperimentOptions { parallel: 5, ..Default::default() };
    let small = ScenarioConfig { caging_only: true, ..Default::default() };
    let mut large = small.clone();
    large.robot_count = 24;
    large.object = ObjectSpec::rectangle(3.6, 6.0);
    let median = |cfg: &ScenarioConfig| -> Result<f64, String> {
        let runs = run_experiment(cfg, &seeds, &opts).map_err(|e| e.to_string())?;
        let mut t: Vec<f64> = runs.iter().filter_map(|r| r.metrics.caging_time).collect();
        if t.len() != seeds.len() {
            return Err(format!("{} of {} runs caged", t.len(), seeds.len()));
        }
        t.sort_by(f64::total_cmp);
        Ok(t[t.len() / 2])
    };
    let (a, b) = (median(&small)?, median(&large)?);
    let wall = t0.elapsed();
    let detail = format!("median caging {a:.1} s (12 robots) vs {b:.1} s (24 robots), {wall:.1?}");
    check(b > a && wall <= Duration::from_secs(900), detail.clone(), detail)
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = ScenarioConfig::default();
    let seeds = [3, 4];
    let mut listings = Vec::new();
    for (name, parallel) in [("a", 1), ("b", 2)] {
        let out = dir.path().join(name);
        let opts = ExperimentOptions { parallel, ..Default::default() };
        let runs = run_experiment(&cfg, &seeds, &opts).map_err(|e| e.to_string())?;
        for r in &runs {
            write_run_files(r, &out).map_err(|e| e.to_string())?;
        }
        let metrics: Vec<_> = runs.iter().map(|r| r.metrics.clone()).collect();
        export_metrics(&metrics, &out).map_err(|e| e.to_string())?;
        let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(&out)
            .map_err(|e| e.to_string())?
            .map(|e| {
                let p = e.expect("entry").path();
                (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).expect("read"))
            })
            .collect();
        files.sort();
        listings.push(files);
    }
    let n = listings[0].len();
    check(listings[0] == listings[1], format!("{n} metric files byte-identical"), "metric files differ between runs")
}

fn main() {
    let cfg = ScenarioConfig::default();
    let polys = polygon_runs();
    let straight = transport_runs(PathKind::Straight, 1..=10);
    let rot = transport_runs(PathKind::StraightRot, 1..=5);

    let results: Vec<(&str, Outcome)> = vec![
        ("caging terminates with one tip pair", caging_terminates(&polys)),
        ("caging spacing", caging_spacing(&polys)),
        ("straight path delivery", straight_delivery(&straight)),
        ("rotations at waypoints 3 and 6", rotation_schedule(&rot)),
        ("push progress is monotone", push_monotonic(&straight, cfg.dt, cfg.pushing.d_tol)),
        ("disc resultant force", disc_force(100)),
        ("effective pusher classification", {
            let frames = frame_count(&straight);
            effective_classification(&straight, &cfg).map(|d| format!("{d} over {frames} frames"))
        }),
        ("stigmergy convergence", stigmergy_convergence(1000)),
        ("barrier never passes below quorum", barrier_safety(200)),
        ("object masses", masses()),
        ("caging time grows with scale", caging_scaling()),
        ("deterministic metrics", determinism()),
    ];

    let mut failed = 0;
    for (i, (name, r)) in results.iter().enumerate() {
        match r {
            Ok(d) => println!("{:2} {name}: PASS ({d})", i + 1),
            Err(d) => {
                failed += 1;
                println!("{:2} {name}: FAIL ({d})", i + 1);
            }
        }
    }
    println!("{} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

