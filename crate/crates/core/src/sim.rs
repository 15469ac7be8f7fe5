//! Tick loop tying the world, the tuple space and the robot controllers
//! together, plus per-run metrics and optional traces.

use std::collections::BTreeMap;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allocation::{Branch, PATH_KEY, SPACING_KEY};
use crate::caging::{known_attachments, obstacle_vector, CagingController, CagingEvent, CagingSettings, RobotView};
use crate::comms::{exchange, graph_diameter, neighbor_graph, neighbor_snapshot, Loss, NoiseModel, Replica, Tuple};
use crate::config::{generate_path_heading, BarrierPopulation, ConfigError, ScenarioConfig, Waypoint};
use crate::geometry::{closest_boundary_point, wrap_angle, Vec2};
use crate::transport::{is_effective_pusher, TransportController, TransportEvent, TransportPhase, TransportSettings};
use crate::world::{spawn_scenario, RobotId, WorldError, WorldState};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error("state dump: {0}")]
    Dump(#[from] std::io::Error),
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Keep a per-tick trace of transport state in the result.
    pub trace: bool,
    /// Stream a JSON line per tick to this writer's file.
    pub dump: Option<std::path::PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub tick: u64,
    pub robot: RobotId,
    pub event: String,
    pub task_id: Option<u32>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaypointRecord {
    pub index: usize,
    pub tick: u64,
    pub centroid_estimate_error: f64,
    pub position_error: f64,
    pub yaw_error: f64,
    pub effective_pushers: f64,
    pub effective_rotators: f64,
    pub rotated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpacingSample {
    pub tick: u64,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub seed: u64,
    pub config_hash: String,
    pub robot_count: usize,
    pub success: bool,
    pub failure: Option<String>,
    pub caging_tick: Option<u64>,
    pub caging_time: Option<f64>,
    pub transport_time: Option<f64>,
    pub total_ticks: u64,
    pub cage_size: usize,
    pub final_spacing: f64,
    pub final_position_error: Option<f64>,
    pub final_yaw_error: Option<f64>,
    pub termination_flags: usize,
    pub waypoints: Vec<WaypointRecord>,
    pub spacing_series: Vec<SpacingSample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CageMember {
    pub robot: RobotId,
    pub branch: Branch,
    pub depth: u32,
    /// Ground-truth position at termination.
    pub position: Vec2,
}

/// Cage as known to the robot that declared termination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CageSnapshot {
    pub tick: u64,
    pub i_d: f64,
    pub d_t: f64,
    pub members: Vec<CageMember>,
    pub object_position: Vec2,
    pub object_yaw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRobot {
    pub id: RobotId,
    pub position: Vec2,
    /// Sensed object direction driving the controller.
    pub x_o: Vec2,
    /// Ground-truth vector to the nearest object boundary point.
    pub object_direction: Vec2,
    pub phase: TransportPhase,
    pub tau_local: Option<Vec2>,
    /// Effective pusher by the ground-truth geometry; feeds the metrics.
    pub effective: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceFrame {
    pub tick: u64,
    pub object_position: Vec2,
    pub object_yaw: f64,
    pub majority: Option<TransportPhase>,
    pub robots: Vec<TraceRobot>,
}

/// One line of the state dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateFrame {
    pub tick: u64,
    pub object_position: Vec2,
    pub object_yaw: f64,
    pub polygon: Vec<Vec2>,
    pub robots: Vec<(RobotId, Vec2, String)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub metrics: RunMetrics,
    pub events: Vec<EventRecord>,
    pub cage: Option<CageSnapshot>,
    /// Object centroid and yaw every 10 ticks, plus the final tick.
    pub trajectory: Vec<(u64, Vec2, f64)>,
    pub path: Vec<Waypoint>,
    pub trace: Option<Vec<TraceFrame>>,
}

#[derive(Debug, Clone)]
enum Agent {
    Caging(Box<CagingController>),
    /// Caged, waiting for the path to arrive.
    Pending(Vec<RobotId>),
    Transport(Box<TransportController>),
    Retreat,
}

impl Agent {
    fn label(&self) -> String {
        match self {
            Agent::Caging(c) => match c.task() {
                Some(t) => format!("{:?}:{}", c.phase(), t.task_id).to_lowercase(),
                None => format!("{:?}", c.phase()).to_lowercase(),
            },
            Agent::Pending(_) => "pending".into(),
            Agent::Transport(t) => match t.phase() {
                TransportPhase::Push(w) => format!("push{w}"),
                TransportPhase::Rotate(w) => format!("rotate{w}"),
                TransportPhase::BarrierWait(w) => format!("wait{w}"),
                TransportPhase::Done => "done".into(),
            },
            Agent::Retreat => "retreat".into(),
        }
    }
}

#[derive(Debug, Default, Clone)]
struct WaypointAcc {
    estimate_errors: Vec<f64>,
    push_ticks: u64,
    push_effective: u64,
    rot_ticks: u64,
    rot_effective: u64,
    rotated: bool,
    closed: Option<WaypointRecord>,
}

/// A single seeded run.
pub struct Simulation {
    cfg: ScenarioConfig,
    seed: u64,
    world: WorldState,
    replicas: Vec<Replica<Tuple>>,
    agents: Vec<Agent>,
    rng: ChaCha8Rng,
    caging: CagingSettings,
    path: Vec<Waypoint>,
    events: Vec<EventRecord>,
    cage: Option<CageSnapshot>,
    cage_ids: Vec<RobotId>,
    caging_tick: Option<u64>,
    termination_flags: usize,
    waypoint_acc: Vec<WaypointAcc>,
    spacing_series: Vec<SpacingSample>,
    trajectory: Vec<(u64, Vec2, f64)>,
    trace: Option<Vec<TraceFrame>>,
    dump: Option<std::io::BufWriter<std::fs::File>>,
    failure: Option<String>,
    finished: bool,
    last_commands: BTreeMap<RobotId, Vec2>,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64;
    (m, var.sqrt())
}

/// Distances between angularly consecutive points around `center`,
/// including the closing pair.
pub fn ring_spacings(points: &[Vec2], center: Vec2) -> Vec<f64> {
    let mut sorted: Vec<Vec2> = points.to_vec();
    sorted.sort_by(|a, b| (*a - center).angle().total_cmp(&(*b - center).angle()));
    let n = sorted.len();
    if n < 2 {
        return Vec::new();
    }
    (0..n).map(|i| sorted[i].distance(sorted[(i + 1) % n])).collect()
}

impl Simulation {
    pub fn new(cfg: &ScenarioConfig, seed: u64, opts: &RunOptions) -> Result<Self, SimError> {
        cfg.validate()?;
        let world = spawn_scenario(cfg, seed)?;
        let start = world.object.position;
        let path = generate_path_heading(
            cfg.path.kind,
            cfg.path.waypoints,
            cfg.path.spacing,
            start,
            cfg.path.heading_deg.to_radians(),
        )
        .waypoints;
        let n = cfg.robot_count;
        let caging = CagingSettings {
            params: cfg.caging.clone(),
            robot_radius: cfg.robot.radius,
            sensor_range: cfg.robot.sensor_range,
            comm_range: cfg.robot.comm_range,
            object_centroid: start,
            path: path.clone(),
        };
        let dump = match &opts.dump {
            Some(p) => Some(std::io::BufWriter::new(std::fs::File::create(p)?)),
            None => None,
        };
        Ok(Self {
            cfg: cfg.clone(),
            seed,
            replicas: (0..n as RobotId).map(Replica::new).collect(),
            agents: (0..n as RobotId).map(|i| Agent::Caging(Box::new(CagingController::new(i)))).collect(),
            rng: ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_c0de),
            caging,
            waypoint_acc: vec![WaypointAcc::default(); path.len()],
            path,
            world,
            events: Vec::new(),
            cage: None,
            cage_ids: Vec::new(),
            caging_tick: None,
            termination_flags: 0,
            spacing_series: Vec::new(),
            trajectory: Vec::new(),
            trace: opts.trace.then(Vec::new),
            dump,
            failure: None,
            finished: false,
            last_commands: BTreeMap::new(),
        })
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    /// Short controller state per robot, indexed by id.
    pub fn agent_labels(&self) -> Vec<String> {
        self.agents.iter().map(Agent::label).collect()
    }

    /// Velocity commands issued on the previous tick.
    pub fn last_commands(&self) -> &BTreeMap<RobotId, Vec2> {
        &self.last_commands
    }

    pub fn replica(&self, id: RobotId) -> &Replica<Tuple> {
        &self.replicas[id as usize]
    }

    pub fn events(&self) -> &[EventRecord] {
        &self.events
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    fn log(&mut self, robot: RobotId, event: &str, task_id: Option<u32>, detail: String) {
        self.events.push(EventRecord { tick: self.world.tick, robot, event: event.into(), task_id, detail });
    }

    fn log_caging(&mut self, robot: RobotId, e: &CagingEvent) {
        match e {
            CagingEvent::Announced { task_id, round } => self.log(robot, "announced", Some(*task_id), format!("round={round}")),
            CagingEvent::Bid { task_id, round } => self.log(robot, "bid", Some(*task_id), format!("round={round}")),
            CagingEvent::Won { task_id } => self.log(robot, "won", Some(*task_id), String::new()),
            CagingEvent::Lost { task_id } => self.log(robot, "lost", Some(*task_id), String::new()),
            CagingEvent::Attached { task_id } => self.log(robot, "attached", Some(*task_id), String::new()),
            CagingEvent::AuctionTimeout { task_id } => self.log(robot, "auction_timeout", Some(*task_id), String::new()),
            CagingEvent::SpacingInflated { i_d } => self.log(robot, "spacing_inflated", None, format!("i_d={i_d:.4}")),
            CagingEvent::Terminated { cage } => self.log(robot, "terminated", None, format!("cage={}", cage.len())),
        }
    }

    fn auction_ticks(&self, graph: &[Vec<usize>]) -> u64 {
        self.cfg.caging.auction_ticks.unwrap_or_else(|| (3 * graph_diameter(graph) as u64).max(10))
    }

    fn current_spacing(&self, robot: usize) -> f64 {
        match self.replicas[robot].get(SPACING_KEY) {
            Some(Tuple::Spacing(v)) => *v,
            _ => self.cfg.caging.i_d,
        }
    }

    fn transport_settings(&self, i_d: f64) -> TransportSettings {
        TransportSettings {
            pushing: self.cfg.pushing.clone(),
            rotating: self.cfg.rotating.clone(),
            robot_radius: self.cfg.robot.radius,
            sensor_range: self.cfg.robot.sensor_range,
            max_speed: self.cfg.robot.max_speed,
            barrier_timeout: self.cfg.barrier_timeout_ticks,
            population: match self.cfg.comms.barrier_population {
                BarrierPopulation::Cage => self.cage_ids.len().max(1),
                BarrierPopulation::Swarm => self.cfg.robot_count,
            },
            initial_yaw: self.cfg.object.yaw,
            i_d,
        }
    }

    fn snapshot_cage(&mut self, robot: usize, cage: &[RobotId]) {
        let records = known_attachments(&self.replicas[robot]);
        let i_d = self.current_spacing(robot);
        let members = cage
            .iter()
            .filter_map(|id| records.get(id))
            .map(|r| CageMember {
                robot: r.robot_id,
                branch: r.branch,
                depth: r.depth,
                position: self.world.robots[r.robot_id as usize].position,
            })
            .collect();
        self.cage = Some(CageSnapshot {
            tick: self.world.tick,
            i_d,
            d_t: self.cfg.caging.d_t_factor * i_d,
            members,
            object_position: self.world.object.position,
            object_yaw: self.world.object.yaw,
        });
    }

    fn record_spacing(&mut self) {
        if self.cage_ids.is_empty() {
            return;
        }
        let pts: Vec<Vec2> = self.cage_ids.iter().map(|&i| self.world.robots[i as usize].position).collect();
        let (mean, std) = mean_std(&ring_spacings(&pts, self.world.object.position));
        self.spacing_series.push(SpacingSample { tick: self.world.tick, mean, std });
    }

    /// Advances one tick; returns false once the run has ended.
    pub fn step(&mut self) -> Result<bool, SimError> {
        if self.finished {
            return Ok(false);
        }
        let comm = self.cfg.robot.comm_range;
        let graph = neighbor_graph(&self.world, comm);
        let full = self.cfg.comms.anti_entropy_period > 0 && self.world.tick.is_multiple_of(self.cfg.comms.anti_entropy_period);
        let drop = self.cfg.comms.drop_probability;
        let loss = (drop > 0.0).then_some(Loss { drop_probability: drop, rng: &mut self.rng });
        exchange(&mut self.replicas, &graph, full, loss);

        let caging_active = self.agents.iter().any(|a| matches!(a, Agent::Caging(_)));
        let t_a = if caging_active { self.auction_ticks(&graph) } else { 10 };
        let noise = NoiseModel { range_sigma: self.cfg.comms.range_noise, bearing_sigma: self.cfg.comms.bearing_noise };
        let n = self.world.robots.len();
        let tick = self.world.tick;
        let mut commands: BTreeMap<RobotId, Vec2> = BTreeMap::new();
        let mut frame_robots = Vec::new();
        let mut rotating_wp: Option<usize> = None;
        let object_poly = self.world.object.world_polygon();
        let theta_p = self.cfg.theta_p();

        for i in 0..n {
            let id = i as RobotId;
            let neighbors = neighbor_snapshot(&self.world, id, comm, noise, &mut self.rng);
            let view = RobotView {
                id,
                tick,
                position: self.world.robots[i].position,
                neighbors: &neighbors,
                object_scan: self.world.object_scan(id)?,
                full_scan: self.world.proximity_scan(id)?,
                auction_ticks: t_a,
            };
            let mut agent = std::mem::replace(&mut self.agents[i], Agent::Retreat);
            let mut cmd = Vec2::ZERO;
            if let Agent::Caging(c) = &mut agent {
                let out = c.step(&view, &mut self.replicas[i], &self.caging);
                for e in &out.events {
                    if matches!(e, CagingEvent::Terminated { .. }) {
                        self.termination_flags += 1;
                    }
                    self.log_caging(id, e);
                }
                cmd = out.command;
                if let Some(cage) = out.terminated {
                    if self.cage.is_none() {
                        self.caging_tick = Some(tick);
                        self.cage_ids = cage.clone();
                        self.snapshot_cage(i, &cage);
                    }
                    agent = if cage.contains(&id) { Agent::Pending(cage) } else { Agent::Retreat };
                }
            }
            if let Agent::Pending(cage) = &agent {
                if matches!(self.replicas[i].get(PATH_KEY), Some(Tuple::Path(_))) {
                    agent = Agent::Transport(Box::new(TransportController::new(
                        id,
                        cage.clone(),
                        self.path.clone(),
                        self.cfg.object.yaw,
                        tick,
                    )));
                }
            }
            match &mut agent {
                Agent::Transport(t) => {
                    let s = self.transport_settings(self.current_spacing(i));
                    let out = t.step(&view, &mut self.replicas[i], &s);
                    cmd = out.command;
                    for e in &out.events {
                        match e {
                            TransportEvent::CentroidEstimated { round, waypoint, estimate, contributors } => {
                                let err = estimate.distance(self.world.object.position);
                                let wp = *waypoint;
                                if let Some(acc) = self.waypoint_acc.get_mut(wp) {
                                    acc.estimate_errors.push(err);
                                }
                                self.log(id, "centroid", None, format!("round={round} n={contributors} err={err:.4}"));
                            }
                            TransportEvent::BarrierPassed { barrier } => {
                                if !self.events.iter().any(|r| r.event == "barrier" && r.detail == *barrier) {
                                    self.log(id, "barrier", None, barrier.clone());
                                }
                            }
                            TransportEvent::RotationStarted { waypoint } => {
                                self.waypoint_acc[*waypoint].rotated = true;
                                self.log(id, "rotation_started", None, format!("wp={waypoint}"));
                            }
                            TransportEvent::Done => self.log(id, "done", None, String::new()),
                        }
                    }
                    if out.stalled && self.failure.is_none() {
                        self.failure = Some(format!("barrier timeout at robot {id}"));
                    }
                    if let TransportPhase::Rotate(w) = out.phase {
                        rotating_wp = Some(w);
                    }
                    let object_direction = closest_boundary_point(&object_poly, view.position)
                        .map_or(Vec2::ZERO, |a| a.position - view.position);
                    frame_robots.push(TraceRobot {
                        id,
                        position: view.position,
                        x_o: out.x_o,
                        object_direction,
                        phase: out.phase,
                        tau_local: out.tau_local,
                        effective: out.tau_local.is_some_and(|t| is_effective_pusher(object_direction, t - view.position, theta_p)),
                    });
                }
                Agent::Retreat
                    // Clear away from the object so transport is unobstructed.
                    if view.object_scan.max_reading() > 0.0 => {
                        cmd = -obstacle_vector(&view.object_scan) * 100.0;
                    }
                _ => {}
            }
            self.agents[i] = agent;
            if cmd != Vec2::ZERO {
                commands.insert(id, cmd);
            }
        }

        let majority = majority_phase(&frame_robots);
        if let Some(TransportPhase::Push(w)) = majority {
            if let Some(acc) = self.waypoint_acc.get_mut(w) {
                acc.push_ticks += 1;
                acc.push_effective += frame_robots.iter().filter(|r| r.effective && r.phase == TransportPhase::Push(w)).count() as u64;
            }
        }
        if let Some(tr) = self.trace.as_mut() {
            if !frame_robots.is_empty() {
                tr.push(TraceFrame {
                    tick,
                    object_position: self.world.object.position,
                    object_yaw: self.world.object.yaw,
                    majority,
                    robots: frame_robots.clone(),
                });
            }
        }
        if let Some(d) = self.dump.as_mut() {
            let frame = StateFrame {
                tick,
                object_position: self.world.object.position,
                object_yaw: self.world.object.yaw,
                polygon: self.world.object.world_polygon().vertices().to_vec(),
                robots: self.world.robots.iter().zip(&self.agents).map(|(r, a)| (r.id, r.position, a.label())).collect(),
            };
            serde_json::to_writer(&mut *d, &frame).map_err(std::io::Error::other)?;
            d.write_all(b"\n")?;
        }

        let report = self.world.step(&commands)?;
        self.last_commands = commands;

        if let Some(w) = rotating_wp {
            let err = wrap_angle(self.path[w].yaw - self.world.object.yaw);
            let acc = &mut self.waypoint_acc[w];
            acc.rot_ticks += 1;
            acc.rot_effective += report.forces.iter().filter(|f| {
                let torque = (f.point - self.world.object.position).cross(f.force);
                torque * err > 0.0
            }).count() as u64;
        }
        if self.world.tick.is_multiple_of(10) {
            self.trajectory.push((self.world.tick, self.world.object.position, self.world.object.yaw));
            if self.caging_tick.is_some() {
                self.record_spacing();
            }
        }
        self.close_waypoints();
        self.check_end();
        Ok(!self.finished)
    }

    /// Closes the record of every waypoint all cage robots have left.
    fn close_waypoints(&mut self) {
        let progress: Vec<Option<usize>> = self
            .agents
            .iter()
            .filter_map(|a| match a {
                Agent::Transport(t) => Some(match t.phase() {
                    TransportPhase::Push(w) => Some(w),
                    TransportPhase::Done => Some(self.path.len()),
                    _ => None,
                }),
                _ => None,
            })
            .collect();
        let Some(first) = progress.iter().flatten().min().copied() else { return };
        if progress.iter().any(|p| p.is_none()) && progress.iter().flatten().count() < progress.len() / 2 + 1 {
            return;
        }
        for w in 0..first.min(self.path.len()) {
            if self.waypoint_acc[w].closed.is_some() {
                continue;
            }
            let wp = self.path[w];
            let acc = &self.waypoint_acc[w];
            let (est, _) = mean_std(&acc.estimate_errors);
            let rec = WaypointRecord {
                index: w,
                tick: self.world.tick,
                centroid_estimate_error: est,
                position_error: self.world.object.position.distance(wp.position),
                yaw_error: wrap_angle(wp.yaw - self.world.object.yaw),
                effective_pushers: if acc.push_ticks > 0 { acc.push_effective as f64 / acc.push_ticks as f64 } else { 0.0 },
                effective_rotators: if acc.rot_ticks > 0 { acc.rot_effective as f64 / acc.rot_ticks as f64 } else { 0.0 },
                rotated: acc.rotated,
            };
            self.waypoint_acc[w].closed = Some(rec);
        }
    }

    fn check_end(&mut self) {
        if self.failure.is_some() {
            self.finished = true;
            return;
        }
        if self.cfg.caging_only && self.caging_tick.is_some() {
            self.finished = true;
            return;
        }
        let transports: Vec<&TransportController> = self
            .agents
            .iter()
            .filter_map(|a| match a {
                Agent::Transport(t) => Some(t.as_ref()),
                _ => None,
            })
            .collect();
        let pending = self.agents.iter().any(|a| matches!(a, Agent::Pending(_)));
        if !transports.is_empty() && !pending && transports.iter().all(|t| t.is_done()) {
            self.finished = true;
            return;
        }
        if self.world.tick >= self.cfg.max_ticks {
            self.failure = Some(format!("max ticks {} reached", self.cfg.max_ticks));
            self.finished = true;
        }
    }

    pub fn run(mut self) -> Result<RunResult, SimError> {
        while self.step()? {}
        Ok(self.finish())
    }

    fn finish(mut self) -> RunResult {
        if let Some(d) = self.dump.as_mut() {
            let _ = d.flush();
        }
        let dt = self.cfg.dt;
        let success = self.failure.is_none() && self.finished;
        let end = self.world.tick;
        let last = self.path.last().copied();
        let transport_done = success && !self.cfg.caging_only;
        if self.trajectory.last().is_none_or(|t| t.0 != end) {
            self.trajectory.push((end, self.world.object.position, self.world.object.yaw));
        }
        let final_spacing = self.cage.as_ref().map_or(self.cfg.caging.i_d, |c| c.i_d);
        let metrics = RunMetrics {
            seed: self.seed,
            config_hash: self.cfg.fingerprint(),
            robot_count: self.cfg.robot_count,
            success,
            failure: self.failure.clone(),
            caging_tick: self.caging_tick,
            caging_time: self.caging_tick.map(|t| t as f64 * dt),
            transport_time: self.caging_tick.filter(|_| transport_done).map(|t| (end - t) as f64 * dt),
            total_ticks: end,
            cage_size: self.cage_ids.len(),
            final_spacing,
            final_position_error: last.filter(|_| transport_done).map(|w| self.world.object.position.distance(w.position)),
            final_yaw_error: last.filter(|_| transport_done).map(|w| wrap_angle(w.yaw - self.world.object.yaw)),
            termination_flags: self.termination_flags,
            waypoints: self.waypoint_acc.iter().filter_map(|a| a.closed.clone()).collect(),
            spacing_series: self.spacing_series,
        };
        RunResult {
            metrics,
            events: self.events,
            cage: self.cage,
            trajectory: self.trajectory,
            path: self.path,
            trace: self.trace,
        }
    }
}

/// Most common phase among the traced robots, ties to the earliest.
pub fn majority_phase(robots: &[TraceRobot]) -> Option<TransportPhase> {
    let mut counts: Vec<(TransportPhase, usize)> = Vec::new();
    for r in robots {
        match counts.iter_mut().find(|(p, _)| *p == r.phase) {
            Some((_, c)) => *c += 1,
            None => counts.push((r.phase, 1)),
        }
    }
    counts.into_iter().fold(None, |best: Option<(TransportPhase, usize)>, (p, c)| match best {
        Some((_, bc)) if bc >= c => best,
        _ => Some((p, c)),
    }).map(|(p, _)| p)
}

/// Runs one seed to completion.
pub fn run_single(cfg: &ScenarioConfig, seed: u64, opts: &RunOptions) -> Result<RunResult, SimError> {
    Simulation::new(cfg, seed, opts)?.run()
}
