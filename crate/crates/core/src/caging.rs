//! Per-robot caging behaviour: bidding, navigation to a caging target by
//! edge-following the growing cage, attachment with spacing correction, and
//! spawning of the next targets along a branch.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allocation::{
    assign_key, attach_key, attachment_record, best_bid, bid_prefix, compute_bid, place_bid, spawn_branch_targets,
    task_key, AttachmentRecord, Branch, CagingTask, TaskAnnouncement, PATH_KEY, SPACING_KEY, TERMINATED_KEY,
};
use crate::comms::{NeighborInfo, Replica, Tuple};
use crate::config::{CagingParams, OrbitLaw, Waypoint};
use crate::geometry::Vec2;
use crate::world::{sensor_angle, ProximityScan, RobotId, SENSOR_COUNT};

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum CagingError {
    #[error("no neighbour to follow")]
    NoNeighbor,
    #[error("lost contact with the object")]
    LostContact,
}

/// Tangential orbit around a neighbour at `x_n` plus a radial spring toward
/// range `i_d`. The tangential part turns clockwise around the neighbour.
pub fn edge_follow_command(x_n: Vec2, i_d: f64, law: OrbitLaw) -> Result<Vec2, CagingError> {
    let r = x_n.norm();
    if r < 1e-12 {
        return Err(CagingError::NoNeighbor);
    }
    let radial = match law {
        OrbitLaw::Raw => x_n * (r - i_d),
        OrbitLaw::Normalized => x_n * ((r - i_d) / r),
    };
    Ok(x_n.perp() + radial)
}

/// Edge-following with the orbit direction of `branch`: left turns
/// counter-clockwise around the neighbour, right clockwise.
pub fn branch_edge_follow(x_n: Vec2, i_d: f64, law: OrbitLaw, branch: Branch) -> Result<Vec2, CagingError> {
    let u = edge_follow_command(x_n, i_d, law)?;
    Ok(match branch {
        Branch::Left => u - x_n.perp() * 2.0,
        _ => u,
    })
}

/// Mean of the per-sensor vectors `reading · (cos φ, sin φ)`.
pub fn obstacle_vector(scan: &ProximityScan) -> Vec2 {
    let sum: Vec2 = (0..SENSOR_COUNT).map(|k| Vec2::from_angle(sensor_angle(k)) * scan.readings[k]).sum();
    sum / SENSOR_COUNT as f64
}

/// Tangential slide along the surface.
pub fn distance_correction_command(x_o: Vec2) -> Result<Vec2, CagingError> {
    if x_o.norm() < 1e-12 {
        return Err(CagingError::LostContact);
    }
    Ok(x_o.perp())
}

/// Centre-to-surface distance implied by the strongest object reading.
pub fn standoff_estimate(scan: &ProximityScan, robot_radius: f64, sensor_range: f64) -> Option<f64> {
    let m = scan.max_reading();
    (m > 0.0).then_some(robot_radius + (1.0 - m) * sensor_range)
}

/// What a robot senses and knows locally at one tick.
#[derive(Debug, Clone)]
pub struct RobotView<'a> {
    pub id: RobotId,
    pub tick: u64,
    /// Own position in the shared frame.
    pub position: Vec2,
    pub neighbors: &'a [NeighborInfo],
    /// Object-only proximity scan.
    pub object_scan: ProximityScan,
    /// Scan that also sees other robots.
    pub full_scan: ProximityScan,
    /// Current auction window length.
    pub auction_ticks: u64,
}

impl RobotView<'_> {
    pub fn neighbor(&self, id: RobotId) -> Option<&NeighborInfo> {
        self.neighbors.iter().find(|n| n.id == id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CagingSettings {
    pub params: CagingParams,
    pub robot_radius: f64,
    pub sensor_range: f64,
    pub comm_range: f64,
    /// Initial object centroid, known to every robot.
    pub object_centroid: Vec2,
    /// Plan the seed publishes for the transport stage.
    pub path: Vec<Waypoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CagingPhase {
    Idle,
    Approach,
    Orbit,
    Attached,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CagingEvent {
    Announced { task_id: u32, round: u32 },
    Bid { task_id: u32, round: u32 },
    Won { task_id: u32 },
    Lost { task_id: u32 },
    Attached { task_id: u32 },
    AuctionTimeout { task_id: u32 },
    SpacingInflated { i_d: f64 },
    Terminated { cage: Vec<RobotId> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CagingOutput {
    pub command: Vec2,
    pub events: Vec<CagingEvent>,
    /// Set once this robot learns that caging has finished.
    pub terminated: Option<Vec<RobotId>>,
}

#[derive(Debug, Clone, PartialEq)]
struct ChildTask {
    branch: Branch,
    depth: u32,
    announced: Option<TaskAnnouncement>,
    /// Spacing version seen at announcement; guards double inflation.
    spacing_version: u64,
    waiting_resettle: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CagingController {
    id: RobotId,
    phase: CagingPhase,
    task: Option<(CagingTask, u32)>,
    bidding: Option<(u32, u32)>,
    settled: u32,
    record: Option<AttachmentRecord>,
    children: Vec<ChildTask>,
    seed_deadline: Option<u64>,
}

fn default_spacing(replica: &Replica<Tuple>, params: &CagingParams) -> (f64, u64) {
    match replica.entry(SPACING_KEY) {
        Some(e) => match e.value {
            Tuple::Spacing(v) => (v, e.version),
            _ => (params.i_d, 0),
        },
        None => (params.i_d, 0),
    }
}

/// Attachment records known to `replica`, keyed by robot.
pub fn known_attachments(replica: &Replica<Tuple>) -> BTreeMap<RobotId, AttachmentRecord> {
    replica
        .scan_prefix("attach/")
        .filter_map(|e| match e.value {
            Tuple::Attach(r) => Some((r.robot_id, r)),
            _ => None,
        })
        .collect()
}

pub fn terminated_cage(replica: &Replica<Tuple>) -> Option<Vec<RobotId>> {
    match replica.get(TERMINATED_KEY) {
        Some(Tuple::Terminated(c)) => Some(c.clone()),
        _ => None,
    }
}

impl CagingController {
    pub fn new(id: RobotId) -> Self {
        Self {
            id,
            phase: CagingPhase::Idle,
            task: None,
            bidding: None,
            settled: 0,
            record: None,
            children: Vec::new(),
            seed_deadline: None,
        }
    }

    pub fn phase(&self) -> CagingPhase {
        self.phase
    }

    pub fn task(&self) -> Option<&CagingTask> {
        self.task.as_ref().map(|(t, _)| t)
    }

    pub fn record(&self) -> Option<&AttachmentRecord> {
        self.record.as_ref()
    }

    /// One control step.
    pub fn step(&mut self, view: &RobotView<'_>, replica: &mut Replica<Tuple>, s: &CagingSettings) -> CagingOutput {
        let mut out = CagingOutput { command: Vec2::ZERO, events: Vec::new(), terminated: None };
        if let Some(cage) = terminated_cage(replica) {
            out.terminated = Some(cage);
            return out;
        }
        let (i_d, _) = default_spacing(replica, &s.params);
        let attached = known_attachments(replica);
        out.command = match self.phase {
            CagingPhase::Idle => self.idle(view, replica, s, &attached, &mut out.events),
            CagingPhase::Approach | CagingPhase::Orbit => self.walk(view, replica, s, &attached, i_d, &mut out.events),
            CagingPhase::Attached => self.attached(view, replica, s, &attached, i_d, &mut out),
        };
        out
    }

    fn open_tasks(&mut self, view: &RobotView<'_>, replica: &Replica<Tuple>, centroid: Vec2) -> Vec<TaskAnnouncement> {
        let mut open: Vec<TaskAnnouncement> = replica
            .scan_prefix("task/")
            .filter_map(|e| match e.value {
                Tuple::Task(a) => Some(a),
                _ => None,
            })
            .filter(|a| replica.get(&attach_key(a.task.task_id)).is_none())
            .filter(|a| !matches!(replica.get(&assign_key(a.task.task_id)), Some(Tuple::Assign { round, .. }) if *round >= a.round))
            .collect();
        if replica.get(&attach_key(0)).is_none() && replica.get(&assign_key(0)).is_none() {
            let deadline = *self.seed_deadline.get_or_insert(view.tick + view.auction_ticks);
            // Every robot knows where the object starts; the seed auction is implicit.
            open.push(TaskAnnouncement { task: seed_task(centroid), round: 0, announced: 0, deadline });
        }
        open.sort_by_key(|a| (a.announced, a.task.task_id));
        open
    }

    fn idle(
        &mut self,
        view: &RobotView<'_>,
        replica: &mut Replica<Tuple>,
        s: &CagingSettings,
        attached: &BTreeMap<RobotId, AttachmentRecord>,
        events: &mut Vec<CagingEvent>,
    ) -> Vec2 {
        let open = self.open_tasks(view, replica, s.object_centroid);
        // Claim if a deadline passed while holding the best bid.
        if let Some((task_id, round)) = self.bidding {
            if let Some(a) = open.iter().find(|a| a.task.task_id == task_id && a.round == round) {
                if view.tick >= a.deadline {
                    self.bidding = None;
                    if best_bid(replica, task_id, round).is_some_and(|b| b.robot_id == self.id) {
                        replica.put(assign_key(task_id), Tuple::Assign { robot: self.id, round });
                        self.task = Some((a.task, round));
                        self.phase = CagingPhase::Approach;
                        events.push(CagingEvent::Won { task_id });
                        return Vec2::ZERO;
                    }
                }
            } else {
                self.bidding = None;
            }
        }
        // Bid on the oldest open task where this robot is not outbid.
        let mut chosen = None;
        for a in open.iter().filter(|a| view.tick < a.deadline) {
            let bid = compute_bid(view.position, &a.task, a.round, self.id);
            let outbid = best_bid(replica, a.task.task_id, a.round).is_some_and(|b| b.robot_id != self.id && b.beats(&bid));
            if !outbid {
                chosen = Some((a, bid));
                break;
            }
        }
        match chosen {
            Some((a, bid)) => {
                if place_bid(replica, bid) {
                    events.push(CagingEvent::Bid { task_id: a.task.task_id, round: a.round });
                }
                self.bidding = Some((a.task.task_id, a.round));
            }
            None => {
                // Keep the last bid alive for its deadline check.
                if let Some((t, r)) = self.bidding {
                    if !replica.scan_prefix(&bid_prefix(t, r)).any(|e| e.writer_id == self.id) {
                        self.bidding = None;
                    }
                }
            }
        }
        self.keep_clear(view, s) + self.stay_in_range(view, s, attached)
    }

    /// Keeps an idle robot within radio reach of the cage without crowding
    /// the lane walkers use around it.
    fn stay_in_range(&self, view: &RobotView<'_>, s: &CagingSettings, attached: &BTreeMap<RobotId, AttachmentRecord>) -> Vec2 {
        if attached.is_empty() {
            return Vec2::ZERO;
        }
        let gain = 0.5 * s.params.k_t;
        let near = 2.0 * s.params.i_d + 0.5;
        let far = (0.75 * s.comm_range).max(near + 0.2);
        let nearest = view
            .neighbors
            .iter()
            .filter(|n| attached.contains_key(&n.id))
            .min_by(|a, b| a.range.total_cmp(&b.range).then(a.id.cmp(&b.id)));
        match nearest {
            Some(n) if n.range < near => -n.vector().normalized().unwrap_or(Vec2::ZERO) * gain,
            Some(n) if n.range > far => n.vector().normalized().unwrap_or(Vec2::ZERO) * gain,
            Some(_) => Vec2::ZERO,
            None => (s.object_centroid - view.position).normalized().unwrap_or(Vec2::ZERO) * gain,
        }
    }

    /// Steps away from anything closer than 0.2 m.
    fn keep_clear(&self, view: &RobotView<'_>, s: &CagingSettings) -> Vec2 {
        if view.full_scan.max_reading() > 0.8 {
            -obstacle_vector(&view.full_scan) * s.params.k_t
        } else {
            Vec2::ZERO
        }
    }

    fn walk(
        &mut self,
        view: &RobotView<'_>,
        replica: &mut Replica<Tuple>,
        s: &CagingSettings,
        attached: &BTreeMap<RobotId, AttachmentRecord>,
        i_d: f64,
        events: &mut Vec<CagingEvent>,
    ) -> Vec2 {
        let Some((task, round)) = self.task else {
            self.phase = CagingPhase::Idle;
            return Vec2::ZERO;
        };
        let lost = match replica.get(&assign_key(task.task_id)) {
            Some(Tuple::Assign { robot, round: r }) => *robot != self.id && *r >= round,
            _ => false,
        } || matches!(replica.get(&attach_key(task.task_id)), Some(Tuple::Attach(r)) if r.robot_id != self.id);
        if lost {
            events.push(CagingEvent::Lost { task_id: task.task_id });
            self.task = None;
            self.phase = CagingPhase::Idle;
            return Vec2::ZERO;
        }
        let p = &s.params;
        let near_target = task.branch == Branch::Seed || view.position.distance(task.approx_target) <= i_d;
        if view.object_scan.max_reading() >= p.prox_threshold && near_target {
            self.phase = CagingPhase::Attached;
            self.settled = 0;
            return Vec2::ZERO;
        }
        let cage_neighbor = view
            .neighbors
            .iter()
            .filter(|n| attached.contains_key(&n.id))
            .min_by(|a, b| a.range.total_cmp(&b.range).then(a.id.cmp(&b.id)));
        match (task.branch, cage_neighbor) {
            (Branch::Left | Branch::Right, Some(n)) => {
                self.phase = CagingPhase::Orbit;
                let u = branch_edge_follow(n.vector(), i_d, p.orbit_law, task.branch).unwrap_or(Vec2::ZERO);
                // Keep off the object while passing along the cage.
                let standoff = self.surface_hold(view, s, p.d_s).unwrap_or(Vec2::ZERO);
                let push_off = if view.object_scan.max_reading() >= p.prox_threshold { standoff } else { Vec2::ZERO };
                u.normalized().unwrap_or(Vec2::ZERO) * p.k_t + push_off
            }
            _ => {
                self.phase = CagingPhase::Approach;
                let to = (task.approx_target - view.position).normalized().unwrap_or(Vec2::ZERO);
                (to - obstacle_vector(&view.full_scan) * p.avoidance_gain) * p.k_t
            }
        }
    }

    /// Radial command holding centre-to-surface distance at `d`.
    fn surface_hold(&self, view: &RobotView<'_>, s: &CagingSettings, d: f64) -> Option<Vec2> {
        let n = obstacle_vector(&view.object_scan).normalized()?;
        let est = standoff_estimate(&view.object_scan, s.robot_radius, s.sensor_range)?;
        let e = ((est - d) / s.params.d_tol).clamp(-1.0, 1.0);
        Some(n * (e * s.params.k_t))
    }

    fn parent_vector(&self, view: &RobotView<'_>, attached: &BTreeMap<RobotId, AttachmentRecord>) -> Option<Vec2> {
        let parent = self.task.as_ref()?.0.parent_robot?;
        view.neighbor(parent)
            .map(|n| n.vector())
            .or_else(|| attached.get(&parent).map(|r| r.attach_point - view.position))
    }

    fn attached(
        &mut self,
        view: &RobotView<'_>,
        replica: &mut Replica<Tuple>,
        s: &CagingSettings,
        attached: &BTreeMap<RobotId, AttachmentRecord>,
        i_d: f64,
        out: &mut CagingOutput,
    ) -> Vec2 {
        let p = &s.params;
        let Some((task, _)) = self.task else {
            self.phase = CagingPhase::Idle;
            return Vec2::ZERO;
        };
        let x_o = obstacle_vector(&view.object_scan);
        if distance_correction_command(x_o).is_err() {
            // Lost the object: head back to it.
            self.settled = 0;
            return (s.object_centroid - view.position).normalized().unwrap_or(Vec2::ZERO) * p.k_t;
        }
        let hold = self.surface_hold(view, s, p.d_s).unwrap_or(Vec2::ZERO);
        let est = standoff_estimate(&view.object_scan, s.robot_radius, s.sensor_range).unwrap_or(f64::INFINITY);
        let mut u = hold;
        let mut spacing_ok = true;
        let inward = hold.dot(x_o) > 0.0;
        if let Some(v) = self.parent_vector(view, attached) {
            let err = v.norm() - i_d;
            spacing_ok = err.abs() <= 2.0 * p.d_tol;
            if err.abs() > p.d_tol {
                if inward && err > 0.0 {
                    u = Vec2::ZERO;
                }
                let toward = v.normalized().unwrap_or(Vec2::ZERO);
                let dir = if err > 0.0 { toward } else { -toward };
                u += dir * (p.k_t * (err.abs() / 0.1).min(1.0));
            }
        }
        // Settling accepts a wider band than the control deadband; sparse rays
        // overestimate clearance near corners, so allow more slack outward.
        let standoff_ok = est >= p.d_s - 2.0 * p.d_tol && est <= p.d_s + 3.0 * p.d_tol;
        self.settled = if spacing_ok && standoff_ok { self.settled + 1 } else { 0 };

        if self.settled >= p.settle_ticks {
            let parent = task.parent_robot.and_then(|id| attached.get(&id));
            let moved = self.record.is_none_or(|r| r.attach_point.distance(view.position) > p.d_tol / 2.0);
            if moved {
                let rec = attachment_record(self.id, &task, view.position, parent, s.object_centroid, i_d);
                let first = self.record.is_none();
                self.record = Some(rec);
                replica.put(attach_key(task.task_id), Tuple::Attach(rec));
                if first {
                    out.events.push(CagingEvent::Attached { task_id: task.task_id });
                    if task.branch == Branch::Seed {
                        replica.put(PATH_KEY, Tuple::Path(s.path.clone()));
                        self.children = vec![child(Branch::Left, 0), child(Branch::Right, 0)];
                    } else {
                        self.children = vec![child(task.branch, task.depth + 1)];
                    }
                }
            }
        }
        if self.record.is_some() {
            self.spawner(view, replica, s, attached, i_d, out);
        }
        u
    }

    fn spawner(
        &mut self,
        view: &RobotView<'_>,
        replica: &mut Replica<Tuple>,
        s: &CagingSettings,
        attached: &BTreeMap<RobotId, AttachmentRecord>,
        i_d: f64,
        out: &mut CagingOutput,
    ) {
        let p = &s.params;
        let Some(me) = self.record else { return };
        let d_t = p.d_t_factor * i_d;
        for c in &self.children {
            if c.announced.is_some_and(|a| attached.values().any(|r| r.task_id == a.task.task_id)) {
                continue;
            }
            // Tip check: a visible attached robot of the other branch within d_T.
            if me.branch != Branch::Seed {
                let other = me.branch.opposite();
                let meets = view.neighbors.iter().any(|n| {
                    n.range <= d_t
                        && attached
                            .get(&n.id)
                            .is_some_and(|r| r.branch == other && (me.sweep - r.sweep).abs() >= std::f64::consts::PI)
                });
                if meets {
                    let mut cage: Vec<RobotId> = attached.keys().copied().collect();
                    if !cage.contains(&self.id) {
                        cage.push(self.id);
                        cage.sort_unstable();
                    }
                    replica.put(TERMINATED_KEY, Tuple::Terminated(cage.clone()));
                    out.events.push(CagingEvent::Terminated { cage: cage.clone() });
                    out.terminated = Some(cage);
                    return;
                }
            }
        }
        let (_, spacing_version) = default_spacing(replica, p);
        let settled = self.settled >= p.settle_ticks;
        let children = std::mem::take(&mut self.children);
        let mut kept = Vec::with_capacity(children.len());
        for mut c in children {
            let task_id = crate::allocation::task_id_for(c.branch, c.depth);
            if attached.values().any(|r| r.task_id == task_id) {
                kept.push(c);
                continue;
            }
            let yield_right = c.branch == Branch::Right
                && view.neighbors.iter().any(|n| {
                    n.range <= d_t + 2.0 * i_d
                        && attached
                            .get(&n.id)
                            .is_some_and(|r| r.branch == Branch::Left && (me.sweep - r.sweep).abs() >= std::f64::consts::PI)
                });
            match c.announced {
                None => {
                    if !yield_right && settled {
                        if let Some(a) = self.announce(view, replica, &me, &c, 0, i_d) {
                            c.announced = Some(a);
                            c.spacing_version = spacing_version;
                            out.events.push(CagingEvent::Announced { task_id, round: 0 });
                        }
                    }
                }
                Some(a) => {
                    let claimed = matches!(replica.get(&assign_key(task_id)), Some(Tuple::Assign { round, .. }) if *round >= a.round);
                    let grace = a.deadline + view.auction_ticks;
                    if c.waiting_resettle {
                        if settled && !yield_right {
                            if let Some(na) = self.announce(view, replica, &me, &c, a.round + 1, i_d) {
                                c.announced = Some(na);
                                c.waiting_resettle = false;
                                c.spacing_version = spacing_version;
                                out.events.push(CagingEvent::Announced { task_id, round: na.round });
                            }
                        }
                    } else if !claimed && view.tick >= grace {
                        if best_bid(replica, task_id, a.round).is_none() {
                            out.events.push(CagingEvent::AuctionTimeout { task_id });
                            if spacing_version == c.spacing_version {
                                let next = i_d * p.spacing_inflation;
                                replica.put(SPACING_KEY, Tuple::Spacing(next));
                                out.events.push(CagingEvent::SpacingInflated { i_d: next });
                            }
                        }
                        c.waiting_resettle = true;
                        self.settled = 0;
                    }
                }
            }
            kept.push(c);
        }
        self.children = kept;
    }

    #[allow(clippy::too_many_arguments)]
    fn announce(
        &self,
        view: &RobotView<'_>,
        replica: &mut Replica<Tuple>,
        me: &AttachmentRecord,
        c: &ChildTask,
        round: u32,
        i_d: f64,
    ) -> Option<TaskAnnouncement> {
        let mut rec = *me;
        rec.attach_point = view.position;
        let tasks = spawn_branch_targets(self.id, &rec, &view.object_scan, 0.0, i_d).ok()?;
        let mut task = tasks.into_iter().find(|t| t.branch == c.branch)?;
        task.depth = c.depth;
        task.task_id = crate::allocation::task_id_for(c.branch, c.depth);
        let a = TaskAnnouncement { task, round, announced: view.tick, deadline: view.tick + view.auction_ticks };
        replica.put(task_key(task.task_id), Tuple::Task(a));
        Some(a)
    }
}

fn child(branch: Branch, depth: u32) -> ChildTask {
    ChildTask { branch, depth, announced: None, spacing_version: 0, waiting_resettle: false }
}

fn seed_task(target: Vec2) -> CagingTask {
    CagingTask { task_id: 0, branch: Branch::Seed, approx_target: target, parent_robot: None, depth: 0 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: Vec2, b: Vec2) -> bool {
        a.distance(b) < 1e-9
    }

    #[test]
    fn edge_follow_examples() {
        let u = edge_follow_command(Vec2::new(0.45, 0.0), 0.45, OrbitLaw::Raw).unwrap();
        assert!(close(u, Vec2::new(0.0, 0.45)));
        let u = edge_follow_command(Vec2::new(0.9, 0.0), 0.45, OrbitLaw::Raw).unwrap();
        assert!(close(u, Vec2::new(0.405, 0.9)));
        let u = edge_follow_command(Vec2::new(0.2, 0.0), 0.45, OrbitLaw::Raw).unwrap();
        assert!(u.x < 0.0);
        assert_eq!(edge_follow_command(Vec2::ZERO, 0.45, OrbitLaw::Raw), Err(CagingError::NoNeighbor));
    }

    #[test]
    fn left_orbit_is_counter_clockwise() {
        // Walker below its neighbour: counter-clockwise around it means +x.
        let x_n = Vec2::new(0.0, 0.45);
        assert!(branch_edge_follow(x_n, 0.45, OrbitLaw::Raw, Branch::Left).unwrap().x > 0.0);
        assert!(branch_edge_follow(x_n, 0.45, OrbitLaw::Raw, Branch::Right).unwrap().x < 0.0);
    }

    #[test]
    fn obstacle_vector_examples() {
        assert_eq!(obstacle_vector(&ProximityScan::default()), Vec2::ZERO);
        let mut s = ProximityScan::default();
        s.readings[0] = 0.8;
        assert!(close(obstacle_vector(&s), Vec2::new(0.1, 0.0)));
        let mut s = ProximityScan::default();
        s.readings[1] = 0.5;
        s.readings[7] = 0.5;
        assert!(obstacle_vector(&s).y.abs() < 1e-12);
    }

    #[test]
    fn distance_correction_is_perp() {
        assert!(close(distance_correction_command(Vec2::new(0.5, 0.0)).unwrap(), Vec2::new(0.0, 0.5)));
        assert_eq!(distance_correction_command(Vec2::ZERO), Err(CagingError::LostContact));
    }

    fn arb_vec() -> impl Strategy<Value = Vec2> {
        (0.05..3.0f64, -3.2..3.2f64).prop_map(|(r, t)| Vec2::from_polar(r, t))
    }

    proptest! {
        #[test]
        fn edge_follow_rotation_equivariant(x in arb_vec(), rot in -3.2..3.2f64, raw in any::<bool>()) {
            let law = if raw { OrbitLaw::Raw } else { OrbitLaw::Normalized };
            let a = edge_follow_command(x.rotate(rot), 0.45, law).unwrap();
            let b = edge_follow_command(x, 0.45, law).unwrap().rotate(rot);
            prop_assert!(a.distance(b) < 1e-9);
        }

        #[test]
        fn edge_follow_radial_equilibrium(t in -3.2..3.2f64, raw in any::<bool>()) {
            let law = if raw { OrbitLaw::Raw } else { OrbitLaw::Normalized };
            let x = Vec2::from_polar(0.45, t);
            prop_assert!(edge_follow_command(x, 0.45, law).unwrap().dot(x).abs() < 1e-12);
        }

        #[test]
        fn orbit_keeps_ring(start in 0.3..0.7f64, raw in any::<bool>()) {
            // Neighbour fixed at the origin; walker integrates the clamped command.
            let law = if raw { OrbitLaw::Raw } else { OrbitLaw::Normalized };
            let i_d = 0.45;
            let mut p = Vec2::new(-start, 0.0);
            for k in 0..2000 {
                let u = edge_follow_command(-p, i_d, law).unwrap() * 30.0;
                p += u.clamp_norm(0.1) * 0.1;
                if k > 600 {
                    let r = p.norm();
                    prop_assert!(r >= 0.9 * i_d && r <= 1.1 * i_d, "r {}", r);
                }
            }
        }

        #[test]
        fn obstacle_vector_index_rotation(readings in prop::array::uniform8(0.0..1.0f64)) {
            let a = ProximityScan { readings };
            let mut shifted = [0.0; 8];
            for k in 0..8 {
                shifted[(k + 1) % 8] = readings[k];
            }
            let b = ProximityScan { readings: shifted };
            let rot = obstacle_vector(&a).rotate(std::f64::consts::FRAC_PI_4);
            prop_assert!(rot.distance(obstacle_vector(&b)) < 1e-12);
        }
    }
}
