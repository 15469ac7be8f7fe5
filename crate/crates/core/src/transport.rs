//! Post-caging transport: formation keeping, contact keeping, push and
//! rotate force laws, centroid estimation and the waypoint state machine.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::caging::{obstacle_vector, RobotView};
use crate::comms::{barrier_count, barrier_key, quorum_count, Replica, Tuple};
use crate::config::{FormationLaw, PushingParams, RotatingParams, Waypoint};
use crate::geometry::{polygon_centroid, wrap_angle, ArcPoint, ConvexPolygon, Vec2};
use crate::world::{sensor_angle, ProximityScan, RobotId, SENSOR_COUNT};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransportError {
    #[error("no formation neighbour is visible")]
    FormationLost,
    #[error("lost contact with the object")]
    LostContact,
    #[error("robot sits on the centroid estimate")]
    DegenerateLeverArm,
    #[error("only {have} of {need} positions shared")]
    InsufficientContributors { have: usize, need: usize },
    #[error("empty arc")]
    ZeroForce,
}

/// Range and bearing to a cage neighbour, recorded when caging completes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FormationReference {
    pub neighbor_id: RobotId,
    pub d_i: f64,
    pub theta_i: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransportPhase {
    Push(usize),
    Rotate(usize),
    BarrierWait(usize),
    Done,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CentroidEstimate {
    pub c_o_hat: Vec2,
    pub contributor_count: usize,
    pub tick_computed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForceLaw {
    Push,
    Rotate,
}

/// References for neighbours within `k_nf · i_d`.
pub fn formation_references(neighbors: &[crate::comms::NeighborInfo], cage: &[RobotId], k_nf: f64, i_d: f64) -> Vec<FormationReference> {
    neighbors
        .iter()
        .filter(|n| cage.contains(&n.id) && n.range <= k_nf * i_d)
        .map(|n| FormationReference { neighbor_id: n.id, d_i: n.range, theta_i: n.bearing })
        .collect()
}

/// Formation keeping over the visible reference neighbours.
pub fn formation_command(
    refs: &[FormationReference],
    current: &[crate::comms::NeighborInfo],
    k_f: f64,
    law: FormationLaw,
) -> Result<Vec2, TransportError> {
    let mut u = Vec2::ZERO;
    let mut seen = 0;
    for r in refs {
        let Some(n) = current.iter().find(|n| n.id == r.neighbor_id) else { continue };
        seen += 1;
        let (d_cur, th_cur) = (n.range, n.bearing);
        u += match law {
            FormationLaw::Displacement => {
                // Move so the neighbour's relative position returns to the reference.
                (Vec2::from_polar(d_cur, th_cur) - Vec2::from_polar(r.d_i, r.theta_i)) * (k_f / r.d_i)
            }
            FormationLaw::Quotient => {
                let q = if r.theta_i.abs() < 1e-9 { 0.0 } else { (r.theta_i - th_cur) / r.theta_i };
                let v = Vec2::new(r.d_i * r.theta_i.cos() - q.cos(), r.d_i * r.theta_i.sin() - q.sin());
                v * (k_f * (r.d_i - d_cur) / r.d_i)
            }
        };
    }
    if seen == 0 {
        return Err(TransportError::FormationLost);
    }
    Ok(u)
}

/// Unsigned angle in [0, π] between two vectors; π when either is zero.
fn angle_between(a: Vec2, b: Vec2) -> f64 {
    if a.norm() < 1e-12 || b.norm() < 1e-12 {
        return std::f64::consts::PI;
    }
    a.angle_between(b)
}

/// True when the robot sits where pushing moves the object toward its target.
pub fn is_effective_pusher(x_o: Vec2, to_target: Vec2, theta_p: f64) -> bool {
    x_o.norm() >= 1e-12 && angle_between(x_o, to_target) < theta_p
}

pub fn contact_command_push(x_o: Vec2, to_target: Vec2, theta_p: f64, p: &PushingParams) -> Result<Vec2, TransportError> {
    let dir = x_o.normalized().ok_or(TransportError::LostContact)?;
    let gain = if is_effective_pusher(x_o, to_target, theta_p) { p.k_cp_effective } else { p.k_cp_ineffective };
    Ok(dir * gain)
}

pub fn contact_command_rotate(x_o: Vec2, k_cr: f64) -> Result<Vec2, TransportError> {
    Ok(x_o.normalized().ok_or(TransportError::LostContact)? * k_cr)
}

/// Bang-bang drive toward the robot's own displaced target.
pub fn push_command(x_i: Vec2, tau_local: Vec2, d_tol: f64, k_t: f64) -> Vec2 {
    let e = tau_local - x_i;
    if e.norm() <= d_tol {
        Vec2::ZERO
    } else {
        e.normalized().unwrap_or(Vec2::ZERO) * k_t
    }
}

/// Tangential drive about the centroid estimate, turning with the yaw error.
pub fn rotate_command(x_i: Vec2, c_o_hat: Vec2, yaw_error: f64, tolerance: f64, k_r: f64) -> Result<Vec2, TransportError> {
    if yaw_error.abs() < tolerance {
        return Ok(Vec2::ZERO);
    }
    let r = (x_i - c_o_hat).normalized().ok_or(TransportError::DegenerateLeverArm)?;
    Ok(r.perp() * (k_r * yaw_error.signum()))
}

pub fn combine(law: ForceLaw, u_t: Vec2, u_r: Vec2, u_f: Vec2, u_cp: Vec2, u_cr: Vec2, max_speed: f64) -> Vec2 {
    let u = match law {
        ForceLaw::Push => u_t + u_f + u_cp,
        ForceLaw::Rotate => u_r + u_f + u_cr,
    };
    u.clamp_norm(max_speed)
}

/// Mean of the shared positions; ids fix the summation order.
pub fn estimate_centroid(positions: &[(RobotId, Vec2)], min_contributors: usize, tick: u64) -> Result<CentroidEstimate, TransportError> {
    if positions.is_empty() || positions.len() < min_contributors {
        return Err(TransportError::InsufficientContributors { have: positions.len(), need: min_contributors.max(1) });
    }
    let mut sorted = positions.to_vec();
    sorted.sort_by_key(|(id, _)| *id);
    let points: Vec<Vec2> = sorted.iter().map(|(_, p)| *p).collect();
    // Area centroid of the ring tolerates uneven spacing; the vertex mean is the fallback.
    let c_o_hat = ConvexPolygon::hull(&points)
        .ok()
        .filter(|h| h.len() >= 3)
        .and_then(|h| polygon_centroid(&h).ok())
        .unwrap_or_else(|| points.iter().copied().sum::<Vec2>() / points.len() as f64);
    Ok(CentroidEstimate { c_o_hat, contributor_count: sorted.len(), tick_computed: tick })
}

/// Trapezoidal integral of the inward normals along an ordered arc.
pub fn resultant_force_oracle(arc: &[ArcPoint]) -> Result<Vec2, TransportError> {
    if arc.len() < 2 {
        return Err(TransportError::ZeroForce);
    }
    Ok(arc
        .windows(2)
        .map(|w| (w[0].inward_normal + w[1].inward_normal) * (0.5 * (w[1].arclength - w[0].arclength)))
        .sum())
}

/// Direction of the object surface normal from three adjacent collinear
/// ray hits; `None` near corners or when fewer rays hit.
pub fn surface_normal_angle(scan: &ProximityScan, robot_radius: f64, sensor_range: f64) -> Option<f64> {
    let k = (0..SENSOR_COUNT).max_by(|&a, &b| scan.readings[a].total_cmp(&scan.readings[b]))?;
    let hit = |i: usize| {
        let r = scan.readings[i];
        (r > 0.0).then(|| Vec2::from_angle(sensor_angle(i)) * (robot_radius + (1.0 - r) * sensor_range))
    };
    let a = hit((k + SENSOR_COUNT - 1) % SENSOR_COUNT)?;
    let b = hit(k)?;
    let c = hit((k + 1) % SENSOR_COUNT)?;
    let (ab, ac) = (b - a, c - a);
    if ab.cross(ac).abs() > 0.01 * ab.norm() * ac.norm() {
        return None;
    }
    let mut n = ac.perp().normalized()?;
    if n.dot(obstacle_vector(scan)) < 0.0 {
        n = -n;
    }
    Some(n.angle())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportSettings {
    pub pushing: PushingParams,
    pub rotating: RotatingParams,
    pub robot_radius: f64,
    pub sensor_range: f64,
    pub max_speed: f64,
    pub barrier_timeout: u64,
    /// Number of registrations a barrier counts against.
    pub population: usize,
    pub initial_yaw: f64,
    pub i_d: f64,
}

impl TransportSettings {
    fn quorum(&self, fraction: f64) -> usize {
        quorum_count(fraction, self.population)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
enum Stage {
    Contact { since: u64 },
    Share { round: u32, since: u64, next: Next, posted: bool },
    Push(usize),
    PushWait { wp: usize, since: u64 },
    Rotate(usize),
    RotateWait { wp: usize, since: u64 },
    Done,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
enum Next {
    Push(usize),
    Decide(usize),
    AfterRotation(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportOutput {
    pub command: Vec2,
    pub phase: TransportPhase,
    /// Local target while pushing.
    pub tau_local: Option<Vec2>,
    pub x_o: Vec2,
    pub effective_pusher: bool,
    pub stalled: bool,
    pub events: Vec<TransportEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TransportEvent {
    CentroidEstimated { round: u32, waypoint: usize, estimate: Vec2, contributors: usize },
    BarrierPassed { barrier: String },
    RotationStarted { waypoint: usize },
    Done,
}

const CONTACT_READING: f64 = 0.95;
const CONTACT_MAX_TICKS: u64 = 60;
const SHARE_PATIENCE: u64 = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct TransportController {
    id: RobotId,
    cage: Vec<RobotId>,
    path: Vec<Waypoint>,
    refs: Vec<FormationReference>,
    stage: Stage,
    estimate: Option<CentroidEstimate>,
    offset: Vec2,
    start_yaw: f64,
    yaw_belief: f64,
    rotation: f64,
    shared_rotation: f64,
    last_normal: Option<(f64, u64)>,
    share_round: u32,
}

fn pos_prefix(round: u32) -> String {
    format!("pos/{round:03}/")
}

fn yaw_prefix(wp: usize) -> String {
    format!("yaw/{wp:03}/")
}

fn drift_prefix(wp: usize) -> String {
    format!("drift/{wp:03}/")
}

fn push_barrier(wp: usize) -> String {
    format!("push{wp:03}")
}

fn rot_barrier(wp: usize) -> String {
    format!("rot{wp:03}")
}

impl TransportController {
    pub fn new(id: RobotId, cage: Vec<RobotId>, path: Vec<Waypoint>, initial_yaw: f64, tick: u64) -> Self {
        Self {
            id,
            cage,
            path,
            refs: Vec::new(),
            stage: Stage::Contact { since: tick },
            estimate: None,
            offset: Vec2::ZERO,
            start_yaw: initial_yaw,
            yaw_belief: initial_yaw,
            rotation: 0.0,
            shared_rotation: 0.0,
            last_normal: None,
            share_round: 0,
        }
    }

    pub fn phase(&self) -> TransportPhase {
        match self.stage {
            Stage::Contact { .. } => TransportPhase::BarrierWait(0),
            Stage::Share { next, .. } => match next {
                Next::Push(w) | Next::Decide(w) | Next::AfterRotation(w) => TransportPhase::BarrierWait(w),
            },
            Stage::Push(w) => TransportPhase::Push(w),
            Stage::PushWait { wp, .. } | Stage::RotateWait { wp, .. } => TransportPhase::BarrierWait(wp),
            Stage::Rotate(w) => TransportPhase::Rotate(w),
            Stage::Done => TransportPhase::Done,
        }
    }

    pub fn estimate(&self) -> Option<&CentroidEstimate> {
        self.estimate.as_ref()
    }

    pub fn references(&self) -> &[FormationReference] {
        &self.refs
    }

    pub fn yaw_belief(&self) -> f64 {
        self.yaw_belief
    }

    pub fn is_done(&self) -> bool {
        self.stage == Stage::Done
    }

    fn tau_local(&self, wp: usize) -> Vec2 {
        self.path[wp].position + self.offset
    }

    fn formation(&self, view: &RobotView<'_>, k_f: f64, law: FormationLaw, rotate_refs: f64) -> Vec2 {
        let refs: Vec<FormationReference> =
            self.refs.iter().map(|r| FormationReference { theta_i: r.theta_i + rotate_refs, ..*r }).collect();
        formation_command(&refs, view.neighbors, k_f, law).unwrap_or(Vec2::ZERO)
    }

    fn push_vector(&self, view: &RobotView<'_>, s: &TransportSettings, wp: usize, theta_p: f64, deadband: f64) -> (Vec2, Vec2, bool) {
        let p = &s.pushing;
        let x_o = obstacle_vector(&view.object_scan);
        let tau = self.tau_local(wp);
        let u_t = push_command(view.position, tau, deadband, p.k_t);
        let u_f = self.formation(view, p.k_f, p.formation_law, 0.0);
        let u_cp = contact_command_push(x_o, tau - view.position, theta_p, p).unwrap_or(Vec2::ZERO);
        let eff = is_effective_pusher(x_o, tau - view.position, theta_p);
        (combine(ForceLaw::Push, u_t, Vec2::ZERO, u_f, u_cp, Vec2::ZERO, s.max_speed), tau, eff)
    }

    fn hold_vector(&self, view: &RobotView<'_>, s: &TransportSettings) -> Vec2 {
        let x_o = obstacle_vector(&view.object_scan);
        let u_f = self.formation(view, s.pushing.k_f, s.pushing.formation_law, 0.0);
        let u_c = contact_command_rotate(x_o, s.pushing.k_cp_ineffective).unwrap_or(Vec2::ZERO);
        combine(ForceLaw::Rotate, Vec2::ZERO, Vec2::ZERO, u_f, Vec2::ZERO, u_c, s.max_speed)
    }

    fn share(&mut self, view: &RobotView<'_>, round: u32, next: Next) {
        self.stage = Stage::Share { round, since: view.tick, next, posted: false };
    }

    fn median_yaw(replica: &Replica<Tuple>, prefix: &str) -> Option<f64> {
        let mut v: Vec<f64> = replica
            .scan_prefix(prefix)
            .filter_map(|e| match e.value {
                Tuple::Yaw(y) => Some(y),
                _ => None,
            })
            .collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let m = v.len() / 2;
        Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
    }

    fn track_rotation(&mut self, view: &RobotView<'_>, s: &TransportSettings) {
        let Some(n) = surface_normal_angle(&view.object_scan, s.robot_radius, s.sensor_range) else { return };
        if let Some((last, at)) = self.last_normal {
            let gap = (view.tick - at).max(1) as f64;
            let limit = (s.rotating.max_yaw_rate_deg.to_radians() * gap).min(10f64.to_radians());
            let d = wrap_angle(n - last);
            if d.abs() <= limit {
                self.rotation += d;
            }
        }
        self.last_normal = Some((n, view.tick));
    }

    /// One control step.
    pub fn step(&mut self, view: &RobotView<'_>, replica: &mut Replica<Tuple>, s: &TransportSettings) -> TransportOutput {
        let theta_p = s.pushing.theta_p_deg.to_radians();
        let tol = s.rotating.orient_tol_deg.to_radians();
        let mut out = TransportOutput {
            command: Vec2::ZERO,
            phase: self.phase(),
            tau_local: None,
            x_o: obstacle_vector(&view.object_scan),
            effective_pusher: false,
            stalled: false,
            events: Vec::new(),
        };
        let push_quorum = s.quorum(s.pushing.barrier);
        let rot_quorum = s.quorum(s.rotating.barrier);
        match self.stage {
            Stage::Contact { since } => {
                out.command = contact_command_rotate(out.x_o, s.pushing.k_cp_effective)
                    .map(|u| u.clamp_norm(s.max_speed))
                    .unwrap_or(Vec2::ZERO);
                if view.object_scan.max_reading() >= CONTACT_READING || view.tick >= since + CONTACT_MAX_TICKS {
                    self.refs = formation_references(view.neighbors, &self.cage, s.pushing.k_nf, s.i_d);
                    self.share(view, 0, Next::Push(0));
                }
            }
            Stage::Share { round, since, next, posted } => {
                out.command = self.hold_vector(view, s);
                if !posted {
                    replica.put(format!("{}{:05}", pos_prefix(round), self.id), Tuple::Position(view.position));
                    if let Next::Decide(w) = next {
                        replica.put(format!("{}{:05}", drift_prefix(w), self.id), Tuple::Yaw(self.rotation));
                    }
                    self.stage = Stage::Share { round, since, next, posted: true };
                }
                let positions: Vec<(RobotId, Vec2)> = replica
                    .scan_prefix(&pos_prefix(round))
                    .filter_map(|e| match e.value {
                        Tuple::Position(p) => Some((e.writer_id, p)),
                        _ => None,
                    })
                    .collect();
                let all = positions.len() >= s.population;
                let waited = view.tick >= since + SHARE_PATIENCE;
                if all || (waited && positions.len() >= push_quorum) {
                    if let Ok(est) = estimate_centroid(&positions, push_quorum, view.tick) {
                        self.estimate = Some(CentroidEstimate { tick_computed: view.tick, ..est });
                        self.offset = view.position - est.c_o_hat;
                        let (Next::Push(waypoint) | Next::Decide(waypoint) | Next::AfterRotation(waypoint)) = next;
                        out.events.push(TransportEvent::CentroidEstimated {
                            round,
                            waypoint,
                            estimate: est.c_o_hat,
                            contributors: est.contributor_count,
                        });
                        self.stage = match next {
                            Next::Push(w) => Stage::Push(w),
                            Next::AfterRotation(w) => {
                                self.refs = formation_references(view.neighbors, &self.cage, s.pushing.k_nf, s.i_d);
                                self.advance(w)
                            }
                            Next::Decide(w) => {
                                // Fold in what the object turned while being pushed.
                                self.yaw_belief += Self::median_yaw(replica, &drift_prefix(w)).unwrap_or(0.0);
                                let before = if w == 0 { self.start_yaw } else { self.path[w - 1].yaw };
                                if wrap_angle(self.path[w].yaw - before).abs() >= tol {
                                    self.rotation = 0.0;
                                    self.shared_rotation = 0.0;
                                    self.last_normal = None;
                                    out.events.push(TransportEvent::RotationStarted { waypoint: w });
                                    Stage::Rotate(w)
                                } else {
                                    self.advance(w)
                                }
                            }
                        };
                        self.share_round = round;
                        if let Stage::Push(_) = self.stage {
                            self.rotation = 0.0;
                            self.last_normal = None;
                        }
                    }
                } else if view.tick >= since + s.barrier_timeout {
                    out.stalled = true;
                }
            }
            Stage::Push(w) => {
                self.track_rotation(view, s);
                let (u, tau, eff) = self.push_vector(view, s, w, theta_p, s.pushing.d_tol);
                out.command = u;
                out.tau_local = Some(tau);
                out.effective_pusher = eff;
                let key = push_barrier(w);
                let late = barrier_count(replica, &key) >= push_quorum;
                if tau.distance(view.position) <= s.pushing.d_tol || late {
                    replica.put(barrier_key(&key, self.id), Tuple::Mark);
                    self.stage = Stage::PushWait { wp: w, since: view.tick };
                }
            }
            Stage::PushWait { wp, since } => {
                self.track_rotation(view, s);
                let (u, tau, eff) = self.push_vector(view, s, wp, theta_p, s.pushing.d_tol);
                out.command = u;
                out.tau_local = Some(tau);
                out.effective_pusher = eff;
                let key = push_barrier(wp);
                if barrier_count(replica, &key) >= push_quorum {
                    out.events.push(TransportEvent::BarrierPassed { barrier: key });
                    let r = self.share_round + 1;
                    self.share(view, r, Next::Decide(wp));
                } else if view.tick >= since + s.barrier_timeout {
                    out.stalled = true;
                }
            }
            Stage::Rotate(w) => {
                self.track_rotation(view, s);
                if (self.rotation - self.shared_rotation).abs() > 0.002 {
                    self.shared_rotation = self.rotation;
                    replica.put(format!("{}{:05}", yaw_prefix(w), self.id), Tuple::Yaw(self.rotation));
                }
                let turned = Self::median_yaw(replica, &yaw_prefix(w)).unwrap_or(self.rotation);
                let err = wrap_angle(self.path[w].yaw - (self.yaw_belief + turned));
                let c = self.estimate.map_or(view.position, |e| e.c_o_hat);
                let p = &s.rotating;
                let mut u_r = rotate_command(view.position, c, err, tol, p.k_r).unwrap_or(Vec2::ZERO);
                // Hold the radius about the estimate so the object turns in place.
                if let Some(radial) = (view.position - c).normalized() {
                    let anchor = c + self.offset.rotate(turned);
                    let e = (anchor - view.position).dot(radial);
                    u_r += radial * (p.k_r * (e / s.pushing.d_tol).clamp(-1.0, 1.0));
                }
                let u_f = self.formation(view, p.k_f, s.pushing.formation_law, turned);
                let u_cr = contact_command_rotate(out.x_o, p.k_cr).unwrap_or(Vec2::ZERO);
                out.command = combine(ForceLaw::Rotate, Vec2::ZERO, u_r, u_f, Vec2::ZERO, u_cr, s.max_speed);
                let key = rot_barrier(w);
                if err.abs() < tol || barrier_count(replica, &key) >= rot_quorum {
                    replica.put(barrier_key(&key, self.id), Tuple::Mark);
                    self.stage = Stage::RotateWait { wp: w, since: view.tick };
                }
            }
            Stage::RotateWait { wp, since } => {
                let turned = Self::median_yaw(replica, &yaw_prefix(wp)).unwrap_or(self.rotation);
                let p = &s.rotating;
                let u_f = self.formation(view, p.k_f, s.pushing.formation_law, turned);
                let u_cr = contact_command_rotate(out.x_o, s.pushing.k_cp_ineffective).unwrap_or(Vec2::ZERO);
                out.command = combine(ForceLaw::Rotate, Vec2::ZERO, Vec2::ZERO, u_f, Vec2::ZERO, u_cr, s.max_speed);
                let key = rot_barrier(wp);
                if barrier_count(replica, &key) >= rot_quorum {
                    out.events.push(TransportEvent::BarrierPassed { barrier: key });
                    self.yaw_belief += turned;
                    let r = self.share_round + 1;
                    self.share(view, r, Next::AfterRotation(wp));
                } else if view.tick >= since + s.barrier_timeout {
                    out.stalled = true;
                }
            }
            Stage::Done => {}
        }
        if self.stage == Stage::Done && out.phase != TransportPhase::Done {
            out.events.push(TransportEvent::Done);
        }
        out.phase = self.phase();
        out
    }

    fn advance(&self, w: usize) -> Stage {
        if w + 1 < self.path.len() {
            Stage::Push(w + 1)
        } else {
            Stage::Done
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::comms::NeighborInfo;
    use proptest::prelude::*;

    fn close(a: Vec2, b: Vec2, tol: f64) -> bool {
        a.distance(b) <= tol
    }

    fn nb(id: RobotId, range: f64, bearing: f64) -> NeighborInfo {
        NeighborInfo { id, range, bearing }
    }

    #[test]
    fn formation_zero_at_reference() {
        let refs = [
            FormationReference { neighbor_id: 1, d_i: 0.45, theta_i: 0.3 },
            FormationReference { neighbor_id: 2, d_i: 0.5, theta_i: -2.0 },
        ];
        let cur = [nb(1, 0.45, 0.3), nb(2, 0.5, -2.0)];
        for law in [FormationLaw::Displacement, FormationLaw::Quotient] {
            assert!(close(formation_command(&refs, &cur, 40.0, law).unwrap(), Vec2::ZERO, 1e-12));
        }
    }

    #[test]
    fn formation_single_stretched_neighbour() {
        // Neighbour drifted out to 0.55 along +x: moving toward it restores the reference.
        let refs = [FormationReference { neighbor_id: 1, d_i: 0.45, theta_i: 0.0 }];
        let u = formation_command(&refs, &[nb(1, 0.55, 0.0)], 40.0, FormationLaw::Displacement).unwrap();
        assert!((u.x - 40.0 * 0.1 / 0.45).abs() < 1e-9);
        assert!(u.y.abs() < 1e-12);
        let v = formation_command(&refs, &[nb(1, 0.55, 0.0)], 40.0, FormationLaw::Quotient).unwrap();
        assert!(v.is_finite());
    }

    #[test]
    fn formation_symmetric_pair_is_on_axis() {
        let refs = [
            FormationReference { neighbor_id: 1, d_i: 0.45, theta_i: 0.5 },
            FormationReference { neighbor_id: 2, d_i: 0.45, theta_i: -0.5 },
        ];
        let cur = [nb(1, 0.5, 0.5), nb(2, 0.5, -0.5)];
        let u = formation_command(&refs, &cur, 40.0, FormationLaw::Displacement).unwrap();
        assert!(u.y.abs() < 1e-12);
        assert!(u.x > 0.0);
    }

    #[test]
    fn formation_lost_without_neighbours() {
        let refs = [FormationReference { neighbor_id: 1, d_i: 0.45, theta_i: 0.0 }];
        assert_eq!(formation_command(&refs, &[nb(7, 0.4, 0.0)], 40.0, FormationLaw::Displacement), Err(TransportError::FormationLost));
    }

    #[test]
    fn push_contact_gain_schedule() {
        let p = PushingParams::default();
        let th = 115f64.to_radians();
        let u = contact_command_push(Vec2::new(1.0, 0.0), Vec2::new(2.0, 0.0), th, &p).unwrap();
        assert!(close(u, Vec2::new(40.0, 0.0), 1e-12));
        let u = contact_command_push(Vec2::new(1.0, 0.0), Vec2::new(-2.0, 0.0), th, &p).unwrap();
        assert!(close(u, Vec2::new(20.0, 0.0), 1e-12));
        // Just past the window edge falls in the weaker branch.
        let u = contact_command_push(Vec2::new(1.0, 0.0), Vec2::from_angle(th + 1e-12), th, &p).unwrap();
        assert!((u.norm() - 20.0).abs() < 1e-12);
        assert_eq!(contact_command_push(Vec2::ZERO, Vec2::new(1.0, 0.0), th, &p), Err(TransportError::LostContact));
    }

    #[test]
    fn rotate_contact_examples() {
        let u = contact_command_rotate(Vec2::new(0.3, 0.4), 450.0).unwrap();
        assert!(close(u, Vec2::new(270.0, 360.0), 1e-9));
        assert_eq!(contact_command_rotate(Vec2::ZERO, 450.0), Err(TransportError::LostContact));
    }

    #[test]
    fn push_command_examples() {
        assert_eq!(push_command(Vec2::ZERO, Vec2::new(0.05, 0.0), 0.1, 60.0), Vec2::ZERO);
        assert!(close(push_command(Vec2::ZERO, Vec2::new(3.0, 4.0), 0.1, 60.0), Vec2::new(36.0, 48.0), 1e-9));
    }

    #[test]
    fn rotate_command_examples() {
        let tol = 5.72f64.to_radians();
        let u = rotate_command(Vec2::new(1.0, 0.0), Vec2::ZERO, 0.5, tol, 600.0).unwrap();
        assert!(close(u, Vec2::new(0.0, 600.0), 1e-9));
        assert_eq!(rotate_command(Vec2::new(1.0, 0.0), Vec2::ZERO, 0.05f64.to_radians(), tol, 600.0).unwrap(), Vec2::ZERO);
        let a = rotate_command(Vec2::new(1.0, 0.3), Vec2::ZERO, 0.5, tol, 600.0).unwrap();
        let b = rotate_command(Vec2::new(-1.0, -0.3), Vec2::ZERO, 0.5, tol, 600.0).unwrap();
        assert!(close(a, -b, 1e-9));
        assert_eq!(rotate_command(Vec2::ZERO, Vec2::ZERO, 0.5, tol, 600.0), Err(TransportError::DegenerateLeverArm));
    }

    #[test]
    fn combine_sums_and_clamps() {
        let (a, b, c) = (Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0), Vec2::new(1.0, 1.0));
        assert_eq!(combine(ForceLaw::Push, a, Vec2::ZERO, Vec2::ZERO, Vec2::ZERO, Vec2::ZERO, 10.0), a);
        assert_eq!(combine(ForceLaw::Rotate, Vec2::ZERO, b, Vec2::ZERO, Vec2::ZERO, Vec2::ZERO, 10.0), b);
        assert_eq!(combine(ForceLaw::Push, a, Vec2::ZERO, b, c, Vec2::ZERO, 10.0), Vec2::new(2.0, 2.0));
        assert!((combine(ForceLaw::Push, a, Vec2::ZERO, b, c, Vec2::ZERO, 0.1).norm() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn centroid_examples() {
        let pts = [(0, Vec2::new(0.0, 0.0)), (1, Vec2::new(2.0, 0.0)), (2, Vec2::new(2.0, 2.0)), (3, Vec2::new(0.0, 2.0))];
        assert!(close(estimate_centroid(&pts, 4, 0).unwrap().c_o_hat, Vec2::new(1.0, 1.0), 1e-12));
        assert!(matches!(estimate_centroid(&pts[..2], 3, 0), Err(TransportError::InsufficientContributors { have: 2, need: 3 })));
    }

    #[test]
    fn semicircle_oracle_matches_chord() {
        let r = 1.3;
        let n = 100;
        let arc: Vec<ArcPoint> = (0..n)
            .map(|k| {
                let phi = -std::f64::consts::FRAC_PI_2 + std::f64::consts::PI * k as f64 / (n - 1) as f64;
                ArcPoint { position: Vec2::from_polar(r, phi), inward_normal: -Vec2::from_angle(phi), arclength: r * (phi + std::f64::consts::FRAC_PI_2) }
            })
            .collect();
        let f = resultant_force_oracle(&arc).unwrap();
        let chord = arc[n - 1].position - arc[0].position;
        let want = chord.perp();
        assert!(f.distance(want) / want.norm() < 0.02);
        assert_eq!(resultant_force_oracle(&[]), Err(TransportError::ZeroForce));
    }

    #[test]
    fn full_circle_cancels() {
        let n = 200;
        let arc: Vec<ArcPoint> = (0..=n)
            .map(|k| {
                let phi = std::f64::consts::TAU * k as f64 / n as f64;
                ArcPoint { position: Vec2::from_angle(phi), inward_normal: -Vec2::from_angle(phi), arclength: phi }
            })
            .collect();
        assert!(resultant_force_oracle(&arc).unwrap().norm() < 1e-9);
    }

    #[test]
    fn square_effective_side_pushes_toward_target() {
        // Target on +x: effective contacts sit on the −x side, normal +x.
        let sq = crate::geometry::ConvexPolygon::rectangle(2.0, 2.0).unwrap();
        let target = Vec2::new(5.0, 0.0);
        let mut arc = Vec::new();
        for k in 0..400 {
            let t = k as f64 / 400.0;
            let p = Vec2::new(-1.0, -1.0 + 2.0 * t);
            let ap = crate::geometry::closest_boundary_point(&sq, p + Vec2::new(-0.01, 0.0)).unwrap();
            if is_effective_pusher(ap.inward_normal, target - ap.position, 115f64.to_radians()) {
                arc.push(ap);
            }
        }
        let f = resultant_force_oracle(&arc).unwrap();
        assert!(f.dot(target) > 0.0);
    }

    #[test]
    fn normal_from_flat_edge() {
        let sq = crate::geometry::ConvexPolygon::rectangle(2.0, 2.0).unwrap();
        for &(p, want) in &[(Vec2::new(0.3, -1.2), std::f64::consts::FRAC_PI_2), (Vec2::new(1.1, 0.2), std::f64::consts::PI)] {
            let mut s = ProximityScan::default();
            for k in 0..SENSOR_COUNT {
                let d = Vec2::from_angle(sensor_angle(k));
                s.readings[k] = crate::world::reading_for_distance(crate::geometry::ray_distance(p + d * 0.07, d, &sq, 1.0), 1.0);
            }
            let a = surface_normal_angle(&s, 0.07, 1.0).unwrap();
            assert!(wrap_angle(a - want).abs() < 1e-9, "{a} vs {want}");
        }
    }

    proptest! {
        #[test]
        fn centroid_permutation_and_translation(pts in prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 1..20), t in (-3.0..3.0f64, -3.0..3.0f64), seed in any::<u64>()) {
            let v: Vec<(RobotId, Vec2)> = pts.iter().enumerate().map(|(i, &(x, y))| (i as RobotId, Vec2::new(x, y))).collect();
            let mut shuffled = v.clone();
            let k = (seed as usize) % shuffled.len();
            shuffled.rotate_left(k);
            shuffled.reverse();
            let a = estimate_centroid(&v, 1, 0).unwrap().c_o_hat;
            prop_assert_eq!(a, estimate_centroid(&shuffled, 1, 0).unwrap().c_o_hat);
            let tv = Vec2::new(t.0, t.1);
            let moved: Vec<(RobotId, Vec2)> = v.iter().map(|&(i, p)| (i, p + tv)).collect();
            prop_assert!(estimate_centroid(&moved, 1, 0).unwrap().c_o_hat.distance(a + tv) < 1e-9);
        }

        #[test]
        fn formation_zero_point(refs in prop::collection::vec((0.2..0.7f64, -3.1..3.1f64), 1..6)) {
            let r: Vec<FormationReference> = refs.iter().enumerate().map(|(i, &(d, t))| FormationReference { neighbor_id: i as RobotId, d_i: d, theta_i: t }).collect();
            let cur: Vec<NeighborInfo> = refs.iter().enumerate().map(|(i, &(d, t))| nb(i as RobotId, d, t)).collect();
            prop_assert_eq!(formation_command(&r, &cur, 40.0, FormationLaw::Displacement).unwrap(), Vec2::ZERO);
        }

        #[test]
        fn push_command_is_bang_bang(x in (-3.0..3.0f64, -3.0..3.0f64), t in (-3.0..3.0f64, -3.0..3.0f64)) {
            let n = push_command(Vec2::new(x.0, x.1), Vec2::new(t.0, t.1), 0.1, 60.0).norm();
            prop_assert!(n == 0.0 || (n - 60.0).abs() < 1e-9);
        }

        #[test]
        fn rotate_contact_norm(a in (-3.0..3.0f64, -3.0..3.0f64)) {
            let x = Vec2::new(a.0, a.1);
            prop_assume!(x.norm() > 1e-6);
            let u = contact_command_rotate(x, 450.0).unwrap();
            prop_assert!((u.norm() - 450.0).abs() < 1e-9);
            prop_assert!(u.angle_between(x) < 1e-6);
        }
    }
}
