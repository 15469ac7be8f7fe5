//! Discrete-time physical world: point-mass robots, a quasi-static rigid
//! object driven by contact pushes, and eight-ray proximity sensing.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, ScenarioConfig};
use crate::geometry::{
    closest_boundary_point, perimeter_moment, point_segment_distance, polygon_centroid, ray_circle_distance, ray_distance, ArcPoint,
    ConvexPolygon, Vec2,
};

pub type RobotId = u32;

pub const SENSOR_COUNT: usize = 8;

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("cannot place {count} robots in a cluster of radius {radius:.2} m")]
    PlacementFailure { count: usize, radius: f64 },
    #[error("unknown robot id {0}")]
    UnknownRobot(RobotId),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Sensor bearing in the robot frame.
pub fn sensor_angle(k: usize) -> f64 {
    k as f64 * PI / 4.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotBody {
    pub id: RobotId,
    pub position: Vec2,
    pub velocity: Vec2,
    pub radius: f64,
    pub max_speed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectBody {
    /// Body-frame polygon with its centroid at the origin.
    pub polygon: ConvexPolygon,
    /// Centroid C_o in the world frame.
    pub position: Vec2,
    pub yaw: f64,
    pub velocity: Vec2,
    pub angular_velocity: f64,
    pub mass: f64,
    pub moment: f64,
    pub linear_damping: f64,
    pub angular_damping: f64,
}

impl ObjectBody {
    /// Recentres `shape` on its centroid and places it at `position`.
    pub fn new(shape: &ConvexPolygon, position: Vec2, yaw: f64, mass: f64, linear_damping: f64, angular_damping: f64) -> Self {
        let c = polygon_centroid(shape).expect("validated polygon");
        let polygon = shape.translated(-c);
        let moment = perimeter_moment(&polygon, mass).expect("validated polygon");
        Self {
            polygon,
            position,
            yaw,
            velocity: Vec2::ZERO,
            angular_velocity: 0.0,
            mass,
            moment,
            linear_damping,
            angular_damping,
        }
    }

    pub fn world_polygon(&self) -> ConvexPolygon {
        self.polygon.transformed(self.position, self.yaw)
    }

    pub fn kinetic_energy(&self) -> f64 {
        0.5 * self.mass * self.velocity.norm_sq() + 0.5 * self.moment * self.angular_velocity.powi(2)
    }

    /// One explicit step of v̇ = F/m − c·v and ω̇ = τ/I − c_ω·ω.
    pub fn integrate(&mut self, force: Vec2, torque: f64, dt: f64) {
        self.velocity += (force / self.mass - self.velocity * self.linear_damping) * dt;
        self.angular_velocity += (torque / self.moment - self.angular_velocity * self.angular_damping) * dt;
        self.position += self.velocity * dt;
        self.yaw += self.angular_velocity * dt;
    }
}

/// Normalized readings, one per sensor at k·π/4.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct ProximityScan {
    pub readings: [f64; SENSOR_COUNT],
}

impl ProximityScan {
    pub fn max_reading(&self) -> f64 {
        self.readings.iter().copied().fold(0.0, f64::max)
    }

    pub fn is_clear(&self) -> bool {
        self.readings.iter().all(|&r| r == 0.0)
    }
}

/// Linear reading model: 1 at the sensor, 0 at `range` and beyond.
pub fn reading_for_distance(d: Option<f64>, range: f64) -> f64 {
    d.map_or(0.0, |d| (1.0 - d / range).max(0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicsParams {
    pub sensor_range: f64,
    pub force_gain: f64,
    pub per_robot_force_max: f64,
    pub contact_epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub tick: u64,
    pub dt: f64,
    pub robots: Vec<RobotBody>,
    pub object: ObjectBody,
    pub rng_seed: u64,
    pub params: PhysicsParams,
}

/// Force applied by one robot during a step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactForce {
    pub robot: RobotId,
    pub point: Vec2,
    pub force: Vec2,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepReport {
    pub forces: Vec<ContactForce>,
    pub net_force: Vec2,
    pub net_torque: f64,
}

/// Places the object and a seeded, non-overlapping deployment cluster.
pub fn spawn_scenario(config: &ScenarioConfig, seed: u64) -> Result<WorldState, WorldError> {
    let shape = config.object.polygon_shape()?;
    let mass = config.object.resolved_mass()?;
    let obj_pos = Vec2::new(config.object.position[0], config.object.position[1]);
    let object = ObjectBody::new(
        &shape,
        obj_pos,
        config.object.yaw,
        mass,
        config.world.linear_damping,
        config.world.angular_damping,
    );
    let n = config.robot_count;
    let dep = &config.deployment;
    let cluster_r = dep.radius_for(n);
    let dir = Vec2::from_angle(dep.direction_deg.to_radians());
    let world_poly = object.world_polygon();
    let extent = world_poly.circumradius_about(obj_pos);
    let offset = dep.cluster_offset.max(extent + cluster_r + 0.5);
    let center = obj_pos + dir * offset;

    let min_sep = dep.min_spacing.max(2.0 * config.robot.radius);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut placed: Vec<Vec2> = Vec::with_capacity(n);
    let max_attempts = 20_000 * n.max(1);
    let mut attempts = 0;
    while placed.len() < n {
        attempts += 1;
        if attempts > max_attempts {
            return Err(WorldError::PlacementFailure { count: n, radius: cluster_r });
        }
        let r = cluster_r * rng.random::<f64>().sqrt();
        let a = rng.random::<f64>() * 2.0 * PI;
        let p = center + Vec2::from_polar(r, a);
        if placed.iter().all(|q| q.distance(p) >= min_sep)
            && world_poly.distance_to(p) > config.robot.radius + 0.3
        {
            placed.push(p);
        }
    }
    let robots = placed
        .into_iter()
        .enumerate()
        .map(|(i, position)| RobotBody {
            id: i as RobotId,
            position,
            velocity: Vec2::ZERO,
            radius: config.robot.radius,
            max_speed: config.robot.max_speed,
        })
        .collect();
    Ok(WorldState {
        tick: 0,
        dt: config.dt,
        robots,
        object,
        rng_seed: seed,
        params: PhysicsParams {
            sensor_range: config.robot.sensor_range,
            force_gain: config.world.force_gain,
            per_robot_force_max: config.world.per_robot_force_max,
            contact_epsilon: config.world.contact_epsilon,
        },
    })
}

impl WorldState {
    pub fn robot(&self, id: RobotId) -> Result<&RobotBody, WorldError> {
        self.robots.get(id as usize).filter(|r| r.id == id).ok_or(WorldError::UnknownRobot(id))
    }

    fn scan_with(&self, id: RobotId, poly: &ConvexPolygon, include_robots: bool) -> Result<ProximityScan, WorldError> {
        let me = self.robot(id)?;
        let range = self.params.sensor_range;
        let mut scan = ProximityScan::default();
        for (k, reading) in scan.readings.iter_mut().enumerate() {
            let dir = Vec2::from_angle(sensor_angle(k));
            let origin = me.position + dir * me.radius;
            let mut best = ray_distance(origin, dir, poly, range);
            if include_robots {
                for other in self.robots.iter().filter(|o| o.id != id) {
                    if let Some(d) = ray_circle_distance(origin, dir, other.position, other.radius, range) {
                        best = Some(best.map_or(d, |b: f64| b.min(d)));
                    }
                }
            }
            *reading = reading_for_distance(best, range);
        }
        Ok(scan)
    }

    /// Full proximity scan: object and other robot discs, nearest hit wins.
    pub fn proximity_scan(&self, id: RobotId) -> Result<ProximityScan, WorldError> {
        self.scan_with(id, &self.object.world_polygon(), true)
    }

    /// Scan with readings caused by other robots masked out. Robots know
    /// their neighbours' bearings, so those returns can be discounted.
    pub fn object_scan(&self, id: RobotId) -> Result<ProximityScan, WorldError> {
        self.scan_with(id, &self.object.world_polygon(), false)
    }


    /// Robots touching the object (within `contact_epsilon` of it).
    pub fn contact_set(&self) -> Vec<(RobotId, ArcPoint)> {
        let poly = self.object.world_polygon();
        self.contact_set_in(&poly)
    }

    fn contact_set_in(&self, poly: &ConvexPolygon) -> Vec<(RobotId, ArcPoint)> {
        self.robots
            .iter()
            .filter_map(|r| {
                let ap = closest_boundary_point(poly, r.position).ok()?;
                (ap.position.distance(r.position) - r.radius <= self.params.contact_epsilon).then_some((r.id, ap))
            })
            .collect()
    }

    /// Advances one tick. Missing commands count as zero; unknown ids are
    /// rejected before anything changes.
    pub fn step(&mut self, commands: &BTreeMap<RobotId, Vec2>) -> Result<StepReport, WorldError> {
        for &id in commands.keys() {
            self.robot(id)?;
        }
        let dt = self.dt;
        for r in &mut self.robots {
            let cmd = commands.get(&r.id).copied().unwrap_or(Vec2::ZERO);
            r.velocity = cmd.clamp_norm(r.max_speed);
        }

        let poly = self.object.world_polygon();
        let mut report = StepReport::default();
        for (id, ap) in self.contact_set_in(&poly) {
            let v = self.robots[id as usize].velocity;
            let push = v.dot(ap.inward_normal);
            if push <= 0.0 {
                continue;
            }
            let mag = (self.params.force_gain * push).min(self.params.per_robot_force_max);
            let force = ap.inward_normal * mag;
            report.net_force += force;
            report.net_torque += (ap.position - self.object.position).cross(force);
            report.forces.push(ContactForce { robot: id, point: ap.position, force });
        }
        self.object.integrate(report.net_force, report.net_torque, dt);

        for r in &mut self.robots {
            r.position += r.velocity * dt;
        }
        self.resolve_overlaps();
        self.tick += 1;
        Ok(report)
    }

    fn project_out_of_object(&mut self, poly: &ConvexPolygon) {
        for r in &mut self.robots {
            let sd = poly.signed_distance(r.position);
            if sd >= r.radius {
                continue;
            }
            let outward = if sd > 1e-12 {
                closest_boundary_point(poly, r.position)
                    .ok()
                    .and_then(|ap| (r.position - ap.position).normalized())
            } else {
                None
            };
            let dir = outward.unwrap_or_else(|| {
                // Centre on or inside the boundary: leave through the nearest edge.
                let (i, _) = poly
                    .edges()
                    .enumerate()
                    .map(|(i, (a, b))| (i, point_segment_distance(r.position, a, b)))
                    .min_by(|x, y| x.1.total_cmp(&y.1))
                    .expect("polygon has edges");
                -poly.edge_inward_normal(i)
            });
            r.position += dir * (r.radius - sd + 1e-9);
        }
    }

    fn resolve_overlaps(&mut self) {
        let poly = self.object.world_polygon();
        for _ in 0..4 {
            self.project_out_of_object(&poly);
            let n = self.robots.len();
            for i in 0..n {
                for j in (i + 1)..n {
                    let (a, b) = (self.robots[i].position, self.robots[j].position);
                    let min = self.robots[i].radius + self.robots[j].radius;
                    let d = a.distance(b);
                    if d < min {
                        let dir = (b - a).normalized().unwrap_or(Vec2::new(1.0, 0.0));
                        let push = dir * ((min - d) / 2.0);
                        self.robots[i].position -= push;
                        self.robots[j].position += push;
                    }
                }
            }
        }
        self.project_out_of_object(&poly);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ObjectSpec;

    fn world_with(robots: &[Vec2]) -> WorldState {
        let mut cfg = ScenarioConfig::default();
        cfg.robot_count = robots.len().max(1);
        let mut w = spawn_scenario(&cfg, 7).unwrap();
        w.robots = robots
            .iter()
            .enumerate()
            .map(|(i, &p)| RobotBody { id: i as RobotId, position: p, velocity: Vec2::ZERO, radius: 0.07, max_speed: 0.1 })
            .collect();
        w
    }

    #[test]
    fn spawn_is_deterministic_and_seed_dependent() {
        let cfg = ScenarioConfig { robot_count: 25, ..ScenarioConfig::default() };
        let a = spawn_scenario(&cfg, 11).unwrap();
        let b = spawn_scenario(&cfg, 11).unwrap();
        assert_eq!(a, b);
        let c = spawn_scenario(&cfg, 12).unwrap();
        assert_ne!(a.robots, c.robots);
    }

    #[test]
    fn spawn_respects_spacing() {
        let mut cfg = ScenarioConfig { robot_count: 25, ..ScenarioConfig::default() };
        cfg.deployment.cluster_radius = Some(2.0);
        cfg.deployment.cluster_offset = 4.0;
        let w = spawn_scenario(&cfg, 3).unwrap();
        for (i, a) in w.robots.iter().enumerate() {
            for b in &w.robots[i + 1..] {
                assert!(a.position.distance(b.position) >= 2.0 * 0.07);
            }
            assert!(w.object.world_polygon().distance_to(a.position) > 0.07);
        }
    }

    #[test]
    fn overfull_cluster_fails_placement() {
        let mut cfg = ScenarioConfig { robot_count: 200, ..ScenarioConfig::default() };
        cfg.deployment.cluster_radius = Some(0.5);
        assert!(matches!(spawn_scenario(&cfg, 1), Err(WorldError::PlacementFailure { .. })));
    }

    #[test]
    fn reading_at_range_limit_is_zero_and_at_threshold_is_point_seven() {
        // Sensor on the body edge at x = 2.0 + 0.07 faces −x; object edge at x = 1.
        let w = world_with(&[Vec2::new(2.0 + 0.07, 0.0)]);
        let s = w.proximity_scan(0).unwrap();
        assert!(s.readings[4].abs() < 1e-12);
        let w = world_with(&[Vec2::new(1.3 + 0.07, 0.0)]);
        let s = w.proximity_scan(0).unwrap();
        assert!((s.readings[4] - 0.7).abs() < 1e-12);
        assert_eq!(s.readings[0], 0.0);
    }

    #[test]
    fn scan_sees_other_robots_but_object_scan_masks_them() {
        let w = world_with(&[Vec2::new(0.0, 3.0), Vec2::new(0.5, 3.0)]);
        let s = w.proximity_scan(0).unwrap();
        assert!(s.readings[0] > 0.0);
        assert!(w.object_scan(0).unwrap().readings[0] == 0.0);
        assert!(matches!(w.proximity_scan(9), Err(WorldError::UnknownRobot(9))));
    }

    #[test]
    fn zero_commands_change_only_tick() {
        let mut w = world_with(&[Vec2::new(0.0, 3.0), Vec2::new(2.0, 2.0)]);
        let before = w.clone();
        w.step(&BTreeMap::new()).unwrap();
        assert_eq!(w.tick, before.tick + 1);
        assert_eq!(w.robots, before.robots);
        assert_eq!(w.object, before.object);
    }

    #[test]
    fn single_pusher_on_midpoint_gives_pure_translation() {
        let mut cfg = ScenarioConfig::default();
        cfg.object = ObjectSpec::rectangle(2.0, 2.0);
        let mut w = world_with(&[Vec2::new(0.0, -1.07)]);
        assert!((w.object.mass - 5.56).abs() < 1e-12);
        let cmds = BTreeMap::from([(0, Vec2::new(0.0, 1.0))]);
        for _ in 0..20 {
            w.step(&cmds).unwrap();
        }
        assert!(w.object.velocity.y > 0.0);
        assert!(w.object.velocity.x.abs() < 1e-12);
        assert!(w.object.angular_velocity.abs() < 1e-12);
    }

    #[test]
    fn antipodal_pushers_cancel() {
        let mut w = world_with(&[Vec2::new(0.0, -1.07), Vec2::new(0.0, 1.07)]);
        let cmds = BTreeMap::from([(0, Vec2::new(0.0, 1.0)), (1, Vec2::new(0.0, -1.0))]);
        for _ in 0..100 {
            w.step(&cmds).unwrap();
        }
        assert!(w.object.position.norm() < 1e-6);
    }

    #[test]
    fn unknown_command_id_rejected() {
        let mut w = world_with(&[Vec2::new(0.0, 3.0)]);
        let cmds = BTreeMap::from([(5, Vec2::new(0.0, 1.0))]);
        assert!(matches!(w.step(&cmds), Err(WorldError::UnknownRobot(5))));
        assert_eq!(w.tick, 0);
    }

    #[test]
    fn contact_epsilon_boundary() {
        let eps = 0.02;
        let w = world_with(&[Vec2::new(0.0, -1.0 - 0.07 - eps / 2.0), Vec2::new(0.0, 1.0 + 0.07 + 2.0 * eps)]);
        let c = w.contact_set();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].0, 0);
    }

    #[test]
    fn terminal_speed_matches_quasi_static_law() {
        let mut w = world_with(&[Vec2::new(0.0, 5.0)]);
        let f = Vec2::new(0.8, 0.0);
        for _ in 0..2000 {
            w.object.integrate(f, 0.0, w.dt);
        }
        let expect = f.norm() / (w.object.mass * w.object.linear_damping);
        assert!((w.object.velocity.norm() - expect).abs() / expect < 0.01);
    }

    #[test]
    fn energy_non_increasing_without_commands() {
        let mut w = world_with(&[Vec2::new(0.0, 5.0)]);
        w.object.velocity = Vec2::new(0.3, -0.2);
        w.object.angular_velocity = 0.4;
        let mut e = w.object.kinetic_energy();
        for _ in 0..200 {
            w.step(&BTreeMap::new()).unwrap();
            let e2 = w.object.kinetic_energy();
            assert!(e2 <= e + 1e-15);
            e = e2;
        }
    }

    #[test]
    fn robots_never_penetrate() {
        let mut w = world_with(&[Vec2::new(0.0, -1.2), Vec2::new(1.1, 1.1), Vec2::new(-1.3, 0.2)]);
        let cmds = BTreeMap::from([(0, Vec2::new(0.0, 1.0)), (1, Vec2::new(-1.0, -1.0)), (2, Vec2::new(1.0, 0.0))]);
        for _ in 0..300 {
            w.step(&cmds).unwrap();
            let poly = w.object.world_polygon();
            for r in &w.robots {
                assert!(poly.signed_distance(r.position) >= r.radius - 1e-6);
            }
        }
    }
}
