//! Scenario configuration: a TOML document whose omitted fields take the
//! reference experiment defaults.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{perimeter_length, ConvexPolygon, Vec2};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config syntax error: {0}")]
    ConfigSyntax(String),
    #[error("config invalid ({rule}): {detail}")]
    ConfigInvalid { rule: &'static str, detail: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn invalid(rule: &'static str, detail: impl Into<String>) -> ConfigError {
    ConfigError::ConfigInvalid { rule, detail: detail.into() }
}

/// Areal density implied by the 2×2 m / 5.56 kg reference object.
pub const DEFAULT_DENSITY: f64 = 1.39;

/// Object mass under the constant-density model.
pub fn mass_for_size(width: f64, height: f64, density: f64) -> f64 {
    density * width * height
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    #[default]
    Rectangle,
    Regular,
    Polygon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObjectSpec {
    pub shape: ShapeKind,
    pub width: f64,
    pub height: f64,
    pub sides: usize,
    pub radius: f64,
    pub vertices: Vec<[f64; 2]>,
    pub density: f64,
    /// Overrides the density model when set.
    pub mass: Option<f64>,
    pub position: [f64; 2],
    pub yaw: f64,
}

impl Default for ObjectSpec {
    fn default() -> Self {
        Self {
            shape: ShapeKind::Rectangle,
            width: 2.0,
            height: 2.0,
            sides: 6,
            radius: 1.0,
            vertices: Vec::new(),
            density: DEFAULT_DENSITY,
            mass: None,
            position: [0.0, 0.0],
            yaw: 0.0,
        }
    }
}

impl ObjectSpec {
    pub fn rectangle(width: f64, height: f64) -> Self {
        Self { shape: ShapeKind::Rectangle, width, height, ..Self::default() }
    }

    pub fn polygon(poly: &ConvexPolygon) -> Self {
        Self {
            shape: ShapeKind::Polygon,
            vertices: poly.vertices().iter().map(|v| [v.x, v.y]).collect(),
            ..Self::default()
        }
    }

    /// Body-frame polygon (centroid not necessarily at the origin).
    pub fn polygon_shape(&self) -> Result<ConvexPolygon, ConfigError> {
        let r = match self.shape {
            ShapeKind::Rectangle => ConvexPolygon::rectangle(self.width, self.height),
            ShapeKind::Regular => ConvexPolygon::regular(self.sides, self.radius),
            ShapeKind::Polygon => {
                ConvexPolygon::new(self.vertices.iter().map(|&[x, y]| Vec2::new(x, y)).collect())
            }
        };
        r.map_err(|e| invalid("object", e.to_string()))
    }

    pub fn resolved_mass(&self) -> Result<f64, ConfigError> {
        if let Some(m) = self.mass {
            return Ok(m);
        }
        Ok(match self.shape {
            ShapeKind::Rectangle => mass_for_size(self.width, self.height, self.density),
            _ => self.density * self.polygon_shape()?.area(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PathKind {
    #[default]
    Straight,
    Zigzag,
    StraightRot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathSpec {
    pub kind: PathKind,
    pub waypoints: usize,
    pub spacing: f64,
    /// Travel heading in degrees; 90 is +y.
    pub heading_deg: f64,
}

impl Default for PathSpec {
    fn default() -> Self {
        Self { kind: PathKind::Straight, waypoints: 9, spacing: 1.0, heading_deg: 90.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobotParams {
    pub radius: f64,
    pub max_speed: f64,
    /// Proximity sensor range, measured from the sensor on the body edge.
    pub sensor_range: f64,
    /// Range-and-bearing communication range d_C.
    pub comm_range: f64,
}

impl Default for RobotParams {
    fn default() -> Self {
        Self { radius: 0.07, max_speed: 0.1, sensor_range: 1.0, comm_range: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldParams {
    /// Newtons per m/s of inward commanded velocity.
    pub force_gain: f64,
    pub per_robot_force_max: f64,
    pub linear_damping: f64,
    pub angular_damping: f64,
    pub contact_epsilon: f64,
}

impl Default for WorldParams {
    fn default() -> Self {
        Self {
            force_gain: 2.0,
            per_robot_force_max: 0.5,
            linear_damping: 2.0,
            angular_damping: 2.0,
            contact_epsilon: 0.02,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BarrierPopulation {
    /// Robots that completed caging.
    #[default]
    Cage,
    Swarm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CommsParams {
    pub range_noise: f64,
    pub bearing_noise: f64,
    pub drop_probability: f64,
    pub barrier_population: BarrierPopulation,
    /// Every this many ticks a full-state exchange repairs missed deltas.
    pub anti_entropy_period: u64,
}

impl Default for CommsParams {
    fn default() -> Self {
        Self {
            range_noise: 0.0,
            bearing_noise: 0.0,
            drop_probability: 0.0,
            barrier_population: BarrierPopulation::Cage,
            anti_entropy_period: 25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeploymentParams {
    /// Distance from the object centroid to the cluster centre (raised
    /// automatically when the cluster would touch the object).
    pub cluster_offset: f64,
    /// Cluster disk radius; derived from the robot count when absent.
    pub cluster_radius: Option<f64>,
    pub min_spacing: f64,
    /// Direction of the cluster from the object, degrees.
    pub direction_deg: f64,
}

impl Default for DeploymentParams {
    fn default() -> Self {
        Self { cluster_offset: 3.0, cluster_radius: None, min_spacing: 0.25, direction_deg: -90.0 }
    }
}

impl DeploymentParams {
    pub fn radius_for(&self, robot_count: usize) -> f64 {
        self.cluster_radius
            .unwrap_or_else(|| 0.3 + 0.17 * (robot_count as f64).sqrt() * (self.min_spacing / 0.25))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OrbitLaw {
    /// (‖x_n‖ − I_d)·x_n; the gain absorbs the extra length unit.
    #[default]
    Raw,
    /// (‖x_n‖ − I_d)·x_n/‖x_n‖.
    Normalized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CagingParams {
    /// Standoff from robot centre to object surface while caged.
    pub d_s: f64,
    pub i_d: f64,
    pub d_tol: f64,
    /// d_T as a multiple of I_d.
    pub d_t_factor: f64,
    pub k_t: f64,
    pub prox_threshold: f64,
    pub orbit_law: OrbitLaw,
    /// Auction window in ticks; derived from the graph diameter when absent.
    pub auction_ticks: Option<u64>,
    pub spacing_inflation: f64,
    pub avoidance_gain: f64,
    pub settle_ticks: u32,
}

impl Default for CagingParams {
    fn default() -> Self {
        Self {
            d_s: 0.35,
            i_d: 0.45,
            d_tol: 0.05,
            d_t_factor: 1.85,
            k_t: 30.0,
            prox_threshold: 0.7,
            orbit_law: OrbitLaw::Raw,
            auction_ticks: None,
            spacing_inflation: 1.1,
            avoidance_gain: 1.0,
            settle_ticks: 5,
        }
    }
}

impl CagingParams {
    pub fn d_t(&self) -> f64 {
        self.d_t_factor * self.i_d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FormationLaw {
    /// Displacement error between the recorded and current neighbour vectors.
    #[default]
    Displacement,
    /// Neighbour-vector quotient form, kept for comparison.
    Quotient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PushingParams {
    pub theta_p_deg: f64,
    pub k_cp_effective: f64,
    pub k_cp_ineffective: f64,
    pub d_tol: f64,
    pub k_f: f64,
    pub k_t: f64,
    pub barrier: f64,
    /// Formation neighbours are those within this multiple of I_d.
    pub k_nf: f64,
    pub formation_law: FormationLaw,
}

impl Default for PushingParams {
    fn default() -> Self {
        Self {
            theta_p_deg: 115.0,
            k_cp_effective: 40.0,
            k_cp_ineffective: 20.0,
            d_tol: 0.1,
            k_f: 40.0,
            k_t: 60.0,
            barrier: 0.9,
            k_nf: 1.5,
            formation_law: FormationLaw::Displacement,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RotatingParams {
    pub k_cr: f64,
    pub orient_tol_deg: f64,
    pub k_f: f64,
    pub k_r: f64,
    pub barrier: f64,
    /// Per-tick change in the sensed surface direction above which the
    /// change is attributed to sliding over a corner, degrees.
    pub max_yaw_rate_deg: f64,
}

impl Default for RotatingParams {
    fn default() -> Self {
        Self { k_cr: 450.0, orient_tol_deg: 5.72, k_f: 400.0, k_r: 600.0, barrier: 0.9, max_yaw_rate_deg: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub robot_count: usize,
    pub seeds: Vec<u64>,
    pub max_ticks: u64,
    /// Ticks a barrier may wait before the run is declared stalled.
    pub barrier_timeout_ticks: u64,
    pub dt: f64,
    /// Stop after caging terminates (no transport).
    pub caging_only: bool,
    pub object: ObjectSpec,
    pub path: PathSpec,
    pub robot: RobotParams,
    pub world: WorldParams,
    pub comms: CommsParams,
    pub deployment: DeploymentParams,
    pub caging: CagingParams,
    pub pushing: PushingParams,
    pub rotating: RotatingParams,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            robot_count: 12,
            seeds: vec![1],
            max_ticks: 40_000,
            barrier_timeout_ticks: 6_000,
            dt: 0.1,
            caging_only: false,
            object: ObjectSpec::default(),
            path: PathSpec::default(),
            robot: RobotParams::default(),
            world: WorldParams::default(),
            comms: CommsParams::default(),
            deployment: DeploymentParams::default(),
            caging: CagingParams::default(),
            pushing: PushingParams::default(),
            rotating: RotatingParams::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| ConfigError::ConfigSyntax(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn theta_p(&self) -> f64 {
        self.pushing.theta_p_deg.to_radians()
    }

    pub fn orient_tol(&self) -> f64 {
        self.rotating.orient_tol_deg.to_radians()
    }

    /// Checks every documented invariant, naming the first violated rule.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.robot_count == 0 {
            return Err(invalid("robot_count", "at least one robot is required"));
        }
        if !(self.dt > 0.0) {
            return Err(invalid("dt", "dt must be positive"));
        }
        if self.max_ticks == 0 {
            return Err(invalid("max_ticks", "must be positive"));
        }
        let poly = self.object.polygon_shape()?;
        let per = perimeter_length(&poly);
        if per <= 3.0 * self.caging.i_d {
            return Err(invalid(
                "perimeter",
                format!("object perimeter {per:.3} m must exceed 3·I_d = {:.3} m", 3.0 * self.caging.i_d),
            ));
        }
        if !(self.object.resolved_mass()? > 0.0) {
            return Err(invalid("mass", "object mass must be positive"));
        }
        let gains = [
            ("caging.k_t", self.caging.k_t),
            ("caging.i_d", self.caging.i_d),
            ("caging.d_s", self.caging.d_s),
            ("caging.d_tol", self.caging.d_tol),
            ("caging.d_t_factor", self.caging.d_t_factor),
            ("caging.prox_threshold", self.caging.prox_threshold),
            ("pushing.theta_p_deg", self.pushing.theta_p_deg),
            ("pushing.k_cp_effective", self.pushing.k_cp_effective),
            ("pushing.k_cp_ineffective", self.pushing.k_cp_ineffective),
            ("pushing.d_tol", self.pushing.d_tol),
            ("pushing.k_f", self.pushing.k_f),
            ("pushing.k_t", self.pushing.k_t),
            ("rotating.k_cr", self.rotating.k_cr),
            ("rotating.orient_tol_deg", self.rotating.orient_tol_deg),
            ("rotating.k_f", self.rotating.k_f),
            ("rotating.k_r", self.rotating.k_r),
            ("robot.radius", self.robot.radius),
            ("robot.max_speed", self.robot.max_speed),
            ("robot.sensor_range", self.robot.sensor_range),
            ("robot.comm_range", self.robot.comm_range),
            ("world.force_gain", self.world.force_gain),
            ("world.per_robot_force_max", self.world.per_robot_force_max),
            ("world.linear_damping", self.world.linear_damping),
            ("world.angular_damping", self.world.angular_damping),
            ("world.contact_epsilon", self.world.contact_epsilon),
        ];
        for (name, v) in gains {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid("positive_gain", format!("{name} must be positive, got {v}")));
            }
        }
        for (name, q) in [("pushing.barrier", self.pushing.barrier), ("rotating.barrier", self.rotating.barrier)] {
            if !(q > 0.0 && q <= 1.0) {
                return Err(invalid("quorum", format!("{name} must lie in (0, 1], got {q}")));
            }
        }
        if !(self.pushing.k_nf > 1.0) {
            return Err(invalid("k_nf", "formation neighbourhood factor must exceed 1"));
        }
        if self.caging.prox_threshold >= 1.0 {
            return Err(invalid("prox_threshold", "threshold must be below 1"));
        }
        if self.path.waypoints < 1 {
            return Err(invalid("path", "at least one waypoint is required"));
        }
        if !(0.0..1.0).contains(&self.comms.drop_probability) {
            return Err(invalid("drop_probability", "must lie in [0, 1)"));
        }
        if self.comms.range_noise < 0.0 || self.comms.bearing_noise < 0.0 {
            return Err(invalid("noise", "noise must be non-negative"));
        }
        if !(self.caging.spacing_inflation > 1.0) {
            return Err(invalid("spacing_inflation", "must exceed 1"));
        }
        Ok(())
    }

    /// Stable hash of the serialized config, for file naming.
    pub fn fingerprint(&self) -> String {
        // FNV-1a over the canonical TOML text.
        let mut h: u64 = 0xcbf29ce484222325;
        for b in self.to_toml_string().bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        format!("{h:016x}")
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ScenarioConfig, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
    ScenarioConfig::from_toml_str(&text)
}

/// Desired object pose at one step of the path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub position: Vec2,
    /// Desired yaw in [0, 2π).
    pub yaw: f64,
}

impl Waypoint {
    pub fn new(position: Vec2, yaw: f64) -> Self {
        Self { position, yaw: yaw.rem_euclid(2.0 * PI) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportPath {
    pub waypoints: Vec<Waypoint>,
}

impl TransportPath {
    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }
}

/// Benchmark path generator. Waypoint 0 is `start`; the heading is +y.
pub fn generate_path(kind: PathKind, waypoint_count: usize, spacing: f64, start: Vec2) -> TransportPath {
    generate_path_heading(kind, waypoint_count, spacing, start, PI / 2.0)
}

pub fn generate_path_heading(
    kind: PathKind,
    waypoint_count: usize,
    spacing: f64,
    start: Vec2,
    heading: f64,
) -> TransportPath {
    let mut waypoints = Vec::with_capacity(waypoint_count);
    let mut pos = start;
    for i in 0..waypoint_count {
        if i > 0 {
            let dir = match kind {
                PathKind::Zigzag => {
                    let sign = if i % 2 == 1 { 1.0 } else { -1.0 };
                    heading + sign * PI / 4.0
                }
                _ => heading,
            };
            pos += Vec2::from_angle(dir) * spacing;
        }
        let yaw = match kind {
            PathKind::StraightRot => (i / 3) as f64 * PI / 2.0,
            _ => 0.0,
        };
        waypoints.push(Waypoint::new(pos, yaw));
    }
    TransportPath { waypoints }
}
