//! Deterministic 2D simulator for multi-robot object caging and transport.
//!
//! Robots first cage a convex object one attachment at a time, guided by
//! auctions over a shared tuple space, then push and rotate it along a
//! sequence of waypoints while keeping formation.

pub mod allocation;
pub mod caging;
pub mod comms;
pub mod config;
pub mod geometry;
pub mod harness;
pub mod plot;
pub mod sim;
pub mod transport;
pub mod world;

pub use comms::{BarrierStatus, NeighborInfo, NoiseModel, Replica, StigmergyEntry};
pub use config::{load_config, ConfigError, ScenarioConfig, TransportPath, Waypoint};
pub use geometry::{ConvexPolygon, GeometryError, Vec2};
pub use world::{spawn_scenario, ObjectBody, ProximityScan, RobotBody, RobotId, WorldError, WorldState};
pub use harness::{export_metrics, run_experiment, ExperimentOptions, HarnessError};
pub use plot::{emit_plots, PlotError};
pub use sim::{run_single, RunMetrics, RunOptions, RunResult, SimError};

/// Any failure surfaced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Allocation(#[from] allocation::AllocationError),
    #[error(transparent)]
    Caging(#[from] caging::CagingError),
    #[error(transparent)]
    Transport(#[from] transport::TransportError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Plot(#[from] PlotError),
}
