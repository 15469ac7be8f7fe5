//! Seed election, branch target spawning, auctions over the tuple space and
//! cage termination detection.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::caging::obstacle_vector;
use crate::comms::{propagate, Replica, Tuple};
use crate::geometry::{wrap_angle, Vec2};
use crate::world::{ProximityScan, RobotId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AllocationError {
    #[error("auction for task {task_id} closed without bids")]
    AuctionTimeout { task_id: u32 },
    #[error("robot {robot} is not attached to the object")]
    NotAttached { robot: RobotId },
    #[error("no robots to elect from")]
    NoRobots,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Branch {
    Seed,
    Left,
    Right,
}

impl Branch {
    /// +1 for counter-clockwise growth, −1 for clockwise.
    pub fn sign(self) -> f64 {
        match self {
            Branch::Right => -1.0,
            _ => 1.0,
        }
    }

    pub fn opposite(self) -> Branch {
        match self {
            Branch::Left => Branch::Right,
            Branch::Right => Branch::Left,
            Branch::Seed => Branch::Seed,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Branch::Seed => "S",
            Branch::Left => "L",
            Branch::Right => "R",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CagingTask {
    pub task_id: u32,
    pub branch: Branch,
    pub approx_target: Vec2,
    /// Robot whose attachment spawned this task; the seed task has none.
    pub parent_robot: Option<RobotId>,
    /// Position along the branch, 0 for the first task after the seed.
    pub depth: u32,
}

/// Ids follow spawn order within a branch: 0 for the seed, then
/// interleaved left/right by depth.
pub fn task_id_for(branch: Branch, depth: u32) -> u32 {
    match branch {
        Branch::Seed => 0,
        Branch::Left => 1 + 2 * depth,
        Branch::Right => 2 + 2 * depth,
    }
}

/// A task as published in the tuple space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskAnnouncement {
    pub task: CagingTask,
    pub round: u32,
    pub announced: u64,
    pub deadline: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bid {
    pub task_id: u32,
    pub round: u32,
    pub robot_id: RobotId,
    pub value: f64,
}

impl Bid {
    /// Lower value wins; equal values go to the lower robot id.
    pub fn beats(&self, other: &Bid) -> bool {
        match self.value.total_cmp(&other.value) {
            std::cmp::Ordering::Less => true,
            std::cmp::Ordering::Equal => self.robot_id < other.robot_id,
            std::cmp::Ordering::Greater => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttachmentRecord {
    pub robot_id: RobotId,
    pub task_id: u32,
    pub branch: Branch,
    pub depth: u32,
    pub attach_point: Vec2,
    /// Signed cumulative spacing from the seed (positive counter-clockwise).
    pub arclength: f64,
    /// Signed angle swept around the object's initial centroid since the seed.
    pub sweep: f64,
}

pub fn task_key(task_id: u32) -> String {
    format!("task/{task_id:04}")
}

pub fn bid_prefix(task_id: u32, round: u32) -> String {
    format!("bid/{task_id:04}/{round:03}/")
}

pub fn bid_key(task_id: u32, round: u32, robot: RobotId) -> String {
    format!("{}{robot:05}", bid_prefix(task_id, round))
}

pub fn assign_key(task_id: u32) -> String {
    format!("assign/{task_id:04}")
}

pub fn attach_key(task_id: u32) -> String {
    format!("attach/{task_id:04}")
}

pub const SPACING_KEY: &str = "spacing";
pub const TERMINATED_KEY: &str = "terminated";
pub const PATH_KEY: &str = "path";

pub fn compute_bid(position: Vec2, task: &CagingTask, round: u32, robot_id: RobotId) -> Bid {
    Bid { task_id: task.task_id, round, robot_id, value: position.distance(task.approx_target) }
}

/// Best bid known to a replica for one auction round.
pub fn best_bid(replica: &Replica<Tuple>, task_id: u32, round: u32) -> Option<Bid> {
    let prefix = bid_prefix(task_id, round);
    replica
        .scan_prefix(&prefix)
        .filter_map(|e| match e.value {
            Tuple::Bid(b) => Some(b),
            _ => None,
        })
        .fold(None, |best: Option<Bid>, b| match best {
            Some(cur) if !b.beats(&cur) => Some(cur),
            _ => Some(b),
        })
}

/// Writes `bid` unless a better one is already known. Returns true if written.
pub fn place_bid(replica: &mut Replica<Tuple>, bid: Bid) -> bool {
    if best_bid(replica, bid.task_id, bid.round).is_some_and(|b| b.robot_id != bid.robot_id && b.beats(&bid)) {
        return false;
    }
    let key = bid_key(bid.task_id, bid.round, bid.robot_id);
    if matches!(replica.get(&key), Some(Tuple::Bid(b)) if b.value == bid.value) {
        return false;
    }
    replica.put(key, Tuple::Bid(bid));
    true
}

/// Runs one auction to completion over a static graph: bidders write, the
/// replicas gossip for `t_a` rounds, then every bidder that believes it
/// holds the best bid claims the task. Concurrent claims resolve like any
/// other tuple conflict, in favour of the lower id.
pub fn run_auction(
    task: &CagingTask,
    replicas: &mut [Replica<Tuple>],
    graph: &[Vec<usize>],
    bidders: &[(RobotId, Vec2)],
    t_a: u32,
) -> Result<RobotId, AllocationError> {
    let round = 0;
    for _ in 0..t_a {
        for &(id, pos) in bidders {
            place_bid(&mut replicas[id as usize], compute_bid(pos, task, round, id));
        }
        propagate(replicas, graph);
    }
    let claimants: Vec<RobotId> = bidders
        .iter()
        .filter(|(id, _)| best_bid(&replicas[*id as usize], task.task_id, round).is_some_and(|b| b.robot_id == *id))
        .map(|(id, _)| *id)
        .collect();
    claimants.into_iter().min().ok_or(AllocationError::AuctionTimeout { task_id: task.task_id })
}

/// The robot nearest the object's initial centroid, ties to the lower id.
pub fn elect_seed(robots: &[(RobotId, Vec2)], object_centroid: Vec2) -> Result<RobotId, AllocationError> {
    let task = CagingTask { task_id: 0, branch: Branch::Seed, approx_target: object_centroid, parent_robot: None, depth: 0 };
    robots
        .iter()
        .map(|&(id, p)| compute_bid(p, &task, 0, id))
        .reduce(|a, b| if b.beats(&a) { b } else { a })
        .map(|b| b.robot_id)
        .ok_or(AllocationError::NoRobots)
}

/// Counter-clockwise tangent of the object boundary as seen from the robot.
pub fn boundary_tangent(scan: &ProximityScan) -> Option<Vec2> {
    obstacle_vector(scan).normalized().map(|n| -n.perp())
}

/// Next caging targets from an attached robot: both branches for the seed,
/// otherwise one further along the robot's own branch.
pub fn spawn_branch_targets(
    robot: RobotId,
    record: &AttachmentRecord,
    scan: &ProximityScan,
    prox_threshold: f64,
    i_d: f64,
) -> Result<Vec<CagingTask>, AllocationError> {
    if scan.max_reading() < prox_threshold {
        return Err(AllocationError::NotAttached { robot });
    }
    let tangent = boundary_tangent(scan).ok_or(AllocationError::NotAttached { robot })?;
    let make = |branch: Branch, depth: u32| CagingTask {
        task_id: task_id_for(branch, depth),
        branch,
        approx_target: record.attach_point + tangent * (branch.sign() * i_d),
        parent_robot: Some(robot),
        depth,
    };
    Ok(match record.branch {
        Branch::Seed => vec![make(Branch::Left, 0), make(Branch::Right, 0)],
        b => vec![make(b, record.depth + 1)],
    })
}

/// Record for a robot that attached at `point` while serving `task`.
pub fn attachment_record(
    robot: RobotId,
    task: &CagingTask,
    point: Vec2,
    parent: Option<&AttachmentRecord>,
    object_centroid: Vec2,
    i_d: f64,
) -> AttachmentRecord {
    let (arclength, sweep) = match parent {
        None => (0.0, 0.0),
        Some(p) => {
            let turn = wrap_angle((point - object_centroid).angle() - (p.attach_point - object_centroid).angle());
            (p.arclength + task.branch.sign() * i_d, p.sweep + turn)
        }
    };
    AttachmentRecord {
        robot_id: robot,
        task_id: task.task_id,
        branch: task.branch,
        depth: task.depth,
        attach_point: point,
        arclength,
        sweep,
    }
}

/// True when the branch tips are within `d_t` while no pair of
/// non-tip records from opposite branches is.
pub fn check_termination(left: &[AttachmentRecord], right: &[AttachmentRecord], d_t: f64) -> bool {
    let (Some(p), Some(q)) = (left.last(), right.last()) else {
        return false;
    };
    if p.attach_point.distance(q.attach_point) > d_t {
        return false;
    }
    let (l, r) = (&left[..left.len() - 1], &right[..right.len() - 1]);
    l.iter().all(|a| r.iter().all(|b| a.attach_point.distance(b.attach_point) > d_t))
}

/// Cross-branch pairs within `d_t`, as (left index, right index).
pub fn close_cross_pairs(left: &[AttachmentRecord], right: &[AttachmentRecord], d_t: f64) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (i, a) in left.iter().enumerate() {
        for (j, b) in right.iter().enumerate() {
            if a.attach_point.distance(b.attach_point) <= d_t {
                out.push((i, j));
            }
        }
    }
    out
}
