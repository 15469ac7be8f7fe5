//! Local communication: range-and-bearing neighbour sensing, a replicated
//! tuple space synchronised by neighbour gossip, and quorum barriers.
//!
//! Each robot owns one [`Replica`]. Writes are local and enqueued; an
//! exchange round ([`propagate`]) ships queued entries one hop. Conflicts on
//! a key resolve deterministically: higher version wins, and on equal
//! versions the lower writer id wins.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::allocation::{AttachmentRecord, Bid, TaskAnnouncement};
use crate::config::Waypoint;
use crate::geometry::{wrap_angle, Vec2};
use crate::world::{RobotId, WorldState};

/// Relative measurement of one neighbour, in the observer's frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeighborInfo {
    pub id: RobotId,
    pub range: f64,
    /// In (−π, π].
    pub bearing: f64,
}

impl NeighborInfo {
    /// Relative position vector of the neighbour.
    pub fn vector(&self) -> Vec2 {
        Vec2::from_polar(self.range, self.bearing)
    }
}

/// Zero-mean Gaussian range/bearing noise.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseModel {
    pub range_sigma: f64,
    pub bearing_sigma: f64,
}

impl NoiseModel {
    pub const NONE: NoiseModel = NoiseModel { range_sigma: 0.0, bearing_sigma: 0.0 };

    fn is_zero(&self) -> bool {
        self.range_sigma == 0.0 && self.bearing_sigma == 0.0
    }
}

/// Robots within `comm_range` of `robot_id`, sorted by id. Visibility is
/// decided on true distances; noise only perturbs the reported values.
pub fn neighbor_snapshot<R: Rng + ?Sized>(
    world: &WorldState,
    robot_id: RobotId,
    comm_range: f64,
    noise: NoiseModel,
    rng: &mut R,
) -> Vec<NeighborInfo> {
    let Some(me) = world.robots.get(robot_id as usize) else {
        return Vec::new();
    };
    let range_n = Normal::new(0.0, noise.range_sigma.max(1e-300)).expect("finite sigma");
    let bearing_n = Normal::new(0.0, noise.bearing_sigma.max(1e-300)).expect("finite sigma");
    world
        .robots
        .iter()
        .filter(|o| o.id != robot_id)
        .filter_map(|o| {
            let rel = o.position - me.position;
            let d = rel.norm();
            if d > comm_range {
                return None;
            }
            let (mut range, mut bearing) = (d, rel.angle());
            if !noise.is_zero() {
                range = (range + range_n.sample(rng)).max(0.0);
                bearing = wrap_angle(bearing + bearing_n.sample(rng));
            }
            Some(NeighborInfo { id: o.id, range, bearing: wrap_angle(bearing) })
        })
        .collect()
}

/// Undirected communication graph as sorted adjacency lists.
pub fn neighbor_graph(world: &WorldState, comm_range: f64) -> Vec<Vec<usize>> {
    let n = world.robots.len();
    let mut adj = vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            if world.robots[i].position.distance(world.robots[j].position) <= comm_range {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    adj
}

/// Longest shortest path (in hops) over all connected pairs.
pub fn graph_diameter(adj: &[Vec<usize>]) -> usize {
    let n = adj.len();
    let mut best = 0;
    let mut dist = vec![usize::MAX; n];
    let mut queue = std::collections::VecDeque::new();
    for s in 0..n {
        dist.iter_mut().for_each(|d| *d = usize::MAX);
        dist[s] = 0;
        queue.push_back(s);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    best = best.max(dist[v]);
                    queue.push_back(v);
                }
            }
        }
    }
    best
}

/// Values the robot controllers store in the tuple space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Tuple {
    Task(TaskAnnouncement),
    Bid(Bid),
    Assign { robot: RobotId, round: u32 },
    Attach(AttachmentRecord),
    Spacing(f64),
    Terminated(Vec<RobotId>),
    Path(Vec<Waypoint>),
    Position(Vec2),
    Yaw(f64),
    /// Barrier registration.
    Mark,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StigmergyEntry<V> {
    pub key: String,
    pub value: V,
    pub version: u64,
    pub writer_id: RobotId,
}

impl<V> StigmergyEntry<V> {
    /// True when `self` should replace `other` for the same key.
    pub fn dominates(&self, other: &StigmergyEntry<V>) -> bool {
        self.version > other.version || (self.version == other.version && self.writer_id < other.writer_id)
    }
}

/// One robot's copy of the tuple space.
#[derive(Debug, Clone, PartialEq)]
pub struct Replica<V> {
    owner: RobotId,
    entries: BTreeMap<String, StigmergyEntry<V>>,
    outbox: BTreeSet<String>,
}

impl<V: Clone> Replica<V> {
    pub fn new(owner: RobotId) -> Self {
        Self { owner, entries: BTreeMap::new(), outbox: BTreeSet::new() }
    }

    pub fn owner(&self) -> RobotId {
        self.owner
    }

    /// Local write: bumps the key's version and queues it for gossip.
    pub fn put(&mut self, key: impl Into<String>, value: V) -> u64 {
        let key = key.into();
        let version = self.entries.get(&key).map_or(0, |e| e.version) + 1;
        let entry = StigmergyEntry { key: key.clone(), value, version, writer_id: self.owner };
        self.entries.insert(key.clone(), entry);
        self.outbox.insert(key);
        version
    }

    pub fn get(&self, key: &str) -> Option<&V> {
        self.entries.get(key).map(|e| &e.value)
    }

    pub fn entry(&self, key: &str) -> Option<&StigmergyEntry<V>> {
        self.entries.get(key)
    }

    /// Merges a remote entry; returns true when it was accepted.
    pub fn merge(&mut self, incoming: &StigmergyEntry<V>) -> bool {
        let accept = self.entries.get(&incoming.key).is_none_or(|cur| incoming.dominates(cur));
        if accept {
            self.entries.insert(incoming.key.clone(), incoming.clone());
            self.outbox.insert(incoming.key.clone());
        }
        accept
    }

    /// Entries whose key starts with `prefix`, in key order.
    pub fn scan_prefix<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = &'a StigmergyEntry<V>> + 'a {
        self.entries
            .range(prefix.to_string()..)
            .take_while(move |(k, _)| k.starts_with(prefix))
            .map(|(_, e)| e)
    }

    pub fn count_prefix(&self, prefix: &str) -> usize {
        self.scan_prefix(prefix).count()
    }

    pub fn entries(&self) -> impl Iterator<Item = &StigmergyEntry<V>> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn drain_outbox(&mut self) -> Vec<StigmergyEntry<V>> {
        let keys = std::mem::take(&mut self.outbox);
        keys.into_iter().filter_map(|k| self.entries.get(&k).cloned()).collect()
    }

    fn snapshot(&self) -> Vec<StigmergyEntry<V>> {
        self.entries.values().cloned().collect()
    }
}

/// Message-loss model for an exchange round.
pub struct Loss<'a, R: Rng + ?Sized> {
    pub drop_probability: f64,
    pub rng: &'a mut R,
}

/// One gossip round: every replica sends its queued entries to each
/// neighbour. Returns the number of accepted updates.
pub fn propagate<V: Clone>(replicas: &mut [Replica<V>], graph: &[Vec<usize>]) -> usize {
    exchange(replicas, graph, false, None::<Loss<'_, rand::rngs::ThreadRng>>)
}

/// Like [`propagate`] but ships every entry (anti-entropy), repairing state
/// missed while robots were out of range.
pub fn propagate_full<V: Clone>(replicas: &mut [Replica<V>], graph: &[Vec<usize>]) -> usize {
    exchange(replicas, graph, true, None::<Loss<'_, rand::rngs::ThreadRng>>)
}

/// Exchange round with optional full-state shipping and message loss.
pub fn exchange<V: Clone, R: Rng + ?Sized>(
    replicas: &mut [Replica<V>],
    graph: &[Vec<usize>],
    full: bool,
    mut loss: Option<Loss<'_, R>>,
) -> usize {
    let outgoing: Vec<Vec<StigmergyEntry<V>>> = replicas
        .iter_mut()
        .map(|r| {
            let pending = r.drain_outbox();
            if full {
                r.snapshot()
            } else {
                pending
            }
        })
        .collect();
    let mut accepted = 0;
    for (sender, msgs) in outgoing.iter().enumerate() {
        if msgs.is_empty() {
            continue;
        }
        for &recv in &graph[sender] {
            if let Some(l) = loss.as_mut() {
                if l.drop_probability > 0.0 && l.rng.random::<f64>() < l.drop_probability {
                    // Keep the entries queued so a later round retries.
                    for m in msgs {
                        replicas[sender].outbox.insert(m.key.clone());
                    }
                    continue;
                }
            }
            for m in msgs {
                if replicas[recv].merge(m) {
                    accepted += 1;
                }
            }
        }
    }
    accepted
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BarrierStatus {
    Pass,
    Wait,
}

/// Registrations needed for a quorum; guards against `0.9 * 20 = 18.000…04`.
pub fn quorum_count(quorum: f64, population: usize) -> usize {
    ((quorum * population as f64) - 1e-9).ceil().max(0.0) as usize
}

pub fn barrier_key(barrier_id: &str, robot: RobotId) -> String {
    format!("barrier/{barrier_id}/{robot:05}")
}

/// Registers `robot` at `barrier_id` with a local write.
pub fn barrier_register<V: Clone>(replica: &mut Replica<V>, barrier_id: &str, value: V) {
    let key = barrier_key(barrier_id, replica.owner());
    if replica.get(&key).is_none() {
        replica.put(key, value);
    }
}

pub fn barrier_count<V: Clone>(replica: &Replica<V>, barrier_id: &str) -> usize {
    replica.count_prefix(&format!("barrier/{barrier_id}/"))
}

/// PASS once the locally known registrations reach the quorum.
pub fn barrier_step<V: Clone>(replica: &Replica<V>, barrier_id: &str, population: usize, quorum: f64) -> BarrierStatus {
    if barrier_count(replica, barrier_id) >= quorum_count(quorum, population) {
        BarrierStatus::Pass
    } else {
        BarrierStatus::Wait
    }
}
