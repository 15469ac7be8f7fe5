//! Shared fixtures for the benchmarks.

use cage_transport::comms::Replica;
use cage_transport::config::ScenarioConfig;
use cage_transport::geometry::{ConvexPolygon, Vec2};

/// Desk-scale transport scenario with a tick cap.
pub fn scenario(robot_count: usize, caging_only: bool, max_ticks: u64) -> ScenarioConfig {
    ScenarioConfig { robot_count, caging_only, max_ticks, ..ScenarioConfig::default() }
}

/// `n` replicas on a ring, each holding `keys` entries of its own.
pub fn ring_replicas(n: usize, keys: usize) -> (Vec<Replica<u64>>, Vec<Vec<usize>>) {
    let mut reps: Vec<Replica<u64>> = (0..n as u32).map(Replica::new).collect();
    for (i, r) in reps.iter_mut().enumerate() {
        for k in 0..keys {
            r.put(format!("k/{:03}", (i * keys + k) % (n * keys / 2).max(1)), (i * keys + k) as u64);
        }
    }
    let graph = (0..n).map(|i| vec![(i + n - 1) % n, (i + 1) % n]).collect();
    (reps, graph)
}

pub fn square(side: f64) -> ConvexPolygon {
    ConvexPolygon::rectangle(side, side).expect("positive side")
}

/// Ray origins on a circle around the origin, pointing inward.
pub fn inward_rays(count: usize, radius: f64) -> Vec<(Vec2, Vec2)> {
    (0..count)
        .map(|i| {
            let a = i as f64 / count as f64 * std::f64::consts::TAU;
            let o = Vec2::from_angle(a) * radius;
            (o, -Vec2::from_angle(a))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_are_well_formed() {
        let (reps, graph) = ring_replicas(8, 4);
        assert_eq!(reps.len(), 8);
        assert!(graph.iter().all(|n| n.len() == 2));
        assert_eq!(inward_rays(16, 3.0).len(), 16);
        assert!(scenario(12, true, 100).validate().is_ok());
        assert_eq!(square(2.0).len(), 4);
    }
}
