//! Probabilistic-roadmap baseline with compliant waypoint tracking.
//!
//! Sensed objects are remembered as obstacles. A seeded roadmap over the
//! known free space yields the shortest path, which is tracked by a capped
//! spring; the roadmap is rebuilt whenever the sensed obstacle set changes.

use std::collections::BTreeMap;

use petgraph::algo::astar;
use petgraph::graph::{NodeIndex, UnGraph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{distance, segment_hits_disc, Disc, Point2};
use crate::sim::{Command, IntentMode, Planner, PlannerFault, SensorFrame, TickOutput};
use crate::world::{Table, TargetDomain};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingConfig {
    pub nodes: usize,
    pub neighbours: usize,
    /// Clearance kept from obstacles beyond the robot radius.
    pub margin: f64,
    pub k_track: f64,
    /// Tracking force cap, safely below the failure threshold.
    pub max_track_force: f64,
    pub d_o: f64,
    pub v_max: f64,
    pub waypoint_tolerance: f64,
    /// Obstacle displacement that counts as a change of the sensed set.
    pub replan_shift: f64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            nodes: 300,
            neighbours: 10,
            margin: 0.005,
            k_track: 25.0,
            max_track_force: 5.0,
            d_o: 5.0,
            v_max: 0.07,
            waypoint_tolerance: 0.01,
            replan_shift: 0.01,
        }
    }
}

/// Shortest roadmap path from `start` to `goal` avoiding `obstacles`
/// (already inflated). Obstacles that contain the start are ignored so a robot
/// touching an object can still leave it.
pub fn roadmap_path(
    start: Point2,
    goal: Point2,
    obstacles: &[Disc],
    table: &Table,
    robot_radius: f64,
    cfg: &SamplingConfig,
    seed: u64,
) -> Option<Vec<Point2>> {
    let active: Vec<Disc> = obstacles.iter().copied().filter(|d| !d.contains(start)).collect();
    let free = |p: Point2| active.iter().all(|d| distance(p, d.center) > d.radius);
    if !free(goal) {
        return None;
    }
    let edge_free = |a: Point2, b: Point2| !active.iter().any(|d| segment_hits_disc(a, b, d.center, d.radius));
    if edge_free(start, goal) {
        return Some(vec![start, goal]);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts = vec![start, goal];
    let (lo, hi) = (robot_radius, (table.width - robot_radius, table.height - robot_radius));
    let mut attempts = 0;
    while pts.len() < cfg.nodes + 2 && attempts < cfg.nodes * 20 {
        attempts += 1;
        let p = Point2::new(rng.gen_range(lo..hi.0), rng.gen_range(lo..hi.1));
        if free(p) {
            pts.push(p);
        }
    }
    let mut g: UnGraph<Point2, f64> = UnGraph::with_capacity(pts.len(), pts.len() * cfg.neighbours);
    let idx: Vec<NodeIndex> = pts.iter().map(|p| g.add_node(*p)).collect();
    for i in 0..pts.len() {
        let mut near: Vec<(f64, usize)> = (0..pts.len())
            .filter(|&j| j != i)
            .map(|j| (distance(pts[i], pts[j]), j))
            .collect();
        near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(d, j) in near.iter().take(cfg.neighbours) {
            if g.find_edge(idx[i], idx[j]).is_none() && edge_free(pts[i], pts[j]) {
                g.add_edge(idx[i], idx[j], d);
            }
        }
    }
    let (_, path) = astar(&g, idx[0], |n| n == idx[1], |e| *e.weight(), |n| distance(g[n], goal))?;
    Some(path.into_iter().map(|n| g[n]).collect())
}

pub fn path_length(path: &[Point2]) -> f64 {
    path.windows(2).map(|w| distance(w[0], w[1])).sum()
}

pub struct SamplingPlanner {
    pub cfg: SamplingConfig,
    table: Table,
    seed: u64,
    obstacles: BTreeMap<u32, Disc>,
    path: Vec<Point2>,
    next: usize,
    planned_for: Option<Point2>,
    replans: u64,
}

impl SamplingPlanner {
    pub fn new(cfg: SamplingConfig, table: Table, seed: u64) -> Self {
        Self {
            cfg,
            table,
            seed,
            obstacles: BTreeMap::new(),
            path: Vec::new(),
            next: 0,
            planned_for: None,
            replans: 0,
        }
    }

    pub fn path(&self) -> &[Point2] {
        &self.path
    }

    pub fn replans(&self) -> u64 {
        self.replans
    }

    /// Merges the frame into the obstacle memory; true if anything changed.
    fn update_obstacles(&mut self, frame: &SensorFrame) -> bool {
        let mut changed = false;
        let shift = self.cfg.replan_shift;
        let mut seen = |id: u32, center: Point2, radius: f64, obstacles: &mut BTreeMap<u32, Disc>| {
            let d = Disc { center, radius };
            match obstacles.get(&id) {
                Some(old) if distance(old.center, center) < shift => {}
                _ => {
                    obstacles.insert(id, d);
                    changed = true;
                }
            }
        };
        for p in &frame.proximity {
            seen(p.object_id, p.center(frame.position, frame.robot_radius), p.radius, &mut self.obstacles);
        }
        for c in &frame.contacts {
            seen(c.object_id, c.point - c.normal * c.object_radius, c.object_radius, &mut self.obstacles);
        }
        changed
    }
}

impl Planner for SamplingPlanner {
    fn name(&self) -> &'static str {
        "sampling"
    }

    fn tick(&mut self, frame: &SensorFrame, goal: &TargetDomain) -> Result<TickOutput, PlannerFault> {
        let changed = self.update_obstacles(frame);
        if changed || self.planned_for != Some(goal.center) || self.path.is_empty() {
            let inflate = frame.robot_radius + self.cfg.margin;
            let discs: Vec<Disc> = self.obstacles.values().map(|d| d.inflated(inflate)).collect();
            let seed = self.seed.wrapping_add(self.replans);
            let path = roadmap_path(frame.position, goal.center, &discs, &self.table, frame.robot_radius, &self.cfg, seed)
                .ok_or(PlannerFault::NoPath)?;
            self.path = path;
            self.next = 1;
            self.planned_for = Some(goal.center);
            self.replans += 1;
        }
        while self.next + 1 < self.path.len()
            && distance(frame.position, self.path[self.next]) < self.cfg.waypoint_tolerance
        {
            self.next += 1;
        }
        let w = self.path[self.next.min(self.path.len() - 1)];
        let f = ((w - frame.position) * self.cfg.k_track).clamp_norm(self.cfg.max_track_force);
        let damping = self.cfg.d_o.max(self.cfg.max_track_force / self.cfg.v_max);
        Ok(TickOutput {
            command: Command::new(f, damping),
            intent: IntentMode::Approach,
            imagined: Some(w),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::ProximityReading;
    use crate::geometry::Vec2;

    #[test]
    fn empty_world_straight_path() {
        let t = Table::default();
        let p = roadmap_path(Point2::new(0.1, 0.1), Point2::new(1.0, 0.8), &[], &t, 0.02, &SamplingConfig::default(), 1)
            .unwrap();
        assert_eq!(p.len(), 2);
    }

    #[test]
    fn detours_are_longer_than_euclidean() {
        let t = Table::default();
        let cfg = SamplingConfig::default();
        let obs = [Disc::new(Point2::new(0.6, 0.45), 0.1).unwrap()];
        for seed in 0..10 {
            let (a, b) = (Point2::new(0.2, 0.45), Point2::new(1.0, 0.45));
            let p = roadmap_path(a, b, &obs, &t, 0.02, &cfg, seed).unwrap();
            assert!(path_length(&p) >= distance(a, b));
            for w in p.windows(2) {
                assert!(!segment_hits_disc(w[0], w[1], obs[0].center, obs[0].radius));
            }
        }
    }

    #[test]
    fn walled_goal_has_no_path() {
        let t = Table::default();
        let goal = Point2::new(1.0, 0.45);
        let ring: Vec<Disc> = (0..24)
            .map(|i| Disc::new(goal + Vec2::from_angle(i as f64 * std::f64::consts::TAU / 24.0) * 0.12, 0.04).unwrap())
            .collect();
        assert!(roadmap_path(Point2::new(0.2, 0.45), goal, &ring, &t, 0.02, &SamplingConfig::default(), 3).is_none());

        let mut planner = SamplingPlanner::new(SamplingConfig::default(), t, 0);
        let frame = SensorFrame {
            position: Point2::new(0.3, 0.45),
            robot_radius: 0.02,
            proximity: ring
                .iter()
                .enumerate()
                .map(|(i, d)| {
                    let v = d.center - Point2::new(0.3, 0.45);
                    ProximityReading {
                        object_id: i as u32,
                        clearance: v.norm() - d.radius - 0.02,
                        bearing: v.normalized().unwrap(),
                        radius: d.radius,
                    }
                })
                .collect(),
            ..SensorFrame::default()
        };
        let r = planner.tick(&frame, &TargetDomain::new(goal, 0.02));
        assert_eq!(r.unwrap_err(), PlannerFault::NoPath);
    }
}
