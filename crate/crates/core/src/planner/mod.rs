//! The imagination-inspired motion planner and its baselines.
//!
//! Each tick the planner updates what it knows about nearby objects, decides
//! whether to keep approaching the goal or to probe a blocking object,
//! imagines the reachable state closest to the current intent inside the
//! convergence domain, and turns the energy landscape around that state into
//! a force command.

pub mod apf;
pub mod arm;
pub mod bspline;
pub mod sampling;

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::energy::{compose, evaluate, EnergyLandscape, FieldConfig, LocalView, SensedObject};
use crate::estimator::{
    classify_operability, estimate_theta, probe_schedule, ConfidenceReport, ConfidenceThresholds, Operability,
    OperableVector, PerceptionSample, ProbeProfile, RegressorBuffer, DEFAULT_WINDOW, EPS_MOVE,
};
use crate::geometry::{distance, point_segment_distance, Disc, Point2, Vec2};
use crate::sim::{Command, IntentMode, Planner, PlannerFault, SensorFrame, TickOutput};
use crate::world::{Table, TargetDomain};

pub use arm::{external_torque, joint_space_map, ArmError, ArmModel2R};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionIntent {
    pub mode: IntentMode,
    /// Goal center when approaching, contact point when probing.
    pub target: Point2,
    pub probe_object: Option<u32>,
}

impl MotionIntent {
    pub fn approach(goal: Point2) -> Self {
        Self {
            mode: IntentMode::Approach,
            target: goal,
            probe_object: None,
        }
    }

    pub fn probe(object: u32, contact_point: Point2) -> Self {
        Self {
            mode: IntentMode::Probe,
            target: contact_point,
            probe_object: Some(object),
        }
    }
}

/// Reachable set for the imagined state: the sensing disc minus inflated
/// inoperable objects, kept inside the table.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceDomain {
    pub base: Disc,
    pub excluded: Vec<Disc>,
    /// Admissible rectangle `[min, max]` for the robot center.
    pub bounds: (Point2, Point2),
}

impl ConvergenceDomain {
    pub fn contains(&self, p: Point2) -> bool {
        let (lo, hi) = self.bounds;
        self.base.contains(p)
            && p.x >= lo.x
            && p.x <= hi.x
            && p.y >= lo.y
            && p.y <= hi.y
            && self.excluded.iter().all(|d| distance(p, d.center) > d.radius)
    }

    /// Membership of the closure, with `slack` of tolerance on every bound.
    fn contains_closed(&self, p: Point2, slack: f64) -> bool {
        let (lo, hi) = self.bounds;
        distance(p, self.base.center) <= self.base.radius + slack
            && p.x >= lo.x - slack
            && p.x <= hi.x + slack
            && p.y >= lo.y - slack
            && p.y <= hi.y + slack
            && self.excluded.iter().all(|d| distance(p, d.center) >= d.radius - slack)
    }
}

/// Builds the convergence domain from the robot position and the discs of
/// objects believed inoperable (un-inflated).
pub fn convergence_domain(
    position: Point2,
    inoperable: &[Disc],
    r_p: f64,
    robot_radius: f64,
    margin: f64,
    table: &Table,
) -> ConvergenceDomain {
    let base = Disc {
        center: position,
        radius: r_p,
    };
    let excluded = inoperable
        .iter()
        .filter(|d| distance(d.center, position) < d.radius + robot_radius + margin + r_p)
        .map(|d| d.inflated(robot_radius + margin))
        .collect();
    ConvergenceDomain {
        base,
        excluded,
        bounds: (
            Point2::new(robot_radius, robot_radius),
            Point2::new(table.width - robot_radius, table.height - robot_radius),
        ),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImaginedState {
    pub point: Point2,
    /// No member of the domain could be found; the robot holds in place.
    pub degenerate: bool,
}

/// Projection of `target` onto the domain.
///
/// Members are returned unchanged. Otherwise the nearest of these analytic
/// candidates wins, ties going to the earliest: the robot position, the foot
/// points on every boundary circle and table edge, and the pairwise corners
/// of those boundary pieces. The nearest point of a region bounded by arcs and
/// lines is always among them; a polar grid of `radial x angular` samples is
/// only searched when none can be brought inside the domain.
pub fn imagine_state(
    target: Point2,
    domain: &ConvergenceDomain,
    robot: Point2,
    radial: usize,
    angular: usize,
) -> ImaginedState {
    if domain.contains(target) {
        return ImaginedState {
            point: target,
            degenerate: false,
        };
    }
    // Analytic candidates lie on the boundary, where the domain's strict
    // inequalities fail; they are ranked with closed membership and then
    // pulled just inside.
    let slack = domain.base.radius * 1e-12;
    let mut candidates: Vec<(f64, Point2)> = Vec::new();
    let mut push = |p: Point2| {
        if domain.contains_closed(p, slack) {
            candidates.push((distance(p, target), p));
        }
    };
    push(robot);
    let mut circles = vec![domain.base];
    circles.extend(domain.excluded.iter().copied());
    let (lo, hi) = domain.bounds;
    let lines = [(0, lo.x), (0, hi.x), (1, lo.y), (1, hi.y)];
    for c in &circles {
        let dir = (target - c.center).normalized().unwrap_or(Vec2::new(1.0, 0.0));
        push(c.center + dir * c.radius);
    }
    for &(axis, v) in &lines {
        push(if axis == 0 { Point2::new(v, target.y) } else { Point2::new(target.x, v) });
    }
    for (i, a) in circles.iter().enumerate() {
        for b in &circles[i + 1..] {
            for p in circle_intersections(a, b) {
                push(p);
            }
        }
        for &(axis, v) in &lines {
            for p in circle_line_intersections(a, axis, v) {
                push(p);
            }
        }
    }
    for &x in &[lo.x, hi.x] {
        for &y in &[lo.y, hi.y] {
            push(Point2::new(x, y));
        }
    }
    // Stable: equal distances keep candidate order.
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best: Option<(f64, Point2)> = candidates
        .iter()
        .find_map(|&(_, p)| pull_inside(p, domain))
        .map(|p| (distance(p, target), p));

    if best.is_none() {
        let base = domain.base;
        for i in 0..radial {
            let r = base.radius * (i + 1) as f64 / radial as f64;
            for j in 0..angular {
                let p = base.center + Vec2::from_angle(TAU * j as f64 / angular as f64) * r;
                if domain.contains(p) {
                    let d = distance(p, target);
                    if best.map_or(true, |(bd, _)| d < bd) {
                        best = Some((d, p));
                    }
                }
            }
        }
    }
    match best {
        Some((_, p)) => ImaginedState {
            point: p,
            degenerate: false,
        },
        None => ImaginedState {
            point: robot,
            degenerate: true,
        },
    }
}

/// A strict member within a hair of the boundary point `p`, searching ever
/// finer directions at a few tiny radii.
fn pull_inside(p: Point2, domain: &ConvergenceDomain) -> Option<Point2> {
    if domain.contains(p) {
        return Some(p);
    }
    for scale in [1e-9, 1e-7, 1e-5] {
        let r = domain.base.radius * scale;
        for k in 0..256 {
            let q = p + Vec2::from_angle(k as f64 * TAU / 256.0) * r;
            if domain.contains(q) {
                return Some(q);
            }
        }
    }
    None
}

fn circle_intersections(a: &Disc, b: &Disc) -> Vec<Point2> {
    let d = distance(a.center, b.center);
    if d == 0.0 || d > a.radius + b.radius || d < (a.radius - b.radius).abs() {
        return Vec::new();
    }
    let along = (d * d + a.radius * a.radius - b.radius * b.radius) / (2.0 * d);
    let h = (a.radius * a.radius - along * along).max(0.0).sqrt();
    let u = (b.center - a.center) / d;
    let m = a.center + u * along;
    vec![m + u.perp() * h, m - u.perp() * h]
}

/// Intersections of a circle with the line `x = v` (axis 0) or `y = v` (axis 1).
fn circle_line_intersections(c: &Disc, axis: usize, v: f64) -> Vec<Point2> {
    let (offset, along) = if axis == 0 {
        (v - c.center.x, c.center.y)
    } else {
        (v - c.center.y, c.center.x)
    };
    if offset.abs() > c.radius {
        return Vec::new();
    }
    let h = (c.radius * c.radius - offset * offset).sqrt();
    [along - h, along + h]
        .into_iter()
        .map(|w| if axis == 0 { Point2::new(v, w) } else { Point2::new(w, v) })
        .collect()
}

/// Whether a disc of radius `r_o` at `center` intrudes on the straight
/// corridor of half-width `robot_radius` from `from` to `to`.
///
/// Only the part of the object ahead of `from` counts: an object beside or
/// behind the robot does not block, even when touching it.
pub fn blocks_corridor(center: Point2, r_o: f64, from: Point2, to: Point2, robot_radius: f64) -> bool {
    let ab = to - from;
    if ab.norm_sq() == 0.0 || (center - from).dot(ab) <= 0.0 {
        return false;
    }
    point_segment_distance(center, from, to) < r_o + robot_radius
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpConfig {
    pub field: FieldConfig,
    pub r_p: f64,
    /// Peak force of the probe profile (N).
    pub probe_force: f64,
    pub probe_profile: ProbeProfile,
    /// Viscosity applied while probing (N*s/m).
    pub probe_damping: f64,
    pub thresholds: ConfidenceThresholds,
    pub eps_move: f64,
    /// Pushing force relative to the observed yield force.
    pub push_margin: f64,
    /// Ticks without progress before a pushed object is re-examined.
    pub stall_ticks: usize,
    /// Extra clearance kept from inoperable objects.
    pub exclusion_margin: f64,
    pub radial_samples: usize,
    pub angular_samples: usize,
}

impl Default for ImpConfig {
    fn default() -> Self {
        Self {
            field: FieldConfig::default(),
            r_p: 0.3,
            probe_force: 6.0,
            probe_profile: ProbeProfile::default(),
            probe_damping: 40.0,
            thresholds: ConfidenceThresholds::default(),
            eps_move: EPS_MOVE,
            push_margin: 1.3,
            stall_ticks: 50,
            exclusion_margin: 0.005,
            radial_samples: 32,
            angular_samples: 64,
        }
    }
}

/// Everything the planner has learned about one object.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectKnowledge {
    pub id: u32,
    pub center: Point2,
    pub radius: f64,
    pub class: Operability,
    pub samples: RegressorBuffer,
    pub theta: Option<OperableVector>,
    pub report: Option<ConfidenceReport>,
    pub last_sample: Option<PerceptionSample>,
    /// Probe force at which the object was first seen to move.
    pub yield_force: Option<f64>,
    pub push: f64,
    last_seen: u64,
}

impl ObjectKnowledge {
    fn new(id: u32, center: Point2, radius: f64) -> Self {
        Self {
            id,
            center,
            radius,
            class: Operability::Unknown,
            samples: RegressorBuffer::with_capacity(DEFAULT_WINDOW),
            theta: None,
            report: None,
            last_sample: None,
            yield_force: None,
            push: 0.0,
            last_seen: 0,
        }
    }

    pub fn disc(&self) -> Disc {
        Disc {
            center: self.center,
            radius: self.radius,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct ProbeState {
    object: u32,
    step: usize,
    start: Point2,
    normal: Vec2,
    start_penetration: f64,
    displacement: f64,
    peak_force: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct StallWatch {
    object: u32,
    anchor: Point2,
    ticks: usize,
}

/// Planner-side bookkeeping of one tick, for logs and tests.
#[derive(Debug, Clone, PartialEq)]
pub struct TickTrace {
    pub intent: MotionIntent,
    pub imagined: ImaginedState,
    pub landscape: Option<EnergyLandscape>,
    pub command: Command,
}

pub struct ImpPlanner {
    pub cfg: ImpConfig,
    table: Table,
    knowledge: BTreeMap<u32, ObjectKnowledge>,
    intent: Option<MotionIntent>,
    probe: Option<ProbeState>,
    stall: Option<StallWatch>,
    tick: u64,
    last_imagined: Option<Point2>,
    degenerate_ticks: u64,
    last_trace: Option<TickTrace>,
    keep_trace: bool,
}

impl ImpPlanner {
    pub fn new(cfg: ImpConfig, table: Table) -> Self {
        Self {
            cfg,
            table,
            knowledge: BTreeMap::new(),
            intent: None,
            probe: None,
            stall: None,
            tick: 0,
            last_imagined: None,
            degenerate_ticks: 0,
            last_trace: None,
            keep_trace: false,
        }
    }

    /// Retain the landscape of the latest tick for inspection.
    pub fn with_trace(mut self) -> Self {
        self.keep_trace = true;
        self
    }

    pub fn knowledge(&self) -> &BTreeMap<u32, ObjectKnowledge> {
        &self.knowledge
    }

    pub fn classification(&self, id: u32) -> Option<Operability> {
        self.knowledge.get(&id).map(|k| k.class)
    }

    pub fn intent(&self) -> Option<MotionIntent> {
        self.intent
    }

    pub fn last_trace(&self) -> Option<&TickTrace> {
        self.last_trace.as_ref()
    }

    /// Ticks on which no member of the convergence domain existed.
    pub fn degenerate_ticks(&self) -> u64 {
        self.degenerate_ticks
    }

    fn observe(&mut self, frame: &SensorFrame) {
        let tick = self.tick;
        for p in &frame.proximity {
            let c = p.center(frame.position, frame.robot_radius);
            let k = self
                .knowledge
                .entry(p.object_id)
                .or_insert_with(|| ObjectKnowledge::new(p.object_id, c, p.radius));
            k.center = c;
            k.radius = p.radius;
            k.last_seen = tick;
        }
        for c in &frame.contacts {
            let center = c.point - c.normal * c.object_radius;
            let k = self
                .knowledge
                .entry(c.object_id)
                .or_insert_with(|| ObjectKnowledge::new(c.object_id, center, c.object_radius));
            k.center = center;
            k.radius = c.object_radius;
            k.last_seen = tick;
            let s = PerceptionSample::new(c.penetration, c.compression_rate().max(0.0), c.force_magnitude());
            if k.samples.accumulate(s).is_ok() {
                k.last_sample = Some(s);
            }
        }
    }

    /// Updates the running probe and classifies its object when possible.
    fn advance_probe(&mut self, frame: &SensorFrame) {
        let Some(mut p) = self.probe else { return };
        let cfg = self.cfg;
        let Some(k) = self.knowledge.get_mut(&p.object) else {
            self.probe = None;
            return;
        };
        let pen = frame
            .contacts
            .iter()
            .find(|c| c.object_id == p.object)
            .map_or(0.0, |c| c.penetration);
        let advance = (frame.position - p.start).dot(-p.normal);
        let moved = advance - (pen - p.start_penetration);
        p.displacement = p.displacement.max(moved);
        if p.displacement >= cfg.eps_move && k.yield_force.is_none() {
            k.yield_force = Some(p.peak_force);
        }
        // The peak only counts as delivered once the full-force hold has had
        // time to overcome static friction; a ramp that merely touches it
        // proves nothing.
        let pr = cfg.probe_profile;
        let sustained = if p.step >= pr.ramp_ticks + pr.hold_ticks + pr.hold_ticks / 2 {
            p.peak_force
        } else {
            p.peak_force.min(0.5 * cfg.probe_force)
        };
        if let Ok((theta, report)) = estimate_theta(&k.samples, &cfg.thresholds) {
            k.theta = Some(theta);
            k.report = Some(report);
            let class = classify_operability(&theta, &report, p.displacement, sustained, cfg.probe_force, cfg.eps_move);
            k.class = class;
        }
        if k.class == Operability::Unknown && p.step >= cfg.probe_profile.total_ticks() {
            // Out of budget: treat as an obstacle rather than stall the mission.
            k.class = Operability::Inoperable;
        }
        if k.class == Operability::Operable {
            let yield_force = k.yield_force.unwrap_or(cfg.probe_force);
            k.push = (yield_force * cfg.push_margin).min(cfg.probe_force);
        }
        self.probe = Some(p);
    }

    /// Re-examines an operable object the robot can no longer move.
    fn watch_stall(&mut self, frame: &SensorFrame, goal: Point2) {
        let pushing = frame.contacts.iter().find(|c| {
            self.knowledge.get(&c.object_id).is_some_and(|k| {
                k.class == Operability::Operable && self.is_blocking(k.center, k.radius, frame, goal)
            })
        });
        let Some(c) = pushing else {
            self.stall = None;
            return;
        };
        let w = match self.stall {
            Some(mut w) if w.object == c.object_id => {
                w.ticks += 1;
                if distance(frame.position, w.anchor) >= self.cfg.eps_move {
                    w.anchor = frame.position;
                    w.ticks = 0;
                }
                w
            }
            _ => StallWatch {
                object: c.object_id,
                anchor: frame.position,
                ticks: 0,
            },
        };
        if w.ticks >= self.cfg.stall_ticks {
            if let Some(k) = self.knowledge.get_mut(&w.object) {
                k.class = Operability::Unknown;
                k.yield_force = None;
                k.push = 0.0;
            }
            self.stall = None;
        } else {
            self.stall = Some(w);
        }
    }

    fn is_blocking(&self, center: Point2, radius: f64, frame: &SensorFrame, goal: Point2) -> bool {
        let r = frame.robot_radius;
        blocks_corridor(center, radius, frame.position, goal, r)
            || self
                .last_imagined
                .is_some_and(|x| blocks_corridor(center, radius, frame.position, x, r))
    }

    /// Perception-motion coordination: approach by default, probe an unknown
    /// object the robot has run into while it stands in the way.
    pub fn coordinate_intent(&mut self, frame: &SensorFrame, goal: Point2) -> MotionIntent {
        if let Some(p) = self.probe {
            let still_unknown = self
                .knowledge
                .get(&p.object)
                .is_some_and(|k| k.class == Operability::Unknown);
            if still_unknown {
                let point = frame
                    .contacts
                    .iter()
                    .find(|c| c.object_id == p.object)
                    .map_or(p.start, |c| c.point);
                return MotionIntent::probe(p.object, point);
            }
            self.probe = None;
        }
        for c in &frame.contacts {
            let Some(k) = self.knowledge.get(&c.object_id) else { continue };
            if k.class == Operability::Unknown && self.is_blocking(k.center, k.radius, frame, goal) {
                self.probe = Some(ProbeState {
                    object: c.object_id,
                    step: 0,
                    start: frame.position,
                    normal: c.normal,
                    start_penetration: c.penetration,
                    displacement: 0.0,
                    peak_force: 0.0,
                });
                return MotionIntent::probe(c.object_id, c.point);
            }
        }
        MotionIntent::approach(goal)
    }

    fn local_view(&self, frame: &SensorFrame, goal: &TargetDomain) -> LocalView {
        let r = frame.robot_radius;
        let objects = self
            .knowledge
            .values()
            .filter(|k| {
                k.last_seen == self.tick
                    || (k.class == Operability::Inoperable
                        && distance(k.center, frame.position) < k.radius + self.cfg.r_p)
            })
            .map(|k| {
                let clearance = distance(k.center, frame.position) - k.radius - r;
                let in_contact = clearance < 0.002;
                SensedObject {
                    id: k.id,
                    center: k.center,
                    radius: k.radius,
                    clearance,
                    class: k.class,
                    blocking: in_contact && self.is_blocking(k.center, k.radius, frame, goal.center),
                    push: k.push,
                    theta: k.theta,
                    last_sample: k.last_sample,
                }
            })
            .collect();
        LocalView {
            position: frame.position,
            robot_radius: r,
            goal: Disc {
                center: goal.center,
                radius: goal.radius,
            },
            r_p: self.cfg.r_p,
            objects,
        }
    }

    /// One planning cycle: returns the actuation command for this tick.
    pub fn plan_tick(&mut self, frame: &SensorFrame, goal: &TargetDomain) -> Result<TickOutput, PlannerFault> {
        self.tick += 1;
        self.observe(frame);
        self.advance_probe(frame);
        self.watch_stall(frame, goal.center);
        let intent = self.coordinate_intent(frame, goal.center);
        self.intent = Some(intent);

        let inoperable: Vec<Disc> = self
            .knowledge
            .values()
            .filter(|k| k.class == Operability::Inoperable)
            .map(|k| k.disc())
            .collect();
        let domain = convergence_domain(
            frame.position,
            &inoperable,
            self.cfg.r_p,
            frame.robot_radius,
            self.cfg.exclusion_margin,
            &self.table,
        );

        let (command, imagined, landscape) = match intent.mode {
            IntentMode::Probe => {
                let p = self.probe.as_mut().expect("probe intent has a probe");
                let f = probe_schedule(p.step, self.cfg.probe_force, &self.cfg.probe_profile);
                p.peak_force = p.peak_force.max(f);
                p.step += 1;
                let cmd = Command::new(-p.normal * f, self.cfg.probe_damping);
                let im = ImaginedState {
                    point: intent.target,
                    degenerate: false,
                };
                (cmd, im, None)
            }
            IntentMode::Approach => {
                let im = imagine_state(
                    intent.target,
                    &domain,
                    frame.position,
                    self.cfg.radial_samples,
                    self.cfg.angular_samples,
                );
                if im.degenerate {
                    self.degenerate_ticks += 1;
                }
                let view = self.local_view(frame, goal);
                let landscape = compose(&view, im.point, &self.cfg.field)
                    .map_err(|e| PlannerFault::NonFinite(e.to_string()))?;
                let ev = evaluate(&landscape, frame.position, frame.velocity)
                    .map_err(|e| PlannerFault::NonFinite(e.to_string()))?;
                (Command::new(ev.conservative, ev.damping), im, Some(landscape))
            }
        };
        if !command.is_finite() {
            return Err(PlannerFault::NonFinite(format!("{command:?}")));
        }
        self.last_imagined = Some(imagined.point);
        if self.keep_trace {
            self.last_trace = Some(TickTrace {
                intent,
                imagined,
                landscape,
                command,
            });
        }
        Ok(TickOutput {
            command,
            intent: intent.mode,
            imagined: Some(imagined.point),
        })
    }
}

impl Planner for ImpPlanner {
    fn name(&self) -> &'static str {
        "imp"
    }

    fn tick(&mut self, frame: &SensorFrame, goal: &TargetDomain) -> Result<TickOutput, PlannerFault> {
        self.plan_tick(frame, goal)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::critical_damping;
    use crate::sim::{ContactEvent, ProximityReading};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn frame(p: Point2) -> SensorFrame {
        SensorFrame {
            time: 0.0,
            position: p,
            velocity: Vec2::ZERO,
            robot_radius: 0.02,
            proximity: vec![],
            contacts: vec![],
        }
    }

    fn contact(id: u32, robot: Point2, center: Point2, radius: f64) -> ContactEvent {
        let n = (robot - center).normalized().unwrap();
        ContactEvent {
            object_id: id,
            normal: n,
            penetration: 0.0005,
            force: n * 1.0,
            rel_velocity: Vec2::ZERO,
            point: center + n * radius,
            object_radius: radius,
        }
    }

    #[test]
    fn domain_without_inoperables_is_full_disc() {
        let t = Table::default();
        let d = convergence_domain(Point2::new(0.6, 0.45), &[], 0.3, 0.02, 0.0, &t);
        assert!(d.excluded.is_empty());
        assert!(d.contains(Point2::new(0.6, 0.45)));
        assert!(d.contains(Point2::new(0.85, 0.45)));
        assert!(!d.contains(Point2::new(0.95, 0.45)));
    }

    #[test]
    fn domain_membership_grid_oracle() {
        let t = Table::default();
        let robot = Point2::new(0.5, 0.4);
        let obs = [
            Disc::new(Point2::new(0.6, 0.45), 0.05).unwrap(),
            Disc::new(Point2::new(0.35, 0.3), 0.05).unwrap(),
        ];
        let d = convergence_domain(robot, &obs, 0.3, 0.02, 0.0, &t);
        assert!(!d.contains(Point2::new(0.6, 0.45)));
        assert!(!d.contains(Point2::new(0.6, 0.515)));
        for i in 0..200 {
            for j in 0..200 {
                let p = Point2::new(0.2 + 0.6 * i as f64 / 199.0, 0.1 + 0.6 * j as f64 / 199.0);
                let in_base = ((p.x - 0.5).powi(2) + (p.y - 0.4).powi(2)).sqrt() <= 0.3;
                let in_table = p.x >= 0.02 && p.x <= 1.18 && p.y >= 0.02 && p.y <= 0.88;
                let free = obs
                    .iter()
                    .all(|o| ((p.x - o.center.x).powi(2) + (p.y - o.center.y).powi(2)).sqrt() > 0.07);
                assert_eq!(d.contains(p), in_base && in_table && free, "{p:?}");
            }
        }
    }

    #[test]
    fn imagine_member_and_projection() {
        let t = Table::default();
        let robot = Point2::new(0.4, 0.45);
        let d = convergence_domain(robot, &[Disc::new(Point2::new(0.55, 0.45), 0.05).unwrap()], 0.3, 0.02, 0.0, &t);
        let inside = Point2::new(0.45, 0.5);
        assert_eq!(imagine_state(inside, &d, robot, 32, 64).point, inside);

        // target right behind the excluded disc
        let target = Point2::new(0.58, 0.45);
        let im = imagine_state(target, &d, robot, 32, 64);
        assert!(d.contains(im.point));
        assert!((distance(im.point, Point2::new(0.55, 0.45)) - 0.07).abs() < 1e-6);
        assert!((distance(im.point, target) - 0.04).abs() < 1e-6);
        // idempotent
        assert_eq!(imagine_state(im.point, &d, robot, 32, 64).point, im.point);
    }

    #[test]
    fn imagine_far_target_lands_on_sensing_rim() {
        let t = Table::default();
        let robot = Point2::new(0.2, 0.45);
        let d = convergence_domain(robot, &[], 0.3, 0.02, 0.0, &t);
        let im = imagine_state(Point2::new(1.0, 0.45), &d, robot, 32, 64);
        assert!((im.point.x - 0.5).abs() < 1e-9 && (im.point.y - 0.45).abs() < 1e-12);
    }

    #[test]
    fn imagine_degenerate_holds_position() {
        let t = Table::default();
        let robot = Point2::new(0.4, 0.45);
        let d = convergence_domain(robot, &[Disc::new(robot, 0.5).unwrap()], 0.3, 0.02, 0.0, &t);
        let im = imagine_state(Point2::new(1.0, 0.45), &d, robot, 8, 16);
        assert!(im.degenerate);
        assert_eq!(im.point, robot);
    }

    #[test]
    fn imagine_matches_grid_oracle() {
        let t = Table::default();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let robot = Point2::new(rng.gen_range(0.1..1.1), rng.gen_range(0.1..0.8));
            let obs: Vec<Disc> = (0..3)
                .map(|_| {
                    let c = robot + Vec2::from_angle(rng.gen_range(0.0..TAU)) * rng.gen_range(0.1..0.3);
                    Disc::new(c, 0.05).unwrap()
                })
                .collect();
            let d = convergence_domain(robot, &obs, 0.3, 0.02, 0.005, &t);
            let target = robot + Vec2::from_angle(rng.gen_range(0.0..TAU)) * rng.gen_range(0.0..0.6);
            let im = imagine_state(target, &d, robot, 32, 64);
            if d.contains(target) {
                assert_eq!(im.point, target);
                continue;
            }
            assert!(d.contains(im.point));
            let mut oracle = f64::INFINITY;
            for i in 0..=150 {
                for j in 0..=150 {
                    let p = Point2::new(robot.x - 0.3 + 0.6 * i as f64 / 150.0, robot.y - 0.3 + 0.6 * j as f64 / 150.0);
                    if d.contains(p) {
                        oracle = oracle.min(distance(p, target));
                    }
                }
            }
            assert!(distance(im.point, target) <= oracle + 0.3 / 32.0);
        }
    }

    #[test]
    fn empty_world_command_is_attraction_minus_viscosity() {
        let cfg = ImpConfig::default();
        let mut p = ImpPlanner::new(cfg, Table::default());
        let mut f = frame(Point2::new(0.3, 0.45));
        f.velocity = Vec2::new(0.02, 0.0);
        let goal = TargetDomain::new(Point2::new(0.5, 0.45), 0.02);
        let out = p.plan_tick(&f, &goal).unwrap();
        let d = critical_damping(cfg.field.k_p, 0.2, cfg.field.v_max, cfg.field.d_o);
        let total = out.command.total_force(f.velocity);
        assert!((total.x - (cfg.field.k_p * 0.2 - d * 0.02)).abs() < 1e-9);
        assert!(total.y.abs() < 1e-12);
        assert_eq!(out.intent, IntentMode::Approach);
        assert_eq!(out.imagined, Some(goal.center));
    }

    #[test]
    fn blocking_contact_starts_probe_at_zero_force() {
        let mut p = ImpPlanner::new(ImpConfig::default(), Table::default());
        let goal = TargetDomain::new(Point2::new(1.0, 0.45), 0.02);
        let robot = Point2::new(0.4, 0.45);
        let center = Point2::new(0.4695, 0.45);
        let mut f = frame(robot);
        f.proximity.push(ProximityReading {
            object_id: 3,
            clearance: -0.0005,
            bearing: Vec2::new(1.0, 0.0),
            radius: 0.05,
        });
        f.contacts.push(contact(3, robot, center, 0.05));
        let out = p.plan_tick(&f, &goal).unwrap();
        assert_eq!(out.intent, IntentMode::Probe);
        assert_eq!(out.command.force, Vec2::ZERO);
        assert_eq!(p.intent().unwrap().probe_object, Some(3));
    }

    #[test]
    fn side_contact_does_not_probe() {
        let mut p = ImpPlanner::new(ImpConfig::default(), Table::default());
        let goal = TargetDomain::new(Point2::new(1.0, 0.45), 0.02);
        let robot = Point2::new(0.4, 0.45);
        let center = Point2::new(0.4, 0.5195);
        let mut f = frame(robot);
        f.contacts.push(contact(3, robot, center, 0.05));
        assert_eq!(p.plan_tick(&f, &goal).unwrap().intent, IntentMode::Approach);
    }

    #[test]
    fn free_space_approach() {
        let mut p = ImpPlanner::new(ImpConfig::default(), Table::default());
        let goal = TargetDomain::new(Point2::new(1.0, 0.45), 0.02);
        let out = p.plan_tick(&frame(Point2::new(0.2, 0.2)), &goal).unwrap();
        assert_eq!(out.intent, IntentMode::Approach);
        assert_eq!(p.intent().unwrap(), MotionIntent::approach(goal.center));
    }

    #[test]
    fn identical_streams_identical_commands() {
        let goal = TargetDomain::new(Point2::new(1.0, 0.45), 0.02);
        let run = || {
            let mut p = ImpPlanner::new(ImpConfig::default(), Table::default());
            let mut out = Vec::new();
            for i in 0..20 {
                let mut f = frame(Point2::new(0.2 + 0.001 * i as f64, 0.45));
                f.proximity.push(ProximityReading {
                    object_id: 1,
                    clearance: 0.1 - 0.001 * i as f64,
                    bearing: Vec2::new(1.0, 0.0),
                    radius: 0.05,
                });
                out.push(p.plan_tick(&f, &goal).unwrap().command);
            }
            out
        };
        assert_eq!(run(), run());
    }
}
