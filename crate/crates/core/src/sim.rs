//! Fixed-step planar simulator.
//!
//! The robot is a point mass driven by the planner's Cartesian command. The
//! command carries a viscous coefficient alongside the force; the low-level
//! loop applies that damping implicitly at every simulation step so stiff
//! velocity regulation stays stable at the 2 ms step. Objects answer contact
//! through the spring-damper-offset law and slide quasi-statically against
//! Coulomb friction.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimator::OperableVector;
use crate::geometry::{distance, Point2, Vec2};
use crate::numfmt::fmt9;
use crate::world::{in_target, local_energy_domain, objects_in_domain, ObjectBody, RobotBody, TargetDomain, WorldState};

pub const GRAVITY: f64 = 9.81;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub planner_period: f64,
    /// Standard deviation of the per-axis actuation noise (N).
    pub actuation_noise_std: f64,
    /// Actuator saturation on the commanded force magnitude (N).
    pub max_force: f64,
    pub proximity_enabled: bool,
    pub force_enabled: bool,
    /// Resistance of a sliding object beyond breakaway (N*s/m).
    pub sliding_resistance: f64,
    /// Penalty stiffness for object-object and object-wall contact (N/m).
    pub object_contact_stiffness: f64,
    /// Penalty stiffness of the table walls against the robot (N/m).
    pub wall_stiffness: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.002,
            planner_period: 0.02,
            actuation_noise_std: 0.0,
            max_force: 8.0,
            proximity_enabled: true,
            force_enabled: true,
            sliding_resistance: 20.0,
            object_contact_stiffness: 2000.0,
            wall_stiffness: 2000.0,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("time step must be positive")]
    BadStep,
    #[error("planner period {period} is not an integer multiple of dt {dt}")]
    BadPeriod { period: f64, dt: f64 },
}

impl SimConfig {
    pub fn steps_per_tick(&self) -> Result<usize, SimError> {
        if !(self.dt > 0.0) {
            return Err(SimError::BadStep);
        }
        let ratio = self.planner_period / self.dt;
        let n = ratio.round();
        if n < 1.0 || (ratio - n).abs() > 1e-9 * n.max(1.0) {
            return Err(SimError::BadPeriod {
                period: self.planner_period,
                dt: self.dt,
            });
        }
        Ok(n as usize)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactEvent {
    pub object_id: u32,
    /// Unit normal pointing from the object toward the robot.
    pub normal: Vec2,
    pub penetration: f64,
    /// Force exerted on the robot.
    pub force: Vec2,
    /// Robot velocity relative to the object.
    pub rel_velocity: Vec2,
    /// Contact point on the object's surface.
    pub point: Point2,
    /// Footprint radius reconstructed by the skin from the contact patch.
    pub object_radius: f64,
}

impl ContactEvent {
    /// Rate at which the interface is being compressed (positive inward).
    pub fn compression_rate(&self) -> f64 {
        -self.rel_velocity.dot(self.normal)
    }

    pub fn force_magnitude(&self) -> f64 {
        self.force.norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProximityReading {
    pub object_id: u32,
    /// Surface-to-surface gap between robot and object.
    pub clearance: f64,
    /// Unit vector from the robot toward the object.
    pub bearing: Vec2,
    pub radius: f64,
}

impl ProximityReading {
    pub fn center(&self, robot_position: Point2, robot_radius: f64) -> Point2 {
        robot_position + self.bearing * (self.clearance + robot_radius + self.radius)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SensorFrame {
    pub time: f64,
    pub position: Point2,
    pub velocity: Vec2,
    pub robot_radius: f64,
    pub proximity: Vec<ProximityReading>,
    pub contacts: Vec<ContactEvent>,
}

/// Normal force magnitude from the interface law `K*pen + D*max(v, 0) + C`,
/// zero out of contact and never adhesive.
pub fn contact_response(theta: &OperableVector, penetration: f64, rel_v_normal: f64) -> f64 {
    if penetration <= 0.0 {
        return 0.0;
    }
    (theta.k * penetration + theta.d * rel_v_normal.max(0.0) + theta.c).max(0.0)
}

/// Advances one object by one step under the resultant force `applied`.
///
/// `load` is the largest single contact force acting on the object and drives
/// the toppling latch; a toppled object is frozen for the rest of the episode.
pub fn object_update(obj: &ObjectBody, applied: Vec2, load: f64, cfg: &SimConfig) -> ObjectBody {
    let mut next = obj.clone();
    next.velocity = Vec2::ZERO;
    if obj.is_static() {
        return next;
    }
    if load > obj.topple_threshold {
        next.toppled = true;
        return next;
    }
    let breakaway = obj.friction * obj.mass * GRAVITY;
    let f = applied.norm();
    if f <= breakaway {
        return next;
    }
    let speed = (f - breakaway) / cfg.sliding_resistance;
    next.velocity = applied * (speed / f);
    next.disc.center += next.velocity * cfg.dt;
    next
}

/// One semi-implicit Euler step of `m*a = F_cmd + F_contact + noise - D*v`,
/// with the damping term taken at the new velocity.
pub fn robot_step(
    robot: &RobotBody,
    command_force: Vec2,
    damping: f64,
    contact_force: Vec2,
    noise: Vec2,
    cfg: &SimConfig,
) -> RobotBody {
    let applied = command_force.clamp_norm(cfg.max_force) + contact_force + noise;
    let dt = cfg.dt;
    let v = (robot.velocity + applied * (dt / robot.mass)) / (1.0 + dt * damping.max(0.0) / robot.mass);
    RobotBody {
        position: robot.position + v * dt,
        velocity: v,
        ..*robot
    }
}

/// Robot-object contacts in ascending object order.
pub fn robot_contacts(world: &WorldState) -> Vec<ContactEvent> {
    let r = &world.robot;
    let mut out = Vec::new();
    for o in &world.objects {
        let d = distance(r.position, o.pose());
        let pen = r.radius + o.disc.radius - d;
        if pen <= 0.0 {
            continue;
        }
        let normal = if d > 0.0 {
            (r.position - o.pose()) / d
        } else {
            Vec2::new(1.0, 0.0)
        };
        let rel_velocity = r.velocity - o.velocity;
        let f = contact_response(&o.theta_truth, pen, -rel_velocity.dot(normal));
        out.push(ContactEvent {
            object_id: o.id,
            normal,
            penetration: pen,
            force: normal * f,
            rel_velocity,
            point: o.pose() + normal * o.disc.radius,
            object_radius: o.disc.radius,
        });
    }
    out.sort_by_key(|c| c.object_id);
    out
}

fn wall_force(p: Point2, radius: f64, world: &WorldState, stiffness: f64) -> Vec2 {
    let t = &world.table;
    let mut f = Vec2::ZERO;
    f.x += stiffness * (radius - p.x).max(0.0);
    f.x -= stiffness * (p.x + radius - t.width).max(0.0);
    f.y += stiffness * (radius - p.y).max(0.0);
    f.y -= stiffness * (p.y + radius - t.height).max(0.0);
    f
}

/// Assembles what the robot's skin and proprioception report.
pub fn sense(world: &WorldState, cfg: &SimConfig, time: f64) -> SensorFrame {
    let r = &world.robot;
    let proximity = if cfg.proximity_enabled {
        let domain = local_energy_domain(r, world.r_p).expect("validated r_p");
        objects_in_domain(world, &domain)
            .into_iter()
            .map(|o| {
                let d = distance(r.position, o.pose());
                ProximityReading {
                    object_id: o.id,
                    clearance: d - o.disc.radius - r.radius,
                    bearing: (o.pose() - r.position).normalized().unwrap_or(Vec2::new(1.0, 0.0)),
                    radius: o.disc.radius,
                }
            })
            .collect()
    } else {
        Vec::new()
    };
    let contacts = if cfg.force_enabled { robot_contacts(world) } else { Vec::new() };
    SensorFrame {
        time,
        position: r.position,
        velocity: r.velocity,
        robot_radius: r.radius,
        proximity,
        contacts,
    }
}

// ---------------------------------------------------------------------------
// Planner interface

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntentMode {
    Approach,
    Probe,
}

impl IntentMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            IntentMode::Approach => "approach",
            IntentMode::Probe => "probe",
        }
    }
}

/// Cartesian actuation request: a force plus the viscous coefficient the
/// low-level loop applies against the robot velocity.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Command {
    pub force: Vec2,
    pub damping: f64,
}

impl Command {
    pub fn new(force: Vec2, damping: f64) -> Self {
        Self { force, damping }
    }

    /// Net actuation force at robot velocity `v`.
    pub fn total_force(&self, v: Vec2) -> Vec2 {
        self.force - v * self.damping
    }

    pub fn is_finite(&self) -> bool {
        self.force.is_finite() && self.damping.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickOutput {
    pub command: Command,
    pub intent: IntentMode,
    pub imagined: Option<Point2>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlannerFault {
    #[error("planner produced a non-finite command: {0}")]
    NonFinite(String),
    #[error("no path in the sensed free space")]
    NoPath,
    #[error("no feasible trajectory within the retry budget")]
    Infeasible,
}

/// A planner sees only sensor frames and the current goal.
pub trait Planner {
    fn name(&self) -> &'static str;
    fn tick(&mut self, frame: &SensorFrame, goal: &TargetDomain) -> Result<TickOutput, PlannerFault>;
}

// ---------------------------------------------------------------------------
// Episodes

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureCause {
    None,
    Force,
    Timeout,
    NoPath,
    Infeasible,
    PlannerFault,
}

impl FailureCause {
    pub fn as_str(&self) -> &'static str {
        match self {
            FailureCause::None => "none",
            FailureCause::Force => "force",
            FailureCause::Timeout => "timeout",
            FailureCause::NoPath => "no_path",
            FailureCause::Infeasible => "infeasible",
            FailureCause::PlannerFault => "planner_fault",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLimits {
    pub max_time: f64,
    pub force_fail: f64,
    /// Window after the first contact onset over which the impact peak is taken.
    pub impact_window: f64,
    pub record_trajectory: bool,
    /// The episode ends as a timeout once the robot has stayed within
    /// `stall_distance` of one spot for `stall_time` seconds.
    pub stall_time: f64,
    pub stall_distance: f64,
    /// Log every robot-object contact at every physics step.
    pub record_contacts: bool,
}

impl Default for EpisodeLimits {
    fn default() -> Self {
        Self {
            max_time: 90.0,
            force_fail: 10.0,
            impact_window: 0.1,
            record_trajectory: true,
            stall_time: f64::INFINITY,
            stall_distance: 0.001,
            record_contacts: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub t: f64,
    pub position: Point2,
    pub velocity: Vec2,
    pub command: Vec2,
    pub contact_force: f64,
    pub intent: IntentMode,
    pub imagined: Option<Point2>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub success: bool,
    pub failure_cause: FailureCause,
    pub path_cost: f64,
    pub peak_force: f64,
    /// Peak robot-object force shortly after the first contact onset.
    pub first_contact_peak: Option<f64>,
    pub duration: f64,
    pub targets_reached: usize,
    /// Objects the robot touched, ascending id.
    pub contacted: Vec<u32>,
    #[serde(skip)]
    pub trajectory: Vec<TickRecord>,
    #[serde(skip)]
    pub contact_log: Vec<ContactSample>,
}

/// One robot-object contact at one physics step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactSample {
    pub step: u64,
    pub object_id: u32,
    pub force: f64,
    pub rel_velocity: Vec2,
}

struct ImpactTracker {
    object: u32,
    onset: f64,
    peak: f64,
}

/// Runs one trial until every target is visited in order, a contact force
/// exceeds `limits.force_fail`, or time runs out.
pub fn run_episode(
    world: &mut WorldState,
    planner: &mut dyn Planner,
    cfg: &SimConfig,
    limits: &EpisodeLimits,
) -> TrialResult {
    let steps_per_tick = cfg.steps_per_tick().expect("valid sim config");
    let mut rng = ChaCha8Rng::seed_from_u64(world.seed ^ 0x5EED_0F_A11);
    let noise = (cfg.actuation_noise_std > 0.0).then(|| Normal::new(0.0, cfg.actuation_noise_std).unwrap());

    let mut result = TrialResult {
        success: false,
        failure_cause: FailureCause::Timeout,
        path_cost: 0.0,
        peak_force: 0.0,
        first_contact_peak: None,
        duration: 0.0,
        targets_reached: 0,
        contacted: Vec::new(),
        trajectory: Vec::new(),
        contact_log: Vec::new(),
    };
    let mut current = 0;
    while current < world.targets.len() && in_target(world.robot.position, &world.targets[current]) {
        current += 1;
    }
    if current == world.targets.len() {
        result.success = true;
        result.failure_cause = FailureCause::None;
        result.targets_reached = current;
        return result;
    }

    let mut command = Command::default();
    let mut impact: Option<ImpactTracker> = None;
    let mut step: u64 = 0;
    let max_steps = (limits.max_time / cfg.dt).ceil() as u64;
    let mut object_forces = vec![(Vec2::ZERO, 0.0f64); world.objects.len()];
    let mut rest = (world.robot.position, 0.0);

    loop {
        let t = step as f64 * cfg.dt;
        if step % steps_per_tick as u64 == 0 {
            let frame = sense(world, cfg, t);
            let out = match planner.tick(&frame, &world.targets[current]) {
                Ok(out) if out.command.is_finite() => out,
                Ok(_) => {
                    finish(&mut result, FailureCause::PlannerFault, t, current);
                    return result;
                }
                Err(fault) => {
                    let cause = match fault {
                        PlannerFault::NoPath => FailureCause::NoPath,
                        PlannerFault::Infeasible => FailureCause::Infeasible,
                        PlannerFault::NonFinite(_) => FailureCause::PlannerFault,
                    };
                    finish(&mut result, cause, t, current);
                    return result;
                }
            };
            command = out.command;
            if limits.record_trajectory {
                let contact_sum: f64 = robot_contacts(world).iter().map(|c| c.force_magnitude()).sum();
                result.trajectory.push(TickRecord {
                    t,
                    position: world.robot.position,
                    velocity: world.robot.velocity,
                    command: command.force.clamp_norm(cfg.max_force) - world.robot.velocity * command.damping,
                    contact_force: contact_sum,
                    intent: out.intent,
                    imagined: out.imagined,
                });
            }
        }

        // Contact forces at the current state.
        let contacts = robot_contacts(world);
        let mut on_robot = wall_force(world.robot.position, world.robot.radius, world, cfg.wall_stiffness);
        let wall_mag = on_robot.norm();
        result.peak_force = result.peak_force.max(wall_mag);
        for f in object_forces.iter_mut() {
            *f = (Vec2::ZERO, 0.0);
        }
        let mut over = wall_mag > limits.force_fail;
        for c in &contacts {
            let mag = c.force_magnitude();
            on_robot += c.force;
            result.peak_force = result.peak_force.max(mag);
            over |= mag > limits.force_fail;
            if limits.record_contacts {
                result.contact_log.push(ContactSample {
                    step,
                    object_id: c.object_id,
                    force: mag,
                    rel_velocity: c.rel_velocity,
                });
            }
            if let Err(pos) = result.contacted.binary_search(&c.object_id) {
                result.contacted.insert(pos, c.object_id);
            }
            match &mut impact {
                None => {
                    impact = Some(ImpactTracker {
                        object: c.object_id,
                        onset: t,
                        peak: mag,
                    })
                }
                Some(tr) if tr.object == c.object_id && t - tr.onset <= limits.impact_window => {
                    tr.peak = tr.peak.max(mag);
                }
                _ => {}
            }
            let idx = world.objects.iter().position(|o| o.id == c.object_id).unwrap();
            object_forces[idx].0 -= c.force;
            object_forces[idx].1 = object_forces[idx].1.max(mag);
        }
        if over {
            finish(&mut result, FailureCause::Force, t, current);
            result.first_contact_peak = impact.map(|i| i.peak);
            return result;
        }

        accumulate_object_forces(world, cfg, &mut object_forces);
        for (o, (net, load)) in world.objects.iter_mut().zip(&object_forces) {
            if !o.is_static() {
                *o = object_update(o, *net, *load, cfg);
            }
        }

        let n = match &noise {
            Some(d) => Vec2::new(d.sample(&mut rng), d.sample(&mut rng)),
            None => Vec2::ZERO,
        };
        let before = world.robot.position;
        world.robot = robot_step(&world.robot, command.force, command.damping, on_robot, n, cfg);
        result.path_cost += distance(before, world.robot.position);
        step += 1;
        let t = step as f64 * cfg.dt;

        while current < world.targets.len() && in_target(world.robot.position, &world.targets[current]) {
            current += 1;
        }
        if current == world.targets.len() {
            finish(&mut result, FailureCause::None, t, current);
            result.success = true;
            result.first_contact_peak = impact.map(|i| i.peak);
            return result;
        }
        if distance(world.robot.position, rest.0) > limits.stall_distance {
            rest = (world.robot.position, t);
        }
        if step >= max_steps || t - rest.1 >= limits.stall_time {
            finish(&mut result, FailureCause::Timeout, t, current);
            result.first_contact_peak = impact.map(|i| i.peak);
            return result;
        }
    }
}

fn finish(result: &mut TrialResult, cause: FailureCause, t: f64, reached: usize) {
    result.failure_cause = cause;
    result.duration = t;
    result.targets_reached = reached;
}

/// Adds object-object and object-wall penalty forces to the per-object
/// `(resultant, largest single load)` accumulators.
fn accumulate_object_forces(world: &WorldState, cfg: &SimConfig, acc: &mut [(Vec2, f64)]) {
    let k = cfg.object_contact_stiffness;
    let objs = &world.objects;
    for i in 0..objs.len() {
        if !objs[i].is_static() {
            let w = wall_force(objs[i].pose(), objs[i].disc.radius, world, k);
            acc[i].0 += w;
            acc[i].1 = acc[i].1.max(w.norm());
        }
        for j in (i + 1)..objs.len() {
            if objs[i].is_static() && objs[j].is_static() {
                continue;
            }
            let d = distance(objs[i].pose(), objs[j].pose());
            let pen = objs[i].disc.radius + objs[j].disc.radius - d;
            if pen <= 0.0 || d == 0.0 {
                continue;
            }
            let n = (objs[i].pose() - objs[j].pose()) / d;
            let f = n * (k * pen);
            let mag = k * pen;
            acc[i].0 += f;
            acc[i].1 = acc[i].1.max(mag);
            acc[j].0 -= f;
            acc[j].1 = acc[j].1.max(mag);
        }
    }
}

/// Writes the per-tick trajectory log.
pub fn write_trajectory_csv<W: Write>(records: &[TickRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "t,x,y,vx,vy,Fx_cmd,Fy_cmd,Fcontact,intent_mode,imagined_x,imagined_y")?;
    for r in records {
        let (ix, iy) = match r.imagined {
            Some(p) => (fmt9(p.x), fmt9(p.y)),
            None => (String::new(), String::new()),
        };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            fmt9(r.t),
            fmt9(r.position.x),
            fmt9(r.position.y),
            fmt9(r.velocity.x),
            fmt9(r.velocity.y),
            fmt9(r.command.x),
            fmt9(r.command.y),
            fmt9(r.contact_force),
            r.intent.as_str(),
            ix,
            iy
        )?;
    }
    Ok(())
}

/// Planner that replays a fixed command; used by tests and rollouts.
pub struct ScriptedPlanner<F: FnMut(&SensorFrame) -> Command> {
    pub script: F,
}

impl<F: FnMut(&SensorFrame) -> Command> Planner for ScriptedPlanner<F> {
    fn name(&self) -> &'static str {
        "scripted"
    }

    fn tick(&mut self, frame: &SensorFrame, _goal: &TargetDomain) -> Result<TickOutput, PlannerFault> {
        Ok(TickOutput {
            command: (self.script)(frame),
            intent: IntentMode::Approach,
            imagined: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::fixtures::{object, world};
    use crate::world::ObjectClass;

    #[test]
    fn contact_law_examples() {
        let th = OperableVector::new(500.0, 0.0, 0.0);
        assert_eq!(contact_response(&th, 0.0, 1.0), 0.0);
        assert!((contact_response(&th, 0.01, 0.0) - 5.0).abs() < 1e-12);
        let th = OperableVector::new(500.0, 20.0, 0.5);
        assert!((contact_response(&th, 0.01, 0.05) - 6.5).abs() < 1e-12);
        // separating contact contributes no damping and never pulls
        assert!((contact_response(&th, 0.01, -0.05) - 5.5).abs() < 1e-12);
        let sticky = OperableVector::new(100.0, 0.0, -2.0);
        assert_eq!(contact_response(&sticky, 0.001, 0.0), 0.0);
    }

    #[test]
    fn fixed_objects_never_move() {
        let cfg = SimConfig::default();
        let o = object(1, 0.5, 0.5, ObjectClass::Fixed);
        let next = object_update(&o, Vec2::new(50.0, 0.0), 50.0, &cfg);
        assert_eq!(next.pose(), o.pose());
        assert!(!next.toppled);
    }

    #[test]
    fn breakaway_threshold() {
        let cfg = SimConfig::default();
        let mut o = object(1, 0.5, 0.5, ObjectClass::Movable);
        o.mass = 0.3;
        o.friction = 0.5;
        let breakaway = 0.5 * 0.3 * GRAVITY;
        assert!((breakaway - 1.4715).abs() < 1e-12);
        let next = object_update(&o, Vec2::new(1.0, 0.0), 1.0, &cfg);
        assert_eq!(next.pose(), o.pose());
        let at = object_update(&o, Vec2::new(breakaway, 0.0), breakaway, &cfg);
        assert_eq!(at.pose(), o.pose());
        let next = object_update(&o, Vec2::new(2.0, 0.0), 2.0, &cfg);
        let expect_v = (2.0 - breakaway) / cfg.sliding_resistance;
        assert!((next.velocity.x - expect_v).abs() < 1e-12);
        assert!((next.pose().x - (0.5 + expect_v * cfg.dt)).abs() < 1e-15);
    }

    #[test]
    fn toppling_latch() {
        let cfg = SimConfig::default();
        let mut o = object(1, 0.5, 0.5, ObjectClass::Movable);
        o.topple_threshold = 10.0;
        let next = object_update(&o, Vec2::new(12.0, 0.0), 12.0, &cfg);
        assert!(next.toppled);
        assert_eq!(next.pose(), o.pose());
        let again = object_update(&next, Vec2::new(3.0, 0.0), 3.0, &cfg);
        assert_eq!(again.pose(), o.pose());
    }

    #[test]
    fn robot_step_examples() {
        let cfg = SimConfig::default();
        let r = RobotBody::new(Point2::new(0.1, 0.1), 0.02, 1.0);
        let still = robot_step(&r, Vec2::ZERO, 0.0, Vec2::ZERO, Vec2::ZERO, &cfg);
        assert_eq!(still.position, r.position);
        let moved = robot_step(&r, Vec2::new(1.0, 0.0), 0.0, Vec2::ZERO, Vec2::ZERO, &cfg);
        assert!((moved.velocity.x - 0.002).abs() < 1e-15);
        assert!((moved.position.x - 0.1 - 4e-6).abs() < 1e-15);
        let sat = robot_step(&r, Vec2::new(300.0, 400.0), 0.0, Vec2::ZERO, Vec2::ZERO, &cfg);
        assert!((sat.velocity.norm() / cfg.dt - cfg.max_force).abs() < 1e-9);
    }

    #[test]
    fn coasting_conserves_and_damping_dissipates_energy() {
        let cfg = SimConfig::default();
        let mut r = RobotBody::new(Point2::new(0.1, 0.1), 0.02, 1.0);
        r.velocity = Vec2::new(0.03, -0.01);
        let ke0 = r.velocity.norm_sq();
        let mut a = r;
        for _ in 0..100 {
            a = robot_step(&a, Vec2::ZERO, 0.0, Vec2::ZERO, Vec2::ZERO, &cfg);
        }
        assert_eq!(a.velocity.norm_sq(), ke0);
        let mut b = r;
        let mut prev = ke0;
        for _ in 0..100 {
            b = robot_step(&b, Vec2::ZERO, 3.0, Vec2::ZERO, Vec2::ZERO, &cfg);
            assert!(b.velocity.norm_sq() <= prev);
            prev = b.velocity.norm_sq();
        }
    }

    #[test]
    fn sensing_and_ablation() {
        let cfg = SimConfig::default();
        let empty = world(Point2::new(0.2, 0.45), vec![]);
        assert!(sense(&empty, &cfg, 0.0).proximity.is_empty());

        // object surface 0.1 m from the robot surface
        let w = world(Point2::new(0.2, 0.45), vec![object(7, 0.37, 0.45, ObjectClass::Fixed)]);
        let f = sense(&w, &cfg, 0.0);
        assert_eq!(f.proximity.len(), 1);
        let p = f.proximity[0];
        assert!((p.clearance - 0.1).abs() < 1e-12);
        assert!((p.bearing.x - 1.0).abs() < 1e-15 && p.bearing.y.abs() < 1e-15);
        assert!((p.center(f.position, 0.02).x - 0.37).abs() < 1e-12);

        let off = SimConfig {
            proximity_enabled: false,
            ..cfg
        };
        assert!(sense(&w, &off, 0.0).proximity.is_empty());
    }

    #[test]
    fn contact_events_are_well_formed() {
        let cfg = SimConfig::default();
        let mut w = world(Point2::new(0.2, 0.45), vec![object(2, 0.269, 0.45, ObjectClass::Fixed)]);
        w.robot.velocity = Vec2::new(0.01, 0.0);
        let f = sense(&w, &cfg, 0.0);
        assert_eq!(f.contacts.len(), 1);
        let c = f.contacts[0];
        assert!((c.normal.norm() - 1.0).abs() < 1e-9);
        assert!((c.penetration - 0.001).abs() < 1e-12);
        assert!((c.compression_rate() - 0.01).abs() < 1e-15);
        let expect = contact_response(&w.objects[0].theta_truth, c.penetration, 0.01);
        assert!((c.force.norm() - expect).abs() < 1e-12);
        assert!(c.force.x < 0.0);
        let off = SimConfig {
            force_enabled: false,
            ..cfg
        };
        assert!(sense(&w, &off, 0.0).contacts.is_empty());
    }

    #[test]
    fn period_must_divide() {
        let cfg = SimConfig {
            planner_period: 0.005,
            ..SimConfig::default()
        };
        assert!(cfg.steps_per_tick().is_err());
        assert_eq!(SimConfig::default().steps_per_tick().unwrap(), 10);
    }

    #[test]
    fn already_in_target() {
        let mut w = world(Point2::new(1.0, 0.45), vec![]);
        let mut p = ScriptedPlanner {
            script: |_: &SensorFrame| Command::default(),
        };
        let r = run_episode(&mut w, &mut p, &SimConfig::default(), &EpisodeLimits::default());
        assert!(r.success);
        assert_eq!(r.path_cost, 0.0);
        assert_eq!(r.failure_cause, FailureCause::None);
    }

    #[test]
    fn ramming_fails_iff_force_exceeds_threshold() {
        // velocity servo toward a rigid fixed object at 0.07 m/s
        for max_force in [4.0, 30.0] {
            let mut w = world(Point2::new(0.3, 0.45), vec![object(1, 0.5, 0.45, ObjectClass::Fixed)]);
            w.objects[0].theta_truth = OperableVector::new(5000.0, 20.0, 0.2);
            let cfg = SimConfig {
                max_force,
                ..SimConfig::default()
            };
            let mut p = ScriptedPlanner {
                script: |_: &SensorFrame| Command::new(Vec2::new(0.07 * 200.0, 0.0), 200.0),
            };
            let limits = EpisodeLimits {
                max_time: 15.0,
                ..EpisodeLimits::default()
            };
            let r = run_episode(&mut w, &mut p, &cfg, &limits);
            assert_eq!(r.failure_cause == FailureCause::Force, r.peak_force > 10.0, "{r:?}");
            assert_eq!(r.contacted, vec![1]);
            if max_force > 10.0 {
                assert_eq!(r.failure_cause, FailureCause::Force);
            } else {
                assert_eq!(r.failure_cause, FailureCause::Timeout);
            }
        }
    }

    #[test]
    fn nonfinite_command_is_a_fault() {
        let mut w = world(Point2::new(0.3, 0.45), vec![]);
        let mut p = ScriptedPlanner {
            script: |_: &SensorFrame| Command::new(Vec2::new(f64::NAN, 0.0), 1.0),
        };
        let r = run_episode(&mut w, &mut p, &SimConfig::default(), &EpisodeLimits::default());
        assert_eq!(r.failure_cause, FailureCause::PlannerFault);
        assert!(!r.success);
    }

    #[test]
    fn trajectory_csv_header() {
        let mut buf = Vec::new();
        let rec = TickRecord {
            t: 0.02,
            position: Point2::new(0.1, 0.2),
            velocity: Vec2::ZERO,
            command: Vec2::new(1.0, 0.0),
            contact_force: 0.0,
            intent: IntentMode::Probe,
            imagined: Some(Point2::new(0.3, 0.2)),
        };
        write_trajectory_csv(&[rec], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,x,y,vx,vy,Fx_cmd,Fy_cmd,Fcontact,intent_mode,imagined_x,imagined_y");
        assert_eq!(lines.next().unwrap(), "0.02,0.1,0.2,0,0,1,0,0,probe,0.3,0.2");
    }
}
