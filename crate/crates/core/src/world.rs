//! Workspace topology: table, robot, objects and target domains, plus the
//! scenario file that carries them between tools.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimator::OperableVector;
use crate::geometry::{distance, Disc, Point2, Vec2};

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("proximity radius must be positive, got {0}")]
    BadProximityRadius(f64),
    #[error("point ({x}, {y}) lies outside the table")]
    OutsideTable { x: f64, y: f64 },
    #[error("invalid world: {0}")]
    Invalid(String),
    #[error("scenario parse error: {0}")]
    Parse(#[from] serde_json::Error),
}

/// Axis-aligned table `[0, width] x [0, height]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Table {
    #[serde(rename = "w")]
    pub width: f64,
    #[serde(rename = "h")]
    pub height: f64,
}

impl Default for Table {
    fn default() -> Self {
        Self {
            width: 1.2,
            height: 0.9,
        }
    }
}

impl Table {
    pub fn contains(&self, p: Point2) -> bool {
        p.x >= 0.0 && p.x <= self.width && p.y >= 0.0 && p.y <= self.height
    }

    /// Whether a disc of `radius` centred at `p` fits inside the walls.
    pub fn fits(&self, p: Point2, radius: f64) -> bool {
        p.x - radius >= 0.0
            && p.x + radius <= self.width
            && p.y - radius >= 0.0
            && p.y + radius <= self.height
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetDomain {
    pub center: Point2,
    pub radius: f64,
}

impl TargetDomain {
    pub fn new(center: Point2, radius: f64) -> Self {
        Self { center, radius }
    }
}

/// Closed target membership, `|p - g| <= r_g`.
pub fn in_target(p: Point2, t: &TargetDomain) -> bool {
    distance(p, t.center) <= t.radius
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectClass {
    Fixed,
    Movable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectBody {
    pub id: u32,
    /// Footprint; the disc center is the object pose.
    pub disc: Disc,
    pub velocity: Vec2,
    pub z_height: f64,
    pub class_truth: ObjectClass,
    pub theta_truth: OperableVector,
    pub mass: f64,
    pub friction: f64,
    /// Resultant force above which the object tips over; infinite when the
    /// toppling variant is off.
    pub topple_threshold: f64,
    pub toppled: bool,
}

impl ObjectBody {
    pub fn pose(&self) -> Point2 {
        self.disc.center
    }

    /// Fixed, or toppled and therefore frozen in place.
    pub fn is_static(&self) -> bool {
        self.class_truth == ObjectClass::Fixed || self.toppled
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotBody {
    pub position: Point2,
    pub velocity: Vec2,
    pub radius: f64,
    pub height: f64,
    pub mass: f64,
}

impl RobotBody {
    pub fn new(position: Point2, radius: f64, mass: f64) -> Self {
        Self {
            position,
            velocity: Vec2::ZERO,
            radius,
            height: 0.1,
            mass,
        }
    }

    pub fn disc(&self) -> Disc {
        Disc {
            center: self.position,
            radius: self.radius,
        }
    }
}

/// Everything the simulator knows. The planner never sees this directly.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub table: Table,
    pub robot: RobotBody,
    pub objects: Vec<ObjectBody>,
    /// Visited in order; a single target is the common case.
    pub targets: Vec<TargetDomain>,
    pub r_p: f64,
    pub seed: u64,
}

impl WorldState {
    pub fn object(&self, id: u32) -> Option<&ObjectBody> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn occupancy(&self) -> f64 {
        self.objects.iter().map(|o| o.disc.area()).sum::<f64>() / self.table.area()
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        let bad = |m: String| Err(WorldError::Invalid(m));
        if !(self.table.width > 0.0 && self.table.height > 0.0) {
            return bad("table dimensions must be positive".into());
        }
        if !(self.robot.radius > 0.0 && self.robot.mass > 0.0) {
            return bad("robot radius and mass must be positive".into());
        }
        if !(self.r_p > self.robot.radius) {
            return bad(format!("r_p {} must exceed robot radius {}", self.r_p, self.robot.radius));
        }
        if self.targets.is_empty() {
            return bad("at least one target is required".into());
        }
        for t in &self.targets {
            if !(t.radius > 0.0) {
                return bad("target radius must be positive".into());
            }
        }
        if !self.table.fits(self.robot.position, self.robot.radius) {
            return bad("robot start is outside the table".into());
        }
        let mut ids: Vec<u32> = self.objects.iter().map(|o| o.id).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != self.objects.len() {
            return bad("object ids must be unique".into());
        }
        for o in &self.objects {
            if !self.table.contains(o.pose()) {
                return bad(format!("object {} center is outside the table", o.id));
            }
            if !(o.disc.radius > 0.0) {
                return bad(format!("object {} radius must be positive", o.id));
            }
            if o.friction < 0.0 || !(o.topple_threshold > 0.0) || !(o.mass > 0.0) {
                return bad(format!("object {} has invalid physical parameters", o.id));
            }
            if distance(o.pose(), self.robot.position) < o.disc.radius + self.robot.radius {
                return bad(format!("robot start overlaps object {}", o.id));
            }
        }
        Ok(())
    }
}

/// Proximity-sensing disc `E(x)` around the robot.
pub fn local_energy_domain(robot: &RobotBody, r_p: f64) -> Result<Disc, WorldError> {
    if !(r_p > 0.0) {
        return Err(WorldError::BadProximityRadius(r_p));
    }
    Ok(Disc {
        center: robot.position,
        radius: r_p,
    })
}

/// Objects whose footprint strictly intersects `d`, ascending id.
pub fn objects_in_domain<'a>(world: &'a WorldState, d: &Disc) -> Vec<&'a ObjectBody> {
    let mut out: Vec<&ObjectBody> = world
        .objects
        .iter()
        .filter(|o| distance(o.pose(), d.center) < o.disc.radius + d.radius)
        .collect();
    out.sort_by_key(|o| o.id);
    out
}

/// Whether a robot body centred at `p` overlaps nothing and stays on the
/// table. Objects are inflated by the robot radius; tangency counts as free.
pub fn free_motion_query(world: &WorldState, p: Point2) -> Result<bool, WorldError> {
    if !world.table.contains(p) {
        return Err(WorldError::OutsideTable { x: p.x, y: p.y });
    }
    let r = world.robot.radius;
    if !world.table.fits(p, r) {
        return Ok(false);
    }
    Ok(world
        .objects
        .iter()
        .all(|o| distance(p, o.pose()) >= o.disc.radius + r))
}

// ---------------------------------------------------------------------------
// Scenario file

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotSpec {
    pub x: f64,
    pub y: f64,
    pub r: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub x: f64,
    pub y: f64,
    pub r_g: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub id: u32,
    pub x: f64,
    pub y: f64,
    pub radius: f64,
    pub class: ObjectClass,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "D")]
    pub d: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub mass: f64,
    pub friction: f64,
    /// `null` means the object never topples.
    pub topple_threshold: Option<f64>,
}

/// On-disk scenario: JSON with lengths in meters and forces in newtons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub table: Table,
    pub robot: RobotSpec,
    pub r_p: f64,
    pub target: TargetSpec,
    /// Further targets visited after `target`, in order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extra_targets: Vec<TargetSpec>,
    pub objects: Vec<ObjectSpec>,
    pub seed: u64,
}

impl From<&WorldState> for ScenarioFile {
    fn from(w: &WorldState) -> Self {
        let t = |t: &TargetDomain| TargetSpec {
            x: t.center.x,
            y: t.center.y,
            r_g: t.radius,
        };
        Self {
            table: w.table,
            robot: RobotSpec {
                x: w.robot.position.x,
                y: w.robot.position.y,
                r: w.robot.radius,
                mass: w.robot.mass,
            },
            r_p: w.r_p,
            target: t(&w.targets[0]),
            extra_targets: w.targets[1..].iter().map(t).collect(),
            objects: w
                .objects
                .iter()
                .map(|o| ObjectSpec {
                    id: o.id,
                    x: o.pose().x,
                    y: o.pose().y,
                    radius: o.disc.radius,
                    class: o.class_truth,
                    k: o.theta_truth.k,
                    d: o.theta_truth.d,
                    c: o.theta_truth.c,
                    mass: o.mass,
                    friction: o.friction,
                    topple_threshold: o.topple_threshold.is_finite().then_some(o.topple_threshold),
                })
                .collect(),
            seed: w.seed,
        }
    }
}

impl TryFrom<ScenarioFile> for WorldState {
    type Error = WorldError;

    fn try_from(f: ScenarioFile) -> Result<Self, WorldError> {
        let target = |t: &TargetSpec| TargetDomain::new(Point2::new(t.x, t.y), t.r_g);
        let mut objects = Vec::with_capacity(f.objects.len());
        for o in &f.objects {
            let disc = Disc::new(Point2::new(o.x, o.y), o.radius)
                .map_err(|e| WorldError::Invalid(format!("object {}: {e}", o.id)))?;
            objects.push(ObjectBody {
                id: o.id,
                disc,
                velocity: Vec2::ZERO,
                z_height: 0.1,
                class_truth: o.class,
                theta_truth: OperableVector::new(o.k, o.d, o.c),
                mass: o.mass,
                friction: o.friction,
                topple_threshold: o.topple_threshold.unwrap_or(f64::INFINITY),
                toppled: false,
            });
        }
        let mut targets = vec![target(&f.target)];
        targets.extend(f.extra_targets.iter().map(target));
        let world = WorldState {
            table: f.table,
            robot: RobotBody::new(Point2::new(f.robot.x, f.robot.y), f.robot.r, f.robot.mass),
            objects,
            targets,
            r_p: f.r_p,
            seed: f.seed,
        };
        world.validate()?;
        Ok(world)
    }
}

impl WorldState {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ScenarioFile::from(self)).expect("scenario serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, WorldError> {
        let file: ScenarioFile = serde_json::from_str(text)?;
        WorldState::try_from(file)
    }
}
