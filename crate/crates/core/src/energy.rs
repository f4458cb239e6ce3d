//! Unified energy-field representation of the robot's surroundings.
//!
//! Everything the robot knows about its neighbourhood is folded into one
//! landscape: an elastic pull toward the imagined state, viscous terms that
//! regulate speed (globally and around objects of unknown operability),
//! repulsive wells for inoperable objects and constant pushing terms for
//! operable objects standing in the way. Conservative terms expose a
//! potential with an analytic gradient; viscous terms only contribute a
//! damping coefficient.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimator::{Operability, OperableVector, PerceptionSample};
use crate::geometry::{directed_hausdorff, distance, sample_boundary, Disc, GeometryError, Point2, Vec2};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnergyError {
    #[error("invalid field config: {0}")]
    BadConfig(&'static str),
    #[error("point ({x}, {y}) lies outside the landscape's valid domain")]
    OutsideDomain { x: f64, y: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldConfig {
    pub k_p: f64,
    pub k_0: f64,
    pub d_o: f64,
    pub v_safe: f64,
    pub v_max: f64,
    /// Clearance below which the allowed approach speed tapers linearly from
    /// `v_max` down to `v_safe` at contact.
    pub regulation_band: f64,
    /// Boundary samples per object for the repulsive-center search.
    pub boundary_samples: usize,
    /// Fraction of the support radius over which repulsion is at full strength.
    pub window_inner: f64,
    /// Distance from the repulsive center beyond which repulsion vanishes;
    /// capped at the local-domain radius.
    pub repulsive_support: f64,
}

impl Default for FieldConfig {
    fn default() -> Self {
        Self {
            k_p: 25.0,
            k_0: 50.0,
            d_o: 5.0,
            v_safe: 0.001,
            v_max: 0.07,
            regulation_band: 0.1,
            boundary_samples: 64,
            window_inner: 0.5,
            repulsive_support: 0.15,
        }
    }
}

impl FieldConfig {
    pub fn validate(&self) -> Result<(), EnergyError> {
        let pos = [self.k_p, self.k_0, self.d_o, self.v_safe, self.v_max, self.regulation_band];
        if !pos.iter().all(|g| *g > 0.0 && g.is_finite()) {
            return Err(EnergyError::BadConfig("gains and speeds must be positive"));
        }
        if self.v_safe >= self.v_max {
            return Err(EnergyError::BadConfig("v_safe must be below v_max"));
        }
        if self.boundary_samples < 3 {
            return Err(EnergyError::BadConfig("need at least 3 boundary samples"));
        }
        if !(self.repulsive_support > 0.0 && self.repulsive_support.is_finite()) {
            return Err(EnergyError::BadConfig("repulsive_support must be positive"));
        }
        if !(self.window_inner > 0.0 && self.window_inner < 1.0) {
            return Err(EnergyError::BadConfig("window_inner must lie in (0, 1)"));
        }
        Ok(())
    }

    /// Speed allowed at surface clearance `c` from an unknown object.
    pub fn allowed_speed(&self, clearance: f64) -> f64 {
        let s = (clearance.max(0.0) / self.regulation_band).min(1.0);
        self.v_safe + (self.v_max - self.v_safe) * s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermKind {
    Attractive,
    FreeViscous,
    DedicatedViscous,
    Repulsive,
    Operational,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FieldTerm {
    /// `U = k/2 |anchor - x|^2`.
    Attractive { anchor: Point2, gain: f64 },
    /// Global viscosity `-D v`.
    FreeViscous { gain: f64 },
    /// Viscosity sized around one unknown object.
    DedicatedViscous { source: u32, anchor: Point2, gain: f64 },
    /// Windowed quadratic repulsion from `anchor`, vanishing beyond `support`.
    Repulsive {
        source: u32,
        anchor: Point2,
        gain: f64,
        support: f64,
        inner: f64,
    },
    /// Constant pushing force of magnitude `push` along `direction`, with the
    /// estimated cost of moving the object carried alongside.
    Operational {
        source: u32,
        anchor: Point2,
        direction: Vec2,
        push: f64,
        cost: f64,
    },
}

impl FieldTerm {
    pub fn kind(&self) -> TermKind {
        match self {
            FieldTerm::Attractive { .. } => TermKind::Attractive,
            FieldTerm::FreeViscous { .. } => TermKind::FreeViscous,
            FieldTerm::DedicatedViscous { .. } => TermKind::DedicatedViscous,
            FieldTerm::Repulsive { .. } => TermKind::Repulsive,
            FieldTerm::Operational { .. } => TermKind::Operational,
        }
    }

    pub fn source(&self) -> Option<u32> {
        match *self {
            FieldTerm::DedicatedViscous { source, .. }
            | FieldTerm::Repulsive { source, .. }
            | FieldTerm::Operational { source, .. } => Some(source),
            _ => None,
        }
    }

    pub fn anchor(&self) -> Option<Point2> {
        match *self {
            FieldTerm::Attractive { anchor, .. }
            | FieldTerm::DedicatedViscous { anchor, .. }
            | FieldTerm::Repulsive { anchor, .. }
            | FieldTerm::Operational { anchor, .. } => Some(anchor),
            FieldTerm::FreeViscous { .. } => None,
        }
    }

    pub fn gain(&self) -> f64 {
        match *self {
            FieldTerm::Attractive { gain, .. }
            | FieldTerm::FreeViscous { gain }
            | FieldTerm::DedicatedViscous { gain, .. }
            | FieldTerm::Repulsive { gain, .. } => gain,
            FieldTerm::Operational { push, .. } => push,
        }
    }

    /// Potential and conservative force at `x`; viscous terms contribute neither.
    pub fn potential_and_force(&self, x: Point2) -> (f64, Vec2) {
        match *self {
            FieldTerm::Attractive { anchor, gain } => {
                let e = anchor - x;
                (0.5 * gain * e.norm_sq(), e * gain)
            }
            FieldTerm::Repulsive {
                anchor,
                gain,
                support,
                inner,
                ..
            } => {
                let r = x - anchor;
                let rho = r.norm();
                let a = inner * support;
                (repulsive_potential(rho, gain, a, support), r * (gain * window(rho, a, support)))
            }
            FieldTerm::Operational {
                anchor,
                direction,
                push,
                ..
            } => (-push * direction.dot(x - anchor), direction * push),
            FieldTerm::FreeViscous { .. } | FieldTerm::DedicatedViscous { .. } => (0.0, Vec2::ZERO),
        }
    }
}

/// C1 window: 1 up to `a`, cubic smoothstep down to 0 at `b`.
fn window(rho: f64, a: f64, b: f64) -> f64 {
    if rho <= a {
        1.0
    } else if rho >= b {
        0.0
    } else {
        let t = (rho - a) / (b - a);
        1.0 - t * t * (3.0 - 2.0 * t)
    }
}

/// Potential whose negative gradient is `k (x - o) window(rho)`, i.e.
/// `-k * integral_0^rho s window(s) ds`, constant beyond the support.
fn repulsive_potential(rho: f64, k: f64, a: f64, b: f64) -> f64 {
    let inner = 0.5 * a * a;
    if rho <= a {
        return -0.5 * k * rho * rho;
    }
    let l = b - a;
    let t = ((rho - a) / l).min(1.0);
    let t2 = t * t;
    let t3 = t2 * t;
    let t4 = t3 * t;
    let t5 = t4 * t;
    let band = l * (a * (t - t3 + 0.5 * t4) + l * (0.5 * t2 - 0.75 * t4 + 0.4 * t5));
    -k * (inner + band)
}

pub fn attractive_term(g_star: Point2, k_p: f64) -> FieldTerm {
    FieldTerm::Attractive {
        anchor: g_star,
        gain: k_p,
    }
}

pub fn viscous_force(v: Vec2, d: f64) -> Vec2 {
    v * -d
}

/// The inner product `theta . psi` used as the cost-to-move weight of an
/// operable object.
pub fn operational_energy(theta: &OperableVector, psi: &PerceptionSample) -> f64 {
    theta.k * psi.dx + theta.d * psi.v + theta.c * psi.f
}

/// Total damping that makes the overdamped closure `v = k_p e / D` run at
/// `v_safe` for remaining distance `gap`, never below `d_base`.
pub fn critical_damping(k_p: f64, gap: f64, v_safe: f64, d_base: f64) -> f64 {
    if !(gap > 0.0) {
        return d_base;
    }
    d_base.max(k_p * gap / v_safe)
}

/// Boundary sample of the object farthest from the robot/goal set.
pub fn repulsive_center(obj_samples: &[Point2], b_samples: &[Point2]) -> Result<Point2, EnergyError> {
    Ok(directed_hausdorff(obj_samples, b_samples)?.1)
}

pub fn repulsive_term(source: u32, o_star: Point2, k_0: f64, support: f64, inner_fraction: f64) -> FieldTerm {
    FieldTerm::Repulsive {
        source,
        anchor: o_star,
        gain: k_0,
        support,
        inner: inner_fraction,
    }
}

/// What the planner knows about one nearby object when composing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensedObject {
    pub id: u32,
    pub center: Point2,
    pub radius: f64,
    /// Surface-to-surface gap to the robot.
    pub clearance: f64,
    pub class: Operability,
    /// Whether the object stands in the robot's corridor to its goal.
    pub blocking: bool,
    /// Pushing force that moves the object, once known.
    pub push: f64,
    pub theta: Option<OperableVector>,
    pub last_sample: Option<PerceptionSample>,
}

/// The robot-centred view the landscape is composed from.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalView {
    pub position: Point2,
    pub robot_radius: f64,
    pub goal: Disc,
    pub r_p: f64,
    pub objects: Vec<SensedObject>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyLandscape {
    pub terms: Vec<FieldTerm>,
    pub config: FieldConfig,
    pub valid_within: Disc,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldEval {
    pub potential: f64,
    /// Negative gradient of the potential.
    pub conservative: Vec2,
    /// Effective viscous coefficient.
    pub damping: f64,
    /// Conservative plus viscous force at the queried velocity.
    pub force: Vec2,
}

/// Samples of the robot and goal discs, the set the repulsive center is kept
/// away from.
fn robot_goal_samples(view: &LocalView, n: usize) -> Result<Vec<Point2>, EnergyError> {
    let mut b = sample_boundary(&Disc::new(view.position, view.robot_radius)?, n)?;
    b.push(view.position);
    b.extend(sample_boundary(&view.goal, n)?);
    b.push(view.goal.center);
    Ok(b)
}

/// Builds the landscape for one tick around the imagined state `x_star`.
pub fn compose(view: &LocalView, x_star: Point2, cfg: &FieldConfig) -> Result<EnergyLandscape, EnergyError> {
    let domain = Disc::new(view.position, view.r_p).map_err(|_| EnergyError::BadConfig("r_p must be positive"))?;
    let e = distance(x_star, view.position);
    let mut terms = vec![
        attractive_term(x_star, cfg.k_p),
        FieldTerm::FreeViscous {
            gain: critical_damping(cfg.k_p, e, cfg.v_max, cfg.d_o),
        },
    ];
    let mut b_samples: Option<Vec<Point2>> = None;
    for o in &view.objects {
        match o.class {
            Operability::Unknown => terms.push(FieldTerm::DedicatedViscous {
                source: o.id,
                anchor: o.center,
                gain: critical_damping(cfg.k_p, e, cfg.allowed_speed(o.clearance), cfg.d_o),
            }),
            Operability::Inoperable => {
                if b_samples.is_none() {
                    b_samples = Some(robot_goal_samples(view, cfg.boundary_samples)?);
                }
                let disc = Disc::new(o.center, o.radius)?;
                let all = sample_boundary(&disc, cfg.boundary_samples)?;
                let inside: Vec<Point2> = all.iter().copied().filter(|p| domain.contains(*p)).collect();
                let samples = if inside.is_empty() { &all } else { &inside };
                let o_star = repulsive_center(samples, b_samples.as_ref().unwrap())?;
                let support = cfg.repulsive_support.min(view.r_p);
                terms.push(repulsive_term(o.id, o_star, cfg.k_0, support, cfg.window_inner));
            }
            Operability::Operable => {
                if !o.blocking || o.push <= 0.0 {
                    continue;
                }
                let Some(direction) = (o.center - view.position).normalized() else {
                    continue;
                };
                let cost = match (o.theta, o.last_sample) {
                    (Some(t), Some(s)) => operational_energy(&t, &s),
                    _ => 0.0,
                };
                terms.push(FieldTerm::Operational {
                    source: o.id,
                    anchor: o.center,
                    direction,
                    push: o.push,
                    cost,
                });
            }
        }
    }
    // Free-space viscosity caps the cruise speed under the full conservative
    // pull, not just the attraction.
    let pull: Vec2 = terms.iter().map(|t| t.potential_and_force(view.position).1).fold(Vec2::ZERO, |a, b| a + b);
    if let FieldTerm::FreeViscous { gain } = &mut terms[1] {
        *gain = gain.max(pull.norm() / cfg.v_max);
    }
    Ok(EnergyLandscape {
        terms,
        config: *cfg,
        valid_within: domain,
    })
}

impl EnergyLandscape {
    /// Effective viscosity: the strongest of the active viscous terms.
    pub fn damping(&self) -> f64 {
        self.terms
            .iter()
            .filter(|t| matches!(t, FieldTerm::FreeViscous { .. } | FieldTerm::DedicatedViscous { .. }))
            .map(|t| t.gain())
            .fold(0.0, f64::max)
    }

    /// Potential and conservative force without the domain check.
    pub fn conservative(&self, x: Point2) -> (f64, Vec2) {
        let mut u = 0.0;
        let mut f = Vec2::ZERO;
        for t in &self.terms {
            let (tu, tf) = t.potential_and_force(x);
            u += tu;
            f += tf;
        }
        (u, f)
    }

    pub fn terms_of(&self, kind: TermKind) -> impl Iterator<Item = &FieldTerm> {
        self.terms.iter().filter(move |t| t.kind() == kind)
    }
}

pub fn evaluate(landscape: &EnergyLandscape, x: Point2, v: Vec2) -> Result<FieldEval, EnergyError> {
    if !landscape.valid_within.contains(x) {
        return Err(EnergyError::OutsideDomain { x: x.x, y: x.y });
    }
    let (potential, conservative) = landscape.conservative(x);
    let damping = landscape.damping();
    Ok(FieldEval {
        potential,
        conservative,
        damping,
        force: conservative + viscous_force(v, damping),
    })
}

/// One row of a field dump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample {
    pub x: f64,
    pub y: f64,
    pub potential: f64,
    pub fx: f64,
    pub fy: f64,
}

/// Samples potential and conservative force on an `n x n` grid over the
/// valid domain, keeping only points inside it.
pub fn sample_field(landscape: &EnergyLandscape, n: usize) -> Vec<FieldSample> {
    let d = landscape.valid_within;
    let n = n.max(2);
    let mut out = Vec::new();
    for j in 0..n {
        for i in 0..n {
            let p = Point2::new(
                d.center.x - d.radius + 2.0 * d.radius * i as f64 / (n - 1) as f64,
                d.center.y - d.radius + 2.0 * d.radius * j as f64 / (n - 1) as f64,
            );
            if !d.contains(p) {
                continue;
            }
            let (u, f) = landscape.conservative(p);
            out.push(FieldSample {
                x: p.x,
                y: p.y,
                potential: u,
                fx: f.x,
                fy: f.y,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fd_force(l: &EnergyLandscape, x: Point2, h: f64) -> Vec2 {
        let u = |p: Point2| l.conservative(p).0;
        Vec2::new(
            -(u(Point2::new(x.x + h, x.y)) - u(Point2::new(x.x - h, x.y))) / (2.0 * h),
            -(u(Point2::new(x.x, x.y + h)) - u(Point2::new(x.x, x.y - h))) / (2.0 * h),
        )
    }

    fn empty_view(p: Point2) -> LocalView {
        LocalView {
            position: p,
            robot_radius: 0.02,
            goal: Disc::new(Point2::new(1.0, 0.45), 0.02).unwrap(),
            r_p: 0.3,
            objects: vec![],
        }
    }

    fn unknown(id: u32, center: Point2, clearance: f64) -> SensedObject {
        SensedObject {
            id,
            center,
            radius: 0.05,
            clearance,
            class: Operability::Unknown,
            blocking: true,
            push: 0.0,
            theta: None,
            last_sample: None,
        }
    }

    #[test]
    fn attractive_examples() {
        let t = attractive_term(Point2::new(1.0, 0.0), 10.0);
        assert_eq!(t.potential_and_force(Point2::new(1.0, 0.0)), (0.0, Vec2::ZERO));
        let (u, f) = t.potential_and_force(Point2::new(0.5, 0.0));
        assert!((u - 1.25).abs() < 1e-12);
        assert!((f.x - 5.0).abs() < 1e-12 && f.y == 0.0);
    }

    #[test]
    fn attractive_field_is_curl_free() {
        let l = EnergyLandscape {
            terms: vec![attractive_term(Point2::new(0.3, 0.2), 25.0)],
            config: FieldConfig::default(),
            valid_within: Disc::new(Point2::ZERO, 10.0).unwrap(),
        };
        let h = 1e-4;
        for i in 0..10 {
            for j in 0..10 {
                let p = Point2::new(i as f64 * 0.1, j as f64 * 0.1);
                let dfy_dx = (l.conservative(p + Vec2::new(h, 0.0)).1.y - l.conservative(p - Vec2::new(h, 0.0)).1.y) / (2.0 * h);
                let dfx_dy = (l.conservative(p + Vec2::new(0.0, h)).1.x - l.conservative(p - Vec2::new(0.0, h)).1.x) / (2.0 * h);
                assert!((dfy_dx - dfx_dy).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn viscous_examples() {
        assert_eq!(viscous_force(Vec2::ZERO, 3.0), Vec2::ZERO);
        let v = Vec2::new(0.1, 0.0);
        let f = viscous_force(v, 2.0);
        assert!((f.x + 0.2).abs() < 1e-15);
        assert!((-f.dot(v) - 0.02).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let v = Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let d = rng.gen_range(0.0..50.0);
            let p = -viscous_force(v, d).dot(v);
            assert!((p - d * v.norm_sq()).abs() <= 1e-12 * (1.0 + p));
        }
    }

    #[test]
    fn operational_energy_examples() {
        let psi = PerceptionSample::new(0.3, -2.0, 7.0);
        assert_eq!(operational_energy(&OperableVector::default(), &psi), 0.0);
        let th = OperableVector::new(500.0, 20.0, 0.5);
        let e = operational_energy(&th, &PerceptionSample::new(0.01, 0.05, 6.5));
        assert!((e - 9.25).abs() < 1e-12);
        let p1 = PerceptionSample::new(0.01, 0.2, 1.0);
        let p2 = PerceptionSample::new(-0.03, 0.1, 4.0);
        let (a, b) = (2.5, -0.75);
        let mix = PerceptionSample::new(a * p1.dx + b * p2.dx, a * p1.v + b * p2.v, a * p1.f + b * p2.f);
        let lhs = operational_energy(&th, &mix);
        let rhs = a * operational_energy(&th, &p1) + b * operational_energy(&th, &p2);
        assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn critical_damping_examples() {
        assert!((critical_damping(10.0, 0.001, 0.001, 0.0) - 10.0).abs() < 1e-12);
        assert_eq!(critical_damping(10.0, 0.001, f64::INFINITY, 4.0), 4.0);
        assert_eq!(critical_damping(10.0, 0.5, 1e12, 4.0), 4.0);
        assert!(critical_damping(10.0, 0.5, 0.001, 0.0) >= 5000.0);
    }

    #[test]
    fn critical_damping_second_order_check() {
        // Full m*x'' = k_p*e - D*x' with D re-solved from the remaining gap at
        // every 20 ms update; the speed as the gap closes to 1 mm must be v_safe.
        let (k_p, v_safe, m) = (10.0, 0.001, 1.0);
        let mut x = 0.0;
        let mut v = 0.0;
        let goal = 0.5;
        let dt = 1e-4;
        let mut d = critical_damping(k_p, goal, v_safe, 0.0);
        let mut t = 0.0;
        let mut step = 0u64;
        loop {
            if step % 200 == 0 {
                d = critical_damping(k_p, goal - x, v_safe, 0.0);
            }
            step += 1;
            // classic RK4 on (x, v) with D frozen over the step
            let acc = |xx: f64, vv: f64| (k_p * (goal - xx) - d * vv) / m;
            let (k1x, k1v) = (v, acc(x, v));
            let (k2x, k2v) = (v + 0.5 * dt * k1v, acc(x + 0.5 * dt * k1x, v + 0.5 * dt * k1v));
            let (k3x, k3v) = (v + 0.5 * dt * k2v, acc(x + 0.5 * dt * k2x, v + 0.5 * dt * k2v));
            let (k4x, k4v) = (v + dt * k3v, acc(x + dt * k3x, v + dt * k3v));
            x += dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
            v += dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
            t += dt;
            if goal - x <= 0.001 {
                break;
            }
            assert!(t < 1e4);
        }
        assert!((v - v_safe).abs() < 0.05 * v_safe, "v = {v}");
    }

    #[test]
    fn repulsive_examples() {
        let o = Point2::new(0.5, 0.5);
        let t = repulsive_term(1, o, 50.0, 0.3, 0.5);
        assert_eq!(t.potential_and_force(o).1, Vec2::ZERO);
        let f = t.potential_and_force(Point2::new(0.6, 0.5)).1;
        assert!((f.x - 5.0).abs() < 1e-12 && f.y.abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let x = o + Vec2::from_angle(rng.gen_range(0.0..6.28)) * rng.gen_range(0.001..0.299);
            let f = t.potential_and_force(x).1;
            assert!(f.dot(x - o) > 0.0);
        }
        assert_eq!(t.potential_and_force(Point2::new(0.9, 0.5)).1, Vec2::ZERO);
    }

    #[test]
    fn repulsive_potential_is_continuous_at_breaks() {
        let (k, a, b) = (50.0, 0.15, 0.3);
        for r in [a, b] {
            let lo = repulsive_potential(r - 1e-12, k, a, b);
            let hi = repulsive_potential(r + 1e-12, k, a, b);
            assert!((lo - hi).abs() < 1e-9);
        }
    }

    #[test]
    fn hausdorff_center_faces_away() {
        // Object between robot (left) and goal (right): the center must lie on
        // the arc away from the segment, i.e. off the y = 0.45 line.
        let view = LocalView {
            position: Point2::new(0.4, 0.45),
            robot_radius: 0.02,
            goal: Disc::new(Point2::new(0.8, 0.45), 0.02).unwrap(),
            r_p: 0.3,
            objects: vec![],
        };
        let obj = sample_boundary(&Disc::new(Point2::new(0.6, 0.45), 0.05).unwrap(), 64).unwrap();
        let b = robot_goal_samples(&view, 64).unwrap();
        let c = repulsive_center(&obj, &b).unwrap();
        // brute-force oracle
        let mut best = (f64::NEG_INFINITY, obj[0]);
        for &p in &obj {
            let m = b.iter().map(|q| distance(p, *q)).fold(f64::INFINITY, f64::min);
            if m > best.0 {
                best = (m, p);
            }
        }
        assert_eq!(c, best.1);
        assert!((c.y - 0.45).abs() > 0.04, "{c:?}");
        let nearest_to_robot = Point2::new(0.55, 0.45);
        let nearest_to_goal = Point2::new(0.65, 0.45);
        assert!(distance(c, nearest_to_robot) > 1e-3 && distance(c, nearest_to_goal) > 1e-3);
        assert!(repulsive_center(&[], &b).is_err());
    }

    #[test]
    fn compose_empty_world() {
        let cfg = FieldConfig::default();
        let view = empty_view(Point2::new(0.2, 0.45));
        let xs = Point2::new(0.5, 0.45);
        let l = compose(&view, xs, &cfg).unwrap();
        assert_eq!(l.terms.len(), 2);
        assert_eq!(l.terms_of(TermKind::Attractive).count(), 1);
        assert_eq!(l.terms_of(TermKind::FreeViscous).count(), 1);
        let v = Vec2::new(0.01, 0.0);
        let ev = evaluate(&l, view.position, v).unwrap();
        let d = critical_damping(cfg.k_p, 0.3, cfg.v_max, cfg.d_o);
        assert!((ev.force.x - (cfg.k_p * 0.3 - d * 0.01)).abs() < 1e-9);
        assert!(evaluate(&l, Point2::new(0.9, 0.45), v).is_err());
    }

    #[test]
    fn compose_unknown_then_inoperable() {
        let cfg = FieldConfig::default();
        let mut view = empty_view(Point2::new(0.2, 0.45));
        view.objects.push(unknown(4, Point2::new(0.32, 0.45), 0.05));
        let xs = Point2::new(0.5, 0.45);
        let l = compose(&view, xs, &cfg).unwrap();
        let dv: Vec<_> = l.terms_of(TermKind::DedicatedViscous).collect();
        assert_eq!(dv.len(), 1);
        assert_eq!(dv[0].source(), Some(4));
        let expect = critical_damping(cfg.k_p, 0.3, cfg.allowed_speed(0.05), cfg.d_o);
        assert_eq!(dv[0].gain(), expect);
        assert_eq!(l.damping(), expect);

        view.objects[0].class = Operability::Inoperable;
        let l2 = compose(&view, xs, &cfg).unwrap();
        assert_eq!(l2.terms_of(TermKind::DedicatedViscous).count(), 0);
        let rep: Vec<_> = l2.terms_of(TermKind::Repulsive).collect();
        assert_eq!(rep.len(), 1);
        assert_eq!(rep[0].source(), Some(4));
        // anchor on the sampled object boundary inside the domain
        let a = rep[0].anchor().unwrap();
        assert!((distance(a, Point2::new(0.32, 0.45)) - 0.05).abs() < 1e-12);
        assert!(l2.valid_within.contains(a));
        // idempotent
        assert_eq!(compose(&view, xs, &cfg).unwrap(), l2);
    }

    #[test]
    fn operational_term_pushes_toward_object() {
        let cfg = FieldConfig::default();
        let mut view = empty_view(Point2::new(0.2, 0.45));
        let mut o = unknown(2, Point2::new(0.27, 0.45), 0.0);
        o.class = Operability::Operable;
        o.push = 3.0;
        o.theta = Some(OperableVector::new(500.0, 20.0, 0.5));
        o.last_sample = Some(PerceptionSample::new(0.01, 0.05, 6.5));
        view.objects.push(o);
        let l = compose(&view, Point2::new(0.5, 0.45), &cfg).unwrap();
        let op = l.terms_of(TermKind::Operational).next().unwrap();
        let (_, f) = op.potential_and_force(view.position);
        assert!((f.x - 3.0).abs() < 1e-12);
        match op {
            FieldTerm::Operational { cost, .. } => assert!((cost - 9.25).abs() < 1e-12),
            _ => unreachable!(),
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let cfg = FieldConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..300 {
            let p = Point2::new(rng.gen_range(0.3..0.9), rng.gen_range(0.3..0.6));
            let mut view = empty_view(p);
            for id in 0..3 {
                let c = p + Vec2::from_angle(rng.gen_range(0.0..6.28)) * rng.gen_range(0.08..0.3);
                let mut o = unknown(id, c, 0.0);
                o.class = if rng.gen_bool(0.5) { Operability::Inoperable } else { Operability::Operable };
                o.push = 2.0;
                view.objects.push(o);
            }
            let xs = p + Vec2::from_angle(rng.gen_range(0.0..6.28)) * rng.gen_range(0.0..0.3);
            let l = compose(&view, xs, &cfg).unwrap();
            let x = p + Vec2::from_angle(rng.gen_range(0.0..6.28)) * rng.gen_range(0.0..0.25);
            let an = evaluate(&l, x, Vec2::ZERO).unwrap().conservative;
            let fd = fd_force(&l, x, 1e-6);
            let err = (an - fd).norm() / an.norm().max(1e-3);
            assert!(err < 1e-5, "err {err} an {an:?} fd {fd:?}");
        }
    }

    #[test]
    fn viscosity_never_touches_potential() {
        let l = compose(&empty_view(Point2::new(0.2, 0.45)), Point2::new(0.4, 0.45), &FieldConfig::default()).unwrap();
        let a = evaluate(&l, Point2::new(0.25, 0.45), Vec2::ZERO).unwrap();
        let b = evaluate(&l, Point2::new(0.25, 0.45), Vec2::new(0.3, -0.2)).unwrap();
        assert_eq!(a.potential, b.potential);
        assert_eq!(a.conservative, b.conservative);
        assert_ne!(a.force, b.force);
    }

    #[test]
    fn config_validation() {
        assert!(FieldConfig::default().validate().is_ok());
        let bad = FieldConfig {
            v_safe: 0.1,
            ..FieldConfig::default()
        };
        assert!(bad.validate().is_err());
        let cfg = FieldConfig::default();
        assert_eq!(cfg.allowed_speed(0.0), cfg.v_safe);
        assert_eq!(cfg.allowed_speed(1.0), cfg.v_max);
    }
}
