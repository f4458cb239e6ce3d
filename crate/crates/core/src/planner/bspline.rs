//! Model-based baseline: a clamped cubic B-spline reference checked by
//! rollout in a private simulator copy before execution.
//!
//! The private world holds every object of the initial geometric snapshot as
//! a rigid fixed body, since the baseline has no notion of operability. A
//! rejected spline is perturbed and re-checked up to a retry budget.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::estimator::OperableVector;
use crate::geometry::{distance, Disc, Point2, Vec2};
use crate::sim::{run_episode, Command, EpisodeLimits, IntentMode, Planner, PlannerFault, SensorFrame, SimConfig, TickOutput};
use crate::world::{ObjectBody, ObjectClass, RobotBody, Table, TargetDomain, WorldState};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BsplineConfig {
    /// Interior via points between start and goal.
    pub via_points: usize,
    pub speed: f64,
    pub k_track: f64,
    pub d_track: f64,
    pub retries: usize,
    /// Standard deviation of via-point perturbations (m).
    pub sigma: f64,
    pub rollout_stiffness: f64,
    /// Time allowed beyond the nominal duration during rollout (s).
    pub slack: f64,
    pub force_fail: f64,
}

impl Default for BsplineConfig {
    fn default() -> Self {
        Self {
            via_points: 4,
            speed: 0.05,
            k_track: 200.0,
            d_track: 40.0,
            retries: 20,
            sigma: 0.08,
            rollout_stiffness: 3000.0,
            slack: 5.0,
            force_fail: 10.0,
        }
    }
}

/// Point on the clamped uniform cubic B-spline with control points `ctrl`
/// at parameter `u` in `[0, 1]`.
pub fn clamped_cubic(ctrl: &[Point2], u: f64) -> Point2 {
    let n = ctrl.len();
    assert!(n >= 4, "cubic B-spline needs at least 4 control points");
    let spans = n - 3;
    let mut knots = vec![0.0; 4];
    knots.extend((1..spans).map(|i| i as f64 / spans as f64));
    knots.extend([1.0; 4]);
    let u = u.clamp(0.0, 1.0);
    // span index k with knots[k] <= u < knots[k+1]
    let k = if u >= 1.0 {
        n - 1
    } else {
        (3..n).rfind(|&k| knots[k] <= u).unwrap_or(3)
    };
    // de Boor recursion
    let mut d: Vec<Point2> = (0..4).map(|j| ctrl[j + k - 3]).collect();
    for r in 1..=3 {
        for j in (r..=3).rev() {
            let i = j + k - 3;
            let denom = knots[i + 4 - r] - knots[i];
            let alpha = if denom > 0.0 { (u - knots[i]) / denom } else { 0.0 };
            d[j] = d[j - 1] * (1.0 - alpha) + d[j] * alpha;
        }
    }
    d[3]
}

/// Arc-length parametrized polyline of a spline, traversed at constant speed.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineTrajectory {
    pub points: Vec<Point2>,
    cumulative: Vec<f64>,
    pub speed: f64,
}

impl SplineTrajectory {
    pub fn from_control(ctrl: &[Point2], speed: f64, samples: usize) -> Self {
        let points: Vec<Point2> = (0..=samples).map(|i| clamped_cubic(ctrl, i as f64 / samples as f64)).collect();
        let mut cumulative = vec![0.0];
        for w in points.windows(2) {
            cumulative.push(cumulative.last().unwrap() + distance(w[0], w[1]));
        }
        Self {
            points,
            cumulative,
            speed,
        }
    }

    pub fn length(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    pub fn duration(&self) -> f64 {
        self.length() / self.speed
    }

    /// Reference position and velocity at time `t`.
    pub fn reference(&self, t: f64) -> (Point2, Vec2) {
        let s = (self.speed * t).clamp(0.0, self.length());
        let i = match self.cumulative.binary_search_by(|c| c.total_cmp(&s)) {
            Ok(i) => i.min(self.points.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.points.len() - 2),
        };
        let seg = self.cumulative[i + 1] - self.cumulative[i];
        let a = if seg > 0.0 { (s - self.cumulative[i]) / seg } else { 0.0 };
        let p = self.points[i] * (1.0 - a) + self.points[i + 1] * a;
        let v = if s >= self.length() {
            Vec2::ZERO
        } else {
            (self.points[i + 1] - self.points[i]).normalized().unwrap_or(Vec2::ZERO) * self.speed
        };
        (p, v)
    }
}

/// Follows a reference trajectory with a spring-damper about the reference.
struct Tracker<'a> {
    traj: &'a SplineTrajectory,
    cfg: BsplineConfig,
    t0: Option<f64>,
}

impl Tracker<'_> {
    fn command(&mut self, frame: &SensorFrame) -> TickOutput {
        let t0 = *self.t0.get_or_insert(frame.time);
        let (r, v) = self.traj.reference(frame.time - t0);
        TickOutput {
            command: Command::new((r - frame.position) * self.cfg.k_track + v * self.cfg.d_track, self.cfg.d_track),
            intent: IntentMode::Approach,
            imagined: Some(r),
        }
    }
}

impl Planner for Tracker<'_> {
    fn name(&self) -> &'static str {
        "bspline-tracker"
    }

    fn tick(&mut self, frame: &SensorFrame, _goal: &TargetDomain) -> Result<TickOutput, PlannerFault> {
        Ok(self.command(frame))
    }
}

pub struct BsplinePlanner {
    pub cfg: BsplineConfig,
    table: Table,
    snapshot: Vec<Disc>,
    sim: SimConfig,
    seed: u64,
    plan: Option<(Point2, SplineTrajectory)>,
    t0: Option<f64>,
    attempts: usize,
}

impl BsplinePlanner {
    /// `snapshot` is the geometric footprint of every object at planning time.
    pub fn new(cfg: BsplineConfig, table: Table, snapshot: Vec<Disc>, sim: SimConfig, seed: u64) -> Self {
        Self {
            cfg,
            table,
            snapshot,
            sim,
            seed,
            plan: None,
            t0: None,
            attempts: 0,
        }
    }

    /// Rollout attempts spent on the current plan.
    pub fn attempts(&self) -> usize {
        self.attempts
    }

    pub fn trajectory(&self) -> Option<&SplineTrajectory> {
        self.plan.as_ref().map(|(_, t)| t)
    }

    fn rollout_world(&self, start: Point2, robot_radius: f64, goal: &TargetDomain) -> WorldState {
        let objects = self
            .snapshot
            .iter()
            .enumerate()
            .map(|(i, d)| ObjectBody {
                id: i as u32,
                disc: *d,
                velocity: Vec2::ZERO,
                z_height: 0.1,
                class_truth: ObjectClass::Fixed,
                theta_truth: OperableVector::new(self.cfg.rollout_stiffness, 20.0, 0.0),
                mass: 1.0,
                friction: 0.5,
                topple_threshold: f64::INFINITY,
                toppled: false,
            })
            .collect();
        WorldState {
            table: self.table,
            robot: RobotBody::new(start, robot_radius, 1.0),
            objects,
            targets: vec![*goal],
            r_p: 0.3,
            seed: self.seed,
        }
    }

    /// Accepts a spline iff its rollout reaches the goal without exceeding the
    /// force threshold.
    pub fn rollout_ok(&self, traj: &SplineTrajectory, start: Point2, robot_radius: f64, goal: &TargetDomain) -> bool {
        let mut world = self.rollout_world(start, robot_radius, goal);
        let mut tracker = Tracker {
            traj,
            cfg: self.cfg,
            t0: None,
        };
        let limits = EpisodeLimits {
            max_time: traj.duration() + self.cfg.slack,
            force_fail: self.cfg.force_fail,
            record_trajectory: false,
            ..EpisodeLimits::default()
        };
        let r = run_episode(&mut world, &mut tracker, &self.sim, &limits);
        r.success && r.peak_force <= self.cfg.force_fail
    }

    fn plan(&mut self, start: Point2, robot_radius: f64, goal: &TargetDomain) -> Result<SplineTrajectory, PlannerFault> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let noise = Normal::new(0.0, self.cfg.sigma).expect("sigma is finite");
        let n = self.cfg.via_points.max(2);
        let lo = robot_radius;
        let (hx, hy) = (self.table.width - robot_radius, self.table.height - robot_radius);
        for attempt in 0..=self.cfg.retries {
            self.attempts = attempt + 1;
            let mut ctrl = vec![start];
            for i in 1..=n {
                let base = start + (goal.center - start) * (i as f64 / (n + 1) as f64);
                let p = if attempt == 0 {
                    base
                } else {
                    let s = 1.0 + attempt as f64 / self.cfg.retries as f64;
                    base + Vec2::new(noise.sample(&mut rng), noise.sample(&mut rng)) * s
                };
                ctrl.push(Point2::new(p.x.clamp(lo, hx), p.y.clamp(lo, hy)));
            }
            ctrl.push(goal.center);
            let traj = SplineTrajectory::from_control(&ctrl, self.cfg.speed, 200);
            if self.rollout_ok(&traj, start, robot_radius, goal) {
                return Ok(traj);
            }
        }
        Err(PlannerFault::Infeasible)
    }
}

impl Planner for BsplinePlanner {
    fn name(&self) -> &'static str {
        "bspline"
    }

    fn tick(&mut self, frame: &SensorFrame, goal: &TargetDomain) -> Result<TickOutput, PlannerFault> {
        if self.plan.as_ref().map(|(g, _)| *g) != Some(goal.center) {
            let traj = self.plan(frame.position, frame.robot_radius, goal)?;
            self.plan = Some((goal.center, traj));
            self.t0 = Some(frame.time);
        }
        let (_, traj) = self.plan.as_ref().unwrap();
        let mut tracker = Tracker {
            traj,
            cfg: self.cfg,
            t0: self.t0,
        };
        Ok(tracker.command(frame))
    }
}
