//! Benchmark protocol: random table scenarios, difficulty scoring, the
//! feasibility ceiling, paired multi-planner campaigns, the stress grid and
//! the toppling variant.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimator::OperableVector;
use crate::geometry::{distance, Disc, Point2, Vec2};
use crate::numfmt::{fmt9, sig9};
use crate::planner::apf::{ApfConfig, ApfPlanner};
use crate::planner::bspline::{BsplineConfig, BsplinePlanner};
use crate::planner::sampling::{SamplingConfig, SamplingPlanner};
use crate::planner::{ImpConfig, ImpPlanner};
use crate::sim::{run_episode, EpisodeLimits, FailureCause, Planner, SimConfig, TrialResult};
use crate::world::{ObjectBody, ObjectClass, RobotBody, Table, TargetDomain, WorldState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BenchError {
    #[error("could not place {requested} objects within the placement budget ({placed} placed)")]
    PlacementBudget { requested: usize, placed: usize },
    #[error("could not place the targets within the placement budget")]
    TargetBudget,
    #[error("invalid scenario spec: {0}")]
    BadSpec(String),
    #[error("difficulty level {value} is not on the {factor} grid")]
    OffGrid { factor: &'static str, value: f64 },
}

/// Levels of the path-coverage factor, indexed by target count - 1.
pub const COVERAGE_LEVELS: [f64; 3] = [0.15, 0.35, 0.65];
pub const OBJECT_LEVELS: [usize; 3] = [1, 3, 6];
pub const FIXED_RATIO_LEVELS: [f64; 3] = [0.0, 0.5, 1.0];
/// Width of the swept corridor used to turn coverage into a path length.
pub const CORRIDOR_WIDTH: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamRanges {
    pub stiffness: (f64, f64),
    pub damping: (f64, f64),
    pub offset: (f64, f64),
    pub mass: (f64, f64),
    pub friction: f64,
    pub topple: (f64, f64),
}

impl Default for ParamRanges {
    fn default() -> Self {
        Self {
            stiffness: (1000.0, 5000.0),
            damping: (5.0, 30.0),
            offset: (0.0, 0.5),
            mass: (0.1, 1.0),
            friction: 0.5,
            topple: (2.0, 6.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub seed: u64,
    pub n_objects: usize,
    pub fixed_ratio: f64,
    pub n_targets: usize,
    pub table: Table,
    pub object_radius: f64,
    pub toppling: bool,
    pub robot_radius: f64,
    pub target_radius: f64,
    pub r_p: f64,
    /// Share of objects dropped near the route rather than anywhere.
    pub corridor_bias: f64,
    pub ranges: ParamRanges,
}

impl ScenarioSpec {
    pub fn new(seed: u64, n_objects: usize, fixed_ratio: f64, n_targets: usize) -> Self {
        Self {
            seed,
            n_objects,
            fixed_ratio,
            n_targets,
            table: Table::default(),
            object_radius: 0.05,
            toppling: false,
            robot_radius: 0.02,
            target_radius: 0.03,
            r_p: 0.3,
            corridor_bias: 0.5,
            ranges: ParamRanges::default(),
        }
    }

    pub fn coverage(&self) -> f64 {
        COVERAGE_LEVELS[self.n_targets.clamp(1, 3) - 1]
    }

    /// Route length realizing the coverage level.
    pub fn route_length(&self) -> f64 {
        self.coverage() * self.table.area() / CORRIDOR_WIDTH
    }

    fn validate(&self) -> Result<(), BenchError> {
        if !(1..=3).contains(&self.n_targets) {
            return Err(BenchError::BadSpec(format!("n_targets {} not in 1..=3", self.n_targets)));
        }
        if !(0.0..=1.0).contains(&self.fixed_ratio) {
            return Err(BenchError::BadSpec(format!("fixed_ratio {} not in [0, 1]", self.fixed_ratio)));
        }
        if !(self.object_radius > 0.0) {
            return Err(BenchError::BadSpec("object radius must be positive".into()));
        }
        Ok(())
    }
}

/// Same scenario with finite toppling thresholds.
pub fn toppling_variant(spec: &ScenarioSpec) -> ScenarioSpec {
    ScenarioSpec {
        toppling: true,
        ..*spec
    }
}

/// SplitMix64 step, used to derive independent seeds.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

pub fn trial_seed(master: u64, cell: u64, trial: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ cell) ^ trial)
}

fn place_route(spec: &ScenarioSpec, rng: &mut ChaCha8Rng) -> Result<(Point2, Vec<Point2>), BenchError> {
    let t = spec.table;
    let m = 0.06;
    let mut seg = spec.route_length() / spec.n_targets as f64;
    for _ in 0..60 {
        for _ in 0..200 {
            let start = Point2::new(rng.gen_range(m..t.width - m), rng.gen_range(m..t.height - m));
            let mut pts = Vec::with_capacity(spec.n_targets);
            let mut cur = start;
            for _ in 0..spec.n_targets {
                let mut placed = None;
                for _ in 0..50 {
                    let p = cur + Vec2::from_angle(rng.gen_range(0.0..std::f64::consts::TAU)) * seg;
                    let far_from_all = pts.iter().chain([start].iter()).all(|q: &Point2| distance(*q, p) > 0.1);
                    if p.x > m && p.x < t.width - m && p.y > m && p.y < t.height - m && far_from_all {
                        placed = Some(p);
                        break;
                    }
                }
                match placed {
                    Some(p) => {
                        pts.push(p);
                        cur = p;
                    }
                    None => break,
                }
            }
            if pts.len() == spec.n_targets {
                return Ok((start, pts));
            }
        }
        seg *= 0.95;
    }
    Err(BenchError::TargetBudget)
}

fn point_on_route(start: Point2, targets: &[Point2], s: f64) -> (Point2, Vec2) {
    let mut prev = start;
    let mut left = s;
    for &t in targets {
        let l = distance(prev, t);
        if left <= l {
            let dir = (t - prev).normalized().unwrap_or(Vec2::new(1.0, 0.0));
            return (prev + dir * left, dir);
        }
        left -= l;
        prev = t;
    }
    (prev, Vec2::new(1.0, 0.0))
}

/// Deterministic random scenario for `spec`.
pub fn generate_scenario(spec: &ScenarioSpec) -> Result<WorldState, BenchError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    // Thresholds come from their own stream so the toppling variant differs
    // from the base scenario in nothing but the thresholds.
    let mut topple_rng = ChaCha8Rng::seed_from_u64(splitmix64(spec.seed ^ 0x7099_1E));
    let (start, targets) = place_route(spec, &mut rng)?;
    let route_len: f64 = {
        let mut prev = start;
        targets
            .iter()
            .map(|t| {
                let l = distance(prev, *t);
                prev = *t;
                l
            })
            .sum()
    };
    let r = spec.object_radius;
    let lateral = Normal::new(0.0, 0.06).unwrap();
    let mut centers: Vec<Point2> = Vec::with_capacity(spec.n_objects);
    let budget = 5000 + 500 * spec.n_objects;
    let mut attempts = 0;
    while centers.len() < spec.n_objects {
        attempts += 1;
        if attempts > budget {
            return Err(BenchError::PlacementBudget {
                requested: spec.n_objects,
                placed: centers.len(),
            });
        }
        let c = if rng.gen_bool(spec.corridor_bias) {
            let (p, dir) = point_on_route(start, &targets, rng.gen_range(0.0..route_len));
            p + dir.perp() * lateral.sample(&mut rng)
        } else {
            Point2::new(rng.gen_range(r..spec.table.width - r), rng.gen_range(r..spec.table.height - r))
        };
        let ok = spec.table.fits(c, r)
            && distance(c, start) > r + spec.robot_radius + 0.03
            && targets
                .iter()
                .all(|t| distance(c, *t) > r + spec.robot_radius + spec.target_radius + 0.01)
            && centers.iter().all(|o| distance(*o, c) > 2.0 * r + 0.01);
        if ok {
            centers.push(c);
        }
    }
    let n_fixed = (spec.n_objects as f64 * spec.fixed_ratio).round() as usize;
    let mut order: Vec<usize> = (0..spec.n_objects).collect();
    order.shuffle(&mut rng);
    let mut fixed = vec![false; spec.n_objects];
    for &i in order.iter().take(n_fixed) {
        fixed[i] = true;
    }
    let pr = spec.ranges;
    let objects = centers
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let theta = OperableVector::new(
                rng.gen_range(pr.stiffness.0..pr.stiffness.1),
                rng.gen_range(pr.damping.0..pr.damping.1),
                rng.gen_range(pr.offset.0..pr.offset.1),
            );
            let mass = rng.gen_range(pr.mass.0..pr.mass.1);
            let threshold = topple_rng.gen_range(pr.topple.0..pr.topple.1);
            ObjectBody {
                id: i as u32,
                disc: Disc { center: *c, radius: r },
                velocity: Vec2::ZERO,
                z_height: 0.1,
                class_truth: if fixed[i] { ObjectClass::Fixed } else { ObjectClass::Movable },
                theta_truth: theta,
                mass,
                friction: pr.friction,
                topple_threshold: if spec.toppling { threshold } else { f64::INFINITY },
                toppled: false,
            }
        })
        .collect();
    let world = WorldState {
        table: spec.table,
        robot: RobotBody::new(start, spec.robot_radius, 1.0),
        objects,
        targets: targets
            .iter()
            .map(|t| TargetDomain::new(*t, spec.target_radius))
            .collect(),
        r_p: spec.r_p,
        seed: spec.seed,
    };
    world.validate().map_err(|e| BenchError::BadSpec(e.to_string()))?;
    Ok(world)
}

/// Route from the robot start to the goal: a movable gate in a wall of fixed
/// discs spanning the table, with start and target on a line through the gate.
pub fn blocked_corridor(seed: u64) -> WorldState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pr = ParamRanges::default();
    let x_wall = rng.gen_range(0.55..0.65);
    let gate = rng.gen_range(2..6usize);
    let y_gate = 0.06 + 0.12 * gate as f64;
    let xs = rng.gen_range(0.15..0.3);
    let xt = rng.gen_range(0.9..1.05);
    let dy = rng.gen_range(-0.1..0.1);
    let start = Point2::new(xs, y_gate + dy);
    let target = Point2::new(xt, y_gate - dy * (xt - x_wall) / (x_wall - xs));
    let objects = (0..8)
        .map(|k| {
            let theta = OperableVector::new(
                rng.gen_range(pr.stiffness.0..pr.stiffness.1),
                rng.gen_range(pr.damping.0..pr.damping.1),
                rng.gen_range(pr.offset.0..pr.offset.1),
            );
            ObjectBody {
                id: k as u32,
                disc: Disc {
                    center: Point2::new(x_wall, 0.06 + 0.12 * k as f64),
                    radius: 0.05,
                },
                velocity: Vec2::ZERO,
                z_height: 0.1,
                class_truth: if k == gate { ObjectClass::Movable } else { ObjectClass::Fixed },
                theta_truth: theta,
                mass: rng.gen_range(0.1..0.8),
                friction: pr.friction,
                topple_threshold: f64::INFINITY,
                toppled: false,
            }
        })
        .collect();
    WorldState {
        table: Table::default(),
        robot: RobotBody::new(start, 0.02, 1.0),
        objects,
        targets: vec![TargetDomain::new(target, 0.03)],
        r_p: 0.3,
        seed,
    }
}

/// One object dead ahead of the robot on the way to the target; even seeds
/// use a fixed object, odd seeds a movable one.
pub fn approach_fixture(seed: u64) -> WorldState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pr = ParamRanges::default();
    let gap = rng.gen_range(0.1..0.35);
    let start = Point2::new(0.15, 0.45);
    let center = Point2::new(start.x + 0.02 + 0.05 + gap, 0.45);
    let obj = ObjectBody {
        id: 0,
        disc: Disc { center, radius: 0.05 },
        velocity: Vec2::ZERO,
        z_height: 0.1,
        class_truth: if seed % 2 == 0 { ObjectClass::Fixed } else { ObjectClass::Movable },
        theta_truth: OperableVector::new(
            rng.gen_range(pr.stiffness.0..pr.stiffness.1),
            rng.gen_range(pr.damping.0..pr.damping.1),
            rng.gen_range(pr.offset.0..pr.offset.1),
        ),
        mass: rng.gen_range(pr.mass.0..pr.mass.1),
        friction: pr.friction,
        topple_threshold: f64::INFINITY,
        toppled: false,
    };
    WorldState {
        table: Table::default(),
        robot: RobotBody::new(start, 0.02, 1.0),
        objects: vec![obj],
        targets: vec![TargetDomain::new(Point2::new(center.x + 0.2, 0.45), 0.03)],
        r_p: 0.3,
        seed,
    }
}

// ---------------------------------------------------------------------------
// Difficulty

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DifficultyFactors {
    pub x1: usize,
    pub x2: f64,
    pub x3: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DifficultyWeights(pub [f64; 3]);

impl Default for DifficultyWeights {
    fn default() -> Self {
        Self([1.0, 1.0, 1.0])
    }
}

pub const SCORE_MIN: f64 = 1.5;
pub const SCORE_MAX: f64 = 9.0;

fn rank_of(levels: &[f64; 3], v: f64, factor: &'static str) -> Result<f64, BenchError> {
    levels
        .iter()
        .position(|l| (l - v).abs() < 1e-9)
        .map(|i| (i + 1) as f64)
        .ok_or(BenchError::OffGrid { factor, value: v })
}

/// Weighted rank sum mapped onto `[SCORE_MIN, SCORE_MAX]`.
pub fn difficulty_score(f: &DifficultyFactors, w: &DifficultyWeights) -> Result<f64, BenchError> {
    let r1 = rank_of(&OBJECT_LEVELS.map(|n| n as f64), f.x1 as f64, "object-count")?;
    let r2 = rank_of(&FIXED_RATIO_LEVELS, f.x2, "fixed-ratio")?;
    let r3 = rank_of(&COVERAGE_LEVELS, f.x3, "path-coverage")?;
    let [w1, w2, w3] = w.0;
    let total = w1 + w2 + w3;
    if !(total > 0.0) || w.0.iter().any(|x| *x < 0.0) {
        return Err(BenchError::BadSpec("difficulty weights must be nonnegative with positive sum".into()));
    }
    let raw = w1 * r1 + w2 * r2 + w3 * r3;
    Ok(SCORE_MIN + (raw - total) * (SCORE_MAX - SCORE_MIN) / (2.0 * total))
}

// ---------------------------------------------------------------------------
// Feasibility ceiling

/// Whether every target is reachable once all movable objects are removed,
/// by flood fill on a grid of `cell` meters at robot-radius inflation.
pub fn feasibility_at(world: &WorldState, cell: f64) -> bool {
    let t = world.table;
    let r = world.robot.radius;
    let nx = (t.width / cell).floor() as usize + 1;
    let ny = (t.height / cell).floor() as usize + 1;
    let fixed: Vec<&ObjectBody> = world
        .objects
        .iter()
        .filter(|o| o.class_truth == ObjectClass::Fixed)
        .collect();
    let at = |i: usize, j: usize| Point2::new(i as f64 * cell, j as f64 * cell);
    let free: Vec<bool> = (0..nx * ny)
        .map(|k| {
            let p = at(k % nx, k / nx);
            t.fits(p, r) && fixed.iter().all(|o| distance(p, o.pose()) >= o.disc.radius + r)
        })
        .collect();
    let mut seen = vec![false; nx * ny];
    let mut stack = Vec::new();
    let s = world.robot.position;
    let reach = cell * 1.5;
    for k in 0..nx * ny {
        if free[k] && distance(at(k % nx, k / nx), s) <= reach {
            seen[k] = true;
            stack.push(k);
        }
    }
    while let Some(k) = stack.pop() {
        let (i, j) = ((k % nx) as i64, (k / nx) as i64);
        for (di, dj) in [(-1, 0), (1, 0), (0, -1), (0, 1), (-1, -1), (-1, 1), (1, -1), (1, 1)] {
            let (a, b) = (i + di, j + dj);
            if a < 0 || b < 0 || a >= nx as i64 || b >= ny as i64 {
                continue;
            }
            let n = b as usize * nx + a as usize;
            if free[n] && !seen[n] {
                seen[n] = true;
                stack.push(n);
            }
        }
    }
    world.targets.iter().all(|g| {
        let (i0, i1) = (((g.center.x - g.radius) / cell).floor().max(0.0) as usize, ((g.center.x + g.radius) / cell).ceil() as usize);
        let (j0, j1) = (((g.center.y - g.radius) / cell).floor().max(0.0) as usize, ((g.center.y + g.radius) / cell).ceil() as usize);
        (j0..=j1.min(ny - 1)).any(|j| {
            (i0..=i1.min(nx - 1)).any(|i| {
                let k = j * nx + i;
                seen[k] && distance(at(i, j), g.center) <= g.radius
            })
        })
    })
}

pub const FEASIBILITY_CELL: f64 = 0.005;

pub fn feasibility_upper_bound(world: &WorldState) -> bool {
    feasibility_at(world, FEASIBILITY_CELL)
}

// ---------------------------------------------------------------------------
// Campaigns

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannerKind {
    Imp,
    Apf,
    Sampling,
    Bspline,
}

impl PlannerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PlannerKind::Imp => "imp",
            PlannerKind::Apf => "apf",
            PlannerKind::Sampling => "sampling",
            PlannerKind::Bspline => "bspline",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "imp" => Some(PlannerKind::Imp),
            "apf" => Some(PlannerKind::Apf),
            "sampling" => Some(PlannerKind::Sampling),
            "bspline" => Some(PlannerKind::Bspline),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    pub sim: SimConfig,
    pub imp: ImpConfig,
    pub max_time_per_target: f64,
    pub force_fail: f64,
    /// Seconds without 1 mm of progress that end a trial early.
    pub stall_time: f64,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            sim: SimConfig::default(),
            imp: ImpConfig::default(),
            max_time_per_target: 60.0,
            force_fail: 10.0,
            stall_time: 15.0,
        }
    }
}

impl RunSettings {
    pub fn limits(&self, world: &WorldState, record: bool) -> EpisodeLimits {
        EpisodeLimits {
            max_time: self.max_time_per_target * world.targets.len() as f64,
            force_fail: self.force_fail,
            record_trajectory: record,
            stall_time: self.stall_time,
            ..EpisodeLimits::default()
        }
    }
}

pub fn make_planner(kind: PlannerKind, world: &WorldState, settings: &RunSettings) -> Box<dyn Planner> {
    match kind {
        PlannerKind::Imp => Box::new(ImpPlanner::new(settings.imp, world.table)),
        PlannerKind::Apf => Box::new(ApfPlanner::new(ApfConfig {
            v_max: settings.imp.field.v_max,
            ..ApfConfig::default()
        })),
        PlannerKind::Sampling => Box::new(SamplingPlanner::new(SamplingConfig::default(), world.table, world.seed)),
        PlannerKind::Bspline => Box::new(BsplinePlanner::new(
            BsplineConfig::default(),
            world.table,
            world.objects.iter().map(|o| o.disc).collect(),
            settings.sim,
            world.seed,
        )),
    }
}

/// Runs one planner on a private copy of `world`.
pub fn run_trial(kind: PlannerKind, world: &WorldState, settings: &RunSettings, record: bool) -> TrialResult {
    let mut w = world.clone();
    let mut planner = make_planner(kind, world, settings);
    run_episode(&mut w, planner.as_mut(), &settings.sim, &settings.limits(world, record))
}

/// Wilson score interval half-width and center at 95% confidence.
pub fn wilson_interval(successes: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.96_f64;
    let n_f = n as f64;
    let p = successes as f64 / n_f;
    let denom = 1.0 + z * z / n_f;
    let center = (p + z * z / (2.0 * n_f)) / denom;
    let half = z * ((p * (1.0 - p) + z * z / (4.0 * n_f)) / n_f).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerStats {
    pub planner: PlannerKind,
    pub successes: usize,
    pub r_m: f64,
    pub r_s: f64,
    pub gap: f64,
    pub r_m_ci: (f64, f64),
    /// Success under the toppling variant on the same seeds.
    pub r_k: Option<f64>,
    pub path_cost_mean: Option<f64>,
    pub path_cost_median: Option<f64>,
    pub peak_force_max: f64,
    pub force_failures: usize,
    pub timeouts: usize,
    pub other_failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub n_objects: usize,
    pub fixed_ratio: f64,
    pub n_targets: usize,
    pub trials: usize,
    pub feasible: usize,
    pub r_s_ci: (f64, f64),
    pub difficulty: Option<f64>,
    pub mean_occupancy: f64,
    pub seeds: Vec<u64>,
    pub planners: Vec<PlannerStats>,
}

impl CellReport {
    pub fn stats(&self, kind: PlannerKind) -> Option<&PlannerStats> {
        self.planners.iter().find(|p| p.planner == kind)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub master_seed: u64,
    pub trials_per_cell: usize,
    pub cells: Vec<CellReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellTemplate {
    pub n_objects: usize,
    pub fixed_ratio: f64,
    pub n_targets: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub master_seed: u64,
    pub trials_per_cell: usize,
    pub planners: Vec<PlannerKind>,
    pub settings: RunSettings,
    /// Also run I-MP on the toppling variant of every feasible trial.
    pub toppling: bool,
    /// Only compare toppling at cells with at least this fixed ratio.
    pub toppling_min_ratio: f64,
}

impl CampaignConfig {
    pub fn new(master_seed: u64, trials_per_cell: usize, planners: Vec<PlannerKind>) -> Self {
        Self {
            master_seed,
            trials_per_cell,
            planners,
            settings: RunSettings::default(),
            toppling: false,
            toppling_min_ratio: 0.0,
        }
    }
}

/// The 27-cell grid of object count x fixed ratio x target count.
pub fn default_grid() -> Vec<CellTemplate> {
    let mut out = Vec::new();
    for &n_objects in &OBJECT_LEVELS {
        for &fixed_ratio in &FIXED_RATIO_LEVELS {
            for n_targets in 1..=3 {
                out.push(CellTemplate {
                    n_objects,
                    fixed_ratio,
                    n_targets,
                });
            }
        }
    }
    out
}

fn median(v: &mut [f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// Generates the trial world for `(cell, trial)`, resampling the seed when
/// placement fails.
pub fn cell_world(master: u64, cell_index: usize, trial: usize, t: &CellTemplate) -> (u64, WorldState) {
    let mut seed = trial_seed(master, cell_index as u64, trial as u64);
    loop {
        let spec = ScenarioSpec::new(seed, t.n_objects, t.fixed_ratio, t.n_targets);
        if let Ok(w) = generate_scenario(&spec) {
            return (seed, w);
        }
        seed = splitmix64(seed);
    }
}

pub fn run_cell(cfg: &CampaignConfig, cell_index: usize, t: &CellTemplate) -> CellReport {
    let n = cfg.trials_per_cell.max(1);
    let mut seeds = Vec::with_capacity(n);
    let mut feasible = 0;
    let mut occupancy = 0.0;
    let mut results: Vec<Vec<Option<TrialResult>>> = vec![Vec::with_capacity(n); cfg.planners.len()];
    let do_topple = cfg.toppling && t.fixed_ratio >= cfg.toppling_min_ratio;
    let mut topple_successes = 0;
    for trial in 0..n {
        let (seed, world) = cell_world(cfg.master_seed, cell_index, trial, t);
        seeds.push(seed);
        occupancy += world.occupancy();
        // The ceiling is settled before any planner runs.
        let ok = feasibility_upper_bound(&world);
        feasible += ok as usize;
        for (k, kind) in cfg.planners.iter().enumerate() {
            results[k].push(ok.then(|| run_trial(*kind, &world, &cfg.settings, false)));
        }
        if do_topple && ok {
            let spec = toppling_variant(&ScenarioSpec::new(seed, t.n_objects, t.fixed_ratio, t.n_targets));
            let tw = generate_scenario(&spec).expect("variant of a placeable scenario");
            if run_trial(PlannerKind::Imp, &tw, &cfg.settings, false).success {
                topple_successes += 1;
            }
        }
    }
    let r_s = feasible as f64 / n as f64;
    let planners = cfg
        .planners
        .iter()
        .zip(&results)
        .map(|(kind, rs)| {
            let ran: Vec<&TrialResult> = rs.iter().flatten().collect();
            let successes = ran.iter().filter(|r| r.success).count();
            let mut costs: Vec<f64> = ran.iter().filter(|r| r.success).map(|r| r.path_cost).collect();
            let mean = (!costs.is_empty()).then(|| costs.iter().sum::<f64>() / costs.len() as f64);
            let r_m = successes as f64 / n as f64;
            PlannerStats {
                planner: *kind,
                successes,
                r_m,
                r_s,
                gap: r_s - r_m,
                r_m_ci: wilson_interval(successes, n),
                r_k: (do_topple && *kind == PlannerKind::Imp).then(|| topple_successes as f64 / n as f64),
                path_cost_mean: mean,
                path_cost_median: median(&mut costs),
                peak_force_max: ran.iter().map(|r| r.peak_force).fold(0.0, f64::max),
                force_failures: ran.iter().filter(|r| r.failure_cause == FailureCause::Force).count(),
                timeouts: ran.iter().filter(|r| r.failure_cause == FailureCause::Timeout).count(),
                other_failures: ran
                    .iter()
                    .filter(|r| !r.success && !matches!(r.failure_cause, FailureCause::Force | FailureCause::Timeout))
                    .count(),
            }
        })
        .collect();
    let difficulty = difficulty_score(
        &DifficultyFactors {
            x1: t.n_objects,
            x2: t.fixed_ratio,
            x3: COVERAGE_LEVELS[t.n_targets.clamp(1, 3) - 1],
        },
        &DifficultyWeights::default(),
    )
    .ok();
    CellReport {
        n_objects: t.n_objects,
        fixed_ratio: t.fixed_ratio,
        n_targets: t.n_targets,
        trials: n,
        feasible,
        r_s_ci: wilson_interval(feasible, n),
        difficulty,
        mean_occupancy: occupancy / n as f64,
        seeds,
        planners,
    }
}

/// Runs every cell with paired worlds across planners. Trial faults are
/// recorded as failures; the campaign itself never aborts.
pub fn run_campaign(grid: &[CellTemplate], cfg: &CampaignConfig) -> CampaignReport {
    CampaignReport {
        master_seed: cfg.master_seed,
        trials_per_cell: cfg.trials_per_cell,
        cells: grid.iter().enumerate().map(|(i, t)| run_cell(cfg, i, t)).collect(),
    }
}

pub const STRESS_RATIOS: [f64; 4] = [0.1, 0.2, 0.4, 0.8];

pub fn stress_grid() -> Vec<CellTemplate> {
    let mut out = Vec::new();
    for n_objects in 6..=15 {
        for &fixed_ratio in &STRESS_RATIOS {
            out.push(CellTemplate {
                n_objects,
                fixed_ratio,
                n_targets: 1,
            });
        }
    }
    out
}

/// The object-count x fixed-ratio stress grid for I-MP, with the toppling
/// comparison at fixed ratios of 0.4 and above.
pub fn stress_suite(master_seed: u64, trials_per_cell: usize) -> CampaignReport {
    let mut cfg = CampaignConfig::new(master_seed, trials_per_cell, vec![PlannerKind::Imp]);
    cfg.toppling = true;
    cfg.toppling_min_ratio = 0.4;
    run_campaign(&stress_grid(), &cfg)
}

// ---------------------------------------------------------------------------
// Report output

fn round_report(r: &CampaignReport) -> CampaignReport {
    let mut r = r.clone();
    for c in &mut r.cells {
        c.fixed_ratio = sig9(c.fixed_ratio);
        c.r_s_ci = (sig9(c.r_s_ci.0), sig9(c.r_s_ci.1));
        c.difficulty = c.difficulty.map(sig9);
        c.mean_occupancy = sig9(c.mean_occupancy);
        for p in &mut c.planners {
            p.r_m = sig9(p.r_m);
            p.r_s = sig9(p.r_s);
            p.gap = sig9(p.gap);
            p.r_m_ci = (sig9(p.r_m_ci.0), sig9(p.r_m_ci.1));
            p.r_k = p.r_k.map(sig9);
            p.path_cost_mean = p.path_cost_mean.map(sig9);
            p.path_cost_median = p.path_cost_median.map(sig9);
            p.peak_force_max = sig9(p.peak_force_max);
        }
    }
    r
}

impl CampaignReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&round_report(self)).expect("report serializes")
    }

    pub fn summary_rows(&self) -> Vec<Vec<String>> {
        let mut rows = Vec::new();
        for c in &self.cells {
            for p in &c.planners {
                rows.push(vec![
                    c.n_objects.to_string(),
                    fmt9(c.fixed_ratio),
                    c.n_targets.to_string(),
                    p.planner.as_str().to_string(),
                    c.trials.to_string(),
                    fmt9(p.r_m),
                    fmt9(p.r_s),
                    fmt9(p.gap),
                    p.r_k.map(fmt9).unwrap_or_default(),
                    p.path_cost_mean.map(fmt9).unwrap_or_default(),
                    fmt9(p.peak_force_max),
                ]);
            }
        }
        rows
    }

    pub const SUMMARY_HEADER: [&'static str; 11] = [
        "n_objects",
        "fixed_ratio",
        "n_targets",
        "planner",
        "trials",
        "R_m",
        "R_s",
        "gap",
        "R_k",
        "path_cost_mean",
        "peak_force_max",
    ];
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn occupancy_anchor() {
        let w = generate_scenario(&ScenarioSpec::new(4, 6, 0.5, 1)).unwrap();
        let occ = w.occupancy();
        // six 5 cm discs cover 4.36% of the default table
        assert!((occ - 6.0 * std::f64::consts::PI * 0.0025 / 1.08).abs() < 1e-12);
    }

    #[test]
    fn fixed_count_and_determinism() {
        let spec = ScenarioSpec::new(11, 6, 1.0, 2);
        let a = generate_scenario(&spec).unwrap();
        assert!(a.objects.iter().all(|o| o.class_truth == ObjectClass::Fixed));
        assert_eq!(a, generate_scenario(&spec).unwrap());
        let b = generate_scenario(&ScenarioSpec::new(11, 7, 0.5, 1)).unwrap();
        assert_eq!(b.objects.iter().filter(|o| o.class_truth == ObjectClass::Fixed).count(), 4);
    }

    #[test]
    fn placements_are_valid() {
        for seed in 0..30 {
            let spec = ScenarioSpec::new(seed, 12, 0.4, 1 + (seed as usize % 3));
            let w = generate_scenario(&spec).unwrap();
            assert_eq!(w.targets.len(), spec.n_targets);
            for (i, a) in w.objects.iter().enumerate() {
                assert!(w.table.fits(a.pose(), a.disc.radius));
                for b in &w.objects[i + 1..] {
                    assert!(distance(a.pose(), b.pose()) > a.disc.radius + b.disc.radius);
                }
            }
        }
    }

    #[test]
    fn toppling_variant_changes_only_thresholds() {
        let spec = ScenarioSpec::new(5, 8, 0.4, 1);
        let base = generate_scenario(&spec).unwrap();
        let t = generate_scenario(&toppling_variant(&spec)).unwrap();
        assert!(toppling_variant(&spec).toppling);
        for (a, b) in base.objects.iter().zip(&t.objects) {
            assert_eq!(a.pose(), b.pose());
            assert_eq!(a.theta_truth, b.theta_truth);
            assert!(a.topple_threshold.is_infinite() && b.topple_threshold.is_finite());
            assert!((2.0..6.0).contains(&b.topple_threshold));
        }
        assert_eq!(base.robot, t.robot);
        assert_eq!(base.targets, t.targets);
    }

    #[test]
    fn too_many_objects_exhaust_budget() {
        let err = generate_scenario(&ScenarioSpec::new(1, 500, 0.5, 1)).unwrap_err();
        assert!(matches!(err, BenchError::PlacementBudget { requested: 500, .. }));
    }

    #[test]
    fn difficulty_range_and_monotonicity() {
        let w = DifficultyWeights::default();
        let lo = difficulty_score(&DifficultyFactors { x1: 1, x2: 0.0, x3: 0.15 }, &w).unwrap();
        let hi = difficulty_score(&DifficultyFactors { x1: 6, x2: 1.0, x3: 0.65 }, &w).unwrap();
        assert_eq!(lo, SCORE_MIN);
        assert_eq!(hi, SCORE_MAX);
        let mut prev = lo;
        for x1 in OBJECT_LEVELS {
            let s = difficulty_score(&DifficultyFactors { x1, x2: 0.0, x3: 0.15 }, &w).unwrap();
            assert!(s >= prev);
            prev = s;
        }
        assert!(difficulty_score(&DifficultyFactors { x1: 2, x2: 0.0, x3: 0.15 }, &w).is_err());
    }

    #[test]
    fn feasibility_basics() {
        let mut spec = ScenarioSpec::new(2, 6, 0.0, 1);
        let w = generate_scenario(&spec).unwrap();
        assert!(feasibility_upper_bound(&w));
        // a ring of fixed discs around the target
        spec.n_objects = 0;
        let mut w = generate_scenario(&spec).unwrap();
        let g = w.targets[0].center;
        for k in 0..16 {
            let c = g + Vec2::from_angle(k as f64 * std::f64::consts::TAU / 16.0) * 0.15;
            w.objects.push(ObjectBody {
                id: k,
                disc: Disc { center: c, radius: 0.05 },
                velocity: Vec2::ZERO,
                z_height: 0.1,
                class_truth: ObjectClass::Fixed,
                theta_truth: OperableVector::new(1000.0, 5.0, 0.0),
                mass: 1.0,
                friction: 0.5,
                topple_threshold: f64::INFINITY,
                toppled: false,
            });
        }
        if distance(w.robot.position, g) > 0.25 {
            assert!(!feasibility_upper_bound(&w));
        }
    }

    #[test]
    fn blocked_corridor_is_feasible_only_through_gate() {
        for seed in 0..10 {
            let w = blocked_corridor(seed);
            w.validate().unwrap();
            assert!(feasibility_upper_bound(&w));
            let mut all_fixed = w.clone();
            for o in &mut all_fixed.objects {
                o.class_truth = ObjectClass::Fixed;
            }
            assert!(!feasibility_upper_bound(&all_fixed));
        }
    }

    #[test]
    fn wilson_bounds() {
        let (lo, hi) = wilson_interval(50, 100);
        assert!(lo < 0.5 && hi > 0.5);
        assert!((0.5 - lo - (hi - 0.5)).abs() < 1e-12);
        let (lo, hi) = wilson_interval(0, 10);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.35);
    }

    #[test]
    fn seeds_are_distinct() {
        let mut s: Vec<u64> = (0..100).map(|t| trial_seed(7, 3, t)).collect();
        s.sort_unstable();
        s.dedup();
        assert_eq!(s.len(), 100);
    }
}
