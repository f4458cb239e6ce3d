//! `imp`: scenario generation, single runs with exports, estimation checks
//! and benchmark campaigns.
//!
//! Exit codes: 0 success, 1 task failure, 2 usage error, 3 I/O or parse error.

mod svg;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};

use imp_core::bench::{
    approach_fixture, blocked_corridor, default_grid, generate_scenario, run_campaign, stress_suite, toppling_variant,
    CampaignConfig, CampaignReport, CellTemplate, PlannerKind, RunSettings, ScenarioSpec,
};
use imp_core::energy::sample_field;
use imp_core::estimator::{estimate_theta, ConfidenceThresholds, PerceptionSample, RegressorBuffer};
use imp_core::numfmt::fmt9;
use imp_core::planner::ImpPlanner;
use imp_core::sim::{run_episode, sense, write_trajectory_csv};
use imp_core::world::WorldState;

#[derive(Parser)]
#[command(name = "imp", version, about = "Interactive motion planning on a cluttered table")]
struct Cli {
    /// Output directory (defaults to $IMP_OUT_DIR, then the current directory).
    #[arg(long, global = true, env = "IMP_OUT_DIR")]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a scenario file.
    Generate(GenerateArgs),
    /// Run one planner on one scenario and export the trajectory.
    Run(RunArgs),
    /// Run a benchmark campaign.
    Bench(BenchArgs),
    /// Fit the contact model to a `dx,v,F` CSV.
    Estimate(EstimateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Fixture {
    BlockedCorridor,
    Approach,
}

#[derive(Args, Clone)]
struct GenSpec {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 6)]
    objects: usize,
    #[arg(long, default_value_t = 0.5)]
    fixed_ratio: f64,
    #[arg(long, default_value_t = 1)]
    targets: usize,
    /// Give objects finite toppling thresholds.
    #[arg(long)]
    toppling: bool,
    /// Use a hand-built fixture instead of random placement.
    #[arg(long, value_enum, requires = "seed")]
    fixture: Option<Fixture>,
}

impl GenSpec {
    fn build(&self) -> Result<WorldState, Failure> {
        let seed = self.seed.ok_or_else(|| Failure::Usage(anyhow!("--seed is required")))?;
        if let Some(f) = self.fixture {
            return Ok(match f {
                Fixture::BlockedCorridor => blocked_corridor(seed),
                Fixture::Approach => approach_fixture(seed),
            });
        }
        let mut spec = ScenarioSpec::new(seed, self.objects, self.fixed_ratio, self.targets);
        if self.toppling {
            spec = toppling_variant(&spec);
        }
        generate_scenario(&spec).map_err(|e| Failure::Task(e.into()))
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    spec: GenSpec,
    /// Output file name, relative to the output directory.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Ablation {
    None,
    Proximity,
    Force,
}

#[derive(Args)]
#[command(group(ArgGroup::new("source").required(true).args(["scenario", "seed"])))]
struct RunArgs {
    /// Scenario file; mutually exclusive with the generation flags.
    #[arg(long, conflicts_with = "seed")]
    scenario: Option<PathBuf>,
    #[command(flatten)]
    spec: GenSpec,
    #[arg(long, value_parser = parse_planner, default_value = "imp")]
    planner: PlannerKind,
    /// Disable one sensing channel.
    #[arg(long, value_enum, default_value = "none")]
    ablate: Ablation,
    #[arg(long)]
    v_max: Option<f64>,
    #[arg(long)]
    k_p: Option<f64>,
    #[arg(long)]
    k_0: Option<f64>,
    /// Per-axis actuation noise (N).
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long)]
    no_csv: bool,
    /// Write an SVG overview of the run.
    #[arg(long)]
    svg: bool,
    /// Dump the start-of-run energy field as CSV and SVG (I-MP only).
    #[arg(long)]
    field_dump: bool,
    /// Prefix for every exported file.
    #[arg(long, default_value = "run")]
    name: String,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, value_delimiter = ',', value_parser = parse_planner, default_value = "imp,apf,sampling,bspline")]
    planners: Vec<PlannerKind>,
    /// Run the fixed-ratio stress grid instead.
    #[arg(long)]
    stress: bool,
    /// Restrict to explicit cells, `objects:ratio:targets`, repeatable.
    #[arg(long, value_parser = parse_cell, conflicts_with = "stress")]
    cell: Vec<CellTemplate>,
    /// Also run I-MP on the toppling variant.
    #[arg(long)]
    toppling: bool,
    #[arg(long, default_value = "bench")]
    name: String,
}

#[derive(Args)]
struct EstimateArgs {
    /// CSV with `dx,v,F` columns.
    input: PathBuf,
}

fn parse_planner(s: &str) -> Result<PlannerKind, String> {
    PlannerKind::parse(s).ok_or_else(|| format!("unknown planner `{s}` (imp, apf, sampling, bspline)"))
}

fn parse_cell(s: &str) -> Result<CellTemplate, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || format!("cell `{s}` is not objects:ratio:targets");
    if parts.len() != 3 {
        return Err(bad());
    }
    Ok(CellTemplate {
        n_objects: parts[0].parse().map_err(|_| bad())?,
        fixed_ratio: parts[1].parse().map_err(|_| bad())?,
        n_targets: parts[2].parse().map_err(|_| bad())?,
    })
}

enum Failure {
    Task(anyhow::Error),
    Usage(anyhow::Error),
    Io(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Task(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Io(_) => 3,
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.into())
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let out_dir = cli.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    let result = fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))
        .map_err(Failure::Io)
        .and_then(|_| match cli.command {
            Command::Generate(a) => cmd_generate(a, &out_dir),
            Command::Run(a) => cmd_run(a, &out_dir),
            Command::Bench(a) => cmd_bench(a, &out_dir),
            Command::Estimate(a) => cmd_estimate(a),
        });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let code = f.code();
            let (Failure::Task(e) | Failure::Usage(e) | Failure::Io(e)) = f;
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}

fn write_file(path: &Path, contents: &[u8]) -> CmdResult {
    fs::write(path, contents)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(Failure::Io)
}

fn cmd_generate(a: GenerateArgs, out_dir: &Path) -> CmdResult {
    let world = a.spec.build()?;
    let name = a
        .output
        .unwrap_or_else(|| PathBuf::from(format!("scenario_{}.json", world.seed)));
    let path = out_dir.join(name);
    write_file(&path, world.to_json().as_bytes())?;
    println!("{}", path.display());
    println!("occupancy {}", fmt9(world.occupancy()));
    Ok(())
}

fn load_world(path: &Path) -> Result<WorldState, Failure> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(Failure::Io)?;
    WorldState::from_json(&text)
        .with_context(|| format!("in {}", path.display()))
        .map_err(Failure::Io)
}

fn cmd_run(a: RunArgs, out_dir: &Path) -> CmdResult {
    let world = match &a.scenario {
        Some(p) => load_world(p)?,
        None => a.spec.build()?,
    };
    let mut settings = RunSettings::default();
    if let Some(v) = a.v_max {
        settings.imp.field.v_max = v;
    }
    if let Some(k) = a.k_p {
        settings.imp.field.k_p = k;
    }
    if let Some(k) = a.k_0 {
        settings.imp.field.k_0 = k;
    }
    settings
        .imp
        .field
        .validate()
        .map_err(|e| Failure::Usage(anyhow!("field gains: {e}")))?;
    settings.sim.actuation_noise_std = a.noise;
    settings.sim.proximity_enabled = a.ablate != Ablation::Proximity;
    settings.sim.force_enabled = a.ablate != Ablation::Force;

    if a.field_dump {
        if a.planner != PlannerKind::Imp {
            return Err(Failure::Usage(anyhow!("--field-dump needs --planner imp")));
        }
        let mut planner = ImpPlanner::new(settings.imp, world.table).with_trace();
        let frame = sense(&world, &settings.sim, 0.0);
        planner
            .plan_tick(&frame, &world.targets[0])
            .map_err(|e| Failure::Task(anyhow!("planner fault at start: {e}")))?;
        let landscape = planner.last_trace().and_then(|t| t.landscape.clone());
        match landscape {
            Some(l) => {
                let samples = sample_field(&l, 61);
                let mut csv = b"x,y,potential,fx,fy\n".to_vec();
                for s in &samples {
                    writeln!(csv, "{},{},{},{},{}", fmt9(s.x), fmt9(s.y), fmt9(s.potential), fmt9(s.fx), fmt9(s.fy))?;
                }
                write_file(&out_dir.join(format!("{}_field.csv", a.name)), &csv)?;
                let doc = svg::field(&world, &samples);
                write_file(&out_dir.join(format!("{}_field.svg", a.name)), doc.as_bytes())?;
            }
            None => eprintln!("warning: no energy field at the start state (planner is probing)"),
        }
    }

    let mut w = world.clone();
    let mut planner = imp_core::bench::make_planner(a.planner, &world, &settings);
    let result = run_episode(&mut w, planner.as_mut(), &settings.sim, &settings.limits(&world, true));

    if !a.no_csv {
        let mut csv = Vec::new();
        write_trajectory_csv(&result.trajectory, &mut csv)?;
        write_file(&out_dir.join(format!("{}_trajectory.csv", a.name)), &csv)?;
    }
    if a.svg {
        let doc = svg::overview(&world, &w, &result.trajectory);
        write_file(&out_dir.join(format!("{}.svg", a.name)), doc.as_bytes())?;
    }

    println!("planner {}", a.planner.as_str());
    println!("success {}", result.success);
    println!("outcome {}", result.failure_cause.as_str());
    println!("targets_reached {}/{}", result.targets_reached, world.targets.len());
    println!("path_cost {}", fmt9(result.path_cost));
    println!("peak_force {}", fmt9(result.peak_force));
    println!(
        "first_contact_peak {}",
        result.first_contact_peak.map(fmt9).unwrap_or_else(|| "none".into())
    );
    println!("duration {}", fmt9(result.duration));
    if result.success {
        Ok(())
    } else {
        Err(Failure::Task(anyhow!("trial failed: {}", result.failure_cause.as_str())))
    }
}

fn print_summary(report: &CampaignReport) {
    println!("{}", CampaignReport::SUMMARY_HEADER.join("\t"));
    for row in report.summary_rows() {
        println!("{}", row.join("\t"));
    }
}

fn cmd_bench(a: BenchArgs, out_dir: &Path) -> CmdResult {
    if a.trials == 0 {
        return Err(Failure::Usage(anyhow!("--trials must be positive")));
    }
    let report = if a.stress {
        stress_suite(a.seed, a.trials)
    } else {
        let grid = if a.cell.is_empty() { default_grid() } else { a.cell.clone() };
        for c in &grid {
            if !(0.0..=1.0).contains(&c.fixed_ratio) || c.n_targets == 0 {
                return Err(Failure::Usage(anyhow!("invalid cell {c:?}")));
            }
        }
        let mut cfg = CampaignConfig::new(a.seed, a.trials, a.planners.clone());
        cfg.toppling = a.toppling;
        run_campaign(&grid, &cfg)
    };
    let json_path = out_dir.join(format!("{}.json", a.name));
    write_file(&json_path, report.to_json().as_bytes())?;
    let csv_path = out_dir.join(format!("{}.csv", a.name));
    let mut wtr = csv::Writer::from_path(&csv_path)
        .with_context(|| format!("writing {}", csv_path.display()))
        .map_err(Failure::Io)?;
    let io = |e: csv::Error| Failure::Io(e.into());
    wtr.write_record(CampaignReport::SUMMARY_HEADER).map_err(io)?;
    for row in report.summary_rows() {
        wtr.write_record(&row).map_err(io)?;
    }
    wtr.flush()?;
    print_summary(&report);
    eprintln!("wrote {} and {}", json_path.display(), csv_path.display());
    Ok(())
}

#[derive(serde::Deserialize)]
struct Row {
    dx: f64,
    v: f64,
    #[serde(rename = "F")]
    f: f64,
}

fn cmd_estimate(a: EstimateArgs) -> CmdResult {
    let mut rdr = csv::Reader::from_path(&a.input)
        .with_context(|| format!("reading {}", a.input.display()))
        .map_err(Failure::Io)?;
    let mut samples = Vec::new();
    for (i, row) in rdr.deserialize::<Row>().enumerate() {
        let r = row
            .with_context(|| format!("{}: data row {}", a.input.display(), i + 1))
            .map_err(Failure::Io)?;
        samples.push(PerceptionSample::new(r.dx, r.v, r.f));
    }
    if samples.is_empty() {
        return Err(Failure::Io(anyhow!("{}: no samples", a.input.display())));
    }
    let mut buf = RegressorBuffer::with_capacity(samples.len());
    for s in samples {
        buf.accumulate(s)
            .map_err(|e| Failure::Io(anyhow!("{}: {e}", a.input.display())))?;
    }
    let (theta, report) =
        estimate_theta(&buf, &ConfidenceThresholds::default()).map_err(|e| Failure::Task(e.into()))?;
    let out = serde_json::json!({
        "K": fmt9(theta.k),
        "D": fmt9(theta.d),
        "C": fmt9(theta.c),
        "residual_rms": fmt9(report.residual_rms),
        "condition_estimate": fmt9(report.condition_estimate),
        "sample_count": report.sample_count,
        "confident": report.confident,
    });
    println!("{}", serde_json::to_string_pretty(&out).expect("json"));
    Ok(())
}
