//! The `rades` command line.
//!
//! Every subcommand returns a process exit status instead of exiting, so the
//! whole surface is callable from tests.

pub mod svg;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rades_core::bench::{
    convergence_csv, counts_csv, pairwise_matrix, run_benchmark, summarize_counts, BenchConfig, BenchInstance,
    ResultSet, DEFAULT_ALPHA, DEFAULT_RUNS,
};
use rades_core::objective::{build_roadmaps, ScenarioObjective, BASE_BOUNDS, HEIGHT_BOUNDS};
use rades_core::optimizer::{run, Algorithm, OptimizerConfig, RunRecord};
use rades_core::planner::{extract_trajectories, PlanExport, PlannerConfig, DEFAULT_BUDGET, TRAJECTORY_SAMPLES};
use rades_core::roadmap::{build_lattice, RoadmapDump};
use rades_core::scenario::{builtin_instance, load_scenario, Scenario};
use rades_core::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;

pub const RUN_FILE: &str = "run.json";
pub const PLAN_FILE: &str = "plan.json";
pub const RESULTS_FILE: &str = "results.jsonl";
pub const COUNTS_FILE: &str = "counts.csv";
pub const CONVERGENCE_FILE: &str = "convergence.csv";
pub const TRAJECTORIES_FILE: &str = "trajectories.svg";

#[derive(Debug, Parser)]
#[command(name = "rades", version, about = "Tune lattice roadmaps for multi-robot intersection crossing")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimize the roadmaps of one scenario and export the best joint plan.
    Plan(PlanArgs),
    /// Run instances x algorithms x runs and write every run record.
    Bench(BenchArgs),
    /// Pairwise rank-sum comparison of a results file.
    Stats(StatsArgs),
    /// Draw a plan or roadmap as SVG, or export convergence data as CSV.
    Render(RenderArgs),
    /// Build one robot's roadmap and report its size.
    Roadmap(RoadmapArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlgorithmArg {
    Rades,
    Derand,
    Rbde,
}

impl From<AlgorithmArg> for Algorithm {
    fn from(a: AlgorithmArg) -> Algorithm {
        match a {
            AlgorithmArg::Rades => Algorithm::Rades,
            AlgorithmArg::Derand => Algorithm::Derand,
            AlgorithmArg::Rbde => Algorithm::Rbde,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct DeArgs {
    #[arg(long, default_value_t = 300)]
    pub max_fes: u64,
    /// Planner expansions per evaluation.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    pub budget: usize,
    #[arg(long, default_value_t = 0.5)]
    pub cr: f64,
    #[arg(long = "f", default_value_t = 0.7)]
    pub f: f64,
    #[arg(long, default_value_t = 128)]
    pub q_threshold: u32,
    #[arg(long, default_value_t = 10)]
    pub np: usize,
    #[arg(long, default_value_t = 2.0)]
    pub beta: f64,
}

impl DeArgs {
    pub fn optimizer(&self) -> OptimizerConfig {
        OptimizerConfig {
            np: self.np,
            f: self.f,
            cr: self.cr,
            q: self.q_threshold,
            beta: self.beta,
            max_fes: self.max_fes,
            ..OptimizerConfig::default()
        }
    }

    pub fn planner(&self) -> PlannerConfig {
        PlannerConfig {
            budget: self.budget,
            ..PlannerConfig::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    /// Scenario file, or `instance-K` for built-in instance K.
    #[arg(long)]
    pub scenario: String,
    #[arg(long, value_enum, default_value = "rades")]
    pub algorithm: AlgorithmArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub de: DeArgs,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Scenario files or `instance-K`; all nine built-ins when omitted.
    #[arg(long)]
    pub scenario: Vec<String>,
    /// Algorithms to run; all three when omitted.
    #[arg(long, value_enum)]
    pub algorithm: Vec<AlgorithmArg>,
    #[arg(long, default_value_t = DEFAULT_RUNS)]
    pub runs: usize,
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; all processors when omitted.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub de: DeArgs,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub results: PathBuf,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RenderMode {
    Trajectories,
    Convergence,
    Roadmap,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long, value_enum)]
    pub mode: RenderMode,
    #[arg(long)]
    pub scenario: Option<String>,
    /// Plan file, for trajectories.
    #[arg(long)]
    pub plan: Option<PathBuf>,
    /// Results file, for convergence.
    #[arg(long)]
    pub results: Option<PathBuf>,
    /// Restrict convergence data to one instance.
    #[arg(long)]
    pub instance: Option<String>,
    #[arg(long)]
    pub robot: Option<u32>,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct RoadmapArgs {
    #[arg(long)]
    pub scenario: String,
    #[arg(long)]
    pub robot: u32,
    #[arg(long)]
    pub b: f64,
    #[arg(long)]
    pub h: f64,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

/// A failure reported on stderr with exit status 1.
#[derive(Debug)]
pub struct CliError(pub String);

impl<E: std::fmt::Display> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `args` (program name first) and runs the command.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = if code == EXIT_OK { write!(out, "{e}") } else { write!(err, "{e}") };
            return code;
        }
    };
    match execute(&cli.command, out, err) {
        Ok(code) => code,
        Err(CliError(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_ERROR
        }
    }
}

pub fn execute(cmd: &Command, out: &mut dyn Write, err: &mut (dyn Write + Send)) -> CliResult<i32> {
    match cmd {
        Command::Plan(a) => cmd_plan(a, out),
        Command::Bench(a) => cmd_bench(a, out, err),
        Command::Stats(a) => cmd_stats(a, out),
        Command::Render(a) => cmd_render(a, out),
        Command::Roadmap(a) => cmd_roadmap(a, out),
    }
}

/// Built-in index of a name like `instance-3`.
pub fn builtin_index(name: &str) -> Option<usize> {
    let k: usize = name.strip_prefix("instance-")?.parse().ok()?;
    builtin_instance(k).map(|_| k)
}

/// A scenario file, or a built-in instance when no such file exists.
pub fn resolve_scenario(arg: &str) -> CliResult<Scenario> {
    let path = Path::new(arg);
    if path.exists() {
        let bytes = fs::read(path).map_err(|e| CliError(format!("{arg}: {e}")))?;
        return load_scenario(&bytes).map_err(|e| CliError(format!("{arg}: {e}")));
    }
    match builtin_index(arg) {
        Some(k) => Ok(builtin_instance(k).expect("index checked")),
        None => Err(CliError(format!("{arg}: no such file or built-in instance"))),
    }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> CliResult<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| CliError(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| CliError(format!("{}: {e}", path.display())))?;
    Ok(path)
}

pub fn cmd_plan(a: &PlanArgs, out: &mut dyn Write) -> CliResult<i32> {
    let scenario = resolve_scenario(&a.scenario)?;
    let algorithm = Algorithm::from(a.algorithm);
    let objective = ScenarioObjective::new(scenario, a.de.planner());
    let outcome = run(algorithm, &objective, &a.de.optimizer(), a.seed)?;
    let record = &outcome.record;
    let mut text = serde_json::to_string(record)?;
    text.push('\n');
    write_file(&a.out_dir, RUN_FILE, &text)?;
    let s = &objective.scenario;
    if let Some(plan) = &outcome.best.plan {
        let roadmaps = build_roadmaps(&record.best_x, s)?;
        let ids: Vec<u32> = s.robots.iter().map(|r| r.id).collect();
        let trajs = extract_trajectories(plan, &roadmaps, &ids, TRAJECTORY_SAMPLES);
        let mut doc = PlanExport::new(plan.cost, &trajs).to_json();
        doc.push('\n');
        write_file(&a.out_dir, PLAN_FILE, &doc)?;
    }
    writeln!(
        out,
        "{} on {}: best cost {:.4} ({}) after {} evaluations",
        algorithm,
        s.name,
        record.best_cost,
        if record.feasible { "feasible" } else { "infeasible" },
        record.trace.len()
    )?;
    Ok(if record.feasible { EXIT_OK } else { EXIT_INFEASIBLE })
}

pub fn cmd_bench(a: &BenchArgs, out: &mut dyn Write, err: &mut (dyn Write + Send)) -> CliResult<i32> {
    let names: Vec<String> = if a.scenario.is_empty() {
        (1..=9).map(|k| format!("instance-{k}")).collect()
    } else {
        a.scenario.clone()
    };
    let mut instances = Vec::new();
    for (pos, name) in names.iter().enumerate() {
        let scenario = resolve_scenario(name)?;
        // built-ins keep their own index so subsets reuse the full protocol's seeds
        let index = builtin_index(name).filter(|_| !Path::new(name).exists()).unwrap_or(pos + 1) as u64;
        instances.push(BenchInstance { index, scenario });
    }
    let algorithms: Vec<Algorithm> = if a.algorithm.is_empty() {
        Algorithm::ALL.to_vec()
    } else {
        a.algorithm.iter().map(|&x| x.into()).collect()
    };
    let config = BenchConfig {
        optimizer: a.de.optimizer(),
        planner: a.de.planner(),
        runs: a.runs,
        master_seed: a.seed,
        jobs: a.jobs,
    };
    let total = instances.len() * algorithms.len() * a.runs;
    let done = AtomicUsize::new(0);
    let err = Mutex::new(err);
    let rs = run_benchmark(&instances, &algorithms, &config, &|r: &RunRecord| {
        let k = done.fetch_add(1, Ordering::Relaxed) + 1;
        let status = match &r.error {
            Some(e) => format!("failed: {e}"),
            None => format!("{:.4}{}", r.best_cost, if r.feasible { "" } else { " (infeasible)" }),
        };
        if let Ok(mut w) = err.lock() {
            let _ = writeln!(w, "[{k}/{total}] {} {} seed {} -> {status}", r.instance, r.algorithm, r.seed);
        }
    })?;
    let path = write_file(&a.out_dir, RESULTS_FILE, &rs.to_jsonl())?;
    let ok = rs.records.iter().filter(|r| r.is_ok()).count();
    writeln!(out, "wrote {} records ({} failed) to {}", rs.records.len(), rs.records.len() - ok, path.display())?;
    Ok(if ok > 0 { EXIT_OK } else { EXIT_ERROR })
}

fn file_stem(instance: &str) -> String {
    instance
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn read_results(path: &Path) -> CliResult<ResultSet> {
    let text = fs::read_to_string(path).map_err(|e| CliError(format!("{}: {e}", path.display())))?;
    ResultSet::from_jsonl(&text).map_err(|e| CliError(format!("{}: {e}", path.display())))
}

pub fn cmd_stats(a: &StatsArgs, out: &mut dyn Write) -> CliResult<i32> {
    if !(a.alpha > 0.0 && a.alpha <= 1.0) {
        return Err(CliError(format!("alpha {} must lie in (0, 1]", a.alpha)));
    }
    let rs = read_results(&a.results)?;
    if rs.algorithms().len() < 2 {
        return Err(CliError("results hold fewer than two algorithms, nothing to compare".into()));
    }
    let missing = rs.incomplete_cells();
    if !missing.is_empty() {
        let list: Vec<String> = missing.iter().map(|(i, a)| format!("{i}/{a}")).collect();
        return Err(CliError(format!("incomplete cells: {}", list.join(", "))));
    }
    let mut matrices = Vec::new();
    for inst in rs.instances() {
        let m = pairwise_matrix(&rs, &inst, a.alpha)?;
        write_file(&a.out_dir, &format!("matrix-{}.csv", file_stem(&inst)), &m.to_csv())?;
        matrices.push(m);
    }
    let counts = summarize_counts(&matrices);
    write_file(&a.out_dir, COUNTS_FILE, &counts_csv(&counts))?;
    writeln!(out, "{} instances, alpha {}", matrices.len(), a.alpha)?;
    for (rank, c) in counts.iter().enumerate() {
        writeln!(out, "{}. {c}", rank + 1)?;
    }
    Ok(EXIT_OK)
}

fn check_bounds(b: f64, h: f64) -> CliResult<()> {
    let (bl, bh) = BASE_BOUNDS;
    let (hl, hh) = HEIGHT_BOUNDS;
    if !(bl..=bh).contains(&b) {
        return Err(CliError(format!("b = {b} outside the allowed range [{bl}, {bh}]")));
    }
    if !(hl..=hh).contains(&h) {
        return Err(CliError(format!("h = {h} outside the allowed range [{hl}, {hh}]")));
    }
    Ok(())
}

fn robot_roadmap(s: &Scenario, robot: u32, b: f64, h: f64) -> CliResult<rades_core::roadmap::LatticeRoadmap> {
    check_bounds(b, h)?;
    let spec = s
        .robot(robot)
        .ok_or_else(|| CliError(format!("scenario {} has no robot {robot}", s.name)))?;
    Ok(build_lattice(&spec.reference, b, h, &s.env, s.dims())?)
}

pub fn cmd_render(a: &RenderArgs, out: &mut dyn Write) -> CliResult<i32> {
    let need = |what: &str, v: bool| -> CliResult<()> {
        if v {
            Ok(())
        } else {
            Err(CliError(format!("{:?} mode needs {what}", a.mode).to_lowercase()))
        }
    };
    let path = match a.mode {
        RenderMode::Trajectories => {
            need("--scenario and --plan", a.scenario.is_some() && a.plan.is_some() && a.results.is_none())?;
            let s = resolve_scenario(a.scenario.as_deref().expect("checked"))?;
            let plan_path = a.plan.as_ref().expect("checked");
            let bytes = fs::read(plan_path).map_err(|e| CliError(format!("{}: {e}", plan_path.display())))?;
            let plan = PlanExport::from_json(&bytes).map_err(|e| CliError(format!("{}: {e}", plan_path.display())))?;
            for track in &plan.robots {
                if s.robot(track.id).is_none() {
                    return Err(CliError(format!("plan robot {} is not in scenario {}", track.id, s.name)));
                }
            }
            write_file(&a.out_dir, TRAJECTORIES_FILE, &svg::trajectories_svg(&s, &plan, svg::RenderSpec::default()))?
        }
        RenderMode::Convergence => {
            need("--results", a.results.is_some() && a.plan.is_none())?;
            let mut rs = read_results(a.results.as_ref().expect("checked"))?;
            if let Some(inst) = &a.instance {
                rs.records.retain(|r| &r.instance == inst);
                if rs.records.is_empty() {
                    return Err(CliError(format!("no records for instance {inst}")));
                }
            }
            write_file(&a.out_dir, CONVERGENCE_FILE, &convergence_csv(&rs))?
        }
        RenderMode::Roadmap => {
            need(
                "--scenario, --robot, --b and --h",
                a.scenario.is_some() && a.robot.is_some() && a.b.is_some() && a.h.is_some() && a.plan.is_none() && a.results.is_none(),
            )?;
            let s = resolve_scenario(a.scenario.as_deref().expect("checked"))?;
            let robot = a.robot.expect("checked");
            let rm = robot_roadmap(&s, robot, a.b.expect("checked"), a.h.expect("checked"))?;
            write_file(&a.out_dir, &format!("roadmap-{robot}.svg"), &svg::roadmap_svg(&s, robot, &rm))?
        }
    };
    writeln!(out, "wrote {}", path.display())?;
    Ok(EXIT_OK)
}

pub fn cmd_roadmap(a: &RoadmapArgs, out: &mut dyn Write) -> CliResult<i32> {
    let s = resolve_scenario(&a.scenario)?;
    let rm = robot_roadmap(&s, a.robot, a.b, a.h)?;
    let mut dump = serde_json::to_string_pretty(&RoadmapDump::from(&rm))?;
    dump.push('\n');
    let path = write_file(&a.out_dir, &format!("roadmap-{}.json", a.robot), &dump)?;
    writeln!(
        out,
        "robot {} b={} h={}: R={} |V|={} |E|={} (b_eff {:.4})",
        a.robot,
        a.b,
        a.h,
        rm.r,
        rm.num_vertices(),
        rm.num_edges(),
        rm.b_eff
    )?;
    writeln!(out, "wrote {}", path.display())?;
    Ok(EXIT_OK)
}

impl From<CliError> for Error {
    fn from(e: CliError) -> Self {
        Error::Precondition(e.0)
    }
}
