//! `meshdeploy`: scenario generation, solving, checking, oracle comparison
//! and gap reporting for BAN/SBS/MA deployment planning.

mod manifest;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use meshdeploy_core::oracle::{classify, Agreement, Oracle};
use meshdeploy_core::pareto::{front_rows, gap_table, read_csv, write_csv, BoundEntry, FrontRow};
use meshdeploy_core::{
    check_feasibility, derive_tables, generate_scenario, BoundSet, DerivedTables, GenParams, Instance, Restriction,
    Scenario, Solution, SolveParams,
};

use manifest::RunManifest;

#[derive(Parser)]
#[command(name = "meshdeploy", version, about = "Deployment planning for BANs, small cells and machine aggregators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a scenario file
    Gen {
        #[arg(long, value_enum, default_value_t = Preset::PaperFig2)]
        preset: Preset,
        /// JSON object overriding generator parameters of the preset
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Derive coverage and capacity tables for a scenario
    Derive {
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Trace the cost/coverage front
    Solve {
        scenario: PathBuf,
        /// Tables from `derive`; recomputed when omitted
        #[arg(long)]
        tables: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a solution against every constraint
    Check {
        scenario: PathBuf,
        solution: PathBuf,
        /// Also enforce a cost budget
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long, value_enum)]
        restrict: Option<RestrictArg>,
    },
    /// Compare a heuristic front with the exhaustive front of a tiny instance
    Oracle {
        scenario: PathBuf,
        /// Heuristic front CSV; a generous solve is run when omitted
        #[arg(long)]
        front: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Gap table and plot data from a solve output directory
    Report {
        dir: PathBuf,
        /// Defaults to the solve directory
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Clone)]
struct SolverArgs {
    /// JSON solve configuration
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    restrict: Option<RestrictArg>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    delta_c: Option<f64>,
    #[arg(long)]
    delta_eps: Option<f64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Preset {
    PaperFig2,
    Tiny,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum RestrictArg {
    #[default]
    None,
    FiberOnly,
    SingleHop,
}

impl From<RestrictArg> for Restriction {
    fn from(r: RestrictArg) -> Self {
        match r {
            RestrictArg::None => Restriction::None,
            RestrictArg::FiberOnly => Restriction::FiberOnly,
            RestrictArg::SingleHop => Restriction::SingleHop,
        }
    }
}

/// Everything a solve depends on besides the scenario; written back into
/// the manifest so a run can be repeated with `--config`.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SolveConfig {
    solver: SolveParams,
    theta: Option<f64>,
    restrict: RestrictArg,
}

/// Bad-input failures exit with 2; refusals and violations with 1.
struct Refusal(String);

impl std::fmt::Display for Refusal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::fmt::Debug for Refusal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Refusal {}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            if err.downcast_ref::<Refusal>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn run(command: Command) -> Result<u8> {
    match command {
        Command::Gen { preset, config, seed, out } => cmd_gen(preset, config.as_deref(), seed, &out),
        Command::Derive { scenario, out } => cmd_derive(&scenario, &out),
        Command::Solve { scenario, tables, solver, out } => cmd_solve(&scenario, tables.as_deref(), &solver, &out),
        Command::Check { scenario, solution, epsilon, restrict } => cmd_check(&scenario, &solution, epsilon, restrict),
        Command::Oracle { scenario, front, solver, out } => cmd_oracle(&scenario, front.as_deref(), &solver, &out),
        Command::Report { dir, out } => cmd_report(&dir, out.as_deref().unwrap_or(&dir)),
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load_scenario(path: &Path) -> Result<Scenario> {
    Scenario::from_json(&read_text(path)?).with_context(|| format!("invalid scenario {}", path.display()))
}

fn write_file(out: &Path, name: &str, contents: &[u8], written: &mut Vec<PathBuf>) -> Result<()> {
    let path = out.join(name);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).with_context(|| format!("cannot create {}", parent.display()))?;
    }
    fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))?;
    written.push(PathBuf::from(name));
    Ok(())
}

/// Overlays the keys of `patch` onto `base`.
fn merge_json(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                merge_json(b.entry(k).or_insert(Value::Null), v);
            }
        }
        (b, p) => *b = p,
    }
}

fn cmd_gen(preset: Preset, config: Option<&Path>, seed: u64, out: &Path) -> Result<u8> {
    let start = Instant::now();
    let base = match preset {
        Preset::PaperFig2 => GenParams::paper_fig2(),
        Preset::Tiny => GenParams::tiny(2, 3, 2, 20),
    };
    let params: GenParams = match config {
        Some(path) => {
            let mut value = serde_json::to_value(&base)?;
            let patch: Value =
                serde_json::from_str(&read_text(path)?).with_context(|| format!("invalid JSON in {}", path.display()))?;
            merge_json(&mut value, patch);
            serde_json::from_value(value).context("invalid generator parameters")?
        }
        None => base,
    };
    let scenario = generate_scenario(&params, seed)?;
    let mut written = Vec::new();
    write_file(out, "scenario.json", scenario.to_json()?.as_bytes(), &mut written)?;
    RunManifest::new("gen", Some(seed), Some(scenario.content_hash()), serde_json::to_value(&params)?)
        .finish(start, out, written)?;
    println!(
        "scenario: {} BAN / {} SBS / {} MA sites, {} machines, {} subareas",
        scenario.ban_sites.len(),
        scenario.sbs_sites.len(),
        scenario.ma_sites.len(),
        scenario.num_machines(),
        scenario.num_subareas()
    );
    Ok(0)
}

fn cmd_derive(scenario_path: &Path, out: &Path) -> Result<u8> {
    let start = Instant::now();
    let scenario = load_scenario(scenario_path)?;
    let tables = derive_tables(&scenario);
    let mut written = Vec::new();
    write_file(out, "tables.json", tables.to_json()?.as_bytes(), &mut written)?;
    RunManifest::new("derive", None, Some(scenario.content_hash()), Value::Null).finish(start, out, written)?;
    Ok(0)
}

fn solve_config(args: &SolverArgs, base: SolveConfig) -> Result<SolveConfig> {
    let mut cfg = match &args.config {
        Some(path) => serde_json::from_str(&read_text(path)?)
            .with_context(|| format!("invalid solve configuration {}", path.display()))?,
        None => base,
    };
    if let Some(seed) = args.seed {
        cfg.solver.search.seed = seed;
    }
    if let Some(r) = args.restrict {
        cfg.restrict = r;
    }
    if args.theta.is_some() {
        cfg.theta = args.theta;
    }
    if let Some(d) = args.delta_c {
        cfg.solver.delta_c = d;
    }
    if args.delta_eps.is_some() {
        cfg.solver.delta_eps = args.delta_eps;
    }
    if cfg.theta.is_some_and(|t| !(t >= 0.0 && t.is_finite())) {
        bail!("theta must be a nonnegative number");
    }
    cfg.solver.validate()?;
    Ok(cfg)
}

fn instance(scenario: Scenario, tables: Option<DerivedTables>, cfg: &SolveConfig) -> Result<Instance> {
    let inst = match tables {
        Some(t) => Instance::with_tables(scenario, t)?,
        None => Instance::new(scenario),
    };
    let theta = cfg.theta.unwrap_or(inst.theta);
    Ok(inst.with_theta(theta).restricted(cfg.restrict.into()))
}

fn cmd_solve(scenario_path: &Path, tables: Option<&Path>, args: &SolverArgs, out: &Path) -> Result<u8> {
    let start = Instant::now();
    let scenario = load_scenario(scenario_path)?;
    let hash = scenario.content_hash();
    let tables = match tables {
        Some(p) => Some(DerivedTables::from_json(&read_text(p)?).with_context(|| format!("invalid tables {}", p.display()))?),
        None => None,
    };
    let cfg = solve_config(args, SolveConfig::default())?;
    let inst = instance(scenario, tables, &cfg)?;
    let outcome = meshdeploy_core::solve(&inst, &cfg.solver)?;

    let mut written = Vec::new();
    let mut files = Vec::new();
    for (n, entry) in outcome.front.iter().enumerate() {
        let name = format!("solutions/solution_{n:03}.json");
        write_file(out, &name, entry.solution.to_json(&inst)?.as_bytes(), &mut written)?;
        files.push(name);
    }
    let rows = front_rows(&outcome.front, &outcome.bounds, &files, "heuristic");
    let mut buf = Vec::new();
    write_csv(&rows, &mut buf)?;
    write_file(out, "front.csv", &buf, &mut written)?;
    let mut buf = Vec::new();
    write_csv(&outcome.bounds.entries, &mut buf)?;
    write_file(out, "bounds.csv", &buf, &mut written)?;

    let summary = serde_json::json!({
        "epsilon_0": outcome.epsilon_0,
        "epsilons": outcome.epsilons,
        "front_size": outcome.front.len(),
        "relaxed_evaluations": outcome.relaxed_evaluations,
        "candidate_evaluations": outcome.candidate_evaluations,
    });
    RunManifest::new("solve", Some(cfg.solver.search.seed), Some(hash), serde_json::to_value(&cfg)?)
        .with_summary(summary)
        .finish(start, out, written)?;

    println!("budgets visited: {}", outcome.epsilons.len());
    println!("{:>10} {:>6} {:>6} {:>10}", "f1", "f2", "f3", "fc");
    for e in &outcome.front {
        let o = e.objectives;
        println!("{:>10.3} {:>6} {:>6} {:>10.3}", o.f1, o.f2, o.f3, o.fc);
    }
    Ok(0)
}

fn cmd_check(scenario_path: &Path, solution_path: &Path, epsilon: Option<f64>, restrict: Option<RestrictArg>) -> Result<u8> {
    let scenario = load_scenario(scenario_path)?;
    let inst = Instance::new(scenario).restricted(restrict.unwrap_or_default().into());
    let solution = Solution::from_json(&read_text(solution_path)?, &inst)
        .with_context(|| format!("invalid solution {}", solution_path.display()))?;
    let violations = check_feasibility(&solution, &inst, epsilon);
    if violations.is_empty() {
        println!("ok: no violations");
        return Ok(0);
    }
    for v in &violations {
        println!("{}: {}", v.id, v.detail);
    }
    println!("{} violation(s)", violations.len());
    Ok(1)
}

#[derive(Serialize)]
struct AgreementRow {
    f1: f64,
    fc: f64,
    status: Agreement,
}

fn cmd_oracle(scenario_path: &Path, front: Option<&Path>, args: &SolverArgs, out: &Path) -> Result<u8> {
    let start = Instant::now();
    let scenario = load_scenario(scenario_path)?;
    let hash = scenario.content_hash();
    let cfg = solve_config(args, SolveConfig { solver: SolveParams::generous(), ..SolveConfig::default() })?;
    let inst = instance(scenario, None, &cfg)?;
    let oracle = match Oracle::new(&inst) {
        Ok(o) => o,
        Err(err @ meshdeploy_core::Error::OracleRefused(_)) => return Err(Refusal(err.to_string()).into()),
        Err(err) => return Err(err.into()),
    };
    let exact = oracle.front();

    let mut written = Vec::new();
    let heuristic: Vec<(f64, f64)> = match front {
        Some(path) => {
            let rows: Vec<FrontRow> =
                read_csv(read_text(path)?.as_bytes()).with_context(|| format!("invalid front {}", path.display()))?;
            rows.iter().map(|r| (r.f1, r.fc)).collect()
        }
        None => {
            let outcome = meshdeploy_core::solve(&inst, &cfg.solver)?;
            let rows = front_rows(&outcome.front, &outcome.bounds, &[], "heuristic");
            let mut buf = Vec::new();
            write_csv(&rows, &mut buf)?;
            write_file(out, "heuristic_front.csv", &buf, &mut written)?;
            outcome.front.iter().map(|e| e.pair()).collect()
        }
    };

    let mut files = Vec::new();
    for (n, p) in exact.iter().enumerate() {
        let name = format!("oracle_solutions/solution_{n:03}.json");
        write_file(out, &name, p.solution.to_json(&inst)?.as_bytes(), &mut written)?;
        files.push(name);
    }
    let rows: Vec<FrontRow> = exact
        .iter()
        .zip(&files)
        .map(|(p, file)| FrontRow {
            epsilon: p.f1,
            f1: p.f1,
            f2: p.f2,
            f3: p.f3,
            fc: p.fc,
            bound: None,
            heuristic_bound: false,
            solution_file: file.clone(),
            source: "oracle".into(),
        })
        .collect();
    let mut buf = Vec::new();
    write_csv(&rows, &mut buf)?;
    write_file(out, "oracle_front.csv", &buf, &mut written)?;

    let agreement: Vec<AgreementRow> =
        exact.iter().map(|p| AgreementRow { f1: p.f1, fc: p.fc, status: classify(p.pair(), &heuristic) }).collect();
    let mut buf = Vec::new();
    write_csv(&agreement, &mut buf)?;
    write_file(out, "agreement.csv", &buf, &mut written)?;
    RunManifest::new("oracle", Some(cfg.solver.search.seed), Some(hash), serde_json::to_value(&cfg)?)
        .finish(start, out, written)?;

    let count = |a: Agreement| agreement.iter().filter(|r| r.status == a).count();
    println!(
        "oracle points: {} (match {}, dominated {}, missed {})",
        agreement.len(),
        count(Agreement::Match),
        count(Agreement::Dominated),
        count(Agreement::Missed)
    );
    Ok(0)
}

#[derive(Serialize)]
struct PlotRow {
    series: &'static str,
    f1: f64,
    fc: f64,
}

fn cmd_report(dir: &Path, out: &Path) -> Result<u8> {
    let start = Instant::now();
    let front_path = dir.join("front.csv");
    let bounds_path = dir.join("bounds.csv");
    if !bounds_path.exists() {
        bail!("bound file {} not found", bounds_path.display());
    }
    let front: Vec<FrontRow> =
        read_csv(read_text(&front_path)?.as_bytes()).with_context(|| format!("invalid {}", front_path.display()))?;
    let entries: Vec<BoundEntry> =
        read_csv(read_text(&bounds_path)?.as_bytes()).with_context(|| format!("invalid {}", bounds_path.display()))?;
    let bounds = BoundSet { heuristic_bound: entries.iter().any(|b| b.heuristic), entries };
    let points: Vec<(f64, f64)> = front.iter().map(|r| (r.f1, r.fc)).collect();
    let report = gap_table(&points, &bounds);

    let mut written = Vec::new();
    let mut buf = Vec::new();
    write_csv(&report.rows, &mut buf)?;
    write_file(out, "gap.csv", &buf, &mut written)?;
    let plot: Vec<PlotRow> = points
        .iter()
        .map(|p| PlotRow { series: "solution", f1: p.0, fc: p.1 })
        .chain(bounds.entries.iter().map(|b| PlotRow { series: "bound", f1: b.epsilon, fc: b.bound }))
        .collect();
    let mut buf = Vec::new();
    write_csv(&plot, &mut buf)?;
    write_file(out, "plot.csv", &buf, &mut written)?;
    RunManifest::new("report", None, None, Value::Null).finish(start, out, written)?;

    println!("{:>10} {:>10} {:>10} {:>8}", "epsilon", "best_fc", "bound", "ratio");
    for r in &report.rows {
        let ratio = r.ratio.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"));
        println!("{:>10.3} {:>10.3} {:>10.3} {:>8}", r.epsilon, r.best_fc, r.bound, ratio);
    }
    for e in &report.omitted {
        println!("note: bound at epsilon {e} is not positive; ratio omitted");
    }
    match report.max_ratio {
        Some(m) => println!("max ratio: {m:.4}{}", if report.heuristic_bound { " (heuristic bound)" } else { "" }),
        None => println!("max ratio: n/a"),
    }
    Ok(0)
}
