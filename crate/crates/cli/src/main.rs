//! `richards run|sweep|report`.
//!
//! Exit status: 0 converged (or a completed sweep/report), 2 diverged,
//! 1 bad input.

mod casefile;
mod output;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use richards_core::estimate::{ConvectionGradient, DegeneratePoten};
use richards_core::{run_case, CaseSpec, RunReport, RunStatus, SchemeKind, SolverConfig, Strategy};
use serde_json::json;

#[derive(Parser)]
#[command(name = "richards", version, about = "Adaptive L-scheme/Newton solver for Richards' equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one case with one strategy.
    Run(RunArgs),
    /// Run a case over a list of meshes or time steps and strategies.
    Sweep(SweepArgs),
    /// Indicator ratios and effectivity indices from an iterations.csv.
    Report(ReportArgs),
}

#[derive(Args, Clone)]
struct CaseArgs {
    /// Built-in case (case1, case2, case3) or a case file.
    #[arg(long)]
    case: String,
    /// Elements along x; `--nz` defaults to the case's aspect ratio.
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    nz: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Args, Clone)]
struct SolverArgs {
    /// Switching threshold C_tol.
    #[arg(long, default_value_t = 1.5)]
    ctol: f64,
    #[arg(long, default_value_t = 1e-7)]
    stop_tol: f64,
    #[arg(long, default_value_t = 500)]
    max_iters: usize,
    /// θ′ threshold of the degenerate set; default 1e-4·sup θ′.
    #[arg(long)]
    epsilon_deg: Option<f64>,
    /// Carry the degenerate residual by an equilibrated flux.
    #[arg(long)]
    eqflux: bool,
    /// Driving gradient in the convection constant.
    #[arg(long, value_enum, default_value = "gravity")]
    convection: Convection,
    /// Include degenerate elements in the convection constant.
    #[arg(long)]
    convection_all: bool,
    /// Potential residual on degenerate elements.
    #[arg(long, value_enum, default_value = "drop")]
    degenerate: Degenerate,
    /// Log zero wall times, for byte-identical output.
    #[arg(long)]
    no_timing: bool,
}

#[derive(ValueEnum, Clone, Copy)]
enum Convection {
    Gravity,
    Full,
}

#[derive(ValueEnum, Clone, Copy)]
enum Degenerate {
    Drop,
    Clamp,
}

#[derive(ValueEnum, Clone, Copy)]
enum StrategyArg {
    L,
    Newton,
    Ln,
    Ladapt,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    case: CaseArgs,
    #[arg(long, value_enum)]
    strategy: StrategyArg,
    /// L for `l` and `ln` (default L₁), upper bound for `ladapt` (default L₂).
    #[arg(long = "L")]
    l: Option<f64>,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, PartialEq)]
enum Axis {
    Mesh,
    Tau,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    case: CaseArgs,
    #[arg(long, value_enum)]
    axis: Axis,
    /// Comma-separated nx values or time steps.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<String>,
    /// Comma-separated: l, l1, l2, l=<value>, newton, ln, ladapt.
    #[arg(long, value_delimiter = ',', required = true)]
    strategies: Vec<String>,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Concurrent runs; default one per core.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct ReportArgs {
    csv: PathBuf,
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

type Failure = String;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Report(a) => cmd_report(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn resolve_case(a: &CaseArgs) -> Result<CaseSpec, Failure> {
    let mut spec = casefile::resolve(&a.case)?;
    if let Some(nx) = a.nx {
        let nz = a.nz.unwrap_or_else(|| (nx * spec.nz).div_ceil(spec.nx));
        spec = spec.with_mesh(nx, nz);
    } else if let Some(nz) = a.nz {
        spec.nz = nz;
    }
    if let Some(t) = a.tau {
        spec = spec.with_tau(t);
    }
    if let Some(n) = a.steps {
        spec = spec.with_steps(n);
    }
    spec.validate().map_err(|e| e.to_string())?;
    Ok(spec)
}

fn config(strategy: Strategy, s: &SolverArgs) -> Result<SolverConfig, Failure> {
    let mut c = SolverConfig::new(strategy);
    c.c_tol = s.ctol;
    c.stop_tol = s.stop_tol;
    c.max_iters = s.max_iters;
    c.epsilon = s.epsilon_deg;
    c.eqflux = s.eqflux;
    c.convection = match s.convection {
        Convection::Gravity => ConvectionGradient::Gravity,
        Convection::Full => ConvectionGradient::Full,
    };
    c.convection_skips_degenerate = !s.convection_all;
    c.degenerate = match s.degenerate {
        Degenerate::Drop => DegeneratePoten::Drop,
        Degenerate::Clamp => DegeneratePoten::Clamp,
    };
    c.record_timing = !s.no_timing;
    c.validate().map_err(|e| e.to_string())?;
    Ok(c)
}

fn strategy(kind: StrategyArg, l: Option<f64>, spec: &CaseSpec) -> Strategy {
    match kind {
        StrategyArg::L => Strategy::Fixed(SchemeKind::LScheme(l.unwrap_or(spec.l1))),
        StrategyArg::Newton => Strategy::Fixed(SchemeKind::Newton),
        StrategyArg::Ln => Strategy::Adaptive { l: l.unwrap_or(spec.l1) },
        StrategyArg::Ladapt => Strategy::LAdaptive { l_max: l.unwrap_or(spec.l2) },
    }
}

fn parse_strategy(token: &str, spec: &CaseSpec) -> Result<Strategy, Failure> {
    Ok(match token.trim() {
        "l" | "l1" => strategy(StrategyArg::L, None, spec),
        "l2" => strategy(StrategyArg::L, Some(spec.l2), spec),
        "newton" => strategy(StrategyArg::Newton, None, spec),
        "ln" => strategy(StrategyArg::Ln, None, spec),
        "ladapt" => strategy(StrategyArg::Ladapt, None, spec),
        t => match t.strip_prefix("l=").map(str::parse::<f64>) {
            Some(Ok(l)) => Strategy::Fixed(SchemeKind::LScheme(l)),
            _ => return Err(format!("unknown strategy '{t}'")),
        },
    })
}

fn status_label(r: &RunReport) -> String {
    match &r.status {
        RunStatus::Converged => "converged".into(),
        RunStatus::Diverged { step, reason } => format!("diverged at step {step} ({reason:?})"),
    }
}

/// Writes the iteration log and, when finite, the final field.
fn write_run(dir: &Path, spec: &CaseSpec, report: &RunReport) -> Result<Vec<PathBuf>, Failure> {
    let io = |p: &Path, e: std::io::Error| format!("{}: {e}", p.display());
    let mut files = Vec::new();
    let csv = dir.join("iterations.csv");
    std::fs::write(&csv, output::iterations_csv(report)).map_err(|e| io(&csv, e))?;
    files.push(csv);
    let psi = &report.final_field.values;
    if psi.iter().all(|v| v.is_finite()) {
        let space = spec.space().map_err(|e| e.to_string())?;
        let t = spec.tau * report.steps.len() as f64;
        let title = format!("{} {} t={t}", spec.name, report.strategy.label());
        let vtk = dir.join("field_final.vtk");
        std::fs::write(&vtk, output::vtk(&space, spec.model.as_ref(), psi, &title)).map_err(|e| io(&vtk, e))?;
        files.push(vtk);
    }
    Ok(files)
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))
}

fn cmd_run(a: RunArgs) -> Result<u8, Failure> {
    let spec = resolve_case(&a.case)?;
    let cfg = config(strategy(a.strategy, a.l, &spec), &a.solver)?;
    create_dir(&a.out)?;
    let settings = json!({ "case": output::case_json(&spec), "solver": cfg });
    let manifest = Manifest::start(&a.out, "run", settings)?;
    let report = run_case(&spec, &cfg).map_err(|e| e.to_string())?;
    let files = write_run(&a.out, &spec, &report)?;
    let line = if report.converged() {
        report.summary()
    } else {
        format!("{} after {} iterations", status_label(&report), report.total_iterations())
    };
    manifest.finish(&status_label(&report), &line, &files)?;
    println!("{line}");
    Ok(if report.converged() { 0 } else { 2 })
}

struct Manifest(output::Manifest);

impl Manifest {
    fn start(dir: &Path, command: &str, config: serde_json::Value) -> Result<Self, Failure> {
        output::Manifest::start(dir, command, config).map(Manifest).map_err(|e| format!("manifest: {e}"))
    }

    fn finish(self, status: &str, summary: &str, files: &[PathBuf]) -> Result<(), Failure> {
        self.0.finish(status, summary, files).map_err(|e| format!("manifest: {e}"))
    }
}

const SWEEP_HEADER: &str = "case,axis,value,strategy,total,l_iterations,n_iterations,status,wall_ms";

fn cmd_sweep(a: SweepArgs) -> Result<u8, Failure> {
    let base = resolve_case(&a.case)?;
    let tokens: Vec<&str> = a.strategies.iter().map(|s| s.trim()).filter(|s| !s.is_empty()).collect();
    if tokens.is_empty() {
        return Err("empty strategy list".into());
    }
    let values: Vec<&str> = a.values.iter().map(|s| s.trim()).filter(|s| !s.is_empty()).collect();
    if values.is_empty() {
        return Err("empty value list".into());
    }
    let mut entries = Vec::new();
    for v in &values {
        let spec = match a.axis {
            Axis::Mesh => {
                let nx: usize = v.parse().map_err(|_| format!("mesh value '{v}' is not a count"))?;
                let nz = a.case.nz.unwrap_or_else(|| (nx * base.nz).div_ceil(base.nx));
                base.clone().with_mesh(nx, nz)
            }
            Axis::Tau => base.clone().with_tau(v.parse().map_err(|_| format!("tau value '{v}' is not a number"))?),
        };
        spec.validate().map_err(|e| e.to_string())?;
        for t in &tokens {
            let cfg = config(parse_strategy(t, &spec)?, &a.solver)?;
            entries.push((v.to_string(), t.to_string(), spec.clone(), cfg));
        }
    }
    create_dir(&a.out)?;
    let axis = if a.axis == Axis::Mesh { "mesh" } else { "tau" };
    let settings = json!({
        "case": output::case_json(&base),
        "axis": axis,
        "values": values,
        "strategies": tokens,
        "solver": entries[0].3,
    });
    let manifest = Manifest::start(&a.out, "sweep", settings)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.jobs.unwrap_or(0))
        .build()
        .map_err(|e| e.to_string())?;
    let results: Vec<Result<(String, Vec<PathBuf>), Failure>> = pool.install(|| {
        entries
            .par_iter()
            .map(|(value, token, spec, cfg)| {
                let start = Instant::now();
                let report = run_case(spec, cfg).map_err(|e| e.to_string())?;
                let wall = if cfg.record_timing { start.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
                let dir = a.out.join(format!("{axis}-{value}")).join(token.replace('=', "-"));
                create_dir(&dir)?;
                let files = write_run(&dir, spec, &report)?;
                let status = if report.converged() { "converged" } else { "diverged" };
                let row = format!(
                    "{},{axis},{value},{token},{},{},{},{status},{}",
                    spec.name,
                    report.total_iterations(),
                    report.l_iterations(),
                    report.n_iterations(),
                    output::num(wall)
                );
                Ok((row, files))
            })
            .collect()
    });
    let mut table = String::from(SWEEP_HEADER);
    table.push('\n');
    let mut files = Vec::new();
    for r in results {
        let (row, f) = r?;
        table.push_str(&row);
        table.push('\n');
        files.extend(f);
    }
    let path = a.out.join("sweep.csv");
    std::fs::write(&path, &table).map_err(|e| format!("{}: {e}", path.display()))?;
    files.push(path);
    manifest.finish("completed", &format!("{} runs", entries.len()), &files)?;
    print!("{table}");
    Ok(0)
}

fn cmd_report(a: ReportArgs) -> Result<u8, Failure> {
    let text = std::fs::read_to_string(&a.csv).map_err(|e| format!("{}: {e}", a.csv.display()))?;
    let rows = report::parse(&text)?;
    let out = report::render(&rows);
    match a.out {
        Some(p) => std::fs::write(&p, out).map_err(|e| format!("{}: {e}", p.display()))?,
        None => print!("{out}"),
    }
    Ok(0)
}
