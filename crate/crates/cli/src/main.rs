//! Command-line front end: single estimator runs and convergence tables.
//!
//! Exit codes: 0 success, 1 numerical failure, 2 invalid configuration.

use clap::{Args, Parser, Subcommand};
use parabound::fem1d::MassMode;
use parabound::problem::{GreenBounds, Problem};
use parabound::study::{
    convergence_study_against, reference_solution, run_estimate, SplitChoice, StudyConfig,
};
use parabound::tables::{report_csv, table1_csv, table1_markdown, table2_csv, table2_markdown};
use parabound::{problem_by_name, SchemeId, SchemeOptions};
use std::path::PathBuf;
use std::process::ExitCode;

mod config;
use config::ConfigFile;

#[derive(Parser)]
#[command(
    name = "parabound",
    about = "Guaranteed maximum-norm error bounds for 1D parabolic P1-FEM runs",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scheme at one resolution and write the estimator report CSV.
    Run(RunArgs),
    /// Run a convergence study and write error/bound and component tables.
    Table(TableArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Time-stepping scheme: euler|cn|exeuler|bdf2|lobatto3c|sdirk2.
    #[arg(long)]
    method: Option<String>,

    /// Split index K of the elliptic component (default 0).
    #[arg(long = "K")]
    k: Option<usize>,

    /// Problem name (currently: paper).
    #[arg(long)]
    problem: Option<String>,

    /// Discrete scalar product: consistent|lumped.
    #[arg(long)]
    mass: Option<String>,

    /// Replace the source by its time interpolant in SDIRK stage loads: on|off.
    #[arg(long = "sdirk-fhat")]
    sdirk_fhat: Option<String>,

    /// Output path (run: report CSV; table: stem of the two table files).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Optional key=value config file supplying defaults for any flag.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Number of time steps (and spatial mesh intervals).
    #[arg(long = "M")]
    m: Option<usize>,

    /// Evaluate every admissible K and report the smallest bound.
    #[arg(long = "K-scan", default_value_t = false)]
    k_scan: bool,
}

#[derive(Args)]
struct TableArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Comma-separated list of resolutions (default 64,128,256,512,1024).
    #[arg(long = "M-list")]
    m_list: Option<String>,

    /// Table format: csv|md.
    #[arg(long)]
    format: Option<String>,

    /// Reference refinement relative to the finest resolution (even, >= 4).
    #[arg(long = "ref-refine")]
    ref_refine: Option<usize>,

    /// Extend the resolution list to 16384 (long runtime).
    #[arg(long, default_value_t = false)]
    full: bool,
}

fn main() -> ExitCode {
    match dispatch() {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Numerical(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

enum CliError {
    Config(String),
    Numerical(String),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Numerical(format!("i/o failure: {e}"))
    }
}

/// Maps library errors onto exit classes: validation problems are
/// configuration errors, solver failures are numerical.
fn lib_err(e: parabound::Error) -> CliError {
    match e {
        parabound::Error::Invalid { .. } | parabound::Error::SplitIndexOutOfRange { .. } => {
            CliError::Config(e.to_string())
        }
        _ => CliError::Numerical(e.to_string()),
    }
}

fn dispatch() -> Result<(), CliError> {
    match Cli::parse().command {
        Command::Run(args) => cmd_run(args),
        Command::Table(args) => cmd_table(args),
    }
}

struct Resolved {
    scheme: SchemeId,
    problem: Problem<f64>,
    bounds: GreenBounds<f64>,
    problem_name: String,
    k: usize,
    mass: MassMode,
    options: SchemeOptions,
    out: Option<PathBuf>,
}

fn resolve_common(common: &CommonArgs, cfg: &ConfigFile) -> Result<Resolved, CliError> {
    let method = common
        .method
        .clone()
        .or_else(|| cfg.get("method"))
        .ok_or_else(|| CliError::Config("--method is required".into()))?;
    let scheme = SchemeId::parse(&method)
        .ok_or_else(|| CliError::Config(format!("unknown method '{method}'")))?;

    let problem_name = common
        .problem
        .clone()
        .or_else(|| cfg.get("problem"))
        .unwrap_or_else(|| "paper".into());
    let (problem, bounds) = problem_by_name::<f64>(&problem_name)
        .ok_or_else(|| CliError::Config(format!("unknown problem '{problem_name}'")))?;

    let mass_name = common
        .mass
        .clone()
        .or_else(|| cfg.get("mass"))
        .unwrap_or_else(|| "consistent".into());
    let mass = MassMode::parse(&mass_name)
        .ok_or_else(|| CliError::Config(format!("unknown mass mode '{mass_name}'")))?;

    let fhat_name = common
        .sdirk_fhat
        .clone()
        .or_else(|| cfg.get("sdirk_fhat"))
        .unwrap_or_else(|| "on".into());
    let sdirk_interpolated_source = match fhat_name.as_str() {
        "on" => true,
        "off" => false,
        other => {
            return Err(CliError::Config(format!(
                "--sdirk-fhat expects on|off, got '{other}'"
            )))
        }
    };

    let k = match common.k {
        Some(k) => k,
        None => cfg.parse_opt("k")?.unwrap_or(0),
    };
    let out = common.out.clone().or_else(|| cfg.get("out").map(PathBuf::from));

    Ok(Resolved {
        scheme,
        problem,
        bounds,
        problem_name,
        k,
        mass,
        options: SchemeOptions {
            sdirk_interpolated_source,
        },
        out,
    })
}

fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    let cfg = ConfigFile::load(args.common.config.as_deref())?;
    let resolved = resolve_common(&args.common, &cfg)?;
    let m = match args.m {
        Some(m) => m,
        None => cfg
            .parse_opt("m")?
            .ok_or_else(|| CliError::Config("--M is required".into()))?,
    };
    if m < 1 {
        return Err(CliError::Config("--M must be at least 1".into()));
    }
    let k_scan = args.k_scan || cfg.parse_opt("k_scan")?.unwrap_or(false);
    if !k_scan && resolved.k > m - 1 {
        return Err(CliError::Config(format!(
            "split index K = {} out of range 0..={}",
            resolved.k,
            m - 1
        )));
    }
    let split = if k_scan {
        SplitChoice::ScanMin
    } else {
        SplitChoice::Fixed(resolved.k)
    };

    let run = run_estimate(
        &resolved.problem,
        &resolved.bounds,
        resolved.scheme,
        m,
        split,
        resolved.mass,
        &resolved.options,
    )
    .map_err(lib_err)?;

    let path = resolved.out.unwrap_or_else(|| {
        PathBuf::from(format!("run-{}-M{}.csv", resolved.scheme.cli_name(), m))
    });
    std::fs::write(&path, report_csv(&run.report))?;
    println!(
        "{} M={} problem={} K={}{}: eta = {:.3e} -> {}",
        resolved.scheme.cli_name(),
        m,
        resolved.problem_name,
        run.report.k,
        if k_scan { " (scanned)" } else { "" },
        run.report.total,
        path.display()
    );
    Ok(())
}

fn parse_m_list(s: &str) -> Result<Vec<usize>, CliError> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<usize>()
                .map_err(|_| CliError::Config(format!("invalid resolution '{tok}' in --M-list")))
        })
        .collect()
}

const DESK_M_LIST: [usize; 5] = [64, 128, 256, 512, 1024];
const FULL_M_LIST: [usize; 9] = [64, 128, 256, 512, 1024, 2048, 4096, 8192, 16384];

fn cmd_table(args: TableArgs) -> Result<(), CliError> {
    let cfg = ConfigFile::load(args.common.config.as_deref())?;
    let resolved = resolve_common(&args.common, &cfg)?;
    let full = args.full || cfg.parse_opt("full")?.unwrap_or(false);
    let m_list = match args.m_list.clone().or_else(|| cfg.get("m_list")) {
        Some(s) => parse_m_list(&s)?,
        None if full => FULL_M_LIST.to_vec(),
        None => DESK_M_LIST.to_vec(),
    };
    let format = args
        .format
        .clone()
        .or_else(|| cfg.get("format"))
        .unwrap_or_else(|| "csv".into());
    if format != "csv" && format != "md" {
        return Err(CliError::Config(format!(
            "--format expects csv|md, got '{format}'"
        )));
    }
    let ref_refine = match args.ref_refine {
        Some(r) => r,
        None => cfg.parse_opt("ref_refine")?.unwrap_or(8),
    };

    let mut study = StudyConfig::new(resolved.scheme, m_list);
    study.k = resolved.k;
    study.mass_mode = resolved.mass;
    study.options = resolved.options;
    study.ref_refinement = ref_refine;

    let rows = if study.m_list.is_empty() {
        Vec::new()
    } else {
        let reference = reference_solution(
            &resolved.problem,
            *study.m_list.last().unwrap(),
            ref_refine,
            resolved.mass,
        )
        .map_err(lib_err)?;
        let rows =
            convergence_study_against(&resolved.problem, &resolved.bounds, &study, &reference)
                .map_err(lib_err)?;
        // Warn when measured errors approach the reference's own accuracy.
        let floor = reference.pollution_floor() * 10.0;
        for row in &rows {
            if row.e_m < floor {
                eprintln!(
                    "warning: e_M = {:.3e} at M = {} is within 10x of the reference's \
                     accuracy floor {:.3e}; increase --ref-refine",
                    row.e_m,
                    row.m,
                    reference.pollution_floor()
                );
            }
        }
        rows
    };

    let stem = resolved
        .out
        .unwrap_or_else(|| PathBuf::from(format!("table-{}", resolved.scheme.cli_name())));
    let stem = stem.to_string_lossy().into_owned();
    let (t1, t2) = match format.as_str() {
        "csv" => (table1_csv(&rows), table2_csv(&rows)),
        _ => (
            table1_markdown(resolved.scheme, &rows),
            table2_markdown(resolved.scheme, &rows),
        ),
    };
    let p1 = format!("{stem}-table1.{format}");
    let p2 = format!("{stem}-table2.{format}");
    std::fs::write(&p1, t1)?;
    std::fs::write(&p2, t2)?;
    println!(
        "{} problem={} K={} rows={} -> {p1}, {p2}",
        resolved.scheme.cli_name(),
        resolved.problem_name,
        resolved.k,
        rows.len()
    );
    Ok(())
}
