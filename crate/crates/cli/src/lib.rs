//! `antiholo` command-line front end.

pub mod json;
mod table;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use antiholo_core::manifold::{validate_on_probe_grid, ManifoldError};
use antiholo_core::planes::{extremize_antiholomorphic, PlaneError, DEFAULT_RESTARTS, DEFAULT_SAMPLES};
use antiholo_core::rng::stream_rng;
use antiholo_core::tensorcalc::{curvature_package, CalcError};
use antiholo_core::verify::{
    property_suite, scan_manifold, ManifoldReport, Sampler, ScanOptions, TheoremAStatus, VerifyError,
};
use antiholo_core::{catalog_manifold, load_manifold, ChartManifold};
use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub const EXIT_CLEAN: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_VIOLATION: i32 = 2;

/// Environment variable capping the worker count (0 = one per core).
pub const THREADS_VAR: &str = "ANTIHOLO_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("structure validation failed at {point:?}: {reason}")]
    Validation { point: Vec<f64>, reason: String },
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error(transparent)]
    Calc(#[from] CalcError),
    #[error(transparent)]
    Plane(#[from] PlaneError),
    #[error(transparent)]
    Json(#[from] json::JsonError),
}

#[derive(Debug, Parser)]
#[command(
    name = "antiholo",
    version,
    about = "Chart-level curvature diagnostics for almost Hermitian manifolds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Scan sample points and report classification, constancy and the implication check.
    Analyze(AnalyzeArgs),
    /// Print the property-suite residual table at one point.
    Checks(PointArgs),
    /// Extremize antiholomorphic sectional curvature at one point.
    Extremize(ExtremizeArgs),
}

#[derive(Debug, Args)]
struct Source {
    /// Catalog fixture name.
    #[arg(long, required_unless_present = "spec", conflicts_with = "spec")]
    catalog: Option<String>,
    /// Comma-separated catalog parameters.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, requires = "catalog")]
    params: Vec<f64>,
    /// Manifold specification file.
    #[arg(long)]
    spec: Option<PathBuf>,
}

impl Source {
    fn load(&self) -> Result<ChartManifold, CliError> {
        match (&self.catalog, &self.spec) {
            (Some(name), _) => Ok(catalog_manifold(name, &self.params)?),
            (None, Some(path)) => {
                let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
                    path: path.clone(),
                    source,
                })?;
                Ok(load_manifold(&text)?)
            }
            (None, None) => Err(CliError::Usage("either --catalog or --spec is required".into())),
        }
    }
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    source: Source,
    /// grid:N or random:K.
    #[arg(long, default_value = "random:8")]
    points: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Antiholomorphic planes sampled per point.
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    samples: usize,
    #[arg(long, default_value_t = DEFAULT_RESTARTS)]
    restarts: usize,
    /// Write the schema-checked report here.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PointArgs {
    #[command(flatten)]
    source: Source,
    /// Comma-separated coordinates x1,...,x2n.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
    point: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct ExtremizeArgs {
    #[command(flatten)]
    at: PointArgs,
    #[arg(long, default_value_t = DEFAULT_RESTARTS)]
    restarts: usize,
}

fn checked_point(m: &ChartManifold, p: &[f64]) -> Result<(), CliError> {
    if p.len() != m.dim() {
        return Err(CliError::Usage(format!(
            "--point needs {} coordinates, got {}",
            m.dim(),
            p.len()
        )));
    }
    if !m.domain().contains(p) {
        return Err(CliError::Usage(format!("point {p:?} lies outside the chart domain")));
    }
    Ok(())
}

fn validated(m: ChartManifold) -> Result<ChartManifold, CliError> {
    if let Some(bad) = validate_on_probe_grid(&m)?.into_iter().find(|r| !r.passed) {
        return Err(CliError::Validation {
            reason: bad.failure_reason().unwrap_or_default(),
            point: bad.point,
        });
    }
    Ok(m)
}

fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let threads = match std::env::var(THREADS_VAR) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| CliError::Usage(format!("{THREADS_VAR} must be a non-negative integer, got '{v}'")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))
}

/// Exit status implied by a finished scan.
pub fn report_exit_code(report: &ManifoldReport) -> i32 {
    if report.points.iter().any(|p| p.theorem_a == TheoremAStatus::Violation) {
        EXIT_VIOLATION
    } else {
        EXIT_CLEAN
    }
}

fn analyze(args: &AnalyzeArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let sampler: Sampler = args.points.parse()?;
    let m = validated(args.source.load()?)?;
    let opts = ScanOptions {
        samples: args.samples,
        restarts: args.restarts,
        seed: args.seed,
    };
    let report = thread_pool()?.install(|| scan_manifold(&m, sampler, &opts))?;
    if let Some(path) = &args.json {
        let text = json::report_to_string(&report)?;
        std::fs::write(path, text).map_err(|source| CliError::Write {
            path: path.clone(),
            source,
        })?;
    }
    table::write_report(out, &report).expect("stdout");
    Ok(report_exit_code(&report))
}

fn checks(args: &PointArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let m = args.source.load()?;
    checked_point(&m, &args.point)?;
    let opts = ScanOptions {
        seed: args.seed,
        ..ScanOptions::default()
    };
    let rows = property_suite(&m, &args.point, &opts)?;
    table::write_suite(out, &m, &args.point, &rows).expect("stdout");
    Ok(EXIT_CLEAN)
}

fn extremize(args: &ExtremizeArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let m = args.at.source.load()?;
    checked_point(&m, &args.at.point)?;
    let pkg = curvature_package(&m, &args.at.point, false)?;
    let mut rng = stream_rng(args.at.seed, 1);
    let ext = extremize_antiholomorphic(&pkg.r, &pkg.frame_metric, args.restarts, &mut rng, &[])?;
    table::write_extremum(out, &m, &args.at.point, pkg.frame.matrix(), &ext).expect("stdout");
    Ok(EXIT_CLEAN)
}

/// Parses `args` (program name first) and runs the command. Diagnostics go to
/// `err`; the return value is the process exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_CLEAN };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    let result = match &cli.command {
        Command::Analyze(a) => analyze(a, out),
        Command::Checks(a) => checks(a, out),
        Command::Extremize(a) => extremize(a, out),
    };
    result.unwrap_or_else(|e| {
        let _ = writeln!(err, "error: {e}");
        EXIT_INPUT
    })
}
