//! Command-line front end. Machine output is JSON on standard output;
//! diagnostics go to standard error.
//!
//! Exit codes: 0 success, 1 I/O or configuration error, 2 domain error
//! (divergent weight, diagonal, truncated box, ...), 3 failed verification.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::error::Error;
use crate::geometry::{commutator_fields, gauge_distance, size_ratio_report, tangency_report};
use crate::kernel::{factorized_kernel, Method};
use crate::model::{parse_list, Frequency, ManifoldPoint, ModelSpec, PolynomialModel};
use crate::projection::{apply_szego_projection, read_grid, write_grid, GridIoError};
use crate::verify::{self, Suite, VerifyOptions};
use crate::weights::log_weight_quadrature;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_DOMAIN: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "szego", version, about = "Szegő kernels of polynomial-model CR manifolds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate a weight or a kernel value.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Apply the Szegő projection to a grid function.
    Project(ProjectArgs),
    /// Commutators, tangency, gauge and size reports.
    Geometry(GeometryArgs),
    /// Run acceptance suites and emit a JSON report.
    Verify(VerifyArgs),
}

#[derive(Debug, Subcommand)]
pub enum EvalCommand {
    Weight(WeightArgs),
    Kernel(KernelArgs),
}

#[derive(Debug, Args)]
pub struct WeightArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    pub eta: f64,
    /// Comma-separated `τ_1,...,τ_n`.
    #[arg(long, allow_hyphen_values = true)]
    pub tau: String,
    #[arg(long, default_value_t = 1e-10)]
    pub rel_tol: f64,
}

#[derive(Debug, Args)]
pub struct KernelArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// `x,y,t_1,...,t_n`
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: String,
    #[arg(long, allow_hyphen_values = true)]
    pub beta: String,
    #[arg(long, value_enum, default_value_t = Method::Auto)]
    pub method: Method,
    #[arg(long, default_value_t = 1e-4)]
    pub rel_tol: f64,
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Grid sidecar `name.json`; samples are read from `name.bin`.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub diagnostics: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GeometryArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    pub tangency: Option<f64>,
    /// Two points `x,y,t`.
    #[arg(long, num_args = 2, value_names = ["ALPHA", "BETA"], allow_hyphen_values = true)]
    pub gauge: Option<Vec<String>>,
    /// Quadric coefficient for the gauge; defaults to the model's when `p = λx²`.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub size_report: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0, value_parser = clap::value_parser!(u8).range(0..=1))]
    pub derivative_order: u8,
    /// Write the size-report samples here as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value_t = Suite::All)]
    pub suite: Suite,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Also write the report here.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Replace every accuracy bound, e.g. to check failure reporting.
    #[arg(long)]
    pub tolerance_override: Option<f64>,
    /// Zero all timings so reports are byte-identical across runs.
    #[arg(long)]
    pub no_timings: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Library(#[from] Error),
    #[error("verification failed: {0}")]
    Verify(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Library(e) if e.is_domain() => EXIT_DOMAIN,
            CliError::Verify(_) => EXIT_VERIFY,
            _ => EXIT_CONFIG,
        }
    }
}

impl From<GridIoError> for CliError {
    fn from(e: GridIoError) -> Self {
        match e {
            GridIoError::Grid(e) => CliError::Config(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

pub fn load_model(path: &Path) -> CliResult<PolynomialModel> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let spec: ModelSpec =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    PolynomialModel::from_spec(&spec).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn point(s: &str) -> CliResult<ManifoldPoint> {
    ManifoldPoint::parse(s).map_err(CliError::Config)
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable output")
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(io_err(path))
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit code. Output goes to `out`, messages to standard error.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            log::debug!("{e}");
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> CliResult<()> {
    let text = match cmd {
        Command::Eval(EvalCommand::Weight(a)) => eval_weight(a)?,
        Command::Eval(EvalCommand::Kernel(a)) => eval_kernel(a)?,
        Command::Project(a) => project(a)?,
        Command::Geometry(a) => geometry(a)?,
        Command::Verify(a) => return verify(a, out),
    };
    writeln!(out, "{text}").map_err(|source| CliError::Io { path: PathBuf::from("<stdout>"), source })
}

fn eval_weight(a: WeightArgs) -> CliResult<String> {
    let model = load_model(&a.model)?;
    let tau = parse_list(&a.tau).map_err(CliError::Config)?;
    let w = log_weight_quadrature(&model, &Frequency::new(a.eta, tau), a.rel_tol)?;
    Ok(to_json(&w))
}

fn eval_kernel(a: KernelArgs) -> CliResult<String> {
    let model = load_model(&a.model)?;
    let v = factorized_kernel(&model, &point(&a.alpha)?, &point(&a.beta)?, a.rel_tol, a.method)?;
    Ok(to_json(&json!({
        "leaf_offset": v.leaf_offset,
        "on_leaf": v.on_leaf,
        "amplitude_re": v.amplitude.re,
        "amplitude_im": v.amplitude.im,
    })))
}

fn project(a: ProjectArgs) -> CliResult<String> {
    let model = load_model(&a.model)?;
    let f = read_grid(&a.input)?;
    let (sf, diag) = apply_szego_projection(&f, &model)?;
    write_grid(&a.output, &sf).map_err(io_err(&a.output))?;
    let text = to_json(&diag);
    if let Some(path) = &a.diagnostics {
        write_file(path, &text)?;
    }
    Ok(text)
}

fn geometry(a: GeometryArgs) -> CliResult<String> {
    let model = load_model(&a.model)?;
    let mut report = serde_json::Map::new();
    report.insert("commutators".into(), json!(commutator_fields(&model)));
    if let Some(x) = a.tangency {
        report.insert("tangency".into(), json!(tangency_report(&model, x)));
    }
    let lambda = || {
        a.lambda.or(model.quadric_coefficient()).ok_or_else(|| {
            CliError::Config("--lambda is required unless the model profile is λx²".into())
        })
    };
    if let Some(points) = &a.gauge {
        let r = gauge_distance(lambda()?, &point(&points[0])?, &point(&points[1])?)?;
        report.insert("gauge".into(), json!(r));
    }
    if let Some(count) = a.size_report {
        let r = size_ratio_report(lambda()?, count, a.derivative_order, a.seed)?;
        if let Some(path) = &a.csv {
            let file = fs::File::create(path).map_err(io_err(path))?;
            r.write_csv(file).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        }
        report.insert("size_report".into(), json!(r));
    }
    Ok(to_json(&report))
}

fn verify(a: VerifyArgs, out: &mut dyn Write) -> CliResult<()> {
    let opts = VerifyOptions { seed: a.seed, timings: !a.no_timings, tolerance_override: a.tolerance_override };
    let report = verify::run(a.suite, &opts);
    let text = to_json(&report);
    if let Some(path) = &a.report {
        write_file(path, &text)?;
    }
    writeln!(out, "{text}").map_err(|source| CliError::Io { path: PathBuf::from("<stdout>"), source })?;
    let failed: Vec<String> = report.failures().map(|c| format!("{}.{}", c.suite, c.name)).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verify(failed.join(", ")))
    }
}
