//! The `qtunnel` command line.
//!
//! Every command writes its machine-readable payload (CSV or JSON) to stdout
//! or to `--output`, and diagnostics to stderr. Exit codes: 0 success,
//! 1 usage error, 2 input or format error, 3 numeric failure.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::detector::{scan, DetectorConfig, Normalization};
use crate::error::Error;
use crate::marketdata::{parse_csv, to_csv};
use crate::model::{BarrierGeometry, MarketParams};
use crate::regime::RegimeConfig;
use crate::spectral::{eigen_spectrum, resonance_gap, PriceBox, DEFAULT_GRID_POINTS};
use crate::synthetic::{generate, Breakout, Direction, SynthConfig};
use crate::tunneling::{
    barrier_profile, transmission_closed_form, wkb_integral_numeric, DEFAULT_TOLERANCE,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Result of one invocation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CommandOutcome {
    pub exit_code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl CommandOutcome {
    fn ok(stdout: String) -> Self {
        Self {
            exit_code: EXIT_OK,
            stdout,
            stderr: String::new(),
        }
    }

    fn failure(exit_code: i32, stderr: String) -> Self {
        Self {
            exit_code,
            stdout: String::new(),
            stderr,
        }
    }
}

/// Exit code for a library error.
pub fn exit_code(error: &Error) -> i32 {
    match error {
        Error::Argument { .. } | Error::Domain(_) => EXIT_USAGE,
        Error::Format(_)
        | Error::Row { .. }
        | Error::Integrity(_)
        | Error::Range { .. }
        | Error::Io(_) => EXIT_INPUT,
        Error::Numeric { .. } | Error::Quadrature { .. } => EXIT_NUMERIC,
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "qtunnel",
    version,
    about = "Range-bound option pricing as a particle in a box: spectra, price tunneling and breakout scans",
    after_help = "Set QTUNNEL_LOG=error|warn|info|debug to control stderr verbosity."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Transmission coefficient through the 1/S² barrier (JSON)
    Transmission(TransmissionArgs),
    /// Lowest eigenvalues of the pricing operator on a box (CSV)
    Eigen(EigenArgs),
    /// Samples of the potential V(S) = 1/S² with λ levels (CSV)
    Potential(PotentialArgs),
    /// Scan a price CSV for tunneling breakouts (JSON)
    Scan(ScanArgs),
    /// Generate a synthetic range-bound price CSV
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
struct TransmissionArgs {
    /// Annualized interest rate r
    #[arg(long, allow_negative_numbers = true)]
    rate: f64,
    /// Annualized volatility σ
    #[arg(long, allow_negative_numbers = true)]
    vol: f64,
    /// Normalized strike level K
    #[arg(long, allow_negative_numbers = true)]
    strike: f64,
    /// Also integrate the WKB exponent numerically and report the gap
    #[arg(long)]
    oracle: bool,
    /// Relative tolerance of the numerical integral
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    tolerance: f64,
}

#[derive(Debug, Args)]
struct EigenArgs {
    #[arg(long, allow_negative_numbers = true)]
    rate: f64,
    #[arg(long, allow_negative_numbers = true)]
    vol: f64,
    /// Lower wall of the box (normalized price)
    #[arg(long, allow_negative_numbers = true)]
    support: f64,
    /// Upper wall of the box (normalized price)
    #[arg(long, allow_negative_numbers = true)]
    resistance: f64,
    /// Number of eigenvalues to report
    #[arg(long)]
    count: usize,
    /// Interior grid points
    #[arg(long, default_value_t = DEFAULT_GRID_POINTS)]
    grid_points: usize,
    /// Drop the 1/S² potential (free particle in a box)
    #[arg(long)]
    flat_potential: bool,
    /// Also write the eigenfunctions as CSV (s, psi_1, ..., psi_k)
    #[arg(long)]
    eigenfunctions: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PotentialArgs {
    #[arg(long, allow_negative_numbers = true)]
    s_min: f64,
    #[arg(long, allow_negative_numbers = true)]
    s_max: f64,
    #[arg(long, default_value_t = 200)]
    points: usize,
    /// λ level to annotate with its turning point; repeatable
    #[arg(long = "lambda-level", allow_negative_numbers = true)]
    lambda_levels: Vec<f64>,
}

#[derive(Debug, Args)]
struct ScanArgs {
    /// Price CSV (date,open,high,low,close,volume)
    #[arg(long)]
    input: PathBuf,
    /// Annualized interest rate used for the transmission coefficient
    #[arg(long, allow_negative_numbers = true)]
    rate: f64,
    /// Symbol recorded in the report [default: input file stem]
    #[arg(long)]
    symbol: Option<String>,
    /// Minimum transmission coefficient for an event
    #[arg(long, default_value_t = 0.95)]
    t_threshold: f64,
    /// Fast vol must be at most this fraction of slow vol
    #[arg(long, default_value_t = 0.5)]
    vol_drop_ratio: f64,
    #[arg(long, default_value_t = 5)]
    vol_fast_window: usize,
    #[arg(long, default_value_t = 20)]
    vol_slow_window: usize,
    /// Bars after a regime that may still break out of it
    #[arg(long, default_value_t = 20)]
    grace_bars: usize,
    /// Rolling window for regime detection
    #[arg(long, default_value_t = 60)]
    window: usize,
    /// Maximum (resistance − support) / midpoint of a range
    #[arg(long, default_value_t = 0.10)]
    band_fraction: f64,
    /// Minimum fraction of closes inside the walls
    #[arg(long, default_value_t = 0.8)]
    containment_min: f64,
    /// Minimum regime length in bars
    #[arg(long, default_value_t = 40)]
    min_length: usize,
    /// Write the report here instead of stdout
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DirectionArg {
    Up,
    Down,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 250)]
    bars: usize,
    #[arg(long, default_value_t = 100.0, allow_negative_numbers = true)]
    start: f64,
    #[arg(long, default_value_t = 95.0, allow_negative_numbers = true)]
    support: f64,
    #[arg(long, default_value_t = 105.0, allow_negative_numbers = true)]
    resistance: f64,
    /// Per-bar standard deviation of log returns
    #[arg(long, default_value_t = 0.01, allow_negative_numbers = true)]
    daily_vol: f64,
    /// Bar at which the breakout dynamics start (omit for a pure range)
    #[arg(long)]
    breakout_at: Option<usize>,
    #[arg(long, default_value_t = 0.25, allow_negative_numbers = true)]
    vol_damp: f64,
    /// Log-return drift per bar after the breakout starts
    #[arg(long, default_value_t = 0.004, allow_negative_numbers = true)]
    drift: f64,
    #[arg(long, value_enum, default_value_t = DirectionArg::Up)]
    direction: DirectionArg,
    #[arg(long, default_value = "SYNTH")]
    symbol: String,
    /// Date of the first bar (YYYY-MM-DD)
    #[arg(long, default_value = "2013-01-01")]
    start_date: NaiveDate,
    /// Write the CSV here instead of stdout
    #[arg(long)]
    output: Option<PathBuf>,
}

/// Write `contents` to `path` via a temporary file in the same directory
/// and a rename.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), Error> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.to_string()))?;
    Ok(())
}

fn emit(payload: String, output: Option<&Path>) -> Result<String, Error> {
    match output {
        Some(path) => {
            write_atomic(path, &payload)?;
            log::info!("wrote {}", path.display());
            Ok(String::new())
        }
        None => Ok(payload),
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string(value).expect("plain data serializes");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct ClosedFormJson {
    t_closed: f64,
    exponent: f64,
    geometry: BarrierGeometry,
}

#[derive(Serialize)]
struct OracleJson {
    t_closed: f64,
    exponent: f64,
    geometry: BarrierGeometry,
    t_quadrature: f64,
    rel_gap: f64,
    integral: f64,
    error_estimate: f64,
    evaluations: usize,
}

fn cmd_transmission(args: TransmissionArgs) -> Result<String, Error> {
    let params = MarketParams::new(args.rate, args.vol)?;
    let closed = transmission_closed_form(&params, args.strike)?;
    if !args.oracle {
        return Ok(to_json(&ClosedFormJson {
            t_closed: closed.t_closed,
            exponent: closed.exponent,
            geometry: closed.geometry,
        }));
    }
    let quad = wkb_integral_numeric(&params, args.strike, args.tolerance)?;
    Ok(to_json(&OracleJson {
        t_closed: closed.t_closed,
        exponent: closed.exponent,
        geometry: closed.geometry,
        t_quadrature: quad.t_quadrature,
        rel_gap: (closed.t_closed - quad.t_quadrature).abs() / closed.t_closed,
        integral: quad.integral,
        error_estimate: quad.error_estimate,
        evaluations: quad.evaluations,
    }))
}

fn cmd_eigen(args: EigenArgs) -> Result<String, Error> {
    let params = MarketParams::new(args.rate, args.vol)?;
    let price_box = PriceBox::new(args.support, args.resistance, args.grid_points)?;
    let solution = eigen_spectrum(&params, &price_box, args.count, args.flat_potential)?;
    let mut out = String::from("n,lambda_n\n");
    for (n, value) in solution.eigenvalues.iter().enumerate() {
        writeln!(out, "{},{}", n + 1, value).expect("writing to a String");
    }
    writeln!(
        out,
        "# resonance_gap={},lambda={}",
        resonance_gap(&params, &solution),
        params.lambda()
    )
    .expect("writing to a String");
    if let Some(path) = &args.eigenfunctions {
        let mut csv = String::from("s");
        for n in 1..=solution.eigenfunctions.len() {
            write!(csv, ",psi_{n}").expect("writing to a String");
        }
        csv.push('\n');
        for (i, s) in solution.grid.iter().enumerate() {
            write!(csv, "{s}").expect("writing to a String");
            for f in &solution.eigenfunctions {
                write!(csv, ",{}", f[i]).expect("writing to a String");
            }
            csv.push('\n');
        }
        write_atomic(path, &csv)?;
    }
    Ok(out)
}

fn cmd_potential(args: PotentialArgs) -> Result<String, Error> {
    let profile = barrier_profile(args.s_min, args.s_max, args.points, &args.lambda_levels)?;
    let mut out = String::from("s,v\n");
    for (s, v) in &profile.rows {
        writeln!(out, "{s},{v}").expect("writing to a String");
    }
    for level in &profile.levels {
        let tp = level
            .turning_point
            .map(|t| t.to_string())
            .unwrap_or_default();
        writeln!(out, "# lambda={},turning_point={}", level.lambda, tp)
            .expect("writing to a String");
    }
    Ok(out)
}

fn cmd_scan(args: ScanArgs) -> Result<String, Error> {
    let detector = DetectorConfig {
        t_threshold: args.t_threshold,
        vol_drop_ratio: args.vol_drop_ratio,
        vol_fast_window: args.vol_fast_window,
        vol_slow_window: args.vol_slow_window,
        normalization: Normalization::Midpoint,
        rate: args.rate,
        grace_bars: args.grace_bars,
    };
    detector.validate()?;
    let regime = RegimeConfig {
        window: args.window,
        band_fraction: args.band_fraction,
        containment_min: args.containment_min,
        min_length: args.min_length,
    };
    regime.validate()?;
    let symbol = args.symbol.clone().unwrap_or_else(|| {
        args.input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    let file = std::fs::File::open(&args.input)
        .map_err(|e| Error::Io(format!("{}: {e}", args.input.display())))?;
    let series = parse_csv(std::io::BufReader::new(file), &symbol)?;
    log::info!("{symbol}: {} bars", series.len());
    let report = scan(&series, &detector, &regime)?;
    log::info!(
        "{symbol}: {} regimes, {} events",
        report.regimes.len(),
        report.events.len()
    );
    emit(report.to_canonical_json(), args.output.as_deref())
}

fn cmd_simulate(args: SimulateArgs) -> Result<String, Error> {
    let breakout = args.breakout_at.map(|at_bar| Breakout {
        at_bar,
        vol_damp: args.vol_damp,
        drift_per_bar: args.drift,
        direction: match args.direction {
            DirectionArg::Up => Direction::Up,
            DirectionArg::Down => Direction::Down,
        },
    });
    let config = SynthConfig {
        seed: args.seed,
        bars: args.bars,
        start: args.start,
        support: args.support,
        resistance: args.resistance,
        daily_vol: args.daily_vol,
        breakout,
        symbol: args.symbol,
        start_date: args.start_date,
    };
    let series = generate(&config)?;
    emit(to_csv(&series), args.output.as_deref())
}

/// Parse `args` (including the program name) and run the command.
pub fn run<I, T>(args: I) -> CommandOutcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let rendered = e.render().to_string();
            return if e.use_stderr() {
                CommandOutcome::failure(EXIT_USAGE, rendered)
            } else {
                CommandOutcome::ok(rendered)
            };
        }
    };
    let result = match cli.command {
        Command::Transmission(a) => cmd_transmission(a),
        Command::Eigen(a) => cmd_eigen(a),
        Command::Potential(a) => cmd_potential(a),
        Command::Scan(a) => cmd_scan(a),
        Command::Simulate(a) => cmd_simulate(a),
    };
    match result {
        Ok(stdout) => CommandOutcome::ok(stdout),
        Err(e) => {
            log::debug!("command failed: {e:?}");
            CommandOutcome::failure(exit_code(&e), format!("error: {e}\n"))
        }
    }
}
