//! `trigauss` — entanglement certification for three-mode Gaussian states.
//!
//! Subcommands:
//!
//! - `families`: list the built-in state families and their parameters,
//! - `check`: run the detector stack at a single parameter point,
//! - `scan1d` / `scan2d`: sweep parameter grids and emit CSV/JSON tables and
//!   SVG plots,
//! - `bisect`: locate one detector's detection boundary,
//! - `reproduce`: canned scan-and-plot configurations for the standard
//!   threshold and region studies.
//!
//! Exit codes: 0 on success, 1 on I/O failures, 2 on configuration or
//! bracket errors, 3 on solver failures. Worker count comes from
//! `--workers`, then the `TRIGAUSS_WORKERS` environment variable, then the
//! core count; output bytes are independent of it.

mod config;

use clap::{Args, Parser, Subcommand, ValueEnum};
use config::Config;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use trigauss::conic::SolveOptions;
use trigauss::scan::{
    bisect_threshold, boundary_in_second, boundary_to_csv, boundary_to_json, evaluate_point,
    linear_grid, records_to_csv, records_to_json, records_to_svg_regions, records_to_svg_strip,
    scan_1d, scan_2d, second_param_name, thresholds_to_csv, thresholds_to_json, DetectorKind,
    DetectorSpec, EmitOptions, ScanAxis, ScanError, ScanOptions, ScanRecord, ThresholdResult,
    Verdict, DEFAULT_BOUNDARY_TOL, DEFAULT_BOUNDARY_TOL_D4, DEFAULT_STEP_1D, DEFAULT_STEP_2D,
};
use trigauss::{Family, FamilyParams};

const DETECTORS_HELP: &str = "Comma-separated detector stack. Available: \
ppt (full inseparability from covariance partial transposes), \
cm-bisep (covariance biseparability SDP), \
single-excitation (closed-form inequality on the d=2 block), \
product-sweep (element-inequality sweep on the d=2 block), \
witness-d2 / witness-d3 / witness-d4 (fully decomposable witness SDP at that cutoff). \
`default` expands to ppt,cm-bisep,single-excitation,product-sweep,witness-d2 and `all` to every detector";

#[derive(Debug)]
enum CliError {
    /// Bad flags, config entries, or brackets — exit code 2.
    Config(String),
    /// Scan-engine errors carry their own exit-code classification.
    Scan(ScanError),
    /// Solver failures surfaced through detector verdicts — exit code 3.
    Solver(String),
    /// Filesystem failures — exit code 1.
    Io { path: PathBuf, source: std::io::Error },
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "{msg}"),
            CliError::Scan(e) => write!(f, "{e}"),
            CliError::Solver(msg) => write!(f, "solver failure: {msg}"),
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
        }
    }
}

impl From<ScanError> for CliError {
    fn from(e: ScanError) -> Self {
        CliError::Scan(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Scan(e) => e.exit_code() as u8,
            CliError::Solver(_) => 3,
            CliError::Io { .. } => 1,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "trigauss",
    version,
    about = "Entanglement certification for three-mode Gaussian states",
    long_about = "Decides full inseparability and genuine multipartite entanglement for \
three-mode Gaussian states given by covariance matrices, by combining \
covariance-level tests (partial transposes, a biseparability SDP) with \
criteria on finite photon-number blocks (closed-form inequalities and a \
fully decomposable witness SDP)."
)]
struct Cli {
    /// `key = value` configuration file; flags win over config entries.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Worker threads for grid evaluation (default: TRIGAUSS_WORKERS, then
    /// all cores). Does not affect output bytes.
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,

    /// Include per-detector wall-clock times in CSV/JSON output (off by
    /// default so repeated runs emit identical bytes).
    #[arg(long, global = true)]
    timings: bool,

    /// Duality-gap and feasibility target for the semidefinite solves.
    #[arg(long, global = true, value_name = "TOL")]
    solver_tol: Option<f64>,

    /// Iteration cap for the semidefinite solves.
    #[arg(long, global = true, value_name = "N")]
    max_iter: Option<u32>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the state families and their parameters.
    Families,
    /// Run the detector stack at a single parameter point.
    Check(CheckArgs),
    /// Sweep the squeezing parameter over a grid.
    Scan1d(Scan1dArgs),
    /// Sweep squeezing against the family's second parameter.
    Scan2d(Scan2dArgs),
    /// Locate one detector's detection boundary by bisection.
    Bisect(BisectArgs),
    /// Run a canned scan-and-plot configuration.
    Reproduce(ReproduceArgs),
}

#[derive(Args)]
struct CheckArgs {
    /// State family: vac, smsv, thermal, coherent, or noisy-ghz.
    #[arg(long)]
    family: Option<String>,
    /// Squeezing parameter.
    #[arg(short, long)]
    r: Option<f64>,
    /// Second family parameter (nbar, alpha, or eta), where the family has
    /// one.
    #[arg(long)]
    second: Option<f64>,
    #[arg(long, help = DETECTORS_HELP)]
    detectors: Option<String>,
    /// Detection-tolerance override applied to every detector in the stack.
    #[arg(long, value_name = "TOL")]
    detector_tol: Option<f64>,
    /// Cap on the photon-number cutoff of block detectors (2-4; default 3
    /// here — the d=4 witness takes minutes).
    #[arg(long, value_name = "D")]
    d_max: Option<usize>,
    /// Write the record as CSV.
    #[arg(long, value_name = "PATH")]
    csv: Option<PathBuf>,
    /// Write the record as JSON (includes diagnostics and notes).
    #[arg(long, value_name = "PATH")]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct Scan1dArgs {
    /// State family: vac, smsv, thermal, coherent, or noisy-ghz.
    #[arg(long)]
    family: Option<String>,
    /// Grid start (default 0).
    #[arg(long)]
    r_min: Option<f64>,
    /// Grid end (default 2).
    #[arg(long)]
    r_max: Option<f64>,
    /// Grid step (default 0.005).
    #[arg(long)]
    r_step: Option<f64>,
    /// Fixed second family parameter, where the family has one.
    #[arg(long)]
    second: Option<f64>,
    #[arg(long, help = DETECTORS_HELP)]
    detectors: Option<String>,
    /// Detection-tolerance override applied to every detector in the stack.
    #[arg(long, value_name = "TOL")]
    detector_tol: Option<f64>,
    /// Cap on the photon-number cutoff of block detectors (2-4).
    #[arg(long, value_name = "D")]
    d_max: Option<usize>,
    /// Write records as CSV (with no output flags, CSV goes to stdout).
    #[arg(long, value_name = "PATH")]
    csv: Option<PathBuf>,
    /// Write records as JSON.
    #[arg(long, value_name = "PATH")]
    json: Option<PathBuf>,
    /// Render a strip chart of detected intervals per detector.
    #[arg(long, value_name = "PATH")]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct Scan2dArgs {
    /// State family with a second parameter: thermal, coherent, or
    /// noisy-ghz.
    #[arg(long)]
    family: Option<String>,
    /// Squeezing grid start (default 0.05).
    #[arg(long)]
    r_min: Option<f64>,
    /// Squeezing grid end (default 2).
    #[arg(long)]
    r_max: Option<f64>,
    /// Squeezing grid step (default 0.05).
    #[arg(long)]
    r_step: Option<f64>,
    /// Second-parameter grid start (default: family-specific).
    #[arg(long)]
    second_min: Option<f64>,
    /// Second-parameter grid end (default: family-specific).
    #[arg(long)]
    second_max: Option<f64>,
    /// Second-parameter grid step (default 0.05).
    #[arg(long)]
    second_step: Option<f64>,
    #[arg(long, help = DETECTORS_HELP)]
    detectors: Option<String>,
    /// Detection-tolerance override applied to every detector in the stack.
    #[arg(long, value_name = "TOL")]
    detector_tol: Option<f64>,
    /// Cap on the photon-number cutoff of block detectors (2-4).
    #[arg(long, value_name = "D")]
    d_max: Option<usize>,
    /// Write records as CSV (with no output flags, CSV goes to stdout).
    #[arg(long, value_name = "PATH")]
    csv: Option<PathBuf>,
    /// Write records as JSON.
    #[arg(long, value_name = "PATH")]
    json: Option<PathBuf>,
    /// Render a five-region entanglement map.
    #[arg(long, value_name = "PATH")]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct BisectArgs {
    /// State family: vac, smsv, thermal, coherent, or noisy-ghz.
    #[arg(long)]
    family: Option<String>,
    /// Detector whose boundary to locate (see scan1d --detectors for names).
    #[arg(long)]
    detector: Option<String>,
    /// Detection-tolerance override for the detector.
    #[arg(long, value_name = "TOL")]
    detector_tol: Option<f64>,
    /// Parameter to bisect: `r` or `second` (default r).
    #[arg(long)]
    axis: Option<String>,
    /// Lower bracket endpoint.
    #[arg(long)]
    low: Option<f64>,
    /// Upper bracket endpoint.
    #[arg(long)]
    high: Option<f64>,
    /// Bracket width target (default 1e-4; 1e-3 for witness-d4).
    #[arg(long)]
    tol: Option<f64>,
    /// Fixed squeezing, required when bisecting the second parameter.
    #[arg(short, long)]
    r: Option<f64>,
    /// Fixed second parameter, required when bisecting r in a
    /// two-parameter family.
    #[arg(long)]
    second: Option<f64>,
    /// Append the result to a CSV table.
    #[arg(long, value_name = "PATH")]
    csv: Option<PathBuf>,
    /// Write the result as JSON.
    #[arg(long, value_name = "PATH")]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct ReproduceArgs {
    /// Canned configuration to run.
    #[arg(value_enum)]
    preset: Preset,
    /// Output directory (default `reports/<preset>`).
    #[arg(long, value_name = "DIR")]
    out_dir: Option<PathBuf>,
    /// Coarsen grids for a fast pass.
    #[arg(long)]
    quick: bool,
    /// Cap on the photon-number cutoff of block detectors (default 2 for
    /// canned runs; 3 adds the qutrit witness to scans).
    #[arg(long, value_name = "D")]
    d_max: Option<usize>,
}

/// Canned configurations: squeezing-threshold studies for the
/// one-parameter families and region maps for the two-parameter ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Preset {
    /// Detection thresholds in r for the vacuum-third-mode family.
    VacThresholds,
    /// Detection thresholds in r for the squeezed-third-mode family.
    SmsvThresholds,
    /// Entanglement regions over (r, nbar) for the thermal family.
    ThermalRegion,
    /// Entanglement regions over (r, alpha) with the partial-transpose
    /// boundary traced in alpha.
    CoherentRegion,
    /// Entanglement regions over (r, eta) with the biseparability boundary
    /// traced in eta.
    NoisyGhzRegion,
}

impl Preset {
    fn dir_name(self) -> &'static str {
        match self {
            Preset::VacThresholds => "vac-thresholds",
            Preset::SmsvThresholds => "smsv-thresholds",
            Preset::ThermalRegion => "thermal-region",
            Preset::CoherentRegion => "coherent-region",
            Preset::NoisyGhzRegion => "noisy-ghz-region",
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = match &cli.config {
        Some(path) => Config::load(path).map_err(CliError::Config)?,
        None => Config::empty(),
    };
    let common = resolve_common(&cli, &cfg)?;
    match &cli.command {
        Command::Families => {
            print!("{}", families_table());
            Ok(())
        }
        Command::Check(args) => cmd_check(args, &cfg, &common),
        Command::Scan1d(args) => cmd_scan1d(args, &cfg, &common),
        Command::Scan2d(args) => cmd_scan2d(args, &cfg, &common),
        Command::Bisect(args) => cmd_bisect(args, &cfg, &common),
        Command::Reproduce(args) => cmd_reproduce(args, &cfg, &common),
    }
}

/// Settings shared by every subcommand, resolved from flags then config.
struct Common {
    scan: ScanOptions,
    emit: EmitOptions,
}

fn cfg_parse<T>(cfg: &Config, key: &str) -> Result<Option<T>, CliError>
where
    T: std::str::FromStr,
    T::Err: std::fmt::Display,
{
    cfg.parse::<T>(key).map_err(CliError::Config)
}

fn resolve_common(cli: &Cli, cfg: &Config) -> Result<Common, CliError> {
    let mut solve = SolveOptions::default();
    if let Some(tol) = cli.solver_tol.or(cfg_parse(cfg, "solver_tol")?) {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(CliError::Config(format!("--solver-tol must be positive, got {tol}")));
        }
        solve.tol_gap = Some(tol);
        solve.tol_feas = Some(tol);
    }
    if let Some(n) = cli.max_iter.or(cfg_parse(cfg, "max_iter")?) {
        solve.max_iter = Some(n);
    }
    let workers = cli.workers.or(cfg_parse(cfg, "workers")?);
    let timings = cli.timings || cfg.parse_bool("timings").map_err(CliError::Config)?.unwrap_or(false);
    Ok(Common { scan: ScanOptions { solve, workers }, emit: EmitOptions { timings } })
}

fn require<T>(value: Option<T>, key: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::Config(format!("missing `--{}` (or config key `{}`)", key.replace('_', "-"), key)))
}

fn parse_family(name: &str) -> Result<Family, CliError> {
    name.parse::<Family>().map_err(|e| CliError::Config(e.to_string()))
}

/// Resolves `--second` for commands that hold it fixed: required exactly
/// when the family has a second parameter.
fn resolve_fixed_second(
    family: Family,
    flag: Option<f64>,
    cfg: &Config,
) -> Result<Option<f64>, CliError> {
    let value = match flag {
        Some(v) => Some(v),
        None => cfg_parse(cfg, "second")?,
    };
    match (second_param_name(family), value) {
        (Some(name), None) => Err(CliError::Config(format!(
            "family `{}` needs `--second` (its {name} value)",
            family.as_str()
        ))),
        (None, Some(_)) => Err(CliError::Config(format!(
            "family `{}` has no second parameter",
            family.as_str()
        ))),
        (_, v) => Ok(v),
    }
}

fn base_params(family: Family, r: f64, second: Option<f64>) -> FamilyParams {
    let base = FamilyParams::r(r);
    match second {
        Some(v) => base.with_second(family, v),
        None => base,
    }
}

/// What a missing `--detectors` expands to.
enum StackDefault {
    /// Every detector within the cutoff cap (used by `check`).
    All,
    /// The standard scan stack: everything cheap enough to run at every
    /// grid point.
    Scan,
}

fn resolve_stack(
    requested: Option<&str>,
    tolerance: Option<f64>,
    d_max: usize,
    default: StackDefault,
) -> Result<Vec<DetectorSpec>, CliError> {
    if !(2..=4).contains(&d_max) {
        return Err(CliError::Config(format!("--d-max must be 2, 3, or 4, got {d_max}")));
    }
    let default_kinds = || DetectorSpec::default_stack().iter().map(|s| s.kind).collect();
    let kinds: Vec<DetectorKind> = match requested {
        None => match default {
            StackDefault::All => DetectorKind::ALL.to_vec(),
            StackDefault::Scan => default_kinds(),
        },
        Some("all") => DetectorKind::ALL.to_vec(),
        Some("default") => default_kinds(),
        Some(list) => list
            .split(',')
            .map(|t| t.trim().parse::<DetectorKind>())
            .collect::<Result<_, _>>()
            .map_err(CliError::Scan)?,
    };
    let stack: Vec<DetectorSpec> = kinds
        .into_iter()
        .filter(|k| k.block_dim().is_none_or(|d| d <= d_max))
        .map(|kind| DetectorSpec { kind, tolerance })
        .collect();
    if stack.is_empty() {
        return Err(CliError::Config("detector stack is empty after applying --d-max".into()));
    }
    Ok(stack)
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|source| CliError::Io { path: parent.to_path_buf(), source })?;
        }
    }
    std::fs::write(path, contents).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn report_anomalies(records: &[ScanRecord]) {
    let mut count = 0usize;
    for rec in records {
        for anomaly in &rec.anomalies {
            let second = rec.second.map(|s| format!(", second = {s}")).unwrap_or_default();
            eprintln!("anomaly at {} r = {}{}: {}", rec.family.as_str(), rec.r, second, anomaly);
            count += 1;
        }
    }
    if count > 0 {
        eprintln!("{count} anomalous grid point(s) — check solver tolerances before trusting the table");
    }
}

fn families_table() -> String {
    let rows: [(&str, &str, &str); 5] = [
        ("vac", "r >= 0", "equal mixture of squeezed-pair placements, vacuum third mode"),
        ("smsv", "r >= 0", "equal mixture of squeezed-pair placements, squeezed third mode (same r)"),
        ("thermal", "r >= 0, nbar >= 0", "equal mixture of squeezed-pair placements, thermal third mode"),
        ("coherent", "r >= 0, alpha >= 0", "equal mixture of squeezed-pair placements, displaced third mode (mean removed)"),
        ("noisy-ghz", "r >= 0, eta in [0, 1]", "three-mode squeezed state mixed with vacuum noise"),
    ];
    let mut out = format!("{:<11} {:<22} {}\n", "family", "parameters", "state");
    for (name, params, desc) in rows {
        out.push_str(&format!("{name:<11} {params:<22} {desc}\n"));
    }
    out
}

fn opt_f64(v: Option<f64>, precision: usize) -> String {
    v.map(|v| format!("{v:.precision$}")).unwrap_or_default()
}

fn print_record(record: &ScanRecord) {
    let second = record
        .second
        .map(|s| {
            let name = second_param_name(record.family).unwrap_or("second");
            format!(", {name} = {s}")
        })
        .unwrap_or_default();
    println!("{} at r = {}{}", record.family.as_str(), record.r, second);
    println!(
        "{:<18} {:<14} {:>14} {:>14} {:>10}",
        "detector", "verdict", "margin", "value", "trace_d"
    );
    for res in &record.results {
        println!(
            "{:<18} {:<14} {:>14} {:>14} {:>10}",
            res.detector.name(),
            res.verdict.as_str(),
            opt_f64(res.margin, 6),
            opt_f64(res.value, 6),
            opt_f64(res.trace_d, 4),
        );
        if let Some(note) = &res.note {
            println!("{:<18} note: {note}", "");
        }
    }
    for anomaly in &record.anomalies {
        println!("anomaly: {anomaly}");
    }
}

fn cmd_check(args: &CheckArgs, cfg: &Config, common: &Common) -> Result<(), CliError> {
    let family = parse_family(&require(
        args.family.clone().or_else(|| cfg.raw("family").map(String::from)),
        "family",
    )?)?;
    let r = require(args.r.or(cfg_parse(cfg, "r")?), "r")?;
    let second = resolve_fixed_second(family, args.second, cfg)?;
    let d_max = args.d_max.or(cfg_parse(cfg, "d_max")?).unwrap_or(3);
    let detectors = args.detectors.clone().or_else(|| cfg.raw("detectors").map(String::from));
    let tolerance = args.detector_tol.or(cfg_parse(cfg, "detector_tol")?);
    let stack = resolve_stack(detectors.as_deref(), tolerance, d_max, StackDefault::All)?;

    let params = base_params(family, r, second);
    let record = evaluate_point(family, &params, &stack, &common.scan.solve);
    print_record(&record);
    let records = [record];
    if let Some(path) = args.csv.clone().or(cfg_parse(cfg, "csv")?) {
        write_file(&path, &records_to_csv(&records, &common.emit))?;
    }
    if let Some(path) = args.json.clone().or(cfg_parse(cfg, "json")?) {
        write_file(&path, &records_to_json(&records, &common.emit))?;
    }

    // A point check that could not be evaluated is a failure, not a verdict:
    // construction problems are configuration errors, the rest are solver
    // errors.
    for res in &records[0].results {
        if res.verdict == Verdict::Error {
            let note = res.note.clone().unwrap_or_else(|| "unknown failure".into());
            return Err(if note.starts_with("state construction") {
                CliError::Config(note)
            } else {
                CliError::Solver(format!("{}: {note}", res.detector))
            });
        }
    }
    Ok(())
}

/// Emits scan records to the requested outputs; CSV goes to stdout when no
/// output flag is given.
fn emit_scan(
    records: &[ScanRecord],
    emit: &EmitOptions,
    csv: Option<&Path>,
    json: Option<&Path>,
    svg: Option<&Path>,
    svg_render: impl Fn(&[ScanRecord]) -> String,
) -> Result<(), CliError> {
    if let Some(path) = csv {
        write_file(path, &records_to_csv(records, emit))?;
    }
    if let Some(path) = json {
        write_file(path, &records_to_json(records, emit))?;
    }
    if let Some(path) = svg {
        write_file(path, &svg_render(records))?;
    }
    if csv.is_none() && json.is_none() && svg.is_none() {
        print!("{}", records_to_csv(records, emit));
    }
    report_anomalies(records);
    Ok(())
}

fn cmd_scan1d(args: &Scan1dArgs, cfg: &Config, common: &Common) -> Result<(), CliError> {
    let family = parse_family(&require(
        args.family.clone().or_else(|| cfg.raw("family").map(String::from)),
        "family",
    )?)?;
    let second = resolve_fixed_second(family, args.second, cfg)?;
    let r_min = args.r_min.or(cfg_parse(cfg, "r_min")?).unwrap_or(0.0);
    let r_max = args.r_max.or(cfg_parse(cfg, "r_max")?).unwrap_or(2.0);
    let r_step = args.r_step.or(cfg_parse(cfg, "r_step")?).unwrap_or(DEFAULT_STEP_1D);
    let d_max = args.d_max.or(cfg_parse(cfg, "d_max")?).unwrap_or(4);
    let detectors = args.detectors.clone().or_else(|| cfg.raw("detectors").map(String::from));
    let tolerance = args.detector_tol.or(cfg_parse(cfg, "detector_tol")?);
    let stack = resolve_stack(detectors.as_deref(), tolerance, d_max, StackDefault::Scan)?;

    let grid = linear_grid(r_min, r_max, r_step)?;
    let base = base_params(family, 0.0, second);
    let records = scan_1d(family, &base, &grid, &stack, &common.scan)?;
    let title = format!("{} family, detection along r", family.as_str());
    emit_scan(
        &records,
        &common.emit,
        args.csv.clone().or(cfg_parse(cfg, "csv")?).as_deref(),
        args.json.clone().or(cfg_parse(cfg, "json")?).as_deref(),
        args.svg.clone().or(cfg_parse(cfg, "svg")?).as_deref(),
        |recs| records_to_svg_strip(recs, &title),
    )
}

/// Family-specific default range of the second parameter.
fn default_second_range(family: Family) -> (f64, f64) {
    match family {
        Family::Coherent => (0.0, 1.5),
        _ => (0.0, 1.0),
    }
}

fn cmd_scan2d(args: &Scan2dArgs, cfg: &Config, common: &Common) -> Result<(), CliError> {
    let family = parse_family(&require(
        args.family.clone().or_else(|| cfg.raw("family").map(String::from)),
        "family",
    )?)?;
    let Some(second_name) = second_param_name(family) else {
        return Err(CliError::Config(format!(
            "family `{}` has no second parameter to scan",
            family.as_str()
        )));
    };
    let (second_lo, second_hi) = default_second_range(family);
    let r_min = args.r_min.or(cfg_parse(cfg, "r_min")?).unwrap_or(0.05);
    let r_max = args.r_max.or(cfg_parse(cfg, "r_max")?).unwrap_or(2.0);
    let r_step = args.r_step.or(cfg_parse(cfg, "r_step")?).unwrap_or(DEFAULT_STEP_2D);
    let second_min = args.second_min.or(cfg_parse(cfg, "second_min")?).unwrap_or(second_lo);
    let second_max = args.second_max.or(cfg_parse(cfg, "second_max")?).unwrap_or(second_hi);
    let second_step =
        args.second_step.or(cfg_parse(cfg, "second_step")?).unwrap_or(DEFAULT_STEP_2D);
    let d_max = args.d_max.or(cfg_parse(cfg, "d_max")?).unwrap_or(4);
    let detectors = args.detectors.clone().or_else(|| cfg.raw("detectors").map(String::from));
    let tolerance = args.detector_tol.or(cfg_parse(cfg, "detector_tol")?);
    let stack = resolve_stack(detectors.as_deref(), tolerance, d_max, StackDefault::Scan)?;

    let r_grid = linear_grid(r_min, r_max, r_step)?;
    let second_grid = linear_grid(second_min, second_max, second_step)?;
    let records =
        scan_2d(family, &FamilyParams::r(0.0), &r_grid, &second_grid, &stack, &common.scan)?;
    let title = format!("{} family over (r, {second_name})", family.as_str());
    emit_scan(
        &records,
        &common.emit,
        args.csv.clone().or(cfg_parse(cfg, "csv")?).as_deref(),
        args.json.clone().or(cfg_parse(cfg, "json")?).as_deref(),
        args.svg.clone().or(cfg_parse(cfg, "svg")?).as_deref(),
        |recs| records_to_svg_regions(recs, &title),
    )
}

fn print_threshold(t: &ThresholdResult) {
    let side = if t.detected_at_low { "below" } else { "above" };
    println!(
        "{} {}: {} = {:.6} ± {:.1e} (detected {side} the threshold)",
        t.family.as_str(),
        t.detector,
        t.axis.as_str(),
        t.threshold,
        0.5 * t.achieved_tol,
    );
}

fn cmd_bisect(args: &BisectArgs, cfg: &Config, common: &Common) -> Result<(), CliError> {
    let family = parse_family(&require(
        args.family.clone().or_else(|| cfg.raw("family").map(String::from)),
        "family",
    )?)?;
    let detector: DetectorKind = require(
        args.detector.clone().or_else(|| cfg.raw("detector").map(String::from)),
        "detector",
    )?
    .parse()
    .map_err(CliError::Scan)?;
    let axis = match args
        .axis
        .clone()
        .or_else(|| cfg.raw("axis").map(String::from))
        .as_deref()
        .unwrap_or("r")
    {
        "r" => ScanAxis::R,
        "second" => ScanAxis::Second,
        other => {
            return Err(CliError::Config(format!("--axis must be `r` or `second`, got `{other}`")))
        }
    };
    let low = require(args.low.or(cfg_parse(cfg, "low")?), "low")?;
    let high = require(args.high.or(cfg_parse(cfg, "high")?), "high")?;
    let default_tol = if detector == DetectorKind::WitnessD4 {
        DEFAULT_BOUNDARY_TOL_D4
    } else {
        DEFAULT_BOUNDARY_TOL
    };
    let tol = args.tol.or(cfg_parse(cfg, "tol")?).unwrap_or(default_tol);
    let spec = DetectorSpec {
        kind: detector,
        tolerance: args.detector_tol.or(cfg_parse(cfg, "detector_tol")?),
    };

    let base = match axis {
        ScanAxis::R => base_params(family, 0.0, resolve_fixed_second(family, args.second, cfg)?),
        ScanAxis::Second => {
            if second_param_name(family).is_none() {
                return Err(CliError::Config(format!(
                    "family `{}` has no second parameter to bisect",
                    family.as_str()
                )));
            }
            FamilyParams::r(require(args.r.or(cfg_parse(cfg, "r")?), "r")?)
        }
    };
    let result = bisect_threshold(family, &spec, &base, axis, (low, high), tol, &common.scan)?;
    print_threshold(&result);
    let results = [result];
    if let Some(path) = args.csv.clone().or(cfg_parse(cfg, "csv")?) {
        write_file(&path, &thresholds_to_csv(&results))?;
    }
    if let Some(path) = args.json.clone().or(cfg_parse(cfg, "json")?) {
        write_file(&path, &thresholds_to_json(&results))?;
    }
    Ok(())
}

/// Everything a canned run writes, collected so the summary can list it.
struct ReportDir {
    dir: PathBuf,
}

impl ReportDir {
    fn create(dir: PathBuf) -> Result<Self, CliError> {
        std::fs::create_dir_all(&dir)
            .map_err(|source| CliError::Io { path: dir.clone(), source })?;
        Ok(ReportDir { dir })
    }

    fn write(&self, name: &str, contents: &str) -> Result<(), CliError> {
        write_file(&self.dir.join(name), contents)
    }
}

fn preset_stack(d_max: usize) -> Vec<DetectorSpec> {
    let mut kinds = vec![
        DetectorKind::Ppt,
        DetectorKind::CmBisep,
        DetectorKind::SingleExcitation,
        DetectorKind::ProductSweep,
        DetectorKind::WitnessD2,
    ];
    if d_max >= 3 {
        kinds.push(DetectorKind::WitnessD3);
    }
    if d_max >= 4 {
        kinds.push(DetectorKind::WitnessD4);
    }
    kinds.into_iter().map(DetectorSpec::new).collect()
}

fn cmd_reproduce(args: &ReproduceArgs, cfg: &Config, common: &Common) -> Result<(), CliError> {
    let quick = args.quick || cfg.parse_bool("quick").map_err(CliError::Config)?.unwrap_or(false);
    let d_max = args.d_max.or(cfg_parse(cfg, "d_max")?).unwrap_or(2);
    if !(2..=4).contains(&d_max) {
        return Err(CliError::Config(format!("--d-max must be 2, 3, or 4, got {d_max}")));
    }
    let out_dir = args
        .out_dir
        .clone()
        .or(cfg_parse(cfg, "out_dir")?)
        .unwrap_or_else(|| PathBuf::from("reports").join(args.preset.dir_name()));
    let report = ReportDir::create(out_dir)?;
    let stack = preset_stack(d_max);

    let meta = |fields: serde_json::Value| -> String {
        let mut base = serde_json::json!({
            "preset": args.preset.dir_name(),
            "quick": quick,
            "d_max": d_max,
            "detectors": stack.iter().map(|s| s.kind.name()).collect::<Vec<_>>(),
            "solver": {
                "tol_gap": common.scan.solve.tol_gap,
                "tol_feas": common.scan.solve.tol_feas,
                "max_iter": common.scan.solve.max_iter,
            },
        });
        if let (Some(base_map), Some(extra)) = (base.as_object_mut(), fields.as_object()) {
            for (k, v) in extra {
                base_map.insert(k.clone(), v.clone());
            }
        }
        serde_json::to_string_pretty(&base).expect("metadata serializes")
    };

    match args.preset {
        Preset::VacThresholds | Preset::SmsvThresholds => {
            let (family, r_max, brackets): (Family, f64, &[(DetectorKind, f64, f64, f64)]) =
                match args.preset {
                    Preset::VacThresholds => (
                        Family::Vac,
                        1.5,
                        &[
                            (DetectorKind::Ppt, 1.0, 1.5, 1e-4),
                            (DetectorKind::SingleExcitation, 0.2, 0.4, 1e-4),
                            (DetectorKind::WitnessD2, 0.4, 0.7, 5e-4),
                        ],
                    ),
                    Preset::SmsvThresholds => (
                        Family::Smsv,
                        0.8,
                        &[
                            (DetectorKind::SingleExcitation, 0.1, 0.3, 1e-4),
                            (DetectorKind::WitnessD2, 0.3, 0.5, 5e-4),
                        ],
                    ),
                    _ => unreachable!(),
                };
            let step = if quick { 0.05 } else { DEFAULT_STEP_1D };
            let grid = linear_grid(0.0, r_max, step)?;
            let records =
                scan_1d(family, &FamilyParams::r(0.0), &grid, &stack, &common.scan)?;
            let mut thresholds = Vec::new();
            for &(kind, low, high, tol) in brackets {
                let t = bisect_threshold(
                    family,
                    &DetectorSpec::new(kind),
                    &FamilyParams::r(0.0),
                    ScanAxis::R,
                    (low, high),
                    tol,
                    &common.scan,
                )?;
                print_threshold(&t);
                thresholds.push(t);
            }
            report.write("scan.csv", &records_to_csv(&records, &common.emit))?;
            report.write("scan.json", &records_to_json(&records, &common.emit))?;
            report.write(
                "strip.svg",
                &records_to_svg_strip(
                    &records,
                    &format!("{} family, detection along r", family.as_str()),
                ),
            )?;
            report.write("thresholds.csv", &thresholds_to_csv(&thresholds))?;
            report.write("thresholds.json", &thresholds_to_json(&thresholds))?;
            report.write(
                "meta.json",
                &meta(serde_json::json!({ "r_step": step, "r_max": r_max })),
            )?;
            report_anomalies(&records);
        }
        Preset::ThermalRegion | Preset::CoherentRegion => {
            let (family, r_max, second_max) = match args.preset {
                Preset::ThermalRegion => (Family::Thermal, 1.3, 1.0),
                _ => (Family::Coherent, 1.2, 1.5),
            };
            let step = if quick { 0.1 } else { DEFAULT_STEP_2D };
            let r_grid = linear_grid(0.05, r_max, step)?;
            let second_grid = linear_grid(0.0, second_max, step)?;
            let records = scan_2d(
                family,
                &FamilyParams::r(0.0),
                &r_grid,
                &second_grid,
                &stack,
                &common.scan,
            )?;
            report.write("scan.csv", &records_to_csv(&records, &common.emit))?;
            report.write("scan.json", &records_to_json(&records, &common.emit))?;
            let second_name = second_param_name(family).expect("two-parameter family");
            report.write(
                "regions.svg",
                &records_to_svg_regions(
                    &records,
                    &format!("{} family over (r, {second_name})", family.as_str()),
                ),
            )?;
            let mut extra = serde_json::json!({
                "r_step": step, "r_max": r_max,
                "second_step": step, "second_max": second_max,
            });
            if args.preset == Preset::CoherentRegion {
                // Trace the full-inseparability boundary in alpha, where the
                // family has a closed form to compare against.
                let boundary = boundary_in_second(
                    family,
                    &DetectorSpec::new(DetectorKind::Ppt),
                    &FamilyParams::r(0.0),
                    &r_grid,
                    (0.0, 2.0),
                    DEFAULT_BOUNDARY_TOL,
                    &common.scan,
                )?;
                report.write("boundary.csv", &boundary_to_csv(family, &boundary))?;
                report.write("boundary.json", &boundary_to_json(&boundary))?;
                extra["boundary_tol"] = serde_json::json!(DEFAULT_BOUNDARY_TOL);
            }
            report.write("meta.json", &meta(extra))?;
            report_anomalies(&records);
        }
        Preset::NoisyGhzRegion => {
            let family = Family::NoisyGhz;
            let (r_step, eta_step) = if quick { (0.2, 0.1) } else { (0.1, DEFAULT_STEP_2D) };
            let r_grid = linear_grid(0.1, 2.0, r_step)?;
            let eta_grid = linear_grid(0.05, 0.95, eta_step)?;
            let stack =
                [DetectorKind::Ppt, DetectorKind::CmBisep].map(DetectorSpec::new).to_vec();
            let records = scan_2d(
                family,
                &FamilyParams::r(0.0),
                &r_grid,
                &eta_grid,
                &stack,
                &common.scan,
            )?;
            // The biseparability boundary in eta, per squeezing value.
            let boundary = boundary_in_second(
                family,
                &DetectorSpec::new(DetectorKind::CmBisep),
                &FamilyParams::r(0.0),
                &r_grid,
                (0.05, 0.95),
                0.005,
                &common.scan,
            )?;
            report.write("scan.csv", &records_to_csv(&records, &common.emit))?;
            report.write("scan.json", &records_to_json(&records, &common.emit))?;
            report.write(
                "regions.svg",
                &records_to_svg_regions(&records, "noisy GHZ family over (r, eta)"),
            )?;
            report.write("boundary.csv", &boundary_to_csv(family, &boundary))?;
            report.write("boundary.json", &boundary_to_json(&boundary))?;
            report.write(
                "meta.json",
                &meta(serde_json::json!({
                    "r_step": r_step, "eta_step": eta_step, "boundary_tol": 0.005,
                    "detectors": ["ppt", "cm-bisep"],
                })),
            )?;
            report_anomalies(&records);
        }
    }
    println!("reports in {}", report.dir.display());
    Ok(())
}
