//! Parameter scans, threshold bisection, and report emission.
//!
//! A scan runs a *stack* of detectors over a grid of family parameters. Each
//! detector reduces to a signed margin (positive means "detected") plus a
//! verdict, so heterogeneous tests — spectral partial-transpose checks,
//! semidefinite feasibility, closed-form block inequalities, and the
//! block witness — can be tabulated side by side. Within one grid point the
//! moments are built once and photon-number blocks are projected lazily and
//! shared across all detectors that need the same cutoff.
//!
//! Grid evaluation is embarrassingly parallel; [`ScanOptions::workers`] (or
//! the `TRIGAUSS_WORKERS` environment variable) bounds the thread pool, and
//! records always come back in grid order so emitted reports are
//! byte-for-byte reproducible. Wall-clock timings are recorded per detector
//! but excluded from output unless explicitly requested, for the same reason.

use crate::conic::SolveOptions;
use crate::fock::{project_to_qudits, DensityBlock, ElementMethod};
use crate::moments::{family_moments, Family, FamilyParams, GaussianMoments, Tolerances};
use crate::separability::{cm_bisep_feasibility_with, is_fully_inseparable, BisepStatus};
use crate::witness::{
    bisep_inequality_margin, fully_decomposable_witness_with, product_vector_sweep, WitnessStatus,
    WITNESS_DETECTION_TOL,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::time::Instant;
use thiserror::Error;

/// Environment variable consulted for the worker-thread count when
/// [`ScanOptions::workers`] is unset.
pub const WORKERS_ENV: &str = "TRIGAUSS_WORKERS";

/// Header line of the scan CSV format.
pub const SCAN_CSV_HEADER: &str =
    "family,r,second_param,detector,verdict,margin,value,trace_d,time_ms";

/// Default squeezing step for one-dimensional scans.
pub const DEFAULT_STEP_1D: f64 = 0.005;
/// Default step along both axes of two-dimensional scans.
pub const DEFAULT_STEP_2D: f64 = 0.05;
/// Default bisection tolerance for detection boundaries.
pub const DEFAULT_BOUNDARY_TOL: f64 = 1e-4;
/// Coarser bisection tolerance for the `d = 4` witness, whose solves dominate
/// boundary refinement cost.
pub const DEFAULT_BOUNDARY_TOL_D4: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum ScanError {
    #[error("parameter grid `{0}` is empty")]
    EmptyGrid(&'static str),
    #[error("parameter grid `{0}` must be finite and strictly increasing")]
    BadGrid(&'static str),
    #[error("detector stack is empty")]
    NoDetectors,
    #[error("unknown detector `{0}` (expected ppt, cm-bisep, single-excitation, product-sweep, witness-d2, witness-d3, or witness-d4)")]
    UnknownDetector(String),
    #[error("invalid bracket or tolerance: {0}")]
    BadBracket(String),
    #[error("both bracket endpoints give `{verdict}` on [{low}, {high}]; nothing to bisect")]
    SameVerdict { verdict: &'static str, low: f64, high: f64 },
    #[error("detector could not classify a bracket point: {0}")]
    Unclassified(String),
    #[error("worker pool construction failed: {0}")]
    Pool(String),
}

impl ScanError {
    /// Suggested process exit code: configuration and bracket problems map
    /// to 2, solver and runtime problems to 3.
    pub fn exit_code(&self) -> i32 {
        match self {
            ScanError::EmptyGrid(_)
            | ScanError::BadGrid(_)
            | ScanError::NoDetectors
            | ScanError::UnknownDetector(_)
            | ScanError::BadBracket(_)
            | ScanError::SameVerdict { .. } => 2,
            ScanError::Unclassified(_) | ScanError::Pool(_) => 3,
        }
    }
}

/// The available detectors. `block_dim` tells which photon-number cutoff a
/// detector consumes; covariance-level detectors return `None`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectorKind {
    /// All three covariance partial transposes violate the uncertainty
    /// bound: full inseparability.
    Ppt,
    /// The covariance matrix admits no biseparable decomposition
    /// (semidefinite feasibility): genuine multipartite entanglement.
    CmBisep,
    /// Closed-form inequality on the single-excitation sector of the
    /// two-level block.
    SingleExcitation,
    /// Best product-vector element inequality over low-occupation pairs of
    /// the two-level block.
    ProductSweep,
    /// Fully decomposable witness on the two-level block.
    WitnessD2,
    /// Fully decomposable witness on the three-level block.
    WitnessD3,
    /// Fully decomposable witness on the four-level block.
    WitnessD4,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 7] = [
        DetectorKind::Ppt,
        DetectorKind::CmBisep,
        DetectorKind::SingleExcitation,
        DetectorKind::ProductSweep,
        DetectorKind::WitnessD2,
        DetectorKind::WitnessD3,
        DetectorKind::WitnessD4,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DetectorKind::Ppt => "ppt",
            DetectorKind::CmBisep => "cm-bisep",
            DetectorKind::SingleExcitation => "single-excitation",
            DetectorKind::ProductSweep => "product-sweep",
            DetectorKind::WitnessD2 => "witness-d2",
            DetectorKind::WitnessD3 => "witness-d3",
            DetectorKind::WitnessD4 => "witness-d4",
        }
    }

    /// Photon-number cutoff of the block this detector consumes.
    pub fn block_dim(self) -> Option<usize> {
        match self {
            DetectorKind::Ppt | DetectorKind::CmBisep => None,
            DetectorKind::SingleExcitation | DetectorKind::ProductSweep => Some(2),
            DetectorKind::WitnessD2 => Some(2),
            DetectorKind::WitnessD3 => Some(3),
            DetectorKind::WitnessD4 => Some(4),
        }
    }

    /// True for detectors whose detection certifies genuine multipartite
    /// entanglement (everything except the partial-transpose test, which
    /// certifies full inseparability only).
    pub fn certifies_gme(self) -> bool {
        self != DetectorKind::Ppt
    }
}

impl std::fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for DetectorKind {
    type Err = ScanError;

    fn from_str(s: &str) -> Result<Self, ScanError> {
        let key = s.to_ascii_lowercase().replace('_', "-");
        DetectorKind::ALL
            .into_iter()
            .find(|k| k.name() == key)
            .ok_or_else(|| ScanError::UnknownDetector(s.to_string()))
    }
}

/// A detector plus an optional override of its detection tolerance. The
/// default tolerances are the per-detector constants (`1e-9` for the
/// partial-transpose eigenvalue floor, `1e-7` for the feasibility margin,
/// `1e-10` for inequality margins, `1e-8` for witness values).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorSpec {
    pub kind: DetectorKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

impl DetectorSpec {
    pub fn new(kind: DetectorKind) -> Self {
        DetectorSpec { kind, tolerance: None }
    }

    /// The stack used by default in one-dimensional scans: every detector
    /// cheap enough to run at every grid point.
    pub fn default_stack() -> Vec<DetectorSpec> {
        [
            DetectorKind::Ppt,
            DetectorKind::CmBisep,
            DetectorKind::SingleExcitation,
            DetectorKind::ProductSweep,
            DetectorKind::WitnessD2,
        ]
        .map(DetectorSpec::new)
        .to_vec()
    }
}

impl From<DetectorKind> for DetectorSpec {
    fn from(kind: DetectorKind) -> Self {
        DetectorSpec::new(kind)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Detected,
    NotDetected,
    /// The backing solver stopped without certifying either side.
    Indeterminate,
    /// The detector could not be evaluated at this point; see `note`.
    Error,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Detected => "detected",
            Verdict::NotDetected => "not-detected",
            Verdict::Indeterminate => "indeterminate",
            Verdict::Error => "error",
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One detector evaluation at one grid point.
///
/// `margin` is signed so that positive means detected for every detector:
/// the negated binding partial-transpose eigenvalue, the negated
/// decomposition margin, the inequality excess, or the negated witness
/// value. `value` is the detector's raw headline number and `diagnostic` a
/// secondary one (deepest partial-transpose eigenvalue, decomposition
/// residual, duality gap). CSV output carries `margin`, `value`, and the
/// block trace; `diagnostic` and `note` appear in JSON only.
#[derive(Debug, Clone, Serialize)]
pub struct DetectorResult {
    pub detector: DetectorKind,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<f64>,
    /// Trace captured by the photon-number block the detector ran on.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace_d: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time_ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl DetectorResult {
    fn bare(detector: DetectorKind, verdict: Verdict) -> Self {
        DetectorResult {
            detector,
            verdict,
            margin: None,
            value: None,
            diagnostic: None,
            trace_d: None,
            time_ms: None,
            note: None,
        }
    }

    fn failed(detector: DetectorKind, note: String) -> Self {
        DetectorResult { note: Some(note), ..DetectorResult::bare(detector, Verdict::Error) }
    }
}

/// All detector results at one grid point, plus any logical-consistency
/// anomalies between them (see [`chain_anomalies`]).
#[derive(Debug, Clone, Serialize)]
pub struct ScanRecord {
    pub family: Family,
    pub r: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub second: Option<f64>,
    pub results: Vec<DetectorResult>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub anomalies: Vec<String>,
}

/// Execution settings shared by all scan entry points.
#[derive(Debug, Clone, Default)]
pub struct ScanOptions {
    /// Settings for the semidefinite solves behind `cm-bisep` and the
    /// witnesses.
    pub solve: SolveOptions,
    /// Worker threads for grid evaluation. `None` consults the
    /// `TRIGAUSS_WORKERS` environment variable, then rayon's default.
    pub workers: Option<usize>,
}

impl ScanOptions {
    fn resolved_workers(&self) -> Option<usize> {
        self.workers.or_else(|| {
            std::env::var(WORKERS_ENV)
                .ok()
                .and_then(|s| s.trim().parse::<usize>().ok())
                .filter(|&n| n > 0)
        })
    }

    /// Maps `eval` over `points`, preserving order, on a pool bounded by the
    /// resolved worker count.
    fn run<T, R, F>(&self, points: &[T], eval: F) -> Result<Vec<R>, ScanError>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync,
    {
        match self.resolved_workers() {
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| ScanError::Pool(e.to_string()))
                .map(|pool| pool.install(|| points.par_iter().map(&eval).collect())),
            None => Ok(points.par_iter().map(&eval).collect()),
        }
    }
}

/// An inclusive grid `start, start + step, ...` ending at the last value
/// that does not overshoot `stop` (with a small slack so `stop` itself is
/// included despite accumulation error). Values are rounded to twelve
/// decimals so grids print cleanly.
pub fn linear_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>, ScanError> {
    if !start.is_finite() || !stop.is_finite() || !(step > 0.0) || stop < start {
        return Err(ScanError::BadBracket(format!(
            "grid start={start}, stop={stop}, step={step}"
        )));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize;
    let mut out = Vec::with_capacity(count + 1);
    for i in 0..=count {
        let v = start + i as f64 * step;
        out.push((v * 1e12).round() / 1e12);
    }
    Ok(out)
}

fn validate_grid(values: &[f64], name: &'static str) -> Result<(), ScanError> {
    if values.is_empty() {
        return Err(ScanError::EmptyGrid(name));
    }
    if values.iter().any(|v| !v.is_finite())
        || values.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(ScanError::BadGrid(name));
    }
    Ok(())
}

fn validate_stack(specs: &[DetectorSpec]) -> Result<(), ScanError> {
    if specs.is_empty() {
        return Err(ScanError::NoDetectors);
    }
    Ok(())
}

/// Photon-number blocks projected on demand and shared by the detectors at
/// one grid point.
struct BlockCache<'a> {
    moments: &'a GaussianMoments,
    slots: [Option<Result<DensityBlock, String>>; 3],
}

impl BlockCache<'_> {
    fn get(&mut self, d: usize) -> Result<&DensityBlock, String> {
        let slot = &mut self.slots[d - 2];
        if slot.is_none() {
            *slot = Some(
                project_to_qudits(self.moments, d, true, ElementMethod::Hermite)
                    .map_err(|e| format!("block projection (d = {d}): {e}")),
            );
        }
        slot.as_ref().expect("slot filled above").as_ref().map_err(Clone::clone)
    }
}

fn verdict_of(detected: bool) -> Verdict {
    if detected {
        Verdict::Detected
    } else {
        Verdict::NotDetected
    }
}

fn run_detector(cache: &mut BlockCache<'_>, spec: &DetectorSpec, solve: &SolveOptions) -> DetectorResult {
    let kind = spec.kind;
    match kind {
        DetectorKind::Ppt => {
            let tol = Tolerances {
                psd: spec.tolerance.unwrap_or(Tolerances::default().psd),
                ..Tolerances::default()
            };
            match is_fully_inseparable(cache.moments, &tol) {
                Ok(full) => {
                    let eigs = full.verdicts.iter().map(|v| v.min_eigenvalue);
                    let binding = eigs.clone().fold(f64::NEG_INFINITY, f64::max);
                    let deepest = eigs.fold(f64::INFINITY, f64::min);
                    DetectorResult {
                        margin: Some(-binding),
                        value: Some(binding),
                        diagnostic: Some(deepest),
                        ..DetectorResult::bare(kind, verdict_of(full.fully_inseparable))
                    }
                }
                Err(e) => DetectorResult::failed(kind, e.to_string()),
            }
        }
        DetectorKind::CmBisep => match cm_bisep_feasibility_with(cache.moments, solve) {
            Ok(cert) => {
                let verdict = match cert.status {
                    BisepStatus::Indeterminate => Verdict::Indeterminate,
                    _ => match spec.tolerance {
                        Some(tol) => verdict_of(cert.margin < -tol),
                        None => verdict_of(cert.status == BisepStatus::Infeasible),
                    },
                };
                DetectorResult {
                    margin: Some(-cert.margin),
                    value: Some(cert.margin),
                    diagnostic: Some(cert.residual_min_eig),
                    ..DetectorResult::bare(kind, verdict)
                }
            }
            Err(e) => DetectorResult::failed(kind, e.to_string()),
        },
        DetectorKind::SingleExcitation => match cache.get(2) {
            Err(note) => DetectorResult::failed(kind, note),
            Ok(rho) => match bisep_inequality_margin(rho) {
                Ok(ineq) => {
                    let detected = match spec.tolerance {
                        Some(tol) => ineq.margin > tol,
                        None => ineq.detected,
                    };
                    DetectorResult {
                        margin: Some(ineq.margin),
                        value: Some(ineq.lhs),
                        trace_d: Some(rho.captured_trace()),
                        ..DetectorResult::bare(kind, verdict_of(detected))
                    }
                }
                Err(e) => DetectorResult::failed(kind, e.to_string()),
            },
        },
        DetectorKind::ProductSweep => match cache.get(2) {
            Err(note) => DetectorResult::failed(kind, note),
            Ok(rho) => match product_vector_sweep(rho) {
                Ok(sweep) => {
                    let detected = match spec.tolerance {
                        Some(tol) => sweep.result.margin > tol,
                        None => sweep.result.detected,
                    };
                    DetectorResult {
                        margin: Some(sweep.result.margin),
                        value: Some(sweep.result.lhs),
                        trace_d: Some(rho.captured_trace()),
                        note: Some(format!("best pair {}~{}", sweep.pair.0, sweep.pair.1)),
                        ..DetectorResult::bare(kind, verdict_of(detected))
                    }
                }
                Err(e) => DetectorResult::failed(kind, e.to_string()),
            },
        },
        DetectorKind::WitnessD2 | DetectorKind::WitnessD3 | DetectorKind::WitnessD4 => {
            let d = kind.block_dim().expect("witness detectors have a block dimension");
            match cache.get(d) {
                Err(note) => DetectorResult::failed(kind, note),
                Ok(rho) => match fully_decomposable_witness_with(rho, solve) {
                    Ok(out) => {
                        let verdict = match out.status {
                            WitnessStatus::Optimal => {
                                let tol = spec.tolerance.unwrap_or(WITNESS_DETECTION_TOL);
                                verdict_of(out.value < -tol)
                            }
                            WitnessStatus::Indeterminate => Verdict::Indeterminate,
                            WitnessStatus::SolverError => Verdict::Error,
                        };
                        let note = (verdict == Verdict::Indeterminate
                            || verdict == Verdict::Error)
                            .then(|| out.message.clone());
                        DetectorResult {
                            margin: Some(-out.value),
                            value: Some(out.value),
                            diagnostic: Some(out.duality_gap),
                            trace_d: Some(rho.captured_trace()),
                            note,
                            ..DetectorResult::bare(kind, verdict)
                        }
                    }
                    Err(e) => DetectorResult::failed(kind, e.to_string()),
                },
            }
        }
    }
}

/// Runs a detector stack at a single parameter point. Failures are recorded
/// per detector — a scan never aborts on a bad point.
pub fn evaluate_point(
    family: Family,
    params: &FamilyParams,
    specs: &[DetectorSpec],
    solve: &SolveOptions,
) -> ScanRecord {
    let mut results = Vec::with_capacity(specs.len());
    match family_moments(family, params) {
        Err(e) => {
            let note = format!("state construction: {e}");
            for spec in specs {
                let mut res = DetectorResult::failed(spec.kind, note.clone());
                res.time_ms = Some(0.0);
                results.push(res);
            }
        }
        Ok(m) => {
            let mut cache = BlockCache { moments: &m, slots: [None, None, None] };
            for spec in specs {
                let started = Instant::now();
                let mut res = run_detector(&mut cache, spec, solve);
                res.time_ms = Some(started.elapsed().as_secs_f64() * 1e3);
                results.push(res);
            }
        }
    }
    let anomalies = chain_anomalies(&results);
    ScanRecord { family, r: params.r, second: params.second(family), results, anomalies }
}

/// Flags logical-consistency violations between the detectors of one record:
/// a genuine-multipartite-entanglement certificate at a point where some
/// covariance partial transpose stayed positive, or a witness that fires at
/// a small cutoff but not at a larger one (the witness programs embed, so
/// detection is monotone in the cutoff).
pub fn chain_anomalies(results: &[DetectorResult]) -> Vec<String> {
    let verdict =
        |kind: DetectorKind| results.iter().find(|r| r.detector == kind).map(|r| r.verdict);
    let mut out = Vec::new();
    if verdict(DetectorKind::Ppt) == Some(Verdict::NotDetected) {
        for kind in DetectorKind::ALL {
            if kind.certifies_gme() && verdict(kind) == Some(Verdict::Detected) {
                out.push(format!(
                    "{kind} certifies genuine multipartite entanglement, but a covariance partial transpose stayed positive"
                ));
            }
        }
    }
    let witnesses =
        [DetectorKind::WitnessD2, DetectorKind::WitnessD3, DetectorKind::WitnessD4];
    for (i, &small) in witnesses.iter().enumerate() {
        for &large in &witnesses[i + 1..] {
            if verdict(small) == Some(Verdict::Detected)
                && verdict(large) == Some(Verdict::NotDetected)
            {
                out.push(format!(
                    "{small} detects but {large} does not; witness detection should be monotone in the cutoff"
                ));
            }
        }
    }
    out
}

/// Scans the squeezing parameter with the remaining family parameters fixed
/// at `base`. Records come back in grid order.
pub fn scan_1d(
    family: Family,
    base: &FamilyParams,
    r_values: &[f64],
    specs: &[DetectorSpec],
    options: &ScanOptions,
) -> Result<Vec<ScanRecord>, ScanError> {
    validate_grid(r_values, "r")?;
    validate_stack(specs)?;
    let points: Vec<FamilyParams> =
        r_values.iter().map(|&r| FamilyParams { r, ..*base }).collect();
    options.run(&points, |p| evaluate_point(family, p, specs, &options.solve))
}

/// Scans squeezing against the family's second parameter. Records are
/// ordered with `r` varying slowest (one row per `r`, one column per second
/// value).
pub fn scan_2d(
    family: Family,
    base: &FamilyParams,
    r_values: &[f64],
    second_values: &[f64],
    specs: &[DetectorSpec],
    options: &ScanOptions,
) -> Result<Vec<ScanRecord>, ScanError> {
    validate_grid(r_values, "r")?;
    validate_grid(second_values, "second")?;
    validate_stack(specs)?;
    let mut points = Vec::with_capacity(r_values.len() * second_values.len());
    for &r in r_values {
        for &s in second_values {
            points.push(FamilyParams { r, ..base.with_second(family, s) });
        }
    }
    options.run(&points, |p| evaluate_point(family, p, specs, &options.solve))
}

/// Which parameter a bisection moves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScanAxis {
    R,
    Second,
}

impl ScanAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            ScanAxis::R => "r",
            ScanAxis::Second => "second",
        }
    }
}

fn params_on_axis(family: Family, base: &FamilyParams, axis: ScanAxis, x: f64) -> FamilyParams {
    match axis {
        ScanAxis::R => FamilyParams { r: x, ..*base },
        ScanAxis::Second => base.with_second(family, x),
    }
}

/// A detection boundary located by bisection: the verdict flips inside
/// `[threshold - achieved_tol/2, threshold + achieved_tol/2]`.
#[derive(Debug, Clone, Serialize)]
pub struct ThresholdResult {
    pub family: Family,
    pub detector: DetectorKind,
    pub axis: ScanAxis,
    /// Value of the non-bisected second parameter, when the family has one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixed: Option<f64>,
    pub bracket_low: f64,
    pub bracket_high: f64,
    pub threshold: f64,
    pub achieved_tol: f64,
    /// Verdict at the low end of the bracket.
    pub detected_at_low: bool,
}

/// Bisects one detector's boundary along `axis` inside `bracket`. The
/// endpoints must classify to opposite verdicts; `Indeterminate` or `Error`
/// at any probed point aborts with [`ScanError::Unclassified`].
pub fn bisect_threshold(
    family: Family,
    spec: &DetectorSpec,
    base: &FamilyParams,
    axis: ScanAxis,
    bracket: (f64, f64),
    tol: f64,
    options: &ScanOptions,
) -> Result<ThresholdResult, ScanError> {
    let (mut lo, mut hi) = bracket;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) || !(tol > 0.0) {
        return Err(ScanError::BadBracket(format!(
            "bracket [{lo}, {hi}] with tolerance {tol}"
        )));
    }
    let classify = |x: f64| -> Result<bool, ScanError> {
        let params = params_on_axis(family, base, axis, x);
        let record = evaluate_point(family, &params, std::slice::from_ref(spec), &options.solve);
        let res = &record.results[0];
        match res.verdict {
            Verdict::Detected => Ok(true),
            Verdict::NotDetected => Ok(false),
            v => Err(ScanError::Unclassified(format!(
                "{} gave `{}` at {} = {x}{}",
                spec.kind,
                v.as_str(),
                axis.as_str(),
                res.note.as_deref().map(|n| format!(" ({n})")).unwrap_or_default()
            ))),
        }
    };
    let detected_at_low = classify(lo)?;
    if classify(hi)? == detected_at_low {
        return Err(ScanError::SameVerdict {
            verdict: verdict_of(detected_at_low).as_str(),
            low: lo,
            high: hi,
        });
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break; // bracket narrower than floating-point resolution
        }
        if classify(mid)? == detected_at_low {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let fixed = match axis {
        ScanAxis::R => base.second(family),
        ScanAxis::Second => Some(base.r),
    };
    Ok(ThresholdResult {
        family,
        detector: spec.kind,
        axis,
        fixed,
        bracket_low: bracket.0,
        bracket_high: bracket.1,
        threshold: 0.5 * (lo + hi),
        achieved_tol: hi - lo,
        detected_at_low,
    })
}

/// One point of a detection boundary traced along the second parameter.
#[derive(Debug, Clone, Serialize)]
pub struct BoundaryPoint {
    pub r: f64,
    /// Second-parameter value where the verdict flips; `None` when the
    /// bracket does not straddle a boundary at this `r` (see `note`).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detected_at_low: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Traces a detection boundary in the second parameter across a grid of
/// squeezing values: one bisection per `r`, in parallel. Points where the
/// bracket does not straddle the boundary (or a solve fails) are recorded
/// with a note instead of aborting the trace.
pub fn boundary_in_second(
    family: Family,
    spec: &DetectorSpec,
    base: &FamilyParams,
    r_values: &[f64],
    second_bracket: (f64, f64),
    tol: f64,
    options: &ScanOptions,
) -> Result<Vec<BoundaryPoint>, ScanError> {
    validate_grid(r_values, "r")?;
    let (lo, hi) = second_bracket;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) || !(tol > 0.0) {
        return Err(ScanError::BadBracket(format!(
            "bracket [{lo}, {hi}] with tolerance {tol}"
        )));
    }
    options.run(r_values, |&r| {
        let point_base = FamilyParams { r, ..*base };
        match bisect_threshold(
            family,
            spec,
            &point_base,
            ScanAxis::Second,
            second_bracket,
            tol,
            &ScanOptions { solve: options.solve.clone(), workers: Some(1) },
        ) {
            Ok(t) => BoundaryPoint {
                r,
                threshold: Some(t.threshold),
                detected_at_low: Some(t.detected_at_low),
                note: None,
            },
            Err(e) => {
                BoundaryPoint { r, threshold: None, detected_at_low: None, note: Some(e.to_string()) }
            }
        }
    })
}

/// Name of the family's second parameter, for axis labels and headers.
pub fn second_param_name(family: Family) -> Option<&'static str> {
    match family {
        Family::Vac | Family::Smsv => None,
        Family::Thermal => Some("nbar"),
        Family::Coherent => Some("alpha"),
        Family::NoisyGhz => Some("eta"),
    }
}

// ---------------------------------------------------------------------------
// Report emission
// ---------------------------------------------------------------------------

/// Output switches shared by the CSV/JSON emitters.
#[derive(Debug, Clone, Copy, Default)]
pub struct EmitOptions {
    /// Include per-detector wall-clock times. Off by default so repeated
    /// runs produce identical bytes.
    pub timings: bool,
}

fn push_opt(out: &mut String, v: Option<f64>) {
    if let Some(v) = v {
        let _ = write!(out, "{v}");
    }
}

/// Renders records as CSV, one line per (point, detector) pair, with the
/// fixed header [`SCAN_CSV_HEADER`]. Absent fields are empty cells; floats
/// use the shortest round-trip decimal form, so output is deterministic.
pub fn records_to_csv(records: &[ScanRecord], opts: &EmitOptions) -> String {
    let mut out = String::from(SCAN_CSV_HEADER);
    out.push('\n');
    for rec in records {
        for res in &rec.results {
            let _ = write!(out, "{},{},", rec.family.as_str(), rec.r);
            push_opt(&mut out, rec.second);
            let _ = write!(out, ",{},{},", res.detector, res.verdict);
            push_opt(&mut out, res.margin);
            out.push(',');
            push_opt(&mut out, res.value);
            out.push(',');
            push_opt(&mut out, res.trace_d);
            out.push(',');
            if opts.timings {
                push_opt(&mut out, res.time_ms);
            }
            out.push('\n');
        }
    }
    out
}

/// Renders records as pretty-printed JSON (timings stripped unless
/// requested).
pub fn records_to_json(records: &[ScanRecord], opts: &EmitOptions) -> String {
    let render = |recs: &[ScanRecord]| {
        serde_json::to_string_pretty(recs).expect("scan records serialize")
    };
    if opts.timings {
        render(records)
    } else {
        let stripped: Vec<ScanRecord> = records
            .iter()
            .cloned()
            .map(|mut rec| {
                for res in &mut rec.results {
                    res.time_ms = None;
                }
                rec
            })
            .collect();
        render(&stripped)
    }
}

fn csv_quote(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// Renders bisection results as CSV.
pub fn thresholds_to_csv(rows: &[ThresholdResult]) -> String {
    let mut out = String::from(
        "family,detector,axis,fixed,bracket_low,bracket_high,threshold,achieved_tol,detected_at_low\n",
    );
    for row in rows {
        let _ = write!(
            out,
            "{},{},{},",
            row.family.as_str(),
            row.detector,
            row.axis.as_str()
        );
        push_opt(&mut out, row.fixed);
        let _ = writeln!(
            out,
            ",{},{},{},{},{}",
            row.bracket_low, row.bracket_high, row.threshold, row.achieved_tol, row.detected_at_low
        );
    }
    out
}

pub fn thresholds_to_json(rows: &[ThresholdResult]) -> String {
    serde_json::to_string_pretty(rows).expect("threshold results serialize")
}

/// Renders a boundary trace as CSV. The threshold column is named after the
/// family's second parameter.
pub fn boundary_to_csv(family: Family, rows: &[BoundaryPoint]) -> String {
    let second = second_param_name(family).unwrap_or("second");
    let mut out = format!("family,r,{second}_threshold,detected_at_low,note\n");
    for row in rows {
        let _ = write!(out, "{},{},", family.as_str(), row.r);
        push_opt(&mut out, row.threshold);
        out.push(',');
        if let Some(d) = row.detected_at_low {
            let _ = write!(out, "{d}");
        }
        let _ = writeln!(out, ",{}", csv_quote(row.note.as_deref().unwrap_or("")));
    }
    out
}

pub fn boundary_to_json(rows: &[BoundaryPoint]) -> String {
    serde_json::to_string_pretty(rows).expect("boundary points serialize")
}

// ---------------------------------------------------------------------------
// Region classification and SVG plots
// ---------------------------------------------------------------------------

/// Entanglement classification of one grid point, ordered from strongest to
/// weakest detection. Classification uses whichever detectors ran; absent or
/// failed detectors simply cannot fire, so unresolved points fall through to
/// the weakest region consistent with what did run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Region {
    /// Genuine multipartite entanglement certified on a photon-number block.
    I,
    /// Genuine multipartite entanglement certified at the covariance level.
    II,
    /// Inseparable across every cut, but no certificate of genuine
    /// multipartite entanglement.
    III,
    /// Inseparable across some cut only.
    IV,
    /// No inseparability detected.
    V,
}

impl Region {
    pub const ALL: [Region; 5] = [Region::I, Region::II, Region::III, Region::IV, Region::V];

    pub fn label(self) -> &'static str {
        match self {
            Region::I => "I",
            Region::II => "II",
            Region::III => "III",
            Region::IV => "IV",
            Region::V => "V",
        }
    }

    pub fn legend(self) -> &'static str {
        match self {
            Region::I => "GME certified on a photon-number block",
            Region::II => "GME certified at the covariance level",
            Region::III => "inseparable across every cut, GME not certified",
            Region::IV => "inseparable across some cut only",
            Region::V => "no inseparability detected",
        }
    }

    fn color(self) -> &'static str {
        match self {
            Region::I => "#4527a0",
            Region::II => "#7e57c2",
            Region::III => "#26a69a",
            Region::IV => "#ffca28",
            Region::V => "#eeeeee",
        }
    }
}

/// Classifies one record into a [`Region`]. Block-level detectors dominate,
/// then the covariance-level test, then the partial-transpose verdicts (the
/// `ppt` result's deepest eigenvalue distinguishes "some cut" from "no
/// cut").
pub fn classify_region(record: &ScanRecord) -> Region {
    let result =
        |kind: DetectorKind| record.results.iter().find(|r| r.detector == kind);
    let fired = |kind: DetectorKind| {
        result(kind).map(|r| r.verdict) == Some(Verdict::Detected)
    };
    let block_gme = DetectorKind::ALL
        .into_iter()
        .any(|k| k.certifies_gme() && k != DetectorKind::CmBisep && fired(k));
    if block_gme {
        return Region::I;
    }
    if fired(DetectorKind::CmBisep) {
        return Region::II;
    }
    if let Some(ppt) = result(DetectorKind::Ppt) {
        if ppt.verdict == Verdict::Detected {
            return Region::III;
        }
        if ppt.diagnostic.is_some_and(|deepest| deepest < -Tolerances::default().psd) {
            return Region::IV;
        }
    }
    Region::V
}

fn svg_open(width: f64, height: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" \
         viewBox=\"0 0 {width:.0} {height:.0}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    )
}

fn svg_rect(out: &mut String, x: f64, y: f64, w: f64, h: f64, fill: &str) {
    let _ = writeln!(
        out,
        "  <rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{w:.2}\" height=\"{h:.2}\" fill=\"{fill}\"/>"
    );
}

fn svg_text(out: &mut String, x: f64, y: f64, anchor: &str, text: &str) {
    let _ = writeln!(
        out,
        "  <text x=\"{x:.2}\" y=\"{y:.2}\" text-anchor=\"{anchor}\">{text}</text>"
    );
}

/// Cell edges for a strictly increasing axis: midpoints between neighbors,
/// extended half a step beyond the boundary samples.
fn axis_edges(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    if n == 1 {
        return vec![values[0] - 0.5, values[0] + 0.5];
    }
    let mut edges = Vec::with_capacity(n + 1);
    edges.push(values[0] - 0.5 * (values[1] - values[0]));
    for w in values.windows(2) {
        edges.push(0.5 * (w[0] + w[1]));
    }
    edges.push(values[n - 1] + 0.5 * (values[n - 1] - values[n - 2]));
    edges
}

fn verdict_fill(verdict: Verdict) -> Option<&'static str> {
    match verdict {
        Verdict::Detected => Some("#2166ac"),
        Verdict::Indeterminate => Some("#bbbbbb"),
        Verdict::Error => Some("#d6604d"),
        Verdict::NotDetected => None,
    }
}

/// Renders a one-dimensional scan as a strip chart: one row per detector,
/// colored where the detector fires (grey for indeterminate, red for
/// errors).
pub fn records_to_svg_strip(records: &[ScanRecord], title: &str) -> String {
    const LEFT: f64 = 170.0;
    const RIGHT: f64 = 24.0;
    const TOP: f64 = 40.0;
    const ROW_H: f64 = 22.0;
    const ROW_GAP: f64 = 8.0;
    const PLOT_W: f64 = 520.0;
    const AXIS_H: f64 = 40.0;

    let detectors: Vec<DetectorKind> = records
        .first()
        .map(|rec| rec.results.iter().map(|r| r.detector).collect())
        .unwrap_or_default();
    let rs: Vec<f64> = records.iter().map(|rec| rec.r).collect();
    let (r0, r1) = (
        rs.iter().copied().fold(f64::INFINITY, f64::min),
        rs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    );
    let span = if r1 > r0 { r1 - r0 } else { 1.0 };
    let x_of = |r: f64| LEFT + (r - r0) / span * PLOT_W;
    let edges = if rs.is_empty() { Vec::new() } else { axis_edges(&rs) };

    let height = TOP + detectors.len() as f64 * (ROW_H + ROW_GAP) + AXIS_H;
    let mut out = svg_open(LEFT + PLOT_W + RIGHT, height);
    svg_text(&mut out, LEFT, 20.0, "start", title);
    for (row, &detector) in detectors.iter().enumerate() {
        let y = TOP + row as f64 * (ROW_H + ROW_GAP);
        svg_text(&mut out, LEFT - 8.0, y + ROW_H - 7.0, "end", detector.name());
        svg_rect(&mut out, LEFT, y, PLOT_W, ROW_H, "#f4f4f4");
        // Merge consecutive samples with the same verdict into single cells.
        let mut i = 0;
        while i < records.len() {
            let verdict = records[i].results[row].verdict;
            let mut j = i + 1;
            while j < records.len() && records[j].results[row].verdict == verdict {
                j += 1;
            }
            if let Some(fill) = verdict_fill(verdict) {
                let (xl, xr) = (
                    x_of(edges[i].max(r0)),
                    x_of(edges[j].min(r1)),
                );
                svg_rect(&mut out, xl, y, xr - xl, ROW_H, fill);
            }
            i = j;
        }
    }
    let axis_y = TOP + detectors.len() as f64 * (ROW_H + ROW_GAP) + 14.0;
    if !rs.is_empty() {
        for r in [r0, 0.5 * (r0 + r1), r1] {
            svg_text(&mut out, x_of(r), axis_y, "middle", &format!("{r:.3}"));
        }
    }
    svg_text(&mut out, LEFT + 0.5 * PLOT_W, axis_y + 18.0, "middle", "r");
    out.push_str("</svg>\n");
    out
}

/// Renders a two-dimensional scan as a region map over (r, second
/// parameter), with the standard five-region legend.
pub fn records_to_svg_regions(records: &[ScanRecord], title: &str) -> String {
    const LEFT: f64 = 70.0;
    const RIGHT: f64 = 24.0;
    const TOP: f64 = 40.0;
    const PLOT_W: f64 = 520.0;
    const PLOT_H: f64 = 360.0;
    const AXIS_H: f64 = 46.0;
    const LEGEND_ROW: f64 = 18.0;

    let mut rs: Vec<f64> = records.iter().map(|rec| rec.r).collect();
    rs.sort_by(f64::total_cmp);
    rs.dedup();
    let mut seconds: Vec<f64> = records.iter().filter_map(|rec| rec.second).collect();
    seconds.sort_by(f64::total_cmp);
    seconds.dedup();

    let height = TOP + PLOT_H + AXIS_H + Region::ALL.len() as f64 * LEGEND_ROW + 10.0;
    let mut out = svg_open(LEFT + PLOT_W + RIGHT, height);
    svg_text(&mut out, LEFT, 20.0, "start", title);

    if !rs.is_empty() && !seconds.is_empty() {
        let r_edges = axis_edges(&rs);
        let s_edges = axis_edges(&seconds);
        let (re0, re1) = (r_edges[0], r_edges[rs.len()]);
        let (se0, se1) = (s_edges[0], s_edges[seconds.len()]);
        let x_of = |r: f64| LEFT + (r - re0) / (re1 - re0) * PLOT_W;
        let y_of = |s: f64| TOP + (se1 - s) / (se1 - se0) * PLOT_H;
        for rec in records {
            let Some(second) = rec.second else { continue };
            let ri = rs.partition_point(|&v| v < rec.r);
            let si = seconds.partition_point(|&v| v < second);
            let region = classify_region(rec);
            let (xl, xr) = (x_of(r_edges[ri]), x_of(r_edges[ri + 1]));
            let (yt, yb) = (y_of(s_edges[si + 1]), y_of(s_edges[si]));
            svg_rect(&mut out, xl, yt, xr - xl, yb - yt, region.color());
        }
        let axis_y = TOP + PLOT_H + 16.0;
        for r in [rs[0], rs[rs.len() - 1]] {
            svg_text(&mut out, x_of(r), axis_y, "middle", &format!("{r:.3}"));
        }
        svg_text(&mut out, LEFT + 0.5 * PLOT_W, axis_y + 18.0, "middle", "r");
        for s in [seconds[0], seconds[seconds.len() - 1]] {
            svg_text(&mut out, LEFT - 8.0, y_of(s) + 4.0, "end", &format!("{s:.3}"));
        }
        let second_label = records
            .first()
            .and_then(|rec| second_param_name(rec.family))
            .unwrap_or("second");
        svg_text(&mut out, 18.0, TOP + 0.5 * PLOT_H, "middle", second_label);
    }

    let legend_top = TOP + PLOT_H + AXIS_H;
    for (i, region) in Region::ALL.into_iter().enumerate() {
        let y = legend_top + i as f64 * LEGEND_ROW;
        svg_rect(&mut out, LEFT, y, 14.0, 12.0, region.color());
        svg_text(
            &mut out,
            LEFT + 22.0,
            y + 11.0,
            "start",
            &format!("{} — {}", region.label(), region.legend()),
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::separability::coherent_npt_alpha_max;

    fn spec(kind: DetectorKind) -> DetectorSpec {
        DetectorSpec::new(kind)
    }

    fn quiet() -> ScanOptions {
        ScanOptions::default()
    }

    #[test]
    fn detector_names_round_trip() {
        for kind in DetectorKind::ALL {
            assert_eq!(kind.name().parse::<DetectorKind>().unwrap(), kind);
            let json = serde_json::to_string(&kind).unwrap();
            assert_eq!(json, format!("\"{}\"", kind.name()));
        }
        assert_eq!("Witness_D3".parse::<DetectorKind>().unwrap(), DetectorKind::WitnessD3);
        assert!(matches!(
            "bogus".parse::<DetectorKind>(),
            Err(ScanError::UnknownDetector(_))
        ));
        assert_eq!(DetectorKind::Ppt.block_dim(), None);
        assert_eq!(DetectorKind::SingleExcitation.block_dim(), Some(2));
        assert_eq!(DetectorKind::WitnessD4.block_dim(), Some(4));
    }

    #[test]
    fn linear_grid_hits_both_endpoints() {
        let grid = linear_grid(0.05, 2.0, 0.05).unwrap();
        assert_eq!(grid.len(), 40);
        assert_eq!(grid[0], 0.05);
        assert_eq!(grid[2], 0.15); // accumulated step rounds back to the printable value
        assert_eq!(*grid.last().unwrap(), 2.0);
        assert!(grid.windows(2).all(|w| w[1] > w[0]));

        assert_eq!(linear_grid(0.3, 0.3, 0.1).unwrap(), vec![0.3]);
        assert!(linear_grid(0.5, 0.1, 0.1).is_err());
        assert!(linear_grid(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn scan_validation_rejects_bad_input() {
        let base = FamilyParams::r(0.0);
        let stack = [spec(DetectorKind::Ppt)];
        let err = scan_1d(Family::Vac, &base, &[], &stack, &quiet()).unwrap_err();
        assert!(matches!(err, ScanError::EmptyGrid("r")));
        assert_eq!(err.exit_code(), 2);
        assert!(matches!(
            scan_1d(Family::Vac, &base, &[0.2, 0.2], &stack, &quiet()),
            Err(ScanError::BadGrid("r"))
        ));
        assert!(matches!(
            scan_1d(Family::Vac, &base, &[0.2, 0.3], &[], &quiet()),
            Err(ScanError::NoDetectors)
        ));
        assert!(matches!(
            scan_2d(Family::NoisyGhz, &base, &[0.2], &[0.5, 0.4], &stack, &quiet()),
            Err(ScanError::BadGrid("second"))
        ));
    }

    #[test]
    fn family_construction_failures_are_recorded_per_point() {
        // NoisyGhz without eta cannot be built; every detector reports the
        // same construction error instead of the scan aborting.
        let records = scan_1d(
            Family::NoisyGhz,
            &FamilyParams::r(0.0),
            &[0.1, 0.2],
            &[spec(DetectorKind::Ppt), spec(DetectorKind::SingleExcitation)],
            &quiet(),
        )
        .unwrap();
        assert_eq!(records.len(), 2);
        for rec in &records {
            assert_eq!(rec.results.len(), 2);
            for res in &rec.results {
                assert_eq!(res.verdict, Verdict::Error);
                assert!(res.note.as_deref().unwrap().contains("state construction"));
            }
        }
    }

    #[test]
    fn vacuum_family_separates_between_coarse_grid_points() {
        // The full-inseparability threshold of the vacuum mixture family
        // lies strictly between 1.20 and 1.25.
        let grid = linear_grid(1.0, 1.5, 0.05).unwrap();
        let records = scan_1d(
            Family::Vac,
            &FamilyParams::r(0.0),
            &grid,
            &[spec(DetectorKind::Ppt)],
            &quiet(),
        )
        .unwrap();
        let verdict_at = |r: f64| {
            records
                .iter()
                .find(|rec| rec.r == r)
                .map(|rec| rec.results[0].verdict)
                .unwrap()
        };
        assert_eq!(verdict_at(1.2), Verdict::Detected);
        assert_eq!(verdict_at(1.25), Verdict::NotDetected);
        // Margins are positive exactly where detection holds, and the
        // records arrive in grid order.
        for (rec, &r) in records.iter().zip(&grid) {
            assert_eq!(rec.r, r);
            let res = &rec.results[0];
            assert_eq!(res.margin.unwrap() > Tolerances::default().psd, res.verdict == Verdict::Detected);
            assert!(res.diagnostic.unwrap() <= res.value.unwrap());
        }
    }

    #[test]
    fn thermal_at_zero_occupation_matches_the_vacuum_family() {
        let rs = [0.3, 0.9, 1.3];
        let stack = [spec(DetectorKind::Ppt), spec(DetectorKind::SingleExcitation)];
        let vac =
            scan_1d(Family::Vac, &FamilyParams::r(0.0), &rs, &stack, &quiet()).unwrap();
        let thermal = scan_2d(
            Family::Thermal,
            &FamilyParams::r(0.0),
            &rs,
            &[0.0],
            &stack,
            &quiet(),
        )
        .unwrap();
        assert_eq!(thermal.len(), vac.len());
        for (t, v) in thermal.iter().zip(&vac) {
            assert_eq!(t.second, Some(0.0));
            for (tr, vr) in t.results.iter().zip(&v.results) {
                assert_eq!(tr.verdict, vr.verdict);
                // Identical covariance matrices: bitwise-equal margins.
                assert_eq!(tr.margin, vr.margin);
            }
        }
    }

    #[test]
    fn worker_count_does_not_change_emitted_bytes() {
        let grid = linear_grid(0.1, 0.6, 0.1).unwrap();
        let stack = [spec(DetectorKind::Ppt), spec(DetectorKind::ProductSweep)];
        let run = |workers| {
            let options = ScanOptions { workers, ..ScanOptions::default() };
            let records =
                scan_1d(Family::Vac, &FamilyParams::r(0.0), &grid, &stack, &options).unwrap();
            (
                records_to_csv(&records, &EmitOptions::default()),
                records_to_json(&records, &EmitOptions::default()),
            )
        };
        let (csv1, json1) = run(Some(1));
        let (csv3, json3) = run(Some(3));
        assert_eq!(csv1, csv3);
        assert_eq!(json1, json3);
        assert!(!json1.contains("time_ms"));
    }

    #[test]
    fn csv_layout_is_fixed() {
        let records = scan_1d(
            Family::Smsv,
            &FamilyParams::r(0.0),
            &[0.4],
            &[spec(DetectorKind::Ppt), spec(DetectorKind::SingleExcitation)],
            &quiet(),
        )
        .unwrap();
        let csv = records_to_csv(&records, &EmitOptions::default());
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], SCAN_CSV_HEADER);
        assert_eq!(lines.len(), 3);
        for line in &lines[1..] {
            assert_eq!(line.split(',').count(), 9);
            assert!(line.ends_with(',')); // timings suppressed by default
        }
        // A family without a second parameter leaves that cell empty.
        assert!(lines[1].starts_with("smsv,0.4,,ppt,"));
        // The covariance detector has no block trace.
        assert_eq!(lines[1].split(',').nth(7), Some(""));
        assert!(lines[2].starts_with("smsv,0.4,,single-excitation,"));

        let timed = records_to_csv(&records, &EmitOptions { timings: true });
        let timed_row = timed.lines().nth(1).unwrap();
        assert!(!timed_row.ends_with(','));

        assert_eq!(records_to_csv(&[], &EmitOptions::default()), format!("{SCAN_CSV_HEADER}\n"));
    }

    #[test]
    fn single_excitation_threshold_matches_between_brackets() {
        // The single-excitation inequality fires at weak squeezing and
        // stops at its flip point; two different brackets must agree on it.
        let spec = spec(DetectorKind::SingleExcitation);
        let base = FamilyParams::r(0.0);
        let mut thresholds = Vec::new();
        for bracket in [(0.2, 0.4), (0.25, 0.35)] {
            let t = bisect_threshold(
                Family::Vac,
                &spec,
                &base,
                ScanAxis::R,
                bracket,
                1e-4,
                &quiet(),
            )
            .unwrap();
            assert!(t.detected_at_low);
            assert!(t.achieved_tol <= 1e-4);
            assert!(
                (t.threshold - 0.284839).abs() < 1e-4,
                "threshold {} too far from 0.284839",
                t.threshold
            );
            thresholds.push(t);
        }
        let csv = thresholds_to_csv(&thresholds);
        assert!(csv.starts_with("family,detector,axis,fixed,"));
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.lines().nth(1).unwrap().starts_with("vac,single-excitation,r,,0.2,0.4,"));
    }

    #[test]
    fn bisection_rejects_brackets_without_a_flip() {
        // The vacuum family is fully inseparable at both 0.2 and 0.4.
        let err = bisect_threshold(
            Family::Vac,
            &spec(DetectorKind::Ppt),
            &FamilyParams::r(0.0),
            ScanAxis::R,
            (0.2, 0.4),
            1e-3,
            &quiet(),
        )
        .unwrap_err();
        assert!(matches!(
            err,
            ScanError::SameVerdict { verdict: "detected", .. }
        ));
        assert_eq!(err.exit_code(), 2);

        let bad = bisect_threshold(
            Family::Vac,
            &spec(DetectorKind::Ppt),
            &FamilyParams::r(0.0),
            ScanAxis::R,
            (0.4, 0.2),
            1e-3,
            &quiet(),
        )
        .unwrap_err();
        assert!(matches!(bad, ScanError::BadBracket(_)));
    }

    #[test]
    fn coherent_boundary_trace_matches_the_closed_form() {
        let points = boundary_in_second(
            Family::Coherent,
            &spec(DetectorKind::Ppt),
            &FamilyParams::r(0.0),
            &[0.2, 0.5],
            (0.0, 2.0),
            1e-4,
            &quiet(),
        )
        .unwrap();
        assert_eq!(points.len(), 2);
        for point in &points {
            assert_eq!(point.detected_at_low, Some(true));
            let expected = coherent_npt_alpha_max(point.r).unwrap();
            let got = point.threshold.unwrap();
            assert!(
                (got - expected).abs() < 1e-3,
                "r = {}: boundary {} vs closed form {}",
                point.r,
                got,
                expected
            );
        }
        let csv = boundary_to_csv(Family::Coherent, &points);
        assert!(csv.starts_with("family,r,alpha_threshold,detected_at_low,note\n"));
        assert_eq!(csv.lines().count(), 3);
    }

    fn synthetic_record(results: Vec<DetectorResult>) -> ScanRecord {
        let anomalies = chain_anomalies(&results);
        ScanRecord { family: Family::Vac, r: 0.5, second: None, results, anomalies }
    }

    fn synthetic_result(kind: DetectorKind, verdict: Verdict) -> DetectorResult {
        DetectorResult::bare(kind, verdict)
    }

    #[test]
    fn implication_chain_violations_are_flagged() {
        let rec = synthetic_record(vec![
            synthetic_result(DetectorKind::Ppt, Verdict::NotDetected),
            synthetic_result(DetectorKind::WitnessD2, Verdict::Detected),
        ]);
        assert_eq!(rec.anomalies.len(), 1);
        assert!(rec.anomalies[0].contains("witness-d2"));

        let rec = synthetic_record(vec![
            synthetic_result(DetectorKind::WitnessD2, Verdict::Detected),
            synthetic_result(DetectorKind::WitnessD3, Verdict::NotDetected),
        ]);
        assert_eq!(rec.anomalies.len(), 1);
        assert!(rec.anomalies[0].contains("monotone"));

        let rec = synthetic_record(vec![
            synthetic_result(DetectorKind::Ppt, Verdict::Detected),
            synthetic_result(DetectorKind::WitnessD2, Verdict::Detected),
            synthetic_result(DetectorKind::WitnessD3, Verdict::Detected),
        ]);
        assert!(rec.anomalies.is_empty());

        let json = records_to_json(
            &[synthetic_record(vec![
                synthetic_result(DetectorKind::Ppt, Verdict::NotDetected),
                synthetic_result(DetectorKind::WitnessD2, Verdict::Detected),
            ])],
            &EmitOptions::default(),
        );
        assert!(json.contains("anomalies"));
    }

    #[test]
    fn region_classification_orders_detectors_by_strength() {
        let ppt_with = |verdict, deepest: f64| DetectorResult {
            diagnostic: Some(deepest),
            ..synthetic_result(DetectorKind::Ppt, verdict)
        };
        let rec = synthetic_record(vec![
            ppt_with(Verdict::Detected, -0.3),
            synthetic_result(DetectorKind::CmBisep, Verdict::Detected),
            synthetic_result(DetectorKind::WitnessD2, Verdict::Detected),
        ]);
        assert_eq!(classify_region(&rec), Region::I);

        let rec = synthetic_record(vec![
            ppt_with(Verdict::Detected, -0.3),
            synthetic_result(DetectorKind::CmBisep, Verdict::Detected),
            synthetic_result(DetectorKind::WitnessD2, Verdict::NotDetected),
        ]);
        assert_eq!(classify_region(&rec), Region::II);

        let rec = synthetic_record(vec![
            ppt_with(Verdict::Detected, -0.3),
            synthetic_result(DetectorKind::CmBisep, Verdict::NotDetected),
        ]);
        assert_eq!(classify_region(&rec), Region::III);

        let rec = synthetic_record(vec![ppt_with(Verdict::NotDetected, -0.3)]);
        assert_eq!(classify_region(&rec), Region::IV);

        let rec = synthetic_record(vec![ppt_with(Verdict::NotDetected, 0.1)]);
        assert_eq!(classify_region(&rec), Region::V);
    }

    #[test]
    fn svg_emitters_are_deterministic_and_labelled() {
        let grid = linear_grid(0.2, 1.4, 0.3).unwrap();
        let stack = [spec(DetectorKind::Ppt), spec(DetectorKind::SingleExcitation)];
        let records =
            scan_1d(Family::Vac, &FamilyParams::r(0.0), &grid, &stack, &quiet()).unwrap();
        let strip = records_to_svg_strip(&records, "vacuum family");
        assert!(strip.starts_with("<svg"));
        assert!(strip.ends_with("</svg>\n"));
        assert!(strip.contains("ppt"));
        assert!(strip.contains("single-excitation"));
        assert_eq!(strip, records_to_svg_strip(&records, "vacuum family"));

        let records2 = scan_2d(
            Family::NoisyGhz,
            &FamilyParams::r(0.0),
            &[0.4, 0.8],
            &[0.2, 0.6, 1.0],
            &[spec(DetectorKind::Ppt)],
            &quiet(),
        )
        .unwrap();
        assert_eq!(records2.len(), 6);
        let map = records_to_svg_regions(&records2, "noisy GHZ mixture");
        for region in Region::ALL {
            assert!(map.contains(&format!("{} — {}", region.label(), region.legend())));
        }
        assert!(map.contains(">eta<"));
        assert_eq!(map, records_to_svg_regions(&records2, "noisy GHZ mixture"));
    }
}
