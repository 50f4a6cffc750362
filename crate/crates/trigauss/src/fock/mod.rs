//! Finite photon-number projections of Gaussian states.
//!
//! A Gaussian state's density operator has matrix elements in the photon
//! number basis that are exactly computable from the covariance matrix and
//! mean. This module provides two fully independent pipelines for them:
//!
//! - [`ladder`]: exact differentiation of the coherent-state expectation
//!   kernel (slow but transparent),
//! - [`hermite`]: a memoized multidimensional Hermite-polynomial recursion
//!   (fast; the coefficient convention is pinned by cross-validation against
//!   the derivative pipeline, see the submodule docs).
//!
//! [`project_to_qudits`] assembles the elements with per-mode occupations
//! `0..d-1` into a [`DensityBlock`] — the truncation of the state to three
//! qudits. Because the truncation is a local projection, entanglement found
//! in the block certifies entanglement of the original Gaussian state. The
//! block keeps the captured trace, is hermitized by averaging (never
//! PSD-repaired), and serializes to JSON or a flat binary layout for offline
//! inspection.

use crate::conic::min_hermitian_eigenvalue;
use crate::moments::GaussianMoments;
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

pub mod hermite;
pub mod ladder;

pub use hermite::{element_by_hermite, hermite_params, multidim_hermite, HermiteParams};
pub use ladder::{element_by_derivatives, husimi_params, to_ladder, HusimiParams, LadderMoments};

/// Largest per-mode occupation either element pipeline accepts.
pub const HARD_MAX_OCCUPATION: usize = 4;
/// Default per-mode occupation cap used by scan configuration.
pub const DEFAULT_MAX_OCCUPATION: usize = 3;

/// Errors of the photon-number projection layer.
#[derive(Debug, thiserror::Error)]
pub enum FockError {
    #[error("ladder conversion expects block quadrature ordering")]
    WrongOrdering,
    #[error("degenerate moments: {0}")]
    Degenerate(String),
    #[error("occupation index has {got} entries, expected {expected}")]
    IndexLength { expected: usize, got: usize },
    #[error("occupation {order} exceeds the supported maximum {max}")]
    OrderBound { order: usize, max: usize },
    #[error("projection requires three modes, got {0}")]
    NotThreeMode(usize),
    #[error("per-mode dimension {0} is outside the supported range")]
    BadDim(usize),
    #[error("raw elements deviate from Hermitian symmetry by {0:.3e}")]
    Hermiticity(f64),
    #[error("element pipelines disagree by {0:.3e}")]
    CrossMethodMismatch(f64),
    #[error("captured trace {0:.6e} is outside (0, 1]")]
    TraceRange(f64),
    #[error("unreadable block data: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// `sqrt(prod_j bra_j! * prod_j ket_j!)`, the normalization every element
/// carries.
pub(crate) fn factorial_product(bra: &[usize], ket: &[usize]) -> f64 {
    fn factorial(k: usize) -> f64 {
        (1..=k).map(|v| v as f64).product()
    }
    let product: f64 = bra.iter().chain(ket.iter()).map(|&k| factorial(k)).product();
    product.sqrt()
}

/// Per-mode occupations of a three-mode basis vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FockIndex(pub [usize; 3]);

impl FockIndex {
    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    /// Row-major linear position within a `d^3` block (first mode most
    /// significant); `None` if any occupation reaches `d`.
    pub fn linear(&self, d: usize) -> Option<usize> {
        self.0
            .iter()
            .try_fold(0usize, |acc, &k| (k < d).then(|| acc * d + k))
    }

    pub fn from_linear(linear: usize, d: usize) -> Option<FockIndex> {
        if linear >= d.pow(3) {
            return None;
        }
        let mut idx = [0usize; 3];
        ladder::linear_to_index(linear, d, &mut idx);
        Some(FockIndex(idx))
    }
}

impl std::fmt::Display for FockIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}{}{}", self.0[0], self.0[1], self.0[2])
    }
}

/// Which element pipeline a projection runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ElementMethod {
    /// Hermite recursion only (fast path).
    #[default]
    Hermite,
    /// Exact differentiation only.
    Derivative,
    /// Both pipelines; errors if they disagree beyond `1e-8`.
    CrossValidate,
}

impl ElementMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            ElementMethod::Hermite => "hermite",
            ElementMethod::Derivative => "derivative",
            ElementMethod::CrossValidate => "cross-validate",
        }
    }
}

impl std::str::FromStr for ElementMethod {
    type Err = FockError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "hermite" => Ok(ElementMethod::Hermite),
            "derivative" => Ok(ElementMethod::Derivative),
            "cross-validate" | "cross" | "both" => Ok(ElementMethod::CrossValidate),
            other => Err(FockError::Format(format!("unknown element method `{other}`"))),
        }
    }
}

/// Truncation of a state to `n_modes` qudits of dimension `d` each.
///
/// The matrix is exactly Hermitian (raw elements are averaged with their
/// conjugate transposes), indexed row-major with the first mode most
/// significant on both axes. `captured_trace` is the trace before any
/// normalization; negative eigenvalues are never repaired, only reported.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDensityBlock", into = "RawDensityBlock")]
pub struct DensityBlock {
    dim_per_mode: usize,
    n_modes: usize,
    matrix: DMatrix<Complex64>,
    captured_trace: f64,
    normalized: bool,
    min_eigenvalue: f64,
    hermiticity_dev: f64,
}

impl DensityBlock {
    /// Wraps a hand-built block (any positive trace). The per-mode dimension
    /// must divide the shape as `d^n`; raw Hermiticity deviation beyond
    /// `1e-9` is rejected, smaller deviations are averaged away.
    pub fn from_matrix(matrix: DMatrix<Complex64>, dim_per_mode: usize) -> Result<Self, FockError> {
        let n_modes = infer_mode_count(matrix.nrows(), dim_per_mode)?;
        Self::assemble(matrix, dim_per_mode, n_modes, None, false)
    }

    fn assemble(
        matrix: DMatrix<Complex64>,
        dim_per_mode: usize,
        n_modes: usize,
        captured_trace: Option<f64>,
        normalize: bool,
    ) -> Result<Self, FockError> {
        let size = matrix.nrows();
        if matrix.ncols() != size || size != dim_per_mode.pow(n_modes as u32) {
            return Err(FockError::BadDim(dim_per_mode));
        }
        let mut dev = 0.0f64;
        for i in 0..size {
            for j in 0..=i {
                dev = dev.max((matrix[(i, j)] - matrix[(j, i)].conj()).norm());
            }
        }
        if dev > 1e-9 {
            return Err(FockError::Hermiticity(dev));
        }
        let mut hermitized = DMatrix::zeros(size, size);
        for i in 0..size {
            for j in 0..size {
                hermitized[(i, j)] = (matrix[(i, j)] + matrix[(j, i)].conj()).scale(0.5);
            }
        }
        let trace: f64 = (0..size).map(|i| hermitized[(i, i)].re).sum();
        if !(trace > 0.0) {
            return Err(FockError::TraceRange(trace));
        }
        let (matrix, captured_trace, normalized) = if normalize {
            (hermitized.unscale(trace), captured_trace.unwrap_or(trace), true)
        } else {
            let captured = captured_trace.unwrap_or(trace);
            (hermitized, captured, (trace - 1.0).abs() <= 1e-9)
        };
        // Diagnose on the stored matrix so a serialization roundtrip
        // reproduces the value bit for bit.
        let min_eigenvalue = min_hermitian_eigenvalue(&matrix, 1e-6)
            .map_err(|e| FockError::Degenerate(e.to_string()))?;
        Ok(DensityBlock {
            dim_per_mode,
            n_modes,
            matrix,
            captured_trace,
            normalized,
            min_eigenvalue,
            hermiticity_dev: dev,
        })
    }

    /// Same-shape block with a new matrix (used by entry permutations such
    /// as partial transposes): revalidates, recomputes the diagnostics, and
    /// keeps the captured-trace bookkeeping.
    pub(crate) fn with_matrix(&self, matrix: DMatrix<Complex64>) -> Result<Self, FockError> {
        let mut out = Self::assemble(
            matrix,
            self.dim_per_mode,
            self.n_modes,
            Some(self.captured_trace),
            false,
        )?;
        out.normalized = self.normalized;
        Ok(out)
    }

    pub fn dim_per_mode(&self) -> usize {
        self.dim_per_mode
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    /// Side length `d^n` of the block.
    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    /// Trace of the raw projection, recorded before normalization.
    pub fn captured_trace(&self) -> f64 {
        self.captured_trace
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Smallest eigenvalue of the (hermitized, possibly normalized) block —
    /// a truncation-quality diagnostic, not a repaired quantity.
    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue
    }

    /// Worst raw deviation from Hermitian symmetry before averaging.
    pub fn hermiticity_dev(&self) -> f64 {
        self.hermiticity_dev
    }

    fn linear(&self, idx: &[usize]) -> Option<usize> {
        if idx.len() != self.n_modes {
            return None;
        }
        idx.iter()
            .try_fold(0usize, |acc, &k| (k < self.dim_per_mode).then(|| acc * self.dim_per_mode + k))
    }

    /// `<bra| rho |ket>`; `None` when an index is out of range.
    pub fn element(&self, bra: &[usize], ket: &[usize]) -> Option<Complex64> {
        Some(self.matrix[(self.linear(bra)?, self.linear(ket)?)])
    }

    /// Flat binary export: magic `TGB1`, then little-endian `d: u32`,
    /// `n_modes: u32`, `normalized: u8`, `captured_trace: f64`, then the
    /// row-major elements as (re, im) double pairs.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<(), FockError> {
        w.write_all(b"TGB1")?;
        w.write_all(&(self.dim_per_mode as u32).to_le_bytes())?;
        w.write_all(&(self.n_modes as u32).to_le_bytes())?;
        w.write_all(&[u8::from(self.normalized)])?;
        w.write_all(&self.captured_trace.to_le_bytes())?;
        let size = self.size();
        for i in 0..size {
            for j in 0..size {
                let z = self.matrix[(i, j)];
                w.write_all(&z.re.to_le_bytes())?;
                w.write_all(&z.im.to_le_bytes())?;
            }
        }
        Ok(())
    }

    /// Reads the [`write_binary`](Self::write_binary) layout, revalidating
    /// shape and Hermiticity and recomputing the diagnostics.
    pub fn read_binary<R: Read>(mut r: R) -> Result<Self, FockError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"TGB1" {
            return Err(FockError::Format("bad magic bytes".into()));
        }
        let mut u32buf = [0u8; 4];
        r.read_exact(&mut u32buf)?;
        let d = u32::from_le_bytes(u32buf) as usize;
        r.read_exact(&mut u32buf)?;
        let n_modes = u32::from_le_bytes(u32buf) as usize;
        if d < 2 || n_modes == 0 || n_modes > 8 {
            return Err(FockError::Format(format!("implausible shape d={d}, modes={n_modes}")));
        }
        let mut byte = [0u8; 1];
        r.read_exact(&mut byte)?;
        let normalized = byte[0] != 0;
        let mut f64buf = [0u8; 8];
        r.read_exact(&mut f64buf)?;
        let captured_trace = f64::from_le_bytes(f64buf);
        let size = d.pow(n_modes as u32);
        let mut matrix = DMatrix::zeros(size, size);
        for i in 0..size {
            for j in 0..size {
                r.read_exact(&mut f64buf)?;
                let re = f64::from_le_bytes(f64buf);
                r.read_exact(&mut f64buf)?;
                let im = f64::from_le_bytes(f64buf);
                matrix[(i, j)] = Complex64::new(re, im);
            }
        }
        let mut block = Self::assemble(matrix, d, n_modes, Some(captured_trace), false)?;
        block.normalized = normalized;
        Ok(block)
    }
}

fn infer_mode_count(size: usize, d: usize) -> Result<usize, FockError> {
    if d < 2 {
        return Err(FockError::BadDim(d));
    }
    let mut n = 0usize;
    let mut acc = 1usize;
    while acc < size {
        acc *= d;
        n += 1;
    }
    if acc == size && n >= 1 {
        Ok(n)
    } else {
        Err(FockError::BadDim(d))
    }
}

#[derive(Serialize, Deserialize)]
struct RawDensityBlock {
    dim_per_mode: usize,
    n_modes: usize,
    captured_trace: f64,
    normalized: bool,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

impl From<DensityBlock> for RawDensityBlock {
    fn from(b: DensityBlock) -> Self {
        let size = b.size();
        let row = |part: fn(&Complex64) -> f64| {
            (0..size)
                .map(|i| (0..size).map(|j| part(&b.matrix[(i, j)])).collect())
                .collect()
        };
        RawDensityBlock {
            dim_per_mode: b.dim_per_mode,
            n_modes: b.n_modes,
            captured_trace: b.captured_trace,
            normalized: b.normalized,
            re: row(|z| z.re),
            im: row(|z| z.im),
        }
    }
}

impl TryFrom<RawDensityBlock> for DensityBlock {
    type Error = FockError;

    fn try_from(raw: RawDensityBlock) -> Result<Self, Self::Error> {
        let size = raw.dim_per_mode.pow(raw.n_modes as u32);
        for part in [&raw.re, &raw.im] {
            if part.len() != size || part.iter().any(|row| row.len() != size) {
                return Err(FockError::Format("matrix shape does not match d^n".into()));
            }
        }
        let matrix =
            DMatrix::from_fn(size, size, |i, j| Complex64::new(raw.re[i][j], raw.im[i][j]));
        let mut block =
            Self::assemble(matrix, raw.dim_per_mode, raw.n_modes, Some(raw.captured_trace), false)?;
        block.normalized = raw.normalized;
        Ok(block)
    }
}

/// Projects three-mode moments onto three `d`-level systems, `d` in 2..=4.
///
/// All `d^6` elements with per-mode occupations below `d` are evaluated by
/// the chosen pipeline ([`ElementMethod::CrossValidate`] runs both and
/// rejects disagreement beyond `1e-8`), hermitized by averaging, and checked
/// to carry a trace in `(0, 1]` — a truncation can only lose weight.
pub fn project_to_qudits(
    m: &GaussianMoments,
    d: usize,
    normalize: bool,
    method: ElementMethod,
) -> Result<DensityBlock, FockError> {
    if m.n_modes() != 3 {
        return Err(FockError::NotThreeMode(m.n_modes()));
    }
    if !(2..=HARD_MAX_OCCUPATION).contains(&d) {
        return Err(FockError::BadDim(d));
    }
    let raw = match method {
        ElementMethod::Hermite => block_by_hermite(m, d)?,
        ElementMethod::Derivative => block_by_derivatives_path(m, d)?,
        ElementMethod::CrossValidate => {
            let a = block_by_hermite(m, d)?;
            let b = block_by_derivatives_path(m, d)?;
            let dev = (&a - &b).iter().map(|z| z.norm()).fold(0.0f64, f64::max);
            if dev > 1e-8 {
                return Err(FockError::CrossMethodMismatch(dev));
            }
            a
        }
    };
    let block = DensityBlock::assemble(raw, d, 3, None, normalize)?;
    if block.captured_trace > 1.0 + 1e-9 {
        return Err(FockError::TraceRange(block.captured_trace));
    }
    Ok(block)
}

fn block_by_hermite(m: &GaussianMoments, d: usize) -> Result<DMatrix<Complex64>, FockError> {
    let n = m.n_modes();
    let mut engine = hermite::HermiteEngine::new(m)?;
    let size = d.pow(n as u32);
    let mut out = DMatrix::zeros(size, size);
    let mut bra = vec![0usize; n];
    let mut ket = vec![0usize; n];
    for row in 0..size {
        ladder::linear_to_index(row, d, &mut bra);
        for col in 0..size {
            ladder::linear_to_index(col, d, &mut ket);
            out[(row, col)] = engine.element(&bra, &ket)?;
        }
    }
    Ok(out)
}

fn block_by_derivatives_path(m: &GaussianMoments, d: usize) -> Result<DMatrix<Complex64>, FockError> {
    let hp = husimi_params(&to_ladder(m)?)?;
    ladder::block_by_derivatives(&hp, d)
}
