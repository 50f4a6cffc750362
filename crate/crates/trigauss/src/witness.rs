//! Genuine-multipartite-entanglement detection on photon-number blocks.
//!
//! Every detector here consumes a three-mode [`DensityBlock`]. Because the
//! block is the image of the Gaussian state under a local projection, any
//! entanglement verdict on the block certifies the same for the original
//! state; the converse is false, so non-detection never claims separability.
//!
//! Three detectors are provided, in increasing strength and cost:
//!
//! - [`product_vector_criterion`]: a biseparability bound on one matrix
//!   element against products of diagonal weights (with
//!   [`product_vector_sweep`] trying every low-occupation pair),
//! - [`bisep_inequality_margin`]: a five-term inequality mixing the three
//!   single-excitation coherences, violated only by genuinely multipartite
//!   entangled states,
//! - [`fully_decomposable_witness`]: the strongest of the three — a
//!   semidefinite program over witnesses `W` with `tr W = 1` that are
//!   decomposable as `W = P_k + Q_k^{T_k}`, `P_k, Q_k >= 0`, for every
//!   bipartition `k`; a strictly negative optimum `tr(W rho)` certifies GME.
//!
//! The witness SDP is solved over real symmetric matrices when the block is
//! real (always the case for the built-in families), additionally split into
//! photon-parity sectors when the block commutes with the parity projector,
//! and over the `[[Re, -Im], [Im, Re]]` real embedding otherwise.

use crate::conic::{
    ConicError, ConicProgram, PackedEntry, SolveOptions, SolveReport, SolveStatus, VarId,
};
use crate::fock::{ladder::linear_to_index, DensityBlock, FockError, FockIndex};
use crate::moments::Bipartition;
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

/// Margin above which an element inequality claims detection.
pub const INEQUALITY_DETECTION_TOL: f64 = 1e-10;
/// A witness optimum below the negative of this claims detection.
pub const WITNESS_DETECTION_TOL: f64 = 1e-8;

#[derive(Debug, thiserror::Error)]
pub enum WitnessError {
    #[error("detector requires a three-mode block, got {0} modes")]
    NotThreeMode(usize),
    #[error("occupation index outside the block's range")]
    IndexOutOfRange,
    #[error("product-vector criterion needs two distinct basis vectors")]
    EqualIndices,
    #[error(transparent)]
    Fock(#[from] FockError),
    #[error(transparent)]
    Conic(#[from] ConicError),
}

fn require_three_modes(rho: &DensityBlock) -> Result<(), WitnessError> {
    if rho.n_modes() != 3 {
        return Err(WitnessError::NotThreeMode(rho.n_modes()));
    }
    Ok(())
}

fn encode(idx: &[usize; 3], d: usize) -> usize {
    idx.iter().fold(0, |acc, &k| acc * d + k)
}

/// Linear indices of the entry a partial transpose on `mode` reads from:
/// the occupation digits of `mode` are exchanged between row and column.
fn swap_mode_digit(row: usize, col: usize, mode: usize, d: usize) -> (usize, usize) {
    let mut r = [0usize; 3];
    let mut c = [0usize; 3];
    linear_to_index(row, d, &mut r);
    linear_to_index(col, d, &mut c);
    std::mem::swap(&mut r[mode], &mut c[mode]);
    (encode(&r, d), encode(&c, d))
}

fn pt_matrix(m: &DMatrix<Complex64>, d: usize, mode: usize) -> DMatrix<Complex64> {
    let size = m.nrows();
    DMatrix::from_fn(size, size, |row, col| {
        let (sr, sc) = swap_mode_digit(row, col, mode, d);
        m[(sr, sc)]
    })
}

/// Partial transpose of the block on the bipartition's isolated mode. An
/// involution that preserves trace and Hermiticity; the returned block's
/// [`min_eigenvalue`](DensityBlock::min_eigenvalue) is the NPT diagnostic.
pub fn partial_transpose_dm(
    rho: &DensityBlock,
    cut: Bipartition,
) -> Result<DensityBlock, WitnessError> {
    require_three_modes(rho)?;
    let transposed = pt_matrix(rho.matrix(), rho.dim_per_mode(), cut.isolated_mode());
    Ok(rho.with_matrix(transposed)?)
}

/// Smallest partial-transpose eigenvalue for each bipartition, in
/// [`Bipartition::ALL`] order.
pub fn partial_transpose_min_eigs(rho: &DensityBlock) -> Result<[f64; 3], WitnessError> {
    let mut out = [0.0f64; 3];
    for (slot, cut) in out.iter_mut().zip(Bipartition::ALL) {
        *slot = partial_transpose_dm(rho, cut)?.min_eigenvalue();
    }
    Ok(out)
}

/// One element-inequality evaluation: both sides, their difference, and the
/// verdict `margin > 1e-10`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InequalityMargin {
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub detected: bool,
}

impl InequalityMargin {
    fn from_sides(lhs: f64, rhs: f64) -> Self {
        let margin = lhs - rhs;
        InequalityMargin { lhs, rhs, margin, detected: margin > INEQUALITY_DETECTION_TOL }
    }
}

fn diagonal_weight(rho: &DensityBlock, idx: &[usize; 3]) -> Result<f64, WitnessError> {
    let z = rho.element(idx, idx).ok_or(WitnessError::IndexOutOfRange)?;
    // Diagonals of a truncation can dip microscopically below zero; the
    // bound only uses their nonnegative part.
    Ok(z.re.max(0.0))
}

/// Biseparability bound on the single element `<a| rho |b>`: for every
/// bipartition, swapping the isolated mode's occupations between `a` and `b`
/// yields two diagonals whose geometric mean bounds the coherence. A
/// positive margin therefore certifies GME.
pub fn product_vector_criterion(
    rho: &DensityBlock,
    a: FockIndex,
    b: FockIndex,
) -> Result<InequalityMargin, WitnessError> {
    require_three_modes(rho)?;
    if a == b {
        return Err(WitnessError::EqualIndices);
    }
    let lhs = rho
        .element(a.as_slice(), b.as_slice())
        .ok_or(WitnessError::IndexOutOfRange)?
        .norm();
    let mut rhs = 0.0;
    for mode in 0..3 {
        let mut a_swap = a.0;
        let mut b_swap = b.0;
        std::mem::swap(&mut a_swap[mode], &mut b_swap[mode]);
        rhs += (diagonal_weight(rho, &a_swap)? * diagonal_weight(rho, &b_swap)?).sqrt();
    }
    Ok(InequalityMargin::from_sides(lhs, rhs))
}

/// Best outcome of [`product_vector_criterion`] over all pairs of basis
/// vectors with per-mode occupations at most one.
#[derive(Debug, Clone, Serialize)]
pub struct ProductSweep {
    /// The largest-margin evaluation found.
    pub result: InequalityMargin,
    pub pair: (FockIndex, FockIndex),
    pub pairs_tested: usize,
}

pub fn product_vector_sweep(rho: &DensityBlock) -> Result<ProductSweep, WitnessError> {
    require_three_modes(rho)?;
    let mut best: Option<ProductSweep> = None;
    let mut pairs_tested = 0;
    for lin_a in 0..8usize {
        for lin_b in (lin_a + 1)..8usize {
            let a = FockIndex([lin_a >> 2 & 1, lin_a >> 1 & 1, lin_a & 1]);
            let b = FockIndex([lin_b >> 2 & 1, lin_b >> 1 & 1, lin_b & 1]);
            let result = product_vector_criterion(rho, a, b)?;
            pairs_tested += 1;
            if best.as_ref().is_none_or(|cur| result.margin > cur.result.margin) {
                best = Some(ProductSweep { result, pair: (a, b), pairs_tested: 0 });
            }
        }
    }
    let mut out = best.expect("sweep covers at least one pair");
    out.pairs_tested = pairs_tested;
    Ok(out)
}

/// Five-term biseparability inequality on the single-excitation sector:
/// the three coherences `<000| rho |011>`, `<000| rho |101>`,
/// `<000| rho |110>` against the diagonal bound
/// `sqrt(rho_000 (rho_011 + rho_101 + rho_110))` plus the three pairwise
/// geometric means of the one-photon diagonals. Violation certifies GME;
/// both sides scale linearly with the block, so no normalization is needed.
pub fn bisep_inequality_margin(rho: &DensityBlock) -> Result<InequalityMargin, WitnessError> {
    require_three_modes(rho)?;
    let zero = [0usize, 0, 0];
    let doubles = [[0usize, 1, 1], [1, 0, 1], [1, 1, 0]];
    let singles = [[0usize, 0, 1], [0, 1, 0], [1, 0, 0]];

    let mut lhs = 0.0;
    for pair in &doubles {
        lhs += rho.element(&zero, pair).ok_or(WitnessError::IndexOutOfRange)?.norm();
    }
    let zero_weight = diagonal_weight(rho, &zero)?;
    let double_weight: f64 = doubles
        .iter()
        .map(|idx| diagonal_weight(rho, idx))
        .sum::<Result<f64, _>>()?;
    let mut rhs = (zero_weight * double_weight).sqrt();
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        rhs += (diagonal_weight(rho, &singles[i])? * diagonal_weight(rho, &singles[j])?).sqrt();
    }
    Ok(InequalityMargin::from_sides(lhs, rhs))
}

/// Terminal status of the witness optimization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum WitnessStatus {
    Optimal,
    /// The solver stopped close to optimality; the value is reported but no
    /// detection is claimed.
    Indeterminate,
    SolverError,
}

/// Result of the fully-decomposable-witness program.
///
/// JSON serialization carries the scalars; the matrices stay in memory and
/// are exported only on explicit request (they grow as `d^6`).
#[derive(Debug, Clone, Serialize)]
pub struct WitnessOutcome {
    /// Optimal `tr(W rho)`; negative values witness GME.
    pub value: f64,
    pub status: WitnessStatus,
    pub duality_gap: f64,
    /// `status == Optimal && value < -1e-8`.
    pub detected: bool,
    /// Backend termination message, for diagnostics.
    pub message: String,
    /// The optimal witness, `tr W = 1`.
    #[serde(skip)]
    pub witness: DMatrix<Complex64>,
    /// Per-bipartition PSD parts `Q_k` of the decomposition.
    #[serde(skip)]
    pub q_parts: [DMatrix<Complex64>; 3],
    /// Per-bipartition slacks `P_k = W - Q_k^{T_k}`, PSD at the optimum.
    #[serde(skip)]
    pub p_parts: [DMatrix<Complex64>; 3],
}

/// Minimizes `tr(W rho)` over fully decomposable witnesses with `tr W = 1`:
/// for each bipartition `k`, `W = P_k + Q_k^{T_k}` with `P_k, Q_k >= 0`.
/// Such witnesses are nonnegative on every biseparable state, so
/// `value < -1e-8` at optimality certifies GME. The block is normalized to
/// unit trace internally (the verdict is scale-invariant; conditioning is
/// not).
pub fn fully_decomposable_witness(rho: &DensityBlock) -> Result<WitnessOutcome, WitnessError> {
    fully_decomposable_witness_with(rho, &SolveOptions::default())
}

pub fn fully_decomposable_witness_with(
    rho: &DensityBlock,
    options: &SolveOptions,
) -> Result<WitnessOutcome, WitnessError> {
    require_three_modes(rho)?;
    let d = rho.dim_per_mode();
    let mut mat = rho.matrix().clone();
    let trace: f64 = (0..mat.nrows()).map(|i| mat[(i, i)].re).sum();
    if (trace - 1.0).abs() > 1e-9 {
        mat.unscale_mut(trace);
    }

    let max_im = mat.iter().map(|z| z.im.abs()).fold(0.0f64, f64::max);
    let (report, witness, q_parts) = if max_im <= 1e-12 {
        let real = mat.map(|z| z.re);
        if is_parity_block_diagonal(&real, d) {
            solve_parity(&real, d, options)?
        } else {
            solve_real(&real, d, options)?
        }
    } else {
        solve_complex(&mat, d, options)?
    };

    let p_parts = [0usize, 1, 2].map(|mode| &witness - pt_matrix(&q_parts[mode], d, mode));
    let status = match report.status {
        SolveStatus::Optimal => WitnessStatus::Optimal,
        SolveStatus::Indeterminate => WitnessStatus::Indeterminate,
        SolveStatus::Infeasible | SolveStatus::Error => WitnessStatus::SolverError,
    };
    let value = report.objective;
    Ok(WitnessOutcome {
        value,
        status,
        duality_gap: report.duality_gap,
        detected: status == WitnessStatus::Optimal && value < -WITNESS_DETECTION_TOL,
        message: report.message,
        witness,
        q_parts,
        p_parts,
    })
}

type SolvedWitness = (SolveReport, DMatrix<Complex64>, [DMatrix<Complex64>; 3]);

/// Real-symmetric specialization: when the block is real, conjugation
/// symmetry lets the optimal witness be taken real.
pub(crate) fn solve_real(
    rho: &DMatrix<f64>,
    d: usize,
    options: &SolveOptions,
) -> Result<SolvedWitness, WitnessError> {
    let n = rho.nrows();
    let mut prog = ConicProgram::new();
    let w = prog.sym_var("w", n);
    let qs = [prog.sym_var("q0", n), prog.sym_var("q1", n), prog.sym_var("q2", n)];
    prog.obj_add_frobenius(w, rho);
    let trace = prog.trace_terms(w);
    prog.add_eq(&trace, -1.0);
    for (mode, &qk) in qs.iter().enumerate() {
        let q_psd = prog.add_psd(&DMatrix::zeros(n, n));
        prog.psd_add_sym_var(q_psd, qk, 0, 1.0);
        let p_psd = prog.add_psd(&DMatrix::zeros(n, n));
        prog.psd_add_sym_var(p_psd, w, 0, 1.0);
        prog.psd_add_sym_var_mapped(p_psd, qk, -1.0, |i, j| swap_mode_digit(i, j, mode, d));
    }
    let report = prog.solve(options)?;
    let to_complex = |m: DMatrix<f64>| m.map(|v| Complex64::new(v, 0.0));
    let witness = to_complex(report.sym_value(w));
    let q_parts = [0usize, 1, 2].map(|k| to_complex(report.sym_value(qs[k])));
    Ok((report, witness, q_parts))
}

fn block_parities(size: usize, d: usize) -> Vec<usize> {
    let mut digits = [0usize; 3];
    (0..size)
        .map(|lin| {
            linear_to_index(lin, d, &mut digits);
            digits.iter().sum::<usize>() % 2
        })
        .collect()
}

fn is_parity_block_diagonal(rho: &DMatrix<f64>, d: usize) -> bool {
    let parity = block_parities(rho.nrows(), d);
    for i in 0..rho.nrows() {
        for j in 0..rho.ncols() {
            if parity[i] != parity[j] && rho[(i, j)].abs() > 1e-12 {
                return false;
            }
        }
    }
    true
}

/// Parity-sector specialization: a block commuting with the photon-parity
/// projector admits a parity-block-diagonal optimal witness (conjugating
/// any feasible point by the parity sign matrix — a local operation that
/// also commutes with every partial transpose — preserves feasibility and
/// objective). Each semidefinite cone then splits into the even and odd
/// sectors; the partial transpose scatters entries between the sector
/// blocks but never across the even/odd boundary of an entry pair.
pub(crate) fn solve_parity(
    rho: &DMatrix<f64>,
    d: usize,
    options: &SolveOptions,
) -> Result<SolvedWitness, WitnessError> {
    let n = rho.nrows();
    let parity = block_parities(n, d);
    let mut sectors = [Vec::new(), Vec::new()];
    let mut lookup = vec![(0usize, 0usize); n];
    for (lin, &p) in parity.iter().enumerate() {
        lookup[lin] = (p, sectors[p].len());
        sectors[p].push(lin);
    }

    let mut prog = ConicProgram::new();
    let w_vars =
        [prog.sym_var("w_even", sectors[0].len()), prog.sym_var("w_odd", sectors[1].len())];
    let mut q_vars = Vec::with_capacity(3);
    for mode in 0..3 {
        q_vars.push([
            prog.sym_var(&format!("q{mode}_even"), sectors[0].len()),
            prog.sym_var(&format!("q{mode}_odd"), sectors[1].len()),
        ]);
    }
    let mut trace = Vec::new();
    for s in 0..2 {
        let sec = &sectors[s];
        let sub = DMatrix::from_fn(sec.len(), sec.len(), |i, j| rho[(sec[i], sec[j])]);
        prog.obj_add_frobenius(w_vars[s], &sub);
        trace.extend(prog.trace_terms(w_vars[s]));
    }
    prog.add_eq(&trace, -1.0);

    for mode in 0..3 {
        for s in 0..2 {
            let len = sectors[s].len();
            let q_psd = prog.add_psd(&DMatrix::zeros(len, len));
            prog.psd_add_sym_var(q_psd, q_vars[mode][s], 0, 1.0);
        }
        let p_psd = [0usize, 1].map(|s| {
            let len = sectors[s].len();
            prog.add_psd(&DMatrix::zeros(len, len))
        });
        for s in 0..2 {
            prog.psd_add_sym_var(p_psd[s], w_vars[s], 0, 1.0);
        }
        for s in 0..2 {
            let sec = sectors[s].clone();
            let lookup = &lookup;
            prog.psd_scatter_sym_var(q_vars[mode][s], -1.0, move |i, j| {
                let (sr, sc) = swap_mode_digit(sec[i], sec[j], mode, d);
                let (target_sector, li) = lookup[sr];
                let (check, lj) = lookup[sc];
                debug_assert_eq!(target_sector, check);
                (p_psd[target_sector], li, lj)
            });
        }
    }

    let report = prog.solve(options)?;
    let assemble = |vars: [VarId; 2]| {
        let mut full = DMatrix::zeros(n, n);
        for s in 0..2 {
            let values = report.sym_value(vars[s]);
            for (i, &gi) in sectors[s].iter().enumerate() {
                for (j, &gj) in sectors[s].iter().enumerate() {
                    full[(gi, gj)] = Complex64::new(values[(i, j)], 0.0);
                }
            }
        }
        full
    };
    let witness = assemble(w_vars);
    let q_parts = [0usize, 1, 2].map(|mode| assemble(q_vars[mode]));
    Ok((report, witness, q_parts))
}

/// Packed real coordinates of an `n x n` Hermitian matrix: the upper-triangle
/// real parts column-stacked, then the strict-upper imaginary parts.
struct HermCoords {
    n: usize,
}

#[derive(Clone, Copy)]
enum HermCoord {
    Re(usize, usize),
    Im(usize, usize),
}

impl HermCoords {
    fn len(&self) -> usize {
        self.n * self.n
    }

    fn re_slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(i <= j);
        j * (j + 1) / 2 + i
    }

    fn im_slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j);
        self.n * (self.n + 1) / 2 + j * (j - 1) / 2 + i
    }

    fn slot(&self, coord: HermCoord) -> usize {
        match coord {
            HermCoord::Re(i, j) => self.re_slot(i, j),
            HermCoord::Im(i, j) => self.im_slot(i, j),
        }
    }

    fn all(&self) -> impl Iterator<Item = HermCoord> + '_ {
        let n = self.n;
        (0..n)
            .flat_map(move |j| (0..=j).map(move |i| HermCoord::Re(i, j)))
            .chain((0..n).flat_map(move |j| (0..j).map(move |i| HermCoord::Im(i, j))))
    }

    /// Upper-triangle triplets the coordinate contributes to the
    /// `[[Re, -Im], [Im, Re]]` embedding.
    fn embed(&self, coord: HermCoord) -> Vec<(usize, usize, f64)> {
        let n = self.n;
        match coord {
            HermCoord::Re(i, j) => vec![(i, j, 1.0), (n + i, n + j, 1.0)],
            HermCoord::Im(i, j) => vec![(i, n + j, -1.0), (j, n + i, 1.0)],
        }
    }
}

/// General Hermitian path through the real embedding; used only when the
/// block carries genuinely complex entries.
pub(crate) fn solve_complex(
    rho: &DMatrix<Complex64>,
    d: usize,
    options: &SolveOptions,
) -> Result<SolvedWitness, WitnessError> {
    let n = rho.nrows();
    let coords = HermCoords { n };
    let mut prog = ConicProgram::new();
    let w = prog.vec_var("w", coords.len());
    let qs = [
        prog.vec_var("q0", coords.len()),
        prog.vec_var("q1", coords.len()),
        prog.vec_var("q2", coords.len()),
    ];

    // tr(W rho) in coordinates: diagonals pair with rho's real diagonal,
    // strict-upper parts pick up a factor two from the conjugate pair.
    let mut objective = Vec::new();
    let mut trace = Vec::new();
    for coord in coords.all() {
        let col = prog.col(w, PackedEntry::Index(coords.slot(coord)));
        match coord {
            HermCoord::Re(i, j) if i == j => {
                objective.push((col, rho[(i, i)].re));
                trace.push((col, 1.0));
            }
            HermCoord::Re(i, j) => objective.push((col, 2.0 * rho[(i, j)].re)),
            HermCoord::Im(i, j) => objective.push((col, 2.0 * rho[(i, j)].im)),
        }
    }
    prog.obj_add_terms(&objective);
    prog.add_eq(&trace, -1.0);

    for (mode, &qk) in qs.iter().enumerate() {
        let q_psd = prog.add_psd(&DMatrix::zeros(2 * n, 2 * n));
        let p_psd = prog.add_psd(&DMatrix::zeros(2 * n, 2 * n));
        for coord in coords.all() {
            let slot = coords.slot(coord);
            let triplets = coords.embed(coord);
            prog.psd_add_col_times_mat(q_psd, prog.col(qk, PackedEntry::Index(slot)), &triplets);
            prog.psd_add_col_times_mat(p_psd, prog.col(w, PackedEntry::Index(slot)), &triplets);

            // Q_k's coordinate lands in W - Q_k^{T_k} at the transposed
            // entry; crossing the canonical (upper-triangle) orientation
            // conjugates, flipping the imaginary part.
            let (i, j, is_im) = match coord {
                HermCoord::Re(i, j) => (i, j, false),
                HermCoord::Im(i, j) => (i, j, true),
            };
            let (ti, tj) = swap_mode_digit(i, j, mode, d);
            let (sign, target) = if ti <= tj {
                (1.0, if is_im { HermCoord::Im(ti, tj) } else { HermCoord::Re(ti, tj) })
            } else {
                (
                    if is_im { -1.0 } else { 1.0 },
                    if is_im { HermCoord::Im(tj, ti) } else { HermCoord::Re(tj, ti) },
                )
            };
            let scaled: Vec<(usize, usize, f64)> = coords
                .embed(target)
                .into_iter()
                .map(|(a, b, v)| (a, b, -sign * v))
                .collect();
            prog.psd_add_col_times_mat(p_psd, prog.col(qk, PackedEntry::Index(slot)), &scaled);
        }
    }

    let report = prog.solve(options)?;
    let unpack = |var: VarId| {
        let v = report.vec_value(var);
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(v[coords.re_slot(i, i)], 0.0)
            } else if i < j {
                Complex64::new(v[coords.re_slot(i, j)], v[coords.im_slot(i, j)])
            } else {
                Complex64::new(v[coords.re_slot(j, i)], -v[coords.im_slot(j, i)])
            }
        })
    };
    let witness = unpack(w);
    let q_parts = [0usize, 1, 2].map(|k| unpack(qs[k]));
    Ok((report, witness, q_parts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{project_to_qudits, ElementMethod};
    use crate::moments::{family_moments, tmsv_cm, Family, FamilyParams, GaussianMoments};
    use approx::assert_abs_diff_eq;

    fn family_block(family: Family, r: f64, second: f64, d: usize) -> DensityBlock {
        let params = FamilyParams::r(r).with_second(family, second);
        let m = family_moments(family, &params).unwrap();
        project_to_qudits(&m, d, true, ElementMethod::Hermite).unwrap()
    }

    fn ghz_qubit_block(phase: f64) -> DensityBlock {
        let mut mat = DMatrix::zeros(8, 8);
        let half = Complex64::new(0.5, 0.0);
        mat[(0, 0)] = half;
        mat[(7, 7)] = half;
        mat[(0, 7)] = Complex64::from_polar(0.5, -phase);
        mat[(7, 0)] = Complex64::from_polar(0.5, phase);
        DensityBlock::from_matrix(mat, 2).unwrap()
    }

    #[test]
    fn partial_transpose_is_an_involution_preserving_structure() {
        let m = tmsv_cm(0.8).unwrap().direct_sum(&GaussianMoments::vacuum(1)).unwrap();
        let block = project_to_qudits(&m, 2, true, ElementMethod::Hermite).unwrap();
        for cut in Bipartition::ALL {
            let pt = partial_transpose_dm(&block, cut).unwrap();
            let back = partial_transpose_dm(&pt, cut).unwrap();
            assert_eq!(back.matrix(), block.matrix());
            assert_abs_diff_eq!(pt.captured_trace(), block.captured_trace(), epsilon = 0.0);
            let trace: f64 = (0..8).map(|i| pt.matrix()[(i, i)].re).sum();
            assert_abs_diff_eq!(trace, 1.0, epsilon = 1e-12);
        }
        // Modes A and B carry the two-mode squeezing: cuts isolating either
        // are NPT, while the vacuum mode C separates cleanly.
        let eigs = partial_transpose_min_eigs(&block).unwrap();
        assert!(eigs[0] < -0.01, "A|BC should be NPT, got {}", eigs[0]);
        assert!(eigs[1] < -0.01, "B|AC should be NPT, got {}", eigs[1]);
        assert!(eigs[2] > -1e-9, "C|AB is a product cut, got {}", eigs[2]);
    }

    #[test]
    fn partial_transpose_leaves_isolated_product_factors_alone() {
        let m = GaussianMoments::vacuum(1).direct_sum(&tmsv_cm(0.5).unwrap()).unwrap();
        let block = project_to_qudits(&m, 2, true, ElementMethod::Hermite).unwrap();
        let pt = partial_transpose_dm(&block, Bipartition::A).unwrap();
        assert_eq!(pt.matrix(), block.matrix());
    }

    #[test]
    fn product_vector_criterion_detects_the_ghz_coherence() {
        let block = ghz_qubit_block(0.0);
        let margin = product_vector_criterion(&block, FockIndex([0, 0, 0]), FockIndex([1, 1, 1]))
            .unwrap();
        assert_abs_diff_eq!(margin.lhs, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(margin.rhs, 0.0, epsilon = 1e-12);
        assert!(margin.detected);
        let sweep = product_vector_sweep(&block).unwrap();
        assert_eq!(sweep.pairs_tested, 28);
        assert_eq!(sweep.pair, (FockIndex([0, 0, 0]), FockIndex([1, 1, 1])));
        assert_abs_diff_eq!(sweep.result.margin, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn product_vector_criterion_never_fires_on_diagonal_blocks() {
        let mut diag = DMatrix::zeros(8, 8);
        for (i, w) in [0.4, 0.2, 0.1, 0.05, 0.1, 0.05, 0.05, 0.05].iter().enumerate() {
            diag[(i, i)] = Complex64::new(*w, 0.0);
        }
        let block = DensityBlock::from_matrix(diag, 2).unwrap();
        let sweep = product_vector_sweep(&block).unwrap();
        assert!(sweep.result.margin <= 0.0);
        assert!(!sweep.result.detected);
    }

    #[test]
    fn product_vector_criterion_validates_its_indices() {
        let block = ghz_qubit_block(0.0);
        let idx = FockIndex([0, 0, 0]);
        assert!(matches!(
            product_vector_criterion(&block, idx, idx),
            Err(WitnessError::EqualIndices)
        ));
        assert!(matches!(
            product_vector_criterion(&block, idx, FockIndex([0, 0, 2])),
            Err(WitnessError::IndexOutOfRange)
        ));
    }

    #[test]
    fn product_vector_sweep_stays_silent_on_squeezed_families() {
        for r in [0.1, 0.25, 0.4] {
            let block = family_block(Family::Vac, r, 0.0, 2);
            let direct =
                product_vector_criterion(&block, FockIndex([0, 0, 0]), FockIndex([1, 1, 1]))
                    .unwrap();
            assert!(direct.margin <= 0.0, "r={r} margin {}", direct.margin);
            let sweep = product_vector_sweep(&block).unwrap();
            assert!(!sweep.result.detected, "r={r} detected {:?}", sweep.result);
        }
    }

    #[test]
    fn single_excitation_inequality_flips_where_expected() {
        // Equal squeezed-pair mixtures violate the inequality for small r
        // and stop violating beyond the known flip points.
        let cases = [
            (Family::Vac, 0.0, 0.2, true),
            (Family::Vac, 0.0, 0.3, false),
            (Family::Smsv, 0.15, 0.15, true),
            (Family::Smsv, 0.15, 0.25, false),
        ];
        for (family, second, r, expect) in cases {
            let block = family_block(family, r, second, 2);
            let margin = bisep_inequality_margin(&block).unwrap();
            assert_eq!(margin.detected, expect, "{family:?} r={r}: {margin:?}");
        }
    }

    #[test]
    fn single_excitation_inequality_is_zero_on_vacuum_and_scale_invariant() {
        let vac = project_to_qudits(
            &GaussianMoments::vacuum(3),
            2,
            false,
            ElementMethod::Hermite,
        )
        .unwrap();
        let margin = bisep_inequality_margin(&vac).unwrap();
        assert_abs_diff_eq!(margin.margin, 0.0, epsilon = 1e-14);
        assert!(!margin.detected);

        let block = family_block(Family::Vac, 0.2, 0.0, 2);
        let base = bisep_inequality_margin(&block).unwrap();
        for scale in [0.5, 2.0] {
            let scaled = DensityBlock::from_matrix(
                block.matrix().clone().scale(scale),
                2,
            )
            .unwrap();
            let result = bisep_inequality_margin(&scaled).unwrap();
            assert_eq!(result.detected, base.detected);
            assert_abs_diff_eq!(result.margin, scale * base.margin, epsilon = 1e-12);
        }
    }

    fn check_witness_invariants(outcome: &WitnessOutcome, d: usize) {
        let trace: f64 = (0..outcome.witness.nrows()).map(|i| outcome.witness[(i, i)].re).sum();
        assert_abs_diff_eq!(trace, 1.0, epsilon = 1e-7);
        for mode in 0..3 {
            let q_min =
                crate::conic::min_hermitian_eigenvalue(&outcome.q_parts[mode], 1e-8).unwrap();
            let p_min =
                crate::conic::min_hermitian_eigenvalue(&outcome.p_parts[mode], 1e-8).unwrap();
            assert!(q_min > -1e-6, "Q_{mode} min eig {q_min}");
            assert!(p_min > -1e-6, "P_{mode} min eig {p_min}");
            let rebuilt = &outcome.p_parts[mode] + pt_matrix(&outcome.q_parts[mode], d, mode);
            let dev = (&rebuilt - &outcome.witness).iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!(dev < 1e-10, "decomposition mismatch {dev}");
        }
    }

    #[test]
    fn witness_detects_ghz_and_passes_product_blocks() {
        let ghz = ghz_qubit_block(0.0);
        let outcome = fully_decomposable_witness(&ghz).unwrap();
        assert_eq!(outcome.status, WitnessStatus::Optimal);
        assert!(outcome.detected);
        assert!(outcome.value < -1e-3, "value {}", outcome.value);
        check_witness_invariants(&outcome, 2);

        let vac = project_to_qudits(
            &GaussianMoments::vacuum(3),
            2,
            true,
            ElementMethod::Hermite,
        )
        .unwrap();
        let outcome = fully_decomposable_witness(&vac).unwrap();
        assert_eq!(outcome.status, WitnessStatus::Optimal);
        assert!(outcome.value > -1e-7, "value {}", outcome.value);
        assert!(!outcome.detected);
    }

    #[test]
    fn witness_band_on_the_squeezed_vacuum_family() {
        let detected = fully_decomposable_witness(&family_block(Family::Vac, 0.4, 0.0, 2)).unwrap();
        assert_eq!(detected.status, WitnessStatus::Optimal);
        assert!(detected.detected, "r=0.4 value {}", detected.value);
        check_witness_invariants(&detected, 2);

        let clear = fully_decomposable_witness(&family_block(Family::Vac, 0.7, 0.0, 2)).unwrap();
        assert_eq!(clear.status, WitnessStatus::Optimal);
        assert!(clear.value > -1e-7, "r=0.7 value {}", clear.value);
        assert!(!clear.detected);
    }

    #[test]
    fn witness_qutrit_projection_extends_the_detected_band() {
        // At r = 0.8 the qubit projection no longer violates, but the qutrit
        // one still does.
        let qubit = fully_decomposable_witness(&family_block(Family::Vac, 0.8, 0.0, 2)).unwrap();
        assert!(!qubit.detected, "qubit value {}", qubit.value);
        let qutrit = fully_decomposable_witness(&family_block(Family::Vac, 0.8, 0.0, 3)).unwrap();
        assert_eq!(qutrit.status, WitnessStatus::Optimal);
        assert!(qutrit.detected, "qutrit value {}", qutrit.value);
        check_witness_invariants(&qutrit, 3);
    }

    #[test]
    fn all_three_solver_paths_agree_on_a_real_even_block() {
        let block = family_block(Family::Vac, 0.4, 0.0, 2);
        let real = block.matrix().map(|z| z.re);
        assert!(is_parity_block_diagonal(&real, 2));
        let options = SolveOptions::default();
        let (plain, w_plain, _) = solve_real(&real, 2, &options).unwrap();
        let (split, w_split, _) = solve_parity(&real, 2, &options).unwrap();
        let (embedded, w_embed, _) =
            solve_complex(&real.map(|v| Complex64::new(v, 0.0)), 2, &options).unwrap();
        assert_eq!(plain.status, SolveStatus::Optimal);
        assert_eq!(split.status, SolveStatus::Optimal);
        assert_eq!(embedded.status, SolveStatus::Optimal);
        assert_abs_diff_eq!(plain.objective, split.objective, epsilon = 1e-6);
        assert_abs_diff_eq!(plain.objective, embedded.objective, epsilon = 1e-6);
        // The witnesses themselves may differ on degenerate faces, but all
        // must score the block identically.
        for w in [&w_plain, &w_split, &w_embed] {
            let score: f64 =
                (w.adjoint() * block.matrix()).trace().re;
            assert_abs_diff_eq!(score, plain.objective, epsilon = 1e-6);
        }
    }

    #[test]
    fn complex_blocks_route_through_the_embedded_path() {
        // A phase-rotated GHZ block is locally equivalent to the plain one,
        // so the witness value must match while the matrix is truly complex.
        let rotated = ghz_qubit_block(0.7);
        assert!(rotated.matrix().iter().any(|z| z.im.abs() > 1e-3));
        let outcome = fully_decomposable_witness(&rotated).unwrap();
        assert_eq!(outcome.status, WitnessStatus::Optimal);
        assert!(outcome.detected);
        check_witness_invariants(&outcome, 2);
        let plain = fully_decomposable_witness(&ghz_qubit_block(0.0)).unwrap();
        assert_abs_diff_eq!(outcome.value, plain.value, epsilon = 1e-5);

        // A displaced product state with momentum displacement has complex
        // elements but no entanglement to find.
        let mut mean = nalgebra::DVector::zeros(6);
        mean[3] = 0.5;
        mean[4] = -0.3;
        let m = GaussianMoments::new(DMatrix::identity(6, 6), mean).unwrap();
        let block = project_to_qudits(&m, 2, true, ElementMethod::CrossValidate).unwrap();
        assert!(block.matrix().iter().any(|z| z.im.abs() > 1e-6));
        let outcome = fully_decomposable_witness(&block).unwrap();
        assert_eq!(outcome.status, WitnessStatus::Optimal);
        assert!(outcome.value > -1e-7, "value {}", outcome.value);
        assert!(!outcome.detected);
    }
}
