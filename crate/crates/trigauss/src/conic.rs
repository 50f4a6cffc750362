//! Thin deterministic layer over an interior-point conic solver.
//!
//! Programs are linear objectives over scalar, vector, and symmetric-matrix
//! variables, subject to affine equality, nonnegativity, and positive
//! semidefinite constraints. Symmetric matrix variables are stored in packed
//! svec form — the upper triangle stacked column-wise with off-diagonal
//! entries scaled by `sqrt(2)` — which makes the semidefinite cone self-dual
//! in the plain dot product and lets aligned matrix terms map through with
//! coefficient one.
//!
//! The solver backend is Clarabel; identical programs solve to identical
//! reports, and solver-side failures are surfaced as
//! [`SolveStatus::Error`] with the backend's message rather than panics.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus,
    SupportedConeT::{self, NonnegativeConeT, PSDTriangleConeT, ZeroConeT},
};
use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConicError {
    #[error("matrix is not Hermitian: max deviation {max_dev:.3e} exceeds {tol:.3e}")]
    NotHermitian { max_dev: f64, tol: f64 },
    #[error("program is empty: no variables or no constraints")]
    EmptyProgram,
    #[error("solver setup failed: {0}")]
    Setup(String),
}

/// Real embedding of an `n x n` Hermitian matrix as the symmetric `2n x 2n`
/// matrix `[[Re, -Im], [Im, Re]]`, which has the same spectrum with doubled
/// multiplicities.
pub fn hermitian_embed(h: &DMatrix<Complex64>, tol: f64) -> Result<DMatrix<f64>, ConicError> {
    let n = h.nrows();
    let mut max_dev = 0.0f64;
    for i in 0..n {
        for j in 0..=i {
            max_dev = max_dev.max((h[(i, j)] - h[(j, i)].conj()).norm());
        }
    }
    if h.ncols() != n || max_dev > tol {
        return Err(ConicError::NotHermitian { max_dev, tol });
    }
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let re = 0.5 * (h[(i, j)].re + h[(j, i)].re);
            let im = 0.5 * (h[(i, j)].im - h[(j, i)].im);
            out[(i, j)] = re;
            out[(n + i, n + j)] = re;
            out[(i, n + j)] = -im;
            out[(n + i, j)] = im;
        }
    }
    Ok(out)
}

/// Smallest eigenvalue of a Hermitian matrix, via the real embedding.
pub fn min_hermitian_eigenvalue(h: &DMatrix<Complex64>, tol: f64) -> Result<f64, ConicError> {
    let embed = hermitian_embed(h, tol)?;
    Ok(embed.symmetric_eigen().eigenvalues.min())
}

pub const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Packed length of the upper triangle of an `n x n` symmetric matrix.
pub fn svec_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Packed position of entry `(i, j)`, `i <= j`, in column-stacked order.
pub fn svec_slot(i: usize, j: usize) -> usize {
    debug_assert!(i <= j);
    j * (j + 1) / 2 + i
}

/// Packs a symmetric matrix: upper triangle column-wise, off-diagonal entries
/// scaled by `sqrt(2)`.
pub fn svec(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(svec_len(n));
    for j in 0..n {
        for i in 0..=j {
            out.push(if i == j { m[(i, j)] } else { SQRT2 * m[(i, j)] });
        }
    }
    out
}

/// Inverse of [`svec`].
pub fn unsvec(v: &[f64], n: usize) -> DMatrix<f64> {
    debug_assert_eq!(v.len(), svec_len(n));
    let mut out = DMatrix::zeros(n, n);
    let mut k = 0;
    for j in 0..n {
        for i in 0..=j {
            let val = if i == j { v[k] } else { v[k] / SQRT2 };
            out[(i, j)] = val;
            out[(j, i)] = val;
            k += 1;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarId(usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PsdId(usize);

#[derive(Debug, Clone, Copy)]
enum VarKind {
    /// Symmetric `n x n` matrix, stored svec-packed.
    Sym(usize),
    /// Plain vector of scalars.
    Vector(usize),
}

#[derive(Debug, Clone)]
struct VarDecl {
    name: String,
    kind: VarKind,
    offset: usize,
}

impl VarDecl {
    fn len(&self) -> usize {
        match self.kind {
            VarKind::Sym(n) => svec_len(n),
            VarKind::Vector(len) => len,
        }
    }
}

/// One semidefinite constraint `C + sum_k coeff_k x_k >= 0`, accumulated as
/// svec triplets.
#[derive(Debug, Clone)]
struct PsdCon {
    n: usize,
    constant: Vec<f64>,
    /// `(svec slot, variable column, coefficient)` on the packed expression.
    triplets: Vec<(usize, usize, f64)>,
}

#[derive(Debug, Clone)]
struct LinCon {
    terms: Vec<(usize, f64)>,
    constant: f64,
}

/// Conic program under construction. Columns are the concatenated packed
/// variables; rows are equalities, then nonnegativity rows, then the packed
/// semidefinite constraints, in declaration order.
#[derive(Debug, Clone, Default)]
pub struct ConicProgram {
    vars: Vec<VarDecl>,
    n_cols: usize,
    objective: Vec<(usize, f64)>,
    eqs: Vec<LinCon>,
    nonnegs: Vec<LinCon>,
    psds: Vec<PsdCon>,
}

impl ConicProgram {
    pub fn new() -> Self {
        Self::default()
    }

    /// Declares a symmetric `n x n` matrix variable.
    pub fn sym_var(&mut self, name: &str, n: usize) -> VarId {
        self.push_var(name, VarKind::Sym(n))
    }

    /// Declares a free vector variable of `len` scalars.
    pub fn vec_var(&mut self, name: &str, len: usize) -> VarId {
        self.push_var(name, VarKind::Vector(len))
    }

    fn push_var(&mut self, name: &str, kind: VarKind) -> VarId {
        let decl = VarDecl { name: name.to_string(), kind, offset: self.n_cols };
        self.n_cols += decl.len();
        self.vars.push(decl);
        VarId(self.vars.len() - 1)
    }

    /// Global column of one packed entry of a variable. For symmetric
    /// variables the packed value of an off-diagonal entry `(i, j)` is
    /// `sqrt(2)` times the matrix entry; equality and objective coefficients
    /// act on the packed value.
    pub fn col(&self, var: VarId, entry: PackedEntry) -> usize {
        let decl = &self.vars[var.0];
        match (decl.kind, entry) {
            (VarKind::Sym(n), PackedEntry::Sym(i, j)) => {
                assert!(i.max(j) < n, "entry out of range for {}", decl.name);
                decl.offset + svec_slot(i.min(j), i.max(j))
            }
            (VarKind::Vector(len), PackedEntry::Index(k)) => {
                assert!(k < len, "entry out of range for {}", decl.name);
                decl.offset + k
            }
            _ => panic!("entry kind mismatch for variable {}", decl.name),
        }
    }

    /// Adds `sum coeff * column` to the minimization objective.
    pub fn obj_add_terms(&mut self, terms: &[(usize, f64)]) {
        self.objective.extend_from_slice(terms);
    }

    /// Adds the Frobenius inner product `<m, X>` to the objective.
    pub fn obj_add_frobenius(&mut self, var: VarId, m: &DMatrix<f64>) {
        let decl = &self.vars[var.0];
        let VarKind::Sym(n) = decl.kind else {
            panic!("obj_add_frobenius requires a symmetric variable");
        };
        assert_eq!(m.nrows(), n);
        let packed = svec(m);
        let offset = decl.offset;
        self.objective
            .extend(packed.into_iter().enumerate().filter(|(_, v)| *v != 0.0).map(|(k, v)| (offset + k, v)));
    }

    /// Adds the equality `sum coeff * column + constant = 0`; returns the row
    /// index for dual lookup.
    pub fn add_eq(&mut self, terms: &[(usize, f64)], constant: f64) -> usize {
        self.eqs.push(LinCon { terms: terms.to_vec(), constant });
        self.eqs.len() - 1
    }

    /// Adds the inequality `sum coeff * column + constant >= 0`.
    pub fn add_nonneg(&mut self, terms: &[(usize, f64)], constant: f64) {
        self.nonnegs.push(LinCon { terms: terms.to_vec(), constant });
    }

    /// Packed columns and unit coefficients of `tr(X)` for a symmetric
    /// variable.
    pub fn trace_terms(&self, var: VarId) -> Vec<(usize, f64)> {
        let VarKind::Sym(n) = self.vars[var.0].kind else {
            panic!("trace_terms requires a symmetric variable");
        };
        (0..n).map(|i| (self.col(var, PackedEntry::Sym(i, i)), 1.0)).collect()
    }

    /// Opens a semidefinite constraint on an `n x n` expression initialized
    /// to the given constant matrix.
    pub fn add_psd(&mut self, constant: &DMatrix<f64>) -> PsdId {
        let n = constant.nrows();
        assert_eq!(constant.ncols(), n);
        self.psds.push(PsdCon { n, constant: svec(constant), triplets: Vec::new() });
        PsdId(self.psds.len() - 1)
    }

    /// Places `scale * X` into the expression as the diagonal block starting
    /// at `row0`.
    pub fn psd_add_sym_var(&mut self, psd: PsdId, var: VarId, row0: usize, scale: f64) {
        let decl = &self.vars[var.0];
        let VarKind::Sym(n) = decl.kind else {
            panic!("psd_add_sym_var requires a symmetric variable");
        };
        let offset = decl.offset;
        let con = &mut self.psds[psd.0];
        assert!(row0 + n <= con.n);
        for j in 0..n {
            for i in 0..=j {
                con.triplets.push((
                    svec_slot(row0 + i, row0 + j),
                    offset + svec_slot(i, j),
                    scale,
                ));
            }
        }
    }

    /// Places `scale * X` with entries relocated by `map`: variable entry
    /// `(i, j)` lands at expression entry `map(i, j)`. The map must send
    /// distinct index pairs to distinct pairs and diagonal entries to the
    /// diagonal (an entry permutation, e.g. a partial transpose).
    pub fn psd_add_sym_var_mapped(
        &mut self,
        psd: PsdId,
        var: VarId,
        scale: f64,
        map: impl Fn(usize, usize) -> (usize, usize),
    ) {
        let decl = &self.vars[var.0];
        let VarKind::Sym(n) = decl.kind else {
            panic!("psd_add_sym_var_mapped requires a symmetric variable");
        };
        let offset = decl.offset;
        let con = &mut self.psds[psd.0];
        for j in 0..n {
            for i in 0..=j {
                let (ti, tj) = map(i, j);
                assert!((ti == tj) == (i == j), "entry map must preserve diagonality");
                assert!(ti.max(tj) < con.n);
                con.triplets.push((
                    svec_slot(ti.min(tj), ti.max(tj)),
                    offset + svec_slot(i, j),
                    scale,
                ));
            }
        }
    }

    /// Like [`psd_add_sym_var_mapped`](Self::psd_add_sym_var_mapped), but the
    /// map also chooses the target constraint per entry: variable entry
    /// `(i, j)` lands at entry `(ti, tj)` of whichever expression the map
    /// names. Same injectivity and diagonality requirements, now across all
    /// named expressions together.
    pub fn psd_scatter_sym_var(
        &mut self,
        var: VarId,
        scale: f64,
        map: impl Fn(usize, usize) -> (PsdId, usize, usize),
    ) {
        let decl = &self.vars[var.0];
        let VarKind::Sym(n) = decl.kind else {
            panic!("psd_scatter_sym_var requires a symmetric variable");
        };
        let offset = decl.offset;
        for j in 0..n {
            for i in 0..=j {
                let (target, ti, tj) = map(i, j);
                let con = &mut self.psds[target.0];
                assert!((ti == tj) == (i == j), "entry map must preserve diagonality");
                assert!(ti.max(tj) < con.n);
                con.triplets.push((
                    svec_slot(ti.min(tj), ti.max(tj)),
                    offset + svec_slot(i, j),
                    scale,
                ));
            }
        }
    }

    /// Adds `column_value * M` to the expression, where `M` is given by its
    /// upper-triangle triplets `(i, j, value)` with `i <= j`.
    pub fn psd_add_col_times_mat(&mut self, psd: PsdId, col: usize, upper: &[(usize, usize, f64)]) {
        let con = &mut self.psds[psd.0];
        for &(i, j, v) in upper {
            assert!(i <= j && j < con.n);
            let coeff = if i == j { v } else { SQRT2 * v };
            con.triplets.push((svec_slot(i, j), col, coeff));
        }
    }

    fn row_layout(&self) -> RowLayout {
        let mut psd_starts = Vec::with_capacity(self.psds.len());
        let mut row = self.eqs.len() + self.nonnegs.len();
        for con in &self.psds {
            psd_starts.push(row);
            row += svec_len(con.n);
        }
        RowLayout {
            nonneg_start: self.eqs.len(),
            psd_starts,
            psd_dims: self.psds.iter().map(|c| c.n).collect(),
            total: row,
        }
    }

    /// Solves the program, minimizing the objective.
    pub fn solve(&self, options: &SolveOptions) -> Result<SolveReport, ConicError> {
        let layout = self.row_layout();
        if self.n_cols == 0 || layout.total == 0 {
            return Err(ConicError::EmptyProgram);
        }

        // Clarabel's geometry: A x + s = b with s in the cone product. A PSD
        // expression C + sum coeff x >= 0 becomes s = b - A x with
        // b = svec(C) and A carrying the negated coefficients; equalities and
        // nonnegativity rows follow the same sign convention.
        let mut b = vec![0.0; layout.total];
        let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
        for (k, eq) in self.eqs.iter().enumerate() {
            b[k] = eq.constant;
            triplets.extend(eq.terms.iter().map(|&(col, c)| (k, col, -c)));
        }
        for (k, ineq) in self.nonnegs.iter().enumerate() {
            let row = layout.nonneg_start + k;
            b[row] = ineq.constant;
            triplets.extend(ineq.terms.iter().map(|&(col, c)| (row, col, -c)));
        }
        for (con, &start) in self.psds.iter().zip(&layout.psd_starts) {
            b[start..start + svec_len(con.n)].copy_from_slice(&con.constant);
            triplets.extend(con.triplets.iter().map(|&(slot, col, c)| (start + slot, col, -c)));
        }

        let a = csc_from_triplets(layout.total, self.n_cols, &mut triplets);
        let p = CscMatrix::new(self.n_cols, self.n_cols, vec![0; self.n_cols + 1], vec![], vec![]);
        let mut q = vec![0.0; self.n_cols];
        for &(col, c) in &self.objective {
            q[col] += c;
        }

        let mut cones: Vec<SupportedConeT<f64>> = Vec::new();
        if !self.eqs.is_empty() {
            cones.push(ZeroConeT(self.eqs.len()));
        }
        if !self.nonnegs.is_empty() {
            cones.push(NonnegativeConeT(self.nonnegs.len()));
        }
        cones.extend(self.psds.iter().map(|c| PSDTriangleConeT(c.n)));

        let mut settings = DefaultSettingsBuilder::default();
        settings.verbose(options.verbose);
        if let Some(it) = options.max_iter {
            settings.max_iter(it);
        }
        if let Some(gap) = options.tol_gap {
            settings.tol_gap_abs(gap).tol_gap_rel(gap);
        }
        if let Some(feas) = options.tol_feas {
            settings.tol_feas(feas);
        }
        let settings = settings.build().map_err(|e| ConicError::Setup(e.to_string()))?;
        let mut solver = DefaultSolver::new(&p, &q, &a, &b, &cones, settings)
            .map_err(|e| ConicError::Setup(format!("{e:?}")))?;
        solver.solve();

        let sol = &solver.solution;
        let (status, message) = classify(sol.status);
        Ok(SolveReport {
            status,
            message,
            objective: sol.obj_val,
            duality_gap: (sol.obj_val - sol.obj_val_dual).abs(),
            iterations: sol.iterations,
            solve_time: sol.solve_time,
            primal: sol.x.clone(),
            dual: sol.z.clone(),
            vars: self.vars.clone(),
            layout,
        })
    }
}

/// Which packed entry of a variable [`ConicProgram::col`] should address.
#[derive(Debug, Clone, Copy)]
pub enum PackedEntry {
    /// Entry `(i, j)` of a symmetric matrix variable (order-insensitive).
    Sym(usize, usize),
    /// Entry `k` of a vector variable.
    Index(usize),
}

#[derive(Debug, Clone)]
struct RowLayout {
    nonneg_start: usize,
    psd_starts: Vec<usize>,
    psd_dims: Vec<usize>,
    total: usize,
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub verbose: bool,
    pub max_iter: Option<u32>,
    /// Absolute and relative duality-gap target.
    pub tol_gap: Option<f64>,
    /// Primal/dual feasibility target.
    pub tol_feas: Option<f64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        // 1e-7 rather than the backend's 1e-8: interior-point iterations
        // stall against static regularization just above 1e-8 on degenerate
        // optima, and every downstream verdict has margin tolerance >= 1e-7.
        SolveOptions { verbose: false, max_iter: Some(200), tol_gap: Some(1e-7), tol_feas: Some(1e-7) }
    }
}

/// Terminal status of a solve, collapsed to the four cases callers act on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    /// Converged to the reported optimum.
    Optimal,
    /// A certificate of primal infeasibility was found.
    Infeasible,
    /// The solver stopped near a solution or near a certificate without
    /// reaching tolerance; callers must not coerce this to a verdict.
    Indeterminate,
    /// Iteration limit, numerical breakdown, or an unbounded program.
    Error,
}

fn classify(status: SolverStatus) -> (SolveStatus, String) {
    let mapped = match status {
        SolverStatus::Solved => SolveStatus::Optimal,
        SolverStatus::PrimalInfeasible => SolveStatus::Infeasible,
        SolverStatus::AlmostSolved
        | SolverStatus::AlmostPrimalInfeasible
        | SolverStatus::AlmostDualInfeasible => SolveStatus::Indeterminate,
        _ => SolveStatus::Error,
    };
    (mapped, format!("{status:?}"))
}

/// Solution bundle: terminal status, objective, duality gap, and accessors
/// for primal variable values and per-constraint duals.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub message: String,
    pub objective: f64,
    pub duality_gap: f64,
    pub iterations: u32,
    pub solve_time: f64,
    primal: Vec<f64>,
    dual: Vec<f64>,
    vars: Vec<VarDecl>,
    layout: RowLayout,
}

impl SolveReport {
    /// Value of a symmetric matrix variable, unpacked.
    pub fn sym_value(&self, var: VarId) -> DMatrix<f64> {
        let decl = &self.vars[var.0];
        let VarKind::Sym(n) = decl.kind else {
            panic!("sym_value requires a symmetric variable, got {}", decl.name);
        };
        unsvec(&self.primal[decl.offset..decl.offset + svec_len(n)], n)
    }

    /// Value of a vector variable.
    pub fn vec_value(&self, var: VarId) -> Vec<f64> {
        let decl = &self.vars[var.0];
        let VarKind::Vector(len) = decl.kind else {
            panic!("vec_value requires a vector variable, got {}", decl.name);
        };
        self.primal[decl.offset..decl.offset + len].to_vec()
    }

    /// Dual multiplier of an equality row.
    pub fn eq_dual(&self, row: usize) -> f64 {
        self.dual[row]
    }

    /// Dual matrix of a semidefinite constraint (an element of the cone when
    /// the solve converged).
    pub fn psd_dual(&self, psd: PsdId) -> DMatrix<f64> {
        let start = self.layout.psd_starts[psd.0];
        let n = self.layout.psd_dims[psd.0];
        unsvec(&self.dual[start..start + svec_len(n)], n)
    }
}

fn csc_from_triplets(
    m: usize,
    n: usize,
    triplets: &mut Vec<(usize, usize, f64)>,
) -> CscMatrix<f64> {
    triplets.sort_by_key(|&(row, col, _)| (col, row));
    let mut colptr = vec![0usize; n + 1];
    let mut rowval = Vec::with_capacity(triplets.len());
    let mut nzval: Vec<f64> = Vec::with_capacity(triplets.len());
    let mut counts = vec![0usize; n];
    let mut idx = 0;
    while idx < triplets.len() {
        let (row, col, mut v) = triplets[idx];
        idx += 1;
        while idx < triplets.len() && triplets[idx].0 == row && triplets[idx].1 == col {
            v += triplets[idx].2;
            idx += 1;
        }
        rowval.push(row);
        nzval.push(v);
        counts[col] += 1;
    }
    for c in 0..n {
        colptr[c + 1] = colptr[c] + counts[c];
    }
    CscMatrix::new(m, n, colptr, rowval, nzval)
}
