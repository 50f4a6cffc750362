//! Gaussian state moments: covariance matrices, mean vectors, and the
//! standard state families.
//!
//! Conventions: quadratures are ordered x-block-first, `(x_1..x_N, p_1..p_N)`
//! ([`Ordering::XpBlock`]), the covariance matrix is
//! `cm_jk = <{dq_j, dq_k}>` so the vacuum covariance matrix is the identity,
//! and a coherent state of amplitude `alpha` has mean `(sqrt(2) alpha, 0)`.
//! A symmetric matrix `cm` is a physical covariance matrix iff
//! `cm + i*Omega >= 0` with [`symplectic_form`] `Omega`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default numerical tolerances for moment-level checks.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    /// Maximum tolerated entrywise asymmetry of a covariance matrix.
    pub symmetry: f64,
    /// Eigenvalue floor below which `cm + i*Omega` counts as non-positive.
    pub psd: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { symmetry: 1e-12, psd: 1e-9 }
    }
}

#[derive(Debug, Error)]
pub enum MomentsError {
    #[error("covariance matrix must be square with even dimension, got {rows}x{cols}")]
    BadShape { rows: usize, cols: usize },
    #[error("covariance matrix asymmetry {max_asym:.3e} exceeds tolerance {tol:.3e}")]
    Asymmetric { max_asym: f64, tol: f64 },
    #[error("mean vector length {len} does not match matrix dimension {expected}")]
    MeanLength { len: usize, expected: usize },
    #[error("parameter `{name}` = {value} is out of range: {constraint}")]
    OutOfRange { name: &'static str, value: f64, constraint: &'static str },
    #[error("family `{family}` requires parameter `{name}`")]
    MissingParameter { family: Family, name: &'static str },
    #[error("mixture must be nonempty with positive weights summing to 1, got sum {0}")]
    BadWeights(f64),
    #[error("mixture components must share mode count and ordering")]
    MixtureShape,
    #[error("`{0:?}` is not a permutation of the modes")]
    BadPermutation(Vec<usize>),
    #[error("embedding slots {slots:?} invalid: need {k} distinct slots below {n}")]
    BadSlots { slots: Vec<usize>, k: usize, n: usize },
    #[error("operation requires {expected}-mode moments, got {got}")]
    ModeCount { expected: usize, got: usize },
    #[error("unknown family `{0}`")]
    UnknownFamily(String),
}

/// Quadrature ordering of a moment description.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Ordering {
    /// `(x_1..x_N, p_1..p_N)` — the default everywhere outside the Fock
    /// extraction internals.
    #[serde(rename = "xp_block")]
    XpBlock,
    /// `(p_1..p_N, x_1..x_N)` — used internally by the Hermite pipeline.
    #[serde(rename = "ppxx")]
    Ppxx,
}

/// One of the three bipartitions of modes `(A, B, C)`, named by the isolated
/// mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Bipartition {
    A,
    B,
    C,
}

impl Bipartition {
    pub const ALL: [Bipartition; 3] = [Bipartition::A, Bipartition::B, Bipartition::C];

    /// Index (0, 1, 2) of the isolated mode.
    pub fn isolated_mode(self) -> usize {
        match self {
            Bipartition::A => 0,
            Bipartition::B => 1,
            Bipartition::C => 2,
        }
    }

    /// Indices of the two modes on the other side of the cut.
    pub fn pair(self) -> [usize; 2] {
        match self {
            Bipartition::A => [1, 2],
            Bipartition::B => [0, 2],
            Bipartition::C => [0, 1],
        }
    }
}

impl std::fmt::Display for Bipartition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Bipartition::A => write!(f, "A|BC"),
            Bipartition::B => write!(f, "B|AC"),
            Bipartition::C => write!(f, "C|AB"),
        }
    }
}

/// Second-moment description of a Gaussian state.
///
/// The covariance matrix is stored exactly symmetric: the constructor checks
/// the input's asymmetry against a tolerance and then mirrors the lower
/// triangle, so downstream spectral code never sees asymmetry noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMoments", into = "RawMoments")]
pub struct GaussianMoments {
    cm: DMatrix<f64>,
    mean: DVector<f64>,
    ordering: Ordering,
    n_modes: usize,
}

/// Wire format: row-major covariance matrix, mean vector, ordering tag.
#[derive(Serialize, Deserialize)]
struct RawMoments {
    n_modes: usize,
    ordering: Ordering,
    cm: Vec<Vec<f64>>,
    mean: Vec<f64>,
}

impl TryFrom<RawMoments> for GaussianMoments {
    type Error = MomentsError;

    fn try_from(raw: RawMoments) -> Result<Self, MomentsError> {
        let dim = 2 * raw.n_modes;
        if raw.cm.len() != dim || raw.cm.iter().any(|row| row.len() != dim) {
            return Err(MomentsError::BadShape {
                rows: raw.cm.len(),
                cols: raw.cm.first().map_or(0, Vec::len),
            });
        }
        let cm = DMatrix::from_fn(dim, dim, |i, j| raw.cm[i][j]);
        let mut m = GaussianMoments::new(cm, DVector::from_vec(raw.mean))?;
        m.ordering = raw.ordering;
        Ok(m)
    }
}

impl From<GaussianMoments> for RawMoments {
    fn from(m: GaussianMoments) -> RawMoments {
        let dim = 2 * m.n_modes;
        RawMoments {
            n_modes: m.n_modes,
            ordering: m.ordering,
            cm: (0..dim).map(|i| (0..dim).map(|j| m.cm[(i, j)]).collect()).collect(),
            mean: m.mean.iter().copied().collect(),
        }
    }
}

impl GaussianMoments {
    /// Builds a moment description in [`Ordering::XpBlock`], validating shape
    /// and symmetry (default tolerances).
    pub fn new(cm: DMatrix<f64>, mean: DVector<f64>) -> Result<Self, MomentsError> {
        Self::with_tolerances(cm, mean, &Tolerances::default())
    }

    /// Like [`GaussianMoments::new`] with an explicit symmetry tolerance.
    pub fn with_tolerances(
        cm: DMatrix<f64>,
        mean: DVector<f64>,
        tol: &Tolerances,
    ) -> Result<Self, MomentsError> {
        let (rows, cols) = cm.shape();
        if rows != cols || rows == 0 || rows % 2 != 0 {
            return Err(MomentsError::BadShape { rows, cols });
        }
        if mean.len() != rows {
            return Err(MomentsError::MeanLength { len: mean.len(), expected: rows });
        }
        let mut max_asym = 0.0f64;
        for i in 0..rows {
            for j in 0..i {
                max_asym = max_asym.max((cm[(i, j)] - cm[(j, i)]).abs());
            }
        }
        if max_asym > tol.symmetry {
            return Err(MomentsError::Asymmetric { max_asym, tol: tol.symmetry });
        }
        let mut sym = cm;
        for i in 0..rows {
            for j in 0..i {
                let v = 0.5 * (sym[(i, j)] + sym[(j, i)]);
                sym[(i, j)] = v;
                sym[(j, i)] = v;
            }
        }
        Ok(GaussianMoments { cm: sym, mean, ordering: Ordering::XpBlock, n_modes: rows / 2 })
    }

    /// Zero-mean state from a covariance matrix alone.
    pub fn from_cm(cm: DMatrix<f64>) -> Result<Self, MomentsError> {
        let dim = cm.nrows();
        Self::new(cm, DVector::zeros(dim))
    }

    /// `n_modes`-mode vacuum: identity covariance matrix, zero mean.
    pub fn vacuum(n_modes: usize) -> Self {
        GaussianMoments {
            cm: DMatrix::identity(2 * n_modes, 2 * n_modes),
            mean: DVector::zeros(2 * n_modes),
            ordering: Ordering::XpBlock,
            n_modes,
        }
    }

    pub fn cm(&self) -> &DMatrix<f64> {
        &self.cm
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn ordering(&self) -> Ordering {
        self.ordering
    }

    /// Same state re-expressed in the other quadrature ordering.
    pub fn reordered(&self, target: Ordering) -> Self {
        if self.ordering == target {
            return self.clone();
        }
        // Either direction swaps the x and p halves.
        let n = self.n_modes;
        let dim = 2 * n;
        let half = |i: usize| if i < n { i + n } else { i - n };
        let cm = DMatrix::from_fn(dim, dim, |i, j| self.cm[(half(i), half(j))]);
        let mean = DVector::from_fn(dim, |i, _| self.mean[half(i)]);
        GaussianMoments { cm, mean, ordering: target, n_modes: n }
    }

    /// Relabels modes: mode `i` of the result is mode `perm[i]` of `self`.
    pub fn permute_modes(&self, perm: &[usize]) -> Result<Self, MomentsError> {
        let n = self.n_modes;
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p.min(n - 1)], true)) {
            return Err(MomentsError::BadPermutation(perm.to_vec()));
        }
        let dim = 2 * n;
        // Quadrature index of (mode, x/p half) under the current ordering.
        let q = |i: usize| {
            let (mode, is_p) = (i % n, i >= n);
            let src = perm[mode];
            if is_p {
                src + n
            } else {
                src
            }
        };
        let cm = DMatrix::from_fn(dim, dim, |i, j| self.cm[(q(i), q(j))]);
        let mean = DVector::from_fn(dim, |i, _| self.mean[q(i)]);
        Ok(GaussianMoments { cm, mean, ordering: self.ordering, n_modes: n })
    }

    /// Tensor product at the moment level: modes of `self` first, then modes
    /// of `other`. Both must use [`Ordering::XpBlock`].
    pub fn direct_sum(&self, other: &GaussianMoments) -> Result<Self, MomentsError> {
        if self.ordering != Ordering::XpBlock || other.ordering != Ordering::XpBlock {
            return Err(MomentsError::MixtureShape);
        }
        let (m, n) = (self.n_modes, other.n_modes);
        let total = m + n;
        // Map a combined quadrature index to (source matrix, source index).
        let locate = |i: usize| -> (bool, usize) {
            let (mode, is_p) = (i % total, i >= total);
            if mode < m {
                (true, if is_p { mode + m } else { mode })
            } else {
                (false, if is_p { mode - m + n } else { mode - m })
            }
        };
        let cm = DMatrix::from_fn(2 * total, 2 * total, |i, j| {
            let (ai, qi) = locate(i);
            let (aj, qj) = locate(j);
            if ai != aj {
                0.0
            } else if ai {
                self.cm[(qi, qj)]
            } else {
                other.cm[(qi, qj)]
            }
        });
        let mean = DVector::from_fn(2 * total, |i, _| {
            let (a, q) = locate(i);
            if a {
                self.mean[q]
            } else {
                other.mean[q]
            }
        });
        Ok(GaussianMoments { cm, mean, ordering: Ordering::XpBlock, n_modes: total })
    }

    /// Embeds `self` into an `n_total`-mode state, placing mode `t` at slot
    /// `slots[t]` and the vacuum in every remaining slot.
    pub fn embed_modes(&self, slots: &[usize], n_total: usize) -> Result<Self, MomentsError> {
        let k = self.n_modes;
        let mut taken = vec![false; n_total];
        if slots.len() != k
            || k > n_total
            || slots.iter().any(|&s| s >= n_total || std::mem::replace(&mut taken[s.min(n_total - 1)], true))
        {
            return Err(MomentsError::BadSlots { slots: slots.to_vec(), k, n: n_total });
        }
        let combined = self.direct_sum(&GaussianMoments::vacuum(n_total - k))?;
        // Combined mode order: self's modes 0..k, vacuum modes k.. — route
        // each to its target slot.
        let mut perm = vec![usize::MAX; n_total];
        let mut next_vacuum = k;
        for slot in 0..n_total {
            perm[slot] = match slots.iter().position(|&s| s == slot) {
                Some(t) => t,
                None => {
                    let v = next_vacuum;
                    next_vacuum += 1;
                    v
                }
            };
        }
        combined.permute_modes(&perm)
    }
}

/// Symplectic form `Omega = [[0, I], [-I, 0]]` in x-block-first ordering.
pub fn symplectic_form(n_modes: usize) -> DMatrix<f64> {
    let n = n_modes;
    DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        if i < n && j == i + n {
            1.0
        } else if i >= n && j == i - n {
            -1.0
        } else {
            0.0
        }
    })
}

/// Outcome of the uncertainty-relation check `cm + i*Omega >= 0`.
#[derive(Debug, Clone, Copy)]
pub struct CmValidity {
    /// Smallest eigenvalue of the Hermitian matrix `cm + i*Omega`.
    pub min_eigenvalue: f64,
    /// `min_eigenvalue >= -tol.psd`.
    pub is_physical: bool,
}

/// Tests whether a covariance matrix satisfies the uncertainty relation.
///
/// The Hermitian matrix `cm + i*Omega` is diagonalized through its real
/// embedding `[[cm, -Omega], [Omega, cm]]`, which has the same spectrum
/// (doubled multiplicities).
pub fn is_valid_cm(m: &GaussianMoments, tol: &Tolerances) -> CmValidity {
    min_uncertainty_eigenvalue(m.cm()).into_validity(tol)
}

pub(crate) struct UncertaintyEig(pub f64);

impl UncertaintyEig {
    fn into_validity(self, tol: &Tolerances) -> CmValidity {
        CmValidity { min_eigenvalue: self.0, is_physical: self.0 >= -tol.psd }
    }
}

pub(crate) fn min_uncertainty_eigenvalue(cm: &DMatrix<f64>) -> UncertaintyEig {
    let dim = cm.nrows();
    let omega = symplectic_form(dim / 2);
    let mut embed = DMatrix::zeros(2 * dim, 2 * dim);
    embed.view_mut((0, 0), (dim, dim)).copy_from(cm);
    embed.view_mut((dim, dim), (dim, dim)).copy_from(cm);
    embed.view_mut((0, dim), (dim, dim)).copy_from(&(-&omega));
    embed.view_mut((dim, 0), (dim, dim)).copy_from(&omega);
    let eig = embed.symmetric_eigen();
    UncertaintyEig(eig.eigenvalues.min())
}

/// Two-mode squeezed vacuum with squeezing parameter `r >= 0`.
pub fn tmsv_cm(r: f64) -> Result<GaussianMoments, MomentsError> {
    require_nonneg("r", r)?;
    let (a, c) = ((2.0 * r).cosh(), (2.0 * r).sinh());
    let cm = DMatrix::from_row_slice(
        4,
        4,
        &[
            a, c, 0.0, 0.0, //
            c, a, 0.0, 0.0, //
            0.0, 0.0, a, -c, //
            0.0, 0.0, -c, a,
        ],
    );
    GaussianMoments::from_cm(cm)
}

/// Single-mode squeezed vacuum: `diag(e^{2r}, e^{-2r})`, `r >= 0`.
pub fn smsv_cm(r: f64) -> Result<GaussianMoments, MomentsError> {
    require_nonneg("r", r)?;
    GaussianMoments::from_cm(DMatrix::from_diagonal(&DVector::from_vec(vec![
        (2.0 * r).exp(),
        (-2.0 * r).exp(),
    ])))
}

/// Single-mode thermal state with `nbar >= 0` mean photons.
pub fn thermal_cm(nbar: f64) -> Result<GaussianMoments, MomentsError> {
    require_nonneg("nbar", nbar)?;
    GaussianMoments::from_cm(DMatrix::identity(2, 2) * (2.0 * nbar + 1.0))
}

/// Single-mode coherent state of real amplitude `alpha`: vacuum covariance,
/// mean `(sqrt(2) alpha, 0)`.
pub fn coherent_moments(alpha: f64) -> Result<GaussianMoments, MomentsError> {
    require_finite("alpha", alpha)?;
    GaussianMoments::new(
        DMatrix::identity(2, 2),
        DVector::from_vec(vec![std::f64::consts::SQRT_2 * alpha, 0.0]),
    )
}

/// Three-mode squeezed (GHZ-type) state, fully symmetric, `r >= 0`.
pub fn ghz_cm(r: f64) -> Result<GaussianMoments, MomentsError> {
    require_nonneg("r", r)?;
    let (ep, em) = ((2.0 * r).exp(), (-2.0 * r).exp());
    let (a_x, c_x) = ((ep + 2.0 * em) / 3.0, (ep - em) / 3.0);
    let (a_p, c_p) = ((em + 2.0 * ep) / 3.0, (em - ep) / 3.0);
    let block = |diag: f64, off: f64| {
        DMatrix::from_fn(3, 3, |i, j| if i == j { diag } else { off })
    };
    let mut cm = DMatrix::zeros(6, 6);
    cm.view_mut((0, 0), (3, 3)).copy_from(&block(a_x, c_x));
    cm.view_mut((3, 3), (3, 3)).copy_from(&block(a_p, c_p));
    GaussianMoments::from_cm(cm)
}

/// One component of a Gaussian mixture.
#[derive(Debug, Clone)]
pub struct MixtureComponent {
    pub weight: f64,
    pub moments: GaussianMoments,
}

/// Moments of the statistical mixture `sum_i w_i rho_i`.
///
/// Means combine linearly; covariance matrices pick up the spread of the
/// component means:
/// `cm = sum_i w_i (cm_i + 2 d_i d_i^T) - 2 d d^T` with `d = sum_i w_i d_i`.
pub fn mix_gaussian_moments(
    components: &[MixtureComponent],
) -> Result<GaussianMoments, MomentsError> {
    let first = components.first().ok_or(MomentsError::BadWeights(0.0))?;
    let sum: f64 = components.iter().map(|c| c.weight).sum();
    if components.iter().any(|c| !(c.weight > 0.0)) || (sum - 1.0).abs() > 1e-12 {
        return Err(MomentsError::BadWeights(sum));
    }
    let (n, ordering) = (first.moments.n_modes, first.moments.ordering);
    if components
        .iter()
        .any(|c| c.moments.n_modes != n || c.moments.ordering != ordering)
    {
        return Err(MomentsError::MixtureShape);
    }
    let dim = 2 * n;
    let mut mean = DVector::zeros(dim);
    for c in components {
        mean.axpy(c.weight, &c.moments.mean, 1.0);
    }
    let mut cm = DMatrix::zeros(dim, dim);
    for c in components {
        cm += c.weight * (&c.moments.cm + 2.0 * &c.moments.mean * c.moments.mean.transpose());
    }
    cm -= 2.0 * &mean * mean.transpose();
    let mut out = GaussianMoments::new(cm, mean)?;
    out.ordering = ordering;
    Ok(out)
}

/// The five built-in three-mode state families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// Equal mixture of a two-mode squeezed vacuum paired with a third mode
    /// in the vacuum, over the three placements of the pair.
    Vac,
    /// Same mixture with the third mode single-mode squeezed by the same `r`.
    Smsv,
    /// Same mixture with the third mode thermal (`nbar`).
    Thermal,
    /// Same mixture with the third mode coherent (`alpha`); the family is
    /// defined with the overall mean removed, so only the covariance spread
    /// of the displacements remains.
    Coherent,
    /// Three-mode squeezed state mixed with the vacuum: `eta` times the pure
    /// state plus `1 - eta` times the identity covariance.
    NoisyGhz,
}

impl Family {
    pub const ALL: [Family; 5] =
        [Family::Vac, Family::Smsv, Family::Thermal, Family::Coherent, Family::NoisyGhz];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Vac => "vac",
            Family::Smsv => "smsv",
            Family::Thermal => "thermal",
            Family::Coherent => "coherent",
            Family::NoisyGhz => "noisy-ghz",
        }
    }

    /// Name of the second parameter, if the family has one.
    pub fn second_param(self) -> Option<&'static str> {
        match self {
            Family::Vac | Family::Smsv => None,
            Family::Thermal => Some("nbar"),
            Family::Coherent => Some("alpha"),
            Family::NoisyGhz => Some("eta"),
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Family {
    type Err = MomentsError;

    fn from_str(s: &str) -> Result<Self, MomentsError> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "vac" => Ok(Family::Vac),
            "smsv" => Ok(Family::Smsv),
            "thermal" => Ok(Family::Thermal),
            "coherent" => Ok(Family::Coherent),
            "noisy-ghz" | "ghz" => Ok(Family::NoisyGhz),
            other => Err(MomentsError::UnknownFamily(other.to_string())),
        }
    }
}

/// Parameter bundle for [`family_moments`]. `r` is always required; the
/// remaining fields are consulted per family.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FamilyParams {
    pub r: f64,
    pub nbar: Option<f64>,
    pub alpha: Option<f64>,
    pub eta: Option<f64>,
}

impl FamilyParams {
    pub fn r(r: f64) -> Self {
        FamilyParams { r, ..Default::default() }
    }

    /// The family's second parameter value, if any.
    pub fn second(&self, family: Family) -> Option<f64> {
        match family {
            Family::Vac | Family::Smsv => None,
            Family::Thermal => self.nbar,
            Family::Coherent => self.alpha,
            Family::NoisyGhz => self.eta,
        }
    }

    /// Returns a copy with the family's second parameter set to `value`.
    pub fn with_second(&self, family: Family, value: f64) -> Self {
        let mut out = *self;
        match family {
            Family::Vac | Family::Smsv => {}
            Family::Thermal => out.nbar = Some(value),
            Family::Coherent => out.alpha = Some(value),
            Family::NoisyGhz => out.eta = Some(value),
        }
        out
    }
}

/// Moments of a named family at the given parameters. All families are
/// zero-mean three-mode states.
pub fn family_moments(
    family: Family,
    params: &FamilyParams,
) -> Result<GaussianMoments, MomentsError> {
    require_nonneg("r", params.r)?;
    let r = params.r;
    let need = |value: Option<f64>, name: &'static str| {
        value.ok_or(MomentsError::MissingParameter { family, name })
    };
    match family {
        Family::Vac => mix_pair_placements(r, &GaussianMoments::vacuum(1)),
        Family::Smsv => mix_pair_placements(r, &smsv_cm(r)?),
        Family::Thermal => {
            let nbar = need(params.nbar, "nbar")?;
            mix_pair_placements(r, &thermal_cm(nbar)?)
        }
        Family::Coherent => {
            let alpha = need(params.alpha, "alpha")?;
            require_finite("alpha", alpha)?;
            let mut m = mix_pair_placements(r, &coherent_moments(alpha)?)?;
            m.mean.fill(0.0);
            Ok(m)
        }
        Family::NoisyGhz => {
            let eta = need(params.eta, "eta")?;
            if !(0.0..=1.0).contains(&eta) {
                return Err(MomentsError::OutOfRange {
                    name: "eta",
                    value: eta,
                    constraint: "must lie in [0, 1]",
                });
            }
            let ghz = ghz_cm(r)?;
            if eta == 0.0 {
                Ok(GaussianMoments::vacuum(3))
            } else if eta == 1.0 {
                Ok(ghz)
            } else {
                mix_gaussian_moments(&[
                    MixtureComponent { weight: eta, moments: ghz },
                    MixtureComponent { weight: 1.0 - eta, moments: GaussianMoments::vacuum(3) },
                ])
            }
        }
    }
}

/// Equal mixture over the three placements of `tmsv(r)` on a mode pair, with
/// `third` on the remaining mode.
fn mix_pair_placements(
    r: f64,
    third: &GaussianMoments,
) -> Result<GaussianMoments, MomentsError> {
    let base = tmsv_cm(r)?.direct_sum(third)?;
    // Modes of `base`: (t1, t2, third). Place the pair on (A,B), (A,C), (B,C).
    let placements = [[0usize, 1, 2], [0, 2, 1], [2, 0, 1]];
    let components = placements
        .iter()
        .map(|perm| {
            Ok(MixtureComponent {
                weight: 1.0 / 3.0,
                moments: base.permute_modes(perm)?,
            })
        })
        .collect::<Result<Vec<_>, MomentsError>>()?;
    mix_gaussian_moments(&components)
}

fn require_nonneg(name: &'static str, value: f64) -> Result<(), MomentsError> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(MomentsError::OutOfRange { name, value, constraint: "must be finite and >= 0" })
    }
}

fn require_finite(name: &'static str, value: f64) -> Result<(), MomentsError> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(MomentsError::OutOfRange { name, value, constraint: "must be finite" })
    }
}
