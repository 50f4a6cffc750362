//! Entanglement certification for three-mode Gaussian states.
//!
//! The library works at two levels that cross-check each other:
//!
//! - **Covariance-matrix level** ([`moments`], [`separability`]): states are
//!   second-moment descriptions `(cm, mean)` with the convention that the
//!   vacuum covariance matrix is the identity. Partial transposition acts as a
//!   momentum sign flip, so positivity of the partially transposed state is a
//!   spectral test, and biseparability of the covariance matrix is a
//!   semidefinite feasibility problem ([`separability::cm_bisep_feasibility`]).
//! - **Fock-space level** ([`fock`], [`witness`]): finite photon-number blocks
//!   of the density matrix are extracted analytically from the moments by two
//!   independent pipelines (Husimi-function derivatives and multidimensional
//!   Hermite polynomials), then fed to density-matrix criteria — closed-form
//!   inequalities and a fully decomposable entanglement witness obtained by
//!   semidefinite programming.
//!
//! [`scan`] sweeps state families over parameter grids with a stack of
//! detectors, bisects detection thresholds, and renders CSV/JSON/SVG reports.
//! All semidefinite programs go through the small interior-point wrapper in
//! [`conic`].

pub mod conic;
pub mod fock;
pub mod moments;
pub mod scan;
pub mod separability;
pub mod witness;

pub use moments::{
    family_moments, Bipartition, Family, FamilyParams, GaussianMoments, MomentsError, Ordering,
    Tolerances,
};
