//! Separability tests at the covariance-matrix level.
//!
//! Partial transposition of a Gaussian state is the momentum sign flip
//! `cm -> L_k cm L_k` on the isolated mode of a bipartition. The transposed
//! matrix violates the uncertainty relation (`cm + i*Omega` not positive)
//! exactly when the state is entangled across that `1|2` cut, so full
//! inseparability of a three-mode state is three spectral tests. On top of
//! that, [`cm_bisep_feasibility`] decides by semidefinite programming whether
//! the covariance matrix admits a convex split `cm >= sum_i K_i` into parts
//! compatible with the three cuts — when it does not, the state is genuinely
//! multipartite entangled, and a dual witness matrix certifies it.

use crate::conic::{ConicError, ConicProgram, PackedEntry, SolveOptions, SolveStatus};
use crate::moments::{
    min_uncertainty_eigenvalue, symplectic_form, Bipartition, GaussianMoments, MomentsError,
    Tolerances,
};
use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SepError {
    #[error(transparent)]
    Moments(#[from] MomentsError),
    #[error(transparent)]
    Conic(#[from] ConicError),
    #[error("operation requires a three-mode state, got {0} modes")]
    NotThreeMode(usize),
    #[error("r = {0} is outside the domain (0, 1.2428) of the coherent-family boundary")]
    CoherentDomain(f64),
    #[error("biseparability program did not reach a conclusive status: {0}")]
    Solver(String),
}

fn require_three_modes(m: &GaussianMoments) -> Result<(), SepError> {
    if m.n_modes() == 3 {
        Ok(())
    } else {
        Err(SepError::NotThreeMode(m.n_modes()))
    }
}

/// Moment-level partial transpose across a bipartition: flips the sign of
/// the isolated mode's momentum row/column and mean entry.
pub fn partial_transpose_cm(
    m: &GaussianMoments,
    cut: Bipartition,
) -> Result<GaussianMoments, SepError> {
    require_three_modes(m)?;
    let p_row = 3 + cut.isolated_mode();
    let mut cm = m.cm().clone();
    let mut mean = m.mean().clone();
    for q in 0..6 {
        cm[(p_row, q)] = -cm[(p_row, q)];
        cm[(q, p_row)] = -cm[(q, p_row)];
    }
    mean[p_row] = -mean[p_row];
    Ok(GaussianMoments::new(cm, mean)?)
}

/// Positivity verdict for one partially transposed covariance matrix.
#[derive(Debug, Clone, Copy)]
pub struct PptVerdict {
    pub cut: Bipartition,
    /// Smallest eigenvalue of `cm^{T_k} + i*Omega`.
    pub min_eigenvalue: f64,
    /// True when the eigenvalue is below `-tol.psd`: entangled across `cut`.
    pub is_npt: bool,
}

/// Tests entanglement across one `1|2` cut; for Gaussian states of this
/// shape the test is necessary and sufficient.
pub fn ppt_check(
    m: &GaussianMoments,
    cut: Bipartition,
    tol: &Tolerances,
) -> Result<PptVerdict, SepError> {
    let pt = partial_transpose_cm(m, cut)?;
    let min_eigenvalue = min_uncertainty_eigenvalue(pt.cm()).0;
    Ok(PptVerdict { cut, min_eigenvalue, is_npt: min_eigenvalue < -tol.psd })
}

/// PPT verdicts for all three cuts.
#[derive(Debug, Clone, Copy)]
pub struct FullInseparability {
    /// True when every cut is entangled.
    pub fully_inseparable: bool,
    pub verdicts: [PptVerdict; 3],
}

/// A state is fully inseparable when no bipartition admits a separable
/// splitting — here, when all three partial transposes are non-positive.
pub fn is_fully_inseparable(
    m: &GaussianMoments,
    tol: &Tolerances,
) -> Result<FullInseparability, SepError> {
    let verdicts = [
        ppt_check(m, Bipartition::A, tol)?,
        ppt_check(m, Bipartition::B, tol)?,
        ppt_check(m, Bipartition::C, tol)?,
    ];
    Ok(FullInseparability {
        fully_inseparable: verdicts.iter().all(|v| v.is_npt),
        verdicts,
    })
}

/// Closed-form boundary of full inseparability for the coherent family: at
/// fixed `r` in `(0, 1.2428)`, the mixture stays entangled across every cut
/// for displacement amplitudes strictly below the returned value.
pub fn coherent_npt_alpha_max(r: f64) -> Result<f64, SepError> {
    if !(r > 0.0 && r < 1.2428) {
        return Err(SepError::CoherentDomain(r));
    }
    let num = 66.0 * r.sinh() + 31.0 * (3.0 * r).sinh() - 3.0 * (5.0 * r).sinh();
    let den = 22.0 * r.cosh() + 2.0 * (3.0 * r).cosh() + 4.0 * (3.0 * r).sinh();
    if num < 0.0 {
        return Err(SepError::CoherentDomain(r));
    }
    Ok(0.5 * (num / den).sqrt())
}

/// Squeezing above which the noisy three-mode squeezed family has a
/// partition-separable window: `(1/2) ln(17 + 12 sqrt(2))`.
pub fn noisy_ghz_separable_r_threshold() -> f64 {
    0.5 * (17.0 + 12.0 * std::f64::consts::SQRT_2).ln()
}

/// Closed form for partition separability (separable across every cut) of
/// the noisy three-mode squeezed family: true iff `r = 0`, or `eta = 0`, or
/// `r` exceeds [`noisy_ghz_separable_r_threshold`] with
/// `eta <= 1 - (2 sqrt(2) / 3) coth(r)`.
pub fn noisy_ghz_partition_separable(r: f64, eta: f64) -> bool {
    assert!(r >= 0.0 && (0.0..=1.0).contains(&eta), "domain: r >= 0, eta in [0, 1]");
    if r == 0.0 || eta == 0.0 {
        return true;
    }
    r > noisy_ghz_separable_r_threshold()
        && eta <= 1.0 - (2.0 * std::f64::consts::SQRT_2 / 3.0) / r.tanh()
}

/// Signed verdict of the covariance-matrix biseparability test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BisepStatus {
    /// A decomposition `cm >= sum K_i` exists: no conclusion about
    /// genuine multipartite entanglement from this test.
    Feasible,
    /// No decomposition exists: the state is genuinely multipartite
    /// entangled, and a witness is attached.
    Infeasible,
    /// The solver stopped near the boundary without certifying either side.
    Indeterminate,
}

/// Dual certificate of infeasibility, normalized so that
/// `tr(matrix * cm) >= 1` for every covariance matrix passing the test while
/// `value = tr(matrix * cm) < 1` for the tested state.
#[derive(Debug, Clone)]
pub struct CmWitnessZ {
    pub matrix: DMatrix<f64>,
    pub value: f64,
}

/// Outcome of [`cm_bisep_feasibility`]: the best decomposition found, its
/// margin, and — when the test fails — the dual witness.
#[derive(Debug, Clone)]
pub struct CmBisepCertificate {
    pub status: BisepStatus,
    pub feasible: bool,
    /// Optimal `t` in `cm - sum K_i - t I >= 0`: nonnegative exactly when a
    /// decomposition exists, and its magnitude measures the distance to the
    /// boundary in either direction.
    pub margin: f64,
    pub weights: [f64; 3],
    pub scaled_cms: [DMatrix<f64>; 3],
    /// Smallest eigenvalue of `cm - sum K_i` at the returned decomposition.
    pub residual_min_eig: f64,
    pub witness: Option<CmWitnessZ>,
}

const BISEP_FEAS_TOL: f64 = 1e-7;

/// Decides whether `cm` majorizes a convex combination `sum_i p_i K_i` in
/// which each `K_i` is block-diagonal across cut `i` and satisfies the
/// `1|2`-separable uncertainty bound `K_i >= +/- i p_i Omega` (stated as the
/// real embedding `[[K_i, -p_i Omega], [p_i Omega, K_i]] >= 0` after
/// absorbing `p_i` into `K_i`).
///
/// Solved as a max-margin program (maximize `t` with
/// `cm - sum K_i - t I >= 0`), which is always strictly feasible, so the
/// solver's terminal status is decoupled from the verdict: the sign of the
/// optimal `t` decides. Strong squeezing scales `cm` entries like `e^{2r}`
/// and the interior-point iteration can then stall just short of the
/// requested precision; in that case the solve is retried at looser targets,
/// and a verdict drawn from such a solve must clear a correspondingly wider
/// margin band (otherwise the certificate stays indeterminate).
pub fn cm_bisep_feasibility(m: &GaussianMoments) -> Result<CmBisepCertificate, SepError> {
    cm_bisep_feasibility_with(m, &SolveOptions::default())
}

/// [`cm_bisep_feasibility`] with explicit solver options.
pub fn cm_bisep_feasibility_with(
    m: &GaussianMoments,
    options: &SolveOptions,
) -> Result<CmBisepCertificate, SepError> {
    require_three_modes(m)?;
    let omega = symplectic_form(3);
    let mut prog = ConicProgram::new();
    let t = prog.vec_var("t", 1);
    let t_col = prog.col(t, PackedEntry::Index(0));
    let p = prog.vec_var("p", 3);
    let ks = [prog.sym_var("K_A", 6), prog.sym_var("K_B", 6), prog.sym_var("K_C", 6)];

    prog.obj_add_terms(&[(t_col, -1.0)]);
    let p_cols = [0, 1, 2].map(|i| prog.col(p, PackedEntry::Index(i)));
    prog.add_eq(&p_cols.map(|c| (c, 1.0)), -1.0);
    for c in p_cols {
        prog.add_nonneg(&[(c, 1.0)], 0.0);
    }

    // Residual cone: cm - sum K_i - t I >= 0.
    let residual = prog.add_psd(m.cm());
    for &k in &ks {
        prog.psd_add_sym_var(residual, k, 0, -1.0);
    }
    prog.psd_add_col_times_mat(residual, t_col, &(0..6).map(|q| (q, q, -1.0)).collect::<Vec<_>>());

    // Per-cut cones [[K_i, -p_i Omega], [p_i Omega, K_i]] >= 0, with the
    // isolated mode's cross-couplings in K_i pinned to zero.
    let mut minus_omega_block: Vec<(usize, usize, f64)> = Vec::new();
    for q in 0..6 {
        for qp in 0..6 {
            if omega[(q, qp)] != 0.0 {
                minus_omega_block.push((q, 6 + qp, -omega[(q, qp)]));
            }
        }
    }
    for (i, cut) in Bipartition::ALL.into_iter().enumerate() {
        let cone = prog.add_psd(&DMatrix::zeros(12, 12));
        prog.psd_add_sym_var(cone, ks[i], 0, 1.0);
        prog.psd_add_sym_var(cone, ks[i], 6, 1.0);
        prog.psd_add_col_times_mat(cone, p_cols[i], &minus_omega_block);

        let iso = cut.isolated_mode();
        for q in [iso, iso + 3] {
            for qp in 0..6 {
                if qp != iso && qp != iso + 3 {
                    let col = prog.col(ks[i], PackedEntry::Sym(q, qp));
                    prog.add_eq(&[(col, 1.0)], 0.0);
                }
            }
        }
    }

    let undecided = |margin: f64| CmBisepCertificate {
        status: BisepStatus::Indeterminate,
        feasible: false,
        margin,
        weights: [f64::NAN; 3],
        scaled_cms: [DMatrix::zeros(6, 6), DMatrix::zeros(6, 6), DMatrix::zeros(6, 6)],
        residual_min_eig: f64::NAN,
        witness: None,
    };

    let mut report = prog.solve(options)?;
    let mut feas_tol = BISEP_FEAS_TOL;
    if report.status == SolveStatus::Indeterminate {
        for loosened in [1e-5, 1e-4] {
            let retry = SolveOptions {
                tol_gap: Some(loosened),
                tol_feas: Some(loosened),
                ..options.clone()
            };
            report = prog.solve(&retry)?;
            if report.status != SolveStatus::Indeterminate {
                feas_tol = feas_tol.max(10.0 * loosened);
                break;
            }
        }
    }
    match report.status {
        SolveStatus::Optimal => {}
        SolveStatus::Indeterminate => return Ok(undecided(-report.objective)),
        _ => return Err(SepError::Solver(report.message)),
    }

    let margin = -report.objective;
    if feas_tol > BISEP_FEAS_TOL && margin.abs() <= feas_tol {
        // A loosened solve cannot resolve the sign this close to zero.
        return Ok(undecided(margin));
    }
    let weights_v = report.vec_value(p);
    let weights = [weights_v[0], weights_v[1], weights_v[2]];
    let scaled_cms = [
        report.sym_value(ks[0]),
        report.sym_value(ks[1]),
        report.sym_value(ks[2]),
    ];
    let mut residual_mat = m.cm().clone();
    for k in &scaled_cms {
        residual_mat -= k;
    }
    let residual_min_eig = residual_mat.symmetric_eigen().eigenvalues.min();

    let feasible = margin >= -feas_tol;
    let witness = if feasible {
        None
    } else {
        // Dual of the residual cone, normalized by the multiplier of the
        // weight-sum equality so that decomposable matrices score >= 1.
        // Complementarity gives tr(Z cm) = nu + t*, and tr(Z cm) >= 0 forces
        // nu >= -t* > 0 whenever the program is infeasible.
        let z = report.psd_dual(residual);
        let nu = report.eq_dual(0);
        (nu > 0.0).then(|| {
            let zhat = &z / nu;
            let value = (&zhat * m.cm()).trace();
            CmWitnessZ { matrix: zhat, value }
        })
    };
    Ok(CmBisepCertificate {
        status: if feasible { BisepStatus::Feasible } else { BisepStatus::Infeasible },
        feasible,
        margin,
        weights,
        scaled_cms,
        residual_min_eig,
        witness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::{family_moments, Family, FamilyParams};
    use approx::assert_abs_diff_eq;

    fn vac(r: f64) -> GaussianMoments {
        family_moments(Family::Vac, &FamilyParams::r(r)).unwrap()
    }

    fn noisy_ghz(r: f64, eta: f64) -> GaussianMoments {
        family_moments(
            Family::NoisyGhz,
            &FamilyParams { r, eta: Some(eta), ..Default::default() },
        )
        .unwrap()
    }

    #[test]
    fn partial_transpose_flips_momentum_row_and_is_an_involution() {
        let m = crate::moments::ghz_cm(0.7).unwrap();
        let pt = partial_transpose_cm(&m, Bipartition::B).unwrap();
        assert_eq!(pt.cm()[(4, 4)], m.cm()[(4, 4)]);
        assert_eq!(pt.cm()[(4, 3)], -m.cm()[(4, 3)]);
        assert_eq!(pt.cm()[(0, 4)], -m.cm()[(0, 4)]);
        let back = partial_transpose_cm(&pt, Bipartition::B).unwrap();
        assert_eq!(back.cm(), m.cm());

        let two_mode = crate::moments::tmsv_cm(0.5).unwrap();
        assert!(matches!(
            partial_transpose_cm(&two_mode, Bipartition::A),
            Err(SepError::NotThreeMode(2))
        ));
    }

    #[test]
    fn vacuum_is_ppt_everywhere() {
        let tol = Tolerances::default();
        let res = is_fully_inseparable(&GaussianMoments::vacuum(3), &tol).unwrap();
        assert!(!res.fully_inseparable);
        for v in res.verdicts {
            assert!(!v.is_npt);
            assert_abs_diff_eq!(v.min_eigenvalue, 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn vac_family_flips_from_entangled_to_ppt_with_growing_r() {
        let tol = Tolerances::default();
        let low = is_fully_inseparable(&vac(0.5), &tol).unwrap();
        assert!(low.fully_inseparable);
        // The family is permutation symmetric, so the three cuts agree.
        let eigs: Vec<f64> = low.verdicts.iter().map(|v| v.min_eigenvalue).collect();
        assert_abs_diff_eq!(eigs[0], eigs[1], epsilon = 1e-10);
        assert_abs_diff_eq!(eigs[0], eigs[2], epsilon = 1e-10);

        let high = is_fully_inseparable(&vac(1.3), &tol).unwrap();
        assert!(!high.fully_inseparable);
    }

    #[test]
    fn coherent_boundary_agrees_with_direct_ppt_tests() {
        let tol = Tolerances::default();
        for r in [0.4, 0.8, 1.1] {
            let alpha_max = coherent_npt_alpha_max(r).unwrap();
            for (alpha, expect) in [(alpha_max - 1e-3, true), (alpha_max + 1e-3, false)] {
                let m = family_moments(
                    Family::Coherent,
                    &FamilyParams { r, alpha: Some(alpha), ..Default::default() },
                )
                .unwrap();
                let res = is_fully_inseparable(&m, &tol).unwrap();
                assert_eq!(res.fully_inseparable, expect, "r={r}, alpha={alpha}");
            }
        }
        assert!(coherent_npt_alpha_max(0.0).is_err());
        assert!(coherent_npt_alpha_max(1.3).is_err());
        assert!(coherent_npt_alpha_max(-0.2).is_err());
    }

    #[test]
    fn noisy_ghz_closed_form_matches_ppt_verdicts() {
        let tol = Tolerances::default();
        for r in [0.5, 1.0, 2.0, 3.0] {
            for eta in [0.0, 0.02, 0.05, 0.5, 0.95] {
                let closed = noisy_ghz_partition_separable(r, eta);
                let res = is_fully_inseparable(&noisy_ghz(r, eta), &tol).unwrap();
                let all_ppt = res.verdicts.iter().all(|v| !v.is_npt);
                assert_eq!(closed, all_ppt, "r={r}, eta={eta}");
            }
        }
        assert_abs_diff_eq!(noisy_ghz_separable_r_threshold(), 1.7627471740390861, epsilon = 1e-12);
    }

    #[test]
    fn bisep_sdp_accepts_the_vacuum_with_a_clean_decomposition() {
        let cert = cm_bisep_feasibility(&GaussianMoments::vacuum(3)).unwrap();
        assert_eq!(cert.status, BisepStatus::Feasible);
        assert!(cert.feasible);
        assert!(cert.margin.abs() < 1e-5, "vacuum margin should be ~0, got {}", cert.margin);
        assert_abs_diff_eq!(cert.weights.iter().sum::<f64>(), 1.0, epsilon = 1e-7);
        assert!(cert.weights.iter().all(|&w| w >= -1e-9));
        assert!(cert.residual_min_eig >= -1e-7);
        // Block-diagonality across each cut.
        for (k, cut) in cert.scaled_cms.iter().zip(Bipartition::ALL) {
            let iso = cut.isolated_mode();
            for q in [iso, iso + 3] {
                for qp in 0..6 {
                    if qp != iso && qp != iso + 3 {
                        assert!(k[(q, qp)].abs() < 1e-7);
                    }
                }
            }
        }
    }

    #[test]
    fn bisep_sdp_rejects_the_pure_squeezed_state_with_a_witness() {
        let cert = cm_bisep_feasibility(&noisy_ghz(0.5, 1.0)).unwrap();
        assert_eq!(cert.status, BisepStatus::Infeasible);
        assert!(cert.margin < -1e-4);
        let w = cert.witness.expect("infeasible certificate must carry a witness");
        assert!(w.value < 1.0 - 1e-7, "witness value {} should certify", w.value);
        let min_eig = w.matrix.clone().symmetric_eigen().eigenvalues.min();
        assert!(min_eig >= -1e-9, "witness must be PSD, min eig {min_eig}");
        // The witness scores >= 1 on states that pass the test.
        let vac_score = (&w.matrix * GaussianMoments::vacuum(3).cm()).trace();
        assert!(vac_score >= 1.0 - 1e-7, "vacuum score {vac_score}");
    }

    #[test]
    fn bisep_sdp_boundary_sits_at_one_third_mixing() {
        let below = cm_bisep_feasibility(&noisy_ghz(1.0, 0.30)).unwrap();
        assert_eq!(below.status, BisepStatus::Feasible);
        let above = cm_bisep_feasibility(&noisy_ghz(1.0, 0.40)).unwrap();
        assert_eq!(above.status, BisepStatus::Infeasible);
    }

    #[test]
    fn bisep_sdp_stays_decisive_under_strong_squeezing() {
        // At r = 2.0 the covariance entries reach ~e^{2r} = 55 and the first
        // solve stalls short of full precision; the loosened retry must still
        // land decisive verdicts on both sides of the mixing boundary.
        for (eta, floor) in [(0.5, 0.1), (0.9, 0.5)] {
            let cert = cm_bisep_feasibility(&noisy_ghz(2.0, eta)).unwrap();
            assert_eq!(cert.status, BisepStatus::Infeasible, "eta = {eta}");
            assert!(cert.margin < -floor, "eta = {eta}, margin = {}", cert.margin);
        }
        let cert = cm_bisep_feasibility(&noisy_ghz(2.0, 0.32)).unwrap();
        assert_eq!(cert.status, BisepStatus::Feasible);
    }
}
