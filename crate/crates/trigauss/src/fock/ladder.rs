//! Ladder-operator moments and the derivative-based element pipeline.
//!
//! Photon-number matrix elements of a Gaussian state are Taylor coefficients
//! of its (unnormalized) coherent-state expectation `<alpha| rho |alpha>`
//! against the exponential kernel. Concretely, with the formal variable
//! vector `v = (v_1..v_N, v_{N+1}..v_{2N})` — first half tracking the ket
//! index, second half the bra index — the elements are
//!
//! `<k| rho |k'> = T * d^{k'}_{v_ket} d^{k}_{v_bra}
//!                 exp(v^T A v / 2 + theta^T v) at v = 0 / sqrt(k! k'!)`
//!
//! where `A`, `theta`, and the scalar `T` derive from the ladder moments
//! ([`husimi_params`]). Differentiation is carried out exactly on a sparse
//! multivariate polynomial, so the pipeline is closed-form up to the matrix
//! inversions in the parameters.

use super::{factorial_product, FockError, HARD_MAX_OCCUPATION};
use crate::moments::{GaussianMoments, Ordering};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::collections::BTreeMap;

/// First and second moments in ladder coordinates `(a, a^dagger)`.
#[derive(Debug, Clone)]
pub struct LadderMoments {
    /// Hermitian covariance block; the vacuum maps to `I / 2`.
    pub sigma: DMatrix<Complex64>,
    /// Displacement `(beta, conj(beta))`.
    pub beta: DVector<Complex64>,
    pub n_modes: usize,
}

/// Unitary change of basis from quadratures `(x, p)` to `(a, a^dagger)`:
/// `sigma = S cm S^dagger / 2`, `beta = S mean`, with
/// `S = [[I, iI], [I, -iI]] / sqrt(2)`.
pub fn to_ladder(m: &GaussianMoments) -> Result<LadderMoments, FockError> {
    if m.ordering() != Ordering::XpBlock {
        return Err(FockError::WrongOrdering);
    }
    let n = m.n_modes();
    let s = ladder_basis(n);
    let cm_c = m.cm().map(|v| Complex64::new(v, 0.0));
    let mean_c = m.mean().map(|v| Complex64::new(v, 0.0));
    let sigma = (&s * cm_c * s.adjoint()).scale(0.5);
    let beta = &s * mean_c;
    Ok(LadderMoments { sigma, beta, n_modes: n })
}

fn ladder_basis(n: usize) -> DMatrix<Complex64> {
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let (row_mode, upper) = (i % n, i < n);
        if j == row_mode {
            Complex64::new(inv_sqrt2, 0.0)
        } else if j == row_mode + n {
            Complex64::new(0.0, if upper { inv_sqrt2 } else { -inv_sqrt2 })
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// Kernel parameters of the derivative pipeline.
#[derive(Debug, Clone)]
pub struct HusimiParams {
    /// Quadratic coefficient `A = X (I - sigma_Q^{-1})` with the half-swap
    /// `X`; symmetric.
    pub a_matrix: DMatrix<Complex64>,
    /// Linear coefficient, `theta^T = beta^dagger sigma_Q^{-1}`.
    pub theta: DVector<Complex64>,
    /// Overall scalar `exp(-beta^dagger sigma_Q^{-1} beta / 2) /
    /// sqrt(det sigma_Q)`; the per-element factorials are applied later.
    pub prefactor_t: Complex64,
    pub n_modes: usize,
}

/// Derives the exponential-kernel parameters from ladder moments.
/// `sigma_Q = sigma + I/2` is bounded below by `I/2` for physical states, so
/// the inversion only fails on invalid input — which is still guarded.
pub fn husimi_params(lm: &LadderMoments) -> Result<HusimiParams, FockError> {
    let n = lm.n_modes;
    let dim = 2 * n;
    let mut sigma_q = lm.sigma.clone();
    for i in 0..dim {
        sigma_q[(i, i)] += Complex64::new(0.5, 0.0);
    }
    let det = sigma_q.determinant();
    if !(det.re > 1e-100) || det.im.abs() > 1e-9 * (1.0 + det.re.abs()) {
        return Err(FockError::Degenerate(format!(
            "coherent-kernel normalization det = {det} is not a positive real"
        )));
    }
    let inv = sigma_q
        .clone()
        .try_inverse()
        .ok_or_else(|| FockError::Degenerate("coherent-kernel matrix is singular".into()))?;

    let mut a_matrix = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            // Row i of X picks row (i + n) mod dim of (I - inv).
            let src = (i + n) % dim;
            let identity = if src == j { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
            a_matrix[(i, j)] = identity - inv[(src, j)];
        }
    }
    // Symmetric by construction; average away roundoff.
    let a_sym = (&a_matrix + a_matrix.transpose()).scale(0.5);

    let inv_beta = &inv * &lm.beta;
    let theta = inv_beta.map(|z| z.conj());
    let quad: Complex64 = lm.beta.iter().zip(inv_beta.iter()).map(|(b, ib)| b.conj() * ib).sum();
    let prefactor_t = (-0.5 * quad).exp() / det.sqrt();
    Ok(HusimiParams { a_matrix: a_sym, theta, prefactor_t, n_modes: n })
}

/// Sparse polynomial in `2N` variables: monomial exponents to coefficients.
/// A `BTreeMap` keeps iteration (and thus floating-point summation) order
/// deterministic.
type Poly = BTreeMap<Vec<u8>, Complex64>;

fn poly_one(dim: usize) -> Poly {
    let mut p = Poly::new();
    p.insert(vec![0u8; dim], Complex64::new(1.0, 0.0));
    p
}

fn poly_add(p: &mut Poly, key: Vec<u8>, value: Complex64) {
    *p.entry(key).or_insert(Complex64::new(0.0, 0.0)) += value;
}

/// One derivative step against the exponential kernel:
/// `P -> dP/dv_j + P * ((A v)_j + theta_j)`, followed by dropping monomials
/// whose degree exceeds the number of derivatives still to come (they can no
/// longer reach the constant term).
fn derivative_step(p: &Poly, j: usize, hp: &HusimiParams, remaining: usize) -> Poly {
    let dim = 2 * hp.n_modes;
    let mut out = Poly::new();
    let theta_j = hp.theta[j];
    for (expt, &coeff) in p {
        let degree: usize = expt.iter().map(|&e| usize::from(e)).sum();
        if expt[j] > 0 {
            let mut key = expt.clone();
            key[j] -= 1;
            poly_add(&mut out, key, coeff * f64::from(expt[j]));
        }
        // A monomial of degree g only reaches the constant term if the
        // remaining derivatives can absorb it, so anything pushed past
        // `remaining` is dead weight.
        if theta_j.norm_sqr() > 0.0 && degree <= remaining {
            poly_add(&mut out, expt.clone(), coeff * theta_j);
        }
        if degree + 1 <= remaining {
            for l in 0..dim {
                let a = hp.a_matrix[(j, l)];
                if a.norm_sqr() > 0.0 {
                    let mut key = expt.clone();
                    key[l] += 1;
                    poly_add(&mut out, key, coeff * a);
                }
            }
        }
    }
    out.retain(|_, c| c.norm_sqr() > 0.0);
    out
}

fn check_orders(n_modes: usize, bra: &[usize], ket: &[usize]) -> Result<(), FockError> {
    for idx in [bra, ket] {
        if idx.len() != n_modes {
            return Err(FockError::IndexLength { expected: n_modes, got: idx.len() });
        }
        if let Some(&k) = idx.iter().find(|&&k| k > HARD_MAX_OCCUPATION) {
            return Err(FockError::OrderBound { order: k, max: HARD_MAX_OCCUPATION });
        }
    }
    Ok(())
}

/// Single matrix element `<bra| rho |ket>` by exact differentiation.
pub fn element_by_derivatives(
    hp: &HusimiParams,
    bra: &[usize],
    ket: &[usize],
) -> Result<Complex64, FockError> {
    check_orders(hp.n_modes, bra, ket)?;
    let n = hp.n_modes;
    let total: usize = bra.iter().sum::<usize>() + ket.iter().sum::<usize>();
    let mut poly = poly_one(2 * n);
    let mut remaining = total;
    for (j, &count) in ket.iter().enumerate() {
        for _ in 0..count {
            remaining -= 1;
            poly = derivative_step(&poly, j, hp, remaining);
        }
    }
    for (j, &count) in bra.iter().enumerate() {
        for _ in 0..count {
            remaining -= 1;
            poly = derivative_step(&poly, n + j, hp, remaining);
        }
    }
    let constant = poly.get(&vec![0u8; 2 * n]).copied().unwrap_or(Complex64::new(0.0, 0.0));
    Ok(constant * hp.prefactor_t / factorial_product(bra, ket))
}

/// Full `d^N x d^N` raw block (bra index row-major first), sharing the bra
/// derivative phase across kets. No hermitization is applied here.
pub(crate) fn block_by_derivatives(
    hp: &HusimiParams,
    d: usize,
) -> Result<DMatrix<Complex64>, FockError> {
    let n = hp.n_modes;
    let size = d.pow(n as u32);
    let max_side = n * (d - 1);
    let mut out = DMatrix::zeros(size, size);
    let mut bra = vec![0usize; n];
    for row in 0..size {
        linear_to_index(row, d, &mut bra);
        let bra_total: usize = bra.iter().sum();
        // Shared bra phase: prune against the loosest bound any ket needs.
        let mut poly = poly_one(2 * n);
        let mut shared_left = bra_total;
        for (j, &count) in bra.iter().enumerate() {
            for _ in 0..count {
                shared_left -= 1;
                poly = derivative_step(&poly, n + j, hp, shared_left + max_side);
            }
        }
        let mut ket = vec![0usize; n];
        for col in 0..size {
            linear_to_index(col, d, &mut ket);
            let mut p = poly.clone();
            let mut remaining: usize = ket.iter().sum();
            for (j, &count) in ket.iter().enumerate() {
                for _ in 0..count {
                    remaining -= 1;
                    p = derivative_step(&p, j, hp, remaining);
                }
            }
            let constant = p.get(&vec![0u8; 2 * n]).copied().unwrap_or(Complex64::new(0.0, 0.0));
            out[(row, col)] = constant * hp.prefactor_t / factorial_product(&bra, &ket);
        }
    }
    Ok(out)
}

/// Decodes a row-major linear index into per-mode occupations (first mode
/// most significant).
pub(crate) fn linear_to_index(linear: usize, d: usize, out: &mut [usize]) {
    let mut rest = linear;
    for slot in out.iter_mut().rev() {
        *slot = rest % d;
        rest /= d;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::{coherent_moments, thermal_cm, tmsv_cm, GaussianMoments};
    use approx::assert_abs_diff_eq;
    use nalgebra::DVector;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn vacuum_ladder_moments_and_kernel_are_trivial() {
        let lm = to_ladder(&GaussianMoments::vacuum(2)).unwrap();
        let half_identity = DMatrix::<f64>::identity(4, 4).scale(0.5);
        assert!(lm
            .sigma
            .iter()
            .zip(half_identity.iter())
            .all(|(s, i)| (s - c(*i, 0.0)).norm() < 1e-15));
        assert_eq!(lm.beta.iter().map(|b| b.norm()).sum::<f64>(), 0.0);
        let hp = husimi_params(&lm).unwrap();
        assert!(hp.a_matrix.iter().all(|z| z.norm() < 1e-14));
        assert!(hp.theta.iter().all(|z| z.norm() < 1e-14));
        assert_abs_diff_eq!(hp.prefactor_t.re, 1.0, epsilon = 1e-12);
        let e00 = element_by_derivatives(&hp, &[0, 0], &[0, 0]).unwrap();
        assert_abs_diff_eq!(e00.re, 1.0, epsilon = 1e-12);
        let e11 = element_by_derivatives(&hp, &[1, 0], &[1, 0]).unwrap();
        assert!(e11.norm() < 1e-12);
    }

    #[test]
    fn coherent_ladder_displacement_is_the_amplitude() {
        let lm = to_ladder(&coherent_moments(1.0).unwrap()).unwrap();
        assert_abs_diff_eq!(lm.beta[0].re, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(lm.beta[1].re, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(lm.beta[0].im, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn tmsv_twin_elements_match_the_closed_form() {
        let r = 0.5f64;
        let lambda = r.tanh();
        let hp = husimi_params(&to_ladder(&tmsv_cm(r).unwrap()).unwrap()).unwrap();
        // Normalization: 1 / det(sigma_Q) = 1 / cosh^4 r, so T = sech^2 r.
        assert_abs_diff_eq!(hp.prefactor_t.re, 1.0 - lambda * lambda, epsilon = 1e-12);
        for n in 0..=3usize {
            for np in 0..=3usize {
                let got = element_by_derivatives(&hp, &[n, n], &[np, np]).unwrap();
                let want = (1.0 - lambda * lambda) * lambda.powi((n + np) as i32);
                assert_abs_diff_eq!(got.re, want, epsilon = 1e-10);
                assert_abs_diff_eq!(got.im, 0.0, epsilon = 1e-12);
                // Unequal twin occupation vanishes.
                let off = element_by_derivatives(&hp, &[n, np], &[n, np]).unwrap();
                if n != np {
                    assert!(off.norm() < 1e-12, "({n},{np}) should vanish");
                }
            }
        }
    }

    #[test]
    fn thermal_elements_are_the_geometric_distribution() {
        let nbar = 1.25;
        let hp = husimi_params(&to_ladder(&thermal_cm(nbar).unwrap()).unwrap()).unwrap();
        let mu = nbar / (nbar + 1.0);
        for n in 0..=4usize {
            let got = element_by_derivatives(&hp, &[n], &[n]).unwrap();
            let want = mu.powi(n as i32) / (nbar + 1.0);
            assert_abs_diff_eq!(got.re, want, epsilon = 1e-12);
            let off = element_by_derivatives(&hp, &[n], &[(n + 1) % 5]).unwrap();
            if n != (n + 1) % 5 {
                assert!(off.norm() < 1e-13);
            }
        }
    }

    #[test]
    fn complex_displacement_pins_the_bra_ket_variable_pairing() {
        // Mean along p: amplitude w = i * 0.7. Then <k| rho |k'> =
        // e^{-|w|^2} w^k conj(w)^{k'} / sqrt(k! k'!), which is sensitive to
        // swapping the bra and ket derivative variables.
        let w = c(0.0, 0.7);
        let mean = DVector::from_vec(vec![0.0, 0.7 * std::f64::consts::SQRT_2]);
        let m = GaussianMoments::new(DMatrix::identity(2, 2), mean).unwrap();
        let hp = husimi_params(&to_ladder(&m).unwrap()).unwrap();
        for k in 0..=2usize {
            for kp in 0..=2usize {
                let got = element_by_derivatives(&hp, &[k], &[kp]).unwrap();
                let want = (-w.norm_sqr()).exp() * w.powu(k as u32) * w.conj().powu(kp as u32)
                    / factorial_product(&[k], &[kp]);
                assert_abs_diff_eq!(got.re, want.re, epsilon = 1e-12);
                assert_abs_diff_eq!(got.im, want.im, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn order_and_length_validation() {
        let hp = husimi_params(&to_ladder(&GaussianMoments::vacuum(1)).unwrap()).unwrap();
        assert!(matches!(
            element_by_derivatives(&hp, &[5], &[0]),
            Err(FockError::OrderBound { .. })
        ));
        assert!(matches!(
            element_by_derivatives(&hp, &[0, 0], &[0]),
            Err(FockError::IndexLength { .. })
        ));
    }
}
