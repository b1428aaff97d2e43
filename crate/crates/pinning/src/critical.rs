//! The annealed critical curve.
//!
//! `Λ(β) = β²/2 + log λ(β)` measures how much the correlated disorder lowers
//! the critical pinning reward: `h_c_ann(β) = h_c(0) − Λ(β)` with
//! `h_c(0) = −log(1 − K(∞))`. For i.i.d. disorder `λ ≡ 1` and the classical
//! bound `h_c(0) − β²/2` is recovered. Closed forms exist for `q = 1, 2` and
//! serve as exact cross-checks of the eigenvalue route; for weak disorder
//! `Λ(β) ∼ (1 + 2 Σ_{n≤q} ρ_n u_n) β²/2` with `u_n = P(n ∈ τ̂)`.

use serde::Serialize;

use crate::disorder::CorrelationProfile;
use crate::error::{Error, Result};
use crate::kernels::{renewal_mass, InterArrivalLaw};
use crate::transfer::{build_qstar, perron};

/// One point of the annealed critical curve.
#[derive(Debug, Clone, Serialize)]
pub struct CurvePoint {
    pub beta: f64,
    /// Perron–Frobenius eigenvalue `λ(β)`.
    pub lambda: f64,
    /// `Λ(β) = β²/2 + log λ(β)`.
    #[serde(rename = "Lambda")]
    pub big_lambda: f64,
    /// `h_c_ann(β) = h_c(0) − Λ(β)`.
    pub h_c_ann: f64,
    /// `h_c(0) = −log(1 − K(∞))`.
    pub h_c_zero: f64,
}

/// Evaluate the curve at one `β` through the transfer-matrix route.
pub fn curve_point(
    law: &InterArrivalLaw,
    rho: &CorrelationProfile,
    beta: f64,
    tol: f64,
) -> Result<CurvePoint> {
    let m = build_qstar(law, rho, beta)?;
    let spectral = perron(&m, tol)?;
    let big_lambda = 0.5 * beta * beta + spectral.lambda.ln();
    let h_c_zero = -(1.0 - law.k_infinity()).ln();
    Ok(CurvePoint {
        beta,
        lambda: spectral.lambda,
        big_lambda,
        h_c_ann: h_c_zero - big_lambda,
        h_c_zero,
    })
}

/// Curve over a β grid, in grid order.
pub fn curve_sweep(
    law: &InterArrivalLaw,
    rho: &CorrelationProfile,
    betas: &[f64],
    tol: f64,
) -> Result<Vec<CurvePoint>> {
    betas.iter().map(|&b| curve_point(law, rho, b, tol)).collect()
}

/// Exact `h_c_ann(β)` for a 1-order moving average:
/// `h_c(0) − β²/2 − log(1 + K̂(1)(e^{ρ_1 β²} − 1))`.
pub fn closed_form_q1(law: &InterArrivalLaw, rho: &CorrelationProfile, beta: f64) -> Result<f64> {
    if rho.q() != 1 {
        return Err(Error::invalid(format!("closed_form_q1 needs q = 1, got q = {}", rho.q())));
    }
    let k1_hat = law.mass(1) / (1.0 - law.k_infinity());
    let h_c_zero = -(1.0 - law.k_infinity()).ln();
    Ok(h_c_zero - 0.5 * beta * beta - (1.0 + k1_hat * ((rho.rho(1) * beta * beta).exp() - 1.0)).ln())
}

/// Exact `Λ(β)` for a 2-order moving average, via the quadratic factor of
/// the characteristic polynomial:
/// `Λ = β²/2 + log φ + log((1 + √(1 − ψ/φ²))/2)`.
pub fn closed_form_q2(law: &InterArrivalLaw, rho: &CorrelationProfile, beta: f64) -> Result<f64> {
    if rho.q() != 2 {
        return Err(Error::invalid(format!("closed_form_q2 needs q = 2, got q = {}", rho.q())));
    }
    let norm = 1.0 - law.k_infinity();
    let k1 = law.mass(1) / norm;
    let k2 = law.mass(2) / norm;
    let b2 = beta * beta;
    let e12 = ((rho.rho(1) + rho.rho(2)) * b2).exp();
    let e2 = (rho.rho(2) * b2).exp();
    let phi = 1.0 + k1 * (e12 - 1.0) + k2 * (e2 - 1.0);
    let psi = 4.0 * k1 * (1.0 - k1) * (rho.rho(1) * b2).exp() * (e2 - 1.0)
        * (1.0 + k2 / (1.0 - k1) * (e2 - 1.0));
    let disc = 1.0 - psi / (phi * phi);
    if disc < -1e-9 {
        return Err(Error::NumericalInconsistency(format!(
            "q=2 closed form: ψ/φ² = {} exceeds 1",
            psi / (phi * phi)
        )));
    }
    // benign drift near β = 0 clamps to the double root
    let disc = disc.max(0.0);
    Ok(0.5 * b2 + phi.ln() + (0.5 * (1.0 + disc.sqrt())).ln())
}

/// Coefficient of `β²/2` in the weak-disorder expansion of `Λ(β)`:
/// `1 + 2 Σ_{n=1}^{q} ρ_n P(n ∈ τ̂)`.
pub fn weak_disorder_slope(law: &InterArrivalLaw, rho: &CorrelationProfile) -> Result<f64> {
    let u = renewal_mass(&law.hat(), rho.q())?;
    Ok(1.0 + 2.0 * (1..=rho.q()).map(|n| rho.rho(n) * u.get(n)).sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disorder::MovingAverage;
    use crate::kernels::build_zeta_law;
    use std::f64::consts::PI;

    const TOL: f64 = 1e-13;

    fn profile(coeffs: &[f64]) -> CorrelationProfile {
        MovingAverage::new(coeffs.to_vec()).unwrap().correlations()
    }

    #[test]
    fn beta_zero_point() {
        let law = build_zeta_law(1.0, 0.3, 1000).unwrap();
        let p = curve_point(&law, &profile(&[0.8, 0.36, 0.48]), 0.0, TOL).unwrap();
        assert!(p.big_lambda.abs() < 1e-13);
        assert!((p.h_c_ann - p.h_c_zero).abs() < 1e-13);
        assert!((p.h_c_zero - -(0.7f64).ln()).abs() < 1e-15);
    }

    #[test]
    fn iid_reduction_recovers_classical_bound() {
        // q = 2 in form, but ρ_1 = ρ_2 = 0: the annealed shift is exactly β²/2
        let law = build_zeta_law(0.5, 0.0, 1000).unwrap();
        let rho = profile(&[1.0, 0.0, 0.0]);
        for beta in [0.0, 0.4, 1.0, 2.0] {
            let p = curve_point(&law, &rho, beta, TOL).unwrap();
            assert!((p.big_lambda - 0.5 * beta * beta).abs() < 1e-12, "beta={beta}");
            assert!((p.lambda - 1.0).abs() < 1e-12);
        }
        // and the true q = 0 degenerate case does too
        let rho0 = profile(&[1.0]);
        for beta in [0.3, 1.7] {
            let p = curve_point(&law, &rho0, beta, TOL).unwrap();
            assert!((p.big_lambda - 0.5 * beta * beta).abs() < 1e-13);
        }
    }

    #[test]
    fn q1_frozen_value() {
        // K̂(1) = 6/π², ρ_1 = 1/2, β = 1:
        // h_c_ann = −1/2 − log(1 + (6/π²)(e^{1/2} − 1))
        let law = build_zeta_law(1.0, 0.0, 1000).unwrap();
        let rho = profile(&[std::f64::consts::FRAC_1_SQRT_2; 2]);
        let expected = -0.5 - (1.0 + 6.0 / (PI * PI) * (0.5f64.exp() - 1.0)).ln();
        let p = curve_point(&law, &rho, 1.0, TOL).unwrap();
        assert!((p.h_c_ann - expected).abs() < 1e-12);
        assert!((closed_form_q1(&law, &rho, 1.0).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn q1_closed_form_edge_cases() {
        let law = build_zeta_law(2.0, 0.4, 1000).unwrap();
        let h_c_zero = -(0.6f64).ln();
        let rho = profile(&[0.6, 0.8]);
        assert!((closed_form_q1(&law, &rho, 0.0).unwrap() - h_c_zero).abs() < 1e-15);
        let rho0 = profile(&[1.0, 0.0]);
        let beta = 1.3;
        assert!((closed_form_q1(&law, &rho0, beta).unwrap() - (h_c_zero - 0.5 * beta * beta)).abs() < 1e-15);
        // q mismatch
        assert!(closed_form_q1(&law, &profile(&[0.8, 0.36, 0.48]), 1.0).is_err());
    }

    #[test]
    fn q1_closed_form_matches_eigenvalue_route() {
        for &(alpha, k_inf) in &[(0.5, 0.0), (1.0, 0.3), (2.0, 0.3)] {
            let law = build_zeta_law(alpha, k_inf, 1000).unwrap();
            for coeffs in [&[0.6, 0.8][..], &[0.894427190999916, -0.447213595499958][..]] {
                let rho = profile(coeffs);
                for i in 0..=20 {
                    let beta = 0.1 * i as f64;
                    let closed = closed_form_q1(&law, &rho, beta).unwrap();
                    let p = curve_point(&law, &rho, beta, TOL).unwrap();
                    assert!(
                        (p.h_c_ann - closed).abs() < 1e-10,
                        "alpha={alpha} k_inf={k_inf} beta={beta}: {} vs {closed}",
                        p.h_c_ann
                    );
                }
            }
        }
    }

    #[test]
    fn q2_closed_form_edge_cases() {
        let law = build_zeta_law(1.0, 0.0, 1000).unwrap();
        let rho = profile(&[0.8, 0.36, 0.48]);
        assert!(closed_form_q2(&law, &rho, 0.0).unwrap().abs() < 1e-15);
        let rho0 = profile(&[1.0, 0.0, 0.0]);
        let beta = 0.9;
        assert!((closed_form_q2(&law, &rho0, beta).unwrap() - 0.5 * beta * beta).abs() < 1e-15);
        assert!(closed_form_q2(&law, &profile(&[0.6, 0.8]), 1.0).is_err());
    }

    #[test]
    fn q2_closed_form_matches_eigenvalue_route() {
        let law = build_zeta_law(1.0, 0.0, 1000).unwrap();
        let rho = profile(&[0.8, 0.36, 0.48]);
        for i in 0..=20 {
            let beta = 0.1 * i as f64;
            let closed = closed_form_q2(&law, &rho, beta).unwrap();
            let p = curve_point(&law, &rho, beta, TOL).unwrap();
            assert!(
                (p.big_lambda - closed).abs() < 1e-10,
                "beta={beta}: {} vs {closed}",
                p.big_lambda
            );
        }
    }

    #[test]
    fn weak_disorder_slope_values() {
        let law = build_zeta_law(1.0, 0.0, 1000).unwrap();
        // no correlations: slope 1
        assert!((weak_disorder_slope(&law, &profile(&[1.0, 0.0, 0.0])).unwrap() - 1.0).abs() < 1e-15);
        // q = 1: 1 + 2 ρ_1 K̂(1)
        let rho = profile(&[0.6, 0.8]);
        let expect = 1.0 + 2.0 * rho.rho(1) * law.mass(1);
        assert!((weak_disorder_slope(&law, &rho).unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn weak_disorder_asymptote_matches_small_beta() {
        for &alpha in &[0.5, 1.5] {
            let law = build_zeta_law(alpha, 0.0, 1000).unwrap();
            for coeffs in [&[0.6, 0.8][..], &[0.8, 0.36, 0.48][..], &[0.5, 0.5, 0.5, 0.5][..]] {
                let rho = profile(coeffs);
                let slope = weak_disorder_slope(&law, &rho).unwrap();
                let beta = 1e-3;
                let p = curve_point(&law, &rho, beta, TOL).unwrap();
                let ratio = 2.0 * p.big_lambda / (beta * beta);
                assert!(
                    (ratio - slope).abs() < 1e-4,
                    "alpha={alpha} coeffs={coeffs:?}: {ratio} vs {slope}"
                );
            }
        }
    }

    #[test]
    fn weak_disorder_error_shrinks_like_beta_squared() {
        // Richardson consistency: the defect of 2Λ/β² at β = 1e-2 is ~100×
        // the defect at β = 1e-3.
        let law = build_zeta_law(1.5, 0.0, 1000).unwrap();
        let rho = profile(&[0.8, 0.36, 0.48]);
        let slope = weak_disorder_slope(&law, &rho).unwrap();
        let defect = |beta: f64| {
            let p = curve_point(&law, &rho, beta, TOL).unwrap();
            (2.0 * p.big_lambda / (beta * beta) - slope).abs()
        };
        let d2 = defect(1e-2);
        let d3 = defect(1e-3);
        assert!(d3 < 1e-4);
        let ratio = d2 / d3;
        assert!((30.0..300.0).contains(&ratio), "ratio = {ratio} (d2={d2:.3e}, d3={d3:.3e})");
    }

    #[test]
    fn h_c_ann_nonincreasing_for_nonnegative_profiles() {
        let law = build_zeta_law(1.0, 0.2, 1000).unwrap();
        let rho = profile(&[0.8, 0.36, 0.48]);
        let mut last = f64::INFINITY;
        for i in 0..=40 {
            let p = curve_point(&law, &rho, 0.05 * i as f64, TOL).unwrap();
            assert!(p.h_c_ann <= last + 1e-12);
            last = p.h_c_ann;
        }
    }
}
