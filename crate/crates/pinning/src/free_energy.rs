//! Annealed free energy through the damped tilted matrices.
//!
//! For `ε > 0` the matrix `Q̃*_{β,F}(s̄*,t̄*) = e^{ε − F φ_F(t*_{q−1})} Q̃*_β`
//! damps each appended gap by its length, with the cemetery class damped by
//! the effective length `φ_F(⋆)` chosen so that
//! `e^{−F φ_F(⋆)} K(⋆) = Σ_{t>q} e^{−Ft} K(t)`. Its Perron–Frobenius
//! eigenvalue `λ_F` decreases strictly from `e^ε` to 0, so `λ_F = 1` has a
//! unique positive root `F̃(ε)`: the free energy of the tilted renewal
//! process at pinning strength `ε`, and `F_ann(β,h) = F̃(h + Λ(β))` above
//! criticality (0 at and below it).

use serde::Serialize;

use crate::disorder::CorrelationProfile;
use crate::error::{Error, Result};
use crate::kernels::{CappedGap, InterArrivalLaw};
use crate::transfer::{build_qstar, perron, tilted_kernel, MatrixKind, TransferMatrix};

/// Solution of `λ_{F̃(ε)} = 1`.
#[derive(Debug, Clone, Serialize)]
pub struct FreeEnergyResult {
    pub epsilon: f64,
    /// `F̃(ε)`; zero exactly when `ε ≤ 0`.
    pub f_tilde: f64,
    /// Final bisection bracket.
    pub bracket: (f64, f64),
    /// `|λ_{f_tilde} − 1|` at the returned root.
    pub lambda_residual: f64,
    /// Number of `λ_F` evaluations spent.
    pub iterations: usize,
    /// Set when `ε ≤ 0` (the root is 0 by convention, nothing was solved).
    pub delocalized: bool,
}

/// The damped tilted matrix together with its parameters.
#[derive(Debug, Clone)]
pub struct TiltedFMatrix {
    pub matrix: TransferMatrix,
    pub epsilon: f64,
    pub f: f64,
    /// Effective damped length of the cemetery class, `φ_F(⋆) > q`.
    pub phi_star: f64,
}

/// `φ_F(⋆) = −(1/F) log( Σ_{t>q} e^{−Ft} K(t) / K(⋆) )`.
///
/// The series is truncated once the geometric remainder bound
/// `K(T+1) e^{−F(T+1)} / (1 − e^{−F})` drops below `tol ×` the partial sum,
/// or at the tabulation end, where the remainder is at most
/// `e^{−F n_max} tail_bound(n_max)`.
pub fn phi_f_star(law: &InterArrivalLaw, q: usize, f: f64, tol: f64) -> Result<f64> {
    if f.is_nan() || f <= 0.0 {
        return Err(Error::invalid(format!("phi_f_star needs F > 0 (φ_0 is undefined), got {f}")));
    }
    if law.n_max() < q + 2 {
        return Err(Error::invalid("law is not tabulated beyond q"));
    }
    let damp = (-f).exp();
    let mut sum = 0.0;
    let mut weight = (-f * (q as f64 + 1.0)).exp();
    let monotone_from = law.monotone_head().max(q + 1);
    for t in q + 1..=law.n_max() {
        sum += weight * law.mass(t);
        if t >= monotone_from && t < law.n_max() {
            let remainder = law.mass(t + 1) * weight * damp / (1.0 - damp);
            if remainder < tol * sum {
                break;
            }
        }
        weight *= damp;
    }
    let ratio = sum / law.star_mass(q);
    Ok(-ratio.ln() / f)
}

/// Assemble `Q̃*_{β,F}` from the tilted kernel by scaling each target class.
pub fn build_f_tilted(
    q_tilde: &TransferMatrix,
    law: &InterArrivalLaw,
    epsilon: f64,
    f: f64,
    tol: f64,
) -> Result<TiltedFMatrix> {
    if q_tilde.kind() != MatrixKind::TiltedQStar {
        return Err(Error::invalid("build_f_tilted expects the tilted kernel Q̃*_β"));
    }
    let q = q_tilde.q();
    let phi_star = phi_f_star(law, q, f, tol)?;
    let matrix = q_tilde.scaled_by_target_class(MatrixKind::TiltedFQStar, |c| {
        let phi = match c {
            CappedGap::Finite(t) => t as f64,
            CappedGap::Star => phi_star,
        };
        (epsilon - f * phi).exp()
    });
    Ok(TiltedFMatrix { matrix, epsilon, f, phi_star })
}

/// Perron–Frobenius eigenvalue of `Q̃*_{β,F}`; strictly decreasing in `F`.
pub fn lambda_f(
    q_tilde: &TransferMatrix,
    law: &InterArrivalLaw,
    epsilon: f64,
    f: f64,
    tol: f64,
) -> Result<f64> {
    let damped = build_f_tilted(q_tilde, law, epsilon, f, tol / 10.0)?;
    Ok(perron(&damped.matrix, tol)?.lambda)
}

/// Root `F̃(ε)` of `λ_F = 1` by bisection on a certified monotone bracket.
///
/// The initial bracket is `[tol, 1]`, doubled upward until `λ < 1`; for
/// `ε ≤ 0` the result is 0 by convention (delocalized phase) and flagged.
pub fn f_tilde(
    q_tilde: &TransferMatrix,
    law: &InterArrivalLaw,
    epsilon: f64,
    tol: f64,
) -> Result<FreeEnergyResult> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::invalid("tolerance must be positive"));
    }
    if epsilon <= 0.0 {
        return Ok(FreeEnergyResult {
            epsilon,
            f_tilde: 0.0,
            bracket: (0.0, 0.0),
            lambda_residual: 0.0,
            iterations: 0,
            delocalized: true,
        });
    }
    let mut evals = 0usize;
    let mut eval = |f: f64| -> Result<f64> {
        evals += 1;
        lambda_f(q_tilde, law, epsilon, f, tol)
    };

    let mut lo = tol;
    if eval(lo)? <= 1.0 {
        // the root sits below the resolution of the bracket; any point of
        // [0, tol] is within tolerance
        let root = 0.5 * lo;
        let residual = (eval(root)? - 1.0).abs();
        return Ok(FreeEnergyResult {
            epsilon,
            f_tilde: root,
            bracket: (0.0, lo),
            lambda_residual: residual,
            iterations: evals,
            delocalized: false,
        });
    }
    let mut hi = 1.0;
    let mut doublings = 0;
    while eval(hi)? >= 1.0 {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > 60 {
            return Err(Error::NumericalFailure(format!(
                "no upper bracket for λ_F = 1 below F = {hi} (ε = {epsilon})"
            )));
        }
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if eval(mid)? >= 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let root = 0.5 * (lo + hi);
    let lambda_residual = (eval(root)? - 1.0).abs();
    Ok(FreeEnergyResult {
        epsilon,
        f_tilde: root,
        bracket: (lo, hi),
        lambda_residual,
        iterations: evals,
        delocalized: false,
    })
}

/// Annealed free energy `F_ann(β, h) = F̃(h + Λ(β))`, zero at and below the
/// critical curve.
pub fn f_ann(
    law: &InterArrivalLaw,
    rho: &CorrelationProfile,
    beta: f64,
    h: f64,
    tol: f64,
) -> Result<f64> {
    let m = build_qstar(law, rho, beta)?;
    let spectral = perron(&m, tol)?;
    let q_tilde = tilted_kernel(&m, &spectral);
    let big_lambda = 0.5 * beta * beta + spectral.lambda.ln();
    f_ann_with(&q_tilde, law, big_lambda, h, tol)
}

/// As [`f_ann`] with a prebuilt tilted kernel and `Λ(β)`, for grid sweeps
/// that reuse one spectral solve per β.
pub fn f_ann_with(
    q_tilde: &TransferMatrix,
    law: &InterArrivalLaw,
    big_lambda: f64,
    h: f64,
    tol: f64,
) -> Result<f64> {
    let epsilon = h + big_lambda;
    if epsilon <= 0.0 {
        return Ok(0.0);
    }
    Ok(f_tilde(q_tilde, law, epsilon, tol)?.f_tilde)
}

/// Free energy of the homogeneous pinning model: the root of
/// `Σ_n K̂(n) e^{−Fn} = e^{−ε}`, by bisection on the tabulated series.
///
/// Independent of the transfer-matrix machinery; the `β = 0` reduction of
/// [`f_tilde`] must agree with it.
pub fn homogeneous_free_energy(law: &InterArrivalLaw, epsilon: f64, tol: f64) -> Result<f64> {
    if epsilon <= 0.0 {
        return Ok(0.0);
    }
    let hat = law.hat();
    let series = |f: f64| -> f64 {
        let mut total = 0.0;
        let mut weight = (-f).exp();
        let damp = weight;
        for t in 1..=hat.n_max() {
            total += weight * hat.mass(t);
            weight *= damp;
        }
        total
    };
    let target = (-epsilon).exp();
    let mut lo = tol;
    if series(lo) <= target {
        return Ok(0.5 * lo);
    }
    let mut hi = 1.0;
    let mut doublings = 0;
    while series(hi) >= target {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > 60 {
            return Err(Error::NumericalFailure("no bracket for the homogeneous root".into()));
        }
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if series(mid) >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
