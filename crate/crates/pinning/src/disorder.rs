//! Moving-average disorder and its correlation profile.
//!
//! The disorder sequence is `ω_n = a_0 ε_n + … + a_q ε_{n−q}` with `ε` i.i.d.
//! standard Gaussian and `Σ a_k² = 1`, so `ω` is stationary, centered, unit
//! variance, and its correlations `ρ_m = Σ_k a_k a_{k+m}` vanish for `m > q`.
//! The degenerate order `q = 0` (i.i.d. disorder) is accepted everywhere and
//! reduces the whole transfer machinery to the classical annealed bound.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::CappedGap;

const UNIT_NORM_TOL: f64 = 1e-12;
/// How far from unit norm CLI-supplied coefficients may be and still get
/// silently normalized. Wide enough to accept four-decimal approximations
/// like `0.7071,0.7071` (9.6e-6 off), tight enough to reject typos.
pub const NORMALIZE_TOL: f64 = 1e-4;

/// Coefficients `(a_0, …, a_q)` of the moving average, unit Euclidean norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MovingAverage {
    coeffs: Vec<f64>,
}

impl MovingAverage {
    /// Requires `|Σ a_k² − 1| ≤ 1e-12`.
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::invalid("moving average needs at least one coefficient"));
        }
        if coeffs.iter().any(|a| !a.is_finite()) {
            return Err(Error::invalid("coefficients must be finite"));
        }
        let norm2: f64 = coeffs.iter().map(|a| a * a).sum();
        if (norm2 - 1.0).abs() > UNIT_NORM_TOL {
            return Err(Error::invalid(format!(
                "coefficients must have unit norm: Σ a_k² = {norm2}"
            )));
        }
        Ok(MovingAverage { coeffs })
    }

    /// Accepts coefficients within `1e-6` of unit norm and rescales them;
    /// rejects anything farther off. This is the CLI entry point.
    pub fn new_normalizing(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::invalid("moving average needs at least one coefficient"));
        }
        let norm2: f64 = coeffs.iter().map(|a| a * a).sum();
        if (norm2.sqrt() - 1.0).abs() > NORMALIZE_TOL {
            return Err(Error::invalid(format!(
                "coefficient norm {} is too far from 1 to normalize silently",
                norm2.sqrt()
            )));
        }
        let inv = 1.0 / norm2.sqrt();
        MovingAverage::new(coeffs.into_iter().map(|a| a * inv).collect())
    }

    /// Order `q` of the moving average (0 for i.i.d. disorder).
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Correlation profile `ρ_m = Σ_{k=0}^{q−m} a_k a_{k+m}`, with `ρ_0`
    /// pinned to 1 (the coefficients are unit norm by construction).
    pub fn correlations(&self) -> CorrelationProfile {
        let q = self.order();
        let mut rho = Vec::with_capacity(q + 1);
        rho.push(1.0);
        for m in 1..=q {
            rho.push((0..=q - m).map(|k| self.coeffs[k] * self.coeffs[k + m]).sum());
        }
        CorrelationProfile { rho }
    }

    /// Disorder path `(ω_1, …, ω_n)`, fully determined by the seed.
    pub fn sample_path(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_path_with(n, &mut rng)
    }

    /// As [`sample_path`](Self::sample_path) with a caller-owned stream, for
    /// splittable Monte Carlo streams (one per disorder realization).
    pub fn sample_path_with<R: rand::Rng>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        let q = self.order();
        // ε_{1−q}, …, ε_n
        let eps: Vec<f64> = (0..n + q).map(|_| StandardNormal.sample(rng)).collect();
        (1..=n)
            .map(|k| {
                self.coeffs
                    .iter()
                    .enumerate()
                    .map(|(j, &a)| a * eps[q + k - 1 - j])
                    .sum()
            })
            .collect()
    }
}

/// Correlations `(ρ_0, …, ρ_q)` of the disorder, with the conventions
/// `ρ_⋆ = 0` and `ρ_m = 0` for `m > q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationProfile {
    rho: Vec<f64>,
}

impl CorrelationProfile {
    /// Direct constructor from explicit values `(ρ_0, …, ρ_q)`. Only the
    /// type invariants are checked (`ρ_0 = 1`, `|ρ_m| ≤ 1`); realizability
    /// by a moving average is the caller's concern.
    pub fn from_rhos(rho: Vec<f64>) -> Result<Self> {
        if rho.is_empty() || (rho[0] - 1.0).abs() > UNIT_NORM_TOL {
            return Err(Error::invalid("correlation profile must start with ρ_0 = 1"));
        }
        if rho.iter().any(|r| !r.is_finite() || r.abs() > 1.0 + UNIT_NORM_TOL) {
            return Err(Error::invalid("correlations must satisfy |ρ_m| ≤ 1"));
        }
        Ok(CorrelationProfile { rho })
    }

    /// Range `q`; correlations vanish beyond it.
    pub fn q(&self) -> usize {
        self.rho.len() - 1
    }

    /// `ρ_m`, zero beyond the range.
    pub fn rho(&self, m: usize) -> f64 {
        self.rho.get(m).copied().unwrap_or(0.0)
    }

    /// `ρ` indexed by a capped value: `ρ_⋆ = 0`.
    pub fn rho_capped(&self, c: CappedGap) -> f64 {
        match c {
            CappedGap::Finite(t) => self.rho(t),
            CappedGap::Star => 0.0,
        }
    }

    pub fn rhos(&self) -> &[f64] {
        &self.rho
    }

    /// Largest `|ρ_m|` over `m = 1..q` (0 when `q = 0`).
    pub fn max_abs_tail(&self) -> f64 {
        self.rho.iter().skip(1).fold(0.0, |acc: f64, r| acc.max(r.abs()))
    }
}
