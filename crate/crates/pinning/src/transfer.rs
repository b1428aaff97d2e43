//! Transfer matrices over the capped state space `E^q` and their
//! Perron–Frobenius data.
//!
//! A state is the tuple of the last `q` capped gaps. The matrix
//!
//! ```text
//! Q*_β(s̄*, t̄*) = exp(β² G(t̄*)) · K̂(t*_{q−1}) · Π_i 1{s*_i = t*_{i−1}}
//! ```
//!
//! is nonnegative, irreducible and primitive (its q-th power is entrywise
//! positive), so it has a simple positive eigenvalue `λ(β)` with positive
//! right eigenvector `ν*`. The Doob tilt `Q̃*_β = Q*_β ν*/(λ ν*)` is a Markov
//! kernel whose invariant probability `μ*` extends to the full gap measure
//! `μ(t̄) = Π K(t_j)/K(t*_j) · μ*(t̄*)`.
//!
//! Everything is solved by power iteration with unit-sum renormalization:
//! primitivity makes the iteration geometric, the state spaces stay small
//! (`(q+1)^q ≤ 7776` for the default cap `q ≤ 5`), and each row has exactly
//! `q + 1` structural nonzeros, which the matrix-vector products exploit.

use serde::Serialize;

use crate::disorder::CorrelationProfile;
use crate::error::{Error, Result};
use crate::kernels::{CappedGap, InterArrivalLaw};

/// Largest moving-average order accepted by [`build_qstar`]; beyond it the
/// dense `(q+1)^q × (q+1)^q` matrix gets into hundreds of megabytes and must
/// be requested explicitly via [`build_qstar_unbounded`].
pub const DEFAULT_Q_CAP: usize = 5;

const MAX_POWER_ITERATIONS: usize = 1_000_000;

/// Indexing of the capped state space `E^q`, `E = {1,…,q,⋆}`.
///
/// States are encoded in base `q+1`, most significant digit first, with a
/// finite gap `t` mapping to digit `t−1` and `⋆` to digit `q`. The oldest
/// gap sits in the most significant digit, so appending a gap is a single
/// multiply-add ([`shift`](Self::shift)).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateSpace {
    q: usize,
    size: usize,
}

impl StateSpace {
    pub fn new(q: usize) -> Self {
        let size = (q + 1)
            .checked_pow(q as u32)
            .expect("state space size overflows usize");
        StateSpace { q, size }
    }

    pub fn q(&self) -> usize {
        self.q
    }

    /// Number of states, `(q+1)^q`.
    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn digit(&self, c: CappedGap) -> usize {
        match c {
            CappedGap::Finite(t) => {
                debug_assert!(t >= 1 && t <= self.q);
                t - 1
            }
            CappedGap::Star => self.q,
        }
    }

    fn gap_of_digit(&self, d: usize) -> CappedGap {
        if d < self.q {
            CappedGap::Finite(d + 1)
        } else {
            CappedGap::Star
        }
    }

    pub fn encode(&self, entries: &[CappedGap]) -> usize {
        assert_eq!(entries.len(), self.q);
        entries.iter().fold(0, |acc, &c| acc * (self.q + 1) + self.digit(c))
    }

    pub fn decode(&self, index: usize) -> Vec<CappedGap> {
        debug_assert!(index < self.size);
        let base = self.q + 1;
        let mut out = vec![CappedGap::Star; self.q];
        let mut rest = index;
        for slot in out.iter_mut().rev() {
            *slot = self.gap_of_digit(rest % base);
            rest /= base;
        }
        out
    }

    /// Append a gap: `(s_0,…,s_{q−1}) ↦ (s_1,…,s_{q−1}, next)`.
    pub fn shift(&self, index: usize, next: CappedGap) -> usize {
        if self.q == 0 {
            return 0;
        }
        let keep = self.size / (self.q + 1);
        (index % keep) * (self.q + 1) + self.digit(next)
    }

    /// Oldest gap of the state (the projection `π_0`); `⋆` when `q = 0`.
    pub fn first(&self, index: usize) -> CappedGap {
        if self.q == 0 {
            return CappedGap::Star;
        }
        self.gap_of_digit(index / (self.size / (self.q + 1)))
    }

    /// Most recent gap of the state; `⋆` when `q = 0`.
    pub fn last(&self, index: usize) -> CappedGap {
        if self.q == 0 {
            return CappedGap::Star;
        }
        self.gap_of_digit(index % (self.q + 1))
    }

    /// The alphabet `E` in digit order `1, …, q, ⋆`.
    pub fn alphabet(&self) -> impl Iterator<Item = CappedGap> + '_ {
        (0..=self.q).map(move |d| self.gap_of_digit(d))
    }
}

/// Total correlation energy `G(t̄*) = Σ_{k=0}^{q−1} ρ_{t*_0 ⊕ … ⊕ t*_k}`
/// carried by `q+1` consecutive contacts, with star-absorbing partial sums.
pub fn g_value(space: &StateSpace, state: usize, rho: &CorrelationProfile) -> f64 {
    debug_assert_eq!(space.q(), rho.q());
    let entries = space.decode(state);
    let mut total = 0.0;
    let mut partial: Option<CappedGap> = None;
    for &e in &entries {
        partial = Some(match partial {
            None => e.saturate(space.q()),
            Some(p) => p.star_add(e, space.q()),
        });
        total += rho.rho_capped(partial.unwrap());
    }
    total
}

/// Which matrix a [`TransferMatrix`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MatrixKind {
    /// `Q*_β`, the raw transfer matrix.
    QStar,
    /// `Q̃*_β`, the Doob-tilted Markov kernel.
    TiltedQStar,
    /// `Q̃*_{β,F}`, the exponentially damped tilted kernel.
    TiltedFQStar,
}

/// Dense nonnegative matrix over `E^q`. An entry `(s̄*, t̄*)` can be nonzero
/// only when `t̄*` is a shift of `s̄*`, and the products below only visit
/// those `q+1` structural positions per row.
#[derive(Debug, Clone)]
pub struct TransferMatrix {
    space: StateSpace,
    beta: f64,
    kind: MatrixKind,
    entries: Vec<f64>,
}

impl TransferMatrix {
    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn q(&self) -> usize {
        self.space.q()
    }

    pub fn size(&self) -> usize {
        self.space.len()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    pub fn entry(&self, s: usize, t: usize) -> f64 {
        self.entries[s * self.space.len() + t]
    }

    pub fn row_sum(&self, s: usize) -> f64 {
        let n = self.space.len();
        self.entries[s * n..(s + 1) * n].iter().sum()
    }

    /// `w = M v`, visiting only structural nonzeros.
    pub fn matvec(&self, v: &[f64], w: &mut [f64]) {
        let n = self.space.len();
        for (s, out) in w.iter_mut().enumerate() {
            let mut acc = 0.0;
            for c in self.space.alphabet() {
                let t = self.space.shift(s, c);
                acc += self.entries[s * n + t] * v[t];
            }
            *out = acc;
        }
    }

    /// `w = Mᵀ v`.
    pub fn matvec_t(&self, v: &[f64], w: &mut [f64]) {
        let n = self.space.len();
        w.iter_mut().for_each(|x| *x = 0.0);
        for (s, &vs) in v.iter().enumerate() {
            for c in self.space.alphabet() {
                let t = self.space.shift(s, c);
                w[t] += self.entries[s * n + t] * vs;
            }
        }
    }

    /// New matrix with every entry into target class `c` multiplied by
    /// `factor(c)`; the damping `Q̃*_{β,F}` is exactly such a rescaling.
    pub(crate) fn scaled_by_target_class(&self, kind: MatrixKind, factor: impl Fn(CappedGap) -> f64) -> TransferMatrix {
        let n = self.space.len();
        let mut entries = vec![0.0; n * n];
        for s in 0..n {
            for c in self.space.alphabet() {
                let t = self.space.shift(s, c);
                entries[s * n + t] = self.entries[s * n + t] * factor(c);
            }
        }
        TransferMatrix { space: self.space, beta: self.beta, kind, entries }
    }
}

/// Build `Q*_β` for the given law and correlation profile. The order is read
/// off the profile; `q ≤ 5` unless you opt into the memory cost explicitly.
pub fn build_qstar(law: &InterArrivalLaw, rho: &CorrelationProfile, beta: f64) -> Result<TransferMatrix> {
    if rho.q() > DEFAULT_Q_CAP {
        return Err(Error::invalid(format!(
            "q = {} exceeds the default cap {DEFAULT_Q_CAP} ((q+1)^q states get large); \
             call build_qstar_unbounded if you accept the memory cost",
            rho.q()
        )));
    }
    build_qstar_unbounded(law, rho, beta)
}

/// As [`build_qstar`] without the order cap. A `(q+1)^q` dense matrix for
/// `q = 6` already needs ~9.7 GiB; you have been warned.
pub fn build_qstar_unbounded(law: &InterArrivalLaw, rho: &CorrelationProfile, beta: f64) -> Result<TransferMatrix> {
    if beta < 0.0 || !beta.is_finite() {
        return Err(Error::invalid(format!("beta must be nonnegative, got {beta}")));
    }
    let q = rho.q();
    if law.n_max() < q + 2 {
        return Err(Error::invalid(format!(
            "law tabulated to n_max = {} cannot resolve q = {q} (need n_max ≥ q+2)",
            law.n_max()
        )));
    }
    let norm = 1.0 - law.k_infinity();
    let space = StateSpace::new(q);
    // K̂ per class, in digit order 1, …, q, ⋆
    let class_mass: Vec<f64> = space.alphabet().map(|c| law.class_mass(c, q) / norm).collect();
    if class_mass.iter().any(|&m| !(m.is_finite() && m > 0.0)) {
        return Err(Error::invalid("every class mass K̂(1), …, K̂(q), K̂(⋆) must be positive"));
    }
    let n = space.len();
    let g: Vec<f64> = (0..n).map(|t| g_value(&space, t, rho)).collect();
    let b2 = beta * beta;
    let mut entries = vec![0.0; n * n];
    for s in 0..n {
        for (d, c) in space.alphabet().enumerate() {
            let t = space.shift(s, c);
            entries[s * n + t] = (b2 * g[t]).exp() * class_mass[d];
        }
    }
    Ok(TransferMatrix { space, beta, kind: MatrixKind::QStar, entries })
}

/// Perron–Frobenius eigenvalue, right eigenvector (unit sum), and the
/// invariant probability of the associated tilted kernel.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralData {
    /// Perron–Frobenius eigenvalue `λ(β)`.
    pub lambda: f64,
    /// Right eigenvector `ν*`, entrywise positive, normalized to unit sum.
    pub nu_star: Vec<f64>,
    /// Invariant probability `μ*` of `Q̃*_β` (proportional to the left
    /// eigenvector times `ν*`).
    pub mu_star: Vec<f64>,
    /// Total power iterations spent (right + left phase).
    pub iterations: usize,
    /// Worst relative eigen-residual of the two phases.
    pub residual: f64,
}

/// JSON shape of a spectral dump: states appear in encoding order.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralDump {
    pub q: usize,
    pub beta: f64,
    pub lambda: f64,
    pub residual: f64,
    pub nu_star: Vec<f64>,
    pub mu_star: Vec<f64>,
}

impl SpectralData {
    pub fn dump(&self, m: &TransferMatrix) -> SpectralDump {
        SpectralDump {
            q: m.q(),
            beta: m.beta(),
            lambda: self.lambda,
            residual: self.residual,
            nu_star: self.nu_star.clone(),
            mu_star: self.mu_star.clone(),
        }
    }
}

/// Power iteration with unit-sum renormalization and a deterministic
/// all-ones start (valid because the target eigenvector is positive).
/// Returns `(λ, eigenvector, iterations, residual)`.
fn power_iterate(
    n: usize,
    tol: f64,
    mut apply: impl FnMut(&[f64], &mut [f64]),
) -> Result<(f64, Vec<f64>, usize, f64)> {
    let mut v = vec![1.0 / n as f64; n];
    let mut w = vec![0.0; n];
    let mut lambda = 0.0;
    let mut residual = f64::INFINITY;
    for it in 1..=MAX_POWER_ITERATIONS {
        apply(&v, &mut w);
        lambda = w.iter().sum();
        if !lambda.is_finite() || lambda <= 0.0 {
            return Err(Error::NumericalFailure(format!(
                "power iteration produced a nonpositive eigenvalue estimate {lambda}"
            )));
        }
        residual = v
            .iter()
            .zip(w.iter())
            .map(|(&vi, &wi)| (wi - lambda * vi).abs())
            .fold(0.0f64, f64::max)
            / lambda;
        for (vi, &wi) in v.iter_mut().zip(w.iter()) {
            *vi = wi / lambda;
        }
        if residual <= tol {
            return Ok((lambda, v, it, residual));
        }
    }
    Err(Error::NumericalFailure(format!(
        "power iteration did not reach tol = {tol:.3e} after {MAX_POWER_ITERATIONS} iterations \
         (residual = {residual:.3e}, lambda = {lambda:.17e})"
    )))
}

/// Solve for the Perron–Frobenius data of a transfer matrix.
///
/// `tol` bounds the relative eigen-residual `‖Mν − λν‖_∞ / λ` (and the same
/// for the left phase); `1e-13` is a good default at these matrix sizes.
pub fn perron(m: &TransferMatrix, tol: f64) -> Result<SpectralData> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let n = m.size();
    let (lambda, nu_star, it_right, res_right) = power_iterate(n, tol, |v, w| m.matvec(v, w))?;
    let (lambda_left, left, it_left, res_left) = power_iterate(n, tol, |v, w| m.matvec_t(v, w))?;
    if (lambda_left - lambda).abs() > 1e-8 * lambda.max(1.0) {
        return Err(Error::NumericalInconsistency(format!(
            "left and right eigenvalue estimates disagree: {lambda:.17e} vs {lambda_left:.17e}"
        )));
    }
    // μ*(i) ∝ left(i) ν*(i): left-invariance of μ* under the tilted kernel
    // is the defining relation uQ = λu rewritten through the Doob transform.
    let mut mu_star: Vec<f64> = left.iter().zip(nu_star.iter()).map(|(&u, &v)| u * v).collect();
    let total: f64 = mu_star.iter().sum();
    mu_star.iter_mut().for_each(|x| *x /= total);
    Ok(SpectralData {
        lambda,
        nu_star,
        mu_star,
        iterations: it_right + it_left,
        residual: res_right.max(res_left),
    })
}

/// Doob tilt `Q̃*_β(s̄*,t̄*) = Q*_β(s̄*,t̄*) ν*(t̄*) / (λ ν*(s̄*))`; a Markov
/// kernel with the same incidence pattern.
pub fn tilted_kernel(m: &TransferMatrix, s: &SpectralData) -> TransferMatrix {
    assert_eq!(m.kind(), MatrixKind::QStar, "tilt applies to the raw transfer matrix");
    let n = m.size();
    let mut entries = vec![0.0; n * n];
    for src in 0..n {
        for c in m.space.alphabet() {
            let t = m.space.shift(src, c);
            entries[src * n + t] = m.entries[src * n + t] * s.nu_star[t] / (s.lambda * s.nu_star[src]);
        }
    }
    TransferMatrix { space: m.space, beta: m.beta, kind: MatrixKind::TiltedQStar, entries }
}

/// Invariant probability `μ*` of a tilted kernel, the full gap measure `μ`,
/// and the mean spacing of the tilted renewal process.
#[derive(Debug, Clone)]
pub struct InvariantMeasure {
    space: StateSpace,
    mu_star: Vec<f64>,
    law: InterArrivalLaw,
    /// `c = Σ t_0 μ(t̄)`; `+∞` in the null-recurrent regime (α ≤ 1).
    mean_spacing: f64,
}

impl InvariantMeasure {
    pub fn mu_star(&self) -> &[f64] {
        &self.mu_star
    }

    /// `μ(t̄) = Π_j K(t_j)/K(t*_j) · μ*(t̄*)` for a concrete gap tuple.
    pub fn mu(&self, gaps: &[usize]) -> f64 {
        let q = self.space.q();
        assert_eq!(gaps.len(), q);
        let caps: Vec<CappedGap> = gaps.iter().map(|&t| crate::kernels::cap(t, q)).collect();
        let mut value = self.mu_star[self.space.encode(&caps)];
        for (&t, &c) in gaps.iter().zip(caps.iter()) {
            if c == CappedGap::Star {
                value *= self.law.mass(t) / self.law.star_mass(q);
            }
        }
        value
    }

    /// Mean gap `c` of the tilted process; `ı̃_N/N → 1/c` when finite.
    pub fn mean_spacing(&self) -> f64 {
        self.mean_spacing
    }
}

/// Compute `μ*` by power iteration on the transpose of the tilted kernel,
/// plus the mean spacing `c = Σ_{s̄*} μ*(s̄*) m(s*_0)` with `m(t) = t` for
/// `t ≤ q` and `m(⋆) = E[T | T > q]` (infinite when α ≤ 1, reported as such).
pub fn invariant_mu(m_tilde: &TransferMatrix, law: &InterArrivalLaw, tol: f64) -> Result<InvariantMeasure> {
    if m_tilde.kind() != MatrixKind::TiltedQStar {
        return Err(Error::invalid("invariant_mu expects the tilted kernel Q̃*_β"));
    }
    let n = m_tilde.size();
    let (lambda, mut mu_star, _, _) = power_iterate(n, tol, |v, w| m_tilde.matvec_t(v, w))?;
    if (lambda - 1.0).abs() > 1e-9 {
        return Err(Error::NumericalInconsistency(format!(
            "tilted kernel is not stochastic: left eigenvalue {lambda:.17e}"
        )));
    }
    let total: f64 = mu_star.iter().sum();
    mu_star.iter_mut().for_each(|x| *x /= total);

    let q = m_tilde.q();
    let tail_mean = law.tail_conditional_mean(q);
    let mean_spacing = if tail_mean.is_infinite() {
        f64::INFINITY
    } else {
        (0..n)
            .map(|s| {
                let m0 = match m_tilde.space.first(s) {
                    CappedGap::Finite(t) => t as f64,
                    CappedGap::Star => tail_mean,
                };
                mu_star[s] * m0
            })
            .sum()
    };
    Ok(InvariantMeasure { space: m_tilde.space, mu_star, law: law.clone(), mean_spacing })
}
