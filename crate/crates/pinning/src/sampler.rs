//! Simulation of the tilted "q-correlated" renewal process.
//!
//! The first `q` gaps are i.i.d. `K̂`; afterwards each gap is drawn in two
//! stages: its capped class from the `Q̃*_β` row of the current state, then,
//! when the class is `⋆`, the integer length from `K̂` conditioned on
//! `T > q`. The two stages compose to the exact transition law because for
//! `t > q` the weight factorizes as `K̂(t) ×` a constant in `t`. In the
//! positive recurrent regime the contact density `ı_N / N` converges to
//! `1/c`, with `c` the mean spacing reported by
//! [`invariant_mu`](crate::transfer::invariant_mu).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::disorder::CorrelationProfile;
use crate::error::Result;
use crate::kernels::{CappedGap, InterArrivalLaw};
use crate::transfer::{build_qstar, tilted_kernel, SpectralData, StateSpace, TransferMatrix};

/// A sampled contact path up to a horizon.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ContactPath {
    /// Every gap drawn, in order; the last one overshoots the horizon.
    pub gaps: Vec<usize>,
    /// Contact positions within the horizon, starting at 0.
    pub contacts: Vec<usize>,
    pub horizon: usize,
    pub seed: u64,
}

impl ContactPath {
    /// Number of contacts in `[1, horizon]`.
    pub fn num_contacts(&self) -> usize {
        self.contacts.len() - 1
    }

    /// `ı_N / N`.
    pub fn density(&self) -> f64 {
        self.num_contacts() as f64 / self.horizon as f64
    }
}

/// Per-state cumulative class weights of a tilted kernel, for inversion.
struct RowSampler {
    space: StateSpace,
    /// `cum[s * (q+1) + d]` = cumulative transition weight of digit `d`.
    cum: Vec<f64>,
}

impl RowSampler {
    fn new(tilted: &TransferMatrix) -> Self {
        let space = *tilted.space();
        let base = space.q() + 1;
        let mut cum = vec![0.0; space.len() * base];
        for s in 0..space.len() {
            let mut acc = 0.0;
            for (d, c) in space.alphabet().enumerate() {
                acc += tilted.entry(s, space.shift(s, c));
                cum[s * base + d] = acc;
            }
        }
        RowSampler { space, cum }
    }

    fn draw<R: Rng>(&self, state: usize, rng: &mut R) -> CappedGap {
        let base = self.space.q() + 1;
        let row = &self.cum[state * base..(state + 1) * base];
        let u: f64 = rng.gen::<f64>() * row[base - 1];
        let d = row.partition_point(|&c| c < u).min(base - 1);
        if d < self.space.q() {
            CappedGap::Finite(d + 1)
        } else {
            CappedGap::Star
        }
    }
}

/// Sample the tilted process to the horizon `n`. Deterministic given the
/// seed, bit for bit.
pub fn sample_tilde(
    law: &InterArrivalLaw,
    rho: &CorrelationProfile,
    beta: f64,
    spectral: &SpectralData,
    n: usize,
    seed: u64,
) -> Result<ContactPath> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_tilde_with(law, rho, beta, spectral, n, seed, &mut rng)
}

/// As [`sample_tilde`] with a caller-owned stream (one per path in an
/// ensemble).
pub fn sample_tilde_with<R: Rng>(
    law: &InterArrivalLaw,
    rho: &CorrelationProfile,
    beta: f64,
    spectral: &SpectralData,
    n: usize,
    seed: u64,
    rng: &mut R,
) -> Result<ContactPath> {
    let m = build_qstar(law, rho, beta)?;
    let tilted = tilted_kernel(&m, spectral);
    let rows = RowSampler::new(&tilted);
    let hat = law.hat();
    let q = rho.q();
    let space = *tilted.space();

    let mut gaps = Vec::new();
    let mut contacts = vec![0usize];
    let mut pos = 0usize;
    let mut initial: Vec<CappedGap> = Vec::with_capacity(q);

    // initial gaps, i.i.d. K̂
    for _ in 0..q {
        if pos > n {
            break;
        }
        let g = hat.sample_gap(rng);
        gaps.push(g);
        initial.push(crate::kernels::cap(g, q));
        pos += g;
        if pos <= n {
            contacts.push(pos);
        }
    }
    if initial.len() == q && pos <= n {
        let mut state = space.encode(&initial);
        while pos <= n {
            let class = rows.draw(state, rng);
            let g = match class {
                CappedGap::Finite(t) => t,
                CappedGap::Star => hat.sample_gap_over(q, rng),
            };
            gaps.push(g);
            pos += g;
            if pos <= n {
                contacts.push(pos);
            }
            state = space.shift(state, class);
        }
    }
    Ok(ContactPath { gaps, contacts, horizon: n, seed })
}

/// Ensemble estimate of the limiting contact density.
#[derive(Debug, Clone, Serialize)]
pub struct DensityEstimate {
    /// Mean of `ı_N / N` over the ensemble.
    pub mean: f64,
    /// Standard error of that mean.
    pub stderr: f64,
    pub paths: usize,
}

/// Average `ı_N / N` over an ensemble of paths, with a confidence band.
pub fn lln_contact_density(paths: &[ContactPath]) -> DensityEstimate {
    assert!(!paths.is_empty(), "need at least one path");
    let ds: Vec<f64> = paths.iter().map(|p| p.density()).collect();
    let mean = ds.iter().sum::<f64>() / ds.len() as f64;
    let stderr = if ds.len() > 1 {
        let var = ds.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (ds.len() as f64 - 1.0);
        (var / ds.len() as f64).sqrt()
    } else {
        0.0
    };
    DensityEstimate { mean, stderr, paths: paths.len() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disorder::MovingAverage;
    use crate::kernels::{build_zeta_law, renewal_mass};
    use crate::transfer::{invariant_mu, perron};

    fn setup(alpha: f64, coeffs: &[f64], beta: f64, n_max: usize) -> (InterArrivalLaw, CorrelationProfile, SpectralData) {
        let law = build_zeta_law(alpha, 0.0, n_max).unwrap();
        let rho = MovingAverage::new(coeffs.to_vec()).unwrap().correlations();
        let m = build_qstar(&law, &rho, beta).unwrap();
        let s = perron(&m, 1e-13).unwrap();
        (law, rho, s)
    }

    #[test]
    fn paths_are_seed_deterministic() {
        let (law, rho, s) = setup(1.5, &[0.8, 0.36, 0.48], 0.9, 10_000);
        let a = sample_tilde(&law, &rho, 0.9, &s, 5_000, 424_242).unwrap();
        let b = sample_tilde(&law, &rho, 0.9, &s, 5_000, 424_242).unwrap();
        assert_eq!(a, b);
        let c = sample_tilde(&law, &rho, 0.9, &s, 5_000, 424_243).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn path_invariants_hold() {
        let (law, rho, s) = setup(1.0, &[0.6, 0.8], 1.2, 10_000);
        let p = sample_tilde(&law, &rho, 1.2, &s, 2_000, 7).unwrap();
        assert_eq!(p.contacts[0], 0);
        assert!(p.contacts.windows(2).all(|w| w[1] > w[0]));
        let last = *p.contacts.last().unwrap();
        let total: usize = p.gaps.iter().sum();
        assert!(last <= p.horizon);
        assert!(total > p.horizon, "the final gap must overshoot");
        assert_eq!(p.gaps.iter().take_while(|_| false).count(), 0);
        assert!((p.density() - p.num_contacts() as f64 / 2000.0).abs() < 1e-15);
    }

    #[test]
    fn beta_zero_gap_histogram_matches_khat() {
        // at β = 0 the process is a plain K̂ renewal; compare class
        // frequencies {1, 2, 3, >3} over one long path (gaps are i.i.d.)
        let (law, rho, s) = setup(1.0, &[0.8, 0.36, 0.48], 0.0, 100_000);
        let path = sample_tilde(&law, &rho, 0.0, &s, 150_000, 99).unwrap();
        let n = path.gaps.len() as f64;
        for t in 1..=3usize {
            let p_expect = law.mass(t);
            let count = path.gaps.iter().filter(|&&g| g == t).count() as f64;
            let se = (p_expect * (1.0 - p_expect) / n).sqrt();
            assert!(
                (count / n - p_expect).abs() < 4.0 * se,
                "t={t}: {} vs {p_expect} (se={se})",
                count / n
            );
        }
    }

    #[test]
    fn two_stage_draws_match_tilted_rows() {
        // transitions out of a fixed state are i.i.d. draws from its row, so
        // binomial bands apply exactly, conditionally on the visit count
        let (law, rho, s) = setup(1.0, &[0.8, 0.36, 0.48], 1.0, 10_000);
        let m = build_qstar(&law, &rho, 1.0).unwrap();
        let tilted = tilted_kernel(&m, &s);
        let space = *tilted.space();
        let q = rho.q();
        let path = sample_tilde(&law, &rho, 1.0, &s, 400_000, 2718).unwrap();
        // replay the state sequence from the recorded gaps
        let caps: Vec<CappedGap> = path.gaps.iter().map(|&g| crate::kernels::cap(g, q)).collect();
        let mut visits = vec![0usize; space.len()];
        let mut class_counts = vec![0usize; space.len() * (q + 1)];
        let mut state = space.encode(&caps[0..q]);
        for &c in &caps[q..] {
            visits[state] += 1;
            let d = match c {
                CappedGap::Finite(t) => t - 1,
                CappedGap::Star => q,
            };
            class_counts[state * (q + 1) + d] += 1;
            state = space.shift(state, c);
        }
        for st in 0..space.len() {
            if visits[st] < 2_000 {
                continue;
            }
            let n = visits[st] as f64;
            for (d, c) in space.alphabet().enumerate() {
                let p = tilted.entry(st, space.shift(st, c));
                let freq = class_counts[st * (q + 1) + d] as f64 / n;
                let se = (p * (1.0 - p) / n).sqrt().max(1e-9);
                assert!(
                    (freq - p).abs() < 4.0 * se,
                    "state {st} class {c}: {freq} vs {p} (n={n})"
                );
            }
        }
    }

    #[test]
    fn state_occupancy_matches_mu_star() {
        let (law, rho, s) = setup(1.5, &[0.6, 0.8], 1.1, 50_000);
        let m = build_qstar(&law, &rho, 1.1).unwrap();
        let tilted = tilted_kernel(&m, &s);
        let inv = invariant_mu(&tilted, &law, 1e-13).unwrap();
        let q = rho.q();
        let space = *tilted.space();
        let path = sample_tilde(&law, &rho, 1.1, &s, 500_000, 31_415).unwrap();
        let caps: Vec<CappedGap> = path.gaps.iter().map(|&g| crate::kernels::cap(g, q)).collect();
        let mut counts = vec![0usize; space.len()];
        let mut state = space.encode(&caps[0..q]);
        let mut total = 0usize;
        for &c in &caps[q..] {
            counts[state] += 1;
            total += 1;
            state = space.shift(state, c);
        }
        // consecutive states are dependent; use a conservative effective
        // sample size for the bands
        let n_eff = total as f64 / (2.0 * q as f64 + 1.0);
        for (st, &count) in counts.iter().enumerate() {
            let p = inv.mu_star()[st];
            let freq = count as f64 / total as f64;
            let se = (p * (1.0 - p) / n_eff).sqrt();
            assert!((freq - p).abs() < 4.0 * se, "state {st}: {freq} vs {p}");
        }
    }

    #[test]
    fn positive_rho_tilt_favors_short_gaps() {
        let (law, rho, s) = setup(1.0, &[std::f64::consts::FRAC_1_SQRT_2; 2], 1.6, 10_000);
        let path = sample_tilde(&law, &rho, 1.6, &s, 200_000, 5).unwrap();
        let frac_one = path.gaps.iter().filter(|&&g| g == 1).count() as f64 / path.gaps.len() as f64;
        assert!(
            frac_one > law.mass(1) + 0.02,
            "tilt should favor gap 1: {frac_one} vs K̂(1) = {}",
            law.mass(1)
        );
    }

    #[test]
    fn small_horizon_density_sanity() {
        // β = 0, N = 10: ensemble mean of ı_N/N within 25% of 1/E[T], and
        // within a CLT band of the exact value Σ_{n≤10} u_n / 10
        let (law, rho, s) = setup(2.0, &[0.8, 0.36, 0.48], 0.0, 10_000);
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        let paths: Vec<ContactPath> = (0..4_000)
            .map(|i| {
                rng.set_stream(i);
                sample_tilde_with(&law, &rho, 0.0, &s, 10, i, &mut rng).unwrap()
            })
            .collect();
        let est = lln_contact_density(&paths);
        let inv_mean_gap = 1.0 / law.mean_gap();
        assert!((est.mean - inv_mean_gap).abs() < 0.25 * inv_mean_gap);
        let u = renewal_mass(&law, 10).unwrap();
        let exact = (1..=10).map(|n| u.get(n)).sum::<f64>() / 10.0;
        assert!(
            (est.mean - exact).abs() < 4.0 * est.stderr,
            "{} vs exact {exact} (se {})",
            est.mean,
            est.stderr
        );
    }

    #[test]
    fn tilted_density_approaches_inverse_mean_spacing() {
        let (law, rho, s) = setup(2.0, &[0.8, 0.36, 0.48], 1.0, 20_000);
        let m = build_qstar(&law, &rho, 1.0).unwrap();
        let inv = invariant_mu(&tilted_kernel(&m, &s), &law, 1e-13).unwrap();
        let c = inv.mean_spacing();
        assert!(c.is_finite());
        let mut rng = ChaCha8Rng::seed_from_u64(909);
        let paths: Vec<ContactPath> = (0..10)
            .map(|i| {
                rng.set_stream(i);
                sample_tilde_with(&law, &rho, 1.0, &s, 200_000, i, &mut rng).unwrap()
            })
            .collect();
        let est = lln_contact_density(&paths);
        let target = 1.0 / c;
        assert!(
            (est.mean - target).abs() < 0.02 * target,
            "density {} vs 1/c = {target}",
            est.mean
        );
    }
}
