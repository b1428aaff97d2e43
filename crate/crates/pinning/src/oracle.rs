//! Ground-truth evaluation of the annealed partition function.
//!
//! Averaging the Boltzmann factor over the Gaussian disorder leaves
//!
//! ```text
//! Z_c(N) = E[ exp( (h + β²/2) Σ δ_n + β² Σ_{i<j} ρ_{j−i} δ_i δ_j ) δ_N ]
//! ```
//!
//! summed over renewal configurations with a contact at `N`. Three
//! independent routes compute it: exact enumeration over all `2^{N−1}`
//! configurations (small `N`), a forward dynamic program whose state is the
//! capped pattern of the last `q` contact gaps (lossless, since `ρ` vanishes
//! beyond `q`), and a Monte Carlo average of exact quenched partition
//! functions over disorder realizations. All accumulation is in the log
//! domain with compensated, max-shifted sums.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::disorder::{CorrelationProfile, MovingAverage};
use crate::error::{Error, Result};
use crate::kernels::{CappedGap, InterArrivalLaw};
use crate::transfer::StateSpace;

/// Largest horizon [`exact_enum_z`] accepts (2^{N−1} configurations).
pub const ENUM_HORIZON_CAP: usize = 22;

/// Which route produced a partition value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Enum,
    Dp,
    Mc,
}

/// One evaluation of `log Z_c(N; β, h)`.
#[derive(Debug, Clone, Serialize)]
pub struct PartitionValue {
    pub n: usize,
    pub beta: f64,
    pub h: f64,
    pub log_value: f64,
    pub method: Method,
    /// Linear-domain standard error of the mean (Monte Carlo only).
    pub stderr: Option<f64>,
}

/// Max-shifted log-sum accumulator with Neumaier compensation, so that two
/// different summation orders of the same terms agree to a few ulps even
/// over millions of pushes.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LogSum {
    max: f64,
    sum: f64,
    comp: f64,
}

impl LogSum {
    pub(crate) const EMPTY: LogSum = LogSum { max: f64::NEG_INFINITY, sum: 0.0, comp: 0.0 };

    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn push(&mut self, log_term: f64) {
        if log_term == f64::NEG_INFINITY {
            return;
        }
        if log_term <= self.max {
            self.add((log_term - self.max).exp());
        } else {
            if self.max > f64::NEG_INFINITY {
                let rescale = (self.max - log_term).exp();
                self.sum = (self.sum + self.comp) * rescale;
                self.comp = 0.0;
            }
            self.max = log_term;
            self.add(1.0);
        }
    }

    pub(crate) fn value(&self) -> f64 {
        let s = self.sum + self.comp;
        if s > 0.0 {
            self.max + s.ln()
        } else {
            f64::NEG_INFINITY
        }
    }
}

fn check_inputs(law: &InterArrivalLaw, beta: f64, n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("horizon must be at least 1"));
    }
    if beta < 0.0 || !beta.is_finite() {
        return Err(Error::invalid(format!("beta must be nonnegative, got {beta}")));
    }
    if law.n_max() < n {
        return Err(Error::invalid(format!(
            "law tabulated to {} cannot cover gaps up to the horizon {n}",
            law.n_max()
        )));
    }
    Ok(())
}

/// Exact sum over every renewal configuration with a contact at `n`
/// (`n ≤ 22`; the count is `2^{n−1}`).
pub fn exact_enum_z(
    law: &InterArrivalLaw,
    rho: &CorrelationProfile,
    beta: f64,
    h: f64,
    n: usize,
) -> Result<PartitionValue> {
    check_inputs(law, beta, n)?;
    if n > ENUM_HORIZON_CAP {
        return Err(Error::invalid(format!(
            "exact enumeration refuses n = {n} > {ENUM_HORIZON_CAP} (2^{} configurations)",
            n - 1
        )));
    }
    let q = rho.q();
    let field = h + 0.5 * beta * beta;
    let b2 = beta * beta;
    let ln_mass: Vec<f64> = (0..=n).map(|t| if t == 0 { f64::NEG_INFINITY } else { law.mass(t).ln() }).collect();
    let mut acc = LogSum::EMPTY;
    let mut contacts: Vec<usize> = Vec::with_capacity(n);
    for mask in 0u64..(1u64 << (n - 1)) {
        contacts.clear();
        for bit in 0..n - 1 {
            if mask >> bit & 1 == 1 {
                contacts.push(bit + 1);
            }
        }
        contacts.push(n);
        let mut logw = field * contacts.len() as f64;
        let mut prev = 0usize;
        for &c in &contacts {
            logw += ln_mass[c - prev];
            prev = c;
        }
        let mut pairs = 0.0;
        for j in 1..contacts.len() {
            for i in (0..j).rev() {
                let d = contacts[j] - contacts[i];
                if d > q {
                    break;
                }
                pairs += rho.rho(d);
            }
        }
        acc.push(logw + b2 * pairs);
    }
    Ok(PartitionValue { n, beta, h, log_value: acc.value(), method: Method::Enum, stderr: None })
}

/// Pair energy collected by a new contact arriving after gap `t`, given the
/// capped pattern of the previous `q` gaps. Walks backwards through the
/// state; a `⋆` (or a running distance beyond `q`) kills everything older.
fn arrival_energy(space: &StateSpace, rho: &CorrelationProfile, state_entries: &[CappedGap], t: usize) -> f64 {
    let q = space.q();
    let mut distance = crate::kernels::cap(t, q);
    let mut total = rho.rho_capped(distance);
    for j in (1..q).rev() {
        if distance == CappedGap::Star {
            break;
        }
        distance = distance.star_add(state_entries[j], q);
        total += rho.rho_capped(distance);
    }
    total
}

/// `log Z_c(p)` for every `p = 0..=n`, by the forward capped-state DP. Entry
/// 0 is `log 1 = 0`.
pub fn dp_log_profile(
    law: &InterArrivalLaw,
    rho: &CorrelationProfile,
    beta: f64,
    h: f64,
    n: usize,
) -> Result<Vec<f64>> {
    check_inputs(law, beta, n)?;
    let q = rho.q();
    let space = StateSpace::new(q);
    let states = space.len();
    let field = h + 0.5 * beta * beta;
    let b2 = beta * beta;
    let ln_mass: Vec<f64> = (0..=n).map(|t| if t == 0 { f64::NEG_INFINITY } else { law.mass(t).ln() }).collect();

    // per-state tables: arrival energies for short gaps, shift targets
    let all_star = space.encode(&vec![CappedGap::Star; q]);
    let mut energy = vec![0.0; states * (q + 1)];
    let mut shift_fin = vec![0usize; states * (q + 1)];
    let mut shift_star = vec![0usize; states];
    for s in 0..states {
        let entries = space.decode(s);
        for t in 1..=q {
            energy[s * (q + 1) + t] = arrival_energy(&space, rho, &entries, t);
            shift_fin[s * (q + 1) + t] = space.shift(s, CappedGap::Finite(t));
        }
        shift_star[s] = space.shift(s, CappedGap::Star);
    }

    let mut cells = vec![LogSum::EMPTY; (n + 1) * states];
    // first contact: no prior contacts, no pair energy, state stays all-⋆
    for c in 1..=n {
        cells[c * states + all_star].push(ln_mass[c] + field);
    }
    for p in 1..n {
        for s in 0..states {
            let v = cells[p * states + s].value();
            if v == f64::NEG_INFINITY {
                continue;
            }
            let reach = n - p;
            for t in 1..=q.min(reach) {
                let target = (p + t) * states + shift_fin[s * (q + 1) + t];
                cells[target].push(v + ln_mass[t] + field + b2 * energy[s * (q + 1) + t]);
            }
            let star_target = shift_star[s];
            for t in q + 1..=reach {
                cells[(p + t) * states + star_target].push(v + ln_mass[t] + field);
            }
        }
    }
    let mut profile = Vec::with_capacity(n + 1);
    profile.push(0.0);
    for p in 1..=n {
        let mut acc = LogSum::EMPTY;
        for s in 0..states {
            acc.push(cells[p * states + s].value());
        }
        profile.push(acc.value());
    }
    Ok(profile)
}

/// `Z_c(N)` through the capped-state dynamic program; exact up to rounding
/// (the Hamiltonian uses true pair correlations, and the capped state loses
/// nothing because `ρ` vanishes beyond `q`).
pub fn dp_z(
    law: &InterArrivalLaw,
    rho: &CorrelationProfile,
    beta: f64,
    h: f64,
    n: usize,
) -> Result<PartitionValue> {
    let profile = dp_log_profile(law, rho, beta, h, n)?;
    Ok(PartitionValue { n, beta, h, log_value: profile[n], method: Method::Dp, stderr: None })
}

/// Exact quenched constrained partition function for a frozen disorder path:
/// `Z_c(m) = e^{βω_m + h} Σ_t K(t) Z_c(m−t)`.
pub fn quenched_dp_z(
    law: &InterArrivalLaw,
    omega: &[f64],
    beta: f64,
    h: f64,
    n: usize,
) -> Result<PartitionValue> {
    check_inputs(law, beta, n)?;
    if omega.len() < n {
        return Err(Error::invalid(format!(
            "disorder path of length {} is shorter than the horizon {n}",
            omega.len()
        )));
    }
    let ln_mass: Vec<f64> = (0..=n).map(|t| if t == 0 { f64::NEG_INFINITY } else { law.mass(t).ln() }).collect();
    let mut log_z = Vec::with_capacity(n + 1);
    log_z.push(0.0);
    for m in 1..=n {
        let mut acc = LogSum::EMPTY;
        for t in 1..=m {
            acc.push(ln_mass[t] + log_z[m - t]);
        }
        log_z.push(acc.value() + beta * omega[m - 1] + h);
    }
    Ok(PartitionValue { n, beta, h, log_value: log_z[n], method: Method::Dp, stderr: None })
}

/// Monte Carlo annealed partition function: the mean of quenched values over
/// seeded disorder streams, averaged in linear domain with a max shift.
///
/// `stderr` is the linear-domain standard error of that mean; it is 0 at
/// `β = 0` and positive otherwise.
pub fn mc_annealed_z(
    law: &InterArrivalLaw,
    ma: &MovingAverage,
    beta: f64,
    h: f64,
    n: usize,
    samples: usize,
    seed: u64,
) -> Result<PartitionValue> {
    if samples < 100 {
        return Err(Error::invalid("mc_annealed_z needs at least 100 samples"));
    }
    let mut logs = Vec::with_capacity(samples);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..samples {
        rng.set_stream(i as u64);
        let omega = ma.sample_path_with(n, &mut rng);
        logs.push(quenched_dp_z(law, &omega, beta, h, n)?.log_value);
    }
    let shift = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logs.iter().map(|&l| (l - shift).exp()).collect();
    let mean: f64 = weights.iter().sum::<f64>() / samples as f64;
    let var: f64 = weights.iter().map(|&w| (w - mean) * (w - mean)).sum::<f64>() / (samples as f64 - 1.0);
    let stderr = shift.exp() * (var / samples as f64).sqrt();
    Ok(PartitionValue {
        n,
        beta,
        h,
        log_value: shift + mean.ln(),
        method: Method::Mc,
        stderr: Some(stderr),
    })
}

/// Free-energy estimate from a grid of horizons.
#[derive(Debug, Clone, Serialize)]
pub struct GrowthRateEstimate {
    /// `(log Z_{N_k} − log Z_{N_{k−1}}) / (N_k − N_{k−1})` at the last pair.
    pub estimate: f64,
    /// Max − min of the successive differences, a finite-size diagnostic.
    pub spread: f64,
    /// All successive differences, in grid order.
    pub diffs: Vec<f64>,
}

/// Estimate `F_ann(β,h) = lim (1/N) log Z_c(N)` by successive differences
/// over an increasing horizon grid (one DP run at the largest horizon).
pub fn growth_rate(
    law: &InterArrivalLaw,
    rho: &CorrelationProfile,
    beta: f64,
    h: f64,
    n_grid: &[usize],
) -> Result<GrowthRateEstimate> {
    if n_grid.len() < 3 {
        return Err(Error::invalid("growth_rate needs at least 3 horizons"));
    }
    if n_grid.windows(2).any(|w| w[1] <= w[0]) || n_grid[0] == 0 {
        return Err(Error::invalid("horizons must be positive and strictly increasing"));
    }
    let profile = dp_log_profile(law, rho, beta, h, *n_grid.last().unwrap())?;
    let diffs: Vec<f64> = n_grid
        .windows(2)
        .map(|w| (profile[w[1]] - profile[w[0]]) / (w[1] - w[0]) as f64)
        .collect();
    let spread = diffs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - diffs.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(GrowthRateEstimate { estimate: *diffs.last().unwrap(), spread, diffs })
}
