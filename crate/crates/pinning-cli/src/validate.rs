//! The validation suite behind `pinning validate`: closed forms against the
//! eigenvalue route, the oracle triangle (enumeration / DP / Monte Carlo),
//! tilted-kernel identities, sampler statistics, and (full mode) growth-rate
//! and LLN checks. Emits one record per check.

use pinning::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Check {
    fn abs_within(name: &str, lhs: f64, tolerance: f64) -> Self {
        Check { name: name.into(), lhs, rhs: 0.0, tolerance, pass: lhs.abs() <= tolerance, note: None }
    }

    fn close_to(name: &str, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        Check { name: name.into(), lhs, rhs, tolerance, pass: (lhs - rhs).abs() <= tolerance, note: None }
    }

    fn at_least(name: &str, lhs: f64, floor: f64) -> Self {
        Check { name: name.into(), lhs, rhs: floor, tolerance: 0.0, pass: lhs >= floor, note: None }
    }

    fn skipped(name: &str, note: String) -> Self {
        Check { name: name.into(), lhs: 0.0, rhs: 0.0, tolerance: 0.0, pass: true, note: Some(note) }
    }

    fn noted(mut self, note: String) -> Self {
        self.note = Some(note);
        self
    }
}

pub struct Suite {
    pub law: InterArrivalLaw,
    pub ma: MovingAverage,
    pub seed: u64,
    pub tol: f64,
    pub quick: bool,
}

pub fn run(suite: &Suite) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let law = &suite.law;
    let ma = &suite.ma;
    let rho = ma.correlations();
    let tol = suite.tol;

    checks.push(Check::abs_within("law_total_mass", law.total_mass() - 1.0, 1e-12));

    // spectral identities at β = 0 and along a β sweep
    let m0 = build_qstar(law, &rho, 0.0)?;
    let s0 = perron(&m0, tol)?;
    checks.push(Check::abs_within("lambda_at_beta_zero", s0.lambda - 1.0, 1e-13));

    let mut worst_row = 0.0f64;
    let mut worst_inv = 0.0f64;
    for &beta in &[0.4, 0.9, 1.6] {
        let m = build_qstar(law, &rho, beta)?;
        let s = perron(&m, tol)?;
        let tilted = tilted_kernel(&m, &s);
        for row in 0..tilted.size() {
            worst_row = worst_row.max((tilted.row_sum(row) - 1.0).abs());
        }
        let inv = invariant_mu(&tilted, law, tol)?;
        let mut image = vec![0.0; tilted.size()];
        tilted.matvec_t(inv.mu_star(), &mut image);
        worst_inv = worst_inv
            .max(image.iter().zip(inv.mu_star()).map(|(a, b)| (a - b).abs()).sum::<f64>());
    }
    checks.push(Check::abs_within("tilted_row_sums", worst_row, 1e-12));
    checks.push(Check::abs_within("mu_star_invariance", worst_inv, 1e-12));

    let inv0 = invariant_mu(&tilted_kernel(&m0, &s0), law, tol)?;
    let space = StateSpace::new(rho.q());
    let mut worst_prod = 0.0f64;
    for st in 0..space.len() {
        let expect: f64 = space
            .decode(st)
            .iter()
            .map(|&c| law.class_mass(c, rho.q()) / (1.0 - law.k_infinity()))
            .product();
        worst_prod = worst_prod.max((inv0.mu_star()[st] - expect).abs());
    }
    checks.push(Check::abs_within("mu_star_beta_zero_is_khat_product", worst_prod, 1e-12));

    // closed forms: the configured profile when its order fits, a canonical
    // one otherwise
    let rho_q1 = if rho.q() == 1 {
        rho.clone()
    } else {
        MovingAverage::new(vec![0.6, 0.8])?.correlations()
    };
    let mut worst_q1 = 0.0f64;
    for i in 0..=20 {
        let beta = 0.1 * i as f64;
        let closed = closed_form_q1(law, &rho_q1, beta)?;
        let point = curve_point(law, &rho_q1, beta, tol)?;
        worst_q1 = worst_q1.max((point.h_c_ann - closed).abs());
    }
    checks.push(Check::abs_within("closed_form_q1_vs_eigenvalue", worst_q1, 1e-10));

    let rho_q2 = if rho.q() == 2 {
        rho.clone()
    } else {
        MovingAverage::new(vec![0.8, 0.36, 0.48])?.correlations()
    };
    let mut worst_q2 = 0.0f64;
    for i in 0..=20 {
        let beta = 0.1 * i as f64;
        let closed = closed_form_q2(law, &rho_q2, beta)?;
        let point = curve_point(law, &rho_q2, beta, tol)?;
        worst_q2 = worst_q2.max((point.big_lambda - closed).abs());
    }
    checks.push(Check::abs_within("closed_form_q2_vs_eigenvalue", worst_q2, 1e-10));

    let slope = weak_disorder_slope(law, &rho)?;
    let small = curve_point(law, &rho, 1e-3, tol)?;
    checks.push(Check::close_to(
        "weak_disorder_asymptote",
        2.0 * small.big_lambda / 1e-6,
        slope,
        1e-4,
    ));

    let lambda_h = perron(&build_qstar(law, &rho, 1e-4)?, tol)?.lambda;
    checks.push(Check::abs_within("lambda_derivative_at_zero", (lambda_h - 1.0) / 1e-4, 1e-3));

    // oracle triangle
    let mut rng = ChaCha8Rng::seed_from_u64(suite.seed ^ 0x5eed);
    let mut worst_enum = 0.0f64;
    for _ in 0..5 {
        let beta = rng.gen_range(0.0..1.2);
        let h = rng.gen_range(-0.8..0.8);
        for n in 1..=10usize {
            let e = exact_enum_z(law, &rho, beta, h, n)?.log_value;
            let d = dp_z(law, &rho, beta, h, n)?.log_value;
            worst_enum = worst_enum.max((e - d).abs());
        }
    }
    checks.push(Check::abs_within("enum_vs_dp", worst_enum, 1e-12));

    let conv_n = 400usize;
    let conv_h = 0.2;
    let conv = convolution_log_z(law, conv_h, conv_n);
    let dp0 = dp_z(law, &rho, 0.0, conv_h, conv_n)?.log_value;
    checks.push(Check::abs_within(
        "dp_vs_convolution_at_beta_zero",
        (dp0 - conv) / dp0.abs().max(1.0),
        1e-13,
    ));

    let zeros = vec![0.0; 300];
    let quenched = quenched_dp_z(law, &zeros, 0.7, -0.1, 300)?.log_value;
    let conv2 = convolution_log_z(law, -0.1, 300);
    checks.push(Check::abs_within(
        "quenched_zero_disorder_vs_convolution",
        (quenched - conv2) / conv2.abs().max(1.0),
        1e-13,
    ));

    let (mc_beta, mc_h, mc_n) = (0.5, 0.1, 10);
    let mc = mc_annealed_z(law, ma, mc_beta, mc_h, mc_n, 20_000, suite.seed)?;
    let dp_ref = dp_z(law, &rho, mc_beta, mc_h, mc_n)?;
    let stderr = mc.stderr.unwrap_or(0.0);
    checks.push(Check {
        name: "mc_vs_dp_within_3_stderr".into(),
        lhs: (mc.log_value.exp() - dp_ref.log_value.exp()).abs(),
        rhs: 3.0 * stderr,
        tolerance: 3.0 * stderr,
        pass: stderr > 0.0 && (mc.log_value.exp() - dp_ref.log_value.exp()).abs() <= 3.0 * stderr,
        note: None,
    });

    // free energy
    let iid = MovingAverage::new(vec![1.0, 0.0])?.correlations();
    let m_iid = build_qstar(law, &iid, 0.0)?;
    let s_iid = perron(&m_iid, tol)?;
    let tilted_iid = tilted_kernel(&m_iid, &s_iid);
    let eps = 0.3;
    let matrix_route = f_tilde(&tilted_iid, law, eps, 1e-12)?.f_tilde;
    let series_route = free_energy::homogeneous_free_energy(law, eps, 1e-12)?;
    checks.push(Check::close_to("f_tilde_beta_zero_vs_homogeneous", matrix_route, series_route, 1e-10));

    let beta = 0.8;
    let m = build_qstar(law, &rho, beta)?;
    let s = perron(&m, tol)?;
    let tilted = tilted_kernel(&m, &s);
    let big_lambda = 0.5 * beta * beta + s.lambda.ln();
    checks.push(Check::abs_within(
        "f_ann_zero_at_criticality",
        free_energy::f_ann_with(&tilted, law, big_lambda, -big_lambda, 1e-12)?,
        0.0,
    ));
    let f_vals: Vec<f64> = (0..=16)
        .map(|i| {
            free_energy::f_ann_with(&tilted, law, big_lambda, -big_lambda - 0.2 + 0.1 * i as f64, 1e-12)
        })
        .collect::<Result<_>>()?;
    let min_second_diff = f_vals
        .windows(3)
        .map(|w| w[2] - 2.0 * w[1] + w[0])
        .fold(f64::INFINITY, f64::min);
    checks.push(Check::at_least("f_ann_convex_in_h", min_second_diff, -1e-9));

    // superadditivity with the correlation constant
    let q = rho.q() as f64;
    let c_const = -(q + q * (q + 1.0) / 2.0) * rho.max_abs_tail();
    let (sa_beta, sa_h) = (0.9, -0.2);
    let mut worst_sa = f64::INFINITY;
    for (n, m_len) in [(40usize, 50usize), (90, 30), (25, 25)] {
        let z_nm = dp_z(law, &rho, sa_beta, sa_h, n + m_len)?.log_value;
        let z_n = dp_z(law, &rho, sa_beta, sa_h, n)?.log_value;
        let z_m = dp_z(law, &rho, sa_beta, sa_h, m_len)?.log_value;
        worst_sa = worst_sa.min(z_nm - z_n - z_m - c_const * sa_beta * sa_beta);
    }
    checks.push(Check::at_least("superadditivity_defect", worst_sa, -1e-10));

    checks.push(g_sum_boundary_check(law, &rho, suite.seed));
    checks.extend(disorder_statistics(ma, suite.seed));
    checks.extend(sampler_checks(law, &rho, &s0, suite.seed)?);

    if !suite.quick {
        checks.extend(full_mode_checks(law, &rho, suite.seed, tol)?);
    }
    Ok(checks)
}

/// Independent 1-D renewal convolution in linear domain with a running
/// offset; the DP must reproduce it at β = 0.
fn convolution_log_z(law: &InterArrivalLaw, h: f64, n: usize) -> f64 {
    let mut z = vec![0.0f64; n + 1];
    let mut off = vec![0.0f64; n + 1];
    z[0] = 1.0;
    for m in 1..=n {
        let base = off[m - 1];
        let mut acc = 0.0;
        for t in 1..=m {
            acc += law.mass(t) * z[m - t] * (off[m - t] - base).exp();
        }
        let val = acc * h.exp();
        z[m] = 1.0;
        off[m] = base + val.ln();
    }
    off[n]
}

fn g_sum_boundary_check(law: &InterArrivalLaw, rho: &CorrelationProfile, seed: u64) -> Check {
    let q = rho.q();
    let bound = (q as f64 + q as f64 * (q as f64 + 1.0) / 2.0) * rho.max_abs_tail();
    let hat = law.hat();
    let horizon = 250usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xb0b0);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let mut gaps = Vec::new();
        let mut pos = 0usize;
        while pos <= horizon {
            let g = hat.sample_gap(&mut rng);
            pos += g;
            gaps.push(g);
        }
        for _ in 0..q {
            gaps.push(hat.sample_gap(&mut rng));
        }
        let mut contacts = vec![0usize];
        for &g in &gaps {
            contacts.push(contacts.last().unwrap() + g);
        }
        let inside: Vec<usize> = contacts.iter().copied().filter(|&c| c >= 1 && c <= horizon).collect();
        let mut g_sum = 0.0;
        for start in 1..=inside.len() {
            let mut d = 0usize;
            for k in 0..q {
                d += gaps[start + k];
                g_sum += rho.rho(d);
            }
        }
        let mut pair_sum = 0.0;
        for j in 1..inside.len() {
            for i in (0..j).rev() {
                let d = inside[j] - inside[i];
                if d > q {
                    break;
                }
                pair_sum += rho.rho(d);
            }
        }
        worst = worst.max((g_sum - pair_sum).abs());
    }
    Check {
        name: "g_sum_boundary_bound".into(),
        lhs: worst,
        rhs: bound,
        tolerance: bound,
        pass: worst <= bound + 1e-12,
        note: None,
    }
}

fn disorder_statistics(ma: &MovingAverage, seed: u64) -> Vec<Check> {
    let mut checks = Vec::new();
    let n = 100_000usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xd15c);
    let mut sum = 0.0;
    for i in 0..n {
        rng.set_stream(i as u64);
        sum += ma.sample_path_with(1, &mut rng)[0];
    }
    let se = 1.0 / (n as f64).sqrt();
    checks.push(Check::abs_within("omega_mean_clt", sum / n as f64, 4.0 * se));

    let rho1 = ma.correlations().rho(1);
    let path = ma.sample_path(n + 1, seed ^ 0xc0c0);
    let prods: Vec<f64> = (0..n).map(|i| path[i] * path[i + 1]).collect();
    let mean = prods.iter().sum::<f64>() / n as f64;
    let batches = 500;
    let bs = n / batches;
    let means: Vec<f64> = (0..batches)
        .map(|b| prods[b * bs..(b + 1) * bs].iter().sum::<f64>() / bs as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (batches as f64 - 1.0);
    let batch_se = (var / batches as f64).sqrt();
    checks.push(Check::close_to("omega_lag1_covariance", mean, rho1, 4.0 * batch_se));
    checks
}

fn sampler_checks(
    law: &InterArrivalLaw,
    rho: &CorrelationProfile,
    s0: &SpectralData,
    seed: u64,
) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let a = sample_tilde(law, rho, 0.0, s0, 20_000, seed)?;
    let b = sample_tilde(law, rho, 0.0, s0, 20_000, seed)?;
    checks.push(Check {
        name: "sampler_seed_determinism".into(),
        lhs: if a == b { 1.0 } else { 0.0 },
        rhs: 1.0,
        tolerance: 0.0,
        pass: a == b,
        note: None,
    });

    // β = 0 gap histogram against K̂ over classes {1, 2, 3}
    let hat = law.hat();
    let path = sample_tilde(law, rho, 0.0, s0, 120_000, seed ^ 0xfeed)?;
    let n = path.gaps.len() as f64;
    let mut worst_z = 0.0f64;
    for t in 1..=3usize {
        let p = hat.mass(t);
        let freq = path.gaps.iter().filter(|&&g| g == t).count() as f64 / n;
        worst_z = worst_z.max((freq - p).abs() / (p * (1.0 - p) / n).sqrt());
    }
    checks.push(Check {
        name: "sampler_beta_zero_histogram".into(),
        lhs: worst_z,
        rhs: 4.0,
        tolerance: 4.0,
        pass: worst_z <= 4.0,
        note: None,
    });
    Ok(checks)
}

fn full_mode_checks(
    law: &InterArrivalLaw,
    rho: &CorrelationProfile,
    seed: u64,
    tol: f64,
) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let beta = 0.8;
    let point = curve_point(law, rho, beta, tol)?;
    let grid = [1000usize, 2000, 3000, 4000];

    let h_loc = -point.big_lambda + 0.3;
    let f = f_ann(law, rho, beta, h_loc, 1e-12)?;
    let g_loc = growth_rate(law, rho, beta, h_loc, &grid)?;
    checks.push(Check::close_to("growth_rate_localized_vs_f_ann", g_loc.estimate, f, 1e-3));

    let g_deloc = growth_rate(law, rho, beta, -point.big_lambda - 0.2, &grid)?;
    checks.push(Check::abs_within("growth_rate_delocalized", g_deloc.estimate, 5e-3));

    // LLN of the tilted process, skipped in the null-recurrent regime
    let m = build_qstar(law, rho, 1.0)?;
    let s = perron(&m, tol)?;
    let inv = invariant_mu(&tilted_kernel(&m, &s), law, tol)?;
    let c = inv.mean_spacing();
    if c.is_finite() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x11);
        let paths: Vec<ContactPath> = (0..20)
            .map(|i| {
                rng.set_stream(i);
                sampler::sample_tilde_with(law, rho, 1.0, &s, 1_000_000, i, &mut rng)
            })
            .collect::<Result<_>>()?;
        let est = lln_contact_density(&paths);
        checks.push(
            Check::close_to("lln_contact_density", est.mean, 1.0 / c, 0.01 / c)
                .noted(format!("stderr = {:.3e}", est.stderr)),
        );
    } else {
        checks.push(Check::skipped(
            "lln_contact_density",
            "mean spacing is infinite (null-recurrent regime, α ≤ 1); LLN check skipped".into(),
        ));
    }

    // Monte Carlo stderr ∝ samples^{−1/2}
    let ma_ref = MovingAverage::new(vec![0.8, 0.36, 0.48])?;
    let small = mc_annealed_z(law, &ma_ref, 0.5, 0.1, 8, 10_000, seed)?;
    let large = mc_annealed_z(law, &ma_ref, 0.5, 0.1, 8, 1_000_000, seed)?;
    let ratio = small.stderr.unwrap_or(0.0) / large.stderr.unwrap_or(f64::INFINITY);
    checks.push(Check::close_to("mc_stderr_scaling_ratio", ratio, 10.0, 3.0));
    Ok(checks)
}
