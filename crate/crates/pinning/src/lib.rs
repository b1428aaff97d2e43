//! Annealed pinning model with finite-range correlated Gaussian disorder.
//!
//! A directed polymer touches a defect line at the points of a discrete
//! renewal process `τ` with gap law `K`. Each contact at site `n` collects a
//! reward `h + βω_n`, where the disorder `ω` is a q-order moving average of
//! i.i.d. standard Gaussians, so its correlations `ρ_m` vanish beyond range
//! `q`. Averaging the Boltzmann weight over disorder turns the pair
//! interaction `β²ρ_{j−i}δ_iδ_j` into a Markov chain over the last `q` gaps,
//! capped to the alphabet `E = {1,…,q,⋆}` (any gap beyond `q` is
//! interchangeable). The Perron–Frobenius eigenvalue `λ(β)` of the resulting
//! `(q+1)^q × (q+1)^q` transfer matrix determines
//!
//! * the annealed critical curve `h_c_ann(β) = h_c(0) − Λ(β)` with
//!   `Λ(β) = β²/2 + log λ(β)`, and
//! * the annealed free energy `F_ann(β,h) = F̃(h + Λ(β))`, where `F̃(ε)` is
//!   the unique positive root of `λ_F = 1` for an exponentially damped tilt
//!   of the same matrix.
//!
//! Every formula is backed by an independent oracle: exact enumeration and a
//! lossless dynamic program for the partition function ([`oracle`]), Monte
//! Carlo disorder averages, closed forms at `q = 1, 2` ([`critical`]), and a
//! path sampler for the tilted renewal process ([`sampler`]).

pub mod critical;
pub mod disorder;
mod error;
pub mod free_energy;
pub mod kernels;
pub mod oracle;
pub mod sampler;
pub mod transfer;

pub use critical::{closed_form_q1, closed_form_q2, curve_point, curve_sweep, weak_disorder_slope, CurvePoint};
pub use disorder::{CorrelationProfile, MovingAverage};
pub use error::{Error, Result};
pub use free_energy::{f_ann, f_tilde, lambda_f, phi_f_star, FreeEnergyResult, TiltedFMatrix};
pub use kernels::{build_table_law, build_zeta_law, cap, renewal_mass, CappedGap, InterArrivalLaw, LawConfig, RenewalMass};
pub use oracle::{dp_z, exact_enum_z, growth_rate, mc_annealed_z, quenched_dp_z, GrowthRateEstimate, Method, PartitionValue};
pub use sampler::{lln_contact_density, sample_tilde, ContactPath, DensityEstimate};
pub use transfer::{build_qstar, g_value, invariant_mu, perron, tilted_kernel, InvariantMeasure, MatrixKind, SpectralData, StateSpace, TransferMatrix};
