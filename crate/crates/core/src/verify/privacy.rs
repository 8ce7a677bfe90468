//! LDP ↔ MBP and MBP → ABP relationships on finite kernels.

use crate::error::Result;
use crate::mechanism::{digest_values, DiscreteDistribution, StochasticKernel};
use crate::metrics::{abp_epsilon, ldp_epsilon, mbp_xi, mbp_xi_sup, prior_mismatch_eps};
use crate::verify::BoundCheck;

pub const LDP_MBP_TOL: f64 = 1e-9;
pub const MBP_ABP_TOL: f64 = 1e-9;

fn instance_digest(kernel: &StochasticKernel<f64>, priors: &[&DiscreteDistribution<f64>]) -> String {
    let mut parts = vec![kernel.digest()];
    parts.extend(priors.iter().map(|p| p.digest()));
    parts.join(":")
}

/// (a) `ξ(π) ≤ ε_LDP` for every prior; (b) `ε_LDP ≤ 2 ξ_sup`.
pub fn verify_ldp_mbp(
    kernel: &StochasticKernel<f64>,
    priors: &[DiscreteDistribution<f64>],
) -> Result<Vec<BoundCheck>> {
    let eps = ldp_epsilon(kernel);
    let mut out = Vec::with_capacity(priors.len() + 1);
    for prior in priors {
        let xi = mbp_xi(kernel, prior)?;
        out.push(
            BoundCheck::new("ldp_mbp.mbp_le_ldp", xi, eps, LDP_MBP_TOL, instance_digest(kernel, &[prior]))
                .with_extra("xi", xi)
                .with_extra("eps_ldp", eps),
        );
    }
    let sup = mbp_xi_sup(kernel);
    out.push(
        BoundCheck::new("ldp_mbp.ldp_le_2sup", eps, 2.0 * sup, LDP_MBP_TOL, kernel.digest()).with_extra("xi_sup", sup),
    );
    Ok(out)
}

/// `(1/√2) √((ξ + ε)(e^{ξ+ε} − 1))`.
pub fn mbp_abp_bound(xi: f64, eps: f64) -> f64 {
    let s = xi + eps;
    (s * s.exp_m1()).sqrt() / std::f64::consts::SQRT_2
}

pub fn verify_mbp_abp(
    kernel: &StochasticKernel<f64>,
    true_prior: &DiscreteDistribution<f64>,
    attacker_prior: &DiscreteDistribution<f64>,
) -> Result<BoundCheck> {
    let xi = mbp_xi(kernel, true_prior)?;
    let eps = prior_mismatch_eps(true_prior, attacker_prior)?;
    let lhs = abp_epsilon(kernel, true_prior, attacker_prior)?;
    Ok(BoundCheck::new(
        "mbp_abp",
        lhs,
        mbp_abp_bound(xi, eps),
        MBP_ABP_TOL,
        instance_digest(kernel, &[true_prior, attacker_prior]),
    )
    .with_extra("xi", xi)
    .with_extra("prior_eps", eps))
}

/// Attacker prior with `F^B(d)/f_D(d) ∈ [e^{-ε}, e^{ε}]`.
///
/// Multiplies by `e^{u_d}` with `u_d` uniform in `[-ε/2, ε/2]`; normalisation
/// contributes at most another factor `e^{±ε/2}`.
pub fn perturbed_prior<R: rand::Rng + ?Sized>(
    rng: &mut R,
    prior: &DiscreteDistribution<f64>,
    eps: f64,
) -> Result<DiscreteDistribution<f64>> {
    let w: Vec<f64> = prior
        .mass()
        .iter()
        .map(|p| {
            let u: f64 = if eps > 0.0 { rng.random_range(-eps / 2.0..=eps / 2.0) } else { 0.0 };
            p * u.exp()
        })
        .collect();
    DiscreteDistribution::from_weights(&w)
}

pub(crate) fn digest_of(values: &[f64]) -> String {
    digest_values(&[values.len()], values.iter().copied())
}
