//! Accuracy of the frequency estimators: κ1 concentration and the C1 error bound.

use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::divergence::js_slices;
use crate::error::{param, Result};
use crate::mechanism::DiscreteDistribution;
use crate::seed;
use crate::verify::privacy::digest_of;
use crate::verify::BoundCheck;

pub const C1_TOL: f64 = 1e-9;
/// Largest support for which the corner search enumerates all `2^n` corners.
pub const MAX_CORNER_SUPPORT: usize = 16;

/// `|k/T − κ| > eps·κ`, shared by the simulation and the exact tail.
fn deviates(k: u64, t: u64, kappa1: f64, eps: f64) -> bool {
    (k as f64 / t as f64 - kappa1).abs() > eps * kappa1
}

/// Exact `Pr[|X/T − κ| > eps·κ]` for `X ~ Binomial(T, κ)`.
pub fn binomial_deviation_prob(kappa1: f64, t: u64, eps: f64) -> f64 {
    let (lp, lq) = (kappa1.ln(), (1.0 - kappa1).ln());
    let mut ln_choose = 0.0;
    let mut total = 0.0;
    for k in 0..=t {
        if k > 0 {
            ln_choose += ((t - k + 1) as f64).ln() - (k as f64).ln();
        }
        if deviates(k, t, kappa1, eps) {
            total += (ln_choose + k as f64 * lp + (t - k) as f64 * lq).exp();
        }
    }
    total.min(1.0)
}

pub fn chernoff_bound(kappa1: f64, t: u64, eps: f64) -> f64 {
    2.0 * (-eps * eps * t as f64 * kappa1 / 3.0).exp()
}

fn simulate_deviation(kappa1: f64, t: u64, eps: f64, trials: u64, seed: u64) -> f64 {
    let mut rng = seed::rng(seed);
    let bin = Binomial::new(t, kappa1).expect("validated binomial parameters");
    let hits = (0..trials).filter(|_| deviates(bin.sample(&mut rng), t, kappa1, eps)).count();
    hits as f64 / trials as f64
}

/// Monte Carlo check of `Pr[|κ̂1 − κ1| > eps·κ1] ≤ 2 exp(−eps² T κ1 / 3)`.
///
/// `rhs` adds three binomial standard deviations of the empirical frequency.
/// A failing run is repeated once with ten times the trials.
pub fn verify_kappa1_concentration(kappa1: f64, t: u64, eps: f64, trials: u64, seed: u64) -> Result<BoundCheck> {
    if !(kappa1 > 0.0 && kappa1 < 1.0) {
        return param(format!("kappa1 = {kappa1} must lie in (0, 1)"));
    }
    if t == 0 || !(eps >= 0.0) {
        return param("need T >= 1 and eps >= 0");
    }
    if trials < 10_000 {
        return param(format!("trials = {trials} below the 10^4 minimum"));
    }
    let chernoff = chernoff_bound(kappa1, t, eps);
    let build = |trials: u64, seed: u64| {
        let freq = simulate_deviation(kappa1, t, eps, trials, seed);
        let q = chernoff.min(1.0);
        let sigma = (q * (1.0 - q) / trials as f64).sqrt();
        (freq, chernoff + 3.0 * sigma, sigma)
    };
    let (mut freq, mut rhs, mut sigma) = build(trials, seed);
    let mut used = trials;
    let mut rerun = false;
    if freq > rhs {
        used = trials * 10;
        rerun = true;
        (freq, rhs, sigma) = build(used, seed::derive(seed, "rerun", 0));
    }
    let exact = binomial_deviation_prob(kappa1, t, eps);
    let mut check = BoundCheck::new("kappa1_concentration", freq, rhs, 0.0, digest_of(&[kappa1, t as f64, eps]))
        .with_extra("chernoff", chernoff)
        .with_extra("sigma", sigma)
        .with_extra("trials", used as f64)
        .with_extra("exact_tail", exact)
        .with_extra("exact_slack", chernoff - exact);
    if rerun {
        check = check.with_note("rerun with 10x trials");
    }
    if chernoff >= 1.0 {
        check = check.with_note(if rerun { "rerun with 10x trials; vacuous bound" } else { "vacuous bound" });
    }
    Ok(check)
}

/// Worst-case C1 error radius for a pointwise relative error `eps` in κ1.
pub fn c1_bound(eps: f64) -> f64 {
    let a = (1.0 + eps) * ((1.0 + eps) / (1.0 - eps)).ln() / 2.0;
    let b = (eps + (1.0 + eps).ln().max((1.0 / (1.0 - eps)).ln())) / 2.0;
    (a + b).sqrt()
}

/// JS contribution of one coordinate.
fn js_term(a: f64, b: f64) -> f64 {
    js_slices(&[a], &[b])
}

/// Exact range of `JS(κ̂1‖κ2)` over the box `κ̂1(d) ∈ [(1−eps)κ1(d), (1+eps)κ1(d)]`.
///
/// JS without renormalization is a sum of per-coordinate terms, each convex in
/// `κ̂1(d)` with its minimum at `κ̂1(d) = κ2(d)`. The maximum is therefore at a
/// corner and the minimum at the clamped point.
pub fn js_box_range(kappa1: &[f64], kappa2: &[f64], eps: f64) -> (f64, f64) {
    let mut lo = 0.0;
    let mut hi = 0.0;
    for (&k1, &k2) in kappa1.iter().zip(kappa2) {
        let (a, b) = ((1.0 - eps) * k1, (1.0 + eps) * k1);
        lo += js_term(k2.clamp(a, b), k2);
        hi += js_term(a, k2).max(js_term(b, k2));
    }
    (lo.max(0.0), hi)
}

/// Largest `|√JS(κ̂1‖κ2) − √JS(κ1‖κ2)|` over the `2^n` box corners.
pub fn c1_corner_search(kappa1: &[f64], kappa2: &[f64], eps: f64) -> Result<f64> {
    let n = kappa1.len();
    if n > MAX_CORNER_SUPPORT {
        return param(format!("corner search over {n} coordinates exceeds {MAX_CORNER_SUPPORT}"));
    }
    let c1 = js_slices(kappa1, kappa2).sqrt();
    let mut hat = vec![0.0; n];
    let mut worst: f64 = 0.0;
    for mask in 0u32..(1 << n) {
        for (i, h) in hat.iter_mut().enumerate() {
            let s = if mask >> i & 1 == 1 { 1.0 + eps } else { 1.0 - eps };
            *h = s * kappa1[i];
        }
        worst = worst.max((js_slices(&hat, kappa2).sqrt() - c1).abs());
    }
    Ok(worst)
}

/// `max |Ĉ1 − C1| ≤ c1_bound(eps)` for all κ̂1 in the relative-error box.
pub fn verify_c1_error(
    kappa1: &DiscreteDistribution<f64>,
    kappa2: &DiscreteDistribution<f64>,
    eps: f64,
) -> Result<BoundCheck> {
    if !(eps >= 0.0 && eps < 1.0) {
        return param(format!("eps = {eps} must lie in [0, 1)"));
    }
    if kappa1.len() != kappa2.len() {
        return Err(crate::Error::SupportMismatch { left: kappa1.len(), right: kappa2.len() });
    }
    let (k1, k2) = (kappa1.mass(), kappa2.mass());
    let c1 = js_slices(k1, k2).sqrt();
    let (lo, hi) = js_box_range(k1, k2, eps);
    let mut lhs = (hi.sqrt() - c1).abs().max((c1 - lo.sqrt()).abs());
    let corners = if k1.len() <= 12 {
        let c = c1_corner_search(k1, k2, eps)?;
        lhs = lhs.max(c);
        c
    } else {
        f64::NAN
    };
    let digest = format!("{}:{}:{}", kappa1.digest(), kappa2.digest(), digest_of(&[eps]));
    Ok(BoundCheck::new("c1_error", lhs, c1_bound(eps), C1_TOL, digest)
        .with_extra("c1", c1)
        .with_extra("c1_hat_max", hi.sqrt())
        .with_extra("c1_hat_min", lo.sqrt())
        .with_extra("corner_max", corners)
        .with_extra("eps", eps))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationErrorReport {
    pub checks: Vec<BoundCheck>,
    pub instances: usize,
    /// Instances where `|ε̂ − ε̃| ≤ (3/2)·B(eps)`.
    pub three_halves_pass: usize,
    pub three_halves_rate: f64,
}

/// `|ε̂ − ε̃| = 2|Ĉ1 − C1| ≤ 2·B(eps)` is asserted; the `3/2` factor is measured.
pub fn verify_privacy_estimation_error(
    instances: &[(DiscreteDistribution<f64>, DiscreteDistribution<f64>, f64)],
) -> Result<EstimationErrorReport> {
    let mut checks = Vec::with_capacity(instances.len());
    let mut three_halves_pass = 0;
    for (k1, k2, eps) in instances {
        let c = verify_c1_error(k1, k2, *eps)?;
        let err = 2.0 * c.lhs;
        let b = c.rhs;
        let ok = err <= 1.5 * b + C1_TOL;
        three_halves_pass += ok as usize;
        checks.push(
            BoundCheck::new("privacy_estimation_error", err, 2.0 * b, C1_TOL, c.instance_digest)
                .with_extra("eps", *eps)
                .with_extra("three_halves_rhs", 1.5 * b)
                .with_extra("three_halves_holds", if ok { 1.0 } else { 0.0 }),
        );
    }
    let n = instances.len();
    Ok(EstimationErrorReport {
        checks,
        instances: n,
        three_halves_pass,
        three_halves_rate: if n == 0 { f64::NAN } else { three_halves_pass as f64 / n as f64 },
    })
}
