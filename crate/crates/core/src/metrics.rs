//! Exact Bayesian privacy quantities over finite kernels.
//!
//! Conventions:
//! - `ε_LDP = max_{w,d,d'} ln(K[d][w] / K[d'][w])`, `+inf` when a column mixes zero
//!   and nonzero entries.
//! - `ξ` (maximum Bayesian privacy) is computed against the *true* prior and
//!   ignores unreachable outputs.
//! - The posterior mixture `F^A` uses the attacker's prior for each posterior and
//!   mixes over outputs with the true output marginal.

use serde::{Deserialize, Serialize};

use crate::divergence::{js_slices, tv_slices};
use crate::error::{param, Error, Result};
use crate::mechanism::{DiscreteDistribution, StochasticKernel};
use crate::real;
use crate::scalar::Scalar;

fn check_prior<S: Scalar>(kernel: &StochasticKernel<S>, prior: &DiscreteDistribution<S>) -> Result<()> {
    if prior.len() != kernel.n_inputs() {
        return Err(Error::SupportMismatch { left: kernel.n_inputs(), right: prior.len() });
    }
    Ok(())
}

/// `P_W(w) = Σ_d prior(d) K[d][w]`.
pub fn output_marginal<S: Scalar>(kernel: &StochasticKernel<S>, prior: &DiscreteDistribution<S>) -> Result<Vec<S>> {
    check_prior(kernel, prior)?;
    let mut marginal = vec![S::zero(); kernel.n_outputs()];
    for (d, row) in kernel.rows().enumerate() {
        let pd = prior.get(d);
        for (m, &k) in marginal.iter_mut().zip(row) {
            *m = *m + pd * k;
        }
    }
    Ok(marginal)
}

pub fn posterior<S: Scalar>(
    kernel: &StochasticKernel<S>,
    prior: &DiscreteDistribution<S>,
    output: usize,
) -> Result<DiscreteDistribution<S>> {
    check_prior(kernel, prior)?;
    if output >= kernel.n_outputs() {
        return param(format!("output {output} outside 0..{}", kernel.n_outputs()));
    }
    let joint: Vec<S> = (0..kernel.n_inputs()).map(|d| kernel.entry(d, output) * prior.get(d)).collect();
    let marginal: S = joint.iter().copied().sum();
    if marginal <= S::zero() {
        return Err(Error::UndefinedPosterior { output });
    }
    let mut post: Vec<S> = joint.into_iter().map(|j| j / marginal).collect();
    renormalize(&mut post);
    DiscreteDistribution::new(post)
}

// Division by the summed joint can leave the total a few ulps off one.
fn renormalize<S: Scalar>(v: &mut [S]) {
    let t: S = v.iter().copied().sum();
    if t > S::zero() {
        for x in v.iter_mut() {
            *x = *x / t;
        }
    }
}

pub fn ldp_epsilon<S: Scalar>(kernel: &StochasticKernel<S>) -> S {
    let mut worst = S::zero();
    for w in 0..kernel.n_outputs() {
        let mut hi = S::neg_infinity();
        let mut lo = S::infinity();
        for d in 0..kernel.n_inputs() {
            let k = kernel.entry(d, w);
            hi = hi.max(k);
            lo = lo.min(k);
        }
        if hi <= S::zero() {
            continue;
        }
        if lo <= S::zero() {
            return S::infinity();
        }
        worst = worst.max((hi / lo).ln());
    }
    worst
}

/// Maximum Bayesian privacy under `prior`.
///
/// Labels with zero prior mass and outputs with zero marginal are excluded.
pub fn mbp_xi<S: Scalar>(kernel: &StochasticKernel<S>, prior: &DiscreteDistribution<S>) -> Result<S> {
    let marginal = output_marginal(kernel, prior)?;
    let mut worst = S::zero();
    for (w, &pw) in marginal.iter().enumerate() {
        if pw <= S::zero() {
            continue;
        }
        for d in 0..kernel.n_inputs() {
            if prior.get(d) <= S::zero() {
                continue;
            }
            // posterior(d|w) / prior(d) = K[d][w] / P_W(w)
            let ratio = kernel.entry(d, w) / pw;
            let v = if ratio <= S::zero() { S::infinity() } else { ratio.ln().abs() };
            worst = worst.max(v);
        }
    }
    Ok(worst)
}

/// `max_d |ln(posterior(d|w)/prior(d))|` at one output, over the posterior's support.
///
/// This is the quantity a frequency estimator can see: inputs the posterior
/// rules out never show up in recovery counts.
pub fn mbp_xi_at<S: Scalar>(kernel: &StochasticKernel<S>, prior: &DiscreteDistribution<S>, output: usize) -> Result<S> {
    let post = posterior(kernel, prior, output)?;
    let mut worst = S::zero();
    for (d, &p) in post.mass().iter().enumerate() {
        if p > S::zero() {
            worst = worst.max((p / prior.get(d)).ln().abs());
        }
    }
    Ok(worst)
}

/// Supremum of [`mbp_xi`] over strictly positive priors.
///
/// Concentrating the prior on the column maximiser (or minimiser) of `K[·][w]`
/// pushes `K[d][w] / P_W(w)` to the column's max/min ratio, so the supremum is
/// `max_{w,d,d'} |ln(K[d][w]/K[d'][w])|`, i.e. [`ldp_epsilon`].
pub fn mbp_xi_sup<S: Scalar>(kernel: &StochasticKernel<S>) -> S {
    ldp_epsilon(kernel)
}

pub fn posterior_mixture<S: Scalar>(
    kernel: &StochasticKernel<S>,
    true_prior: &DiscreteDistribution<S>,
    attacker_prior: &DiscreteDistribution<S>,
) -> Result<DiscreteDistribution<S>> {
    let true_marginal = output_marginal(kernel, true_prior)?;
    let attacker_marginal = output_marginal(kernel, attacker_prior)?;
    let mut mix = vec![S::zero(); kernel.n_inputs()];
    for (w, (&pw, &pb)) in true_marginal.iter().zip(&attacker_marginal).enumerate() {
        if pw <= S::zero() {
            continue;
        }
        if pb <= S::zero() {
            return Err(Error::UndefinedPosterior { output: w });
        }
        for (d, m) in mix.iter_mut().enumerate() {
            *m = *m + pw * kernel.entry(d, w) * attacker_prior.get(d) / pb;
        }
    }
    renormalize(&mut mix);
    DiscreteDistribution::new(mix)
}

pub fn abp_epsilon<S: Scalar>(
    kernel: &StochasticKernel<S>,
    true_prior: &DiscreteDistribution<S>,
    attacker_prior: &DiscreteDistribution<S>,
) -> Result<S> {
    let mix = posterior_mixture(kernel, true_prior, attacker_prior)?;
    Ok(js_slices(mix.mass(), attacker_prior.mass()).sqrt())
}

/// `max_d |ln(F^B(d) / f_D(d))|`.
pub fn prior_mismatch_eps<S: Scalar>(
    true_prior: &DiscreteDistribution<S>,
    attacker_prior: &DiscreteDistribution<S>,
) -> Result<S> {
    if true_prior.len() != attacker_prior.len() {
        return Err(Error::SupportMismatch { left: true_prior.len(), right: attacker_prior.len() });
    }
    if !true_prior.is_strictly_positive() || !attacker_prior.is_strictly_positive() {
        return param("prior mismatch needs strictly positive priors");
    }
    Ok(true_prior
        .mass()
        .iter()
        .zip(attacker_prior.mass())
        .map(|(&t, &b)| (b / t).ln().abs())
        .fold(S::zero(), S::max))
}

/// `C1 = √JS(F^O ‖ F^B)`.
pub fn c1<S: Scalar>(unprotected: &DiscreteDistribution<S>, attacker_prior: &DiscreteDistribution<S>) -> Result<S> {
    if unprotected.len() != attacker_prior.len() {
        return Err(Error::SupportMismatch { left: unprotected.len(), right: attacker_prior.len() });
    }
    Ok(js_slices(unprotected.mass(), attacker_prior.mass()).sqrt())
}

/// `C2 = (e^{2ξ} - 1) / 2`.
pub fn c2<S: Scalar>(xi: S) -> S {
    ((xi + xi).exp() - S::one()) * S::lit(0.5)
}

/// `ε̃_p = 2 C1 - C2 · TV`, with `C2 · 0 = 0` even for unbounded `C2`.
pub fn eps_tilde<S: Scalar>(c1: S, c2: S, tv: S) -> S {
    if tv == S::zero() {
        return c1 + c1;
    }
    c1 + c1 - c2 * tv
}

/// All privacy quantities for one (kernel, true prior, attacker prior) instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivacyReport {
    #[serde(with = "real")]
    pub eps_ldp: f64,
    #[serde(with = "real")]
    pub xi_mbp: f64,
    #[serde(with = "real")]
    pub xi_mbp_sup: f64,
    #[serde(with = "real")]
    pub eps_abp: f64,
    #[serde(with = "real")]
    pub prior_mismatch_eps: f64,
    #[serde(with = "real")]
    pub c1: f64,
    #[serde(with = "real")]
    pub c2: f64,
    #[serde(with = "real")]
    pub tv: f64,
    #[serde(with = "real")]
    pub eps_tilde: f64,
    pub kernel_digest: String,
    pub true_prior_digest: String,
    pub attacker_prior_digest: String,
}

impl PrivacyReport {
    pub const CSV_HEADER: &'static str = "kernel_digest,true_prior_digest,attacker_prior_digest,eps_ldp,xi_mbp,xi_mbp_sup,eps_abp,prior_mismatch_eps,c1,c2,tv,eps_tilde";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.kernel_digest,
            self.true_prior_digest,
            self.attacker_prior_digest,
            self.eps_ldp,
            self.xi_mbp,
            self.xi_mbp_sup,
            self.eps_abp,
            self.prior_mismatch_eps,
            self.c1,
            self.c2,
            self.tv,
            self.eps_tilde
        )
    }
}

/// Unprotected belief `F^O`: the posterior mixture under the identity release.
///
/// Releasing `d` itself makes every posterior a point mass, so the mixture is
/// the true prior.
pub fn unprotected_belief<S: Scalar>(true_prior: &DiscreteDistribution<S>) -> DiscreteDistribution<S> {
    true_prior.clone()
}

/// TV between the released-value distribution with and without protection.
///
/// Without protection the release is `d` itself, distributed as the true prior.
/// Output label `i` is identified with input label `i`; the shorter vector is
/// zero-padded.
pub fn release_tv<S: Scalar>(kernel: &StochasticKernel<S>, true_prior: &DiscreteDistribution<S>) -> Result<S> {
    let protected = output_marginal(kernel, true_prior)?;
    let n = protected.len().max(true_prior.len());
    let pad = |v: &[S]| {
        let mut out = v.to_vec();
        out.resize(n, S::zero());
        out
    };
    Ok(tv_slices(&pad(&protected), &pad(true_prior.mass())).min(S::one()))
}

pub fn privacy_report(
    kernel: &StochasticKernel<f64>,
    true_prior: &DiscreteDistribution<f64>,
    attacker_prior: &DiscreteDistribution<f64>,
    unprotected: Option<&DiscreteDistribution<f64>>,
) -> Result<PrivacyReport> {
    let xi = mbp_xi(kernel, true_prior)?;
    let fallback = unprotected_belief(true_prior);
    let f_o = unprotected.unwrap_or(&fallback);
    let c1v = c1(f_o, attacker_prior)?;
    let c2v = c2(xi);
    let tv = release_tv(kernel, true_prior)?;
    Ok(PrivacyReport {
        eps_ldp: ldp_epsilon(kernel),
        xi_mbp: xi,
        xi_mbp_sup: mbp_xi_sup(kernel),
        eps_abp: abp_epsilon(kernel, true_prior, attacker_prior)?,
        prior_mismatch_eps: prior_mismatch_eps(true_prior, attacker_prior)?,
        c1: c1v,
        c2: c2v,
        tv,
        eps_tilde: eps_tilde(c1v, c2v, tv),
        kernel_digest: kernel.digest(),
        true_prior_digest: true_prior.digest(),
        attacker_prior_digest: attacker_prior.digest(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use proptest::prelude::*;

    type K = StochasticKernel<f64>;
    type P = DiscreteDistribution<f64>;

    fn rr() -> K {
        K::randomized_response(2, 0.25).unwrap()
    }

    fn dist(v: &[f64]) -> P {
        P::new(v.to_vec()).unwrap()
    }

    /// Bayes rule by explicit joint-table enumeration.
    fn posterior_oracle(rows: &[Vec<f64>], prior: &[f64], w: usize) -> Vec<f64> {
        let joint: Vec<f64> = rows.iter().zip(prior).map(|(r, p)| r[w] * p).collect();
        let z: f64 = joint.iter().sum();
        joint.iter().map(|j| j / z).collect()
    }

    /// Brute force over ordered input pairs.
    fn ldp_oracle(rows: &[Vec<f64>]) -> f64 {
        let mut best = 0.0f64;
        for w in 0..rows[0].len() {
            for a in rows {
                for b in rows {
                    if a[w] > 0.0 && b[w] == 0.0 {
                        return f64::INFINITY;
                    }
                    if a[w] > 0.0 {
                        best = best.max((a[w] / b[w]).ln());
                    }
                }
            }
        }
        best
    }

    #[test]
    fn posterior_examples() {
        let u = P::uniform(2).unwrap();
        let post = posterior(&rr(), &u, 0).unwrap();
        let oracle = posterior_oracle(&rr().to_rows_f64(), &[0.5, 0.5], 0);
        assert!((post.get(0) - oracle[0]).abs() < 1e-15);
        assert!((post.get(0) - 0.75).abs() < 1e-15);

        let id = K::identity(3).unwrap();
        let pi = dist(&[0.2, 0.3, 0.5]);
        assert_eq!(posterior(&id, &pi, 1).unwrap().mass(), &[0.0, 1.0, 0.0]);

        let c = K::constant(3, 2, 0).unwrap();
        let post = posterior(&c, &pi, 0).unwrap();
        for d in 0..3 {
            assert!((post.get(d) - pi.get(d)).abs() < 1e-15);
        }
        assert!(matches!(posterior(&c, &pi, 1), Err(Error::UndefinedPosterior { output: 1 })));
    }

    #[test]
    fn ldp_examples() {
        assert!((ldp_epsilon(&rr()) - 3f64.ln()).abs() < 1e-12);
        assert!((ldp_epsilon(&rr()) - ldp_oracle(&rr().to_rows_f64())).abs() < 1e-15);
        assert!((ldp_epsilon(&rr()) - (0.75f64 / 0.25).ln()).abs() < 1e-15);
        assert_eq!(ldp_epsilon(&K::constant(4, 3, 2).unwrap()), 0.0);
        assert!(ldp_epsilon(&K::identity(3).unwrap()).is_infinite());
    }

    #[test]
    fn mbp_examples() {
        // posterior/prior ratios after w=0 are 0.75/0.5 and 0.25/0.5; the
        // two-sided definition is driven by |ln 0.5| = ln 2 > ln 1.5.
        let u2 = P::uniform(2).unwrap();
        let rows = rr().to_rows_f64();
        let mut oracle = 0.0f64;
        for w in 0..2 {
            for r in posterior_oracle(&rows, &[0.5, 0.5], w) {
                oracle = oracle.max((r / 0.5).ln().abs());
            }
        }
        assert!((mbp_xi(&rr(), &u2).unwrap() - oracle).abs() < 1e-12);
        assert!((mbp_xi(&rr(), &u2).unwrap() - 2f64.ln()).abs() < 1e-12);
        let pi = dist(&[0.1, 0.2, 0.7]);
        assert_eq!(mbp_xi(&K::constant(3, 2, 1).unwrap(), &pi).unwrap(), 0.0);
        // identity release: posterior/prior is 4 on the observed label but 0 elsewhere
        let u4 = P::uniform(4).unwrap();
        assert!(mbp_xi(&K::identity(4).unwrap(), &u4).unwrap().is_infinite());
        let p = posterior(&K::identity(4).unwrap(), &u4, 2).unwrap();
        assert!((p.get(2) / u4.get(2) - 4.0).abs() < 1e-12);
        // restricted to the posterior's support the identity gives ln n
        assert!((mbp_xi_at(&K::identity(4).unwrap(), &u4, 2).unwrap() - 4f64.ln()).abs() < 1e-12);
        assert!((mbp_xi_at(&rr(), &u2, 0).unwrap() - 2f64.ln()).abs() < 1e-12);
    }

    /// Dense grid over the probability simplex for 3 labels.
    fn grid_sup(kernel: &K, steps: usize) -> f64 {
        let mut best = 0.0f64;
        for i in 1..steps {
            for j in 1..(steps - i) {
                let k = steps - i - j;
                if k == 0 {
                    continue;
                }
                let s = steps as f64;
                let prior = dist(&[i as f64 / s, j as f64 / s, k as f64 / s]);
                best = best.max(mbp_xi(kernel, &prior).unwrap());
            }
        }
        best
    }

    #[test]
    fn mbp_sup_matches_closed_form() {
        assert!((mbp_xi_sup(&rr()) - 3f64.ln()).abs() < 1e-12);
        assert_eq!(mbp_xi_sup(&K::constant(2, 2, 0).unwrap()), 0.0);

        // RR(2, 0.25): the point-mass limit prior (1-t, t) approaches ln 3 from below.
        let mut best = 0.0f64;
        for i in 1..10_000 {
            let t = i as f64 / 10_000.0;
            best = best.max(mbp_xi(&rr(), &dist(&[1.0 - t, t])).unwrap());
        }
        assert!(best <= 3f64.ln() + 1e-12);
        assert!(3f64.ln() - best < 1e-3, "grid sup {best}");

        let k = K::random(1, 3, 3, 1e-2).unwrap();
        let closed = mbp_xi_sup(&k);
        assert!((closed - ldp_epsilon(&k)).abs() < 1e-9);
        let grid = grid_sup(&k, 400);
        assert!(grid <= closed + 1e-12);
        assert!(closed - grid < 0.05, "grid {grid} closed {closed}");
        let finer = grid_sup(&k, 1600);
        assert!(finer >= grid - 1e-12 && finer <= closed + 1e-12);
    }

    #[test]
    fn mixture_examples() {
        let pi = dist(&[0.2, 0.3, 0.5]);
        let k = K::random(4, 3, 4, 1e-3).unwrap();
        let mix = posterior_mixture(&k, &pi, &pi).unwrap();
        for d in 0..3 {
            assert!((mix.get(d) - pi.get(d)).abs() < 1e-12);
        }
        let b = dist(&[0.5, 0.25, 0.25]);
        let c = K::constant(3, 2, 0).unwrap();
        assert_eq!(posterior_mixture(&c, &pi, &b).unwrap().mass(), b.mass());

        // enumeration: posteriors under (0.6, 0.4) after w=0 and w=1, mixed 50/50
        let u = P::uniform(2).unwrap();
        let att = dist(&[0.6, 0.4]);
        let rows = rr().to_rows_f64();
        let p0 = posterior_oracle(&rows, &[0.6, 0.4], 0);
        let p1 = posterior_oracle(&rows, &[0.6, 0.4], 1);
        let want = 0.5 * p0[0] + 0.5 * p1[0];
        let mix = posterior_mixture(&rr(), &u, &att).unwrap();
        assert!((mix.get(0) - want).abs() < 1e-15);
        assert!((mix.get(0) - 0.57576).abs() < 5e-6, "{}", mix.get(0));
    }

    #[test]
    fn abp_examples() {
        let u = P::uniform(2).unwrap();
        assert!(abp_epsilon(&rr(), &u, &u).unwrap() <= 1e-12);
        let pi = dist(&[0.2, 0.8]);
        let b = dist(&[0.7, 0.3]);
        assert!(abp_epsilon(&K::constant(2, 3, 1).unwrap(), &pi, &b).unwrap() <= 1e-12);
        let att = dist(&[0.6, 0.4]);
        let v = abp_epsilon(&rr(), &u, &att).unwrap();
        let mix = posterior_mixture(&rr(), &u, &att).unwrap();
        let m = [(mix.get(0) + 0.6) / 2.0, (mix.get(1) + 0.4) / 2.0];
        let js = 0.5 * (mix.get(0) * (mix.get(0) / m[0]).ln() + mix.get(1) * (mix.get(1) / m[1]).ln())
            + 0.5 * (0.6 * (0.6 / m[0]).ln() + 0.4 * (0.4 / m[1]).ln());
        assert!((v - js.sqrt()).abs() < 1e-15);
        assert!((v - 0.0174).abs() < 5e-5, "abp {v}");
        assert!(v <= 2f64.ln().sqrt() + 1e-12);
    }

    #[test]
    fn prior_mismatch_examples() {
        let u = P::uniform(2).unwrap();
        assert_eq!(prior_mismatch_eps(&u, &u).unwrap(), 0.0);
        // max(|ln 1.2|, |ln 0.8|) = ln 1.25
        assert!((prior_mismatch_eps(&u, &dist(&[0.6, 0.4])).unwrap() - 1.25f64.ln()).abs() < 1e-12);
        let lean = dist(&[0.7, 0.3, 0.0, 0.0]);
        assert!(prior_mismatch_eps(&P::uniform(4).unwrap(), &lean).is_err());
    }

    #[test]
    fn c_constants() {
        assert_eq!(c2(0.0f64), 0.0);
        assert!((c2(1.5f64.ln()) - 0.625).abs() < 1e-12);
        let b = dist(&[0.3, 0.7]);
        let c1v = c1(&b, &b).unwrap();
        assert_eq!(c1v, 0.0);
        assert_eq!(eps_tilde(c1v, 0.625, 0.2), -0.625 * 0.2);
    }

    #[test]
    fn report_fields_and_csv() {
        let u = P::uniform(2).unwrap();
        let att = dist(&[0.6, 0.4]);
        let r = privacy_report(&rr(), &u, &att, None).unwrap();
        assert!((r.eps_ldp - 3f64.ln()).abs() < 1e-12);
        assert!((r.c2 - c2(r.xi_mbp)).abs() < 1e-15);
        assert!(r.eps_abp <= 2f64.ln().sqrt() + 1e-12);
        assert_eq!(r.tv, 0.0);
        let json = serde_json::to_string(&r).unwrap();
        let back: PrivacyReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
        let inf = privacy_report(&K::identity(2).unwrap(), &u, &att, None).unwrap();
        assert!(serde_json::to_string(&inf).unwrap().contains("\"eps_ldp\":\"inf\""));
        assert_eq!(r.csv_row().split(',').count(), PrivacyReport::CSV_HEADER.split(',').count());
    }

    #[test]
    fn f32_metrics_track_f64() {
        let k32 = StochasticKernel::<f32>::randomized_response(2, 0.25).unwrap();
        let u32 = DiscreteDistribution::<f32>::uniform(2).unwrap();
        assert!((mbp_xi(&k32, &u32).unwrap() as f64 - 2f64.ln()).abs() < 1e-6);
        assert!((ldp_epsilon(&k32) as f64 - 3f64.ln()).abs() < 1e-6);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn total_probability_identity(s in any::<u64>(), n in 2usize..7, m in 2usize..7) {
            let mut rng = seed::rng(s);
            let k = K::random_with(&mut rng, n, m, 1e-3).unwrap();
            let pi = P::random_positive(&mut rng, n).unwrap();
            let mix = posterior_mixture(&k, &pi, &pi).unwrap();
            for d in 0..n {
                prop_assert!((mix.get(d) - pi.get(d)).abs() <= 1e-12);
            }
        }

        #[test]
        fn mbp_below_ldp(s in any::<u64>(), n in 2usize..7, m in 2usize..7) {
            let mut rng = seed::rng(s);
            let k = K::random_with(&mut rng, n, m, 1e-3).unwrap();
            let pi = P::random_positive(&mut rng, n).unwrap();
            prop_assert!(mbp_xi(&k, &pi).unwrap() <= ldp_epsilon(&k) + 1e-9);
            prop_assert!((mbp_xi_sup(&k) - ldp_oracle(&k.to_rows_f64())).abs() <= 1e-9);
        }

        #[test]
        fn c2_monotone_and_dominates(a in 0.0f64..5.0, b in 0.0f64..5.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(c2(lo) <= c2(hi));
            prop_assert!(c2(lo) >= lo);
        }
    }
}
