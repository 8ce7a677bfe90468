//! PAC robustness of MBP mechanisms, by exact enumeration.
//!
//! A [`PacMechanism`] pairs a kernel over datasets with an estimate `e(w)` for
//! every released value. Failure means `‖e(W) − μ‖ > α`; its probability under
//! input `d` is a finite sum over the kernel row, so no sampling is involved.

use rand::Rng;

use crate::error::{param, Result};
use crate::mechanism::StochasticKernel;
use crate::metrics::mbp_xi_sup;
use crate::perturbation::norm;
use crate::verify::privacy::digest_of;
use crate::verify::BoundCheck;

pub const PAC_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct PacMechanism {
    pub kernel: StochasticKernel<f64>,
    /// `e(w)` for every output label.
    pub estimates: Vec<Vec<f64>>,
    pub target: Vec<f64>,
    pub alpha: f64,
    /// Tightest confidence parameter: `max_d Pr[fail | d]`.
    pub beta: f64,
}

impl PacMechanism {
    pub fn new(kernel: StochasticKernel<f64>, estimates: Vec<Vec<f64>>, target: Vec<f64>, alpha: f64) -> Result<Self> {
        if estimates.len() != kernel.n_outputs() {
            return param(format!("{} estimates for {} outputs", estimates.len(), kernel.n_outputs()));
        }
        if estimates.iter().any(|e| e.len() != target.len()) {
            return param("estimate dimension differs from target dimension");
        }
        if !(alpha >= 0.0) {
            return param(format!("accuracy alpha = {alpha} must be >= 0"));
        }
        let mut pm = Self { kernel, estimates, target, alpha, beta: 0.0 };
        pm.beta = pm.failure_probabilities().into_iter().fold(0.0, f64::max);
        Ok(pm)
    }

    pub fn failure_set(&self) -> Vec<bool> {
        self.estimates
            .iter()
            .map(|e| {
                let diff: Vec<f64> = e.iter().zip(&self.target).map(|(a, b)| a - b).collect();
                norm(&diff) > self.alpha
            })
            .collect()
    }

    /// `Pr[‖e(W) − μ‖ > α | d]` for every input `d`.
    pub fn failure_probabilities(&self) -> Vec<f64> {
        let fail = self.failure_set();
        self.kernel
            .rows()
            .map(|row| row.iter().zip(&fail).filter(|(_, f)| **f).map(|(p, _)| *p).sum())
            .collect()
    }

    pub fn digest(&self) -> String {
        let mut v: Vec<f64> = self.estimates.iter().flatten().copied().collect();
        v.extend(&self.target);
        v.push(self.alpha);
        format!("{}:{}", self.kernel.digest(), digest_of(&v))
    }

    /// Random instance whose kernel has `ε_LDP ≤ xi_max`, with α splitting the outputs.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, n_inputs: usize, n_outputs: usize, dim: usize, xi_max: f64) -> Result<Self> {
        if n_outputs < 2 {
            return param("need at least two outputs to split");
        }
        // K[d][w] ∝ base_w · e^{u_dw}, u in [0, a]: column log-ratios are at most 2a.
        let a = xi_max / 2.0 * rng.random_range(0.05..=1.0);
        let base: Vec<f64> = (0..n_outputs).map(|_| rng.random_range(0.1..1.0)).collect();
        let rows: Vec<Vec<f64>> = (0..n_inputs)
            .map(|_| {
                let w: Vec<f64> = base.iter().map(|b| b * rng.random_range(0.0..=a).exp()).collect();
                let t: f64 = w.iter().sum();
                let mut row: Vec<f64> = w.iter().map(|x| x / t).collect();
                let err = 1.0 - row.iter().sum::<f64>();
                row[0] += err;
                row
            })
            .collect();
        let kernel = StochasticKernel::new(rows)?;
        let estimates: Vec<Vec<f64>> =
            (0..n_outputs).map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let target: Vec<f64> = (0..dim).map(|_| rng.random_range(-0.5..0.5)).collect();
        let mut dists: Vec<f64> = estimates
            .iter()
            .map(|e| norm(&e.iter().zip(&target).map(|(x, y)| x - y).collect::<Vec<_>>()))
            .collect();
        dists.sort_by(f64::total_cmp);
        let cut = rng.random_range(0..n_outputs - 1);
        let alpha = 0.5 * (dists[cut] + dists[cut + 1]);
        Self::new(kernel, estimates, target, alpha)
    }
}

/// For every pair of inputs `(d, d')`: `Pr[fail | d'] ≤ (1 + 4ξ) Pr[fail | d]`,
/// with `ξ = ξ_sup` of the kernel.
///
/// The check is stated with `lhs = max_{d'} Pr[fail | d']` and
/// `rhs = (1 + 4ξ) min_d Pr[fail | d]`, which implies the weaker form against
/// `β* = max_d Pr[fail | d]` (reported as `rhs_beta_star`). The chain value
/// `e^{2ξ} β` is reported alongside. Only asserted for `ξ ≤ 1`.
pub fn verify_pac_robustness(pm: &PacMechanism) -> BoundCheck {
    let xi = mbp_xi_sup(&pm.kernel);
    let probs = pm.failure_probabilities();
    let worst = probs.iter().copied().fold(0.0, f64::max);
    let best = probs.iter().copied().fold(f64::INFINITY, f64::min);
    let factor = 1.0 + 4.0 * xi;
    let rhs = if best == 0.0 { 0.0 } else { factor * best };
    let mut check = BoundCheck::new("pac_robustness", worst, rhs, PAC_TOL, pm.digest())
        .with_extra("xi", xi)
        .with_extra("beta_star", pm.beta)
        .with_extra("beta_min", best)
        .with_extra("rhs_beta_star", factor * pm.beta)
        .with_extra("chain_e2xi_beta", (2.0 * xi).exp() * best)
        .with_extra("chain_e2xi_beta_star", (2.0 * xi).exp() * pm.beta);
    if pm.beta == 0.0 {
        check = check.with_note("vacuous: empty failure set");
    }
    if !(xi <= 1.0) {
        check = check.reported_only(format!("xi_sup = {xi} > 1: outside the theorem's range"));
    }
    check
}
