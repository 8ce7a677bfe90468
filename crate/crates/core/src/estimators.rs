//! Frequency-based estimation of posterior beliefs from repeated attacks.
//!
//! Pipeline: train an ensemble of models on random mini-batches, attack each
//! model's per-sample gradients `T` times, count how often each sample is
//! recovered (`M_d^m`), and turn the counts into `f̂(d|w_m) = M_d^m / (S T)`.
//! From there `ξ̂`, `Ĉ2` and `ε̃̂ = 2Ĉ1 − C2·TV` follow.
//!
//! A sample counts as recovered when `‖z̃ − z‖ / D ≤ t`. The attacker
//! reconstructs against the parameter at which the gradient was taken.

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attack::inversion::{protected_gradient, run_inversion, Optimizer};
use crate::attack::task::{distance, ReconstructionTask};
use crate::divergence::{js_slices, kl_slices};
use crate::error::{param, Error, Result};
use crate::mechanism::StochasticKernel;
use crate::metrics::{c2, eps_tilde};
use crate::perturbation::GradientPerturbation;
use crate::real;
use crate::seed;
use crate::verify::privacy::digest_of;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SgdConfig {
    pub steps: usize,
    pub step_size: f64,
    pub batch_size: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEnsemble {
    pub models: Vec<Vec<f64>>,
    /// Training steps each model received.
    pub budgets: Vec<usize>,
    pub sgd: SgdConfig,
    pub dataset_digest: String,
}

impl ModelEnsemble {
    /// Member with the largest training budget (first on ties).
    pub fn true_model(&self) -> usize {
        let mut best = 0;
        for (m, b) in self.budgets.iter().enumerate() {
            if *b > self.budgets[best] {
                best = m;
            }
        }
        best
    }
}

fn dataset_digest(dataset: &[Vec<f64>]) -> String {
    digest_of(&dataset.iter().flatten().copied().collect::<Vec<_>>())
}

/// `M` independent SGD runs from random initial parameters in the data domain.
pub fn generate_ensemble(task: &ReconstructionTask, dataset: &[Vec<f64>], m: usize, sgd: &SgdConfig) -> Result<ModelEnsemble> {
    if m == 0 || dataset.is_empty() {
        return param("ensemble needs M >= 1 and a nonempty dataset");
    }
    if sgd.batch_size == 0 || sgd.batch_size > dataset.len() {
        return param(format!("batch size {} must lie in 1..={}", sgd.batch_size, dataset.len()));
    }
    if !(sgd.step_size > 0.0) {
        return param("SGD step size must be positive");
    }
    let models = (0..m)
        .into_par_iter()
        .map(|model| {
            let mut rng = seed::derived_rng(sgd.seed, "ensemble", model as u64);
            let mut theta = task.domain.sample(&mut rng);
            for step in 0..sgd.steps {
                let batch = index::sample(&mut rng, dataset.len(), sgd.batch_size);
                let at = task.with_theta(theta.clone()).map_err(|_| Error::NonFinite { model, step })?;
                let mut grad = vec![0.0; theta.len()];
                for i in batch.iter() {
                    for (g, v) in grad.iter_mut().zip(at.gradient(&dataset[i], i)) {
                        *g += v / sgd.batch_size as f64;
                    }
                }
                for (t, g) in theta.iter_mut().zip(&grad) {
                    *t -= sgd.step_size * g;
                }
                if theta.iter().any(|t| !t.is_finite()) {
                    return Err(Error::NonFinite { model, step: step + 1 });
                }
            }
            Ok(theta)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ModelEnsemble { models, budgets: vec![sgd.steps; m], sgd: sgd.clone(), dataset_digest: dataset_digest(dataset) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecoveryConfig {
    #[serde(default)]
    pub optimizer: Optimizer,
    pub rounds: usize,
    /// Norm of the isotropic distortion drawn afresh for every trial.
    #[serde(default)]
    pub distortion: f64,
    /// Recovery threshold `t` on `‖z̃ − z‖ / D`.
    pub threshold: f64,
    /// Attack repetitions `T`.
    pub trials: usize,
}

/// Recovery counts for one model's batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDensity {
    pub batch: Vec<usize>,
    pub counts: Vec<u32>,
    /// `counts / (S T)`, aligned with `batch`.
    pub f_hat: Vec<f64>,
    pub diverged_trials: usize,
}

/// Attacks the batch `T` times and counts per-sample recoveries.
///
/// A diverged trial recovers nothing and is tallied in `diverged_trials`.
pub fn estimate_conditional_density(
    task: &ReconstructionTask,
    dataset: &[Vec<f64>],
    batch: &[usize],
    cfg: &RecoveryConfig,
    seed: u64,
) -> Result<ModelDensity> {
    if cfg.trials == 0 {
        return param("need T >= 1 attack trials");
    }
    if !(cfg.threshold > 0.0 && cfg.threshold <= 1.0) {
        return param(format!("recovery threshold t = {} must lie in (0, 1]", cfg.threshold));
    }
    if batch.is_empty() || batch.iter().any(|&i| i >= dataset.len()) {
        return param("batch must be nonempty and index into the dataset");
    }
    let data: Vec<Vec<f64>> = batch.iter().map(|&i| dataset[i].clone()).collect();
    let outcomes: Vec<Result<Option<Vec<bool>>>> = (0..cfg.trials)
        .into_par_iter()
        .map(|k| {
            let pert = if cfg.distortion > 0.0 {
                GradientPerturbation::isotropic(seed::derive(seed, "trial-noise", k as u64), cfg.distortion)?
            } else {
                GradientPerturbation::none()
            };
            let release = protected_gradient(task, &data, &pert)?;
            match run_inversion(task, &release, &cfg.optimizer, cfg.rounds, seed::derive(seed, "trial", k as u64)) {
                Ok(trace) => {
                    let last = trace.last().expect("at least one round");
                    Ok(Some(last.iter().zip(&data).map(|(x, z)| distance(x, z) / task.diameter <= cfg.threshold).collect()))
                }
                Err(Error::Divergence { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect();
    let mut counts = vec![0u32; batch.len()];
    let mut diverged_trials = 0;
    for o in outcomes {
        match o? {
            Some(hits) => counts.iter_mut().zip(hits).for_each(|(c, h)| *c += h as u32),
            None => diverged_trials += 1,
        }
    }
    let denom = (batch.len() * cfg.trials) as f64;
    let f_hat = counts.iter().map(|&c| c as f64 / denom).collect();
    Ok(ModelDensity { batch: batch.to_vec(), counts, f_hat, diverged_trials })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    /// `per_model[m][d] = f̂(d|w_m)`, zero for samples outside model `m`'s batch.
    pub per_model: Vec<Vec<f64>>,
    pub counts: Vec<Vec<u32>>,
    pub batches: Vec<Vec<usize>>,
    pub f_o_hat: Vec<f64>,
    pub trials: usize,
    pub batch_size: usize,
    pub diverged_trials: Vec<usize>,
}

impl DensityEstimate {
    pub const CSV_HEADER: &'static str = "model,sample,in_batch,count,f_hat";

    /// Per-model density table, one row per (model, sample).
    pub fn csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for (m, row) in self.per_model.iter().enumerate() {
            for (d, f) in row.iter().enumerate() {
                let in_batch = self.batches[m].contains(&d);
                out.push_str(&format!("{m},{d},{in_batch},{},{f}\n", self.counts[m][d]));
            }
        }
        out
    }

    /// Continuity floor `1 / (2 S T)` for zero counts.
    pub fn floor(&self) -> f64 {
        1.0 / (2.0 * (self.batch_size * self.trials) as f64)
    }
}

/// Full counting pass over an ensemble; each model attacks its own random batch.
pub fn estimate_density(
    task: &ReconstructionTask,
    dataset: &[Vec<f64>],
    ensemble: &ModelEnsemble,
    cfg: &RecoveryConfig,
    seed: u64,
) -> Result<DensityEstimate> {
    let n = dataset.len();
    let s = ensemble.sgd.batch_size;
    let mut per_model = Vec::with_capacity(ensemble.models.len());
    let mut counts = Vec::with_capacity(ensemble.models.len());
    let mut batches = Vec::with_capacity(ensemble.models.len());
    let mut diverged = Vec::with_capacity(ensemble.models.len());
    for (m, w) in ensemble.models.iter().enumerate() {
        let batch = index::sample(&mut seed::derived_rng(seed, "estimate-batch", m as u64), n, s).into_vec();
        let at = task.with_theta(w.clone())?;
        let md = estimate_conditional_density(&at, dataset, &batch, cfg, seed::derive(seed, "estimate-model", m as u64))?;
        let mut f = vec![0.0; n];
        let mut c = vec![0u32; n];
        for ((&d, &fv), &cv) in md.batch.iter().zip(&md.f_hat).zip(&md.counts) {
            f[d] = fv;
            c[d] = cv;
        }
        per_model.push(f);
        counts.push(c);
        batches.push(batch);
        diverged.push(md.diverged_trials);
    }
    let f_o_hat = estimate_f_o(&per_model)?;
    Ok(DensityEstimate { per_model, counts, batches, f_o_hat, trials: cfg.trials, batch_size: s, diverged_trials: diverged })
}

/// `f̂^O(d) = (1/M) Σ_m f̂(d|w_m)`.
pub fn estimate_f_o(per_model: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = per_model.first().ok_or_else(|| Error::Parameter("need at least one model".into()))?;
    if per_model.iter().any(|r| r.len() != first.len()) {
        return param("per-model estimates differ in length");
    }
    let m = per_model.len() as f64;
    Ok((0..first.len()).map(|d| per_model.iter().map(|r| r[d]).sum::<f64>() / m).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MbpEstimate {
    #[serde(with = "real")]
    pub xi_hat: f64,
    #[serde(with = "real")]
    pub kappa3_hat: f64,
    #[serde(with = "real")]
    pub c2_hat: f64,
    /// Positions whose zero estimate was raised to the floor.
    pub floored: Vec<usize>,
}

/// `ξ̂ = max_d |ln(f̂(d|w*) / f_D(d))|`, zero estimates raised to `floor`.
pub fn estimate_xi(f_hat: &[f64], prior: &[f64], floor: f64) -> Result<MbpEstimate> {
    if f_hat.len() != prior.len() || f_hat.is_empty() {
        return Err(Error::SupportMismatch { left: f_hat.len(), right: prior.len() });
    }
    if prior.iter().any(|p| !(*p > 0.0)) {
        return param("prior must be strictly positive");
    }
    if f_hat.iter().all(|f| *f <= 0.0) {
        return Err(Error::UndefinedEstimate("every density estimate is zero".into()));
    }
    let mut floored = Vec::new();
    let mut xi: f64 = 0.0;
    for (d, (&f, &p)) in f_hat.iter().zip(prior).enumerate() {
        let f = if f > 0.0 {
            f
        } else {
            floored.push(d);
            floor
        };
        xi = xi.max((f / p).ln().abs());
    }
    Ok(MbpEstimate { xi_hat: xi, kappa3_hat: xi, c2_hat: c2(xi), floored })
}

/// [`estimate_xi`] at one ensemble member, over that member's batch.
pub fn xi_at_model(density: &DensityEstimate, model: usize, prior: &[f64]) -> Result<MbpEstimate> {
    let batch = density.batches.get(model).ok_or_else(|| Error::Parameter(format!("no model {model}")))?;
    if prior.len() != density.f_o_hat.len() {
        return Err(Error::SupportMismatch { left: density.f_o_hat.len(), right: prior.len() });
    }
    let f: Vec<f64> = batch.iter().map(|&d| density.per_model[model][d]).collect();
    let p: Vec<f64> = batch.iter().map(|&d| prior[d]).collect();
    let mut est = estimate_xi(&f, &p, density.floor())?;
    est.floored = est.floored.into_iter().map(|i| batch[i]).collect();
    Ok(est)
}

/// Population value of [`xi_at_model`] when sample `d` is recovered with probability `ρ_d`.
pub fn induced_xi(recovery: &[f64], batch_size: usize, prior: &[f64]) -> f64 {
    recovery
        .iter()
        .zip(prior)
        .map(|(&r, &p)| if r > 0.0 { (r / batch_size as f64 / p).ln().abs() } else { f64::INFINITY })
        .fold(0.0, f64::max)
}

/// Kernel of a single-sample release: input `d` is revealed with probability
/// `ρ_d` and otherwise maps to a shared "not recovered" output.
pub fn induced_kernel(recovery: &[f64]) -> Result<StochasticKernel<f64>> {
    let n = recovery.len();
    let rows = recovery
        .iter()
        .enumerate()
        .map(|(d, &r)| {
            let mut row = vec![0.0; n + 1];
            row[d] = r;
            row[n] = 1.0 - r;
            row
        })
        .collect();
    StochasticKernel::new(rows)
}

/// Delta-method `3σ` tolerance for `ln f̂` when the recovery rate is `ρ̂` over `T` trials.
pub fn log_estimate_tolerance(rho_hat: f64, trials: usize) -> f64 {
    if rho_hat <= 0.0 {
        return f64::INFINITY;
    }
    3.0 * ((1.0 - rho_hat) / (rho_hat * trials as f64)).sqrt() + 1e-9
}

/// Distribution-level comparator: `KL(f̂^O ‖ f_D)` after renormalizing `f̂^O`.
///
/// Smaller means more similar, so [`distribution_recovered`] accepts values at
/// or below the threshold.
pub fn omega(f_o_hat: &[f64], prior: &[f64]) -> Result<f64> {
    let norm = renormalized(f_o_hat)?;
    if norm.len() != prior.len() {
        return Err(Error::SupportMismatch { left: norm.len(), right: prior.len() });
    }
    Ok(kl_slices(&norm, prior))
}

pub fn distribution_recovered(omega: f64, threshold: f64) -> bool {
    omega <= threshold
}

fn renormalized(v: &[f64]) -> Result<Vec<f64>> {
    let t: f64 = v.iter().sum();
    if !(t > 0.0) {
        return Err(Error::UndefinedEstimate("f_O estimate has no mass".into()));
    }
    Ok(v.iter().map(|x| x / t).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsTildeAssembly {
    pub f_o_raw: Vec<f64>,
    pub f_o_normalized: Vec<f64>,
    pub attacker_prior: Vec<f64>,
    pub c1_hat: f64,
    #[serde(with = "real")]
    pub c2: f64,
    pub tv: f64,
    #[serde(with = "real")]
    pub eps_tilde_hat: f64,
}

/// `Ĉ1 = √JS(f̂^O ‖ F^B)` on the renormalized estimate, then `2Ĉ1 − C2·TV`.
pub fn assemble_eps_tilde(f_o_hat: &[f64], attacker_prior: &[f64], c2: f64, tv: f64) -> Result<EpsTildeAssembly> {
    let norm = renormalized(f_o_hat)?;
    if norm.len() != attacker_prior.len() {
        return Err(Error::SupportMismatch { left: norm.len(), right: attacker_prior.len() });
    }
    if !(0.0..=1.0).contains(&tv) {
        return param(format!("TV = {tv} must lie in [0, 1]"));
    }
    let c1_hat = js_slices(&norm, attacker_prior).sqrt();
    Ok(EpsTildeAssembly {
        f_o_raw: f_o_hat.to_vec(),
        f_o_normalized: norm,
        attacker_prior: attacker_prior.to_vec(),
        c1_hat,
        c2,
        tv,
        eps_tilde_hat: eps_tilde(c1_hat, c2, tv),
    })
}
