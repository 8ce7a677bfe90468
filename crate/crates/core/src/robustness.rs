//! Input robustness of the analytic tasks and the privacy → robustness bound.
//!
//! Perturbed inputs are projected back into the data domain, so every
//! constant estimated over the domain stays valid for the probes.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attack::leakage::{distortion_run, task_constants, DistortionConfig, TaskConstants, ESTIMATED_SLACK};
use crate::attack::task::{distance, LossFamily, ReconstructionTask};
use crate::attack::Optimizer;
use crate::error::{param, Result};
use crate::perturbation::{norm, random_unit};
use crate::seed;
use crate::verify::privacy::digest_of;
use crate::verify::BoundCheck;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeLevel {
    /// `‖∇L(θ, x + δ) − ∇L(θ, x)‖`.
    Gradient,
    /// `|L(θ, x + δ) − L(θ, x)|`.
    Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeBudget {
    /// Points `x` drawn uniformly from the domain.
    pub x_samples: usize,
    /// Random directions on the sphere `‖δ‖ = r`, on top of the `±` axis directions.
    pub probes: usize,
    /// Projected-ascent refinements from the best probe.
    pub ascent_steps: usize,
}

impl Default for ProbeBudget {
    fn default() -> Self {
        Self { x_samples: 1000, probes: 16, ascent_steps: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessMeasurement {
    pub radius: f64,
    /// Mean over `x` of the best probe found: a lower bound on `E_x sup_δ`.
    pub measured: f64,
    pub std_error: f64,
    pub budget: ProbeBudget,
    pub level: ProbeLevel,
}

fn probe_value(task: &ReconstructionTask, x: &[f64], sample: usize, delta: &[f64], level: ProbeLevel) -> f64 {
    let mut moved: Vec<f64> = x.iter().zip(delta).map(|(a, b)| a + b).collect();
    task.domain.project(&mut moved);
    match level {
        ProbeLevel::Gradient => distance(&task.gradient(&moved, sample), &task.gradient(x, sample)),
        ProbeLevel::Output => (task.loss(&moved, sample) - task.loss(x, sample)).abs(),
    }
}

fn inner_sup(task: &ReconstructionTask, x: &[f64], sample: usize, r: f64, budget: &ProbeBudget, level: ProbeLevel, seed: u64) -> f64 {
    let dim = task.dim();
    let mut rng = seed::rng(seed);
    let mut candidates: Vec<Vec<f64>> = Vec::with_capacity(2 * dim + budget.probes);
    for j in 0..dim {
        for s in [1.0, -1.0] {
            let mut e = vec![0.0; dim];
            e[j] = s * r;
            candidates.push(e);
        }
    }
    for _ in 0..budget.probes {
        candidates.push(random_unit(&mut rng, dim).into_iter().map(|u| u * r).collect());
    }
    let (mut best, mut best_val) = (candidates[0].clone(), f64::NEG_INFINITY);
    for c in candidates {
        let v = probe_value(task, x, sample, &c, level);
        if v > best_val {
            best_val = v;
            best = c;
        }
    }
    // projected ascent on the ball ‖δ‖ ≤ r with finite-difference gradients
    let h = 1e-7 * r.max(1e-12);
    let mut step = r / 4.0;
    for _ in 0..budget.ascent_steps {
        let grad: Vec<f64> = (0..dim)
            .map(|j| {
                let (mut up, mut dn) = (best.clone(), best.clone());
                up[j] += h;
                dn[j] -= h;
                (probe_value(task, x, sample, &up, level) - probe_value(task, x, sample, &dn, level)) / (2.0 * h)
            })
            .collect();
        let gn = norm(&grad);
        if !(gn > 0.0) {
            break;
        }
        let mut cand: Vec<f64> = best.iter().zip(&grad).map(|(d, g)| d + step * g / gn).collect();
        let cn = norm(&cand);
        if cn > r {
            cand.iter_mut().for_each(|v| *v *= r / cn);
        }
        let v = probe_value(task, x, sample, &cand, level);
        if v > best_val {
            best_val = v;
            best = cand;
        } else {
            step *= 0.5;
        }
    }
    best_val
}

/// Monte Carlo estimate of `E_{x ~ U(domain)} sup_{‖δ‖ ≤ r} q(x, δ)`.
pub fn measure_input_robustness(
    task: &ReconstructionTask,
    r: f64,
    budget: &ProbeBudget,
    level: ProbeLevel,
    seed: u64,
) -> Result<RobustnessMeasurement> {
    if !(r >= 0.0) || !r.is_finite() {
        return param(format!("radius r = {r} must be finite and >= 0"));
    }
    if budget.x_samples == 0 {
        return param("robustness budget needs at least one x sample");
    }
    if r == 0.0 {
        return Ok(RobustnessMeasurement { radius: r, measured: 0.0, std_error: 0.0, budget: *budget, level });
    }
    let values: Vec<f64> = (0..budget.x_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed::derived_rng(seed, "robust-x", i as u64);
            let x = task.domain.sample(&mut rng);
            inner_sup(task, &x, i, r, budget, level, seed::derive(seed, "robust-probe", i as u64))
        })
        .collect();
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 { values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    Ok(RobustnessMeasurement { radius: r, measured: mean, std_error: (var / n).sqrt(), budget: *budget, level })
}

/// Largest sampled `‖g(x₁) − g(x₂)‖ / ‖x₁ − x₂‖` over the domain.
///
/// The translation family's constant is exactly 1 and is returned as such.
pub fn lipschitz_estimate(task: &ReconstructionTask, samples: usize, seed: u64) -> Result<f64> {
    if samples < 1000 {
        return param(format!("Lipschitz estimate needs at least 1000 samples, got {samples}"));
    }
    if task.family == LossFamily::Translation {
        return Ok(1.0);
    }
    let mut rng = seed::rng(seed);
    let labels = task.labels.len().max(1);
    let mut best: f64 = 0.0;
    for _ in 0..samples {
        let m = rng.random_range(0..labels);
        let (a, b) = (task.domain.sample(&mut rng), task.domain.sample(&mut rng));
        let dx = distance(&a, &b);
        if dx < 1e-12 {
            continue;
        }
        best = best.max(distance(&task.gradient(&a, m), &task.gradient(&b, m)) / dx);
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaPrediction {
    pub lipschitz: f64,
    pub r: f64,
    pub diameter: f64,
    pub eps_p: f64,
    pub c_a: f64,
    pub c_b: f64,
    pub c_2: f64,
    pub rounds: usize,
    pub p: f64,
    /// `(4D(1 − ε_p) − c_2 c_b I^{p−1}) / c_a`: the distortion the leakage allows.
    pub distortion_bound: f64,
    pub alpha: f64,
    pub negative_second_term: bool,
}

/// `α = C r / 2 + (4D(1 − ε_p) − c_2 c_b I^{p−1}) / (2 c_a)`.
#[allow(clippy::too_many_arguments)]
pub fn predict_alpha(
    lipschitz: f64,
    r: f64,
    diameter: f64,
    eps_p: f64,
    c_a: f64,
    c_b: f64,
    c_2: f64,
    rounds: usize,
    p: f64,
) -> Result<AlphaPrediction> {
    if !(c_a > 0.0) {
        return param(format!("c_a = {c_a} must be positive"));
    }
    if rounds == 0 {
        return param("alpha needs I >= 1");
    }
    let distortion_bound = (4.0 * diameter * (1.0 - eps_p) - c_2 * c_b * (rounds as f64).powf(p - 1.0)) / c_a;
    Ok(AlphaPrediction {
        lipschitz,
        r,
        diameter,
        eps_p,
        c_a,
        c_b,
        c_2,
        rounds,
        p,
        distortion_bound,
        alpha: lipschitz * r / 2.0 + distortion_bound / 2.0,
        negative_second_term: distortion_bound < 0.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobustnessConfig {
    pub deltas: Vec<f64>,
    pub radii: Vec<f64>,
    pub rounds: usize,
    pub seeds: usize,
    #[serde(default)]
    pub budget: ProbeBudget,
    #[serde(default = "half")]
    pub p: f64,
    #[serde(default)]
    pub optimizer: Optimizer,
    #[serde(default = "lipschitz_samples")]
    pub lipschitz_samples: usize,
    #[serde(default = "pairs")]
    pub bilipschitz_pairs: usize,
}

fn half() -> f64 {
    0.5
}

fn lipschitz_samples() -> usize {
    20_000
}

fn pairs() -> usize {
    20_000
}

impl RobustnessConfig {
    pub fn new(deltas: Vec<f64>, radii: Vec<f64>, rounds: usize, seeds: usize) -> Self {
        Self {
            deltas,
            radii,
            rounds,
            seeds,
            budget: ProbeBudget::default(),
            p: half(),
            optimizer: Optimizer::default(),
            lipschitz_samples: lipschitz_samples(),
            bilipschitz_pairs: pairs(),
        }
    }
}

/// One line of the measurement table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessRow {
    pub r: f64,
    pub measured: f64,
    pub predicted_alpha: f64,
    pub slack: f64,
    pub holds: bool,
    pub delta: f64,
    pub seed_index: usize,
    pub eps_p: f64,
}

impl RobustnessRow {
    pub const CSV_HEADER: &'static str = "r,measured,predicted_alpha,slack,holds,delta,seed_index,eps_p";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.r, self.measured, self.predicted_alpha, self.slack, self.holds, self.delta, self.seed_index, self.eps_p
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessOutcome {
    pub constants: TaskConstants,
    pub lipschitz: f64,
    pub checks: Vec<BoundCheck>,
    pub rows: Vec<RobustnessRow>,
}

/// Measured gradient-level robustness `≤ α` over a `(Δ, seed) × r` grid, with
/// `ε_p` and `c_2` taken from an attack on the same distortion.
///
/// Every check also records whether the two bounds that `α` averages hold on
/// their own: `C r` and the leakage-implied distortion bound.
pub fn verify_privacy_robustness(
    task: &ReconstructionTask,
    cfg: &RobustnessConfig,
    master_seed: u64,
) -> Result<RobustnessOutcome> {
    if cfg.radii.iter().any(|r| !(*r >= 0.0)) || cfg.seeds == 0 {
        return param("robustness grid needs radii >= 0 and at least one seed");
    }
    let constants = task_constants(task, cfg.bilipschitz_pairs, master_seed);
    let lipschitz = lipschitz_estimate(task, cfg.lipschitz_samples, seed::derive(master_seed, "lipschitz", 0))?;
    let tol_for = |rhs: f64| if constants.estimated { ESTIMATED_SLACK * rhs.abs() } else { 1e-6 };
    let mut dcfg = DistortionConfig::new(cfg.deltas.clone(), vec![cfg.rounds], cfg.seeds);
    dcfg.p = cfg.p;
    dcfg.optimizer = cfg.optimizer.clone();

    let grid: Vec<(f64, usize)> = cfg.deltas.iter().flat_map(|&d| (0..cfg.seeds).map(move |s| (d, s))).collect();
    let runs: Vec<_> = grid
        .par_iter()
        .enumerate()
        .map(|(idx, &(delta, _))| distortion_run(task, delta, &dcfg, cfg.rounds, seed::derive(master_seed, "robust-attack", idx as u64)))
        .collect();

    let mut checks = Vec::new();
    let mut rows = Vec::new();
    for (idx, (run, &(delta, s))) in runs.into_iter().zip(&grid).enumerate() {
        let run = run?;
        let probe_seed = seed::derive(master_seed, "robust-measure", idx as u64);
        for &r in &cfg.radii {
            let m = measure_input_robustness(task, r, &cfg.budget, ProbeLevel::Gradient, probe_seed)?;
            let out = measure_input_robustness(task, r, &cfg.budget, ProbeLevel::Output, probe_seed)?;
            let pred = predict_alpha(lipschitz, r, task.diameter, run.eps_p, constants.c_a, constants.c_b, run.fit.c2_hat, cfg.rounds, cfg.p)?;
            let tol = tol_for(pred.alpha);
            let flag = |b: bool| if b { 1.0 } else { 0.0 };
            let digest = digest_of(&[delta, s as f64, r, cfg.rounds as f64, task.diameter]);
            let mut check = BoundCheck::new("privacy_robustness", m.measured, pred.alpha, tol, digest)
                .with_extra("r", r)
                .with_extra("delta", delta)
                .with_extra("seed_index", s as f64)
                .with_extra("eps_p", run.eps_p)
                .with_extra("c2_hat", run.fit.c2_hat)
                .with_extra("lipschitz", lipschitz)
                .with_extra("std_error", m.std_error)
                .with_extra("output_level", out.measured)
                .with_extra("lipschitz_bound", lipschitz * r)
                .with_extra("lipschitz_holds", flag(m.measured <= lipschitz * r + tol))
                .with_extra("distortion_bound", pred.distortion_bound)
                .with_extra("distortion_holds", flag(m.measured <= pred.distortion_bound + tol))
                .with_extra("in_regime", flag(lipschitz * r <= pred.distortion_bound));
            if pred.negative_second_term {
                check = check.with_note("negative distortion term");
            }
            rows.push(RobustnessRow {
                r,
                measured: m.measured,
                predicted_alpha: pred.alpha,
                slack: check.slack,
                holds: check.holds,
                delta,
                seed_index: s,
                eps_p: run.eps_p,
            });
            checks.push(check);
        }
    }
    Ok(RobustnessOutcome { constants, lipschitz, checks, rows })
}
