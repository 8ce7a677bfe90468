//! Privacy leakage of a reconstruction attack, regret fits, and the
//! privacy–distortion bound.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attack::inversion::{protected_gradient, reconstruction_distances, run_inversion, AttackTrace, Optimizer};
use crate::attack::task::ReconstructionTask;
use crate::error::{param, Error, Result};
use crate::perturbation::GradientPerturbation;
use crate::seed;
use crate::verify::privacy::digest_of;
use crate::verify::BoundCheck;

/// `ε_p = (D − (1/I) Σ_i (1/|D|) Σ_m ‖d_i^(m) − d̆^(m)‖) / D`, clamped to `[0, 1]`.
///
/// An empty trace leaks nothing.
pub fn privacy_leakage(trace: &AttackTrace, original: &[Vec<f64>], diameter: f64) -> Result<f64> {
    if trace.iterates.is_empty() {
        return Ok(0.0);
    }
    if !(diameter > 0.0) {
        return param(format!("diameter D = {diameter} must be positive"));
    }
    let dists = reconstruction_distances(trace, original);
    let mut total = 0.0;
    for (round, row) in dists.iter().enumerate() {
        for (sample, &d) in row.iter().enumerate() {
            if d > diameter * (1.0 + 1e-12) {
                return Err(Error::DomainBound { distance: d, bound: diameter, round: round + 1, sample });
            }
        }
        total += row.iter().sum::<f64>() / row.len() as f64;
    }
    let avg = total / dists.len() as f64;
    Ok(((diameter - avg) / diameter).clamp(0.0, 1.0))
}

/// Fit of `c_0 I^p ≤ Σ_{i≤I} gap_i ≤ c_2 I^p` over the trace's prefixes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretFit {
    pub c0_hat: f64,
    pub c2_hat: f64,
    pub p: f64,
    /// Cumulative gap after each round.
    pub prefix_curve: Vec<f64>,
    /// All gaps zero.
    pub degenerate: bool,
    /// Log-log slope of the cumulative gap over the second half of the rounds.
    pub growth_exponent: f64,
    /// `growth_exponent ≤ p + 0.1`: the cumulative gap is `O(I^p)`.
    pub conforming: bool,
}

/// Shortest prefix used in the fit.
pub const MIN_PREFIX: usize = 5;

pub fn fit_regret(trace: &AttackTrace, p: f64) -> Result<RegretFit> {
    fit_regret_gaps(&trace.gradient_gaps, p)
}

pub fn fit_regret_gaps(gaps: &[f64], p: f64) -> Result<RegretFit> {
    if gaps.len() < 10 {
        return param(format!("regret fit needs at least 10 rounds, got {}", gaps.len()));
    }
    if !(p > 0.0 && p <= 1.0) {
        return param(format!("regret exponent p = {p} must lie in (0, 1]"));
    }
    let mut prefix_curve = Vec::with_capacity(gaps.len());
    let mut acc = 0.0;
    for g in gaps {
        acc += g;
        prefix_curve.push(acc);
    }
    if acc == 0.0 {
        return Ok(RegretFit {
            c0_hat: 0.0,
            c2_hat: 0.0,
            p,
            prefix_curve,
            degenerate: true,
            growth_exponent: 0.0,
            conforming: true,
        });
    }
    let mut c0: f64 = f64::INFINITY;
    let mut c2: f64 = 0.0;
    for (k, s) in prefix_curve.iter().enumerate().skip(MIN_PREFIX - 1) {
        let ratio = s / ((k + 1) as f64).powf(p);
        c0 = c0.min(ratio);
        c2 = c2.max(ratio);
    }
    let growth_exponent = log_log_slope(&prefix_curve);
    Ok(RegretFit {
        c0_hat: c0,
        c2_hat: c2,
        p,
        prefix_curve,
        degenerate: false,
        growth_exponent,
        conforming: growth_exponent <= p + 0.1,
    })
}

fn log_log_slope(curve: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = curve
        .iter()
        .enumerate()
        .skip(curve.len() / 2)
        .filter(|(_, s)| **s > 0.0)
        .map(|(k, s)| (((k + 1) as f64).ln(), s.ln()))
        .collect();
    if pts.len() < 2 {
        return 0.0;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistortionConfig {
    pub deltas: Vec<f64>,
    pub rounds: Vec<usize>,
    pub seeds: usize,
    /// Samples per attacked batch.
    #[serde(default = "one")]
    pub batch: usize,
    #[serde(default = "half")]
    pub p: f64,
    #[serde(default)]
    pub optimizer: Optimizer,
    /// Direction of `δ`; all ones when absent.
    #[serde(default)]
    pub direction: Option<Vec<f64>>,
    /// Pairs per label for estimated bi-Lipschitz constants.
    #[serde(default = "pairs")]
    pub bilipschitz_pairs: usize,
}

fn one() -> usize {
    1
}

fn half() -> f64 {
    0.5
}

fn pairs() -> usize {
    20_000
}

impl DistortionConfig {
    pub fn new(deltas: Vec<f64>, rounds: Vec<usize>, seeds: usize) -> Self {
        Self {
            deltas,
            rounds,
            seeds,
            batch: one(),
            p: half(),
            optimizer: Optimizer::default(),
            direction: None,
            bilipschitz_pairs: pairs(),
        }
    }
}

/// Bi-Lipschitz constants and whether they were estimated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskConstants {
    pub c_a: f64,
    pub c_b: f64,
    pub estimated: bool,
}

/// Multiplicative slack granted to verdicts that rely on estimated constants.
pub const ESTIMATED_SLACK: f64 = 0.05;

pub fn task_constants(task: &ReconstructionTask, pairs: usize, master_seed: u64) -> TaskConstants {
    match task.exact_bilipschitz() {
        Some((c_a, c_b)) => TaskConstants { c_a, c_b, estimated: false },
        None => {
            let (c_a, c_b) = task.bilipschitz(&mut seed::derived_rng(master_seed, "bilipschitz", 0), pairs);
            TaskConstants { c_a, c_b, estimated: true }
        }
    }
}

/// One attacked batch at a fixed distortion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionRun {
    pub delta: f64,
    pub data: Vec<Vec<f64>>,
    pub trace: AttackTrace,
    pub eps_p: f64,
    pub fit: RegretFit,
}

/// Draws a batch whose distorted preimages stay inside the domain, releases
/// it with `δ = Δ · direction`, and attacks it for `rounds` rounds.
pub fn distortion_run(
    task: &ReconstructionTask,
    delta: f64,
    cfg: &DistortionConfig,
    rounds: usize,
    seed: u64,
) -> Result<DistortionRun> {
    let dim = task.dim();
    let direction = cfg.direction.clone().unwrap_or_else(|| vec![1.0; dim]);
    let pert = if delta == 0.0 { GradientPerturbation::none() } else { GradientPerturbation::fixed(direction, delta)? };
    let shift = pert.vector(dim)?;
    let mut rng = seed::rng(seed);
    let mut data = Vec::with_capacity(cfg.batch);
    for m in 0..cfg.batch {
        let mut tries = 0;
        loop {
            let x = task.domain.sample(&mut rng);
            let g: Vec<f64> = task.gradient(&x, m).iter().zip(&shift).map(|(a, b)| a + b).collect();
            if task.invert(&g, m).is_some_and(|t| task.domain.contains(&t)) {
                data.push(x);
                break;
            }
            tries += 1;
            if tries >= 10_000 {
                return param(format!("no sample keeps the distortion Δ = {delta} inside the domain"));
            }
        }
    }
    let release = protected_gradient(task, &data, &pert)?;
    let trace = run_inversion(task, &release, &cfg.optimizer, rounds, seed::derive(seed, "inversion", 0))?;
    let eps_p = privacy_leakage(&trace, &data, task.diameter)?;
    let fit = fit_regret(&trace, cfg.p)?;
    Ok(DistortionRun { delta, data, trace, eps_p, fit })
}

/// `1 − (c_a Δ + c I^{p−1}) / (4D)` for a regret term `c`.
pub fn distortion_rhs(c_a: f64, delta: f64, regret_term: f64, rounds: usize, p: f64, diameter: f64) -> f64 {
    1.0 - (c_a * delta + regret_term * (rounds as f64).powf(p - 1.0)) / (4.0 * diameter)
}

/// Point on the `ε_p` vs `Δ` curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionPoint {
    pub delta: f64,
    pub rounds: usize,
    pub seed_index: usize,
    pub eps_p: f64,
    pub rhs: f64,
    pub rhs_c0: f64,
    pub asserted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionOutcome {
    pub constants: TaskConstants,
    pub checks: Vec<BoundCheck>,
    pub points: Vec<DistortionPoint>,
    /// Traces of asserted checks that failed, keyed by check index.
    pub violations: Vec<(usize, AttackTrace)>,
}

impl DistortionOutcome {
    /// Share of asserted checks that hold (1 when none are asserted).
    pub fn pass_rate(&self) -> f64 {
        let asserted = self.checks.iter().filter(|c| c.asserted).count();
        if asserted == 0 {
            return 1.0;
        }
        self.checks.iter().filter(|c| c.asserted && c.holds).count() as f64 / asserted as f64
    }
}

/// Measured `ε_p ≤ 1 − (c_a Δ + c_2 c_b I^{p−1}) / (4D)` over a `(Δ, I, seed)` grid.
///
/// Configurations with `Δ < (2 c_2 c_b / c_a) I^{p−1}` and those whose bound is
/// nonpositive are reported, not asserted. The variant with `c_a c_0` in place
/// of `c_2 c_b` is attached to every check as `rhs_c0`.
pub fn verify_privacy_distortion(
    task: &ReconstructionTask,
    cfg: &DistortionConfig,
    master_seed: u64,
) -> Result<DistortionOutcome> {
    if cfg.deltas.iter().any(|d| !(*d >= 0.0)) || cfg.rounds.is_empty() || cfg.seeds == 0 {
        return param("distortion grid needs deltas >= 0, some rounds and at least one seed");
    }
    let constants = task_constants(task, cfg.bilipschitz_pairs, master_seed);
    let TaskConstants { c_a, c_b, estimated } = constants;
    let grid: Vec<(f64, usize, usize)> = cfg
        .deltas
        .iter()
        .flat_map(|&d| cfg.rounds.iter().flat_map(move |&i| (0..cfg.seeds).map(move |s| (d, i, s))))
        .collect();
    let runs: Vec<Result<DistortionRun>> = grid
        .par_iter()
        .enumerate()
        .map(|(idx, &(delta, rounds, _))| {
            distortion_run(task, delta, cfg, rounds, seed::derive(master_seed, "distortion", idx as u64))
        })
        .collect();

    let d = task.diameter;
    let mut checks = Vec::with_capacity(grid.len());
    let mut points = Vec::with_capacity(grid.len());
    let mut violations = Vec::new();
    for (idx, (run, &(delta, rounds, s))) in runs.into_iter().zip(&grid).enumerate() {
        let run = run?;
        let fit = &run.fit;
        let i_pow = (rounds as f64).powf(cfg.p - 1.0);
        let rhs_c2 = distortion_rhs(c_a, delta, fit.c2_hat * c_b, rounds, cfg.p, d);
        let rhs_c0 = distortion_rhs(c_a, delta, c_a * fit.c0_hat, rounds, cfg.p, d);
        let threshold = 2.0 * fit.c2_hat * c_b / c_a * i_pow;
        let tol = if estimated { ESTIMATED_SLACK * rhs_c2.abs() } else { 1e-12 };
        let digest = digest_of(&[delta, rounds as f64, s as f64, task.diameter, c_a, c_b]);
        let mut check = BoundCheck::new("privacy_distortion", run.eps_p, rhs_c2, tol, digest)
            .with_extra("delta", delta)
            .with_extra("rounds", rounds as f64)
            .with_extra("seed_index", s as f64)
            .with_extra("c0_hat", fit.c0_hat)
            .with_extra("c2_hat", fit.c2_hat)
            .with_extra("c_a", c_a)
            .with_extra("c_b", c_b)
            .with_extra("precondition_threshold", threshold)
            .with_extra("rhs_c0", rhs_c0)
            .with_extra("c0_holds", if run.eps_p <= rhs_c0 + tol { 1.0 } else { 0.0 })
            .with_extra("regret_conforming", if fit.conforming { 1.0 } else { 0.0 });
        if delta < threshold {
            check = check.reported_only(format!("precondition unmet: delta {delta} < {threshold}"));
        } else if rhs_c2 <= 0.0 {
            check = check.reported_only("bound vacuous: rhs <= 0");
        }
        if check.failed() {
            violations.push((idx, run.trace.clone()));
        }
        points.push(DistortionPoint {
            delta,
            rounds,
            seed_index: s,
            eps_p: run.eps_p,
            rhs: rhs_c2,
            rhs_c0: rhs_c0,
            asserted: check.asserted,
        });
        checks.push(check);
    }
    Ok(DistortionOutcome { constants, checks, points, violations })
}
