//! Protected gradient release and the gradient-matching attacker.

use serde::{Deserialize, Serialize};

use crate::attack::task::{distance, ReconstructionTask};
use crate::error::{param, Error, Result};
use crate::perturbation::{norm, GradientPerturbation};
use crate::seed;

/// What the defender publishes for one batch.
///
/// Each sample's gradient carries the same distortion `δ`, so the batch mean
/// is `(1/|D|) Σ_m g(d^(m)) + δ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtectedRelease {
    pub per_sample: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    pub delta: Vec<f64>,
    /// `Δ = ‖δ‖`.
    pub distortion: f64,
}

pub fn protected_gradient(
    task: &ReconstructionTask,
    data: &[Vec<f64>],
    perturbation: &GradientPerturbation,
) -> Result<ProtectedRelease> {
    if data.is_empty() {
        return param("empty batch");
    }
    if let Some(m) = data.iter().position(|x| !task.domain.contains(x)) {
        return param(format!("sample {m} lies outside the data domain"));
    }
    let delta = perturbation.vector(task.dim())?;
    let per_sample: Vec<Vec<f64>> = data
        .iter()
        .enumerate()
        .map(|(m, x)| task.gradient(x, m).iter().zip(&delta).map(|(g, d)| g + d).collect())
        .collect();
    let n = data.len() as f64;
    let mean = (0..task.dim()).map(|j| per_sample.iter().map(|g| g[j]).sum::<f64>() / n).collect();
    Ok(ProtectedRelease { per_sample, mean, distortion: perturbation.magnitude, delta })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Optimizer {
    /// Fixed step; `None` means `0.1 / C` with `C` the task's Lipschitz bound.
    GradientDescent {
        #[serde(default)]
        step: Option<f64>,
    },
    Adam {
        lr: f64,
        #[serde(default = "beta1")]
        beta1: f64,
        #[serde(default = "beta2")]
        beta2: f64,
    },
}

fn beta1() -> f64 {
    0.9
}

fn beta2() -> f64 {
    0.999
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::GradientDescent { step: None }
    }
}

impl Optimizer {
    pub fn id(&self) -> String {
        match self {
            Optimizer::GradientDescent { step: None } => "gd".into(),
            Optimizer::GradientDescent { step: Some(s) } => format!("gd(step={s})"),
            Optimizer::Adam { lr, beta1, beta2 } => format!("adam(lr={lr},b1={beta1},b2={beta2})"),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            Optimizer::GradientDescent { step } => step.is_none_or(|s| s > 0.0 && s.is_finite()),
            Optimizer::Adam { lr, beta1, beta2 } => {
                *lr > 0.0 && (0.0..1.0).contains(beta1) && (0.0..1.0).contains(beta2)
            }
        };
        if ok {
            Ok(())
        } else {
            param(format!("invalid optimizer settings {}", self.id()))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackTrace {
    /// `iterates[i][m]`: reconstruction of sample `m` after round `i + 1`.
    pub iterates: Vec<Vec<Vec<f64>>>,
    /// `sample_gaps[i][m] = ‖g(d_i^(m)) − g(target^(m))‖` (or the gap to the release).
    pub sample_gaps: Vec<Vec<f64>>,
    /// Mean of `sample_gaps[i]` over samples.
    pub gradient_gaps: Vec<f64>,
    pub rounds: usize,
    pub optimizer_id: String,
    pub seed: u64,
    /// `g^{-1}` of each released gradient, when the task can invert it.
    pub targets: Vec<Option<Vec<f64>>>,
}

impl AttackTrace {
    pub fn last(&self) -> Option<&[Vec<f64>]> {
        self.iterates.last().map(Vec::as_slice)
    }

    /// True when every gap was measured against an inverted target.
    pub fn invertible(&self) -> bool {
        self.targets.iter().all(Option::is_some)
    }
}

/// Divergence: gap above `10×` its initial value for this many consecutive rounds.
pub const DIVERGENCE_PATIENCE: usize = 100;

/// Tracks consecutive rounds with the gap above `10×` its initial value.
#[derive(Debug, Clone)]
pub struct DivergenceMonitor {
    initial: f64,
    streak: usize,
}

impl DivergenceMonitor {
    pub fn new(initial: f64) -> Self {
        Self { initial, streak: 0 }
    }

    /// True once the run counts as diverged (including a non-finite gap).
    pub fn observe(&mut self, gap: f64) -> bool {
        if !gap.is_finite() {
            return true;
        }
        self.streak = if self.initial > 0.0 && gap > 10.0 * self.initial { self.streak + 1 } else { 0 };
        self.streak >= DIVERGENCE_PATIENCE
    }
}

/// Minimizes `½‖g(x) − W̃^(m)‖²` per sample from a seeded random start,
/// projecting every iterate into the data domain.
pub fn run_inversion(
    task: &ReconstructionTask,
    release: &ProtectedRelease,
    optimizer: &Optimizer,
    rounds: usize,
    seed: u64,
) -> Result<AttackTrace> {
    if rounds == 0 {
        return param("inversion needs at least one round");
    }
    optimizer.validate()?;
    let mut rng = seed::rng(seed);
    let n = release.per_sample.len();
    let dim = task.dim();
    let targets: Vec<Option<Vec<f64>>> = release.per_sample.iter().enumerate().map(|(m, g)| task.invert(g, m)).collect();
    let target_grads: Vec<Vec<f64>> = targets
        .iter()
        .zip(&release.per_sample)
        .enumerate()
        .map(|(m, (t, w))| t.as_ref().map_or_else(|| w.clone(), |x| task.gradient(x, m)))
        .collect();
    let gap = |x: &[f64], m: usize| distance(&task.gradient(x, m), &target_grads[m]);

    let mut xs: Vec<Vec<f64>> = (0..n).map(|_| task.domain.sample(&mut rng)).collect();
    let initial: Vec<f64> = xs.iter().enumerate().map(|(m, x)| gap(x, m)).collect();
    let initial_mean = initial.iter().sum::<f64>() / n as f64;

    let step = match optimizer {
        Optimizer::GradientDescent { step } => step.unwrap_or(0.1 / task.lipschitz_bound()),
        Optimizer::Adam { lr, .. } => *lr,
    };
    let mut moment1 = vec![vec![0.0; dim]; n];
    let mut moment2 = vec![vec![0.0; dim]; n];

    let mut iterates = Vec::with_capacity(rounds);
    let mut sample_gaps = Vec::with_capacity(rounds);
    let mut gradient_gaps = Vec::with_capacity(rounds);
    let mut monitor = DivergenceMonitor::new(initial_mean);
    for i in 0..rounds {
        for (m, x) in xs.iter_mut().enumerate() {
            let grad = task.matching_gradient(x, m, &release.per_sample[m]);
            match optimizer {
                Optimizer::GradientDescent { .. } => {
                    for (v, g) in x.iter_mut().zip(&grad) {
                        *v -= step * g;
                    }
                }
                Optimizer::Adam { beta1, beta2, .. } => {
                    let t = (i + 1) as i32;
                    for j in 0..dim {
                        moment1[m][j] = beta1 * moment1[m][j] + (1.0 - beta1) * grad[j];
                        moment2[m][j] = beta2 * moment2[m][j] + (1.0 - beta2) * grad[j] * grad[j];
                        let mh = moment1[m][j] / (1.0 - beta1.powi(t));
                        let vh = moment2[m][j] / (1.0 - beta2.powi(t));
                        x[j] -= step * mh / (vh.sqrt() + 1e-12);
                    }
                }
            }
            task.domain.project(x);
        }
        let gaps: Vec<f64> = xs.iter().enumerate().map(|(m, x)| gap(x, m)).collect();
        let mean = gaps.iter().sum::<f64>() / n as f64;
        if monitor.observe(mean) {
            return Err(Error::Divergence { round: i + 1, gap: mean, initial: initial_mean });
        }
        iterates.push(xs.clone());
        sample_gaps.push(gaps);
        gradient_gaps.push(mean);
    }
    Ok(AttackTrace { iterates, sample_gaps, gradient_gaps, rounds, optimizer_id: optimizer.id(), seed, targets })
}

/// Per-round, per-sample distance to the original data.
pub fn reconstruction_distances(trace: &AttackTrace, original: &[Vec<f64>]) -> Vec<Vec<f64>> {
    trace.iterates.iter().map(|round| round.iter().zip(original).map(|(x, o)| distance(x, o)).collect()).collect()
}

pub const TRACE_CSV_HEADER: &str = "round,sample,distance,gradient_gap";

/// `round,sample,distance,gradient_gap`, rounds numbered from 1.
pub fn trace_csv(trace: &AttackTrace, original: &[Vec<f64>]) -> String {
    let mut out = String::from(TRACE_CSV_HEADER);
    out.push('\n');
    for (i, (dists, gaps)) in reconstruction_distances(trace, original).iter().zip(&trace.sample_gaps).enumerate() {
        for (m, (d, g)) in dists.iter().zip(gaps).enumerate() {
            out.push_str(&format!("{},{m},{d},{g}\n", i + 1));
        }
    }
    out
}

/// `‖δ‖` as recovered from a release and the clean data.
pub fn observed_distortion(task: &ReconstructionTask, data: &[Vec<f64>], release: &ProtectedRelease) -> f64 {
    let clean: Vec<f64> = (0..task.dim())
        .map(|j| data.iter().enumerate().map(|(m, x)| task.gradient(x, m)[j]).sum::<f64>() / data.len() as f64)
        .collect();
    norm(&release.mean.iter().zip(&clean).map(|(a, b)| a - b).collect::<Vec<_>>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack::task::DataDomain;

    fn translation() -> ReconstructionTask {
        ReconstructionTask::translation(vec![0.5], DataDomain::unit(1)).unwrap()
    }

    #[test]
    fn release_distortion_is_exact() {
        let t = translation();
        let data = vec![vec![0.3], vec![0.8]];
        let clean = protected_gradient(&t, &data, &GradientPerturbation::none()).unwrap();
        assert!((clean.mean[0] + 0.05).abs() < 1e-15);
        assert_eq!(clean.distortion, 0.0);
        let p = GradientPerturbation::fixed(vec![1.0], 0.2).unwrap();
        let r = protected_gradient(&t, &data, &p).unwrap();
        assert_eq!(r.distortion, 0.2);
        assert!((observed_distortion(&t, &data, &r) - 0.2).abs() < 1e-15);
        let iso = GradientPerturbation::isotropic(4, 0.3).unwrap();
        assert_eq!(protected_gradient(&t, &data, &iso).unwrap(), protected_gradient(&t, &data, &iso).unwrap());
        assert!(protected_gradient(&t, &[vec![1.5]], &p).is_err());
    }

    #[test]
    fn clean_translation_recovers_data() {
        let t = ReconstructionTask::translation(vec![0.4, 0.6], DataDomain::unit(2)).unwrap();
        let data = vec![vec![0.2, 0.9], vec![0.75, 0.1]];
        let r = protected_gradient(&t, &data, &GradientPerturbation::none()).unwrap();
        let trace = run_inversion(&t, &r, &Optimizer::default(), 400, 3).unwrap();
        for (x, o) in trace.last().unwrap().iter().zip(&data) {
            assert!(distance(x, o) < 1e-8);
        }
        assert!(trace.invertible());
        assert_eq!(trace.iterates.len(), 400);
        assert!(trace.gradient_gaps.iter().all(|g| *g >= 0.0));
    }

    #[test]
    fn distorted_translation_terminal_distance() {
        let t = translation();
        let data = vec![vec![0.7]];
        let p = GradientPerturbation::fixed(vec![1.0], 0.2).unwrap();
        let r = protected_gradient(&t, &data, &p).unwrap();
        let trace = run_inversion(&t, &r, &Optimizer::default(), 400, 5).unwrap();
        // optimum θ − (θ − x + δ) = x − δ
        assert!((distance(&trace.last().unwrap()[0], &data[0]) - 0.2).abs() < 1e-6);
    }

    #[test]
    fn regression_one_dimensional_recovery() {
        let t = ReconstructionTask::linear_regression(vec![1.0], vec![-2.0], DataDomain::unit(1)).unwrap();
        let data = vec![vec![0.37]];
        let r = protected_gradient(&t, &data, &GradientPerturbation::none()).unwrap();
        let trace = run_inversion(&t, &r, &Optimizer::default(), 500, 9).unwrap();
        // root of x² + 2x − g = 0
        let g = r.per_sample[0][0];
        let oracle = -1.0 + (1.0 + g).sqrt();
        assert!((trace.last().unwrap()[0][0] - oracle).abs() < 1e-4);
        assert!((oracle - 0.37).abs() < 1e-12);
    }

    #[test]
    fn adam_also_converges() {
        let t = translation();
        let data = vec![vec![0.25]];
        let r = protected_gradient(&t, &data, &GradientPerturbation::none()).unwrap();
        let opt = Optimizer::Adam { lr: 0.01, beta1: 0.9, beta2: 0.999 };
        let trace = run_inversion(&t, &r, &opt, 3000, 1).unwrap();
        assert!(distance(&trace.last().unwrap()[0], &data[0]) < 1e-3);
        assert!(trace.optimizer_id.starts_with("adam"));
    }

    #[test]
    fn divergence_monitor_needs_a_full_streak() {
        let mut mon = DivergenceMonitor::new(1.0);
        for _ in 0..DIVERGENCE_PATIENCE - 1 {
            assert!(!mon.observe(11.0));
        }
        assert!(!mon.observe(9.0));
        for _ in 0..DIVERGENCE_PATIENCE - 1 {
            assert!(!mon.observe(11.0));
        }
        assert!(mon.observe(11.0));
        assert!(DivergenceMonitor::new(1.0).observe(f64::NAN));
        assert!(!DivergenceMonitor::new(0.0).observe(5.0));
    }

    #[test]
    fn traces_are_reproducible() {
        let t = translation();
        let r = protected_gradient(&t, &[vec![0.1]], &GradientPerturbation::none()).unwrap();
        let a = run_inversion(&t, &r, &Optimizer::default(), 50, 11).unwrap();
        let b = run_inversion(&t, &r, &Optimizer::default(), 50, 11).unwrap();
        assert_eq!(a, b);
        let csv = trace_csv(&a, &[vec![0.1]]);
        assert!(csv.starts_with(TRACE_CSV_HEADER));
        assert_eq!(csv.lines().count(), 51);
        assert!(run_inversion(&t, &r, &Optimizer::default(), 0, 1).is_err());
    }
}
