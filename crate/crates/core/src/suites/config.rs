//! Experiment configuration: one JSON schema for every suite, selected by `suite`.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::attack::leakage::DistortionConfig;
use crate::attack::task::{DataDomain, LossFamily, ReconstructionTask};
use crate::error::{Error, Result};
use crate::estimators::RecoveryConfig;
use crate::kernel_file::load_kernel;
use crate::mechanism::{DiscreteDistribution, StochasticKernel};
use crate::robustness::{ProbeBudget, RobustnessConfig};
use crate::seed;
use crate::verify::{estimation, pac, privacy};

fn config_err<T>(field: &str, message: impl Into<String>) -> Result<T> {
    Err(Error::Config { field: field.to_string(), message: message.into() })
}

fn require(ok: bool, field: &str, message: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        config_err(field, message)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SuiteName {
    Mech,
    Metrics,
    Verify,
    Attack,
    Robust,
    Estimate,
    /// Every section present in the config, in the order above.
    Acceptance,
}

impl SuiteName {
    pub fn as_str(self) -> &'static str {
        match self {
            SuiteName::Mech => "mech",
            SuiteName::Metrics => "metrics",
            SuiteName::Verify => "verify",
            SuiteName::Attack => "attack",
            SuiteName::Robust => "robust",
            SuiteName::Estimate => "estimate",
            SuiteName::Acceptance => "acceptance",
        }
    }
}

impl FromStr for SuiteName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::Config { field: "suite".into(), message: format!("unknown suite {s:?}") })
    }
}

/// Tolerances applied to exactly computed checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub ldp_mbp: f64,
    pub total_probability: f64,
    pub mbp_abp: f64,
    pub pac: f64,
    pub c1: f64,
    /// Robustness checks whose task constants are exact.
    pub robustness: f64,
    /// Additive slack on the estimator consistency check.
    pub pipeline: f64,
    pub counting: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            ldp_mbp: privacy::LDP_MBP_TOL,
            total_probability: 1e-12,
            mbp_abp: privacy::MBP_ABP_TOL,
            pac: pac::PAC_TOL,
            c1: estimation::C1_TOL,
            robustness: 1e-6,
            pipeline: 1e-9,
            counting: 1e-12,
        }
    }
}

impl Tolerances {
    fn validate(&self) -> Result<()> {
        let all = [
            ("ldp_mbp", self.ldp_mbp),
            ("total_probability", self.total_probability),
            ("mbp_abp", self.mbp_abp),
            ("pac", self.pac),
            ("c1", self.c1),
            ("robustness", self.robustness),
            ("pipeline", self.pipeline),
            ("counting", self.counting),
        ];
        for (name, v) in all {
            require(v > 0.0 && v.is_finite(), &format!("tolerances.{name}"), "tolerance must be finite and > 0")?;
        }
        Ok(())
    }
}

/// How a finite kernel is obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum KernelSpec {
    RandomizedResponse { k: usize, flip: f64 },
    Identity { n: usize },
    Constant { inputs: usize, outputs: usize, target: usize },
    /// Seeded from the master seed and `index`.
    Random { inputs: usize, outputs: usize, min_prob: f64, #[serde(default)] index: u64 },
    Inline { rows: Vec<Vec<f64>> },
    /// Kernel JSON file; relative paths resolve against the config's directory.
    File { path: PathBuf },
}

impl KernelSpec {
    pub fn build(&self, master_seed: u64) -> Result<StochasticKernel<f64>> {
        match self {
            KernelSpec::RandomizedResponse { k, flip } => StochasticKernel::randomized_response(*k, *flip),
            KernelSpec::Identity { n } => StochasticKernel::identity(*n),
            KernelSpec::Constant { inputs, outputs, target } => StochasticKernel::constant(*inputs, *outputs, *target),
            KernelSpec::Random { inputs, outputs, min_prob, index } => {
                StochasticKernel::random(seed::derive(master_seed, "config-kernel", *index), *inputs, *outputs, *min_prob)
            }
            KernelSpec::Inline { rows } => StochasticKernel::new(rows.clone()),
            KernelSpec::File { path } => load_kernel(path),
        }
    }
}

/// Random kernel family: sizes uniform in `[min_size, max_size]`, entries `≥ min_entry`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSampling {
    pub count: usize,
    #[serde(default = "two")]
    pub min_size: usize,
    #[serde(default = "eight")]
    pub max_size: usize,
    #[serde(default = "min_entry")]
    pub min_entry: f64,
}

fn two() -> usize {
    2
}

fn three() -> usize {
    3
}

fn eight() -> usize {
    8
}

fn twelve() -> usize {
    12
}

fn one() -> usize {
    1
}

fn min_entry() -> f64 {
    1e-3
}

fn unit_f64() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

fn pass_rate() -> f64 {
    0.95
}

fn omega_threshold() -> f64 {
    0.1
}

impl KernelSampling {
    fn validate(&self, field: &str) -> Result<()> {
        require(self.count > 0, &format!("{field}.count"), "must be >= 1")?;
        require(self.min_size >= 2, &format!("{field}.min_size"), "must be >= 2")?;
        require(self.max_size >= self.min_size, &format!("{field}.max_size"), "must be >= min_size")?;
        require(
            self.min_entry > 0.0 && self.min_entry * self.max_size as f64 <= 1.0,
            &format!("{field}.min_entry"),
            "must be > 0 and at most 1 / max_size",
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechParams {
    pub kernels: Vec<KernelSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsInstance {
    pub kernel: KernelSpec,
    /// Uniform when absent.
    #[serde(default)]
    pub true_prior: Option<Vec<f64>>,
    /// The true prior when absent.
    #[serde(default)]
    pub attacker_prior: Option<Vec<f64>>,
    /// Unprotected belief `F^O`; the true prior when absent.
    #[serde(default)]
    pub unprotected: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsParams {
    pub instances: Vec<MetricsInstance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LdpMbpParams {
    pub kernels: KernelSampling,
    /// Random strictly positive priors per kernel.
    pub priors: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MbpAbpParams {
    pub kernels: KernelSampling,
    /// Attacker priors lie within `e^{±ε}` of the true prior for each listed `ε`.
    pub prior_eps: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacParams {
    pub instances: usize,
    #[serde(default = "eight")]
    pub max_inputs: usize,
    #[serde(default = "eight")]
    pub max_outputs: usize,
    #[serde(default = "three")]
    pub max_dim: usize,
    #[serde(default = "unit_f64")]
    pub xi_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Kappa1Params {
    pub kappa1: Vec<f64>,
    pub t: Vec<u64>,
    pub eps: Vec<f64>,
    /// Monte Carlo repetitions per cell; overridden by `trials`.
    pub trials: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct C1Params {
    pub pairs: usize,
    #[serde(default = "twelve")]
    pub max_support: usize,
    pub eps: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ldp_mbp: Option<LdpMbpParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_probability: Option<KernelSampling>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mbp_abp: Option<MbpAbpParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pac: Option<PacParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa1: Option<Kappa1Params>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c1: Option<C1Params>,
}

/// Analytic reconstruction task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub family: LossFamily,
    #[serde(default = "one")]
    pub dim: usize,
    /// `0.5` per coordinate for translation, `1` for regression.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
    /// Regression labels; `[-2]` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<f64>>,
    /// Box bounds; the unit cube when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<Vec<f64>>,
    /// `D`; the domain diagonal when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diameter: Option<f64>,
}

impl TaskSpec {
    pub fn translation() -> Self {
        Self { family: LossFamily::Translation, dim: 1, theta: None, labels: None, lower: None, upper: None, diameter: None }
    }

    pub fn linear_regression() -> Self {
        Self { family: LossFamily::LinearRegression, ..Self::translation() }
    }

    pub fn build(&self) -> Result<ReconstructionTask> {
        let domain = DataDomain::new(
            self.lower.clone().unwrap_or_else(|| vec![0.0; self.dim]),
            self.upper.clone().unwrap_or_else(|| vec![1.0; self.dim]),
        )?;
        let task = match self.family {
            LossFamily::Translation => {
                ReconstructionTask::translation(self.theta.clone().unwrap_or_else(|| vec![0.5; self.dim]), domain)?
            }
            LossFamily::LinearRegression => ReconstructionTask::linear_regression(
                self.theta.clone().unwrap_or_else(|| vec![1.0; self.dim]),
                self.labels.clone().unwrap_or_else(|| vec![-2.0]),
                domain,
            )?,
        };
        match self.diameter {
            Some(d) => task.with_diameter(d),
            None => Ok(task),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackExperiment {
    pub label: String,
    pub task: TaskSpec,
    pub grid: DistortionConfig,
    /// Required share of asserted configurations that satisfy the bound.
    #[serde(default = "pass_rate")]
    pub min_pass_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackParams {
    pub experiments: Vec<AttackExperiment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobustExperiment {
    pub label: String,
    pub task: TaskSpec,
    pub grid: RobustnessConfig,
    /// `false` turns every check of this experiment into a reported probe.
    #[serde(default = "yes")]
    pub asserted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobustParams {
    pub experiments: Vec<RobustExperiment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SgdParams {
    pub steps: usize,
    pub step_size: f64,
    pub batch_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateParams {
    pub task: TaskSpec,
    /// Evenly spaced points on the domain diagonal when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<Vec<Vec<f64>>>,
    #[serde(default = "eight")]
    pub dataset_size: usize,
    pub models: usize,
    pub sgd: SgdParams,
    /// `trials` overrides `recovery.trials`.
    pub recovery: RecoveryConfig,
    /// Data prior `f_D`; uniform when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<Vec<f64>>,
    /// Attacker belief `F^B`; uniform when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attacker_prior: Option<Vec<f64>>,
    /// TV term fed to the `ε̃` assembly.
    #[serde(default)]
    pub tv: f64,
    #[serde(default = "omega_threshold")]
    pub omega_threshold: f64,
    /// Ensemble member used as `w*`; largest training budget when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_model: Option<usize>,
}

impl EstimateParams {
    pub fn dataset(&self, task: &ReconstructionTask) -> Vec<Vec<f64>> {
        if let Some(d) = &self.dataset {
            return d.clone();
        }
        let n = self.dataset_size;
        (0..n)
            .map(|i| {
                let s = (i as f64 + 0.5) / n as f64;
                task.domain.lower.iter().zip(&task.domain.upper).map(|(l, u)| l + s * (u - l)).collect()
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub suite: SuiteName,
    pub seed: u64,
    /// Output directory; not part of the digest.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Overrides the Monte Carlo repetition count of the selected suites.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mech: Option<MechParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricsParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifyParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attack: Option<AttackParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub robust: Option<RobustParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimate: Option<EstimateParams>,
}

/// Best-effort field name from a serde diagnostic.
fn serde_field(msg: &str) -> String {
    msg.split('`').nth(1).map(str::to_string).unwrap_or_else(|| "(document)".into())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| {
            let msg = e.to_string();
            Error::Config { field: serde_field(&msg), message: msg }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses and validates a config file; kernel file paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config { field: "(file)".into(), message: format!("{}: {e}", path.display()) })?;
        let mut cfg = Self::from_json(&text)?;
        if let Some(base) = path.parent() {
            cfg.resolve_paths(base);
        }
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |k: &mut KernelSpec| {
            if let KernelSpec::File { path } = k {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        };
        if let Some(m) = &mut self.mech {
            m.kernels.iter_mut().for_each(fix);
        }
        if let Some(m) = &mut self.metrics {
            m.instances.iter_mut().for_each(|i| fix(&mut i.kernel));
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 over the canonical JSON of every result-affecting field.
    pub fn digest(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        hex::encode(Sha256::digest(serde_json::to_vec(&c).expect("config serializes")))
    }

    pub fn validate(&self) -> Result<()> {
        self.tolerances.validate()?;
        if let Some(t) = self.trials {
            require(t > 0, "trials", "must be >= 1")?;
        }
        let need = |present: bool, name: &str| {
            require(present, name, &format!("suite {:?} needs a {name:?} section", self.suite.as_str()))
        };
        match self.suite {
            SuiteName::Mech => need(self.mech.is_some(), "mech")?,
            SuiteName::Metrics => need(self.metrics.is_some(), "metrics")?,
            SuiteName::Verify => need(self.verify.is_some(), "verify")?,
            SuiteName::Attack => need(self.attack.is_some(), "attack")?,
            SuiteName::Robust => need(self.robust.is_some(), "robust")?,
            SuiteName::Estimate => need(self.estimate.is_some(), "estimate")?,
            SuiteName::Acceptance => require(
                self.mech.is_some()
                    || self.metrics.is_some()
                    || self.verify.is_some()
                    || self.attack.is_some()
                    || self.robust.is_some()
                    || self.estimate.is_some(),
                "suite",
                "acceptance needs at least one suite section",
            )?,
        }
        let runs = |s: SuiteName| self.suite == SuiteName::Acceptance || self.suite == s;
        if let Some(m) = self.mech.as_ref().filter(|_| runs(SuiteName::Mech)) {
            require(!m.kernels.is_empty(), "mech.kernels", "must be nonempty")?;
        }
        if let Some(m) = self.metrics.as_ref().filter(|_| runs(SuiteName::Metrics)) {
            require(!m.instances.is_empty(), "metrics.instances", "must be nonempty")?;
        }
        if let Some(v) = self.verify.as_ref().filter(|_| runs(SuiteName::Verify)) {
            self.validate_verify(v)?;
        }
        if let Some(a) = self.attack.as_ref().filter(|_| runs(SuiteName::Attack)) {
            require(!a.experiments.is_empty(), "attack.experiments", "must be nonempty")?;
            for (i, e) in a.experiments.iter().enumerate() {
                let f = format!("attack.experiments[{i}]");
                require(!e.grid.deltas.is_empty(), &format!("{f}.grid.deltas"), "must be nonempty")?;
                require(e.grid.deltas.iter().all(|d| *d >= 0.0), &format!("{f}.grid.deltas"), "must be >= 0")?;
                require(!e.grid.rounds.is_empty() && e.grid.rounds.iter().all(|r| *r >= 10), &format!("{f}.grid.rounds"), "need rounds >= 10")?;
                require(e.grid.seeds > 0, &format!("{f}.grid.seeds"), "must be >= 1")?;
                require((0.0..=1.0).contains(&e.min_pass_rate), &format!("{f}.min_pass_rate"), "must lie in [0, 1]")?;
            }
        }
        if let Some(r) = self.robust.as_ref().filter(|_| runs(SuiteName::Robust)) {
            require(!r.experiments.is_empty(), "robust.experiments", "must be nonempty")?;
            for (i, e) in r.experiments.iter().enumerate() {
                let f = format!("robust.experiments[{i}]");
                require(!e.grid.radii.is_empty() && e.grid.radii.iter().all(|r| *r >= 0.0), &format!("{f}.grid.radii"), "need radii >= 0")?;
                require(!e.grid.deltas.is_empty(), &format!("{f}.grid.deltas"), "must be nonempty")?;
                require(e.grid.seeds > 0, &format!("{f}.grid.seeds"), "must be >= 1")?;
                require(e.grid.rounds >= 10, &format!("{f}.grid.rounds"), "must be >= 10")?;
                require(e.grid.budget.x_samples >= 1000, &format!("{f}.grid.budget.x_samples"), "must be >= 1000")?;
            }
        }
        if let Some(e) = self.estimate.as_ref().filter(|_| runs(SuiteName::Estimate)) {
            require(e.models > 0, "estimate.models", "must be >= 1")?;
            require(e.sgd.batch_size > 0, "estimate.sgd.batch_size", "must be >= 1")?;
            require(e.sgd.step_size > 0.0, "estimate.sgd.step_size", "must be > 0")?;
            require(e.recovery.trials > 0, "estimate.recovery.trials", "must be >= 1")?;
            require(
                e.recovery.threshold > 0.0 && e.recovery.threshold <= 1.0,
                "estimate.recovery.threshold",
                "must lie in (0, 1]",
            )?;
            require(e.recovery.distortion >= 0.0, "estimate.recovery.distortion", "must be >= 0")?;
            require((0.0..=1.0).contains(&e.tv), "estimate.tv", "must lie in [0, 1]")?;
            require(e.omega_threshold > 0.0, "estimate.omega_threshold", "must be > 0")?;
            if e.dataset.is_none() {
                require(e.dataset_size > 0, "estimate.dataset_size", "must be >= 1")?;
            }
        }
        Ok(())
    }

    fn validate_verify(&self, v: &VerifyParams) -> Result<()> {
        if let Some(p) = &v.ldp_mbp {
            p.kernels.validate("verify.ldp_mbp.kernels")?;
            require(p.priors > 0, "verify.ldp_mbp.priors", "must be >= 1")?;
        }
        if let Some(k) = &v.total_probability {
            k.validate("verify.total_probability")?;
        }
        if let Some(p) = &v.mbp_abp {
            p.kernels.validate("verify.mbp_abp.kernels")?;
            require(!p.prior_eps.is_empty() && p.prior_eps.iter().all(|e| *e >= 0.0), "verify.mbp_abp.prior_eps", "need eps >= 0")?;
        }
        if let Some(p) = &v.pac {
            require(p.instances > 0, "verify.pac.instances", "must be >= 1")?;
            require(p.max_inputs >= 2, "verify.pac.max_inputs", "must be >= 2")?;
            require(p.max_outputs >= 2, "verify.pac.max_outputs", "must be >= 2")?;
            require(p.max_dim >= 1, "verify.pac.max_dim", "must be >= 1")?;
            require(p.xi_max > 0.0, "verify.pac.xi_max", "must be > 0")?;
        }
        if let Some(p) = &v.kappa1 {
            require(!p.kappa1.is_empty() && p.kappa1.iter().all(|k| *k > 0.0 && *k <= 1.0), "verify.kappa1.kappa1", "need values in (0, 1]")?;
            require(!p.t.is_empty() && p.t.iter().all(|t| *t > 0), "verify.kappa1.t", "need T >= 1")?;
            require(!p.eps.is_empty() && p.eps.iter().all(|e| *e > 0.0), "verify.kappa1.eps", "need eps > 0")?;
            require(self.trials.unwrap_or(p.trials) >= 10_000, "verify.kappa1.trials", "must be >= 10000")?;
        }
        if let Some(p) = &v.c1 {
            require(p.pairs > 0, "verify.c1.pairs", "must be >= 1")?;
            require(p.max_support >= 2, "verify.c1.max_support", "must be >= 2")?;
            require(!p.eps.is_empty() && p.eps.iter().all(|e| *e >= 0.0 && *e < 1.0), "verify.c1.eps", "need eps in [0, 1)")?;
        }
        Ok(())
    }

    /// The full acceptance bundle.
    pub fn acceptance(seed: u64) -> Self {
        let kernels = KernelSampling { count: 1000, min_size: 2, max_size: 8, min_entry: 1e-3 };
        let robust_grid = |deltas: Vec<f64>, radii: Vec<f64>| {
            let mut g = RobustnessConfig::new(deltas, radii, 1000, 2);
            g.budget = ProbeBudget { x_samples: 1000, probes: 16, ascent_steps: 20 };
            g
        };
        Self {
            suite: SuiteName::Acceptance,
            seed,
            out: None,
            trials: None,
            tolerances: Tolerances::default(),
            mech: Some(MechParams {
                kernels: vec![
                    KernelSpec::RandomizedResponse { k: 2, flip: 0.25 },
                    KernelSpec::Identity { n: 4 },
                    KernelSpec::Constant { inputs: 3, outputs: 2, target: 0 },
                ],
            }),
            metrics: Some(MetricsParams {
                instances: vec![
                    MetricsInstance {
                        kernel: KernelSpec::RandomizedResponse { k: 2, flip: 0.25 },
                        true_prior: None,
                        attacker_prior: None,
                        unprotected: None,
                    },
                    MetricsInstance {
                        kernel: KernelSpec::RandomizedResponse { k: 2, flip: 0.25 },
                        true_prior: Some(vec![0.5, 0.5]),
                        attacker_prior: Some(vec![0.6, 0.4]),
                        unprotected: None,
                    },
                ],
            }),
            verify: Some(VerifyParams {
                ldp_mbp: Some(LdpMbpParams { kernels: kernels.clone(), priors: 100 }),
                total_probability: Some(kernels.clone()),
                mbp_abp: Some(MbpAbpParams { kernels, prior_eps: vec![0.0, 0.1, 0.5] }),
                pac: Some(PacParams { instances: 500, max_inputs: 8, max_outputs: 8, max_dim: 3, xi_max: 1.0 }),
                kappa1: Some(Kappa1Params {
                    kappa1: vec![0.1, 0.5, 0.9],
                    t: vec![100, 1000],
                    eps: vec![0.1, 0.2],
                    trials: 100_000,
                }),
                c1: Some(C1Params { pairs: 1000, max_support: 12, eps: vec![0.05, 0.1, 0.3] }),
            }),
            attack: Some(AttackParams {
                experiments: vec![AttackExperiment {
                    label: "translation".into(),
                    task: TaskSpec::translation(),
                    grid: DistortionConfig::new(vec![0.1, 0.2, 0.4, 0.8], vec![100, 1000], 20),
                    min_pass_rate: 0.95,
                }],
            }),
            robust: Some(RobustParams {
                experiments: vec![
                    RobustExperiment {
                        label: "translation".into(),
                        task: TaskSpec::translation(),
                        grid: robust_grid(vec![0.2, 0.4, 0.8], vec![0.1, 0.25, 0.5]),
                        asserted: true,
                    },
                    RobustExperiment {
                        label: "regression".into(),
                        task: TaskSpec::linear_regression(),
                        grid: robust_grid(vec![0.8, 1.6], vec![0.05, 0.1]),
                        asserted: true,
                    },
                    RobustExperiment {
                        label: "translation-out-of-regime".into(),
                        task: TaskSpec::translation(),
                        grid: robust_grid(vec![0.1], vec![0.5]),
                        asserted: false,
                    },
                ],
            }),
            estimate: Some(EstimateParams {
                task: TaskSpec::translation(),
                dataset: None,
                dataset_size: 8,
                models: 4,
                sgd: SgdParams { steps: 50, step_size: 0.5, batch_size: 1 },
                recovery: RecoveryConfig {
                    optimizer: Default::default(),
                    rounds: 200,
                    distortion: 0.0,
                    threshold: 0.5,
                    trials: 1000,
                },
                prior: None,
                attacker_prior: None,
                tv: 0.0,
                omega_threshold: 0.1,
                true_model: None,
            }),
        }
    }
}

pub(crate) fn distribution_or_uniform(v: &Option<Vec<f64>>, n: usize, field: &str) -> Result<DiscreteDistribution<f64>> {
    let d = match v {
        Some(m) => DiscreteDistribution::new(m.clone()),
        None => DiscreteDistribution::uniform(n),
    };
    d.map_err(|e| Error::Config { field: field.into(), message: e.to_string() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_seed_names_field() {
        let err = ExperimentConfig::from_json(r#"{"suite": "verify", "verify": {}}"#).unwrap_err();
        assert!(matches!(&err, Error::Config { field, .. } if field == "seed"), "{err}");
    }

    #[test]
    fn unknown_fields_and_suites_rejected() {
        let err = ExperimentConfig::from_json(r#"{"suite": "verify", "seed": 1, "verify": {}, "bogus": 2}"#).unwrap_err();
        assert!(matches!(&err, Error::Config { field, .. } if field == "bogus"), "{err}");
        let err = ExperimentConfig::from_json(r#"{"suite": "nope", "seed": 1}"#).unwrap_err();
        assert!(err.to_string().contains("nope"));
        assert!("attack".parse::<SuiteName>().is_ok() && "x".parse::<SuiteName>().is_err());
    }

    #[test]
    fn semantic_errors_name_field() {
        let err = ExperimentConfig::from_json(r#"{"suite": "verify", "seed": 1, "verify": {}, "tolerances": {"pac": 0}}"#)
            .unwrap_err();
        assert!(matches!(&err, Error::Config { field, .. } if field == "tolerances.pac"), "{err}");
        let err = ExperimentConfig::from_json(r#"{"suite": "attack", "seed": 1}"#).unwrap_err();
        assert!(matches!(&err, Error::Config { field, .. } if field == "attack"), "{err}");
    }

    #[test]
    fn acceptance_round_trips_and_digest_ignores_out() {
        let a = ExperimentConfig::acceptance(7);
        a.validate().unwrap();
        let back = ExperimentConfig::from_json(&a.to_json()).unwrap();
        assert_eq!(back, a);
        let mut b = a.clone();
        b.out = Some("elsewhere".into());
        assert_eq!(a.digest(), b.digest());
        b.seed = 8;
        assert_ne!(a.digest(), b.digest());
    }

    #[test]
    fn kernel_specs_build() {
        let rr = KernelSpec::RandomizedResponse { k: 2, flip: 0.25 }.build(0).unwrap();
        assert_eq!(rr.entry(0, 0), 0.75);
        let spec: KernelSpec = serde_json::from_str(r#"{"kind": "random", "inputs": 3, "outputs": 4, "min_prob": 0.01}"#).unwrap();
        assert_eq!(spec.build(1).unwrap(), spec.build(1).unwrap());
        assert!(serde_json::from_str::<KernelSpec>(r#"{"kind": "identity", "n": 2, "extra": 1}"#).is_err());
    }

    #[test]
    fn default_dataset_is_evenly_spaced() {
        let e = ExperimentConfig::acceptance(0).estimate.unwrap();
        let task = e.task.build().unwrap();
        let d = e.dataset(&task);
        assert_eq!(d.len(), 8);
        assert!((d[0][0] - 0.0625).abs() < 1e-15 && (d[7][0] - 0.9375).abs() < 1e-15);
    }
}
