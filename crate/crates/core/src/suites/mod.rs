//! Config-driven suites: build instances from an [`ExperimentConfig`], run the
//! verifiers, and assemble a [`RunReport`] plus its CSV/JSON tables.
//!
//! Every random stream is derived from the config seed, a fixed label and an
//! instance index, and every parallel map collects in index order, so a config
//! fully determines the verdict payload.

pub mod config;
pub mod report;

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;

pub use config::{ExperimentConfig, SuiteName, TaskSpec, Tolerances};
pub use report::{emit_plot_data, RunReport, SeriesPoint, Skip};

use crate::attack::inversion::trace_csv;
use crate::attack::leakage::{distortion_run, verify_privacy_distortion};
use crate::attack::task::LossFamily;
use crate::error::{Error, Result};
use crate::estimators::{
    assemble_eps_tilde, distribution_recovered, estimate_density, generate_ensemble, induced_kernel, induced_xi,
    log_estimate_tolerance, omega, xi_at_model, SgdConfig,
};
use crate::kernel_file::kernel_to_json;
use crate::mechanism::{DiscreteDistribution, StochasticKernel};
use crate::metrics::{abp_epsilon, ldp_epsilon, mbp_xi_at, mbp_xi_sup, privacy_report, PrivacyReport};
use crate::real::Real;
use crate::robustness::{verify_privacy_robustness, RobustnessRow};
use crate::seed;
use crate::verify::estimation::{verify_c1_error, verify_kappa1_concentration, verify_privacy_estimation_error};
use crate::verify::pac::{verify_pac_robustness, PacMechanism};
use crate::verify::privacy::{digest_of, perturbed_prior, verify_ldp_mbp, verify_mbp_abp};
use crate::verify::BoundCheck;
use config::{distribution_or_uniform, KernelSampling};

/// Report plus the tables written next to it, keyed by file name.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub report: RunReport,
    pub files: BTreeMap<String, String>,
}

impl RunOutput {
    /// Writes `report.json`, `verdicts.jsonl`, `summary.csv` and every table.
    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), self.report.to_json())?;
        std::fs::write(dir.join("verdicts.jsonl"), self.report.verdicts_jsonl())?;
        std::fs::write(dir.join("summary.csv"), self.report.summary_csv())?;
        for (name, body) in &self.files {
            std::fs::write(dir.join(name), body)?;
        }
        Ok(())
    }
}

#[derive(Default)]
struct Collector {
    checks: Vec<BoundCheck>,
    series: Vec<SeriesPoint>,
    rates: BTreeMap<String, Real>,
    files: BTreeMap<String, String>,
}

impl Collector {
    fn point(&mut self, series: impl Into<String>, x: f64, y: f64) {
        self.series.push(SeriesPoint { series: series.into(), x, y });
    }

    fn rate(&mut self, key: impl Into<String>, v: f64) {
        self.rates.insert(key.into(), Real(v));
    }
}

fn at_field(field: String) -> impl FnOnce(Error) -> Error {
    move |e| match e {
        Error::Config { .. } => e,
        other => Error::Config { field, message: other.to_string() },
    }
}

fn renamed(mut c: BoundCheck, name: String) -> BoundCheck {
    c.name = name;
    c
}

/// Runs the suite named in the config.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let start = Instant::now();
    let mut col = Collector::default();
    let all = cfg.suite == SuiteName::Acceptance;
    let pick = |s: SuiteName, present: bool| present && (all || cfg.suite == s);
    if pick(SuiteName::Mech, cfg.mech.is_some()) {
        run_mech(cfg, &mut col)?;
    }
    if pick(SuiteName::Metrics, cfg.metrics.is_some()) {
        run_metrics(cfg, &mut col)?;
    }
    if pick(SuiteName::Verify, cfg.verify.is_some()) {
        run_verify(cfg, &mut col)?;
    }
    if pick(SuiteName::Attack, cfg.attack.is_some()) {
        run_attack(cfg, &mut col)?;
    }
    if pick(SuiteName::Robust, cfg.robust.is_some()) {
        run_robust(cfg, &mut col)?;
    }
    if pick(SuiteName::Estimate, cfg.estimate.is_some()) {
        run_estimate(cfg, &mut col)?;
    }
    let checks = col.checks;
    let report = RunReport {
        suite: cfg.suite,
        seed: cfg.seed,
        config_digest: cfg.digest(),
        version: crate::VERSION.to_string(),
        passed: !checks.iter().any(BoundCheck::failed),
        summaries: report::summarize(&checks),
        rates: col.rates,
        skipped: report::skips(&checks),
        checks,
        series: col.series,
        tables: col.files.keys().cloned().collect(),
        wall_time_s: start.elapsed().as_secs_f64(),
        environment: report::Environment::current(),
    };
    Ok(RunOutput { report, files: col.files })
}

fn run_mech(cfg: &ExperimentConfig, col: &mut Collector) -> Result<()> {
    let params = cfg.mech.as_ref().expect("checked by caller");
    let mut table = String::from("index,inputs,outputs,eps_ldp,xi_sup,digest\n");
    for (i, spec) in params.kernels.iter().enumerate() {
        let k = spec.build(cfg.seed).map_err(at_field(format!("mech.kernels[{i}]")))?;
        table.push_str(&format!(
            "{i},{},{},{},{},{}\n",
            k.n_inputs(),
            k.n_outputs(),
            ldp_epsilon(&k),
            mbp_xi_sup(&k),
            k.digest()
        ));
        col.files.insert(format!("kernel_{i}.json"), kernel_to_json(&k));
        let prior = DiscreteDistribution::uniform(k.n_inputs())?;
        for c in verify_ldp_mbp(&k, &[prior])? {
            let name = format!("mech.{}", c.name);
            col.checks.push(renamed(c.with_tol(cfg.tolerances.ldp_mbp), name));
        }
    }
    col.files.insert("mechanisms.csv".into(), table);
    Ok(())
}

fn run_metrics(cfg: &ExperimentConfig, col: &mut Collector) -> Result<()> {
    let params = cfg.metrics.as_ref().expect("checked by caller");
    let mut reports: Vec<PrivacyReport> = Vec::new();
    for (i, inst) in params.instances.iter().enumerate() {
        let f = format!("metrics.instances[{i}]");
        let k = inst.kernel.build(cfg.seed).map_err(at_field(format!("{f}.kernel")))?;
        let n = k.n_inputs();
        let truth = distribution_or_uniform(&inst.true_prior, n, &format!("{f}.true_prior"))?;
        let attacker = match &inst.attacker_prior {
            Some(_) => distribution_or_uniform(&inst.attacker_prior, n, &format!("{f}.attacker_prior"))?,
            None => truth.clone(),
        };
        let unprotected = match &inst.unprotected {
            Some(_) => Some(distribution_or_uniform(&inst.unprotected, n, &format!("{f}.unprotected"))?),
            None => None,
        };
        let rep = privacy_report(&k, &truth, &attacker, unprotected.as_ref()).map_err(at_field(f.clone()))?;
        reports.push(rep);
        let abp = verify_mbp_abp(&k, &truth, &attacker).map_err(at_field(f.clone()))?;
        col.checks.push(renamed(abp.with_tol(cfg.tolerances.mbp_abp), "metrics.mbp_abp".into()));
        for c in verify_ldp_mbp(&k, &[truth])? {
            let name = format!("metrics.{}", c.name);
            col.checks.push(renamed(c.with_tol(cfg.tolerances.ldp_mbp), name));
        }
    }
    let mut csv = String::from(PrivacyReport::CSV_HEADER);
    csv.push('\n');
    for r in &reports {
        csv.push_str(&r.csv_row());
        csv.push('\n');
    }
    col.files.insert("privacy_reports.csv".into(), csv);
    col.files.insert("privacy_reports.json".into(), serde_json::to_string_pretty(&reports).expect("reports serialize"));
    Ok(())
}

/// Kernel `i` of a sampled family; the same `(seed, i)` gives the same kernel in every sub-suite.
fn sampled_kernel(master: u64, s: &KernelSampling, i: usize) -> Result<StochasticKernel<f64>> {
    let mut rng = seed::derived_rng(master, "kernel-size", i as u64);
    let n_in = rng.random_range(s.min_size..=s.max_size);
    let n_out = rng.random_range(s.min_size..=s.max_size);
    StochasticKernel::random(seed::derive(master, "kernel", i as u64), n_in, n_out, s.min_entry)
}

fn run_verify(cfg: &ExperimentConfig, col: &mut Collector) -> Result<()> {
    let v = cfg.verify.as_ref().expect("checked by caller");
    let tol = &cfg.tolerances;
    let seed = cfg.seed;

    if let Some(p) = &v.ldp_mbp {
        let groups = (0..p.kernels.count)
            .into_par_iter()
            .map(|i| {
                let k = sampled_kernel(seed, &p.kernels, i)?;
                let mut rng = seed::derived_rng(seed, "ldp-prior", i as u64);
                let priors = (0..p.priors)
                    .map(|_| DiscreteDistribution::random_positive(&mut rng, k.n_inputs()))
                    .collect::<Result<Vec<_>>>()?;
                verify_ldp_mbp(&k, &priors)
            })
            .collect::<Result<Vec<_>>>()?;
        col.checks.extend(groups.into_iter().flatten().map(|c| c.with_tol(tol.ldp_mbp)));
    }

    if let Some(s) = &v.total_probability {
        let checks = (0..s.count)
            .into_par_iter()
            .map(|i| {
                let k = sampled_kernel(seed, s, i)?;
                let prior = DiscreteDistribution::random_positive(&mut seed::derived_rng(seed, "tp-prior", i as u64), k.n_inputs())?;
                let abp = abp_epsilon(&k, &prior, &prior)?;
                Ok(BoundCheck::new("total_probability", abp, 0.0, tol.total_probability, format!("{}:{}", k.digest(), prior.digest())))
            })
            .collect::<Result<Vec<_>>>()?;
        col.checks.extend(checks);
    }

    if let Some(p) = &v.mbp_abp {
        let m = p.prior_eps.len();
        let groups = (0..p.kernels.count)
            .into_par_iter()
            .map(|i| {
                let k = sampled_kernel(seed, &p.kernels, i)?;
                let prior = DiscreteDistribution::random_positive(&mut seed::derived_rng(seed, "abp-prior", i as u64), k.n_inputs())?;
                p.prior_eps
                    .iter()
                    .enumerate()
                    .map(|(j, &eps)| {
                        let mut rng = seed::derived_rng(seed, "abp-attacker", (i * m + j) as u64);
                        let attacker = perturbed_prior(&mut rng, &prior, eps)?;
                        Ok(verify_mbp_abp(&k, &prior, &attacker)?.with_extra("target_eps", eps))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        col.checks.extend(groups.into_iter().flatten().map(|c| c.with_tol(tol.mbp_abp)));
    }

    if let Some(p) = &v.pac {
        let checks = (0..p.instances)
            .into_par_iter()
            .map(|i| {
                let mut rng = seed::derived_rng(seed, "pac", i as u64);
                let n_in = rng.random_range(2..=p.max_inputs);
                let n_out = rng.random_range(2..=p.max_outputs);
                let dim = rng.random_range(1..=p.max_dim);
                let pm = PacMechanism::random(&mut rng, n_in, n_out, dim, p.xi_max)?;
                Ok(verify_pac_robustness(&pm).with_tol(tol.pac))
            })
            .collect::<Result<Vec<_>>>()?;
        col.checks.extend(checks);
    }

    if let Some(p) = &v.kappa1 {
        let trials = cfg.trials.unwrap_or(p.trials);
        let cells: Vec<(f64, u64, f64)> = p
            .kappa1
            .iter()
            .flat_map(|&k| p.t.iter().flat_map(move |&t| p.eps.iter().map(move |&e| (k, t, e))))
            .collect();
        let checks = cells
            .par_iter()
            .enumerate()
            .map(|(idx, &(k, t, e))| verify_kappa1_concentration(k, t, e, trials, seed::derive(seed, "kappa1", idx as u64)))
            .collect::<Result<Vec<_>>>()?;
        col.checks.extend(checks);
    }

    if let Some(p) = &v.c1 {
        let instances: Vec<(DiscreteDistribution<f64>, DiscreteDistribution<f64>, f64)> = (0..p.pairs)
            .map(|i| {
                let mut rng = seed::derived_rng(seed, "c1", i as u64);
                let n = rng.random_range(2..=p.max_support);
                let k1 = DiscreteDistribution::random_positive(&mut rng, n)?;
                let k2 = DiscreteDistribution::random_positive(&mut rng, n)?;
                Ok(p.eps.iter().map(move |&e| (k1.clone(), k2.clone(), e)).collect::<Vec<_>>())
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .collect();
        let c1_checks = instances
            .par_iter()
            .map(|(a, b, e)| verify_c1_error(a, b, *e).map(|c| c.with_tol(tol.c1)))
            .collect::<Result<Vec<_>>>()?;
        col.checks.extend(c1_checks);
        let parts = instances.par_chunks(64).map(verify_privacy_estimation_error).collect::<Result<Vec<_>>>()?;
        let mut passed = 0;
        for part in parts {
            passed += part.three_halves_pass;
            col.checks.extend(part.checks.into_iter().map(|c| c.with_tol(tol.c1)));
        }
        col.rate("c1.three_halves_rate", passed as f64 / instances.len() as f64);
    }
    Ok(())
}

fn run_attack(cfg: &ExperimentConfig, col: &mut Collector) -> Result<()> {
    let params = cfg.attack.as_ref().expect("checked by caller");
    for (ei, exp) in params.experiments.iter().enumerate() {
        let field = format!("attack.experiments[{ei}]");
        let task = exp.task.build().map_err(at_field(format!("{field}.task")))?;
        let master = seed::derive(cfg.seed, "attack", ei as u64);
        let outcome = verify_privacy_distortion(&task, &exp.grid, master).map_err(at_field(field))?;
        let rate = outcome.pass_rate();
        let asserted = outcome.checks.iter().filter(|c| c.asserted).count();
        let aggregate_name = format!("privacy_distortion.pass_rate:{}", exp.label);

        let mut table = String::from("delta,rounds,seed_index,eps_p,rhs,rhs_c0,asserted,holds\n");
        for (pt, c) in outcome.points.iter().zip(&outcome.checks) {
            table.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                pt.delta, pt.rounds, pt.seed_index, pt.eps_p, pt.rhs, pt.rhs_c0, pt.asserted, c.holds
            ));
            let tag = format!("{}:{{}}[I={}]", exp.label, pt.rounds);
            col.point(tag.replace("{}", "eps_p"), pt.delta, pt.eps_p);
            col.point(tag.replace("{}", "rhs"), pt.delta, pt.rhs);
            col.point(tag.replace("{}", "rhs_c0"), pt.delta, pt.rhs_c0);
        }
        col.files.insert(format!("distortion_{}.csv", exp.label), table);

        for (idx, _) in &outcome.violations {
            let pt = &outcome.points[*idx];
            let run = distortion_run(&task, pt.delta, &exp.grid, pt.rounds, seed::derive(master, "distortion", *idx as u64))?;
            col.files.insert(format!("trace_{}_{idx}.csv", exp.label), trace_csv(&run.trace, &run.data));
        }

        for mut c in outcome.checks {
            c.name = format!("privacy_distortion:{}", exp.label);
            if c.asserted {
                c = c.reported_only(format!("aggregated into {aggregate_name}"));
            }
            col.checks.push(c);
        }
        let mut agg = BoundCheck::new(aggregate_name, exp.min_pass_rate, rate, 1e-12, digest_of(&[ei as f64, exp.min_pass_rate]))
            .with_extra("asserted_configs", asserted as f64)
            .with_extra("violations", outcome.violations.len() as f64)
            .with_extra("c_a", outcome.constants.c_a)
            .with_extra("c_b", outcome.constants.c_b);
        if asserted == 0 {
            agg = agg.reported_only("no configuration met the precondition");
        }
        col.checks.push(agg);
        col.rate(format!("attack.{}.pass_rate", exp.label), rate);
    }
    Ok(())
}

fn run_robust(cfg: &ExperimentConfig, col: &mut Collector) -> Result<()> {
    let params = cfg.robust.as_ref().expect("checked by caller");
    for (ei, exp) in params.experiments.iter().enumerate() {
        let field = format!("robust.experiments[{ei}]");
        let task = exp.task.build().map_err(at_field(format!("{field}.task")))?;
        let outcome = verify_privacy_robustness(&task, &exp.grid, seed::derive(cfg.seed, "robust", ei as u64)).map_err(at_field(field))?;
        let mut table = String::from(RobustnessRow::CSV_HEADER);
        table.push('\n');
        for (row, c) in outcome.rows.iter().zip(outcome.checks) {
            let mut c = if outcome.constants.estimated { c } else { c.with_tol(cfg.tolerances.robustness) };
            c.name = format!("privacy_robustness:{}", exp.label);
            if !exp.asserted {
                c = c.reported_only("probe outside the asserted grid");
            }
            let row = RobustnessRow { slack: c.slack, holds: c.holds, ..row.clone() };
            table.push_str(&row.csv_row());
            table.push('\n');
            col.point(format!("{}:measured", exp.label), row.r, row.measured);
            col.point(format!("{}:alpha", exp.label), row.r, row.predicted_alpha);
            col.checks.push(c);
        }
        col.files.insert(format!("robustness_{}.csv", exp.label), table);
        col.rate(format!("robust.{}.lipschitz", exp.label), outcome.lipschitz);
    }
    Ok(())
}

fn run_estimate(cfg: &ExperimentConfig, col: &mut Collector) -> Result<()> {
    let p = cfg.estimate.as_ref().expect("checked by caller");
    let tol = &cfg.tolerances;
    let task = p.task.build().map_err(at_field("estimate.task".into()))?;
    let dataset = p.dataset(&task);
    if dataset.is_empty() || dataset.iter().any(|x| x.len() != task.dim() || !task.domain.contains(x)) {
        return Err(Error::Config { field: "estimate.dataset".into(), message: "points must lie in the task domain".into() });
    }
    let n = dataset.len();
    let sgd = SgdConfig {
        steps: p.sgd.steps,
        step_size: p.sgd.step_size,
        batch_size: p.sgd.batch_size,
        seed: seed::derive(cfg.seed, "sgd", 0),
    };
    let ensemble = generate_ensemble(&task, &dataset, p.models, &sgd).map_err(at_field("estimate.sgd".into()))?;
    let mut recovery = p.recovery.clone();
    if let Some(t) = cfg.trials {
        recovery.trials = t as usize;
    }
    let density = estimate_density(&task, &dataset, &ensemble, &recovery, seed::derive(cfg.seed, "estimate", 0))
        .map_err(at_field("estimate.recovery".into()))?;
    let prior = distribution_or_uniform(&p.prior, n, "estimate.prior")?;
    let attacker = distribution_or_uniform(&p.attacker_prior, n, "estimate.attacker_prior")?;
    let w_star = p.true_model.unwrap_or_else(|| ensemble.true_model());
    if w_star >= p.models {
        return Err(Error::Config { field: "estimate.true_model".into(), message: format!("no ensemble member {w_star}") });
    }
    let est = xi_at_model(&density, w_star, prior.mass())?;
    let batch = &density.batches[w_star];
    let s = density.batch_size;

    // Δ = 0 translation: the inversion optimum is the data point, so every trial recovers every sample.
    let closed_form = task.family == LossFamily::Translation && recovery.distortion == 0.0;
    let prior_batch: Vec<f64> = batch.iter().map(|&d| prior.get(d)).collect();
    let (closed, rhs) = if closed_form {
        (induced_xi(&vec![1.0; s], s, &prior_batch), log_estimate_tolerance(1.0, recovery.trials))
    } else {
        (f64::NAN, f64::NAN)
    };
    let rho_hat = batch.iter().map(|&d| density.per_model[w_star][d]).fold(f64::INFINITY, f64::min) * s as f64;
    let mut check = BoundCheck::new(
        "estimator.pipeline_consistency",
        (est.xi_hat - closed).abs(),
        rhs,
        tol.pipeline,
        format!("{}:{}", ensemble.dataset_digest, digest_of(&[recovery.trials as f64, s as f64, w_star as f64])),
    )
    .with_extra("xi_hat", est.xi_hat)
    .with_extra("xi_closed_form", closed)
    .with_extra("rho_hat", rho_hat)
    .with_extra("mc_tolerance_at_rho_hat", log_estimate_tolerance(rho_hat, recovery.trials))
    .with_extra("floored", est.floored.len() as f64);
    if s == 1 && closed_form {
        let k = induced_kernel(&vec![1.0; n])?;
        check = check.with_extra("xi_induced_kernel", mbp_xi_at(&k, &prior, batch[0])?);
    }
    if !closed_form {
        check = check.reported_only("no closed form for this configuration");
    }
    col.checks.push(check);

    for (m, row) in density.per_model.iter().enumerate() {
        let total: f64 = row.iter().sum();
        col.checks.push(
            BoundCheck::new("estimator.counting", total, 1.0, tol.counting, digest_of(&[m as f64]))
                .with_extra("model", m as f64)
                .with_extra("diverged_trials", density.diverged_trials[m] as f64),
        );
    }

    let omega_v = omega(&density.f_o_hat, prior.mass())?;
    let assembly = assemble_eps_tilde(&density.f_o_hat, attacker.mass(), est.c2_hat, p.tv)?;
    for (d, f) in density.per_model[w_star].iter().enumerate() {
        col.point("f_hat_true_model", d as f64, *f);
    }
    for (d, f) in density.f_o_hat.iter().enumerate() {
        col.point("f_o_hat", d as f64, *f);
    }
    col.rate("estimate.xi_hat", est.xi_hat);
    col.rate("estimate.eps_tilde_hat", assembly.eps_tilde_hat);
    col.rate("estimate.omega", omega_v);

    col.files.insert("density.csv".into(), density.csv());
    col.files.insert("ensemble.json".into(), serde_json::to_string_pretty(&ensemble).expect("ensemble serializes"));
    col.files.insert(
        "mbp_estimate.json".into(),
        serde_json::to_string_pretty(&serde_json::json!({
            "true_model": w_star,
            "batch": batch,
            "floor": density.floor(),
            "estimate": est,
            "xi_closed_form": Real(closed),
        }))
        .expect("estimate serializes"),
    );
    col.files.insert(
        "eps_tilde.json".into(),
        serde_json::to_string_pretty(&serde_json::json!({
            "assembly": assembly,
            "omega": omega_v,
            "omega_threshold": p.omega_threshold,
            "distribution_recovered": distribution_recovered(omega_v, p.omega_threshold),
        }))
        .expect("assembly serializes"),
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_verify(seed: u64) -> ExperimentConfig {
        ExperimentConfig::from_json(&format!(
            r#"{{
              "suite": "verify", "seed": {seed},
              "verify": {{
                "ldp_mbp": {{"kernels": {{"count": 5}}, "priors": 3}},
                "total_probability": {{"count": 5}},
                "mbp_abp": {{"kernels": {{"count": 5}}, "prior_eps": [0.0, 0.5]}},
                "pac": {{"instances": 5}},
                "kappa1": {{"kappa1": [0.5], "t": [100], "eps": [0.2], "trials": 10000}},
                "c1": {{"pairs": 4, "eps": [0.1]}}
              }}
            }}"#
        ))
        .unwrap()
    }

    #[test]
    fn verify_suite_counts_and_determinism() {
        let a = run(&small_verify(3)).unwrap();
        let r = &a.report;
        assert!(r.passed, "{:?}", r.failed_checks().collect::<Vec<_>>());
        let count = |n: &str| r.checks.iter().filter(|c| c.name == n).count();
        assert_eq!(count("ldp_mbp.mbp_le_ldp"), 15);
        assert_eq!(count("ldp_mbp.ldp_le_2sup"), 5);
        assert_eq!(count("total_probability"), 5);
        assert_eq!(count("mbp_abp"), 10);
        assert_eq!(count("pac_robustness"), 5);
        assert_eq!(count("c1_error"), 4);
        assert_eq!(count("privacy_estimation_error"), 4);
        assert!(r.rates.contains_key("c1.three_halves_rate"));
        let b = run(&small_verify(3)).unwrap();
        assert_eq!(a.report.verdict_payload(), b.report.verdict_payload());
        assert_ne!(a.report.verdict_payload(), run(&small_verify(4)).unwrap().report.verdict_payload());
    }

    #[test]
    fn sampled_kernels_shared_across_subsuites() {
        let s = KernelSampling { count: 3, min_size: 2, max_size: 8, min_entry: 1e-3 };
        let r = run(&small_verify(9)).unwrap().report;
        let tp: Vec<&str> = r.checks.iter().filter(|c| c.name == "total_probability").map(|c| c.instance_digest.split(':').next().unwrap()).collect();
        for i in 0..3 {
            assert_eq!(sampled_kernel(9, &s, i).unwrap().digest(), tp[i]);
        }
    }

    #[test]
    fn mech_and_metrics_suites() {
        let mut cfg = ExperimentConfig::acceptance(1);
        cfg.suite = SuiteName::Mech;
        let out = run(&cfg).unwrap();
        assert!(out.report.passed);
        assert!(out.files.contains_key("kernel_0.json") && out.files.contains_key("mechanisms.csv"));
        cfg.suite = SuiteName::Metrics;
        let out = run(&cfg).unwrap();
        assert!(out.report.passed);
        let csv = &out.files["privacy_reports.csv"];
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.starts_with(PrivacyReport::CSV_HEADER));
    }

    #[test]
    fn attack_suite_aggregates_pass_rate() {
        let cfg = ExperimentConfig::from_json(
            r#"{"suite": "attack", "seed": 2, "attack": {"experiments": [
                {"label": "t", "task": {"family": "translation"},
                 "grid": {"deltas": [0.4, 0.8], "rounds": [100], "seeds": 3}}]}}"#,
        )
        .unwrap();
        let out = run(&cfg).unwrap();
        let r = &out.report;
        let agg = r.checks.iter().find(|c| c.name == "privacy_distortion.pass_rate:t").unwrap();
        assert!(agg.asserted && agg.holds && r.passed);
        assert_eq!(r.checks.iter().filter(|c| c.name == "privacy_distortion:t").count(), 6);
        assert!(r.checks.iter().filter(|c| c.name == "privacy_distortion:t").all(|c| !c.asserted));
        assert_eq!(out.files["distortion_t.csv"].lines().count(), 7);
        assert_eq!(r.skipped.len(), 6);
    }

    #[test]
    fn estimate_suite_consistency() {
        let mut cfg = ExperimentConfig::acceptance(5);
        cfg.suite = SuiteName::Estimate;
        cfg.trials = Some(50);
        let out = run(&cfg).unwrap();
        let r = &out.report;
        assert!(r.passed, "{:?}", r.failed_checks().collect::<Vec<_>>());
        let c = r.checks.iter().find(|c| c.name == "estimator.pipeline_consistency").unwrap();
        assert!(c.asserted && (c.extra("xi_hat").unwrap() - 8f64.ln()).abs() < 1e-12);
        assert!((c.extra("xi_induced_kernel").unwrap() - 8f64.ln()).abs() < 1e-12);
        for f in ["density.csv", "ensemble.json", "mbp_estimate.json", "eps_tilde.json"] {
            assert!(out.files.contains_key(f), "{f}");
        }
    }

    #[test]
    fn estimate_with_distortion_is_reported_only() {
        let mut cfg = ExperimentConfig::acceptance(5);
        cfg.suite = SuiteName::Estimate;
        cfg.trials = Some(20);
        cfg.estimate.as_mut().unwrap().recovery.distortion = 0.05;
        let r = run(&cfg).unwrap().report;
        let c = r.checks.iter().find(|c| c.name == "estimator.pipeline_consistency").unwrap();
        assert!(!c.asserted && r.skipped.iter().any(|s| s.name == c.name));
    }

    #[test]
    fn write_produces_standard_files() {
        let dir = tempfile::tempdir().unwrap();
        let out = run(&small_verify(1)).unwrap();
        out.write(dir.path()).unwrap();
        let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        assert!(summary.starts_with("suite,instances,pass,worst_slack\n"));
        let lines = std::fs::read_to_string(dir.path().join("verdicts.jsonl")).unwrap();
        assert_eq!(lines.lines().count(), out.report.checks.len());
        let back = RunReport::load(&dir.path().join("report.json")).unwrap();
        assert_eq!(back.verdict_payload(), out.report.verdict_payload());
    }
}
