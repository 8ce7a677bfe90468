use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_privrob");

const VERIFY: &str = r#"{
  "suite": "verify", "seed": 11,
  "verify": {
    "ldp_mbp": {"kernels": {"count": 20}, "priors": 5},
    "total_probability": {"count": 20},
    "mbp_abp": {"kernels": {"count": 20}, "prior_eps": [0.0, 0.1, 0.5]},
    "pac": {"instances": 20},
    "kappa1": {"kappa1": [0.5], "t": [100], "eps": [0.2], "trials": 10000},
    "c1": {"pairs": 10, "eps": [0.05, 0.3]}
  }
}"#;

const OUT_OF_REGIME: &str = r#"{
  "suite": "robust", "seed": 3,
  "robust": {"experiments": [{"label": "probe", "task": {"family": "translation"},
    "grid": {"deltas": [0.1], "radii": [0.5], "rounds": 1000, "seeds": 2}}]}
}"#;

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn privrob(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("PRIVROB_OUT_ROOT").output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn verify_run_writes_reports_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "verify.json", VERIFY);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = privrob(&["run", "--config", s(&cfg), "--out", s(out)]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let verdicts = |d: &Path| std::fs::read(d.join("verdicts.jsonl")).unwrap();
    assert_eq!(verdicts(&a), verdicts(&b));
    let first = String::from_utf8(verdicts(&a)).unwrap();
    for line in first.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["holds"].is_boolean() && v["name"].is_string());
    }
    let summary = std::fs::read_to_string(a.join("summary.csv")).unwrap();
    assert!(summary.starts_with("suite,instances,pass,worst_slack\n"));
    assert!(summary.contains("\nldp_mbp.mbp_le_ldp,100,100,"));
    for f in ["report.json", "config.json"] {
        assert!(a.join(f).exists(), "{f}");
    }
}

#[test]
fn seed_and_trials_flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "verify.json", VERIFY);
    let digest = |out: &Path| {
        let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
        (r["config_digest"].as_str().unwrap().to_string(), r["seed"].as_u64().unwrap())
    };
    let base = dir.path().join("base");
    let reseeded = dir.path().join("reseeded");
    let more = dir.path().join("more");
    assert_eq!(privrob(&["run", "--config", s(&cfg), "--out", s(&base)]).status.code(), Some(0));
    assert_eq!(privrob(&["run", "--config", s(&cfg), "--out", s(&reseeded), "--seed", "12"]).status.code(), Some(0));
    assert_eq!(privrob(&["run", "--config", s(&cfg), "--out", s(&more), "--trials", "20000"]).status.code(), Some(0));
    let (d0, s0) = digest(&base);
    let (d1, s1) = digest(&reseeded);
    let (d2, _) = digest(&more);
    assert_eq!((s0, s1), (11, 12));
    assert!(d0 != d1 && d0 != d2);
}

#[test]
fn missing_seed_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"suite": "verify", "verify": {}}"#);
    let o = privrob(&["run", "--config", s(&cfg), "--out", s(&dir.path().join("o"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("seed"), "{}", stderr(&o));
}

#[test]
fn schema_violations_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (r#"{"suite": "verify", "seed": 1, "verify": {}, "tolerances": {"c1": -1}}"#, "tolerances.c1"),
        (r#"{"suite": "verify", "seed": 1, "verify": {"pac": {"instances": 0}}}"#, "verify.pac.instances"),
        (r#"{"suite": "verify", "seed": 1, "verify": {}, "extra": true}"#, "extra"),
        (r#"{"suite": "teleport", "seed": 1}"#, "teleport"),
        (r#"{"suite": "attack", "seed": 1}"#, "attack"),
    ];
    for (i, (body, field)) in cases.iter().enumerate() {
        let cfg = write_config(dir.path(), &format!("c{i}.json"), body);
        let o = privrob(&["run", "--config", s(&cfg), "--out", s(&dir.path().join("o"))]);
        assert_eq!(o.status.code(), Some(2), "{body}");
        assert!(stderr(&o).contains(field), "{body}: {}", stderr(&o));
    }
    let cfg = write_config(dir.path(), "ok.json", VERIFY);
    let o = privrob(&["run", "--config", s(&cfg), "--suite", "nonsense"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("suite"));
    let o = privrob(&["run", "--config", s(&dir.path().join("absent.json"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "verify.json", VERIFY);
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let o = privrob(&["run", "--config", s(&cfg), "--out", s(&blocker.join("sub"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("writing outputs"), "{}", stderr(&o));
}

#[test]
fn failed_assertion_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "probe.json", OUT_OF_REGIME);
    let out = dir.path().join("o");
    let o = privrob(&["run", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stderr(&o).contains("FAILED privacy_robustness:probe"));
    let table = std::fs::read_to_string(out.join("robustness_probe.csv")).unwrap();
    assert!(table.starts_with("r,measured,predicted_alpha,slack,holds"));
    assert!(table.lines().skip(1).all(|l| l.contains(",false,")));
}

#[test]
fn env_root_prefixes_relative_output_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "verify.json", VERIFY);
    let root = dir.path().join("root");
    let o = Command::new(BIN)
        .args(["run", "--config", s(&cfg), "--out", "rel"])
        .env("PRIVROB_OUT_ROOT", &root)
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(root.join("rel/report.json").exists());
    let abs = dir.path().join("abs");
    let o = Command::new(BIN).args(["run", "--config", s(&cfg), "--out", s(&abs)]).env("PRIVROB_OUT_ROOT", &root).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(abs.join("report.json").exists());
}

#[test]
fn kernel_files_resolve_against_config_dir() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join("k")).unwrap();
    std::fs::write(dir.path().join("k/rr.json"), r#"{"inputs": 2, "outputs": 2, "rows": [[0.75, 0.25], [0.25, 0.75]]}"#).unwrap();
    let cfg = write_config(
        dir.path(),
        "m.json",
        r#"{"suite": "metrics", "seed": 1, "metrics": {"instances": [{"kernel": {"kind": "file", "path": "k/rr.json"}}]}}"#,
    );
    let out = dir.path().join("o");
    let o = privrob(&["run", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let reports: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("privacy_reports.json")).unwrap()).unwrap();
    let xi = reports[0]["xi_mbp"].as_f64().unwrap();
    assert!((xi - 2f64.ln()).abs() < 1e-12);
    assert_eq!(reports[0]["eps_ldp"].as_f64().unwrap(), 3f64.ln());

    std::fs::write(dir.path().join("k/rr.json"), "{\"inputs\": 2, \"outputs\": 2,\n \"rows\": [[0.7, 0.25], [0.25, 0.75]]}").unwrap();
    let o = privrob(&["run", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn emit_plots_reshapes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "attack.json",
        r#"{"suite": "attack", "seed": 4, "attack": {"experiments": [{"label": "t", "task": {"family": "translation"},
            "grid": {"deltas": [0.4, 0.8], "rounds": [100], "seeds": 2}}]}}"#,
    );
    let out = dir.path().join("o");
    assert_eq!(privrob(&["run", "--config", s(&cfg), "--out", s(&out)]).status.code(), Some(0));
    let o = privrob(&["emit-plots", "--report", s(&out.join("report.json"))]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("plot_data.csv")).unwrap();
    assert!(csv.starts_with("series,x,y\n"));
    // one eps_p row per (delta, seed)
    assert_eq!(csv.lines().filter(|l| l.starts_with("t:eps_p[I=100],")).count(), 4);
    assert!(csv.lines().any(|l| l.starts_with("t:rhs[I=100],0.8,")));

    let o = privrob(&["emit-plots", "--report", s(&dir.path().join("missing.json"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn shipped_acceptance_bundle_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/acceptance.json");
    let o = privrob(&["run", "--config", cfg, "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    for name in ["ldp_mbp.mbp_le_ldp", "total_probability", "mbp_abp", "pac_robustness", "kappa1_concentration", "c1_error", "estimator.pipeline_consistency"] {
        assert!(summary.lines().any(|l| l.starts_with(&format!("{name},"))), "{name}");
    }
}
