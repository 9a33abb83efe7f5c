use std::process::Command;

use spde_density::experiments::*;
use spde_density::Error;

fn cfg(json: &str) -> spde_density::Result<ResolvedConfig> {
    ExperimentConfig::from_json(json)?.resolve()
}

fn config_field(err: Error) -> String {
    match err {
        Error::Config { field, .. } => field,
        other => panic!("expected a config error, got {other}"),
    }
}

#[test]
fn every_preset_resolves() {
    for kind in ExperimentKind::all() {
        let r = ExperimentConfig::preset(kind).resolve().unwrap();
        assert_eq!(r.experiment, kind);
        assert_eq!(r.master_seed, DEFAULT_SEED);
        assert_eq!(r.output_dir, std::path::PathBuf::from("runs").join(kind.name()));
    }
}

#[test]
fn white_noise_in_two_dimensions_is_rejected() {
    let err = cfg(r#"{"experiment":"sandwich-heat-rd","measure":{"kind":"white"},"model":{"dim":2,"n":16}}"#)
        .unwrap_err();
    assert_eq!(config_field(err), "measure");
}

#[test]
fn white_noise_in_one_dimension_is_valid_for_heat() {
    let r = cfg(r#"{"experiment":"sandwich-heat-rd","measure":{"kind":"white"},"eta":0.6}"#).unwrap();
    let report = r.diagnostics().unwrap();
    assert!(report.existence_integral.is_some() && report.h_eta_integral.is_some());
    assert!(!report.warnings.iter().any(|w| w.contains("eta")), "{:?}", report.warnings);
}

#[test]
fn large_wave_times_are_flagged() {
    let r = cfg(r#"{"experiment":"scaling-wave","eta":0.4,"t_schedule":[0.1,0.3,0.5,0.7,0.9]}"#).unwrap();
    let report = r.diagnostics().unwrap();
    assert!(report.warnings.iter().any(|w| w.contains("small-time")), "{:?}", report.warnings);
}

#[test]
fn interval_model_has_no_eta_warning() {
    let r = ExperimentConfig::preset(ExperimentKind::GaussianOracleHeat1d).resolve().unwrap();
    assert!(r.diagnostics().unwrap().warnings.is_empty());
}

#[test]
fn invalid_fields_are_named() {
    let cases = [
        (r#"{"experiment":"sandwich-heat1d","n_trajectories":10}"#, "n_trajectories"),
        (r#"{"experiment":"scaling-heat1d","t_schedule":[0.1,0.2]}"#, "t_schedule"),
        (r#"{"experiment":"sandwich-heat1d","model":{"sigma":-1}}"#, "model.sigma"),
        (r#"{"experiment":"sandwich-heat1d","eta":1.5}"#, "eta"),
        (r#"{"experiment":"sandwich-heat1d","model":{"dim":2}}"#, "model.dim"),
        (r#"{"experiment":"sandwich-wave","model":{"time_step":{"kind":"dx_ratio","ratio":0.5}}}"#, "model.time_step"),
        (r#"{"experiment":"sandwich-heat1d","model":{"colour":3}}"#, "<document>"),
    ];
    for (json, field) in cases {
        assert_eq!(config_field(cfg(json).unwrap_err()), field, "{json}");
    }
    assert!(matches!(cfg(r#"{"experiment":"lemma-checks","lemmas":["eq99"]}"#), Err(Error::UnknownLemma(_))));
}

#[test]
fn exit_codes() {
    assert_eq!(exit_code_for(&Error::Config { field: "x".into(), message: "y".into() }), exit_code::CONFIG);
    assert_eq!(exit_code_for(&Error::Instability("nan".into())), exit_code::NUMERICAL);
}

#[test]
fn lemma_checks_pass_and_write_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = ExperimentConfig::preset(ExperimentKind::LemmaChecks);
    c.output_dir = Some(dir.path().to_path_buf());
    let out = run(&c.resolve().unwrap()).unwrap();
    assert!(out.passed(), "{:?}", out.checks);
    assert_eq!(out.bounds.len(), 6);
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["passed"], true);
    assert_eq!(manifest["config_hash"], config_hash(&c.resolve().unwrap()).unwrap());
    let files: Vec<&str> = manifest["outputs"].as_array().unwrap().iter().map(|f| f["path"].as_str().unwrap()).collect();
    assert!(files.contains(&"bounds.csv") && files.contains(&"summary.json"));
}

#[test]
fn same_config_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let go = |sub: &str| {
        let mut c = ExperimentConfig::from_json(
            r#"{"experiment":"scaling-heat1d","n_trajectories":1000,"model":{"n":16},"dump_samples":true}"#,
        )
        .unwrap();
        c.output_dir = Some(dir.path().join(sub));
        run(&c.resolve().unwrap()).unwrap();
    };
    go("a");
    go("b");
    for f in ["g_estimate.csv", "scaling.csv", "samples.jsonl", "summary.json"] {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        assert_eq!(a, std::fs::read(dir.path().join("b").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn command_line_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_spde-density");
    let dir = tempfile::tempdir().unwrap();

    let out = Command::new(bin).arg("list-experiments").output().unwrap();
    assert_eq!(out.status.code(), Some(exit_code::PASS));
    assert!(String::from_utf8_lossy(&out.stdout).contains("scaling-wave"));

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"experiment":"sandwich-heat1d","n_trajectories":5}"#).unwrap();
    let out = Command::new(bin).arg("validate").arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(exit_code::CONFIG));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_trajectories"));

    let good = dir.path().join("lemmas.json");
    std::fs::write(&good, r#"{"experiment":"lemma-checks"}"#).unwrap();
    let out = Command::new(bin)
        .args(["run", good.to_str().unwrap(), "--out", dir.path().join("out").to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(exit_code::PASS));
    assert!(dir.path().join("out").join("manifest.json").exists());

    let short = dir.path().join("short.json");
    std::fs::write(&short, r#"{"experiment":"scaling-heat1d","t_schedule":[0.1]}"#).unwrap();
    let out = Command::new(bin).args(["run", short.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(exit_code::CONFIG));

    // the interval model saturates well before t = 0.5, so the slope check fails
    let slow = dir.path().join("saturating.json");
    std::fs::write(&slow, r#"{"experiment":"scaling-heat1d","n_trajectories":1000,"model":{"n":16}}"#).unwrap();
    let out = Command::new(bin)
        .args(["run", slow.to_str().unwrap(), "--out", dir.path().join("sat").to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(exit_code::CHECK_FAILED));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL scaling_slopes"));
}
