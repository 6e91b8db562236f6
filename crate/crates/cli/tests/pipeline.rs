use std::path::Path;
use std::sync::OnceLock;

use tempfile::TempDir;
use tsecon_cli::config::Toggles;
use tsecon_cli::pipeline::{reevaluate, run_pipeline, MODEL_ORDER};
use tsecon_cli::synth::{synth_dataset, SYNTH_MONTHS};
use tsecon_cli::{CliError, PipelineConfig};

fn small_config() -> PipelineConfig {
    PipelineConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/small.cfg")).unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// One shared full run; several tests inspect it.
fn baseline() -> &'static TempDir {
    static RUN: OnceLock<TempDir> = OnceLock::new();
    RUN.get_or_init(|| {
        let dir = TempDir::new().unwrap();
        let cfg = small_config();
        run_pipeline(&cfg, &synth_dataset(cfg.seed, SYNTH_MONTHS), dir.path()).unwrap();
        dir
    })
}

#[test]
fn synthetic_run_emits_every_report() {
    let dir = baseline().path();
    for f in [
        "differencing.csv",
        "acf_pacf.csv",
        "diagnostics.txt",
        "residuals_arima.csv",
        "residuals_arimax.csv",
        "residuals_garch.csv",
        "residuals_varx.csv",
        "johansen.csv",
        "irf.csv",
        "granger.csv",
        "pca.csv",
        "ensemble.csv",
        "evaluation.csv",
        "predictions_test.csv",
        "forecasts.csv",
        "MANIFEST.json",
    ] {
        assert!(dir.join(f).exists(), "{f} missing");
    }
    let eval = read(dir, "evaluation.csv");
    let lines: Vec<&str> = eval.lines().collect();
    assert_eq!(lines[0], "model,mape,percent_bias");
    let models: Vec<&str> = lines[1..].iter().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(models, MODEL_ORDER);

    let fc = read(dir, "forecasts.csv");
    let rows: Vec<&str> = fc.lines().collect();
    assert_eq!(rows.len(), 13);
    assert!(rows[1].starts_with("2019-01,"));
    assert!(rows[12].starts_with("2019-12,"));

    let manifest: serde_json::Value = serde_json::from_str(&read(dir, "MANIFEST.json")).unwrap();
    assert_eq!(manifest["complete"], true);
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(manifest["sources"].as_array().unwrap().len(), 11);
    assert!(manifest["stage_status"].as_array().unwrap().iter().all(|s| s["status"] == "ok"));
}

#[test]
fn test_window_is_the_last_fifth() {
    let pred = read(baseline().path(), "predictions_test.csv");
    let rows: Vec<&str> = pred.lines().skip(1).collect();
    assert_eq!(rows.len(), 102);
    assert!(rows[0].starts_with("2010-07,"));
    assert!(rows.last().unwrap().starts_with("2018-12,"));
}

#[test]
fn evaluation_is_rederivable_from_predictions() {
    let dir = baseline().path();
    let reports = reevaluate(&read(dir, "predictions_test.csv")).unwrap();
    assert_eq!(tsecon_cli::pipeline::evaluation_csv(&reports), read(dir, "evaluation.csv"));
}

#[test]
fn identical_inputs_give_identical_outputs() {
    let cfg = small_config();
    let other = TempDir::new().unwrap();
    run_pipeline(&cfg, &synth_dataset(cfg.seed, SYNTH_MONTHS), other.path()).unwrap();
    for f in ["evaluation.csv", "forecasts.csv", "predictions_test.csv", "irf.csv", "pca.csv"] {
        assert_eq!(read(baseline().path(), f), read(other.path(), f), "{f} differs");
    }
}

#[test]
fn disabling_ml_leaves_econometric_reports_only() {
    let mut cfg = small_config();
    cfg.toggles.ml = false;
    let dir = TempDir::new().unwrap();
    let outcome = run_pipeline(&cfg, &synth_dataset(cfg.seed, 300), dir.path()).unwrap();
    assert!(!dir.path().join("pca.csv").exists());
    assert!(!dir.path().join("ensemble.csv").exists());
    let names: Vec<&str> = outcome.evaluation.iter().map(|r| r.model.as_str()).collect();
    assert_eq!(names, ["arima", "arimax", "arma_garch", "varx"]);
    let header = read(dir.path(), "forecasts.csv").lines().next().unwrap().to_string();
    assert_eq!(header, "month,arima,arimax,arma_garch,varx");
}

#[test]
fn empty_model_set_gives_header_only_evaluation() {
    let mut cfg = small_config();
    cfg.toggles = Toggles { arima: false, arimax: false, garch: false, cointegration: false, varx: false, ml: false };
    let dir = TempDir::new().unwrap();
    run_pipeline(&cfg, &synth_dataset(1, 120), dir.path()).unwrap();
    assert_eq!(read(dir.path(), "evaluation.csv"), "model,mape,percent_bias\n");
    let fc = read(dir.path(), "forecasts.csv");
    assert_eq!(fc.lines().count(), 13);
    assert!(dir.path().join("differencing.csv").exists());
}

#[test]
fn stage_failure_names_the_stage_and_keeps_partial_artifacts() {
    let mut cfg = small_config();
    cfg.toggles.ml = false;
    cfg.varx_vars = vec!["mortgR".into(), "house_supply".into()];
    let dir = TempDir::new().unwrap();
    let err = run_pipeline(&cfg, &synth_dataset(2, 200), dir.path()).unwrap_err();
    match &err {
        CliError::Stage { stage, .. } => assert_eq!(stage, "varx"),
        other => panic!("{other:?}"),
    }
    assert!(err.to_string().contains("varx"));
    assert!(dir.path().join("residuals_arima.csv").exists());
    assert!(dir.path().join("johansen.csv").exists());
    assert!(!dir.path().join("evaluation.csv").exists());
    let manifest: serde_json::Value = serde_json::from_str(&read(dir.path(), "MANIFEST.json")).unwrap();
    assert_eq!(manifest["complete"], false);
    let last = manifest["stage_status"].as_array().unwrap().last().unwrap().clone();
    assert_eq!(last["stage"], "varx");
    assert_eq!(last["status"], "failed");
}

#[test]
fn unknown_target_is_rejected_before_any_stage() {
    let mut cfg = small_config();
    cfg.target = "nope".into();
    let dir = TempDir::new().unwrap();
    assert!(matches!(run_pipeline(&cfg, &synth_dataset(1, 100), dir.path()), Err(CliError::UnknownVariable(_))));
    assert!(!dir.path().join("MANIFEST.json").exists());
}
