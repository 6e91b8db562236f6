//! End-to-end run: differencing, diagnostics, econometric fits, VARX
//! structural analysis, PCA and the stacked ensemble, then the evaluation
//! and forecast tables. Each stage writes its files when it completes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};
use tsecon::arima::{fit_arima_with, forecast_arima, select_order_with, ArimaOptions};
use tsecon::cointegration::{engle_granger, fit_vecm, johansen_trace, stationary_combination, JohansenDeterministic};
use tsecon::diagnostics::{adf_test_auto, arch_lm, differencing_order, jarque_bera, ljung_box, Deterministic, TestReport};
use tsecon::ensemble::{
    evaluate, make_cv_slices, recursive_forecast_many, stack_fit, ArimaExtender, ComponentSpec, EvalReport,
    FeatureExtender, Predictor, StackOptions,
};
use tsecon::garch::{diagnose_fit, fit_arma_garch, forecast_garch, select_garch_order};
use tsecon::ml::{fit_pca, FitOptions};
use tsecon::series::{acf_pacf, diff_values, split_point, CorrelogramKind};
use tsecon::varx::{fit_varx, forecast_varx, granger_causality, granger_pairwise, impulse_response, LagOrder, VarDeterministic};
use tsecon::{Error, Table, TimeSeries, YearMonth};

use crate::config::{DiffOverride, PipelineConfig};
use crate::dataset::Dataset;
use crate::error::{CliError, CliResult};
use crate::report::{num, ArtifactWriter, CsvText, Manifest, StageStatus};

/// Model rows of the evaluation table, in reporting order.
pub const MODEL_ORDER: [&str; 9] = ["arima", "arimax", "arma_garch", "varx", "knn", "svr", "ridge", "ann", "ensemble"];

/// Test-window predictions and the out-of-sample path of one model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelOutcome {
    pub name: String,
    pub specification: String,
    pub test_predictions: Vec<f64>,
    pub forecast: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub models: Vec<ModelOutcome>,
    pub evaluation: Vec<EvalReport>,
    pub differencing: BTreeMap<String, usize>,
    pub manifest: Manifest,
}

#[derive(Default)]
struct StageOutput {
    files: Vec<(String, String)>,
    diagnostics: String,
    models: Vec<ModelOutcome>,
}

impl StageOutput {
    fn file(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }

    fn section(&mut self, title: &str) {
        if !self.diagnostics.is_empty() {
            self.diagnostics.push('\n');
        }
        let _ = writeln!(self.diagnostics, "== {title} ==");
    }

    fn line(&mut self, text: impl AsRef<str>) {
        self.diagnostics.push_str(text.as_ref());
        self.diagnostics.push('\n');
    }

    fn report(&mut self, label: &str, r: &tsecon::Result<TestReport>) {
        match r {
            Ok(r) => self.line(format!("{label:<28} {r}")),
            Err(e) => self.line(format!("{label:<28} unavailable: {e}")),
        }
    }
}

struct Run<'a> {
    cfg: &'a PipelineConfig,
    data: &'a Dataset,
    writer: ArtifactWriter,
    diagnostics: String,
    status: Vec<StageStatus>,
    models: Vec<ModelOutcome>,
    config_hash: String,
    created_utc: String,
}

impl Run<'_> {
    fn manifest(&self, complete: bool) -> Manifest {
        Manifest {
            config_hash: self.config_hash.clone(),
            seed: self.cfg.seed,
            created_utc: self.created_utc.clone(),
            sources: self.data.sources.clone(),
            stage_status: self.status.clone(),
            complete,
        }
    }

    fn stage<T>(&mut self, name: &str, enabled: bool, f: impl FnOnce(&mut StageOutput) -> tsecon::Result<T>) -> CliResult<Option<T>> {
        if !enabled {
            self.status.push(StageStatus { stage: name.into(), status: "skipped".into(), files: vec![], error: None });
            return Ok(None);
        }
        let mut out = StageOutput::default();
        let result = f(&mut out);
        let mut files: Vec<String> = Vec::new();
        for (fname, contents) in &out.files {
            self.writer.write(fname, contents)?;
            files.push(fname.clone());
        }
        self.diagnostics.push_str(&out.diagnostics);
        if !out.diagnostics.is_empty() {
            self.diagnostics.push('\n');
        }
        self.writer.write("diagnostics.txt", &self.diagnostics)?;
        match result {
            Ok(v) => {
                self.models.extend(out.models);
                self.status.push(StageStatus { stage: name.into(), status: "ok".into(), files, error: None });
                Ok(Some(v))
            }
            Err(source) => {
                self.status.push(StageStatus {
                    stage: name.into(),
                    status: "failed".into(),
                    files,
                    error: Some(source.to_string()),
                });
                let m = self.manifest(false);
                self.writer.write_manifest(&m)?;
                Err(CliError::Stage { stage: name.into(), source })
            }
        }
    }
}

pub fn config_hash(cfg: &PipelineConfig) -> String {
    let digest = Sha256::digest(cfg.canonical().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

/// Shared, read-only facts every model stage needs.
struct Frame<'a> {
    table: &'a Table,
    target: String,
    target_col: usize,
    split: usize,
    n: usize,
    orders: BTreeMap<String, usize>,
}

impl Frame<'_> {
    fn series(&self, name: &str) -> tsecon::Result<TimeSeries> {
        self.table.series_by_name(name)
    }

    fn target_series(&self) -> TimeSeries {
        self.table.series(self.target_col)
    }

    fn train_target(&self) -> tsecon::Result<TimeSeries> {
        self.target_series().slice(0..self.split)
    }

    fn test_len(&self) -> usize {
        self.n - self.split
    }

    fn forecast_start(&self) -> YearMonth {
        self.table.end().add_months(1)
    }

    fn order_of(&self, name: &str) -> usize {
        self.orders.get(name).copied().unwrap_or(0)
    }

    fn select(&self, names: &[String], rows: std::ops::Range<usize>) -> tsecon::Result<Table> {
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        self.table.select(&refs)?.slice_rows(rows)
    }
}

fn residual_rows(csv: &mut CsvText, model: &str, last: YearMonth, residuals: &[f64]) {
    let len = residuals.len() as i64;
    for (i, r) in residuals.iter().enumerate() {
        csv.row(&[model.to_string(), last.add_months(i as i64 - len + 1).to_string(), num(*r)]);
    }
}

fn residual_battery(out: &mut StageOutput, residuals: &[f64], lags: usize, fitted: usize) {
    out.report("Ljung-Box residuals", &ljung_box(residuals, lags, fitted));
    let sq: Vec<f64> = residuals.iter().map(|e| e * e).collect();
    out.report("Ljung-Box squared residuals", &ljung_box(&sq, lags, 0));
    for q in [2, 4, 8, 12] {
        out.report(&format!("ARCH-LM q={q}"), &arch_lm(residuals, q));
    }
    out.report("Jarque-Bera residuals", &jarque_bera(residuals));
}

/// Iterates a one-step extender `h` times on a copy of `history`.
fn extend_path(ext: &dyn FeatureExtender, history: &[f64], h: usize) -> tsecon::Result<Vec<f64>> {
    let mut hist = history.to_vec();
    let mut out = Vec::with_capacity(h);
    for step in 1..=h {
        let v = ext.extend(&hist).map_err(|e| Error::ForecastStep { step, source: Box::new(e) })?;
        hist.push(v);
        out.push(v);
    }
    Ok(out)
}

fn stage_differencing(cfg: &PipelineConfig, table: &Table, out: &mut StageOutput) -> tsecon::Result<BTreeMap<String, usize>> {
    let mut csv = CsvText::new(&["variable", "chosen_order", "source", "tested_order", "adf_statistic", "p_value", "lags"]);
    let mut orders = BTreeMap::new();
    out.section("Differencing order (ADF with drift, 5%)");
    for (j, name) in table.names().iter().enumerate() {
        let s = table.series(j);
        let search = differencing_order(&s, Deterministic::Drift, cfg.max_differences)?;
        let (order, source) = match cfg.differencing.get(name).copied().unwrap_or(DiffOverride::Auto) {
            DiffOverride::Auto => (search.order, "auto"),
            DiffOverride::Fixed(d) => (d, "fixed"),
        };
        for (d, r) in search.reports.iter().enumerate() {
            csv.row(&[name.clone(), order.to_string(), source.into(), d.to_string(), num(r.statistic), num(r.p_value), r.lags_or_order.to_string()]);
        }
        let flag = if search.exhausted { " (unit root not rejected at the last tested order)" } else { "" };
        out.line(format!("{name:<20} d={order} [{source}]{flag}"));
        orders.insert(name.clone(), order);
    }
    out.file("differencing.csv", csv.into_string());
    Ok(orders)
}

fn stage_diagnostics(cfg: &PipelineConfig, f: &Frame, out: &mut StageOutput) -> tsecon::Result<()> {
    let d = f.order_of(&f.target);
    let y = f.target_series();
    let diffed = TimeSeries::new(y.name(), y.date_at(d), diff_values(y.values(), d))?;
    let max_lag = cfg.acf_lags.min(diffed.len() / 2);
    let acf = acf_pacf(&diffed, max_lag, CorrelogramKind::Acf)?;
    let pacf = acf_pacf(&diffed, max_lag, CorrelogramKind::Pacf)?;
    let mut csv = CsvText::new(&["variable", "lag", "acf", "pacf", "bound"]);
    for (i, lag) in acf.lags.iter().enumerate() {
        let p = pacf.lags.iter().position(|l| l == lag).map(|k| pacf.coefficients[k]);
        csv.row(&[
            f.target.clone(),
            lag.to_string(),
            num(acf.coefficients[i]),
            p.map(num).unwrap_or_default(),
            num(acf.confidence_bound),
        ]);
    }
    out.file("acf_pacf.csv", csv.into_string());
    out.section(&format!("Diagnostics of {} differenced {d} time(s)", f.target));
    out.line(format!("significant ACF lags:  {:?}", acf.significant_lags()));
    out.line(format!("significant PACF lags: {:?}", pacf.significant_lags()));
    out.report("ADF (drift)", &adf_test_auto(&diffed, Deterministic::Drift));
    out.report("Ljung-Box", &ljung_box(diffed.values(), cfg.ljung_box_lags, 0));
    let sq: Vec<f64> = diffed.values().iter().map(|v| v * v).collect();
    out.report("Ljung-Box squared", &ljung_box(&sq, cfg.ljung_box_lags, 0));
    out.report("ARCH-LM q=12", &arch_lm(diffed.values(), 12));
    out.report("Jarque-Bera", &jarque_bera(diffed.values()));
    Ok(())
}

fn arima_options(cfg: &PipelineConfig) -> ArimaOptions {
    ArimaOptions { seed: cfg.seed, ..ArimaOptions::default() }
}

fn stage_arima(cfg: &PipelineConfig, f: &Frame, out: &mut StageOutput) -> tsecon::Result<()> {
    let d = f.order_of(&f.target);
    let train = f.train_target()?;
    let opts = arima_options(cfg);
    let (spec, fit) = select_order_with(&train, None, cfg.arima_p_max, d, cfg.arima_q_max, &opts)?;
    let test = forecast_arima(&fit, f.test_len(), None)?.mean;
    let full = fit_arima_with(&f.target_series(), None, spec, &opts)?;
    let path = forecast_arima(&full, cfg.horizon, None)?.mean;
    let label = format!("ARIMA({},{},{})", spec.p, spec.d, spec.q);
    out.section(&label);
    out.line(format!("ar={:?} ma={:?} intercept={} aic={}", fit.ar_coeffs, fit.ma_coeffs, fit.intercept, fit.aic));
    out.line(format!("stationary={} invertible={} converged={}", fit.stationary, fit.invertible, fit.converged));
    residual_battery(out, &fit.residuals, cfg.ljung_box_lags, spec.p + spec.q);
    let mut csv = CsvText::new(&["model", "month", "residual"]);
    residual_rows(&mut csv, "arima", fit.last_date, &fit.residuals);
    out.file("residuals_arima.csv", csv.into_string());
    out.models.push(ModelOutcome { name: "arima".into(), specification: label, test_predictions: test, forecast: path });
    Ok(())
}

fn stage_arimax(cfg: &PipelineConfig, f: &Frame, out: &mut StageOutput) -> tsecon::Result<()> {
    if cfg.arimax_exog.is_empty() {
        return Err(invalid("ARIMAX needs at least one regressor"));
    }
    let r0 = cfg.arimax_exog.iter().map(|t| t.d).max().unwrap_or(0);
    let mut names = Vec::new();
    let mut cols = Vec::new();
    for t in &cfg.arimax_exog {
        let s = f.series(&t.name)?;
        let dv = diff_values(s.values(), t.d);
        cols.push(dv[r0 - t.d..].to_vec());
        names.push(if t.d == 0 { t.name.clone() } else { format!("{}_d{}", t.name, t.d) });
    }
    if f.split <= r0 + 30 {
        return Err(Error::InsufficientData(format!("ARIMAX training window has {} rows", f.split.saturating_sub(r0))));
    }
    let start = f.table.date_at(r0);
    let exog = Table::new(start, names.clone(), cols)?;
    let endog = f.target_series().slice(r0..f.n)?;
    let cut = f.split - r0;
    let train_exog = exog.slice_rows(0..cut)?;
    let test_exog = exog.slice_rows(cut..exog.nrows())?;
    let train = endog.slice(0..cut)?;
    let d = f.order_of(&f.target);
    let opts = arima_options(cfg);
    let (spec, fit) = select_order_with(&train, Some(&train_exog), cfg.arima_p_max, d, cfg.arima_q_max, &opts)?;
    let test = forecast_arima(&fit, f.test_len(), Some(&test_exog))?.mean;

    let full = fit_arima_with(&endog, Some(&exog), spec, &opts)?;
    let ext = ArimaExtender { p_max: cfg.extender_p_max, q_max: cfg.extender_q_max, max_d: cfg.max_differences.min(2) };
    let future_cols = exog.columns().iter().map(|c| extend_path(&ext, c, cfg.horizon)).collect::<tsecon::Result<Vec<_>>>()?;
    let future = Table::new(f.forecast_start(), names.clone(), future_cols)?;
    let path = forecast_arima(&full, cfg.horizon, Some(&future))?.mean;

    let label = format!("ARIMAX({},{},{})", spec.p, spec.d, spec.q);
    out.section(&label);
    out.line(format!("regressors={names:?}"));
    out.line(format!("beta={:?} ar={:?} ma={:?} aic={}", fit.exog_coeffs, fit.ar_coeffs, fit.ma_coeffs, fit.aic));
    residual_battery(out, &fit.residuals, cfg.ljung_box_lags, spec.p + spec.q);
    let mut csv = CsvText::new(&["model", "month", "residual"]);
    residual_rows(&mut csv, "arimax", fit.last_date, &fit.residuals);
    out.file("residuals_arimax.csv", csv.into_string());
    out.models.push(ModelOutcome { name: "arimax".into(), specification: label, test_predictions: test, forecast: path });
    Ok(())
}

fn stage_garch(cfg: &PipelineConfig, f: &Frame, out: &mut StageOutput) -> tsecon::Result<()> {
    let train = f.train_target()?;
    let sel = select_garch_order(&train, &cfg.garch_candidates, cfg.garch_fit_fraction, false)?;
    let test = forecast_garch(&sel.fit, f.test_len())?.mean;
    let full = fit_arma_garch(&f.target_series(), sel.chosen)?;
    let path = forecast_garch(&full, cfg.horizon)?.mean;
    let label = format!("ARMA({},{})-GARCH(1,1)", sel.chosen.0, sel.chosen.1);
    out.section(&label);
    for c in &sel.candidates {
        out.line(format!(
            "candidate ARMA({},{}): holdout_mape={} pass={} aic={} {}",
            c.mean_order.0,
            c.mean_order.1,
            c.holdout_mape,
            c.diagnostics_pass,
            c.aic,
            c.error.as_deref().unwrap_or("")
        ));
    }
    let g = &sel.fit;
    out.line(format!(
        "mu={} ar={:?} ma={:?} alpha0={} alpha1={} beta1={} persistence={} fallback={}",
        g.mu, g.arma_ar, g.arma_ma, g.alpha0, g.alpha1, g.beta1, g.persistence, sel.fallback
    ));
    out.line(format!("beta_unidentified={} nonstationary_variance={}", g.beta_unidentified, g.nonstationary_variance));
    for r in diagnose_fit(g) {
        out.line(r.to_string());
    }
    let mut csv = CsvText::new(&["model", "month", "residual"]);
    residual_rows(&mut csv, "arma_garch", g.last_date, &g.std_resid);
    out.file("residuals_garch.csv", csv.into_string());
    out.models.push(ModelOutcome { name: "arma_garch".into(), specification: label, test_predictions: test, forecast: path });
    Ok(())
}

fn stage_cointegration(cfg: &PipelineConfig, f: &Frame, out: &mut StageOutput) -> tsecon::Result<()> {
    let (yn, xn) = &cfg.coint_pair;
    let (eg, ecm) = engle_granger(&f.series(yn)?, &f.series(xn)?)?;
    out.section(&format!("Engle-Granger {yn} on {xn}"));
    out.line(format!("intercept={} slope={} residual_ar1={}", eg.intercept, eg.slope, eg.residual_ar1));
    out.line(eg.adf_on_residuals.to_string());
    out.line(format!("cointegrated={}", eg.cointegrated));
    out.line(format!("ECM alpha={} gamma={:?} p_values={:?}", ecm.alpha, ecm.gamma, ecm.p_values));

    let table = f.select(&cfg.johansen_vars, 0..f.n)?;
    let jo = johansen_trace(&table, cfg.johansen_lags, JohansenDeterministic::Constant)?;
    let mut csv = CsvText::new(&["rank_null", "eigenvalue", "trace", "cv10", "cv5", "cv1"]);
    for r in 0..jo.trace_stats.len() {
        let cv = jo.critical_values[r];
        csv.row(&[r.to_string(), num(jo.eigenvalues[r]), num(jo.trace_stats[r]), num(cv[0]), num(cv[1]), num(cv[2])]);
    }
    out.file("johansen.csv", csv.into_string());
    out.section(&format!("Johansen trace test, lags={}", cfg.johansen_lags));
    out.line(format!("variables={:?} selected_rank={}", jo.variables, jo.selected_rank));
    let k = jo.variables.len();
    if jo.selected_rank >= 1 {
        let comb = stationary_combination(&jo, &table)?;
        out.report("ADF on combination", &adf_test_auto(&comb, Deterministic::Drift));
    }
    if jo.selected_rank >= 1 && jo.selected_rank < k {
        let vecm = fit_vecm(&table, jo.selected_rank, cfg.johansen_lags)?;
        out.section(&format!("VECM rank={}", vecm.rank));
        out.line(format!("beta={:?}", vecm.beta.as_slice()));
        out.line(format!("ect={:?}", vecm.ect_coefficients.as_slice()));
        out.line(format!("ect_p={:?}", vecm.ect_p_values.as_slice()));
    } else {
        out.line(format!("VECM not estimated: rank {} of {k}", jo.selected_rank));
    }
    Ok(())
}

fn stage_varx(cfg: &PipelineConfig, f: &Frame, out: &mut StageOutput) -> tsecon::Result<()> {
    if !cfg.varx_vars.contains(&f.target) {
        return Err(invalid(format!("VARX variables must include the target `{}`", f.target)));
    }
    let train = f.select(&cfg.varx_vars, 0..f.split)?;
    let fit = fit_varx(&train, LagOrder::Auto { max: cfg.varx_max_lag }, VarDeterministic::ConstTrend)?;
    let ti = fit.index_of(&f.target)?;
    let test = forecast_varx(&fit, f.test_len())?.swap_remove(ti).mean;
    let all = f.select(&cfg.varx_vars, 0..f.n)?;
    let full = fit_varx(&all, LagOrder::Fixed(fit.p), VarDeterministic::ConstTrend)?;
    let path = forecast_varx(&full, cfg.horizon)?.swap_remove(ti).mean;

    let label = format!("VARX({})", fit.p);
    out.section(&label);
    out.line(format!("variables={:?} aic={} r_squared={:?}", fit.variables, fit.aic, fit.r_squared));
    if let Some(p) = &fit.portmanteau {
        out.line(p.to_string());
    }

    let mut irf = CsvText::new(&["impulse", "response", "horizon", "value", "lower", "upper"]);
    for imp in &cfg.varx_vars {
        let r = impulse_response(&full, imp, &f.target, cfg.irf_horizon, cfg.irf_boot_reps, cfg.seed)?;
        for h in 0..=r.horizon {
            irf.row(&[imp.clone(), f.target.clone(), h.to_string(), num(r.responses[h]), num(r.lower[h]), num(r.upper[h])]);
        }
    }
    out.file("irf.csv", irf.into_string());

    let mut gc = CsvText::new(&["cause", "effect", "statistic", "p_value", "reject_5pct"]);
    let mut push = |cause: &str, effect: &str, r: &TestReport| {
        gc.row(&[cause.into(), effect.into(), num(r.statistic), num(r.p_value), r.reject_at_5pct.to_string()]);
    };
    for v in &cfg.varx_vars {
        let block = granger_causality(&full, v)?;
        push(v, "all_others", &block);
        out.line(format!("Granger {v} -> others: {block}"));
        if *v != f.target {
            push(v, &f.target, &granger_pairwise(&full, v, &f.target)?);
            push(&f.target, v, &granger_pairwise(&full, &f.target, v)?);
        }
    }
    out.file("granger.csv", gc.into_string());

    let mut csv = CsvText::new(&["model", "month", "residual"]);
    let resid: Vec<f64> = fit.residuals.column(ti).iter().copied().collect();
    residual_rows(&mut csv, "varx", train.end(), &resid);
    out.file("residuals_varx.csv", csv.into_string());
    out.models.push(ModelOutcome { name: "varx".into(), specification: label, test_predictions: test, forecast: path });
    Ok(())
}

fn stage_ml(cfg: &PipelineConfig, f: &Frame, out: &mut StageOutput) -> tsecon::Result<()> {
    let predictors: Vec<String> = if cfg.variables.is_empty() {
        f.table.names().iter().filter(|n| **n != f.target).cloned().collect()
    } else {
        cfg.variables.iter().filter(|n| **n != f.target).cloned().collect()
    };
    if predictors.is_empty() {
        return Err(invalid("no predictors for the ML stage"));
    }
    let x_all = f.select(&predictors, 0..f.n)?.to_matrix();
    let x_train_raw = x_all.rows(0, f.split).into_owned();
    let m = cfg.pca_components.min(predictors.len());
    let pca = fit_pca(&x_train_raw, &predictors)?.with_retained(m)?;
    let scores = pca.project(&x_all, m)?;
    let ratios = pca.variance_ratio();
    let cum = pca.cumulative_variance_ratio();

    let mut header = vec!["component".to_string(), "eigenvalue".into(), "variance_ratio".into(), "cumulative_ratio".into()];
    header.extend(predictors.iter().cloned());
    let mut pcsv = CsvText::new(&header);
    for c in 0..pca.eigenvalues.len() {
        let mut row = vec![format!("PC{}", c + 1), num(pca.eigenvalues[c]), num(ratios[c]), num(cum[c])];
        row.extend((0..predictors.len()).map(|j| num(pca.eigenvectors[(j, c)])));
        pcsv.row(&row);
    }
    out.file("pca.csv", pcsv.into_string());
    out.section(&format!("PCA on {} predictors, {m} retained", predictors.len()));
    out.line(format!("variance_ratio={ratios:?}"));

    let y: Vec<f64> = f.target_series().values().to_vec();
    let x_train = scores.rows(0, f.split).into_owned();
    let x_test = scores.rows(f.split, f.test_len()).into_owned();
    let y_train = &y[..f.split];
    let slices = make_cv_slices(f.split, cfg.folds)?;
    let mut specs = Vec::new();
    for (name, grid) in [("knn", &cfg.grids.knn), ("svr", &cfg.grids.svr), ("ridge", &cfg.grids.ridge), ("ann", &cfg.grids.ann)] {
        if !grid.is_empty() {
            specs.push(ComponentSpec::new(name, grid.clone()));
        }
    }
    if specs.is_empty() {
        return Err(invalid("every ML grid is empty"));
    }
    let opts = StackOptions { fit: FitOptions { scale_features: true, seed: cfg.seed }, ..StackOptions::default() };
    let stacked = stack_fit(&x_train, y_train, &slices, &specs, &opts)?;

    let extender = ArimaExtender { p_max: cfg.extender_p_max, q_max: cfg.extender_q_max, max_d: cfg.max_differences.min(2) };
    let extenders: Vec<&dyn FeatureExtender> = vec![&extender; m];
    let mut models: Vec<&dyn Predictor> = stacked.components.iter().map(|c| &c.fit as &dyn Predictor).collect();
    models.push(&stacked);
    let paths = recursive_forecast_many(&models, &scores, &extenders, cfg.horizon, &f.target, f.forecast_start())?;

    let (a, w) = stacked.meta_weights();
    let mut ecsv = CsvText::new(&["component", "hyperparameters", "cv_mape", "meta_weight"]);
    out.section("Stacked ensemble");
    for (c, wi) in stacked.components.iter().zip(w) {
        ecsv.row(&[c.name.clone(), c.hyper.to_string(), num(c.cv_mape), num(*wi)]);
        out.line(format!("{:<6} {} cv_mape={} weight={}", c.name, c.hyper, c.cv_mape, wi));
    }
    ecsv.row(&["intercept".to_string(), format!("lambda={}", stacked.meta_lambda), String::new(), num(a)]);
    out.line(format!("meta intercept={a} lambda={}", stacked.meta_lambda));
    out.file("ensemble.csv", ecsv.into_string());

    for (c, path) in stacked.components.iter().zip(&paths) {
        out.models.push(ModelOutcome {
            name: c.name.clone(),
            specification: c.hyper.to_string(),
            test_predictions: c.fit.predict(&x_test)?,
            forecast: path.mean.clone(),
        });
    }
    out.models.push(ModelOutcome {
        name: "ensemble".into(),
        specification: format!("ridge stack (lambda={})", stacked.meta_lambda),
        test_predictions: stacked.predict(&x_test)?,
        forecast: paths.last().expect("ensemble path").mean.clone(),
    });
    Ok(())
}

fn ordered(models: &[ModelOutcome]) -> Vec<&ModelOutcome> {
    let rank = |n: &str| MODEL_ORDER.iter().position(|m| *m == n).unwrap_or(MODEL_ORDER.len());
    let mut v: Vec<&ModelOutcome> = models.iter().collect();
    v.sort_by_key(|m| rank(&m.name));
    v
}

pub fn evaluation_csv(reports: &[EvalReport]) -> String {
    let mut csv = CsvText::new(&["model", "mape", "percent_bias"]);
    for r in reports {
        csv.row(&[r.model.clone(), num(r.mape), num(r.percent_bias)]);
    }
    csv.into_string()
}

fn stage_report(f: &Frame, horizon: usize, models: &[ModelOutcome], out: &mut StageOutput) -> tsecon::Result<Vec<EvalReport>> {
    let models = ordered(models);
    let y = f.target_series();
    let actual = &y.values()[f.split..];
    let reports = models
        .iter()
        .map(|m| evaluate(&m.name, actual, &m.test_predictions))
        .collect::<tsecon::Result<Vec<_>>>()?;
    out.file("evaluation.csv", evaluation_csv(&reports));

    let mut header = vec!["month".to_string(), "actual".into()];
    header.extend(models.iter().map(|m| m.name.clone()));
    let mut pred = CsvText::new(&header);
    for (i, a) in actual.iter().enumerate() {
        let mut row = vec![f.table.date_at(f.split + i).to_string(), num(*a)];
        row.extend(models.iter().map(|m| num(m.test_predictions[i])));
        pred.row(&row);
    }
    out.file("predictions_test.csv", pred.into_string());

    let mut header = vec!["month".to_string()];
    header.extend(models.iter().map(|m| m.name.clone()));
    let mut fc = CsvText::new(&header);
    for s in 0..horizon {
        let mut row = vec![f.forecast_start().add_months(s as i64).to_string()];
        row.extend(models.iter().map(|m| num(m.forecast[s])));
        fc.row(&row);
    }
    out.file("forecasts.csv", fc.into_string());

    out.section("Evaluation on the test window");
    for (m, r) in models.iter().zip(&reports) {
        out.line(format!("{:<11} {:<36} mape={:.6} percent_bias={:.6}", m.name, m.specification, r.mape, r.percent_bias));
    }
    Ok(reports)
}

/// Runs every enabled stage and writes artifacts under `out_dir`.
pub fn run_pipeline(cfg: &PipelineConfig, data: &Dataset, out_dir: &Path) -> CliResult<PipelineOutcome> {
    cfg.validate().map_err(|message| CliError::Config { line: 0, message })?;
    let table = &data.table;
    let target_col = table.index_of(&cfg.target).map_err(|_| CliError::UnknownVariable(cfg.target.clone()))?;
    let mut run = Run {
        cfg,
        data,
        writer: ArtifactWriter::create(out_dir)?,
        diagnostics: String::new(),
        status: Vec::new(),
        models: Vec::new(),
        config_hash: config_hash(cfg),
        created_utc: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
    };
    let n = table.nrows();
    let split = split_point(n, cfg.train_fraction).map_err(|source| CliError::Stage { stage: "split".into(), source })?;

    let orders = run.stage("differencing", true, |out| stage_differencing(cfg, table, out))?.unwrap_or_default();
    let frame = Frame { table, target: cfg.target.clone(), target_col, split, n, orders };
    let t = cfg.toggles;
    run.stage("diagnostics", true, |out| stage_diagnostics(cfg, &frame, out))?;
    run.stage("arima", t.arima, |out| stage_arima(cfg, &frame, out))?;
    run.stage("arimax", t.arimax, |out| stage_arimax(cfg, &frame, out))?;
    run.stage("garch", t.garch, |out| stage_garch(cfg, &frame, out))?;
    run.stage("cointegration", t.cointegration, |out| stage_cointegration(cfg, &frame, out))?;
    run.stage("varx", t.varx, |out| stage_varx(cfg, &frame, out))?;
    run.stage("ml", t.ml, |out| stage_ml(cfg, &frame, out))?;
    let models = run.models.clone();
    let evaluation = run.stage("report", true, |out| stage_report(&frame, cfg.horizon, &models, out))?.unwrap_or_default();
    let manifest = run.manifest(true);
    run.writer.write_manifest(&manifest)?;
    Ok(PipelineOutcome { models: ordered(&models).into_iter().cloned().collect(), evaluation, differencing: frame.orders.clone(), manifest })
}

/// Re-reads `predictions_test.csv` and scores each model column.
pub fn reevaluate(predictions_csv: &str) -> CliResult<Vec<EvalReport>> {
    let bad = |m: String| CliError::MalformedCsv { path: "predictions_test.csv".into(), message: m };
    let mut reader = csv::Reader::from_reader(predictions_csv.as_bytes());
    let header: Vec<String> = reader.headers().map_err(|e| bad(e.to_string()))?.iter().map(String::from).collect();
    if header.len() < 2 || header[1] != "actual" {
        return Err(bad("expected `month,actual,...` header".into()));
    }
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); header.len() - 1];
    for rec in reader.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        for (j, col) in cols.iter_mut().enumerate() {
            col.push(rec[j + 1].parse().map_err(|_| bad(format!("bad number `{}`", &rec[j + 1])))?);
        }
    }
    let actual = cols.remove(0);
    header[2..]
        .iter()
        .zip(&cols)
        .map(|(name, pred)| evaluate(name, &actual, pred).map_err(|source| CliError::Stage { stage: "reevaluate".into(), source }))
        .collect()
}
