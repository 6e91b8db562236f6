//! Rolling-origin cross-validation, ridge stacking of component regressors,
//! recursive multi-step forecasting, and MAPE / percent-bias evaluation.

use std::ops::Range;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::arima::{forecast_arima, select_order};
use crate::diagnostics::{differencing_order, Deterministic};
use crate::error::{Error, Result};
use crate::forecast::ForecastPath;
use crate::ml::{fit_regressor, grid_search, ridge_lambda_grid, FitOptions, Hyper, RegressorFit};
use crate::series::{TimeSeries, YearMonth};

/// Smallest initial training window accepted by `make_cv_slices`.
pub const MIN_INITIAL_WINDOW: usize = 10;

pub const DEFAULT_FOLDS: usize = 18;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Range<usize>,
    pub validation: Range<usize>,
}

/// Growing-window folds. Validation windows are consecutive, equally wide and
/// cover the tail of the sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CvSlices {
    n: usize,
    width: usize,
    folds: Vec<Fold>,
}

impl CvSlices {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn folds(&self) -> &[Fold] {
        &self.folds
    }

    pub fn initial_window(&self) -> usize {
        self.folds[0].train.end
    }

    /// All validation indices in order.
    pub fn validation_indices(&self) -> Range<usize> {
        self.initial_window()..self.folds.last().map_or(0, |f| f.validation.end)
    }
}

/// Validation width `w = ⌊n/(folds+4)⌋`; fold `f` trains on `[0, n − folds·w + f·w)`
/// and validates on the next `w` rows.
pub fn make_cv_slices(n: usize, folds: usize) -> Result<CvSlices> {
    if folds == 0 {
        return Err(Error::InvalidParameter("at least one fold is required".into()));
    }
    let width = n / (folds + 4);
    if width < 2 || n < folds * width + MIN_INITIAL_WINDOW {
        return Err(Error::InsufficientData(format!("{n} rows cannot hold {folds} folds")));
    }
    let init = n - folds * width;
    let folds = (0..folds)
        .map(|f| {
            let end = init + f * width;
            Fold { train: 0..end, validation: end..end + width }
        })
        .collect();
    Ok(CvSlices { n, width, folds })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub model: String,
    /// Mean absolute percentage error as a fraction.
    pub mape: f64,
    /// Mean of `(y − ŷ)/y`, in percent.
    pub percent_bias: f64,
}

pub fn evaluate(model: &str, actual: &[f64], predicted: &[f64]) -> Result<EvalReport> {
    if actual.len() != predicted.len() || actual.is_empty() {
        return Err(Error::ShapeMismatch(format!("{} actual values, {} predictions", actual.len(), predicted.len())));
    }
    let mut ape = 0.0;
    let mut pb = 0.0;
    for (i, (&y, &f)) in actual.iter().zip(predicted).enumerate() {
        if y == 0.0 {
            return Err(Error::DivisionByZero { index: i });
        }
        if !y.is_finite() || !f.is_finite() {
            return Err(Error::NonFinite(format!("evaluation input at index {i}")));
        }
        ape += (y - f).abs() / y.abs();
        pb += (y - f) / y;
    }
    let n = actual.len() as f64;
    Ok(EvalReport { model: model.to_string(), mape: ape / n, percent_bias: pb / n * 100.0 })
}

/// Anything that maps one feature row to a prediction.
pub trait Predictor: Sync {
    fn n_features(&self) -> usize;
    fn predict_row(&self, row: &[f64]) -> Result<f64>;
}

impl Predictor for RegressorFit {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_row(&self, row: &[f64]) -> Result<f64> {
        RegressorFit::predict_row(self, row)
    }
}

#[derive(Debug, Clone)]
pub struct ComponentSpec {
    pub name: String,
    pub grid: Vec<Hyper>,
}

impl ComponentSpec {
    pub fn new(name: impl Into<String>, grid: Vec<Hyper>) -> Self {
        Self { name: name.into(), grid }
    }
}

#[derive(Debug, Clone)]
pub struct StackOptions {
    pub fit: FitOptions,
    pub meta_lambdas: Vec<f64>,
    /// Folds of the inner search for the meta penalty.
    pub meta_folds: usize,
}

impl Default for StackOptions {
    fn default() -> Self {
        Self { fit: FitOptions::default(), meta_lambdas: ridge_lambda_grid(), meta_folds: 5 }
    }
}

#[derive(Debug, Clone)]
pub struct StackComponent {
    pub name: String,
    pub hyper: Hyper,
    pub cv_mape: f64,
    /// Refit on the full training sample.
    pub fit: RegressorFit,
}

#[derive(Debug, Clone)]
pub struct StackedModel {
    pub components: Vec<StackComponent>,
    /// Ridge over component predictions, in component order.
    pub meta: RegressorFit,
    pub meta_lambda: f64,
    /// Out-of-fold predictions: one row per validation index, one column per component.
    pub oof: DMatrix<f64>,
    pub oof_rows: Range<usize>,
}

impl StackedModel {
    pub fn component_predictions(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let cols = self.components.iter().map(|c| c.fit.predict(x)).collect::<Result<Vec<_>>>()?;
        Ok(DMatrix::from_fn(x.nrows(), cols.len(), |i, j| cols[j][i]))
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        self.meta.predict(&self.component_predictions(x)?)
    }

    /// `(intercept, weights)` of the meta-learner.
    pub fn meta_weights(&self) -> (f64, &[f64]) {
        self.meta.linear_coefficients().expect("meta-learner is ridge")
    }
}

impl Predictor for StackedModel {
    fn n_features(&self) -> usize {
        self.components[0].fit.n_features
    }

    fn predict_row(&self, row: &[f64]) -> Result<f64> {
        Ok(self.predict(&DMatrix::from_row_slice(1, row.len(), row))?[0])
    }
}

/// Out-of-fold predictions of one hyperparameter setting.
pub fn out_of_fold(hyper: &Hyper, x: &DMatrix<f64>, y: &[f64], slices: &CvSlices, opts: &FitOptions) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(slices.validation_indices().len());
    for fold in slices.folds() {
        let xt = x.rows(fold.train.start, fold.train.len()).into_owned();
        let xv = x.rows(fold.validation.start, fold.validation.len()).into_owned();
        out.extend(fit_regressor(hyper, &xt, &y[fold.train.clone()], opts)?.predict(&xv)?);
    }
    Ok(out)
}

/// Ridge meta-learner with its penalty chosen by an inner rolling search.
pub fn fit_meta(oof: &DMatrix<f64>, y: &[f64], lambdas: &[f64], folds: usize) -> Result<(f64, RegressorFit)> {
    let grid: Vec<Hyper> = lambdas.iter().map(|&lambda| Hyper::Ridge { lambda }).collect();
    let opts = FitOptions { scale_features: false, seed: 0 };
    let inner = make_cv_slices(y.len(), folds)?;
    let r = grid_search(&grid, oof, y, &inner, &opts)?;
    let Hyper::Ridge { lambda } = r.best else { unreachable!("ridge grid") };
    Ok((lambda, r.fit))
}

pub fn stack_fit(x: &DMatrix<f64>, y: &[f64], slices: &CvSlices, components: &[ComponentSpec], opts: &StackOptions) -> Result<StackedModel> {
    if components.is_empty() {
        return Err(Error::InvalidParameter("stacking needs at least one component".into()));
    }
    if x.nrows() != y.len() || slices.n() != y.len() {
        return Err(Error::ShapeMismatch(format!("{} rows, {} targets, slices over {}", x.nrows(), y.len(), slices.n())));
    }
    let tuned: Vec<(StackComponent, Vec<f64>)> = components
        .par_iter()
        .map(|spec| {
            let named = |e: Error| Error::OptimizerFailed(format!("component {}: {e}", spec.name));
            let g = grid_search(&spec.grid, x, y, slices, &opts.fit).map_err(named)?;
            let oof = out_of_fold(&g.best, x, y, slices, &opts.fit).map_err(named)?;
            Ok((StackComponent { name: spec.name.clone(), hyper: g.best, cv_mape: g.best_score, fit: g.fit }, oof))
        })
        .collect::<Result<_>>()?;
    let rows = slices.validation_indices();
    let oof = DMatrix::from_fn(rows.len(), tuned.len(), |i, j| tuned[j].1[i]);
    let (meta_lambda, meta) = fit_meta(&oof, &y[rows.clone()], &opts.meta_lambdas, opts.meta_folds)
        .map_err(|e| Error::OptimizerFailed(format!("meta-learner: {e}")))?;
    Ok(StackedModel {
        components: tuned.into_iter().map(|(c, _)| c).collect(),
        meta,
        meta_lambda,
        oof,
        oof_rows: rows,
    })
}

/// One-step extension of a single feature's history.
pub trait FeatureExtender: Sync {
    fn extend(&self, history: &[f64]) -> Result<f64>;
}

/// Repeats the last value.
#[derive(Debug, Clone, Copy, Default)]
pub struct Persistence;

impl FeatureExtender for Persistence {
    fn extend(&self, history: &[f64]) -> Result<f64> {
        history.last().copied().ok_or_else(|| Error::InsufficientData("empty feature history".into()))
    }
}

/// Univariate ARIMA with d chosen by repeated ADF tests (drift) and (p, q)
/// by AIC, refitted on every call.
#[derive(Debug, Clone, Copy)]
pub struct ArimaExtender {
    pub p_max: usize,
    pub q_max: usize,
    pub max_d: usize,
}

impl Default for ArimaExtender {
    fn default() -> Self {
        Self { p_max: 3, q_max: 3, max_d: 2 }
    }
}

impl FeatureExtender for ArimaExtender {
    fn extend(&self, history: &[f64]) -> Result<f64> {
        let s = TimeSeries::from_values(history.to_vec())?;
        let d = differencing_order(&s, Deterministic::Drift, self.max_d)?.order;
        let (_, fit) = select_order(&s, None, self.p_max, d, self.q_max)?;
        Ok(forecast_arima(&fit, 1, None)?.mean[0])
    }
}

/// Iterates: extend every feature by one step, predict the target from the
/// new feature row, append the row to the working history.
pub fn recursive_forecast(
    model: &dyn Predictor,
    features: &DMatrix<f64>,
    extenders: &[&dyn FeatureExtender],
    h: usize,
    target: &str,
    first: YearMonth,
) -> Result<ForecastPath> {
    Ok(recursive_forecast_many(&[model], features, extenders, h, target, first)?.remove(0))
}

/// The recursion for several models that share one feature history. Features
/// do not depend on the predicted target, so each step extends them once.
pub fn recursive_forecast_many(
    models: &[&dyn Predictor],
    features: &DMatrix<f64>,
    extenders: &[&dyn FeatureExtender],
    h: usize,
    target: &str,
    first: YearMonth,
) -> Result<Vec<ForecastPath>> {
    if h == 0 {
        return Err(Error::InvalidParameter("forecast horizon must be at least 1".into()));
    }
    let p = features.ncols();
    if extenders.len() != p || models.iter().any(|m| m.n_features() != p) {
        return Err(Error::ShapeMismatch(format!("{p} feature columns, {} extenders", extenders.len())));
    }
    let mut history: Vec<Vec<f64>> = features.column_iter().map(|c| c.iter().copied().collect()).collect();
    let mut means = vec![Vec::with_capacity(h); models.len()];
    for step in 1..=h {
        let wrap = |e: Error| Error::ForecastStep { step, source: Box::new(e) };
        let row = history
            .par_iter()
            .zip(extenders.par_iter())
            .map(|(col, ext)| ext.extend(col))
            .collect::<Result<Vec<f64>>>()
            .map_err(wrap)?;
        for (m, out) in models.iter().zip(means.iter_mut()) {
            out.push(m.predict_row(&row).map_err(wrap)?);
        }
        for (col, v) in history.iter_mut().zip(row) {
            col.push(v);
        }
    }
    Ok(means.into_iter().map(|mean| ForecastPath::new(target, first, mean, None)).collect())
}
