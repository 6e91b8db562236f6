//! Python bindings. Series are plain lists of floats; tables are lists of
//! columns with a matching list of names.

use nalgebra::DMatrix;
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use tsecon::arima::{self, ArimaFit, ArimaSpec};
use tsecon::cointegration::{self, JohansenDeterministic};
use tsecon::diagnostics::{self, Deterministic};
use tsecon::garch::{self, GarchFit};
use tsecon::ml::{self, FitOptions, Hyper, PcaModel, RegressorFit, SvrLoss};
use tsecon::varx::{self, LagOrder, VarDeterministic, VarxFit};
use tsecon::{ensemble, series, Table, TimeSeries, YearMonth};

create_exception!(tsecon_py, TsEconError, PyValueError, "Error raised by the tsecon library.");

fn py_err(e: tsecon::Error) -> PyErr {
    TsEconError::new_err(e.to_string())
}

fn month(start: &str) -> PyResult<YearMonth> {
    YearMonth::parse(start).map_err(py_err)
}

fn to_series(values: Vec<f64>, start: &str) -> PyResult<TimeSeries> {
    TimeSeries::new("y", month(start)?, values).map_err(py_err)
}

fn to_table(columns: Vec<Vec<f64>>, names: Vec<String>, start: &str) -> PyResult<Table> {
    Table::new(month(start)?, names, columns).map_err(py_err)
}

fn to_matrix(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let n = rows.len();
    let p = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != p) {
        return Err(TsEconError::new_err("rows have different lengths"));
    }
    Ok(DMatrix::from_fn(n, p, |i, j| rows[i][j]))
}

fn from_matrix(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn deterministic(name: &str) -> PyResult<Deterministic> {
    match name {
        "none" => Ok(Deterministic::None),
        "drift" => Ok(Deterministic::Drift),
        "trend" => Ok(Deterministic::Trend),
        other => Err(TsEconError::new_err(format!("unknown deterministic term `{other}`"))),
    }
}

/// Outcome of a hypothesis test.
#[pyclass(name = "TestReport", frozen, get_all, skip_from_py_object)]
#[derive(Clone)]
pub struct PyTestReport {
    pub test_name: String,
    pub statistic: f64,
    pub p_value: f64,
    pub lags: usize,
    pub reject_at_5pct: bool,
}

impl From<diagnostics::TestReport> for PyTestReport {
    fn from(r: diagnostics::TestReport) -> Self {
        Self {
            test_name: r.test_name,
            statistic: r.statistic,
            p_value: r.p_value,
            lags: r.lags_or_order,
            reject_at_5pct: r.reject_at_5pct,
        }
    }
}

#[pymethods]
impl PyTestReport {
    fn __repr__(&self) -> String {
        format!("TestReport({}, statistic={}, p_value={})", self.test_name, self.statistic, self.p_value)
    }
}

/// `(mape, percent_bias)` of predictions against actual values.
#[pyfunction]
fn evaluate(actual: Vec<f64>, predicted: Vec<f64>) -> PyResult<(f64, f64)> {
    let r = ensemble::evaluate("model", &actual, &predicted).map_err(py_err)?;
    Ok((r.mape, r.percent_bias))
}

/// `d`-th differences.
#[pyfunction]
fn difference(values: Vec<f64>, d: usize) -> Vec<f64> {
    series::diff_values(&values, d)
}

/// Differences then integrates again; returns the reconstructed series.
#[pyfunction]
fn roundtrip(values: Vec<f64>, d: usize) -> PyResult<Vec<f64>> {
    let s = TimeSeries::from_values(values).map_err(py_err)?;
    let diff = series::difference(&s, d).map_err(py_err)?;
    Ok(series::integrate(&diff).map_err(py_err)?.into_values())
}

#[pyfunction]
#[pyo3(signature = (values, deterministic = "drift"))]
fn adf(values: Vec<f64>, deterministic: &str) -> PyResult<PyTestReport> {
    let s = TimeSeries::from_values(values).map_err(py_err)?;
    Ok(diagnostics::adf_test_auto(&s, self::deterministic(deterministic)?).map_err(py_err)?.into())
}

#[pyfunction]
#[pyo3(signature = (residuals, lags, fitted_params = 0))]
fn ljung_box(residuals: Vec<f64>, lags: usize, fitted_params: usize) -> PyResult<PyTestReport> {
    Ok(diagnostics::ljung_box(&residuals, lags, fitted_params).map_err(py_err)?.into())
}

#[pyfunction]
fn arch_lm(residuals: Vec<f64>, q: usize) -> PyResult<PyTestReport> {
    Ok(diagnostics::arch_lm(&residuals, q).map_err(py_err)?.into())
}

#[pyfunction]
fn jarque_bera(residuals: Vec<f64>) -> PyResult<PyTestReport> {
    Ok(diagnostics::jarque_bera(&residuals).map_err(py_err)?.into())
}

/// Number of differences until ADF (with drift) rejects at 5%.
#[pyfunction]
#[pyo3(signature = (values, max_rounds = 2))]
fn differencing_order(values: Vec<f64>, max_rounds: usize) -> PyResult<usize> {
    let s = TimeSeries::from_values(values).map_err(py_err)?;
    Ok(diagnostics::differencing_order(&s, Deterministic::Drift, max_rounds).map_err(py_err)?.order)
}

#[pyfunction]
fn acf(values: Vec<f64>, max_lag: usize) -> PyResult<Vec<f64>> {
    series::autocorrelations(&values, max_lag).map_err(py_err)
}

#[pyfunction]
fn pacf(values: Vec<f64>, max_lag: usize) -> PyResult<Vec<f64>> {
    series::partial_autocorrelations(&values, max_lag).map_err(py_err)
}

/// Fitted ARIMA(p, d, q) model.
#[pyclass(name = "Arima", frozen)]
pub struct PyArima(ArimaFit);

#[pymethods]
impl PyArima {
    #[getter]
    fn order(&self) -> (usize, usize, usize) {
        (self.0.spec.p, self.0.spec.d, self.0.spec.q)
    }
    #[getter]
    fn ar(&self) -> Vec<f64> {
        self.0.ar_coeffs.clone()
    }
    #[getter]
    fn ma(&self) -> Vec<f64> {
        self.0.ma_coeffs.clone()
    }
    #[getter]
    fn intercept(&self) -> f64 {
        self.0.intercept
    }
    #[getter]
    fn aic(&self) -> f64 {
        self.0.aic
    }
    #[getter]
    fn residuals(&self) -> Vec<f64> {
        self.0.residuals.clone()
    }
    /// Mean forecasts in levels.
    fn forecast(&self, h: usize) -> PyResult<Vec<f64>> {
        Ok(arima::forecast_arima(&self.0, h, None).map_err(py_err)?.mean)
    }
    fn __repr__(&self) -> String {
        format!("Arima{:?}", self.order())
    }
}

#[pyfunction]
#[pyo3(signature = (values, p, d, q, start = "2000-01"))]
fn fit_arima(values: Vec<f64>, p: usize, d: usize, q: usize, start: &str) -> PyResult<PyArima> {
    let s = to_series(values, start)?;
    Ok(PyArima(arima::fit_arima(&s, None, ArimaSpec::new(p, d, q)).map_err(py_err)?))
}

/// AIC search over `p ≤ p_max`, `q ≤ q_max` at fixed `d`.
#[pyfunction]
#[pyo3(signature = (values, p_max, d, q_max, start = "2000-01"))]
fn select_arima(values: Vec<f64>, p_max: usize, d: usize, q_max: usize, start: &str) -> PyResult<PyArima> {
    let s = to_series(values, start)?;
    Ok(PyArima(arima::select_order(&s, None, p_max, d, q_max).map_err(py_err)?.1))
}

/// Fitted ARMA(m, n)-GARCH(1, 1) model.
#[pyclass(name = "Garch", frozen)]
pub struct PyGarch(GarchFit);

#[pymethods]
impl PyGarch {
    #[getter]
    fn alpha0(&self) -> f64 {
        self.0.alpha0
    }
    #[getter]
    fn alpha1(&self) -> f64 {
        self.0.alpha1
    }
    #[getter]
    fn beta1(&self) -> f64 {
        self.0.beta1
    }
    #[getter]
    fn persistence(&self) -> f64 {
        self.0.persistence
    }
    #[getter]
    fn mu(&self) -> f64 {
        self.0.mu
    }
    #[getter]
    fn conditional_variance(&self) -> Vec<f64> {
        self.0.cond_var.clone()
    }
    /// `(mean, variance)` paths.
    fn forecast(&self, h: usize) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let f = garch::forecast_garch(&self.0, h).map_err(py_err)?;
        Ok((f.mean, f.variance.unwrap_or_default()))
    }
}

#[pyfunction]
#[pyo3(signature = (values, m = 0, n = 0, start = "2000-01"))]
fn fit_garch(values: Vec<f64>, m: usize, n: usize, start: &str) -> PyResult<PyGarch> {
    let s = to_series(values, start)?;
    Ok(PyGarch(garch::fit_arma_garch(&s, (m, n)).map_err(py_err)?))
}

/// `(slope, intercept, adf_report, cointegrated)` of the static regression of `y` on `x`.
#[pyfunction]
fn engle_granger(y: Vec<f64>, x: Vec<f64>) -> PyResult<(f64, f64, PyTestReport, bool)> {
    let (eg, _) = cointegration::engle_granger(&to_series(y, "2000-01")?, &to_series(x, "2000-01")?).map_err(py_err)?;
    Ok((eg.slope, eg.intercept, eg.adf_on_residuals.into(), eg.cointegrated))
}

/// `(eigenvalues, trace statistics, selected rank)` with an unrestricted constant.
#[pyfunction]
fn johansen(columns: Vec<Vec<f64>>, names: Vec<String>, lags: usize) -> PyResult<(Vec<f64>, Vec<f64>, usize)> {
    let t = to_table(columns, names, "2000-01")?;
    let r = cointegration::johansen_trace(&t, lags, JohansenDeterministic::Constant).map_err(py_err)?;
    Ok((r.eigenvalues, r.trace_stats, r.selected_rank))
}

/// Fitted VAR(p) with a constant.
#[pyclass(name = "Var", frozen)]
pub struct PyVar(VarxFit);

#[pymethods]
impl PyVar {
    #[getter]
    fn p(&self) -> usize {
        self.0.p
    }
    #[getter]
    fn aic(&self) -> f64 {
        self.0.aic
    }
    #[getter]
    fn intercept(&self) -> Vec<f64> {
        self.0.intercept.clone()
    }
    /// Lag matrices as nested row lists.
    #[getter]
    fn lag_matrices(&self) -> Vec<Vec<Vec<f64>>> {
        self.0.lag_matrices.iter().map(from_matrix).collect()
    }
    #[getter]
    fn sigma_u(&self) -> Vec<Vec<f64>> {
        from_matrix(&self.0.sigma_u)
    }
    /// One path per variable.
    fn forecast(&self, h: usize) -> PyResult<Vec<Vec<f64>>> {
        Ok(varx::forecast_varx(&self.0, h).map_err(py_err)?.into_iter().map(|p| p.mean).collect())
    }
    /// Orthogonalised responses for `h = 0..=horizon`, each `k × k`.
    fn irf(&self, horizon: usize) -> PyResult<Vec<Vec<Vec<f64>>>> {
        Ok(varx::orthogonal_irf(&self.0, horizon).map_err(py_err)?.iter().map(from_matrix).collect())
    }
    /// Block test that `cause` does not Granger-cause the other variables.
    fn granger(&self, cause: &str) -> PyResult<PyTestReport> {
        Ok(varx::granger_causality(&self.0, cause).map_err(py_err)?.into())
    }
}

/// `p = None` selects the lag order by AIC up to `max_lag`.
#[pyfunction]
#[pyo3(signature = (columns, names, p = None, max_lag = 6))]
fn fit_var(columns: Vec<Vec<f64>>, names: Vec<String>, p: Option<usize>, max_lag: usize) -> PyResult<PyVar> {
    let t = to_table(columns, names, "2000-01")?;
    let order = match p {
        Some(p) => LagOrder::Fixed(p),
        None => LagOrder::Auto { max: max_lag },
    };
    Ok(PyVar(varx::fit_varx(&t, order, VarDeterministic::Const).map_err(py_err)?))
}

/// PCA on the correlation matrix of the rows.
#[pyclass(name = "Pca", frozen)]
pub struct PyPca(PcaModel);

#[pymethods]
impl PyPca {
    #[getter]
    fn eigenvalues(&self) -> Vec<f64> {
        self.0.eigenvalues.clone()
    }
    #[getter]
    fn variance_ratio(&self) -> Vec<f64> {
        self.0.variance_ratio()
    }
    /// Loadings as nested rows (variable × component).
    #[getter]
    fn loadings(&self) -> Vec<Vec<f64>> {
        from_matrix(&self.0.eigenvectors)
    }
    fn project(&self, rows: Vec<Vec<f64>>, m: usize) -> PyResult<Vec<Vec<f64>>> {
        Ok(from_matrix(&self.0.project(&to_matrix(&rows)?, m).map_err(py_err)?))
    }
}

#[pyfunction]
fn fit_pca(rows: Vec<Vec<f64>>) -> PyResult<PyPca> {
    let x = to_matrix(&rows)?;
    let names = (0..x.ncols()).map(|j| format!("x{j}")).collect::<Vec<_>>();
    Ok(PyPca(ml::fit_pca(&x, &names).map_err(py_err)?))
}

/// One of the four regressors: `knn`, `ridge`, `svr` or `ann`.
#[pyclass(name = "Regressor", frozen)]
pub struct PyRegressor(RegressorFit);

#[pymethods]
impl PyRegressor {
    #[new]
    #[pyo3(signature = (kind, x, y, k = 5, lam = 1.0, c = 8.0, loss = "l2", epsilon = 0.1, hidden = 3, decay = 0.1, seed = 0, scale = true))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        kind: &str,
        x: Vec<Vec<f64>>,
        y: Vec<f64>,
        k: usize,
        lam: f64,
        c: f64,
        loss: &str,
        epsilon: f64,
        hidden: usize,
        decay: f64,
        seed: u64,
        scale: bool,
    ) -> PyResult<Self> {
        let hyper = match kind {
            "knn" => Hyper::Knn { k },
            "ridge" => Hyper::Ridge { lambda: lam },
            "svr" => {
                let loss = match loss {
                    "l1" => SvrLoss::L1,
                    "l2" => SvrLoss::L2,
                    other => return Err(TsEconError::new_err(format!("unknown SVR loss `{other}`"))),
                };
                Hyper::Svr { c, loss, epsilon }
            }
            "ann" => Hyper::Ann { hidden, decay },
            other => return Err(TsEconError::new_err(format!("unknown regressor `{other}`"))),
        };
        let opts = FitOptions { scale_features: scale, seed };
        Ok(Self(ml::fit_regressor(&hyper, &to_matrix(&x)?, &y, &opts).map_err(py_err)?))
    }

    #[getter]
    fn hyperparameters(&self) -> String {
        self.0.hyper.to_string()
    }

    fn predict(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        self.0.predict(&to_matrix(&x)?).map_err(py_err)
    }
}

/// Rolling-origin folds as `((train_start, train_end), (valid_start, valid_end))`.
#[pyfunction]
fn cv_slices(n: usize, folds: usize) -> PyResult<Vec<((usize, usize), (usize, usize))>> {
    let s = ensemble::make_cv_slices(n, folds).map_err(py_err)?;
    Ok(s.folds()
        .iter()
        .map(|f| ((f.train.start, f.train.end), (f.validation.start, f.validation.end)))
        .collect())
}

#[pymodule]
pub fn tsecon_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("TsEconError", m.py().get_type::<TsEconError>())?;
    m.add_class::<PyTestReport>()?;
    m.add_class::<PyArima>()?;
    m.add_class::<PyGarch>()?;
    m.add_class::<PyVar>()?;
    m.add_class::<PyPca>()?;
    m.add_class::<PyRegressor>()?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(difference, m)?)?;
    m.add_function(wrap_pyfunction!(roundtrip, m)?)?;
    m.add_function(wrap_pyfunction!(adf, m)?)?;
    m.add_function(wrap_pyfunction!(ljung_box, m)?)?;
    m.add_function(wrap_pyfunction!(arch_lm, m)?)?;
    m.add_function(wrap_pyfunction!(jarque_bera, m)?)?;
    m.add_function(wrap_pyfunction!(differencing_order, m)?)?;
    m.add_function(wrap_pyfunction!(acf, m)?)?;
    m.add_function(wrap_pyfunction!(pacf, m)?)?;
    m.add_function(wrap_pyfunction!(fit_arima, m)?)?;
    m.add_function(wrap_pyfunction!(select_arima, m)?)?;
    m.add_function(wrap_pyfunction!(fit_garch, m)?)?;
    m.add_function(wrap_pyfunction!(engle_granger, m)?)?;
    m.add_function(wrap_pyfunction!(johansen, m)?)?;
    m.add_function(wrap_pyfunction!(fit_var, m)?)?;
    m.add_function(wrap_pyfunction!(fit_pca, m)?)?;
    m.add_function(wrap_pyfunction!(cv_slices, m)?)?;
    Ok(())
}
