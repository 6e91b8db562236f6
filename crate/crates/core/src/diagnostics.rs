//! Hypothesis tests: augmented Dickey-Fuller, Ljung-Box, Engle's ARCH-LM and
//! Jarque-Bera, plus the repeated-ADF search for a differencing order.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::dist::chi2_sf;
use crate::error::{Error, Result};
use crate::linalg::ols;
use crate::series::{autocorrelations, diff_values, TimeSeries};

/// Outcome of one hypothesis test.
#[derive(Debug, Clone, PartialEq)]
pub struct TestReport {
    pub test_name: String,
    pub statistic: f64,
    pub p_value: f64,
    pub lags_or_order: usize,
    pub reject_at_5pct: bool,
}

impl TestReport {
    pub fn new(test_name: impl Into<String>, statistic: f64, p_value: f64, lags_or_order: usize) -> Self {
        let p_value = if p_value.is_nan() { 1.0 } else { p_value.clamp(0.0, 1.0) };
        Self {
            test_name: test_name.into(),
            statistic,
            p_value,
            lags_or_order,
            reject_at_5pct: p_value < 0.05,
        }
    }

    pub fn rejects_at(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

impl fmt::Display for TestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<32} stat={:>14.6} p={:<12.6e} lags={:<3} {}",
            self.test_name,
            self.statistic,
            self.p_value,
            self.lags_or_order,
            if self.reject_at_5pct { "reject@5%" } else { "no-reject@5%" }
        )
    }
}

/// Deterministic terms in the Dickey-Fuller regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Deterministic {
    None,
    Drift,
    Trend,
}

impl Deterministic {
    fn count(self) -> usize {
        match self {
            Deterministic::None => 0,
            Deterministic::Drift => 1,
            Deterministic::Trend => 2,
        }
    }
}

/// Dickey-Fuller τ quantiles (Fuller's tables), by sample size.
mod df_table {
    pub const PROBS: [f64; 8] = [0.01, 0.025, 0.05, 0.10, 0.90, 0.95, 0.975, 0.99];
    /// `1/T` for each row; the last row is the asymptotic one.
    pub const INV_T: [f64; 6] = [1.0 / 25.0, 1.0 / 50.0, 1.0 / 100.0, 1.0 / 250.0, 1.0 / 500.0, 0.0];

    pub const NONE: [[f64; 8]; 6] = [
        [-2.66, -2.26, -1.95, -1.60, 0.92, 1.33, 1.70, 2.16],
        [-2.62, -2.25, -1.95, -1.61, 0.91, 1.31, 1.66, 2.08],
        [-2.60, -2.24, -1.95, -1.61, 0.90, 1.29, 1.64, 2.03],
        [-2.58, -2.23, -1.95, -1.62, 0.89, 1.29, 1.63, 2.01],
        [-2.58, -2.23, -1.95, -1.62, 0.89, 1.28, 1.62, 2.00],
        [-2.58, -2.23, -1.95, -1.62, 0.89, 1.28, 1.62, 2.00],
    ];
    pub const DRIFT: [[f64; 8]; 6] = [
        [-3.75, -3.33, -3.00, -2.63, -0.37, 0.00, 0.34, 0.72],
        [-3.58, -3.22, -2.93, -2.60, -0.40, -0.03, 0.29, 0.66],
        [-3.51, -3.17, -2.89, -2.58, -0.42, -0.05, 0.26, 0.63],
        [-3.46, -3.14, -2.88, -2.57, -0.42, -0.06, 0.24, 0.62],
        [-3.44, -3.13, -2.87, -2.57, -0.43, -0.07, 0.24, 0.61],
        [-3.43, -3.12, -2.86, -2.57, -0.44, -0.07, 0.23, 0.60],
    ];
    pub const TREND: [[f64; 8]; 6] = [
        [-4.38, -3.95, -3.60, -3.24, -1.14, -0.80, -0.50, -0.15],
        [-4.15, -3.80, -3.50, -3.18, -1.19, -0.87, -0.58, -0.24],
        [-4.04, -3.73, -3.45, -3.15, -1.22, -0.90, -0.62, -0.28],
        [-3.99, -3.69, -3.43, -3.13, -1.23, -0.92, -0.64, -0.31],
        [-3.98, -3.68, -3.42, -3.13, -1.24, -0.93, -0.65, -0.32],
        [-3.96, -3.66, -3.41, -3.12, -1.25, -0.94, -0.66, -0.33],
    ];
}

/// Quantiles of a tabulated statistic at sample size `nobs`, interpolated
/// linearly in `1/T`.
pub(crate) fn quantiles_at(table: &[[f64; 8]; 6], inv_t: &[f64; 6], nobs: usize) -> [f64; 8] {
    let x = 1.0 / nobs.max(1) as f64;
    let mut out = [0.0; 8];
    if x >= inv_t[0] {
        return table[0];
    }
    for r in 0..inv_t.len() - 1 {
        let (a, b) = (inv_t[r], inv_t[r + 1]);
        if x <= a && x >= b {
            let w = if a > b { (x - b) / (a - b) } else { 0.0 };
            for j in 0..8 {
                out[j] = w * table[r][j] + (1.0 - w) * table[r + 1][j];
            }
            return out;
        }
    }
    table[table.len() - 1]
}

/// Left-tail probability of `stat` by linear interpolation between tabulated
/// quantiles, extrapolated along the outer segments and clamped to
/// `[0.001, 0.999]`.
pub(crate) fn interpolate_p(stat: f64, quantiles: &[f64], probs: &[f64]) -> f64 {
    let n = quantiles.len();
    let seg = if stat <= quantiles[0] {
        0
    } else if stat >= quantiles[n - 1] {
        n - 2
    } else {
        (0..n - 1).find(|&i| stat <= quantiles[i + 1]).unwrap()
    };
    let (q0, q1) = (quantiles[seg], quantiles[seg + 1]);
    let (p0, p1) = (probs[seg], probs[seg + 1]);
    let p = p0 + (stat - q0) * (p1 - p0) / (q1 - q0);
    p.clamp(0.001, 0.999)
}

/// Dickey-Fuller critical values `(1%, 5%, 10%)` for the given case and size.
pub fn df_critical_values(deterministic: Deterministic, nobs: usize) -> [f64; 3] {
    let q = quantiles_at(df_table_for(deterministic), &df_table::INV_T, nobs);
    [q[0], q[2], q[3]]
}

fn df_table_for(deterministic: Deterministic) -> &'static [[f64; 8]; 6] {
    match deterministic {
        Deterministic::None => &df_table::NONE,
        Deterministic::Drift => &df_table::DRIFT,
        Deterministic::Trend => &df_table::TREND,
    }
}

/// Approximate left-tail p-value of a Dickey-Fuller τ statistic.
pub fn df_p_value(stat: f64, deterministic: Deterministic, nobs: usize) -> f64 {
    let q = quantiles_at(df_table_for(deterministic), &df_table::INV_T, nobs);
    interpolate_p(stat, &q, &df_table::PROBS)
}

/// Detailed ADF regression output.
#[derive(Debug, Clone)]
pub struct AdfResult {
    pub statistic: f64,
    pub lags: usize,
    pub nobs: usize,
    pub p_value: f64,
    pub critical_values: [f64; 3],
    pub deterministic: Deterministic,
}

/// `⌊12·(n/100)^¼⌋`, the customary upper bound for the ADF lag search.
pub fn default_adf_max_lag(n: usize) -> usize {
    (12.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize
}

/// ADF regression on observations `t = first..n−1` (0-based in levels).
fn adf_regression(y: &[f64], lags: usize, first: usize, det: Deterministic) -> Result<(f64, f64, usize)> {
    let n = y.len();
    let rows = n - first;
    let ncols = 1 + lags + det.count();
    let mut x = DMatrix::zeros(rows, ncols);
    let mut dep = DVector::zeros(rows);
    for (r, t) in (first..n).enumerate() {
        dep[r] = y[t] - y[t - 1];
        x[(r, 0)] = y[t - 1];
        for i in 1..=lags {
            x[(r, i)] = y[t - i] - y[t - i - 1];
        }
        match det {
            Deterministic::None => {}
            Deterministic::Drift => x[(r, lags + 1)] = 1.0,
            Deterministic::Trend => {
                x[(r, lags + 1)] = 1.0;
                x[(r, lags + 2)] = t as f64;
            }
        }
    }
    let fit = ols(&x, &dep)?;
    let tstat = fit.coefficients[0] / fit.std_errors()[0];
    let aic = rows as f64 * (fit.ssr / rows as f64).ln() + 2.0 * ncols as f64;
    Ok((tstat, aic, rows))
}

/// Full ADF computation. With `select_lag`, the lag is chosen by AIC over
/// `0..=max_lag` on a common sample, then the regression is re-run on the
/// largest sample available for that lag.
pub fn adf(y: &[f64], max_lag: usize, deterministic: Deterministic, select_lag: bool) -> Result<AdfResult> {
    if y.len() < max_lag + 10 {
        return Err(Error::InsufficientData(format!(
            "ADF with {max_lag} lags needs at least {} observations, got {}",
            max_lag + 10,
            y.len()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("ADF input".into()));
    }
    let lags = if select_lag && max_lag > 0 {
        let mut best = (f64::INFINITY, 0);
        for k in 0..=max_lag {
            let (_, aic, _) = adf_regression(y, k, max_lag + 1, deterministic)?;
            if aic < best.0 {
                best = (aic, k);
            }
        }
        best.1
    } else {
        max_lag
    };
    let (statistic, _, nobs) = adf_regression(y, lags, lags + 1, deterministic)?;
    if !statistic.is_finite() {
        return Err(Error::SingularDesign("ADF t-ratio is not finite".into()));
    }
    Ok(AdfResult {
        statistic,
        lags,
        nobs,
        p_value: df_p_value(statistic, deterministic, nobs),
        critical_values: df_critical_values(deterministic, nobs),
        deterministic,
    })
}

/// Augmented Dickey-Fuller unit-root test with AIC lag selection up to
/// `max_lag`. The null is a unit root; small p-values indicate stationarity.
pub fn adf_test(series: &TimeSeries, max_lag: usize, deterministic: Deterministic) -> Result<TestReport> {
    let r = adf(series.values(), max_lag, deterministic, true)?;
    Ok(TestReport::new("ADF", r.statistic, r.p_value, r.lags))
}

/// ADF with the default lag bound, shrunk as needed for short series.
pub fn adf_test_auto(series: &TimeSeries, deterministic: Deterministic) -> Result<TestReport> {
    let n = series.len();
    let max_lag = default_adf_max_lag(n).min(n.saturating_sub(10 + deterministic.count() + 2));
    adf_test(series, max_lag, deterministic)
}

pub(crate) fn ljung_box_statistic(rho: &[f64], n: usize, lags: usize) -> f64 {
    let nf = n as f64;
    nf * (nf + 2.0) * (1..=lags).map(|k| rho[k] * rho[k] / (nf - k as f64)).sum::<f64>()
}

/// Ljung-Box portmanteau test on residual autocorrelations up to `lags`,
/// with `lags − fitted_params` degrees of freedom.
pub fn ljung_box(residuals: &[f64], lags: usize, fitted_params: usize) -> Result<TestReport> {
    if lags <= fitted_params {
        return Err(Error::InvalidDof { lags, fitted: fitted_params });
    }
    if residuals.len() <= lags {
        return Err(Error::InsufficientData(format!(
            "{} residuals for {lags} lags",
            residuals.len()
        )));
    }
    let rho = autocorrelations(residuals, lags)?;
    let q = ljung_box_statistic(&rho, residuals.len(), lags);
    let p = chi2_sf(q, (lags - fitted_params) as f64);
    Ok(TestReport::new(format!("Ljung-Box Q({lags})"), q, p, lags))
}

/// Engle's ARCH-LM test: `T·R²` from regressing `ε²_t` on `q` of its lags.
pub fn arch_lm(residuals: &[f64], q: usize) -> Result<TestReport> {
    let n = residuals.len();
    if q == 0 || n <= q + 10 {
        return Err(Error::InsufficientData(format!(
            "ARCH-LM({q}) needs more than {} residuals, got {n}",
            q + 10
        )));
    }
    let e2: Vec<f64> = residuals.iter().map(|e| e * e).collect();
    let rows = n - q;
    let mut x = DMatrix::zeros(rows, q + 1);
    let mut y = DVector::zeros(rows);
    for (r, t) in (q..n).enumerate() {
        y[r] = e2[t];
        x[(r, 0)] = 1.0;
        for i in 1..=q {
            x[(r, i)] = e2[t - i];
        }
    }
    let fit = ols(&x, &y)?;
    if !(fit.tss > 0.0) {
        return Err(Error::SingularDesign("squared residuals are constant".into()));
    }
    let stat = rows as f64 * fit.r_squared();
    Ok(TestReport::new(format!("ARCH-LM({q})"), stat, chi2_sf(stat, q as f64), q))
}

/// Jarque-Bera normality test from sample skewness and kurtosis.
pub fn jarque_bera(residuals: &[f64]) -> Result<TestReport> {
    let n = residuals.len();
    if n < 8 {
        return Err(Error::InsufficientData(format!("Jarque-Bera needs 8 values, got {n}")));
    }
    let nf = n as f64;
    let mean = residuals.iter().sum::<f64>() / nf;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &e in residuals {
        let d = e - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= nf;
    m3 /= nf;
    m4 /= nf;
    if !(m2 > 0.0) {
        return Err(Error::DegenerateSeries("zero variance".into()));
    }
    let skew = m3 / m2.powf(1.5);
    let kurt = m4 / (m2 * m2);
    let jb = nf / 6.0 * (skew * skew + (kurt - 3.0).powi(2) / 4.0);
    Ok(TestReport::new("Jarque-Bera", jb, chi2_sf(jb, 2.0), 2))
}

/// Result of the repeated-ADF differencing search.
#[derive(Debug, Clone)]
pub struct DifferencingOrder {
    pub order: usize,
    /// One ADF report per tested level, starting with the undifferenced series.
    pub reports: Vec<TestReport>,
    /// True when the last tested level still did not reject a unit root.
    pub exhausted: bool,
}

/// Differences until ADF rejects a unit root at 5%, for at most `max_rounds`
/// differences.
pub fn differencing_order(series: &TimeSeries, deterministic: Deterministic, max_rounds: usize) -> Result<DifferencingOrder> {
    let mut reports = Vec::new();
    for d in 0..=max_rounds {
        let values = diff_values(series.values(), d);
        let level = TimeSeries::new(series.name(), series.date_at(d), values)?;
        let report = adf_test_auto(&level, deterministic)?;
        let reject = report.reject_at_5pct;
        reports.push(report);
        if reject {
            return Ok(DifferencingOrder { order: d, reports, exhausted: false });
        }
    }
    Ok(DifferencingOrder { order: max_rounds, reports, exhausted: true })
}
