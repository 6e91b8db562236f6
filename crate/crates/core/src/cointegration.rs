//! Engle-Granger two-step cointegration with an error-correction model,
//! the Johansen trace test, and two-step VECM estimation.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::diagnostics::{adf, default_adf_max_lag, interpolate_p, quantiles_at, Deterministic, TestReport};
use crate::dist::t_two_sided;
use crate::error::{Error, Result};
use crate::linalg::{cholesky_lower, ols, ols_multi, MultiOls};
use crate::series::{Table, TimeSeries};

/// Quantiles of the Engle-Granger residual τ for two variables (constant in
/// the static regression, no deterministic terms in the ADF regression),
/// simulated with 200 000 replications per size.
mod eg_table {
    pub const PROBS: [f64; 8] = [0.01, 0.025, 0.05, 0.10, 0.90, 0.95, 0.975, 0.99];
    pub const INV_T: [f64; 6] = [1.0 / 25.0, 1.0 / 50.0, 1.0 / 100.0, 1.0 / 250.0, 1.0 / 500.0, 0.0];
    pub const TAU: [[f64; 8]; 6] = include!("eg_quantiles.in");
}

/// Engle-Granger critical values `(1%, 5%, 10%)` for a sample of `nobs`.
pub fn eg_critical_values(nobs: usize) -> [f64; 3] {
    let q = quantiles_at(&eg_table::TAU, &eg_table::INV_T, nobs);
    [q[0], q[2], q[3]]
}

pub fn eg_p_value(stat: f64, nobs: usize) -> f64 {
    let q = quantiles_at(&eg_table::TAU, &eg_table::INV_T, nobs);
    interpolate_p(stat, &q, &eg_table::PROBS)
}

#[derive(Debug, Clone)]
pub struct EngleGrangerResult {
    pub intercept: f64,
    pub slope: f64,
    /// Static-regression residuals `r_t`, one per observation.
    pub residuals: Vec<f64>,
    /// `ρ` in `r_t = ρ r_{t−1} + e_t`.
    pub residual_ar1: f64,
    pub adf_on_residuals: TestReport,
    pub cointegrated: bool,
}

#[derive(Debug, Clone)]
pub struct EcmFit {
    /// Coefficient on `r_{t−1}`.
    pub alpha: f64,
    /// Coefficient on `Δx_t`, then on each lagged `Δy` and `Δx` pair.
    pub gamma: Vec<f64>,
    pub intercept: Option<f64>,
    pub residuals: Vec<f64>,
    /// Standard errors and p-values in the order `α, γ…, intercept`.
    pub std_errors: Vec<f64>,
    pub p_values: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct EcmOptions {
    /// Lagged `Δy` and `Δx` pairs added to the ECM.
    pub lags: usize,
    pub intercept: bool,
}

impl Default for EcmOptions {
    fn default() -> Self {
        Self { lags: 0, intercept: false }
    }
}

pub fn engle_granger(y: &TimeSeries, x: &TimeSeries) -> Result<(EngleGrangerResult, EcmFit)> {
    engle_granger_with(y, x, EcmOptions::default())
}

pub fn engle_granger_with(y: &TimeSeries, x: &TimeSeries, opts: EcmOptions) -> Result<(EngleGrangerResult, EcmFit)> {
    let n = y.len();
    if x.len() != n || x.start() != y.start() {
        return Err(Error::ShapeMismatch("series must be aligned and of equal length".into()));
    }
    if n < 30 {
        return Err(Error::InsufficientData(format!("Engle-Granger needs 30 observations, got {n}")));
    }
    let (yv, xv) = (y.values(), x.values());
    let design = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { xv[i] });
    let stat = ols(&design, &DVector::from_column_slice(yv))?;
    let residuals: Vec<f64> = stat.residuals.iter().copied().collect();

    let (num, den) = residuals
        .windows(2)
        .fold((0.0, 0.0), |(a, b), w| (a + w[0] * w[1], b + w[0] * w[0]));
    let residual_ar1 = if den > 0.0 { num / den } else { 0.0 };

    let max_lag = default_adf_max_lag(n).min(n.saturating_sub(12));
    let a = adf(&residuals, max_lag, Deterministic::None, true)?;
    let p = eg_p_value(a.statistic, n);
    let report = TestReport::new("Engle-Granger ADF", a.statistic, p, a.lags);
    let cointegrated = report.reject_at_5pct;

    // ECM: Δy_t = α r_{t−1} + γ₀ Δx_t + Σ (γ Δy_{t−i} + γ' Δx_{t−i}) + u_t
    let l = opts.lags;
    let first = 1 + l;
    let rows = n - first;
    let cols = 2 + 2 * l + usize::from(opts.intercept);
    let mut xm = DMatrix::zeros(rows, cols);
    let mut dep = DVector::zeros(rows);
    for (r, t) in (first..n).enumerate() {
        dep[r] = yv[t] - yv[t - 1];
        xm[(r, 0)] = residuals[t - 1];
        xm[(r, 1)] = xv[t] - xv[t - 1];
        for i in 1..=l {
            xm[(r, 2 * i)] = yv[t - i] - yv[t - i - 1];
            xm[(r, 2 * i + 1)] = xv[t - i] - xv[t - i - 1];
        }
        if opts.intercept {
            xm[(r, cols - 1)] = 1.0;
        }
    }
    let ecm = ols(&xm, &dep)?;
    let c = ecm.coefficients.as_slice();
    let gamma_end = if opts.intercept { cols - 1 } else { cols };
    Ok((
        EngleGrangerResult {
            intercept: stat.coefficients[0],
            slope: stat.coefficients[1],
            residuals,
            residual_ar1,
            adf_on_residuals: report,
            cointegrated,
        },
        EcmFit {
            alpha: c[0],
            gamma: c[1..gamma_end].to_vec(),
            intercept: opts.intercept.then(|| c[cols - 1]),
            residuals: ecm.residuals.iter().copied().collect(),
            std_errors: ecm.std_errors().iter().copied().collect(),
            p_values: ecm.p_values().iter().copied().collect(),
        },
    ))
}

/// Deterministic specification of the Johansen model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JohansenDeterministic {
    /// Unrestricted constant in the short-run dynamics.
    Constant,
    /// Constant restricted to the cointegrating space.
    RestrictedConstant,
    /// Linear trend restricted to the cointegrating space plus an
    /// unrestricted constant.
    Trend,
}

/// Trace critical values `(10%, 5%, 1%)` indexed by `k − r − 1`.
mod johansen_table {
    pub const CONSTANT: [[f64; 3]; 6] = [
        [6.50, 8.18, 11.65],
        [15.66, 17.95, 23.52],
        [28.71, 31.52, 37.22],
        [45.23, 48.28, 55.43],
        [66.49, 70.60, 78.87],
        [85.18, 90.39, 104.20],
    ];
    pub const RESTRICTED_CONSTANT: [[f64; 3]; 6] = [
        [7.52, 9.24, 12.97],
        [17.85, 19.96, 24.60],
        [32.00, 34.91, 41.07],
        [49.65, 53.12, 60.16],
        [71.86, 76.07, 84.45],
        [97.18, 102.14, 111.01],
    ];
    pub const TREND: [[f64; 3]; 6] = [
        [10.49, 12.25, 16.26],
        [22.76, 25.32, 30.45],
        [39.06, 42.44, 48.45],
        [59.14, 62.99, 70.05],
        [83.20, 87.31, 96.58],
        [110.42, 114.90, 124.75],
    ];
}

/// Trace critical values `(10%, 5%, 1%)` for `dim = k − r` common trends.
pub fn johansen_critical_values(det: JohansenDeterministic, dim: usize) -> [f64; 3] {
    let t = match det {
        JohansenDeterministic::Constant => &johansen_table::CONSTANT,
        JohansenDeterministic::RestrictedConstant => &johansen_table::RESTRICTED_CONSTANT,
        JohansenDeterministic::Trend => &johansen_table::TREND,
    };
    t[dim - 1]
}

#[derive(Debug, Clone)]
pub struct JohansenResult {
    pub variables: Vec<String>,
    pub lags: usize,
    pub deterministic: JohansenDeterministic,
    pub nobs: usize,
    /// `λ₁ ≥ … ≥ λ_k`.
    pub eigenvalues: Vec<f64>,
    /// Columns are cointegrating vectors with first element 1. For restricted
    /// terms the last row holds the constant or trend weight.
    pub eigenvectors: DMatrix<f64>,
    /// Trace statistic for `H₀: rank ≤ r`, `r = 0..k−1`.
    pub trace_stats: Vec<f64>,
    /// `(10%, 5%, 1%)` per hypothesis.
    pub critical_values: Vec<[f64; 3]>,
    pub selected_rank: usize,
}

fn lagged_design(y: &[Vec<f64>], lags: usize, det: JohansenDeterministic) -> (DMatrix<f64>, DMatrix<f64>, Option<DMatrix<f64>>, usize) {
    let k = y.len();
    let n = y[0].len();
    let first = lags; // ΔY_t with t ≥ lags leaves lags − 1 difference lags
    let rows = n - first;
    let restricted = usize::from(det != JohansenDeterministic::Constant);
    let m1 = k + restricted;
    let diff_lags = lags - 1;
    let unrestricted_const = usize::from(det != JohansenDeterministic::RestrictedConstant);
    let m2 = k * diff_lags + unrestricted_const;
    let mut z0 = DMatrix::zeros(rows, k);
    let mut z1 = DMatrix::zeros(rows, m1);
    let mut z2 = DMatrix::zeros(rows, m2);
    for (r, t) in (first..n).enumerate() {
        for j in 0..k {
            z0[(r, j)] = y[j][t] - y[j][t - 1];
            z1[(r, j)] = y[j][t - 1];
            for i in 1..=diff_lags {
                z2[(r, (i - 1) * k + j)] = y[j][t - i] - y[j][t - i - 1];
            }
        }
        match det {
            JohansenDeterministic::Constant => {}
            JohansenDeterministic::RestrictedConstant => z1[(r, k)] = 1.0,
            JohansenDeterministic::Trend => z1[(r, k)] = t as f64,
        }
        if unrestricted_const == 1 {
            z2[(r, m2 - 1)] = 1.0;
        }
    }
    let z2 = (m2 > 0).then_some(z2);
    (z0, z1, z2, rows)
}

fn partial_out(z: &DMatrix<f64>, on: Option<&DMatrix<f64>>) -> Result<DMatrix<f64>> {
    match on {
        None => Ok(z.clone()),
        Some(x) => Ok(ols_multi(x, z)?.residuals),
    }
}

/// Johansen trace test. `lags` is the VAR order in levels, so the auxiliary
/// regressions use `lags − 1` lagged differences.
pub fn johansen_trace(table: &Table, lags: usize, det: JohansenDeterministic) -> Result<JohansenResult> {
    let k = table.ncols();
    let n = table.nrows();
    if !(2..=6).contains(&k) {
        return Err(Error::InvalidParameter(format!("Johansen test supports 2 to 6 variables, got {k}")));
    }
    if lags == 0 {
        return Err(Error::InvalidParameter("lags must be at least 1".into()));
    }
    if n < 25 * k || n <= lags + k * lags + 2 {
        return Err(Error::InsufficientData(format!("{n} observations for {k} variables")));
    }
    let (z0, z1, z2, t) = lagged_design(table.columns(), lags, det);
    let r0 = partial_out(&z0, z2.as_ref())?;
    let r1 = partial_out(&z1, z2.as_ref())?;
    let tf = t as f64;
    let s00 = r0.transpose() * &r0 / tf;
    let s01 = r0.transpose() * &r1 / tf;
    let s11 = r1.transpose() * &r1 / tf;
    let s00_inv = cholesky_lower(&s00)
        .and_then(|_| s00.clone().try_inverse())
        .ok_or_else(|| Error::SingularDesign("S00 is not positive definite".into()))?;
    let l = cholesky_lower(&s11).ok_or_else(|| Error::SingularDesign("S11 is not positive definite".into()))?;
    let l_inv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::SingularDesign("S11 factor is singular".into()))?;
    let m = &l_inv * s01.transpose() * &s00_inv * &s01 * l_inv.transpose();
    let m = (&m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let p1 = z1.ncols();
    let eigenvalues: Vec<f64> = order[..k]
        .iter()
        .map(|&i| eig.eigenvalues[i].clamp(0.0, 1.0 - 1e-15))
        .collect();
    let mut vectors = DMatrix::zeros(p1, k);
    for (c, &i) in order[..k].iter().enumerate() {
        let v = l_inv.transpose() * eig.eigenvectors.column(i);
        let lead = v[0];
        for r in 0..p1 {
            vectors[(r, c)] = if lead != 0.0 { v[r] / lead } else { v[r] };
        }
    }
    let trace_stats: Vec<f64> = (0..k)
        .map(|r| -tf * eigenvalues[r..].iter().map(|l| (1.0 - l).ln()).sum::<f64>())
        .collect();
    let critical_values: Vec<[f64; 3]> = (0..k).map(|r| johansen_critical_values(det, k - r)).collect();
    let selected_rank = (0..k).find(|&r| trace_stats[r] < critical_values[r][1]).unwrap_or(k);
    Ok(JohansenResult {
        variables: table.names().to_vec(),
        lags,
        deterministic: det,
        nobs: t,
        eigenvalues,
        eigenvectors: vectors,
        trace_stats,
        critical_values,
        selected_rank,
    })
}

/// The level series weighted by the eigenvector of the largest eigenvalue.
pub fn stationary_combination(result: &JohansenResult, table: &Table) -> Result<TimeSeries> {
    if result.selected_rank == 0 {
        return Err(Error::NoCointegration);
    }
    let k = table.ncols();
    if k != result.variables.len() {
        return Err(Error::ShapeMismatch(format!(
            "table has {k} columns, test used {}",
            result.variables.len()
        )));
    }
    let w: Vec<f64> = (0..k).map(|j| result.eigenvectors[(j, 0)]).collect();
    let values = (0..table.nrows())
        .map(|t| (0..k).map(|j| w[j] * table.column(j)[t]).sum())
        .collect();
    TimeSeries::new("cointegrating_combination", table.start(), values)
}

#[derive(Debug, Clone)]
pub struct VecmFit {
    pub variables: Vec<String>,
    pub rank: usize,
    pub lags: usize,
    /// `k × r` cointegrating vectors normalised so the leading `r × r` block
    /// is the identity.
    pub beta: DMatrix<f64>,
    /// ECT loadings: row per equation, column per relation.
    pub ect_coefficients: DMatrix<f64>,
    pub ect_std_errors: DMatrix<f64>,
    pub ect_p_values: DMatrix<f64>,
    /// `Γ₁ … Γ_{lags−1}`, each `k × k` (row = equation).
    pub gamma: Vec<DMatrix<f64>>,
    pub intercepts: Vec<f64>,
    pub residuals: DMatrix<f64>,
    pub residual_cov: DMatrix<f64>,
}

/// Two-step VECM: Johansen vectors fixed, then per-equation OLS of `ΔY_t`
/// on `ECT_{t−1}`, `lags − 1` lagged differences and a constant.
pub fn fit_vecm(table: &Table, rank: usize, lags: usize) -> Result<VecmFit> {
    let k = table.ncols();
    if rank == 0 || rank >= k {
        return Err(Error::InvalidRank { rank, vars: k });
    }
    if lags == 0 {
        return Err(Error::InvalidParameter("lags must be at least 1".into()));
    }
    let jo = johansen_trace(table, lags, JohansenDeterministic::Constant)?;
    let b = jo.eigenvectors.view((0, 0), (k, rank)).into_owned();
    let lead = b.view((0, 0), (rank, rank)).into_owned();
    let beta = match lead.try_inverse() {
        Some(inv) => &b * inv,
        None => b,
    };
    let y = table.columns();
    let n = table.nrows();
    let first = lags;
    let rows = n - first;
    let dl = lags - 1;
    let cols = rank + k * dl + 1;
    let mut x = DMatrix::zeros(rows, cols);
    let mut dep = DMatrix::zeros(rows, k);
    for (r, t) in (first..n).enumerate() {
        for c in 0..rank {
            x[(r, c)] = (0..k).map(|j| beta[(j, c)] * y[j][t - 1]).sum();
        }
        for j in 0..k {
            dep[(r, j)] = y[j][t] - y[j][t - 1];
            for i in 1..=dl {
                x[(r, rank + (i - 1) * k + j)] = y[j][t - i] - y[j][t - i - 1];
            }
        }
        x[(r, cols - 1)] = 1.0;
    }
    let fit: MultiOls = ols_multi(&x, &dep)?;
    let dof = (rows - cols) as f64;
    let mut ect = DMatrix::zeros(k, rank);
    let mut se = DMatrix::zeros(k, rank);
    let mut pv = DMatrix::zeros(k, rank);
    for eq in 0..k {
        let s2 = fit.residuals.column(eq).norm_squared() / dof;
        for c in 0..rank {
            let coef = fit.coefficients[(c, eq)];
            let s = (s2 * fit.xtx_inv[(c, c)]).sqrt();
            ect[(eq, c)] = coef;
            se[(eq, c)] = s;
            pv[(eq, c)] = t_two_sided(coef / s, dof);
        }
    }
    let gamma = (0..dl)
        .map(|i| DMatrix::from_fn(k, k, |eq, j| fit.coefficients[(rank + i * k + j, eq)]))
        .collect();
    let intercepts = (0..k).map(|eq| fit.coefficients[(cols - 1, eq)]).collect();
    let residual_cov = fit.residuals.transpose() * &fit.residuals / dof;
    Ok(VecmFit {
        variables: table.names().to_vec(),
        rank,
        lags,
        beta,
        ect_coefficients: ect,
        ect_std_errors: se,
        ect_p_values: pv,
        gamma,
        intercepts,
        residuals: fit.residuals,
        residual_cov,
    })
}
