//! VAR(X) by per-equation least squares: lag selection, forecasting,
//! orthogonalised impulse responses with bootstrap bands, and Granger tests.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;

use crate::diagnostics::TestReport;
use crate::dist::{chi2_sf, f_sf};
use crate::error::{Error, Result};
use crate::forecast::ForecastPath;
use crate::linalg::{cholesky_lower, ols_multi};
use crate::series::{Table, YearMonth};
use crate::sim;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarDeterministic {
    Const,
    ConstTrend,
}

impl VarDeterministic {
    fn count(self) -> usize {
        match self {
            VarDeterministic::Const => 1,
            VarDeterministic::ConstTrend => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LagOrder {
    Fixed(usize),
    /// Minimise AIC over `1..=max` on a common sample.
    Auto { max: usize },
}

/// Lags used by the residual portmanteau test.
pub const PORTMANTEAU_LAGS: usize = 16;

#[derive(Debug, Clone)]
pub struct VarxFit {
    pub variables: Vec<String>,
    pub exog_names: Vec<String>,
    pub p: usize,
    pub deterministic: VarDeterministic,
    /// `A_1 … A_p`; entry `(i, j)` is the effect of variable `j` on equation `i`.
    pub lag_matrices: Vec<DMatrix<f64>>,
    pub intercept: Vec<f64>,
    pub trend: Option<Vec<f64>>,
    /// `k × m` contemporaneous exogenous coefficients.
    pub exog_coeffs: DMatrix<f64>,
    /// `T × k`.
    pub residuals: DMatrix<f64>,
    /// Residual covariance with divisor `T − (regressors per equation)`.
    pub sigma_u: DMatrix<f64>,
    pub r_squared: Vec<f64>,
    /// `ln det Σ̃ + 2·(k·regressors)/T` with `Σ̃ = U'U/T`.
    pub aic: f64,
    pub nobs: usize,
    /// Multivariate portmanteau test on the residuals, when `PORTMANTEAU_LAGS > p`.
    pub portmanteau: Option<TestReport>,
    start: YearMonth,
    levels: Vec<Vec<f64>>,
    exog: Vec<Vec<f64>>,
    /// Stacked coefficients, regressors × equations.
    coefficients: DMatrix<f64>,
    xtx_inv: DMatrix<f64>,
}

impl VarxFit {
    pub fn nvars(&self) -> usize {
        self.variables.len()
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.variables
            .iter()
            .position(|v| v == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn last_date(&self) -> YearMonth {
        self.start.add_months(self.levels[0].len() as i64 - 1)
    }

    /// Position of the coefficient on lag `lag` (1-based) of variable `var`.
    fn lag_index(&self, lag: usize, var: usize) -> usize {
        (lag - 1) * self.nvars() + var
    }
}

/// Design rows `t = first..n`: lags, deterministic terms, exogenous values.
fn design(y: &[Vec<f64>], x: &[Vec<f64>], p: usize, det: VarDeterministic, first: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let k = y.len();
    let n = y[0].len();
    let rows = n - first;
    let m = k * p + det.count() + x.len();
    let mut z = DMatrix::zeros(rows, m);
    let mut dep = DMatrix::zeros(rows, k);
    for (r, t) in (first..n).enumerate() {
        for j in 0..k {
            dep[(r, j)] = y[j][t];
            for l in 1..=p {
                z[(r, (l - 1) * k + j)] = y[j][t - l];
            }
        }
        let c = k * p;
        z[(r, c)] = 1.0;
        if det == VarDeterministic::ConstTrend {
            z[(r, c + 1)] = (t + 1) as f64;
        }
        for (e, col) in x.iter().enumerate() {
            z[(r, c + det.count() + e)] = col[t];
        }
    }
    (z, dep)
}

fn log_det_ml(residuals: &DMatrix<f64>) -> Result<f64> {
    let t = residuals.nrows() as f64;
    let s = residuals.transpose() * residuals / t;
    let l = cholesky_lower(&s).ok_or(Error::DegenerateCovariance)?;
    Ok(2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>())
}

pub fn fit_varx(table: &Table, order: LagOrder, deterministic: VarDeterministic) -> Result<VarxFit> {
    fit_varx_exog(table, None, order, deterministic)
}

/// VARX with an optional table of contemporaneous exogenous regressors.
pub fn fit_varx_exog(table: &Table, exog: Option<&Table>, order: LagOrder, deterministic: VarDeterministic) -> Result<VarxFit> {
    let k = table.ncols();
    let n = table.nrows();
    let x: Vec<Vec<f64>> = match exog {
        Some(e) => {
            if e.nrows() != n || e.start() != table.start() {
                return Err(Error::ShapeMismatch("exogenous table must align with the endogenous table".into()));
            }
            e.columns().to_vec()
        }
        None => Vec::new(),
    };
    let y = table.columns();
    let p = match order {
        LagOrder::Fixed(p) => p,
        LagOrder::Auto { max } => {
            if max == 0 {
                return Err(Error::InvalidParameter("maximum lag must be at least 1".into()));
            }
            if n < k * max + 20 {
                return Err(Error::InsufficientData(format!("{n} observations for {k} variables at {max} lags")));
            }
            let mut best = (f64::INFINITY, 1);
            for p in 1..=max {
                let (z, dep) = design(y, &x, p, deterministic, max);
                let fit = ols_multi(&z, &dep)?;
                let t = z.nrows() as f64;
                let aic = log_det_ml(&fit.residuals)? + 2.0 * (k * z.ncols()) as f64 / t;
                if aic < best.0 {
                    best = (aic, p);
                }
            }
            best.1
        }
    };
    if p == 0 {
        return Err(Error::InvalidParameter("lag order must be at least 1".into()));
    }
    if n < k * p + 20 {
        return Err(Error::InsufficientData(format!("{n} observations for {k} variables at {p} lags")));
    }
    estimate(table.names().to_vec(), exog.map(|e| e.names().to_vec()).unwrap_or_default(), table.start(), y.to_vec(), x, p, deterministic)
}

fn estimate(
    variables: Vec<String>,
    exog_names: Vec<String>,
    start: YearMonth,
    y: Vec<Vec<f64>>,
    x: Vec<Vec<f64>>,
    p: usize,
    deterministic: VarDeterministic,
) -> Result<VarxFit> {
    let (z, dep) = design(&y, &x, p, deterministic, p);
    let fit = ols_multi(&z, &dep)?;
    assemble(variables, exog_names, start, y, x, p, deterministic, fit.coefficients, fit.xtx_inv)
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    variables: Vec<String>,
    exog_names: Vec<String>,
    start: YearMonth,
    y: Vec<Vec<f64>>,
    x: Vec<Vec<f64>>,
    p: usize,
    deterministic: VarDeterministic,
    b: DMatrix<f64>,
    xtx_inv: DMatrix<f64>,
) -> Result<VarxFit> {
    let k = y.len();
    let (z, dep) = design(&y, &x, p, deterministic, p);
    let t = z.nrows();
    let m = z.ncols();
    let u = &dep - &z * &b;
    let lag_matrices = (0..p)
        .map(|l| DMatrix::from_fn(k, k, |i, j| b[(l * k + j, i)]))
        .collect();
    let c = k * p;
    let intercept = (0..k).map(|i| b[(c, i)]).collect();
    let trend = (deterministic == VarDeterministic::ConstTrend).then(|| (0..k).map(|i| b[(c + 1, i)]).collect());
    let e0 = c + deterministic.count();
    let exog_coeffs = DMatrix::from_fn(k, x.len(), |i, e| b[(e0 + e, i)]);
    let sigma_u = u.transpose() * &u / (t - m) as f64;
    let r_squared = (0..k)
        .map(|i| {
            let col = dep.column(i);
            let mean = col.mean();
            let tss: f64 = col.iter().map(|v| (v - mean).powi(2)).sum();
            1.0 - u.column(i).norm_squared() / tss
        })
        .collect();
    let aic = log_det_ml(&u).map_or(f64::NAN, |l| l + 2.0 * (k * m) as f64 / t as f64);
    let portmanteau = if PORTMANTEAU_LAGS > p { portmanteau_test(&u, PORTMANTEAU_LAGS, p).ok() } else { None };
    Ok(VarxFit {
        variables,
        exog_names,
        p,
        deterministic,
        lag_matrices,
        intercept,
        trend,
        exog_coeffs,
        residuals: u,
        sigma_u,
        r_squared,
        aic,
        nobs: t,
        portmanteau,
        start,
        levels: y,
        exog: x,
        coefficients: b,
        xtx_inv,
    })
}

/// A fit at fixed coefficients on `table`, without exogenous regressors.
/// Residuals and `Σ_u` are computed from the data.
pub fn varx_at(table: &Table, lag_matrices: &[DMatrix<f64>], intercept: &[f64], trend: Option<&[f64]>) -> Result<VarxFit> {
    let k = table.ncols();
    let p = lag_matrices.len();
    if p == 0 || intercept.len() != k || trend.is_some_and(|t| t.len() != k) || lag_matrices.iter().any(|a| a.shape() != (k, k)) {
        return Err(Error::ShapeMismatch(format!("{k} variables need k×k lag matrices and k deterministic terms")));
    }
    if table.nrows() < k * p + 20 {
        return Err(Error::InsufficientData(format!("{} observations for {k} variables at {p} lags", table.nrows())));
    }
    let det = if trend.is_some() { VarDeterministic::ConstTrend } else { VarDeterministic::Const };
    let m = k * p + det.count();
    let mut b = DMatrix::zeros(m, k);
    for (l, a) in lag_matrices.iter().enumerate() {
        for i in 0..k {
            for j in 0..k {
                b[(l * k + j, i)] = a[(i, j)];
            }
        }
    }
    for i in 0..k {
        b[(k * p, i)] = intercept[i];
        if let Some(tr) = trend {
            b[(k * p + 1, i)] = tr[i];
        }
    }
    let y = table.columns().to_vec();
    let (z, _) = design(&y, &[], p, det, p);
    let xtx_inv = (z.transpose() * &z).try_inverse().ok_or_else(|| Error::SingularDesign("lagged design".into()))?;
    assemble(table.names().to_vec(), Vec::new(), table.start(), y, Vec::new(), p, det, b, xtx_inv)
}

/// Asymptotic multivariate portmanteau statistic
/// `T Σ_{j=1..h} tr(C_j' C_0⁻¹ C_j C_0⁻¹)` with `k²(h − p)` degrees of freedom.
pub fn portmanteau_test(residuals: &DMatrix<f64>, h: usize, p: usize) -> Result<TestReport> {
    let (t, k) = residuals.shape();
    if h <= p || t <= h {
        return Err(Error::InvalidDof { lags: h, fitted: p });
    }
    let tf = t as f64;
    let cov = |j: usize| -> DMatrix<f64> {
        let mut c = DMatrix::zeros(k, k);
        for s in j..t {
            c += residuals.row(s).transpose() * residuals.row(s - j);
        }
        c / tf
    };
    let c0_inv = cov(0).try_inverse().ok_or(Error::DegenerateCovariance)?;
    let q: f64 = (1..=h)
        .map(|j| {
            let cj = cov(j);
            (cj.transpose() * &c0_inv * &cj * &c0_inv).trace()
        })
        .sum::<f64>()
        * tf;
    let df = (k * k * (h - p)) as f64;
    Ok(TestReport::new(format!("Portmanteau({h})"), q, chi2_sf(q, df), h))
}

/// Forecasts every variable `h` steps ahead.
pub fn forecast_varx(fit: &VarxFit, h: usize) -> Result<Vec<ForecastPath>> {
    forecast_varx_exog(fit, h, None)
}

pub fn forecast_varx_exog(fit: &VarxFit, h: usize, future_exog: Option<&Table>) -> Result<Vec<ForecastPath>> {
    if h == 0 {
        return Err(Error::InvalidParameter("forecast horizon must be at least 1".into()));
    }
    let k = fit.nvars();
    let m = fit.exog.len();
    if m > 0 {
        match future_exog {
            Some(e) if e.nrows() == h && e.ncols() == m => {}
            _ => return Err(Error::ShapeMismatch(format!("{h}×{m} future exogenous values required"))),
        }
    } else if future_exog.is_some() {
        return Err(Error::ShapeMismatch("model has no exogenous regressors".into()));
    }
    let n = fit.levels[0].len();
    let mut hist: Vec<Vec<f64>> = fit.levels.clone();
    for s in 0..h {
        let t = n + s;
        let mut next = vec![0.0; k];
        for (i, v) in next.iter_mut().enumerate() {
            *v = fit.intercept[i];
            if let Some(tr) = &fit.trend {
                *v += tr[i] * (t + 1) as f64;
            }
            for (l, a) in fit.lag_matrices.iter().enumerate() {
                for j in 0..k {
                    *v += a[(i, j)] * hist[j][t - 1 - l];
                }
            }
            if let Some(e) = future_exog {
                for c in 0..m {
                    *v += fit.exog_coeffs[(i, c)] * e.column(c)[s];
                }
            }
        }
        for (j, v) in next.into_iter().enumerate() {
            hist[j].push(v);
        }
    }
    let first = fit.last_date().add_months(1);
    Ok((0..k)
        .map(|j| ForecastPath::new(fit.variables[j].clone(), first, hist[j][n..].to_vec(), None))
        .collect())
}

/// MA coefficient matrices `Φ_0 … Φ_H`.
pub fn ma_matrices(lags: &[DMatrix<f64>], k: usize, horizon: usize) -> Vec<DMatrix<f64>> {
    let mut phi = vec![DMatrix::identity(k, k)];
    for h in 1..=horizon {
        let mut acc = DMatrix::zeros(k, k);
        for (i, a) in lags.iter().enumerate() {
            if h > i {
                acc += &phi[h - 1 - i] * a;
            }
        }
        phi.push(acc);
    }
    phi
}

/// Orthogonalised responses of all variables to all shocks, `Θ_h = Φ_h P`.
pub fn orthogonal_irf(fit: &VarxFit, horizon: usize) -> Result<Vec<DMatrix<f64>>> {
    orthogonal_irf_matrices(&fit.lag_matrices, &fit.sigma_u, horizon)
}

pub fn orthogonal_irf_matrices(lags: &[DMatrix<f64>], sigma_u: &DMatrix<f64>, horizon: usize) -> Result<Vec<DMatrix<f64>>> {
    let p = cholesky_lower(sigma_u).ok_or(Error::DegenerateCovariance)?;
    Ok(ma_matrices(lags, sigma_u.nrows(), horizon)
        .into_iter()
        .map(|m| m * &p)
        .collect())
}

#[derive(Debug, Clone)]
pub struct ImpulseResponse {
    pub impulse: String,
    pub response: String,
    pub horizon: usize,
    /// Responses at `h = 0..=horizon`.
    pub responses: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub boot_reps: usize,
}

/// Orthogonalised impulse response with 95% residual-bootstrap bands. The
/// Cholesky ordering is the column order of the fitted table.
pub fn impulse_response(fit: &VarxFit, impulse: &str, response: &str, horizon: usize, boot_reps: usize, seed: u64) -> Result<ImpulseResponse> {
    let i = fit.index_of(impulse)?;
    let j = fit.index_of(response)?;
    if horizon == 0 {
        return Err(Error::InvalidParameter("impulse-response horizon must be at least 1".into()));
    }
    let point: Vec<f64> = orthogonal_irf(fit, horizon)?.iter().map(|m| m[(j, i)]).collect();
    let (mut lower, mut upper) = (point.clone(), point.clone());
    if boot_reps > 0 {
        let draws: Vec<Vec<f64>> = (0..boot_reps)
            .into_par_iter()
            .filter_map(|r| {
                let b = bootstrap_refit(fit, seed.wrapping_mul(0x9E37_79B9).wrapping_add(r as u64)).ok()?;
                let irf = orthogonal_irf(&b, horizon).ok()?;
                Some(irf.iter().map(|m| m[(j, i)]).collect())
            })
            .collect();
        if !draws.is_empty() {
            for h in 0..=horizon {
                let mut v: Vec<f64> = draws.iter().map(|d| d[h]).collect();
                v.sort_by(f64::total_cmp);
                let q = |p: f64| {
                    let x = p * (v.len() - 1) as f64;
                    let lo = x.floor() as usize;
                    let w = x - lo as f64;
                    v[lo] * (1.0 - w) + v[(lo + 1).min(v.len() - 1)] * w
                };
                lower[h] = q(0.025).min(point[h]);
                upper[h] = q(0.975).max(point[h]);
            }
        }
    }
    Ok(ImpulseResponse {
        impulse: impulse.to_string(),
        response: response.to_string(),
        horizon,
        responses: point,
        lower,
        upper,
        boot_reps,
    })
}

/// Rebuilds the sample from the fitted recursion with resampled residual
/// rows, then re-estimates at the same order.
fn bootstrap_refit(fit: &VarxFit, seed: u64) -> Result<VarxFit> {
    let mut rng = sim::rng(seed);
    let k = fit.nvars();
    let n = fit.levels[0].len();
    let t = fit.residuals.nrows();
    let mut y: Vec<Vec<f64>> = fit.levels.iter().map(|c| c[..fit.p].to_vec()).collect();
    for s in fit.p..n {
        let draw = rng.random_range(0..t);
        for i in 0..k {
            let mut v = fit.intercept[i] + fit.residuals[(draw, i)];
            if let Some(tr) = &fit.trend {
                v += tr[i] * (s + 1) as f64;
            }
            for (l, a) in fit.lag_matrices.iter().enumerate() {
                for j in 0..k {
                    v += a[(i, j)] * y[j][s - 1 - l];
                }
            }
            for (c, col) in fit.exog.iter().enumerate() {
                v += fit.exog_coeffs[(i, c)] * col[s];
            }
            y[i].push(v);
        }
    }
    estimate(fit.variables.clone(), fit.exog_names.clone(), fit.start, y, fit.exog.clone(), fit.p, fit.deterministic)
}

/// Wald F test of `coefficients[idx] = 0` jointly, where `idx` lists
/// `(regressor, equation)` pairs.
fn wald_f(fit: &VarxFit, idx: &[(usize, usize)], df2: f64, name: String) -> Result<TestReport> {
    let j = idx.len();
    let r = DVector::from_iterator(j, idx.iter().map(|&(a, e)| fit.coefficients[(a, e)]));
    let v = DMatrix::from_fn(j, j, |p, q| {
        let (a, e) = idx[p];
        let (b, f) = idx[q];
        fit.sigma_u[(e, f)] * fit.xtx_inv[(a, b)]
    });
    let v_inv = v.try_inverse().ok_or(Error::DegenerateCovariance)?;
    let wald = (r.transpose() * v_inv * &r)[(0, 0)];
    let f = wald / j as f64;
    Ok(TestReport::new(name, f, f_sf(f, j as f64, df2), fit.p))
}

/// Block test that `cause` does not Granger-cause the other variables: all
/// its lags are zero in every other equation.
pub fn granger_causality(fit: &VarxFit, cause: &str) -> Result<TestReport> {
    let c = fit.index_of(cause)?;
    let k = fit.nvars();
    let idx: Vec<(usize, usize)> = (0..k)
        .filter(|&e| e != c)
        .flat_map(|e| (1..=fit.p).map(move |l| (l, e)))
        .map(|(l, e)| (fit.lag_index(l, c), e))
        .collect();
    let m = fit.coefficients.nrows();
    let df2 = (k * (fit.nobs - m)) as f64;
    wald_f(fit, &idx, df2, format!("Granger: {cause} does not cause others"))
}

/// Single-equation test that `cause` does not Granger-cause `effect`.
pub fn granger_pairwise(fit: &VarxFit, cause: &str, effect: &str) -> Result<TestReport> {
    let c = fit.index_of(cause)?;
    let e = fit.index_of(effect)?;
    if c == e {
        return Err(Error::InvalidParameter("cause and effect must differ".into()));
    }
    let idx: Vec<(usize, usize)> = (1..=fit.p).map(|l| (fit.lag_index(l, c), e)).collect();
    let df2 = (fit.nobs - fit.coefficients.nrows()) as f64;
    wald_f(fit, &idx, df2, format!("Granger: {cause} does not cause {effect}"))
}
