//! ARIMA and regression with ARIMA errors, estimated by conditional sum of
//! squares.
//!
//! The model is `y_t = β'x_t + n_t` where `(1 − B)^d n_t − c` follows an
//! ARMA(p, q):
//!
//! ```text
//! u_t = φ₁u_{t−1} + … + φ_pu_{t−p} + ε_t + θ₁ε_{t−1} + … + θ_qε_{t−q}
//! ```
//!
//! Regressors are differenced alongside the response. Residuals before the
//! conditioning offset are fixed at zero.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forecast::ForecastPath;
use crate::linalg::{ols, roots_outside_unit_circle};
use crate::optim::{bfgs, BfgsOptions};
use crate::series::{diff_values, undifference, Table, TimeSeries, YearMonth};
use crate::sim;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ArimaSpec {
    pub p: usize,
    pub d: usize,
    pub q: usize,
}

impl ArimaSpec {
    pub fn new(p: usize, d: usize, q: usize) -> Self {
        Self { p, d, q }
    }
}

impl fmt::Display for ArimaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ARIMA({},{},{})", self.p, self.d, self.q)
    }
}

#[derive(Debug, Clone)]
pub struct ArimaOptions {
    /// Estimate a constant in the differenced equation; `None` includes one
    /// only when `d = 0`.
    pub intercept: Option<bool>,
    /// Extra randomly perturbed starting points.
    pub restarts: usize,
    pub seed: u64,
    /// Number of initial differenced observations used only as lags.
    /// Defaults to `p`.
    pub condition_on: Option<usize>,
}

impl Default for ArimaOptions {
    fn default() -> Self {
        Self {
            intercept: None,
            restarts: 5,
            seed: 0,
            condition_on: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ArimaFit {
    pub spec: ArimaSpec,
    pub name: String,
    pub ar_coeffs: Vec<f64>,
    pub ma_coeffs: Vec<f64>,
    pub exog_coeffs: Vec<f64>,
    pub exog_names: Vec<String>,
    pub intercept: f64,
    pub has_intercept: bool,
    /// Residuals from the conditioning offset onwards.
    pub residuals: Vec<f64>,
    pub sigma2: f64,
    pub loglik: f64,
    pub aic: f64,
    /// Number of free parameters, counting the innovation variance.
    pub n_params: usize,
    pub offset: usize,
    pub stationary: bool,
    pub invertible: bool,
    pub converged: bool,
    pub last_date: YearMonth,
    noise_levels: Vec<f64>,
    arma_part: Vec<f64>,
    eps_full: Vec<f64>,
}

impl ArimaFit {
    pub fn nobs(&self) -> usize {
        self.residuals.len()
    }

    /// Evaluates this fit's coefficients on another history (for example an
    /// extended sample) without re-estimating.
    pub fn apply_to(&self, endog: &TimeSeries, exog: Option<&Table>) -> Result<ArimaFit> {
        let params = Params {
            intercept: self.intercept,
            beta: self.exog_coeffs.clone(),
            ar: self.ar_coeffs.clone(),
            ma: self.ma_coeffs.clone(),
        };
        let data = ModelData::new(endog, exog, self.spec)?;
        Ok(finish(
            &data,
            self.spec,
            params,
            self.has_intercept,
            self.offset.min(data.z.len().saturating_sub(1)),
            true,
        ))
    }
}

/// Builds a fit at fixed coefficients. `intercept = None` means no constant.
pub fn arima_at(
    endog: &TimeSeries,
    exog: Option<&Table>,
    spec: ArimaSpec,
    intercept: Option<f64>,
    ar: &[f64],
    ma: &[f64],
    exog_coeffs: &[f64],
) -> Result<ArimaFit> {
    if ar.len() != spec.p || ma.len() != spec.q {
        return Err(Error::ShapeMismatch(format!(
            "{spec} needs {} AR and {} MA coefficients",
            spec.p, spec.q
        )));
    }
    let data = ModelData::new(endog, exog, spec)?;
    if exog_coeffs.len() != data.k {
        return Err(Error::ShapeMismatch(format!(
            "{} regressors but {} coefficients",
            data.k,
            exog_coeffs.len()
        )));
    }
    let params = Params {
        intercept: intercept.unwrap_or(0.0),
        beta: exog_coeffs.to_vec(),
        ar: ar.to_vec(),
        ma: ma.to_vec(),
    };
    Ok(finish(&data, spec, params, intercept.is_some(), spec.p, true))
}

struct ModelData {
    name: String,
    last_date: YearMonth,
    levels: Vec<f64>,
    exog_levels: Vec<Vec<f64>>,
    exog_names: Vec<String>,
    /// Differenced response.
    z: Vec<f64>,
    /// Differenced regressors, column-major.
    x: Vec<Vec<f64>>,
    k: usize,
}

impl ModelData {
    fn new(endog: &TimeSeries, exog: Option<&Table>, spec: ArimaSpec) -> Result<Self> {
        let n = endog.len();
        let (exog_levels, exog_names) = match exog {
            Some(t) => {
                if t.nrows() != n {
                    return Err(Error::ShapeMismatch(format!(
                        "regressors have {} rows, response has {n}",
                        t.nrows()
                    )));
                }
                (t.columns().to_vec(), t.names().to_vec())
            }
            None => (Vec::new(), Vec::new()),
        };
        if n <= spec.d + 1 {
            return Err(Error::InsufficientData(format!("{n} observations for d = {}", spec.d)));
        }
        let z = diff_values(endog.values(), spec.d);
        let x: Vec<Vec<f64>> = exog_levels.iter().map(|c| diff_values(c, spec.d)).collect();
        Ok(Self {
            name: endog.name().to_string(),
            last_date: endog.end(),
            levels: endog.values().to_vec(),
            k: x.len(),
            exog_levels,
            exog_names,
            z,
            x,
        })
    }
}

#[derive(Debug, Clone)]
struct Params {
    intercept: f64,
    beta: Vec<f64>,
    ar: Vec<f64>,
    ma: Vec<f64>,
}

/// `u_t = z_t − c − β'x_t`.
fn arma_input(z: &[f64], x: &[Vec<f64>], intercept: f64, beta: &[f64]) -> Vec<f64> {
    let mut u: Vec<f64> = z.iter().map(|v| v - intercept).collect();
    for (col, b) in x.iter().zip(beta) {
        if *b != 0.0 {
            for (ut, xt) in u.iter_mut().zip(col) {
                *ut -= b * xt;
            }
        }
    }
    u
}

/// Conditional residuals, zero before `offset`.
pub(crate) fn css_residuals(u: &[f64], ar: &[f64], ma: &[f64], offset: usize) -> Vec<f64> {
    let mut eps = vec![0.0; u.len()];
    for t in offset..u.len() {
        let mut e = u[t];
        for (i, phi) in ar.iter().enumerate() {
            if t > i {
                e -= phi * u[t - 1 - i];
            }
        }
        for (j, theta) in ma.iter().enumerate() {
            if t > j {
                e -= theta * eps[t - 1 - j];
            }
        }
        eps[t] = e;
    }
    eps
}

fn finish(data: &ModelData, spec: ArimaSpec, params: Params, has_intercept: bool, offset: usize, converged: bool) -> ArimaFit {
    let u = arma_input(&data.z, &data.x, params.intercept, &params.beta);
    let eps_full = css_residuals(&u, &params.ar, &params.ma, offset);
    let residuals = eps_full[offset..].to_vec();
    let n_eff = residuals.len() as f64;
    let ssr: f64 = residuals.iter().map(|e| e * e).sum();
    let sigma2 = ssr / n_eff;
    let loglik = -0.5 * n_eff * ((2.0 * std::f64::consts::PI * sigma2).ln() + 1.0);
    let n_params = spec.p + spec.q + data.k + usize::from(has_intercept) + 1;
    let aic = -2.0 * loglik + 2.0 * n_params as f64;
    let mut noise_levels = data.levels.clone();
    for (col, b) in data.exog_levels.iter().zip(&params.beta) {
        for (nl, x) in noise_levels.iter_mut().zip(col) {
            *nl -= b * x;
        }
    }
    ArimaFit {
        spec,
        name: data.name.clone(),
        stationary: roots_outside_unit_circle(&params.ar),
        invertible: roots_outside_unit_circle(&params.ma.iter().map(|t| -t).collect::<Vec<_>>()),
        ar_coeffs: params.ar,
        ma_coeffs: params.ma,
        exog_coeffs: params.beta,
        exog_names: data.exog_names.clone(),
        intercept: params.intercept,
        has_intercept,
        residuals,
        sigma2,
        loglik,
        aic,
        n_params,
        offset,
        converged,
        last_date: data.last_date,
        noise_levels,
        arma_part: u,
        eps_full,
    }
}

fn sd(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n).sqrt()
}

/// Hannan-Rissanen ARMA starting values.
fn hannan_rissanen(u: &[f64], p: usize, q: usize) -> (Vec<f64>, Vec<f64>) {
    let n = u.len();
    let zeros = (vec![0.0; p], vec![0.0; q]);
    if p + q == 0 {
        return zeros;
    }
    let long = if q > 0 { (p.max(q) + 8).min(n / 4) } else { 0 };
    let ehat = if q > 0 {
        if long == 0 {
            return zeros;
        }
        let rows = n - long;
        let mut x = DMatrix::zeros(rows, long);
        let mut y = DVector::zeros(rows);
        for (r, t) in (long..n).enumerate() {
            y[r] = u[t];
            for i in 0..long {
                x[(r, i)] = u[t - 1 - i];
            }
        }
        match ols(&x, &y) {
            Ok(fit) => {
                let mut e = vec![0.0; n];
                for (r, t) in (long..n).enumerate() {
                    e[t] = fit.residuals[r];
                }
                e
            }
            Err(_) => return zeros,
        }
    } else {
        vec![0.0; n]
    };
    let start = long + p.max(q);
    if n <= start + p + q + 2 {
        return zeros;
    }
    let rows = n - start;
    let mut x = DMatrix::zeros(rows, p + q);
    let mut y = DVector::zeros(rows);
    for (r, t) in (start..n).enumerate() {
        y[r] = u[t];
        for i in 0..p {
            x[(r, i)] = u[t - 1 - i];
        }
        for j in 0..q {
            x[(r, p + j)] = ehat[t - 1 - j];
        }
    }
    match ols(&x, &y) {
        Ok(fit) => {
            let c = fit.coefficients.as_slice();
            (c[..p].to_vec(), c[p..].to_vec())
        }
        Err(_) => zeros,
    }
}

/// Fits by conditional least squares with default options.
pub fn fit_arima(endog: &TimeSeries, exog: Option<&Table>, spec: ArimaSpec) -> Result<ArimaFit> {
    fit_arima_with(endog, exog, spec, &ArimaOptions::default())
}

pub fn fit_arima_with(endog: &TimeSeries, exog: Option<&Table>, spec: ArimaSpec, opts: &ArimaOptions) -> Result<ArimaFit> {
    let data = ModelData::new(endog, exog, spec)?;
    let k = data.k;
    let needed = spec.d + spec.p + spec.q + k + 10;
    if endog.len() <= needed {
        return Err(Error::InsufficientData(format!(
            "{spec} with {k} regressors needs more than {needed} observations, got {}",
            endog.len()
        )));
    }
    let has_intercept = opts.intercept.unwrap_or(spec.d == 0);
    let offset = opts.condition_on.unwrap_or(spec.p);
    if offset < spec.p || offset + spec.q + k + 10 >= data.z.len() {
        return Err(Error::InvalidParameter(format!(
            "conditioning offset {offset} is unusable for {spec}"
        )));
    }

    // Work on a standardized copy so the optimizer sees unit-scale parameters.
    let sz = {
        let s = sd(&data.z);
        if s > 0.0 {
            s
        } else {
            data.z.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0)
        }
    };
    let mut sx = Vec::with_capacity(k);
    for (j, col) in data.x.iter().enumerate() {
        let s = sd(col);
        if !(s > 0.0) {
            return Err(Error::DegenerateColumn(data.exog_names[j].clone()));
        }
        sx.push(s);
    }
    let zs: Vec<f64> = data.z.iter().map(|v| v / sz).collect();
    let xs: Vec<Vec<f64>> = data.x.iter().zip(&sx).map(|(c, s)| c.iter().map(|v| v / s).collect()).collect();

    // Regression starting values.
    let nreg = usize::from(has_intercept) + k;
    let (c0, b0) = if nreg > 0 {
        let rows = zs.len();
        let mut x = DMatrix::zeros(rows, nreg);
        for r in 0..rows {
            let mut col = 0;
            if has_intercept {
                x[(r, 0)] = 1.0;
                col = 1;
            }
            for (j, c) in xs.iter().enumerate() {
                x[(r, col + j)] = c[r];
            }
        }
        let fit = ols(&x, &DVector::from_column_slice(&zs))?;
        let c = fit.coefficients.as_slice();
        if has_intercept {
            (c[0], c[1..].to_vec())
        } else {
            (0.0, c.to_vec())
        }
    } else {
        (0.0, Vec::new())
    };
    let u0 = arma_input(&zs, &xs, c0, &b0);
    let (ar0, ma0) = hannan_rissanen(&u0, spec.p, spec.q);

    let pack = |c: f64, b: &[f64], ar: &[f64], ma: &[f64]| -> Vec<f64> {
        let mut v = Vec::with_capacity(nreg + spec.p + spec.q);
        if has_intercept {
            v.push(c);
        }
        v.extend_from_slice(b);
        v.extend_from_slice(ar);
        v.extend_from_slice(ma);
        v
    };
    let unpack = |v: &[f64]| -> Params {
        let mut i = 0;
        let intercept = if has_intercept {
            i = 1;
            v[0]
        } else {
            0.0
        };
        let beta = v[i..i + k].to_vec();
        i += k;
        let ar = v[i..i + spec.p].to_vec();
        i += spec.p;
        let ma = v[i..i + spec.q].to_vec();
        Params { intercept, beta, ar, ma }
    };
    let n_eff = (zs.len() - offset) as f64;
    let objective = |v: &[f64]| -> f64 {
        let pr = unpack(v);
        let u = arma_input(&zs, &xs, pr.intercept, &pr.beta);
        let eps = css_residuals(&u, &pr.ar, &pr.ma, offset);
        let ssr: f64 = eps[offset..].iter().map(|e| e * e).sum();
        if !ssr.is_finite() || ssr <= 0.0 {
            return if ssr == 0.0 { -1e300 } else { f64::INFINITY };
        }
        0.5 * n_eff * (ssr / n_eff).ln()
    };

    let mut starts = vec![pack(c0, &b0, &ar0, &ma0)];
    if spec.p + spec.q > 0 {
        starts.push(pack(c0, &b0, &vec![0.0; spec.p], &vec![0.0; spec.q]));
    }
    let mut rng = sim::rng(opts.seed ^ (spec.p as u64) << 16 ^ (spec.q as u64) << 24 ^ (spec.d as u64) << 32);
    for _ in 0..opts.restarts {
        let mut s = starts[0].clone();
        for (i, v) in s.iter_mut().enumerate() {
            let scale = if i < nreg { 0.05 } else { 0.2 };
            *v += scale * rng.sample::<f64, _>(StandardNormal);
        }
        starts.push(s);
    }
    let bopts = BfgsOptions::default();
    let best = starts
        .iter()
        .map(|s| bfgs(&objective, s, bopts))
        .filter(|m| m.value.is_finite())
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .ok_or_else(|| Error::OptimizerFailed(format!("{spec}: no starting point gave a finite likelihood")))?;

    let scaled = unpack(&best.x);
    let params = Params {
        intercept: scaled.intercept * sz,
        beta: scaled.beta.iter().zip(&sx).map(|(b, s)| b * sz / s).collect(),
        ar: scaled.ar,
        ma: scaled.ma,
    };
    let fit = finish(&data, spec, params, has_intercept, offset, best.converged);
    if !fit.sigma2.is_finite() {
        return Err(Error::OptimizerFailed(format!("{spec}: non-finite innovation variance")));
    }
    Ok(fit)
}

/// One candidate of an order search.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub spec: ArimaSpec,
    pub fit: std::result::Result<ArimaFit, Error>,
}

/// Fits every `(p, q)` with `p ≤ p_max`, `q ≤ q_max` on a common sample
/// (conditioning on the first `p_max` differenced observations).
pub fn order_grid(
    endog: &TimeSeries,
    exog: Option<&Table>,
    p_max: usize,
    d: usize,
    q_max: usize,
    opts: &ArimaOptions,
) -> Result<Vec<Candidate>> {
    if p_max > 5 || q_max > 5 {
        return Err(Error::InvalidParameter(format!(
            "order grid limited to 5, got p_max={p_max}, q_max={q_max}"
        )));
    }
    let specs: Vec<ArimaSpec> = (0..=p_max)
        .flat_map(|p| (0..=q_max).map(move |q| ArimaSpec::new(p, d, q)))
        .collect();
    let opts = ArimaOptions {
        condition_on: Some(p_max),
        ..opts.clone()
    };
    Ok(specs
        .into_par_iter()
        .map(|spec| Candidate {
            spec,
            fit: fit_arima_with(endog, exog, spec, &opts),
        })
        .collect())
}

/// Index of the minimum-AIC candidate, ties going to smaller `p + q`, then
/// smaller `p`. Stationary and invertible fits are preferred; the others are
/// considered only when no admissible fit exists.
pub fn best_candidate(candidates: &[Candidate]) -> Option<usize> {
    best_among(candidates, true).or_else(|| best_among(candidates, false))
}

fn best_among(candidates: &[Candidate], admissible_only: bool) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in candidates.iter().enumerate() {
        let Ok(fit) = &c.fit else { continue };
        if !fit.aic.is_finite() || (admissible_only && !(fit.stationary && fit.invertible)) {
            continue;
        }
        best = match best {
            None => Some((i, fit.aic)),
            Some((j, aic)) => {
                let tol = 1e-9 * (1.0 + aic.abs());
                let other = candidates[j].spec;
                let better = if (fit.aic - aic).abs() <= tol {
                    (c.spec.p + c.spec.q, c.spec.p) < (other.p + other.q, other.p)
                } else {
                    fit.aic < aic
                };
                if better {
                    Some((i, fit.aic))
                } else {
                    Some((j, aic))
                }
            }
        };
    }
    best.map(|(i, _)| i)
}

/// AIC grid search over `(p, q)` for fixed `d`.
pub fn select_order(endog: &TimeSeries, exog: Option<&Table>, p_max: usize, d: usize, q_max: usize) -> Result<(ArimaSpec, ArimaFit)> {
    select_order_with(endog, exog, p_max, d, q_max, &ArimaOptions::default())
}

pub fn select_order_with(
    endog: &TimeSeries,
    exog: Option<&Table>,
    p_max: usize,
    d: usize,
    q_max: usize,
    opts: &ArimaOptions,
) -> Result<(ArimaSpec, ArimaFit)> {
    let mut grid = order_grid(endog, exog, p_max, d, q_max, opts)?;
    let i = best_candidate(&grid).ok_or_else(|| Error::OptimizerFailed("every candidate order failed".into()))?;
    let c = grid.swap_remove(i);
    Ok((c.spec, c.fit.expect("best candidate is a successful fit")))
}

/// MA(∞) weights of the integrated process, `ψ₀ = 1`.
pub fn psi_weights(ar: &[f64], ma: &[f64], d: usize, n: usize) -> Vec<f64> {
    // (1 − Σφᵢ Bⁱ)(1 − B)^d written as 1 − Σ aᵢ Bⁱ
    let mut poly = vec![1.0];
    poly.extend(ar.iter().map(|v| -v));
    for _ in 0..d {
        let mut next = vec![0.0; poly.len() + 1];
        for (i, c) in poly.iter().enumerate() {
            next[i] += c;
            next[i + 1] -= c;
        }
        poly = next;
    }
    let a: Vec<f64> = poly[1..].iter().map(|v| -v).collect();
    let mut psi = vec![0.0; n];
    if n == 0 {
        return psi;
    }
    psi[0] = 1.0;
    for j in 1..n {
        let mut v = if j <= ma.len() { ma[j - 1] } else { 0.0 };
        for (i, ai) in a.iter().enumerate() {
            if j > i {
                v += ai * psi[j - 1 - i];
            }
        }
        psi[j] = v;
    }
    psi
}

/// h-step forecasts in levels with psi-weight forecast-error variances.
pub fn forecast_arima(fit: &ArimaFit, h: usize, future_exog: Option<&Table>) -> Result<ForecastPath> {
    if h == 0 {
        return Err(Error::InvalidParameter("forecast horizon must be at least 1".into()));
    }
    let k = fit.exog_coeffs.len();
    let regression: Vec<f64> = match (k, future_exog) {
        (0, None) => vec![0.0; h],
        (0, Some(_)) => {
            return Err(Error::ShapeMismatch("model has no regressors but future values were given".into()))
        }
        (_, None) => return Err(Error::ShapeMismatch(format!("{k} future regressors required"))),
        (_, Some(t)) => {
            if t.nrows() != h || t.ncols() != k {
                return Err(Error::ShapeMismatch(format!(
                    "future regressors are {}×{}, expected {h}×{k}",
                    t.nrows(),
                    t.ncols()
                )));
            }
            (0..h)
                .map(|s| t.row(s).iter().zip(&fit.exog_coeffs).map(|(x, b)| x * b).sum())
                .collect()
        }
    };
    let m = fit.arma_part.len();
    let mut u = fit.arma_part.clone();
    let mut eps = fit.eps_full.clone();
    let mut increments = Vec::with_capacity(h);
    for s in 0..h {
        let t = m + s;
        let mut v = 0.0;
        for (i, phi) in fit.ar_coeffs.iter().enumerate() {
            if t > i {
                v += phi * u[t - 1 - i];
            }
        }
        for (j, theta) in fit.ma_coeffs.iter().enumerate() {
            if t > j {
                v += theta * eps[t - 1 - j];
            }
        }
        u.push(v);
        eps.push(0.0);
        increments.push(v + fit.intercept);
    }
    let noise = undifference(&fit.noise_levels, fit.spec.d, &increments)?;
    let mean: Vec<f64> = noise.iter().zip(&regression).map(|(n, r)| n + r).collect();
    let psi = psi_weights(&fit.ar_coeffs, &fit.ma_coeffs, fit.spec.d, h);
    let mut acc = 0.0;
    let variance = psi
        .iter()
        .map(|p| {
            acc += p * p;
            fit.sigma2 * acc
        })
        .collect();
    Ok(ForecastPath::new(fit.name.clone(), fit.last_date.add_months(1), mean, Some(variance)))
}
