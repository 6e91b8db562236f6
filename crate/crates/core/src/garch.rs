//! ARMA(m, n) mean with GARCH(1,1) Gaussian innovations, estimated jointly
//! by maximum likelihood:
//!
//! ```text
//! y_t  = μ + Σθᵢ y_{t−i} + Σγⱼ ε_{t−j} + ε_t,   ε_t = σ_t z_t
//! σ²_t = α₀ + α₁ ε²_{t−1} + β₁ σ²_{t−1}
//! ```
//!
//! Positivity is built into the parameterisation: `α₀ = exp(a)`,
//! `α₁ + β₁ = 0.999·logistic(b)` with `α₁` taking a logistic share `s`.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::arima::{fit_arima_with, ArimaOptions, ArimaSpec};
use crate::diagnostics::{arch_lm, jarque_bera, ljung_box, TestReport};
use crate::error::{Error, Result};
use crate::forecast::ForecastPath;
use crate::optim::{bfgs, nelder_mead, numerical_hessian, BfgsOptions};
use crate::series::{TimeSeries, YearMonth};

/// Upper bound on `α₁ + β₁` imposed by the parameterisation.
pub const MAX_PERSISTENCE: f64 = 0.999;

/// `α₀ + α₁ε²_{t−1} + β₁σ²_{t−1}`.
pub fn variance_step(alpha0: f64, alpha1: f64, beta1: f64, eps2_prev: f64, var_prev: f64) -> Result<f64> {
    if !(alpha0 > 0.0) || !(alpha1 >= 0.0) || !(beta1 >= 0.0) || !(eps2_prev >= 0.0) || !(var_prev >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "variance recursion needs α0 > 0 and non-negative inputs, got ({alpha0}, {alpha1}, {beta1}, {eps2_prev}, {var_prev})"
        )));
    }
    Ok(alpha0 + alpha1 * eps2_prev + beta1 * var_prev)
}

/// `α₀ / (1 − α₁ − β₁)`, or `None` when the persistence is at least one.
pub fn unconditional_variance(alpha0: f64, alpha1: f64, beta1: f64) -> Option<f64> {
    let p = alpha1 + beta1;
    (p < 1.0).then(|| alpha0 / (1.0 - p))
}

#[derive(Debug, Clone)]
pub struct GarchFit {
    pub name: String,
    pub mean_order: (usize, usize),
    pub arma_ar: Vec<f64>,
    pub arma_ma: Vec<f64>,
    pub mu: f64,
    pub alpha0: f64,
    pub alpha1: f64,
    pub beta1: f64,
    pub persistence: f64,
    /// Mean-equation residuals `ε_t` from the conditioning offset onwards.
    pub residuals: Vec<f64>,
    pub cond_var: Vec<f64>,
    pub std_resid: Vec<f64>,
    pub loglik: f64,
    pub aic: f64,
    /// Standard errors in the order `μ, θ…, γ…, α₀, α₁, β₁`; NaN where the
    /// numerical Hessian is not positive definite.
    pub std_errors: Vec<f64>,
    /// `α₁` is zero or insignificant at 5%, so `β₁` is not identified.
    pub beta_unidentified: bool,
    /// Persistence reached the `0.999` bound.
    pub nonstationary_variance: bool,
    pub converged: bool,
    pub last_date: YearMonth,
    history: Vec<f64>,
}

impl GarchFit {
    pub fn param_names(&self) -> Vec<String> {
        let mut v = vec!["mu".to_string()];
        v.extend((1..=self.arma_ar.len()).map(|i| format!("ar{i}")));
        v.extend((1..=self.arma_ma.len()).map(|j| format!("ma{j}")));
        v.extend(["alpha0", "alpha1", "beta1"].map(String::from));
        v
    }

    fn natural(&self) -> Natural {
        Natural {
            mu: self.mu,
            ar: self.arma_ar.clone(),
            ma: self.arma_ma.clone(),
            alpha0: self.alpha0,
            alpha1: self.alpha1,
            beta1: self.beta1,
        }
    }

    /// One-step-ahead mean predictions over `series` using this fit's
    /// parameters; entry `t` predicts `series[t]` from data before `t`.
    /// The first `m` entries copy the observations.
    pub fn one_step_predictions(&self, series: &[f64]) -> Vec<f64> {
        let m = self.mean_order.0;
        let eps = mean_residuals(series, &self.natural());
        series
            .iter()
            .zip(&eps)
            .enumerate()
            .map(|(t, (y, e))| if t < m { *y } else { y - e })
            .collect()
    }
}

#[derive(Debug, Clone)]
struct Natural {
    mu: f64,
    ar: Vec<f64>,
    ma: Vec<f64>,
    alpha0: f64,
    alpha1: f64,
    beta1: f64,
}

impl Natural {
    fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![self.mu];
        v.extend(&self.ar);
        v.extend(&self.ma);
        v.extend([self.alpha0, self.alpha1, self.beta1]);
        v
    }

    fn from_slice(v: &[f64], m: usize, n: usize) -> Self {
        Self {
            mu: v[0],
            ar: v[1..1 + m].to_vec(),
            ma: v[1 + m..1 + m + n].to_vec(),
            alpha0: v[1 + m + n],
            alpha1: v[2 + m + n],
            beta1: v[3 + m + n],
        }
    }
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Mean-equation residuals; zero for the first `m` observations.
fn mean_residuals(y: &[f64], p: &Natural) -> Vec<f64> {
    let m = p.ar.len();
    let mut eps = vec![0.0; y.len()];
    for t in m..y.len() {
        let mut e = y[t] - p.mu;
        for (i, th) in p.ar.iter().enumerate() {
            e -= th * y[t - 1 - i];
        }
        for (j, g) in p.ma.iter().enumerate() {
            if t > j {
                e -= g * eps[t - 1 - j];
            }
        }
        eps[t] = e;
    }
    eps
}

/// Conditional variances for residuals `eps`, started at their mean square.
fn conditional_variances(eps: &[f64], alpha0: f64, alpha1: f64, beta1: f64) -> Vec<f64> {
    let n = eps.len();
    let s2 = eps.iter().map(|e| e * e).sum::<f64>() / n as f64;
    let mut var = Vec::with_capacity(n);
    let mut prev_var = s2;
    let mut prev_e2 = s2;
    for e in eps {
        let v = alpha0 + alpha1 * prev_e2 + beta1 * prev_var;
        var.push(v);
        prev_var = v;
        prev_e2 = e * e;
    }
    var
}

/// Gaussian log-likelihood of the usable sample.
fn loglik(y: &[f64], p: &Natural) -> f64 {
    let m = p.ar.len();
    let eps = mean_residuals(y, p);
    let var = conditional_variances(&eps[m..], p.alpha0, p.alpha1, p.beta1);
    let mut ll = 0.0;
    for (e, v) in eps[m..].iter().zip(&var) {
        if !(*v > 0.0) {
            return f64::NEG_INFINITY;
        }
        ll += (2.0 * std::f64::consts::PI * v).ln() + e * e / v;
    }
    -0.5 * ll
}

struct Transform {
    m: usize,
    n: usize,
    scale: f64,
}

impl Transform {
    /// Unconstrained (standardised-scale) vector to natural parameters.
    fn natural(&self, v: &[f64]) -> Natural {
        let (m, n, s) = (self.m, self.n, self.scale);
        let pers = MAX_PERSISTENCE * logistic(v[2 + m + n]);
        let share = logistic(v[3 + m + n]);
        Natural {
            mu: v[0] * s,
            ar: v[1..1 + m].to_vec(),
            ma: v[1 + m..1 + m + n].to_vec(),
            alpha0: v[1 + m + n].exp() * s * s,
            alpha1: pers * share,
            beta1: pers * (1.0 - share),
        }
    }

    fn unconstrained(&self, p: &Natural) -> Vec<f64> {
        let s = self.scale;
        let pers = (p.alpha1 + p.beta1).clamp(1e-6, MAX_PERSISTENCE * (1.0 - 1e-6));
        let share = (p.alpha1 / (p.alpha1 + p.beta1).max(1e-12)).clamp(1e-6, 1.0 - 1e-6);
        let mut v = vec![p.mu / s];
        v.extend(&p.ar);
        v.extend(&p.ma);
        v.push((p.alpha0 / (s * s)).ln());
        v.push(logit(pers / MAX_PERSISTENCE));
        v.push(logit(share));
        v
    }
}

/// Joint ARMA(m, n)-GARCH(1,1) maximum likelihood.
pub fn fit_arma_garch(series: &TimeSeries, mean_order: (usize, usize)) -> Result<GarchFit> {
    let (m, n) = mean_order;
    let y = series.values();
    if y.len() < m + n + 30 {
        return Err(Error::InsufficientData(format!(
            "ARMA({m},{n})-GARCH(1,1) needs at least {} observations, got {}",
            m + n + 30,
            y.len()
        )));
    }
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let scale = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / y.len() as f64).sqrt();
    if !(scale > 0.0) {
        return Err(Error::DegenerateSeries("constant series".into()));
    }
    let tr = Transform { m, n, scale };

    // Mean-equation starting values from a homoskedastic fit.
    let arma = fit_arima_with(
        series,
        None,
        ArimaSpec::new(m, 0, n),
        &ArimaOptions {
            intercept: Some(true),
            restarts: 2,
            ..Default::default()
        },
    )
    .ok();
    let (mu0, ar0, ma0, s2) = match &arma {
        // the ARIMA intercept is the process mean; convert to a regression constant
        Some(f) => (
            f.intercept * (1.0 - f.ar_coeffs.iter().sum::<f64>()),
            f.ar_coeffs.clone(),
            f.ma_coeffs.clone(),
            f.sigma2,
        ),
        None => (mean, vec![0.0; m], vec![0.0; n], scale * scale),
    };
    let starts: Vec<Natural> = [(0.1, 0.8), (0.05, 0.9), (0.2, 0.5), (0.02, 0.02)]
        .iter()
        .map(|&(a1, b1)| Natural {
            mu: mu0,
            ar: ar0.clone(),
            ma: ma0.clone(),
            alpha0: s2 * (1.0 - a1 - b1),
            alpha1: a1,
            beta1: b1,
        })
        .collect();

    let objective = |v: &[f64]| -> f64 { -loglik(y, &tr.natural(v)) };

    let mut best: Option<(Vec<f64>, f64, bool)> = None;
    for s in &starts {
        let v0 = tr.unconstrained(s);
        let f0 = objective(&v0);
        if let Some((_, bv, _)) = &best {
            if !f0.is_finite() && bv.is_finite() {
                continue;
            }
        }
        let r = bfgs(&objective, &v0, BfgsOptions::default());
        let (x, val, conv) = if r.value <= f0 { (r.x, r.value, r.converged) } else { (v0, f0, false) };
        if best.as_ref().map_or(true, |(_, bv, _)| val < *bv) {
            best = Some((x, val, conv));
        }
    }
    let (mut x, mut val, mut converged) = best.ok_or_else(|| Error::OptimizerFailed("no starting point".into()))?;
    if !val.is_finite() {
        return Err(Error::OptimizerFailed("likelihood is not finite at any start".into()));
    }
    // simplex polish, then one more quasi-Newton pass
    let nm = nelder_mead(&objective, &x, 0.05, 4000, 1e-12);
    if nm.value < val {
        let r = bfgs(&objective, &nm.x, BfgsOptions::default());
        if r.value <= nm.value {
            x = r.x;
            val = r.value;
            converged = r.converged;
        } else {
            x = nm.x;
            val = nm.value;
        }
    }

    let p = tr.natural(&x);
    let eps_all = mean_residuals(y, &p);
    let residuals = eps_all[m..].to_vec();
    let cond_var = conditional_variances(&residuals, p.alpha0, p.alpha1, p.beta1);
    let std_resid = residuals.iter().zip(&cond_var).map(|(e, v)| e / v.sqrt()).collect();
    let ll = -val;
    let k = 1 + m + n + 3;
    let persistence = p.alpha1 + p.beta1;

    let nat = p.to_vec();
    let nll = |v: &[f64]| -> f64 {
        let q = Natural::from_slice(v, m, n);
        if !(q.alpha0 > 0.0) || q.alpha1 < 0.0 || q.beta1 < 0.0 {
            return f64::NAN;
        }
        -loglik(y, &q)
    };
    let std_errors = hessian_std_errors(&nll, &nat);
    let beta_unidentified = {
        let se = std_errors[2 + m + n];
        p.alpha1 < 1e-3 || (se.is_finite() && p.alpha1 < 1.96 * se)
    };

    Ok(GarchFit {
        name: series.name().to_string(),
        mean_order,
        arma_ar: p.ar,
        arma_ma: p.ma,
        mu: p.mu,
        alpha0: p.alpha0,
        alpha1: p.alpha1,
        beta1: p.beta1,
        persistence,
        residuals,
        cond_var,
        std_resid,
        loglik: ll,
        aic: -2.0 * ll + 2.0 * k as f64,
        std_errors,
        beta_unidentified,
        nonstationary_variance: persistence >= MAX_PERSISTENCE * (1.0 - 1e-4),
        converged,
        last_date: series.end(),
        history: y.to_vec(),
    })
}

fn hessian_std_errors<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64]) -> Vec<f64> {
    let k = x.len();
    let h = numerical_hessian(f, x, 1e-4);
    if h.iter().flatten().any(|v| !v.is_finite()) {
        return vec![f64::NAN; k];
    }
    let hm = DMatrix::from_fn(k, k, |i, j| h[i][j]);
    match hm.try_inverse() {
        Some(inv) => (0..k)
            .map(|i| if inv[(i, i)] > 0.0 { inv[(i, i)].sqrt() } else { f64::NAN })
            .collect(),
        None => vec![f64::NAN; k],
    }
}

/// Mean forecasts by the ARMA recursion (future shocks zero) and conditional
/// variance forecasts `σ²_{T+k} = α₀ + (α₁+β₁)σ²_{T+k−1}`.
pub fn forecast_garch(fit: &GarchFit, h: usize) -> Result<ForecastPath> {
    if h == 0 {
        return Err(Error::InvalidParameter("forecast horizon must be at least 1".into()));
    }
    let m = fit.mean_order.0;
    let mut y = fit.history.clone();
    let mut eps = vec![0.0; m];
    eps.extend(&fit.residuals);
    let t0 = y.len();
    let mut mean = Vec::with_capacity(h);
    for s in 0..h {
        let t = t0 + s;
        let mut v = fit.mu;
        for (i, th) in fit.arma_ar.iter().enumerate() {
            v += th * y[t - 1 - i];
        }
        for (j, g) in fit.arma_ma.iter().enumerate() {
            v += g * eps[t - 1 - j];
        }
        y.push(v);
        eps.push(0.0);
        mean.push(v);
    }
    let last_e = *fit.residuals.last().expect("fit has residuals");
    let last_v = *fit.cond_var.last().expect("fit has variances");
    let mut var = vec![variance_step(fit.alpha0, fit.alpha1, fit.beta1, last_e * last_e, last_v)?];
    for k in 1..h {
        let prev = var[k - 1];
        var.push(fit.alpha0 + fit.persistence * prev);
    }
    Ok(ForecastPath::new(fit.name.clone(), fit.last_date.add_months(1), mean, Some(var)))
}

/// Standardised-residual battery: Ljung-Box on `z` and `z²` at lags 10, 15
/// and 20, ARCH-LM(12) on `z`, and Jarque-Bera on `z`.
pub fn diagnose_fit(fit: &GarchFit) -> Vec<TestReport> {
    let z = &fit.std_resid;
    let z2: Vec<f64> = z.iter().map(|v| v * v).collect();
    let arma = fit.mean_order.0 + fit.mean_order.1;
    let mut out = Vec::new();
    let mut push = |r: Result<TestReport>, label: &str| match r {
        Ok(mut t) => {
            t.test_name = format!("{} {label}", t.test_name);
            out.push(t);
        }
        Err(e) => out.push(TestReport {
            test_name: format!("{label}: {e}"),
            statistic: f64::NAN,
            p_value: 1.0,
            lags_or_order: 0,
            reject_at_5pct: false,
        }),
    };
    for lags in [10, 15, 20] {
        push(ljung_box(z, lags, arma), "residuals");
    }
    for lags in [10, 15, 20] {
        push(ljung_box(&z2, lags, 0), "squared residuals");
    }
    push(arch_lm(z, 12), "residuals");
    push(jarque_bera(z), "residuals");
    out
}

/// Outcome of one candidate mean order in [`select_garch_order`].
#[derive(Debug, Clone)]
pub struct GarchCandidate {
    pub mean_order: (usize, usize),
    /// One-step MAPE on the holdout, as a fraction.
    pub holdout_mape: f64,
    pub diagnostics_pass: bool,
    pub aic: f64,
    pub error: Option<String>,
}

/// Order choice by holdout prediction error among candidates whose
/// diagnostic battery does not reject at 5%.
#[derive(Debug, Clone)]
pub struct GarchSelection {
    pub chosen: (usize, usize),
    pub fit: GarchFit,
    pub candidates: Vec<GarchCandidate>,
    /// No candidate passed the diagnostics; the lowest-MAPE fit was kept.
    pub fallback: bool,
}

/// Fits each candidate on the first `fit_fraction` of `train`, scores
/// one-step predictions on the rest, and refits the winner on all of `train`.
pub fn select_garch_order(
    train: &TimeSeries,
    candidates: &[(usize, usize)],
    fit_fraction: f64,
    require_normality: bool,
) -> Result<GarchSelection> {
    let cut = crate::series::split_point(train.len(), fit_fraction)?;
    let head = train.slice(0..cut)?;
    let y = train.values();
    let results: Vec<GarchCandidate> = candidates
        .par_iter()
        .map(|&order| match fit_arma_garch(&head, order) {
            Ok(fit) => {
                let pred = fit.one_step_predictions(y);
                let mut acc = 0.0;
                let mut cnt = 0usize;
                for t in cut..y.len() {
                    if y[t] != 0.0 {
                        acc += ((y[t] - pred[t]) / y[t]).abs();
                        cnt += 1;
                    }
                }
                let pass = diagnose_fit(&fit)
                    .iter()
                    .filter(|r| require_normality || !r.test_name.starts_with("Jarque-Bera"))
                    .all(|r| !r.reject_at_5pct);
                GarchCandidate {
                    mean_order: order,
                    holdout_mape: if cnt > 0 { acc / cnt as f64 } else { f64::NAN },
                    diagnostics_pass: pass,
                    aic: fit.aic,
                    error: None,
                }
            }
            Err(e) => GarchCandidate {
                mean_order: order,
                holdout_mape: f64::NAN,
                diagnostics_pass: false,
                aic: f64::NAN,
                error: Some(e.to_string()),
            },
        })
        .collect();
    let pick = |need_pass: bool| {
        results
            .iter()
            .filter(|c| c.holdout_mape.is_finite() && (!need_pass || c.diagnostics_pass))
            .min_by(|a, b| a.holdout_mape.total_cmp(&b.holdout_mape))
            .map(|c| c.mean_order)
    };
    let (chosen, fallback) = match pick(true) {
        Some(o) => (o, false),
        None => (
            pick(false).ok_or_else(|| Error::OptimizerFailed("every GARCH candidate failed".into()))?,
            true,
        ),
    };
    Ok(GarchSelection {
        chosen,
        fit: fit_arma_garch(train, chosen)?,
        candidates: results,
        fallback,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim;

    #[test]
    fn variance_step_examples() {
        let v = variance_step(2027.8896, 0.1277, 0.4095, 1000.0, 3000.0).unwrap();
        assert!((v - 3384.0896).abs() < 1e-9);
        assert_eq!(variance_step(2.5, 0.0, 0.0, 7.0, 9.0).unwrap(), 2.5);
        assert!(variance_step(0.0, 0.1, 0.1, 1.0, 1.0).is_err());
        assert!(variance_step(1.0, -0.1, 0.1, 1.0, 1.0).is_err());
        let u = unconditional_variance(2027.8896, 0.1277, 0.4095).unwrap();
        assert!((u - 2027.8896 / 0.4628).abs() < 1e-9);
        assert!((u - 4381.8).abs() < 0.1);
        assert!(unconditional_variance(1.0, 0.5, 0.5).is_none());
    }

    #[test]
    fn transform_round_trip() {
        let tr = Transform { m: 1, n: 1, scale: 3.0 };
        let p = Natural { mu: 1.5, ar: vec![0.4], ma: vec![-0.2], alpha0: 0.7, alpha1: 0.15, beta1: 0.7 };
        let q = tr.natural(&tr.unconstrained(&p));
        assert!((q.alpha0 - 0.7).abs() < 1e-12);
        assert!((q.alpha1 - 0.15).abs() < 1e-12);
        assert!((q.beta1 - 0.7).abs() < 1e-12);
        assert!((q.mu - 1.5).abs() < 1e-12);
    }

    #[test]
    fn forecast_variance_closed_form() {
        let y = sim::garch11(&mut sim::rng(12), 0.5, 0.2, 0.1, 0.8, 800);
        let fit = fit_arma_garch(&TimeSeries::from_values(y).unwrap(), (0, 0)).unwrap();
        let fc = forecast_garch(&fit, 30).unwrap();
        let var = fc.variance.unwrap();
        let e = fit.residuals.last().unwrap();
        let one = variance_step(fit.alpha0, fit.alpha1, fit.beta1, e * e, *fit.cond_var.last().unwrap()).unwrap();
        assert_eq!(var[0], one);
        let p = fit.persistence;
        for k in 1..=30 {
            let geo: f64 = (0..k - 1).map(|j| p.powi(j as i32)).sum();
            let closed = fit.alpha0 * geo + p.powi(k as i32 - 1) * one;
            assert!((var[k - 1] - closed).abs() < 1e-9 * closed.abs().max(1.0));
        }
        let target = unconditional_variance(fit.alpha0, fit.alpha1, fit.beta1).unwrap();
        for w in var.windows(2) {
            assert!((w[1] - target).abs() <= (w[0] - target).abs() + 1e-15);
        }
        assert_eq!(fit.persistence, fit.alpha1 + fit.beta1);
    }
}
