use nalgebra::{DMatrix, DVector};

use super::{Hyper, Learned, RegressorFit, TargetScale};
use crate::error::{Error, Result};

/// `2^e` for `e = −4..=10`.
pub fn ridge_lambda_grid() -> Vec<f64> {
    (-4..=10).map(|e| 2f64.powi(e)).collect()
}

/// Minimises `RSS + λ‖β‖²` with an unpenalised intercept, solved on
/// centred data.
pub fn fit_ridge(x: &DMatrix<f64>, y: &[f64], lambda: f64) -> Result<RegressorFit> {
    let (n, p) = x.shape();
    if n < 2 || y.len() != n {
        return Err(Error::InsufficientData(format!("{n} rows, {} targets", y.len())));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!("ridge penalty {lambda}")));
    }
    let means: Vec<f64> = x.column_iter().map(|c| c.mean()).collect();
    let ybar = y.iter().sum::<f64>() / n as f64;
    let xc = DMatrix::from_fn(n, p, |i, j| x[(i, j)] - means[j]);
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - ybar));
    let gram = xc.transpose() * &xc;
    let a = &gram + DMatrix::identity(p, p) * lambda;
    let chol = a.clone().cholesky().ok_or_else(|| Error::SingularDesign("penalised normal equations".into()))?;
    if lambda == 0.0 {
        // relative pivot test; exact collinearity rarely fails the factorisation outright
        let l = chol.l();
        let scale = gram.diagonal().max();
        let min_pivot = l.diagonal().iter().map(|v| v * v).fold(f64::INFINITY, f64::min);
        if !(scale > 0.0) || min_pivot <= 1e-12 * scale {
            return Err(Error::SingularDesign("collinear columns with zero penalty".into()));
        }
    }
    let beta = chol.solve(&(xc.transpose() * yc));
    let intercept = ybar - beta.iter().zip(&means).map(|(b, m)| b * m).sum::<f64>();
    let coefficients: Vec<f64> = beta.iter().copied().collect();
    let rss: f64 = x
        .row_iter()
        .zip(y)
        .map(|(r, t)| (t - intercept - r.iter().zip(&coefficients).map(|(a, b)| a * b).sum::<f64>()).powi(2))
        .sum();
    let penalty = lambda * coefficients.iter().map(|b| b * b).sum::<f64>();
    Ok(RegressorFit {
        hyper: Hyper::Ridge { lambda },
        n_features: p,
        feature_scaler: None,
        target: TargetScale::IDENTITY,
        learned: Learned::Linear { intercept, coefficients },
        objective: Some(rss + penalty),
    })
}
