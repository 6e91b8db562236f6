use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;

use super::{Hyper, Learned, RegressorFit, TargetScale};
use crate::error::{Error, Result};
use crate::sim;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SvrLoss {
    /// ε-insensitive loss `C Σ ξ`.
    L1,
    /// Squared ε-insensitive loss `(C/2) Σ ξ²`.
    L2,
}

#[derive(Debug, Clone)]
pub struct SvrSolution {
    pub w: Vec<f64>,
    pub bias: f64,
    /// Dual variables, one per sample.
    pub dual: Vec<f64>,
    pub sweeps: usize,
    /// Primal objective at `(w, bias)`.
    pub objective: f64,
    /// `Σ ξ` for L1, `Σ ξ²` for L2.
    pub slack: f64,
}

const MAX_SWEEPS: usize = 50_000;
const TOL: f64 = 1e-9;

fn slack_term(x: &DMatrix<f64>, y: &[f64], w: &[f64], bias: f64, loss: SvrLoss, epsilon: f64) -> f64 {
    x.row_iter()
        .zip(y)
        .map(|(r, t)| {
            let f = bias + r.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
            let xi = ((t - f).abs() - epsilon).max(0.0);
            match loss {
                SvrLoss::L1 => xi,
                SvrLoss::L2 => xi * xi,
            }
        })
        .sum()
}

/// Primal objective `½(‖w‖² + b²) + C Σ ξ` (L1) or `½(‖w‖² + b²) + (C/2) Σ ξ²`
/// (L2). The bias is a constant feature and is regularised with `w`.
pub fn svr_objective(x: &DMatrix<f64>, y: &[f64], w: &[f64], bias: f64, c: f64, loss: SvrLoss, epsilon: f64) -> f64 {
    let reg = 0.5 * (w.iter().map(|v| v * v).sum::<f64>() + bias * bias);
    let s = slack_term(x, y, w, bias, loss, epsilon);
    reg + match loss {
        SvrLoss::L1 => c * s,
        SvrLoss::L2 => 0.5 * c * s,
    }
}

/// Linear SVR by dual coordinate descent on the data as given.
pub fn svr_solve(x: &DMatrix<f64>, y: &[f64], c: f64, loss: SvrLoss, epsilon: f64) -> Result<SvrSolution> {
    let (n, p) = x.shape();
    if y.len() != n || n == 0 {
        return Err(Error::ShapeMismatch(format!("{n} rows against {} targets", y.len())));
    }
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::InvalidParameter(format!("SVR cost {c} must be positive")));
    }
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidParameter(format!("SVR tube width {epsilon}")));
    }
    // augmented rows (x_i, 1)
    let xa = DMatrix::from_fn(n, p + 1, |i, j| if j < p { x[(i, j)] } else { 1.0 });
    let (upper, diag) = match loss {
        SvrLoss::L1 => (c, 0.0),
        SvrLoss::L2 => (f64::INFINITY, 1.0 / c),
    };
    let qii: Vec<f64> = xa.row_iter().map(|r| r.norm_squared() + diag).collect();
    let mut beta = vec![0.0; n];
    let mut w = DVector::<f64>::zeros(p + 1);
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = sim::rng(0x5EED);
    let mut sweeps = 0;
    loop {
        sweeps += 1;
        order.shuffle(&mut rng);
        let mut max_step = 0.0f64;
        let mut scale = 0.0f64;
        for &i in &order {
            let h = qii[i];
            if h <= 0.0 {
                continue;
            }
            let row = xa.row(i);
            let g = row.dot(&w.transpose()) - y[i] + diag * beta[i];
            let (gp, gn) = (g + epsilon, g - epsilon);
            let b = beta[i];
            let d = if gp < h * b {
                -gp / h
            } else if gn > h * b {
                -gn / h
            } else {
                -b
            };
            let new = (b + d).clamp(-upper, upper);
            let step = new - b;
            if step != 0.0 {
                beta[i] = new;
                w.axpy(step, &row.transpose(), 1.0);
            }
            max_step = max_step.max(step.abs() * h.sqrt());
            scale = scale.max(new.abs() * h.sqrt());
        }
        if !w.iter().all(|v| v.is_finite()) {
            return Err(Error::OptimizerFailed("SVR dual coordinate descent diverged".into()));
        }
        if max_step <= TOL * scale.max(1.0) {
            break;
        }
        if sweeps >= MAX_SWEEPS {
            return Err(Error::OptimizerFailed(format!("SVR did not converge in {MAX_SWEEPS} sweeps")));
        }
    }
    let bias = w[p];
    let wv: Vec<f64> = w.iter().take(p).copied().collect();
    let objective = svr_objective(x, y, &wv, bias, c, loss, epsilon);
    let slack = slack_term(x, y, &wv, bias, loss, epsilon);
    Ok(SvrSolution { w: wv, bias, dual: beta, sweeps, objective, slack })
}

/// Linear SVR on centred features and standardised targets; `epsilon` is in
/// standardised target units.
pub fn fit_svr(x: &DMatrix<f64>, y: &[f64], c: f64, loss: SvrLoss, epsilon: f64) -> Result<RegressorFit> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(Error::ShapeMismatch(format!("{n} rows against {} targets", y.len())));
    }
    let target = TargetScale::standardize(y);
    let ys = target.forward(y);
    let means: Vec<f64> = x.column_iter().map(|col| col.mean()).collect();
    let xc = DMatrix::from_fn(n, p, |i, j| x[(i, j)] - means[j]);
    let sol = svr_solve(&xc, &ys, c, loss, epsilon)?;
    let intercept = sol.bias - sol.w.iter().zip(&means).map(|(w, m)| w * m).sum::<f64>();
    Ok(RegressorFit {
        hyper: Hyper::Svr { c, loss, epsilon },
        n_features: p,
        feature_scaler: None,
        target,
        learned: Learned::Linear { intercept, coefficients: sol.w.clone() },
        objective: Some(sol.objective),
    })
}
