use nalgebra::DMatrix;
use rayon::prelude::*;

use super::{fit_regressor, ridge_lambda_grid, FitOptions, Hyper, ModelKind, RegressorFit, SvrLoss};
use crate::ensemble::{evaluate, CvSlices};
use crate::error::{Error, Result};

/// SVR tube width on standardised targets.
pub const DEFAULT_SVR_EPSILON: f64 = 0.1;

/// Tuning grids: k = 1..=10; C ∈ {4, 8, 16, 32} × {L1, L2}; λ = 2^−4 … 2^10;
/// hidden size 1..=10 × decay ∈ {0.1, 0.5, 1, 2, 4}.
pub fn default_grid(kind: ModelKind) -> Vec<Hyper> {
    match kind {
        ModelKind::Knn => (1..=10).map(|k| Hyper::Knn { k }).collect(),
        ModelKind::Ridge => ridge_lambda_grid().into_iter().map(|lambda| Hyper::Ridge { lambda }).collect(),
        ModelKind::Svr => [4.0, 8.0, 16.0, 32.0]
            .into_iter()
            .flat_map(|c| {
                [SvrLoss::L1, SvrLoss::L2].map(|loss| Hyper::Svr { c, loss, epsilon: DEFAULT_SVR_EPSILON })
            })
            .collect(),
        ModelKind::Ann => (1..=10)
            .flat_map(|hidden| [0.1, 0.5, 1.0, 2.0, 4.0].map(|decay| Hyper::Ann { hidden, decay }))
            .collect(),
    }
}

/// Lower is simpler: fewer neighbours, more shrinkage, lower cost, fewer
/// hidden units.
fn complexity(h: &Hyper) -> (f64, f64) {
    match *h {
        Hyper::Knn { k } => (k as f64, 0.0),
        Hyper::Ridge { lambda } => (-lambda, 0.0),
        Hyper::Svr { c, loss, epsilon } => (c, if loss == SvrLoss::L1 { -epsilon } else { 1.0 - epsilon }),
        Hyper::Ann { hidden, decay } => (hidden as f64, -decay),
    }
}

#[derive(Debug, Clone)]
pub struct GridResult {
    pub best: Hyper,
    pub best_score: f64,
    /// Refit of `best` on all rows.
    pub fit: RegressorFit,
    /// Mean validation MAPE per grid point; `None` where any fold failed.
    pub scores: Vec<(Hyper, Option<f64>)>,
}

/// Mean validation MAPE across folds for one grid point.
pub fn cv_score(hyper: &Hyper, x: &DMatrix<f64>, y: &[f64], cv: &CvSlices, opts: &FitOptions) -> Result<f64> {
    let mut total = 0.0;
    for fold in cv.folds() {
        let xt = x.rows(fold.train.start, fold.train.len()).into_owned();
        let xv = x.rows(fold.validation.start, fold.validation.len()).into_owned();
        let fit = fit_regressor(hyper, &xt, &y[fold.train.clone()], opts)?;
        let pred = fit.predict(&xv)?;
        total += evaluate("", &y[fold.validation.clone()], &pred)?.mape;
    }
    Ok(total / cv.folds().len() as f64)
}

pub fn grid_search(grid: &[Hyper], x: &DMatrix<f64>, y: &[f64], cv: &CvSlices, opts: &FitOptions) -> Result<GridResult> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty hyperparameter grid".into()));
    }
    if x.nrows() != y.len() || cv.n() > y.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} rows, {} targets, slices over {}",
            x.nrows(),
            y.len(),
            cv.n()
        )));
    }
    let scores: Vec<(Hyper, Option<f64>)> = grid
        .par_iter()
        .map(|h| (*h, cv_score(h, x, y, cv, opts).ok().filter(|s| s.is_finite())))
        .collect();
    let mut best: Option<(Hyper, f64)> = None;
    for (h, s) in &scores {
        let Some(s) = *s else { continue };
        best = match best {
            None => Some((*h, s)),
            Some((bh, bs)) => {
                let tie = (s - bs).abs() <= 1e-12 * bs.abs().max(1e-300);
                if (s < bs && !tie) || (tie && complexity(h) < complexity(&bh)) {
                    Some((*h, s))
                } else {
                    Some((bh, bs))
                }
            }
        };
    }
    let (best, best_score) =
        best.ok_or_else(|| Error::OptimizerFailed(format!("every {} grid point failed", grid[0].kind())))?;
    let fit = fit_regressor(&best, x, y, opts)?;
    Ok(GridResult { best, best_score, fit, scores })
}
