//! Feature construction by PCA and four regressors behind one fit/predict
//! contract: nearest neighbours, ridge, linear SVR and a one-hidden-layer
//! network.

mod ann;
mod grid;
mod knn;
mod pca;
mod ridge;
mod svr;

pub use ann::{fit_ann, fit_ann_with, AnnNet, AnnOptions};
pub use grid::{cv_score, default_grid, grid_search, GridResult, DEFAULT_SVR_EPSILON};
pub use knn::knn_predict;
pub use pca::{fit_pca, PcaModel};
pub use ridge::{fit_ridge, ridge_lambda_grid};
pub use svr::{fit_svr, svr_objective, svr_solve, SvrLoss, SvrSolution};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Knn,
    Ridge,
    Svr,
    Ann,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Knn, ModelKind::Ridge, ModelKind::Svr, ModelKind::Ann];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Knn => "knn",
            ModelKind::Ridge => "ridge",
            ModelKind::Svr => "svr",
            ModelKind::Ann => "ann",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Hyper {
    Knn { k: usize },
    Ridge { lambda: f64 },
    Svr { c: f64, loss: SvrLoss, epsilon: f64 },
    Ann { hidden: usize, decay: f64 },
}

impl Hyper {
    pub fn kind(&self) -> ModelKind {
        match self {
            Hyper::Knn { .. } => ModelKind::Knn,
            Hyper::Ridge { .. } => ModelKind::Ridge,
            Hyper::Svr { .. } => ModelKind::Svr,
            Hyper::Ann { .. } => ModelKind::Ann,
        }
    }
}

impl std::fmt::Display for Hyper {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Hyper::Knn { k } => write!(f, "knn(k={k})"),
            Hyper::Ridge { lambda } => write!(f, "ridge(lambda={lambda})"),
            Hyper::Svr { c, loss, epsilon } => write!(f, "svr(C={c}, loss={loss:?}, eps={epsilon})"),
            Hyper::Ann { hidden, decay } => write!(f, "ann(size={hidden}, decay={decay})"),
        }
    }
}

/// Per-column min-max scaling to the unit interval.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureScaler {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
}

impl FeatureScaler {
    pub fn fit(x: &DMatrix<f64>) -> Result<Self> {
        let mut mins = Vec::with_capacity(x.ncols());
        let mut maxs = Vec::with_capacity(x.ncols());
        for (j, col) in x.column_iter().enumerate() {
            let lo = col.min();
            let hi = col.max();
            if !(hi > lo) {
                return Err(Error::DegenerateColumn(format!("feature {j}")));
            }
            mins.push(lo);
            maxs.push(hi);
        }
        Ok(Self { mins, maxs })
    }

    pub fn transform(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| (x[(i, j)] - self.mins[j]) / (self.maxs[j] - self.mins[j]))
    }
}

/// Affine target map `y ↦ (y − shift)/scale` applied during training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct TargetScale {
    shift: f64,
    scale: f64,
}

impl TargetScale {
    pub(crate) const IDENTITY: TargetScale = TargetScale { shift: 0.0, scale: 1.0 };

    pub(crate) fn standardize(y: &[f64]) -> Self {
        let n = y.len() as f64;
        let mean = y.iter().sum::<f64>() / n;
        let sd = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        Self { shift: mean, scale: if sd > 0.0 { sd } else { 1.0 } }
    }

    pub(crate) fn unit_interval(y: &[f64]) -> Self {
        let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self { shift: lo, scale: if hi > lo { hi - lo } else { 1.0 } }
    }

    pub(crate) fn forward(&self, y: &[f64]) -> Vec<f64> {
        y.iter().map(|v| (v - self.shift) / self.scale).collect()
    }

    pub(crate) fn back(&self, v: f64) -> f64 {
        self.shift + v * self.scale
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Learned {
    Knn { x: DMatrix<f64>, y: Vec<f64>, k: usize },
    Linear { intercept: f64, coefficients: Vec<f64> },
    Ann(AnnNet),
}

/// A fitted regressor. Prediction is a pure function of the fit.
#[derive(Debug, Clone)]
pub struct RegressorFit {
    pub hyper: Hyper,
    pub n_features: usize,
    /// Present when features were min-max scaled before training.
    pub feature_scaler: Option<FeatureScaler>,
    pub(crate) target: TargetScale,
    pub(crate) learned: Learned,
    /// Training objective at the solution, where the method has one.
    pub objective: Option<f64>,
}

impl RegressorFit {
    pub fn kind(&self) -> ModelKind {
        self.hyper.kind()
    }

    /// `(intercept, coefficients)` for ridge and SVR, on the training scale of
    /// the features and in target units.
    pub fn linear_coefficients(&self) -> Option<(f64, &[f64])> {
        match &self.learned {
            Learned::Linear { intercept, coefficients } => Some((*intercept, coefficients)),
            _ => None,
        }
    }

    pub fn network(&self) -> Option<&AnnNet> {
        match &self.learned {
            Learned::Ann(net) => Some(net),
            _ => None,
        }
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.n_features {
            return Err(Error::ShapeMismatch(format!("{} features expected, got {}", self.n_features, x.ncols())));
        }
        let scaled;
        let x = match &self.feature_scaler {
            Some(s) => {
                scaled = s.transform(x);
                &scaled
            }
            None => x,
        };
        let raw = match &self.learned {
            Learned::Knn { x: tx, y, k } => knn_predict(tx, y, x, *k)?,
            Learned::Linear { intercept, coefficients } => x
                .row_iter()
                .map(|r| intercept + r.iter().zip(coefficients).map(|(a, b)| a * b).sum::<f64>())
                .collect(),
            Learned::Ann(net) => net.predict(x),
        };
        let out: Vec<f64> = raw.into_iter().map(|v| self.target.back(v)).collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("{} prediction", self.hyper)));
        }
        Ok(out)
    }

    pub fn predict_row(&self, row: &[f64]) -> Result<f64> {
        Ok(self.predict(&DMatrix::from_row_slice(1, row.len(), row))?[0])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FitOptions {
    /// Min-max scale features on the training rows before fitting.
    pub scale_features: bool,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { scale_features: true, seed: 0 }
    }
}

/// Fits any regressor from its hyperparameters.
pub fn fit_regressor(hyper: &Hyper, x: &DMatrix<f64>, y: &[f64], opts: &FitOptions) -> Result<RegressorFit> {
    if x.nrows() != y.len() {
        return Err(Error::ShapeMismatch(format!("{} rows against {} targets", x.nrows(), y.len())));
    }
    let scaler = if opts.scale_features { Some(FeatureScaler::fit(x)?) } else { None };
    let xs = match &scaler {
        Some(s) => s.transform(x),
        None => x.clone(),
    };
    let mut fit = match *hyper {
        Hyper::Knn { k } => {
            if k == 0 || k > xs.nrows() {
                return Err(Error::InvalidParameter(format!("k = {k} with {} training rows", xs.nrows())));
            }
            RegressorFit {
                hyper: *hyper,
                n_features: x.ncols(),
                feature_scaler: None,
                target: TargetScale::IDENTITY,
                learned: Learned::Knn { x: xs, y: y.to_vec(), k },
                objective: None,
            }
        }
        Hyper::Ridge { lambda } => fit_ridge(&xs, y, lambda)?,
        Hyper::Svr { c, loss, epsilon } => fit_svr(&xs, y, c, loss, epsilon)?,
        Hyper::Ann { hidden, decay } => fit_ann(&xs, y, hidden, decay, opts.seed)?,
    };
    fit.feature_scaler = scaler;
    Ok(fit)
}
