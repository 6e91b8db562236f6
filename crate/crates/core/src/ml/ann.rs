use nalgebra::DMatrix;
use rand::Rng;

use super::{Hyper, Learned, RegressorFit, TargetScale};
use crate::error::{Error, Result};
use crate::sim;

/// One hidden logistic layer, bias on hidden and output nodes, linear output.
/// Parameters are flat: for each hidden unit `j`, its bias and `p` input
/// weights; then the output bias and the `h` hidden-to-output weights.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnNet {
    pub inputs: usize,
    pub hidden: usize,
    pub params: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnOptions {
    pub max_iter: usize,
    pub learning_rate: f64,
    pub init_range: f64,
}

impl Default for AnnOptions {
    fn default() -> Self {
        Self { max_iter: 5000, learning_rate: 5.0, init_range: 0.5 }
    }
}

fn logistic(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

impl AnnNet {
    pub fn n_params(inputs: usize, hidden: usize) -> usize {
        hidden * (inputs + 1) + hidden + 1
    }

    pub fn new(inputs: usize, hidden: usize, params: Vec<f64>) -> Result<Self> {
        if params.len() != Self::n_params(inputs, hidden) {
            return Err(Error::ShapeMismatch(format!(
                "{} parameters for a {inputs}-{hidden}-1 network",
                params.len()
            )));
        }
        Ok(Self { inputs, hidden, params })
    }

    fn output_offset(&self) -> usize {
        self.hidden * (self.inputs + 1)
    }

    fn forward_row(&self, row: &[f64], act: &mut [f64]) -> f64 {
        let p = self.inputs;
        for (j, a) in act.iter_mut().enumerate() {
            let w = &self.params[j * (p + 1)..(j + 1) * (p + 1)];
            *a = logistic(w[0] + w[1..].iter().zip(row).map(|(u, v)| u * v).sum::<f64>());
        }
        let o = self.output_offset();
        self.params[o] + act.iter().zip(&self.params[o + 1..]).map(|(a, v)| a * v).sum::<f64>()
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        let mut act = vec![0.0; self.hidden];
        let mut row = vec![0.0; self.inputs];
        x.row_iter()
            .map(|r| {
                row.iter_mut().zip(r.iter()).for_each(|(d, s)| *d = *s);
                self.forward_row(&row, &mut act)
            })
            .collect()
    }

    /// `Σ (y − ŷ)² + decay·Σ w²` over all weights and biases, with its
    /// gradient by backpropagation.
    pub fn loss_and_gradient(&self, x: &DMatrix<f64>, y: &[f64], decay: f64) -> (f64, Vec<f64>) {
        let p = self.inputs;
        let o = self.output_offset();
        let mut grad: Vec<f64> = self.params.iter().map(|w| 2.0 * decay * w).collect();
        let mut loss = decay * self.params.iter().map(|w| w * w).sum::<f64>();
        let mut act = vec![0.0; self.hidden];
        let mut row = vec![0.0; p];
        for (r, &t) in x.row_iter().zip(y) {
            row.iter_mut().zip(r.iter()).for_each(|(d, s)| *d = *s);
            let out = self.forward_row(&row, &mut act);
            let err = out - t;
            loss += err * err;
            let delta = 2.0 * err;
            grad[o] += delta;
            for j in 0..self.hidden {
                let v = self.params[o + 1 + j];
                grad[o + 1 + j] += delta * act[j];
                let dh = delta * v * act[j] * (1.0 - act[j]);
                let base = j * (p + 1);
                grad[base] += dh;
                for (k, xv) in row.iter().enumerate() {
                    grad[base + 1 + k] += dh * xv;
                }
            }
        }
        (loss, grad)
    }
}

/// Trains by full-batch gradient descent. Targets are mapped to the unit
/// interval for training and mapped back on prediction.
pub fn fit_ann(x: &DMatrix<f64>, y: &[f64], hidden: usize, decay: f64, seed: u64) -> Result<RegressorFit> {
    fit_ann_with(x, y, hidden, decay, seed, &AnnOptions::default())
}

pub fn fit_ann_with(x: &DMatrix<f64>, y: &[f64], hidden: usize, decay: f64, seed: u64, opts: &AnnOptions) -> Result<RegressorFit> {
    let (n, p) = x.shape();
    if y.len() != n || n == 0 {
        return Err(Error::ShapeMismatch(format!("{n} rows against {} targets", y.len())));
    }
    if !(1..=10).contains(&hidden) {
        return Err(Error::InvalidParameter(format!("hidden size {hidden} outside 1..=10")));
    }
    if !(decay >= 0.0) {
        return Err(Error::InvalidParameter(format!("decay {decay}")));
    }
    let target = TargetScale::unit_interval(y);
    let ys = target.forward(y);
    let mut rng = sim::rng(seed);
    let init: Vec<f64> = (0..AnnNet::n_params(p, hidden))
        .map(|_| rng.random_range(-opts.init_range..opts.init_range))
        .collect();
    let mut net = AnnNet::new(p, hidden, init)?;
    // step is per observation so the rate is insensitive to sample size
    let mut lr = opts.learning_rate / n as f64;
    let (mut loss, mut grad) = net.loss_and_gradient(x, &ys, decay);
    for _ in 0..opts.max_iter {
        let trial: Vec<f64> = net.params.iter().zip(&grad).map(|(w, g)| w - lr * g).collect();
        let candidate = AnnNet { params: trial, ..net.clone() };
        let (l, g) = candidate.loss_and_gradient(x, &ys, decay);
        if !l.is_finite() {
            return Err(Error::OptimizerFailed("network loss became non-finite".into()));
        }
        if l > loss {
            lr *= 0.5;
            if lr < 1e-300 {
                break;
            }
            continue;
        }
        net = candidate;
        loss = l;
        grad = g;
    }
    if !loss.is_finite() {
        return Err(Error::OptimizerFailed("network loss became non-finite".into()));
    }
    Ok(RegressorFit {
        hyper: Hyper::Ann { hidden, decay },
        n_features: p,
        feature_scaler: None,
        target,
        learned: Learned::Ann(net),
        objective: Some(loss),
    })
}
