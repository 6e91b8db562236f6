//! Seeded data-generating processes used by Monte Carlo checks, examples and
//! the synthetic demo dataset.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normals<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// ARMA(p, q) with Gaussian innovations:
/// `y_t = c + Σφᵢy_{t−i} + ε_t + Σθⱼε_{t−j}`. A burn-in of 500 draws is discarded.
pub fn arma<R: Rng>(rng: &mut R, intercept: f64, ar: &[f64], ma: &[f64], sigma: f64, n: usize) -> Vec<f64> {
    let burn = 500;
    let total = n + burn;
    let eps: Vec<f64> = normals(rng, total).into_iter().map(|z| z * sigma).collect();
    let mut y = vec![0.0; total];
    for t in 0..total {
        let mut v = intercept + eps[t];
        for (i, &phi) in ar.iter().enumerate() {
            if t > i {
                v += phi * y[t - 1 - i];
            }
        }
        for (j, &theta) in ma.iter().enumerate() {
            if t > j {
                v += theta * eps[t - 1 - j];
            }
        }
        y[t] = v;
    }
    y.split_off(burn)
}

pub fn random_walk<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let mut level = 0.0;
    normals(rng, n)
        .into_iter()
        .map(|e| {
            level += e;
            level
        })
        .collect()
}

/// GARCH(1,1) innovations around a constant mean.
pub fn garch11<R: Rng>(rng: &mut R, mu: f64, alpha0: f64, alpha1: f64, beta1: f64, n: usize) -> Vec<f64> {
    let burn = 500;
    let z = normals(rng, n + burn);
    let mut var = alpha0 / (1.0 - alpha1 - beta1).max(1e-6);
    let mut eps_prev = 0.0;
    let mut out = Vec::with_capacity(n);
    for (t, zt) in z.into_iter().enumerate() {
        var = alpha0 + alpha1 * eps_prev * eps_prev + beta1 * var;
        let eps = var.sqrt() * zt;
        eps_prev = eps;
        if t >= burn {
            out.push(mu + eps);
        }
    }
    out
}

/// VAR(p) `y_t = c + Σ A_i y_{t−i} + u_t` with `u_t ~ N(0, Σ)`. Returns one
/// vector per variable.
pub fn var<R: Rng>(rng: &mut R, intercept: &[f64], lags: &[DMatrix<f64>], sigma: &DMatrix<f64>, n: usize) -> Vec<Vec<f64>> {
    let k = intercept.len();
    let chol = nalgebra::Cholesky::new(sigma.clone())
        .expect("innovation covariance must be positive definite")
        .l();
    let burn = 500;
    let c = DVector::from_column_slice(intercept);
    let mut hist: Vec<DVector<f64>> = Vec::with_capacity(n + burn);
    for t in 0..n + burn {
        let z = DVector::from_vec(normals(rng, k));
        let mut y = &c + &chol * z;
        for (i, a) in lags.iter().enumerate() {
            if t > i {
                y += a * &hist[t - 1 - i];
            }
        }
        hist.push(y);
    }
    (0..k)
        .map(|j| hist[burn..].iter().map(|v| v[j]).collect())
        .collect()
}
