//! Regenerates `src/eg_quantiles.in`: quantiles of the Dickey-Fuller τ on
//! residuals from regressing one random walk on another (with constant).
//!
//! `cargo run --release -p tsecon --example eg_quantiles > crates/core/src/eg_quantiles.in`

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use tsecon::{diagnostics::adf, diagnostics::Deterministic, linalg::ols, sim};

const PROBS: [f64; 8] = [0.01, 0.025, 0.05, 0.10, 0.90, 0.95, 0.975, 0.99];
const SIZES: [usize; 7] = [25, 50, 100, 250, 500, 1000, 2000];
const REPS: u64 = 200_000;

fn tau(seed: u64, n: usize) -> f64 {
    let mut rng = sim::rng(seed);
    let y = sim::random_walk(&mut rng, n);
    let x = sim::random_walk(&mut rng, n);
    let design = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { x[i] });
    let fit = ols(&design, &DVector::from_vec(y)).unwrap();
    let r: Vec<f64> = fit.residuals.iter().copied().collect();
    adf(&r, 0, Deterministic::None, false).unwrap().statistic
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let w = h - lo as f64;
    sorted[lo] * (1.0 - w) + sorted[(lo + 1).min(sorted.len() - 1)] * w
}

fn main() {
    let mut q = Vec::new();
    for (s, &n) in SIZES.iter().enumerate() {
        let mut v: Vec<f64> = (0..REPS)
            .into_par_iter()
            .map(|i| tau(1_000_000 * (s as u64 + 1) + i, n))
            .collect();
        v.sort_by(f64::total_cmp);
        q.push(PROBS.map(|p| quantile(&v, p)));
        eprintln!("T={n}: {:?}", q.last().unwrap());
    }
    // response surface q(T) = c0 + c1/T + c2/T² per quantile
    let x = DMatrix::from_fn(SIZES.len(), 3, |i, j| (1.0 / SIZES[i] as f64).powi(j as i32));
    let rows = [25usize, 50, 100, 250, 500, 0];
    println!("[");
    for &t in &rows {
        let vals: Vec<String> = (0..PROBS.len())
            .map(|j| {
                let y = DVector::from_fn(SIZES.len(), |i, _| q[i][j]);
                let c = ols(&x, &y).unwrap().coefficients;
                let inv = if t == 0 { 0.0 } else { 1.0 / t as f64 };
                format!("{:.4}", c[0] + c[1] * inv + c[2] * inv * inv)
            })
            .collect();
        println!("    [{}],", vals.join(", "));
    }
    println!("]");
}
