use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Mean target of the `k` nearest training rows by Euclidean distance. Equal
/// distances rank the earlier training row first.
pub fn knn_predict(train_x: &DMatrix<f64>, train_y: &[f64], query_x: &DMatrix<f64>, k: usize) -> Result<Vec<f64>> {
    let n = train_x.nrows();
    if train_y.len() != n {
        return Err(Error::ShapeMismatch(format!("{n} rows against {} targets", train_y.len())));
    }
    if query_x.ncols() != train_x.ncols() {
        return Err(Error::ShapeMismatch(format!("{} features expected, got {}", train_x.ncols(), query_x.ncols())));
    }
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!("k = {k} with {n} training rows")));
    }
    let mut out = Vec::with_capacity(query_x.nrows());
    let mut dist: Vec<(f64, usize)> = Vec::with_capacity(n);
    for q in query_x.row_iter() {
        dist.clear();
        dist.extend(train_x.row_iter().enumerate().map(|(i, r)| ((r - q).norm_squared(), i)));
        dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        out.push(dist[..k].iter().map(|&(_, i)| train_y[i]).sum::<f64>() / k as f64);
    }
    Ok(out)
}
