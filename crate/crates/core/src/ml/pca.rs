use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Principal components of the correlation matrix.
#[derive(Debug, Clone)]
pub struct PcaModel {
    pub means: Vec<f64>,
    pub std_devs: Vec<f64>,
    /// Descending and non-negative; they sum to the column count.
    pub eigenvalues: Vec<f64>,
    /// Column `i` is the loading vector of component `i`. The entry of
    /// largest magnitude in each column is positive.
    pub eigenvectors: DMatrix<f64>,
    /// Components kept by default in `project_retained`.
    pub retained: usize,
    pub column_names: Vec<String>,
}

pub fn fit_pca(x: &DMatrix<f64>, column_names: &[String]) -> Result<PcaModel> {
    let (n, p) = x.shape();
    if p == 0 || n <= p {
        return Err(Error::InsufficientData(format!("{n} rows for {p} columns")));
    }
    let names: Vec<String> = if column_names.len() == p {
        column_names.to_vec()
    } else {
        (0..p).map(|j| format!("x{j}")).collect()
    };
    let mut means = Vec::with_capacity(p);
    let mut sds = Vec::with_capacity(p);
    for (j, col) in x.column_iter().enumerate() {
        let m = col.mean();
        let v = col.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        if !(v > 0.0) || v.sqrt() <= 1e-12 * m.abs().max(1.0) {
            return Err(Error::DegenerateColumn(names[j].clone()));
        }
        means.push(m);
        sds.push(v.sqrt());
    }
    let z = standardize(x, &means, &sds);
    let corr = (z.transpose() * &z) / (n - 1) as f64;
    let corr = (&corr + corr.transpose()) * 0.5;
    let eig = corr.symmetric_eigen();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let mut vectors = DMatrix::zeros(p, p);
    for (c, &i) in order.iter().enumerate() {
        let v = eig.eigenvectors.column(i);
        let pivot = v.iter().copied().fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        vectors.set_column(c, &(v * sign));
    }
    Ok(PcaModel { means, std_devs: sds, eigenvalues, eigenvectors: vectors, retained: p, column_names: names })
}

fn standardize(x: &DMatrix<f64>, means: &[f64], sds: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| (x[(i, j)] - means[j]) / sds[j])
}

impl PcaModel {
    pub fn n_columns(&self) -> usize {
        self.means.len()
    }

    /// Share of total variance per component, as fractions.
    pub fn variance_ratio(&self) -> Vec<f64> {
        let total: f64 = self.eigenvalues.iter().sum();
        self.eigenvalues.iter().map(|l| l / total).collect()
    }

    pub fn cumulative_variance_ratio(&self) -> Vec<f64> {
        self.variance_ratio()
            .iter()
            .scan(0.0, |acc, r| {
                *acc += r;
                Some(*acc)
            })
            .collect()
    }

    pub fn with_retained(mut self, m: usize) -> Result<Self> {
        if m == 0 || m > self.n_columns() {
            return Err(Error::InvalidParameter(format!("{m} components out of {}", self.n_columns())));
        }
        self.retained = m;
        Ok(self)
    }

    pub fn standardize(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.n_columns() {
            return Err(Error::ShapeMismatch(format!("{} columns expected, got {}", self.n_columns(), x.ncols())));
        }
        Ok(standardize(x, &self.means, &self.std_devs))
    }

    /// Scores on the first `m` components.
    pub fn project(&self, x: &DMatrix<f64>, m: usize) -> Result<DMatrix<f64>> {
        if m == 0 || m > self.n_columns() {
            return Err(Error::InvalidParameter(format!("{m} components out of {}", self.n_columns())));
        }
        Ok(self.standardize(x)? * self.eigenvectors.columns(0, m))
    }

    pub fn project_retained(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.project(x, self.retained)
    }
}
