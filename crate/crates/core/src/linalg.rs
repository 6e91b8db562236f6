//! Least-squares and small dense helpers shared by the estimators.

use nalgebra::{DMatrix, DVector};

use crate::dist;
use crate::error::{Error, Result};

const RANK_TOL: f64 = 1e-11;

/// Ordinary least squares fit of one response.
#[derive(Debug, Clone)]
pub struct OlsFit {
    pub coefficients: DVector<f64>,
    pub residuals: DVector<f64>,
    pub fitted: DVector<f64>,
    pub ssr: f64,
    /// Total sum of squares around the mean of the response.
    pub tss: f64,
    pub nobs: usize,
    pub nparams: usize,
    /// `(X'X)^{-1}`.
    pub xtx_inv: DMatrix<f64>,
}

impl OlsFit {
    pub fn dof(&self) -> usize {
        self.nobs - self.nparams
    }

    /// Unbiased residual variance `SSR / (n − k)`.
    pub fn sigma2(&self) -> f64 {
        self.ssr / self.dof() as f64
    }

    /// Centered R², meaningful when the design contains a constant.
    pub fn r_squared(&self) -> f64 {
        if self.tss > 0.0 {
            1.0 - self.ssr / self.tss
        } else {
            0.0
        }
    }

    pub fn std_errors(&self) -> DVector<f64> {
        let s2 = self.sigma2();
        DVector::from_iterator(
            self.nparams,
            (0..self.nparams).map(|i| (s2 * self.xtx_inv[(i, i)]).max(0.0).sqrt()),
        )
    }

    pub fn t_stats(&self) -> DVector<f64> {
        self.coefficients.component_div(&self.std_errors())
    }

    /// Two-sided p-values from Student t with `n − k` degrees of freedom.
    pub fn p_values(&self) -> DVector<f64> {
        let df = self.dof() as f64;
        self.t_stats().map(|t| dist::t_two_sided(t, df))
    }
}

/// Least squares via Householder QR. Fails on (numerically) rank-deficient designs.
pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<OlsFit> {
    let multi = ols_multi(x, &DMatrix::from_column_slice(y.len(), 1, y.as_slice()))?;
    let tss = {
        let m = y.mean();
        y.iter().map(|v| (v - m) * (v - m)).sum()
    };
    let coefficients = multi.coefficients.column(0).into_owned();
    let residuals = multi.residuals.column(0).into_owned();
    let fitted = y - &residuals;
    let ssr = residuals.norm_squared();
    Ok(OlsFit {
        coefficients,
        residuals,
        fitted,
        ssr,
        tss,
        nobs: x.nrows(),
        nparams: x.ncols(),
        xtx_inv: multi.xtx_inv,
    })
}

/// Least squares with several responses sharing one design.
#[derive(Debug, Clone)]
pub struct MultiOls {
    /// `m × k`: one column of coefficients per response.
    pub coefficients: DMatrix<f64>,
    /// `n × k`.
    pub residuals: DMatrix<f64>,
    pub xtx_inv: DMatrix<f64>,
}

pub fn ols_multi(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<MultiOls> {
    let (n, m) = x.shape();
    if y.nrows() != n {
        return Err(Error::ShapeMismatch(format!(
            "design has {n} rows, response has {}",
            y.nrows()
        )));
    }
    if n <= m {
        return Err(Error::InsufficientData(format!(
            "{n} observations for {m} regressors"
        )));
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("regression input".into()));
    }
    let qr = x.clone().qr();
    let r = qr.r();
    let max_diag = (0..m).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    for i in 0..m {
        if !(r[(i, i)].abs() > RANK_TOL * max_diag) || max_diag == 0.0 {
            return Err(Error::SingularDesign(format!(
                "regressor {i} is collinear with the others"
            )));
        }
    }
    let q = qr.q();
    let qty = q.transpose() * y;
    let coefficients = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::SingularDesign("triangular solve failed".into()))?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(m, m))
        .ok_or_else(|| Error::SingularDesign("triangular inverse failed".into()))?;
    let xtx_inv = &r_inv * r_inv.transpose();
    let residuals = y - x * &coefficients;
    Ok(MultiOls {
        coefficients,
        residuals,
        xtx_inv,
    })
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky_lower(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    nalgebra::Cholesky::new(a.clone()).map(|c| c.l())
}

/// Largest modulus among the eigenvalues of a square matrix.
pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    a.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Companion matrix of `1 − c₁z − … − c_pz^p`; the polynomial has all roots
/// outside the unit circle iff the companion's spectral radius is below one.
pub fn companion(coeffs: &[f64]) -> DMatrix<f64> {
    let p = coeffs.len();
    let mut m = DMatrix::zeros(p, p);
    for (j, &c) in coeffs.iter().enumerate() {
        m[(0, j)] = c;
    }
    for i in 1..p {
        m[(i, i - 1)] = 1.0;
    }
    m
}

/// True when `1 − Σ cᵢ zⁱ` has all roots strictly outside the unit circle.
pub fn roots_outside_unit_circle(coeffs: &[f64]) -> bool {
    coeffs.is_empty() || spectral_radius(&companion(coeffs)) < 1.0
}
