use crate::series::YearMonth;

/// Ordered future predictions of one variable.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastPath {
    pub variable: String,
    /// Month of each step, when the history carried dates.
    pub months: Vec<YearMonth>,
    pub mean: Vec<f64>,
    /// Forecast-error variance per step, when the model provides one.
    pub variance: Option<Vec<f64>>,
}

impl ForecastPath {
    pub fn new(variable: impl Into<String>, first: YearMonth, mean: Vec<f64>, variance: Option<Vec<f64>>) -> Self {
        let months = (0..mean.len()).map(|i| first.add_months(i as i64)).collect();
        Self {
            variable: variable.into(),
            months,
            mean,
            variance,
        }
    }

    pub fn horizon(&self) -> usize {
        self.mean.len()
    }

    /// Symmetric band `mean ± z·sd`, if variances are available.
    pub fn band(&self, z: f64) -> Option<(Vec<f64>, Vec<f64>)> {
        let var = self.variance.as_ref()?;
        let lower = self.mean.iter().zip(var).map(|(m, v)| m - z * v.sqrt()).collect();
        let upper = self.mean.iter().zip(var).map(|(m, v)| m + z * v.sqrt()).collect();
        Some((lower, upper))
    }
}
