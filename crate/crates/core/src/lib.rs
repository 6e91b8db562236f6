//! Econometric and machine-learning tools for forecasting monthly macro
//! series: unit-root and residual diagnostics, ARIMA(X) and ARMA-GARCH by
//! maximum likelihood, Engle-Granger and Johansen cointegration with VECM,
//! VAR(X) with impulse responses and Granger tests, PCA with four regressors,
//! and a ridge-stacked ensemble with recursive multi-step forecasting.

pub mod arima;
pub mod cointegration;
pub mod diagnostics;
pub mod dist;
pub mod ensemble;
pub mod error;
pub mod forecast;
pub mod garch;
pub mod linalg;
pub mod ml;
pub mod optim;
pub mod series;
pub mod sim;
pub mod varx;

pub use error::{Error, Result};
pub use forecast::ForecastPath;
pub use series::{Table, TimeSeries, YearMonth};
