//! Demand time-series modelling: STL decomposition, an OLS baseline,
//! regression with seasonal ARIMA errors fitted by exact Gaussian
//! likelihood, AIC grid search and residual diagnostics.

mod diagnostics;
mod grid;
mod kalman;
mod ols;
mod optim;
pub mod poly;
mod report;
mod sarimax;
mod stl;

pub use diagnostics::{acf, diagnostics, dominant_period, ljung_box, pacf, Diagnostics};
pub use grid::{grid_search, GridEntry, GridOptions, GridResult};
pub use ols::ols;
pub use optim::{nelder_mead, NelderMeadOptions, NelderMeadResult};
pub use report::{significance_stars, CoefficientRow, MetricsRow, ModelReport};
pub use sarimax::{arma_loglik, sarimax_fit, FitOptions};
pub use stl::{stl, StlResult};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Step {
    Week,
    Month,
}

impl Step {
    /// Conventional seasonal period: 52 for weekly, 12 for monthly data.
    pub fn seasonal_period(&self) -> usize {
        match self {
            Step::Week => 52,
            Step::Month => 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    /// Bucket index of the first value (weeks since 1970-01-05, or
    /// `year * 12 + month0`).
    pub start: i64,
    pub step: Step,
    pub values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(step: Step, values: Vec<f64>) -> Result<Self> {
        let ts = TimeSeries { start: 0, step, values };
        ts.validate()?;
        Ok(ts)
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.len() < 3 {
            return Err(Error::InvalidInput(format!(
                "time series needs at least 3 values, got {}",
                self.values.len()
            )));
        }
        if let Some(i) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite value at index {i}")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Column-major regression design with named columns.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Design {
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

pub const INTERCEPT: &str = "intercept";

impl Design {
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::InvalidInput("design: names and columns differ in length".into()));
        }
        if let Some(first) = columns.first() {
            if columns.iter().any(|c| c.len() != first.len()) {
                return Err(Error::InvalidInput("design: ragged columns".into()));
            }
        }
        Ok(Design { names, columns })
    }

    /// Builds a design from row-major data.
    pub fn from_rows(names: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let k = names.len();
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidInput(format!("design: every row needs {k} values")));
        }
        let columns = (0..k).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
        Self::new(names, columns)
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    /// Prepends a column of ones named `intercept`.
    pub fn with_intercept(&self, n_rows: usize) -> Design {
        let mut names = vec![INTERCEPT.to_string()];
        names.extend(self.names.iter().cloned());
        let mut columns = vec![vec![1.0; n_rows]];
        columns.extend(self.columns.iter().cloned());
        Design { names, columns }
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[i]).collect()
    }
}

/// Orders of a multiplicative seasonal ARIMA model with exogenous
/// regressors.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
pub struct ArimaSpec {
    pub p: usize,
    pub d: usize,
    pub q: usize,
    pub seasonal_p: usize,
    pub seasonal_d: usize,
    pub seasonal_q: usize,
    /// Seasonal period; 0 means non-seasonal.
    pub period: usize,
    pub exog_names: Vec<String>,
}

impl ArimaSpec {
    pub fn arima(p: usize, d: usize, q: usize) -> Self {
        ArimaSpec {
            p,
            d,
            q,
            ..Default::default()
        }
    }

    pub fn seasonal(mut self, p: usize, d: usize, q: usize, period: usize) -> Self {
        self.seasonal_p = p;
        self.seasonal_d = d;
        self.seasonal_q = q;
        self.period = period;
        self
    }

    pub fn with_exog(mut self, names: &[String]) -> Self {
        self.exog_names = names.to_vec();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.d + self.seasonal_d > 2 {
            return Err(Error::InvalidInput(format!("{self}: total differencing d + D must be at most 2")));
        }
        if self.period == 0 && (self.seasonal_p + self.seasonal_d + self.seasonal_q) > 0 {
            return Err(Error::InvalidInput(format!("{self}: seasonal orders require a period")));
        }
        if self.period == 1 {
            return Err(Error::InvalidInput("seasonal period must be 0 or at least 2".into()));
        }
        Ok(())
    }

    pub fn is_seasonal(&self) -> bool {
        self.period > 0 && (self.seasonal_p + self.seasonal_d + self.seasonal_q) > 0
    }

    pub fn n_arma(&self) -> usize {
        self.p + self.q + self.seasonal_p + self.seasonal_q
    }

    /// Whether a constant is estimated: only for undifferenced models.
    pub fn has_intercept(&self) -> bool {
        self.d + self.seasonal_d == 0
    }

    /// Observations lost to differencing.
    pub fn lost(&self) -> usize {
        self.d + self.seasonal_d * self.period
    }

    /// Estimated parameters: ARMA terms, regression terms and sigma2.
    pub fn n_params(&self) -> usize {
        self.n_arma() + self.exog_names.len() + usize::from(self.has_intercept()) + 1
    }

    pub fn label(&self) -> &'static str {
        match (self.is_seasonal(), self.exog_names.is_empty()) {
            (true, false) => "SARIMAX",
            (true, true) => "SARIMA",
            (false, false) => "ARIMAX",
            (false, true) => "ARIMA",
        }
    }
}

impl fmt::Display for ArimaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({},{},{})", self.label(), self.p, self.d, self.q)?;
        if self.is_seasonal() {
            write!(f, "({},{},{})[{}]", self.seasonal_p, self.seasonal_d, self.seasonal_q, self.period)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Ols,
    Sarimax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct OptimizerSummary {
    pub evaluations: usize,
    /// Best log-likelihood after each restart (running maximum).
    pub best_by_restart: Vec<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFit {
    pub kind: ModelKind,
    pub spec: ArimaSpec,
    pub ar: Vec<f64>,
    pub ma: Vec<f64>,
    pub sar: Vec<f64>,
    pub sma: Vec<f64>,
    /// Regression coefficients, including the intercept when estimated.
    pub beta: Vec<f64>,
    pub beta_names: Vec<String>,
    pub sigma2: f64,
    pub loglik: f64,
    pub aic: f64,
    pub rmse: f64,
    pub adj_r2: f64,
    /// In-sample one-step prediction errors.
    pub residuals: Vec<f64>,
    /// Every estimated mean/ARMA coefficient with its asymptotic standard
    /// error and two-sided p-value.
    pub coefficients: Vec<Coefficient>,
    /// Total estimated parameters used in the AIC, including sigma2.
    pub n_params: usize,
    pub n_obs: usize,
    pub optimizer: OptimizerSummary,
}

impl ModelFit {
    pub fn beta_of(&self, name: &str) -> Option<f64> {
        self.beta_names.iter().position(|n| n == name).map(|i| self.beta[i])
    }

    pub fn coefficient(&self, name: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.name == name)
    }
}

pub(crate) fn aic(n_params: usize, loglik: f64) -> f64 {
    2.0 * n_params as f64 - 2.0 * loglik
}

pub(crate) fn gaussian_loglik(sse: f64, n: usize) -> f64 {
    let n = n as f64;
    -0.5 * n * ((2.0 * std::f64::consts::PI).ln() + (sse / n).ln() + 1.0)
}

/// `1 - (SSE / (n - k)) / (SST / (n - 1))`.
pub(crate) fn adjusted_r2(sse: f64, sst: f64, n: usize, k: usize) -> f64 {
    if n <= k || sst == 0.0 {
        return f64::NAN;
    }
    1.0 - (sse / (n - k) as f64) / (sst / (n - 1) as f64)
}

pub(crate) fn centered_ss(x: &[f64]) -> f64 {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| (v - m).powi(2)).sum()
}
