use serde::{Deserialize, Serialize};

use super::{Diagnostics, ModelFit, ModelKind};

/// Significance code for a two-sided p-value: `***` < 0.001, `**` < 0.01,
/// `*` < 0.05, `.` < 0.1, otherwise empty.
pub fn significance_stars(p: f64) -> &'static str {
    match p {
        p if !p.is_finite() => "",
        p if p < 0.001 => "***",
        p if p < 0.01 => "**",
        p if p < 0.05 => "*",
        p if p < 0.1 => ".",
        _ => "",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub data: String,
    pub model: String,
    pub adj_r2: f64,
    pub aic: f64,
    pub rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRow {
    pub parameter: String,
    pub estimate: f64,
    pub std_error: f64,
    pub p_value: f64,
    pub stars: String,
    /// Estimate to two decimals with its significance code, e.g. `6.13***`
    /// or `-14.76(.)`.
    pub display: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub spec: String,
    pub kind: ModelKind,
    pub metrics: MetricsRow,
    pub coefficients: Vec<CoefficientRow>,
    pub sigma2: f64,
    pub loglik: f64,
    pub n_obs: usize,
    pub n_params: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<Diagnostics>,
}

impl ModelReport {
    /// `data` labels the series (e.g. `LAS`); `model` the row label (e.g.
    /// `OLS`, `ARIMAX`, `SARIMAX`).
    pub fn new(fit: &ModelFit, data: &str, model: &str, diagnostics: Option<Diagnostics>) -> Self {
        let coefficients = fit
            .coefficients
            .iter()
            .map(|c| {
                let stars = significance_stars(c.p_value);
                let code = if stars == "." { "(.)" } else { stars };
                CoefficientRow {
                    parameter: c.name.clone(),
                    estimate: c.estimate,
                    std_error: c.std_error,
                    p_value: c.p_value,
                    stars: stars.to_string(),
                    display: format!("{:.2}{code}", c.estimate),
                }
            })
            .collect();
        ModelReport {
            spec: fit.spec.to_string(),
            kind: fit.kind,
            metrics: MetricsRow {
                data: data.to_string(),
                model: model.to_string(),
                adj_r2: fit.adj_r2,
                aic: fit.aic,
                rmse: fit.rmse,
            },
            coefficients,
            sigma2: fit.sigma2,
            loglik: fit.loglik,
            n_obs: fit.n_obs,
            n_params: fit.n_params,
            diagnostics,
        }
    }
}
