use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{sarimax_fit, ArimaSpec, Design, FitOptions, ModelFit, TimeSeries};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct GridOptions {
    pub p_max: usize,
    pub q_max: usize,
    pub d_set: Vec<usize>,
    /// Also search seasonal orders `P, Q in 0..=1` and `D in seasonal_d_set`.
    pub seasonal: bool,
    pub period: usize,
    pub seasonal_p_max: usize,
    pub seasonal_q_max: usize,
    pub seasonal_d_set: Vec<usize>,
    pub fit: FitOptions,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions {
            p_max: 3,
            q_max: 3,
            d_set: vec![0, 1],
            seasonal: false,
            period: 52,
            seasonal_p_max: 1,
            seasonal_q_max: 1,
            seasonal_d_set: vec![0],
            fit: FitOptions::default(),
        }
    }
}

impl GridOptions {
    pub fn specs(&self, exog_names: &[String]) -> Vec<ArimaSpec> {
        let seasonal: Vec<(usize, usize, usize)> = if self.seasonal && self.period > 1 {
            let mut v = Vec::new();
            for sp in 0..=self.seasonal_p_max {
                for &sd in &self.seasonal_d_set {
                    for sq in 0..=self.seasonal_q_max {
                        v.push((sp, sd, sq));
                    }
                }
            }
            v
        } else {
            vec![(0, 0, 0)]
        };
        let mut specs = Vec::new();
        for p in 0..=self.p_max {
            for &d in &self.d_set {
                for q in 0..=self.q_max {
                    for &(sp, sd, sq) in &seasonal {
                        let mut spec = ArimaSpec::arima(p, d, q).with_exog(exog_names);
                        if sp + sd + sq > 0 {
                            spec = spec.seasonal(sp, sd, sq, self.period);
                        }
                        if spec.validate().is_ok() {
                            specs.push(spec);
                        }
                    }
                }
            }
        }
        specs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridEntry {
    pub spec: ArimaSpec,
    pub label: String,
    pub aic: Option<f64>,
    pub loglik: Option<f64>,
    pub n_params: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct GridResult {
    pub best: ModelFit,
    /// Successful fits by ascending AIC (ties: fewer parameters, then
    /// spec order), followed by failed fits.
    pub table: Vec<GridEntry>,
}

/// Fits every spec in the grid and selects the smallest AIC.
pub fn grid_search(series: &TimeSeries, exog: &Design, opts: &GridOptions) -> Result<GridResult> {
    let specs = opts.specs(&exog.names);
    let quick = FitOptions {
        std_errors: false,
        ..opts.fit.clone()
    };
    let mut table: Vec<GridEntry> = specs
        .par_iter()
        .map(|spec| match sarimax_fit(series, exog, spec, &quick) {
            Ok(fit) => GridEntry {
                label: spec.to_string(),
                spec: spec.clone(),
                aic: Some(fit.aic),
                loglik: Some(fit.loglik),
                n_params: fit.n_params,
                error: None,
            },
            Err(e) => GridEntry {
                label: spec.to_string(),
                spec: spec.clone(),
                aic: None,
                loglik: None,
                n_params: spec.n_params(),
                error: Some(e.to_string()),
            },
        })
        .collect();
    table.sort_by(|a, b| match (a.aic, b.aic) {
        (Some(x), Some(y)) => x
            .total_cmp(&y)
            .then(a.n_params.cmp(&b.n_params))
            .then_with(|| a.spec.cmp(&b.spec)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.spec.cmp(&b.spec),
    });
    let Some(best) = table.first().filter(|e| e.aic.is_some()) else {
        return Err(Error::AllFitsFailed(
            table.into_iter().map(|e| (e.label, e.error.unwrap_or_default())).collect(),
        ));
    };
    let best = sarimax_fit(series, exog, &best.spec, &opts.fit)?;
    Ok(GridResult { best, table })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tsa::Step;

    #[test]
    fn grid_enumerates_and_ranks() {
        let opts = GridOptions {
            p_max: 1,
            q_max: 1,
            d_set: vec![0],
            ..Default::default()
        };
        assert_eq!(opts.specs(&[]).len(), 4);
        let seasonal = GridOptions {
            seasonal: true,
            period: 12,
            ..opts.clone()
        };
        assert_eq!(seasonal.specs(&[]).len(), 16);

        let mut u = 0.0;
        let mut s: u64 = 7;
        let values: Vec<f64> = (0..200)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let e = (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
                u = 0.8 * u + e;
                u
            })
            .collect();
        let series = TimeSeries {
            start: 0,
            step: Step::Week,
            values,
        };
        let a = grid_search(&series, &Design::default(), &opts).unwrap();
        let b = grid_search(&series, &Design::default(), &opts).unwrap();
        assert_eq!(a.table, b.table);
        assert!(a.best.spec.p >= 1);
        let aics: Vec<f64> = a.table.iter().filter_map(|e| e.aic).collect();
        assert!(aics.windows(2).all(|w| w[0] <= w[1]));
    }
}
