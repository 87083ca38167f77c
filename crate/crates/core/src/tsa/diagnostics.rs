use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::ModelFit;

/// Sample autocorrelations at lags `0..=max_lag` (biased estimator, so the
/// sequence is positive semi-definite).
pub fn acf(x: &[f64], max_lag: usize) -> Vec<f64> {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let z: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let c0: f64 = z.iter().map(|v| v * v).sum();
    (0..=max_lag.min(n.saturating_sub(1)))
        .map(|k| {
            if c0 == 0.0 {
                return if k == 0 { 1.0 } else { 0.0 };
            }
            z[k..].iter().zip(&z).map(|(a, b)| a * b).sum::<f64>() / c0
        })
        .collect()
}

/// Partial autocorrelations at lags `1..=max_lag` by Durbin-Levinson.
pub fn pacf(x: &[f64], max_lag: usize) -> Vec<f64> {
    let r = acf(x, max_lag);
    let m = r.len() - 1;
    let mut out = Vec::with_capacity(m);
    let mut phi: Vec<f64> = Vec::new();
    let mut v = 1.0;
    for k in 1..=m {
        let num = r[k] - phi.iter().enumerate().map(|(j, p)| p * r[k - 1 - j]).sum::<f64>();
        let a = if v > 0.0 { num / v } else { 0.0 };
        let prev = phi.clone();
        for j in 0..phi.len() {
            phi[j] = prev[j] - a * prev[prev.len() - 1 - j];
        }
        phi.push(a);
        v *= 1.0 - a * a;
        out.push(a);
    }
    out
}

/// Ljung-Box statistic over lags `1..=max_lag` and its upper-tail p-value
/// on `max_lag - dof` degrees of freedom.
pub fn ljung_box(x: &[f64], max_lag: usize, dof: usize) -> (f64, f64) {
    let n = x.len() as f64;
    let r = acf(x, max_lag);
    let q = n * (n + 2.0) * (1..r.len()).map(|k| r[k] * r[k] / (n - k as f64)).sum::<f64>();
    let df = max_lag.saturating_sub(dof).max(1) as f64;
    let p = ChiSquared::new(df).map_or(f64::NAN, |d| 1.0 - d.cdf(q));
    (q, p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub max_lag: usize,
    pub acf: Vec<f64>,
    pub pacf: Vec<f64>,
    pub ljung_box_q: f64,
    pub ljung_box_p: f64,
}

/// Residual ACF, PACF and the Ljung-Box test at `max_lag`.
pub fn diagnostics(fit: &ModelFit, max_lag: usize) -> Diagnostics {
    let e = &fit.residuals;
    let max_lag = max_lag.min(e.len().saturating_sub(1));
    let (q, p) = ljung_box(e, max_lag, 0);
    Diagnostics {
        max_lag,
        acf: acf(e, max_lag),
        pacf: pacf(e, max_lag),
        ljung_box_q: q,
        ljung_box_p: p,
    }
}

/// Period (in samples) of the largest periodogram ordinate, excluding the
/// zero frequency.
pub fn dominant_period(x: &[f64]) -> Option<f64> {
    let n = x.len();
    if n < 4 {
        return None;
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let mut best = (0.0, 0usize);
    for k in 1..=n / 2 {
        let w = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
        let (mut re, mut im) = (0.0, 0.0);
        for (t, v) in x.iter().enumerate() {
            re += (v - mean) * (w * t as f64).cos();
            im -= (v - mean) * (w * t as f64).sin();
        }
        let power = re * re + im * im;
        if power > best.0 {
            best = (power, k);
        }
    }
    (best.1 > 0).then(|| n as f64 / best.1 as f64)
}
