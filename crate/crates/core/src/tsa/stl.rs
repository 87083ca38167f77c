//! Seasonal-trend decomposition by loess (inner/outer loop scheme of
//! Cleveland et al.), with local-linear smoothers throughout.

use serde::{Deserialize, Serialize};

use super::TimeSeries;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StlResult {
    pub trend: Vec<f64>,
    pub seasonal: Vec<f64>,
    pub remainder: Vec<f64>,
    pub period: usize,
    /// Outer robustness iterations performed (0 when not robust).
    pub robust_iters: usize,
    /// Final robustness weights (all ones when not robust).
    pub weights: Vec<f64>,
}

const OUTER_ROBUST: usize = 15;

fn next_odd(x: f64) -> usize {
    let mut v = x.ceil() as usize;
    if v.is_multiple_of(2) {
        v += 1;
    }
    v.max(3)
}

/// Local fit at position `xs` (1-based) over points `nleft..=nright`.
#[allow(clippy::too_many_arguments)]
fn est(y: &[f64], len: usize, xs: f64, nleft: usize, nright: usize, rw: Option<&[f64]>, w: &mut [f64]) -> Option<f64> {
    let n = y.len();
    let range = n as f64 - 1.0;
    let mut h = (xs - nleft as f64).max(nright as f64 - xs);
    if len > n {
        h += ((len - n) / 2) as f64;
    }
    let h9 = 0.999 * h;
    let h1 = 0.001 * h;
    let mut a = 0.0;
    for j in nleft..=nright {
        let r = (j as f64 - xs).abs();
        let mut wj = 0.0;
        if r <= h9 {
            wj = if r <= h1 { 1.0 } else { (1.0 - (r / h).powi(3)).powi(3) };
            if let Some(rw) = rw {
                wj *= rw[j - 1];
            }
            a += wj;
        }
        w[j - 1] = wj;
    }
    if a <= 0.0 {
        return None;
    }
    for wj in &mut w[nleft - 1..nright] {
        *wj /= a;
    }
    if h > 0.0 {
        let a: f64 = (nleft..=nright).map(|j| w[j - 1] * j as f64).sum();
        let c: f64 = (nleft..=nright).map(|j| w[j - 1] * (j as f64 - a).powi(2)).sum();
        if c.sqrt() > 0.001 * range {
            let b = (xs - a) / c;
            for j in nleft..=nright {
                w[j - 1] *= b * (j as f64 - a) + 1.0;
            }
        }
    }
    Some((nleft..=nright).map(|j| w[j - 1] * y[j - 1]).sum())
}

/// Loess smooth of `y` evaluated at every position.
fn ess(y: &[f64], len: usize, rw: Option<&[f64]>) -> Vec<f64> {
    let n = y.len();
    let mut out = vec![0.0; n];
    let mut w = vec![0.0; n];
    if n < 2 {
        return y.to_vec();
    }
    let (mut nleft, mut nright) = if len >= n { (1, n) } else { (1, len) };
    let nsh = len.div_ceil(2);
    for i in 1..=n {
        if len < n && i > nsh && nright != n {
            nleft += 1;
            nright += 1;
        }
        out[i - 1] = est(y, len, i as f64, nleft, nright, rw, &mut w).unwrap_or(y[i - 1]);
    }
    out
}

fn moving_average(x: &[f64], len: usize) -> Vec<f64> {
    let n = x.len();
    let m = n + 1 - len;
    let mut out = Vec::with_capacity(m);
    let mut v: f64 = x[..len].iter().sum();
    out.push(v / len as f64);
    for j in 1..m {
        v += x[j + len - 1] - x[j - 1];
        out.push(v / len as f64);
    }
    out
}

/// Smooths each cycle-subseries and extrapolates one point at each end,
/// returning a series of length `n + 2 * period`.
fn cycle_subseries(y: &[f64], period: usize, ns: usize, rw: Option<&[f64]>) -> Vec<f64> {
    let n = y.len();
    let mut c = vec![0.0; n + 2 * period];
    for j in 0..period {
        let sub: Vec<f64> = (j..n).step_by(period).map(|i| y[i]).collect();
        let sub_rw: Option<Vec<f64>> = rw.map(|rw| (j..n).step_by(period).map(|i| rw[i]).collect());
        let k = sub.len();
        let smooth = ess(&sub, ns, sub_rw.as_deref());
        let mut w = vec![0.0; k];
        let nright = ns.min(k);
        let first = est(&sub, ns, 0.0, 1, nright, sub_rw.as_deref(), &mut w).unwrap_or(sub[0]);
        let nleft = (k + 1).saturating_sub(ns).max(1);
        let last = est(&sub, ns, (k + 1) as f64, nleft, k, sub_rw.as_deref(), &mut w).unwrap_or(sub[k - 1]);
        // subseries positions 0..=k+1 map to c[j + m * period]
        c[j] = first;
        for (m, v) in smooth.into_iter().enumerate() {
            c[j + (m + 1) * period] = v;
        }
        c[j + (k + 1) * period] = last;
    }
    c
}

fn robustness_weights(resid: &[f64]) -> Vec<f64> {
    let mut abs: Vec<f64> = resid.iter().map(|r| r.abs()).collect();
    abs.sort_by(f64::total_cmp);
    let n = abs.len();
    let med = if n % 2 == 1 { abs[n / 2] } else { (abs[n / 2 - 1] + abs[n / 2]) / 2.0 };
    let h = 6.0 * med;
    resid
        .iter()
        .map(|r| {
            if h == 0.0 {
                return 1.0;
            }
            let u = r.abs() / h;
            if u <= 0.001 {
                1.0
            } else if u <= 0.999 {
                (1.0 - u * u).powi(2)
            } else {
                0.0
            }
        })
        .collect()
}

/// Decomposes `series` into trend, seasonal and remainder.
///
/// `seasonal_window` is the loess span of the cycle-subseries smoother and
/// must be odd. After the loess passes the seasonal component is re-centred
/// so that it averages to zero over every full cycle (counted from the
/// first observation); the removed level moves into the trend.
pub fn stl(series: &TimeSeries, period: usize, seasonal_window: usize, robust: bool) -> Result<StlResult> {
    let y = &series.values;
    let n = y.len();
    if period < 2 {
        return Err(Error::InvalidInput(format!("STL period must be at least 2, got {period}")));
    }
    if n < 2 * period {
        return Err(Error::SeriesTooShort {
            len: n,
            period,
            needed: 2 * period,
        });
    }
    if seasonal_window < 3 || seasonal_window.is_multiple_of(2) {
        return Err(Error::InvalidInput(format!(
            "seasonal window must be odd and at least 3, got {seasonal_window}"
        )));
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite value at index {i}")));
    }
    let ns = seasonal_window;
    let nt = next_odd(1.5 * period as f64 / (1.0 - 1.5 / ns as f64));
    let nl = next_odd(period as f64);
    let (inner, outer) = if robust { (1, OUTER_ROBUST) } else { (2, 0) };

    let mut trend = vec![0.0; n];
    let mut seasonal = vec![0.0; n];
    let mut rw: Option<Vec<f64>> = None;
    for pass in 0..=outer {
        for _ in 0..inner {
            let detrended: Vec<f64> = y.iter().zip(&trend).map(|(a, b)| a - b).collect();
            let c = cycle_subseries(&detrended, period, ns, rw.as_deref());
            let low = moving_average(&moving_average(&moving_average(&c, period), period), 3);
            let low = ess(&low, nl, None);
            for i in 0..n {
                seasonal[i] = c[period + i] - low[i];
            }
            let deseason: Vec<f64> = y.iter().zip(&seasonal).map(|(a, b)| a - b).collect();
            trend = ess(&deseason, nt, rw.as_deref());
        }
        if pass < outer {
            let resid: Vec<f64> = (0..n).map(|i| y[i] - trend[i] - seasonal[i]).collect();
            rw = Some(robustness_weights(&resid));
        }
    }

    // zero-mean seasonal over each full cycle
    let full = n / period;
    let mut shift = 0.0;
    for c in 0..full {
        let block = &mut seasonal[c * period..(c + 1) * period];
        shift = block.iter().sum::<f64>() / period as f64;
        for (s, t) in block.iter_mut().zip(&mut trend[c * period..(c + 1) * period]) {
            *s -= shift;
            *t += shift;
        }
    }
    for i in full * period..n {
        seasonal[i] -= shift;
        trend[i] += shift;
    }

    let remainder = (0..n).map(|i| y[i] - trend[i] - seasonal[i]).collect();
    Ok(StlResult {
        trend,
        seasonal,
        remainder,
        period,
        robust_iters: outer,
        weights: rw.unwrap_or_else(|| vec![1.0; n]),
    })
}
