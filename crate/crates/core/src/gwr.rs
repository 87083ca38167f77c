//! Geographically weighted regression with kernel-weighted local least
//! squares and AICc bandwidth selection.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::geometry::Point;
use crate::tsa::{Design, ModelFit};

const RIDGE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    Gaussian,
    Bisquare,
}

impl Kernel {
    /// Weight at distance `d` for bandwidth `b`; 1 at `d = 0`.
    pub fn weight(&self, d: f64, b: f64) -> f64 {
        let u = d / b;
        match self {
            Kernel::Gaussian => (-0.5 * u * u).exp(),
            Kernel::Bisquare => {
                if u < 1.0 {
                    (1.0 - u * u).powi(2)
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GwrSpec {
    pub kernel: Kernel,
    /// Bandwidth counted in nearest neighbours (including the focal
    /// point) rather than map units.
    pub adaptive: bool,
    pub bandwidth: f64,
}

impl GwrSpec {
    pub fn validate(&self, n: usize, cols: usize) -> Result<()> {
        if !(self.bandwidth > 0.0) || !self.bandwidth.is_finite() {
            return Err(Error::InvalidInput(format!("bandwidth must be positive, got {}", self.bandwidth)));
        }
        if self.adaptive {
            let k_min = cols + 2;
            if self.bandwidth.fract() != 0.0 || self.bandwidth < k_min as f64 || self.bandwidth > (n - 1) as f64 {
                return Err(Error::InvalidInput(format!(
                    "adaptive bandwidth must be an integer in [{k_min}, {}], got {}",
                    n - 1,
                    self.bandwidth
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GwrResult {
    pub spec: GwrSpec,
    /// Coefficient names, intercept first.
    pub names: Vec<String>,
    /// Local coefficients, one row per location.
    pub beta: Vec<Vec<f64>>,
    pub std_errors: Vec<Vec<f64>>,
    pub pseudo_t: Vec<Vec<f64>>,
    pub local_r2: Vec<f64>,
    pub fitted: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Diagonal of the hat matrix.
    pub influence: Vec<f64>,
    /// Trace of the hat matrix.
    pub effective_params: f64,
    pub rss: f64,
    pub sigma2: f64,
    pub r2: f64,
    pub adj_r2: f64,
    pub loglik: f64,
    pub aic: f64,
    pub aicc: f64,
    /// Locations whose local design needed the ridge fallback.
    pub ridge_locations: Vec<usize>,
    /// Condition number of the global design `[1 | X]`.
    pub condition_number: f64,
}

impl GwrResult {
    pub fn n(&self) -> usize {
        self.fitted.len()
    }

    /// Column `j` of the local coefficient matrix.
    pub fn coefficient_surface(&self, j: usize) -> Vec<f64> {
        self.beta.iter().map(|b| b[j]).collect()
    }
}

struct Prepared {
    n: usize,
    cols: usize,
    x: DMatrix<f64>,
    y: DVector<f64>,
    names: Vec<String>,
}

fn prepare(y: &[f64], x: &Design, locations: &[Point]) -> Result<Prepared> {
    let n = y.len();
    if locations.len() != n || (x.n_cols() > 0 && x.n_rows() != n) {
        return Err(Error::InvalidInput(format!(
            "gwr: {n} responses, {} design rows, {} locations",
            x.n_rows(),
            locations.len()
        )));
    }
    let cols = x.n_cols() + 1;
    if n <= 3 * cols {
        return Err(Error::InvalidInput(format!("gwr needs more than 3 * {cols} observations, got {n}")));
    }
    if y.iter().chain(x.columns.iter().flatten()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("gwr: non-finite data".into()));
    }
    let full = x.with_intercept(n);
    Ok(Prepared {
        n,
        cols,
        x: DMatrix::from_fn(n, cols, |i, j| full.columns[j][i]),
        y: DVector::from_column_slice(y),
        names: full.names,
    })
}

fn distance(a: Point, b: Point) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

/// Kernel weights for every observation around location `i`.
fn local_weights(locations: &[Point], i: usize, spec: &GwrSpec) -> Vec<f64> {
    let d: Vec<f64> = locations.iter().map(|&q| distance(locations[i], q)).collect();
    let b = if spec.adaptive {
        let k = spec.bandwidth as usize;
        let mut sorted = d.clone();
        let (_, kth, _) = sorted.select_nth_unstable_by(k - 1, f64::total_cmp);
        *kth
    } else {
        spec.bandwidth
    };
    if b <= 0.0 {
        return d.iter().map(|&v| if v == 0.0 { 1.0 } else { 0.0 }).collect();
    }
    d.iter().map(|&v| spec.kernel.weight(v, b)).collect()
}

struct LocalFit {
    beta: Vec<f64>,
    /// Unscaled coefficient covariance `C C'` with `C = (X'WX)^-1 X'W`.
    ccv: Vec<f64>,
    influence: f64,
    local_r2: f64,
    ridge: bool,
}

fn fit_location(p: &Prepared, w: &[f64], i: usize) -> LocalFit {
    let k = p.cols;
    let mut xtwx = DMatrix::<f64>::zeros(k, k);
    let mut xtw2x = DMatrix::<f64>::zeros(k, k);
    let mut xtwy = DVector::<f64>::zeros(k);
    for (r, &wr) in w.iter().enumerate() {
        if wr == 0.0 {
            continue;
        }
        for a in 0..k {
            let xa = p.x[(r, a)];
            xtwy[a] += wr * xa * p.y[r];
            for b in 0..=a {
                let v = xa * p.x[(r, b)];
                xtwx[(a, b)] += wr * v;
                xtw2x[(a, b)] += wr * wr * v;
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            xtwx[(b, a)] = xtwx[(a, b)];
            xtw2x[(b, a)] = xtw2x[(a, b)];
        }
    }
    let scale = (0..k).map(|a| xtwx[(a, a)]).fold(0.0f64, f64::max).max(1.0);
    let (inv, ridge) = match xtwx.clone().cholesky() {
        Some(ch) if well_conditioned(&xtwx) => (ch.inverse(), false),
        _ => {
            let reg = &xtwx + DMatrix::identity(k, k) * (RIDGE * scale);
            let inv = reg
                .clone()
                .cholesky()
                .map(|c| c.inverse())
                .or_else(|| reg.pseudo_inverse(1e-14).ok())
                .unwrap_or_else(|| DMatrix::zeros(k, k));
            (inv, true)
        }
    };
    let beta = &inv * &xtwy;
    let ccv = &inv * xtw2x * &inv;
    let xi = p.x.row(i).transpose();
    let influence = w[i] * (xi.transpose() * &inv * &xi)[(0, 0)];

    let wsum: f64 = w.iter().sum();
    let ybar = w.iter().zip(p.y.iter()).map(|(a, b)| a * b).sum::<f64>() / wsum;
    let (mut sse, mut sst) = (0.0, 0.0);
    for (r, &wr) in w.iter().enumerate() {
        if wr == 0.0 {
            continue;
        }
        let fitted: f64 = (0..k).map(|a| p.x[(r, a)] * beta[a]).sum();
        sse += wr * (p.y[r] - fitted).powi(2);
        sst += wr * (p.y[r] - ybar).powi(2);
    }
    let local_r2 = if sst > 0.0 { (1.0 - sse / sst).clamp(0.0, 1.0) } else { 1.0 };
    LocalFit {
        beta: beta.iter().copied().collect(),
        ccv: (0..k).map(|a| ccv[(a, a)]).collect(),
        influence,
        local_r2,
        ridge,
    }
}

fn well_conditioned(m: &DMatrix<f64>) -> bool {
    let sv = m.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    max > 0.0 && min > max * 1e-13
}

/// Condition number (ratio of extreme singular values) of `[1 | X]` with
/// each non-constant column scaled to unit length.
pub fn condition_number(x: &Design) -> f64 {
    let n = x.n_rows().max(1);
    let full = x.with_intercept(n);
    let m = DMatrix::from_fn(n, full.n_cols(), |i, j| {
        let col = &full.columns[j];
        let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            col[i] / norm
        } else {
            0.0
        }
    });
    let sv = m.singular_values();
    let min = sv.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        sv.max() / min
    }
}

fn aicc_of(loglik: f64, tr_s: f64, n: usize) -> f64 {
    let n = n as f64;
    if n - tr_s - 2.0 <= 0.0 {
        return f64::INFINITY;
    }
    -2.0 * loglik + 2.0 * n * (tr_s + 1.0) / (n - tr_s - 2.0)
}

fn loglik_of(rss: f64, n: usize) -> f64 {
    let n = n as f64;
    -0.5 * n * (1.0 + (2.0 * std::f64::consts::PI).ln() + (rss / n).ln())
}

/// Fits one weighted least-squares regression per location. `x` holds the
/// covariates without an intercept; one is always added.
pub fn gwr_fit(y: &[f64], x: &Design, locations: &[Point], spec: &GwrSpec) -> Result<GwrResult> {
    let p = prepare(y, x, locations)?;
    spec.validate(p.n, p.cols)?;
    let fits: Vec<LocalFit> = (0..p.n)
        .into_par_iter()
        .map(|i| fit_location(&p, &local_weights(locations, i, spec), i))
        .collect();
    let n = p.n;
    let fitted: Vec<f64> = (0..n)
        .map(|i| (0..p.cols).map(|a| p.x[(i, a)] * fits[i].beta[a]).sum())
        .collect();
    let residuals: Vec<f64> = (0..n).map(|i| p.y[i] - fitted[i]).collect();
    let rss: f64 = residuals.iter().map(|e| e * e).sum();
    let tr_s: f64 = fits.iter().map(|f| f.influence).sum();
    let sigma2 = rss / (n as f64 - tr_s);
    let ybar = p.y.mean();
    let tss: f64 = p.y.iter().map(|v| (v - ybar).powi(2)).sum();
    let r2 = 1.0 - rss / tss;
    let adj_r2 = 1.0 - (1.0 - r2) * (n as f64 - 1.0) / (n as f64 - tr_s);
    let loglik = loglik_of(rss, n);
    let std_errors: Vec<Vec<f64>> = fits
        .iter()
        .map(|f| f.ccv.iter().map(|v| (sigma2 * v).max(0.0).sqrt()).collect())
        .collect();
    let pseudo_t = fits
        .iter()
        .zip(&std_errors)
        .map(|(f, se)| f.beta.iter().zip(se).map(|(b, s)| b / s).collect())
        .collect();
    Ok(GwrResult {
        spec: *spec,
        names: p.names,
        local_r2: fits.iter().map(|f| f.local_r2).collect(),
        influence: fits.iter().map(|f| f.influence).collect(),
        ridge_locations: (0..n).filter(|&i| fits[i].ridge).collect(),
        beta: fits.into_iter().map(|f| f.beta).collect(),
        std_errors,
        pseudo_t,
        fitted,
        residuals,
        effective_params: tr_s,
        rss,
        sigma2,
        r2,
        adj_r2,
        loglik,
        aic: -2.0 * loglik + 2.0 * (tr_s + 1.0),
        aicc: aicc_of(loglik, tr_s, n),
        condition_number: condition_number(x),
    })
}

/// AICc of the fit at a given bandwidth without keeping the local
/// estimates.
fn aicc_at(p: &Prepared, locations: &[Point], spec: &GwrSpec) -> f64 {
    let parts: Vec<(f64, f64)> = (0..p.n)
        .into_par_iter()
        .map(|i| {
            let f = fit_location(p, &local_weights(locations, i, spec), i);
            let yhat: f64 = (0..p.cols).map(|a| p.x[(i, a)] * f.beta[a]).sum();
            ((p.y[i] - yhat).powi(2), f.influence)
        })
        .collect();
    let rss: f64 = parts.iter().map(|v| v.0).sum();
    let tr_s: f64 = parts.iter().map(|v| v.1).sum();
    aicc_of(loglik_of(rss, p.n), tr_s, p.n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthSearch {
    pub kernel: Kernel,
    pub adaptive: bool,
    pub bandwidth: f64,
    pub aicc: f64,
    pub lower: f64,
    pub upper: f64,
    /// Every evaluated `(bandwidth, AICc)`, in evaluation order.
    pub trace: Vec<(f64, f64)>,
    /// Set when the evaluated AICc curve has more than one local minimum.
    pub warning: Option<String>,
}

/// Golden-section search for the bandwidth minimizing AICc. Adaptive
/// bandwidths range over `[cols + 2, n - 1]` neighbours; fixed ones from
/// the largest distance any location needs to reach `cols + 2` points up
/// to the diameter of the point set. Returns the best evaluated point.
pub fn select_bandwidth(y: &[f64], x: &Design, locations: &[Point], kernel: Kernel, adaptive: bool) -> Result<BandwidthSearch> {
    let p = prepare(y, x, locations)?;
    let (lower, upper) = if adaptive {
        ((p.cols + 2) as f64, (p.n - 1) as f64)
    } else {
        let mut reach = 0.0f64;
        let mut diameter = 0.0f64;
        for i in 0..p.n {
            let mut d: Vec<f64> = locations.iter().map(|&q| distance(locations[i], q)).collect();
            d.sort_by(f64::total_cmp);
            reach = reach.max(d[p.cols + 1]);
            diameter = diameter.max(d[p.n - 1]);
        }
        if diameter <= 0.0 {
            return Err(Error::InvalidInput("gwr: all locations coincide".into()));
        }
        (reach.max(diameter * 1e-6) * 1.0001, diameter)
    };
    let snap = |b: f64| if adaptive { b.round().clamp(lower, upper) } else { b };
    let mut trace: Vec<(f64, f64)> = Vec::new();
    let eval = |b: f64, trace: &mut Vec<(f64, f64)>| -> f64 {
        let b = snap(b);
        if let Some(&(_, v)) = trace.iter().find(|(t, _)| *t == b) {
            return v;
        }
        let v = aicc_at(&p, locations, &GwrSpec { kernel, adaptive, bandwidth: b });
        trace.push((b, v));
        v
    };
    let tol = if adaptive { 1.0 } else { (upper - lower) * 1e-4 };
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lower, upper);
    eval(a, &mut trace);
    eval(b, &mut trace);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let mut fc = eval(c, &mut trace);
    let mut fd = eval(d, &mut trace);
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = eval(c, &mut trace);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = eval(d, &mut trace);
        }
    }
    if adaptive {
        // settle the integer neighbourhood of the bracket
        let lo = snap(a.floor());
        let hi = snap(b.ceil());
        let mut v = lo;
        while v <= hi {
            eval(v, &mut trace);
            v += 1.0;
        }
    }
    let &(bandwidth, aicc) = trace
        .iter()
        .min_by(|x, y| x.1.total_cmp(&y.1).then(y.0.total_cmp(&x.0)))
        .expect("trace is non-empty");
    let mut sorted = trace.clone();
    sorted.sort_by(|x, y| x.0.total_cmp(&y.0));
    let minima = (0..sorted.len())
        .filter(|&i| {
            let left = i == 0 || sorted[i - 1].1 > sorted[i].1;
            let right = i + 1 == sorted.len() || sorted[i + 1].1 > sorted[i].1;
            left && right
        })
        .count();
    let warning = (minima > 1).then(|| format!("AICc trace has {minima} local minima; returning the best evaluated bandwidth"));
    Ok(BandwidthSearch {
        kernel,
        adaptive,
        bandwidth,
        aicc,
        lower,
        upper,
        trace,
        warning,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSummary {
    pub name: String,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

/// Distribution of each local coefficient across locations.
pub fn summarize(result: &GwrResult) -> Vec<CoefficientSummary> {
    result
        .names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let mut v = result.coefficient_surface(j);
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let std = (v.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt();
            v.sort_by(f64::total_cmp);
            let m = v.len();
            let median = if m % 2 == 1 { v[m / 2] } else { 0.5 * (v[m / 2 - 1] + v[m / 2]) };
            CoefficientSummary {
                name: name.clone(),
                mean,
                std,
                min: v[0],
                median,
                max: v[m - 1],
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelComparison {
    pub ols_adj_r2: f64,
    pub gwr_adj_r2: f64,
    pub ols_aic: f64,
    pub gwr_aic: f64,
    pub ols_aicc: f64,
    pub gwr_aicc: f64,
    /// GWR has higher adjusted R-squared and lower AIC.
    pub gwr_improves_both: bool,
}

/// Side-by-side fit statistics of a global OLS model (with intercept) and
/// a GWR on the same data.
pub fn compare_models(ols: &ModelFit, gwr: &GwrResult) -> ModelComparison {
    let k = ols.beta.len() as f64;
    let ols_aicc = aicc_of(ols.loglik, k, ols.n_obs);
    ModelComparison {
        ols_adj_r2: ols.adj_r2,
        gwr_adj_r2: gwr.adj_r2,
        ols_aic: ols.aic,
        gwr_aic: gwr.aic,
        ols_aicc,
        gwr_aicc: gwr.aicc,
        gwr_improves_both: gwr.adj_r2 > ols.adj_r2 && gwr.aic < ols.aic,
    }
}
