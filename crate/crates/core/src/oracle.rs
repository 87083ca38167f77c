//! Brute-force reference implementations and synthetic data generators.
//!
//! The reference functions are deliberately direct and slow; tests use
//! them to check the optimized code paths. The generators produce seeded,
//! byte-reproducible datasets in the ingest formats.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use chrono::{Datelike, Duration, NaiveDate, Timelike};
use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, Exp, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::geometry::{point_segment_distance, BBox, Point, Ring};
use crate::ingest::{self, AreaUnit, Category, CovariateTable, IncidentRecord, WeatherRecord};
use crate::rng::substream;
use crate::surface::{quartic, RasterGrid};
use crate::tsa::poly::{expand_ar, expand_ma, is_invertible, is_stationary};
use crate::tsa::{ArimaSpec, Design, Step, TimeSeries};
use crate::weights::SpatialWeights;

/// Bivariate Moran's I by a direct double loop over a dense weight matrix.
/// Units without neighbours are left out of `n`, the means and `S0`.
pub fn naive_moran(x: &[f64], y: &[f64], w: &[Vec<f64>]) -> Result<f64> {
    let n = x.len();
    let active: Vec<usize> = (0..n).filter(|&i| w[i].iter().any(|&v| v != 0.0)).collect();
    let m = active.len() as f64;
    let xbar = active.iter().map(|&i| x[i]).sum::<f64>() / m;
    let ybar = active.iter().map(|&i| y[i]).sum::<f64>() / m;
    let sxx: f64 = active.iter().map(|&i| (x[i] - xbar).powi(2)).sum();
    let syy: f64 = active.iter().map(|&i| (y[i] - ybar).powi(2)).sum();
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ZeroVariance(if sxx == 0.0 { "x" } else { "y" }));
    }
    let (mut num, mut s0) = (0.0, 0.0);
    for &i in &active {
        for &j in &active {
            num += w[i][j] * (x[i] - xbar) * (y[j] - ybar);
            s0 += w[i][j];
        }
    }
    Ok(m / s0 * num / (sxx * syy).sqrt())
}

/// Dense copy of a sparse weights structure.
pub fn dense_weights(w: &SpatialWeights) -> Vec<Vec<f64>> {
    let mut d = vec![vec![0.0; w.n()]; w.n()];
    for (i, row) in d.iter_mut().enumerate() {
        for &(j, v) in w.neighbours(i) {
            row[j] = v;
        }
    }
    d
}

/// Ordinary least squares through the normal equations, solved by
/// Gauss-Jordan elimination with partial pivoting. `x` is row-major and
/// should include an intercept column if one is wanted.
pub fn ols_normal_equations(y: &[f64], x: &[Vec<f64>]) -> Option<Vec<f64>> {
    let k = x.first()?.len();
    let mut a = vec![vec![0.0; k + 1]; k];
    for (row, &yi) in x.iter().zip(y) {
        for r in 0..k {
            for c in 0..k {
                a[r][c] += row[r] * row[c];
            }
            a[r][k] += row[r] * yi;
        }
    }
    for col in 0..k {
        let piv = (col..k).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        let p = a[col][col];
        for v in a[col].iter_mut() {
            *v /= p;
        }
        for r in 0..k {
            if r != col {
                let f = a[r][col];
                let pivot_row = a[col].clone();
                for (v, pv) in a[r].iter_mut().zip(pivot_row) {
                    *v -= f * pv;
                }
            }
        }
    }
    Some(a.iter().map(|r| r[k]).collect())
}

fn winding_number(ring: &Ring, p: Point) -> i32 {
    let mut wn = 0;
    for e in ring.windows(2) {
        let (a, b) = (e[0], e[1]);
        let cross = (b.0 - a.0) * (p.1 - a.1) - (p.0 - a.0) * (b.1 - a.1);
        if a.1 <= p.1 && b.1 > p.1 && cross > 0.0 {
            wn += 1;
        } else if a.1 > p.1 && b.1 <= p.1 && cross < 0.0 {
            wn -= 1;
        }
    }
    wn
}

/// Area containing `p` by winding numbers (a point is inside when the
/// rings it is wound by are odd in number), boundary points going to the
/// smallest id. Linear scan over all areas.
pub fn winding_assign(p: Point, areas: &[AreaUnit]) -> Option<String> {
    let mut ids: Vec<&AreaUnit> = areas.iter().collect();
    ids.sort_by(|a, b| a.area_id.cmp(&b.area_id));
    ids.into_iter()
        .find(|a| {
            let on_edge = a
                .polygon
                .iter()
                .flat_map(|r| r.windows(2))
                .any(|e| point_segment_distance(p, e[0], e[1]) <= ingest::geometry::BOUNDARY_EPS);
            let wound = a.polygon.iter().filter(|r| winding_number(r, p) != 0).count();
            on_edge || wound % 2 == 1
        })
        .map(|a| a.area_id.clone())
}

fn segments_touch(a: Point, b: Point, c: Point, d: Point, tol: f64) -> bool {
    let orient = |p: Point, q: Point, r: Point| (q.0 - p.0) * (r.1 - p.1) - (q.1 - p.1) * (r.0 - p.0);
    let (o1, o2, o3, o4) = (orient(a, b, c), orient(a, b, d), orient(c, d, a), orient(c, d, b));
    if o1 * o2 < 0.0 && o3 * o4 < 0.0 {
        return true;
    }
    point_segment_distance(c, a, b) <= tol
        || point_segment_distance(d, a, b) <= tol
        || point_segment_distance(a, c, d) <= tol
        || point_segment_distance(b, c, d) <= tol
}

/// Queen adjacency by testing every edge pair of every area pair.
pub fn brute_force_adjacency(areas: &[AreaUnit], tol: f64) -> Vec<BTreeSet<usize>> {
    let n = areas.len();
    let mut adj = vec![BTreeSet::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            let touch = areas[i].polygon.iter().flat_map(|r| r.windows(2)).any(|e| {
                areas[j]
                    .polygon
                    .iter()
                    .flat_map(|r| r.windows(2))
                    .any(|f| segments_touch(e[0], e[1], f[0], f[1], tol))
            });
            if touch {
                adj[i].insert(j);
                adj[j].insert(i);
            }
        }
    }
    adj
}

/// Symmetrized kNN by fully sorting all distances, ties to smaller index.
pub fn exhaustive_knn(points: &[Point], k: usize) -> Vec<BTreeSet<usize>> {
    let n = points.len();
    let mut adj = vec![BTreeSet::new(); n];
    for i in 0..n {
        let mut d: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| ((points[i].0 - points[j].0).powi(2) + (points[i].1 - points[j].1).powi(2), j))
            .collect();
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, j) in d.iter().take(k) {
            adj[i].insert(j);
            adj[j].insert(i);
        }
    }
    adj
}

/// Quartic KDE by visiting every cell for every point.
pub fn naive_kde(points: &[Point], bandwidth: f64, template: &RasterGrid) -> RasterGrid {
    let mut out = template.blank();
    let h2 = bandwidth * bandwidth;
    for iy in 0..template.ny {
        for ix in 0..template.nx {
            let cx = template.origin.0 + (ix as f64 + 0.5) * template.cell;
            let cy = template.origin.1 + (iy as f64 + 0.5) * template.cell;
            let mut v = 0.0;
            for &(px, py) in points {
                let d2 = (cx - px) * (cx - px) + (cy - py) * (cy - py);
                if d2 < h2 {
                    v += quartic(d2, bandwidth);
                }
            }
            out.values[iy * template.nx + ix] = v;
        }
    }
    out
}

/// Exact concentrated Gaussian log-likelihood of a zero-mean ARMA series
/// from its dense autocovariance matrix (psi weights truncated at 5000
/// terms) and a plain Cholesky factorization.
pub fn dense_arma_loglik(y: &[f64], ar: &[f64], ma: &[f64]) -> Option<f64> {
    let n = y.len();
    let mut psi = vec![0.0; 5000];
    psi[0] = 1.0;
    for j in 1..psi.len() {
        let mut v = ma.get(j - 1).copied().unwrap_or(0.0);
        for (i, a) in ar.iter().enumerate().filter(|(i, _)| *i < j) {
            v += a * psi[j - i - 1];
        }
        psi[j] = v;
    }
    let gamma: Vec<f64> = (0..n).map(|h| psi.iter().zip(&psi[h..]).map(|(a, b)| a * b).sum()).collect();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = gamma[i - j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    let mut z = vec![0.0; n];
    for i in 0..n {
        z[i] = (y[i] - (0..i).map(|k| l[i][k] * z[k]).sum::<f64>()) / l[i][i];
    }
    let sigma2 = z.iter().map(|v| v * v).sum::<f64>() / n as f64;
    let log_det: f64 = (0..n).map(|i| 2.0 * l[i][i].ln()).sum();
    let nf = n as f64;
    Some(-0.5 * nf * ((2.0 * std::f64::consts::PI).ln() + sigma2.ln() + 1.0) - 0.5 * log_det)
}

/// Coefficients for [`simulate_sarima`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SarimaCoefficients {
    pub ar: Vec<f64>,
    pub ma: Vec<f64>,
    pub sar: Vec<f64>,
    pub sma: Vec<f64>,
    /// One coefficient per exog column.
    pub beta: Vec<f64>,
    pub intercept: f64,
    pub sigma: f64,
}

/// Simulates `y_t = intercept + x_t' beta + u_t` where `u_t` is the
/// seasonal ARIMA process of `spec`, driven by Gaussian innovations after
/// a burn-in of ten times the largest lag.
pub fn simulate_sarima(spec: &ArimaSpec, c: &SarimaCoefficients, exog: &Design, n: usize, seed: u64) -> Result<TimeSeries> {
    spec.validate()?;
    if !(is_stationary(&c.ar) && is_stationary(&c.sar)) {
        return Err(Error::Unstable("AR polynomial has a root on or inside the unit circle".into()));
    }
    if !(is_invertible(&c.ma) && is_invertible(&c.sma)) {
        return Err(Error::Unstable("MA polynomial has a root on or inside the unit circle".into()));
    }
    if c.ar.len() != spec.p || c.ma.len() != spec.q || c.sar.len() != spec.seasonal_p || c.sma.len() != spec.seasonal_q {
        return Err(Error::InvalidInput("coefficient counts do not match the spec".into()));
    }
    if c.beta.len() != exog.n_cols() || (exog.n_cols() > 0 && exog.n_rows() != n) {
        return Err(Error::InvalidInput("exog does not match beta or n".into()));
    }
    let a = expand_ar(&c.ar, &c.sar, spec.period);
    let b = expand_ma(&c.ma, &c.sma, spec.period);
    let max_lag = a.len().max(b.len()).max(spec.lost()).max(1);
    let burn = 10 * max_lag;
    let total = n + burn;
    let mut rng = substream(seed, "simulate-sarima", 0);
    let e: Vec<f64> = (0..total).map(|_| c.sigma * rng.sample::<f64, _>(StandardNormal)).collect();
    let mut w = vec![0.0; total];
    for t in 0..total {
        let mut v = e[t];
        for (i, ai) in a.iter().enumerate().filter(|(i, _)| *i < t) {
            v += ai * w[t - i - 1];
        }
        for (j, bj) in b.iter().enumerate().filter(|(j, _)| *j < t) {
            v += bj * e[t - j - 1];
        }
        w[t] = v;
    }
    // integrate: (1 - L)^d (1 - L^s)^D u = w
    let mut delta = vec![1.0];
    let mul = |p: &[f64], lag: usize| {
        let mut out = vec![0.0; p.len() + lag];
        for (i, &v) in p.iter().enumerate() {
            out[i] += v;
            out[i + lag] -= v;
        }
        out
    };
    for _ in 0..spec.d {
        delta = mul(&delta, 1);
    }
    for _ in 0..spec.seasonal_d {
        delta = mul(&delta, spec.period);
    }
    let mut u = vec![0.0; total];
    for t in 0..total {
        u[t] = w[t] - (1..delta.len()).filter(|&k| k <= t).map(|k| delta[k] * u[t - k]).sum::<f64>();
    }
    let values = (0..n)
        .map(|t| {
            let xb: f64 = exog.columns.iter().zip(&c.beta).map(|(col, b)| col[t] * b).sum();
            c.intercept + xb + u[burn + t]
        })
        .collect();
    Ok(TimeSeries {
        start: 0,
        step: Step::Week,
        values,
    })
}

/// Spatially varying coefficient field for [`planted_gwr_surface`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BetaField {
    /// `y = b0 + b1 x` everywhere.
    Constant { b0: f64, b1: f64 },
    /// `y = b0 + u x`: the slope equals the first coordinate.
    SlopeEqualsU { b0: f64 },
}

/// `n` locations uniform on the unit square, one standard normal
/// covariate and a response from `field` plus Gaussian noise.
pub fn planted_gwr_surface(n: usize, field: BetaField, noise: f64, seed: u64) -> (Vec<f64>, Design, Vec<Point>) {
    let mut rng = substream(seed, "planted-gwr", 0);
    let mut loc = Vec::with_capacity(n);
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let p: Point = (rng.random::<f64>(), rng.random::<f64>());
        let xi: f64 = rng.sample(StandardNormal);
        let e: f64 = rng.sample(StandardNormal);
        let mean = match field {
            BetaField::Constant { b0, b1 } => b0 + b1 * xi,
            BetaField::SlopeEqualsU { b0 } => b0 + p.0 * xi,
        };
        loc.push(p);
        x.push(xi);
        y.push(mean + noise * e);
    }
    (y, Design::new(vec!["x1".into()], vec![x]).expect("one column"), loc)
}

/// Square lattice of `rows x cols` cells; `borough_block` cells square per
/// borough. Ids are `L0001`, ... in row-major order from the south-west.
pub fn lattice_areas(rows: usize, cols: usize, origin: Point, cell: f64, borough_block: usize) -> Vec<AreaUnit> {
    let block = borough_block.max(1);
    let bcols = cols.div_ceil(block);
    (0..rows * cols)
        .map(|k| {
            let (r, c) = (k / cols, k % cols);
            let (x, y) = (origin.0 + c as f64 * cell, origin.1 + r as f64 * cell);
            let b = (r / block) * bcols + c / block;
            AreaUnit::new(
                format!("L{:04}", k + 1),
                format!("Cell {r}-{c}"),
                format!("Borough {:02}", b + 1),
                vec![vec![(x, y), (x + cell, y), (x + cell, y + cell), (x, y + cell)]],
            )
        })
        .collect()
}

/// Unit-cell grid whose interior vertices are randomly displaced by up to
/// `jitter` cells, so cells are irregular quadrilaterals that still tile
/// the plane.
pub fn jittered_grid_areas(rows: usize, cols: usize, jitter: f64, seed: u64) -> Vec<AreaUnit> {
    let mut rng = substream(seed, "jittered-grid", 0);
    let mut v = vec![vec![(0.0, 0.0); cols + 1]; rows + 1];
    for (r, row) in v.iter_mut().enumerate() {
        for (c, p) in row.iter_mut().enumerate() {
            let interior = r > 0 && r < rows && c > 0 && c < cols;
            let (dx, dy) = if interior {
                (jitter * (2.0 * rng.random::<f64>() - 1.0), jitter * (2.0 * rng.random::<f64>() - 1.0))
            } else {
                (0.0, 0.0)
            };
            *p = (c as f64 + dx, r as f64 + dy);
        }
    }
    (0..rows * cols)
        .map(|k| {
            let (r, c) = (k / cols, k % cols);
            AreaUnit::new(
                format!("J{k:03}"),
                format!("J{k:03}"),
                "J",
                vec![vec![v[r][c], v[r][c + 1], v[r + 1][c + 1], v[r + 1][c]]],
            )
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub rows: usize,
    pub cols: usize,
    /// South-west corner, lon/lat.
    pub origin: Point,
    /// Cell side in degrees.
    pub cell: f64,
    /// Cells per borough side.
    pub borough_block: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatherSpec {
    pub mean_temp: f64,
    pub amplitude: f64,
    /// Day of year of the temperature peak.
    pub peak_day: f64,
    /// Standard deviation of the AR(1) daily anomaly.
    pub noise_sd: f64,
    pub persistence: f64,
    /// Mean gap between temperature and dew point.
    pub dewpoint_gap: f64,
    pub wind_mean: f64,
    pub wind_sd: f64,
}

impl Default for WeatherSpec {
    fn default() -> Self {
        WeatherSpec {
            mean_temp: 11.5,
            amplitude: 7.0,
            peak_day: 200.0,
            noise_sd: 2.0,
            persistence: 0.7,
            dewpoint_gap: 4.0,
            wind_mean: 15.0,
            wind_sd: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateSpec {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    /// Linear trend across the lattice along x and y (change from the
    /// west/south edge to the east/north edge).
    #[serde(default)]
    pub gradient: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateEffect {
    pub name: String,
    /// Log-intensity change per standard deviation of the covariate.
    pub coef: f64,
    /// Change of `coef` from the west to the east edge.
    #[serde(default)]
    pub coef_gradient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hotspot {
    pub center: Point,
    /// Standard deviation of the Gaussian spread, in degrees.
    pub radius: f64,
    pub weight: f64,
}

/// One incident stream (e.g. ambulance or fire service).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamSpec {
    pub name: String,
    pub categories: Vec<(Category, f64)>,
    /// Expected events per day at average conditions.
    pub base_rate: f64,
    #[serde(default)]
    pub seasonal_amplitude: f64,
    #[serde(default)]
    pub seasonal_peak_day: f64,
    #[serde(default)]
    pub weekly_amplitude: f64,
    /// 0 = Monday.
    #[serde(default)]
    pub weekly_peak_day: f64,
    #[serde(default)]
    pub diurnal_amplitude: f64,
    #[serde(default)]
    pub diurnal_peak_hour: f64,
    /// Log-rate change per degree C of temperature above the mean.
    #[serde(default)]
    pub temperature_coupling: f64,
    /// Probability an event comes from the area-level background rather
    /// than a hotspot.
    pub background_share: f64,
    #[serde(default)]
    pub covariate_effects: Vec<CovariateEffect>,
    #[serde(default)]
    pub hotspots: Vec<Hotspot>,
    /// Multiplier on hotspot radii from June to September.
    #[serde(default = "one")]
    pub summer_spread: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub seed: u64,
    pub start: NaiveDate,
    pub days: u32,
    pub lattice: LatticeSpec,
    #[serde(default)]
    pub weather: WeatherSpec,
    #[serde(default)]
    pub covariates: Vec<CovariateSpec>,
    pub streams: Vec<StreamSpec>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if self.lattice.rows == 0 || self.lattice.cols == 0 || !(self.lattice.cell > 0.0) {
            return bad("lattice needs positive rows, cols and cell".into());
        }
        for s in &self.streams {
            if !(s.base_rate >= 0.0) {
                return bad(format!("stream {}: base rate must be non-negative", s.name));
            }
            for (what, a) in [("seasonal", s.seasonal_amplitude), ("weekly", s.weekly_amplitude), ("diurnal", s.diurnal_amplitude)] {
                if !(0.0..=1.0).contains(&a) {
                    return bad(format!("stream {}: {what} amplitude must be in [0, 1] to keep rates non-negative", s.name));
                }
            }
            if !(0.0..=1.0).contains(&s.background_share) || (s.background_share < 1.0 && s.hotspots.is_empty()) {
                return bad(format!("stream {}: background share must be in [0, 1] and below 1 only with hotspots", s.name));
            }
            if s.categories.is_empty() || s.categories.iter().any(|c| !(c.1 >= 0.0)) {
                return bad(format!("stream {}: needs non-negative category weights", s.name));
            }
            for e in &s.covariate_effects {
                if !self.covariates.iter().any(|c| c.name == e.name) {
                    return bad(format!("stream {}: unknown covariate {}", s.name, e.name));
                }
            }
        }
        Ok(())
    }

    pub fn bbox(&self) -> BBox {
        let l = &self.lattice;
        BBox {
            min_x: l.origin.0,
            min_y: l.origin.1,
            max_x: l.origin.0 + l.cols as f64 * l.cell,
            max_y: l.origin.1 + l.rows as f64 * l.cell,
        }
    }

    pub fn areas(&self) -> Vec<AreaUnit> {
        let l = &self.lattice;
        lattice_areas(l.rows, l.cols, l.origin, l.cell, l.borough_block)
    }
}

/// Daily weather: seasonal cycle plus AR(1) anomaly.
pub fn simulate_weather(s: &Scenario) -> Vec<WeatherRecord> {
    let w = &s.weather;
    let mut rng = substream(s.seed, "weather", 0);
    let mut anomaly = 0.0;
    let innov = w.noise_sd * (1.0 - w.persistence * w.persistence).max(0.0).sqrt();
    (0..s.days)
        .map(|d| {
            let date = s.start + Duration::days(i64::from(d));
            let z: f64 = rng.sample(StandardNormal);
            anomaly = w.persistence * anomaly + innov * z;
            let season = (2.0 * std::f64::consts::PI * (date.ordinal0() as f64 - w.peak_day) / 365.25).cos();
            let temperature = w.mean_temp + w.amplitude * season + anomaly;
            let gap: f64 = (w.dewpoint_gap + 1.5 * rng.sample::<f64, _>(StandardNormal)).abs();
            let wind: f64 = (w.wind_mean + w.wind_sd * rng.sample::<f64, _>(StandardNormal)).max(0.0);
            WeatherRecord {
                date,
                temperature: (temperature * 1000.0).round() / 1000.0,
                dew_point: ((temperature - gap) * 1000.0).round() / 1000.0,
                wind_speed: (wind * 1000.0).round() / 1000.0,
            }
        })
        .collect()
}

/// Covariates on the scenario lattice: mean plus linear gradient plus
/// Gaussian noise; names ending in `pct` are clamped to [0, 100].
pub fn simulate_covariates(s: &Scenario, areas: &[AreaUnit]) -> CovariateTable {
    let mut rng = substream(s.seed, "covariates", 0);
    let l = &s.lattice;
    let values = (0..areas.len())
        .map(|k| {
            let (u, v) = ((k % l.cols) as f64 / l.cols.max(2) as f64, (k / l.cols) as f64 / l.rows.max(2) as f64);
            s.covariates
                .iter()
                .map(|c| {
                    let z: f64 = rng.sample(StandardNormal);
                    let val = c.mean + c.gradient.0 * (u - 0.5) + c.gradient.1 * (v - 0.5) + c.sd * z;
                    let val = if c.name.to_ascii_lowercase().ends_with("pct") { val.clamp(0.0, 100.0) } else { val };
                    (val * 1e6).round() / 1e6
                })
                .collect()
        })
        .collect();
    CovariateTable {
        names: s.covariates.iter().map(|c| c.name.clone()).collect(),
        area_ids: areas.iter().map(|a| a.area_id.clone()).collect(),
        values,
        imputed: 0,
    }
}

fn cyclic(amplitude: f64, position: f64, peak: f64, period: f64) -> f64 {
    1.0 + amplitude * (2.0 * std::f64::consts::PI * (position - peak) / period).cos()
}

/// Inhomogeneous Poisson events by thinning. Event times come from a
/// homogeneous process at the peak rate, each kept with probability
/// `rate(t) / peak`; locations are drawn from the hotspot / background
/// mixture in effect at that time.
pub fn simulate_points(s: &Scenario) -> Result<Vec<IncidentRecord>> {
    s.validate()?;
    let weather = simulate_weather(s);
    let areas = s.areas();
    let cov = simulate_covariates(s, &areas);
    let z_cols: Vec<Vec<f64>> = (0..cov.names.len())
        .map(|j| {
            let col: Vec<f64> = cov.values.iter().map(|r| r[j]).collect();
            let m = col.iter().sum::<f64>() / col.len() as f64;
            let sd = (col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / col.len() as f64).sqrt();
            col.iter().map(|v| if sd > 0.0 { (v - m) / sd } else { 0.0 }).collect()
        })
        .collect();
    let bbox = s.bbox();
    let l = &s.lattice;
    let start = s.start.and_hms_opt(0, 0, 0).expect("midnight").and_utc().timestamp();
    let horizon = f64::from(s.days) * 86400.0;
    let mut out: Vec<(i64, usize, IncidentRecord)> = Vec::new();
    for (si, st) in s.streams.iter().enumerate() {
        let mut rng = substream(s.seed, &format!("points:{}", st.name), 0);
        let temp_factor: Vec<f64> = weather
            .iter()
            .map(|w| (st.temperature_coupling * (w.temperature - s.weather.mean_temp)).exp())
            .collect();
        let peak = st.base_rate / 86400.0
            * (1.0 + st.seasonal_amplitude)
            * (1.0 + st.weekly_amplitude)
            * (1.0 + st.diurnal_amplitude)
            * temp_factor.iter().copied().fold(0.0, f64::max);
        if !(peak > 0.0) || s.days == 0 {
            continue;
        }
        let background = {
            let w: Vec<f64> = (0..areas.len())
                .map(|k| {
                    let u = (k % l.cols) as f64 / (l.cols as f64 - 1.0).max(1.0);
                    st.covariate_effects
                        .iter()
                        .map(|e| {
                            let j = cov.names.iter().position(|n| *n == e.name).expect("validated");
                            (e.coef + e.coef_gradient * (u - 0.5)) * z_cols[j][k]
                        })
                        .sum::<f64>()
                        .exp()
                })
                .collect();
            WeightedIndex::new(w).map_err(|e| Error::InvalidInput(format!("background weights: {e}")))?
        };
        let hotspot_pick = if st.hotspots.is_empty() {
            None
        } else {
            Some(
                WeightedIndex::new(st.hotspots.iter().map(|h| h.weight))
                    .map_err(|e| Error::InvalidInput(format!("hotspot weights: {e}")))?,
            )
        };
        let category_pick = WeightedIndex::new(st.categories.iter().map(|c| c.1))
            .map_err(|e| Error::InvalidInput(format!("category weights: {e}")))?;
        let gap = Exp::new(peak).expect("positive rate");
        let mut t = 0.0;
        let mut count = 0usize;
        loop {
            t += gap.sample(&mut rng);
            if t >= horizon {
                break;
            }
            let accept_u: f64 = rng.random();
            let ts = start + t.floor() as i64;
            let dt = chrono::DateTime::from_timestamp(ts, 0).expect("in range");
            let day = (t / 86400.0).floor() as usize;
            let hour = dt.hour() as f64 + dt.minute() as f64 / 60.0 + dt.second() as f64 / 3600.0;
            let dow = dt.weekday().num_days_from_monday() as f64 + hour / 24.0;
            let rate = st.base_rate / 86400.0
                * cyclic(st.seasonal_amplitude, dt.ordinal0() as f64, st.seasonal_peak_day, 365.25)
                * cyclic(st.weekly_amplitude, dow, st.weekly_peak_day, 7.0)
                * cyclic(st.diurnal_amplitude, hour, st.diurnal_peak_hour, 24.0)
                * temp_factor[day];
            if accept_u * peak >= rate {
                continue;
            }
            let summer = (6..=9).contains(&dt.month());
            let mut point = None;
            if let Some(pick) = &hotspot_pick {
                if rng.random::<f64>() >= st.background_share {
                    let h = &st.hotspots[pick.sample(&mut rng)];
                    let r = h.radius * if summer { st.summer_spread } else { 1.0 };
                    let normal = Normal::new(0.0, r).map_err(|e| Error::InvalidInput(format!("hotspot radius: {e}")))?;
                    for _ in 0..100 {
                        let p = (h.center.0 + normal.sample(&mut rng), h.center.1 + normal.sample(&mut rng));
                        if p.0 > bbox.min_x && p.0 < bbox.max_x && p.1 > bbox.min_y && p.1 < bbox.max_y {
                            point = Some(p);
                            break;
                        }
                    }
                }
            }
            let point = point.unwrap_or_else(|| {
                let k = background.sample(&mut rng);
                let (r, c) = (k / l.cols, k % l.cols);
                (
                    l.origin.0 + (c as f64 + rng.random::<f64>()) * l.cell,
                    l.origin.1 + (r as f64 + rng.random::<f64>()) * l.cell,
                )
            });
            count += 1;
            let category = st.categories[category_pick.sample(&mut rng)].0;
            out.push((
                ts,
                si,
                IncidentRecord {
                    id: format!("{}-{:07}", st.name.to_ascii_uppercase(), count),
                    timestamp: ts,
                    lon: (point.0 * 1e7).round() / 1e7,
                    lat: (point.1 * 1e7).round() / 1e7,
                    category,
                    area_id: None,
                },
            ));
        }
    }
    out.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)).then_with(|| a.2.id.cmp(&b.2.id)));
    Ok(out.into_iter().map(|(_, _, r)| r).collect())
}

/// A complete synthetic dataset in memory.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub areas: Vec<AreaUnit>,
    pub incidents: Vec<IncidentRecord>,
    pub weather: Vec<WeatherRecord>,
    pub covariates: CovariateTable,
}

pub fn generate_dataset(s: &Scenario) -> Result<Dataset> {
    let areas = s.areas();
    Ok(Dataset {
        incidents: simulate_points(s)?,
        weather: simulate_weather(s),
        covariates: simulate_covariates(s, &areas),
        areas,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetPaths {
    pub incidents: PathBuf,
    pub areas: PathBuf,
    pub weather: PathBuf,
    pub covariates: PathBuf,
}

/// Writes `incidents.csv`, `areas.geojson`, `weather.csv` and
/// `covariates.csv` into `dir`.
pub fn write_dataset(d: &Dataset, dir: impl AsRef<Path>) -> Result<DatasetPaths> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let paths = DatasetPaths {
        incidents: dir.join("incidents.csv"),
        areas: dir.join("areas.geojson"),
        weather: dir.join("weather.csv"),
        covariates: dir.join("covariates.csv"),
    };
    ingest::write_incidents(&paths.incidents, &d.incidents)?;
    let geo = serde_json::to_string_pretty(&ingest::areas_to_geojson(&d.areas, None))?;
    std::fs::write(&paths.areas, geo).map_err(|e| Error::io(paths.areas.display().to_string(), e))?;
    ingest::write_weather(&paths.weather, &d.weather)?;
    d.covariates.write(&paths.covariates)?;
    Ok(paths)
}
