//! Global and local bivariate Moran statistics with permutation inference.
//!
//! Units without neighbours are excluded throughout: they do not enter
//! `n`, the means, the variances or `S0`, and their local statistic is
//! reported as not applicable.

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::substream;
use crate::weights::SpatialWeights;

/// Two variables observed on the same units, in weights order.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributePair {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub labels: Vec<String>,
}

impl AttributePair {
    pub fn new(x: Vec<f64>, y: Vec<f64>, labels: Vec<String>) -> Result<Self> {
        if x.len() != y.len() || labels.len() != x.len() {
            return Err(Error::InvalidInput(format!(
                "attribute pair lengths differ: x {}, y {}, labels {}",
                x.len(),
                y.len(),
                labels.len()
            )));
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("attribute values must be finite".into()));
        }
        Ok(AttributePair { x, y, labels })
    }

    /// Pair with labels `"0"`, `"1"`, ...
    pub fn unlabelled(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let labels = (0..x.len()).map(|i| i.to_string()).collect();
        Self::new(x, y, labels)
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalMoranResult {
    pub i_b: f64,
    /// One-sided (upper tail) permutation p-value.
    pub p_value: f64,
    pub n_perm: usize,
    pub seed: u64,
    pub perm_mean: f64,
    pub perm_std: f64,
    pub n_active: usize,
    pub s0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Quadrant {
    HH,
    LL,
    HL,
    LH,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Cluster {
    HH,
    LL,
    HL,
    LH,
    NS,
}

impl Cluster {
    pub fn as_str(&self) -> &'static str {
        match self {
            Cluster::HH => "HH",
            Cluster::LL => "LL",
            Cluster::HL => "HL",
            Cluster::LH => "LH",
            Cluster::NS => "NS",
        }
    }
}

impl From<Quadrant> for Cluster {
    fn from(q: Quadrant) -> Self {
        match q {
            Quadrant::HH => Cluster::HH,
            Quadrant::LL => Cluster::LL,
            Quadrant::HL => Cluster::HL,
            Quadrant::LH => Cluster::LH,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalMoranResult {
    pub area_id: String,
    pub i_local: f64,
    /// Folded conditional-permutation pseudo p-value; `None` for islands.
    pub p_value: Option<f64>,
    pub quadrant: Option<Quadrant>,
    pub significant: bool,
    pub z_x: f64,
    pub lag_z_y: f64,
}

impl LocalMoranResult {
    pub fn applicable(&self) -> bool {
        self.p_value.is_some()
    }
}

struct Standardized {
    active: Vec<usize>,
    zx: Vec<f64>,
    zy: Vec<f64>,
}

/// Population z-scores over the non-island units; islands get 0.
fn standardize(pair: &AttributePair, w: &SpatialWeights) -> Result<Standardized> {
    if pair.len() != w.n() {
        return Err(Error::InvalidInput(format!(
            "attribute pair has {} units, weights have {}",
            pair.len(),
            w.n()
        )));
    }
    let active: Vec<usize> = (0..w.n()).filter(|&i| !w.is_island(i)).collect();
    if active.len() < 2 {
        return Err(Error::InvalidInput("fewer than two units with neighbours".into()));
    }
    let z = |v: &[f64], name: &'static str| -> Result<Vec<f64>> {
        let m = active.iter().map(|&i| v[i]).sum::<f64>() / active.len() as f64;
        let var = active.iter().map(|&i| (v[i] - m).powi(2)).sum::<f64>() / active.len() as f64;
        let sd = var.sqrt();
        if !(sd > 1e-300) || sd <= 1e-12 * m.abs() {
            return Err(Error::ZeroVariance(name));
        }
        let mut out = vec![0.0; v.len()];
        for &i in &active {
            out[i] = (v[i] - m) / sd;
        }
        Ok(out)
    };
    Ok(Standardized {
        zx: z(&pair.x, "x")?,
        zy: z(&pair.y, "y")?,
        active,
    })
}

fn cross_sum(w: &SpatialWeights, zx: &[f64], zy: &[f64], active: &[usize]) -> f64 {
    active
        .iter()
        .map(|&i| zx[i] * w.neighbours(i).iter().map(|&(j, wij)| wij * zy[j]).sum::<f64>())
        .sum()
}

/// Bivariate Moran's I of `x` against the spatial lag of `y`.
pub fn moran_statistic(pair: &AttributePair, w: &SpatialWeights) -> Result<f64> {
    let s = standardize(pair, w)?;
    Ok(cross_sum(w, &s.zx, &s.zy, &s.active) / w.s0())
}

/// Global bivariate Moran's I with a one-sided permutation test: `y` is
/// reassigned across units while `x` stays fixed.
pub fn bivariate_moran(pair: &AttributePair, w: &SpatialWeights, n_perm: usize, seed: u64) -> Result<GlobalMoranResult> {
    let s = standardize(pair, w)?;
    let s0 = w.s0();
    let i_b = cross_sum(w, &s.zx, &s.zy, &s.active) / s0;
    let perms: Vec<f64> = (0..n_perm)
        .into_par_iter()
        .map(|k| {
            let mut rng = substream(seed, "moran", k as u64);
            let mut values: Vec<f64> = s.active.iter().map(|&i| s.zy[i]).collect();
            values.shuffle(&mut rng);
            let mut zy = vec![0.0; w.n()];
            for (&i, v) in s.active.iter().zip(values) {
                zy[i] = v;
            }
            cross_sum(w, &s.zx, &zy, &s.active) / s0
        })
        .collect();
    let extreme = perms.iter().filter(|&&v| v >= i_b).count();
    let (mean, std) = mean_std(&perms);
    Ok(GlobalMoranResult {
        i_b,
        p_value: (1 + extreme) as f64 / (1 + n_perm) as f64,
        n_perm,
        seed,
        perm_mean: mean,
        perm_std: std,
        n_active: s.active.len(),
        s0,
    })
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64;
    (m, var.sqrt())
}

/// Local bivariate Moran `I_i = z_x(i) * sum_j w_ij z_y(j)` with
/// conditional-permutation pseudo p-values.
///
/// The local statistics sum to `S0 * I_b`, so their mean over the
/// non-island units is `(S0 / n_active) * I_b` (exactly `I_b` for
/// row-standardized weights).
pub fn bivariate_lisa(
    pair: &AttributePair,
    w: &SpatialWeights,
    n_perm: usize,
    seed: u64,
    alpha: f64,
) -> Result<Vec<LocalMoranResult>> {
    let s = standardize(pair, w)?;
    let position: Vec<Option<usize>> = {
        let mut pos = vec![None; w.n()];
        for (k, &i) in s.active.iter().enumerate() {
            pos[i] = Some(k);
        }
        pos
    };
    let pool: Vec<f64> = s.active.iter().map(|&i| s.zy[i]).collect();
    let results = (0..w.n())
        .into_par_iter()
        .map(|i| {
            let lag: f64 = w.neighbours(i).iter().map(|&(j, wij)| wij * s.zy[j]).sum();
            let i_local = s.zx[i] * lag;
            let Some(own) = position[i] else {
                return LocalMoranResult {
                    area_id: pair.labels[i].clone(),
                    i_local: 0.0,
                    p_value: None,
                    quadrant: None,
                    significant: false,
                    z_x: 0.0,
                    lag_z_y: 0.0,
                };
            };
            let nb = w.neighbours(i);
            let mut rng = substream(seed, "lisa", i as u64);
            let mut larger = 0usize;
            for _ in 0..n_perm {
                let draw = sample(&mut rng, pool.len() - 1, nb.len());
                let perm_lag: f64 = draw
                    .iter()
                    .zip(nb)
                    .map(|(k, &(_, wij))| wij * pool[if k >= own { k + 1 } else { k }])
                    .sum();
                if s.zx[i] * perm_lag >= i_local {
                    larger += 1;
                }
            }
            let folded = larger.min(n_perm - larger);
            let p = (folded + 1) as f64 / (n_perm + 1) as f64;
            let quadrant = match (s.zx[i] >= 0.0, lag >= 0.0) {
                (true, true) => Quadrant::HH,
                (false, false) => Quadrant::LL,
                (true, false) => Quadrant::HL,
                (false, true) => Quadrant::LH,
            };
            LocalMoranResult {
                area_id: pair.labels[i].clone(),
                i_local,
                p_value: Some(p),
                quadrant: Some(quadrant),
                significant: p <= alpha,
                z_x: s.zx[i],
                lag_z_y: lag,
            }
        })
        .collect();
    Ok(results)
}

/// Benjamini-Hochberg adjusted p-values (step-up, monotone).
pub fn benjamini_hochberg(p: &[f64]) -> Vec<f64> {
    let m = p.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p[a].total_cmp(&p[b]).then(a.cmp(&b)));
    let mut adjusted = vec![0.0; m];
    let mut running = 1.0f64;
    for (rank, &i) in order.iter().enumerate().rev() {
        running = running.min(p[i] * m as f64 / (rank + 1) as f64);
        adjusted[i] = running.min(1.0);
    }
    adjusted
}

/// Cluster label per unit: the quadrant if significant at `alpha`
/// (optionally after Benjamini-Hochberg adjustment over applicable
/// units), otherwise `NS`.
pub fn classify_clusters(results: &[LocalMoranResult], alpha: f64, fdr: bool) -> Vec<(String, Cluster)> {
    let applicable: Vec<usize> = (0..results.len()).filter(|&i| results[i].applicable()).collect();
    let raw: Vec<f64> = applicable.iter().map(|&i| results[i].p_value.unwrap_or(1.0)).collect();
    let adjusted = if fdr { benjamini_hochberg(&raw) } else { raw };
    let mut p = vec![None; results.len()];
    for (&i, q) in applicable.iter().zip(adjusted) {
        p[i] = Some(q);
    }
    results
        .iter()
        .zip(p)
        .map(|(r, p)| {
            let cluster = match (p, r.quadrant) {
                (Some(p), Some(q)) if p <= alpha => Cluster::from(q),
                _ => Cluster::NS,
            };
            (r.area_id.clone(), cluster)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::{row_standardize, Contiguity};

    fn rook(rows: usize, cols: usize) -> SpatialWeights {
        row_standardize(&SpatialWeights::lattice(rows, cols, Contiguity::Rook))
    }

    #[test]
    fn checkerboard_two_by_two() {
        let w = rook(2, 2);
        let pair = AttributePair::unlabelled(vec![1.0, 0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        assert!((moran_statistic(&pair, &w).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_variance_is_an_error() {
        let w = rook(2, 2);
        let pair = AttributePair::unlabelled(vec![2.0; 4], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let err = bivariate_moran(&pair, &w, 9, 0).unwrap_err();
        assert!(err.to_string().contains("zero variance"));
    }

    #[test]
    fn checkerboard_lisa_is_all_outliers() {
        let w = rook(6, 6);
        let v: Vec<f64> = (0..36).map(|k| ((k / 6 + k % 6) % 2) as f64).collect();
        let pair = AttributePair::unlabelled(v.clone(), v).unwrap();
        let res = bivariate_lisa(&pair, &w, 99, 1, 0.05).unwrap();
        assert!(res.iter().all(|r| matches!(r.quadrant, Some(Quadrant::HL) | Some(Quadrant::LH))));
    }

    #[test]
    fn local_mean_matches_global() {
        let w = SpatialWeights::lattice(5, 7, Contiguity::Queen);
        let x: Vec<f64> = (0..35).map(|i| ((i * 37) % 11) as f64).collect();
        let y: Vec<f64> = (0..35).map(|i| ((i * 13) % 7) as f64 + 0.5 * i as f64).collect();
        let pair = AttributePair::unlabelled(x, y).unwrap();
        let g = bivariate_moran(&pair, &w, 0, 0).unwrap();
        let local = bivariate_lisa(&pair, &w, 0, 0, 0.05).unwrap();
        let mean = local.iter().map(|r| r.i_local).sum::<f64>() / 35.0;
        assert!((mean - g.s0 / 35.0 * g.i_b).abs() < 1e-9);
    }

    #[test]
    fn permutations_are_reproducible() {
        let w = rook(5, 5);
        let x: Vec<f64> = (0..25).map(|i| (i % 5) as f64).collect();
        let y: Vec<f64> = (0..25).map(|i| (i / 5) as f64 + (i % 5) as f64).collect();
        let pair = AttributePair::unlabelled(x, y).unwrap();
        let a = bivariate_moran(&pair, &w, 199, 42).unwrap();
        let b = bivariate_moran(&pair, &w, 199, 42).unwrap();
        assert_eq!(a, b);
        assert!(a.p_value > 0.0 && a.p_value <= 1.0);
        let la = bivariate_lisa(&pair, &w, 199, 42, 0.05).unwrap();
        let lb = bivariate_lisa(&pair, &w, 199, 42, 0.05).unwrap();
        assert_eq!(la, lb);
        for r in &la {
            assert!(!r.significant || r.p_value.unwrap() <= 0.05);
        }
    }

    #[test]
    fn bh_is_monotone_and_conservative() {
        let p = [0.01, 0.04, 0.03, 0.2, 0.001];
        let q = benjamini_hochberg(&p);
        for (a, b) in p.iter().zip(&q) {
            assert!(b >= a);
        }
        assert!((q[4] - 0.005).abs() < 1e-12);
        assert!((q[0] - 0.025).abs() < 1e-12);
    }

    #[test]
    fn islands_are_not_applicable() {
        let w = SpatialWeights::from_neighbours(
            vec![vec![(1, 1.0)], vec![(0, 1.0), (2, 1.0)], vec![(1, 1.0)], vec![]],
            crate::weights::Standardization::Binary,
        )
        .unwrap();
        let pair = AttributePair::unlabelled(vec![1.0, 2.0, 4.0, 100.0], vec![2.0, 1.0, 3.0, -50.0]).unwrap();
        let local = bivariate_lisa(&pair, &w, 19, 0, 0.05).unwrap();
        assert!(!local[3].applicable());
        let labels = classify_clusters(&local, 0.05, false);
        assert_eq!(labels[3].1, Cluster::NS);
    }
}
