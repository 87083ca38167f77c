use bluelight_core::gwr::{compare_models, gwr_fit, select_bandwidth, GwrSpec, Kernel};
use bluelight_core::oracle::{planted_gwr_surface, BetaField};
use bluelight_core::rng::substream;
use bluelight_core::spstat::{bivariate_lisa, classify_clusters};
use bluelight_core::tsa::ols;
use bluelight_core::weights::{row_standardize, Contiguity};
use bluelight_core::{AttributePair, Cluster, Design, SpatialWeights};
use rand::Rng;
use rand_distr::StandardNormal;

#[test]
fn short_range_variation_selects_a_small_adaptive_bandwidth() {
    let n = 400;
    let mut rng = substream(21, "short-range", 0);
    let mut locs = Vec::with_capacity(n);
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let (u, v): (f64, f64) = (rng.random(), rng.random());
        let xi: f64 = rng.sample(StandardNormal);
        let slope = 2.0 * (3.0 * std::f64::consts::PI * u).sin() * (3.0 * std::f64::consts::PI * v).cos();
        let e: f64 = rng.sample(StandardNormal);
        locs.push((u, v));
        x.push(xi);
        y.push(1.0 + slope * xi + 0.1 * e);
    }
    let d = Design::new(vec!["x".into()], vec![x]).unwrap();
    let s = select_bandwidth(&y, &d, &locs, Kernel::Bisquare, true).unwrap();
    assert!(s.bandwidth < n as f64 / 4.0, "bandwidth {}", s.bandwidth);
}

#[test]
fn global_linear_truth_prefers_the_widest_bandwidth() {
    let (y, x, locs) = planted_gwr_surface(200, BetaField::Constant { b0: 1.0, b1: 2.0 }, 0.5, 4);
    let adaptive = select_bandwidth(&y, &x, &locs, Kernel::Bisquare, true).unwrap();
    assert!(adaptive.bandwidth >= adaptive.upper - 0.1 * (adaptive.upper - adaptive.lower));

    // bisquare weights never become uniform, so only a fixed Gaussian
    // kernel tends to OLS and gives a monotone AICc curve
    let s = select_bandwidth(&y, &x, &locs, Kernel::Gaussian, false).unwrap();
    assert!(
        s.bandwidth >= s.upper - 0.1 * (s.upper - s.lower),
        "selected {} in [{}, {}]",
        s.bandwidth,
        s.lower,
        s.upper
    );
    let mut trace = s.trace.clone();
    trace.sort_by(|a, b| a.0.total_cmp(&b.0));
    for w in trace.windows(2) {
        assert!(w[1].1 <= w[0].1 + 1e-9, "AICc rises from {:?} to {:?}", w[0], w[1]);
    }

    let spec = GwrSpec {
        kernel: Kernel::Gaussian,
        adaptive: false,
        bandwidth: s.bandwidth,
    };
    let g = gwr_fit(&y, &x, &locs, &spec).unwrap();
    let o = ols(&y, &x.with_intercept(y.len())).unwrap();
    let cmp = compare_models(&o, &g);
    assert!(cmp.gwr_adj_r2 - cmp.ols_adj_r2 <= 0.05, "{cmp:?}");
}

#[test]
fn planted_patch_is_mostly_labelled_high_high() {
    let (rows, cols) = (12, 12);
    let w = row_standardize(&SpatialWeights::lattice(rows, cols, Contiguity::Queen));
    let patch: Vec<usize> = (5..8).flat_map(|r| (5..8).map(move |c| r * cols + c)).collect();
    let mut hits = Vec::new();
    for run in 0..20u64 {
        let mut rng = substream(8, "patch", run);
        let mut x: Vec<f64> = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
        let mut y: Vec<f64> = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
        for &i in &patch {
            x[i] += 2.0;
            y[i] += 2.0;
        }
        let local = bivariate_lisa(&AttributePair::unlabelled(x, y).unwrap(), &w, 999, run, 0.05).unwrap();
        let labels = classify_clusters(&local, 0.05, false);
        hits.push(patch.iter().filter(|&&i| labels[i].1 == Cluster::HH).count());
    }
    hits.sort();
    assert!(hits[hits.len() / 2] >= 7, "HH labels inside the patch per run: {hits:?}");
}
