use bluelight_core::oracle::{dense_weights, naive_moran};
use bluelight_core::render::{bivariate_classify, rank_boroughs, RANK_WEIGHTS};
use bluelight_core::spstat::{bivariate_lisa, moran_statistic};
use bluelight_core::surface::{build_facets, kde, FacetDim, TemporalDim};
use bluelight_core::tsa::stl;
use bluelight_core::weights::{row_standardize, Contiguity};
use bluelight_core::{AttributePair, Category, IncidentRecord, RasterGrid, SpatialWeights, Step, TimeSeries};
use proptest::prelude::*;

fn lattice_and_values() -> impl Strategy<Value = (usize, usize, Vec<f64>, Vec<f64>, bool)> {
    (2usize..8, 2usize..8, any::<bool>()).prop_flat_map(|(r, c, row)| {
        let n = r * c;
        (
            Just(r),
            Just(c),
            prop::collection::vec(-100.0f64..100.0, n),
            prop::collection::vec(-100.0f64..100.0, n),
            Just(row),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stl_reconstructs_input(period in 2usize..13, cycles in 2usize..8, seed in prop::collection::vec(-50.0f64..50.0, 100)) {
        let n = period * cycles + seed.len() % period;
        let x: Vec<f64> = (0..n).map(|i| seed[i % seed.len()] + (i as f64 * 0.7).sin() * 3.0).collect();
        let r = stl(&TimeSeries::new(Step::Month, x.clone()).unwrap(), period, 7, seed[0] > 0.0).unwrap();
        for i in 0..n {
            prop_assert!((r.trend[i] + r.seasonal[i] + r.remainder[i] - x[i]).abs() <= 1e-9);
        }
    }

    #[test]
    fn moran_matches_oracle((r, c, x, y, row) in lattice_and_values()) {
        let base = SpatialWeights::lattice(r, c, Contiguity::Queen);
        let w = if row { row_standardize(&base) } else { base };
        let pair = AttributePair::unlabelled(x.clone(), y.clone()).unwrap();
        let fast = moran_statistic(&pair, &w).unwrap();
        let slow = naive_moran(&x, &y, &dense_weights(&w)).unwrap();
        prop_assert!((fast - slow).abs() <= 1e-12 * (1.0 + slow.abs()));
    }

    #[test]
    fn binary_symmetric_moran_is_symmetric_in_variables((r, c, x, y, _) in lattice_and_values()) {
        let w = SpatialWeights::lattice(r, c, Contiguity::Rook);
        let a = moran_statistic(&AttributePair::unlabelled(x.clone(), y.clone()).unwrap(), &w).unwrap();
        let b = moran_statistic(&AttributePair::unlabelled(y, x).unwrap(), &w).unwrap();
        prop_assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn local_statistics_sum_to_global((r, c, x, y, row) in lattice_and_values()) {
        let base = SpatialWeights::lattice(r, c, Contiguity::Queen);
        let w = if row { row_standardize(&base) } else { base };
        let pair = AttributePair::unlabelled(x, y).unwrap();
        let global = moran_statistic(&pair, &w).unwrap();
        let local = bivariate_lisa(&pair, &w, 9, 1, 0.05).unwrap();
        let sum: f64 = local.iter().map(|l| l.i_local).sum();
        prop_assert!((sum - w.s0() * global).abs() <= 1e-9 * (1.0 + sum.abs()));
    }

    #[test]
    fn row_standardized_rows_sum_to_one(r in 1usize..9, c in 2usize..9) {
        let w = row_standardize(&SpatialWeights::lattice(r, c, Contiguity::Queen));
        for i in 0..w.n() {
            let s: f64 = w.neighbours(i).iter().map(|e| e.1).sum();
            prop_assert!((s - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn tertiles_split_distinct_values_evenly(k in 1usize..40, seed in 0u64..1000) {
        let n = 3 * k;
        let x: Vec<f64> = (0..n).map(|i| ((i as u64 * 7919 + seed) % 100_003) as f64 + i as f64 * 1e-3).collect();
        let y: Vec<f64> = x.iter().rev().map(|v| v * 2.0).collect();
        let c = bivariate_classify(&x, &y).unwrap();
        for class in 0..3u8 {
            prop_assert_eq!(c.classes.iter().filter(|b| b.cx == class).count(), k);
            prop_assert_eq!(c.classes.iter().filter(|b| b.cy == class).count(), k);
        }
    }

    #[test]
    fn ranking_score_is_the_weighted_sum(v in prop::collection::vec((0.0f64..500.0, 0.0f64..500.0, any::<bool>(), 0usize..6), 6..60)) {
        let boroughs: Vec<String> = v.iter().map(|t| format!("B{}", t.3)).collect();
        let las: Vec<f64> = v.iter().map(|t| t.0).collect();
        let lfb: Vec<f64> = v.iter().map(|t| t.1).collect();
        let dual: Vec<bool> = v.iter().map(|t| t.2).collect();
        let rows = rank_boroughs(&las, &lfb, &dual, &boroughs).unwrap();
        for r in &rows {
            let s = RANK_WEIGHTS[0] * r.las_z + RANK_WEIGHTS[1] * r.lfb_z + RANK_WEIGHTS[2] * r.dual_z;
            prop_assert!((r.score - s).abs() <= 1e-12);
        }
        for w in rows.windows(2) {
            prop_assert!(w[0].score >= w[1].score);
        }
    }

    #[test]
    fn interior_kde_conserves_mass(pts in prop::collection::vec((3.0f64..7.0, 3.0f64..7.0), 1..40)) {
        let grid = RasterGrid::new((0.0, 0.0), 0.02, 500, 500).unwrap();
        let r = kde(&pts, 1.5, &grid).unwrap();
        let rel = r.mass() / pts.len() as f64;
        prop_assert!((rel - 1.0).abs() <= 0.005, "{}", rel);
    }

    #[test]
    fn facets_have_equal_counts(ts in prop::collection::btree_set(0i64..(365 * 86400), 40..400), bins in 2usize..7) {
        let recs: Vec<IncidentRecord> = ts.iter().enumerate().map(|(i, &t)| IncidentRecord {
            id: i.to_string(),
            timestamp: 1_577_836_800 + t,
            lon: 0.0,
            lat: 0.0,
            category: Category::Fire,
            area_id: None,
        }).collect();
        let facets = build_facets(&recs, &[FacetDim::new(TemporalDim::HourOfDay, bins)], 0.0).unwrap();
        let target = recs.len() as f64 / bins as f64;
        let total: usize = facets.iter().map(|f| f.core_count).sum();
        prop_assert_eq!(total, recs.len());
        for f in &facets {
            prop_assert!((f.core_count as f64 - target).abs() <= (0.1 * target).max(1.0) + 1.0, "{} vs {}", f.core_count, target);
        }
    }
}
