//! Fixtures shared by the benchmarks.

use bluelight_core::oracle::{planted_gwr_surface, simulate_sarima, BetaField, SarimaCoefficients};
use bluelight_core::weights::{row_standardize, Contiguity};
use bluelight_core::{ArimaSpec, AttributePair, Design, Point, SpatialWeights, TimeSeries};

/// Row-standardized queen lattice with a smooth pair of attributes.
pub fn lattice_pair(side: usize) -> (AttributePair, SpatialWeights) {
    let w = row_standardize(&SpatialWeights::lattice(side, side, Contiguity::Queen));
    let n = side * side;
    let x: Vec<f64> = (0..n).map(|i| ((i % side) as f64 * 0.3).sin() + (i / side) as f64 * 0.05).collect();
    let y: Vec<f64> = (0..n).map(|i| ((i / side) as f64 * 0.4).cos() + (i % 7) as f64 * 0.1).collect();
    (AttributePair::unlabelled(x, y).expect("finite"), w)
}

/// Deterministic scatter of `n` points in the unit square.
pub fn points(n: usize) -> Vec<Point> {
    // additive recurrence with the plastic-number constants
    let (a1, a2) = (0.754_877_666_246_692_7, 0.569_840_290_998_053_2);
    (0..n).map(|i| (((i as f64) * a1).fract(), ((i as f64) * a2).fract())).collect()
}

pub fn gwr_data(n: usize) -> (Vec<f64>, Design, Vec<Point>) {
    planted_gwr_surface(n, BetaField::SlopeEqualsU { b0: 1.0 }, 0.1, 11)
}

pub fn arma_series(n: usize) -> TimeSeries {
    let c = SarimaCoefficients {
        ar: vec![0.6],
        ma: vec![0.3],
        intercept: 10.0,
        sigma: 1.0,
        ..SarimaCoefficients::default()
    };
    simulate_sarima(&ArimaSpec::arima(1, 0, 1), &c, &Design::default(), n, 5).expect("stable")
}
