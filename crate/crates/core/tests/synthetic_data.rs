use std::collections::HashSet;

use bluelight_core::ingest::{read_areas, read_covariates, read_incidents, read_weather, AreaIndex, IncidentOptions};
use bluelight_core::oracle::{
    generate_dataset, planted_gwr_surface, simulate_points, write_dataset, BetaField, CovariateSpec, LatticeSpec,
    Scenario, StreamSpec, WeatherSpec,
};
use bluelight_core::Category;
use chrono::NaiveDate;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn flat(base_rate: f64, days: u32, seed: u64) -> Scenario {
    Scenario {
        seed,
        start: NaiveDate::from_ymd_opt(2021, 3, 1).unwrap(),
        days,
        lattice: LatticeSpec {
            rows: 4,
            cols: 4,
            origin: (-0.2, 51.4),
            cell: 0.02,
            borough_block: 2,
        },
        weather: WeatherSpec::default(),
        covariates: vec![CovariateSpec {
            name: "age_pct".into(),
            mean: 40.0,
            sd: 5.0,
            gradient: (10.0, 0.0),
        }],
        streams: vec![StreamSpec {
            name: "lfb".into(),
            categories: vec![(Category::Fire, 1.0), (Category::FalseAlarm, 2.0), (Category::SpecialService, 1.0)],
            base_rate,
            seasonal_amplitude: 0.0,
            seasonal_peak_day: 0.0,
            weekly_amplitude: 0.0,
            weekly_peak_day: 0.0,
            diurnal_amplitude: 0.0,
            diurnal_peak_hour: 0.0,
            temperature_coupling: 0.0,
            background_share: 1.0,
            covariate_effects: vec![],
            hotspots: vec![],
            summer_spread: 1.0,
        }],
    }
}

#[test]
fn flat_intensity_is_spatially_uniform() {
    let s = flat(50.0, 60, 1);
    let areas = s.areas();
    let index = AreaIndex::new(&areas);
    let mut counts = vec![0.0; areas.len()];
    let pts = simulate_points(&s).unwrap();
    for r in &pts {
        counts[index.locate(r.point()).unwrap()] += 1.0;
    }
    let e = pts.len() as f64 / areas.len() as f64;
    let chi2: f64 = counts.iter().map(|c| (c - e).powi(2) / e).sum();
    let p = 1.0 - ChiSquared::new((areas.len() - 1) as f64).unwrap().cdf(chi2);
    assert!(p > 0.01, "chi2 {chi2}, p {p}");
}

#[test]
fn doubling_the_rate_doubles_the_count() {
    for seed in 0..3 {
        let n1 = simulate_points(&flat(40.0, 50, seed)).unwrap().len() as f64;
        let n2 = simulate_points(&flat(80.0, 50, seed)).unwrap().len() as f64;
        assert!((n1 - 2000.0).abs() <= 3.0 * 2000f64.sqrt(), "{n1}");
        assert!((n2 - 4000.0).abs() <= 3.0 * 4000f64.sqrt(), "{n2}");
    }
}

#[test]
fn written_dataset_reads_back() {
    let s = flat(200.0, 50, 9);
    let d = generate_dataset(&s).unwrap();
    assert!(d.incidents.len() >= 9_500, "{}", d.incidents.len());
    let dir = tempfile::tempdir().unwrap();
    let paths = write_dataset(&d, dir.path()).unwrap();

    let load = read_incidents(&paths.incidents, &IncidentOptions::default()).unwrap();
    assert!(load.errors.is_empty(), "{:?}", &load.errors[..load.errors.len().min(3)]);
    assert_eq!(load.records.len(), d.incidents.len());
    let ids: HashSet<&str> = load.records.iter().map(|r| r.id.as_str()).collect();
    assert_eq!(ids.len(), load.records.len());
    for (a, b) in load.records.iter().zip(&d.incidents) {
        assert_eq!((a.timestamp, a.category), (b.timestamp, b.category));
        assert!((a.lon - b.lon).abs() < 1e-9 && (a.lat - b.lat).abs() < 1e-9);
    }

    let areas = read_areas(&paths.areas).unwrap();
    assert_eq!(areas.len(), 16);
    assert_eq!(areas, d.areas);
    let weather = read_weather(&paths.weather).unwrap();
    assert!(weather.errors.is_empty());
    assert_eq!(weather.records, d.weather);
    let cov = read_covariates(&paths.covariates, &areas).unwrap();
    assert_eq!(cov.values, d.covariates.values);
    assert!(cov.values.iter().all(|r| (0.0..=100.0).contains(&r[0])));
}

#[test]
fn generated_files_are_byte_reproducible() {
    let s = flat(20.0, 30, 4);
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let pa = write_dataset(&generate_dataset(&s).unwrap(), a.path()).unwrap();
    let pb = write_dataset(&generate_dataset(&s).unwrap(), b.path()).unwrap();
    for (x, y) in [(pa.incidents, pb.incidents), (pa.areas, pb.areas), (pa.weather, pb.weather), (pa.covariates, pb.covariates)] {
        assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap());
    }
}

#[test]
fn scenario_validation_names_the_problem() {
    let mut s = flat(1.0, 1, 0);
    s.streams[0].seasonal_amplitude = 1.5;
    let e = Scenario::from_json(&serde_json::to_string(&s).unwrap()).unwrap_err();
    assert!(e.to_string().contains("seasonal amplitude"), "{e}");
}

#[test]
fn planted_surface_is_seeded() {
    let a = planted_gwr_surface(50, BetaField::SlopeEqualsU { b0: 1.0 }, 0.01, 3);
    let b = planted_gwr_surface(50, BetaField::SlopeEqualsU { b0: 1.0 }, 0.01, 3);
    assert_eq!(a.0, b.0);
    assert_eq!(a.2, b.2);
}

#[test]
fn monthly_means_match_direct_recomputation() {
    use bluelight_core::ingest::{aggregate, days_in_month};
    use bluelight_core::Bucket;
    use chrono::Datelike;

    let mut s = flat(30.0, 365, 12);
    s.start = NaiveDate::from_ymd_opt(2021, 1, 1).unwrap();
    s.streams[0].seasonal_amplitude = 0.5;
    s.streams[0].seasonal_peak_day = 200.0;
    let records = simulate_points(&s).unwrap();
    let series = aggregate(&records, Bucket::Month).series().unwrap().clone();
    assert_eq!(series.len(), 12);
    for (k, mean) in series.daily_average().iter().enumerate() {
        let month = k as u32 + 1;
        let n = records.iter().filter(|r| r.date().month() == month).count() as f64;
        let direct = n / f64::from(days_in_month(2021, month));
        assert!((mean - direct).abs() <= 1e-12, "month {month}: {mean} vs {direct}");
    }
}
