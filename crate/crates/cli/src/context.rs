//! Inputs loaded once per run and the derived quantities several stages
//! share, computed on first use.

use std::cell::OnceCell;
use std::collections::HashMap;
use std::path::PathBuf;

use anyhow::{bail, Context as _, Result};
use bluelight_core::ingest::{
    aggregate_over, align_exog, assign_records, read_areas, read_covariates, read_incidents, read_weather,
    Aggregated, BucketSeries, DateSpan, ExogAlignment, IncidentOptions, RowError,
};
use bluelight_core::oracle::{generate_dataset, write_dataset, Scenario};
use bluelight_core::render::{bivariate_classify, dual_high_flags, BivariateClassification};
use bluelight_core::rng::derive_seed;
use bluelight_core::spstat::{bivariate_lisa, AttributePair};
use bluelight_core::weights::{knn, queen_contiguity, row_standardize};
use bluelight_core::{AreaUnit, Bucket, CovariateTable, IncidentRecord, LocalMoranResult, SpatialWeights, WeatherRecord};
use chrono::{Duration, NaiveTime};

use crate::config::{Resolved, Stream, WeightScheme};
use crate::manifest::Recorder;

pub struct Context {
    pub cfg: Resolved,
    pub areas: Vec<AreaUnit>,
    /// In-window records with an area assigned.
    pub records: Vec<IncidentRecord>,
    pub weather: Vec<WeatherRecord>,
    pub covariates: Option<CovariateTable>,
    pub span: DateSpan,
    pub load: LoadSummary,
    series: OnceCell<[BucketSeries; 2]>,
    exog: OnceCell<ExogAlignment>,
    weights: OnceCell<SpatialWeights>,
    lisa: OnceCell<Vec<LocalMoranResult>>,
    classes: OnceCell<BivariateClassification>,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct LoadSummary {
    pub rows_read: usize,
    pub row_errors: Vec<RowError>,
    pub approximated: usize,
    pub outside_areas: usize,
    pub out_of_streams: usize,
    pub weather_errors: Vec<RowError>,
}

impl Context {
    pub fn load(cfg: Resolved, rec: &mut Recorder) -> Result<Self> {
        let c = &cfg.config;
        let (incidents, areas_path, weather_path, covariates_path) = match &c.inputs.scenario {
            Some(s) => {
                let path = cfg.input(s);
                rec.input("scenario", &path);
                let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                let scenario = Scenario::from_json(&text)?;
                let paths = write_dataset(&generate_dataset(&scenario)?, rec.path("inputs"))?;
                (paths.incidents, paths.areas, paths.weather, Some(paths.covariates))
            }
            None => {
                let i = &c.inputs;
                let p = |x: &Option<PathBuf>| x.as_ref().map(|p| cfg.input(p));
                (
                    p(&i.incidents).expect("validated"),
                    p(&i.areas).expect("validated"),
                    p(&i.weather).expect("validated"),
                    p(&i.covariates),
                )
            }
        };
        rec.input("incidents", &incidents);
        rec.input("areas", &areas_path);
        rec.input("weather", &weather_path);
        if let Some(p) = &covariates_path {
            rec.input("covariates", p);
        }

        let areas = read_areas(&areas_path)?;
        if areas.is_empty() {
            bail!("no areas in {}", areas_path.display());
        }
        let window = c.window.map(|w| {
            let secs = |d: chrono::NaiveDate| d.and_time(NaiveTime::MIN).and_utc().timestamp();
            (secs(w.start), secs(w.end + Duration::days(1)))
        });
        let opts = IncidentOptions {
            window,
            centroids: areas.iter().map(|a| (a.area_id.clone(), a.centroid)).collect::<HashMap<_, _>>(),
        };
        let load = read_incidents(&incidents, &opts)?;
        let rows_read = load.records.len();
        let mut records = load.records;
        let outside_areas = assign_records(&mut records, &areas);
        records.retain(|r| r.area_id.is_some());
        let before = records.len();
        records.retain(|r| c.streams.las.contains(&r.category) || c.streams.lfb.contains(&r.category));
        let out_of_streams = before - records.len();
        if records.is_empty() {
            bail!("no incidents fall inside the areas and study window");
        }
        let span = match c.window {
            Some(w) => DateSpan {
                first: w.start,
                last: w.end,
            },
            None => DateSpan::of(&records).expect("non-empty"),
        };
        let weather = read_weather(&weather_path)?;
        let covariates = covariates_path.map(|p| read_covariates(p, &areas)).transpose()?;
        Ok(Context {
            load: LoadSummary {
                rows_read,
                row_errors: load.errors,
                approximated: load.approximated,
                outside_areas,
                out_of_streams,
                weather_errors: weather.errors,
            },
            cfg,
            areas,
            records,
            weather: weather.records,
            covariates,
            span,
            series: OnceCell::new(),
            exog: OnceCell::new(),
            weights: OnceCell::new(),
            lisa: OnceCell::new(),
            classes: OnceCell::new(),
        })
    }

    pub fn seed(&self, label: &str) -> u64 {
        derive_seed(self.cfg.config.seed, label)
    }

    pub fn in_stream(&self, s: Stream, r: &IncidentRecord) -> bool {
        let streams = &self.cfg.config.streams;
        match s {
            Stream::Las => streams.las.contains(&r.category),
            Stream::Lfb => streams.lfb.contains(&r.category),
        }
    }

    pub fn stream_records(&self, s: Stream) -> Vec<IncidentRecord> {
        self.records.iter().filter(|r| self.in_stream(s, r)).cloned().collect()
    }

    pub fn bucket(&self) -> Bucket {
        if self.cfg.config.aggregation.period == 12 {
            Bucket::Month
        } else {
            Bucket::Week
        }
    }

    /// Bucketed counts for LAS and LFB over the study span.
    pub fn series(&self) -> &[BucketSeries; 2] {
        self.series.get_or_init(|| {
            Stream::BOTH.map(|s| match aggregate_over(&self.stream_records(s), self.bucket(), self.span) {
                Aggregated::Series(b) => b,
                Aggregated::Profile(_) => unreachable!("calendar bucket"),
            })
        })
    }

    pub fn stream_series(&self, s: Stream) -> &BucketSeries {
        &self.series()[s as usize]
    }

    pub fn exog(&self) -> Result<&ExogAlignment> {
        if let Some(e) = self.exog.get() {
            return Ok(e);
        }
        let e = align_exog(&self.series()[0], &self.weather)?;
        Ok(self.exog.get_or_init(|| e))
    }

    /// Incident counts per area, in area order.
    pub fn area_counts(&self, s: Stream) -> Vec<f64> {
        let index: HashMap<&str, usize> = self.areas.iter().enumerate().map(|(i, a)| (a.area_id.as_str(), i)).collect();
        let mut counts = vec![0.0; self.areas.len()];
        for r in self.records.iter().filter(|r| self.in_stream(s, r)) {
            if let Some(&i) = r.area_id.as_deref().and_then(|a| index.get(a)) {
                counts[i] += 1.0;
            }
        }
        counts
    }

    pub fn weights(&self) -> Result<&SpatialWeights> {
        if let Some(w) = self.weights.get() {
            return Ok(w);
        }
        let wc = &self.cfg.config.weights;
        let w = match wc.scheme {
            WeightScheme::Queen => queen_contiguity(&self.areas),
            WeightScheme::Knn => {
                let centroids: Vec<_> = self.areas.iter().map(|a| a.centroid).collect();
                knn(&centroids, wc.k)?
            }
        };
        let w = if wc.row_standardize { row_standardize(&w) } else { w };
        Ok(self.weights.get_or_init(|| w))
    }

    /// LAS counts against the spatial lag of LFB counts.
    pub fn pair(&self) -> Result<AttributePair> {
        let labels = self.areas.iter().map(|a| a.area_id.clone()).collect();
        Ok(AttributePair::new(self.area_counts(Stream::Las), self.area_counts(Stream::Lfb), labels)?)
    }

    pub fn lisa(&self) -> Result<&[LocalMoranResult]> {
        if let Some(l) = self.lisa.get() {
            return Ok(l);
        }
        let sp = &self.cfg.config.spatial;
        let l = bivariate_lisa(&self.pair()?, self.weights()?, sp.n_perm, self.seed("lisa"), sp.alpha)?;
        Ok(self.lisa.get_or_init(|| l))
    }

    pub fn classes(&self) -> Result<&BivariateClassification> {
        if let Some(c) = self.classes.get() {
            return Ok(c);
        }
        let c = bivariate_classify(&self.area_counts(Stream::Las), &self.area_counts(Stream::Lfb))?;
        Ok(self.classes.get_or_init(|| c))
    }

    pub fn dual_high(&self) -> Result<Vec<bool>> {
        Ok(dual_high_flags(&self.classes()?.classes))
    }
}
