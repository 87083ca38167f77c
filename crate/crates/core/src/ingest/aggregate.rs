use std::collections::{BTreeMap, HashMap};

use chrono::{Datelike, Duration, NaiveDate, Timelike};
use serde::{Deserialize, Serialize};

use super::{IncidentRecord, WeatherRecord};
use crate::error::{Error, Result};
use crate::tsa::{Step, TimeSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bucket {
    Week,
    Month,
    DayOfWeek,
    HourOfDay,
}

/// Inclusive calendar span of a record set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateSpan {
    pub first: NaiveDate,
    pub last: NaiveDate,
}

impl DateSpan {
    pub fn of(records: &[IncidentRecord]) -> Option<Self> {
        let first = records.iter().map(|r| r.timestamp).min()?;
        let last = records.iter().map(|r| r.timestamp).max()?;
        Some(DateSpan {
            first: date_of(first),
            last: date_of(last),
        })
    }

    pub fn days(&self) -> i64 {
        (self.last - self.first).num_days() + 1
    }
}

fn date_of(ts: i64) -> NaiveDate {
    chrono::DateTime::from_timestamp(ts, 0)
        .expect("timestamp in chrono range")
        .date_naive()
}

fn week_start(d: NaiveDate) -> NaiveDate {
    d - Duration::days(i64::from(d.weekday().num_days_from_monday()))
}

fn month_start(d: NaiveDate) -> NaiveDate {
    NaiveDate::from_ymd_opt(d.year(), d.month(), 1).expect("valid month start")
}

fn next_month(d: NaiveDate) -> NaiveDate {
    if d.month() == 12 {
        NaiveDate::from_ymd_opt(d.year() + 1, 1, 1)
    } else {
        NaiveDate::from_ymd_opt(d.year(), d.month() + 1, 1)
    }
    .expect("valid month")
}

/// Number of days in a calendar month.
pub fn days_in_month(year: i32, month: u32) -> u32 {
    let first = NaiveDate::from_ymd_opt(year, month, 1).expect("valid month");
    (next_month(first) - first).num_days() as u32
}

const EPOCH_MONDAY: (i32, u32, u32) = (1970, 1, 5);

fn week_index(d: NaiveDate) -> i64 {
    let epoch = NaiveDate::from_ymd_opt(EPOCH_MONDAY.0, EPOCH_MONDAY.1, EPOCH_MONDAY.2).unwrap();
    (week_start(d) - epoch).num_days().div_euclid(7)
}

fn month_index(d: NaiveDate) -> i64 {
    i64::from(d.year()) * 12 + i64::from(d.month0())
}

/// Counts per calendar week or month.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketSeries {
    pub step: Step,
    /// First day of each bucket inside the span; only the first bucket
    /// can start after its calendar week or month does.
    pub starts: Vec<NaiveDate>,
    pub counts: Vec<f64>,
    /// Days of each bucket inside the span.
    pub days: Vec<u32>,
}

impl BucketSeries {
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Average daily demand: bucket count divided by its calendar days.
    pub fn daily_average(&self) -> Vec<f64> {
        self.counts
            .iter()
            .zip(&self.days)
            .map(|(c, &d)| c / f64::from(d))
            .collect()
    }

    pub fn origin(&self) -> i64 {
        match (self.step, self.starts.first()) {
            (Step::Week, Some(&d)) => week_index(d),
            (Step::Month, Some(&d)) => month_index(d),
            _ => 0,
        }
    }

    pub fn to_time_series(&self, daily_average: bool) -> TimeSeries {
        TimeSeries {
            start: self.origin(),
            step: self.step,
            values: if daily_average { self.daily_average() } else { self.counts.clone() },
        }
    }

    fn bucket_end(&self, i: usize) -> NaiveDate {
        self.starts[i] + Duration::days(i64::from(self.days[i]) - 1)
    }
}

/// Mean count per day-of-week (ISO, Monday first) or hour-of-day bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub bucket: Bucket,
    pub totals: Vec<f64>,
    /// How many times each bin occurs within the span.
    pub occurrences: Vec<u32>,
    pub means: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Aggregated {
    Series(BucketSeries),
    Profile(Profile),
}

impl Aggregated {
    pub fn series(&self) -> Option<&BucketSeries> {
        match self {
            Aggregated::Series(s) => Some(s),
            Aggregated::Profile(_) => None,
        }
    }

    pub fn profile(&self) -> Option<&Profile> {
        match self {
            Aggregated::Profile(p) => Some(p),
            Aggregated::Series(_) => None,
        }
    }
}

/// Aggregates over the span of the records themselves.
pub fn aggregate(records: &[IncidentRecord], bucket: Bucket) -> Aggregated {
    match DateSpan::of(records) {
        Some(span) => aggregate_over(records, bucket, span),
        None => empty(bucket),
    }
}

fn empty(bucket: Bucket) -> Aggregated {
    match bucket {
        Bucket::Week | Bucket::Month => Aggregated::Series(BucketSeries {
            step: if bucket == Bucket::Week { Step::Week } else { Step::Month },
            starts: vec![],
            counts: vec![],
            days: vec![],
        }),
        Bucket::DayOfWeek | Bucket::HourOfDay => {
            let bins = if bucket == Bucket::DayOfWeek { 7 } else { 24 };
            Aggregated::Profile(Profile {
                bucket,
                totals: vec![0.0; bins],
                occurrences: vec![0; bins],
                means: vec![0.0; bins],
            })
        }
    }
}

/// Aggregates over a fixed span so that several record sets line up.
/// Records dated outside the span are ignored.
pub fn aggregate_over(records: &[IncidentRecord], bucket: Bucket, span: DateSpan) -> Aggregated {
    match bucket {
        Bucket::Week | Bucket::Month => {
            let (step, first) = if bucket == Bucket::Week {
                (Step::Week, week_start(span.first))
            } else {
                (Step::Month, month_start(span.first))
            };
            let mut starts = Vec::new();
            let mut days = Vec::new();
            let mut cursor = first;
            while cursor <= span.last {
                let next = if step == Step::Week { cursor + Duration::days(7) } else { next_month(cursor) };
                // edge buckets are clipped to the span so daily averages
                // divide by days actually observed
                let lo = cursor.max(span.first);
                let hi = next.min(span.last + Duration::days(1));
                starts.push(lo);
                days.push((hi - lo).num_days() as u32);
                cursor = next;
            }
            let origin = match step {
                Step::Week => week_index(first),
                Step::Month => month_index(first),
            };
            let mut counts = vec![0.0; starts.len()];
            for r in records {
                let d = r.date();
                if d < span.first || d > span.last {
                    continue;
                }
                let idx = match step {
                    Step::Week => week_index(d),
                    Step::Month => month_index(d),
                } - origin;
                counts[idx as usize] += 1.0;
            }
            Aggregated::Series(BucketSeries {
                step,
                starts,
                counts,
                days,
            })
        }
        Bucket::DayOfWeek | Bucket::HourOfDay => {
            let bins = if bucket == Bucket::DayOfWeek { 7 } else { 24 };
            let mut totals = vec![0.0; bins];
            for r in records {
                let dt = r.datetime();
                let d = dt.date_naive();
                if d < span.first || d > span.last {
                    continue;
                }
                let k = if bucket == Bucket::DayOfWeek {
                    dt.weekday().num_days_from_monday() as usize
                } else {
                    dt.hour() as usize
                };
                totals[k] += 1.0;
            }
            let occurrences: Vec<u32> = if bucket == Bucket::DayOfWeek {
                let mut occ = vec![0u32; 7];
                for d in span.first.iter_days().take(span.days() as usize) {
                    occ[d.weekday().num_days_from_monday() as usize] += 1;
                }
                occ
            } else {
                vec![span.days() as u32; 24]
            };
            let means = totals
                .iter()
                .zip(&occurrences)
                .map(|(t, &o)| if o == 0 { 0.0 } else { t / f64::from(o) })
                .collect();
            Aggregated::Profile(Profile {
                bucket,
                totals,
                occurrences,
                means,
            })
        }
    }
}

/// Per-area aggregation over the common span of all records. Records
/// without an `area_id` are skipped.
pub fn aggregate_by_area(records: &[IncidentRecord], bucket: Bucket) -> BTreeMap<String, Aggregated> {
    let Some(span) = DateSpan::of(records) else {
        return BTreeMap::new();
    };
    let mut groups: BTreeMap<String, Vec<IncidentRecord>> = BTreeMap::new();
    for r in records {
        if let Some(a) = &r.area_id {
            groups.entry(a.clone()).or_default().push(r.clone());
        }
    }
    groups
        .into_iter()
        .map(|(a, recs)| (a, aggregate_over(&recs, bucket, span)))
        .collect()
}

/// Weather averaged into each demand bucket.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExogAlignment {
    pub names: Vec<String>,
    /// One row per bucket: temperature, dew point, wind speed.
    pub rows: Vec<Vec<f64>>,
    /// Days filled by linear interpolation.
    pub interpolated: Vec<NaiveDate>,
}

const MAX_GAP_DAYS: i64 = 7;

pub fn align_exog(demand: &BucketSeries, weather: &[WeatherRecord]) -> Result<ExogAlignment> {
    let names = vec!["temperature".to_string(), "dew_point".to_string(), "wind_speed".to_string()];
    if demand.is_empty() {
        return Ok(ExogAlignment {
            names,
            rows: vec![],
            interpolated: vec![],
        });
    }
    let mut by_date: HashMap<NaiveDate, [f64; 3]> = HashMap::with_capacity(weather.len());
    for w in weather {
        if by_date
            .insert(w.date, [w.temperature, w.dew_point, w.wind_speed])
            .is_some()
        {
            return Err(Error::InvalidInput(format!("duplicate weather date {}", w.date)));
        }
    }
    let first = demand.starts[0];
    let last = demand.bucket_end(demand.len() - 1);
    let n_days = (last - first).num_days() as usize + 1;
    let mut daily: Vec<Option<[f64; 3]>> = first
        .iter_days()
        .take(n_days)
        .map(|d| by_date.get(&d).copied())
        .collect();

    let mut interpolated = Vec::new();
    let mut i = 0;
    while i < n_days {
        if daily[i].is_some() {
            i += 1;
            continue;
        }
        let gap_start = i;
        while i < n_days && daily[i].is_none() {
            i += 1;
        }
        let len = (i - gap_start) as i64;
        let start_date = first + Duration::days(gap_start as i64);
        if len > MAX_GAP_DAYS {
            return Err(Error::WeatherGap {
                start: start_date,
                days: len,
            });
        }
        if gap_start == 0 || i == n_days {
            return Err(Error::InvalidInput(format!(
                "weather does not cover the demand span {first}..={last} (missing from {start_date})"
            )));
        }
        let (a, b) = (daily[gap_start - 1].unwrap(), daily[i].unwrap());
        let span = (i - gap_start + 1) as f64;
        for (k, slot) in daily[gap_start..i].iter_mut().enumerate() {
            let t = (k + 1) as f64 / span;
            *slot = Some([0, 1, 2].map(|c| a[c] + t * (b[c] - a[c])));
            interpolated.push(first + Duration::days((gap_start + k) as i64));
        }
    }

    let mut rows = Vec::with_capacity(demand.len());
    let mut offset = 0usize;
    for &d in &demand.days {
        let chunk = &daily[offset..offset + d as usize];
        let mut sums = [0.0; 3];
        for v in chunk {
            let v = v.expect("filled above");
            for c in 0..3 {
                sums[c] += v[c];
            }
        }
        rows.push(sums.iter().map(|s| s / f64::from(d)).collect());
        offset += d as usize;
    }
    Ok(ExogAlignment {
        names,
        rows,
        interpolated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Category;

    fn rec(id: usize, ts: i64) -> IncidentRecord {
        IncidentRecord {
            id: id.to_string(),
            timestamp: ts,
            lon: 0.0,
            lat: 0.0,
            category: Category::Fire,
            area_id: None,
        }
    }

    fn ts(y: i32, m: u32, d: u32, h: u32) -> i64 {
        NaiveDate::from_ymd_opt(y, m, d)
            .unwrap()
            .and_hms_opt(h, 0, 0)
            .unwrap()
            .and_utc()
            .timestamp()
    }

    fn day_weather(date: NaiveDate, t: f64) -> WeatherRecord {
        WeatherRecord {
            date,
            temperature: t,
            dew_point: t - 2.0,
            wind_speed: 10.0,
        }
    }

    #[test]
    fn monthly_count() {
        let recs = vec![rec(0, ts(2021, 3, 1, 0)), rec(1, ts(2021, 3, 15, 5)), rec(2, ts(2021, 3, 31, 23))];
        let agg = aggregate(&recs, Bucket::Month);
        let s = agg.series().unwrap();
        assert_eq!(s.counts, vec![3.0]);
        assert_eq!(s.days, vec![31]);
        assert!((s.daily_average()[0] - 3.0 / 31.0).abs() < 1e-15);
    }

    #[test]
    fn day_of_week_symmetry() {
        // two per day over two weeks starting on a Monday
        let mut recs = Vec::new();
        for d in 0..14 {
            let day = NaiveDate::from_ymd_opt(2021, 3, 1).unwrap() + Duration::days(d);
            for h in [3, 15] {
                recs.push(rec(recs.len(), day.and_hms_opt(h, 0, 0).unwrap().and_utc().timestamp()));
            }
        }
        let agg = aggregate(&recs, Bucket::DayOfWeek);
        assert_eq!(agg.profile().unwrap().means, vec![2.0; 7]);
        let hours = aggregate(&recs, Bucket::HourOfDay);
        let p = hours.profile().unwrap();
        assert_eq!(p.means[3], 1.0);
        assert_eq!(p.means[4], 0.0);
    }

    #[test]
    fn empty_input_gives_empty_series() {
        assert!(aggregate(&[], Bucket::Week).series().unwrap().is_empty());
        assert_eq!(aggregate(&[], Bucket::HourOfDay).profile().unwrap().means.len(), 24);
    }

    #[test]
    fn weeks_are_iso_and_gapless() {
        // Wed 2021-03-03 and Mon 2021-03-22: four weeks, middle ones empty
        let recs = vec![rec(0, ts(2021, 3, 3, 0)), rec(1, ts(2021, 3, 22, 0))];
        let s = aggregate(&recs, Bucket::Week).series().unwrap().clone();
        assert_eq!(s.starts[1], NaiveDate::from_ymd_opt(2021, 3, 8).unwrap());
        assert_eq!(s.counts, vec![1.0, 0.0, 0.0, 1.0]);
        // edge weeks clipped to Wed..Sun and Mon only
        assert_eq!(s.starts[0], NaiveDate::from_ymd_opt(2021, 3, 3).unwrap());
        assert_eq!(s.days, vec![5, 7, 7, 1]);
        assert_eq!(s.origin(), super::week_index(NaiveDate::from_ymd_opt(2021, 3, 1).unwrap()));
        let ts = s.to_time_series(false);
        assert_eq!(ts.step, Step::Week);
    }

    #[test]
    fn by_area_shares_span() {
        let mut a = rec(0, ts(2021, 1, 5, 0));
        a.area_id = Some("A".into());
        let mut b = rec(1, ts(2021, 3, 5, 0));
        b.area_id = Some("B".into());
        let by = aggregate_by_area(&[a, b], Bucket::Month);
        assert_eq!(by["A"].series().unwrap().counts, vec![1.0, 0.0, 0.0]);
        assert_eq!(by["B"].series().unwrap().counts, vec![0.0, 0.0, 1.0]);
    }

    fn one_week() -> BucketSeries {
        BucketSeries {
            step: Step::Week,
            starts: vec![NaiveDate::from_ymd_opt(2021, 3, 1).unwrap()],
            counts: vec![1.0],
            days: vec![7],
        }
    }

    #[test]
    fn exog_means_per_bucket() {
        let start = NaiveDate::from_ymd_opt(2021, 3, 1).unwrap();
        let weather: Vec<_> = (0..7).map(|d| day_weather(start + Duration::days(d), d as f64)).collect();
        let x = align_exog(&one_week(), &weather).unwrap();
        assert_eq!(x.rows, vec![vec![3.0, 1.0, 10.0]]);
        assert!(x.interpolated.is_empty());
    }

    #[test]
    fn short_gaps_interpolated_long_gaps_rejected() {
        let start = NaiveDate::from_ymd_opt(2021, 3, 1).unwrap();
        let mut weather: Vec<_> = (0..7).map(|d| day_weather(start + Duration::days(d), d as f64)).collect();
        weather.remove(3);
        let x = align_exog(&one_week(), &weather).unwrap();
        assert_eq!(x.interpolated, vec![start + Duration::days(3)]);
        assert!((x.rows[0][0] - 3.0).abs() < 1e-12);

        let series = BucketSeries {
            step: Step::Week,
            starts: vec![start, start + Duration::days(7)],
            counts: vec![1.0, 1.0],
            days: vec![7, 7],
        };
        let sparse: Vec<_> = [0, 13].iter().map(|&d| day_weather(start + Duration::days(d), 1.0)).collect();
        assert!(matches!(align_exog(&series, &sparse), Err(Error::WeatherGap { days: 12, .. })));
    }
}
