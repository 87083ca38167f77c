//! Readers for incidents, areas, weather and covariates, plus the point
//! to area assignment and calendar aggregation used by the time-series
//! stages.

mod aggregate;
pub mod geometry;

pub use aggregate::{
    aggregate, aggregate_by_area, aggregate_over, align_exog, days_in_month, Aggregated, Bucket, BucketSeries, DateSpan,
    ExogAlignment, Profile,
};

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, NaiveDateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use geometry::{BBox, Point, Ring, BOUNDARY_EPS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Fire,
    SpecialService,
    FalseAlarm,
    Ambulance,
}

impl Category {
    pub const ALL: [Category; 4] = [
        Category::Fire,
        Category::SpecialService,
        Category::FalseAlarm,
        Category::Ambulance,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Category::Fire => "fire",
            Category::SpecialService => "special_service",
            Category::FalseAlarm => "false_alarm",
            Category::Ambulance => "ambulance",
        }
    }

    /// Fire-brigade categories; everything except ambulance calls.
    pub fn is_fire_service(&self) -> bool {
        !matches!(self, Category::Ambulance)
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace([' ', '-'], "_");
        match norm.as_str() {
            "fire" => Ok(Category::Fire),
            "special_service" => Ok(Category::SpecialService),
            "false_alarm" => Ok(Category::FalseAlarm),
            "ambulance" => Ok(Category::Ambulance),
            _ => Err(format!("unknown category '{s}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncidentRecord {
    pub id: String,
    /// UTC seconds since the Unix epoch.
    pub timestamp: i64,
    pub lon: f64,
    pub lat: f64,
    pub category: Category,
    pub area_id: Option<String>,
}

impl IncidentRecord {
    pub fn datetime(&self) -> DateTime<Utc> {
        DateTime::from_timestamp(self.timestamp, 0).expect("timestamp in chrono range")
    }

    pub fn date(&self) -> NaiveDate {
        self.datetime().date_naive()
    }

    pub fn point(&self) -> Point {
        (self.lon, self.lat)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowError {
    /// 1-based line number in the source file (the header is line 1).
    pub line: u64,
    pub message: String,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct IncidentLoad {
    pub records: Vec<IncidentRecord>,
    pub errors: Vec<RowError>,
    /// Rows whose missing coordinates were replaced by their area centroid.
    pub approximated: usize,
}

#[derive(Debug, Clone, Default)]
pub struct IncidentOptions {
    /// Half-open `[start, end)` window in UTC seconds.
    pub window: Option<(i64, i64)>,
    /// Area centroids used for rows that carry an `area_id` but no usable
    /// coordinates.
    pub centroids: HashMap<String, Point>,
}

const INCIDENT_COLUMNS: [&str; 5] = ["id", "timestamp_iso8601", "lon", "lat", "category"];

pub fn parse_timestamp(s: &str) -> Option<i64> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt.and_utc().timestamp());
        }
    }
    None
}

pub fn format_timestamp(ts: i64) -> String {
    DateTime::from_timestamp(ts, 0)
        .expect("timestamp in chrono range")
        .format("%Y-%m-%dT%H:%M:%SZ")
        .to_string()
}

fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))
}

fn column_index(headers: &csv::StringRecord, name: &str, file: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::Schema(format!("{file}: missing required column '{name}'")))
}

pub fn read_incidents(path: impl AsRef<Path>, opts: &IncidentOptions) -> Result<IncidentLoad> {
    read_incidents_from(open(path.as_ref())?, opts)
}

pub fn read_incidents_from<R: Read>(reader: R, opts: &IncidentOptions) -> Result<IncidentLoad> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut idx = [0usize; 5];
    for (slot, name) in idx.iter_mut().zip(INCIDENT_COLUMNS) {
        *slot = column_index(&headers, name, "incidents")?;
    }
    let area_col = headers.iter().position(|h| h.trim() == "area_id");

    let mut load = IncidentLoad::default();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        match parse_incident(&row, &idx, area_col, opts) {
            Ok((rec, approx)) => {
                load.approximated += usize::from(approx);
                load.records.push(rec);
            }
            Err(message) => load.errors.push(RowError { line, message }),
        }
    }
    Ok(load)
}

fn parse_incident(
    row: &csv::StringRecord,
    idx: &[usize; 5],
    area_col: Option<usize>,
    opts: &IncidentOptions,
) -> std::result::Result<(IncidentRecord, bool), String> {
    let field = |i: usize| row.get(i).unwrap_or("").trim();
    let id = field(idx[0]).to_string();
    if id.is_empty() {
        return Err("empty id".into());
    }
    let ts_raw = field(idx[1]);
    let timestamp = parse_timestamp(ts_raw).ok_or_else(|| format!("unparseable timestamp '{ts_raw}'"))?;
    if let Some((start, end)) = opts.window {
        if timestamp < start || timestamp >= end {
            return Err(format!("timestamp {ts_raw} outside study window"));
        }
    }
    let category: Category = field(idx[4]).parse()?;
    let area_id = area_col.map(field).filter(|s| !s.is_empty()).map(str::to_string);

    let (lon_raw, lat_raw) = (field(idx[2]), field(idx[3]));
    if lon_raw.is_empty() || lat_raw.is_empty() {
        // approximate location: fall back to the area centroid when known
        return match area_id.as_ref().and_then(|a| opts.centroids.get(a)) {
            Some(&(lon, lat)) => Ok((
                IncidentRecord {
                    id,
                    timestamp,
                    lon,
                    lat,
                    category,
                    area_id,
                },
                true,
            )),
            None => Err("missing coordinate and no usable area location".into()),
        };
    }
    let lon: f64 = lon_raw.parse().map_err(|_| format!("unparseable lon '{lon_raw}'"))?;
    let lat: f64 = lat_raw.parse().map_err(|_| format!("unparseable lat '{lat_raw}'"))?;
    if !(-180.0..=180.0).contains(&lon) {
        return Err(format!("lon {lon} outside [-180, 180]"));
    }
    if !(-90.0..=90.0).contains(&lat) {
        return Err(format!("lat {lat} outside [-90, 90]"));
    }
    Ok((
        IncidentRecord {
            id,
            timestamp,
            lon,
            lat,
            category,
            area_id,
        },
        false,
    ))
}

pub fn write_incidents(path: impl AsRef<Path>, records: &[IncidentRecord]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(INCIDENT_COLUMNS)?;
    for r in records {
        w.write_record([
            r.id.clone(),
            format_timestamp(r.timestamp),
            format!("{:.7}", r.lon),
            format!("{:.7}", r.lat),
            r.category.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaUnit {
    pub area_id: String,
    pub name: String,
    pub borough: String,
    /// Closed rings; interior is decided by the even-odd rule.
    pub polygon: Vec<Ring>,
    pub centroid: Point,
}

impl AreaUnit {
    /// Builds an area, closing rings and computing the centroid.
    pub fn new(area_id: impl Into<String>, name: impl Into<String>, borough: impl Into<String>, mut polygon: Vec<Ring>) -> Self {
        polygon.retain(|r| r.len() >= 3);
        for r in &mut polygon {
            geometry::close_ring(r);
        }
        let centroid = geometry::centroid(&polygon);
        AreaUnit {
            area_id: area_id.into(),
            name: name.into(),
            borough: borough.into(),
            polygon,
            centroid,
        }
    }

    pub fn bbox(&self) -> BBox {
        geometry::rings_bbox(&self.polygon)
    }

    pub fn contains(&self, p: Point) -> bool {
        geometry::contains_even_odd(&self.polygon, p)
    }

    pub fn touches(&self, p: Point) -> bool {
        geometry::on_boundary(&self.polygon, p, BOUNDARY_EPS)
    }
}

fn property_string(props: &Value, key: &str) -> Option<String> {
    match props.get(key)? {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn parse_ring(v: &Value) -> Option<Ring> {
    v.as_array()?
        .iter()
        .map(|p| {
            let c = p.as_array()?;
            Some((c.first()?.as_f64()?, c.get(1)?.as_f64()?))
        })
        .collect()
}

fn parse_rings(v: &Value) -> Option<Vec<Ring>> {
    v.as_array()?.iter().map(parse_ring).collect()
}

pub fn read_areas(path: impl AsRef<Path>) -> Result<Vec<AreaUnit>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_areas(&text)
}

pub fn parse_areas(text: &str) -> Result<Vec<AreaUnit>> {
    let doc: Value = serde_json::from_str(text)?;
    if doc.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(Error::Schema("areas: expected a GeoJSON FeatureCollection".into()));
    }
    let features = doc
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Schema("areas: missing 'features' array".into()))?;
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(features.len());
    for (i, f) in features.iter().enumerate() {
        let props = f.get("properties").unwrap_or(&Value::Null);
        let get = |k: &str| {
            property_string(props, k).ok_or_else(|| Error::Schema(format!("areas: feature {i} lacks property '{k}'")))
        };
        let area_id = get("area_id")?;
        let name = get("name")?;
        let borough = get("borough")?;
        let geom = f
            .get("geometry")
            .ok_or_else(|| Error::Schema(format!("areas: feature {i} has no geometry")))?;
        let coords = geom.get("coordinates").unwrap_or(&Value::Null);
        let rings = match geom.get("type").and_then(Value::as_str) {
            Some("Polygon") => parse_rings(coords),
            Some("MultiPolygon") => coords
                .as_array()
                .and_then(|parts| parts.iter().map(parse_rings).collect::<Option<Vec<_>>>())
                .map(|parts| parts.into_iter().flatten().collect()),
            other => {
                return Err(Error::Schema(format!(
                    "areas: feature {i} has unsupported geometry type {other:?}"
                )))
            }
        }
        .ok_or_else(|| Error::Schema(format!("areas: feature {i} has malformed coordinates")))?;
        if !seen.insert(area_id.clone()) {
            return Err(Error::InvalidInput(format!("duplicate area_id '{area_id}'")));
        }
        out.push(AreaUnit::new(area_id, name, borough, rings));
    }
    Ok(out)
}

/// GeoJSON FeatureCollection with one feature per area. `extra` supplies
/// additional properties per area, in area order.
pub fn areas_to_geojson(areas: &[AreaUnit], extra: Option<&[serde_json::Map<String, Value>]>) -> Value {
    let features: Vec<Value> = areas
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let mut props = serde_json::Map::new();
            props.insert("area_id".into(), Value::String(a.area_id.clone()));
            props.insert("name".into(), Value::String(a.name.clone()));
            props.insert("borough".into(), Value::String(a.borough.clone()));
            if let Some(extra) = extra.and_then(|e| e.get(i)) {
                for (k, v) in extra {
                    props.insert(k.clone(), v.clone());
                }
            }
            let rings: Vec<Value> = a
                .polygon
                .iter()
                .map(|r| Value::Array(r.iter().map(|&(x, y)| serde_json::json!([x, y])).collect()))
                .collect();
            serde_json::json!({
                "type": "Feature",
                "properties": Value::Object(props),
                "geometry": {"type": "Polygon", "coordinates": rings},
            })
        })
        .collect();
    serde_json::json!({"type": "FeatureCollection", "features": features})
}

/// Bounding-box prefiltered point-in-polygon lookup over a fixed area set.
#[derive(Debug, Clone)]
pub struct AreaIndex<'a> {
    areas: &'a [AreaUnit],
    boxes: Vec<BBox>,
}

impl<'a> AreaIndex<'a> {
    pub fn new(areas: &'a [AreaUnit]) -> Self {
        AreaIndex {
            boxes: areas.iter().map(AreaUnit::bbox).collect(),
            areas,
        }
    }

    /// Index of the area containing `p`. A point on a shared boundary goes
    /// to the area with the lexicographically smallest id.
    pub fn locate(&self, p: Point) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, (a, b)) in self.areas.iter().zip(&self.boxes).enumerate() {
            if !b.contains(p, BOUNDARY_EPS) {
                continue;
            }
            if a.touches(p) || a.contains(p) {
                best = match best {
                    Some(j) if self.areas[j].area_id <= a.area_id => Some(j),
                    _ => Some(i),
                };
            }
        }
        best
    }

    pub fn assign(&self, p: Point) -> Option<&'a str> {
        self.locate(p).map(|i| self.areas[i].area_id.as_str())
    }
}

/// Convenience wrapper around [`AreaIndex`] for one-off lookups.
pub fn assign_area(point: Point, areas: &[AreaUnit]) -> Option<String> {
    AreaIndex::new(areas).assign(point).map(str::to_string)
}

/// Fills `area_id` on every record that lacks one. Returns the number of
/// records that fell outside all areas.
pub fn assign_records(records: &mut [IncidentRecord], areas: &[AreaUnit]) -> usize {
    let index = AreaIndex::new(areas);
    let mut outside = 0;
    for r in records.iter_mut().filter(|r| r.area_id.is_none()) {
        r.area_id = index.assign(r.point()).map(str::to_string);
        outside += usize::from(r.area_id.is_none());
    }
    outside
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatherRecord {
    pub date: NaiveDate,
    /// Mean temperature, degrees C.
    pub temperature: f64,
    /// Mean dew point, degrees C.
    pub dew_point: f64,
    /// Mean wind speed, km/h.
    pub wind_speed: f64,
}

#[derive(Debug, Clone, Default)]
pub struct WeatherLoad {
    pub records: Vec<WeatherRecord>,
    pub errors: Vec<RowError>,
}

const WEATHER_COLUMNS: [&str; 4] = ["date", "temp_c", "dewpoint_c", "wind_kmh"];

pub fn read_weather(path: impl AsRef<Path>) -> Result<WeatherLoad> {
    read_weather_from(open(path.as_ref())?)
}

pub fn read_weather_from<R: Read>(reader: R) -> Result<WeatherLoad> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut idx = [0usize; 4];
    for (slot, name) in idx.iter_mut().zip(WEATHER_COLUMNS) {
        *slot = column_index(&headers, name, "weather")?;
    }
    let mut load = WeatherLoad::default();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let field = |i: usize| row.get(idx[i]).unwrap_or("").trim();
        let parsed = (|| -> std::result::Result<WeatherRecord, String> {
            let date = NaiveDate::parse_from_str(field(0), "%Y-%m-%d")
                .map_err(|_| format!("unparseable date '{}'", field(0)))?;
            let num = |i: usize| -> std::result::Result<f64, String> {
                field(i)
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| format!("unparseable {} '{}'", WEATHER_COLUMNS[i], field(i)))
            };
            let rec = WeatherRecord {
                date,
                temperature: num(1)?,
                dew_point: num(2)?,
                wind_speed: num(3)?,
            };
            if rec.dew_point > rec.temperature + 1.0 {
                return Err(format!(
                    "dew point {} exceeds temperature {} by more than 1.0",
                    rec.dew_point, rec.temperature
                ));
            }
            if rec.wind_speed < 0.0 {
                return Err(format!("negative wind speed {}", rec.wind_speed));
            }
            Ok(rec)
        })();
        match parsed {
            Ok(r) => load.records.push(r),
            Err(message) => load.errors.push(RowError { line, message }),
        }
    }
    Ok(load)
}

pub fn write_weather(path: impl AsRef<Path>, records: &[WeatherRecord]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(WEATHER_COLUMNS)?;
    for r in records {
        w.write_record([
            r.date.format("%Y-%m-%d").to_string(),
            format!("{:.3}", r.temperature),
            format!("{:.3}", r.dew_point),
            format!("{:.3}", r.wind_speed),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}

/// Per-area covariates, one row per area in the order of the area set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovariateTable {
    pub names: Vec<String>,
    pub area_ids: Vec<String>,
    pub values: Vec<Vec<f64>>,
    /// Number of cells filled by borough-median imputation.
    pub imputed: usize,
}

fn is_percentage(name: &str) -> bool {
    let n = name.to_ascii_lowercase();
    n.ends_with("pct") || n.ends_with('%')
}

fn median(v: &mut [f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { (v[m - 1] + v[m]) / 2.0 })
}

pub fn read_covariates(path: impl AsRef<Path>, areas: &[AreaUnit]) -> Result<CovariateTable> {
    read_covariates_from(open(path.as_ref())?, areas)
}

pub fn read_covariates_from<R: Read>(reader: R, areas: &[AreaUnit]) -> Result<CovariateTable> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(reader);
    let headers = rdr.headers()?.clone();
    let id_col = column_index(&headers, "area_id", "covariates")?;
    let names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != id_col)
        .map(|(_, h)| h.trim().to_string())
        .collect();
    if names.is_empty() {
        return Err(Error::Schema("covariates: no covariate columns".into()));
    }
    let position: HashMap<&str, usize> = areas.iter().enumerate().map(|(i, a)| (a.area_id.as_str(), i)).collect();
    let mut raw: Vec<Vec<Option<f64>>> = vec![vec![None; names.len()]; areas.len()];
    let mut seen = HashSet::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let id = row.get(id_col).unwrap_or("").trim();
        let &ai = position
            .get(id)
            .ok_or_else(|| Error::InvalidInput(format!("covariates line {line}: unknown area_id '{id}'")))?;
        if !seen.insert(ai) {
            return Err(Error::InvalidInput(format!("covariates line {line}: duplicate area_id '{id}'")));
        }
        let mut k = 0;
        for (i, cell) in row.iter().enumerate() {
            if i == id_col {
                continue;
            }
            let cell = cell.trim();
            if !(cell.is_empty() || cell.eq_ignore_ascii_case("na") || cell.eq_ignore_ascii_case("nan")) {
                let v: f64 = cell.parse().map_err(|_| {
                    Error::InvalidInput(format!("covariates line {line}: unparseable value '{cell}' for {}", names[k]))
                })?;
                if is_percentage(&names[k]) && !(0.0..=100.0).contains(&v) {
                    return Err(Error::InvalidInput(format!(
                        "covariates line {line}: percentage {} = {v} outside [0, 100]",
                        names[k]
                    )));
                }
                raw[ai][k] = Some(v);
            }
            k += 1;
        }
    }

    // borough-median imputation, falling back to the overall median
    let mut imputed = 0;
    let mut values = vec![vec![0.0; names.len()]; areas.len()];
    for k in 0..names.len() {
        let mut by_borough: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        let mut all = Vec::new();
        for (a, row) in areas.iter().zip(&raw) {
            if let Some(v) = row[k] {
                by_borough.entry(a.borough.as_str()).or_default().push(v);
                all.push(v);
            }
        }
        let overall = median(&mut all)
            .ok_or_else(|| Error::InvalidInput(format!("covariate {} has no observed values", names[k])))?;
        let medians: BTreeMap<&str, f64> = by_borough
            .into_iter()
            .filter_map(|(b, mut v)| median(&mut v).map(|m| (b, m)))
            .collect();
        for (i, a) in areas.iter().enumerate() {
            values[i][k] = match raw[i][k] {
                Some(v) => v,
                None => {
                    imputed += 1;
                    medians.get(a.borough.as_str()).copied().unwrap_or(overall)
                }
            };
        }
    }
    Ok(CovariateTable {
        names,
        area_ids: areas.iter().map(|a| a.area_id.clone()).collect(),
        values,
        imputed,
    })
}

impl CovariateTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.names.iter().position(|n| n == name)?;
        Some(self.values.iter().map(|row| row[k]).collect())
    }

    /// Rows restricted to the named columns, in the given order.
    pub fn select(&self, names: &[String]) -> Result<Vec<Vec<f64>>> {
        let cols: Vec<usize> = names
            .iter()
            .map(|n| {
                self.names
                    .iter()
                    .position(|m| m == n)
                    .ok_or_else(|| Error::InvalidInput(format!("unknown covariate '{n}'")))
            })
            .collect::<Result<_>>()?;
        Ok(self.values.iter().map(|row| cols.iter().map(|&k| row[k]).collect()).collect())
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["area_id".to_string()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header)?;
        for (id, row) in self.area_ids.iter().zip(&self.values) {
            let mut rec = vec![id.clone()];
            rec.extend(row.iter().map(|v| format!("{v:.6}")));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path.display().to_string(), e))?;
        Ok(())
    }
}
