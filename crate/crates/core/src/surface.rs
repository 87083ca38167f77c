//! Quartic kernel density rasters and comap temporal faceting.

use std::fmt::Write as _;
use std::path::Path;

use chrono::{Datelike, Timelike};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::geometry::{BBox, Point};
use crate::ingest::IncidentRecord;

/// 1.5 km expressed in degrees of latitude.
pub const DEFAULT_BANDWIDTH_DEG: f64 = 1.5 / 111.32;
pub const DEFAULT_GRID_CELLS: usize = 200;

/// Regular raster with square cells. `values` is row-major with row 0 at
/// the bottom (southern) edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RasterGrid {
    pub origin: Point,
    pub cell: f64,
    pub nx: usize,
    pub ny: usize,
    pub values: Vec<f64>,
}

impl RasterGrid {
    pub fn new(origin: Point, cell: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(cell > 0.0) || nx == 0 || ny == 0 {
            return Err(Error::InvalidInput(format!("raster needs positive cell size and dimensions, got {cell} x {nx} x {ny}")));
        }
        Ok(RasterGrid {
            origin,
            cell,
            nx,
            ny,
            values: vec![0.0; nx * ny],
        })
    }

    /// An `nx` by `ny` grid of square cells covering `bbox` grown by
    /// `margin` on every side, centred on it.
    pub fn covering(bbox: &BBox, margin: f64, nx: usize, ny: usize) -> Result<Self> {
        let w = bbox.width() + 2.0 * margin;
        let h = bbox.height() + 2.0 * margin;
        let cell = (w / nx as f64).max(h / ny as f64);
        if !(cell > 0.0) || !cell.is_finite() {
            return Err(Error::InvalidInput("cannot cover an empty or degenerate extent".into()));
        }
        let cx = 0.5 * (bbox.min_x + bbox.max_x);
        let cy = 0.5 * (bbox.min_y + bbox.max_y);
        Self::new((cx - 0.5 * cell * nx as f64, cy - 0.5 * cell * ny as f64), cell, nx, ny)
    }

    /// Empty grid with the same geometry.
    pub fn blank(&self) -> Self {
        RasterGrid {
            values: vec![0.0; self.nx * self.ny],
            ..self.clone()
        }
    }

    pub fn cell_center(&self, ix: usize, iy: usize) -> Point {
        (
            self.origin.0 + (ix as f64 + 0.5) * self.cell,
            self.origin.1 + (iy as f64 + 0.5) * self.cell,
        )
    }

    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.nx + ix]
    }

    pub fn cell_area(&self) -> f64 {
        self.cell * self.cell
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Integral of the surface: sum of values times cell area.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_area()
    }

    /// Area of cells at or above half of this raster's own maximum.
    pub fn half_max_area(&self) -> f64 {
        let m = self.max();
        if m <= 0.0 {
            return 0.0;
        }
        self.values.iter().filter(|&&v| v >= 0.5 * m).count() as f64 * self.cell_area()
    }

    pub fn bbox(&self) -> BBox {
        BBox {
            min_x: self.origin.0,
            min_y: self.origin.1,
            max_x: self.origin.0 + self.cell * self.nx as f64,
            max_y: self.origin.1 + self.cell * self.ny as f64,
        }
    }

    /// ESRI ASCII grid text, northern row first.
    pub fn to_esri_ascii(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "ncols {}", self.nx);
        let _ = writeln!(s, "nrows {}", self.ny);
        let _ = writeln!(s, "xllcorner {}", self.origin.0);
        let _ = writeln!(s, "yllcorner {}", self.origin.1);
        let _ = writeln!(s, "cellsize {}", self.cell);
        let _ = writeln!(s, "NODATA_value -9999");
        for iy in (0..self.ny).rev() {
            let row = &self.values[iy * self.nx..(iy + 1) * self.nx];
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        }
        s
    }

    pub fn write_esri_ascii(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_esri_ascii()).map_err(|e| Error::io(path.display().to_string(), e))
    }
}

/// Quartic (biweight) kernel with radius `h`, normalized to unit mass.
pub fn quartic(d2: f64, h: f64) -> f64 {
    let h2 = h * h;
    if d2 >= h2 {
        return 0.0;
    }
    let u = 1.0 - d2 / h2;
    3.0 / (std::f64::consts::PI * h2) * u * u
}

const BAND_ROWS: usize = 8;

/// Kernel density surface of `points` on the geometry of `template`.
///
/// Rows are split into fixed bands processed in parallel; within a band
/// every cell accumulates contributions in point order, so the result is
/// bit-identical for any thread count.
pub fn kde(points: &[Point], bandwidth: f64, template: &RasterGrid) -> Result<RasterGrid> {
    if !(bandwidth > 0.0) || !bandwidth.is_finite() {
        return Err(Error::InvalidInput(format!("bandwidth must be positive, got {bandwidth}")));
    }
    let mut out = template.blank();
    let (nx, ny, cell) = (template.nx, template.ny, template.cell);
    let (ox, oy) = template.origin;
    let h2 = bandwidth * bandwidth;
    // index range of cells whose centres lie within the bandwidth of c
    let span = |c: f64, o: f64, n: usize| -> Option<(usize, usize)> {
        let lo = ((c - bandwidth - o) / cell - 0.5).floor().max(0.0);
        let hi = ((c + bandwidth - o) / cell - 0.5).ceil().min(n as f64 - 1.0);
        (hi >= lo).then_some((lo as usize, hi as usize))
    };
    out.values
        .par_chunks_mut(BAND_ROWS * nx)
        .enumerate()
        .for_each(|(band, chunk)| {
            let row0 = band * BAND_ROWS;
            let rows = chunk.len() / nx;
            for &(px, py) in points {
                let (Some((x0, x1)), Some((y0, y1))) = (span(px, ox, nx), span(py, oy, ny)) else {
                    continue;
                };
                let (y0, y1) = (y0.max(row0), y1.min(row0 + rows - 1));
                if y0 > y1 {
                    continue;
                }
                for iy in y0..=y1 {
                    let cy = oy + (iy as f64 + 0.5) * cell;
                    let dy2 = (cy - py) * (cy - py);
                    if dy2 >= h2 {
                        continue;
                    }
                    let row = &mut chunk[(iy - row0) * nx..(iy - row0 + 1) * nx];
                    for (ix, v) in row.iter_mut().enumerate().take(x1 + 1).skip(x0) {
                        let cx = ox + (ix as f64 + 0.5) * cell;
                        let d2 = (cx - px) * (cx - px) + dy2;
                        if d2 < h2 {
                            *v += quartic(d2, bandwidth);
                        }
                    }
                }
            }
        });
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemporalDim {
    HourOfDay,
    DayOfWeek,
    Month,
}

impl TemporalDim {
    pub fn period(&self) -> f64 {
        match self {
            TemporalDim::HourOfDay => 24.0,
            TemporalDim::DayOfWeek => 7.0,
            TemporalDim::Month => 12.0,
        }
    }

    /// Continuous position of a record on this cycle: fractional hour,
    /// fractional ISO weekday from Monday = 0, or fractional month from
    /// January = 0.
    pub fn coordinate(&self, r: &IncidentRecord) -> f64 {
        let t = r.datetime();
        let hour = t.hour() as f64 + t.minute() as f64 / 60.0 + t.second() as f64 / 3600.0;
        match self {
            TemporalDim::HourOfDay => hour,
            TemporalDim::DayOfWeek => t.weekday().num_days_from_monday() as f64 + hour / 24.0,
            TemporalDim::Month => {
                let days = crate::ingest::days_in_month(t.year(), t.month());
                t.month0() as f64 + (t.day0() as f64 + hour / 24.0) / days as f64
            }
        }
    }

    fn format(&self, c: f64) -> String {
        let c = c.rem_euclid(self.period());
        match self {
            TemporalDim::HourOfDay => {
                let minutes = (c * 60.0).round() as i64 % (24 * 60);
                format!("{:02}:{:02}", minutes / 60, minutes % 60)
            }
            TemporalDim::DayOfWeek => {
                const DAYS: [&str; 7] = ["Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun"];
                let hours = (c * 24.0).round() as i64 % (7 * 24);
                format!("{} {:02}h", DAYS[(hours / 24) as usize], hours % 24)
            }
            TemporalDim::Month => {
                const MONTHS: [&str; 12] = ["Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"];
                let tenths = (c * 10.0).round() as i64 % 120;
                format!("{} {:.1}", MONTHS[(tenths / 10) as usize], (tenths % 10) as f64 / 10.0)
            }
        }
    }
}

/// One dimension of a faceting: number of equal-count bins and the point
/// of the cycle where sorting starts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FacetDim {
    pub dim: TemporalDim,
    pub bins: usize,
    #[serde(default)]
    pub origin: f64,
}

impl FacetDim {
    pub fn new(dim: TemporalDim, bins: usize) -> Self {
        FacetDim { dim, bins, origin: 0.0 }
    }
}

/// Half-open arc `[start, end)` of a cycle; `end` may exceed the period,
/// which wraps the arc past the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FacetInterval {
    pub dim: TemporalDim,
    pub start: f64,
    pub end: f64,
}

impl FacetInterval {
    pub fn width(&self) -> f64 {
        self.end - self.start
    }

    pub fn contains(&self, c: f64) -> bool {
        let p = self.dim.period();
        if self.width() >= p {
            return true;
        }
        (c - self.start).rem_euclid(p) < self.width()
    }

    fn label(&self) -> String {
        format!("{}-{}", self.dim.format(self.start), self.dim.format(self.end))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalFacet {
    pub label: String,
    /// Bins before overlap is applied; these tile each cycle exactly.
    pub core: Vec<FacetInterval>,
    /// Bins widened by the overlap fraction; membership uses these.
    pub intervals: Vec<FacetInterval>,
    pub core_count: usize,
    pub member_count: usize,
    /// Indices into the record slice.
    pub members: Vec<usize>,
}

fn equal_count_bins(coords: &[f64], fd: &FacetDim) -> Vec<FacetInterval> {
    let p = fd.dim.period();
    let mut rel: Vec<f64> = coords.iter().map(|c| (c - fd.origin).rem_euclid(p)).collect();
    rel.sort_by(f64::total_cmp);
    let n = rel.len();
    let b = fd.bins;
    let wrap = 0.5 * (rel[n - 1] - p + rel[0]);
    let mut edges = vec![wrap];
    for k in 1..b {
        let idx = (k * n).div_ceil(b);
        edges.push(0.5 * (rel[idx - 1] + rel[idx]));
    }
    edges.push(wrap + p);
    edges
        .windows(2)
        .map(|e| FacetInterval {
            dim: fd.dim,
            start: fd.origin + e[0],
            end: fd.origin + e[1],
        })
        .collect()
}

/// Equal-count bins on each cyclic dimension, each widened by
/// `overlap` times its width on both sides. Two or more dimensions give
/// the cross product of the per-dimension facetings.
pub fn build_facets(records: &[IncidentRecord], dims: &[FacetDim], overlap: f64) -> Result<Vec<TemporalFacet>> {
    if dims.is_empty() {
        return Err(Error::InvalidInput("comap needs at least one temporal dimension".into()));
    }
    if !(0.0..0.5).contains(&overlap) {
        return Err(Error::InvalidInput(format!("overlap fraction must be in [0, 0.5), got {overlap}")));
    }
    for fd in dims {
        if fd.bins < 2 {
            return Err(Error::InvalidInput(format!("{:?} needs at least 2 bins", fd.dim)));
        }
        if records.len() < fd.bins {
            return Err(Error::InvalidInput(format!(
                "{} records cannot fill {} bins",
                records.len(),
                fd.bins
            )));
        }
    }
    let per_dim: Vec<(Vec<f64>, Vec<FacetInterval>)> = dims
        .iter()
        .map(|fd| {
            let coords: Vec<f64> = records.iter().map(|r| fd.dim.coordinate(r)).collect();
            let bins = equal_count_bins(&coords, fd);
            (coords, bins)
        })
        .collect();
    let mut combos: Vec<Vec<usize>> = vec![vec![]];
    for (_, bins) in &per_dim {
        combos = combos
            .into_iter()
            .flat_map(|c| {
                (0..bins.len()).map(move |b| {
                    let mut v = c.clone();
                    v.push(b);
                    v
                })
            })
            .collect();
    }
    let facets = combos
        .into_iter()
        .map(|combo| {
            let core: Vec<FacetInterval> = combo.iter().zip(&per_dim).map(|(&b, (_, bins))| bins[b]).collect();
            let widened: Vec<FacetInterval> = core
                .iter()
                .map(|iv| {
                    let pad = overlap * iv.width();
                    FacetInterval {
                        start: iv.start - pad,
                        end: iv.end + pad,
                        ..*iv
                    }
                })
                .collect();
            let inside = |ivs: &[FacetInterval], r: usize| ivs.iter().zip(&per_dim).all(|(iv, (coords, _))| iv.contains(coords[r]));
            let members: Vec<usize> = (0..records.len()).filter(|&r| inside(&widened, r)).collect();
            let core_count = (0..records.len()).filter(|&r| inside(&core, r)).count();
            TemporalFacet {
                label: core.iter().map(FacetInterval::label).collect::<Vec<_>>().join(" x "),
                core,
                intervals: widened,
                core_count,
                member_count: members.len(),
                members,
            }
        })
        .collect();
    Ok(facets)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComapPanel {
    pub facet: TemporalFacet,
    pub raster: RasterGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comap {
    pub bandwidth: f64,
    pub panels: Vec<ComapPanel>,
    /// Maximum density over all panels; the shared colour scale top.
    pub global_max: f64,
}

/// One density surface per facet over the facet's member records, on a
/// shared grid.
pub fn comap(records: &[IncidentRecord], facets: &[TemporalFacet], bandwidth: f64, template: &RasterGrid) -> Result<Comap> {
    let panels = facets
        .iter()
        .map(|f| {
            let pts: Vec<Point> = f.members.iter().map(|&i| records[i].point()).collect();
            Ok(ComapPanel {
                facet: f.clone(),
                raster: kde(&pts, bandwidth, template)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let global_max = panels.iter().map(|p| p.raster.max()).fold(0.0, f64::max);
    Ok(Comap {
        bandwidth,
        panels,
        global_max,
    })
}
