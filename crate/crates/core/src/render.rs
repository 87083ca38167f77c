//! Static SVG/PNG figures (bivariate and LISA choropleths, comap sheets,
//! line charts), the 3x3 tertile classifier and the borough ranking.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use base64::Engine as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::geometry::{BBox, Point};
use crate::ingest::{AreaIndex, AreaUnit};
use crate::spstat::Cluster;
use crate::surface::{Comap, RasterGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BivariateClass {
    pub cx: u8,
    pub cy: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BivariateClassification {
    pub classes: Vec<BivariateClass>,
    /// Upper bounds of the low and middle tertile on each axis.
    pub x_breaks: [f64; 2],
    pub y_breaks: [f64; 2],
    pub warnings: Vec<String>,
}

/// Tertile breakpoints: the type-1 empirical quantiles at 1/3 and 2/3
/// (1-based order statistics `ceil(n/3)` and `ceil(2n/3)`).
pub fn tertile_breaks(values: &[f64]) -> [f64; 2] {
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    [s[n.div_ceil(3) - 1], s[(2 * n).div_ceil(3) - 1]]
}

fn tertile_classes(values: &[f64], axis: &str, warnings: &mut Vec<String>) -> (Vec<u8>, [f64; 2]) {
    let breaks = tertile_breaks(values);
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if lo == hi {
        warnings.push(format!("{axis} is constant; every area placed in the middle class"));
        return (vec![1; values.len()], breaks);
    }
    let classes = values
        .iter()
        .map(|&v| if v <= breaks[0] { 0 } else if v <= breaks[1] { 1 } else { 2 })
        .collect();
    (classes, breaks)
}

/// 3x3 class of each area from the tertiles of `x` and `y`. Values equal
/// to a breakpoint go to the lower class.
pub fn bivariate_classify(x: &[f64], y: &[f64]) -> Result<BivariateClassification> {
    if x.len() != y.len() {
        return Err(Error::InvalidInput(format!("x has {} values, y has {}", x.len(), y.len())));
    }
    if x.len() < 3 {
        return Err(Error::InvalidInput("bivariate classification needs at least 3 areas".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("bivariate classification needs finite values".into()));
    }
    let mut warnings = Vec::new();
    let (cx, x_breaks) = tertile_classes(x, "x", &mut warnings);
    let (cy, y_breaks) = tertile_classes(y, "y", &mut warnings);
    Ok(BivariateClassification {
        classes: cx.into_iter().zip(cy).map(|(cx, cy)| BivariateClass { cx, cy }).collect(),
        x_breaks,
        y_breaks,
        warnings,
    })
}

/// Areas in the top tertile of both variables.
pub fn dual_high_flags(classes: &[BivariateClass]) -> Vec<bool> {
    classes.iter().map(|c| c.cx == 2 && c.cy == 2).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingRow {
    pub rank: usize,
    pub borough: String,
    pub las_total: f64,
    pub lfb_total: f64,
    pub dual_high_count: usize,
    pub las_z: f64,
    pub lfb_z: f64,
    pub dual_z: f64,
    pub score: f64,
}

pub const RANK_WEIGHTS: [f64; 3] = [0.4, 0.4, 0.2];

fn z_scores(v: &[f64]) -> Vec<f64> {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt();
    v.iter().map(|x| if sd > 0.0 { (x - m) / sd } else { 0.0 }).collect()
}

/// Aggregates per-area totals and dual-high flags by borough,
/// z-standardizes the three indicators across boroughs and ranks by
/// `0.4 * las_z + 0.4 * lfb_z + 0.2 * dual_z` (descending, ties by name).
pub fn rank_boroughs(las: &[f64], lfb: &[f64], dual_high: &[bool], boroughs: &[String]) -> Result<Vec<RankingRow>> {
    let n = las.len();
    if lfb.len() != n || dual_high.len() != n || boroughs.len() != n {
        return Err(Error::InvalidInput("ranking inputs differ in length".into()));
    }
    let mut agg: BTreeMap<&str, (f64, f64, usize)> = BTreeMap::new();
    for i in 0..n {
        let e = agg.entry(boroughs[i].as_str()).or_default();
        e.0 += las[i];
        e.1 += lfb[i];
        e.2 += usize::from(dual_high[i]);
    }
    let names: Vec<&str> = agg.keys().copied().collect();
    let totals: Vec<(f64, f64, usize)> = agg.values().copied().collect();
    let lz = z_scores(&totals.iter().map(|t| t.0).collect::<Vec<_>>());
    let fz = z_scores(&totals.iter().map(|t| t.1).collect::<Vec<_>>());
    let dz = z_scores(&totals.iter().map(|t| t.2 as f64).collect::<Vec<_>>());
    let mut rows: Vec<RankingRow> = (0..names.len())
        .map(|b| RankingRow {
            rank: 0,
            borough: names[b].to_string(),
            las_total: totals[b].0,
            lfb_total: totals[b].1,
            dual_high_count: totals[b].2,
            las_z: lz[b],
            lfb_z: fz[b],
            dual_z: dz[b],
            score: RANK_WEIGHTS[0] * lz[b] + RANK_WEIGHTS[1] * fz[b] + RANK_WEIGHTS[2] * dz[b],
        })
        .collect();
    rows.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.borough.cmp(&b.borough)));
    for (i, r) in rows.iter_mut().enumerate() {
        r.rank = i + 1;
    }
    Ok(rows)
}

/// Ranking as CSV with columns `rank,borough,score,las_z,lfb_z,dual_z`.
pub fn ranking_csv(rows: &[RankingRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["rank", "borough", "score", "las_z", "lfb_z", "dual_z"])
        .expect("in-memory write");
    for r in rows {
        w.write_record([
            r.rank.to_string(),
            r.borough.clone(),
            r.score.to_string(),
            r.las_z.to_string(),
            r.lfb_z.to_string(),
            r.dual_z.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

/// Colours of the 3x3 legend, indexed `[cy][cx]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BivariatePalette {
    pub colors: [[String; 3]; 3],
}

impl Default for BivariatePalette {
    fn default() -> Self {
        let c = |s: &str| s.to_string();
        BivariatePalette {
            colors: [
                [c("#e8e8e8"), c("#ace4e4"), c("#5ac8c8")],
                [c("#dfb0d6"), c("#a5add3"), c("#5698b9")],
                [c("#be64ac"), c("#8c62aa"), c("#3b4994")],
            ],
        }
    }
}

impl BivariatePalette {
    pub fn color(&self, c: BivariateClass) -> &str {
        &self.colors[c.cy as usize][c.cx as usize]
    }
}

pub fn cluster_color(c: Cluster) -> &'static str {
    match c {
        Cluster::HH => "#d7191c",
        Cluster::LL => "#2c7bb6",
        Cluster::HL => "#fdae61",
        Cluster::LH => "#abd9e9",
        Cluster::NS => "#d3d3d3",
    }
}

/// Per-area classification to draw; `None` entries are rendered hatched.
#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum MapClasses {
    Bivariate {
        classes: Vec<Option<BivariateClass>>,
        palette: BivariatePalette,
        x_label: String,
        y_label: String,
    },
    Lisa(Vec<Option<Cluster>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvgDocument {
    pub svg: String,
    pub warnings: Vec<String>,
}

const MAP_WIDTH: f64 = 800.0;
const MARGIN: f64 = 20.0;
const LEGEND_HEIGHT: f64 = 150.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

struct Projection {
    bbox: BBox,
    scale: f64,
    height: f64,
}

impl Projection {
    fn fit(bbox: BBox, width: f64) -> Self {
        let span = bbox.width().max(bbox.height() * 1e-6).max(1e-12);
        let scale = (width - 2.0 * MARGIN) / span;
        Projection {
            height: bbox.height() * scale + 2.0 * MARGIN,
            bbox,
            scale,
        }
    }

    fn apply(&self, p: Point) -> (f64, f64) {
        (
            MARGIN + (p.0 - self.bbox.min_x) * self.scale,
            MARGIN + (self.bbox.max_y - p.1) * self.scale,
        )
    }

    fn invert(&self, x: f64, y: f64) -> Point {
        (
            self.bbox.min_x + (x - MARGIN) / self.scale,
            self.bbox.max_y - (y - MARGIN) / self.scale,
        )
    }
}

fn areas_bbox(areas: &[AreaUnit]) -> BBox {
    areas.iter().fold(BBox::empty(), |b, a| b.union(&a.bbox()))
}

fn area_path(area: &AreaUnit, proj: &Projection) -> String {
    let mut d = String::new();
    for ring in &area.polygon {
        for (k, &p) in ring.iter().enumerate() {
            let (x, y) = proj.apply(p);
            let _ = write!(d, "{}{:.2},{:.2} ", if k == 0 { "M" } else { "L" }, x, y);
        }
        d.push_str("Z ");
    }
    d.trim_end().to_string()
}

/// Choropleth of `areas`, one `<path>` per area, with a legend block.
pub fn render_map(areas: &[AreaUnit], classes: &MapClasses, title: &str) -> Result<SvgDocument> {
    let n = match classes {
        MapClasses::Bivariate { classes, .. } => classes.len(),
        MapClasses::Lisa(c) => c.len(),
    };
    if n != areas.len() {
        return Err(Error::InvalidInput(format!("{} classes for {} areas", n, areas.len())));
    }
    if areas.is_empty() {
        return Err(Error::InvalidInput("no areas to render".into()));
    }
    let proj = Projection::fit(areas_bbox(areas), MAP_WIDTH);
    let height = proj.height + LEGEND_HEIGHT;
    let mut warnings = Vec::new();
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{MAP_WIDTH:.0}" height="{height:.0}" viewBox="0 0 {MAP_WIDTH:.0} {height:.0}">"#
    );
    s.push_str(r##"<defs><pattern id="hatch" patternUnits="userSpaceOnUse" width="6" height="6"><rect width="6" height="6" fill="#ffffff"/><path d="M0,6 L6,0" stroke="#555555" stroke-width="1"/></pattern></defs>"##);
    s.push('\n');
    let _ = writeln!(s, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    let _ = writeln!(s, r#"<text x="{MARGIN:.0}" y="14" font-family="sans-serif" font-size="13">{}</text>"#, escape(title));
    for (i, area) in areas.iter().enumerate() {
        let fill = match classes {
            MapClasses::Bivariate { classes, palette, .. } => classes[i].map(|c| palette.color(c).to_string()),
            MapClasses::Lisa(c) => c[i].map(|c| cluster_color(c).to_string()),
        };
        let fill = fill.unwrap_or_else(|| {
            warnings.push(format!("area {} has no classification", area.area_id));
            "url(#hatch)".to_string()
        });
        let _ = writeln!(
            s,
            r##"<path id="area-{}" d="{}" fill="{}" fill-rule="evenodd" stroke="#ffffff" stroke-width="0.5"/>"##,
            escape(&area.area_id),
            area_path(area, &proj),
            fill
        );
    }
    let ly = proj.height + 10.0;
    match classes {
        MapClasses::Bivariate { palette, x_label, y_label, .. } => {
            let cell = 30.0;
            let x0 = MARGIN + 40.0;
            for cy in 0..3u8 {
                for cx in 0..3u8 {
                    let _ = writeln!(
                        s,
                        r#"<rect class="legend" x="{:.2}" y="{:.2}" width="{cell:.0}" height="{cell:.0}" fill="{}"/>"#,
                        x0 + cx as f64 * cell,
                        ly + (2 - cy) as f64 * cell,
                        palette.color(BivariateClass { cx, cy })
                    );
                }
            }
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11">{} &#8594;</text>"#,
                x0,
                ly + 3.0 * cell + 14.0,
                escape(x_label)
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11" transform="rotate(-90 {:.2} {:.2})">{} &#8594;</text>"#,
                x0 - 8.0,
                ly + 3.0 * cell,
                x0 - 8.0,
                ly + 3.0 * cell,
                escape(y_label)
            );
        }
        MapClasses::Lisa(_) => {
            let entries = [
                (Cluster::HH, "High-High"),
                (Cluster::LL, "Low-Low"),
                (Cluster::HL, "High-Low"),
                (Cluster::LH, "Low-High"),
                (Cluster::NS, "Not significant"),
            ];
            for (k, (c, label)) in entries.iter().enumerate() {
                let y = ly + k as f64 * 20.0;
                let _ = writeln!(
                    s,
                    r#"<rect class="legend" x="{MARGIN:.0}" y="{y:.2}" width="14" height="14" fill="{}"/><text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11">{label}</text>"#,
                    cluster_color(*c),
                    MARGIN + 20.0,
                    y + 11.0
                );
            }
        }
    }
    s.push_str("</svg>\n");
    Ok(SvgDocument { svg: s, warnings })
}

pub type Rgb = [u8; 3];

pub fn parse_hex(color: &str) -> Option<Rgb> {
    let h = color.strip_prefix('#')?;
    if h.len() != 6 {
        return None;
    }
    let v = u32::from_str_radix(h, 16).ok()?;
    Some([(v >> 16) as u8, (v >> 8) as u8, v as u8])
}

fn encode_png(width: u32, height: u32, rgb: &[u8]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut buf, width, height);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc
            .write_header()
            .map_err(|e| Error::InvalidInput(format!("png encoding failed: {e}")))?;
        w.write_image_data(rgb)
            .map_err(|e| Error::InvalidInput(format!("png encoding failed: {e}")))?;
    }
    Ok(buf)
}

/// Choropleth rasterized to PNG, `width` pixels wide. Each pixel takes
/// the colour of the area containing its centre; unclassified areas are
/// hatched and the background is white.
pub fn map_png(areas: &[AreaUnit], fills: &[Option<Rgb>], width: u32) -> Result<Vec<u8>> {
    if fills.len() != areas.len() || areas.is_empty() || width < 2 * MARGIN as u32 + 1 {
        return Err(Error::InvalidInput("map_png: bad dimensions or fill count".into()));
    }
    let proj = Projection::fit(areas_bbox(areas), width as f64);
    let height = proj.height.ceil() as u32;
    let index = AreaIndex::new(areas);
    let mut rgb = Vec::with_capacity((width * height * 3) as usize);
    for py in 0..height {
        for px in 0..width {
            let p = proj.invert(px as f64 + 0.5, py as f64 + 0.5);
            let c = match index.locate(p) {
                Some(i) => fills[i].unwrap_or(if (px + py) % 6 == 0 { [85, 85, 85] } else { [255, 255, 255] }),
                None => [255, 255, 255],
            };
            rgb.extend_from_slice(&c);
        }
    }
    encode_png(width, height, &rgb)
}

const RAMP: [Rgb; 5] = [[255, 255, 204], [254, 204, 92], [253, 141, 60], [240, 59, 32], [189, 0, 38]];

/// Sequential colour for `t` in [0, 1]; zero density is white.
pub fn ramp_color(t: f64) -> Rgb {
    if !(t > 0.0) {
        return [255, 255, 255];
    }
    let t = t.min(1.0) * (RAMP.len() - 1) as f64;
    let k = (t.floor() as usize).min(RAMP.len() - 2);
    let f = t - k as f64;
    let mix = |a: u8, b: u8| (a as f64 + (b as f64 - a as f64) * f).round() as u8;
    [mix(RAMP[k][0], RAMP[k + 1][0]), mix(RAMP[k][1], RAMP[k + 1][1]), mix(RAMP[k][2], RAMP[k + 1][2])]
}

/// One pixel per cell, north up, coloured against `scale_max`.
pub fn raster_png(grid: &RasterGrid, scale_max: f64) -> Result<Vec<u8>> {
    let mut rgb = Vec::with_capacity(grid.nx * grid.ny * 3);
    for iy in (0..grid.ny).rev() {
        for ix in 0..grid.nx {
            let t = if scale_max > 0.0 { grid.get(ix, iy) / scale_max } else { 0.0 };
            rgb.extend_from_slice(&ramp_color(t));
        }
    }
    encode_png(grid.nx as u32, grid.ny as u32, &rgb)
}

const TILE: f64 = 240.0;
const TILE_GAP: f64 = 30.0;

/// Small-multiples sheet: panels in order on a `ceil(sqrt(n))`-column
/// grid, each an embedded PNG coloured on the shared scale, with its
/// facet label and a common colour bar.
pub fn render_comap(comap: &Comap, title: &str) -> Result<SvgDocument> {
    let n = comap.panels.len();
    let cols = ((n as f64).sqrt().ceil() as usize).max(1);
    let rows = n.div_ceil(cols).max(1);
    let width = MARGIN * 2.0 + cols as f64 * (TILE + TILE_GAP);
    let height = 40.0 + rows as f64 * (TILE + TILE_GAP) + 60.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" xmlns:xlink="http://www.w3.org/1999/xlink" version="1.1" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}">"#
    );
    let _ = writeln!(s, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    let _ = writeln!(s, r#"<text x="{MARGIN:.0}" y="20" font-family="sans-serif" font-size="14">{}</text>"#, escape(title));
    let engine = base64::engine::general_purpose::STANDARD;
    for (k, panel) in comap.panels.iter().enumerate() {
        let (r, c) = (k / cols, k % cols);
        let x = MARGIN + c as f64 * (TILE + TILE_GAP);
        let y = 40.0 + r as f64 * (TILE + TILE_GAP);
        let g = &panel.raster;
        let aspect = g.ny as f64 / g.nx as f64;
        let (w, h) = if aspect <= 1.0 { (TILE, TILE * aspect) } else { (TILE / aspect, TILE) };
        let png = raster_png(g, comap.global_max)?;
        let _ = writeln!(
            s,
            r#"<text class="facet-label" x="{x:.2}" y="{:.2}" font-family="sans-serif" font-size="11">{} (n={})</text>"#,
            y + 12.0,
            escape(&panel.facet.label),
            panel.facet.member_count
        );
        let _ = writeln!(
            s,
            r#"<image class="tile" x="{x:.2}" y="{:.2}" width="{w:.2}" height="{h:.2}" preserveAspectRatio="none" style="image-rendering:pixelated" xlink:href="data:image/png;base64,{}"/>"#,
            y + 16.0,
            engine.encode(png)
        );
        let _ = writeln!(
            s,
            r##"<rect x="{x:.2}" y="{:.2}" width="{w:.2}" height="{h:.2}" fill="none" stroke="#999999" stroke-width="0.5"/>"##,
            y + 16.0
        );
    }
    let bar_y = height - 45.0;
    let steps = 50;
    let bar_w = 300.0;
    for i in 0..steps {
        let t = (i as f64 + 0.5) / steps as f64;
        let [r, g, b] = ramp_color(t);
        let _ = writeln!(
            s,
            r#"<rect x="{:.2}" y="{bar_y:.2}" width="{:.2}" height="12" fill="rgb({r},{g},{b})"/>"#,
            MARGIN + i as f64 * bar_w / steps as f64,
            bar_w / steps as f64 + 0.01
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{MARGIN:.0}" y="{:.2}" font-family="sans-serif" font-size="10">0</text><text class="scale-max" x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="10" text-anchor="end">{:.4e}</text>"#,
        bar_y + 26.0,
        MARGIN + bar_w,
        bar_y + 26.0,
        comap.global_max
    );
    s.push_str("</svg>\n");
    Ok(SvgDocument { svg: s, warnings: vec![] })
}

const SERIES_COLORS: [&str; 6] = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02"];

/// Multi-series line chart; every series must have `x_labels.len()`
/// points. At most about ten x labels are printed.
pub fn render_line_chart(title: &str, x_labels: &[String], series: &[(String, Vec<f64>)]) -> Result<String> {
    let n = x_labels.len();
    if n < 2 || series.iter().any(|(_, v)| v.len() != n) {
        return Err(Error::InvalidInput("line chart series must match the x labels (at least 2 points)".into()));
    }
    let (w, h) = (900.0, 420.0);
    let (left, right, top, bottom) = (60.0, 160.0, 30.0, 50.0);
    let (lo, hi) = series
        .iter()
        .flat_map(|(_, v)| v.iter().copied())
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let (lo, hi) = if lo.is_finite() && hi > lo { (lo, hi) } else { (lo.min(0.0), lo.max(0.0) + 1.0) };
    let px = |i: usize| left + i as f64 * (w - left - right) / (n - 1) as f64;
    let py = |v: f64| top + (hi - v) / (hi - lo) * (h - top - bottom);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}">"#);
    let _ = writeln!(s, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    let _ = writeln!(s, r#"<text x="{left:.0}" y="18" font-family="sans-serif" font-size="13">{}</text>"#, escape(title));
    let _ = writeln!(
        s,
        r##"<path d="M{left:.2},{top:.2} L{left:.2},{:.2} L{:.2},{:.2}" fill="none" stroke="#333333"/>"##,
        h - bottom,
        w - right,
        h - bottom
    );
    for k in 0..=4 {
        let v = lo + (hi - lo) * k as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="10" text-anchor="end">{:.1}</text>"#,
            left - 4.0,
            py(v) + 3.0,
            v
        );
    }
    let every = n.div_ceil(10).max(1);
    for i in (0..n).step_by(every) {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="10" text-anchor="middle">{}</text>"#,
            px(i),
            h - bottom + 14.0,
            escape(&x_labels[i])
        );
    }
    for (k, (name, v)) in series.iter().enumerate() {
        let color = SERIES_COLORS[k % SERIES_COLORS.len()];
        let pts: Vec<String> = v
            .iter()
            .enumerate()
            .filter(|(_, y)| y.is_finite())
            .map(|(i, &y)| format!("{:.2},{:.2}", px(i), py(y)))
            .collect();
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, pts.join(" "));
        let ly = top + 16.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{:.2}" y="{:.2}" width="12" height="3" fill="{color}"/><text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11">{}</text>"#,
            w - right + 10.0,
            ly,
            w - right + 26.0,
            ly + 5.0,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::{ComapPanel, FacetInterval, TemporalDim, TemporalFacet};

    fn squares() -> Vec<AreaUnit> {
        (0..4)
            .map(|k| {
                let (x, y) = ((k % 2) as f64, (k / 2) as f64);
                AreaUnit::new(format!("a{k}"), "n", "b", vec![vec![(x, y), (x + 1.0, y), (x + 1.0, y + 1.0), (x, y + 1.0)]])
            })
            .collect()
    }

    #[test]
    fn tertiles_of_one_to_nine() {
        let v: Vec<f64> = (1..=9).map(f64::from).collect();
        let c = bivariate_classify(&v, &v).unwrap();
        assert_eq!(c.x_breaks, [3.0, 6.0]);
        for (i, cl) in c.classes.iter().enumerate() {
            assert_eq!(cl.cx, (i / 3) as u8);
            assert_eq!(cl.cx, cl.cy);
        }
    }

    #[test]
    fn constant_axis_warns() {
        let c = bivariate_classify(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!(c.classes.iter().all(|k| k.cx == 1));
        assert_eq!(c.warnings.len(), 1);
    }

    #[test]
    fn identical_boroughs_rank_alphabetically() {
        let b: Vec<String> = ["c", "a", "b"].iter().map(|s| s.to_string()).collect();
        let rows = rank_boroughs(&[1.0; 3], &[2.0; 3], &[false; 3], &b).unwrap();
        assert_eq!(rows.iter().map(|r| r.borough.as_str()).collect::<Vec<_>>(), ["a", "b", "c"]);
        assert!(rows.iter().all(|r| r.score == 0.0));
        let csv = ranking_csv(&rows);
        assert!(csv.starts_with("rank,borough,score,las_z,lfb_z,dual_z\n1,a,0,0,0,0\n"));
    }

    #[test]
    fn lisa_map_paths_and_colors() {
        let areas = squares();
        let classes = MapClasses::Lisa(vec![Some(Cluster::HH), Some(Cluster::LL), None, Some(Cluster::NS)]);
        let doc = render_map(&areas, &classes, "LISA").unwrap();
        assert_eq!(doc.svg.matches("<path id=").count(), 4);
        assert!(doc.svg.contains("fill=\"#d7191c\" fill-rule"));
        assert!(doc.svg.contains("fill=\"url(#hatch)\""));
        assert_eq!(doc.warnings.len(), 1);
        assert_eq!(doc.svg, render_map(&areas, &classes, "LISA").unwrap().svg);
    }

    #[test]
    fn comap_sheet_layout() {
        let grid = RasterGrid::new((0.0, 0.0), 1.0, 4, 4).unwrap();
        let mut hot = grid.clone();
        hot.values[5] = 2.0;
        let facet = |label: &str| TemporalFacet {
            label: label.into(),
            core: vec![FacetInterval {
                dim: TemporalDim::HourOfDay,
                start: 0.0,
                end: 6.0,
            }],
            intervals: vec![],
            core_count: 0,
            member_count: 0,
            members: vec![],
        };
        let comap = Comap {
            bandwidth: 1.0,
            panels: ["p1", "p2", "p3", "p4"]
                .iter()
                .enumerate()
                .map(|(i, l)| ComapPanel {
                    facet: facet(l),
                    raster: if i == 0 { hot.clone() } else { grid.clone() },
                })
                .collect(),
            global_max: 2.0,
        };
        let doc = render_comap(&comap, "sheet").unwrap();
        assert_eq!(doc.svg.matches("class=\"tile\"").count(), 4);
        assert_eq!(doc.svg.matches("class=\"facet-label\"").count(), 4);
        // 2 x 2 layout: the fourth tile sits in the second row and column
        assert!(doc.svg.contains(&format!("x=\"{:.2}\" y=\"{:.2}\" width", MARGIN + TILE + TILE_GAP, 40.0 + TILE + TILE_GAP + 16.0)));
    }

    #[test]
    fn ramp_and_hex() {
        assert_eq!(ramp_color(0.0), [255, 255, 255]);
        assert_eq!(ramp_color(1.0), [189, 0, 38]);
        assert_eq!(parse_hex("#d7191c"), Some([0xd7, 0x19, 0x1c]));
        let png = map_png(&squares(), &[Some([1, 2, 3]), None, Some([0, 0, 0]), Some([9, 9, 9])], 100).unwrap();
        assert_eq!(&png[1..4], b"PNG");
    }
}
