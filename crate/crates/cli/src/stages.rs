//! Pipeline stages. Each reads what it needs from the shared context and
//! writes its artifacts through the recorder.

use std::fmt;

use anyhow::{bail, Context as _, Result};
use bluelight_core::gwr::{compare_models, gwr_fit, select_bandwidth, summarize, GwrSpec};
use bluelight_core::ingest::{aggregate_over, areas_to_geojson, Aggregated};
use bluelight_core::render::{
    cluster_color, map_png, parse_hex, rank_boroughs, ranking_csv, raster_png, render_comap, render_line_chart,
    render_map, BivariatePalette, MapClasses,
};
use bluelight_core::spstat::{bivariate_moran, classify_clusters, AttributePair};
use bluelight_core::surface::{build_facets, comap, kde, RasterGrid};
use bluelight_core::tsa::{diagnostics, grid_search, ols, stl, FitOptions, GridOptions, ModelReport};
use bluelight_core::{Bucket, Cluster, Design};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::Stream;
use crate::context::Context;
use crate::manifest::Recorder;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Stage {
    Ingest,
    Decompose,
    Fit,
    Moran,
    Lisa,
    Gwr,
    Kde,
    Comap,
    Rank,
    Render,
}

impl Stage {
    pub const ALL: [Stage; 10] = [
        Stage::Ingest,
        Stage::Decompose,
        Stage::Fit,
        Stage::Moran,
        Stage::Lisa,
        Stage::Gwr,
        Stage::Kde,
        Stage::Comap,
        Stage::Rank,
        Stage::Render,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Decompose => "decompose",
            Stage::Fit => "fit",
            Stage::Moran => "moran",
            Stage::Lisa => "lisa",
            Stage::Gwr => "gwr",
            Stage::Kde => "kde",
            Stage::Comap => "comap",
            Stage::Rank => "rank",
            Stage::Render => "render",
        }
    }

    pub fn run(&self, ctx: &Context, rec: &mut Recorder) -> Result<()> {
        rec.begin(self.name());
        match self {
            Stage::Ingest => ingest(ctx, rec),
            Stage::Decompose => decompose(ctx, rec),
            Stage::Fit => fit(ctx, rec),
            Stage::Moran => moran(ctx, rec),
            Stage::Lisa => lisa(ctx, rec),
            Stage::Gwr => gwr(ctx, rec),
            Stage::Kde => kde_stage(ctx, rec),
            Stage::Comap => comap_stage(ctx, rec),
            Stage::Rank => rank(ctx, rec),
            Stage::Render => render(ctx, rec),
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(w.into_inner()?)
}

fn bucket_labels(ctx: &Context) -> Vec<String> {
    ctx.stream_series(Stream::Las).starts.iter().map(|d| d.to_string()).collect()
}

fn ingest(ctx: &Context, rec: &mut Recorder) -> Result<()> {
    let mut by_category = Map::new();
    for r in &ctx.records {
        let e = by_category.entry(r.category.as_str()).or_insert(json!(0));
        *e = json!(e.as_u64().unwrap_or(0) + 1);
    }
    let series = ctx.series();
    let summary = json!({
        "first_day": ctx.span.first,
        "last_day": ctx.span.last,
        "days": ctx.span.days(),
        "areas": ctx.areas.len(),
        "incidents": ctx.records.len(),
        "las": series[0].counts.iter().sum::<f64>(),
        "lfb": series[1].counts.iter().sum::<f64>(),
        "by_category": by_category,
        "buckets": series[0].len(),
        "covariates": ctx.covariates.as_ref().map(|c| &c.names),
        "imputed_covariates": ctx.covariates.as_ref().map(|c| c.imputed),
        "load": ctx.load,
    });
    rec.write_json("ingest/summary.json", &summary)?;

    #[derive(Serialize)]
    struct AreaRow<'a> {
        area_id: &'a str,
        name: &'a str,
        borough: &'a str,
        las: f64,
        lfb: f64,
    }
    let (las, lfb) = (ctx.area_counts(Stream::Las), ctx.area_counts(Stream::Lfb));
    let rows: Vec<_> = ctx
        .areas
        .iter()
        .enumerate()
        .map(|(i, a)| AreaRow {
            area_id: &a.area_id,
            name: &a.name,
            borough: &a.borough,
            las: las[i],
            lfb: lfb[i],
        })
        .collect();
    rec.write("ingest/area_counts.csv", csv_bytes(&rows)?)?;

    #[derive(Serialize)]
    struct SeriesRow {
        start: String,
        days: u32,
        las: f64,
        lfb: f64,
        las_daily: f64,
        lfb_daily: f64,
        temperature: f64,
        dew_point: f64,
        wind_speed: f64,
    }
    let exog = ctx.exog()?;
    let (a, b) = (&series[0], &series[1]);
    let (ad, bd) = (a.daily_average(), b.daily_average());
    let rows: Vec<_> = (0..a.len())
        .map(|i| SeriesRow {
            start: a.starts[i].to_string(),
            days: a.days[i],
            las: a.counts[i],
            lfb: b.counts[i],
            las_daily: ad[i],
            lfb_daily: bd[i],
            temperature: exog.rows[i][0],
            dew_point: exog.rows[i][1],
            wind_speed: exog.rows[i][2],
        })
        .collect();
    rec.write("ingest/series.csv", csv_bytes(&rows)?)?;

    let mut profiles = Map::new();
    for s in Stream::BOTH {
        let records = ctx.stream_records(s);
        let mut p = Map::new();
        for (key, bucket) in [("hour_of_day", Bucket::HourOfDay), ("day_of_week", Bucket::DayOfWeek)] {
            if let Aggregated::Profile(prof) = aggregate_over(&records, bucket, ctx.span) {
                p.insert(key.into(), serde_json::to_value(prof)?);
            }
        }
        profiles.insert(s.key().into(), Value::Object(p));
    }
    rec.write_json("ingest/profiles.json", &profiles)?;
    Ok(())
}

fn decompose(ctx: &Context, rec: &mut Recorder) -> Result<()> {
    let c = &ctx.cfg.config;
    let labels = bucket_labels(ctx);
    let mut out = Map::new();
    for s in Stream::BOTH {
        let ts = ctx.stream_series(s).to_time_series(c.aggregation.daily_average);
        let r = stl(&ts, c.aggregation.period, c.stl.seasonal_window, c.stl.robust)
            .with_context(|| format!("STL of {}", s.label()))?;
        let chart = render_line_chart(
            &format!("{} demand decomposition", s.label()),
            &labels,
            &[
                ("observed".into(), ts.values.clone()),
                ("trend".into(), r.trend.clone()),
                ("seasonal".into(), r.seasonal.clone()),
                ("remainder".into(), r.remainder.clone()),
            ],
        )?;
        rec.write(&format!("decompose/stl_{}.svg", s.key()), chart)?;
        out.insert(s.key().into(), serde_json::to_value(&r)?);
    }
    rec.write_json("decompose/stl.json", &out)?;
    Ok(())
}

fn fit(ctx: &Context, rec: &mut Recorder) -> Result<()> {
    let c = &ctx.cfg.config;
    let sc = &c.sarimax;
    let exog = ctx.exog()?;
    let columns = sc
        .exog
        .iter()
        .map(|name| {
            let j = exog.names.iter().position(|n| n == name).expect("validated exog name");
            exog.rows.iter().map(|r| r[j]).collect()
        })
        .collect();
    let design = Design::new(sc.exog.clone(), columns)?;

    #[derive(Serialize)]
    struct GridRow<'a> {
        model: &'a str,
        aic: Option<f64>,
        loglik: Option<f64>,
        n_params: usize,
        error: Option<&'a str>,
    }
    #[derive(Serialize)]
    struct CoefRow<'a> {
        data: &'a str,
        model: &'a str,
        parameter: &'a str,
        estimate: f64,
        std_error: f64,
        p_value: f64,
        display: &'a str,
    }
    let mut reports = Map::new();
    let mut metrics = Vec::new();
    let mut coefficient_rows: Vec<(String, String, bluelight_core::tsa::CoefficientRow)> = Vec::new();
    for s in Stream::BOTH {
        let ts = ctx.stream_series(s).to_time_series(c.aggregation.daily_average);
        let opts = GridOptions {
            p_max: sc.p_max,
            q_max: sc.q_max,
            d_set: sc.d_set.clone(),
            seasonal: sc.seasonal,
            period: c.aggregation.period,
            seasonal_p_max: sc.seasonal_p_max,
            seasonal_q_max: sc.seasonal_q_max,
            seasonal_d_set: sc.seasonal_d_set.clone(),
            fit: FitOptions {
                restarts: sc.restarts,
                seed: ctx.seed(&format!("sarimax-{}", s.key())),
                ..FitOptions::default()
            },
        };
        let grid = grid_search(&ts, &design, &opts).with_context(|| format!("SARIMAX grid for {}", s.label()))?;
        let rows: Vec<_> = grid
            .table
            .iter()
            .map(|e| GridRow {
                model: &e.label,
                aic: e.aic,
                loglik: e.loglik,
                n_params: e.n_params,
                error: e.error.as_deref(),
            })
            .collect();
        rec.write(&format!("fit/grid_{}.csv", s.key()), csv_bytes(&rows)?)?;

        let ols_fit = ols(&ts.values, &design.with_intercept(ts.len()))?;
        let lags = sc.diagnostics_lags;
        let ols_report = ModelReport::new(&ols_fit, s.label(), "OLS", Some(diagnostics(&ols_fit, lags)));
        let best = &grid.best;
        let best_report = ModelReport::new(best, s.label(), best.spec.label(), Some(diagnostics(best, lags)));
        for r in [&ols_report, &best_report] {
            metrics.push(r.metrics.clone());
            for cr in &r.coefficients {
                coefficient_rows.push((r.metrics.data.clone(), r.metrics.model.clone(), cr.clone()));
            }
        }
        reports.insert(
            s.key().into(),
            json!({ "ols": ols_report, "selected": best_report, "candidates": grid.table.len() }),
        );
    }
    rec.write_json("fit/report.json", &reports)?;
    rec.write("fit/metrics.csv", csv_bytes(&metrics)?)?;
    let rows: Vec<_> = coefficient_rows
        .iter()
        .map(|(d, m, c)| CoefRow {
            data: d,
            model: m,
            parameter: &c.parameter,
            estimate: c.estimate,
            std_error: c.std_error,
            p_value: c.p_value,
            display: &c.display,
        })
        .collect();
    rec.write("fit/coefficients.csv", csv_bytes(&rows)?)?;
    Ok(())
}

fn moran(ctx: &Context, rec: &mut Recorder) -> Result<()> {
    let sp = &ctx.cfg.config.spatial;
    let w = ctx.weights()?;
    let pair = ctx.pair()?;
    let reverse = AttributePair::new(pair.y.clone(), pair.x.clone(), pair.labels.clone())?;
    let las_lfb = bivariate_moran(&pair, w, sp.n_perm, ctx.seed("moran-las-lfb"))?;
    let lfb_las = bivariate_moran(&reverse, w, sp.n_perm, ctx.seed("moran-lfb-las"))?;
    rec.write_json(
        "spatial/moran.json",
        &json!({
            "weights": ctx.cfg.config.weights,
            "islands": w.islands().len(),
            "links": w.n_links(),
            "las_lfb": las_lfb,
            "lfb_las": lfb_las,
        }),
    )?;
    Ok(())
}

fn clusters(ctx: &Context) -> Result<Vec<Cluster>> {
    let sp = &ctx.cfg.config.spatial;
    Ok(classify_clusters(ctx.lisa()?, sp.alpha, sp.fdr).into_iter().map(|(_, c)| c).collect())
}

fn lisa(ctx: &Context, rec: &mut Recorder) -> Result<()> {
    let results = ctx.lisa()?;
    let clusters = clusters(ctx)?;
    #[derive(Serialize)]
    struct Row<'a> {
        area_id: &'a str,
        i_local: f64,
        p_value: Option<f64>,
        quadrant: Option<String>,
        cluster: &'a str,
    }
    let rows: Vec<_> = results
        .iter()
        .zip(&clusters)
        .map(|(r, c)| Row {
            area_id: &r.area_id,
            i_local: r.i_local,
            p_value: r.p_value,
            quadrant: r.quadrant.map(|q| format!("{q:?}")),
            cluster: c.as_str(),
        })
        .collect();
    rec.write("spatial/lisa.csv", csv_bytes(&rows)?)?;
    let props: Vec<Map<String, Value>> = results
        .iter()
        .zip(&clusters)
        .map(|(r, c)| {
            let mut m = Map::new();
            m.insert("i_local".into(), json!(r.i_local));
            m.insert("p_value".into(), json!(r.p_value));
            m.insert("cluster".into(), json!(c.as_str()));
            m
        })
        .collect();
    rec.write_json("spatial/lisa.geojson", &areas_to_geojson(&ctx.areas, Some(&props)))?;
    Ok(())
}

fn gwr(ctx: &Context, rec: &mut Recorder) -> Result<()> {
    let g = &ctx.cfg.config.gwr;
    let Some(table) = &ctx.covariates else {
        bail!("the gwr stage needs inputs.covariates");
    };
    let names = if g.covariates.is_empty() { table.names.clone() } else { g.covariates.clone() };
    let rows = table.select(&names)?;
    let x = Design::from_rows(names, &rows)?;
    let mut y = ctx.area_counts(g.response);
    if g.log1p {
        y.iter_mut().for_each(|v| *v = v.ln_1p());
    }
    let locs: Vec<_> = ctx.areas.iter().map(|a| a.centroid).collect();
    let search = match g.bandwidth {
        Some(_) => None,
        None => Some(select_bandwidth(&y, &x, &locs, g.kernel, g.adaptive)?),
    };
    let bandwidth = g.bandwidth.or(search.as_ref().map(|s| s.bandwidth)).expect("one is set");
    let spec = GwrSpec {
        kernel: g.kernel,
        adaptive: g.adaptive,
        bandwidth,
    };
    let result = gwr_fit(&y, &x, &locs, &spec)?;
    let global = ols(&y, &x.with_intercept(y.len()))?;
    let comparison = compare_models(&global, &result);
    rec.write_json(
        "gwr/bandwidth.json",
        &json!({
            "response": g.response,
            "log1p": g.log1p,
            "spec": spec,
            "selected": search.is_some(),
            "search": search,
            "effective_params": result.effective_params,
            "condition_number": result.condition_number,
            "ridge_locations": result.ridge_locations,
        }),
    )?;
    rec.write("gwr/summary.csv", csv_bytes(&summarize(&result))?)?;
    rec.write_json(
        "gwr/comparison.json",
        &json!({ "comparison": comparison, "ols": ModelReport::new(&global, g.response.label(), "OLS", None) }),
    )?;
    let props: Vec<Map<String, Value>> = (0..result.n())
        .map(|i| {
            let mut m = Map::new();
            for (j, name) in result.names.iter().enumerate() {
                m.insert(format!("beta_{name}"), json!(result.beta[i][j]));
                m.insert(format!("t_{name}"), json!(result.pseudo_t[i][j]));
            }
            m.insert("local_r2".into(), json!(result.local_r2[i]));
            m.insert("residual".into(), json!(result.residuals[i]));
            m
        })
        .collect();
    rec.write_json("gwr/local.geojson", &areas_to_geojson(&ctx.areas, Some(&props)))?;
    Ok(())
}

fn template(ctx: &Context) -> Result<RasterGrid> {
    let k = &ctx.cfg.config.kde;
    let bbox = ctx.areas.iter().map(|a| a.bbox()).reduce(|a, b| a.union(&b)).expect("areas");
    Ok(RasterGrid::covering(&bbox, k.bandwidth, k.grid, k.grid)?)
}

fn kde_stage(ctx: &Context, rec: &mut Recorder) -> Result<()> {
    let grid = template(ctx)?;
    let bw = ctx.cfg.config.kde.bandwidth;
    let mut stats = Map::new();
    for s in Stream::BOTH {
        let pts: Vec<_> = ctx.stream_records(s).iter().map(|r| r.point()).collect();
        let surface = kde(&pts, bw, &grid)?;
        rec.write(&format!("kde/{}.asc", s.key()), surface.to_esri_ascii())?;
        rec.write(&format!("kde/{}.png", s.key()), raster_png(&surface, surface.max())?)?;
        stats.insert(
            s.key().into(),
            json!({ "points": pts.len(), "max": surface.max(), "mass": surface.mass(), "half_max_area": surface.half_max_area() }),
        );
    }
    rec.write_json("kde/summary.json", &json!({ "bandwidth": bw, "surfaces": stats }))?;
    Ok(())
}

fn comap_stage(ctx: &Context, rec: &mut Recorder) -> Result<()> {
    let cc = &ctx.cfg.config.comap;
    let records = ctx.stream_records(cc.stream);
    let facets = build_facets(&records, &cc.dims, cc.overlap)?;
    let grid = template(ctx)?;
    let map = comap(&records, &facets, ctx.cfg.config.kde.bandwidth, &grid)?;
    let doc = render_comap(&map, &format!("{} incidents by time of occurrence", cc.stream.label()))?;
    rec.write("comap/comap.svg", &doc.svg)?;
    let panels: Vec<_> = map
        .panels
        .iter()
        .map(|p| {
            json!({
                "label": p.facet.label,
                "core": p.facet.core,
                "intervals": p.facet.intervals,
                "core_count": p.facet.core_count,
                "member_count": p.facet.member_count,
                "max": p.raster.max(),
                "half_max_area": p.raster.half_max_area(),
            })
        })
        .collect();
    rec.write_json(
        "comap/facets.json",
        &json!({
            "stream": cc.stream,
            "bandwidth": map.bandwidth,
            "overlap": cc.overlap,
            "global_max": map.global_max,
            "panels": panels,
            "warnings": doc.warnings,
        }),
    )?;
    Ok(())
}

fn rank(ctx: &Context, rec: &mut Recorder) -> Result<()> {
    let las = ctx.area_counts(Stream::Las);
    let lfb = ctx.area_counts(Stream::Lfb);
    let classes = ctx.classes()?;
    let dual = ctx.dual_high()?;
    let boroughs: Vec<String> = ctx.areas.iter().map(|a| a.borough.clone()).collect();
    let ranking = rank_boroughs(&las, &lfb, &dual, &boroughs)?;
    rec.write("rank/ranking.csv", ranking_csv(&ranking))?;
    #[derive(Serialize)]
    struct Row<'a> {
        area_id: &'a str,
        borough: &'a str,
        las: f64,
        lfb: f64,
        las_class: u8,
        lfb_class: u8,
        dual_high: bool,
    }
    let rows: Vec<_> = ctx
        .areas
        .iter()
        .enumerate()
        .map(|(i, a)| Row {
            area_id: &a.area_id,
            borough: &a.borough,
            las: las[i],
            lfb: lfb[i],
            las_class: classes.classes[i].cx,
            lfb_class: classes.classes[i].cy,
            dual_high: dual[i],
        })
        .collect();
    rec.write("rank/classes.csv", csv_bytes(&rows)?)?;
    rec.write_json(
        "rank/breaks.json",
        &json!({ "las": classes.x_breaks, "lfb": classes.y_breaks, "warnings": classes.warnings }),
    )?;
    Ok(())
}

fn render(ctx: &Context, rec: &mut Recorder) -> Result<()> {
    let width = ctx.cfg.config.render.png_width;
    let palette = BivariatePalette::default();
    let classes = ctx.classes()?;
    let bivariate = MapClasses::Bivariate {
        classes: classes.classes.iter().copied().map(Some).collect(),
        palette: palette.clone(),
        x_label: "LAS incidents".into(),
        y_label: "LFB incidents".into(),
    };
    let doc = render_map(&ctx.areas, &bivariate, "LAS and LFB demand by area")?;
    rec.write("render/bivariate.svg", &doc.svg)?;
    let fills: Vec<_> = classes.classes.iter().map(|c| parse_hex(palette.color(*c))).collect();
    rec.write("render/bivariate.png", map_png(&ctx.areas, &fills, width)?)?;
    let mut warnings = doc.warnings;

    let results = ctx.lisa()?;
    let lisa_classes: Vec<Option<Cluster>> = clusters(ctx)?
        .into_iter()
        .zip(results)
        .map(|(c, r)| r.applicable().then_some(c))
        .collect();
    let doc = render_map(&ctx.areas, &MapClasses::Lisa(lisa_classes.clone()), "Bivariate LISA clusters, LAS against lagged LFB")?;
    rec.write("render/lisa.svg", &doc.svg)?;
    let fills: Vec<_> = lisa_classes.iter().map(|c| c.and_then(|c| parse_hex(cluster_color(c)))).collect();
    rec.write("render/lisa.png", map_png(&ctx.areas, &fills, width)?)?;
    warnings.extend(doc.warnings);

    let daily = ctx.cfg.config.aggregation.daily_average;
    let series: Vec<_> = Stream::BOTH
        .iter()
        .map(|&s| (s.label().to_string(), ctx.stream_series(s).to_time_series(daily).values))
        .collect();
    let unit = if daily { "average daily incidents" } else { "incidents" };
    let step = if ctx.cfg.config.aggregation.period == 12 { "Monthly" } else { "Weekly" };
    rec.write("render/demand.svg", render_line_chart(&format!("{step} demand, {unit}"), &bucket_labels(ctx), &series)?)?;
    rec.write_json("render/warnings.json", &warnings)?;
    Ok(())
}
