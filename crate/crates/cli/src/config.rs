//! Pipeline configuration: JSON file plus command-line overrides.

use std::fmt;
use std::path::{Path, PathBuf};

use bluelight_core::gwr::Kernel;
use bluelight_core::surface::{FacetDim, TemporalDim, DEFAULT_BANDWIDTH_DEG, DEFAULT_GRID_CELLS};
use bluelight_core::Category;
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Invalid configuration, naming the offending field.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid config field `{}`: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Inputs {
    pub incidents: Option<PathBuf>,
    pub areas: Option<PathBuf>,
    pub weather: Option<PathBuf>,
    pub covariates: Option<PathBuf>,
    /// Synthetic scenario to generate the four input files from, instead
    /// of reading them.
    pub scenario: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Window {
    pub start: NaiveDate,
    /// Inclusive last day.
    pub end: NaiveDate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Streams {
    pub las: Vec<Category>,
    pub lfb: Vec<Category>,
}

impl Default for Streams {
    fn default() -> Self {
        Streams {
            las: vec![Category::Ambulance],
            lfb: vec![Category::Fire, Category::SpecialService, Category::FalseAlarm],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stream {
    Las,
    Lfb,
}

impl Stream {
    pub const BOTH: [Stream; 2] = [Stream::Las, Stream::Lfb];

    pub fn key(&self) -> &'static str {
        match self {
            Stream::Las => "las",
            Stream::Lfb => "lfb",
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Stream::Las => "LAS",
            Stream::Lfb => "LFB",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Aggregation {
    /// Seasonal period: 52 for weekly buckets, 12 for monthly.
    pub period: usize,
    /// Model average daily demand rather than raw bucket counts.
    pub daily_average: bool,
}

impl Default for Aggregation {
    fn default() -> Self {
        Aggregation {
            period: 52,
            daily_average: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightScheme {
    Queen,
    Knn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeightsConfig {
    pub scheme: WeightScheme,
    /// Neighbours per area for the kNN scheme.
    pub k: usize,
    pub row_standardize: bool,
}

impl Default for WeightsConfig {
    fn default() -> Self {
        WeightsConfig {
            scheme: WeightScheme::Queen,
            k: 6,
            row_standardize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StlConfig {
    pub seasonal_window: usize,
    pub robust: bool,
}

impl Default for StlConfig {
    fn default() -> Self {
        StlConfig {
            seasonal_window: 7,
            robust: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SarimaxConfig {
    pub p_max: usize,
    pub q_max: usize,
    pub d_set: Vec<usize>,
    pub seasonal: bool,
    pub seasonal_p_max: usize,
    pub seasonal_q_max: usize,
    pub seasonal_d_set: Vec<usize>,
    pub restarts: usize,
    /// Weather columns used as regressors.
    pub exog: Vec<String>,
    pub diagnostics_lags: usize,
}

impl Default for SarimaxConfig {
    fn default() -> Self {
        SarimaxConfig {
            p_max: 3,
            q_max: 3,
            d_set: vec![0, 1],
            seasonal: true,
            seasonal_p_max: 1,
            seasonal_q_max: 1,
            seasonal_d_set: vec![0],
            restarts: 5,
            exog: vec!["temperature".into(), "dew_point".into(), "wind_speed".into()],
            diagnostics_lags: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpatialConfig {
    pub n_perm: usize,
    pub alpha: f64,
    pub fdr: bool,
}

impl Default for SpatialConfig {
    fn default() -> Self {
        SpatialConfig {
            n_perm: 999,
            alpha: 0.05,
            fdr: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GwrConfig {
    pub response: Stream,
    pub covariates: Vec<String>,
    pub kernel: Kernel,
    pub adaptive: bool,
    pub log1p: bool,
    /// Fixed bandwidth; selected by AICc when absent.
    pub bandwidth: Option<f64>,
}

impl Default for GwrConfig {
    fn default() -> Self {
        GwrConfig {
            response: Stream::Las,
            covariates: vec![],
            kernel: Kernel::Bisquare,
            adaptive: true,
            log1p: false,
            bandwidth: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KdeConfig {
    /// Quartic kernel radius in degrees.
    pub bandwidth: f64,
    /// Cells along each side of the raster.
    pub grid: usize,
}

impl Default for KdeConfig {
    fn default() -> Self {
        KdeConfig {
            bandwidth: DEFAULT_BANDWIDTH_DEG,
            grid: DEFAULT_GRID_CELLS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ComapConfig {
    pub stream: Stream,
    pub dims: Vec<FacetDim>,
    pub overlap: f64,
}

impl Default for ComapConfig {
    fn default() -> Self {
        ComapConfig {
            stream: Stream::Lfb,
            dims: vec![FacetDim::new(TemporalDim::Month, 3), FacetDim::new(TemporalDim::HourOfDay, 4)],
            overlap: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RenderConfig {
    /// Width in pixels of the PNG copies of the maps.
    pub png_width: u32,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig { png_width: 800 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub inputs: Inputs,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub window: Option<Window>,
    #[serde(default)]
    pub streams: Streams,
    #[serde(default)]
    pub aggregation: Aggregation,
    #[serde(default)]
    pub weights: WeightsConfig,
    #[serde(default)]
    pub stl: StlConfig,
    #[serde(default)]
    pub sarimax: SarimaxConfig,
    #[serde(default)]
    pub spatial: SpatialConfig,
    #[serde(default)]
    pub gwr: GwrConfig,
    #[serde(default)]
    pub kde: KdeConfig,
    #[serde(default)]
    pub comap: ComapConfig,
    #[serde(default)]
    pub render: RenderConfig,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub n_perm: Option<usize>,
    pub bandwidth: Option<f64>,
    pub gwr_bandwidth: Option<f64>,
    pub log1p: bool,
    pub period: Option<usize>,
}

/// A validated configuration with input paths resolved against the
/// config file's directory.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: PipelineConfig,
    pub base: PathBuf,
    pub out: PathBuf,
}

impl Resolved {
    pub fn input(&self, p: &Path) -> PathBuf {
        self.base.join(p)
    }

    /// SHA-256 of the effective configuration, excluding the output
    /// directory so that identical analyses hash identically.
    pub fn hash(&self) -> String {
        let mut c = self.config.clone();
        c.output = None;
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        hex(&Sha256::digest(&bytes))
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn check(ok: bool, field: &str, message: impl Into<String>) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError::new(field, message))
    }
}

pub fn parse(text: &str) -> Result<PipelineConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let inner = e.inner().to_string();
        let path = e.path().to_string();
        // a missing field is reported against its parent; name the field itself
        let field = match inner.strip_prefix("missing field `").and_then(|r| r.split('`').next()) {
            Some(name) if path == "." => name.to_string(),
            Some(name) => format!("{path}.{name}"),
            None => path,
        };
        ConfigError::new(field, inner)
    })
}

pub fn load(path: &Path, o: &Overrides) -> Result<Resolved, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::new("--config", format!("{}: {e}", path.display())))?;
    let mut config = parse(&text)?;
    if let Some(s) = o.seed {
        config.seed = s;
    }
    if let Some(n) = o.n_perm {
        config.spatial.n_perm = n;
    }
    if let Some(b) = o.bandwidth {
        config.kde.bandwidth = b;
    }
    if let Some(b) = o.gwr_bandwidth {
        config.gwr.bandwidth = Some(b);
    }
    if o.log1p {
        config.gwr.log1p = true;
    }
    if let Some(p) = o.period {
        config.aggregation.period = p;
    }
    if let Some(out) = &o.out {
        config.output = Some(out.clone());
    }
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let out = match &config.output {
        Some(p) if o.out.is_some() => p.clone(),
        Some(p) => base.join(p),
        None => base.join("out"),
    };
    let r = Resolved { config, base, out };
    validate(&r)?;
    Ok(r)
}

fn validate(r: &Resolved) -> Result<(), ConfigError> {
    let c = &r.config;
    let i = &c.inputs;
    if let Some(s) = &i.scenario {
        check(
            i.incidents.is_none() && i.areas.is_none() && i.weather.is_none() && i.covariates.is_none(),
            "inputs.scenario",
            "a scenario replaces the input files; give one or the other",
        )?;
        check(r.input(s).is_file(), "inputs.scenario", format!("file not found: {}", r.input(s).display()))?;
    } else {
        for (name, p) in [("incidents", &i.incidents), ("areas", &i.areas), ("weather", &i.weather)] {
            let field = format!("inputs.{name}");
            let p = p.as_ref().ok_or_else(|| ConfigError::new(&field, "required unless inputs.scenario is given"))?;
            check(r.input(p).is_file(), &field, format!("file not found: {}", r.input(p).display()))?;
        }
        match &i.covariates {
            Some(p) => check(
                r.input(p).is_file(),
                "inputs.covariates",
                format!("file not found: {}", r.input(p).display()),
            )?,
            None => check(c.gwr.covariates.is_empty(), "inputs.covariates", "required when gwr.covariates is set")?,
        }
    }
    if let Some(w) = c.window {
        check(w.start <= w.end, "window", "start is after end")?;
    }
    check(!c.streams.las.is_empty(), "streams.las", "needs at least one category")?;
    check(!c.streams.lfb.is_empty(), "streams.lfb", "needs at least one category")?;
    check(
        c.streams.las.iter().all(|k| !c.streams.lfb.contains(k)),
        "streams",
        "a category cannot belong to both streams",
    )?;
    check(
        matches!(c.aggregation.period, 52 | 12),
        "aggregation.period",
        format!("must be 52 (weekly) or 12 (monthly), got {}", c.aggregation.period),
    )?;
    check(c.weights.k > 0, "weights.k", "must be positive")?;
    check(
        c.stl.seasonal_window >= 3 && c.stl.seasonal_window % 2 == 1,
        "stl.seasonal_window",
        "must be odd and at least 3",
    )?;
    let s = &c.sarimax;
    check(!s.d_set.is_empty(), "sarimax.d_set", "must not be empty")?;
    check(!s.seasonal_d_set.is_empty(), "sarimax.seasonal_d_set", "must not be empty")?;
    check(s.restarts > 0, "sarimax.restarts", "must be positive")?;
    for e in &s.exog {
        check(
            matches!(e.as_str(), "temperature" | "dew_point" | "wind_speed"),
            "sarimax.exog",
            format!("unknown weather column {e}; use temperature, dew_point or wind_speed"),
        )?;
    }
    check(c.spatial.alpha > 0.0 && c.spatial.alpha < 1.0, "spatial.alpha", "must be in (0, 1)")?;
    if let Some(b) = c.gwr.bandwidth {
        check(b > 0.0 && b.is_finite(), "gwr.bandwidth", "must be positive")?;
    }
    check(c.kde.bandwidth > 0.0 && c.kde.bandwidth.is_finite(), "kde.bandwidth", "must be positive")?;
    check(c.kde.grid >= 2, "kde.grid", "must be at least 2")?;
    check(!c.comap.dims.is_empty(), "comap.dims", "needs at least one dimension")?;
    check(c.comap.dims.iter().all(|d| d.bins >= 2), "comap.dims", "every dimension needs at least 2 bins")?;
    check((0.0..0.5).contains(&c.comap.overlap), "comap.overlap", "must be in [0, 0.5)")?;
    check(
        (64..=8192).contains(&c.render.png_width),
        "render.png_width",
        "must be between 64 and 8192 pixels",
    )?;
    Ok(())
}
