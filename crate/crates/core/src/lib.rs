//! Spatio-temporal analytics for emergency service demand: calendar
//! aggregation, STL and SARIMAX models with weather covariates, bivariate
//! Moran's I and LISA, geographically weighted regression, kernel density
//! comaps and map rendering.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod gwr;
pub mod ingest;
pub mod oracle;
pub mod render;
pub mod rng;
pub mod spstat;
pub mod surface;
pub mod tsa;
pub mod weights;

pub use error::{Error, Result};
pub use ingest::geometry::{BBox, Point, Ring};
pub use ingest::{AreaUnit, Bucket, Category, CovariateTable, IncidentRecord, WeatherRecord};
pub use spstat::{AttributePair, Cluster, LocalMoranResult, Quadrant};
pub use surface::{RasterGrid, TemporalFacet};
pub use tsa::{ArimaSpec, Design, ModelFit, Step, StlResult, TimeSeries};
pub use weights::SpatialWeights;
