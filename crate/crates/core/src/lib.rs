//! Tools for modelling monthly macro panels around the COVID-19 outbreak.
//!
//! The pipeline reads a FRED-MD style panel and daily COVID counts, builds
//! monthly COVID growth indicators, purges COVID variation series by series
//! (four regression designs), estimates principal-component factors,
//! produces diffusion-index forecast errors, turns them into stochastic
//! volatility based uncertainty indices, and estimates VARs with COVID
//! controls. A synthetic data generator provides known ground truth for each
//! estimator.

pub mod covid;
pub mod decovid;
pub mod error;
pub mod export;
pub mod factors;
pub mod forecast;
pub mod ingest;
pub mod linalg;
pub mod month;
pub mod pipeline;
pub mod synthetic;
pub mod transform;
pub mod uncertainty;
pub mod var;

pub use covid::{CovidIndicator, CovidKind};
pub use decovid::{DecovidMethod, DecovidResult, DecovidSpec, Design, ModelId};
pub use error::{Error, Result};
pub use factors::FactorSet;
pub use forecast::{ForecastConfig, ForecastResult, PredictorMode, PredictorSet};
pub use ingest::{DailyCovidSeries, RawPanel};
pub use month::Month;
pub use synthetic::{DgpConfig, SimulatedPanel, VarDgp};
pub use transform::{Tcode, TransformedPanel};
pub use uncertainty::{SvFit, UncertaintyIndex};
pub use var::{ExogBlock, IrfResult, VarModel};
