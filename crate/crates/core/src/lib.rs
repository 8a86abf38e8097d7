//! Cycling trip analytics and short-term demand forecasting from raw GPS
//! traces.
//!
//! The pipeline runs: [`ingest`] rebuilds trips from points, [`stats`] and
//! [`spatial`] describe them, [`covariates`] joins weather and calendar
//! data, [`features`] builds slot-level model inputs, and [`models`] trains
//! and evaluates forecasters. [`synth`] generates datasets with known ground
//! truth for validation.

pub mod covariates;
pub mod error;
pub mod exec;
pub mod features;
pub mod geo;
pub mod ingest;
pub mod models;
pub mod spatial;
pub mod stats;
pub mod synth;
pub mod timeutil;

pub use error::{Error, Result};
