//! Benchmarking framework for gap-acceptance behavior prediction.
//!
//! Scenes are recorded interactions between a right-of-way vehicle (ego)
//! and a vehicle deciding whether to use the gap in front of it (target).
//! The crate extracts prediction samples, splits them, trains and runs
//! models, converts between binary, timing and trajectory predictions,
//! and scores them.
//!
//! Everything numeric is generic over [`Real`]; the aliases at the crate
//! root fix the scalar to `f64`.

// `!(x > 0)` is how NaN gets rejected along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod extraction;
pub mod geometry;
pub mod harness;
pub mod io;
pub mod metrics;
pub mod models;
pub mod scalar;
pub mod scenario;
pub mod scene;
pub mod splitting;
pub mod synthgen;
pub mod transforms;

#[cfg(test)]
mod test_support;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Position = geometry::Position<f64>;
pub type ConvexPolygon = geometry::ConvexPolygon<f64>;
pub type Trajectory = geometry::Trajectory<f64>;
pub type Scene = scene::Scene<f64>;
pub type AgentTrack = scene::AgentTrack<f64>;
pub type Geometry = scene::Geometry<f64>;
pub type ScenarioParams = scenario::ScenarioParams<f64>;
pub type T0Policy = extraction::T0Policy<f64>;
pub type ExtractionParams = extraction::ExtractionParams<f64>;
pub type Sample = extraction::Sample<f64>;
pub type SampleInput = extraction::SampleInput<f64>;
pub type Dataset = extraction::Dataset<f64>;
pub type CharacteristicTimes = extraction::CharacteristicTimes<f64>;
pub type Prediction = models::Prediction<f64>;
pub type DecileSet = models::DecileSet<f64>;
pub type MetricResult = metrics::MetricResult<f64>;
