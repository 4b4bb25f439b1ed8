//! Counterfactual explanations for tabular binary classifiers: an ensemble
//! of explainers proposes candidates, and validity, actionability, Pareto
//! dominance and an ideal-point distance pick one.
//!
//! Numeric code is generic over [`Scalar`]; `*64` and `*32` aliases fix the
//! width.

pub mod config;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod explainers;
pub mod heom;
pub mod mcda;
pub mod metrics;
pub mod model;
pub mod records;
pub mod scalar;
pub mod schema;

pub use error::{DataError, Error, EvalError, McdaError, ModelError};
pub use scalar::Scalar;

pub type Dataset64 = data::Dataset<f64>;
pub type Dataset32 = data::Dataset<f32>;
pub type Model64 = model::Model<f64>;
pub type Model32 = model::Model<f32>;
pub type Instance64 = schema::Instance<f64>;
pub type Instance32 = schema::Instance<f32>;
pub type Schema64 = schema::FeatureSchema<f64>;
pub type Schema32 = schema::FeatureSchema<f32>;
pub type Criteria64 = metrics::CriteriaVector<f64>;
pub type Criteria32 = metrics::CriteriaVector<f32>;
