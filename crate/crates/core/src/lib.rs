//! Neuroevolution of neural test-input generators for small deterministic
//! games, with gradient descent on recorded gameplay traces as an
//! additional weight-change operator.

pub mod engine;
pub mod episode;
pub mod experiments;
pub mod neat;
pub mod expert;
pub mod error;
pub mod action;
pub mod dataset;
pub mod features;
pub mod gradient;
pub mod network;
pub mod recorder;

pub use engine::*;
pub use error::{Error, Result};
pub use features::{extract, feature_schema, FeatureDescriptor, FeatureSchema, FeatureVector};
