//! Sex classification of children's voices.
//!
//! The pipeline runs in five stages, each in its own module:
//!
//! * [`corpus`]: manifest ingestion, quality filtering, segmentation, age grouping
//! * [`dsp`] and [`features`]: acoustic descriptors aggregated into named feature vectors
//! * [`clustering`]: correlation-driven agglomeration of features into PCA factors
//! * [`balance`] and [`model`]: Borderline-SMOTE and extremely randomized forests
//! * [`eval`]: F1 metrics, subject voting, experiment matrix and group statistics

pub mod balance;
pub mod clustering;
pub mod config;
pub mod corpus;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod features;
pub mod model;
mod numeric;

pub use error::{Error, Result};
