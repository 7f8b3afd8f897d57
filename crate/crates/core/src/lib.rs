//! Ensemble segmentation toolkit for document-layout analysis.
//!
//! [`dataset`] splits annotated pages into stratified folds, [`degrade`]
//! writes noisy copies of pages, [`ensemble`] fuses several models'
//! predictions, [`metrics`] scores them and [`tuner`] searches the fusion
//! thresholds. [`synthetic`] builds seeded corpora for tests and examples.

pub mod cli;
pub mod dataset;
pub mod degrade;
pub mod ensemble;
pub mod error;
pub mod mask;
pub mod metrics;
pub mod synthetic;
pub mod tuner;

pub use error::{Error, Result};
