//! Evaluation harness for the `mcboost` online boosters: CSV ingestion,
//! prequential experiments over seeded reorderings, adversary simulations
//! and result tables.

pub mod checks;
pub mod config;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod learners;
pub mod results;
pub mod simulate;
pub mod tables;

pub use error::{HarnessError, Result};
