//! Search-relevance tuning workbench.
//!
//! Embeds a small multi-field lexical search engine, evaluates rankings
//! against graded human relevance judgments, and tunes field boosts and BM25
//! parameters with sequential Bayesian optimization over discrete spaces.

pub mod analyzer;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod index;
pub mod kv;
pub mod manifest;
pub mod metrics;
pub mod relevance;
pub mod storage;
pub mod tuner;

pub use error::{Error, Result};
