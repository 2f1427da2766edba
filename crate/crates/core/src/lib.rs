//! Retrieval grounding for lay summarization, plus the lexical and
//! readability metrics used to score the resulting summaries.
//!
//! The pipeline for one document:
//!
//! 1. every sentence of the lead window queries each BM25 [`index`] for its
//!    top passage, and a definition dictionary is matched against the lead
//!    window ([`grounding`]);
//! 2. the pooled candidates, minus the document's own abstract, are ordered
//!    by a [`rerank`] scorer;
//! 3. [`assemble`] lays out the budgeted document, the `<|SEARCH|>`
//!    separator, a reference string and as many ranked passages as fit.
//!
//! Batch loops run on rayon when the `parallel` feature (on by default) is
//! enabled and fall back to plain iteration otherwise; see [`exec`].

pub mod assemble;
pub mod bridge;
pub mod commands;
pub mod config;
pub mod corpus;
pub mod dataset;
pub mod error;
pub mod exec;
pub mod grounding;
pub mod index;
pub mod metrics;
pub mod report;
pub mod rerank;
pub mod textproc;

pub use error::{Error, Result};
