//! Structural archetypes for scholarly documents.
//!
//! The pipeline maps every section of a corpus onto a fixed, domain-agnostic
//! vocabulary of seven section types using thresholded nearest-centroid
//! classification over text embeddings, then summarizes each discipline by
//! where those types occur (positional histograms) and in which order
//! (first-order transition probabilities).
//!
//! Stages, in pipeline order:
//!
//! * [`corpus`]: load, validate, convert and sample JSONL corpora
//! * [`vocabulary`]: heading normalization, frequency tables, alias vocabulary
//! * [`embedding`]: input-text construction, providers, the on-disk cache
//! * [`retrofit`]: centroid fitting and classification with rejection
//! * [`analytics`]: type sequences, positional histograms, transition matrices
//! * [`evaluation`]: precision / recall / F1 against gold labels
//! * [`pipeline`]: the artifact-oriented stages behind the `archetype` CLI

pub mod analytics;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod evaluation;
pub mod io;
pub mod pipeline;
pub mod retrofit;
pub mod svg;
pub mod synthetic;
pub mod vocabulary;

pub use error::{Error, Result};
pub use vocabulary::SectionType;
