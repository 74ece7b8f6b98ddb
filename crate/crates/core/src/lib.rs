//! Material-name and property extraction from scientific full text.
//!
//! The pipeline runs in file-based stages:
//!
//! 1. [`ingest`] turns publisher XML into [`ingest::Document`] records of
//!    section-tagged, markup-free paragraphs.
//! 2. [`corpus`] reads brat standoff annotations, tokenizes, converts spans to
//!    and from IOB tags and splits datasets.
//! 3. [`tagger`] is a BiLSTM-CRF sequence labeler with training, decoding and a
//!    random hyperparameter search.
//! 4. [`normalize`] turns extracted temperature, time, conductivity and
//!    activation-energy phrases into canonical numbers.
//! 5. [`metrics`] scores entity spans (precision/recall/F1, confusion matrix,
//!    inter-annotator agreement).
//! 6. [`wordvec`] trains skip-gram embeddings and classifies material names
//!    against a query list.
//! 7. [`trends`] aggregates everything into year, country and condition tables.

pub mod corpus;
pub mod error;
pub mod ingest;
pub mod metrics;
pub mod normalize;
pub mod tagger;
pub mod trends;
pub mod wordvec;

pub use error::{Error, Result};
