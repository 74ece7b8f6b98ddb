//! BiLSTM-CRF sequence tagger: model, training, decoding and persistence.

pub mod crf;
mod io;
pub mod lstm;
pub mod matrix;
mod model;
mod search;
mod train;

pub use io::{load_model, read_model, save_model, write_model, MODEL_VERSION};
pub use model::{DenseParams, EncodedSequence, Example, Gradients, TaggerConfig, TaggerModel, Vocabulary};
pub use search::{random_search, SearchResult, SearchSpace, Trial};
pub use train::{evaluate, tag_paragraph, tag_paragraph_with, train, train_with, TrainingReport};
