//! Shallow word-level CNN text categorizer.
//!
//! Documents are tokenized and mapped onto capped vocabularies
//! ([`text`]), every stride-1 region is embedded from its sparse one-hot or
//! bag-of-words representation ([`kernels`], [`model`]), optionally fused
//! with frozen two-view ("tv") embeddings trained to predict neighbouring
//! regions ([`tv`]), max-pooled and classified by a linear layer trained
//! with mini-batch SGD ([`train`]). Models and embeddings persist in a
//! versioned binary container ([`container`]).

pub mod config;
pub mod container;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod kernels;
pub mod model;
pub mod par;
pub mod random;
pub mod text;
pub mod train;
pub mod tv;

pub use config::{Profile, RunConfig, TvSpec};
pub use container::StoredEmbedding;
pub use dataset::DatasetRecord;
pub use error::{Error, Result};
pub use model::{count_parameters, Example, Mode, ModelShape, ModelTemplate, PreparedDoc, RegionEmbedding, ShallowModel, TvEmbedding};
pub use par::Execution;
pub use text::{EncodedDocument, RegionSpec, Representation, SparseRegionVector, VocabKind, Vocabulary};
