//! Parallel sentence mining from comparable news corpora, contrastive
//! adapter training, embedding evaluation and cross-lingual alignment
//! analytics.

pub mod embed;
pub mod error;
pub mod evalsuite;
pub mod hashing;
pub mod miner;
pub mod adapt;
pub mod alignkit;
pub mod corpus;
pub mod providers;
pub mod synth;
pub mod tsv;

pub use embed::{best_match, cosine_distance, cosine_similarity, l2_normalize, EmbeddingMatrix, Match, Vector};
pub use error::{Error, Result};
