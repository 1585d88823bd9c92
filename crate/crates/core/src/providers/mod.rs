//! The boundary to externally produced signals: text embeddings, language
//! identification and adversarial-text generation.
//!
//! Every embedding provider hands back L2-normalized rows in input order, so
//! downstream dot products are cosines.

mod adversarial;
mod cache;
mod http;
mod langid;
mod mock;
mod store;

use serde::{Deserialize, Serialize};

use crate::embed::EmbeddingMatrix;
use crate::error::{Error, Result};

pub use adversarial::{
    generate_adversarial, AdversarialText, HttpGenerator, OfflineTransform, TextGenerator, TransformRule,
};
pub use cache::{EmbeddingCache, CACHE_MAGIC};
pub use http::{
    Clock, HttpEmbedder, ProviderConfig, RateLimiter, RetryPolicy, SystemClock, Transport, TransportFailure,
    TransportResponse, UreqTransport, VirtualClock, API_KEY_ENV, CACHE_DIR_ENV,
};
pub use langid::{LangPrediction, LanguageIdentifier, LanguageProfiles, TrigramProfile, BUILTIN_SEED_LANGS};
pub use mock::{mock_embed, read_concept_tsv, write_concept_tsv, MockEmbedder, MockSpec, CONCEPT_HEADER};
pub use store::{decode_vector, encode_vector, read_vector_tsv, write_vector_tsv, VectorRecord, VectorStore};

/// Source of sentence/document embeddings.
pub trait EmbeddingProvider: Send + Sync {
    /// Identifier of the underlying model; part of every cache key.
    fn model_id(&self) -> &str;

    /// One L2-normalized row per input text, in input order. Row ids are the
    /// input positions.
    fn embed(&self, texts: &[String]) -> Result<EmbeddingMatrix>;
}

impl<P: EmbeddingProvider + ?Sized> EmbeddingProvider for &P {
    fn model_id(&self) -> &str {
        (**self).model_id()
    }

    fn embed(&self, texts: &[String]) -> Result<EmbeddingMatrix> {
        (**self).embed(texts)
    }
}

impl<P: EmbeddingProvider + ?Sized> EmbeddingProvider for Box<P> {
    fn model_id(&self) -> &str {
        (**self).model_id()
    }

    fn embed(&self, texts: &[String]) -> Result<EmbeddingMatrix> {
        (**self).embed(texts)
    }
}

impl<P: EmbeddingProvider + ?Sized> EmbeddingProvider for std::sync::Arc<P> {
    fn model_id(&self) -> &str {
        (**self).model_id()
    }

    fn embed(&self, texts: &[String]) -> Result<EmbeddingMatrix> {
        (**self).embed(texts)
    }
}

/// Which kind of provider backs a pipeline stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    Mock,
    Http,
    File,
}

impl std::str::FromStr for ProviderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mock" => Ok(Self::Mock),
            "http" => Ok(Self::Http),
            "file" => Ok(Self::File),
            other => Err(Error::InvalidConfig(format!("unknown provider kind {other:?}"))),
        }
    }
}

impl std::fmt::Display for ProviderKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Mock => "mock",
            Self::Http => "http",
            Self::File => "file",
        })
    }
}

pub(crate) fn validate_texts(texts: &[String]) -> Result<()> {
    match texts.iter().position(|t| t.trim().is_empty()) {
        Some(i) => Err(Error::EmptyText(i)),
        None => Ok(()),
    }
}

/// Embeds `texts`, calling the provider once per distinct text. Handy when
/// the same sentence occurs many times in a corpus.
pub fn embed_unique<P: EmbeddingProvider + ?Sized>(provider: &P, texts: &[String]) -> Result<EmbeddingMatrix> {
    let mut index = std::collections::HashMap::new();
    let mut unique = Vec::new();
    let positions: Vec<usize> = texts
        .iter()
        .map(|t| {
            *index.entry(t.as_str()).or_insert_with(|| {
                unique.push(t.clone());
                unique.len() - 1
            })
        })
        .collect();
    let embedded = provider.embed(&unique)?;
    let mut data = Vec::with_capacity(texts.len() * embedded.dim());
    for &p in &positions {
        data.extend_from_slice(embedded.row(p));
    }
    EmbeddingMatrix::from_flat(embedded.dim(), data, (0..texts.len()).map(|i| i.to_string()).collect())
}
