//! Per-token log-probabilities for text variants through pluggable backends:
//! an HTTP echo-logprobs endpoint, a persistent JSONL cache, and a built-in
//! character n-gram model for deterministic tests.
//!
//! All statistics downstream operate on conditional tokens only; tokens with
//! undefined conditional probability (the context-free prefix) are excluded
//! at the backend boundary.

use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::hashing;

pub mod cache;
pub mod http;
pub mod ngram;

pub use cache::{CacheOnlyBackend, CachedBackend, ScoreCache};
pub use http::HttpBackend;
pub use ngram::{train_ngram, NgramBackend, NgramModel};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("empty text cannot be scored")]
    EmptyText,
    #[error("no usable conditional tokens in text")]
    NoUsableTokens,
    #[error("backend protocol error: {0}")]
    Protocol(String),
    #[error("network failure after {attempts} attempt(s): {message}")]
    Network { attempts: usize, message: String },
    #[error("text not in cache: {text_sha256}")]
    NotCached { text_sha256: String },
    #[error("invalid model file: {0}")]
    InvalidModel(String),
    #[error("invalid backend configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Per-token log-probabilities of one text variant under one backend.
///
/// Invariants: `tokens.len() == logprobs.len() >= 1` and every logprob is a
/// finite value `<= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenLogProbs {
    pub backend_id: String,
    pub text_sha256: String,
    pub tokens: Vec<String>,
    pub logprobs: Vec<f64>,
    pub truncated: bool,
}

impl TokenLogProbs {
    pub fn new(
        backend_id: String,
        text_sha256: String,
        tokens: Vec<String>,
        logprobs: Vec<f64>,
        truncated: bool,
    ) -> Result<Self, ModelError> {
        if tokens.len() != logprobs.len() {
            return Err(ModelError::Protocol(format!(
                "token/logprob length mismatch: {} vs {}",
                tokens.len(),
                logprobs.len()
            )));
        }
        if tokens.is_empty() {
            return Err(ModelError::NoUsableTokens);
        }
        let mut logprobs = logprobs;
        for lp in logprobs.iter_mut() {
            if !lp.is_finite() {
                return Err(ModelError::Protocol(format!("non-finite logprob {lp}")));
            }
            if *lp > 0.0 {
                if *lp > 1e-6 {
                    return Err(ModelError::Protocol(format!("positive logprob {lp}")));
                }
                *lp = 0.0; // rounding fuzz from the wire
            }
        }
        Ok(TokenLogProbs {
            backend_id,
            text_sha256,
            tokens,
            logprobs,
            truncated,
        })
    }

    pub fn token_count(&self) -> usize {
        self.logprobs.len()
    }
}

/// Backend kinds supported by [`BackendConfig`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Http,
    Cache,
    Ngram,
}

/// Declarative backend configuration, loadable from the run config.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub model_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default = "default_max_context")]
    pub max_context_tokens: usize,
    #[serde(default = "default_timeout_secs")]
    pub request_timeout_secs: u64,
    #[serde(default = "default_concurrency")]
    pub max_concurrent_requests: usize,
    /// Pre-trained n-gram model file (`ngram` kind).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_path: Option<PathBuf>,
    /// Corpus whose member-labeled samples train the n-gram model at startup
    /// (`ngram` kind, alternative to `model_path`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_corpus: Option<PathBuf>,
    #[serde(default = "default_order")]
    pub order: usize,
    /// Existing cache file served verbatim (`cache` kind).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_path: Option<PathBuf>,
}

fn default_max_context() -> usize {
    8192
}
fn default_timeout_secs() -> u64 {
    30
}
fn default_concurrency() -> usize {
    4
}
fn default_order() -> usize {
    2
}

impl BackendConfig {
    pub fn request_timeout(&self) -> Duration {
        Duration::from_secs(self.request_timeout_secs)
    }

    /// Stable backend identity: cache keys pair this with the text hash.
    /// For the `cache` kind the model name is used verbatim so it can mirror
    /// the identity of whichever backend originally filled the cache.
    pub fn backend_id(&self) -> String {
        match self.kind {
            BackendKind::Http => format!("http:{}", self.model_name),
            BackendKind::Ngram => format!("ngram:{}", self.model_name),
            BackendKind::Cache => self.model_name.clone(),
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.model_name.is_empty() {
            return Err(ModelError::InvalidConfig("model_name is empty".into()));
        }
        if self.max_concurrent_requests < 1 {
            return Err(ModelError::InvalidConfig(
                "max_concurrent_requests must be >= 1".into(),
            ));
        }
        if self.max_context_tokens < 1 {
            return Err(ModelError::InvalidConfig(
                "max_context_tokens must be >= 1".into(),
            ));
        }
        match self.kind {
            BackendKind::Http => {
                if self.endpoint.is_none() {
                    return Err(ModelError::InvalidConfig(
                        "http backend needs `endpoint`".into(),
                    ));
                }
            }
            BackendKind::Ngram => {
                if !(1..=4).contains(&self.order) {
                    return Err(ModelError::InvalidConfig(format!(
                        "ngram order {} outside [1, 4]",
                        self.order
                    )));
                }
                if self.model_path.is_none() && self.train_corpus.is_none() {
                    return Err(ModelError::InvalidConfig(
                        "ngram backend needs `model_path` or `train_corpus`".into(),
                    ));
                }
            }
            BackendKind::Cache => {
                if self.cache_path.is_none() {
                    return Err(ModelError::InvalidConfig(
                        "cache backend needs `cache_path`".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// A source of per-token log-probabilities. Implementations are safe for
/// concurrent use.
pub trait Backend: Send + Sync {
    fn backend_id(&self) -> &str;

    /// Scores `text`, truncating to the prefix context window when the
    /// backend tokenization exceeds `max_context_tokens`.
    fn score_text(&self, text: &str) -> Result<TokenLogProbs, ModelError>;
}

impl Backend for Box<dyn Backend> {
    fn backend_id(&self) -> &str {
        (**self).backend_id()
    }

    fn score_text(&self, text: &str) -> Result<TokenLogProbs, ModelError> {
        (**self).score_text(text)
    }
}

/// Builds the configured backend.
pub fn build_backend(cfg: &BackendConfig) -> Result<Box<dyn Backend>, ModelError> {
    cfg.validate()?;
    match cfg.kind {
        BackendKind::Http => Ok(Box::new(HttpBackend::new(cfg.clone())?)),
        BackendKind::Ngram => Ok(Box::new(NgramBackend::from_config(cfg)?)),
        BackendKind::Cache => Ok(Box::new(CacheOnlyBackend::open(
            cfg.cache_path.as_ref().expect("validated"),
            cfg.backend_id(),
        )?)),
    }
}

pub(crate) fn text_key(text: &str) -> String {
    hashing::sha256_hex(text)
}
