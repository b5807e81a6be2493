//! Labeled code corpus: JSON Lines ingestion, per-sample strata features,
//! and MinHash-based near-member classification.
//!
//! Corpus format is one JSON object per line with fields `id`, `content`,
//! `label` (`member` | `near_member` | `non_member`) and an optional `meta`
//! object that is preserved opaquely.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

pub mod minhash;

/// Membership label of a corpus entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Member,
    NearMember,
    NonMember,
}

impl Label {
    pub fn as_str(&self) -> &'static str {
        match self {
            Label::Member => "member",
            Label::NearMember => "near_member",
            Label::NonMember => "non_member",
        }
    }

    pub fn parse(s: &str) -> Option<Label> {
        match s {
            "member" => Some(Label::Member),
            "near_member" => Some(Label::NearMember),
            "non_member" => Some(Label::NonMember),
            _ => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One corpus entry with derived strata features.
///
/// `size_bytes` and `alnum_ratio` are computed at construction;
/// `ast_node_count` is populated by the syntax stage and defaults to 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub text: String,
    pub label: Label,
    pub size_bytes: usize,
    pub alnum_ratio: f64,
    pub ast_node_count: usize,
    pub meta: Option<serde_json::Value>,
}

impl Sample {
    pub fn new(id: impl Into<String>, text: impl Into<String>, label: Label) -> Self {
        let text = text.into();
        let size_bytes = text.len();
        let alnum_ratio = alnum_ratio(&text);
        Sample {
            id: id.into(),
            text,
            label,
            size_bytes,
            alnum_ratio,
            ast_node_count: 0,
            meta: None,
        }
    }

    pub fn with_meta(mut self, meta: serde_json::Value) -> Self {
        self.meta = Some(meta);
        self
    }
}

/// Fraction of Unicode scalar values that are alphanumeric; 0 for empty text.
pub fn alnum_ratio(text: &str) -> f64 {
    let mut total = 0usize;
    let mut alnum = 0usize;
    for c in text.chars() {
        total += 1;
        if c.is_alphanumeric() {
            alnum += 1;
        }
    }
    if total == 0 {
        0.0
    } else {
        alnum as f64 / total as f64
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("line {line}: malformed record: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: unknown label `{label}`")]
    UnknownLabel { line: usize, label: String },
    #[error("line {line}: empty id")]
    EmptyId { line: usize },
    #[error("line {line}: duplicate id `{id}`")]
    DuplicateId { line: usize, id: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Serialize, Deserialize)]
struct RawRecord {
    id: String,
    content: String,
    label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    meta: Option<serde_json::Value>,
}

/// Loads a JSONL corpus, validating labels and id uniqueness and populating
/// the byte-size and alphanumeric-ratio features.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<Sample>, CorpusError> {
    let file = File::open(path.as_ref())?;
    let reader = BufReader::new(file);
    let mut samples = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = serde_json::from_str(&line).map_err(|source| CorpusError::Parse {
            line: line_no,
            source,
        })?;
        if raw.id.is_empty() {
            return Err(CorpusError::EmptyId { line: line_no });
        }
        let label = Label::parse(&raw.label).ok_or_else(|| CorpusError::UnknownLabel {
            line: line_no,
            label: raw.label.clone(),
        })?;
        if !seen.insert(raw.id.clone()) {
            return Err(CorpusError::DuplicateId {
                line: line_no,
                id: raw.id,
            });
        }
        let mut sample = Sample::new(raw.id, raw.content, label);
        sample.meta = raw.meta;
        samples.push(sample);
    }
    Ok(samples)
}

/// Writes samples back out as JSONL, preserving `meta` opaquely.
pub fn save_corpus(samples: &[Sample], path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let file = File::create(path.as_ref())?;
    let mut w = BufWriter::new(file);
    for s in samples {
        let raw = RawRecord {
            id: s.id.clone(),
            content: s.text.clone(),
            label: s.label.as_str().to_string(),
            meta: s.meta.clone(),
        };
        serde_json::to_writer(&mut w, &raw).map_err(|e| CorpusError::Io(e.into()))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}
