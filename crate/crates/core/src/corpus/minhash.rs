//! MinHash signatures over lexical-token shingles and near-member
//! classification at a Jaccard-similarity threshold.
//!
//! Shingles are windows of `shingle_width` whitespace-delimited, lower-cased
//! tokens. Each permutation slot applies a 64-bit affine mix whose
//! parameters derive from one base seed, so signatures are reproducible
//! across runs and platforms.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Sample;
use crate::hashing;

pub const DEFAULT_SIMILARITY_THRESHOLD: f64 = 0.7;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MinHashConfig {
    #[serde(default = "default_permutations")]
    pub num_permutations: usize,
    #[serde(default = "default_shingle_width")]
    pub shingle_width: usize,
    #[serde(default = "default_threshold")]
    pub similarity_threshold: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_permutations() -> usize {
    256
}
fn default_shingle_width() -> usize {
    3
}
fn default_threshold() -> f64 {
    DEFAULT_SIMILARITY_THRESHOLD
}
fn default_seed() -> u64 {
    0x4d49_4148_4153_4821
}

impl Default for MinHashConfig {
    fn default() -> Self {
        MinHashConfig {
            num_permutations: default_permutations(),
            shingle_width: default_shingle_width(),
            similarity_threshold: default_threshold(),
            seed: default_seed(),
        }
    }
}

/// MinHash signature; `empty` marks texts shorter than one shingle, whose
/// slots hold a sentinel and never participate in matches.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MinHashSignature {
    pub values: Vec<u64>,
    pub empty: bool,
}

/// Hashed shingle set of a text.
pub fn shingle_hashes(text: &str, width: usize, seed: u64) -> HashSet<u64> {
    let tokens: Vec<String> = text.split_whitespace().map(|t| t.to_lowercase()).collect();
    let mut out = HashSet::new();
    if tokens.len() < width {
        return out;
    }
    for window in tokens.windows(width) {
        let joined = window.join("\u{1f}");
        out.insert(hashing::seeded_hash64(seed, joined.as_bytes()));
    }
    out
}

/// Computes the MinHash signature of `text` under `cfg`.
pub fn signature(text: &str, cfg: &MinHashConfig) -> MinHashSignature {
    assert!(cfg.num_permutations >= 1, "num_permutations must be >= 1");
    let shingles = shingle_hashes(text, cfg.shingle_width, cfg.seed);
    if shingles.is_empty() {
        return MinHashSignature {
            values: vec![u64::MAX; cfg.num_permutations],
            empty: true,
        };
    }
    let mut state = cfg.seed;
    let mut values = vec![u64::MAX; cfg.num_permutations];
    for slot in values.iter_mut() {
        let a = hashing::splitmix64(&mut state) | 1;
        let b = hashing::splitmix64(&mut state);
        let mut min = u64::MAX;
        for &s in &shingles {
            let h = a.wrapping_mul(s).wrapping_add(b);
            if h < min {
                min = h;
            }
        }
        *slot = min;
    }
    MinHashSignature {
        values,
        empty: false,
    }
}

/// Estimated Jaccard similarity: fraction of matching signature slots.
/// Zero if either signature is the empty sentinel.
pub fn estimate_jaccard(a: &MinHashSignature, b: &MinHashSignature) -> f64 {
    if a.empty || b.empty || a.values.is_empty() {
        return 0.0;
    }
    debug_assert_eq!(a.values.len(), b.values.len());
    let matching = a
        .values
        .iter()
        .zip(&b.values)
        .filter(|(x, y)| x == y)
        .count();
    matching as f64 / a.values.len() as f64
}

/// A candidate whose best match against the member set clears the threshold.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NearMemberMatch {
    pub candidate_id: String,
    pub member_id: String,
    pub estimated_jaccard: f64,
}

/// Returns every candidate whose estimated Jaccard against any member is at
/// least `cfg.similarity_threshold`, paired with its best-matching member.
pub fn classify_near_members(
    candidates: &[Sample],
    members: &[Sample],
    cfg: &MinHashConfig,
) -> Vec<NearMemberMatch> {
    let member_sigs: Vec<(usize, MinHashSignature)> = members
        .iter()
        .enumerate()
        .map(|(i, m)| (i, signature(&m.text, cfg)))
        .collect();
    let mut matches = Vec::new();
    for cand in candidates {
        let sig = signature(&cand.text, cfg);
        let mut best: Option<(usize, f64)> = None;
        for (mi, msig) in &member_sigs {
            let est = estimate_jaccard(&sig, msig);
            if best.is_none_or(|(_, b)| est > b) {
                best = Some((*mi, est));
            }
        }
        if let Some((mi, est)) = best {
            if est >= cfg.similarity_threshold {
                matches.push(NearMemberMatch {
                    candidate_id: cand.id.clone(),
                    member_id: members[mi].id.clone(),
                    estimated_jaccard: est,
                });
            }
        }
    }
    matches
}

/// Writes matches as CSV with columns `candidate_id,member_id,estimated_jaccard`.
pub fn write_near_member_csv(
    matches: &[NearMemberMatch],
    path: impl AsRef<Path>,
) -> Result<(), super::CorpusError> {
    let mut w = csv::Writer::from_path(path.as_ref()).map_err(io_of_csv)?;
    w.write_record(["candidate_id", "member_id", "estimated_jaccard"])
        .map_err(io_of_csv)?;
    for m in matches {
        w.write_record([
            m.candidate_id.as_str(),
            m.member_id.as_str(),
            &m.estimated_jaccard.to_string(),
        ])
        .map_err(io_of_csv)?;
    }
    w.flush()?;
    Ok(())
}

fn io_of_csv(e: csv::Error) -> super::CorpusError {
    super::CorpusError::Io(std::io::Error::other(e))
}
