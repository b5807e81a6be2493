//! Append-only JSONL score cache and the caching backend wrapper.
//!
//! Records are keyed by `(backend_id, sha256(text))`. Neighbors multiply
//! query volume by `n + 1`, so audits persist every result and resume
//! without re-querying the backend. Writes serialize through one writer;
//! in-flight deduplication keeps a text from being requested twice
//! concurrently.

use std::collections::{HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Condvar, Mutex};

use serde::{Deserialize, Serialize};

use super::{Backend, ModelError, TokenLogProbs};

#[derive(Debug, Serialize, Deserialize)]
struct CacheRecord {
    backend_id: String,
    text_sha256: String,
    tokens: Vec<String>,
    logprobs: Vec<f64>,
    truncated: bool,
}

struct CacheInner {
    index: HashMap<(String, String), TokenLogProbs>,
    writer: Option<BufWriter<File>>,
}

/// Persistent score cache. `in_memory` caches without a backing file.
pub struct ScoreCache {
    path: Option<PathBuf>,
    inner: Mutex<CacheInner>,
}

impl ScoreCache {
    pub fn in_memory() -> Self {
        ScoreCache {
            path: None,
            inner: Mutex::new(CacheInner {
                index: HashMap::new(),
                writer: None,
            }),
        }
    }

    /// Opens (or creates) a JSONL cache file and loads its index.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let path = path.as_ref().to_path_buf();
        let mut index = HashMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(&path)?);
            for (idx, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let rec: CacheRecord = serde_json::from_str(&line)
                    .map_err(|e| ModelError::Protocol(format!("cache line {}: {e}", idx + 1)))?;
                let lp = TokenLogProbs::new(
                    rec.backend_id.clone(),
                    rec.text_sha256.clone(),
                    rec.tokens,
                    rec.logprobs,
                    rec.truncated,
                )?;
                index.insert((rec.backend_id, rec.text_sha256), lp);
            }
        }
        Ok(ScoreCache {
            path: Some(path),
            inner: Mutex::new(CacheInner {
                index,
                writer: None,
            }),
        })
    }

    pub fn len(&self) -> usize {
        self.inner.lock().unwrap().index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, backend_id: &str, text_sha256: &str) -> Option<TokenLogProbs> {
        self.inner
            .lock()
            .unwrap()
            .index
            .get(&(backend_id.to_string(), text_sha256.to_string()))
            .cloned()
    }

    pub fn contains(&self, backend_id: &str, text_sha256: &str) -> bool {
        self.get(backend_id, text_sha256).is_some()
    }

    /// Inserts and appends one record; the append is atomic with respect to
    /// other `put` calls.
    pub fn put(&self, lp: &TokenLogProbs) -> Result<(), ModelError> {
        let mut inner = self.inner.lock().unwrap();
        let key = (lp.backend_id.clone(), lp.text_sha256.clone());
        if inner.index.contains_key(&key) {
            return Ok(());
        }
        if let Some(path) = &self.path {
            if inner.writer.is_none() {
                let file = OpenOptions::new().create(true).append(true).open(path)?;
                inner.writer = Some(BufWriter::new(file));
            }
            let record = CacheRecord {
                backend_id: lp.backend_id.clone(),
                text_sha256: lp.text_sha256.clone(),
                tokens: lp.tokens.clone(),
                logprobs: lp.logprobs.clone(),
                truncated: lp.truncated,
            };
            let writer = inner.writer.as_mut().expect("writer just created");
            serde_json::to_writer(&mut *writer, &record).map_err(|e| ModelError::Io(e.into()))?;
            writer.write_all(b"\n")?;
            writer.flush()?;
        }
        inner.index.insert(key, lp.clone());
        Ok(())
    }
}

/// Wraps a backend with the cache plus in-flight request deduplication and
/// hit/miss counters.
pub struct CachedBackend<B: Backend> {
    inner: B,
    cache: ScoreCache,
    in_flight: Mutex<HashSet<String>>,
    done: Condvar,
    hits: AtomicUsize,
    misses: AtomicUsize,
}

impl<B: Backend> CachedBackend<B> {
    pub fn new(inner: B, cache: ScoreCache) -> Self {
        CachedBackend {
            inner,
            cache,
            in_flight: Mutex::new(HashSet::new()),
            done: Condvar::new(),
            hits: AtomicUsize::new(0),
            misses: AtomicUsize::new(0),
        }
    }

    /// Number of calls served from the cache.
    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::Relaxed)
    }

    /// Number of calls forwarded to the wrapped backend.
    pub fn misses(&self) -> usize {
        self.misses.load(Ordering::Relaxed)
    }

    pub fn cache(&self) -> &ScoreCache {
        &self.cache
    }

    pub fn inner(&self) -> &B {
        &self.inner
    }
}

impl<B: Backend> Backend for CachedBackend<B> {
    fn backend_id(&self) -> &str {
        self.inner.backend_id()
    }

    fn score_text(&self, text: &str) -> Result<TokenLogProbs, ModelError> {
        let key = super::text_key(text);
        loop {
            if let Some(hit) = self.cache.get(self.inner.backend_id(), &key) {
                self.hits.fetch_add(1, Ordering::Relaxed);
                return Ok(hit);
            }
            let claimed = {
                let mut flight = self.in_flight.lock().unwrap();
                flight.insert(key.clone())
            };
            if claimed {
                let result = self.inner.score_text(text);
                if let Ok(lp) = &result {
                    // A put failure must not leave waiters stuck.
                    let stored = self.cache.put(lp);
                    self.misses.fetch_add(1, Ordering::Relaxed);
                    let mut flight = self.in_flight.lock().unwrap();
                    flight.remove(&key);
                    drop(flight);
                    self.done.notify_all();
                    stored?;
                } else {
                    self.misses.fetch_add(1, Ordering::Relaxed);
                    let mut flight = self.in_flight.lock().unwrap();
                    flight.remove(&key);
                    drop(flight);
                    self.done.notify_all();
                }
                return result;
            }
            // Another worker is scoring this text; wait and re-check.
            let mut flight = self.in_flight.lock().unwrap();
            while flight.contains(&key) {
                flight = self.done.wait(flight).unwrap();
            }
        }
    }
}

/// Serves scores strictly from an existing cache file.
pub struct CacheOnlyBackend {
    cache: ScoreCache,
    id: String,
}

impl CacheOnlyBackend {
    pub fn open(path: impl AsRef<Path>, id: String) -> Result<Self, ModelError> {
        Ok(CacheOnlyBackend {
            cache: ScoreCache::open(path)?,
            id,
        })
    }

    pub fn cache(&self) -> &ScoreCache {
        &self.cache
    }
}

impl Backend for CacheOnlyBackend {
    fn backend_id(&self) -> &str {
        &self.id
    }

    fn score_text(&self, text: &str) -> Result<TokenLogProbs, ModelError> {
        let key = super::text_key(text);
        self.cache
            .get(&self.id, &key)
            .ok_or(ModelError::NotCached { text_sha256: key })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modelgw::ngram::{train_ngram, NgramBackend};
    use std::sync::Arc;

    fn toy_backend() -> NgramBackend {
        let model = train_ngram(&["the quick brown fox jumps over the lazy dog"], 2).unwrap();
        NgramBackend::new(model, "ngram:toy".into(), 10_000)
    }

    #[test]
    fn second_call_is_served_from_cache() {
        let cached = CachedBackend::new(toy_backend(), ScoreCache::in_memory());
        let a = cached.score_text("the quick").unwrap();
        let b = cached.score_text("the quick").unwrap();
        assert_eq!(a, b);
        assert_eq!(cached.misses(), 1);
        assert_eq!(cached.hits(), 1);
    }

    #[test]
    fn cache_roundtrip_through_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let first = {
            let cached = CachedBackend::new(toy_backend(), ScoreCache::open(&path).unwrap());
            cached.score_text("lazy dog days").unwrap()
        };
        // Reload from disk; the wrapped backend must not be consulted.
        let cached = CachedBackend::new(toy_backend(), ScoreCache::open(&path).unwrap());
        let second = cached.score_text("lazy dog days").unwrap();
        assert_eq!(first, second);
        assert_eq!(cached.misses(), 0);
        assert_eq!(cached.hits(), 1);
    }

    #[test]
    fn cache_only_backend_misses_are_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        {
            let cached = CachedBackend::new(toy_backend(), ScoreCache::open(&path).unwrap());
            cached.score_text("fox jumps").unwrap();
        }
        let offline = CacheOnlyBackend::open(&path, "ngram:toy".into()).unwrap();
        assert!(offline.score_text("fox jumps").is_ok());
        assert!(matches!(
            offline.score_text("never scored"),
            Err(ModelError::NotCached { .. })
        ));
    }

    #[test]
    fn parallel_distinct_texts_match_sequential() {
        let texts: Vec<String> = (0..16).map(|i| format!("the quick {i} fox")).collect();
        let sequential: Vec<TokenLogProbs> = {
            let cached = CachedBackend::new(toy_backend(), ScoreCache::in_memory());
            texts
                .iter()
                .map(|t| cached.score_text(t).unwrap())
                .collect()
        };
        let cached = Arc::new(CachedBackend::new(toy_backend(), ScoreCache::in_memory()));
        let mut handles = Vec::new();
        for t in texts.clone() {
            let cached = Arc::clone(&cached);
            handles.push(std::thread::spawn(move || cached.score_text(&t).unwrap()));
        }
        let mut parallel: Vec<TokenLogProbs> =
            handles.into_iter().map(|h| h.join().unwrap()).collect();
        let mut sequential = sequential;
        let key = |lp: &TokenLogProbs| lp.text_sha256.clone();
        parallel.sort_by_key(key);
        sequential.sort_by_key(key);
        assert_eq!(parallel, sequential);
    }

    #[test]
    fn concurrent_same_text_scores_backend_once() {
        let cached = Arc::new(CachedBackend::new(toy_backend(), ScoreCache::in_memory()));
        let mut handles = Vec::new();
        for _ in 0..8 {
            let cached = Arc::clone(&cached);
            handles.push(std::thread::spawn(move || {
                cached.score_text("the quick brown fox").unwrap()
            }));
        }
        let results: Vec<TokenLogProbs> = handles.into_iter().map(|h| h.join().unwrap()).collect();
        for r in &results {
            assert_eq!(r, &results[0]);
        }
        assert_eq!(cached.misses(), 1, "deduplicated to one backend call");
        assert_eq!(cached.hits(), 7);
    }

    #[test]
    fn corrupt_cache_line_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        std::fs::write(&path, "not json\n").unwrap();
        assert!(ScoreCache::open(&path).is_err());
    }
}
