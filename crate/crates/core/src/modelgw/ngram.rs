//! Character n-gram language model with add-one smoothing: the built-in
//! deterministic surrogate backend for tests and desk-scale experiments.
//!
//! The alphabet is the set of characters observed in training plus one
//! reserved unseen-character bucket, so conditional distributions normalize
//! to 1 exactly. For order `k`, the first `k - 1` characters of a scored
//! text have no full context and are excluded from the output.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Backend, BackendConfig, ModelError, TokenLogProbs};

pub const NGRAM_MAGIC: &str = "MIA-NGRAM-1";

/// Characters unseen in training share this reserved bucket.
const UNSEEN: char = '\u{0}';

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NgramModel {
    order: usize,
    /// context string -> target char -> count
    contexts: BTreeMap<String, BTreeMap<char, u64>>,
    alphabet: BTreeSet<char>,
}

/// Trains a character-level model of the given order (1..=4) on a corpus of
/// texts. Counting is deterministic and independent of corpus order.
pub fn train_ngram<S: AsRef<str>>(corpus: &[S], order: usize) -> Result<NgramModel, ModelError> {
    if corpus.is_empty() {
        return Err(ModelError::InvalidConfig("training corpus is empty".into()));
    }
    if !(1..=4).contains(&order) {
        return Err(ModelError::InvalidConfig(format!(
            "order {order} outside [1, 4]"
        )));
    }
    let mut contexts: BTreeMap<String, BTreeMap<char, u64>> = BTreeMap::new();
    let mut alphabet = BTreeSet::new();
    for text in corpus {
        let chars: Vec<char> = text.as_ref().chars().collect();
        alphabet.extend(chars.iter().copied());
        if chars.len() < order {
            continue;
        }
        let mut ctx = String::with_capacity(order);
        for i in (order - 1)..chars.len() {
            ctx.clear();
            ctx.extend(&chars[i + 1 - order..i]);
            *contexts
                .entry(ctx.clone())
                .or_default()
                .entry(chars[i])
                .or_insert(0) += 1;
        }
    }
    Ok(NgramModel {
        order,
        contexts,
        alphabet,
    })
}

impl NgramModel {
    pub fn order(&self) -> usize {
        self.order
    }

    /// Alphabet size including the unseen-character bucket; the Laplace
    /// denominator term.
    pub fn alphabet_size(&self) -> usize {
        self.alphabet.len() + 1
    }

    /// Smoothed conditional log-probability
    /// `ln((count(ctx -> c) + 1) / (count(ctx -> .) + |sigma|))`.
    pub fn logprob(&self, context: &str, c: char) -> f64 {
        let mapped = if self.alphabet.contains(&c) {
            c
        } else {
            UNSEEN
        };
        let (count, total) = match self.contexts.get(context) {
            Some(counts) => (
                counts.get(&mapped).copied().unwrap_or(0),
                counts.values().sum::<u64>(),
            ),
            None => (0, 0),
        };
        (((count + 1) as f64) / ((total + self.alphabet_size() as u64) as f64)).ln()
    }

    /// All observed contexts, for normalization checks.
    pub fn contexts(&self) -> impl Iterator<Item = &str> {
        self.contexts.keys().map(String::as_str)
    }

    /// Characters the model can score without the unseen bucket.
    pub fn alphabet(&self) -> impl Iterator<Item = char> + '_ {
        self.alphabet.iter().copied()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        let doc = SerializedModel {
            magic: NGRAM_MAGIC.to_string(),
            order: self.order,
            alphabet: self.alphabet.iter().collect(),
            contexts: self
                .contexts
                .iter()
                .map(|(ctx, counts)| {
                    (
                        ctx.clone(),
                        counts.iter().map(|(c, n)| (c.to_string(), *n)).collect(),
                    )
                })
                .collect(),
        };
        let body =
            serde_json::to_string(&doc).map_err(|e| ModelError::InvalidModel(e.to_string()))?;
        fs::write(path, body)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let body = fs::read_to_string(path)?;
        let doc: SerializedModel =
            serde_json::from_str(&body).map_err(|e| ModelError::InvalidModel(e.to_string()))?;
        if doc.magic != NGRAM_MAGIC {
            return Err(ModelError::InvalidModel(format!(
                "bad magic `{}`, expected `{NGRAM_MAGIC}`",
                doc.magic
            )));
        }
        if !(1..=4).contains(&doc.order) {
            return Err(ModelError::InvalidModel(format!(
                "order {} outside [1, 4]",
                doc.order
            )));
        }
        let mut contexts: BTreeMap<String, BTreeMap<char, u64>> = BTreeMap::new();
        for (ctx, counts) in doc.contexts {
            let mut inner = BTreeMap::new();
            for (key, n) in counts {
                let mut chars = key.chars();
                let (Some(c), None) = (chars.next(), chars.next()) else {
                    return Err(ModelError::InvalidModel(format!("bad count key `{key}`")));
                };
                inner.insert(c, n);
            }
            contexts.insert(ctx, inner);
        }
        Ok(NgramModel {
            order: doc.order,
            contexts,
            alphabet: doc.alphabet.chars().collect(),
        })
    }
}

#[derive(Serialize, Deserialize)]
struct SerializedModel {
    magic: String,
    order: usize,
    alphabet: String,
    contexts: BTreeMap<String, BTreeMap<String, u64>>,
}

/// Backend serving the n-gram model. Tokens are the scored (conditional)
/// characters; texts longer than the context window score the prefix only.
pub struct NgramBackend {
    model: NgramModel,
    id: String,
    max_context_tokens: usize,
}

impl NgramBackend {
    pub fn new(model: NgramModel, id: String, max_context_tokens: usize) -> Self {
        NgramBackend {
            model,
            id,
            max_context_tokens,
        }
    }

    pub fn from_config(cfg: &BackendConfig) -> Result<Self, ModelError> {
        let model = if let Some(path) = &cfg.model_path {
            let model = NgramModel::load(path)?;
            if model.order() != cfg.order {
                return Err(ModelError::InvalidConfig(format!(
                    "model order {} does not match configured order {}",
                    model.order(),
                    cfg.order
                )));
            }
            model
        } else if let Some(path) = &cfg.train_corpus {
            let samples = crate::corpus::load_corpus(path)
                .map_err(|e| ModelError::InvalidConfig(format!("train_corpus: {e}")))?;
            let texts: Vec<&str> = samples
                .iter()
                .filter(|s| s.label == crate::corpus::Label::Member)
                .map(|s| s.text.as_str())
                .collect();
            if texts.is_empty() {
                return Err(ModelError::InvalidConfig(
                    "train_corpus has no member-labeled samples".into(),
                ));
            }
            train_ngram(&texts, cfg.order)?
        } else {
            return Err(ModelError::InvalidConfig(
                "ngram backend needs `model_path` or `train_corpus`".into(),
            ));
        };
        Ok(NgramBackend::new(
            model,
            cfg.backend_id(),
            cfg.max_context_tokens,
        ))
    }

    pub fn model(&self) -> &NgramModel {
        &self.model
    }
}

impl Backend for NgramBackend {
    fn backend_id(&self) -> &str {
        &self.id
    }

    fn score_text(&self, text: &str) -> Result<TokenLogProbs, ModelError> {
        if text.is_empty() {
            return Err(ModelError::EmptyText);
        }
        let mut chars: Vec<char> = text.chars().collect();
        let truncated = chars.len() > self.max_context_tokens;
        if truncated {
            chars.truncate(self.max_context_tokens);
        }
        let order = self.model.order();
        if chars.len() < order {
            return Err(ModelError::NoUsableTokens);
        }
        let mut tokens = Vec::with_capacity(chars.len() + 1 - order);
        let mut logprobs = Vec::with_capacity(chars.len() + 1 - order);
        let mut ctx = String::with_capacity(order);
        for i in (order - 1)..chars.len() {
            ctx.clear();
            ctx.extend(&chars[i + 1 - order..i]);
            tokens.push(chars[i].to_string());
            logprobs.push(self.model.logprob(&ctx, chars[i]));
        }
        TokenLogProbs::new(
            self.id.clone(),
            super::text_key(text),
            tokens,
            logprobs,
            truncated,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn backend(model: NgramModel) -> NgramBackend {
        NgramBackend::new(model, "ngram:test".into(), 10_000)
    }

    #[test]
    fn hand_computed_bigram() {
        // Training "aaaa": count(a->a) = 3, alphabet {a} plus the unseen
        // bucket, so P(a|a) = (3 + 1) / (3 + 2).
        let model = train_ngram(&["aaaa"], 2).unwrap();
        let lp = backend(model).score_text("aa").unwrap();
        assert_eq!(lp.tokens, vec!["a"]);
        assert!((lp.logprobs[0] - (4.0f64 / 5.0).ln()).abs() < 1e-15);
    }

    #[test]
    fn order_one_symmetry() {
        let model = train_ngram(&["ab"], 1).unwrap();
        assert_eq!(model.logprob("", 'a'), model.logprob("", 'b'));
    }

    #[test]
    fn distributions_normalize() {
        let model = train_ngram(&["abab", "bca", "aa b c"], 2).unwrap();
        let mut contexts: Vec<String> = model.contexts().map(str::to_string).collect();
        contexts.push("zz".into()); // unseen context
        for ctx in &contexts {
            let mut total: f64 = model.alphabet().map(|c| model.logprob(ctx, c).exp()).sum();
            total += model.logprob(ctx, UNSEEN).exp();
            assert!(
                (total - 1.0).abs() < 1e-9,
                "context {ctx:?} sums to {total}"
            );
        }
    }

    #[test]
    fn training_string_beats_random_perplexity() {
        let train = "public static void main ( String args ) { int counter = 0 ; }";
        let model = train_ngram(&[train, "int counter = counter + 1 ;"], 2).unwrap();
        let be = backend(model);
        let perplexity = |lp: &TokenLogProbs| {
            (-lp.logprobs.iter().sum::<f64>() / lp.logprobs.len() as f64).exp()
        };
        let ppl_train = perplexity(&be.score_text(train).unwrap());
        let alphabet: Vec<char> = be.model().alphabet().collect();
        let mut rng = crate::hashing::derive_rng(3, "ngram", "ppl", 0);
        for _ in 0..20 {
            let random: String = (0..train.chars().count())
                .map(|_| alphabet[rng.gen_range(0..alphabet.len())])
                .collect();
            let ppl_random = perplexity(&be.score_text(&random).unwrap());
            assert!(
                ppl_train <= ppl_random,
                "train ppl {ppl_train} > random ppl {ppl_random}"
            );
        }
    }

    #[test]
    fn serialization_roundtrip_with_magic() {
        let model = train_ngram(&["hello world", "hold the line"], 3).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        model.save(f.path()).unwrap();
        let body = std::fs::read_to_string(f.path()).unwrap();
        assert!(body.contains(NGRAM_MAGIC));
        let back = NgramModel::load(f.path()).unwrap();
        assert_eq!(back.order(), 3);
        assert_eq!(back.logprob("he", 'l'), model.logprob("he", 'l'));
        assert_eq!(back.alphabet_size(), model.alphabet_size());
    }

    #[test]
    fn load_rejects_bad_magic() {
        let f = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(
            f.path(),
            r#"{"magic":"WRONG","order":2,"alphabet":"a","contexts":{}}"#,
        )
        .unwrap();
        assert!(matches!(
            NgramModel::load(f.path()),
            Err(ModelError::InvalidModel(_))
        ));
    }

    #[test]
    fn truncation_flags_prefix_window() {
        let model = train_ngram(&["abcdefgh"], 2).unwrap();
        let be = NgramBackend::new(model, "ngram:test".into(), 4);
        let lp = be.score_text("abcdefgh").unwrap();
        assert!(lp.truncated);
        assert_eq!(lp.token_count(), 3); // 4-char prefix, order 2
        assert_eq!(lp.tokens.join(""), "bcd");
    }

    #[test]
    fn error_paths() {
        let model = train_ngram(&["abc"], 2).unwrap();
        let be = backend(model);
        assert!(matches!(be.score_text(""), Err(ModelError::EmptyText)));
        assert!(matches!(
            be.score_text("a"),
            Err(ModelError::NoUsableTokens)
        ));
        assert!(train_ngram::<&str>(&[], 2).is_err());
        assert!(train_ngram(&["abc"], 5).is_err());
    }

    #[test]
    fn deterministic_and_order_independent_training() {
        let a = train_ngram(&["foo bar", "baz qux"], 2).unwrap();
        let b = train_ngram(&["baz qux", "foo bar"], 2).unwrap();
        assert_eq!(a.logprob("o", 'o'), b.logprob("o", 'o'));
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }
}
