//! The full audit pipeline (`run`) and environment diagnostics (`doctor`).
//!
//! Stages communicate through persisted artifacts under the output
//! directory: `neighbors.jsonl`, `logprob-cache.jsonl`, `scores.jsonl`,
//! `report.json`, `report.csv`. The log-probability cache makes interrupted
//! runs resumable without re-querying the backend; everything else is a
//! deterministic function of the run configuration.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use mia_core::attacks::{loss_attack_score, pac_score, AttackKind, AttackScore};
use mia_core::corpus::{self, Sample};
use mia_core::eval::{self, EvalReport, ReportOptions};
use mia_core::hashing;
use mia_core::modelgw::{self, Backend, BackendKind, CachedBackend, ModelError, ScoreCache};
use mia_core::mutate::{generate_neighbor_set, NeighborSet, Strategy};
use mia_core::syntax::{self, CategoryRegistry};

use crate::config::RunConfig;
use crate::{map_model_err, CliError};

/// One neighbor variant as persisted in neighbors JSONL.
#[derive(Debug, Serialize, Deserialize)]
pub struct NeighborRecord {
    pub origin_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<Strategy>,
    pub variant_index: usize,
    pub content: String,
    pub change_ratio: f64,
    pub unchanged_flag: bool,
}

#[derive(Debug, Clone, Default)]
pub struct RunStats {
    pub samples: usize,
    pub neighbor_variants: usize,
    pub unique_texts: usize,
    pub cache_hits_at_start: usize,
    pub backend_requests: usize,
    /// (attack:sample_id, reason) for samples that could not be scored.
    pub failures: Vec<(String, String)>,
}

pub struct RunOutcome {
    pub report: EvalReport,
    pub stats: RunStats,
}

/// Loads the corpus and populates AST node counts in parallel.
pub fn load_and_enrich(path: &Path, workers: usize) -> Result<Vec<Sample>, CliError> {
    let mut samples =
        corpus::load_corpus(path).map_err(|e| CliError::Validation(format!("corpus: {e}")))?;
    if samples.is_empty() {
        return Err(CliError::Validation("corpus is empty".into()));
    }
    let pool = thread_pool(workers)?;
    let counts: Vec<usize> = pool.install(|| {
        samples
            .par_iter()
            .map(|s| syntax::ast_node_count(&syntax::parse(&s.text)))
            .collect()
    });
    for (s, c) in samples.iter_mut().zip(counts) {
        s.ast_node_count = c;
    }
    samples.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(samples)
}

pub fn load_registry(path: Option<&Path>) -> Result<CategoryRegistry, CliError> {
    match path {
        Some(p) => CategoryRegistry::from_json_file(p)
            .map_err(|e| CliError::Validation(format!("registry: {e}"))),
        None => Ok(CategoryRegistry::default_java()),
    }
}

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| CliError::Validation(format!("worker pool: {e}")))
}

fn strategy_for(attack: AttackKind) -> Option<Strategy> {
    match attack {
        AttackKind::Loss => None,
        AttackKind::Pac => Some(Strategy::TokenSwap),
        AttackKind::AstPac => Some(Strategy::AstSwap),
    }
}

pub fn write_jsonl<T: Serialize>(
    path: &Path,
    records: impl Iterator<Item = T>,
) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path)?);
    for record in records {
        serde_json::to_writer(&mut w, &record)
            .map_err(|e| CliError::Validation(format!("serialize {}: {e}", path.display())))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Executes the full pipeline: mutate, score through the cached backend,
/// compute attack scores, evaluate, and persist every artifact.
pub fn run_audit(cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.output_dir)?;
    let pool = thread_pool(cfg.workers)?;

    let samples = load_and_enrich(&cfg.corpus, cfg.workers)?;
    let registry = load_registry(cfg.registry.as_deref())?;

    // Neighbor generation per strategy the configured attacks need.
    let strategies: BTreeSet<Strategy> = cfg
        .attacks
        .iter()
        .filter_map(|a| strategy_for(*a))
        .collect();
    let mutation = {
        let mut m = cfg.mutation.clone();
        m.seed = cfg.seed;
        m
    };
    let mut neighbor_sets: BTreeMap<(Strategy, String), NeighborSet> = BTreeMap::new();
    for &strategy in &strategies {
        let sets: Vec<NeighborSet> = pool.install(|| {
            samples
                .par_iter()
                .map(|s| generate_neighbor_set(&s.id, &s.text, strategy, &mutation, &registry))
                .collect()
        });
        for set in sets {
            neighbor_sets.insert((strategy, set.origin_id.clone()), set);
        }
    }
    write_jsonl(
        &cfg.neighbors_path(),
        neighbor_sets.values().flat_map(|set| {
            set.variants
                .iter()
                .enumerate()
                .map(move |(i, v)| NeighborRecord {
                    origin_id: set.origin_id.clone(),
                    strategy: Some(set.strategy),
                    variant_index: i,
                    content: v.clone(),
                    change_ratio: set.change_ratios[i],
                    unchanged_flag: set.unchanged_flags[i],
                })
        }),
    )?;
    let neighbor_variants: usize = neighbor_sets.values().map(|s| s.variants.len()).sum();

    // Backend behind the persistent cache.
    let backend = modelgw::build_backend(&cfg.backend).map_err(map_model_err)?;
    let cache = ScoreCache::open(cfg.cache_path()).map_err(map_model_err)?;
    let cached = CachedBackend::new(backend, cache);
    let backend_id = cached.backend_id().to_string();

    // Unique texts: originals plus every variant.
    let mut texts: BTreeMap<String, &str> = BTreeMap::new();
    for s in &samples {
        texts.insert(hashing::sha256_hex(&s.text), s.text.as_str());
    }
    for set in neighbor_sets.values() {
        for v in &set.variants {
            texts.insert(hashing::sha256_hex(v), v.as_str());
        }
    }
    let missing: Vec<(&str, &str)> = texts
        .iter()
        .filter(|(h, _)| !cached.cache().contains(&backend_id, h))
        .map(|(h, t)| (h.as_str(), *t))
        .collect();
    let cache_hits_at_start = texts.len() - missing.len();

    // Probe-first scoring: a dead backend with a cold cache fails fast with
    // the shortfall count; per-text scoring errors degrade to partial runs.
    let mut text_errors: BTreeMap<String, String> = BTreeMap::new();
    if let Some((first_hash, first_text)) = missing.first() {
        match cached.score_text(first_text) {
            Ok(_) => {}
            Err(e @ (ModelError::Network { .. } | ModelError::NotCached { .. })) => {
                return Err(CliError::Backend(format!(
                    "backend unavailable with {} text(s) missing from cache: {e}",
                    missing.len()
                )));
            }
            Err(e) => {
                text_errors.insert(first_hash.to_string(), e.to_string());
            }
        }
        let errors: Vec<(String, String)> = pool.install(|| {
            missing[1..]
                .par_iter()
                .filter_map(|(h, t)| match cached.score_text(t) {
                    Ok(_) => None,
                    Err(e) => Some((h.to_string(), e.to_string())),
                })
                .collect()
        });
        text_errors.extend(errors);
    }

    // Assemble attack scores from the now-warm cache.
    let fetch = |text: &str| -> Result<mia_core::modelgw::TokenLogProbs, String> {
        let hash = hashing::sha256_hex(text);
        if let Some(reason) = text_errors.get(&hash) {
            return Err(reason.clone());
        }
        cached
            .cache()
            .get(&backend_id, &hash)
            .ok_or_else(|| "not scored".to_string())
    };

    let mut attacks: Vec<AttackKind> = cfg.attacks.clone();
    attacks.sort_unstable();
    attacks.dedup();
    let mut scores: Vec<AttackScore> = Vec::new();
    let mut failures: Vec<(String, String)> = Vec::new();
    for &attack in &attacks {
        let acfg = cfg.attack_config(attack);
        for sample in &samples {
            let result = (|| -> Result<AttackScore, String> {
                let lp = fetch(&sample.text)?;
                match strategy_for(attack) {
                    None => loss_attack_score(&sample.id, &lp, &acfg).map_err(|e| e.to_string()),
                    Some(strategy) => {
                        let set = neighbor_sets
                            .get(&(strategy, sample.id.clone()))
                            .expect("neighbor set generated for every sample");
                        let mut neighbor_lps = Vec::with_capacity(set.variants.len());
                        for v in &set.variants {
                            neighbor_lps.push(fetch(v)?);
                        }
                        let mut score = pac_score(&sample.id, &lp, &neighbor_lps, &acfg)
                            .map_err(|e| e.to_string())?;
                        score.mean_change_ratio = Some(
                            set.change_ratios.iter().sum::<f64>() / set.change_ratios.len() as f64,
                        );
                        Ok(score)
                    }
                }
            })();
            match result {
                Ok(score) => scores.push(score),
                Err(reason) => failures.push((format!("{attack}:{}", sample.id), reason)),
            }
        }
    }

    write_jsonl(&cfg.scores_path(), scores.iter())?;

    let report = eval::stratified_report(
        &samples,
        &scores,
        &cfg.buckets,
        &ReportOptions {
            exclude_flagged: cfg.exclude_flagged,
            run_config: serde_json::to_value(cfg)
                .map_err(|e| CliError::Validation(format!("config snapshot: {e}")))?,
        },
    );
    eval::write_report_json(&report, cfg.report_json_path())?;
    eval::write_report_csv(&report, cfg.report_csv_path())?;

    Ok(RunOutcome {
        report,
        stats: RunStats {
            samples: samples.len(),
            neighbor_variants,
            unique_texts: texts.len(),
            cache_hits_at_start,
            backend_requests: cached.misses(),
            failures,
        },
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DoctorCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub hint: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct DoctorReport {
    pub checks: Vec<DoctorCheck>,
}

impl DoctorReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Exit code per the failure class: backend trouble is 2, anything
    /// else 1.
    pub fn exit_code(&self) -> u8 {
        if self.all_passed() {
            0
        } else if self.checks.iter().any(|c| !c.passed && c.name != "backend") {
            1
        } else {
            2
        }
    }
}

/// Validates configuration, corpus, grammar, registry, backend, and output
/// directory, each with a remediation hint.
pub fn doctor(cfg: &RunConfig) -> DoctorReport {
    let mut checks = Vec::new();
    let mut push = |name: &str, result: Result<String, String>, hint: &str| {
        let (passed, detail) = match result {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        checks.push(DoctorCheck {
            name: name.to_string(),
            passed,
            detail,
            hint: hint.to_string(),
        });
    };

    push(
        "config",
        cfg.validate()
            .map(|_| "valid".to_string())
            .map_err(|e| e.to_string()),
        "fix the named field in the config file",
    );

    push(
        "corpus",
        corpus::load_corpus(&cfg.corpus)
            .map(|s| format!("{} sample(s)", s.len()))
            .map_err(|e| e.to_string()),
        "check the path and JSONL schema: one {id, content, label} object per line",
    );

    push(
        "grammar",
        {
            let tree = syntax::parse("class A {}");
            if tree.error_count() == 0 {
                Ok("java grammar parses".to_string())
            } else {
                Err("bundled grammar failed to parse a trivial class".to_string())
            }
        },
        "rebuild the binary; the Java grammar links statically",
    );

    push(
        "registry",
        load_registry(cfg.registry.as_deref())
            .map_err(|e| e.to_string())
            .and_then(|r| {
                for (key, spec) in &r.categories {
                    if spec.kinds.is_empty() && spec.predicate.is_none() {
                        return Err(format!("category `{key}` has neither kinds nor predicate"));
                    }
                }
                Ok(format!("{} categor(ies)", r.categories.len()))
            }),
        "registry JSON maps category key -> {kinds: [...], predicate?}",
    );

    push(
        "backend",
        probe_backend(cfg).map_err(|e| e.to_string()),
        "check endpoint, MIA_BACKEND_TOKEN, model_path/train_corpus, or cache_path",
    );

    push(
        "output_dir",
        std::fs::create_dir_all(&cfg.output_dir)
            .map(|_| cfg.output_dir.display().to_string())
            .map_err(|e| e.to_string()),
        "output directory must be creatable and writable",
    );

    DoctorReport { checks }
}

fn probe_backend(cfg: &RunConfig) -> Result<String, CliError> {
    cfg.backend.validate().map_err(map_model_err)?;
    match cfg.backend.kind {
        BackendKind::Cache => {
            let path = cfg.backend.cache_path.as_ref().expect("validated");
            let cache = ScoreCache::open(path).map_err(map_model_err)?;
            Ok(format!("cache with {} record(s)", cache.len()))
        }
        _ => {
            let backend = modelgw::build_backend(&cfg.backend).map_err(map_model_err)?;
            // One-token probe: exactly `order` characters for the n-gram
            // backend, a single short prompt otherwise.
            let probe: String = match cfg.backend.kind {
                BackendKind::Ngram => "abcd".chars().take(cfg.backend.order).collect(),
                _ => "a".to_string(),
            };
            let lp = backend.score_text(&probe).map_err(map_model_err)?;
            Ok(format!(
                "scored probe: {} conditional token(s)",
                lp.token_count()
            ))
        }
    }
}
