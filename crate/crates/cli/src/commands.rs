//! Stage subcommands: ingest, near-members, mutate, score, evaluate.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use mia_core::attacks::{
    loss_attack_score, pac_score, AttackConfig, AttackKind, AttackScore, KUnit,
};
use mia_core::corpus::{self, minhash, Label};
use mia_core::eval::{self, BucketScheme, ReportOptions};
use mia_core::modelgw::{self, Backend, CachedBackend, ScoreCache};
use mia_core::mutate::{generate_neighbor_set, MutationConfig, Strategy};

use crate::config::{load_backend_config, RunConfig};
use crate::pipeline::{load_and_enrich, load_registry, write_jsonl, NeighborRecord};
use crate::{map_model_err, CliError};

/// Outcome of a stage command: a printable summary plus the number of
/// samples that could not be processed (drives the partial exit code).
pub struct CmdOutcome {
    pub summary: String,
    pub failed: usize,
}

impl CmdOutcome {
    fn ok(summary: String) -> Self {
        CmdOutcome { summary, failed: 0 }
    }
}

#[derive(Serialize)]
struct EnrichedRecord<'a> {
    id: &'a str,
    content: &'a str,
    label: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    meta: Option<&'a serde_json::Value>,
    size_bytes: usize,
    alnum_ratio: f64,
    ast_node_count: usize,
}

/// Validates a corpus and writes it back with strata features populated.
pub fn cmd_ingest(input: &Path, output: &Path) -> Result<CmdOutcome, CliError> {
    let samples = load_and_enrich(input, 4)?;
    write_jsonl(
        output,
        samples.iter().map(|s| EnrichedRecord {
            id: &s.id,
            content: &s.text,
            label: s.label.as_str(),
            meta: s.meta.as_ref(),
            size_bytes: s.size_bytes,
            alnum_ratio: s.alnum_ratio,
            ast_node_count: s.ast_node_count,
        }),
    )?;
    let count = |l: Label| samples.iter().filter(|s| s.label == l).count();
    Ok(CmdOutcome::ok(format!(
        "ingested {} sample(s): {} member, {} near_member, {} non_member -> {}",
        samples.len(),
        count(Label::Member),
        count(Label::NearMember),
        count(Label::NonMember),
        output.display(),
    )))
}

/// Flags candidates whose MinHash-estimated Jaccard against any member
/// clears the threshold; writes the match CSV.
pub fn cmd_near_members(
    input: &Path,
    output: &Path,
    threshold: f64,
    permutations: usize,
    shingle_width: usize,
    seed: u64,
) -> Result<CmdOutcome, CliError> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(CliError::Validation(format!(
            "threshold {threshold} outside [0, 1]"
        )));
    }
    if permutations == 0 || shingle_width == 0 {
        return Err(CliError::Validation(
            "permutations and shingle width must be positive".into(),
        ));
    }
    let samples =
        corpus::load_corpus(input).map_err(|e| CliError::Validation(format!("corpus: {e}")))?;
    let members: Vec<_> = samples
        .iter()
        .filter(|s| s.label == Label::Member)
        .cloned()
        .collect();
    let candidates: Vec<_> = samples
        .iter()
        .filter(|s| s.label != Label::Member)
        .cloned()
        .collect();
    if members.is_empty() || candidates.is_empty() {
        return Err(CliError::Validation(
            "need at least one member and one non-member candidate".into(),
        ));
    }
    let cfg = minhash::MinHashConfig {
        num_permutations: permutations,
        shingle_width,
        similarity_threshold: threshold,
        seed,
    };
    let matches = minhash::classify_near_members(&candidates, &members, &cfg);
    minhash::write_near_member_csv(&matches, output)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    Ok(CmdOutcome::ok(format!(
        "{} of {} candidate(s) at estimated jaccard >= {threshold} -> {}",
        matches.len(),
        candidates.len(),
        output.display(),
    )))
}

/// Generates neighbors for every sample under one strategy.
#[allow(clippy::too_many_arguments)]
pub fn cmd_mutate(
    strategy: Strategy,
    input: &Path,
    output: &Path,
    mutation: MutationConfig,
    registry_path: Option<&Path>,
) -> Result<CmdOutcome, CliError> {
    mutation
        .validate()
        .map_err(|e| CliError::Validation(format!("mutation: {e}")))?;
    let samples =
        corpus::load_corpus(input).map_err(|e| CliError::Validation(format!("corpus: {e}")))?;
    let registry = load_registry(registry_path)?;
    let mut records = Vec::new();
    let mut unchanged = 0usize;
    for sample in &samples {
        let set = generate_neighbor_set(&sample.id, &sample.text, strategy, &mutation, &registry);
        for (i, variant) in set.variants.iter().enumerate() {
            if set.unchanged_flags[i] {
                unchanged += 1;
            }
            records.push(NeighborRecord {
                origin_id: sample.id.clone(),
                strategy: None,
                variant_index: i,
                content: variant.clone(),
                change_ratio: set.change_ratios[i],
                unchanged_flag: set.unchanged_flags[i],
            });
        }
    }
    let total = records.len();
    write_jsonl(output, records.into_iter())?;
    Ok(CmdOutcome::ok(format!(
        "wrote {total} variant(s) for {} sample(s) ({unchanged} unchanged) -> {}",
        samples.len(),
        output.display(),
    )))
}

/// Scores every sample under one attack through a configured backend.
#[allow(clippy::too_many_arguments)]
pub fn cmd_score(
    attack: AttackKind,
    backend_config: &Path,
    input: &Path,
    output: &Path,
    cache_path: Option<&Path>,
    k_near: f64,
    k_far: f64,
    k_unit: KUnit,
    mutation: MutationConfig,
    registry_path: Option<&Path>,
) -> Result<CmdOutcome, CliError> {
    let backend_cfg = load_backend_config(backend_config)?;
    backend_cfg.validate().map_err(map_model_err)?;
    let acfg = AttackConfig {
        attack,
        k_near,
        k_far,
        k_unit,
        mutation: mutation.clone(),
        orientation: None,
    };
    acfg.validate()
        .map_err(|e| CliError::Validation(e.to_string()))?;

    let samples =
        corpus::load_corpus(input).map_err(|e| CliError::Validation(format!("corpus: {e}")))?;
    let registry = load_registry(registry_path)?;
    let backend = modelgw::build_backend(&backend_cfg).map_err(map_model_err)?;
    let cache = match cache_path {
        Some(p) => ScoreCache::open(p).map_err(map_model_err)?,
        None => ScoreCache::in_memory(),
    };
    let cached = CachedBackend::new(backend, cache);

    let strategy = match attack {
        AttackKind::Loss => None,
        AttackKind::Pac => Some(Strategy::TokenSwap),
        AttackKind::AstPac => Some(Strategy::AstSwap),
    };
    let mut sorted = samples;
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let mut scores: Vec<AttackScore> = Vec::new();
    let mut failures = 0usize;
    for sample in &sorted {
        let result = (|| -> Result<AttackScore, String> {
            let lp = cached.score_text(&sample.text).map_err(|e| e.to_string())?;
            match strategy {
                None => loss_attack_score(&sample.id, &lp, &acfg).map_err(|e| e.to_string()),
                Some(strategy) => {
                    let set = generate_neighbor_set(
                        &sample.id,
                        &sample.text,
                        strategy,
                        &mutation,
                        &registry,
                    );
                    let mut lps = Vec::with_capacity(set.variants.len());
                    for v in &set.variants {
                        lps.push(cached.score_text(v).map_err(|e| e.to_string())?);
                    }
                    let mut score =
                        pac_score(&sample.id, &lp, &lps, &acfg).map_err(|e| e.to_string())?;
                    score.mean_change_ratio = Some(
                        set.change_ratios.iter().sum::<f64>() / set.change_ratios.len() as f64,
                    );
                    Ok(score)
                }
            }
        })();
        match result {
            Ok(score) => scores.push(score),
            Err(reason) => {
                eprintln!("score failed for {}: {reason}", sample.id);
                failures += 1;
            }
        }
    }
    if !scores.is_empty() || failures == 0 {
        write_jsonl(output, scores.iter())?;
    }
    if failures > 0 && scores.is_empty() {
        return Err(CliError::Backend(format!(
            "all {failures} sample(s) failed to score"
        )));
    }
    Ok(CmdOutcome {
        summary: format!(
            "scored {} sample(s) under {attack} ({failures} failed) -> {}",
            scores.len(),
            output.display(),
        ),
        failed: failures,
    })
}

#[derive(Deserialize)]
struct ScoreLine(AttackScore);

/// Loads scores JSONL.
pub fn load_scores(path: &Path) -> Result<Vec<AttackScore>, CliError> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: ScoreLine = serde_json::from_str(&line)
            .map_err(|e| CliError::Validation(format!("scores line {}: {e}", idx + 1)))?;
        out.push(parsed.0);
    }
    Ok(out)
}

/// Joins scores with the corpus and writes the stratified report.
pub fn cmd_evaluate(
    scores_path: &Path,
    corpus_path: &Path,
    out_json: &Path,
    out_csv: &Path,
    exclude_flagged: bool,
    config_path: Option<&PathBuf>,
) -> Result<CmdOutcome, CliError> {
    let scores = load_scores(scores_path)?;
    if scores.is_empty() {
        return Err(CliError::Validation("scores file is empty".into()));
    }
    let samples = load_and_enrich(corpus_path, 4)?;
    let buckets = match config_path {
        Some(p) => RunConfig::load(p)?.buckets,
        None => BucketScheme::default(),
    };
    buckets
        .validate()
        .map_err(|e| CliError::Validation(format!("buckets: {e}")))?;
    let report = eval::stratified_report(
        &samples,
        &scores,
        &buckets,
        &ReportOptions {
            exclude_flagged,
            run_config: serde_json::json!({
                "scores": scores_path.display().to_string(),
                "corpus": corpus_path.display().to_string(),
            }),
        },
    );
    eval::write_report_json(&report, out_json)?;
    eval::write_report_csv(&report, out_csv)?;
    Ok(CmdOutcome::ok(format!(
        "evaluated {} score(s) over {} sample(s) -> {} and {}",
        scores.len(),
        samples.len(),
        out_json.display(),
        out_csv.display(),
    )))
}
