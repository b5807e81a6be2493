//! Scenario assembly, stratified bucketing, and threshold-independent
//! metrics (ROC-AUC via the Mann-Whitney formulation, PR-AUC as average
//! precision with grouped ties).

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::attacks::{AttackKind, AttackScore};
use crate::corpus::{Label, Sample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum MetricError {
    #[error("no positives")]
    NoPositives,
    #[error("no negatives")]
    NoNegatives,
    #[error("empty bucket")]
    Empty,
}

/// Stratification cutoffs. Buckets are half-open `[c_i, c_{i+1})` with
/// boundary values going to the upper bucket; label count is one more than
/// cutoff count.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BucketScheme {
    #[serde(default = "default_size_cutoffs")]
    pub size_cutoffs: Vec<f64>,
    #[serde(default = "default_size_labels")]
    pub size_labels: Vec<String>,
    #[serde(default = "default_ast_cutoffs")]
    pub ast_cutoffs: Vec<f64>,
    #[serde(default = "default_ast_labels")]
    pub ast_labels: Vec<String>,
    #[serde(default = "default_alnum_cutoffs")]
    pub alnum_cutoffs: Vec<f64>,
    #[serde(default = "default_alnum_labels")]
    pub alnum_labels: Vec<String>,
}

fn default_size_cutoffs() -> Vec<f64> {
    vec![1074.0, 1946.0, 3369.0, 6844.0]
}
fn default_size_labels() -> Vec<String> {
    ["VS", "S", "M", "L", "VL"].map(String::from).to_vec()
}
fn default_ast_cutoffs() -> Vec<f64> {
    vec![58.0, 211.0]
}
fn default_ast_labels() -> Vec<String> {
    ["Simple", "Moderate", "Complex"].map(String::from).to_vec()
}
fn default_alnum_cutoffs() -> Vec<f64> {
    vec![0.2, 0.4, 0.6, 0.8]
}
/// The lowest alphanumeric bucket makes the partition total; it is normally
/// near-empty for source code.
fn default_alnum_labels() -> Vec<String> {
    ["L", "ML", "M", "MH", "H"].map(String::from).to_vec()
}

impl Default for BucketScheme {
    fn default() -> Self {
        BucketScheme {
            size_cutoffs: default_size_cutoffs(),
            size_labels: default_size_labels(),
            ast_cutoffs: default_ast_cutoffs(),
            ast_labels: default_ast_labels(),
            alnum_cutoffs: default_alnum_cutoffs(),
            alnum_labels: default_alnum_labels(),
        }
    }
}

impl BucketScheme {
    pub fn validate(&self) -> Result<(), String> {
        let check = |name: &str, cutoffs: &[f64], labels: &[String]| -> Result<(), String> {
            if cutoffs.is_empty() {
                return Err(format!("{name}: cutoffs are empty"));
            }
            for w in cutoffs.windows(2) {
                if w[0] >= w[1] {
                    return Err(format!(
                        "{name}: cutoffs not strictly increasing at {} >= {}",
                        w[0], w[1]
                    ));
                }
            }
            if labels.len() != cutoffs.len() + 1 {
                return Err(format!(
                    "{name}: {} labels for {} cutoffs (need cutoffs + 1)",
                    labels.len(),
                    cutoffs.len()
                ));
            }
            Ok(())
        };
        check("size", &self.size_cutoffs, &self.size_labels)?;
        check("ast", &self.ast_cutoffs, &self.ast_labels)?;
        check("alnum", &self.alnum_cutoffs, &self.alnum_labels)?;
        Ok(())
    }
}

/// Half-open bucket assignment; boundary values go to the upper bucket.
pub fn assign_bucket<'a>(value: f64, cutoffs: &[f64], labels: &'a [String]) -> &'a str {
    debug_assert_eq!(labels.len(), cutoffs.len() + 1);
    let idx = cutoffs.iter().take_while(|c| value >= **c).count();
    &labels[idx]
}

/// Evaluation scenarios: positives vs the non-member pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Members and near-members vs non-members.
    All,
    /// Members only vs non-members.
    Exact,
    /// Near-members only vs non-members.
    Near,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::All, Scenario::Exact, Scenario::Near];

    pub fn as_str(&self) -> &'static str {
        match self {
            Scenario::All => "all",
            Scenario::Exact => "exact",
            Scenario::Near => "near",
        }
    }

    /// Whether a label participates and as which class (membership is the
    /// positive class).
    pub fn classify(&self, label: Label) -> Option<bool> {
        match (self, label) {
            (Scenario::All, Label::Member | Label::NearMember) => Some(true),
            (Scenario::Exact, Label::Member) => Some(true),
            (Scenario::Near, Label::NearMember) => Some(true),
            (_, Label::NonMember) => Some(false),
            _ => None,
        }
    }
}

/// Positive/negative sample ids per scenario.
pub fn build_scenarios(samples: &[Sample]) -> BTreeMap<Scenario, (Vec<String>, Vec<String>)> {
    let mut out = BTreeMap::new();
    for scenario in Scenario::ALL {
        let mut positives = Vec::new();
        let mut negatives = Vec::new();
        for s in samples {
            match scenario.classify(s.label) {
                Some(true) => positives.push(s.id.clone()),
                Some(false) => negatives.push(s.id.clone()),
                None => {}
            }
        }
        out.insert(scenario, (positives, negatives));
    }
    out
}

/// ROC-AUC by the Mann-Whitney formulation: the fraction of
/// positive/negative pairs ranked correctly, ties counting half. Computed
/// via average ranks over tie groups.
pub fn roc_auc(scored: &[(f64, bool)]) -> Result<f64, MetricError> {
    if scored.is_empty() {
        return Err(MetricError::Empty);
    }
    let positives = scored.iter().filter(|(_, p)| *p).count();
    let negatives = scored.len() - positives;
    if positives == 0 {
        return Err(MetricError::NoPositives);
    }
    if negatives == 0 {
        return Err(MetricError::NoNegatives);
    }
    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&a, &b| scored[a].0.total_cmp(&scored[b].0));
    let mut rank_sum_pos = 0.0f64;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scored[order[j]].0 == scored[order[i]].0 {
            j += 1;
        }
        // 1-based average rank of the tie group [i, j).
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            if scored[idx].1 {
                rank_sum_pos += avg_rank;
            }
        }
        i = j;
    }
    let p = positives as f64;
    let n = negatives as f64;
    Ok((rank_sum_pos - p * (p + 1.0) / 2.0) / (p * n))
}

/// PR-AUC as average precision over the descending-score step curve, with
/// tied scores grouped so precision and recall move only at group
/// boundaries: `AP = sum_k (R_k - R_{k-1}) * P_k`.
pub fn pr_auc(scored: &[(f64, bool)]) -> Result<f64, MetricError> {
    if scored.is_empty() {
        return Err(MetricError::Empty);
    }
    let total_pos = scored.iter().filter(|(_, p)| *p).count();
    if total_pos == 0 {
        return Err(MetricError::NoPositives);
    }
    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&a, &b| scored[b].0.total_cmp(&scored[a].0));
    let mut ap = 0.0f64;
    let mut tp = 0usize;
    let mut seen = 0usize;
    let mut prev_recall = 0.0f64;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        let mut group_tp = 0usize;
        while j < order.len() && scored[order[j]].0 == scored[order[i]].0 {
            if scored[order[j]].1 {
                group_tp += 1;
            }
            j += 1;
        }
        tp += group_tp;
        seen += j - i;
        let recall = tp as f64 / total_pos as f64;
        let precision = tp as f64 / seen as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j;
    }
    Ok(ap)
}

/// Report dimensions, in emission order.
const DIMENSIONS: [&str; 4] = ["global", "file_size", "ast_nodes", "alnum_ratio"];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportHeader {
    pub tool_version: String,
    /// File size is measured in bytes of UTF-8 text.
    pub size_unit: String,
    pub orientations: BTreeMap<String, f64>,
    pub exclude_flagged: bool,
    pub sample_count: usize,
    pub label_counts: BTreeMap<String, usize>,
    pub run_config: serde_json::Value,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportRow {
    pub scenario: String,
    pub attack: String,
    pub dimension: String,
    pub bucket: String,
    pub roc_auc: Option<f64>,
    pub pr_auc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub undefined_reason: Option<String>,
    pub positives: usize,
    pub negatives: usize,
    pub mean_change_ratio: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FlagCounts {
    pub scored: usize,
    pub truncated: usize,
    pub unchanged_neighbors: usize,
    pub excluded: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub header: ReportHeader,
    pub rows: Vec<ReportRow>,
    pub flags: BTreeMap<String, FlagCounts>,
}

impl EvalReport {
    /// Rows for one attack, for report inspection.
    pub fn attack_rows(&self, attack: AttackKind) -> impl Iterator<Item = &ReportRow> {
        self.rows
            .iter()
            .filter(move |r| r.attack == attack.as_str())
    }

    pub fn find(
        &self,
        scenario: &str,
        attack: &str,
        dimension: &str,
        bucket: &str,
    ) -> Option<&ReportRow> {
        self.rows.iter().find(|r| {
            r.scenario == scenario
                && r.attack == attack
                && r.dimension == dimension
                && r.bucket == bucket
        })
    }
}

/// Options for [`stratified_report`].
#[derive(Debug, Clone)]
pub struct ReportOptions {
    pub exclude_flagged: bool,
    pub run_config: serde_json::Value,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            exclude_flagged: false,
            run_config: serde_json::Value::Null,
        }
    }
}

/// Builds the full stratified report: per (scenario x attack), one global
/// row plus one row per bucket of each dimension. Empty buckets are carried
/// with a reason rather than a zero; mean effective change ratios
/// accompany every cell that has them.
pub fn stratified_report(
    samples: &[Sample],
    scores: &[AttackScore],
    scheme: &BucketScheme,
    options: &ReportOptions,
) -> EvalReport {
    let by_id: HashMap<&str, &Sample> = samples.iter().map(|s| (s.id.as_str(), s)).collect();
    let attacks: BTreeSet<AttackKind> = scores.iter().map(|s| s.attack).collect();

    let mut flags: BTreeMap<String, FlagCounts> = BTreeMap::new();
    for score in scores {
        let entry = flags.entry(score.attack.as_str().to_string()).or_default();
        entry.scored += 1;
        if score.flags.truncated {
            entry.truncated += 1;
        }
        if score.flags.unchanged_neighbors {
            entry.unchanged_neighbors += 1;
        }
        if options.exclude_flagged && score.flags.any() {
            entry.excluded += 1;
        }
    }

    let mut rows = Vec::new();
    for scenario in Scenario::ALL {
        for &attack in &attacks {
            // (score, is_positive, sample) triples for this cell universe.
            let mut pool: Vec<(f64, bool, &Sample)> = Vec::new();
            for score in scores.iter().filter(|s| s.attack == attack) {
                if options.exclude_flagged && score.flags.any() {
                    continue;
                }
                let Some(sample) = by_id.get(score.sample_id.as_str()) else {
                    continue;
                };
                if let Some(is_positive) = scenario.classify(sample.label) {
                    pool.push((score.oriented_score, is_positive, sample));
                }
            }
            let ratio_by_id: HashMap<&str, f64> = scores
                .iter()
                .filter(|s| s.attack == attack)
                .filter_map(|s| s.mean_change_ratio.map(|r| (s.sample_id.as_str(), r)))
                .collect();

            let mut push_row = |dimension: &str, bucket: &str, cell: &[(f64, bool, &Sample)]| {
                let pairs: Vec<(f64, bool)> = cell.iter().map(|(s, p, _)| (*s, *p)).collect();
                let positives = pairs.iter().filter(|(_, p)| *p).count();
                let negatives = pairs.len() - positives;
                let (roc, pr, reason) = if pairs.is_empty() {
                    (None, None, Some(MetricError::Empty.to_string()))
                } else {
                    match (roc_auc(&pairs), pr_auc(&pairs)) {
                        (Ok(r), Ok(p)) => (Some(r), Some(p), None),
                        (Err(e), _) | (_, Err(e)) => (None, None, Some(e.to_string())),
                    }
                };
                let ratios: Vec<f64> = cell
                    .iter()
                    .filter_map(|(_, _, s)| ratio_by_id.get(s.id.as_str()).copied())
                    .collect();
                let mean_change_ratio = if ratios.is_empty() {
                    None
                } else {
                    Some(ratios.iter().sum::<f64>() / ratios.len() as f64)
                };
                rows.push(ReportRow {
                    scenario: scenario.as_str().to_string(),
                    attack: attack.as_str().to_string(),
                    dimension: dimension.to_string(),
                    bucket: bucket.to_string(),
                    roc_auc: roc,
                    pr_auc: pr,
                    undefined_reason: reason,
                    positives,
                    negatives,
                    mean_change_ratio,
                });
            };

            push_row(DIMENSIONS[0], "all", &pool);
            for dimension in &DIMENSIONS[1..] {
                let (cutoffs, labels): (&[f64], &[String]) = match *dimension {
                    "file_size" => (&scheme.size_cutoffs, &scheme.size_labels),
                    "ast_nodes" => (&scheme.ast_cutoffs, &scheme.ast_labels),
                    _ => (&scheme.alnum_cutoffs, &scheme.alnum_labels),
                };
                for label in labels {
                    let cell: Vec<(f64, bool, &Sample)> = pool
                        .iter()
                        .filter(|(_, _, s)| {
                            let value = match *dimension {
                                "file_size" => s.size_bytes as f64,
                                "ast_nodes" => s.ast_node_count as f64,
                                _ => s.alnum_ratio,
                            };
                            assign_bucket(value, cutoffs, labels) == label
                        })
                        .copied()
                        .collect();
                    push_row(dimension, label, &cell);
                }
            }
        }
    }

    let mut label_counts = BTreeMap::new();
    for s in samples {
        *label_counts
            .entry(s.label.as_str().to_string())
            .or_insert(0usize) += 1;
    }
    let orientations = attacks
        .iter()
        .map(|a| (a.as_str().to_string(), a.default_orientation()))
        .collect();

    EvalReport {
        header: ReportHeader {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            size_unit: "bytes".to_string(),
            orientations,
            exclude_flagged: options.exclude_flagged,
            sample_count: samples.len(),
            label_counts,
            run_config: options.run_config.clone(),
        },
        rows,
        flags,
    }
}

/// Writes the report as pretty JSON.
pub fn write_report_json(report: &EvalReport, path: impl AsRef<Path>) -> std::io::Result<()> {
    let mut body = serde_json::to_string_pretty(report)?;
    body.push('\n');
    std::fs::write(path, body)
}

/// Writes the flat CSV view:
/// `scenario,attack,dimension,bucket,roc_auc,pr_auc,positives,negatives,mean_change_ratio`.
/// Undefined metrics serialize as empty fields.
pub fn write_report_csv(report: &EvalReport, path: impl AsRef<Path>) -> std::io::Result<()> {
    let to_io = |e: csv::Error| std::io::Error::other(e);
    let mut w = csv::Writer::from_path(path.as_ref()).map_err(to_io)?;
    w.write_record([
        "scenario",
        "attack",
        "dimension",
        "bucket",
        "roc_auc",
        "pr_auc",
        "positives",
        "negatives",
        "mean_change_ratio",
    ])
    .map_err(to_io)?;
    let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in &report.rows {
        w.write_record([
            r.scenario.clone(),
            r.attack.clone(),
            r.dimension.clone(),
            r.bucket.clone(),
            fmt(r.roc_auc),
            fmt(r.pr_auc),
            r.positives.to_string(),
            r.negatives.to_string(),
            fmt(r.mean_change_ratio),
        ])
        .map_err(to_io)?;
    }
    w.flush()?;
    Ok(())
}
