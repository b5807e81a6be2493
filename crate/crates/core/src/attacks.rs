//! Membership scores: Loss, PAC, and AST-PAC.
//!
//! The Loss score is the negated mean token cross-entropy. PAC and AST-PAC
//! share one formula — the sample's polarized distance minus the mean
//! polarized distance of its calibration neighbors — and differ only in how
//! those neighbors were generated. Oriented scores are arranged so that
//! higher always means more member-like; the sign per attack is fixed in
//! configuration and never flipped per dataset.

use serde::{Deserialize, Serialize};

use crate::modelgw::TokenLogProbs;
use crate::mutate::MutationConfig;

#[derive(Debug, thiserror::Error)]
pub enum AttackError {
    #[error("score undefined: no usable conditional tokens")]
    UndefinedScore,
    #[error("{0} requires at least one neighbor")]
    EmptyNeighbors(AttackKind),
    #[error("invalid attack configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    Loss,
    Pac,
    AstPac,
}

impl AttackKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            AttackKind::Loss => "loss",
            AttackKind::Pac => "pac",
            AttackKind::AstPac => "ast_pac",
        }
    }

    pub fn parse(s: &str) -> Option<AttackKind> {
        match s {
            "loss" => Some(AttackKind::Loss),
            "pac" => Some(AttackKind::Pac),
            "ast_pac" => Some(AttackKind::AstPac),
            _ => None,
        }
    }

    /// Default orientation: +1 for loss; -1 for the calibrated attacks,
    /// whose raw score drops further below zero for members.
    pub fn default_orientation(&self) -> f64 {
        match self {
            AttackKind::Loss => 1.0,
            AttackKind::Pac | AttackKind::AstPac => -1.0,
        }
    }
}

impl std::fmt::Display for AttackKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Unit of `k_near` / `k_far`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KUnit {
    #[default]
    Percent,
    Count,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackConfig {
    pub attack: AttackKind,
    #[serde(default = "default_k_near")]
    pub k_near: f64,
    #[serde(default = "default_k_far")]
    pub k_far: f64,
    #[serde(default)]
    pub k_unit: KUnit,
    #[serde(default)]
    pub mutation: MutationConfig,
    /// Sign applied so that higher oriented score means more member-like.
    /// Defaults per attack when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orientation: Option<f64>,
}

fn default_k_near() -> f64 {
    30.0
}
fn default_k_far() -> f64 {
    5.0
}

/// Applies the orientation sign, normalizing -0.0 out of the artifacts.
fn orient(sign: f64, raw: f64) -> f64 {
    let v = sign * raw;
    if v == 0.0 {
        0.0
    } else {
        v
    }
}

impl AttackConfig {
    pub fn new(attack: AttackKind) -> Self {
        AttackConfig {
            attack,
            k_near: default_k_near(),
            k_far: default_k_far(),
            k_unit: KUnit::default(),
            mutation: MutationConfig::default(),
            orientation: None,
        }
    }

    pub fn orientation(&self) -> f64 {
        self.orientation
            .unwrap_or_else(|| self.attack.default_orientation())
    }

    pub fn validate(&self) -> Result<(), AttackError> {
        if self.k_near <= 0.0 || self.k_far <= 0.0 {
            return Err(AttackError::InvalidConfig(
                "k_near and k_far must be positive".into(),
            ));
        }
        if let Some(o) = self.orientation {
            if o != 1.0 && o != -1.0 {
                return Err(AttackError::InvalidConfig(format!(
                    "orientation {o} must be +1 or -1"
                )));
            }
        }
        self.mutation.validate().map_err(AttackError::InvalidConfig)
    }

    /// Tail sizes (most-confident, least-confident) for a vector of
    /// `token_count` logprobs: percentage ceilings or direct counts, floored
    /// at one token and capped at the vector length.
    pub fn tail_sizes(&self, token_count: usize) -> (usize, usize) {
        let resolve = |k: f64| -> usize {
            let raw = match self.k_unit {
                KUnit::Percent => (k / 100.0 * token_count as f64).ceil() as usize,
                KUnit::Count => k.ceil() as usize,
            };
            raw.max(1).min(token_count)
        };
        (resolve(self.k_near), resolve(self.k_far))
    }
}

/// Mean, min, and max of the neighbors' polarized distances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeighborStats {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

/// Per-score flags.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreFlags {
    #[serde(default)]
    pub unchanged_neighbors: bool,
    #[serde(default)]
    pub truncated: bool,
}

impl ScoreFlags {
    pub fn any(&self) -> bool {
        self.unchanged_neighbors || self.truncated
    }
}

/// A named scalar score for one sample under one attack.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackScore {
    pub sample_id: String,
    pub attack: AttackKind,
    pub raw_score: f64,
    pub oriented_score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub neighbor_stats: Option<NeighborStats>,
    #[serde(default)]
    pub flags: ScoreFlags,
    /// Mean effective change ratio of the neighbors that produced this
    /// score; absent for the loss attack.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_change_ratio: Option<f64>,
}

/// Loss attack score `s_loss(x) = -l(x)`: the mean token log-probability.
/// Higher (closer to zero) means more member-like.
pub fn loss_score(lp: &TokenLogProbs) -> Result<f64, AttackError> {
    if lp.logprobs.is_empty() {
        return Err(AttackError::UndefinedScore);
    }
    Ok(lp.logprobs.iter().sum::<f64>() / lp.logprobs.len() as f64)
}

/// Polarized distance `L_M(x)`: mean of the most-confident tail minus mean
/// of the least-confident tail of the logprob multiset. Always >= 0.
pub fn polarized_distance(lp: &TokenLogProbs, cfg: &AttackConfig) -> Result<f64, AttackError> {
    if lp.logprobs.is_empty() {
        return Err(AttackError::UndefinedScore);
    }
    let (n_top, n_bottom) = cfg.tail_sizes(lp.logprobs.len());
    let mut sorted = lp.logprobs.clone();
    sorted.sort_unstable_by(f64::total_cmp);
    let high: f64 = sorted[sorted.len() - n_top..].iter().sum::<f64>() / n_top as f64;
    let low: f64 = sorted[..n_bottom].iter().sum::<f64>() / n_bottom as f64;
    Ok(high - low)
}

/// Builds the loss [`AttackScore`] for one sample.
pub fn loss_attack_score(
    sample_id: &str,
    lp: &TokenLogProbs,
    cfg: &AttackConfig,
) -> Result<AttackScore, AttackError> {
    let raw = loss_score(lp)?;
    Ok(AttackScore {
        sample_id: sample_id.to_string(),
        attack: cfg.attack,
        raw_score: raw,
        oriented_score: orient(cfg.orientation(), raw),
        neighbor_stats: None,
        flags: ScoreFlags {
            unchanged_neighbors: false,
            truncated: lp.truncated,
        },
        mean_change_ratio: None,
    })
}

/// PAC / AST-PAC score: `L_M(x) - mean_i L_M(x~_i)`. The two attacks share
/// this formula and differ only in neighbor strategy. Neighbors whose text
/// hash equals the original's set the `unchanged_neighbors` flag.
pub fn pac_score(
    sample_id: &str,
    lp_x: &TokenLogProbs,
    lp_neighbors: &[TokenLogProbs],
    cfg: &AttackConfig,
) -> Result<AttackScore, AttackError> {
    if lp_neighbors.is_empty() {
        return Err(AttackError::EmptyNeighbors(cfg.attack));
    }
    let own = polarized_distance(lp_x, cfg)?;
    let mut distances = Vec::with_capacity(lp_neighbors.len());
    let mut unchanged = false;
    let mut truncated = lp_x.truncated;
    for lp in lp_neighbors {
        distances.push(polarized_distance(lp, cfg)?);
        unchanged |= lp.text_sha256 == lp_x.text_sha256;
        truncated |= lp.truncated;
    }
    // The mean of identical distances is that distance; summing would smear
    // the self-calibration identity raw = 0 across the last bit.
    let mean = if distances.windows(2).all(|w| w[0] == w[1]) {
        distances[0]
    } else {
        distances.iter().sum::<f64>() / distances.len() as f64
    };
    let min = distances.iter().copied().fold(f64::INFINITY, f64::min);
    let max = distances.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let raw = own - mean;
    Ok(AttackScore {
        sample_id: sample_id.to_string(),
        attack: cfg.attack,
        raw_score: raw,
        oriented_score: orient(cfg.orientation(), raw),
        neighbor_stats: Some(NeighborStats { mean, min, max }),
        flags: ScoreFlags {
            unchanged_neighbors: unchanged,
            truncated,
        },
        mean_change_ratio: None,
    })
}
