//! Run configuration: one TOML or JSON file, with CLI flags taking
//! precedence over file values.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use mia_core::attacks::{AttackConfig, AttackKind, KUnit};
use mia_core::eval::BucketScheme;
use mia_core::modelgw::BackendConfig;
use mia_core::mutate::MutationConfig;

use crate::CliError;

/// Shared polarized-distance parameters applied to every calibrated attack.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackParams {
    #[serde(default = "default_k_near")]
    pub k_near: f64,
    #[serde(default = "default_k_far")]
    pub k_far: f64,
    #[serde(default)]
    pub k_unit: KUnit,
}

fn default_k_near() -> f64 {
    30.0
}
fn default_k_far() -> f64 {
    5.0
}

impl Default for AttackParams {
    fn default() -> Self {
        AttackParams {
            k_near: default_k_near(),
            k_far: default_k_far(),
            k_unit: KUnit::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub corpus: PathBuf,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// One seed governs the run; every derived stream is a pure function of
    /// (seed, sample id, purpose tag).
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub exclude_flagged: bool,
    #[serde(default = "default_attacks")]
    pub attacks: Vec<AttackKind>,
    pub backend: BackendConfig,
    #[serde(default)]
    pub mutation: MutationConfig,
    #[serde(default)]
    pub attack_params: AttackParams,
    #[serde(default)]
    pub buckets: BucketScheme,
    /// Category registry file; the built-in Java registry when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub registry: Option<PathBuf>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_seed() -> u64 {
    42
}
fn default_workers() -> usize {
    4
}
fn default_attacks() -> Vec<AttackKind> {
    vec![AttackKind::Loss, AttackKind::Pac, AttackKind::AstPac]
}

/// Flag overrides collected from the command line.
#[derive(Debug, Clone, Default)]
pub struct RunOverrides {
    pub corpus: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub exclude_flagged: Option<bool>,
    pub attacks: Option<Vec<AttackKind>>,
}

impl RunConfig {
    /// Loads TOML (default) or JSON (by `.json` extension).
    pub fn load(path: impl AsRef<Path>) -> Result<Self, CliError> {
        let path = path.as_ref();
        let body = std::fs::read_to_string(path).map_err(|e| {
            CliError::Validation(format!("cannot read config {}: {e}", path.display()))
        })?;
        let cfg: RunConfig = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&body)
                .map_err(|e| CliError::Validation(format!("malformed JSON config: {e}")))?
        } else {
            toml::from_str(&body)
                .map_err(|e| CliError::Validation(format!("malformed TOML config: {e}")))?
        };
        Ok(cfg)
    }

    /// Applies CLI flags over file values.
    pub fn apply(&mut self, overrides: &RunOverrides) {
        if let Some(v) = &overrides.corpus {
            self.corpus = v.clone();
        }
        if let Some(v) = &overrides.output_dir {
            self.output_dir = v.clone();
        }
        if let Some(v) = overrides.seed {
            self.seed = v;
        }
        if let Some(v) = overrides.workers {
            self.workers = v;
        }
        if let Some(v) = overrides.exclude_flagged {
            self.exclude_flagged = v;
        }
        if let Some(v) = &overrides.attacks {
            self.attacks = v.clone();
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.attacks.is_empty() {
            return Err(CliError::Validation("attacks list is empty".into()));
        }
        if self.workers == 0 {
            return Err(CliError::Validation("workers must be >= 1".into()));
        }
        self.mutation
            .validate()
            .map_err(|e| CliError::Validation(format!("mutation: {e}")))?;
        self.buckets
            .validate()
            .map_err(|e| CliError::Validation(format!("buckets: {e}")))?;
        if self.attack_params.k_near <= 0.0 || self.attack_params.k_far <= 0.0 {
            return Err(CliError::Validation(
                "attack_params: k_near and k_far must be positive".into(),
            ));
        }
        self.backend
            .validate()
            .map_err(|e| CliError::Validation(format!("backend: {e}")))?;
        Ok(())
    }

    /// Assembles the per-attack configuration, run seed included.
    pub fn attack_config(&self, attack: AttackKind) -> AttackConfig {
        let mut mutation = self.mutation.clone();
        mutation.seed = self.seed;
        AttackConfig {
            attack,
            k_near: self.attack_params.k_near,
            k_far: self.attack_params.k_far,
            k_unit: self.attack_params.k_unit,
            mutation,
            orientation: None,
        }
    }

    pub fn neighbors_path(&self) -> PathBuf {
        self.output_dir.join("neighbors.jsonl")
    }
    pub fn cache_path(&self) -> PathBuf {
        self.output_dir.join("logprob-cache.jsonl")
    }
    pub fn scores_path(&self) -> PathBuf {
        self.output_dir.join("scores.jsonl")
    }
    pub fn report_json_path(&self) -> PathBuf {
        self.output_dir.join("report.json")
    }
    pub fn report_csv_path(&self) -> PathBuf {
        self.output_dir.join("report.csv")
    }
}

/// Loads a standalone backend-config file (TOML or JSON).
pub fn load_backend_config(path: impl AsRef<Path>) -> Result<BackendConfig, CliError> {
    let path = path.as_ref();
    let body = std::fs::read_to_string(path).map_err(|e| {
        CliError::Validation(format!(
            "cannot read backend config {}: {e}",
            path.display()
        ))
    })?;
    let cfg: BackendConfig = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&body)
            .map_err(|e| CliError::Validation(format!("malformed JSON backend config: {e}")))?
    } else {
        toml::from_str(&body)
            .map_err(|e| CliError::Validation(format!("malformed TOML backend config: {e}")))?
    };
    Ok(cfg)
}
