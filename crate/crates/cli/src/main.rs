//! `mia` — grey-box membership-inference auditing for code language models.
//!
//! Exit codes: 0 success, 1 validation error, 2 backend error, 3 partial
//! completion.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use mia_cli::commands::{self, CmdOutcome};
use mia_cli::config::{RunConfig, RunOverrides};
use mia_cli::pipeline::{self, RunOutcome};
use mia_cli::CliError;
use mia_core::attacks::{AttackKind, KUnit};
use mia_core::mutate::{MutationConfig, Strategy};

#[derive(Parser)]
#[command(
    name = "mia",
    version,
    about = "Grey-box membership-inference auditing for code language models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Token,
    Ast,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Strategy {
        match s {
            StrategyArg::Token => Strategy::TokenSwap,
            StrategyArg::Ast => Strategy::AstSwap,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AttackArg {
    Loss,
    Pac,
    #[value(name = "ast_pac")]
    AstPac,
}

impl From<AttackArg> for AttackKind {
    fn from(a: AttackArg) -> AttackKind {
        match a {
            AttackArg::Loss => AttackKind::Loss,
            AttackArg::Pac => AttackKind::Pac,
            AttackArg::AstPac => AttackKind::AstPac,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum KUnitArg {
    Percent,
    Count,
}

impl From<KUnitArg> for KUnit {
    fn from(k: KUnitArg) -> KUnit {
        match k {
            KUnitArg::Percent => KUnit::Percent,
            KUnitArg::Count => KUnit::Count,
        }
    }
}

#[derive(clap::Args, Clone)]
struct MutationFlags {
    /// Mutation ratio m in (0, 1].
    #[arg(long, default_value_t = 0.3)]
    m: f64,
    /// Neighbors per sample.
    #[arg(long, default_value_t = 5)]
    n: usize,
    /// Retry budget for the AST strategy.
    #[arg(long, default_value_t = 10)]
    tries: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Category registry JSON; built-in Java registry when omitted.
    #[arg(long)]
    registry: Option<PathBuf>,
}

impl MutationFlags {
    fn config(&self) -> MutationConfig {
        MutationConfig {
            mutation_ratio: self.m,
            neighbor_count: self.n,
            max_tries: self.tries,
            seed: self.seed,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Validate a corpus and write it back with strata features.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Classify near-members against the member set via MinHash.
    NearMembers {
        #[arg(long)]
        input: PathBuf,
        /// Output CSV: candidate_id,member_id,estimated_jaccard.
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 0.7)]
        threshold: f64,
        #[arg(long, default_value_t = 256)]
        permutations: usize,
        #[arg(long, default_value_t = 3)]
        shingle_width: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Generate calibration neighbors for every sample.
    Mutate {
        #[arg(long, value_enum)]
        strategy: StrategyArg,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        mutation: MutationFlags,
    },
    /// Compute attack scores through a configured backend.
    Score {
        #[arg(long, value_enum)]
        attack: AttackArg,
        /// Backend config file (TOML or JSON).
        #[arg(long)]
        backend: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Persistent logprob cache (resumable scoring).
        #[arg(long)]
        cache: Option<PathBuf>,
        #[arg(long, default_value_t = 30.0)]
        k_near: f64,
        #[arg(long, default_value_t = 5.0)]
        k_far: f64,
        #[arg(long, value_enum, default_value = "percent")]
        k_unit: KUnitArg,
        #[command(flatten)]
        mutation: MutationFlags,
    },
    /// Join scores with the corpus into a stratified report.
    Evaluate {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out_json: PathBuf,
        #[arg(long)]
        out_csv: PathBuf,
        #[arg(long, default_value_t = false)]
        exclude_flagged: bool,
        /// Run config supplying the bucket scheme; defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Execute the full pipeline: mutate, score, evaluate.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
        /// Comma-separated subset of {loss, pac, ast_pac}.
        #[arg(long, value_delimiter = ',')]
        attacks: Option<Vec<String>>,
        #[arg(long)]
        exclude_flagged: bool,
    },
    /// Probe configuration, corpus, grammar, registry, and backend.
    Doctor {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn finish(outcome: CmdOutcome) -> ExitCode {
    println!("{}", outcome.summary);
    if outcome.failed > 0 {
        ExitCode::from(3)
    } else {
        ExitCode::SUCCESS
    }
}

fn dispatch(command: Command) -> Result<ExitCode, CliError> {
    match command {
        Command::Ingest { input, output } => Ok(finish(commands::cmd_ingest(&input, &output)?)),
        Command::NearMembers {
            input,
            output,
            threshold,
            permutations,
            shingle_width,
            seed,
        } => Ok(finish(commands::cmd_near_members(
            &input,
            &output,
            threshold,
            permutations,
            shingle_width,
            seed,
        )?)),
        Command::Mutate {
            strategy,
            input,
            output,
            mutation,
        } => Ok(finish(commands::cmd_mutate(
            strategy.into(),
            &input,
            &output,
            mutation.config(),
            mutation.registry.as_deref(),
        )?)),
        Command::Score {
            attack,
            backend,
            input,
            output,
            cache,
            k_near,
            k_far,
            k_unit,
            mutation,
        } => Ok(finish(commands::cmd_score(
            attack.into(),
            &backend,
            &input,
            &output,
            cache.as_deref(),
            k_near,
            k_far,
            k_unit.into(),
            mutation.config(),
            mutation.registry.as_deref(),
        )?)),
        Command::Evaluate {
            scores,
            corpus,
            out_json,
            out_csv,
            exclude_flagged,
            config,
        } => Ok(finish(commands::cmd_evaluate(
            &scores,
            &corpus,
            &out_json,
            &out_csv,
            exclude_flagged,
            config.as_ref(),
        )?)),
        Command::Run {
            config,
            corpus,
            out,
            seed,
            workers,
            attacks,
            exclude_flagged,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            let attacks = match attacks {
                Some(names) => {
                    let mut parsed = Vec::new();
                    for name in names {
                        let kind = AttackKind::parse(name.trim()).ok_or_else(|| {
                            CliError::Validation(format!("unknown attack `{name}`"))
                        })?;
                        parsed.push(kind);
                    }
                    Some(parsed)
                }
                None => None,
            };
            cfg.apply(&RunOverrides {
                corpus,
                output_dir: out,
                seed,
                workers,
                exclude_flagged: exclude_flagged.then_some(true),
                attacks,
            });
            let RunOutcome { report, stats } = pipeline::run_audit(&cfg)?;
            println!(
                "audited {} sample(s); {} neighbor variant(s); {} unique text(s); \
                 cache hits at start {}; backend requests {}",
                stats.samples,
                stats.neighbor_variants,
                stats.unique_texts,
                stats.cache_hits_at_start,
                stats.backend_requests,
            );
            for row in report.rows.iter().filter(|r| r.dimension == "global") {
                let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.3}"));
                println!(
                    "  {:5} {:8} roc_auc={} pr_auc={} ({} vs {})",
                    row.scenario,
                    row.attack,
                    fmt(row.roc_auc),
                    fmt(row.pr_auc),
                    row.positives,
                    row.negatives,
                );
            }
            println!(
                "artifacts: {}, {}, {}, {}",
                cfg.neighbors_path().display(),
                cfg.scores_path().display(),
                cfg.report_json_path().display(),
                cfg.report_csv_path().display(),
            );
            if stats.failures.is_empty() {
                Ok(ExitCode::SUCCESS)
            } else {
                for (what, reason) in &stats.failures {
                    eprintln!("failed {what}: {reason}");
                }
                eprintln!(
                    "partial completion: {} score(s) missing",
                    stats.failures.len()
                );
                Ok(ExitCode::from(3))
            }
        }
        Command::Doctor { config } => {
            let cfg = RunConfig::load(&config)?;
            let report = pipeline::doctor(&cfg);
            for check in &report.checks {
                let mark = if check.passed { "ok  " } else { "FAIL" };
                println!("{mark} {:<11} {}", check.name, check.detail);
                if !check.passed {
                    println!("     hint: {}", check.hint);
                }
            }
            Ok(ExitCode::from(report.exit_code()))
        }
    }
}
