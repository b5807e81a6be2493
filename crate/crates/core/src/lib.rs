//! Grey-box membership-inference auditing for code language models.
//!
//! The crate provides the building blocks of an audit pipeline:
//!
//! - [`corpus`]: labeled JSONL corpora, strata features, MinHash near-member
//!   classification.
//! - [`syntax`]: Java parsing, AST node counts, swappable node categories.
//! - [`mutate`]: token-swap and AST-guided span-permutation neighbors with
//!   effective change ratios.
//! - [`modelgw`]: per-token log-probabilities from HTTP, cache, or built-in
//!   n-gram backends.
//! - [`attacks`]: Loss, PAC, and AST-PAC membership scores.
//! - [`eval`]: scenario assembly, stratification, ROC-AUC and PR-AUC.

pub mod attacks;
pub mod corpus;
pub mod eval;
pub mod hashing;
pub mod lex;
pub mod modelgw;
pub mod mutate;
pub mod syntax;
pub mod synth;
