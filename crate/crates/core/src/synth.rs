//! Deterministic synthetic Java corpora for self-tests, fixtures, and the
//! built-in toy experiment.
//!
//! Generated files parse without error nodes and carry enough repeated node
//! categories (declarators, literals, top-level statements) to feed the AST
//! neighbor strategy. Two vocabularies with disjoint character statistics
//! provide the member/non-member distribution shift for the toy audit.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Label, Sample};
use crate::hashing;

/// Naming and literal pools; swapping pools shifts the character-level
/// distribution without touching syntax.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    pub ident_roots: Vec<&'static str>,
    pub helper_names: Vec<&'static str>,
    pub string_words: Vec<&'static str>,
    pub char_pool: Vec<char>,
    pub int_low: i64,
    pub int_high: i64,
}

impl Vocabulary {
    pub fn member_style() -> Self {
        Vocabulary {
            ident_roots: vec![
                "alpha", "bravo", "delta", "gamma", "omega", "sigma", "kappa", "lambda", "theta",
                "zeta",
            ],
            helper_names: vec!["process", "update", "compute", "resolve"],
            string_words: vec![
                "stream", "buffer", "packet", "cursor", "branch", "module", "vector", "handler",
            ],
            char_pool: "abcdef".chars().collect(),
            int_low: 10,
            int_high: 500,
        }
    }

    pub fn shifted_style() -> Self {
        Vocabulary {
            ident_roots: vec![
                "zulu", "quux", "yankee", "xylo", "whisky", "victor", "uniform", "tango", "romeo",
                "quebec",
            ],
            helper_names: vec!["munge", "zap", "quash", "vex"],
            string_words: vec![
                "zephyr", "quartz", "vortex", "jigsaw", "oxbow", "yonder", "wizard", "knack",
            ],
            char_pool: "uvwxyz".chars().collect(),
            int_low: 5000,
            int_high: 9999,
        }
    }
}

fn pick<'a, T>(rng: &mut ChaCha8Rng, pool: &'a [T]) -> &'a T {
    &pool[rng.gen_range(0..pool.len())]
}

/// One Java class with `statements` top-level statements in a single void
/// method. Identifiers and literals are made unique per file so token swaps
/// almost always change the text.
pub fn java_file(seed: u64, file_id: &str, statements: usize, vocab: &Vocabulary) -> String {
    let mut rng = hashing::derive_rng(seed, file_id, "synth", 0);
    let mut body = String::new();
    let mut fresh = {
        let mut counter = 0usize;
        move |rng: &mut ChaCha8Rng, vocab: &Vocabulary| {
            counter += 1;
            format!("{}{}", pick(rng, &vocab.ident_roots), counter)
        }
    };
    for i in 0..statements {
        let lit = rng.gen_range(vocab.int_low..=vocab.int_high);
        let stmt = match i % 8 {
            0 => format!("int {} = {};", fresh(&mut rng, vocab), lit),
            1 => format!("long {} = {}L;", fresh(&mut rng, vocab), lit),
            2 => format!(
                "String {} = \"{} {}\";",
                fresh(&mut rng, vocab),
                pick(&mut rng, &vocab.string_words),
                pick(&mut rng, &vocab.string_words),
            ),
            3 => format!(
                "boolean {} = {};",
                fresh(&mut rng, vocab),
                if rng.gen_bool(0.5) { "true" } else { "false" },
            ),
            4 => format!(
                "char {} = '{}';",
                fresh(&mut rng, vocab),
                pick(&mut rng, &vocab.char_pool),
            ),
            5 => format!(
                "{} = {} + {};",
                fresh(&mut rng, vocab),
                fresh(&mut rng, vocab),
                lit,
            ),
            6 => format!(
                "{}({}, {}, \"{}\");",
                pick(&mut rng, &vocab.helper_names),
                lit,
                fresh(&mut rng, vocab),
                pick(&mut rng, &vocab.string_words),
            ),
            _ => format!(
                "if ({} > {}) {{ {} = {}; }}",
                fresh(&mut rng, vocab),
                lit,
                fresh(&mut rng, vocab),
                rng.gen_range(vocab.int_low..=vocab.int_high),
            ),
        };
        body.push_str("        ");
        body.push_str(&stmt);
        body.push('\n');
    }
    format!(
        "class C{} {{\n    void run() {{\n{}    }}\n}}\n",
        sanitize(file_id),
        body
    )
}

fn sanitize(id: &str) -> String {
    id.chars().filter(|c| c.is_ascii_alphanumeric()).collect()
}

/// Statement counts spanning `[min, max]` geometrically over `count` files.
pub fn statement_progression(count: usize, min: usize, max: usize) -> Vec<usize> {
    assert!(count >= 2 && min >= 1 && max > min);
    let ratio = (max as f64 / min as f64).powf(1.0 / (count as f64 - 1.0));
    (0..count)
        .map(|i| ((min as f64 * ratio.powi(i as i32)).round() as usize).clamp(min, max))
        .collect()
}

/// 60-file statement plan for size-trend studies: AST node counts run from a
/// minimal one-statement class (~14 nodes) past 1000. The smallest files mix
/// statement shapes so no size decile is dominated by one token-count
/// residue of the pair-count floor.
pub fn span_plan_60() -> Vec<usize> {
    let mut plan = vec![1, 2, 2, 5, 6, 9];
    for i in 0..54usize {
        plan.push(10 + (i as f64 * 150.0 / 53.0).round() as usize);
    }
    plan
}

/// Fixture corpus following an explicit per-file statement plan.
pub fn span_corpus(seed: u64, plan: &[usize]) -> Vec<Sample> {
    let vocab = Vocabulary::member_style();
    plan.iter()
        .enumerate()
        .map(|(i, &stmts)| {
            let id = format!("f{i:04}");
            let text = java_file(seed, &id, stmts, &vocab);
            Sample::new(id, text, Label::Member)
        })
        .collect()
}

/// Toy audit corpus: `members` member-labeled files in the member style and
/// `non_members` files drawn from the shifted style.
pub fn toy_corpus(
    seed: u64,
    members: usize,
    non_members: usize,
    min_statements: usize,
    max_statements: usize,
) -> Vec<Sample> {
    let member_vocab = Vocabulary::member_style();
    let shifted_vocab = Vocabulary::shifted_style();
    let mut out = Vec::with_capacity(members + non_members);
    let mut rng = hashing::derive_rng(seed, "toy", "sizes", 0);
    for i in 0..members {
        let id = format!("m{i:04}");
        let stmts = rng.gen_range(min_statements..=max_statements);
        out.push(Sample::new(
            id.clone(),
            java_file(seed, &id, stmts, &member_vocab),
            Label::Member,
        ));
    }
    for i in 0..non_members {
        let id = format!("x{i:04}");
        let stmts = rng.gen_range(min_statements..=max_statements);
        out.push(Sample::new(
            id.clone(),
            java_file(seed, &id, stmts, &shifted_vocab),
            Label::NonMember,
        ));
    }
    out
}
