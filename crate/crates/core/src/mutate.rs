//! Calibration-neighbor generation: random token swaps and AST-guided span
//! permutations, plus effective change ratio measurement.
//!
//! Both strategies draw from sub-streams derived from
//! `(seed, sample id, strategy, variant index)`, so neighbor sets are pure
//! functions of their inputs.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::hashing;
use crate::lex;
use crate::syntax::{self, CategoryRegistry, CollectedNode};

/// Mutation parameters shared by both neighbor strategies.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MutationConfig {
    /// Nominal fraction of units targeted for swapping, in (0, 1].
    #[serde(default = "default_ratio")]
    pub mutation_ratio: f64,
    /// Number of neighbors per sample.
    #[serde(default = "default_neighbors")]
    pub neighbor_count: usize,
    /// Retry budget for the AST strategy.
    #[serde(default = "default_tries")]
    pub max_tries: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_ratio() -> f64 {
    0.3
}
fn default_neighbors() -> usize {
    5
}
fn default_tries() -> usize {
    10
}

impl Default for MutationConfig {
    fn default() -> Self {
        MutationConfig {
            mutation_ratio: default_ratio(),
            neighbor_count: default_neighbors(),
            max_tries: default_tries(),
            seed: 0,
        }
    }
}

impl MutationConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.mutation_ratio > 0.0 && self.mutation_ratio <= 1.0) {
            return Err(format!(
                "mutation_ratio {} outside (0, 1]",
                self.mutation_ratio
            ));
        }
        if self.neighbor_count == 0 {
            return Err("neighbor_count must be positive".into());
        }
        if self.max_tries == 0 {
            return Err("max_tries must be positive".into());
        }
        Ok(())
    }
}

/// Neighbor-generation strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    TokenSwap,
    AstSwap,
}

impl Strategy {
    pub fn as_str(&self) -> &'static str {
        match self {
            Strategy::TokenSwap => "token_swap",
            Strategy::AstSwap => "ast_swap",
        }
    }
}

/// One generated variant; `unchanged` flags outputs equal to the input
/// (too few tokens, empty eligible categories, or exhausted retries).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MutationOutcome {
    pub text: String,
    pub unchanged: bool,
}

/// The neighbors of one sample under one strategy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NeighborSet {
    pub origin_id: String,
    pub strategy: Strategy,
    pub variants: Vec<String>,
    pub change_ratios: Vec<f64>,
    pub unchanged_flags: Vec<bool>,
}

impl NeighborSet {
    pub fn any_unchanged(&self) -> bool {
        self.unchanged_flags.iter().any(|&f| f)
    }
}

/// Number of disjoint token pairs to swap: `max(1, floor(m * tokens / 2))`,
/// capped by the number of disjoint pairs available.
pub fn swap_pair_count(ratio: f64, token_count: usize) -> usize {
    let nominal = (ratio * token_count as f64 / 2.0).floor() as usize;
    nominal.max(1).min(token_count / 2)
}

/// Total pair budget for the AST strategy: `max(1, floor(m * n / 2))`.
pub fn total_pair_budget(ratio: f64, eligible_nodes: usize) -> usize {
    ((ratio * eligible_nodes as f64 / 2.0).floor() as usize).max(1)
}

/// Splits a total pair budget across categories proportionally to category
/// size with largest-remainder rounding. Each share is capped at
/// `floor(size / 2)`; surplus spills to uncapped categories, so the result
/// always sums to `min(budget, sum(floor(size / 2)))`.
pub fn allocate_budgets(budget: usize, sizes: &[usize]) -> Vec<usize> {
    let caps: Vec<usize> = sizes.iter().map(|s| s / 2).collect();
    let capacity: usize = caps.iter().sum();
    let target = budget.min(capacity);
    let total: usize = sizes.iter().sum();
    let mut alloc = vec![0usize; sizes.len()];
    if target == 0 || total == 0 {
        return alloc;
    }
    let quotas: Vec<f64> = sizes
        .iter()
        .map(|&s| target as f64 * s as f64 / total as f64)
        .collect();
    for i in 0..sizes.len() {
        alloc[i] = (quotas[i].floor() as usize).min(caps[i]);
    }
    let mut assigned: usize = alloc.iter().sum();
    while assigned < target {
        let mut best: Option<usize> = None;
        for i in 0..sizes.len() {
            if alloc[i] >= caps[i] {
                continue;
            }
            let better = match best {
                None => true,
                Some(b) => quotas[i] - alloc[i] as f64 > quotas[b] - alloc[b] as f64 + 1e-12,
            };
            if better {
                best = Some(i);
            }
        }
        match best {
            Some(i) => {
                alloc[i] += 1;
                assigned += 1;
            }
            None => break, // unreachable: target <= capacity
        }
    }
    alloc
}

/// Swaps `floor(m * tokens / 2)` disjoint token-position pairs chosen
/// uniformly at random. Inputs with fewer than two tokens come back
/// unchanged and flagged.
pub fn token_swap_neighbor(
    text: &str,
    cfg: &MutationConfig,
    rng: &mut ChaCha8Rng,
) -> MutationOutcome {
    use rand::Rng;
    let tokens = lex::tokenize(text);
    let count = tokens.len();
    if count < 2 {
        return MutationOutcome {
            text: text.to_string(),
            unchanged: true,
        };
    }
    let pairs = swap_pair_count(cfg.mutation_ratio, count);
    // Partial Fisher-Yates: the first 2*pairs slots are a uniform sample of
    // distinct positions in random order, paired consecutively.
    let mut order: Vec<usize> = (0..count).collect();
    for i in 0..(2 * pairs) {
        let j = rng.gen_range(i..count);
        order.swap(i, j);
    }
    let mut contents: Vec<&str> = tokens.iter().map(|t| t.slice(text)).collect();
    for p in 0..pairs {
        contents.swap(order[2 * p], order[2 * p + 1]);
    }
    let out = lex::rebuild(text, &tokens, &contents);
    let unchanged = out == text;
    MutationOutcome {
        text: out,
        unchanged,
    }
}

/// AST-guided neighbor generation.
///
/// Each try parses the input, collects registry categories, keeps those with
/// at least two nodes, and swaps per-category pair budgets allocated from
/// `max(1, floor(m * N / 2))` where `N` is the eligible node total. The text
/// is re-parsed before each category pass so offsets stay fresh. The first
/// variant that differs from the input is returned; otherwise the input
/// comes back unchanged and flagged after `max_tries` tries.
pub fn ast_neighbor(
    text: &str,
    cfg: &MutationConfig,
    registry: &CategoryRegistry,
    rng: &mut ChaCha8Rng,
) -> MutationOutcome {
    for _ in 0..cfg.max_tries {
        let tree = syntax::parse(text);
        let map = syntax::collect_categories(&tree, text, registry);
        let eligible: Vec<(&String, usize)> = map
            .categories
            .iter()
            .filter(|(_, nodes)| nodes.len() >= 2)
            .map(|(key, nodes)| (key, nodes.len()))
            .collect();
        if eligible.is_empty() {
            return MutationOutcome {
                text: text.to_string(),
                unchanged: true,
            };
        }
        let total: usize = eligible.iter().map(|(_, n)| n).sum();
        let budget = total_pair_budget(cfg.mutation_ratio, total);
        let sizes: Vec<usize> = eligible.iter().map(|(_, n)| *n).collect();
        let budgets = allocate_budgets(budget, &sizes);

        let mut working = text.to_string();
        for ((key, _), pair_budget) in eligible.iter().zip(&budgets) {
            if *pair_budget == 0 {
                continue;
            }
            // Refresh offsets: earlier category passes may have moved spans.
            let tree = syntax::parse(&working);
            let fresh = syntax::collect_categories(&tree, &working, registry);
            let Some(nodes) = fresh.categories.get(*key) else {
                continue;
            };
            let pairs = (*pair_budget).min(nodes.len() / 2);
            if pairs == 0 {
                continue;
            }
            working = swap_category_spans(&working, nodes, pairs, rng);
        }
        if working != text {
            return MutationOutcome {
                text: working,
                unchanged: false,
            };
        }
    }
    MutationOutcome {
        text: text.to_string(),
        unchanged: true,
    }
}

/// Selects `2 * pairs` nodes without replacement, pairs them in shuffled
/// order, and exchanges the pair contents. A pair whose two contents are
/// byte-identical is redrawn from the unselected remainder up to 3 times.
/// Spans within one category never overlap, so replacements apply safely in
/// descending start order.
fn swap_category_spans(
    text: &str,
    nodes: &[CollectedNode],
    pairs: usize,
    rng: &mut ChaCha8Rng,
) -> String {
    use rand::seq::SliceRandom;
    let mut order: Vec<usize> = (0..nodes.len()).collect();
    order.shuffle(rng);
    let mut spare = 2 * pairs;
    let mut chosen: Vec<(usize, usize)> = Vec::with_capacity(pairs);
    for p in 0..pairs {
        let mut a = order[2 * p];
        let mut b = order[2 * p + 1];
        let mut redraws = 0;
        while nodes[a].text == nodes[b].text && redraws < 3 && spare + 2 <= order.len() {
            a = order[spare];
            b = order[spare + 1];
            spare += 2;
            redraws += 1;
        }
        chosen.push((a, b));
    }
    let mut replacements: Vec<(usize, usize, &str)> = Vec::with_capacity(2 * pairs);
    for (a, b) in chosen {
        replacements.push((nodes[a].start, nodes[a].end, nodes[b].text.as_str()));
        replacements.push((nodes[b].start, nodes[b].end, nodes[a].text.as_str()));
    }
    replacements.sort_by_key(|r| std::cmp::Reverse(r.0));
    let mut out = text.to_string();
    for (start, end, content) in replacements {
        out.replace_range(start..end, content);
    }
    out
}

/// Generates exactly `cfg.neighbor_count` variants with independent
/// sub-streams and fills per-variant effective change ratios.
pub fn generate_neighbor_set(
    id: &str,
    text: &str,
    strategy: Strategy,
    cfg: &MutationConfig,
    registry: &CategoryRegistry,
) -> NeighborSet {
    let mut variants = Vec::with_capacity(cfg.neighbor_count);
    let mut change_ratios = Vec::with_capacity(cfg.neighbor_count);
    let mut unchanged_flags = Vec::with_capacity(cfg.neighbor_count);
    for index in 0..cfg.neighbor_count {
        let mut rng = hashing::derive_rng(cfg.seed, id, strategy.as_str(), index as u64);
        let outcome = match strategy {
            Strategy::TokenSwap => token_swap_neighbor(text, cfg, &mut rng),
            Strategy::AstSwap => ast_neighbor(text, cfg, registry, &mut rng),
        };
        change_ratios.push(effective_change_ratio(text, &outcome.text));
        unchanged_flags.push(outcome.unchanged);
        variants.push(outcome.text);
    }
    NeighborSet {
        origin_id: id.to_string(),
        strategy,
        variants,
        change_ratios,
        unchanged_flags,
    }
}

/// Token-level effective change ratio:
/// `1 - 2 * LCS(tok(a), tok(b)) / (|tok(a)| + |tok(b)|)`.
/// Zero for identical inputs and when both tokenize to nothing.
pub fn effective_change_ratio(original: &str, variant: &str) -> f64 {
    let ta = lex::token_strings(original);
    let tb = lex::token_strings(variant);
    if ta.is_empty() && tb.is_empty() {
        return 0.0;
    }
    let (ia, ib) = intern(&ta, &tb);
    let lcs = lcs_len(&ia, &ib);
    1.0 - (2.0 * lcs as f64) / ((ta.len() + tb.len()) as f64)
}

fn intern<'a>(a: &[&'a str], b: &[&'a str]) -> (Vec<u32>, Vec<u32>) {
    use std::collections::HashMap;
    fn assign<'a>(ids: &mut HashMap<&'a str, u32>, tok: &'a str) -> u32 {
        let next = ids.len() as u32;
        *ids.entry(tok).or_insert(next)
    }
    let mut ids: HashMap<&'a str, u32> = HashMap::new();
    let ia = a.iter().map(|t| assign(&mut ids, t)).collect();
    let ib = b.iter().map(|t| assign(&mut ids, t)).collect();
    (ia, ib)
}

/// LCS length with common prefix/suffix trimming and a two-row table.
fn lcs_len(a: &[u32], b: &[u32]) -> usize {
    let mut lo = 0;
    while lo < a.len() && lo < b.len() && a[lo] == b[lo] {
        lo += 1;
    }
    let (a, b) = (&a[lo..], &b[lo..]);
    let mut hi = 0;
    while hi < a.len() && hi < b.len() && a[a.len() - 1 - hi] == b[b.len() - 1 - hi] {
        hi += 1;
    }
    let (a, b) = (&a[..a.len() - hi], &b[..b.len() - hi]);
    let mut prev = vec![0u32; b.len() + 1];
    let mut curr = vec![0u32; b.len() + 1];
    for &x in a {
        for (j, &y) in b.iter().enumerate() {
            curr[j + 1] = if x == y {
                prev[j] + 1
            } else {
                prev[j + 1].max(curr[j])
            };
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    lo + hi + prev[b.len()] as usize
}

#[cfg(test)]
mod tests {
    use super::Strategy;
    use super::*;
    use crate::syntax::parse;
    use proptest::prelude::*;

    fn rng_for(case: &str, index: u64) -> ChaCha8Rng {
        hashing::derive_rng(7, case, "test", index)
    }

    fn method_body(stmts: &str) -> String {
        format!("class A {{ void m() {{ {stmts} }} }}")
    }

    /// Quadratic full-table LCS; the oracle for `lcs_len`.
    fn lcs_oracle(a: &[&str], b: &[&str]) -> usize {
        let mut table = vec![vec![0usize; b.len() + 1]; a.len() + 1];
        for i in 0..a.len() {
            for j in 0..b.len() {
                table[i + 1][j + 1] = if a[i] == b[j] {
                    table[i][j] + 1
                } else {
                    table[i][j + 1].max(table[i + 1][j])
                };
            }
        }
        table[a.len()][b.len()]
    }

    fn oracle_change_ratio(a: &str, b: &str) -> f64 {
        let ta = lex::token_strings(a);
        let tb = lex::token_strings(b);
        if ta.is_empty() && tb.is_empty() {
            return 0.0;
        }
        1.0 - 2.0 * lcs_oracle(&ta, &tb) as f64 / (ta.len() + tb.len()) as f64
    }

    #[test]
    fn pair_count_examples() {
        assert_eq!(swap_pair_count(0.3, 10), 1);
        assert_eq!(swap_pair_count(0.3, 200), 30);
        assert_eq!(swap_pair_count(1.0, 5), 2);
        assert_eq!(swap_pair_count(0.01, 10), 1); // floor of 1 pair
    }

    #[test]
    fn ten_tokens_swaps_exactly_one_pair() {
        let text = "t0 t1 t2 t3 t4 t5 t6 t7 t8 t9";
        let cfg = MutationConfig::default();
        for i in 0..20 {
            let mut rng = rng_for("ten", i);
            let out = token_swap_neighbor(text, &cfg, &mut rng);
            let orig = lex::token_strings(text);
            let var = lex::token_strings(&out.text);
            assert_eq!(orig.len(), var.len());
            let moved = orig.iter().zip(&var).filter(|(a, b)| a != b).count();
            assert_eq!(moved, 2, "exactly two positions may differ: {}", out.text);
        }
    }

    #[test]
    fn identical_tokens_swap_to_identity() {
        let cfg = MutationConfig::default();
        let mut rng = rng_for("same", 0);
        let out = token_swap_neighbor("a a a a", &cfg, &mut rng);
        assert_eq!(out.text, "a a a a");
        assert!(out.unchanged);
    }

    #[test]
    fn too_few_tokens_flagged_unchanged() {
        let cfg = MutationConfig::default();
        let mut rng = rng_for("tiny", 0);
        let out = token_swap_neighbor("lonely", &cfg, &mut rng);
        assert!(out.unchanged);
        assert_eq!(out.text, "lonely");
    }

    #[test]
    fn token_swap_change_ratio_near_nominal() {
        // 200 distinct-ish tokens, 100 seeds: mean measured ratio ~ m.
        let tokens: Vec<String> = (0..200).map(|i| format!("v{i}")).collect();
        let text = tokens.join(" ");
        let cfg = MutationConfig::default();
        let mut total = 0.0;
        for i in 0..100 {
            let mut rng = rng_for("mc", i);
            let out = token_swap_neighbor(&text, &cfg, &mut rng);
            total += effective_change_ratio(&text, &out.text);
        }
        let mean = total / 100.0;
        assert!((0.25..=0.35).contains(&mean), "mean ratio {mean}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        // Token swaps preserve the token multiset.
        #[test]
        fn prop_token_multiset_preserved(
            words in proptest::collection::vec("[a-z]{1,4}|[0-9]{1,3}|[=;+*]", 2..40),
            seed in 0u64..1000,
        ) {
            let text = words.join(" ");
            let cfg = MutationConfig::default();
            let mut rng = hashing::derive_rng(seed, "prop", "swap", 0);
            let out = token_swap_neighbor(&text, &cfg, &mut rng);
            let mut a = lex::token_strings(&text);
            let mut b = lex::token_strings(&out.text);
            a.sort_unstable();
            b.sort_unstable();
            prop_assert_eq!(a, b);
        }

        // Also holds with no separators between tokens (fusion guard path).
        #[test]
        fn prop_token_multiset_preserved_dense(
            words in proptest::collection::vec("[a-z]{1,3}|[0-9]{1,2}|[=;+]", 2..24),
            seed in 0u64..1000,
        ) {
            let text = words.concat();
            let cfg = MutationConfig::default();
            let mut rng = hashing::derive_rng(seed, "prop", "dense", 0);
            let out = token_swap_neighbor(&text, &cfg, &mut rng);
            let mut a = lex::token_strings(&text);
            let mut b = lex::token_strings(&out.text);
            a.sort_unstable();
            b.sort_unstable();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn budget_formula_examples() {
        assert_eq!(total_pair_budget(0.3, 10), 1); // max(1, floor(1.5))
        assert_eq!(total_pair_budget(0.3, 100), 15);
        assert_eq!(total_pair_budget(0.1, 2), 1); // floor of 1
    }

    #[test]
    fn allocation_sums_to_min_of_budget_and_capacity() {
        let sizes = [5usize, 3, 2];
        let caps: usize = sizes.iter().map(|s| s / 2).sum(); // 2 + 1 + 1 = 4
        for budget in 0..10 {
            let alloc = allocate_budgets(budget, &sizes);
            let total: usize = alloc.iter().sum();
            assert_eq!(total, budget.min(caps), "budget {budget}: {alloc:?}");
            for (a, s) in alloc.iter().zip(&sizes) {
                assert!(a <= &(s / 2));
            }
        }
    }

    #[test]
    fn allocation_is_proportional() {
        // Quotas 3.0 / 1.5 / 1.5; largest remainder breaks the tie stably.
        assert_eq!(allocate_budgets(6, &[40, 20, 20]), vec![3, 2, 1]);
        assert_eq!(allocate_budgets(4, &[4, 4]), vec![2, 2]);
        // Caps bind: a category of size 3 can host at most one pair.
        assert_eq!(allocate_budgets(5, &[3, 20]), vec![1, 4]);
    }

    #[test]
    fn empty_categories_return_input_unchanged() {
        let cfg = MutationConfig::default();
        let registry = CategoryRegistry::default_java();
        let mut rng = rng_for("empty", 0);
        let out = ast_neighbor("class A {}", &cfg, &registry, &mut rng);
        assert!(out.unchanged);
        assert_eq!(out.text, "class A {}");
    }

    #[test]
    fn forced_literal_swap() {
        // Restrict the registry to integer literals so the only possible
        // move is swapping the two of them.
        let mut categories = std::collections::BTreeMap::new();
        categories.insert(
            "decimal_integer_literal".to_string(),
            crate::syntax::CategorySpec {
                kinds: vec!["decimal_integer_literal".into()],
                predicate: None,
            },
        );
        let registry = CategoryRegistry { categories };
        let text = method_body("int a = 1; int b = 2;");
        let cfg = MutationConfig::default();
        let mut rng = rng_for("forced", 0);
        let out = ast_neighbor(&text, &cfg, &registry, &mut rng);
        assert_eq!(out.text, method_body("int a = 2; int b = 1;"));
        assert!(!out.unchanged);
    }

    #[test]
    fn ast_swap_preserves_outside_bytes_and_span_multiset() {
        // One category in play: bytes outside the swapped spans must be
        // untouched and the span contents must be a permutation.
        let mut categories = std::collections::BTreeMap::new();
        categories.insert(
            "string_literal".to_string(),
            crate::syntax::CategorySpec {
                kinds: vec!["string_literal".into()],
                predicate: None,
            },
        );
        let registry = CategoryRegistry { categories };
        let text = method_body(
            r#"String a = "one"; String b = "two"; String c = "three"; String d = "four";"#,
        );
        let cfg = MutationConfig {
            mutation_ratio: 1.0,
            ..MutationConfig::default()
        };
        let mut rng = rng_for("bytes", 1);
        let out = ast_neighbor(&text, &cfg, &registry, &mut rng);
        assert!(!out.unchanged);

        let tree = parse(&text);
        let map = syntax::collect_categories(&tree, &text, &registry);
        let nodes = &map.categories["string_literal"];
        let tree_v = parse(&out.text);
        let map_v = syntax::collect_categories(&tree_v, &out.text, &registry);
        let nodes_v = &map_v.categories["string_literal"];
        assert_eq!(nodes.len(), nodes_v.len());

        let mut original: Vec<&str> = nodes.iter().map(|n| n.text.as_str()).collect();
        let mut variant: Vec<&str> = nodes_v.iter().map(|n| n.text.as_str()).collect();
        original.sort_unstable();
        variant.sort_unstable();
        assert_eq!(original, variant, "span contents are a permutation");

        // Outside bytes: replace every span with a fixed placeholder in both
        // texts; the skeletons must agree.
        let skeleton = |text: &str, nodes: &[CollectedNode]| {
            let mut s = text.to_string();
            for n in nodes.iter().rev() {
                s.replace_range(n.start..n.end, "@");
            }
            s
        };
        assert_eq!(skeleton(&text, nodes), skeleton(&out.text, nodes_v));
    }

    #[test]
    fn ast_swap_keeps_valid_files_valid() {
        let registry = CategoryRegistry::default_java();
        let cfg = MutationConfig::default();
        let text = method_body(
            "int a = 1; int b = 2; String s = \"x\"; String t = \"y\"; \
             boolean p = true; boolean q = false; a = b; b = a; return;",
        );
        assert_eq!(parse(&text).error_count(), 0);
        for i in 0..10 {
            let mut rng = rng_for("valid", i);
            let out = ast_neighbor(&text, &cfg, &registry, &mut rng);
            assert_eq!(parse(&out.text).error_count(), 0, "variant: {}", out.text);
        }
    }

    #[test]
    fn neighbor_set_cardinality_and_determinism() {
        let registry = CategoryRegistry::default_java();
        let cfg = MutationConfig {
            seed: 99,
            ..MutationConfig::default()
        };
        let text = method_body("int a = 1; int b = 2; int c = 3;");
        let first = generate_neighbor_set("s1", &text, Strategy::AstSwap, &cfg, &registry);
        let second = generate_neighbor_set("s1", &text, Strategy::AstSwap, &cfg, &registry);
        assert_eq!(first.variants.len(), 5);
        assert_eq!(first.change_ratios.len(), 5);
        assert_eq!(first.variants, second.variants);
        assert_eq!(first.change_ratios, second.change_ratios);
        let other = generate_neighbor_set("s2", &text, Strategy::AstSwap, &cfg, &registry);
        assert_ne!(
            first.variants, other.variants,
            "ids derive distinct streams"
        );
    }

    #[test]
    fn neighbor_set_token_ratios_bounded() {
        let registry = CategoryRegistry::default_java();
        let tokens: Vec<String> = (0..200).map(|i| format!("w{i}")).collect();
        let text = tokens.join(" ");
        let cfg = MutationConfig {
            seed: 5,
            ..MutationConfig::default()
        };
        let set = generate_neighbor_set("s", &text, Strategy::TokenSwap, &cfg, &registry);
        for r in &set.change_ratios {
            assert!((0.2..=0.4).contains(r), "ratio {r}");
        }
    }

    #[test]
    fn change_ratio_anchors() {
        assert_eq!(effective_change_ratio("int a = 1;", "int a = 1;"), 0.0);
        assert_eq!(effective_change_ratio("", ""), 0.0);
        let disjoint = effective_change_ratio("a b c", "x y z");
        assert_eq!(disjoint, 1.0);
    }

    #[test]
    fn change_ratio_matches_quadratic_oracle() {
        // One swapped pair in 10 distinct tokens: two positions moved.
        let a = "t0 t1 t2 t3 t4 t5 t6 t7 t8 t9";
        let b = "t0 t8 t2 t3 t4 t5 t6 t7 t1 t9";
        let got = effective_change_ratio(a, b);
        let want = oracle_change_ratio(a, b);
        assert!((got - want).abs() < 1e-15);
        assert!((got - 0.2).abs() < 1e-15, "2 of 10 positions moved");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn prop_change_ratio_equals_oracle(
            a in proptest::collection::vec("[a-c]{1,2}", 0..50),
            b in proptest::collection::vec("[a-c]{1,2}", 0..50),
        ) {
            let ta = a.join(" ");
            let tb = b.join(" ");
            let got = effective_change_ratio(&ta, &tb);
            let want = oracle_change_ratio(&ta, &tb);
            prop_assert!((got - want).abs() < 1e-12, "{} vs {}", got, want);
            prop_assert!((0.0..=1.0).contains(&got));
        }
    }
}
