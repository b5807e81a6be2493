//! Java parsing, AST metrics, and swappable node-category collection.
//!
//! Built on tree-sitter with the Java grammar. Parsing never fails on
//! syntactically invalid input; grammar violations surface as error nodes
//! counted by [`SyntaxTree::error_count`]. "AST node" throughout means a
//! named (non-punctuation) node.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use tree_sitter::{Node, Parser};

#[derive(Debug, thiserror::Error)]
pub enum SyntaxError {
    #[error("input is not valid UTF-8: {0}")]
    InvalidUtf8(#[from] std::str::Utf8Error),
    #[error("failed to read registry: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed registry: {0}")]
    Registry(#[from] serde_json::Error),
    #[error("registry has no categories")]
    EmptyRegistry,
}

/// Concrete syntax tree for one text.
pub struct SyntaxTree {
    tree: tree_sitter::Tree,
}

thread_local! {
    static PARSER: RefCell<Parser> = RefCell::new(make_parser());
}

fn make_parser() -> Parser {
    let mut parser = Parser::new();
    parser
        .set_language(&tree_sitter_java::LANGUAGE.into())
        .expect("java grammar is version-compatible");
    parser
}

/// Parses `text` as Java. Each thread reuses its own parser instance.
pub fn parse(text: &str) -> SyntaxTree {
    PARSER.with(|p| {
        let mut parser = p.borrow_mut();
        let tree = parser.parse(text, None).expect("parse yields a tree");
        SyntaxTree { tree }
    })
}

/// Parses raw bytes, rejecting invalid UTF-8.
pub fn parse_bytes(bytes: &[u8]) -> Result<SyntaxTree, SyntaxError> {
    let text = std::str::from_utf8(bytes)?;
    Ok(parse(text))
}

impl SyntaxTree {
    pub fn root(&self) -> Node<'_> {
        self.tree.root_node()
    }

    /// Number of error and missing nodes.
    pub fn error_count(&self) -> usize {
        let mut count = 0;
        visit_all(self.root(), &mut |node| {
            if node.is_error() || node.is_missing() {
                count += 1;
            }
        });
        count
    }
}

/// Pre-order visit of every node (named and anonymous) via a cursor.
fn visit_all<'t>(root: Node<'t>, f: &mut impl FnMut(Node<'t>)) {
    let mut cursor = root.walk();
    loop {
        f(cursor.node());
        if cursor.goto_first_child() {
            continue;
        }
        loop {
            if cursor.goto_next_sibling() {
                break;
            }
            if !cursor.goto_parent() {
                return;
            }
        }
    }
}

/// Count of named nodes in the tree.
pub fn ast_node_count(tree: &SyntaxTree) -> usize {
    let mut count = 0;
    visit_all(tree.root(), &mut |node| {
        if node.is_named() {
            count += 1;
        }
    });
    count
}

/// Structural predicates a registry entry may name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predicate {
    /// Named child of a method-body block whose kind ends in `_statement`
    /// or is `local_variable_declaration`.
    MethodBodyChild,
}

/// One category: matched by exact grammar kind or by a structural predicate.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CategorySpec {
    #[serde(default)]
    pub kinds: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicate: Option<Predicate>,
}

/// Registry of swappable node categories, loadable from a JSON object
/// mapping category key to a [`CategorySpec`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CategoryRegistry {
    pub categories: BTreeMap<String, CategorySpec>,
}

impl CategoryRegistry {
    /// Default Java registry: variable declarators, literal kinds, and
    /// top-level method-body statements.
    pub fn default_java() -> Self {
        let mut categories = BTreeMap::new();
        let kind_only = |kinds: &[&str]| CategorySpec {
            kinds: kinds.iter().map(|k| k.to_string()).collect(),
            predicate: None,
        };
        categories.insert(
            "variable_declarator".into(),
            kind_only(&["variable_declarator"]),
        );
        categories.insert(
            "decimal_integer_literal".into(),
            kind_only(&["decimal_integer_literal"]),
        );
        categories.insert("string_literal".into(), kind_only(&["string_literal"]));
        categories.insert(
            "character_literal".into(),
            kind_only(&["character_literal"]),
        );
        categories.insert("boolean_literal".into(), kind_only(&["true", "false"]));
        categories.insert(
            "top_level_statement".into(),
            CategorySpec {
                kinds: Vec::new(),
                predicate: Some(Predicate::MethodBodyChild),
            },
        );
        CategoryRegistry { categories }
    }

    pub fn from_json_str(json: &str) -> Result<Self, SyntaxError> {
        let reg: CategoryRegistry = serde_json::from_str(json)?;
        if reg.categories.is_empty() {
            return Err(SyntaxError::EmptyRegistry);
        }
        Ok(reg)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self, SyntaxError> {
        Self::from_json_str(&fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("registry serializes")
    }
}

fn predicate_matches(pred: Predicate, node: Node<'_>) -> bool {
    match pred {
        Predicate::MethodBodyChild => {
            let kind = node.kind();
            if !(kind.ends_with("_statement") || kind == "local_variable_declaration") {
                return false;
            }
            let Some(block) = node.parent() else {
                return false;
            };
            if block.kind() != "block" {
                return false;
            }
            matches!(block.parent(), Some(p) if p.kind() == "method_declaration")
        }
    }
}

fn spec_matches(spec: &CategorySpec, node: Node<'_>) -> bool {
    if spec.kinds.iter().any(|k| k == node.kind()) {
        return true;
    }
    spec.predicate.is_some_and(|p| predicate_matches(p, node))
}

/// One collected node: byte span plus the verbatim source slice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CollectedNode {
    pub start: usize,
    pub end: usize,
    pub text: String,
}

/// Category key -> nodes ordered by start offset, outermost occurrences only.
#[derive(Debug, Clone, Default)]
pub struct NodeCategoryMap {
    pub categories: BTreeMap<String, Vec<CollectedNode>>,
}

impl NodeCategoryMap {
    pub fn total_nodes(&self) -> usize {
        self.categories.values().map(Vec::len).sum()
    }
}

/// Collects registry categories from `tree`. Within each category, a node
/// nested inside an already-collected node is dropped, so spans in one
/// category never overlap.
pub fn collect_categories(
    tree: &SyntaxTree,
    text: &str,
    registry: &CategoryRegistry,
) -> NodeCategoryMap {
    let mut map = NodeCategoryMap::default();
    // Pre-order visit yields ascending start offsets and ancestors before
    // descendants, so one high-water mark per category suffices.
    let mut last_end: BTreeMap<&str, usize> = BTreeMap::new();
    visit_all(tree.root(), &mut |node| {
        if !node.is_named() {
            return;
        }
        for (key, spec) in &registry.categories {
            if !spec_matches(spec, node) {
                continue;
            }
            let start = node.start_byte();
            let end = node.end_byte();
            let watermark = last_end.get(key.as_str()).copied().unwrap_or(0);
            if start < watermark {
                continue; // nested inside a collected node of this category
            }
            last_end.insert(key.as_str(), end);
            map.categories
                .entry(key.clone())
                .or_default()
                .push(CollectedNode {
                    start,
                    end,
                    text: text[start..end].to_string(),
                });
        }
    });
    map
}
