//! Lexical tokenizer shared by token swaps and change-ratio measurement.
//!
//! Tokens are maximal identifier runs, numeric literals, whole string or
//! character literals, and single punctuation characters. Whitespace only
//! separates tokens and is never a token itself, so it is never swapped.

/// Byte span of one lexical token.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Token {
    pub start: usize,
    pub end: usize,
}

impl Token {
    pub fn slice<'a>(&self, text: &'a str) -> &'a str {
        &text[self.start..self.end]
    }
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '$'
}

/// Splits `text` into lexical tokens with byte spans.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut iter = text.char_indices().peekable();
    while let Some((start, c)) = iter.next() {
        if c.is_whitespace() {
            continue;
        }
        let mut end = start + c.len_utf8();
        if c == '"' || c == '\'' {
            // Whole literal, honoring backslash escapes; unterminated
            // literals run to end of text.
            let quote = c;
            let mut escaped = false;
            for (j, d) in iter.by_ref() {
                end = j + d.len_utf8();
                if escaped {
                    escaped = false;
                } else if d == '\\' {
                    escaped = true;
                } else if d == quote {
                    break;
                }
            }
        } else if c.is_ascii_digit() {
            // Numeric literal: digits, letters and underscores (covers hex,
            // exponents without sign, and type suffixes); a dot only when a
            // digit follows it.
            while let Some(&(j, d)) = iter.peek() {
                let take = if d.is_ascii_alphanumeric() || d == '_' {
                    true
                } else if d == '.' {
                    let mut ahead = iter.clone();
                    ahead.next();
                    matches!(ahead.peek(), Some(&(_, n)) if n.is_ascii_digit())
                } else {
                    false
                };
                if !take {
                    break;
                }
                iter.next();
                end = j + d.len_utf8();
            }
        } else if is_ident_char(c) {
            while let Some(&(j, d)) = iter.peek() {
                if !is_ident_char(d) {
                    break;
                }
                iter.next();
                end = j + d.len_utf8();
            }
        }
        tokens.push(Token { start, end });
    }
    tokens
}

/// Token contents in order.
pub fn token_strings(text: &str) -> Vec<&str> {
    tokenize(text).iter().map(|t| t.slice(text)).collect()
}

/// Rebuilds `text` with per-token replacement contents, keeping the original
/// separators. A single space is inserted where two replacements would
/// otherwise change the local token boundaries (e.g. "2" against ".5"), so
/// the token sequence survives re-tokenization.
pub fn rebuild(text: &str, tokens: &[Token], contents: &[&str]) -> String {
    assert_eq!(tokens.len(), contents.len());
    let mut out = String::with_capacity(text.len() + 8);
    let mut cursor = 0usize;
    // Start of the current whitespace-free run in `out`, and the token
    // sequence emitted into it. Lookahead in the lexer can reach back
    // through several separator-free tokens, so the whole run is checked.
    let mut run_start = 0usize;
    let mut run_tokens: Vec<&str> = Vec::new();
    for (tok, content) in tokens.iter().zip(contents) {
        if tok.start > cursor {
            out.push_str(&text[cursor..tok.start]);
            run_start = out.len();
            run_tokens.clear();
        }
        if !run_tokens.is_empty() && would_fuse(&out[run_start..], &run_tokens, content) {
            out.push(' ');
            run_start = out.len();
            run_tokens.clear();
        }
        out.push_str(content);
        run_tokens.push(content);
        cursor = tok.end;
    }
    out.push_str(&text[cursor..]);
    out
}

// Exact junction check: appending `next` to the run must lex to the run's
// emitted tokens followed by `next`'s own tokens.
fn would_fuse(run_text: &str, run_tokens: &[&str], next: &str) -> bool {
    if next.is_empty() {
        return false;
    }
    let mut expected: Vec<&str> = run_tokens.to_vec();
    expected.extend(token_strings(next));
    let merged = format!("{run_text}{next}");
    token_strings(&merged) != expected
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn strings(text: &str) -> Vec<&str> {
        token_strings(text)
    }

    #[test]
    fn statement_tokens() {
        assert_eq!(strings("int a = 1;"), vec!["int", "a", "=", "1", ";"]);
    }

    #[test]
    fn string_literal_is_one_token() {
        assert_eq!(
            strings(r#"f("a b \" c", x)"#),
            vec!["f", "(", r#""a b \" c""#, ",", "x", ")"]
        );
    }

    #[test]
    fn char_literal_is_one_token() {
        assert_eq!(strings(r"c = '\n';"), vec!["c", "=", r"'\n'", ";"]);
    }

    #[test]
    fn numeric_literals() {
        assert_eq!(strings("1.5"), vec!["1.5"]);
        assert_eq!(strings(".5"), vec![".", "5"]);
        assert_eq!(
            strings("0x1F 100_000 2e10 7L"),
            vec!["0x1F", "100_000", "2e10", "7L"]
        );
        assert_eq!(
            strings("a[1].length"),
            vec!["a", "[", "1", "]", ".", "length"]
        );
    }

    #[test]
    fn empty_and_whitespace() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("  \n\t ").is_empty());
    }

    #[test]
    fn rebuild_identity() {
        for text in ["int a = 1;\n  foo(\"x y\", 1.5);", "q.5", "a[0].b"] {
            let tokens = tokenize(text);
            let contents: Vec<&str> = tokens.iter().map(|t| t.slice(text)).collect();
            assert_eq!(rebuild(text, &tokens, &contents), text);
        }
    }

    #[test]
    fn rebuild_guards_against_fusion() {
        // q.5 lexes as [q, ., 5]; replacing q with 2 must not produce "2.5".
        let text = "q.5";
        let tokens = tokenize(text);
        let rebuilt = rebuild(text, &tokens, &["2", ".", "5"]);
        assert_eq!(token_strings(&rebuilt), vec!["2", ".", "5"]);

        // xy5 fusion: identifier next to number.
        let text = "x.5";
        let tokens = tokenize(text);
        let rebuilt = rebuild(text, &tokens, &["x", "y", "5"]);
        assert_eq!(token_strings(&rebuilt), vec!["x", "y", "5"]);
    }

    proptest! {
        // Rebuilding with unchanged contents is the identity on bytes.
        #[test]
        fn prop_rebuild_unchanged_is_identity(text in "[ -~\\n]{0,80}") {
            let tokens = tokenize(&text);
            let contents: Vec<&str> = tokens.iter().map(|t| t.slice(&text)).collect();
            prop_assert_eq!(rebuild(&text, &tokens, &contents), text);
        }

        // Rebuilding with permuted contents preserves the token sequence
        // under re-tokenization. Quote characters are excluded: moving an
        // unterminated literal changes how the tail lexes.
        #[test]
        fn prop_rebuild_preserves_tokens(text in "[ -!#-&(-~\\n]{0,80}", rot in 0usize..8) {
            let tokens = tokenize(&text);
            let mut contents: Vec<&str> = tokens.iter().map(|t| t.slice(&text)).collect();
            if !contents.is_empty() {
                let shift = rot % contents.len();
                contents.rotate_left(shift);
            }
            let rebuilt = rebuild(&text, &tokens, &contents);
            prop_assert_eq!(token_strings(&rebuilt), contents);
        }

        #[test]
        fn prop_tokens_are_ordered_and_disjoint(text in "[ -~\\n]{0,80}") {
            let tokens = tokenize(&text);
            for w in tokens.windows(2) {
                prop_assert!(w[0].end <= w[1].start);
            }
            for t in &tokens {
                prop_assert!(t.start < t.end);
            }
        }
    }
}
