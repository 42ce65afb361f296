//! Lexer for MiniLang source text.
//!
//! Whitespace (including newlines) never produces tokens; statement
//! boundaries are recovered by the parser from the grammar itself, so a
//! program lexes identically whether it is written on one line with `;`
//! separators or in the canonical indented form.

use thiserror::Error;

/// Lexical class of a token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Keyword,
    Identifier,
    IntLiteral,
    StringLiteral,
    BoolLiteral,
    Operator,
    Punct,
    /// Identifier appearing directly after `self.`.
    FieldName,
}

/// One lexed token with its byte span in the source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub kind: TokenKind,
    /// (byte offset, byte length)
    pub span: (usize, usize),
}

impl Token {
    /// Delimiters are dropped from the model-token view of a program.
    /// `:` is kept: it marks the body start and `if` arms.
    pub fn is_delimiter(&self) -> bool {
        self.kind == TokenKind::Punct && self.text != ":"
    }

    /// String literal content without the surrounding quotes.
    pub fn string_content(&self) -> &str {
        debug_assert_eq!(self.kind, TokenKind::StringLiteral);
        &self.text[1..self.text.len() - 1]
    }

    /// Text as it appears in the shared vocabulary: string literals
    /// contribute their content, everything else its exact text.
    pub fn vocab_text(&self) -> &str {
        match self.kind {
            TokenKind::StringLiteral => self.string_content(),
            _ => &self.text,
        }
    }
}

pub const KEYWORDS: &[&str] = &["def", "return", "if", "else", "print", "self"];

/// Names that may never be chosen as replacement identifiers.
/// `_dead` is claimed by the dead-code template, `abs`/`max`/`min` are the
/// builtin callables.
pub const RESERVED_WORDS: &[&str] = &[
    "def", "return", "if", "else", "print", "self", "True", "False", "abs", "max", "min", "_dead",
];

pub fn is_identifier_shaped(text: &str) -> bool {
    let mut chars = text.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LexError {
    #[error("empty program")]
    EmptyProgram,
    #[error("unexpected character {ch:?} at byte {offset}")]
    InvalidChar { offset: usize, ch: char },
    #[error("unterminated string literal starting at byte {offset}")]
    UnterminatedString { offset: usize },
}

/// Lex `source` into tokens. Errors on the first character outside the
/// grammar's alphabet; an all-whitespace program is an error.
pub fn tokenize(source: &str) -> Result<Vec<Token>, LexError> {
    let bytes = source.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        match b {
            b' ' | b'\t' | b'\r' | b'\n' => {
                i += 1;
            }
            b'"' => {
                let start = i;
                i += 1;
                while i < bytes.len() && bytes[i] != b'"' && bytes[i] != b'\n' {
                    i += 1;
                }
                if i >= bytes.len() || bytes[i] != b'"' {
                    return Err(LexError::UnterminatedString { offset: start });
                }
                i += 1;
                tokens.push(Token {
                    text: source[start..i].to_string(),
                    kind: TokenKind::StringLiteral,
                    span: (start, i - start),
                });
            }
            b'0'..=b'9' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                tokens.push(Token {
                    text: source[start..i].to_string(),
                    kind: TokenKind::IntLiteral,
                    span: (start, i - start),
                });
            }
            b'A'..=b'Z' | b'a'..=b'z' | b'_' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                let text = &source[start..i];
                let kind = if KEYWORDS.contains(&text) {
                    TokenKind::Keyword
                } else if text == "True" || text == "False" {
                    TokenKind::BoolLiteral
                } else {
                    TokenKind::Identifier
                };
                tokens.push(Token {
                    text: text.to_string(),
                    kind,
                    span: (start, i - start),
                });
            }
            b'=' | b'!' | b'<' | b'>' | b'+' | b'-' | b'*' | b'/' => {
                let start = i;
                let two = if i + 1 < bytes.len() {
                    &source[i..i + 2]
                } else {
                    ""
                };
                let text = match two {
                    "==" | "!=" | "//" => {
                        i += 2;
                        two
                    }
                    _ => {
                        if b == b'!' || b == b'/' {
                            // `!` and `/` only exist doubled
                            return Err(LexError::InvalidChar {
                                offset: i,
                                ch: b as char,
                            });
                        }
                        i += 1;
                        &source[start..i]
                    }
                };
                tokens.push(Token {
                    text: text.to_string(),
                    kind: TokenKind::Operator,
                    span: (start, i - start),
                });
            }
            b'(' | b')' | b':' | b',' | b';' | b'.' => {
                tokens.push(Token {
                    text: (b as char).to_string(),
                    kind: TokenKind::Punct,
                    span: (i, 1),
                });
                i += 1;
            }
            _ => {
                let ch = source[i..].chars().next().unwrap();
                return Err(LexError::InvalidChar { offset: i, ch });
            }
        }
    }
    if tokens.is_empty() {
        return Err(LexError::EmptyProgram);
    }
    // Identifiers directly after `self.` are field names.
    for idx in 2..tokens.len() {
        if tokens[idx].kind == TokenKind::Identifier
            && tokens[idx - 1].text == "."
            && tokens[idx - 2].text == "self"
        {
            tokens[idx].kind = TokenKind::FieldName;
        }
    }
    Ok(tokens)
}

/// Join token texts with single spaces. Re-lexing the result yields the
/// same token sequence.
pub fn spaced_text(tokens: &[Token]) -> String {
    tokens
        .iter()
        .map(|t| t.text.as_str())
        .collect::<Vec<_>>()
        .join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<(String, TokenKind)> {
        tokenize(src)
            .unwrap()
            .into_iter()
            .map(|t| (t.text, t.kind))
            .collect()
    }

    #[test]
    fn simple_statement() {
        let toks = kinds("r = p - 5");
        assert_eq!(
            toks,
            vec![
                ("r".into(), TokenKind::Identifier),
                ("=".into(), TokenKind::Operator),
                ("p".into(), TokenKind::Identifier),
                ("-".into(), TokenKind::Operator),
                ("5".into(), TokenKind::IntLiteral),
            ]
        );
    }

    #[test]
    fn empty_program_is_an_error() {
        assert_eq!(tokenize(""), Err(LexError::EmptyProgram));
        assert_eq!(tokenize("  \n\t "), Err(LexError::EmptyProgram));
    }

    #[test]
    fn invalid_character_reports_offset() {
        match tokenize("x = 3 @ 4") {
            Err(LexError::InvalidChar { offset, ch }) => {
                assert_eq!(offset, 6);
                assert_eq!(ch, '@');
            }
            other => panic!("expected InvalidChar, got {other:?}"),
        }
    }

    #[test]
    fn field_names_are_classified() {
        let toks = kinds("y = self.count + 1");
        assert_eq!(toks[2], ("self".into(), TokenKind::Keyword));
        assert_eq!(toks[3], (".".into(), TokenKind::Punct));
        assert_eq!(toks[4], ("count".into(), TokenKind::FieldName));
    }

    #[test]
    fn spans_are_ordered_and_disjoint() {
        let toks = tokenize("def f(p):\n    return p + 12\n").unwrap();
        let mut prev_end = 0;
        for t in &toks {
            assert!(t.span.0 >= prev_end, "overlapping spans");
            assert!(t.span.1 > 0);
            prev_end = t.span.0 + t.span.1;
        }
    }

    #[test]
    fn spaced_round_trip() {
        let src = "def f(p):\n    r = p - 5\n    return r + 5\n";
        let toks = tokenize(src).unwrap();
        let again = tokenize(&spaced_text(&toks)).unwrap();
        let texts: Vec<_> = toks.iter().map(|t| &t.text).collect();
        let texts2: Vec<_> = again.iter().map(|t| &t.text).collect();
        assert_eq!(texts, texts2);
    }

    #[test]
    fn string_literals_keep_quotes() {
        let toks = tokenize("print(\"hello\")").unwrap();
        assert_eq!(toks[2].kind, TokenKind::StringLiteral);
        assert_eq!(toks[2].text, "\"hello\"");
        assert_eq!(toks[2].string_content(), "hello");
    }

    #[test]
    fn bare_slash_and_bang_rejected() {
        assert!(matches!(
            tokenize("a / b"),
            Err(LexError::InvalidChar { offset: 2, .. })
        ));
        assert!(matches!(tokenize("!x"), Err(LexError::InvalidChar { .. })));
    }
}
