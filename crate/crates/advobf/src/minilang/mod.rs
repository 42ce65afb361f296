//! MiniLang: a Python-like toy language frontend.
//!
//! Lexing, parsing, interpretation, obfuscation-site extraction, transform
//! materialization, and deterministic corpus generation.

pub mod ast;
pub mod gen;
pub mod interp;
pub mod parser;
pub mod sites;
pub mod token;
pub mod transform;
pub mod vocab;

pub use ast::{unparse, BinOpKind, Builtin, Expr, Function, Stmt};
pub use gen::{
    generate_corpus, output_subtokens, read_corpus, standard_vocabulary, write_corpus,
    CorpusEntry, CorpusError, Family, GenConfig,
};
pub use interp::{interpret, InterpError, Value};
pub use parser::{parse, ParseError};
pub use sites::{
    core_model_tokens, encode_with_sites, EncodedProgram, Site, SiteMap, SiteTarget,
    TransformKind, TransformSet,
};
pub use token::{tokenize, LexError, Token, TokenKind};
pub use transform::{materialize, materialize_ast, IllegalSelection, Selection};
pub use vocab::{Vocabulary, VocabError, PLACEHOLDER, UNK};

/// Parse source text straight to a function unit.
pub fn parse_source(source: &str) -> Result<Function, SourceError> {
    let tokens = tokenize(source)?;
    Ok(parse(&tokens)?)
}

/// Lex or parse failure for whole-source entry points.
#[derive(Debug, thiserror::Error)]
pub enum SourceError {
    #[error(transparent)]
    Lex(#[from] LexError),
    #[error(transparent)]
    Parse(#[from] ParseError),
}
