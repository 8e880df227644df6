//! Lexing and light structural parsing of Java sources.

mod assertions;
mod lexer;
mod parser;
mod syntax;

use thiserror::Error;

pub use assertions::{
    assertion_kind_for_name, find_assertions, is_acceptable_assertion, mask_assertion,
    splice_truth, AssertionKind, AssertionSite, ASSERTION_METHODS,
};
pub use lexer::{
    is_keyword, join_tokens, lex, texts, tokenize, DocComment, Lexed, SourceToken, TokenKind,
    FOCAL_MARKER, PLACEHOLDER, SEPARATOR, TEST_MARKER,
};
pub use parser::{parse_classes, parse_methods, ClassUnit, MethodUnit, Param};
pub use syntax::{check_syntax, check_syntax_tokens};

pub(crate) use assertions::find_in_tokens;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum JavaError {
    #[error("unterminated literal at byte {offset}")]
    UnterminatedLiteral { offset: usize },
    #[error("unterminated comment at byte {offset}")]
    UnterminatedComment { offset: usize },
    #[error("parse failure: {0}")]
    ParseFailure(String),
    #[error("assertion span {start}..{end} exceeds method body of {len} tokens")]
    SpanOutOfRange {
        start: usize,
        end: usize,
        len: usize,
    },
}
