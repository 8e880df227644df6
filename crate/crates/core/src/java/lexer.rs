//! Java lexer.
//!
//! Produces standard Java lexical tokens. Comments are dropped from the token
//! stream; `/** ... */` documentation comments are kept on the side so the
//! structural parser can attach them to declarations.
//!
//! Besides Java itself the lexer recognises the reserved pipeline markers
//! (`<ASSERTION>`, `<SEP>`, `TEST_METHOD:`, `FOCAL_METHOD:`) so that exported
//! token streams can be re-lexed losslessly.

use serde::{Deserialize, Serialize};

use super::JavaError;

pub const PLACEHOLDER: &str = "<ASSERTION>";
pub const SEPARATOR: &str = "<SEP>";
pub const TEST_MARKER: &str = "TEST_METHOD:";
pub const FOCAL_MARKER: &str = "FOCAL_METHOD:";

const KEYWORDS: &[&str] = &[
    "abstract",
    "assert",
    "boolean",
    "break",
    "byte",
    "case",
    "catch",
    "char",
    "class",
    "const",
    "continue",
    "default",
    "do",
    "double",
    "else",
    "enum",
    "extends",
    "final",
    "finally",
    "float",
    "for",
    "goto",
    "if",
    "implements",
    "import",
    "instanceof",
    "int",
    "interface",
    "long",
    "native",
    "new",
    "package",
    "private",
    "protected",
    "public",
    "return",
    "short",
    "static",
    "strictfp",
    "super",
    "switch",
    "synchronized",
    "this",
    "throw",
    "throws",
    "transient",
    "try",
    "void",
    "volatile",
    "while",
    "var",
];

// Longest first so that greedy matching works.
const OPERATORS: &[&str] = &[
    ">>>=", "<<=", ">>=", ">>>", "->", "::", "++", "--", "&&", "||", "==", "!=", "<=", ">=", "+=",
    "-=", "*=", "/=", "&=", "|=", "^=", "%=", "<<", ">>", "=", ">", "<", "!", "~", "?", ":", "+",
    "-", "*", "/", "&", "|", "^", "%",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TokenKind {
    Identifier,
    Keyword,
    StringLit,
    CharLit,
    IntLit,
    FloatLit,
    BoolLit,
    NullLit,
    Operator,
    Separator,
    Annotation,
    /// Reserved pipeline token: placeholder, segment separator or segment marker.
    Marker,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SourceToken {
    pub text: String,
    pub kind: TokenKind,
    /// Byte offset of the lexeme in the source it was lexed from.
    pub offset: usize,
}

impl SourceToken {
    pub fn new(text: impl Into<String>, kind: TokenKind, offset: usize) -> Self {
        Self {
            text: text.into(),
            kind,
            offset,
        }
    }

    pub fn placeholder(offset: usize) -> Self {
        Self::new(PLACEHOLDER, TokenKind::Marker, offset)
    }

    pub fn is(&self, text: &str) -> bool {
        self.text == text
    }

    pub fn is_placeholder(&self) -> bool {
        self.kind == TokenKind::Marker && self.text == PLACEHOLDER
    }

    /// Byte offset one past the end of the lexeme.
    pub fn end(&self) -> usize {
        self.offset + self.text.len()
    }
}

/// A `/** ... */` comment with its byte range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocComment {
    pub start: usize,
    pub end: usize,
    pub text: String,
}

#[derive(Debug, Clone, Default)]
pub struct Lexed {
    pub tokens: Vec<SourceToken>,
    pub docs: Vec<DocComment>,
}

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.contains(&word)
}

/// Lexes `source` into Java tokens, dropping comments.
pub fn tokenize(source: &str) -> Result<Vec<SourceToken>, JavaError> {
    lex(source).map(|l| l.tokens)
}

/// Lexes `source`, also returning documentation comments.
pub fn lex(source: &str) -> Result<Lexed, JavaError> {
    Lexer::new(source).run()
}

/// Token texts joined by single spaces.
pub fn join_tokens<S: AsRef<str>>(tokens: &[S]) -> String {
    let mut out = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(t.as_ref());
    }
    out
}

pub fn texts(tokens: &[SourceToken]) -> Vec<String> {
    tokens.iter().map(|t| t.text.clone()).collect()
}

impl AsRef<str> for SourceToken {
    fn as_ref(&self) -> &str {
        &self.text
    }
}

struct Lexer<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    out: Lexed,
}

fn is_ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_' || c == '$'
}

fn is_ident_part(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '$'
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Self {
            src,
            bytes: src.as_bytes(),
            pos: 0,
            out: Lexed::default(),
        }
    }

    fn peek_char(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn byte_at(&self, i: usize) -> Option<u8> {
        self.bytes.get(i).copied()
    }

    fn push(&mut self, start: usize, kind: TokenKind) {
        let text = &self.src[start..self.pos];
        self.out.tokens.push(SourceToken::new(text, kind, start));
    }

    fn run(mut self) -> Result<Lexed, JavaError> {
        while let Some(c) = self.peek_char() {
            let start = self.pos;
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else if self.src[start..].starts_with("//") {
                let rest = &self.src[start..];
                self.pos += rest.find('\n').unwrap_or(rest.len());
            } else if self.src[start..].starts_with("/*") {
                self.block_comment(start)?;
            } else if c == '"' {
                self.string_literal(start)?;
            } else if c == '\'' {
                self.char_literal(start)?;
            } else if c.is_ascii_digit()
                || (c == '.' && self.byte_at(start + 1).is_some_and(|b| b.is_ascii_digit()))
            {
                self.number(start);
            } else if is_ident_start(c) {
                self.word(start);
            } else if c == '@' {
                self.pos += 1;
                self.push(start, TokenKind::Annotation);
            } else if c == '<' && self.marker(start) {
                // handled
            } else if let Some(sep) = self.separator(start) {
                self.pos += sep;
                self.push(start, TokenKind::Separator);
            } else if let Some(op) = OPERATORS
                .iter()
                .find(|op| self.src[start..].starts_with(**op))
            {
                self.pos += op.len();
                self.push(start, TokenKind::Operator);
            } else {
                // Stray character (e.g. `#` or a backslash outside literals).
                self.pos += c.len_utf8();
                self.push(start, TokenKind::Operator);
            }
        }
        Ok(self.out)
    }

    fn block_comment(&mut self, start: usize) -> Result<(), JavaError> {
        let body = &self.src[start + 2..];
        let close = body
            .find("*/")
            .ok_or(JavaError::UnterminatedComment { offset: start })?;
        self.pos = start + 2 + close + 2;
        let text = &self.src[start..self.pos];
        if text.starts_with("/**") && text != "/**/" {
            self.out.docs.push(DocComment {
                start,
                end: self.pos,
                text: text.to_string(),
            });
        }
        Ok(())
    }

    fn string_literal(&mut self, start: usize) -> Result<(), JavaError> {
        if self.src[start..].starts_with("\"\"\"") {
            let close = self.src[start + 3..]
                .find("\"\"\"")
                .ok_or(JavaError::UnterminatedLiteral { offset: start })?;
            self.pos = start + 3 + close + 3;
            self.push(start, TokenKind::StringLit);
            return Ok(());
        }
        self.quoted(start, b'"')?;
        self.push(start, TokenKind::StringLit);
        Ok(())
    }

    fn char_literal(&mut self, start: usize) -> Result<(), JavaError> {
        self.quoted(start, b'\'')?;
        self.push(start, TokenKind::CharLit);
        Ok(())
    }

    fn quoted(&mut self, start: usize, quote: u8) -> Result<(), JavaError> {
        let mut i = start + 1;
        loop {
            match self.byte_at(i) {
                None | Some(b'\n') => return Err(JavaError::UnterminatedLiteral { offset: start }),
                Some(b'\\') => i += 2,
                Some(b) if b == quote => {
                    self.pos = i + 1;
                    return Ok(());
                }
                Some(_) => i += 1,
            }
        }
    }

    fn number(&mut self, start: usize) {
        let rest = &self.bytes[start..];
        let mut i = 0;
        let mut float = false;
        let hex = rest.len() > 1 && rest[0] == b'0' && matches!(rest[1], b'x' | b'X');
        let bin = rest.len() > 1 && rest[0] == b'0' && matches!(rest[1], b'b' | b'B');
        if hex || bin {
            i = 2;
            while i < rest.len() && (rest[i].is_ascii_hexdigit() || rest[i] == b'_') {
                i += 1;
            }
        } else {
            while i < rest.len() && (rest[i].is_ascii_digit() || rest[i] == b'_') {
                i += 1;
            }
            let fraction = rest.get(i) == Some(&b'.')
                && rest.get(i + 1).is_none_or(|b| {
                    b.is_ascii_digit()
                        || !(b.is_ascii_alphabetic() || matches!(b, b'_' | b'.' | b'$'))
                });
            if fraction {
                float = true;
                i += 1;
                while i < rest.len() && (rest[i].is_ascii_digit() || rest[i] == b'_') {
                    i += 1;
                }
            }
            if i < rest.len() && matches!(rest[i], b'e' | b'E') {
                let mut j = i + 1;
                if j < rest.len() && matches!(rest[j], b'+' | b'-') {
                    j += 1;
                }
                if j < rest.len() && rest[j].is_ascii_digit() {
                    float = true;
                    i = j;
                    while i < rest.len() && rest[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
        }
        if i < rest.len() {
            match rest[i] {
                b'l' | b'L' => i += 1,
                b'f' | b'F' | b'd' | b'D' if !hex => {
                    float = true;
                    i += 1;
                }
                _ => {}
            }
        }
        self.pos = start + i;
        self.push(
            start,
            if float {
                TokenKind::FloatLit
            } else {
                TokenKind::IntLit
            },
        );
    }

    fn word(&mut self, start: usize) {
        let len: usize = self.src[start..]
            .chars()
            .take_while(|c| is_ident_part(*c))
            .map(char::len_utf8)
            .sum();
        self.pos = start + len;
        let word = &self.src[start..self.pos];
        if matches!(word, "TEST_METHOD" | "FOCAL_METHOD")
            && self.byte_at(self.pos) == Some(b':')
            && self.byte_at(self.pos + 1) != Some(b':')
        {
            self.pos += 1;
            self.push(start, TokenKind::Marker);
            return;
        }
        let after_at = self
            .out
            .tokens
            .last()
            .is_some_and(|t| t.kind == TokenKind::Annotation && t.text == "@");
        let kind = match word {
            "true" | "false" => TokenKind::BoolLit,
            "null" => TokenKind::NullLit,
            // `@interface` declares an annotation type.
            "interface" => TokenKind::Keyword,
            _ if after_at => TokenKind::Annotation,
            _ if is_keyword(word) => TokenKind::Keyword,
            _ => TokenKind::Identifier,
        };
        self.push(start, kind);
    }

    fn marker(&mut self, start: usize) -> bool {
        for m in [PLACEHOLDER, SEPARATOR] {
            if self.src[start..].starts_with(m) {
                self.pos = start + m.len();
                self.push(start, TokenKind::Marker);
                return true;
            }
        }
        false
    }

    fn separator(&self, start: usize) -> Option<usize> {
        if self.src[start..].starts_with("...") {
            return Some(3);
        }
        match self.bytes[start] {
            b'(' | b')' | b'{' | b'}' | b'[' | b']' | b';' | b',' | b'.' => Some(1),
            _ => None,
        }
    }
}
