//! Recognition and masking of the supported JUnit assertion forms.

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::lexer::{SourceToken, TokenKind};
use super::parser::MethodUnit;
use super::JavaError;

/// The seven assertion method names in the order used by prompts.
pub const ASSERTION_METHODS: [&str; 7] = [
    "assertTrue",
    "assertFalse",
    "assertEquals",
    "assertNotEquals",
    "assertNull",
    "assertNotNull",
    "assertThrows",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AssertionKind {
    AssertEquals,
    AssertNotEquals,
    AssertTrue,
    AssertFalse,
    AssertNull,
    AssertNotNull,
    AssertThrows,
    TryCatchFail,
}

impl AssertionKind {
    pub const ALL: [AssertionKind; 8] = [
        AssertionKind::AssertEquals,
        AssertionKind::AssertNotEquals,
        AssertionKind::AssertTrue,
        AssertionKind::AssertFalse,
        AssertionKind::AssertNull,
        AssertionKind::AssertNotNull,
        AssertionKind::AssertThrows,
        AssertionKind::TryCatchFail,
    ];

    /// Argument count of the accepted overload; `None` for the try-catch idiom.
    pub fn parameter_count(self) -> Option<usize> {
        match self {
            AssertionKind::AssertEquals
            | AssertionKind::AssertNotEquals
            | AssertionKind::AssertThrows => Some(2),
            AssertionKind::AssertTrue
            | AssertionKind::AssertFalse
            | AssertionKind::AssertNull
            | AssertionKind::AssertNotNull => Some(1),
            AssertionKind::TryCatchFail => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            AssertionKind::AssertEquals => "assertEquals",
            AssertionKind::AssertNotEquals => "assertNotEquals",
            AssertionKind::AssertTrue => "assertTrue",
            AssertionKind::AssertFalse => "assertFalse",
            AssertionKind::AssertNull => "assertNull",
            AssertionKind::AssertNotNull => "assertNotNull",
            AssertionKind::AssertThrows => "assertThrows",
            AssertionKind::TryCatchFail => "try-catch + fail",
        }
    }
}

impl fmt::Display for AssertionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

pub fn assertion_kind_for_name(name: &str) -> Option<AssertionKind> {
    Some(match name {
        "assertEquals" => AssertionKind::AssertEquals,
        "assertNotEquals" => AssertionKind::AssertNotEquals,
        "assertTrue" => AssertionKind::AssertTrue,
        "assertFalse" => AssertionKind::AssertFalse,
        "assertNull" => AssertionKind::AssertNull,
        "assertNotNull" => AssertionKind::AssertNotNull,
        "assertThrows" => AssertionKind::AssertThrows,
        _ => return None,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssertionSite {
    pub kind: AssertionKind,
    /// Index range into the enclosing method's `body_tokens`.
    pub token_span: Range<usize>,
    pub arg_count: usize,
    pub has_message_param: bool,
}

/// Table parameter-count rule: message-bearing overloads are rejected.
pub fn is_acceptable_assertion(site: &AssertionSite) -> bool {
    match site.kind.parameter_count() {
        Some(n) => site.arg_count == n,
        None => true,
    }
}

/// Assertion statements of `method`, in source order.
pub fn find_assertions(method: &MethodUnit) -> Vec<AssertionSite> {
    find_in_tokens(&method.body_tokens)
}

pub(crate) fn find_in_tokens(toks: &[SourceToken]) -> Vec<AssertionSite> {
    let mut sites = Vec::new();
    let mut i = 0;
    while i < toks.len() {
        if statement_start(toks, i) {
            if let Some(site) = call_site(toks, i).or_else(|| try_fail_site(toks, i)) {
                i = site.token_span.end;
                sites.push(site);
                continue;
            }
        }
        i += 1;
    }
    sites
}

fn statement_start(toks: &[SourceToken], i: usize) -> bool {
    if i == 0 {
        return true;
    }
    let prev = &toks[i - 1];
    prev.is_placeholder()
        || matches!(
            prev.kind,
            TokenKind::Separator | TokenKind::Operator | TokenKind::Keyword
        ) && matches!(
            prev.text.as_str(),
            ";" | "{" | "}" | ")" | "else" | ":" | "->"
        )
}

/// Index of the token matching the opener at `open`, if any.
pub(crate) fn matching_close(toks: &[SourceToken], open: usize) -> Option<usize> {
    let (o, c) = match toks.get(open)?.text.as_str() {
        "(" => ("(", ")"),
        "{" => ("{", "}"),
        "[" => ("[", "]"),
        _ => return None,
    };
    let mut depth = 0usize;
    for (j, t) in toks.iter().enumerate().skip(open) {
        if t.kind != TokenKind::Separator {
            continue;
        }
        if t.text == o {
            depth += 1;
        } else if t.text == c {
            depth -= 1;
            if depth == 0 {
                return Some(j);
            }
        }
    }
    None
}

/// Number of top-level comma-separated arguments inside `(`..`)`.
pub(crate) fn count_args(toks: &[SourceToken], open: usize, close: usize) -> usize {
    if close == open + 1 {
        return 0;
    }
    let mut depth = 0i32;
    let mut count = 1;
    for t in &toks[open + 1..close] {
        match t.text.as_str() {
            "(" | "[" | "{" if t.kind == TokenKind::Separator => depth += 1,
            ")" | "]" | "}" if t.kind == TokenKind::Separator => depth -= 1,
            "," if depth == 0 => count += 1,
            _ => {}
        }
    }
    count
}

/// Skips a qualifier chain ending in `Assert.` / `Assertions.`; returns the
/// index of the method name.
fn qualified_name_at(toks: &[SourceToken], start: usize) -> usize {
    let mut j = start;
    let mut last_qualifier: Option<&str> = None;
    while j + 2 < toks.len()
        && toks[j].kind == TokenKind::Identifier
        && toks[j + 1].is(".")
        && toks[j + 2].kind == TokenKind::Identifier
    {
        last_qualifier = Some(toks[j].text.as_str());
        j += 2;
    }
    match last_qualifier {
        None => start,
        Some("Assert") | Some("Assertions") => j,
        Some(_) => usize::MAX,
    }
}

fn call_site(toks: &[SourceToken], start: usize) -> Option<AssertionSite> {
    let name_idx = qualified_name_at(toks, start);
    let name = toks.get(name_idx)?;
    if name.kind != TokenKind::Identifier {
        return None;
    }
    let kind = assertion_kind_for_name(&name.text)?;
    let open = name_idx + 1;
    if !toks.get(open)?.is("(") {
        return None;
    }
    let close = matching_close(toks, open)?;
    if !toks.get(close + 1)?.is(";") {
        return None;
    }
    let arg_count = count_args(toks, open, close);
    let has_message_param = kind.parameter_count().is_some_and(|n| arg_count > n);
    Some(AssertionSite {
        kind,
        token_span: start..close + 2,
        arg_count,
        has_message_param,
    })
}

fn is_fail_call(toks: &[SourceToken], i: usize) -> bool {
    let name_idx = qualified_name_at(toks, i);
    name_idx != usize::MAX
        && toks.get(name_idx).is_some_and(|t| t.is("fail"))
        && toks.get(name_idx + 1).is_some_and(|t| t.is("("))
}

/// `try [(...)] { ... fail(...); ... } catch (...) { ... } [finally { ... }]`
fn try_fail_site(toks: &[SourceToken], start: usize) -> Option<AssertionSite> {
    let t = &toks[start];
    if !(t.is("try") && t.kind == TokenKind::Keyword) {
        return None;
    }
    let mut j = start + 1;
    if toks.get(j)?.is("(") {
        j = matching_close(toks, j)? + 1;
    }
    if !toks.get(j)?.is("{") {
        return None;
    }
    let try_end = matching_close(toks, j)?;
    let has_fail = (j + 1..try_end).any(|k| statement_start(toks, k) && is_fail_call(toks, k));
    let mut end = try_end + 1;
    let mut catches = 0;
    while toks.get(end).is_some_and(|t| t.is("catch")) {
        let close = matching_close(toks, end + 1)?;
        if !toks.get(close + 1)?.is("{") {
            return None;
        }
        end = matching_close(toks, close + 1)? + 1;
        catches += 1;
    }
    if toks.get(end).is_some_and(|t| t.is("finally")) && toks.get(end + 1)?.is("{") {
        end = matching_close(toks, end + 1)? + 1;
    }
    (has_fail && catches > 0).then_some(AssertionSite {
        kind: AssertionKind::TryCatchFail,
        token_span: start..end,
        arg_count: 0,
        has_message_param: false,
    })
}

/// Replaces the site's span by a single `<ASSERTION>` token.
///
/// Returns `(masked_tokens, truth_tokens)`.
pub fn mask_assertion(
    method: &MethodUnit,
    site: &AssertionSite,
) -> Result<(Vec<SourceToken>, Vec<SourceToken>), JavaError> {
    let body = &method.body_tokens;
    let span = &site.token_span;
    if span.start >= span.end || span.end > body.len() {
        return Err(JavaError::SpanOutOfRange {
            start: span.start,
            end: span.end,
            len: body.len(),
        });
    }
    let mut masked = Vec::with_capacity(body.len() - span.len() + 1);
    masked.extend_from_slice(&body[..span.start]);
    masked.push(SourceToken::placeholder(body[span.start].offset));
    masked.extend_from_slice(&body[span.end..]);
    Ok((masked, body[span.clone()].to_vec()))
}

/// Inverse of [`mask_assertion`]: puts `truth` back over the placeholder.
pub fn splice_truth<T: Clone + AsRef<str>>(masked: &[T], truth: &[T]) -> Option<Vec<T>> {
    let pos = masked
        .iter()
        .position(|t| t.as_ref() == super::lexer::PLACEHOLDER)?;
    let mut out = masked[..pos].to_vec();
    out.extend_from_slice(truth);
    out.extend_from_slice(&masked[pos + 1..]);
    Some(out)
}
