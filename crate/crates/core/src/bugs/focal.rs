//! Focal-method detection for bug-reproducing tests, falling back through
//! progressively weaker heuristics.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::BugError;
use crate::corpus::{match_focal_class, match_focal_method, strip_test_affix};
use crate::java::{assertion_kind_for_name, find_assertions, ClassUnit, MethodUnit, TokenKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FocalStrategy {
    NameMatch,
    SubtokenOverlap,
    LastCall,
    DiffChanged,
    Manual,
}

/// Lowercased camel-case, underscore and letter/digit pieces of `name`.
/// Acronyms stay together: `parseHTTPResponse` gives `parse`, `http`,
/// `response`.
pub fn subtokens(name: &str) -> Vec<String> {
    let chars: Vec<char> = name.chars().collect();
    let mut out = Vec::new();
    let mut cur = String::new();
    for (i, &c) in chars.iter().enumerate() {
        if !c.is_alphanumeric() {
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
            continue;
        }
        if let Some(&p) = cur.chars().last().as_ref() {
            let next_lower = chars.get(i + 1).is_some_and(|n| n.is_lowercase());
            let boundary = (p.is_lowercase() && c.is_uppercase())
                || (p.is_ascii_digit() != c.is_ascii_digit())
                || (p.is_uppercase() && c.is_uppercase() && next_lower);
            if boundary {
                out.push(std::mem::take(&mut cur));
            }
        }
        cur.push(c);
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out.into_iter().map(|s| s.to_lowercase()).collect()
}

fn overlap(a: &BTreeSet<String>, name: &str) -> usize {
    subtokens(name)
        .into_iter()
        .collect::<BTreeSet<_>>()
        .intersection(a)
        .count()
}

/// Constructors are reachable only through the diff and manual strategies.
fn ordinary(classes: &[ClassUnit]) -> impl Iterator<Item = &MethodUnit> {
    classes
        .iter()
        .flat_map(|c| &c.methods)
        .filter(|m| !m.is_constructor)
}

fn by_qualified_name<'a>(classes: &'a [ClassUnit], name: &str) -> Option<&'a MethodUnit> {
    let name = name.trim();
    let ctor = name.strip_suffix(".<init>");
    classes.iter().flat_map(|c| &c.methods).find(|m| {
        m.identity() == name
            || m.qualified_name() == name
            || ctor.is_some_and(|c| m.is_constructor && m.qualified_class() == c)
    })
}

fn last_call_before_assertion<'a>(
    test: &MethodUnit,
    classes: &'a [ClassUnit],
) -> Option<&'a MethodUnit> {
    let body = &test.body_tokens;
    let end = find_assertions(test)
        .first()
        .map_or(body.len(), |s| s.token_span.start);
    (1..end).rev().find_map(|i| {
        let t = &body[i - 1];
        let is_call = t.kind == TokenKind::Identifier
            && body[i].is("(")
            && !(i >= 2 && body[i - 2].is("new"))
            && assertion_kind_for_name(&t.text).is_none();
        if !is_call {
            return None;
        }
        ordinary(classes).find(|m| m.name == t.text)
    })
}

/// Tries, in order: the corpus name/class heuristics, subtoken overlap
/// between test and method names, the last call before the first assertion,
/// the changed methods of the fix, and a manual choice.
///
/// `candidate_classes` are the production classes of the project;
/// `diff_changed_methods` and `manual_override` hold qualified names
/// (`pkg.Class.method`, optionally with a parameter list, or
/// `pkg.Class.<init>` for a constructor).
pub fn detect_focal_extended(
    test: &MethodUnit,
    candidate_classes: &[ClassUnit],
    diff_changed_methods: &[String],
    manual_override: Option<&str>,
) -> Result<(MethodUnit, FocalStrategy), BugError> {
    let names: Vec<(&str, &str)> = candidate_classes
        .iter()
        .map(|c| (c.name.as_str(), c.package.as_str()))
        .collect();
    let focal_class =
        match_focal_class(&test.owner_class, &test.package, &names).map(|i| &candidate_classes[i]);
    if let Some(class) = focal_class {
        if let (Some(m), _) = match_focal_method(test, &class.methods) {
            return Ok((m, FocalStrategy::NameMatch));
        }
    }

    let scope = focal_class.map_or(candidate_classes, std::slice::from_ref);
    let test_name = strip_test_affix(&test.name).unwrap_or(&test.name);
    let wanted: BTreeSet<String> = subtokens(test_name).into_iter().collect();
    let mut best: Option<(&MethodUnit, usize)> = None;
    for m in ordinary(scope) {
        let score = overlap(&wanted, &m.name);
        if score > 0 && best.is_none_or(|(_, b)| score > b) {
            best = Some((m, score));
        }
    }
    if let Some((m, _)) = best {
        return Ok((m.clone(), FocalStrategy::SubtokenOverlap));
    }

    if let Some(m) = last_call_before_assertion(test, candidate_classes) {
        return Ok((m.clone(), FocalStrategy::LastCall));
    }
    if let Some(m) = diff_changed_methods
        .iter()
        .find_map(|n| by_qualified_name(candidate_classes, n))
    {
        return Ok((m.clone(), FocalStrategy::DiffChanged));
    }
    if let Some(m) = manual_override.and_then(|n| by_qualified_name(candidate_classes, n)) {
        return Ok((m.clone(), FocalStrategy::Manual));
    }
    Err(BugError::NoFocalFound(test.qualified_name()))
}
