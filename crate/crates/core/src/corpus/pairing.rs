//! Name-based heuristics linking test classes and methods to their focal
//! counterparts.

use std::collections::BTreeSet;

use super::FocalDetection;
use crate::java::{MethodUnit, SourceToken, TokenKind};

/// Removes one leading or trailing `Test` (case-insensitive). Returns `None`
/// when the name carries no such affix or nothing is left.
pub fn strip_test_affix(name: &str) -> Option<&str> {
    let lower = name.to_ascii_lowercase();
    let stripped = if lower.ends_with("test") {
        &name[..name.len() - 4]
    } else if lower.starts_with("test") {
        &name[4..]
    } else {
        return None;
    };
    if stripped.is_empty() {
        None
    } else {
        Some(stripped)
    }
}

/// Index of the unique class in the test's package whose name equals the test
/// class name without its `Test` affix.
///
/// `candidates` holds `(class_name, package)` pairs.
pub fn match_focal_class<S: AsRef<str>>(
    test_class: &str,
    test_package: &str,
    candidates: &[(S, S)],
) -> Option<usize> {
    let target = strip_test_affix(test_class)?;
    let mut hits = candidates
        .iter()
        .enumerate()
        .filter(|(_, (name, pkg))| name.as_ref() == target && pkg.as_ref() == test_package)
        .map(|(i, _)| i);
    let first = hits.next()?;
    hits.next().is_none().then_some(first)
}

fn decapitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_lowercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Names called in `tokens`: identifiers directly followed by `(`. `new T(`
/// counts as a call of `T`, so constructors can be focal methods.
pub fn invoked_method_names(tokens: &[SourceToken]) -> BTreeSet<String> {
    tokens
        .windows(2)
        .filter(|w| w[0].kind == TokenKind::Identifier && w[1].is("("))
        .map(|w| w[0].text.clone())
        .collect()
}

/// Picks the focal method among the methods of the focal class.
///
/// First by name (the test name minus its `test` affix, first letter
/// lowercased, naming exactly one method), then by a single shared name
/// between the methods the test calls and the class's methods.
pub fn match_focal_method(
    test: &MethodUnit,
    focal_class_methods: &[MethodUnit],
) -> (Option<MethodUnit>, FocalDetection) {
    if let Some(stripped) = strip_test_affix(&test.name) {
        let want = decapitalize(stripped);
        let mut hits = focal_class_methods.iter().filter(|m| m.name == want);
        if let (Some(m), None) = (hits.next(), hits.next()) {
            return (Some(m.clone()), FocalDetection::ClassAndNameMatch);
        }
    }
    let called = invoked_method_names(&test.body_tokens);
    let declared: BTreeSet<&str> = focal_class_methods
        .iter()
        .map(|m| m.name.as_str())
        .collect();
    let shared: Vec<&String> = called
        .iter()
        .filter(|n| declared.contains(n.as_str()))
        .collect();
    if let [name] = shared.as_slice() {
        if let Some(m) = focal_class_methods.iter().find(|m| &m.name == *name) {
            return (Some(m.clone()), FocalDetection::CallIntersection);
        }
    }
    (None, FocalDetection::None)
}
