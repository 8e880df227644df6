//! Per-sample identifier and literal abstraction.
//!
//! Every identifier, method name, literal, assertion method name and
//! user-defined type name in a test/focal pair is replaced by an indexed
//! category token such as `IDENT_0` or `METHOD_2`. Indices are dense per
//! category and assigned in first-occurrence order, scanning the focal method
//! first, then the test method, then (optionally) the class context. The
//! emitted stream is laid out as `TEST_METHOD: <test> FOCAL_METHOD: <focal>`.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::java::{
    assertion_kind_for_name, SourceToken, TokenKind, FOCAL_MARKER, PLACEHOLDER, TEST_MARKER,
};

/// JDK and JUnit type names that stay concrete.
const LIBRARY_TYPES: &[&str] = &[
    "ArithmeticException",
    "ArrayIndexOutOfBoundsException",
    "ArrayList",
    "Arrays",
    "Assert",
    "AssertionError",
    "Assertions",
    "BigDecimal",
    "BigInteger",
    "BiFunction",
    "Boolean",
    "Byte",
    "Callable",
    "CharSequence",
    "Character",
    "Charset",
    "Class",
    "ClassCastException",
    "Collection",
    "Collections",
    "Collectors",
    "Comparable",
    "Comparator",
    "Consumer",
    "Date",
    "Double",
    "Duration",
    "Enum",
    "Error",
    "Exception",
    "File",
    "Files",
    "Float",
    "Function",
    "HashMap",
    "HashSet",
    "IOException",
    "IllegalArgumentException",
    "IllegalStateException",
    "IndexOutOfBoundsException",
    "InputStream",
    "Instant",
    "Integer",
    "Iterable",
    "Iterator",
    "LinkedHashMap",
    "LinkedHashSet",
    "LinkedList",
    "List",
    "LocalDate",
    "LocalDateTime",
    "Locale",
    "Long",
    "Map",
    "Math",
    "Matcher",
    "NullPointerException",
    "Number",
    "NumberFormatException",
    "Object",
    "Objects",
    "Optional",
    "OutputStream",
    "Override",
    "Path",
    "Paths",
    "Pattern",
    "Predicate",
    "Random",
    "Reader",
    "Runnable",
    "RuntimeException",
    "Set",
    "Short",
    "StandardCharsets",
    "Stream",
    "String",
    "StringBuffer",
    "StringBuilder",
    "Supplier",
    "System",
    "Test",
    "Thread",
    "Throwable",
    "TimeUnit",
    "TreeMap",
    "TreeSet",
    "UUID",
    "UnsupportedOperationException",
    "Void",
    "Writer",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Category {
    Ident,
    Method,
    String,
    Char,
    Int,
    Float,
    Bool,
    Assert,
    Type,
}

impl Category {
    pub const ALL: [Category; 9] = [
        Category::Ident,
        Category::Method,
        Category::String,
        Category::Char,
        Category::Int,
        Category::Float,
        Category::Bool,
        Category::Assert,
        Category::Type,
    ];

    pub fn prefix(self) -> &'static str {
        match self {
            Category::Ident => "IDENT",
            Category::Method => "METHOD",
            Category::String => "STRING",
            Category::Char => "CHAR",
            Category::Int => "INT",
            Category::Float => "FLOAT",
            Category::Bool => "BOOL",
            Category::Assert => "ASSERT",
            Category::Type => "TYPE",
        }
    }

    fn slot(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.prefix())
    }
}

/// Parses `IDENT_3` into `(Ident, 3)`.
pub fn parse_abstract_token(token: &str) -> Option<(Category, usize)> {
    let (prefix, index) = token.rsplit_once('_')?;
    if index.is_empty() || !index.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    if index.len() > 1 && index.starts_with('0') {
        return None;
    }
    let category = Category::ALL.into_iter().find(|c| c.prefix() == prefix)?;
    Some((category, index.parse().ok()?))
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AbstractionError {
    #[error("token stream must contain exactly one {PLACEHOLDER} placeholder, found {0}")]
    MissingPlaceholder(usize),
    #[error("abstract tokens without a dictionary binding: {}", .0.join(", "))]
    UnknownAbstractToken(Vec<String>),
    #[error("malformed dictionary: {0}")]
    MalformedDictionary(String),
}

/// Bidirectional map between abstract tokens and concrete lexemes for one
/// sample. Serialised as an ordered list of `(abstract, concrete)` pairs.
#[derive(Debug, Clone, Default)]
pub struct AbstractionDictionary {
    entries: Vec<(String, String)>,
    by_lexeme: HashMap<(Category, String), usize>,
    by_abstract: HashMap<String, usize>,
    counters: [usize; 9],
}

impl PartialEq for AbstractionDictionary {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries
    }
}

impl Eq for AbstractionDictionary {}

impl AbstractionDictionary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Rebuilds a dictionary, checking density, ordering and bijectivity.
    pub fn from_entries(entries: Vec<(String, String)>) -> Result<Self, AbstractionError> {
        let mut dict = Self::new();
        for (abs, concrete) in entries {
            let (category, index) = parse_abstract_token(&abs).ok_or_else(|| {
                AbstractionError::MalformedDictionary(format!("`{abs}` is not an abstract token"))
            })?;
            if index != dict.counters[category.slot()] {
                return Err(AbstractionError::MalformedDictionary(format!(
                    "`{abs}` breaks dense first-occurrence indexing"
                )));
            }
            if dict.by_lexeme.contains_key(&(category, concrete.clone())) {
                return Err(AbstractionError::MalformedDictionary(format!(
                    "lexeme `{concrete}` bound twice in {category}"
                )));
            }
            dict.insert(category, concrete);
        }
        Ok(dict)
    }

    fn insert(&mut self, category: Category, lexeme: String) -> String {
        let index = self.counters[category.slot()];
        self.counters[category.slot()] += 1;
        let abs = format!("{}_{index}", category.prefix());
        let pos = self.entries.len();
        self.by_lexeme.insert((category, lexeme.clone()), pos);
        self.by_abstract.insert(abs.clone(), pos);
        self.entries.push((abs.clone(), lexeme));
        abs
    }

    /// Abstract token for `(category, lexeme)`, allocating the next index when
    /// the pair is new.
    pub fn intern(&mut self, category: Category, lexeme: &str) -> String {
        match self.by_lexeme.get(&(category, lexeme.to_string())) {
            Some(&pos) => self.entries[pos].0.clone(),
            None => self.insert(category, lexeme.to_string()),
        }
    }

    pub fn concrete(&self, abstract_token: &str) -> Option<&str> {
        self.by_abstract
            .get(abstract_token)
            .map(|&pos| self.entries[pos].1.as_str())
    }

    pub fn abstract_of(&self, category: Category, lexeme: &str) -> Option<&str> {
        self.by_lexeme
            .get(&(category, lexeme.to_string()))
            .map(|&pos| self.entries[pos].0.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn count(&self, category: Category) -> usize {
        self.counters[category.slot()]
    }
}

impl Serialize for AbstractionDictionary {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.entries.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for AbstractionDictionary {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let entries = Vec::<(String, String)>::deserialize(deserializer)?;
        Self::from_entries(entries).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AbstractionConfig {
    pub max_input_tokens: usize,
    pub max_output_tokens: usize,
    pub include_class_context: bool,
}

impl Default for AbstractionConfig {
    fn default() -> Self {
        Self {
            max_input_tokens: 386,
            max_output_tokens: 64,
            include_class_context: true,
        }
    }
}

impl AbstractionConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_input_tokens <= 1 {
            return Err("max_input_tokens must be greater than 1".into());
        }
        if self.max_output_tokens < 1 {
            return Err("max_output_tokens must be at least 1".into());
        }
        Ok(())
    }
}

/// Type names declared by `class`/`interface`/`enum`/`record` in `tokens`.
pub fn declared_types(tokens: &[SourceToken]) -> HashSet<String> {
    tokens
        .windows(2)
        .filter(|w| {
            matches!(
                w[0].text.as_str(),
                "class" | "interface" | "enum" | "record"
            ) && w[1].kind == TokenKind::Identifier
        })
        .map(|w| w[1].text.clone())
        .collect()
}

struct Abstractor<'a> {
    dict: AbstractionDictionary,
    user_types: &'a HashSet<String>,
}

impl Abstractor<'_> {
    fn category(&self, toks: &[SourceToken], i: usize) -> Option<Category> {
        let t = &toks[i];
        let next_is = |s: &str| toks.get(i + 1).is_some_and(|n| n.is(s));
        let prev_is = |s: &str| i > 0 && toks[i - 1].is(s);
        match t.kind {
            TokenKind::StringLit => Some(Category::String),
            TokenKind::CharLit => Some(Category::Char),
            TokenKind::IntLit => Some(Category::Int),
            TokenKind::FloatLit => Some(Category::Float),
            TokenKind::BoolLit => Some(Category::Bool),
            TokenKind::Identifier => {
                if next_is("(") && assertion_kind_for_name(&t.text).is_some() {
                    Some(Category::Assert)
                } else if self.user_types.contains(&t.text) {
                    Some(Category::Type)
                } else if LIBRARY_TYPES.contains(&t.text.as_str()) {
                    None
                } else if next_is("(") || prev_is(".") || prev_is("::") {
                    Some(Category::Method)
                } else {
                    Some(Category::Ident)
                }
            }
            _ => None,
        }
    }

    fn rewrite(&mut self, toks: &[SourceToken]) -> Vec<String> {
        (0..toks.len())
            .map(|i| match self.category(toks, i) {
                Some(c) => self.dict.intern(c, &toks[i].text),
                None => toks[i].text.clone(),
            })
            .collect()
    }

    fn register(&mut self, toks: &[SourceToken]) {
        for i in 0..toks.len() {
            if let Some(c) = self.category(toks, i) {
                self.dict.intern(c, &toks[i].text);
            }
        }
    }
}

fn placeholder_count<T: AsRef<str>>(tokens: &[T]) -> usize {
    tokens.iter().filter(|t| t.as_ref() == PLACEHOLDER).count()
}

/// Abstracts a masked test (and optional focal method) into the model-input
/// layout, returning the abstract stream and the sample dictionary.
///
/// Class-context tokens only extend the dictionary; they never appear in the
/// output stream.
pub fn abstract_sequence(
    test_tokens: &[SourceToken],
    focal_tokens: Option<&[SourceToken]>,
    class_context: Option<&[SourceToken]>,
    config: &AbstractionConfig,
) -> Result<(Vec<String>, AbstractionDictionary), AbstractionError> {
    let found = placeholder_count(test_tokens);
    if found != 1 {
        return Err(AbstractionError::MissingPlaceholder(found));
    }
    let context = class_context.filter(|_| config.include_class_context);
    let user_types = context.map(declared_types).unwrap_or_default();
    let mut abstractor = Abstractor {
        dict: AbstractionDictionary::new(),
        user_types: &user_types,
    };
    let focal_out = focal_tokens.map(|f| abstractor.rewrite(f));
    let test_out = abstractor.rewrite(test_tokens);
    if let Some(ctx) = context {
        abstractor.register(ctx);
    }
    let mut out = Vec::with_capacity(test_out.len() + focal_out.as_ref().map_or(0, Vec::len) + 2);
    out.push(TEST_MARKER.to_string());
    out.extend(test_out);
    if let Some(f) = focal_out {
        out.push(FOCAL_MARKER.to_string());
        out.extend(f);
    }
    Ok((out, abstractor.dict))
}

/// Concrete counterpart of the [`abstract_sequence`] layout.
pub fn concrete_layout<T: AsRef<str>>(
    test_tokens: &[T],
    focal_tokens: Option<&[T]>,
) -> Vec<String> {
    let mut out = vec![TEST_MARKER.to_string()];
    out.extend(test_tokens.iter().map(|t| t.as_ref().to_string()));
    if let Some(f) = focal_tokens {
        out.push(FOCAL_MARKER.to_string());
        out.extend(f.iter().map(|t| t.as_ref().to_string()));
    }
    out
}

/// Abstracts a ground-truth assertion with the sample's dictionary, adding
/// entries for lexemes not seen in the input.
///
/// User-defined types are those the dictionary already binds as `TYPE_k`.
pub fn abstract_truth(
    truth_tokens: &[SourceToken],
    dict: &mut AbstractionDictionary,
) -> Vec<String> {
    let user_types: HashSet<String> = dict
        .entries()
        .iter()
        .filter(|(abs, _)| abs.starts_with("TYPE_"))
        .map(|(_, c)| c.clone())
        .collect();
    let mut abstractor = Abstractor {
        dict: std::mem::take(dict),
        user_types: &user_types,
    };
    let out = abstractor.rewrite(truth_tokens);
    *dict = abstractor.dict;
    out
}

/// Maps abstract tokens back to their lexemes. Tokens that look abstract but
/// have no binding are collected into the error.
pub fn deabstract<T: AsRef<str>>(
    tokens: &[T],
    dict: &AbstractionDictionary,
) -> Result<Vec<String>, AbstractionError> {
    let mut unknown = Vec::new();
    let out: Vec<String> = tokens
        .iter()
        .map(|t| {
            let t = t.as_ref();
            match dict.concrete(t) {
                Some(c) => c.to_string(),
                None => {
                    if parse_abstract_token(t).is_some() {
                        unknown.push(t.to_string());
                    }
                    t.to_string()
                }
            }
        })
        .collect();
    if unknown.is_empty() {
        Ok(out)
    } else {
        Err(AbstractionError::UnknownAbstractToken(unknown))
    }
}

/// Cuts a model input to `max_input_tokens`, always keeping the placeholder.
///
/// A placeholder inside the kept prefix stays in place; one beyond the cut is
/// appended as the final token after a prefix of `max_input_tokens - 1`.
pub fn truncate_input<T: Clone + AsRef<str>>(
    tokens: &[T],
    config: &AbstractionConfig,
) -> Result<Vec<T>, AbstractionError> {
    let found = placeholder_count(tokens);
    if found != 1 {
        return Err(AbstractionError::MissingPlaceholder(found));
    }
    let budget = config.max_input_tokens;
    if tokens.len() <= budget {
        return Ok(tokens.to_vec());
    }
    let pos = tokens
        .iter()
        .position(|t| t.as_ref() == PLACEHOLDER)
        .expect("counted above");
    if pos < budget {
        return Ok(tokens[..budget].to_vec());
    }
    let mut out = tokens[..budget - 1].to_vec();
    out.push(tokens[pos].clone());
    Ok(out)
}
