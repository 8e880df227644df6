//! Declaration-pattern parser: recovers classes and method declarations from a
//! token stream using balanced delimiters. Expressions and statements are not
//! parsed here.

use super::lexer::{lex, DocComment, SourceToken, TokenKind};
use super::JavaError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Param {
    pub type_name: String,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MethodUnit {
    pub name: String,
    pub owner_class: String,
    pub package: String,
    pub is_constructor: bool,
    pub params: Vec<Param>,
    /// Body including the enclosing braces.
    pub body_tokens: Vec<SourceToken>,
    /// Annotations, modifiers, type parameters, return type, name, parameter
    /// list and throws clause.
    pub signature_tokens: Vec<SourceToken>,
    pub doc_text: Option<String>,
    /// Byte range `[start, end)` of the declaration in its source file.
    pub source_span: (usize, usize),
    /// Verbatim declaration text.
    pub source: String,
}

impl MethodUnit {
    /// Signature followed by body.
    pub fn tokens(&self) -> Vec<SourceToken> {
        let mut out = self.signature_tokens.clone();
        out.extend(self.body_tokens.iter().cloned());
        out
    }

    pub fn qualified_class(&self) -> String {
        qualify(&self.package, &self.owner_class)
    }

    /// `pkg.Class.method`
    pub fn qualified_name(&self) -> String {
        format!("{}.{}", self.qualified_class(), self.name)
    }

    /// `pkg.Class.method(T1,T2)`, unique among overloads.
    pub fn identity(&self) -> String {
        let types: Vec<&str> = self.params.iter().map(|p| p.type_name.as_str()).collect();
        format!("{}({})", self.qualified_name(), types.join(","))
    }

    pub fn has_annotation(&self, name: &str) -> bool {
        self.signature_tokens
            .windows(2)
            .any(|w| w[0].is("@") && w[1].is(name))
    }
}

pub(crate) fn qualify(package: &str, class: &str) -> String {
    if package.is_empty() {
        class.to_string()
    } else {
        format!("{package}.{class}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassUnit {
    pub name: String,
    pub package: String,
    pub methods: Vec<MethodUnit>,
    /// Class-body tokens outside method bodies: the class header, field
    /// declarations and method signatures.
    pub member_tokens: Vec<SourceToken>,
}

impl ClassUnit {
    pub fn qualified_name(&self) -> String {
        qualify(&self.package, &self.name)
    }
}

/// All method and constructor declarations with a body, in source order.
pub fn parse_methods(source: &str) -> Result<Vec<MethodUnit>, JavaError> {
    let classes = parse_classes(source)?;
    let mut methods: Vec<MethodUnit> = classes.into_iter().flat_map(|c| c.methods).collect();
    methods.sort_by_key(|m| m.source_span.0);
    Ok(methods)
}

/// Named classes (including nested and local ones) in order of their opening
/// brace. Methods of anonymous classes are attributed to the enclosing named
/// class.
pub fn parse_classes(source: &str) -> Result<Vec<ClassUnit>, JavaError> {
    let lexed = lex(source)?;
    Parser::new(source, &lexed.tokens, &lexed.docs)?.run()
}

#[derive(Debug, Clone, Copy)]
enum Scope {
    Class { class: usize, enum_constants: bool },
    Anon { class: usize },
    Method,
    Block,
}

struct Parser<'a> {
    src: &'a str,
    toks: &'a [SourceToken],
    docs: &'a [DocComment],
    matching: Vec<usize>,
    package: String,
    classes: Vec<ClassUnit>,
    scopes: Vec<Scope>,
}

fn balance(toks: &[SourceToken]) -> Result<Vec<usize>, JavaError> {
    let mut matching = vec![usize::MAX; toks.len()];
    let mut stack: Vec<usize> = Vec::new();
    for (i, t) in toks.iter().enumerate() {
        if t.kind != TokenKind::Separator {
            continue;
        }
        match t.text.as_str() {
            "(" | "[" | "{" => stack.push(i),
            ")" | "]" | "}" => {
                let open = stack.pop().ok_or_else(|| {
                    JavaError::ParseFailure(format!("unmatched `{}` at byte {}", t.text, t.offset))
                })?;
                let expected = match t.text.as_str() {
                    ")" => "(",
                    "]" => "[",
                    _ => "{",
                };
                if toks[open].text != expected {
                    return Err(JavaError::ParseFailure(format!(
                        "`{}` at byte {} closes `{}` at byte {}",
                        t.text, t.offset, toks[open].text, toks[open].offset
                    )));
                }
                matching[open] = i;
                matching[i] = open;
            }
            _ => {}
        }
    }
    if let Some(open) = stack.pop() {
        return Err(JavaError::ParseFailure(format!(
            "unclosed `{}` at byte {}",
            toks[open].text, toks[open].offset
        )));
    }
    Ok(matching)
}

/// Joins type tokens without spaces except between two words.
fn compact_join(toks: &[SourceToken]) -> String {
    let mut out = String::new();
    let mut prev_word = false;
    for t in toks {
        let word = matches!(t.kind, TokenKind::Identifier | TokenKind::Keyword);
        if word && prev_word {
            out.push(' ');
        }
        out.push_str(&t.text);
        prev_word = word;
    }
    out
}

/// Index just past an annotation starting at `i` (which must be `@`).
fn skip_annotation(toks: &[SourceToken], matching: &[usize], base: usize, mut i: usize) -> usize {
    i += 1;
    if i < toks.len() && toks[i].is("interface") {
        return i;
    }
    while i < toks.len() && matches!(toks[i].kind, TokenKind::Identifier | TokenKind::Annotation) {
        i += 1;
        if i + 1 < toks.len() && toks[i].is(".") {
            i += 1;
        } else {
            break;
        }
    }
    if i < toks.len() && toks[i].is("(") {
        let close = matching[base + i];
        if close != usize::MAX {
            return close - base + 1;
        }
    }
    i
}

fn is_class_keyword(toks: &[SourceToken], i: usize) -> bool {
    let t = &toks[i];
    let declares = matches!(t.text.as_str(), "class" | "interface" | "enum")
        && t.kind == TokenKind::Keyword
        || (t.is("record") && t.kind == TokenKind::Identifier);
    declares
        && (i == 0 || !toks[i - 1].is("."))
        && toks
            .get(i + 1)
            .is_some_and(|n| n.kind == TokenKind::Identifier)
}

impl<'a> Parser<'a> {
    fn new(
        src: &'a str,
        toks: &'a [SourceToken],
        docs: &'a [DocComment],
    ) -> Result<Self, JavaError> {
        Ok(Self {
            src,
            toks,
            docs,
            matching: balance(toks)?,
            package: String::new(),
            classes: Vec::new(),
            scopes: Vec::new(),
        })
    }

    fn class_body_owner(&self) -> Option<usize> {
        match self.scopes.last() {
            Some(Scope::Class { class, .. }) | Some(Scope::Anon { class }) => Some(*class),
            _ => None,
        }
    }

    fn enclosing_class(&self) -> Option<usize> {
        self.scopes.iter().rev().find_map(|s| match s {
            Scope::Class { class, .. } | Scope::Anon { class } => Some(*class),
            _ => None,
        })
    }

    fn run(mut self) -> Result<Vec<ClassUnit>, JavaError> {
        let toks = self.toks;
        let mut member_start = 0usize;
        let mut pending_class: Option<(String, usize)> = None;
        let mut i = 0usize;
        while i < toks.len() {
            let t = &toks[i];
            let at_class_body = self.class_body_owner().is_some();
            let at_top = self.scopes.is_empty();

            if at_top && t.is("package") && t.kind == TokenKind::Keyword {
                let end = (i..toks.len())
                    .find(|&j| toks[j].is(";"))
                    .unwrap_or(toks.len());
                self.package = compact_join(&toks[i + 1..end]);
                i = end + 1;
                member_start = i;
                continue;
            }
            if at_top && t.is("import") && t.kind == TokenKind::Keyword {
                i = (i..toks.len())
                    .find(|&j| toks[j].is(";"))
                    .unwrap_or(toks.len())
                    + 1;
                member_start = i;
                continue;
            }
            if is_class_keyword(toks, i) && pending_class.is_none() {
                pending_class = Some((toks[i + 1].text.clone(), i));
                i += 2;
                continue;
            }

            match t.text.as_str() {
                ";" if t.kind == TokenKind::Separator => {
                    if let Some(Scope::Class {
                        class,
                        enum_constants,
                    }) = self.scopes.last_mut()
                    {
                        *enum_constants = false;
                        let class = *class;
                        self.classes[class]
                            .member_tokens
                            .extend_from_slice(&toks[member_start..=i]);
                    }
                    if at_class_body || at_top {
                        member_start = i + 1;
                    }
                }
                "{" if t.kind == TokenKind::Separator => {
                    if let Some((name, keyword)) = pending_class.take() {
                        let header_start = if at_class_body || at_top {
                            member_start.min(keyword)
                        } else {
                            keyword
                        };
                        let header = &toks[header_start..=i];
                        let is_enum = toks[keyword].is("enum");
                        let idx = self.classes.len();
                        self.classes.push(ClassUnit {
                            name,
                            package: self.package.clone(),
                            methods: Vec::new(),
                            member_tokens: header.to_vec(),
                        });
                        self.scopes.push(Scope::Class {
                            class: idx,
                            enum_constants: is_enum,
                        });
                        member_start = i + 1;
                    } else if at_top {
                        return Err(JavaError::ParseFailure(format!(
                            "block outside of any class declaration at byte {}",
                            t.offset
                        )));
                    } else if let Some(Scope::Class {
                        enum_constants: true,
                        class,
                    }) = self.scopes.last()
                    {
                        let class = *class;
                        self.scopes.push(Scope::Anon { class });
                        member_start = i + 1;
                    } else if at_class_body && self.method_header(member_start, i) {
                        self.record_method(member_start, i)?;
                        self.scopes.push(Scope::Method);
                    } else if self.anonymous_body(i) {
                        let class = self.enclosing_class().ok_or_else(|| {
                            JavaError::ParseFailure("anonymous class outside a class".into())
                        })?;
                        self.scopes.push(Scope::Anon { class });
                        member_start = i + 1;
                    } else {
                        self.scopes.push(Scope::Block);
                    }
                }
                "}" if t.kind == TokenKind::Separator => {
                    let popped = self.scopes.pop().ok_or_else(|| {
                        JavaError::ParseFailure(format!("stray `}}` at byte {}", t.offset))
                    })?;
                    match popped {
                        Scope::Class { class, .. } => {
                            self.classes[class].member_tokens.push(t.clone());
                            member_start = i + 1;
                        }
                        Scope::Method => member_start = i + 1,
                        Scope::Anon { .. } | Scope::Block => {
                            if self.class_body_owner().is_some()
                                && !toks[member_start..i].iter().any(|h| h.is("="))
                            {
                                // initializer block or enum constant body
                                member_start = i + 1;
                            }
                        }
                    }
                }
                _ => {}
            }
            i += 1;
        }
        if !self.scopes.is_empty() || pending_class.is_some() {
            return Err(JavaError::ParseFailure(
                "class structure could not be recovered".into(),
            ));
        }
        Ok(self.classes)
    }

    /// Header tokens `[start, brace)` with leading annotations removed.
    fn header_without_annotations(&self, start: usize, brace: usize) -> Vec<usize> {
        let header = &self.toks[start..brace];
        let mut idx = Vec::new();
        let mut j = 0;
        while j < header.len() {
            if header[j].is("@") && header[j].kind == TokenKind::Annotation {
                j = skip_annotation(header, &self.matching, start, j);
            } else {
                idx.push(start + j);
                j += 1;
            }
        }
        idx
    }

    fn method_header(&self, start: usize, brace: usize) -> bool {
        let idx = self.header_without_annotations(start, brace);
        let Some(pos) = idx.iter().position(|&k| self.toks[k].is("(")) else {
            return false;
        };
        if pos == 0 {
            return false;
        }
        let open = idx[pos];
        let name = &self.toks[idx[pos - 1]];
        let before = &idx[..pos];
        name.kind == TokenKind::Identifier
            && !before
                .iter()
                .any(|&k| self.toks[k].is("=") || self.toks[k].is("new"))
            && self.matching[open] < brace
    }

    /// `new Type<...>(...) {`
    fn anonymous_body(&self, brace: usize) -> bool {
        if brace == 0 || !self.toks[brace - 1].is(")") {
            return false;
        }
        let open = self.matching[brace - 1];
        let mut j = open;
        // skip generic arguments and the qualified type name backwards
        let mut depth = 0i32;
        while j > 0 {
            j -= 1;
            let t = &self.toks[j];
            match t.text.as_str() {
                ">" => depth += 1,
                ">>" => depth += 2,
                ">>>" => depth += 3,
                "<" => depth -= 1,
                _ if depth > 0 => {}
                "." => {}
                _ if t.kind == TokenKind::Identifier => {}
                "new" => return true,
                _ => return false,
            }
        }
        false
    }

    fn record_method(&mut self, start: usize, brace: usize) -> Result<(), JavaError> {
        let toks = self.toks;
        let idx = self.header_without_annotations(start, brace);
        let pos = idx
            .iter()
            .position(|&k| toks[k].is("("))
            .expect("checked by method_header");
        let open = idx[pos];
        let name = toks[idx[pos - 1]].text.clone();
        let close = self.matching[open];
        let body_end = self.matching[brace];
        let owner = self
            .enclosing_class()
            .ok_or_else(|| JavaError::ParseFailure("method outside class".into()))?;
        let owner_name = self.classes[owner].name.clone();
        let span = (toks[start].offset, toks[body_end].end());
        let boundary = if start == 0 { 0 } else { toks[start - 1].end() };
        let doc_text = self
            .docs
            .iter()
            .rev()
            .find(|d| d.start >= boundary && d.end <= span.0)
            .map(|d| d.text.clone());
        let unit = MethodUnit {
            is_constructor: name == owner_name,
            name,
            owner_class: owner_name,
            package: self.package.clone(),
            params: parse_params(&toks[open + 1..close]),
            body_tokens: toks[brace..=body_end].to_vec(),
            signature_tokens: toks[start..brace].to_vec(),
            doc_text,
            source_span: span,
            source: self.src[span.0..span.1].to_string(),
        };
        let class = &mut self.classes[owner];
        if matches!(self.scopes.last(), Some(Scope::Class { .. })) {
            class.member_tokens.extend_from_slice(&toks[start..brace]);
        }
        class.methods.push(unit);
        Ok(())
    }
}

fn parse_params(toks: &[SourceToken]) -> Vec<Param> {
    let mut params = Vec::new();
    let mut depth = 0i32;
    let mut current: Vec<SourceToken> = Vec::new();
    let mut flush = |current: &mut Vec<SourceToken>| {
        let kept: Vec<SourceToken> = {
            let mut out = Vec::new();
            let mut j = 0;
            while j < current.len() {
                if current[j].is("@") {
                    j += 2;
                    if j < current.len() && current[j].is("(") {
                        let mut d = 0;
                        while j < current.len() {
                            if current[j].is("(") {
                                d += 1;
                            } else if current[j].is(")") {
                                d -= 1;
                                if d == 0 {
                                    j += 1;
                                    break;
                                }
                            }
                            j += 1;
                        }
                    }
                } else if current[j].is("final") {
                    j += 1;
                } else {
                    out.push(current[j].clone());
                    j += 1;
                }
            }
            out
        };
        if let Some((last, ty)) = kept.split_last() {
            params.push(Param {
                type_name: compact_join(ty),
                name: last.text.clone(),
            });
        }
        current.clear();
    };
    for t in toks {
        match t.text.as_str() {
            "(" | "<" | "[" => depth += 1,
            ")" | ">" | "]" => depth -= 1,
            ">>" => depth -= 2,
            ">>>" => depth -= 3,
            "," if depth == 0 => {
                flush(&mut current);
                continue;
            }
            _ => {}
        }
        current.push(t.clone());
    }
    flush(&mut current);
    params
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_method() {
        let src = "package p;\nclass Last {\n  char last(String s) {\n    return s[s.length-1];\n  }\n}\n";
        let methods = parse_methods(src).unwrap();
        assert_eq!(methods.len(), 1);
        let m = &methods[0];
        assert_eq!(m.name, "last");
        assert_eq!(m.owner_class, "Last");
        assert_eq!(m.package, "p");
        assert!(!m.is_constructor);
        assert_eq!(
            m.params,
            vec![Param {
                type_name: "String".into(),
                name: "s".into()
            }]
        );
        assert_eq!(m.body_tokens.first().unwrap().text, "{");
        assert_eq!(m.body_tokens.last().unwrap().text, "}");
        assert!(m.source.starts_with("char last"));
        assert!(m.source.ends_with('}'));
        assert_eq!(m.qualified_name(), "p.Last.last");
        assert_eq!(m.identity(), "p.Last.last(String)");
    }

    #[test]
    fn constructor_detected() {
        let methods = parse_methods("class Last { Last(int x){} }").unwrap();
        assert_eq!(methods.len(), 1);
        assert!(methods[0].is_constructor);
    }

    #[test]
    fn unbalanced_brace_fails() {
        assert!(matches!(
            parse_methods("class A { void f() { }"),
            Err(JavaError::ParseFailure(_))
        ));
    }

    #[test]
    fn annotations_docs_and_generics() {
        let src = r#"
package a.b;
import java.util.*;
/** Class doc. */
public class FooTest {
    private final Map<String, List<Integer>> cache = new HashMap<>();
    /** Checks foo. */
    @Test(expected = IllegalStateException.class)
    public void testFoo() throws Exception {
        Runnable r = new Runnable() {
            @Override public void run() { foo(); }
        };
    }
    @SuppressWarnings("unchecked")
    <T extends Comparable<T>> T max(final List<T> xs, int... rest) { return xs.get(0); }
    static { init(); }
    int[] arr = {1, 2};
    class Inner { void innerMethod() {} }
}
"#;
        let classes = parse_classes(src).unwrap();
        let names: Vec<_> = classes.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, ["FooTest", "Inner"]);
        let foo = &classes[0];
        let mnames: Vec<_> = foo.methods.iter().map(|m| m.name.as_str()).collect();
        assert_eq!(mnames, ["testFoo", "run", "max"]);
        let test = &foo.methods[0];
        assert_eq!(test.doc_text.as_deref(), Some("/** Checks foo. */"));
        assert!(test.has_annotation("Test"));
        assert_eq!(test.package, "a.b");
        let run = &foo.methods[1];
        assert_eq!(run.owner_class, "FooTest");
        assert!(run.doc_text.is_none());
        let max = &foo.methods[2];
        assert_eq!(max.params.len(), 2);
        assert_eq!(max.params[0].type_name, "List<T>");
        assert_eq!(max.params[1].type_name, "int...");
        assert_eq!(classes[1].methods[0].name, "innerMethod");
        assert_eq!(classes[1].methods[0].owner_class, "Inner");
        let member_text: Vec<_> = foo.member_tokens.iter().map(|t| t.text.as_str()).collect();
        assert!(member_text.contains(&"cache"));
        assert!(member_text.contains(&"testFoo"));
        assert!(!member_text.contains(&"foo"));
    }

    #[test]
    fn enum_constants_with_bodies() {
        let src = "enum Op { PLUS(1) { int apply() { return 1; } }, MINUS(2); Op(int x) {} int code() { return 0; } }";
        let classes = parse_classes(src).unwrap();
        let names: Vec<_> = classes[0].methods.iter().map(|m| m.name.as_str()).collect();
        assert_eq!(names, ["apply", "Op", "code"]);
        assert!(classes[0].methods[1].is_constructor);
    }

    #[test]
    fn interface_and_abstract_declarations() {
        let src = "interface Shape { double area(); default String name() { return \"s\"; } }";
        let methods = parse_methods(src).unwrap();
        assert_eq!(methods.len(), 1);
        assert_eq!(methods[0].name, "name");
    }

    #[test]
    fn class_literal_is_not_a_declaration() {
        let src = "class A { void f() { Object o = A.class; g(); } }";
        let methods = parse_methods(src).unwrap();
        assert_eq!(methods.len(), 1);
    }

    #[test]
    fn top_level_block_is_failure() {
        assert!(parse_methods("void f() { }").is_err());
    }
}
