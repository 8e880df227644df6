//! Syntax check for a single assertion statement.
//!
//! Accepts a method-invocation expression statement (the trailing `;` is
//! optional) or a `try` statement with at least one `catch` or a `finally`.
//! Expressions are validated with a small recursive-descent recogniser that
//! covers the Java expression forms that show up in assertions: literals,
//! qualified names, calls, field and array access, object and array creation,
//! anonymous class bodies, casts, lambdas, method references, unary, binary,
//! ternary and `instanceof` expressions. Blocks (lambda bodies, try blocks) are
//! only checked for delimiter balance.

use super::assertions::matching_close;
use super::lexer::{tokenize, SourceToken, TokenKind};

const PRIMITIVES: &[&str] = &[
    "boolean", "byte", "char", "short", "int", "long", "float", "double", "void", "var",
];

const BINARY: &[&str] = &[
    "||", "&&", "|", "^", "&", "==", "!=", "<", ">", "<=", ">=", "<<", ">>", ">>>", "+", "-", "*",
    "/", "%", "=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<=", ">>=", ">>>=",
];

/// True iff `text` lexes and parses as one call statement or try statement.
pub fn check_syntax(text: &str) -> bool {
    match tokenize(text) {
        Ok(toks) => check_syntax_tokens(&toks),
        Err(_) => false,
    }
}

pub fn check_syntax_tokens(toks: &[SourceToken]) -> bool {
    if toks.is_empty() || toks.iter().any(|t| t.kind == TokenKind::Marker) {
        return false;
    }
    let mut p = Recogniser {
        toks,
        pos: 0,
        split_gt: 0,
    };
    if toks[0].is("try") {
        return p.try_statement() && p.pos == toks.len();
    }
    let Some(is_call) = p.expression() else {
        return false;
    };
    if !is_call {
        return false;
    }
    if p.peek_is(";") {
        p.pos += 1;
    }
    p.pos == toks.len()
}

struct Recogniser<'a> {
    toks: &'a [SourceToken],
    pos: usize,
    /// Remaining `>` characters of a partially consumed `>>` / `>>>` token.
    split_gt: u8,
}

type Parsed<T = ()> = Option<T>;

impl Recogniser<'_> {
    fn peek(&self) -> Option<&SourceToken> {
        self.toks.get(self.pos)
    }

    fn peek_at(&self, off: usize) -> Option<&SourceToken> {
        self.toks.get(self.pos + off)
    }

    fn peek_is(&self, text: &str) -> bool {
        self.split_gt == 0 && self.peek().is_some_and(|t| t.is(text))
    }

    fn eat(&mut self, text: &str) -> Parsed {
        if self.peek_is(text) {
            self.pos += 1;
            Some(())
        } else {
            None
        }
    }

    fn ident(&mut self) -> Parsed<()> {
        match self.peek() {
            Some(t) if t.kind == TokenKind::Identifier && self.split_gt == 0 => {
                self.pos += 1;
                Some(())
            }
            _ => None,
        }
    }

    /// Skips a balanced `{ ... }` block.
    fn block(&mut self) -> Parsed {
        if !self.peek_is("{") {
            return None;
        }
        self.pos = matching_close(self.toks, self.pos)? + 1;
        Some(())
    }

    fn try_statement(&mut self) -> bool {
        self.try_inner().is_some()
    }

    fn try_inner(&mut self) -> Parsed {
        self.eat("try")?;
        if self.peek_is("(") {
            self.pos = matching_close(self.toks, self.pos)? + 1;
        }
        self.block()?;
        let mut clauses = 0;
        while self.eat("catch").is_some() {
            self.eat("(")?;
            let _ = self.eat("final");
            self.parse_type()?;
            while self.eat("|").is_some() {
                self.parse_type()?;
            }
            self.ident()?;
            self.eat(")")?;
            self.block()?;
            clauses += 1;
        }
        if self.eat("finally").is_some() {
            self.block()?;
            clauses += 1;
        }
        (clauses > 0).then_some(())
    }

    /// Returns whether the parsed expression is a method invocation.
    fn expression(&mut self) -> Parsed<bool> {
        if self.lambda_ahead() {
            self.lambda()?;
            return Some(false);
        }
        let mut is_call = self.unary()?;
        loop {
            if self.split_gt > 0 {
                return None;
            }
            let Some(t) = self.peek() else { break };
            if t.kind == TokenKind::Operator && BINARY.contains(&t.text.as_str()) {
                self.pos += 1;
                if self.lambda_ahead() {
                    self.lambda()?;
                } else {
                    self.unary()?;
                }
                is_call = false;
            } else if t.is("instanceof") {
                self.pos += 1;
                let _ = self.eat("final");
                self.parse_type()?;
                if self.peek().is_some_and(|t| t.kind == TokenKind::Identifier) {
                    self.pos += 1;
                }
                is_call = false;
            } else if t.is("?") {
                self.pos += 1;
                self.expression()?;
                self.eat(":")?;
                self.expression()?;
                return Some(false);
            } else {
                break;
            }
        }
        Some(is_call)
    }

    fn lambda_ahead(&self) -> bool {
        match self.peek() {
            Some(t) if t.kind == TokenKind::Identifier => {
                self.peek_at(1).is_some_and(|n| n.is("->"))
            }
            Some(t) if t.is("(") => matching_close(self.toks, self.pos)
                .and_then(|c| self.toks.get(c + 1))
                .is_some_and(|n| n.is("->")),
            _ => false,
        }
    }

    fn lambda(&mut self) -> Parsed {
        if self.peek_is("(") {
            self.pos = matching_close(self.toks, self.pos)? + 1;
        } else {
            self.ident()?;
        }
        self.eat("->")?;
        if self.peek_is("{") {
            self.block()
        } else {
            self.expression().map(|_| ())
        }
    }

    fn unary(&mut self) -> Parsed<bool> {
        let t = self.peek()?;
        if t.kind == TokenKind::Operator
            && matches!(t.text.as_str(), "+" | "-" | "!" | "~" | "++" | "--")
        {
            self.pos += 1;
            self.unary()?;
            return Some(false);
        }
        if t.is("(") {
            let save = self.pos;
            if self.cast().is_some() {
                return Some(false);
            }
            self.pos = save;
            self.split_gt = 0;
        }
        self.postfix()
    }

    fn cast(&mut self) -> Parsed {
        self.eat("(")?;
        let primitive = self
            .peek()
            .is_some_and(|t| PRIMITIVES.contains(&t.text.as_str()));
        self.parse_type()?;
        while self.eat("&").is_some() {
            self.parse_type()?;
        }
        self.eat(")")?;
        let next = self.peek()?;
        let operand_start = matches!(
            next.kind,
            TokenKind::Identifier
                | TokenKind::StringLit
                | TokenKind::CharLit
                | TokenKind::IntLit
                | TokenKind::FloatLit
                | TokenKind::BoolLit
                | TokenKind::NullLit
        ) || matches!(
            next.text.as_str(),
            "(" | "!" | "~" | "new" | "this" | "super"
        ) || (primitive
            && matches!(next.text.as_str(), "+" | "-" | "++" | "--"));
        if !operand_start {
            return None;
        }
        if self.lambda_ahead() {
            self.lambda()
        } else {
            self.unary().map(|_| ())
        }
    }

    fn arguments(&mut self) -> Parsed {
        self.eat("(")?;
        if self.eat(")").is_some() {
            return Some(());
        }
        loop {
            self.expression()?;
            if self.eat(",").is_some() {
                continue;
            }
            return self.eat(")");
        }
    }

    fn primary(&mut self) -> Parsed<bool> {
        let t = self.peek()?.clone();
        match t.kind {
            TokenKind::StringLit
            | TokenKind::CharLit
            | TokenKind::IntLit
            | TokenKind::FloatLit
            | TokenKind::BoolLit
            | TokenKind::NullLit => {
                self.pos += 1;
                Some(false)
            }
            TokenKind::Identifier => {
                self.pos += 1;
                if self.peek_is("(") {
                    self.arguments()?;
                    return Some(true);
                }
                Some(false)
            }
            TokenKind::Keyword => match t.text.as_str() {
                "this" | "super" => {
                    self.pos += 1;
                    if self.peek_is("(") {
                        self.arguments()?;
                        return Some(true);
                    }
                    Some(false)
                }
                "new" => {
                    self.creation()?;
                    Some(false)
                }
                p if PRIMITIVES.contains(&p) => {
                    // int.class, int[].class, int[]::new
                    self.parse_type()?;
                    if self.peek_is("::") {
                        return Some(false);
                    }
                    self.eat(".")?;
                    self.eat("class")?;
                    Some(false)
                }
                _ => None,
            },
            TokenKind::Separator if t.is("(") => {
                self.pos += 1;
                self.expression()?;
                self.eat(")")?;
                Some(false)
            }
            _ => None,
        }
    }

    fn creation(&mut self) -> Parsed {
        self.eat("new")?;
        if self.peek_is("<") {
            self.type_arguments()?;
        }
        self.class_type_no_dims()?;
        if self.peek_is("(") {
            self.arguments()?;
            if self.peek_is("{") {
                self.block()?;
            }
            return Some(());
        }
        if !self.peek_is("[") {
            return None;
        }
        let mut sized = false;
        while self.eat("[").is_some() {
            if self.eat("]").is_some() {
                continue;
            }
            self.expression()?;
            self.eat("]")?;
            sized = true;
        }
        if self.peek_is("{") {
            if sized {
                return None;
            }
            self.block()?;
        } else if !sized {
            return None;
        }
        Some(())
    }

    fn postfix(&mut self) -> Parsed<bool> {
        let mut is_call = self.primary()?;
        loop {
            if self.split_gt > 0 {
                return None;
            }
            if self.eat(".").is_some() {
                if self.peek_is("<") {
                    self.type_arguments()?;
                }
                let t = self.peek()?.clone();
                match t.text.as_str() {
                    "class" | "this" => {
                        self.pos += 1;
                        is_call = false;
                    }
                    "new" => {
                        self.creation()?;
                        is_call = false;
                    }
                    _ if t.kind == TokenKind::Identifier || t.is("super") => {
                        self.pos += 1;
                        is_call = if self.peek_is("(") {
                            self.arguments()?;
                            true
                        } else {
                            false
                        };
                    }
                    _ => return None,
                }
            } else if self.peek_is("[") {
                if self.peek_at(1).is_some_and(|t| t.is("]")) {
                    // Type[].class or Type[]::new
                    while self.eat("[").is_some() {
                        self.eat("]")?;
                    }
                    if self.eat(".").is_some() {
                        self.eat("class")?;
                    } else if !self.peek_is("::") {
                        return None;
                    }
                    is_call = false;
                    continue;
                }
                self.pos += 1;
                self.expression()?;
                self.eat("]")?;
                is_call = false;
            } else if self.eat("::").is_some() {
                if self.eat("new").is_none() {
                    self.ident()?;
                }
                is_call = false;
            } else if self.peek_is("++") || self.peek_is("--") {
                self.pos += 1;
                is_call = false;
            } else if self.peek_is("<") && self.generic_type_ahead() {
                // List<String>.class or Foo<Bar>::new
                self.type_arguments()?;
                is_call = false;
            } else {
                break;
            }
        }
        Some(is_call)
    }

    /// Distinguishes `Foo<Bar>::new` from a `<` comparison.
    fn generic_type_ahead(&self) -> bool {
        let mut probe = Recogniser {
            toks: self.toks,
            pos: self.pos,
            split_gt: 0,
        };
        probe.type_arguments().is_some()
            && probe.split_gt == 0
            && (probe.peek_is("::") || probe.peek_is("."))
    }

    fn close_angle(&mut self) -> Parsed {
        if self.split_gt > 0 {
            self.split_gt -= 1;
            if self.split_gt == 0 {
                self.pos += 1;
            }
            return Some(());
        }
        match self.peek()?.text.as_str() {
            ">" => {
                self.pos += 1;
                Some(())
            }
            ">>" => {
                self.split_gt = 1;
                Some(())
            }
            ">>>" => {
                self.split_gt = 2;
                Some(())
            }
            _ => None,
        }
    }

    fn type_arguments(&mut self) -> Parsed {
        self.eat("<")?;
        if self.split_gt == 0 && self.peek().is_some_and(|t| t.text.starts_with('>')) {
            return self.close_angle();
        }
        loop {
            if self.eat("?").is_some() {
                if self.eat("extends").is_some() || self.eat("super").is_some() {
                    self.parse_type()?;
                }
            } else {
                self.parse_type()?;
            }
            if self.split_gt == 0 && self.eat(",").is_some() {
                continue;
            }
            return self.close_angle();
        }
    }

    fn class_type_no_dims(&mut self) -> Parsed {
        let t = self.peek()?;
        if PRIMITIVES.contains(&t.text.as_str()) {
            self.pos += 1;
            return Some(());
        }
        self.ident()?;
        loop {
            if self.peek_is("<") {
                self.type_arguments()?;
            }
            if self.split_gt == 0
                && self.peek_is(".")
                && self
                    .peek_at(1)
                    .is_some_and(|t| t.kind == TokenKind::Identifier)
            {
                self.pos += 2;
                continue;
            }
            return Some(());
        }
    }

    fn parse_type(&mut self) -> Parsed {
        self.class_type_no_dims()?;
        while self.split_gt == 0 && self.peek_is("[") && self.peek_at(1).is_some_and(|t| t.is("]"))
        {
            self.pos += 2;
        }
        if self.peek_is("...") {
            self.pos += 1;
        }
        Some(())
    }
}
