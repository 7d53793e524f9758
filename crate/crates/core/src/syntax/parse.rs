//! Recursive-descent parser for `.sdpl` sources.
//!
//! ```text
//! program  := ("param" IDENT ":" type ";"?)* expr
//! expr     := "let" binding ("," binding)* "in" expr
//!           | "letrec" IDENT "(" IDENT ":" type ")" ":" type "=" expr "in" expr
//!           | "if" bexpr "then" expr "else" expr
//!           | "while" bexpr "do" expr
//!           | sum
//! binding  := IDENT ":" type "=" expr | pattern "=" expr
//! pattern  := "(" (IDENT ":" type | pattern) ("," ...)+ ")"
//! sum      := postfix ("+" (postfix | expr))*
//! postfix  := primary (".rd(" IDENT ":" type "." expr ")(" expr ")")*
//! primary  := IDENT | IDENT "(" expr ("," expr)* ")" | NUMBER | "-" NUMBER | "*"
//!           | "(" expr ("," expr)* ")" | "fst(" expr ")" | "snd(" expr ")"
//!           | "fd(" IDENT ":" type "." expr ")(" expr ")." primary
//! bexpr    := "true" | "false" | IDENT "(" expr ("," expr)* ")"
//! type     := tyatom ("*" tyatom)*
//! tyatom   := "real" ("^" NUMBER)? | "1" | "unit" | "(" type ")"
//! ```
//! Comments run from `//` to the end of the line.

use std::fmt;

use thiserror::Error;

use super::{sugar, BoolTerm, NameSupply, Signature, Term, Ty};
use crate::typing::{typecheck, Context, FunContext};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax,
    UnknownName,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub kind: ParseErrorKind,
    pub message: String,
}

/// A source file: declared inputs and the program body.
#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub params: Context,
    pub body: Term,
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (x, ty) in self.params.iter() {
            writeln!(f, "param {x}:{ty};")?;
        }
        write!(f, "{}", self.body)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    Punct(char),
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

const KEYWORDS: &[&str] = &[
    "let", "in", "letrec", "if", "then", "else", "while", "do", "true", "false", "fst", "snd",
    "fd", "param", "real", "unit",
];

fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    let err = |line, col, message: String| ParseError { line, col, kind: ParseErrorKind::Syntax, message };
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        let (tline, tcol) = (line, col);
        let tok = if c.is_ascii_alphabetic() || c == '_' {
            while i < chars.len()
                && (chars[i].is_ascii_alphanumeric() || matches!(chars[i], '_' | '\'' | '#'))
            {
                i += 1;
            }
            Tok::Ident(chars[start..i].iter().collect())
        } else if c.is_ascii_digit() {
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text: String = chars[start..i].iter().collect();
            let value = text
                .parse::<f64>()
                .map_err(|_| err(tline, tcol, format!("malformed number `{text}`")))?;
            Tok::Num(value)
        } else if "(),:.+-*=^;".contains(c) {
            i += 1;
            Tok::Punct(c)
        } else {
            return Err(err(tline, tcol, format!("unexpected character `{c}`")));
        };
        col += i - start;
        out.push(Token { tok, line: tline, col: tcol });
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}

enum Pattern {
    Var(String, Ty),
    Pair(Box<Pattern>, Box<Pattern>),
}

impl Pattern {
    fn ty(&self) -> Ty {
        match self {
            Pattern::Var(_, ty) => ty.clone(),
            Pattern::Pair(a, b) => Ty::prod(a.ty(), b.ty()),
        }
    }
}

struct Parser<'s> {
    toks: Vec<Token>,
    pos: usize,
    sig: &'s Signature,
    scope: Vec<(String, Option<Ty>)>,
    funs: Vec<(String, Ty, Ty)>,
    supply: NameSupply,
}

/// Parses a program with `param` declarations.
pub fn parse_program(src: &str, sig: &Signature) -> Result<Program, ParseError> {
    let mut p = Parser::new(src, sig)?;
    let mut params = Context::new();
    while p.peek_kw("param") {
        p.bump();
        let name = p.ident()?;
        p.expect(':')?;
        let ty = p.ty()?;
        if p.peek_punct(';') {
            p.bump();
        }
        p.scope.push((name.clone(), Some(ty.clone())));
        params.push(name, ty);
    }
    let body = p.expr()?;
    p.expect_eof()?;
    Ok(Program { params, body })
}

/// Parses a bare term; free variables are allowed and untyped.
pub fn parse_term(src: &str, sig: &Signature) -> Result<Term, ParseError> {
    let mut p = Parser::new(src, sig)?;
    let t = p.expr()?;
    p.expect_eof()?;
    Ok(t)
}

impl<'s> Parser<'s> {
    fn new(src: &str, sig: &'s Signature) -> Result<Self, ParseError> {
        let toks = lex(src)?;
        let mut max = 0;
        for t in &toks {
            if let Tok::Ident(s) = &t.tok {
                if let Some((_, k)) = s.rsplit_once('#') {
                    if let Ok(k) = k.parse::<u64>() {
                        max = max.max(k + 1);
                    }
                }
            }
        }
        Ok(Parser { toks, pos: 0, sig, scope: Vec::new(), funs: Vec::new(), supply: NameSupply::seeded(max) })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, kind: ParseErrorKind, message: impl Into<String>) -> ParseError {
        let t = &self.toks[self.pos];
        ParseError { line: t.line, col: t.col, kind, message: message.into() }
    }

    fn syntax(&self, message: impl Into<String>) -> ParseError {
        self.error(ParseErrorKind::Syntax, message)
    }

    fn describe(&self) -> String {
        match self.peek() {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Num(r) => format!("number {r}"),
            Tok::Punct(c) => format!("`{c}`"),
            Tok::Eof => "end of input".into(),
        }
    }

    fn peek_punct(&self, c: char) -> bool {
        self.peek() == &Tok::Punct(c)
    }

    fn peek_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        if self.peek_punct(c) {
            self.bump();
            Ok(())
        } else {
            Err(self.syntax(format!("expected `{c}`, found {}", self.describe())))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.peek_kw(kw) {
            self.bump();
            Ok(())
        } else {
            Err(self.syntax(format!("expected `{kw}`, found {}", self.describe())))
        }
    }

    fn expect_eof(&self) -> Result<(), ParseError> {
        if *self.peek() == Tok::Eof {
            Ok(())
        } else {
            Err(self.syntax(format!("unexpected {} after end of expression", self.describe())))
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.bump();
                Ok(s)
            }
            _ => Err(self.syntax(format!("expected identifier, found {}", self.describe()))),
        }
    }

    fn ty(&mut self) -> Result<Ty, ParseError> {
        let mut t = self.ty_atom()?;
        while self.peek_punct('*') {
            self.bump();
            let rhs = self.ty_atom()?;
            t = Ty::prod(t, rhs);
        }
        Ok(t)
    }

    fn ty_atom(&mut self) -> Result<Ty, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) if s == "real" => {
                self.bump();
                if self.peek_punct('^') {
                    self.bump();
                    match self.bump() {
                        Tok::Num(n) if n >= 1.0 && n.fract() == 0.0 => Ok(Ty::real_power(n as usize)),
                        _ => Err(self.syntax("expected a positive integer exponent after `real^`")),
                    }
                } else {
                    Ok(Ty::Real)
                }
            }
            Tok::Ident(s) if s == "unit" => {
                self.bump();
                Ok(Ty::Unit)
            }
            Tok::Num(1.0) => {
                self.bump();
                Ok(Ty::Unit)
            }
            Tok::Punct('(') => {
                self.bump();
                let t = self.ty()?;
                self.expect(')')?;
                Ok(t)
            }
            _ => Err(self.syntax(format!("expected a type, found {}", self.describe()))),
        }
    }

    fn expr(&mut self) -> Result<Term, ParseError> {
        match self.peek() {
            Tok::Ident(s) if s == "let" => self.let_expr(),
            Tok::Ident(s) if s == "letrec" => self.letrec_expr(),
            Tok::Ident(s) if s == "if" => {
                self.bump();
                let b = self.bexpr()?;
                self.expect_kw("then")?;
                let m = self.expr()?;
                self.expect_kw("else")?;
                let n = self.expr()?;
                Ok(Term::if_(b, m, n))
            }
            Tok::Ident(s) if s == "while" => {
                self.bump();
                let b = self.bexpr()?;
                self.expect_kw("do")?;
                let m = self.expr()?;
                Ok(Term::while_(b, m))
            }
            _ => self.sum(),
        }
    }

    fn starts_block(&self) -> bool {
        matches!(self.peek(), Tok::Ident(s) if matches!(s.as_str(), "let" | "letrec" | "if" | "while"))
    }

    fn sum(&mut self) -> Result<Term, ParseError> {
        let mut lhs = self.postfix()?;
        while self.peek_punct('+') {
            self.bump();
            let rhs = if self.starts_block() { self.expr()? } else { self.postfix()? };
            lhs = Term::add(lhs, rhs);
        }
        Ok(lhs)
    }

    fn postfix(&mut self) -> Result<Term, ParseError> {
        let mut t = self.primary()?;
        while self.peek_punct('.') && matches!(self.peek_at(1), Tok::Ident(s) if s == "rd") {
            self.bump();
            self.bump();
            let (var, var_ty, body, point) = self.binder_call()?;
            t = Term::rd(t, var, var_ty, body, point);
        }
        Ok(t)
    }

    /// `(x:T. body)(point)`
    fn binder_call(&mut self) -> Result<(String, Ty, Term, Term), ParseError> {
        self.expect('(')?;
        let var = self.ident()?;
        self.expect(':')?;
        let var_ty = self.ty()?;
        self.expect('.')?;
        self.scope.push((var.clone(), Some(var_ty.clone())));
        let body = self.expr();
        self.scope.pop();
        let body = body?;
        self.expect(')')?;
        self.expect('(')?;
        let point = self.expr()?;
        self.expect(')')?;
        Ok((var, var_ty, body, point))
    }

    fn args(&mut self) -> Result<Term, ParseError> {
        self.expect('(')?;
        let mut items = vec![self.expr()?];
        while self.peek_punct(',') {
            self.bump();
            items.push(self.expr()?);
        }
        self.expect(')')?;
        Ok(Term::tuple(items))
    }

    fn primary(&mut self) -> Result<Term, ParseError> {
        match self.peek().clone() {
            Tok::Num(r) => {
                self.bump();
                Ok(Term::Const(r))
            }
            Tok::Punct('-') => {
                self.bump();
                match self.bump() {
                    Tok::Num(r) => Ok(Term::Const(-r)),
                    _ => Err(self.syntax("`-` must be followed by a number literal; use neg(...)")),
                }
            }
            Tok::Punct('*') => {
                self.bump();
                Ok(Term::Star)
            }
            Tok::Punct('(') => self.args(),
            Tok::Ident(s) if s == "fst" || s == "snd" => {
                self.bump();
                let arg = self.args()?;
                Ok(if s == "fst" { Term::fst(arg) } else { Term::snd(arg) })
            }
            Tok::Ident(s) if s == "fd" => self.fd_sugar(),
            Tok::Ident(s) if KEYWORDS.contains(&s.as_str()) => {
                Err(self.syntax(format!("unexpected keyword `{s}`")))
            }
            Tok::Ident(name) => {
                self.bump();
                if !self.peek_punct('(') {
                    return Ok(Term::Var(name));
                }
                if self.funs.iter().rev().any(|(f, _, _)| *f == name) {
                    let arg = self.args()?;
                    Ok(Term::call(name, arg))
                } else if self.sig.ops.contains_key(&name) {
                    let arg = self.args()?;
                    Ok(Term::op(name, arg))
                } else if self.sig.preds.contains_key(&name) {
                    Err(self.error(
                        ParseErrorKind::UnknownName,
                        format!("predicate `{name}` used where a term is expected"),
                    ))
                } else {
                    Err(self.error(
                        ParseErrorKind::UnknownName,
                        format!("unknown operation or function `{name}`"),
                    ))
                }
            }
            _ => Err(self.syntax(format!("expected a term, found {}", self.describe()))),
        }
    }

    fn fd_sugar(&mut self) -> Result<Term, ParseError> {
        self.bump();
        let (var, var_ty, body, point) = self.binder_call()?;
        self.expect('.')?;
        let dir = self.primary()?;
        let mut ctx = Context::new();
        for (x, ty) in &self.scope {
            if let Some(ty) = ty {
                ctx.push(x.clone(), ty.clone());
            }
        }
        ctx.push(var.clone(), var_ty.clone());
        let phi = FunContext::from_iter(self.funs.iter().cloned());
        let body_ty = typecheck(self.sig, &phi, &ctx, &body)
            .map_err(|e| self.syntax(format!("cannot type the body of fd: {e}")))?;
        Ok(sugar::forward_derivative(&var, &var_ty, &body, &body_ty, &point, &dir, &mut self.supply))
    }

    fn bexpr(&mut self) -> Result<BoolTerm, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) if s == "true" => {
                self.bump();
                Ok(BoolTerm::True)
            }
            Tok::Ident(s) if s == "false" => {
                self.bump();
                Ok(BoolTerm::False)
            }
            Tok::Ident(name) if !KEYWORDS.contains(&name.as_str()) => {
                if !self.sig.preds.contains_key(&name) {
                    return Err(self.error(ParseErrorKind::UnknownName, format!("unknown predicate `{name}`")));
                }
                self.bump();
                let arg = self.args()?;
                Ok(BoolTerm::pred(name, arg))
            }
            _ => Err(self.syntax(format!("expected a boolean term, found {}", self.describe()))),
        }
    }

    fn pattern(&mut self) -> Result<Pattern, ParseError> {
        if self.peek_punct('(') {
            self.bump();
            let mut items = vec![self.pattern()?];
            while self.peek_punct(',') {
                self.bump();
                items.push(self.pattern()?);
            }
            self.expect(')')?;
            let mut it = items.into_iter();
            let first = it.next().unwrap();
            Ok(it.fold(first, |acc, p| Pattern::Pair(Box::new(acc), Box::new(p))))
        } else {
            let name = self.ident()?;
            self.expect(':')?;
            let ty = self.ty()?;
            Ok(Pattern::Var(name, ty))
        }
    }

    fn bind_pattern(&mut self, pat: Pattern, src: Term, out: &mut Vec<(String, Ty, Term)>) {
        match pat {
            Pattern::Var(x, ty) => out.push((x, ty, src)),
            Pattern::Pair(a, b) => {
                let z = self.supply.fresh("z");
                out.push((z.clone(), Pattern::Pair(a.clone_shape(), b.clone_shape()).ty(), src));
                self.bind_pattern(*a, Term::fst(Term::var(z.clone())), out);
                self.bind_pattern(*b, Term::snd(Term::var(z)), out);
            }
        }
    }

    fn let_expr(&mut self) -> Result<Term, ParseError> {
        self.bump();
        let mut bindings: Vec<(String, Ty, Term)> = Vec::new();
        let depth = self.scope.len();
        loop {
            let pat = self.pattern()?;
            self.expect('=')?;
            let bound = self.expr()?;
            let start = bindings.len();
            self.bind_pattern(pat, bound, &mut bindings);
            for (x, ty, _) in &bindings[start..] {
                self.scope.push((x.clone(), Some(ty.clone())));
            }
            if self.peek_punct(',') {
                self.bump();
                continue;
            }
            break;
        }
        let body = self.expect_kw("in").and_then(|_| self.expr());
        self.scope.truncate(depth);
        let body = body?;
        Ok(bindings
            .into_iter()
            .rev()
            .fold(body, |acc, (x, ty, m)| Term::let_(x, ty, m, acc)))
    }

    fn letrec_expr(&mut self) -> Result<Term, ParseError> {
        self.bump();
        let name = self.ident()?;
        self.expect('(')?;
        let param = self.ident()?;
        self.expect(':')?;
        let param_ty = self.ty()?;
        self.expect(')')?;
        self.expect(':')?;
        let ret_ty = self.ty()?;
        self.expect('=')?;
        self.funs.push((name.clone(), param_ty.clone(), ret_ty.clone()));
        let saved = std::mem::replace(&mut self.scope, vec![(param.clone(), Some(param_ty.clone()))]);
        let body = self.expr();
        self.scope = saved;
        let result = body.and_then(|body| {
            self.expect_kw("in")?;
            let cont = self.expr()?;
            Ok(Term::letrec(name, param, param_ty, ret_ty, body, cont))
        });
        self.funs.pop();
        result
    }
}

impl Pattern {
    fn clone_shape(&self) -> Box<Pattern> {
        Box::new(match self {
            Pattern::Var(x, t) => Pattern::Var(x.clone(), t.clone()),
            Pattern::Pair(a, b) => Pattern::Pair(a.clone_shape(), b.clone_shape()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig() -> Signature {
        Signature::standard()
    }

    #[test]
    fn parses_let() {
        let t = parse_term("let x:real = 3 in x + x", &sig()).unwrap();
        assert_eq!(
            t,
            Term::let_("x", Ty::Real, Term::Const(3.0), Term::add(Term::var("x"), Term::var("x")))
        );
    }

    #[test]
    fn parses_reverse_derivative() {
        let t = parse_term("v.rd(x:real. mul(x,x))(a)", &sig()).unwrap();
        let x = Term::var("x");
        assert_eq!(
            t,
            Term::rd(Term::var("v"), "x", Ty::Real, Term::op("mul", Term::pair(x.clone(), x)), Term::var("a"))
        );
    }

    #[test]
    fn expands_tuple_patterns() {
        let t = parse_term("let (x:real,y:real) = p in x", &sig()).unwrap();
        let Term::Let(z, zty, bound, body) = &t else { panic!("{t:?}") };
        assert_eq!(*zty, Ty::prod(Ty::Real, Ty::Real));
        assert_eq!(**bound, Term::var("p"));
        let expected = Term::let_(
            "x",
            Ty::Real,
            Term::fst(Term::var(z.clone())),
            Term::let_("y", Ty::Real, Term::snd(Term::var(z.clone())), Term::var("x")),
        );
        assert_eq!(**body, expected);
    }

    #[test]
    fn chained_let_and_types() {
        let t = parse_term("let x:real^3 = p, y:1 = * in y", &sig()).unwrap();
        let Term::Let(_, ty, _, rest) = &t else { panic!() };
        assert_eq!(*ty, Ty::prod(Ty::prod(Ty::Real, Ty::Real), Ty::Real));
        assert!(matches!(&**rest, Term::Let(y, Ty::Unit, _, _) if y == "y"));
    }

    #[test]
    fn rd_on_numeric_literal() {
        let t = parse_term("1.rd(x:real. mul(x,x))(3)", &sig()).unwrap();
        assert!(matches!(t, Term::Rd { dir, .. } if *dir == Term::Const(1.0)));
    }

    #[test]
    fn unknown_names_are_reported_with_position() {
        let e = parse_term("let x:real = 1 in\n  frob(x)", &sig()).unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::UnknownName);
        assert_eq!((e.line, e.col), (2, 7));
        let e = parse_term("if foo(1) then 1 else 2", &sig()).unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::UnknownName);
    }

    #[test]
    fn syntax_errors_have_positions() {
        let e = parse_term("let x:real = in x", &sig()).unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::Syntax);
        assert_eq!((e.line, e.col), (1, 14));
    }

    #[test]
    fn letrec_calls_resolve_to_functions() {
        let src = "letrec f(x:real):real = if gt0(x) then f(x + -1) else 0 in f(3)";
        let t = parse_term(src, &sig()).unwrap();
        let Term::LetRec { body, cont, .. } = &t else { panic!() };
        assert!(matches!(&**cont, Term::FunCall(f, _) if f == "f"));
        assert!(matches!(&**body, Term::If(..)));
    }

    #[test]
    fn program_params() {
        let p = parse_program("param x: real; param y: real\nmul(x, y)", &sig()).unwrap();
        assert_eq!(p.params.len(), 2);
        assert_eq!(p.body, Term::op("mul", Term::pair(Term::var("x"), Term::var("y"))));
    }

    #[test]
    fn comments_are_skipped() {
        let t = parse_term("// leading\nx // trailing", &sig()).unwrap();
        assert_eq!(t, Term::var("x"));
    }
}
