//! Pretty printer emitting the concrete syntax accepted by the parser.

use std::fmt::{self, Write};

use super::{BoolTerm, Term};

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Level {
    Expr,
    Sum,
    Postfix,
}

fn level(t: &Term) -> Level {
    match t {
        Term::Let(..) | Term::If(..) | Term::While(..) | Term::LetRec { .. } => Level::Expr,
        Term::Add(..) => Level::Sum,
        _ => Level::Postfix,
    }
}

fn write_at(f: &mut impl Write, t: &Term, at: Level) -> fmt::Result {
    if level(t) < at {
        f.write_char('(')?;
        write_term(f, t)?;
        f.write_char(')')
    } else {
        write_term(f, t)
    }
}

fn write_const(f: &mut impl Write, r: f64) -> fmt::Result {
    if r == 0.0 && r.is_sign_negative() {
        f.write_str("-0")
    } else {
        write!(f, "{r}")
    }
}

fn write_args(f: &mut impl Write, arg: &Term) -> fmt::Result {
    match arg {
        Term::Pair(a, b) => {
            write_args(f, a)?;
            f.write_str(", ")?;
            write_term(f, b)
        }
        _ => write_term(f, arg),
    }
}

fn write_term(f: &mut impl Write, t: &Term) -> fmt::Result {
    match t {
        Term::Var(x) => f.write_str(x),
        Term::Const(r) => write_const(f, *r),
        Term::Star => f.write_char('*'),
        Term::Add(a, b) => {
            write_at(f, a, Level::Sum)?;
            f.write_str(" + ")?;
            write_at(f, b, Level::Postfix)
        }
        Term::Op(name, arg) | Term::FunCall(name, arg) => {
            write!(f, "{name}(")?;
            write_args(f, arg)?;
            f.write_char(')')
        }
        Term::Pair(a, b) => {
            f.write_char('(')?;
            write_term(f, a)?;
            f.write_str(", ")?;
            write_term(f, b)?;
            f.write_char(')')
        }
        Term::Fst(m) => {
            f.write_str("fst(")?;
            write_term(f, m)?;
            f.write_char(')')
        }
        Term::Snd(m) => {
            f.write_str("snd(")?;
            write_term(f, m)?;
            f.write_char(')')
        }
        Term::Let(x, ty, m, n) => {
            write!(f, "let {x}:{ty} = ")?;
            write_term(f, m)?;
            f.write_str(" in ")?;
            write_term(f, n)
        }
        Term::If(b, m, n) => {
            f.write_str("if ")?;
            write_bool(f, b)?;
            f.write_str(" then ")?;
            write_term(f, m)?;
            f.write_str(" else ")?;
            write_term(f, n)
        }
        Term::While(b, m) => {
            f.write_str("while ")?;
            write_bool(f, b)?;
            f.write_str(" do ")?;
            write_term(f, m)
        }
        Term::Rd { dir, var, var_ty, body, point } => {
            write_at(f, dir, Level::Postfix)?;
            write!(f, ".rd({var}:{var_ty}. ")?;
            write_term(f, body)?;
            f.write_str(")(")?;
            write_term(f, point)?;
            f.write_char(')')
        }
        Term::LetRec { name, param, param_ty, ret_ty, body, cont } => {
            write!(f, "letrec {name}({param}:{param_ty}):{ret_ty} = ")?;
            write_term(f, body)?;
            f.write_str(" in ")?;
            write_term(f, cont)
        }
    }
}

fn write_bool(f: &mut impl Write, b: &BoolTerm) -> fmt::Result {
    match b {
        BoolTerm::True => f.write_str("true"),
        BoolTerm::False => f.write_str("false"),
        BoolTerm::Pred(p, m) => {
            write!(f, "{p}(")?;
            write_args(f, m)?;
            f.write_char(')')
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_term(f, self)
    }
}

impl fmt::Display for BoolTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_bool(f, self)
    }
}
