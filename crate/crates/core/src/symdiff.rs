//! Symbolic reverse differentiation `w.Rd(x.m)(a)` of trace terms.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::syntax::sugar::{sum_term, zero_term};
use crate::syntax::{free_vars, is_trace_term, is_value, occurs_free, substitute, NameSupply, Signature, Term, Ty};
use crate::typing::{typecheck, Context, FunContext, TypeError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RdMode {
    /// Both summands of the `let` rule are always emitted.
    #[default]
    Standard,
    /// When the `let` body does not mention `x`, only the second summand is
    /// emitted, since the first is zero.
    Optimized,
}

impl FromStr for RdMode {
    type Err = String;

    fn from_str(s: &str) -> Result<RdMode, String> {
        match s {
            "standard" => Ok(RdMode::Standard),
            "optimized" => Ok(RdMode::Optimized),
            _ => Err(format!("unknown mode `{s}` (expected `standard` or `optimized`)")),
        }
    }
}

impl fmt::Display for RdMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RdMode::Standard => "standard",
            RdMode::Optimized => "optimized",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct RdStats {
    /// Invocations of the `Rd` rules, including recursive ones.
    pub recursive_call_count: u64,
    /// Size of the emitted term.
    pub output_node_count: u64,
}

impl RdStats {
    fn absorb(&mut self, other: RdStats) {
        self.recursive_call_count += other.recursive_call_count;
        self.output_node_count += other.output_node_count;
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SymDiffError {
    #[error("not a trace term: {0}")]
    NotATraceTerm(String),
    #[error("operation `{0}` has no reverse-derivative symbol")]
    UnknownOp(String),
    #[error(transparent)]
    Type(#[from] TypeError),
}

/// `w.Rd(x.m)(a)` where `m` is a trace term typed in `ctx, x:x_ty` and `w`,
/// `a` are values typed in `ctx`. The result contains no `rd`.
#[allow(clippy::too_many_arguments)]
pub fn rd_symbolic(
    sig: &Signature,
    ctx: &Context,
    w: &Term,
    x: &str,
    x_ty: &Ty,
    m: &Term,
    a: &Term,
    mode: RdMode,
    supply: &mut NameSupply,
) -> Result<(Term, RdStats), SymDiffError> {
    if !is_trace_term(m) {
        return Err(SymDiffError::NotATraceTerm(m.to_string()));
    }
    let mut d = Differentiator { sig, mode, supply, calls: 0, ctx: ctx.clone() };
    let out = d.rd(w, x, x_ty, m, a)?;
    let stats = RdStats { recursive_call_count: d.calls, output_node_count: out.size() as u64 };
    Ok((out, stats))
}

/// Replaces every `rd` node whose body is (after expanding nested `rd`s) a
/// trace term by its symbolic derivative, innermost first. Non-value
/// directions and points are let-bound first.
pub fn expand_rd_fully(
    sig: &Signature,
    phi: &FunContext,
    ctx: &Context,
    m: &Term,
    mode: RdMode,
    supply: &mut NameSupply,
) -> Result<(Term, RdStats), SymDiffError> {
    let mut stats = RdStats::default();
    let out = Expander { sig, phi, mode, supply, stats: &mut stats }.term(ctx, m)?;
    stats.output_node_count = out.size() as u64;
    Ok((out, stats))
}

struct Differentiator<'a> {
    sig: &'a Signature,
    mode: RdMode,
    supply: &'a mut NameSupply,
    calls: u64,
    /// Variables in scope, innermost last. Recursive calls push their
    /// binders and pop them again; shadowed entries are harmless.
    ctx: Context,
}

impl Differentiator<'_> {
    /// The type of a trace term, read off its spine. Falls back to full
    /// checking when the spine does not determine it.
    fn type_of(&self, m: &Term) -> Result<Ty, SymDiffError> {
        let mut inner = Vec::new();
        match spine_type(self.sig, &self.ctx, &mut inner, m) {
            Some(t) => Ok(t),
            None => Ok(typecheck(self.sig, &FunContext::new(), &self.ctx, m)?),
        }
    }

    /// `rd` with `binders` added to the scope for the duration of the call.
    #[allow(clippy::too_many_arguments)]
    fn rd_under(
        &mut self,
        binders: &[(&str, &Ty)],
        w: &Term,
        x: &str,
        x_ty: &Ty,
        m: &Term,
        a: &Term,
    ) -> Result<Term, SymDiffError> {
        let mark = self.ctx.len();
        for (v, t) in binders {
            self.ctx.push(*v, (*t).clone());
        }
        let out = self.rd(w, x, x_ty, m, a);
        self.ctx.truncate(mark);
        out
    }

    fn rd(&mut self, w: &Term, x: &str, x_ty: &Ty, m: &Term, a: &Term) -> Result<Term, SymDiffError> {
        self.calls += 1;
        let outside: Vec<String> = free_vars(w).into_iter().chain(free_vars(a)).collect();
        if outside.iter().any(|v| v == x) {
            let x2 = self.supply.fresh(x);
            let m2 = substitute(m, x, x_ty, &Term::var(x2.clone()));
            self.calls -= 1;
            return self.rd(w, &x2, x_ty, &m2, a);
        }
        let mark = self.ctx.len();
        self.ctx.push(x, x_ty.clone());
        let out = self.rd_in_scope(w, x, x_ty, m, a, &outside);
        self.ctx.truncate(mark);
        out
    }

    /// The clauses, with `x` already in scope.
    #[allow(clippy::too_many_arguments)]
    fn rd_in_scope(
        &mut self,
        w: &Term,
        x: &str,
        x_ty: &Ty,
        m: &Term,
        a: &Term,
        outside: &[String],
    ) -> Result<Term, SymDiffError> {
        let bind_x = |body: Term| Term::let_(x, x_ty.clone(), a.clone(), body);
        Ok(match m {
            Term::Var(y) if y == x => w.clone(),
            Term::Var(_) | Term::Const(_) | Term::Star => zero_term(x_ty),
            Term::Add(p, q) => {
                let dp = self.rd(w, x, x_ty, p, a)?;
                let dq = self.rd(w, x, x_ty, q, a)?;
                sum_term(x_ty, dp, dq, self.supply)
            }
            Term::Op(op, arg) => {
                let rev = self.sig.reverse_of(op).ok_or_else(|| SymDiffError::UnknownOp(op.clone()))?;
                let (dom, _) = self.sig.op_type(op).ok_or_else(|| SymDiffError::UnknownOp(op.clone()))?;
                let dom = dom.clone();
                let t = self.supply.fresh("t");
                let cot = Term::op(rev, Term::pair((**arg).clone(), w.clone()));
                let rest = self.rd_under(&[(&t, &dom)], &Term::var(t.clone()), x, x_ty, arg, a)?;
                bind_x(Term::let_(t, dom, cot, rest))
            }
            Term::Let(y, y_ty, d, e) => {
                let renamed;
                let (y, e) = if y == x || outside.iter().any(|v| v == y) {
                    let y2 = self.supply.fresh(y);
                    renamed = substitute(e, y, y_ty, &Term::var(y2.clone()));
                    (y2, &renamed)
                } else {
                    (y.clone(), &**e)
                };
                let t = self.supply.fresh("t");
                let through_y = self.rd_under(&[(&y, y_ty)], w, &y, y_ty, e, &Term::var(y.clone()))?;
                let through_d = self.rd_under(&[(&y, y_ty), (&t, y_ty)], &Term::var(t.clone()), x, x_ty, d, a)?;
                let second = Term::let_(t, y_ty.clone(), through_y, through_d);
                let body = if self.mode == RdMode::Optimized && !occurs_free(x, e) {
                    second
                } else {
                    let direct = self.rd_under(&[(&y, y_ty)], w, x, x_ty, e, a)?;
                    sum_term(x_ty, direct, second, self.supply)
                };
                bind_x(Term::let_(y, y_ty.clone(), (**d).clone(), body))
            }
            Term::Pair(u, v) => {
                let tu = self.type_of(u)?;
                let tv = self.type_of(v)?;
                let p = self.supply.fresh("p");
                let (y, z) = (self.supply.fresh("y"), self.supply.fresh("z"));
                let pt = Ty::prod(tu.clone(), tv.clone());
                let scope = [(p.as_str(), &pt), (y.as_str(), &tu), (z.as_str(), &tv)];
                let du = self.rd_under(&scope, &Term::var(y.clone()), x, x_ty, u, a)?;
                let dv = self.rd_under(&scope, &Term::var(z.clone()), x, x_ty, v, a)?;
                let sum = sum_term(x_ty, du, dv, self.supply);
                Term::let_(
                    p.clone(),
                    pt.clone(),
                    w.clone(),
                    Term::let_(
                        y,
                        tu,
                        Term::fst(Term::var(p.clone())),
                        Term::let_(z, tv, Term::snd(Term::var(p)), sum),
                    ),
                )
            }
            Term::Fst(q) | Term::Snd(q) => {
                let Ty::Prod(tl, tr) = self.type_of(q)? else {
                    return Err(SymDiffError::NotATraceTerm(m.to_string()));
                };
                let dir = if matches!(m, Term::Fst(_)) {
                    Term::pair(w.clone(), zero_term(&tr))
                } else {
                    Term::pair(zero_term(&tl), w.clone())
                };
                bind_x(self.rd(&dir, x, x_ty, q, a)?)
            }
            _ => return Err(SymDiffError::NotATraceTerm(m.to_string())),
        })
    }
}

fn spine_type(sig: &Signature, ctx: &Context, inner: &mut Vec<(String, Ty)>, m: &Term) -> Option<Ty> {
    match m {
        Term::Var(x) => match inner.iter().rev().find(|(y, _)| y == x) {
            Some((_, t)) => Some(t.clone()),
            None => ctx.lookup(x).cloned(),
        },
        Term::Const(_) => Some(Ty::Real),
        Term::Star => Some(Ty::Unit),
        Term::Add(p, _) => spine_type(sig, ctx, inner, p),
        Term::Op(op, _) => sig.op_type(op).map(|(_, cod)| cod.clone()),
        Term::Pair(p, q) => Some(Ty::prod(spine_type(sig, ctx, inner, p)?, spine_type(sig, ctx, inner, q)?)),
        Term::Fst(p) | Term::Snd(p) => match spine_type(sig, ctx, inner, p)? {
            Ty::Prod(l, r) => Some(if matches!(m, Term::Fst(_)) { *l } else { *r }),
            _ => None,
        },
        Term::Let(y, ty, _, e) => {
            inner.push((y.clone(), ty.clone()));
            let t = spine_type(sig, ctx, inner, e);
            inner.pop();
            t
        }
        _ => None,
    }
}

struct Expander<'a> {
    sig: &'a Signature,
    phi: &'a FunContext,
    mode: RdMode,
    supply: &'a mut NameSupply,
    stats: &'a mut RdStats,
}

impl Expander<'_> {
    fn term(&mut self, ctx: &Context, m: &Term) -> Result<Term, SymDiffError> {
        Ok(match m {
            Term::Var(_) | Term::Const(_) | Term::Star => m.clone(),
            Term::Add(p, q) => Term::add(self.term(ctx, p)?, self.term(ctx, q)?),
            Term::Op(op, p) => Term::op(op.clone(), self.term(ctx, p)?),
            Term::Pair(p, q) => Term::pair(self.term(ctx, p)?, self.term(ctx, q)?),
            Term::Fst(p) => Term::fst(self.term(ctx, p)?),
            Term::Snd(p) => Term::snd(self.term(ctx, p)?),
            Term::FunCall(f, p) => Term::call(f.clone(), self.term(ctx, p)?),
            Term::Let(x, ty, d, e) => {
                let d = self.term(ctx, d)?;
                Term::let_(x.clone(), ty.clone(), d, self.term(&ctx.extended(x.clone(), ty.clone()), e)?)
            }
            // Guards and loop bodies are left alone: a guard cannot contain
            // `rd` in a position that needs differentiating here.
            Term::If(..) | Term::While(..) | Term::LetRec { .. } => m.clone(),
            Term::Rd { dir, var, var_ty, body, point } => {
                let body = self.term(&ctx.extended(var.clone(), var_ty.clone()), body)?;
                let dir = self.term(ctx, dir)?;
                let point = self.term(ctx, point)?;
                let body_ty = typecheck(self.sig, self.phi, &ctx.extended(var.clone(), var_ty.clone()), &body)?;
                let mut scope = ctx.clone();
                let mut binds = Vec::new();
                let point = self.as_value(&mut scope, &mut binds, point, var_ty.clone(), "a");
                let dir = self.as_value(&mut scope, &mut binds, dir, body_ty, "w");
                let (d, stats) =
                    rd_symbolic(self.sig, &scope, &dir, var, var_ty, &body, &point, self.mode, self.supply)?;
                self.stats.absorb(stats);
                binds.into_iter().rev().fold(d, |acc, (x, ty, b)| Term::let_(x, ty, b, acc))
            }
        })
    }

    fn as_value(
        &mut self,
        scope: &mut Context,
        binds: &mut Vec<(String, Ty, Term)>,
        t: Term,
        ty: Ty,
        base: &str,
    ) -> Term {
        if is_value(&t) {
            return t;
        }
        let x = self.supply.fresh(base);
        scope.push(x.clone(), ty.clone());
        binds.push((x.clone(), ty, t));
        Term::var(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_term;

    fn rd(src: &str, mode: RdMode) -> (Term, RdStats) {
        let sig = Signature::standard();
        let m = parse_term(src, &sig).unwrap();
        let ctx: Context = [("w", Ty::Real), ("a", Ty::Real), ("y", Ty::Real)]
            .into_iter()
            .map(|(x, t)| (x.to_string(), t))
            .collect();
        let mut supply = NameSupply::avoiding([&m]);
        rd_symbolic(&sig, &ctx, &Term::var("w"), "x", &Ty::Real, &m, &Term::var("a"), mode, &mut supply).unwrap()
    }

    #[test]
    fn variable_rules() {
        assert_eq!(rd("x", RdMode::Standard).0, Term::var("w"));
        assert_eq!(rd("y", RdMode::Standard).0, Term::Const(0.0));
        assert_eq!(rd("7", RdMode::Standard).0, Term::Const(0.0));
    }

    #[test]
    fn op_rule_shape() {
        let (t, stats) = rd("sin(x)", RdMode::Standard);
        assert_eq!(t.to_string(), "let x:real = a in let t#0:real = sin_R(x, w) in t#0");
        assert_eq!(stats.recursive_call_count, 2);
    }

    #[test]
    fn rejects_non_trace_terms() {
        let sig = Signature::standard();
        let m = parse_term("if gt0(x) then x else 0", &sig).unwrap();
        let r = rd_symbolic(
            &sig,
            &Context::singleton("w", Ty::Real),
            &Term::var("w"),
            "x",
            &Ty::Real,
            &m,
            &Term::Const(1.0),
            RdMode::Standard,
            &mut NameSupply::new(),
        );
        assert!(matches!(r, Err(SymDiffError::NotATraceTerm(_))));
    }

    #[test]
    fn optimized_drops_the_zero_summand() {
        let src = "let y1:real = sin(x) in let y2:real = sin(y1) in let y3:real = sin(y2) in y3";
        let (_, std) = rd(src, RdMode::Standard);
        let (_, opt) = rd(src, RdMode::Optimized);
        assert!(std.recursive_call_count >= 7, "{std:?}");
        assert!(opt.recursive_call_count < std.recursive_call_count);
    }

    #[test]
    fn renames_a_clashing_variable() {
        let sig = Signature::standard();
        let m = parse_term("mul(x, x)", &sig).unwrap();
        let ctx = Context::singleton("x", Ty::Real);
        let (t, _) = rd_symbolic(
            &sig,
            &ctx,
            &Term::var("x"),
            "x",
            &Ty::Real,
            &m,
            &Term::Const(3.0),
            RdMode::Standard,
            &mut NameSupply::new(),
        )
        .unwrap();
        assert!(free_vars(&t).contains("x"), "{t}");
        assert!(typecheck(&sig, &FunContext::new(), &ctx, &t).is_ok());
    }

    #[test]
    fn modes_parse() {
        assert_eq!("optimized".parse::<RdMode>(), Ok(RdMode::Optimized));
        assert!("fast".parse::<RdMode>().is_err());
    }
}
