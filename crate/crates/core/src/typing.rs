//! Type checking for terms in a function context and a variable context.
//!
//! `while` iterates on the rightmost variable `p:U` of the context, and its
//! guard and body may mention no other variable.

use std::fmt;

use thiserror::Error;

use crate::syntax::{free_vars, free_vars_bool, BoolTerm, Signature, Term, Ty};

/// Ordered variable context; lookup finds the rightmost binding.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Context {
    vars: Vec<(String, Ty)>,
}

impl Context {
    pub fn new() -> Context {
        Context::default()
    }

    pub fn singleton(x: impl Into<String>, ty: Ty) -> Context {
        Context { vars: vec![(x.into(), ty)] }
    }

    pub fn push(&mut self, x: impl Into<String>, ty: Ty) {
        self.vars.push((x.into(), ty));
    }

    pub fn pop(&mut self) -> Option<(String, Ty)> {
        self.vars.pop()
    }

    pub fn truncate(&mut self, len: usize) {
        self.vars.truncate(len);
    }

    pub fn extended(&self, x: impl Into<String>, ty: Ty) -> Context {
        let mut c = self.clone();
        c.push(x, ty);
        c
    }

    pub fn lookup(&self, x: &str) -> Option<&Ty> {
        self.vars.iter().rev().find(|(y, _)| y == x).map(|(_, t)| t)
    }

    /// Index of the rightmost binding of `x`.
    pub fn position(&self, x: &str) -> Option<usize> {
        self.vars.iter().rposition(|(y, _)| y == x)
    }

    pub fn last(&self) -> Option<(&str, &Ty)> {
        self.vars.last().map(|(x, t)| (x.as_str(), t))
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Ty)> {
        self.vars.iter().map(|(x, t)| (x.as_str(), t))
    }

    pub fn get(&self, i: usize) -> (&str, &Ty) {
        let (x, t) = &self.vars[i];
        (x, t)
    }

    /// The context as a single product type, `1` when empty.
    pub fn as_type(&self) -> Ty {
        let mut it = self.vars.iter().map(|(_, t)| t.clone());
        match it.next() {
            None => Ty::Unit,
            Some(first) => it.fold(first, Ty::prod),
        }
    }
}

impl FromIterator<(String, Ty)> for Context {
    fn from_iter<I: IntoIterator<Item = (String, Ty)>>(iter: I) -> Self {
        Context { vars: iter.into_iter().collect() }
    }
}

impl fmt::Display for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (x, t)) in self.vars.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{x}:{t}")?;
        }
        Ok(())
    }
}

/// Function variables with their argument and result types.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FunContext {
    funs: Vec<(String, Ty, Ty)>,
}

impl FunContext {
    pub fn new() -> FunContext {
        FunContext::default()
    }

    pub fn push(&mut self, f: impl Into<String>, arg: Ty, ret: Ty) {
        self.funs.push((f.into(), arg, ret));
    }

    pub fn extended(&self, f: impl Into<String>, arg: Ty, ret: Ty) -> FunContext {
        let mut c = self.clone();
        c.push(f, arg, ret);
        c
    }

    pub fn lookup(&self, f: &str) -> Option<(&Ty, &Ty)> {
        self.funs.iter().rev().find(|(g, _, _)| g == f).map(|(_, a, r)| (a, r))
    }
}

impl FromIterator<(String, Ty, Ty)> for FunContext {
    fn from_iter<I: IntoIterator<Item = (String, Ty, Ty)>>(iter: I) -> Self {
        FunContext { funs: iter.into_iter().collect() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TypeError {
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("unbound function `{0}`")]
    UnboundFunction(String),
    #[error("unknown operation `{0}`")]
    UnknownOp(String),
    #[error("unknown predicate `{0}`")]
    UnknownPred(String),
    #[error("function `{name}` expects an argument of type {expected}, got {found}")]
    ArityMismatch { name: String, expected: Ty, found: Ty },
    #[error("type mismatch in `{term}`: expected {expected}, found {found}")]
    TypeMismatch { term: String, expected: String, found: Ty },
    #[error("while loop in `{term}`: {reason}")]
    WhileContextViolation { term: String, reason: String },
    #[error("body of `{name}` mentions variables other than its parameter: {vars:?}")]
    RecBodyFreeVarViolation { name: String, vars: Vec<String> },
}

fn mismatch(term: &Term, expected: impl fmt::Display, found: &Ty) -> TypeError {
    let mut text = term.to_string();
    if text.len() > 80 {
        let cut = (0..=77).rev().find(|&i| text.is_char_boundary(i)).unwrap_or(0);
        text.truncate(cut);
        text.push_str("...");
    }
    TypeError::TypeMismatch { term: text, expected: expected.to_string(), found: found.clone() }
}

/// The type of `m` in `Φ | Γ`.
pub fn typecheck(sig: &Signature, phi: &FunContext, gamma: &Context, m: &Term) -> Result<Ty, TypeError> {
    let mut gamma = gamma.clone();
    check(sig, phi, &mut gamma, m)
}

pub fn typecheck_bool(sig: &Signature, phi: &FunContext, gamma: &Context, b: &BoolTerm) -> Result<(), TypeError> {
    let mut gamma = gamma.clone();
    check_bool(sig, phi, &mut gamma, b)
}

fn expect(sig: &Signature, phi: &FunContext, gamma: &mut Context, m: &Term, ty: &Ty) -> Result<(), TypeError> {
    let found = check(sig, phi, gamma, m)?;
    if found == *ty {
        Ok(())
    } else {
        Err(mismatch(m, ty, &found))
    }
}

fn under<T>(gamma: &mut Context, x: &str, ty: &Ty, f: impl FnOnce(&mut Context) -> T) -> T {
    gamma.push(x, ty.clone());
    let r = f(gamma);
    gamma.pop();
    r
}

fn check(sig: &Signature, phi: &FunContext, gamma: &mut Context, m: &Term) -> Result<Ty, TypeError> {
    match m {
        Term::Var(x) => gamma.lookup(x).cloned().ok_or_else(|| TypeError::UnboundVariable(x.clone())),
        Term::Const(_) => Ok(Ty::Real),
        Term::Add(a, b) => {
            expect(sig, phi, gamma, a, &Ty::Real)?;
            expect(sig, phi, gamma, b, &Ty::Real)?;
            Ok(Ty::Real)
        }
        Term::Op(op, arg) => {
            let (dom, cod) = sig.op_type(op).ok_or_else(|| TypeError::UnknownOp(op.clone()))?;
            expect(sig, phi, gamma, arg, dom)?;
            Ok(cod.clone())
        }
        Term::Let(x, ty, bound, body) => {
            expect(sig, phi, gamma, bound, ty)?;
            under(gamma, x, ty, |g| check(sig, phi, g, body))
        }
        Term::Star => Ok(Ty::Unit),
        Term::Pair(a, b) => Ok(Ty::prod(check(sig, phi, gamma, a)?, check(sig, phi, gamma, b)?)),
        Term::Fst(p) | Term::Snd(p) => match check(sig, phi, gamma, p)? {
            Ty::Prod(a, b) => Ok(if matches!(m, Term::Fst(_)) { *a } else { *b }),
            other => Err(mismatch(p, "a product type", &other)),
        },
        Term::If(b, t, e) => {
            check_bool(sig, phi, gamma, b)?;
            let ty = check(sig, phi, gamma, t)?;
            expect(sig, phi, gamma, e, &ty)?;
            Ok(ty)
        }
        Term::While(b, body) => {
            let Some((p, u)) = gamma.last() else {
                return Err(TypeError::WhileContextViolation {
                    term: m.to_string(),
                    reason: "the context is empty, so there is no loop variable".into(),
                });
            };
            let (p, u) = (p.to_string(), u.clone());
            let mut used = free_vars_bool(b);
            used.extend(free_vars(body));
            used.remove(&p);
            if let Some(other) = used.into_iter().next() {
                return Err(if gamma.lookup(&other).is_some() {
                    TypeError::WhileContextViolation {
                        term: m.to_string(),
                        reason: format!("guard and body may only mention the loop variable `{p}`, not `{other}`"),
                    }
                } else {
                    TypeError::UnboundVariable(other)
                });
            }
            let mut single = Context::singleton(p, u.clone());
            check_bool(sig, phi, &mut single, b)?;
            let found = check(sig, phi, &mut single, body)?;
            if found != u {
                return Err(mismatch(body, &u, &found));
            }
            Ok(u)
        }
        Term::Rd { dir, var, var_ty, body, point } => {
            let t = under(gamma, var, var_ty, |g| check(sig, phi, g, body))?;
            expect(sig, phi, gamma, point, var_ty)?;
            expect(sig, phi, gamma, dir, &t)?;
            Ok(var_ty.clone())
        }
        Term::FunCall(f, arg) => {
            let (a, r) = phi.lookup(f).ok_or_else(|| TypeError::UnboundFunction(f.clone()))?;
            let (a, r) = (a.clone(), r.clone());
            let found = check(sig, phi, gamma, arg)?;
            if found != a {
                return Err(TypeError::ArityMismatch { name: f.clone(), expected: a, found });
            }
            Ok(r)
        }
        Term::LetRec { name, param, param_ty, ret_ty, body, cont } => {
            let mut stray: Vec<String> = free_vars(body).into_iter().filter(|v| v != param).collect();
            if !stray.is_empty() {
                stray.sort();
                return Err(TypeError::RecBodyFreeVarViolation { name: name.clone(), vars: stray });
            }
            let inner = phi.extended(name.clone(), param_ty.clone(), ret_ty.clone());
            let mut single = Context::singleton(param.clone(), param_ty.clone());
            let found = check(sig, &inner, &mut single, body)?;
            if found != *ret_ty {
                return Err(mismatch(body, ret_ty, &found));
            }
            check(sig, &inner, gamma, cont)
        }
    }
}

fn check_bool(sig: &Signature, phi: &FunContext, gamma: &mut Context, b: &BoolTerm) -> Result<(), TypeError> {
    match b {
        BoolTerm::True | BoolTerm::False => Ok(()),
        BoolTerm::Pred(p, m) => {
            let ty = sig.preds.get(p).ok_or_else(|| TypeError::UnknownPred(p.clone()))?;
            expect(sig, phi, gamma, m, ty)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_term;

    fn ty_of(ctx: &[(&str, Ty)], src: &str) -> Result<Ty, TypeError> {
        let sig = Signature::standard();
        let gamma: Context = ctx.iter().map(|(x, t)| (x.to_string(), t.clone())).collect();
        typecheck(&sig, &FunContext::new(), &gamma, &parse_term(src, &sig).unwrap())
    }

    #[test]
    fn addition_is_real() {
        assert_eq!(ty_of(&[("x", Ty::Real)], "x + x"), Ok(Ty::Real));
    }

    #[test]
    fn while_in_singleton_context() {
        assert_eq!(ty_of(&[("p", Ty::Real)], "while gt0(p) do add(p, -1)"), Ok(Ty::Real));
    }

    #[test]
    fn while_may_not_see_other_variables() {
        let r = ty_of(&[("q", Ty::Real), ("p", Ty::Real)], "while gt0(p) do add(p, q)");
        assert!(matches!(r, Err(TypeError::WhileContextViolation { .. })), "{r:?}");
        let r = ty_of(&[], "while gt0(1) do 1");
        assert!(matches!(r, Err(TypeError::WhileContextViolation { .. })), "{r:?}");
        // Only the rightmost variable is the loop state.
        assert_eq!(ty_of(&[("q", Ty::Real), ("p", Ty::Real)], "while gt0(p) do add(p, -1)"), Ok(Ty::Real));
    }

    #[test]
    fn rd_has_the_point_type() {
        let ctx = [("v", Ty::Real), ("a", Ty::Real)];
        assert_eq!(ty_of(&ctx, "v.rd(x:real. mul(x,x))(a)"), Ok(Ty::Real));
        let r = ty_of(&[("v", Ty::Unit), ("a", Ty::Real)], "v.rd(x:real. mul(x,x))(a)");
        assert!(matches!(r, Err(TypeError::TypeMismatch { .. })));
    }

    #[test]
    fn predicates() {
        let sig = Signature::standard();
        let phi = FunContext::new();
        assert!(typecheck_bool(&sig, &phi, &Context::new(), &BoolTerm::True).is_ok());
        let x = Context::singleton("x", Ty::Real);
        assert!(typecheck_bool(&sig, &phi, &x, &BoolTerm::pred("gt0", Term::var("x"))).is_ok());
        let x1 = Context::singleton("x", Ty::Unit);
        let r = typecheck_bool(&sig, &phi, &x1, &BoolTerm::pred("gt0", Term::var("x")));
        assert!(matches!(r, Err(TypeError::TypeMismatch { .. })));
    }

    #[test]
    fn letrec_rules() {
        let src = "letrec f(x:real):real = if gt0(x) then mul(x, f(x + -1)) else 1 in f(5)";
        assert_eq!(ty_of(&[], src), Ok(Ty::Real));
        let bad = "letrec f(x:real):real = add(x, y) in f(5)";
        assert!(matches!(ty_of(&[("y", Ty::Real)], bad), Err(TypeError::RecBodyFreeVarViolation { .. })));
        let sig = Signature::standard();
        let phi: FunContext = [("g".to_string(), Ty::Real, Ty::Real)].into_iter().collect();
        let call = Term::call("g", Term::Star);
        let r = typecheck(&sig, &phi, &Context::new(), &call);
        assert!(matches!(r, Err(TypeError::ArityMismatch { .. })));
        let r = typecheck(&sig, &FunContext::new(), &Context::new(), &call);
        assert_eq!(r, Err(TypeError::UnboundFunction("g".into())));
    }

    #[test]
    fn unbound_variable() {
        assert_eq!(ty_of(&[], "y"), Err(TypeError::UnboundVariable("y".into())));
    }

    #[test]
    fn products() {
        assert_eq!(ty_of(&[("p", Ty::prod(Ty::Real, Ty::Unit))], "snd(p)"), Ok(Ty::Unit));
        assert!(matches!(ty_of(&[("p", Ty::Real)], "fst(p)"), Err(TypeError::TypeMismatch { .. })));
    }
}
