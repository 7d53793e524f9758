//! Abstract syntax of the language, binding structure, and the trace/value
//! sublanguages.

mod json;
mod parse;
mod print;
pub mod sugar;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

pub use json::term_to_json;
pub use parse::{parse_program, parse_term, ParseError, ParseErrorKind, Program};

/// Types: `real`, `1` and binary products.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Ty {
    Real,
    Unit,
    Prod(Box<Ty>, Box<Ty>),
}

impl Ty {
    pub fn prod(a: Ty, b: Ty) -> Ty {
        Ty::Prod(Box::new(a), Box::new(b))
    }

    /// `real^n`, left associated. `real^0` is `1`.
    pub fn real_power(n: usize) -> Ty {
        match n {
            0 => Ty::Unit,
            1 => Ty::Real,
            _ => Ty::prod(Ty::real_power(n - 1), Ty::Real),
        }
    }

    /// Number of `real` leaves.
    pub fn real_count(&self) -> usize {
        match self {
            Ty::Real => 1,
            Ty::Unit => 0,
            Ty::Prod(a, b) => a.real_count() + b.real_count(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BoolTerm {
    True,
    False,
    Pred(String, Box<Term>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Term {
    Var(String),
    Const(f64),
    Add(Box<Term>, Box<Term>),
    Op(String, Box<Term>),
    Let(String, Ty, Box<Term>, Box<Term>),
    Star,
    Pair(Box<Term>, Box<Term>),
    Fst(Box<Term>),
    Snd(Box<Term>),
    If(Box<BoolTerm>, Box<Term>, Box<Term>),
    /// Iterates on the rightmost variable of the context.
    While(Box<BoolTerm>, Box<Term>),
    /// `dir.rd(var:var_ty. body)(point)`
    Rd {
        dir: Box<Term>,
        var: String,
        var_ty: Ty,
        body: Box<Term>,
        point: Box<Term>,
    },
    FunCall(String, Box<Term>),
    LetRec {
        name: String,
        param: String,
        param_ty: Ty,
        ret_ty: Ty,
        body: Box<Term>,
        cont: Box<Term>,
    },
}

impl Term {
    pub fn var(name: impl Into<String>) -> Term {
        Term::Var(name.into())
    }

    pub fn add(a: Term, b: Term) -> Term {
        Term::Add(Box::new(a), Box::new(b))
    }

    pub fn op(name: impl Into<String>, arg: Term) -> Term {
        Term::Op(name.into(), Box::new(arg))
    }

    pub fn let_(name: impl Into<String>, ty: Ty, bound: Term, body: Term) -> Term {
        Term::Let(name.into(), ty, Box::new(bound), Box::new(body))
    }

    pub fn pair(a: Term, b: Term) -> Term {
        Term::Pair(Box::new(a), Box::new(b))
    }

    pub fn fst(m: Term) -> Term {
        Term::Fst(Box::new(m))
    }

    pub fn snd(m: Term) -> Term {
        Term::Snd(Box::new(m))
    }

    pub fn if_(b: BoolTerm, m: Term, n: Term) -> Term {
        Term::If(Box::new(b), Box::new(m), Box::new(n))
    }

    pub fn while_(b: BoolTerm, body: Term) -> Term {
        Term::While(Box::new(b), Box::new(body))
    }

    pub fn rd(dir: Term, var: impl Into<String>, var_ty: Ty, body: Term, point: Term) -> Term {
        Term::Rd {
            dir: Box::new(dir),
            var: var.into(),
            var_ty,
            body: Box::new(body),
            point: Box::new(point),
        }
    }

    pub fn call(name: impl Into<String>, arg: Term) -> Term {
        Term::FunCall(name.into(), Box::new(arg))
    }

    pub fn letrec(
        name: impl Into<String>,
        param: impl Into<String>,
        param_ty: Ty,
        ret_ty: Ty,
        body: Term,
        cont: Term,
    ) -> Term {
        Term::LetRec {
            name: name.into(),
            param: param.into(),
            param_ty,
            ret_ty,
            body: Box::new(body),
            cont: Box::new(cont),
        }
    }

    /// Left-nested tuple `((a1, a2), ..., an)`; a single element is itself.
    pub fn tuple(mut items: Vec<Term>) -> Term {
        assert!(!items.is_empty(), "empty tuple");
        let rest = items.split_off(1);
        rest.into_iter()
            .fold(items.pop().unwrap(), Term::pair)
    }

    /// Number of nodes, counting boolean guards.
    pub fn size(&self) -> usize {
        let mut n = 1;
        self.for_each_child(|c| n += c.size());
        if let Some(b) = self.guard() {
            n += b.size();
        }
        n
    }

    fn guard(&self) -> Option<&BoolTerm> {
        match self {
            Term::If(b, _, _) | Term::While(b, _) => Some(b),
            _ => None,
        }
    }

    /// Visits the immediate term children (guards excluded).
    pub fn for_each_child(&self, mut f: impl FnMut(&Term)) {
        match self {
            Term::Var(_) | Term::Const(_) | Term::Star => {}
            Term::Add(a, b) | Term::Pair(a, b) | Term::Let(_, _, a, b) => {
                f(a);
                f(b);
            }
            Term::Op(_, a) | Term::Fst(a) | Term::Snd(a) | Term::FunCall(_, a) => f(a),
            Term::If(_, m, n) => {
                f(m);
                f(n);
            }
            Term::While(_, body) => f(body),
            Term::Rd { dir, body, point, .. } => {
                f(dir);
                f(body);
                f(point);
            }
            Term::LetRec { body, cont, .. } => {
                f(body);
                f(cont);
            }
        }
    }

    pub fn count_rd_nodes(&self) -> usize {
        let mut n = usize::from(matches!(self, Term::Rd { .. }));
        self.for_each_child(|c| n += c.count_rd_nodes());
        n
    }
}

impl BoolTerm {
    pub fn pred(name: impl Into<String>, arg: Term) -> BoolTerm {
        BoolTerm::Pred(name.into(), Box::new(arg))
    }

    pub fn size(&self) -> usize {
        match self {
            BoolTerm::True | BoolTerm::False => 1,
            BoolTerm::Pred(_, m) => 1 + m.size(),
        }
    }
}

/// `let x:ty = bound in b`, pushed into the predicate argument since boolean
/// terms have no `let` former.
pub fn let_bool(x: &str, ty: &Ty, bound: &Term, b: &BoolTerm) -> BoolTerm {
    match b {
        BoolTerm::True | BoolTerm::False => b.clone(),
        BoolTerm::Pred(p, m) => BoolTerm::pred(
            p.clone(),
            Term::let_(x, ty.clone(), bound.clone(), (**m).clone()),
        ),
    }
}

/// Operation and predicate symbols with their types, plus the map sending
/// each operation to the symbol for its reverse derivative.
#[derive(Debug, Clone, Default)]
pub struct Signature {
    pub ops: BTreeMap<String, (Ty, Ty)>,
    pub preds: BTreeMap<String, Ty>,
    pub reverse_map: BTreeMap<String, String>,
}

/// Base operations of the standard signature.
pub const STANDARD_BASE_OPS: [&str; 8] = ["add", "mul", "neg", "sin", "cos", "exp", "recip", "sqrtp"];

/// How many times the reverse-derivative suffix `_R` is iterated in the
/// standard signature; the deepest symbols have no reverse.
pub const STANDARD_REVERSE_DEPTH: usize = 4;

impl Signature {
    /// The standard signature: `add`, `mul` on `real * real`; unary `neg`,
    /// `sin`, `cos`, `exp`, `recip`, `sqrtp`; the reverse chain `op_R`,
    /// `op_RR`, ... of each; predicates `gt0` and `lt0` on `real`.
    pub fn standard() -> Signature {
        let mut sig = Signature::default();
        let rr = Ty::prod(Ty::Real, Ty::Real);
        for op in STANDARD_BASE_OPS {
            let dom = if op == "add" || op == "mul" { rr.clone() } else { Ty::Real };
            sig.add_op_with_reverse_chain(op, dom, Ty::Real, STANDARD_REVERSE_DEPTH);
        }
        sig.preds.insert("gt0".into(), Ty::Real);
        sig.preds.insert("lt0".into(), Ty::Real);
        sig
    }

    /// Registers `name : dom -> cod` and `depth` iterated reverse symbols
    /// `name_R : dom * cod -> dom`, `name_RR`, ...
    pub fn add_op_with_reverse_chain(&mut self, name: &str, dom: Ty, cod: Ty, depth: usize) {
        let mut cur = name.to_string();
        let (mut d, mut c) = (dom, cod);
        self.ops.insert(cur.clone(), (d.clone(), c.clone()));
        for _ in 0..depth {
            let next = reverse_name(&cur);
            let nd = Ty::prod(d.clone(), c);
            c = d;
            d = nd;
            self.ops.insert(next.clone(), (d.clone(), c.clone()));
            self.reverse_map.insert(cur, next.clone());
            cur = next;
        }
    }

    pub fn op_type(&self, name: &str) -> Option<&(Ty, Ty)> {
        self.ops.get(name)
    }

    pub fn reverse_of(&self, name: &str) -> Option<&str> {
        self.reverse_map.get(name).map(String::as_str)
    }
}

/// `sin` -> `sin_R`, `sin_R` -> `sin_RR`.
pub fn reverse_name(op: &str) -> String {
    if op.contains("_R") && op.ends_with('R') {
        format!("{op}R")
    } else {
        format!("{op}_R")
    }
}

/// Counter-based supply of fresh names. Generated names carry a `#n` suffix,
/// which the lexer accepts after the first character of an identifier.
#[derive(Debug, Clone, Default)]
pub struct NameSupply {
    next: u64,
}

impl NameSupply {
    pub fn new() -> NameSupply {
        NameSupply { next: 0 }
    }

    pub fn seeded(seed: u64) -> NameSupply {
        NameSupply { next: seed }
    }

    /// A supply whose names cannot clash with any `#n` name already in `terms`.
    pub fn avoiding<'a>(terms: impl IntoIterator<Item = &'a Term>) -> NameSupply {
        let mut max = 0;
        for t in terms {
            collect_names(t, &mut |n| {
                if let Some((_, suffix)) = n.rsplit_once('#') {
                    if let Ok(k) = suffix.parse::<u64>() {
                        max = max.max(k + 1);
                    }
                }
            });
        }
        NameSupply { next: max }
    }

    /// Makes sure no name with a suffix below `n` is generated.
    pub fn reserve_below(&mut self, n: u64) {
        self.next = self.next.max(n);
    }

    pub fn fresh(&mut self, base: &str) -> String {
        let base = base.split('#').next().unwrap_or(base);
        let base = if base.is_empty() { "v" } else { base };
        let name = format!("{base}#{}", self.next);
        self.next += 1;
        name
    }
}

fn collect_names(t: &Term, f: &mut impl FnMut(&str)) {
    match t {
        Term::Var(x) => f(x),
        Term::Let(x, _, _, _) => f(x),
        Term::Rd { var, .. } => f(var),
        Term::LetRec { name, param, .. } => {
            f(name);
            f(param);
        }
        Term::FunCall(name, _) => f(name),
        _ => {}
    }
    if let Some(BoolTerm::Pred(_, m)) = t.guard() {
        collect_names(m, f);
    }
    t.for_each_child(|c| collect_names(c, f));
}

pub fn free_vars(m: &Term) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    fv_into(m, &mut out);
    out
}

pub fn free_vars_bool(b: &BoolTerm) -> BTreeSet<String> {
    match b {
        BoolTerm::True | BoolTerm::False => BTreeSet::new(),
        BoolTerm::Pred(_, m) => free_vars(m),
    }
}

fn fv_into(m: &Term, out: &mut BTreeSet<String>) {
    match m {
        Term::Var(x) => {
            out.insert(x.clone());
        }
        Term::Let(x, _, bound, body) => {
            fv_into(bound, out);
            let mut inner = free_vars(body);
            inner.remove(x);
            out.extend(inner);
        }
        Term::Rd { dir, var, body, point, .. } => {
            fv_into(dir, out);
            fv_into(point, out);
            let mut inner = free_vars(body);
            inner.remove(var);
            out.extend(inner);
        }
        Term::LetRec { param, body, cont, .. } => {
            let mut inner = free_vars(body);
            inner.remove(param);
            out.extend(inner);
            fv_into(cont, out);
        }
        Term::If(b, _, _) | Term::While(b, _) => {
            out.extend(free_vars_bool(b));
            m.for_each_child(|c| fv_into(c, out));
        }
        _ => m.for_each_child(|c| fv_into(c, out)),
    }
}

/// Whether `x` is free in `m`, without building the free-variable set.
pub fn occurs_free(x: &str, m: &Term) -> bool {
    match m {
        Term::Var(y) => y == x,
        Term::Let(y, _, bound, body) => occurs_free(x, bound) || (y != x && occurs_free(x, body)),
        Term::Rd { dir, var, body, point, .. } => {
            occurs_free(x, dir) || occurs_free(x, point) || (var != x && occurs_free(x, body))
        }
        Term::LetRec { param, body, cont, .. } => (param != x && occurs_free(x, body)) || occurs_free(x, cont),
        Term::If(b, _, _) | Term::While(b, _) => {
            let in_guard = matches!(&**b, BoolTerm::Pred(_, g) if occurs_free(x, g));
            let mut found = in_guard;
            m.for_each_child(|c| found = found || occurs_free(x, c));
            found
        }
        _ => {
            let mut found = false;
            m.for_each_child(|c| found = found || occurs_free(x, c));
            found
        }
    }
}

/// Whether `m` has no free variables.
pub fn is_closed(m: &Term) -> bool {
    free_vars(m).is_empty()
}

pub fn free_fun_vars(m: &Term) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    ffv_into(m, &mut out);
    out
}

fn ffv_into(m: &Term, out: &mut BTreeSet<String>) {
    match m {
        Term::FunCall(f, arg) => {
            out.insert(f.clone());
            ffv_into(arg, out);
        }
        Term::LetRec { name, body, cont, .. } => {
            let mut inner = free_fun_vars(body);
            inner.extend(free_fun_vars(cont));
            inner.remove(name);
            out.extend(inner);
        }
        Term::If(b, _, _) | Term::While(b, _) => {
            if let BoolTerm::Pred(_, arg) = &**b {
                ffv_into(arg, out);
            }
            m.for_each_child(|c| ffv_into(c, out));
        }
        _ => m.for_each_child(|c| ffv_into(c, out)),
    }
}

/// Trace terms: variables, constants, `+`, operations, `let`, `*`, pairs and
/// projections, closed under subterms.
pub fn is_trace_term(m: &Term) -> bool {
    match m {
        Term::Var(_) | Term::Const(_) | Term::Star => true,
        Term::Add(a, b) | Term::Pair(a, b) | Term::Let(_, _, a, b) => {
            is_trace_term(a) && is_trace_term(b)
        }
        Term::Op(_, a) | Term::Fst(a) | Term::Snd(a) => is_trace_term(a),
        Term::If(..) | Term::While(..) | Term::Rd { .. } | Term::FunCall(..) | Term::LetRec { .. } => {
            false
        }
    }
}

/// Values: variables, constants, `*` and pairs of values.
pub fn is_value(m: &Term) -> bool {
    match m {
        Term::Var(_) | Term::Const(_) | Term::Star => true,
        Term::Pair(a, b) => is_value(a) && is_value(b),
        _ => false,
    }
}

/// The type of a term that is evident from its syntax alone, if any.
pub fn syntactic_type(m: &Term) -> Option<Ty> {
    match m {
        Term::Const(_) | Term::Add(..) => Some(Ty::Real),
        Term::Star => Some(Ty::Unit),
        Term::Pair(a, b) => Some(Ty::prod(syntactic_type(a)?, syntactic_type(b)?)),
        _ => None,
    }
}

/// Capture-avoiding substitution `m[v/x]`, where `x : x_ty`.
///
/// Loop guards and bodies only see the loop state, so a `while` whose state
/// variable is `x` becomes `let x:x_ty = v in while ...`.
pub fn substitute(m: &Term, x: &str, x_ty: &Ty, v: &Term) -> Term {
    let avoid = free_vars(v);
    subst(m, x, x_ty, v, &avoid)
}

fn subst(m: &Term, x: &str, x_ty: &Ty, v: &Term, avoid: &BTreeSet<String>) -> Term {
    let go = |t: &Term| subst(t, x, x_ty, v, avoid);
    match m {
        Term::Var(y) if y == x => v.clone(),
        Term::Var(_) | Term::Const(_) | Term::Star => m.clone(),
        Term::Add(a, b) => Term::add(go(a), go(b)),
        Term::Op(op, a) => Term::op(op.clone(), go(a)),
        Term::Pair(a, b) => Term::pair(go(a), go(b)),
        Term::Fst(a) => Term::fst(go(a)),
        Term::Snd(a) => Term::snd(go(a)),
        Term::FunCall(f, a) => Term::call(f.clone(), go(a)),
        Term::If(b, p, q) => Term::if_(subst_bool(b, x, x_ty, v, avoid), go(p), go(q)),
        Term::While(..) => {
            if free_vars(m).contains(x) {
                Term::let_(x, x_ty.clone(), v.clone(), m.clone())
            } else {
                m.clone()
            }
        }
        Term::Let(y, ty, bound, body) => {
            let bound = go(bound);
            let (y, body) = under_binder(y, ty, body, x, x_ty, v, avoid);
            Term::let_(y, ty.clone(), bound, body)
        }
        Term::Rd { dir, var, var_ty, body, point } => {
            let (var, body) = under_binder(var, var_ty, body, x, x_ty, v, avoid);
            Term::rd(go(dir), var, var_ty.clone(), body, go(point))
        }
        Term::LetRec { name, param, param_ty, ret_ty, body, cont } => {
            let (param, body) = under_binder(param, param_ty, body, x, x_ty, v, avoid);
            Term::letrec(name.clone(), param, param_ty.clone(), ret_ty.clone(), body, go(cont))
        }
    }
}

fn subst_bool(b: &BoolTerm, x: &str, x_ty: &Ty, v: &Term, avoid: &BTreeSet<String>) -> BoolTerm {
    match b {
        BoolTerm::True | BoolTerm::False => b.clone(),
        BoolTerm::Pred(p, m) => BoolTerm::pred(p.clone(), subst(m, x, x_ty, v, avoid)),
    }
}

fn under_binder(
    y: &str,
    y_ty: &Ty,
    body: &Term,
    x: &str,
    x_ty: &Ty,
    v: &Term,
    avoid: &BTreeSet<String>,
) -> (String, Term) {
    if y == x {
        return (y.to_string(), body.clone());
    }
    if !free_vars(body).contains(x) {
        return (y.to_string(), body.clone());
    }
    if avoid.contains(y) {
        let fresh = fresh_for(y, [body, v]);
        let renamed = substitute(body, y, y_ty, &Term::var(fresh.clone()));
        let body = subst(&renamed, x, x_ty, v, avoid);
        (fresh, body)
    } else {
        (y.to_string(), subst(body, x, x_ty, v, avoid))
    }
}

/// A name `base#k` occurring nowhere in `terms`.
pub fn fresh_for<'a>(base: &str, terms: impl IntoIterator<Item = &'a Term>) -> String {
    NameSupply::avoiding(terms).fresh(base)
}

/// Alpha-equivalence, treating bound variable names as irrelevant.
pub fn alpha_eq(a: &Term, b: &Term) -> bool {
    alpha(a, b, &mut Vec::new())
}

fn alpha(a: &Term, b: &Term, env: &mut Vec<(String, String)>) -> bool {
    fn lookup<'e>(env: &'e [(String, String)], x: &str, left: bool) -> Option<&'e str> {
        env.iter().rev().find_map(|(l, r)| {
            if left && l == x {
                Some(r.as_str())
            } else if !left && r == x {
                Some(l.as_str())
            } else {
                None
            }
        })
    }
    fn bind<T>(env: &mut Vec<(String, String)>, x: &str, y: &str, f: impl FnOnce(&mut Vec<(String, String)>) -> T) -> T {
        env.push((x.to_string(), y.to_string()));
        let r = f(env);
        env.pop();
        r
    }
    match (a, b) {
        (Term::Var(x), Term::Var(y)) => match (lookup(env, x, true), lookup(env, y, false)) {
            (Some(bx), Some(by)) => bx == y && by == x,
            (None, None) => x == y,
            _ => false,
        },
        (Term::Const(r), Term::Const(s)) => r.to_bits() == s.to_bits(),
        (Term::Star, Term::Star) => true,
        (Term::Add(a1, a2), Term::Add(b1, b2)) | (Term::Pair(a1, a2), Term::Pair(b1, b2)) => {
            alpha(a1, b1, env) && alpha(a2, b2, env)
        }
        (Term::Op(o, a1), Term::Op(p, b1)) | (Term::FunCall(o, a1), Term::FunCall(p, b1)) => {
            o == p && alpha(a1, b1, env)
        }
        (Term::Fst(a1), Term::Fst(b1)) | (Term::Snd(a1), Term::Snd(b1)) => alpha(a1, b1, env),
        (Term::Let(x, tx, a1, a2), Term::Let(y, ty, b1, b2)) => {
            tx == ty && alpha(a1, b1, env) && bind(env, x, y, |env| alpha(a2, b2, env))
        }
        (Term::If(g, a1, a2), Term::If(h, b1, b2)) => {
            alpha_bool(g, h, env) && alpha(a1, b1, env) && alpha(a2, b2, env)
        }
        (Term::While(g, a1), Term::While(h, b1)) => alpha_bool(g, h, env) && alpha(a1, b1, env),
        (
            Term::Rd { dir: d1, var: x, var_ty: t1, body: m1, point: p1 },
            Term::Rd { dir: d2, var: y, var_ty: t2, body: m2, point: p2 },
        ) => {
            t1 == t2
                && alpha(d1, d2, env)
                && alpha(p1, p2, env)
                && bind(env, x, y, |env| alpha(m1, m2, env))
        }
        (
            Term::LetRec { name: f1, param: x, param_ty: t1, ret_ty: r1, body: m1, cont: n1 },
            Term::LetRec { name: f2, param: y, param_ty: t2, ret_ty: r2, body: m2, cont: n2 },
        ) => {
            f1 == f2
                && t1 == t2
                && r1 == r2
                && bind(env, x, y, |env| alpha(m1, m2, env))
                && alpha(n1, n2, env)
        }
        _ => false,
    }
}

fn alpha_bool(a: &BoolTerm, b: &BoolTerm, env: &mut Vec<(String, String)>) -> bool {
    match (a, b) {
        (BoolTerm::True, BoolTerm::True) | (BoolTerm::False, BoolTerm::False) => true,
        (BoolTerm::Pred(p, m), BoolTerm::Pred(q, n)) => p == q && alpha(m, n, env),
        _ => false,
    }
}

impl fmt::Display for Ty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ty::Real => write!(f, "real"),
            Ty::Unit => write!(f, "1"),
            Ty::Prod(a, b) => {
                write!(f, "{a} * ")?;
                if matches!(**b, Ty::Prod(..)) {
                    write!(f, "({b})")
                } else {
                    write!(f, "{b}")
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x() -> Term {
        Term::var("x")
    }

    #[test]
    fn free_vars_of_variable() {
        assert_eq!(free_vars(&x()), BTreeSet::from(["x".to_string()]));
    }

    #[test]
    fn rd_binds_its_variable() {
        let m = Term::rd(Term::var("v"), "x", Ty::Real, Term::add(x(), Term::var("y")), Term::var("a"));
        let expected: BTreeSet<String> = ["v", "y", "a"].iter().map(|s| s.to_string()).collect();
        assert_eq!(free_vars(&m), expected);
    }

    #[test]
    fn letrec_binds_function_in_body_and_continuation() {
        let m = Term::letrec(
            "f",
            "x",
            Ty::Real,
            Ty::Real,
            Term::call("f", x()),
            Term::call("f", Term::Const(1.0)),
        );
        assert!(free_fun_vars(&m).is_empty());
        assert!(free_vars(&m).is_empty());
    }

    #[test]
    fn trace_and_value_classification() {
        let m = Term::if_(BoolTerm::True, x(), x());
        assert!(!is_trace_term(&m));
        assert!(is_value(&Term::pair(Term::Const(1.0), Term::Star)));
        let l = Term::let_("x", Ty::Real, Term::op("sin", Term::var("y")), x());
        assert!(is_trace_term(&l));
        assert!(!is_value(&l));
        assert!(is_trace_term(&Term::add(x(), x())));
    }

    #[test]
    fn substitution_basics() {
        assert_eq!(substitute(&x(), "x", &Ty::Real, &Term::Const(2.0)), Term::Const(2.0));
        let shadow = Term::let_("x", Ty::Real, x(), x());
        assert_eq!(
            substitute(&shadow, "x", &Ty::Real, &Term::Const(2.0)),
            Term::let_("x", Ty::Real, Term::Const(2.0), x())
        );
    }

    #[test]
    fn substitution_renames_to_avoid_capture() {
        let m = Term::rd(Term::var("v"), "x", Ty::Real, x(), Term::var("y"));
        let out = substitute(&m, "y", &Ty::Real, &x());
        let expected = Term::rd(Term::var("v"), "x'", Ty::Real, Term::var("x'"), x());
        assert!(alpha_eq(&out, &expected), "{out}");

        let m = Term::rd(Term::var("v"), "x", Ty::Real, Term::add(x(), Term::var("y")), Term::var("y"));
        let out = substitute(&m, "y", &Ty::Real, &x());
        match &out {
            Term::Rd { var, body, point, .. } => {
                assert_ne!(var, "x");
                assert_eq!(**body, Term::add(Term::var(var.clone()), x()));
                assert_eq!(**point, x());
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn substituting_loop_state_binds_it() {
        let w = Term::while_(BoolTerm::pred("gt0", Term::var("p")), Term::var("p"));
        let out = substitute(&w, "p", &Ty::Real, &Term::Const(3.0));
        assert_eq!(out, Term::let_("p", Ty::Real, Term::Const(3.0), w));
    }

    #[test]
    fn reverse_chain_types() {
        let sig = Signature::standard();
        let rr = Ty::prod(Ty::Real, Ty::Real);
        assert_eq!(sig.reverse_of("mul"), Some("mul_R"));
        assert_eq!(sig.reverse_of("mul_R"), Some("mul_RR"));
        assert_eq!(sig.op_type("mul_R"), Some(&(Ty::prod(rr.clone(), Ty::Real), rr)));
        assert_eq!(sig.op_type("sin_R"), Some(&(Ty::prod(Ty::Real, Ty::Real), Ty::Real)));
        assert_eq!(sig.reverse_of("sin_RRRR"), None);
        let targets: BTreeSet<_> = sig.reverse_map.values().collect();
        assert_eq!(targets.len(), sig.reverse_map.len());
    }

    #[test]
    fn fresh_names_avoid_existing_suffixes() {
        let t = Term::var("t#7");
        let mut s = NameSupply::avoiding([&t]);
        assert_eq!(s.fresh("t"), "t#8");
        assert_eq!(s.fresh("z#3"), "z#9");
    }

    #[test]
    fn alpha_equivalence_ignores_bound_names() {
        let a = Term::let_("x", Ty::Real, Term::Const(1.0), x());
        let b = Term::let_("y", Ty::Real, Term::Const(1.0), Term::var("y"));
        assert!(alpha_eq(&a, &b));
        let c = Term::let_("y", Ty::Real, Term::Const(1.0), x());
        assert!(!alpha_eq(&a, &c));
    }
}
