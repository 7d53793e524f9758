//! Denotations of terms as partial smooth maps `⟦Γ⟧ -> ⟦T⟧`.

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use crate::opsem::FunEnv;
use crate::rdrc::{approx_eq, Functional, PMap, PrimTable, RdrcError};
use crate::syntax::{BoolTerm, Signature, Term, Ty, STANDARD_REVERSE_DEPTH};
use crate::typing::{Context, FunContext, TypeError};

pub const DEFAULT_FUEL: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InterpError {
    #[error(transparent)]
    Type(#[from] TypeError),
    #[error(transparent)]
    Map(#[from] RdrcError),
    #[error("operation `{0}` has no denotation")]
    MissingOp(String),
    #[error("predicate `{0}` has no denotation")]
    MissingPred(String),
}

/// Where the language is interpreted: the dimension of `⟦real⟧`, a map for
/// each operation and a disjoint pair of partial maps into `R^0` for each
/// predicate.
#[derive(Debug, Clone)]
pub struct InterpretationStructure {
    pub sig: Signature,
    pub carrier: usize,
    pub ops: BTreeMap<String, PMap>,
    pub preds: BTreeMap<String, (PMap, PMap)>,
}

impl InterpretationStructure {
    /// The standard signature over `R`, with `gt0` true on `x > 0` and false
    /// on `x < 0` (and `lt0` the other way round); both undefined at `0`.
    pub fn standard() -> InterpretationStructure {
        let sig = Signature::standard();
        let table = PrimTable::standard(STANDARD_REVERSE_DEPTH);
        let ops = sig
            .ops
            .keys()
            .filter_map(|op| table.get(op).map(|p| (op.clone(), PMap::prim(p))))
            .collect();
        let pred = |name: &str| {
            let half = |h: &str| PMap::prim(table.get(&format!("{name}_{h}")).unwrap());
            (name.to_string(), (half("T"), half("F")))
        };
        let preds = [pred("gt0"), pred("lt0")].into_iter().collect();
        InterpretationStructure { sig, carrier: 1, ops, preds }
    }

    pub fn denote_type(&self, t: &Ty) -> usize {
        match t {
            Ty::Real => self.carrier,
            Ty::Unit => 0,
            Ty::Prod(a, b) => self.denote_type(a) + self.denote_type(b),
        }
    }

    pub fn context_dim(&self, gamma: &Context) -> usize {
        gamma.iter().map(|(_, t)| self.denote_type(t)).sum()
    }

    /// Checks on `points` (per operation domain, drawn by the caller) that
    /// each `op_R` denotes `R[op]` and that predicate halves are disjoint.
    /// Returns the names that fail.
    pub fn denotational_defects(&self, points: impl Fn(usize) -> Vec<Vec<f64>>) -> Vec<String> {
        let mut bad = Vec::new();
        for (op, rev) in &self.sig.reverse_map {
            let (Some(f), Some(fr)) = (self.ops.get(op), self.ops.get(rev)) else { continue };
            let r = PMap::reverse(f);
            let ok = points(fr.dom()).iter().all(|x| match (r.eval(x), fr.eval(x)) {
                (Ok(Some(a)), Ok(Some(b))) => approx_eq(&a, &b, 1e-9),
                (Ok(None), Ok(None)) => true,
                (Err(RdrcError::MissingReversePrimitive(_)), _) => true,
                _ => false,
            });
            if !ok {
                bad.push(rev.clone());
            }
        }
        for (p, (t, f)) in &self.preds {
            if !crate::rdrc::disjoint(t, f, &points(t.dom())) {
                bad.push(p.clone());
            }
        }
        bad
    }
}

/// An element of `⟦Φ⟧`: a map for each function variable.
#[derive(Debug, Clone, Default)]
pub struct FunAssignment {
    funs: BTreeMap<String, (Ty, Ty, PMap)>,
}

impl FunAssignment {
    pub fn new() -> FunAssignment {
        FunAssignment::default()
    }

    pub fn insert(&mut self, f: impl Into<String>, arg: Ty, ret: Ty, map: PMap) {
        self.funs.insert(f.into(), (arg, ret, map));
    }

    pub fn extended(&self, f: &str, arg: Ty, ret: Ty, map: PMap) -> FunAssignment {
        let mut out = self.clone();
        out.insert(f, arg, ret, map);
        out
    }

    pub fn get(&self, f: &str) -> Option<&PMap> {
        self.funs.get(f).map(|(_, _, m)| m)
    }

    pub fn len(&self) -> usize {
        self.funs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.funs.is_empty()
    }

    pub fn fun_context(&self) -> FunContext {
        self.funs.iter().map(|(f, (a, r, _))| (f.clone(), a.clone(), r.clone())).collect()
    }
}

/// `⟦Γ ⊢ m⟧`.
pub fn denote(
    i: &InterpretationStructure,
    phi: &FunAssignment,
    gamma: &Context,
    m: &Term,
    fuel: usize,
) -> Result<PMap, InterpError> {
    denote_typed(i, phi, gamma, m, fuel).map(|(f, _)| f)
}

/// The denotation together with the type of `m`.
pub fn denote_typed(
    i: &InterpretationStructure,
    phi: &FunAssignment,
    gamma: &Context,
    m: &Term,
    fuel: usize,
) -> Result<(PMap, Ty), InterpError> {
    Denoter { i, fuel }.term(phi, gamma, m)
}

/// `(⟦b⟧_T, ⟦b⟧_F)`, both `⟦Γ⟧ -> R^0`.
pub fn denote_bool(
    i: &InterpretationStructure,
    phi: &FunAssignment,
    gamma: &Context,
    b: &BoolTerm,
    fuel: usize,
) -> Result<(PMap, PMap), InterpError> {
    Denoter { i, fuel }.boolean(phi, gamma, b)
}

/// The `fuel`-th Kleene approximant `F^fuel(∅)` of a functional on maps
/// `dom -> cod`.
pub fn kleene_fix(functional: Functional, dom: usize, cod: usize, fuel: usize) -> PMap {
    PMap::fixpoint(functional, dom, cod, fuel)
}

/// The element of `⟦Φ⟧` given by a function environment: each closure
/// denotes the fixed point of its body, interpreted under its own saved
/// environment.
pub fn denote_funenv(i: &InterpretationStructure, env: &FunEnv, fuel: usize) -> Result<FunAssignment, InterpError> {
    let mut out = FunAssignment::new();
    for c in env.closures() {
        let saved = denote_funenv(i, &c.saved, fuel)?;
        let map = Denoter { i, fuel }.recursive(&saved, &c.name, &c.param, &c.param_ty, &c.ret_ty, &c.body)?;
        out.insert(c.name.clone(), c.param_ty.clone(), c.ret_ty.clone(), map);
    }
    Ok(out)
}

struct Denoter<'a> {
    i: &'a InterpretationStructure,
    fuel: usize,
}

impl Denoter<'_> {
    fn dim(&self, t: &Ty) -> usize {
        self.i.denote_type(t)
    }

    fn term(&self, phi: &FunAssignment, gamma: &Context, m: &Term) -> Result<(PMap, Ty), InterpError> {
        let g = self.i.context_dim(gamma);
        Ok(match m {
            Term::Var(x) => {
                let j = (0..gamma.len())
                    .rev()
                    .find(|&j| gamma.get(j).0 == x)
                    .ok_or_else(|| TypeError::UnboundVariable(x.clone()))?;
                let ty = gamma.get(j).1.clone();
                let before: usize = (0..j).map(|k| self.dim(gamma.get(k).1)).sum();
                let d = self.dim(&ty);
                let weaken = PMap::proj0(before + d, g - before - d);
                (PMap::compose(&weaken, &PMap::proj1(before, d))?, ty)
            }
            Term::Const(r) if *r == 0.0 => (PMap::zero(g, self.i.carrier), Ty::Real),
            Term::Const(r) => {
                let point = PMap::const_point(vec![*r; self.i.carrier]);
                (PMap::compose(&PMap::bang(g), &point)?, Ty::Real)
            }
            Term::Add(a, b) => {
                let (fa, ta) = self.term(phi, gamma, a)?;
                let (fb, tb) = self.term(phi, gamma, b)?;
                expect(a, &Ty::Real, &ta)?;
                expect(b, &Ty::Real, &tb)?;
                (PMap::add(&fa, &fb)?, Ty::Real)
            }
            Term::Op(op, arg) => {
                let (dom, cod) = self.i.sig.op_type(op).ok_or_else(|| TypeError::UnknownOp(op.clone()))?;
                let (fa, ta) = self.term(phi, gamma, arg)?;
                expect(arg, dom, &ta)?;
                let f = self.i.ops.get(op).ok_or_else(|| InterpError::MissingOp(op.clone()))?;
                (PMap::compose(&fa, f)?, cod.clone())
            }
            Term::Let(x, ty, bound, body) => {
                let (fb, tb) = self.term(phi, gamma, bound)?;
                expect(bound, ty, &tb)?;
                let (fm, tm) = self.term(phi, &gamma.extended(x.clone(), ty.clone()), body)?;
                let entry = PMap::pair(&PMap::identity(g), &fb)?;
                (PMap::compose(&entry, &fm)?, tm)
            }
            Term::Star => (PMap::bang(g), Ty::Unit),
            Term::Pair(a, b) => {
                let (fa, ta) = self.term(phi, gamma, a)?;
                let (fb, tb) = self.term(phi, gamma, b)?;
                (PMap::pair(&fa, &fb)?, Ty::prod(ta, tb))
            }
            Term::Fst(p) | Term::Snd(p) => {
                let (fp, tp) = self.term(phi, gamma, p)?;
                let Ty::Prod(ta, tb) = tp else {
                    return Err(mismatch(p, "a product type", &tp).into());
                };
                let (da, db) = (self.dim(&ta), self.dim(&tb));
                if matches!(m, Term::Fst(_)) {
                    (PMap::compose(&fp, &PMap::proj0(da, db))?, *ta)
                } else {
                    (PMap::compose(&fp, &PMap::proj1(da, db))?, *tb)
                }
            }
            Term::If(b, t, e) => {
                let (bt, bf) = self.boolean(phi, gamma, b)?;
                let (ft, tt) = self.term(phi, gamma, t)?;
                let (fe, te) = self.term(phi, gamma, e)?;
                expect(e, &tt, &te)?;
                let d = ft.cod();
                let branches = vec![
                    PMap::compose(&PMap::restrict(&bt), &ft)?,
                    PMap::compose(&PMap::restrict(&bf), &fe)?,
                ];
                (PMap::join(branches, g, d)?, tt)
            }
            Term::While(b, body) => {
                let Some((p, u)) = gamma.last() else {
                    return Err(TypeError::WhileContextViolation {
                        term: m.to_string(),
                        reason: "the context is empty, so there is no loop variable".into(),
                    }
                    .into());
                };
                let single = Context::singleton(p, u.clone());
                let u = u.clone();
                let (bt, bf) = self.boolean(phi, &single, b)?;
                let (fm, tm) = self.term(phi, &single, body)?;
                expect(body, &u, &tm)?;
                let step = PMap::compose(&PMap::restrict(&bt), &fm)?;
                let l = PMap::while_loop(&step, &PMap::restrict(&bf), self.fuel)?;
                let d = self.dim(&u);
                (PMap::compose(&PMap::proj1(g - d, d), &l)?, u)
            }
            Term::Rd { dir, var, var_ty, body, point } => {
                let (fm, tm) = self.term(phi, &gamma.extended(var.clone(), var_ty.clone()), body)?;
                let (fa, ta) = self.term(phi, gamma, point)?;
                let (fv, tv) = self.term(phi, gamma, dir)?;
                expect(point, var_ty, &ta)?;
                expect(dir, &tm, &tv)?;
                let entry = PMap::pair(&PMap::pair(&PMap::identity(g), &fa)?, &fv)?;
                let out = PMap::proj1(g, self.dim(var_ty));
                (PMap::seq(&[&entry, &PMap::reverse(&fm), &out])?, var_ty.clone())
            }
            Term::FunCall(f, arg) => {
                let (a, r, h) = phi.funs.get(f).ok_or_else(|| TypeError::UnboundFunction(f.clone()))?;
                let (fa, ta) = self.term(phi, gamma, arg)?;
                if ta != *a {
                    return Err(TypeError::ArityMismatch { name: f.clone(), expected: a.clone(), found: ta }.into());
                }
                (PMap::compose(&fa, h)?, r.clone())
            }
            Term::LetRec { name, param, param_ty, ret_ty, body, cont } => {
                let fix = self.recursive(phi, name, param, param_ty, ret_ty, body)?;
                let inner = phi.extended(name, param_ty.clone(), ret_ty.clone(), fix);
                self.term(&inner, gamma, cont)?
            }
        })
    }

    /// `kleene_fix(h ↦ ⟦param ⊢ body⟧_(φ, name ↦ h))`.
    fn recursive(
        &self,
        phi: &FunAssignment,
        name: &str,
        param: &str,
        param_ty: &Ty,
        ret_ty: &Ty,
        body: &Term,
    ) -> Result<PMap, InterpError> {
        let (dom, cod) = (self.dim(param_ty), self.dim(ret_ty));
        let single = Context::singleton(param, param_ty.clone());
        // Any error other than a map error shows up here already, since the
        // functional only varies the map assigned to `name`.
        let probe = phi.extended(name, param_ty.clone(), ret_ty.clone(), PMap::empty(dom, cod));
        let (_, found) = self.term(&probe, &single, body)?;
        expect(body, ret_ty, &found)?;

        let i = self.i.clone();
        let (phi, fuel) = (phi.clone(), self.fuel);
        let (name, param_ty, ret_ty, body) = (name.to_string(), param_ty.clone(), ret_ty.clone(), body.clone());
        let functional: Functional = Arc::new(move |h| {
            let inner = phi.extended(&name, param_ty.clone(), ret_ty.clone(), h);
            match (Denoter { i: &i, fuel }).term(&inner, &single, &body) {
                Ok((f, _)) => Ok(f),
                Err(InterpError::Map(e)) => Err(e),
                Err(other) => unreachable!("checked before the fixed point was built: {other}"),
            }
        });
        Ok(kleene_fix(functional, dom, cod, self.fuel))
    }

    fn boolean(&self, phi: &FunAssignment, gamma: &Context, b: &BoolTerm) -> Result<(PMap, PMap), InterpError> {
        let g = self.i.context_dim(gamma);
        Ok(match b {
            BoolTerm::True => (PMap::bang(g), PMap::empty(g, 0)),
            BoolTerm::False => (PMap::empty(g, 0), PMap::bang(g)),
            BoolTerm::Pred(p, arg) => {
                let ty = self.i.sig.preds.get(p).ok_or_else(|| TypeError::UnknownPred(p.clone()))?;
                let (fa, ta) = self.term(phi, gamma, arg)?;
                expect(arg, ty, &ta)?;
                let (t, f) = self.i.preds.get(p).ok_or_else(|| InterpError::MissingPred(p.clone()))?;
                (PMap::compose(&fa, t)?, PMap::compose(&fa, f)?)
            }
        })
    }
}

fn mismatch(m: &Term, expected: &str, found: &Ty) -> TypeError {
    let mut term = m.to_string();
    if term.len() > 80 {
        term = format!("{}...", term.chars().take(77).collect::<String>());
    }
    TypeError::TypeMismatch { term, expected: expected.to_string(), found: found.clone() }
}

fn expect(m: &Term, expected: &Ty, found: &Ty) -> Result<(), InterpError> {
    if expected == found {
        Ok(())
    } else {
        Err(mismatch(m, &expected.to_string(), found).into())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_term;

    fn run(ctx: &[&str], src: &str, x: &[f64], fuel: usize) -> Option<Vec<f64>> {
        let i = InterpretationStructure::standard();
        let gamma: Context = ctx.iter().map(|v| (v.to_string(), Ty::Real)).collect();
        let m = parse_term(src, &i.sig).unwrap();
        denote(&i, &FunAssignment::new(), &gamma, &m, fuel).unwrap().eval(x).unwrap()
    }

    #[test]
    fn type_dimensions() {
        let i = InterpretationStructure::standard();
        assert_eq!(i.denote_type(&Ty::Unit), 0);
        assert_eq!(i.denote_type(&Ty::Real), 1);
        assert_eq!(i.denote_type(&Ty::prod(Ty::Real, Ty::prod(Ty::Real, Ty::Unit))), 2);
    }

    #[test]
    fn doubling() {
        assert_eq!(run(&["x"], "x + x", &[3.0], 10), Some(vec![6.0]));
    }

    #[test]
    fn variables_are_projections() {
        assert_eq!(run(&["x", "y", "x"], "(x, y)", &[1.0, 2.0, 3.0], 10), Some(vec![3.0, 2.0]));
    }

    #[test]
    fn countdown_matches_simulation() {
        let mut p = 2.5;
        while p > 0.0 {
            p -= 1.0;
        }
        assert_eq!(run(&["p"], "while gt0(p) do add(p, -1)", &[2.5], 100), Some(vec![p]));
        assert_eq!(run(&["p"], "while gt0(p) do add(p, -1)", &[2.5], 2), None);
    }

    #[test]
    fn reverse_derivative_of_square() {
        assert_eq!(run(&["a", "v"], "v.rd(x:real. mul(x,x))(a)", &[3.0, 1.0], 10), Some(vec![6.0]));
    }

    #[test]
    fn booleans() {
        let i = InterpretationStructure::standard();
        let gamma = Context::singleton("x", Ty::Real);
        let phi = FunAssignment::new();
        let (t, f) = denote_bool(&i, &phi, &gamma, &BoolTerm::True, 10).unwrap();
        assert_eq!(t.eval(&[1.0]).unwrap(), Some(vec![]));
        assert_eq!(f.eval(&[1.0]).unwrap(), None);
        let b = BoolTerm::pred("gt0", Term::var("x"));
        let (t, f) = denote_bool(&i, &phi, &gamma, &b, 10).unwrap();
        assert!(t.eval(&[1.0]).unwrap().is_some());
        assert!(t.eval(&[-1.0]).unwrap().is_none());
        assert!(f.eval(&[-1.0]).unwrap().is_some());
    }

    #[test]
    fn factorial() {
        let src = "letrec fact(n:real):real = if gt0(add(n, -0.5)) then mul(n, fact(add(n, -1))) else 1 in fact(x)";
        let oracle = |n: u32| (1..=n).product::<u32>() as f64;
        assert_eq!(run(&["x"], src, &[5.0], 10), Some(vec![oracle(5)]));
        assert_eq!(run(&["x"], src, &[5.0], 5), None);
        assert_eq!(run(&["x"], src, &[5.0], 7), Some(vec![120.0]));
    }

    #[test]
    fn standard_structure_is_denotational() {
        let i = InterpretationStructure::standard();
        let points = |d: usize| {
            (0..20).map(|k| (0..d).map(|j| 0.37 * (k as f64) - 2.9 + 0.11 * j as f64).collect()).collect()
        };
        assert!(i.denotational_defects(points).is_empty());
    }
}
