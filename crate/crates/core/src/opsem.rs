//! Big-step evaluation `⇒` to values and symbolic evaluation `⇝` to trace
//! terms.

use std::sync::Arc;

use thiserror::Error;

use crate::interp::InterpretationStructure;
use crate::rdrc::RdrcError;
use crate::symdiff::{rd_symbolic, RdMode, SymDiffError};
use crate::syntax::{free_vars, is_closed, is_value, syntactic_type, BoolTerm, NameSupply, Term, Ty};
use crate::typing::Context;

pub const DEFAULT_BUDGET: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OpsemError {
    #[error("step budget exhausted")]
    OutOfFuel,
    #[error("predicate is undefined at its argument: {0}")]
    StuckPredicate(String),
    #[error("`{op}` is undefined at {arg}")]
    UndefinedPrimitive { op: String, arg: String },
    #[error("unbound name `{0}`")]
    UnboundName(String),
    #[error("guard depends on a symbolic variable: {0}")]
    SymbolicGuard(String),
    #[error("ill-typed value: {0}")]
    IllTyped(String),
    #[error(transparent)]
    SymDiff(#[from] SymDiffError),
    #[error(transparent)]
    Map(#[from] RdrcError),
}

impl OpsemError {
    /// Short machine-readable name of the error.
    pub fn kind(&self) -> &'static str {
        match self {
            OpsemError::OutOfFuel => "OutOfFuel",
            OpsemError::StuckPredicate(_) => "StuckPredicate",
            OpsemError::UndefinedPrimitive { .. } => "UndefinedPrimitive",
            OpsemError::UnboundName(_) => "UnboundName",
            OpsemError::SymbolicGuard(_) => "SymbolicGuard",
            OpsemError::IllTyped(_) => "IllTyped",
            OpsemError::SymDiff(_) => "SymDiff",
            OpsemError::Map(_) => "Map",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct OpsemConfig {
    /// Maximum number of rule applications.
    pub budget: u64,
    /// How `rd` nodes met during evaluation are differentiated.
    pub mode: RdMode,
    /// Lower bound for the counter of generated names.
    pub seed: u64,
}

impl Default for OpsemConfig {
    fn default() -> Self {
        OpsemConfig { budget: DEFAULT_BUDGET, mode: RdMode::Optimized, seed: 0 }
    }
}

#[derive(Debug, Clone)]
struct Entry {
    name: String,
    ty: Ty,
    /// What the variable stands for in the emitted trace: its value, or a
    /// trace variable when symbolic.
    repr: Term,
    value: Term,
}

impl Entry {
    /// Whether the variable stands for a term with trace variables in it
    /// rather than for its value.
    fn is_symbolic(&self) -> bool {
        self.repr != self.value
    }
}

/// Variables bound to closed values. A symbolic variable also carries the
/// value at which guards are decided, but stays a variable in traces.
#[derive(Debug, Clone, Default)]
pub struct ValueEnv {
    entries: Vec<Entry>,
}

impl ValueEnv {
    pub fn new() -> ValueEnv {
        ValueEnv::default()
    }

    pub fn bind(&mut self, name: impl Into<String>, ty: Ty, value: Term) {
        debug_assert!(is_value(&value) && free_vars(&value).is_empty());
        self.entries.push(Entry { name: name.into(), ty, repr: value.clone(), value });
    }

    pub fn bind_symbolic(&mut self, name: impl Into<String>, ty: Ty, at: Term) {
        let name = name.into();
        self.entries.push(Entry { repr: Term::var(name.clone()), name, ty, value: at });
    }

    pub fn with(mut self, name: impl Into<String>, ty: Ty, value: Term) -> ValueEnv {
        self.bind(name, ty, value);
        self
    }

    pub fn lookup(&self, name: &str) -> Option<&Term> {
        self.find(name).map(|e| &e.value)
    }

    fn find(&self, name: &str) -> Option<&Entry> {
        self.entries.iter().rev().find(|e| e.name == name)
    }

    /// The variables in scope with their types.
    pub fn context(&self) -> Context {
        self.entries.iter().map(|e| (e.name.clone(), e.ty.clone())).collect()
    }

    /// Types of the trace variables introduced by symbolic bindings.
    fn trace_context(&self) -> Context {
        self.entries
            .iter()
            .filter_map(|e| match &e.repr {
                Term::Var(v) => Some((v.clone(), e.ty.clone())),
                _ => None,
            })
            .collect()
    }

    fn trace_valuation(&self) -> Vec<(String, Term)> {
        self.entries
            .iter()
            .filter_map(|e| match &e.repr {
                Term::Var(v) => Some((v.clone(), e.value.clone())),
                _ => None,
            })
            .collect()
    }
}

/// A recursive function definition together with the functions visible
/// where it was defined.
#[derive(Debug, Clone)]
pub struct Closure {
    pub saved: FunEnv,
    pub name: String,
    pub param: String,
    pub param_ty: Ty,
    pub ret_ty: Ty,
    pub body: Term,
}

#[derive(Debug, Clone, Default)]
pub struct FunEnv {
    closures: Vec<Arc<Closure>>,
}

impl FunEnv {
    pub fn new() -> FunEnv {
        FunEnv::default()
    }

    pub fn extended(&self, c: Closure) -> FunEnv {
        let mut out = self.clone();
        out.closures.push(Arc::new(c));
        out
    }

    pub fn lookup(&self, f: &str) -> Option<&Arc<Closure>> {
        self.closures.iter().rev().find(|c| c.name == f)
    }

    /// Closures in definition order; later ones shadow earlier ones.
    pub fn closures(&self) -> impl Iterator<Item = &Closure> {
        self.closures.iter().map(|c| &**c)
    }

    pub fn is_empty(&self) -> bool {
        self.closures.is_empty()
    }
}

/// `m ⇒ v`.
pub fn eval(
    rho: &ValueEnv,
    phi: &FunEnv,
    i: &InterpretationStructure,
    m: &Term,
    cfg: &OpsemConfig,
) -> Result<Term, OpsemError> {
    let mut ev = Evaluator::new(i, m, cfg);
    Ok(ev.run(&mut rho.clone(), phi, m)?.value)
}

/// `m ⇝ c`, together with the value `m ⇒ v`. Only symbolic variables of
/// `rho` remain free in `c`; everything else is evaluated away.
pub fn symbolic_eval(
    rho: &ValueEnv,
    phi: &FunEnv,
    i: &InterpretationStructure,
    m: &Term,
    cfg: &OpsemConfig,
) -> Result<(Term, Term), OpsemError> {
    let mut ev = Evaluator::new(i, m, cfg);
    let out = ev.run(&mut rho.clone(), phi, m)?;
    Ok((out.trace(), out.value))
}

/// Flattens a closed value to its coordinates.
pub fn encode(v: &Term) -> Vec<f64> {
    let mut out = Vec::new();
    fn go(v: &Term, out: &mut Vec<f64>) {
        match v {
            Term::Const(r) => out.push(*r),
            Term::Pair(a, b) => {
                go(a, out);
                go(b, out);
            }
            _ => {}
        }
    }
    go(v, &mut out);
    out
}

/// The value of type `ty` with the given coordinates.
pub fn decode(ty: &Ty, xs: &[f64]) -> Option<Term> {
    fn go(ty: &Ty, xs: &mut std::slice::Iter<'_, f64>) -> Option<Term> {
        Some(match ty {
            Ty::Real => Term::Const(*xs.next()?),
            Ty::Unit => Term::Star,
            Ty::Prod(a, b) => {
                let a = go(a, xs)?;
                Term::pair(a, go(b, xs)?)
            }
        })
    }
    let mut it = xs.iter();
    let v = go(ty, &mut it)?;
    it.next().is_none().then_some(v)
}

/// Result of evaluating a subterm: `trace` is `None` when it would just be
/// `value`.
struct Out {
    trace: Option<Term>,
    value: Term,
}

impl Out {
    fn concrete(value: Term) -> Out {
        Out { trace: None, value }
    }

    fn trace(&self) -> Term {
        self.trace.clone().unwrap_or_else(|| self.value.clone())
    }
}

struct Evaluator<'a> {
    i: &'a InterpretationStructure,
    cfg: OpsemConfig,
    steps: u64,
    supply: NameSupply,
}

impl<'a> Evaluator<'a> {
    fn new(i: &'a InterpretationStructure, m: &Term, cfg: &OpsemConfig) -> Evaluator<'a> {
        let mut supply = NameSupply::avoiding([m]);
        supply.reserve_below(cfg.seed);
        Evaluator { i, cfg: *cfg, steps: 0, supply }
    }

    fn tick(&mut self) -> Result<(), OpsemError> {
        self.steps += 1;
        if self.steps > self.cfg.budget {
            Err(OpsemError::OutOfFuel)
        } else {
            Ok(())
        }
    }

    fn apply_op(&self, op: &str, v: &Term) -> Result<Term, OpsemError> {
        let f = self.i.ops.get(op).ok_or_else(|| OpsemError::UnboundName(op.to_string()))?;
        let (_, cod) = self.i.sig.op_type(op).ok_or_else(|| OpsemError::UnboundName(op.to_string()))?;
        let undefined = || OpsemError::UndefinedPrimitive { op: op.to_string(), arg: v.to_string() };
        let out = f.eval(&encode(v)).map_err(|e| match e {
            RdrcError::DimensionMismatch { .. } => OpsemError::IllTyped(format!("{op}({v})")),
            other => OpsemError::Map(other),
        })?;
        let out = out.ok_or_else(undefined)?;
        decode(cod, &out).ok_or_else(|| OpsemError::IllTyped(format!("{op}({v})")))
    }

    fn guard(&mut self, rho: &mut ValueEnv, phi: &FunEnv, b: &BoolTerm) -> Result<bool, OpsemError> {
        match b {
            BoolTerm::True => Ok(true),
            BoolTerm::False => Ok(false),
            BoolTerm::Pred(p, arg) => {
                let v = self.run(rho, phi, arg)?.value;
                let (t, f) = self.i.preds.get(p).ok_or_else(|| OpsemError::UnboundName(p.clone()))?;
                let x = encode(&v);
                if t.eval(&x)?.is_some() {
                    Ok(true)
                } else if f.eval(&x)?.is_some() {
                    Ok(false)
                } else {
                    Err(OpsemError::StuckPredicate(format!("{p}({v})")))
                }
            }
        }
    }

    /// Binds `x` to `out` for evaluating a continuation; returns the trace
    /// variables to let-bind, outermost first.
    fn bind(&mut self, rho: &mut ValueEnv, x: &str, ty: &Ty, out: Out) -> Vec<(String, Ty, Term)> {
        let mut binds = Vec::new();
        let repr = match out.trace {
            None => out.value.clone(),
            Some(t) => self.split(rho, x, ty, t, &out.value, &mut binds),
        };
        rho.entries.push(Entry { name: x.to_string(), ty: ty.clone(), repr, value: out.value });
        binds
    }

    /// What a variable bound to trace `t` stands for. A non-variable trace
    /// gets a trace variable of its own; components of a pair whose trace is
    /// closed stay concrete, the others are projections of that variable.
    fn split(
        &mut self,
        rho: &mut ValueEnv,
        x: &str,
        ty: &Ty,
        t: Term,
        value: &Term,
        binds: &mut Vec<(String, Ty, Term)>,
    ) -> Term {
        match t {
            Term::Var(v) => Term::Var(v),
            t if is_closed(&t) => value.clone(),
            t => {
                let v = self.supply.fresh(x);
                let repr = mask(Term::var(v.clone()), ty, &t, value);
                rho.entries.push(Entry { name: v.clone(), ty: ty.clone(), repr: Term::var(v.clone()), value: value.clone() });
                binds.push((v, ty.clone(), t));
                repr
            }
        }
    }

    fn run(&mut self, rho: &mut ValueEnv, phi: &FunEnv, m: &Term) -> Result<Out, OpsemError> {
        self.tick()?;
        Ok(match m {
            Term::Var(x) => {
                let e = rho.find(x).ok_or_else(|| OpsemError::UnboundName(x.clone()))?;
                Out { trace: e.is_symbolic().then(|| e.repr.clone()), value: e.value.clone() }
            }
            Term::Const(_) | Term::Star => Out::concrete(m.clone()),
            Term::Add(a, b) => {
                let (a, b) = (self.run(rho, phi, a)?, self.run(rho, phi, b)?);
                let value = match (&a.value, &b.value) {
                    (Term::Const(x), Term::Const(y)) => Term::Const(x + y),
                    _ => return Err(OpsemError::IllTyped(m.to_string())),
                };
                let trace = (a.trace.is_some() || b.trace.is_some()).then(|| Term::add(a.trace(), b.trace()));
                Out { trace, value }
            }
            Term::Op(op, arg) => {
                let a = self.run(rho, phi, arg)?;
                let value = self.apply_op(op, &a.value)?;
                Out { trace: a.trace.map(|t| Term::op(op.clone(), t)), value }
            }
            Term::Let(x, ty, d, e) => {
                let d = self.run(rho, phi, d)?;
                let mark = rho.entries.len();
                let bound = self.bind(rho, x, ty, d);
                let e = self.run(rho, phi, e);
                rho.entries.truncate(mark);
                wrap(bound, e?)
            }
            Term::Pair(a, b) => {
                let (a, b) = (self.run(rho, phi, a)?, self.run(rho, phi, b)?);
                let trace = (a.trace.is_some() || b.trace.is_some()).then(|| Term::pair(a.trace(), b.trace()));
                Out { trace, value: Term::pair(a.value, b.value) }
            }
            Term::Fst(p) | Term::Snd(p) => {
                let first = matches!(m, Term::Fst(_));
                let p = self.run(rho, phi, p)?;
                let Term::Pair(l, r) = p.value else {
                    return Err(OpsemError::IllTyped(m.to_string()));
                };
                let trace = match p.trace {
                    // The dropped half was evaluated here, so it is defined
                    // at this point.
                    Some(Term::Pair(a, b)) => Some(if first { *a } else { *b }).filter(|t| !is_closed(t)),
                    t => t.map(|t| if first { Term::fst(t) } else { Term::snd(t) }),
                };
                Out { trace, value: if first { *l } else { *r } }
            }
            Term::If(b, t, e) => {
                if self.guard(rho, phi, b)? {
                    self.run(rho, phi, t)?
                } else {
                    self.run(rho, phi, e)?
                }
            }
            Term::While(b, body) => {
                let last = rho.entries.last().ok_or_else(|| OpsemError::UnboundName("loop variable".into()))?;
                let (p, ty) = (last.name.clone(), last.ty.clone());
                let mut state = Out { trace: last.is_symbolic().then(|| last.repr.clone()), value: last.value.clone() };
                let mut binds = Vec::new();
                loop {
                    self.tick()?;
                    let mut single = ValueEnv::new();
                    binds.extend(self.bind(&mut single, &p, &ty, state));
                    if !self.guard(&mut single, phi, b)? {
                        let e = single.entries.last().unwrap();
                        state = Out { trace: e.is_symbolic().then(|| e.repr.clone()), value: e.value.clone() };
                        break;
                    }
                    state = self.run(&mut single, phi, body)?;
                }
                wrap(binds, state)
            }
            Term::FunCall(f, arg) => {
                let c = phi.lookup(f).ok_or_else(|| OpsemError::UnboundName(f.clone()))?.clone();
                let a = self.run(rho, phi, arg)?;
                let mut inner = ValueEnv::new();
                let bound = self.bind(&mut inner, &c.param, &c.param_ty, a);
                let env = c.saved.extended((*c).clone());
                let out = self.run(&mut inner, &env, &c.body)?;
                wrap(bound, out)
            }
            Term::LetRec { name, param, param_ty, ret_ty, body, cont } => {
                let c = Closure {
                    saved: phi.clone(),
                    name: name.clone(),
                    param: param.clone(),
                    param_ty: param_ty.clone(),
                    ret_ty: ret_ty.clone(),
                    body: (**body).clone(),
                };
                self.run(rho, &phi.extended(c), cont)?
            }
            Term::Rd { dir, var, var_ty, body, point } => self.rd(rho, phi, dir, var, var_ty, body, point)?,
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn rd(
        &mut self,
        rho: &mut ValueEnv,
        phi: &FunEnv,
        dir: &Term,
        var: &str,
        var_ty: &Ty,
        body: &Term,
        point: &Term,
    ) -> Result<Out, OpsemError> {
        let a = self.run(rho, phi, point)?;
        let w = self.run(rho, phi, dir)?;
        let x = self.supply.fresh(var);
        let mark = rho.entries.len();
        rho.bind_symbolic(var, var_ty.clone(), a.value.clone());
        rho.entries.last_mut().unwrap().repr = Term::var(x.clone());
        let c = self.run(rho, phi, body);
        rho.entries.truncate(mark);
        let c = c?;
        let body_ty =
            syntactic_type(&c.value).ok_or_else(|| OpsemError::IllTyped(c.value.to_string()))?;

        let mut ctx = rho.trace_context();
        let mut valuation = rho.trace_valuation();
        let mut binds = Vec::new();
        let mut as_value = |ev: &mut Self, out: Out, ty: Ty, base: &str| -> Term {
            let t = out.trace();
            if is_value(&t) {
                return t;
            }
            let v = ev.supply.fresh(base);
            ctx.push(v.clone(), ty.clone());
            valuation.push((v.clone(), out.value));
            binds.push((v.clone(), ty, t));
            Term::var(v)
        };
        let a_val = as_value(self, a, var_ty.clone(), "a");
        let w_val = as_value(self, w, body_ty, "w");
        let (d, _) =
            rd_symbolic(&self.i.sig, &ctx, &w_val, &x, var_ty, &c.trace(), &a_val, self.cfg.mode, &mut self.supply)?;
        let d = binds.into_iter().rev().fold(d, |acc, (v, ty, t)| Term::let_(v, ty, t, acc));
        // Evaluation continues symbolically on the derivative, so the parts
        // that do not depend on symbolic variables are evaluated away.
        let mut env = ValueEnv::new();
        for ((v, ty), (_, value)) in ctx.iter().zip(valuation) {
            env.entries.push(Entry { name: v.to_string(), ty: ty.clone(), repr: Term::var(v), value });
        }
        self.run(&mut env, &FunEnv::new(), &d)
    }
}

/// `at` with the components of a literal pair trace that are closed replaced
/// by their values.
fn mask(at: Term, ty: &Ty, t: &Term, value: &Term) -> Term {
    match (t, ty, value) {
        (t, ..) if is_closed(t) => value.clone(),
        (Term::Pair(l, r), Ty::Prod(lt, rt), Term::Pair(lv, rv)) => {
            Term::pair(mask(Term::fst(at.clone()), lt, l, lv), mask(Term::snd(at), rt, r, rv))
        }
        _ => at,
    }
}

fn wrap(bound: Vec<(String, Ty, Term)>, body: Out) -> Out {
    if bound.is_empty() {
        return body;
    }
    let trace = bound.into_iter().rev().fold(body.trace(), |acc, (x, ty, d)| Term::let_(x, ty, d, acc));
    Out { trace: Some(trace), value: body.value }
}
