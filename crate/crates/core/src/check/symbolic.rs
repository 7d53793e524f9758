//! Symbolic reverse differentiation against the categorical `R`, and the
//! zero lemma.

use serde::Serialize;

use crate::check::gen::TermGen;
use crate::interp::{denote, denote_funenv, FunAssignment, InterpretationStructure};
use crate::opsem::{encode, eval, Closure, FunEnv, OpsemConfig, OpsemError, ValueEnv};
use crate::symdiff::{rd_symbolic, RdMode};
use crate::syntax::{BoolTerm, NameSupply, Term, Ty};
use crate::transforms::deviation;
use crate::typing::Context;

#[derive(Debug, Clone, Copy)]
pub struct SymbolicConfig {
    pub terms: usize,
    pub seed: u64,
    pub depth: usize,
    pub tol: f64,
    pub fuel: usize,
}

impl Default for SymbolicConfig {
    fn default() -> Self {
        SymbolicConfig { terms: 100, seed: 0, depth: 6, tol: 1e-9, fuel: 1000 }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SymbolicReport {
    pub name: String,
    pub terms: usize,
    /// Comparisons where both sides were defined.
    pub compared: usize,
    /// Comparisons where both sides were undefined.
    pub both_undefined: usize,
    pub max_deviation: f64,
    pub failures: Vec<String>,
}

impl SymbolicReport {
    fn new(name: &str) -> SymbolicReport {
        SymbolicReport { name: name.to_string(), ..Default::default() }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    fn fail(&mut self, msg: String) {
        if self.failures.len() < 5 {
            self.failures.push(msg);
        }
    }

    fn compare(&mut self, what: &str, got: Option<Vec<f64>>, want: Option<Vec<f64>>, tol: f64) {
        match (got, want) {
            (Some(g), Some(w)) => {
                self.compared += 1;
                let dev = deviation(&g, &w);
                self.max_deviation = self.max_deviation.max(dev);
                if dev > tol {
                    self.fail(format!("{what}: {g:?} vs {w:?}"));
                }
            }
            (None, None) => self.both_undefined += 1,
            (g, w) => self.fail(format!("{what}: definedness differs, {g:?} vs {w:?}")),
        }
    }
}

fn closed_value(i: &InterpretationStructure, phi: &FunAssignment, m: &Term, fuel: usize) -> Result<Option<Vec<f64>>, String> {
    let f = denote(i, phi, &Context::new(), m, fuel).map_err(|e| format!("{m}: {e}"))?;
    f.eval(&[]).map_err(|e| format!("{m}: {e}"))
}

/// `⟦v.rd(x.m)(a)⟧` against the denotation of `rd_symbolic` in both modes,
/// for closed generated trace terms.
pub fn check_rd_symbolic(i: &InterpretationStructure, cfg: &SymbolicConfig) -> SymbolicReport {
    let mut rep = SymbolicReport::new("rd-symbolic");
    let mut gen = TermGen::new(cfg.seed);
    let phi = FunAssignment::new();
    for k in 0..cfg.terms {
        let x_ty = gen.ty(2);
        let out_ty = gen.ty(2);
        let m = gen.term(&Context::singleton("x", x_ty.clone()), &out_ty, cfg.depth);
        let (a, v) = (gen.value(&x_ty), gen.value(&out_ty));
        rep.terms += 1;
        let lhs = Term::rd(v.clone(), "x", x_ty.clone(), m.clone(), a.clone());
        let want = match closed_value(i, &phi, &lhs, cfg.fuel) {
            Ok(w) => w,
            Err(e) => {
                rep.fail(e);
                continue;
            }
        };
        for mode in [RdMode::Standard, RdMode::Optimized] {
            let mut supply = NameSupply::avoiding([&m]);
            let got = rd_symbolic(&i.sig, &Context::new(), &v, "x", &x_ty, &m, &a, mode, &mut supply)
                .map_err(|e| e.to_string())
                .and_then(|(t, _)| closed_value(i, &phi, &t, cfg.fuel));
            match got {
                Ok(g) => rep.compare(&format!("term {k} ({mode}) {lhs}"), g, want.clone(), cfg.tol),
                Err(e) => rep.fail(e),
            }
        }
    }
    rep
}

/// `f(u) = if gt0(u) then f(u - 1) + p(u) else q(u)` for generated trace
/// terms `p`, `q`.
fn recursive_closure(gen: &mut TermGen, depth: usize) -> Closure {
    let ctx = Context::singleton("u", Ty::Real);
    let p = gen.term(&ctx, &Ty::Real, depth);
    let q = gen.term(&ctx, &Ty::Real, depth);
    let down = Term::call("f", Term::op("add", Term::pair(Term::var("u"), Term::Const(-1.0))));
    let body = Term::if_(BoolTerm::pred("gt0", Term::var("u")), Term::add(down, p), q);
    Closure { saved: FunEnv::new(), name: "f".into(), param: "u".into(), param_ty: Ty::Real, ret_ty: Ty::Real, body }
}

/// The same comparison when the differentiated term calls a recursive
/// function: the denotation under the assignment of the environment against
/// operational evaluation, which differentiates the trace of the unfolded
/// calls, in both modes.
pub fn check_rd_with_functions(i: &InterpretationStructure, cfg: &SymbolicConfig) -> SymbolicReport {
    let mut rep = SymbolicReport::new("rd-symbolic with functions");
    let mut gen = TermGen::new(cfg.seed.wrapping_add(1));
    for k in 0..cfg.terms {
        let env = FunEnv::new().extended(recursive_closure(&mut gen, 3));
        let phi = match denote_funenv(i, &env, cfg.fuel) {
            Ok(p) => p,
            Err(e) => {
                rep.fail(e.to_string());
                continue;
            }
        };
        let x_ty = gen.ty(1);
        let out_ty = gen.ty(1);
        let outer = Context::singleton("x", x_ty.clone());
        let arg = gen.term(&outer, &Ty::Real, 2);
        let m = gen.term(&outer.extended("z", Ty::Real), &out_ty, cfg.depth - 1);
        let m = Term::let_("z", Ty::Real, Term::call("f", arg), m);
        let (a, v) = (gen.value(&x_ty), gen.value(&out_ty));
        rep.terms += 1;
        let lhs = Term::rd(v, "x", x_ty, m, a);
        let want = match closed_value(i, &phi, &lhs, cfg.fuel) {
            Ok(w) => w,
            Err(e) => {
                rep.fail(e);
                continue;
            }
        };
        for mode in [RdMode::Standard, RdMode::Optimized] {
            let opsem = OpsemConfig { mode, ..OpsemConfig::default() };
            let got = match eval(&ValueEnv::new(), &env, i, &lhs, &opsem) {
                Ok(v) => Some(encode(&v)),
                Err(OpsemError::UndefinedPrimitive { .. } | OpsemError::StuckPredicate(_)) => None,
                Err(e) => {
                    rep.fail(format!("term {k} ({mode}) {lhs}: {e}"));
                    continue;
                }
            };
            rep.compare(&format!("term {k} ({mode}) {lhs}"), got, want.clone(), cfg.tol);
        }
    }
    rep
}

/// `⟦v.rd(x.m)(a)⟧` is exactly zero wherever defined when `x` does not occur
/// in `m`. The term is open in `y`, which is bound to a sampled value.
pub fn check_zero_lemma(i: &InterpretationStructure, cfg: &SymbolicConfig) -> SymbolicReport {
    let mut rep = SymbolicReport::new("zero lemma");
    let mut gen = TermGen::new(cfg.seed.wrapping_add(2));
    let phi = FunAssignment::new();
    for k in 0..cfg.terms {
        let (x_ty, y_ty, out_ty) = (gen.ty(2), gen.ty(1), gen.ty(2));
        let m = gen.term(&Context::singleton("y", y_ty.clone()), &out_ty, cfg.depth);
        let (a, v, y) = (gen.value(&x_ty), gen.value(&out_ty), gen.value(&y_ty));
        rep.terms += 1;
        let gamma = Context::singleton("y", y_ty.clone());
        let lhs = Term::rd(v.clone(), "x", x_ty.clone(), m.clone(), a.clone());
        let mut supply = NameSupply::avoiding([&m]);
        let sym = rd_symbolic(&i.sig, &gamma, &v, "x", &x_ty, &m, &a, RdMode::Optimized, &mut supply);
        let candidates = [Ok(lhs.clone()), sym.map(|(t, _)| t).map_err(|e| e.to_string())];
        for (which, t) in ["denotation", "symbolic"].iter().zip(candidates) {
            let value = t.and_then(|t| {
                let f = denote(i, &phi, &gamma, &t, cfg.fuel).map_err(|e| e.to_string())?;
                f.eval(&encode(&y)).map_err(|e| e.to_string())
            });
            match value {
                Ok(Some(z)) => {
                    rep.compared += 1;
                    if z.iter().any(|c| *c != 0.0) {
                        rep.fail(format!("term {k} ({which}) {lhs} at y = {y}: {z:?}"));
                    }
                }
                Ok(None) => rep.both_undefined += 1,
                Err(e) => rep.fail(format!("term {k}: {e}")),
            }
        }
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SymbolicConfig {
        SymbolicConfig { terms: 25, ..SymbolicConfig::default() }
    }

    #[test]
    fn symbolic_matches_categorical() {
        let r = check_rd_symbolic(&InterpretationStructure::standard(), &small());
        assert!(r.passed(), "{r:?}");
        assert!(r.compared > 0);
    }

    #[test]
    fn symbolic_matches_with_a_recursive_function() {
        let r = check_rd_with_functions(&InterpretationStructure::standard(), &small());
        assert!(r.passed(), "{r:?}");
        assert!(r.compared > 0);
    }

    #[test]
    fn zero_lemma_holds() {
        let r = check_zero_lemma(&InterpretationStructure::standard(), &small());
        assert!(r.passed(), "{r:?}");
        assert!(r.compared > 0);
    }
}
