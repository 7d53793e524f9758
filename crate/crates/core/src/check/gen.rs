//! Seeded random generators for partial maps, trace terms and points.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::rdrc::{PMap, PrimTable};
use crate::syntax::{BoolTerm, Term, Ty};
use crate::typing::Context;

const UNARY: [&str; 6] = ["neg", "sin", "cos", "exp", "recip", "sqrtp"];

/// Coordinates `start .. start + len` of `R^n`.
pub fn slice(n: usize, start: usize, len: usize) -> PMap {
    PMap::compose(&PMap::proj1(start, n - start), &PMap::proj0(len, n - start - len)).unwrap()
}

/// Random maps `R^dom ⇀ R^cod` built from the standard primitives with
/// compositions, pairings, sums, restrictions, disjoint joins and loops.
pub struct MapGen {
    rng: ChaCha8Rng,
    table: PrimTable,
}

impl MapGen {
    pub fn new(seed: u64) -> MapGen {
        MapGen { rng: ChaCha8Rng::seed_from_u64(seed), table: PrimTable::standard(4) }
    }

    fn prim(&self, name: &str) -> PMap {
        PMap::prim(self.table.get(name).expect("standard primitive"))
    }

    /// The standard primitive `name` as a map.
    pub fn prim_map(&self, name: &str) -> PMap {
        self.prim(name)
    }

    /// A map of the given shape whose expression tree has depth at most `depth`.
    pub fn map(&mut self, dom: usize, cod: usize, depth: usize) -> PMap {
        if depth == 0 || self.rng.gen_bool(0.2) {
            return self.leaf(dom, cod);
        }
        let d = depth - 1;
        match self.rng.gen_range(0..8) {
            0 => {
                let k = self.rng.gen_range(1..=2);
                let f = self.map(dom, k, d);
                let g = self.map(k, cod, d);
                PMap::compose(&f, &g).unwrap()
            }
            1 if cod >= 2 => {
                let c = self.rng.gen_range(1..cod);
                let f = self.map(dom, c, d);
                let g = self.map(dom, cod - c, d);
                PMap::pair(&f, &g).unwrap()
            }
            2 => {
                let f = self.map(dom, cod, d);
                let g = self.map(dom, cod, d);
                PMap::add(&f, &g).unwrap()
            }
            3 => {
                let r = self.domain_restriction(dom, d);
                let f = self.map(dom, cod, d);
                PMap::compose(&r, &f).unwrap()
            }
            4 => self.branch(dom, cod, d),
            5 if cod == 1 => {
                let f = self.map(dom, 1, d);
                let name = *UNARY.choose(&mut self.rng).unwrap();
                PMap::compose(&f, &self.prim(name)).unwrap()
            }
            6 if cod == 1 => {
                let f = self.map(dom, 2, d);
                let name = if self.rng.gen_bool(0.5) { "mul" } else { "add" };
                PMap::compose(&f, &self.prim(name)).unwrap()
            }
            7 if cod == 1 => {
                let f = self.map(dom, 1, d);
                PMap::compose(&f, &self.countdown()).unwrap()
            }
            _ => {
                let k = self.rng.gen_range(1..=2);
                let f = self.map(dom, k, d);
                let g = self.map(k, cod, d);
                PMap::compose(&f, &g).unwrap()
            }
        }
    }

    fn leaf(&mut self, dom: usize, cod: usize) -> PMap {
        if cod > 1 {
            let c = self.rng.gen_range(1..cod);
            let f = self.leaf(dom, c);
            let g = self.leaf(dom, cod - c);
            return PMap::pair(&f, &g).unwrap();
        }
        let i = self.rng.gen_range(0..dom);
        let coord = slice(dom, i, 1);
        match self.rng.gen_range(0..6) {
            0 => {
                let c = self.rng.gen_range(-2.0..2.0);
                PMap::compose(&PMap::bang(dom), &PMap::const_point(vec![c])).unwrap()
            }
            1 => PMap::zero(dom, 1),
            2 | 3 => coord,
            _ => {
                let name = *UNARY.choose(&mut self.rng).unwrap();
                PMap::compose(&coord, &self.prim(name)).unwrap()
            }
        }
    }

    /// A restriction idempotent on `R^dom`.
    fn domain_restriction(&mut self, dom: usize, depth: usize) -> PMap {
        let s = self.map(dom, 1, depth.min(1));
        let test = if self.rng.gen_bool(0.5) { self.prim("gt0_T") } else { self.prim("sqrtp") };
        PMap::restrict(&PMap::compose(&s, &test).unwrap())
    }

    /// `if s > 0 then f else g`, a join of two maps with disjoint domains.
    fn branch(&mut self, dom: usize, cod: usize, depth: usize) -> PMap {
        let s = self.map(dom, 1, depth.min(1));
        let yes = PMap::restrict(&PMap::compose(&s, &self.prim("gt0_T")).unwrap());
        let no = PMap::restrict(&PMap::compose(&s, &self.prim("gt0_F")).unwrap());
        let f = self.map(dom, cod, depth);
        let g = self.map(dom, cod, depth);
        let left = PMap::compose(&yes, &f).unwrap();
        let right = PMap::compose(&no, &g).unwrap();
        PMap::join(vec![left, right], dom, cod).unwrap()
    }

    /// `while x > 0 do x := x - c + 0.1 sin x` on `R`.
    fn countdown(&mut self) -> PMap {
        let c = self.rng.gen_range(0.5..1.5);
        let shift = PMap::compose(&PMap::bang(1), &PMap::const_point(vec![-c])).unwrap();
        let wiggle = PMap::seq(&[
            &PMap::pair(&self.prim_const(0.1), &self.prim("sin")).unwrap(),
            &self.prim("mul"),
        ])
        .unwrap();
        let body = PMap::sum(vec![PMap::identity(1), shift, wiggle], 1, 1).unwrap();
        let guard = PMap::restrict(&self.prim("gt0_T"));
        let exit = PMap::restrict(&self.prim("gt0_F"));
        let step = PMap::compose(&guard, &body).unwrap();
        PMap::while_loop(&step, &exit, 64).unwrap()
    }

    fn prim_const(&self, c: f64) -> PMap {
        PMap::compose(&PMap::bang(1), &PMap::const_point(vec![c])).unwrap()
    }

    /// A point of `R^n` with coordinates uniform in `[-2, 2]`.
    pub fn point(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.rng.gen_range(-2.0..2.0)).collect()
    }

    pub fn dims(&mut self) -> (usize, usize) {
        (self.rng.gen_range(1..=3), self.rng.gen_range(1..=2))
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

/// Random well-typed terms over the standard signature.
pub struct TermGen {
    rng: ChaCha8Rng,
    counter: usize,
    /// Allow `if` with real-valued guards (not a trace term).
    pub branching: bool,
}

const TERM_UNARY: [&str; 4] = ["neg", "sin", "cos", "exp"];

impl TermGen {
    pub fn new(seed: u64) -> TermGen {
        TermGen { rng: ChaCha8Rng::seed_from_u64(seed), counter: 0, branching: false }
    }

    fn fresh(&mut self) -> String {
        self.counter += 1;
        format!("g{}", self.counter)
    }

    /// A type with at most `depth` nested products.
    pub fn ty(&mut self, depth: usize) -> Ty {
        if depth == 0 || self.rng.gen_bool(0.6) {
            Ty::Real
        } else {
            let a = self.ty(depth - 1);
            let b = if self.rng.gen_bool(0.15) { Ty::Unit } else { self.ty(depth - 1) };
            Ty::prod(a, b)
        }
    }

    /// A closed value of type `ty` with coordinates in `[-1.5, 1.5]`.
    pub fn value(&mut self, ty: &Ty) -> Term {
        match ty {
            Ty::Real => Term::Const(self.rng.gen_range(-1.5..1.5)),
            Ty::Unit => Term::Star,
            Ty::Prod(a, b) => {
                let a = self.value(a);
                Term::pair(a, self.value(b))
            }
        }
    }

    /// A term of type `ty` in `ctx`, of depth at most `depth`. Without
    /// `branching` the result is a trace term.
    pub fn term(&mut self, ctx: &Context, ty: &Ty, depth: usize) -> Term {
        let vars: Vec<String> = ctx.iter().filter(|(_, t)| *t == ty).map(|(x, _)| x.to_string()).collect();
        if depth == 0 || self.rng.gen_bool(0.15) {
            return self.leaf(ctx, ty, &vars);
        }
        let d = depth - 1;
        if self.rng.gen_bool(0.2) {
            let bound_ty = self.ty(1);
            let bound = self.term(ctx, &bound_ty, d);
            let y = self.fresh();
            let body = self.term(&ctx.extended(y.clone(), bound_ty.clone()), ty, d);
            return Term::let_(y, bound_ty, bound, body);
        }
        if self.rng.gen_bool(0.12) {
            let other = self.ty(1);
            return if self.rng.gen_bool(0.5) {
                Term::fst(self.term(ctx, &Ty::prod(ty.clone(), other), d))
            } else {
                Term::snd(self.term(ctx, &Ty::prod(other, ty.clone()), d))
            };
        }
        match ty {
            Ty::Unit => self.leaf(ctx, ty, &vars),
            Ty::Prod(a, b) => {
                let a = self.term(ctx, a, d);
                Term::pair(a, self.term(ctx, b, d))
            }
            Ty::Real => match self.rng.gen_range(0..5) {
                0 => {
                    let a = self.term(ctx, ty, d);
                    Term::add(a, self.term(ctx, ty, d))
                }
                1 => {
                    let a = self.term(ctx, ty, d);
                    Term::op("mul", Term::pair(a, self.term(ctx, ty, d)))
                }
                2 => {
                    let a = self.term(ctx, ty, d);
                    Term::op("add", Term::pair(a, self.term(ctx, ty, d)))
                }
                3 if self.branching => {
                    let g = self.term(ctx, ty, d.min(2));
                    let p = if self.rng.gen_bool(0.5) { "gt0" } else { "lt0" };
                    let m = self.term(ctx, ty, d);
                    Term::if_(BoolTerm::pred(p, g), m, self.term(ctx, ty, d))
                }
                _ => {
                    let name = *TERM_UNARY.choose(&mut self.rng).unwrap();
                    Term::op(name, self.term(ctx, ty, d))
                }
            },
        }
    }

    fn leaf(&mut self, ctx: &Context, ty: &Ty, vars: &[String]) -> Term {
        if !vars.is_empty() && self.rng.gen_bool(0.7) {
            return Term::var(vars.choose(&mut self.rng).unwrap().clone());
        }
        match ty {
            Ty::Real => {
                // Project out of a product-typed variable when one is around.
                let prods: Vec<(String, Ty)> = ctx
                    .iter()
                    .filter(|(_, t)| matches!(t, Ty::Prod(..)))
                    .map(|(x, t)| (x.to_string(), t.clone()))
                    .collect();
                if let Some((x, t)) = prods.choose(&mut self.rng).cloned().filter(|_| self.rng.gen_bool(0.5)) {
                    if let Some(path) = first_real(&Term::var(x), &t) {
                        return path;
                    }
                }
                Term::Const((self.rng.gen_range(-2.0..2.0f64) * 100.0).round() / 100.0)
            }
            Ty::Unit => Term::Star,
            Ty::Prod(a, b) => {
                let a = self.leaf(ctx, a, &[]);
                Term::pair(a, self.leaf(ctx, b, &[]))
            }
        }
    }
}

fn first_real(m: &Term, ty: &Ty) -> Option<Term> {
    match ty {
        Ty::Real => Some(m.clone()),
        Ty::Unit => None,
        Ty::Prod(a, b) => first_real(&Term::fst(m.clone()), a).or_else(|| first_real(&Term::snd(m.clone()), b)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{free_vars, is_trace_term, Signature};
    use crate::typing::{typecheck, FunContext};

    #[test]
    fn maps_have_requested_shape_and_evaluate() {
        let mut g = MapGen::new(1);
        for _ in 0..40 {
            let (a, b) = g.dims();
            let f = g.map(a, b, 4);
            assert_eq!((f.dom(), f.cod()), (a, b));
            let x = g.point(a);
            assert!(f.eval(&x).is_ok());
        }
    }

    #[test]
    fn terms_are_well_typed_traces() {
        let sig = Signature::standard();
        let mut g = TermGen::new(3);
        let ctx = Context::singleton("x", Ty::prod(Ty::Real, Ty::Real));
        for _ in 0..100 {
            let ty = g.ty(2);
            let m = g.term(&ctx, &ty, 6);
            assert!(is_trace_term(&m), "{m}");
            assert_eq!(typecheck(&sig, &FunContext::new(), &ctx, &m).unwrap(), ty, "{m}");
            assert!(free_vars(&m).iter().all(|v| v == "x"));
        }
    }

    #[test]
    fn same_seed_same_stream() {
        let ctx = Context::singleton("x", Ty::Real);
        let a: Vec<String> = (0..5).map(|_| 0).scan(TermGen::new(9), |g, _| Some(g.term(&ctx, &Ty::Real, 4).to_string())).collect();
        let b: Vec<String> = (0..5).map(|_| 0).scan(TermGen::new(9), |g, _| Some(g.term(&ctx, &Ty::Real, 4).to_string())).collect();
        assert_eq!(a, b);
    }
}
