//! The three source transformations against their originals.

use serde::Serialize;

use crate::check::corpus::find;
use crate::interp::{denote, FunAssignment, InterpretationStructure};
use crate::syntax::{parse_term, NameSupply, Term, Ty};
use crate::transforms::{check_equivalence, rewrite, Rule, SampleSpec, TransformReport};
use crate::typing::Context;

#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceCase {
    pub rule: String,
    pub name: String,
    pub rewrites: usize,
    /// Fewest and most loop iterations over the sampled points.
    pub iterations: Option<(usize, usize)>,
    pub report: TransformReport,
}

impl EquivalenceCase {
    pub fn passed(&self) -> bool {
        self.rewrites > 0 && self.report.passed
    }
}

/// `v.rd(x. body)(a)` for every corpus program whose body is a conditional,
/// differentiated in its first parameter.
pub fn if_rd_cases(i: &InterpretationStructure) -> Vec<(String, Context, Term)> {
    let mut out = Vec::new();
    for name in ["abs", "piecewise", "nested_if"] {
        let prog = find(name).expect("in the corpus").program(&i.sig);
        let (x, x_ty) = prog.params.get(0);
        let mut gamma: Context = prog.params.iter().skip(1).map(|(n, t)| (n.to_string(), t.clone())).collect();
        gamma.push("a", x_ty.clone());
        gamma.push("v", Ty::Real);
        let t = Term::rd(Term::var("v"), x, x_ty.clone(), prog.body.clone(), Term::var("a"));
        out.push((name.to_string(), gamma, t));
    }
    let pair = Ty::prod(Ty::Real, Ty::Real);
    let gamma: Context = [("a".to_string(), pair.clone()), ("v".to_string(), Ty::Real)].into_iter().collect();
    let src = "v.rd(p:real*real. if gt0(mul(fst(p), snd(p))) then sin(add(fst(p), snd(p))) else mul(fst(p), fst(p)))(a)";
    out.push(("product_guard".into(), gamma, parse_term(src, &i.sig).expect("parses")));
    out
}

/// A loop `while b do f` over `x`, and the sampling ranges for while-fd and
/// while-rd. The while-fd ranges keep it between 0 and 20 iterations. Reverse
/// derivatives of loops are second order and cost far more per iteration, so
/// pair_walk gets a narrower while-rd range.
pub const LOOPS: [(&str, &str, f64, f64); 3] = [
    ("countdown", "while gt0(x) do add(x, add(mul(0.1, sin(x)), -1))", 18.0, 18.0),
    ("shrink", "while gt0(add(x, -1)) do mul(x, 0.7)", 18.0, 18.0),
    ("pair_walk", "while gt0(fst(x)) do (add(fst(x), -1), mul(snd(x), cos(fst(x))))", 18.0, 6.0),
];

/// Least step budget for the operational side of the loop checks.
pub const LOOP_BUDGET: u64 = 50_000_000;

fn loop_ty(name: &str) -> Ty {
    if name == "pair_walk" {
        Ty::prod(Ty::Real, Ty::Real)
    } else {
        Ty::Real
    }
}

/// The smallest fuel at which the bare loop is defined at `x`, which is its
/// iteration count.
fn iterations(i: &InterpretationStructure, ty: &Ty, w: &Term, x: &[f64]) -> Option<usize> {
    let gamma = Context::singleton("x", ty.clone());
    (0..=64).find(|&k| {
        denote(i, &FunAssignment::new(), &gamma, w, k).is_ok_and(|f| matches!(f.eval(x), Ok(Some(_))))
    })
}

fn iteration_range(i: &InterpretationStructure, ty: &Ty, w: &Term, spec: &SampleSpec) -> Option<(usize, usize)> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(spec.seed);
    let dim = i.denote_type(ty);
    // Same stream as the equivalence check; its points are (a, v), and `a`
    // comes first.
    let mut seen: Option<(usize, usize)> = None;
    for _ in 0..spec.samples {
        let p: Vec<f64> = (0..2 * dim).map(|_| rng.gen_range(-spec.range..=spec.range)).collect();
        if let Some(n) = iterations(i, ty, w, &p[..dim]) {
            seen = Some(seen.map_or((n, n), |(lo, hi)| (lo.min(n), hi.max(n))));
        }
    }
    seen
}

fn run_case(
    i: &InterpretationStructure,
    rule: Rule,
    name: &str,
    gamma: &Context,
    t: &Term,
    spec: &SampleSpec,
) -> EquivalenceCase {
    let mut supply = NameSupply::avoiding([t]);
    let (out, rewrites) = rewrite(&i.sig, rule, t, &mut supply);
    EquivalenceCase {
        rule: rule.to_string(),
        name: name.to_string(),
        rewrites,
        iterations: None,
        report: check_equivalence(i, gamma, t, &out, spec),
    }
}

pub fn check_if_rd(i: &InterpretationStructure, spec: &SampleSpec) -> Vec<EquivalenceCase> {
    if_rd_cases(i).iter().map(|(name, gamma, t)| run_case(i, Rule::IfRd, name, gamma, t, spec)).collect()
}

fn check_loops(i: &InterpretationStructure, rule: Rule, spec: &SampleSpec) -> Vec<EquivalenceCase> {
    LOOPS
        .iter()
        .map(|&(name, src, fd_range, rd_range)| {
            let ty = loop_ty(name);
            let w = parse_term(src, &i.sig).expect("loop parses");
            let t = match rule {
                Rule::WhileRd => Term::rd(Term::var("v"), "x", ty.clone(), w.clone(), Term::var("a")),
                _ => crate::transforms::sugar_fd("x", &ty, &w, &ty, &Term::var("a"), &Term::var("v"), &mut NameSupply::avoiding([&w])),
            };
            let gamma: Context = [("a".to_string(), ty.clone()), ("v".to_string(), ty.clone())].into_iter().collect();
            let range = match rule {
                Rule::WhileRd => rd_range,
                _ => fd_range,
            };
            let spec = SampleSpec { range, budget: spec.budget.max(LOOP_BUDGET), ..*spec };
            let mut case = run_case(i, rule, name, &gamma, &t, &spec);
            case.iterations = iteration_range(i, &ty, &w, &spec);
            case
        })
        .collect()
}

pub fn check_while_fd(i: &InterpretationStructure, spec: &SampleSpec) -> Vec<EquivalenceCase> {
    check_loops(i, Rule::WhileFd, spec)
}

pub fn check_while_rd(i: &InterpretationStructure, spec: &SampleSpec) -> Vec<EquivalenceCase> {
    check_loops(i, Rule::WhileRd, spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> SampleSpec {
        SampleSpec { samples: 20, ..SampleSpec::default() }
    }

    #[test]
    fn if_rd_on_piecewise_programs() {
        let i = InterpretationStructure::standard();
        for c in check_if_rd(&i, &spec()) {
            assert!(c.passed(), "{c:?}");
            assert!(c.report.points_defined > 0);
        }
    }

    #[test]
    fn while_fd_covers_up_to_twenty_iterations() {
        let i = InterpretationStructure::standard();
        let cases = check_while_fd(&i, &SampleSpec::default());
        for c in &cases {
            assert!(c.passed(), "{c:?}");
            assert_eq!(c.report.operational_out_of_fuel, 0, "{c:?}");
            let (lo, hi) = c.iterations.unwrap();
            assert!(lo == 0 && hi <= 20, "{c:?}");
        }
        assert!(cases.iter().any(|c| c.iterations.unwrap().1 >= 15));
    }

    #[test]
    fn while_rd() {
        let i = InterpretationStructure::standard();
        for c in check_while_rd(&i, &SampleSpec { samples: 5, ..SampleSpec::default() }) {
            assert!(c.passed(), "{c:?}");
            assert!(c.report.operational_checked > 0, "{c:?}");
        }
    }
}
