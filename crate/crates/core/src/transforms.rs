//! Source transformations that push differentiation through `if` and
//! `while`, and a sampling check that two terms denote the same map.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::interp::{denote, FunAssignment, InterpretationStructure, InterpError};
use crate::opsem::{decode, encode, eval, FunEnv, OpsemConfig, OpsemError, ValueEnv};
use crate::syntax::sugar::{dagger, forward_derivative, zero_term};
use crate::syntax::{free_vars, let_bool, BoolTerm, NameSupply, Signature, Term, Ty};
use crate::typing::{typecheck, Context, FunContext, TypeError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransformError {
    #[error("term does not have the shape {expected}: {found}")]
    ShapeMismatch { expected: &'static str, found: String },
    #[error(transparent)]
    Type(#[from] TypeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    IfRd,
    WhileFd,
    WhileRd,
}

impl FromStr for Rule {
    type Err = String;

    fn from_str(s: &str) -> Result<Rule, String> {
        match s {
            "if-rd" => Ok(Rule::IfRd),
            "while-fd" => Ok(Rule::WhileFd),
            "while-rd" => Ok(Rule::WhileRd),
            _ => Err(format!("unknown rule `{s}` (expected if-rd, while-fd or while-rd)")),
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rule::IfRd => "if-rd",
            Rule::WhileFd => "while-fd",
            Rule::WhileRd => "while-rd",
        })
    }
}

/// `m^†`: the term `y.rd(x:A. m)(0_A)` with `y` fresh, and `y`.
pub fn sugar_dagger(x: &str, x_ty: &Ty, m: &Term, supply: &mut NameSupply) -> (Term, String) {
    let y = supply.fresh("y");
    (dagger(x, x_ty, m, &y), y)
}

/// `fd(x:A. m)(a).v` for `Γ, x:A ⊢ m : B`.
#[allow(clippy::too_many_arguments)]
pub fn sugar_fd(x: &str, x_ty: &Ty, m: &Term, m_ty: &Ty, a: &Term, v: &Term, supply: &mut NameSupply) -> Term {
    forward_derivative(x, x_ty, m, m_ty, a, v, supply)
}

/// `v.rd(x. if b then m else n)(a)` becomes
/// `if (let x = a in b) then v.rd(x.m)(a) else v.rd(x.n)(a)`.
pub fn transform_if_rd(t: &Term) -> Result<Term, TransformError> {
    let Term::Rd { dir, var, var_ty, body, point } = t else {
        return Err(shape("v.rd(x. if b then m else n)(a)", t));
    };
    let Term::If(b, m, n) = &**body else {
        return Err(shape("v.rd(x. if b then m else n)(a)", t));
    };
    let arm = |m: &Term| Term::rd((**dir).clone(), var.clone(), var_ty.clone(), m.clone(), (**point).clone());
    Ok(Term::if_(let_bool(var, var_ty, point, b), arm(m), arm(n)))
}

/// The parts `(x, A, m, B, a, v)` of an expanded `fd(x:A. m)(a).v`.
pub fn match_fd(t: &Term) -> Option<(&str, &Ty, &Term, &Ty, &Term, &Term)> {
    let Term::Let(z, a_ty, v, rest) = t else { return None };
    let Term::Rd { dir, var: y, var_ty: b_ty, body, point } = &**rest else { return None };
    if **dir != Term::var(z.clone()) || **point != zero_term(b_ty) {
        return None;
    }
    let Term::Rd { dir: inner_dir, var: x, var_ty, body: m, point: a } = &**body else { return None };
    if **inner_dir != Term::var(y.clone()) || var_ty != a_ty || free_vars(a).contains(y) || free_vars(a).contains(z) {
        return None;
    }
    if free_vars(m).contains(z) || free_vars(m).contains(y) || free_vars(v).contains(z) {
        return None;
    }
    Some((x, var_ty, m, b_ty, a, v))
}

/// `fd(x:A. while b do f)(a).v` becomes
/// `let s:A*A = (a, v) in snd(while π₀b do (π₀f, fd(x.f)(x).y))`, where
/// `π₀e` is `let x = fst(s) in e` and `y` is `snd(s)`.
pub fn transform_while_fd(sig: &Signature, t: &Term, supply: &mut NameSupply) -> Result<Term, TransformError> {
    let Some((x, a_ty, m, _, a, v)) = match_fd(t) else {
        return Err(shape("fd(x. while b do f)(a).v", t));
    };
    let Term::While(b, f) = m else {
        return Err(shape("fd(x. while b do f)(a).v", t));
    };
    while_fd_parts(sig, x, a_ty, b, f, a, v, supply)
}

/// The right-hand side of the while-fd rule from its parts.
#[allow(clippy::too_many_arguments)]
pub fn while_fd_parts(
    sig: &Signature,
    x: &str,
    a_ty: &Ty,
    b: &BoolTerm,
    f: &Term,
    a: &Term,
    v: &Term,
    supply: &mut NameSupply,
) -> Result<Term, TransformError> {
    let single = Context::singleton(x, a_ty.clone());
    let f_ty = typecheck(sig, &FunContext::new(), &single, f)?;
    if f_ty != *a_ty {
        return Err(shape("a loop body of the loop-variable type", f));
    }
    let s = supply.fresh("s");
    let y = supply.fresh("y");
    let s_ty = Ty::prod(a_ty.clone(), a_ty.clone());
    let sv = || Term::var(s.clone());
    let pi0 = |e: Term| Term::let_(x, a_ty.clone(), Term::fst(sv()), e);
    let guard = let_bool(x, a_ty, &Term::fst(sv()), b);
    let tangent = sugar_fd(x, a_ty, f, a_ty, &Term::var(x), &Term::var(y.clone()), supply);
    let step = Term::pair(pi0(f.clone()), Term::let_(y, a_ty.clone(), Term::snd(sv()), pi0(tangent)));
    let looped = Term::snd(Term::while_(guard, step));
    Ok(Term::let_(s, s_ty, Term::pair(a.clone(), v.clone()), looped))
}

/// `v.rd(x:A. while b do f)(a)` becomes `v.rd(d:A. W(d))(0_A)`, the dagger of
/// the while-fd transform `W(d)` of `fd(x. while b do f)(a).d`.
pub fn transform_while_rd(sig: &Signature, t: &Term, supply: &mut NameSupply) -> Result<Term, TransformError> {
    let Term::Rd { dir, var, var_ty, body, point } = t else {
        return Err(shape("v.rd(x. while b do f)(a)", t));
    };
    let Term::While(b, f) = &**body else {
        return Err(shape("v.rd(x. while b do f)(a)", t));
    };
    let d = supply.fresh("d");
    // `a` must not see the dagger variable.
    let fd = while_fd_parts(sig, var, var_ty, b, f, point, &Term::var(d.clone()), supply)?;
    Ok(Term::rd((**dir).clone(), d, var_ty.clone(), fd, zero_term(var_ty)))
}

fn shape(expected: &'static str, t: &Term) -> TransformError {
    let mut found = t.to_string();
    if found.len() > 80 {
        found = format!("{}...", found.chars().take(77).collect::<String>());
    }
    TransformError::ShapeMismatch { expected, found }
}

/// Applies `rule` wherever it matches, outside-in, in a single pass. Returns
/// the rewritten term and the number of rewrites.
pub fn rewrite(sig: &Signature, rule: Rule, t: &Term, supply: &mut NameSupply) -> (Term, usize) {
    let mut count = 0;
    let out = rewrite_at(sig, rule, t, supply, &mut count);
    (out, count)
}

fn rewrite_at(sig: &Signature, rule: Rule, t: &Term, supply: &mut NameSupply, count: &mut usize) -> Term {
    let here = match rule {
        Rule::IfRd => transform_if_rd(t),
        Rule::WhileFd => transform_while_fd(sig, t, supply),
        Rule::WhileRd => transform_while_rd(sig, t, supply),
    };
    let t = match here {
        Ok(new) => {
            *count += 1;
            new
        }
        Err(_) => t.clone(),
    };
    let mut go = |m: &Term| rewrite_at(sig, rule, m, supply, count);
    match &t {
        Term::Var(_) | Term::Const(_) | Term::Star => t.clone(),
        Term::Add(a, b) => Term::add(go(a), go(b)),
        Term::Op(op, a) => Term::op(op.clone(), go(a)),
        Term::Pair(a, b) => Term::pair(go(a), go(b)),
        Term::Fst(a) => Term::fst(go(a)),
        Term::Snd(a) => Term::snd(go(a)),
        Term::FunCall(f, a) => Term::call(f.clone(), go(a)),
        Term::Let(x, ty, a, b) => Term::let_(x.clone(), ty.clone(), go(a), go(b)),
        Term::If(b, m, n) => Term::if_(rewrite_bool(b, &mut go), go(m), go(n)),
        Term::While(b, m) => Term::while_(rewrite_bool(b, &mut go), go(m)),
        Term::Rd { dir, var, var_ty, body, point } => {
            Term::rd(go(dir), var.clone(), var_ty.clone(), go(body), go(point))
        }
        Term::LetRec { name, param, param_ty, ret_ty, body, cont } => {
            Term::letrec(name.clone(), param.clone(), param_ty.clone(), ret_ty.clone(), go(body), go(cont))
        }
    }
}

fn rewrite_bool(b: &BoolTerm, go: &mut impl FnMut(&Term) -> Term) -> BoolTerm {
    match b {
        BoolTerm::True | BoolTerm::False => b.clone(),
        BoolTerm::Pred(p, m) => BoolTerm::pred(p.clone(), go(m)),
    }
}

/// How inputs are drawn for [`check_equivalence`].
#[derive(Debug, Clone, Copy)]
pub struct SampleSpec {
    pub samples: usize,
    pub seed: u64,
    /// Coordinates are uniform in `[-range, range]`.
    pub range: f64,
    /// Relative tolerance.
    pub tol: f64,
    pub fuel: usize,
    pub budget: u64,
}

impl Default for SampleSpec {
    fn default() -> Self {
        SampleSpec { samples: 50, seed: 0, range: 3.0, tol: 1e-9, fuel: 1000, budget: 100_000 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TransformReport {
    pub original: String,
    pub transformed: String,
    pub points_sampled: usize,
    /// Points at which both sides are defined.
    pub points_defined: usize,
    pub max_deviation: f64,
    pub definedness_agrees: bool,
    /// Points at which both sides also evaluated operationally.
    pub operational_checked: usize,
    pub operational_max_deviation: f64,
    /// Points skipped because evaluation ran out of budget.
    pub operational_out_of_fuel: usize,
    /// A few points where the check failed.
    pub counterexamples: Vec<Vec<f64>>,
    pub error: Option<String>,
    pub passed: bool,
}

/// Compares `⟦Γ ⊢ m1⟧` and `⟦Γ ⊢ m2⟧` at sampled points, and their
/// operational values where both evaluate.
pub fn check_equivalence(
    i: &InterpretationStructure,
    gamma: &Context,
    m1: &Term,
    m2: &Term,
    spec: &SampleSpec,
) -> TransformReport {
    let mut report = TransformReport {
        original: m1.to_string(),
        transformed: m2.to_string(),
        points_sampled: 0,
        points_defined: 0,
        max_deviation: 0.0,
        definedness_agrees: true,
        operational_checked: 0,
        operational_max_deviation: 0.0,
        operational_out_of_fuel: 0,
        counterexamples: Vec::new(),
        error: None,
        passed: false,
    };
    let maps = (|| -> Result<_, InterpError> {
        let phi = FunAssignment::new();
        Ok((denote(i, &phi, gamma, m1, spec.fuel)?, denote(i, &phi, gamma, m2, spec.fuel)?))
    })();
    let (f1, f2) = match maps {
        Ok(p) => p,
        Err(e) => {
            report.error = Some(e.to_string());
            return report;
        }
    };
    let dim = f1.dom();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let cfg = OpsemConfig { budget: spec.budget, ..OpsemConfig::default() };
    let mut ok = true;
    for _ in 0..spec.samples {
        let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-spec.range..=spec.range)).collect();
        report.points_sampled += 1;
        let (r1, r2) = match (f1.eval(&x), f2.eval(&x)) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(e), _) | (_, Err(e)) => {
                report.error = Some(e.to_string());
                ok = false;
                break;
            }
        };
        let mut bad = false;
        let both_defined = r1.is_some() && r2.is_some();
        let any_defined = r1.is_some() || r2.is_some();
        match (r1, r2) {
            (Some(a), Some(b)) => {
                report.points_defined += 1;
                let dev = deviation(&a, &b);
                report.max_deviation = report.max_deviation.max(dev);
                bad |= dev > spec.tol;
            }
            (None, None) => {}
            _ => {
                report.definedness_agrees = false;
                bad = true;
            }
        }
        // Where neither side is defined, evaluation diverges or gets stuck.
        if let Some(rho) = bind_point(i, gamma, &x).filter(|_| any_defined) {
            let (o1, o2) = (
                eval(&rho, &FunEnv::new(), i, m1, &cfg),
                eval(&rho, &FunEnv::new(), i, m2, &cfg),
            );
            match (o1, o2) {
                (Ok(a), Ok(b)) => {
                    report.operational_checked += 1;
                    let dev = deviation(&encode(&a), &encode(&b));
                    report.operational_max_deviation = report.operational_max_deviation.max(dev);
                    bad |= dev > spec.tol;
                }
                (Err(OpsemError::OutOfFuel), _) | (_, Err(OpsemError::OutOfFuel)) => report.operational_out_of_fuel += 1,
                // Stuck or undefined evaluation where both sides denote a value.
                _ => bad |= both_defined,
            }
        }
        if bad {
            ok = false;
            if report.counterexamples.len() < 5 {
                report.counterexamples.push(x);
            }
        }
    }
    report.passed = ok && report.error.is_none();
    report
}

/// Relative deviation `max |a - b| / (1 + |b|)`.
pub fn deviation(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter().zip(b).map(|(x, y)| (x - y).abs() / (1.0 + y.abs())).fold(0.0, f64::max)
}

/// Binds the variables of `gamma` to the coordinates of `x`.
pub fn bind_point(i: &InterpretationStructure, gamma: &Context, x: &[f64]) -> Option<ValueEnv> {
    let mut rho = ValueEnv::new();
    let mut at = 0;
    for (name, ty) in gamma.iter() {
        let d = i.denote_type(ty);
        rho.bind(name, ty.clone(), decode(ty, x.get(at..at + d)?)?);
        at += d;
    }
    (at == x.len()).then_some(rho)
}

/// Like [`bind_point`], but every variable is bound symbolically so that
/// evaluation records a trace over them.
pub fn bind_point_symbolic(i: &InterpretationStructure, gamma: &Context, x: &[f64]) -> Option<ValueEnv> {
    let concrete = bind_point(i, gamma, x)?;
    let mut rho = ValueEnv::new();
    for (name, ty) in gamma.iter() {
        rho.bind_symbolic(name, ty.clone(), concrete.lookup(name)?.clone());
    }
    Some(rho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_term;

    fn setup(ctx: &[&str], src: &str) -> (InterpretationStructure, Context, Term) {
        let i = InterpretationStructure::standard();
        let gamma: Context = ctx.iter().map(|v| (v.to_string(), Ty::Real)).collect();
        let m = parse_term(src, &i.sig).unwrap();
        (i, gamma, m)
    }

    fn value_at(i: &InterpretationStructure, gamma: &Context, m: &Term, x: &[f64]) -> Option<Vec<f64>> {
        denote(i, &FunAssignment::new(), gamma, m, 1000).unwrap().eval(x).unwrap()
    }

    #[test]
    fn forward_derivative_sugar() {
        let (i, gamma, m) = setup(&["a", "v"], "fd(x:real. x)(a).v");
        assert_eq!(value_at(&i, &gamma, &m, &[2.0, 5.0]), Some(vec![5.0]));
        let (i, gamma, m) = setup(&[], "fd(x:real. mul(x,x))(3).1");
        let h = 1e-5;
        let fd = ((3.0f64 + h).powi(2) - (3.0f64 - h).powi(2)) / (2.0 * h);
        assert!((value_at(&i, &gamma, &m, &[]).unwrap()[0] - fd).abs() < 1e-6);
    }

    #[test]
    fn dagger_sugar() {
        let i = InterpretationStructure::standard();
        let m = parse_term("mul(x, 2)", &i.sig).unwrap();
        let (t, y) = sugar_dagger("x", &Ty::Real, &m, &mut NameSupply::new());
        let gamma = Context::singleton(y, Ty::Real);
        assert_eq!(value_at(&i, &gamma, &t, &[5.0]), Some(vec![10.0]));
    }

    #[test]
    fn if_transform_on_abs() {
        let (i, gamma, m) = setup(&["a", "v"], "v.rd(x:real. if gt0(x) then x else neg(x))(a)");
        let t = transform_if_rd(&m).unwrap();
        assert!(matches!(t, Term::If(..)));
        assert_eq!(value_at(&i, &gamma, &t, &[2.0, 1.0]), Some(vec![1.0]));
        assert_eq!(value_at(&i, &gamma, &t, &[-2.0, 1.0]), Some(vec![-1.0]));
        let report = check_equivalence(&i, &gamma, &m, &t, &SampleSpec::default());
        assert!(report.passed, "{report:?}");
        assert!(typecheck(&i.sig, &FunContext::new(), &gamma, &t).is_ok());
    }

    #[test]
    fn swapped_branches_fail() {
        let (i, gamma, m) = setup(&["a", "v"], "v.rd(x:real. if gt0(x) then x else neg(x))(a)");
        let Term::If(b, p, q) = transform_if_rd(&m).unwrap() else { unreachable!() };
        let broken = Term::If(b, q, p);
        let report = check_equivalence(&i, &gamma, &m, &broken, &SampleSpec::default());
        assert!(!report.passed);
        assert!(!report.counterexamples.is_empty());
    }

    #[test]
    fn doubling_loop() {
        // Three doublings starting from 1 (guard: still below 5).
        let body = "while gt0(add(neg(x), 5)) do add(x, x)";
        let (i, gamma, m) = setup(&["a", "v"], &format!("fd(x:real. {body})(a).v"));
        let mut supply = NameSupply::avoiding([&m]);
        let t = transform_while_fd(&i.sig, &m, &mut supply).unwrap();
        assert_eq!(value_at(&i, &gamma, &t, &[1.0, 1.0]), Some(vec![8.0]));
        assert_eq!(value_at(&i, &gamma, &m, &[1.0, 1.0]), Some(vec![8.0]));
        // Guard false at the start: the tangent passes through.
        assert_eq!(value_at(&i, &gamma, &t, &[7.0, 3.0]), Some(vec![3.0]));

        let (_, _, r) = setup(&["a", "v"], &format!("v.rd(x:real. {body})(a)"));
        let tr = transform_while_rd(&i.sig, &r, &mut supply).unwrap();
        assert_eq!(value_at(&i, &gamma, &tr, &[1.0, 1.0]), Some(vec![8.0]));
        assert_eq!(value_at(&i, &gamma, &tr, &[7.0, 1.0]), Some(vec![1.0]));
        let spec = SampleSpec { range: 4.0, ..SampleSpec::default() };
        assert!(check_equivalence(&i, &gamma, &r, &tr, &spec).passed);
        assert!(check_equivalence(&i, &gamma, &m, &t, &spec).passed);
    }

    #[test]
    fn shape_errors() {
        let (i, _, m) = setup(&["a"], "sin(a)");
        assert!(matches!(transform_if_rd(&m), Err(TransformError::ShapeMismatch { .. })));
        assert!(transform_while_rd(&i.sig, &m, &mut NameSupply::new()).is_err());
    }

    #[test]
    fn rewrite_pass_counts() {
        let (i, _, m) = setup(&["a", "v"], "(v.rd(x:real. if gt0(x) then x else 1)(a), v.rd(x:real. if lt0(x) then x else 1)(a))");
        let (t, n) = rewrite(&i.sig, Rule::IfRd, &m, &mut NameSupply::avoiding([&m]));
        assert_eq!(n, 2);
        assert_eq!(t.count_rd_nodes(), 4);
    }

    #[test]
    fn identical_terms_have_no_deviation() {
        let (i, gamma, m) = setup(&["a"], "mul(sin(a), a)");
        let r = check_equivalence(&i, &gamma, &m, &m, &SampleSpec::default());
        assert!(r.passed);
        assert_eq!(r.max_deviation, 0.0);
    }
}
