//! The reverse-derivative axioms, checked pointwise on generated maps.

use serde::Serialize;

use super::gen::{slice, MapGen};
use super::oracle::{jvp, vjp, FD_STEP};
use crate::rdrc::{
    approx_eq, dagger_ctx, exchange, forward_derivative, reverse_derivative as rev, PMap, RdrcError,
};

#[derive(Debug, Clone, Copy)]
pub struct AxiomConfig {
    pub maps: usize,
    pub points: usize,
    pub seed: u64,
    /// Expression depth of generated maps.
    pub depth: usize,
    /// Relative tolerance for identities between maps.
    pub tol: f64,
    /// Relative tolerance against finite differences.
    pub fd_tol: f64,
}

impl Default for AxiomConfig {
    fn default() -> Self {
        AxiomConfig { maps: 50, points: 200, seed: 0, depth: 4, tol: 1e-9, fd_tol: 1e-4 }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct AxiomRow {
    pub name: String,
    pub statement: String,
    /// Point checks that ran to a verdict.
    pub checked: usize,
    pub failed: usize,
    /// Checks that could not run because a reverse primitive is missing.
    pub skipped: usize,
    /// Finite-difference probes undefined or unstable, or values overflowed.
    pub abstained: usize,
    pub max_deviation: f64,
    pub counterexample: Option<String>,
}

impl AxiomRow {
    pub fn passed(&self) -> bool {
        self.failed == 0 && self.checked > 0
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AxiomReport {
    pub seed: u64,
    pub maps: usize,
    pub points_per_map: usize,
    pub rows: Vec<AxiomRow>,
}

impl AxiomReport {
    pub fn row(&self, name: &str) -> Option<&AxiomRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn passed(&self) -> bool {
        self.rows.iter().all(AxiomRow::passed)
    }
}

const STATEMENTS: [(&str, &str); 14] = [
    ("RD.1", "R[f+g] = R[f]+R[g], R[0] = 0"),
    ("RD.2", "<a,b+c>R[f] = <a,b>R[f]+<a,c>R[f], <a,0>R[f] = restr(af)0"),
    ("RD.3", "R[pi_j] = pi_1 iota_j"),
    ("RD.4", "R[<f,g>] = (1 x pi_0)R[f] + (1 x pi_1)R[g]"),
    ("RD.5", "R[fg] = <pi_0, <pi_0 f, pi_1>R[g]>R[f]"),
    ("RD.6", "<1 x pi_0, 0 x pi_1>(iota_0 x 1)R[R[R[f]]]pi_1 = (1 x pi_1)R[f]"),
    ("RD.7", "(iota_0 x 1)R[R[(iota_0 x 1)R[R[f]]pi_1]]pi_1 = ex of the same"),
    ("RD.8", "restr(R[f]) = restr(f) x 1"),
    ("RD.9", "R[restr(f)] = (restr(f) x 1)pi_1"),
    ("R-fd", "R[f](x,w) = J(x)^T w by central differences"),
    ("D-fd", "<<pi_0,0>,pi_1>R[R[f]]pi_1 (x,v) = J(x) v by central differences"),
    ("dagger", "D[f]^dagger[A] = R[f]"),
    ("monotone", "f <= g implies R[f] <= R[g]"),
    ("join", "R[f v g] = R[f] v R[g]"),
];

enum Verdict {
    Pass(f64),
    Fail(f64, String),
    Skip,
    Abstain,
}

fn finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

fn rel_dev(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs() / (1.0 + y.abs())).fold(0.0, f64::max)
}

fn eval(f: &PMap, x: &[f64]) -> Result<Option<Vec<f64>>, RdrcError> {
    f.eval(x)
}

/// Both sides equal, including where they are defined.
fn same(lhs: &PMap, rhs: &PMap, x: &[f64], tol: f64) -> Verdict {
    let (l, r) = match (eval(lhs, x), eval(rhs, x)) {
        (Ok(l), Ok(r)) => (l, r),
        (Err(RdrcError::MissingReversePrimitive(_)), _) | (_, Err(RdrcError::MissingReversePrimitive(_))) => {
            return Verdict::Skip
        }
        (Err(e), _) | (_, Err(e)) => return Verdict::Fail(f64::INFINITY, format!("at {x:?}: {e}")),
    };
    match (l, r) {
        (None, None) => Verdict::Pass(0.0),
        (Some(a), Some(b)) if !finite(&a) || !finite(&b) => Verdict::Abstain,
        (Some(a), Some(b)) => {
            let dev = rel_dev(&a, &b);
            if approx_eq(&a, &b, tol) {
                Verdict::Pass(dev)
            } else {
                Verdict::Fail(dev, format!("at {x:?}: {a:?} vs {b:?}"))
            }
        }
        (l, r) => Verdict::Fail(f64::INFINITY, format!("at {x:?}: definedness differs ({l:?} vs {r:?})")),
    }
}

fn record(row: &mut AxiomRow, v: Verdict) {
    match v {
        Verdict::Pass(d) => {
            row.checked += 1;
            row.max_deviation = row.max_deviation.max(d);
        }
        Verdict::Fail(d, why) => {
            row.checked += 1;
            row.failed += 1;
            if d.is_finite() {
                row.max_deviation = row.max_deviation.max(d);
            }
            row.counterexample.get_or_insert(why);
        }
        Verdict::Skip => row.skipped += 1,
        Verdict::Abstain => row.abstained += 1,
    }
}

/// The maps compared by each axiom, for one generated `f : a -> b`.
struct Instance {
    f: PMap,
    rf: PMap,
    rd1: (PMap, PMap),
    rd1_zero: PMap,
    rd2: (PMap, PMap),
    rd2_zero: PMap,
    rd3: [(PMap, PMap); 2],
    rd4: (PMap, PMap),
    rd5: (PMap, PMap),
    rd6: (PMap, PMap),
    rd7: (PMap, PMap),
    rd9: (PMap, PMap),
    d: PMap,
    dagger: PMap,
    mono: (PMap, PMap),
    join: (PMap, PMap),
}

fn concat(parts: &[&[f64]]) -> Vec<f64> {
    parts.iter().flat_map(|p| p.iter().copied()).collect()
}

impl Instance {
    fn build(gen: &mut MapGen, a: usize, b: usize, depth: usize) -> Result<Instance, RdrcError> {
        let f = gen.map(a, b, depth);
        let g = gen.map(a, b, depth);
        let k = gen.map(a, 1, 1);
        let h = gen.map(b, b, depth);
        let rf = rev(&f);

        let rd1 = (rev(&PMap::add(&f, &g)?), PMap::add(&rf, &rev(&g))?);
        let rd1_zero = rev(&PMap::zero(a, b));

        // Inputs (x, w1, w2) in R^(a+2b).
        let n = a + 2 * b;
        let x = slice(n, 0, a);
        let (w1, w2) = (slice(n, a, b), slice(n, a + b, b));
        let at = |w: &PMap| -> Result<PMap, RdrcError> { PMap::compose(&PMap::pair(&x, w)?, &rf) };
        let sum = at(&PMap::add(&w1, &w2)?)?;
        let rd2 = (sum, PMap::add(&at(&w1)?, &at(&w2)?)?);
        let rd2_zero = at(&PMap::zero(n, b))?;

        // RD.3 on ((x, y), w) for the two projections out of a x b.
        let rd3 = [
            (rev(&PMap::proj0(a, b)), PMap::compose(&PMap::proj1(a + b, a), &PMap::inj0(a, b))?),
            (rev(&PMap::proj1(a, b)), PMap::compose(&PMap::proj1(a + b, b), &PMap::inj1(a, b))?),
        ];

        let id_a = PMap::identity(a);
        let rd4 = (
            rev(&PMap::pair(&f, &g)?),
            PMap::add(
                &PMap::compose(&PMap::product(&id_a, &PMap::proj0(b, b))?, &rf)?,
                &PMap::compose(&PMap::product(&id_a, &PMap::proj1(b, b))?, &rev(&g))?,
            )?,
        );

        // RD.5 for f then h : b -> b, on (x, w).
        let (p0, p1) = (PMap::proj0(a, b), PMap::proj1(a, b));
        let through_h = PMap::compose(&PMap::pair(&PMap::compose(&p0, &f)?, &p1)?, &rev(&h))?;
        let rd5 = (rev(&PMap::compose(&f, &h)?), PMap::compose(&PMap::pair(&p0, &through_h)?, &rf)?);

        // RD.6 on inputs (x, (b1, b2)).
        let pre = PMap::pair(
            &PMap::product(&id_a, &PMap::proj0(b, b))?,
            &PMap::product(&PMap::zero(a, a), &PMap::proj1(b, b))?,
        )?;
        let lift = PMap::product(&PMap::inj0(a + b, a), &PMap::identity(a + b))?;
        let lhs6 = PMap::seq(&[&pre, &lift, &rev(&rev(&rev(&f))), &PMap::proj1(a + b, a)])?;
        let rhs6 = PMap::compose(&PMap::product(&id_a, &PMap::proj1(b, b))?, &rf)?;

        // RD.7 on inputs ((x, v), (x', v')), all in R^a.
        let inner = second_order(&f, a, b)?;
        let outer = second_order(&inner, 2 * a, b)?;
        let rd7 = (outer.clone(), PMap::compose(&exchange(a, a, a, a), &outer)?);

        let bar = PMap::restrict(&f);
        let rd9 = (rev(&bar), PMap::compose(&PMap::product(&bar, &PMap::identity(a))?, &PMap::proj1(a, a))?);

        let d = forward_derivative(&f)?;
        let dagger = dagger_ctx(&d, a)?;

        let smaller = PMap::compose(&PMap::restrict(&PMap::compose(&k, &gen.prim_map("gt0_T"))?), &f)?;
        let mono = (rev(&smaller), rf.clone());

        let yes = PMap::restrict(&PMap::compose(&k, &gen.prim_map("gt0_T"))?);
        let no = PMap::restrict(&PMap::compose(&k, &gen.prim_map("gt0_F"))?);
        let (left, right) = (PMap::compose(&yes, &f)?, PMap::compose(&no, &g)?);
        let joined = PMap::join(vec![left.clone(), right.clone()], a, b)?;
        let join = (rev(&joined), PMap::join(vec![rev(&left), rev(&right)], a + b, a)?);

        Ok(Instance {
            f,
            rf,
            rd1,
            rd1_zero,
            rd2,
            rd2_zero,
            rd3,
            rd4,
            rd5,
            rd6: (lhs6, rhs6),
            rd7,
            rd9,
            d,
            dagger,
            mono,
            join,
        })
    }
}

/// `(ι₀ × 1) R[R[f]] π₁ : A × A -> B`, the forward derivative read off the
/// second reverse derivative.
fn second_order(f: &PMap, a: usize, b: usize) -> Result<PMap, RdrcError> {
    let lift = PMap::product(&PMap::inj0(a, b), &PMap::identity(a))?;
    PMap::seq(&[&lift, &rev(&rev(f)), &PMap::proj1(a, b)])
}

/// Runs every axiom on `cfg.maps` generated maps.
pub fn run_axioms(cfg: &AxiomConfig) -> AxiomReport {
    let mut rows: Vec<AxiomRow> = STATEMENTS
        .iter()
        .map(|(n, s)| AxiomRow { name: n.to_string(), statement: s.to_string(), ..AxiomRow::default() })
        .collect();
    let mut gen = MapGen::new(cfg.seed);
    for _ in 0..cfg.maps {
        let (a, b) = gen.dims();
        let inst = match Instance::build(&mut gen, a, b, cfg.depth) {
            Ok(inst) => inst,
            Err(e) => {
                for row in &mut rows {
                    record(row, Verdict::Fail(f64::INFINITY, format!("building maps: {e}")));
                }
                continue;
            }
        };
        for _ in 0..cfg.points {
            let x = gen.point(a);
            let (w1, w2) = (gen.point(b), gen.point(b));
            let (v, x2, v2) = (gen.point(a), gen.point(a), gen.point(a));
            check_point(&inst, cfg, &mut rows, &x, &w1, &w2, &v, &x2, &v2);
        }
    }
    AxiomReport { seed: cfg.seed, maps: cfg.maps, points_per_map: cfg.points, rows }
}

#[allow(clippy::too_many_arguments)]
fn check_point(
    inst: &Instance,
    cfg: &AxiomConfig,
    rows: &mut [AxiomRow],
    x: &[f64],
    w1: &[f64],
    w2: &[f64],
    v: &[f64],
    x2: &[f64],
    v2: &[f64],
) {
    let tol = cfg.tol;
    let xw = concat(&[x, w1]);
    let xww = concat(&[x, w1, w2]);
    let fx = match inst.f.eval(x) {
        Ok(fx) => fx,
        Err(e) => {
            record(&mut rows[0], Verdict::Fail(f64::INFINITY, format!("f at {x:?}: {e}")));
            return;
        }
    };

    record(&mut rows[0], same(&inst.rd1.0, &inst.rd1.1, &xw, tol));
    record(&mut rows[0], zero_check(&inst.rd1_zero, &xw, true));

    record(&mut rows[1], same(&inst.rd2.0, &inst.rd2.1, &xww, tol));
    record(&mut rows[1], zero_check(&inst.rd2_zero, &xww, fx.is_some()));

    record(&mut rows[2], same(&inst.rd3[0].0, &inst.rd3[0].1, &concat(&[x, w1, v]), tol));
    record(&mut rows[2], same(&inst.rd3[1].0, &inst.rd3[1].1, &xww, tol));
    record(&mut rows[3], same(&inst.rd4.0, &inst.rd4.1, &xww, tol));
    record(&mut rows[4], same(&inst.rd5.0, &inst.rd5.1, &xw, tol));
    record(&mut rows[9], fd_verdict(&inst.rf, &inst.f, x, w1, cfg.fd_tol));

    let bb = concat(&[x, w1, w2]);
    record(&mut rows[5], same(&inst.rd6.0, &inst.rd6.1, &bb, tol));
    let q = concat(&[x, v, x2, v2]);
    record(&mut rows[6], same(&inst.rd7.0, &inst.rd7.1, &q, tol));

    record(&mut rows[7], match inst.rf.eval(&xw) {
        Ok(r) if r.is_some() == fx.is_some() => Verdict::Pass(0.0),
        Ok(r) => Verdict::Fail(f64::INFINITY, format!("at {x:?}: f defined {}, R[f] defined {}", fx.is_some(), r.is_some())),
        Err(e) => Verdict::Fail(f64::INFINITY, e.to_string()),
    });

    let xv = concat(&[x, v]);
    record(&mut rows[8], same(&inst.rd9.0, &inst.rd9.1, &xv, tol));

    record(&mut rows[10], d_verdict(&inst.d, &inst.f, x, v, cfg.fd_tol));
    record(&mut rows[11], same(&inst.dagger, &inst.rf, &xw, tol));

    record(&mut rows[12], below(&inst.mono.0, &inst.mono.1, &xw, tol));
    record(&mut rows[13], same(&inst.join.0, &inst.join.1, &xw, tol));
}

/// Defined exactly when `defined`, and then zero.
fn zero_check(f: &PMap, x: &[f64], defined: bool) -> Verdict {
    match f.eval(x) {
        Ok(Some(v)) if !defined => Verdict::Fail(f64::INFINITY, format!("at {x:?}: defined as {v:?}, expected undefined")),
        Ok(Some(v)) if !finite(&v) => Verdict::Abstain,
        Ok(Some(v)) => {
            let dev = v.iter().fold(0.0f64, |m, y| m.max(y.abs()));
            if dev == 0.0 {
                Verdict::Pass(0.0)
            } else {
                Verdict::Fail(dev, format!("at {x:?}: {v:?} is not zero"))
            }
        }
        Ok(None) if defined => Verdict::Fail(f64::INFINITY, format!("at {x:?}: undefined, expected zero")),
        Ok(None) => Verdict::Pass(0.0),
        Err(e) => Verdict::Fail(f64::INFINITY, e.to_string()),
    }
}

/// `lhs ≤ rhs` at `x`: wherever `lhs` is defined, `rhs` agrees.
fn below(lhs: &PMap, rhs: &PMap, x: &[f64], tol: f64) -> Verdict {
    match (lhs.eval(x), rhs.eval(x)) {
        (Ok(None), Ok(_)) => Verdict::Pass(0.0),
        (Ok(Some(a)), Ok(Some(b))) if !finite(&a) || !finite(&b) => Verdict::Abstain,
        (Ok(Some(a)), Ok(Some(b))) => {
            let dev = rel_dev(&a, &b);
            if approx_eq(&a, &b, tol) {
                Verdict::Pass(dev)
            } else {
                Verdict::Fail(dev, format!("at {x:?}: {a:?} vs {b:?}"))
            }
        }
        (Ok(Some(a)), Ok(None)) => Verdict::Fail(f64::INFINITY, format!("at {x:?}: {a:?} but larger map undefined")),
        (Err(e), _) | (_, Err(e)) => Verdict::Fail(f64::INFINITY, e.to_string()),
    }
}

fn against_oracle(got: Result<Option<Vec<f64>>, RdrcError>, oracle: Option<Vec<f64>>, x: &[f64], tol: f64) -> Verdict {
    let got = match got {
        Ok(Some(g)) => g,
        // Where the map is undefined there is nothing to differentiate;
        // definedness itself is RD.8.
        Ok(None) => return Verdict::Abstain,
        Err(RdrcError::MissingReversePrimitive(_)) => return Verdict::Skip,
        Err(e) => return Verdict::Fail(f64::INFINITY, e.to_string()),
    };
    let Some(fd) = oracle else { return Verdict::Abstain };
    if !finite(&got) {
        return Verdict::Abstain;
    }
    // Scaled by the derivative under test.
    let dev = rel_dev(&fd, &got);
    if approx_eq(&fd, &got, tol) {
        Verdict::Pass(dev)
    } else {
        Verdict::Fail(dev, format!("at {x:?}: {got:?} vs finite differences {fd:?}"))
    }
}

fn fd_verdict(rf: &PMap, f: &PMap, x: &[f64], w: &[f64], tol: f64) -> Verdict {
    against_oracle(rf.eval(&concat(&[x, w])), vjp(f, x, w, FD_STEP), x, tol)
}

fn d_verdict(d: &PMap, f: &PMap, x: &[f64], v: &[f64], tol: f64) -> Verdict {
    against_oracle(d.eval(&concat(&[x, v])), jvp(f, x, v, FD_STEP), x, tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_run_passes() {
        let report = run_axioms(&AxiomConfig { maps: 6, points: 20, seed: 11, ..AxiomConfig::default() });
        for row in &report.rows {
            assert_eq!(row.failed, 0, "{}: {:?}", row.name, row.counterexample);
        }
        assert!(report.row("RD.6").unwrap().checked > 0);
    }

    #[test]
    fn a_wrong_reverse_is_caught() {
        // A map whose "reverse" drops a factor fails the oracle.
        let gen = MapGen::new(0);
        let sin = gen.prim_map("sin");
        let x = [0.4];
        let wrong = PMap::proj1(1, 1);
        assert!(matches!(fd_verdict(&wrong, &sin, &x, &[1.0], 1e-4), Verdict::Fail(..)));
        assert!(matches!(fd_verdict(&rev(&sin), &sin, &x, &[1.0], 1e-4), Verdict::Pass(_)));
    }
}
