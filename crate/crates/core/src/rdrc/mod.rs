//! Partial smooth maps `R^m ⇀ R^n` as shared combinator graphs, with
//! restriction, disjoint joins, left-additive structure and a structural
//! reverse derivative.
//!
//! Composition is written in diagrammatic order: `compose(f, g)` runs `f`
//! first. Products are flattened, so `A × B` is `R^(a+b)` with the `A`
//! coordinates first.

mod json;
mod order;
mod prims;
mod reverse;

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock, Weak};

use rustc_hash::FxHashMap;
use smallvec::{smallvec, SmallVec};
use thiserror::Error;

pub use json::pmap_to_json;
pub use order::{approx_eq, compatible, disjoint, leq};
pub use prims::{PrimTable, Primitive};
pub use reverse::{dagger_ctx, exchange, forward_derivative, reverse_derivative};

/// Absolute tolerance for members of a join that are defined at the same point.
pub const JOIN_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RdrcError {
    #[error("dimension mismatch in {op}: expected {expected}, found {found}")]
    DimensionMismatch { op: &'static str, expected: usize, found: usize },
    #[error("join members disagree at {point:?}: {left:?} vs {right:?}")]
    JoinConflict { point: Vec<f64>, left: Vec<f64>, right: Vec<f64> },
    #[error("no reverse derivative available for primitive `{0}`")]
    MissingReversePrimitive(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum EvalResult {
    Defined(Vec<f64>),
    Undefined,
}

impl EvalResult {
    pub fn defined(self) -> Option<Vec<f64>> {
        match self {
            EvalResult::Defined(v) => Some(v),
            EvalResult::Undefined => None,
        }
    }

    pub fn is_defined(&self) -> bool {
        matches!(self, EvalResult::Defined(_))
    }
}

/// The functional whose least fixed point a `letrec` denotes.
pub type Functional = Arc<dyn Fn(PMap) -> Result<PMap, RdrcError> + Send + Sync>;

#[derive(Clone)]
pub struct PMap(Arc<Node>);

struct Node {
    dom: usize,
    cod: usize,
    total: bool,
    kind: Kind,
    /// `R[self]` while something else keeps it alive, so that repeated
    /// reverses of one node share a graph (and evaluation results).
    reversed: Mutex<Weak<Node>>,
    /// Built from identities, projections, injections, zeros, pairs, sums
    /// and composites of these: total, linear and point-independent.
    linear: bool,
}

enum Kind {
    Identity,
    Compose(PMap, PMap),
    Pair(PMap, PMap),
    /// `π₀ : l + r -> l`
    Proj0 { left: usize },
    /// `π₁ : l + r -> r`
    Proj1 { left: usize },
    /// `ι₀ = ⟨1, 0⟩ : l -> l + r`
    Inj0 { right: usize },
    /// `ι₁ = ⟨0, 1⟩ : r -> l + r`
    Inj1 { left: usize },
    Zero,
    Add(Vec<PMap>),
    ConstPoint(Vec<f64>),
    Prim(Arc<Primitive>),
    Restrict(PMap),
    Join(Vec<PMap>),
    Empty,
    /// `R[f]`, expanded one structural step on first use.
    Reverse(PMap, OnceLock<Result<PMap, RdrcError>>),
    Bang,
    Loop(Arc<LoopData>),
    Fixpoint(Arc<FixData>),
}

/// `R^order` of the join over `i ≤ fuel` of `step^i ; exit`.
struct LoopData {
    base: usize,
    step: PMap,
    exit: PMap,
    fuel: usize,
    order: usize,
    chains: Mutex<HashMap<usize, PMap>>,
}

/// The `level`-th Kleene approximant `F^level(∅)`.
struct FixData {
    functional: Functional,
    level: usize,
    expansion: OnceLock<Result<PMap, RdrcError>>,
}

/// Values of intermediate nodes; most are short.
type Val = SmallVec<[f64; 8]>;
type Key = SmallVec<[u64; 8]>;
type Memo = FxHashMap<(usize, Key), Option<Val>>;

fn check_dim(op: &'static str, expected: usize, found: usize) -> Result<(), RdrcError> {
    if expected == found {
        Ok(())
    } else {
        Err(RdrcError::DimensionMismatch { op, expected, found })
    }
}

impl PMap {
    fn node(dom: usize, cod: usize, total: bool, kind: Kind) -> PMap {
        let linear = match &kind {
            Kind::Identity | Kind::Proj0 { .. } | Kind::Proj1 { .. } | Kind::Inj0 { .. } | Kind::Inj1 { .. } | Kind::Zero => {
                true
            }
            Kind::Compose(f, g) | Kind::Pair(f, g) => f.is_linear() && g.is_linear(),
            Kind::Add(fs) => fs.iter().all(PMap::is_linear),
            _ => false,
        };
        PMap(Arc::new(Node { dom, cod, total, kind, reversed: Mutex::new(Weak::new()), linear }))
    }

    pub(crate) fn is_linear(&self) -> bool {
        self.0.linear
    }

    pub fn dom(&self) -> usize {
        self.0.dom
    }

    pub fn cod(&self) -> usize {
        self.0.cod
    }

    /// Known to be defined everywhere.
    pub fn is_total(&self) -> bool {
        self.0.total
    }

    pub fn ptr_eq(&self, other: &PMap) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }

    pub fn identity(n: usize) -> PMap {
        PMap::node(n, n, true, Kind::Identity)
    }

    pub fn is_identity(&self) -> bool {
        matches!(self.0.kind, Kind::Identity)
    }

    pub fn is_restriction(&self) -> bool {
        matches!(self.0.kind, Kind::Restrict(_) | Kind::Identity)
    }

    /// `f ; g`.
    pub fn compose(f: &PMap, g: &PMap) -> Result<PMap, RdrcError> {
        check_dim("compose", f.cod(), g.dom())?;
        if f.is_identity() {
            return Ok(g.clone());
        }
        if g.is_identity() {
            return Ok(f.clone());
        }
        if let Some(h) = PMap::simplify_compose(f, g) {
            return Ok(h);
        }
        Ok(PMap::node(f.dom(), g.cod(), f.is_total() && g.is_total(), Kind::Compose(f.clone(), g.clone())))
    }

    /// Exact rewrites of `f ; g` that keep nested reverse derivatives small.
    fn simplify_compose(f: &PMap, g: &PMap) -> Option<PMap> {
        let linear = |m: &PMap| {
            matches!(m.0.kind, Kind::Zero | Kind::Proj0 { .. } | Kind::Proj1 { .. } | Kind::Inj0 { .. } | Kind::Inj1 { .. })
        };
        match (&f.0.kind, &g.0.kind) {
            (_, Kind::Zero) if f.is_total() => Some(PMap::zero(f.dom(), g.cod())),
            (Kind::Zero, _) if linear(g) => Some(PMap::zero(f.dom(), g.cod())),
            (Kind::Pair(a, b), Kind::Proj0 { left }) if *left == a.cod() => {
                Some(if b.is_total() { a.clone() } else { PMap::compose(&PMap::restrict(b), a).ok()? })
            }
            (Kind::Pair(a, b), Kind::Proj1 { left }) if *left == a.cod() => {
                Some(if a.is_total() { b.clone() } else { PMap::compose(&PMap::restrict(a), b).ok()? })
            }
            (Kind::Inj0 { .. }, Kind::Proj0 { left }) if *left == f.dom() => {
                Some(PMap::identity(*left))
            }
            (Kind::Inj0 { .. }, Kind::Proj1 { left }) if *left == f.dom() => Some(PMap::zero(f.dom(), g.cod())),
            (Kind::Inj1 { left }, Kind::Proj1 { left: l2 }) if left == l2 => Some(PMap::identity(f.dom())),
            (Kind::Inj1 { left }, Kind::Proj0 { left: l2 }) if left == l2 => Some(PMap::zero(f.dom(), g.cod())),
            _ => None,
        }
    }

    /// Composes a non-empty sequence left to right.
    pub fn seq(maps: &[&PMap]) -> Result<PMap, RdrcError> {
        let (first, rest) = maps.split_first().expect("empty sequence");
        rest.iter().try_fold((*first).clone(), |acc, g| PMap::compose(&acc, g))
    }

    /// `⟨f, g⟩`.
    pub fn pair(f: &PMap, g: &PMap) -> Result<PMap, RdrcError> {
        check_dim("pair", f.dom(), g.dom())?;
        match (&f.0.kind, &g.0.kind) {
            (Kind::Proj0 { left }, Kind::Proj1 { left: l2 }) if left == l2 && f.cod() == *left => {
                return Ok(PMap::identity(f.dom()));
            }
            (Kind::Zero, Kind::Zero) => return Ok(PMap::zero(f.dom(), f.cod() + g.cod())),
            _ => {}
        }
        Ok(PMap::node(f.dom(), f.cod() + g.cod(), f.is_total() && g.is_total(), Kind::Pair(f.clone(), g.clone())))
    }

    /// `f × g = ⟨π₀ f, π₁ g⟩`.
    pub fn product(f: &PMap, g: &PMap) -> Result<PMap, RdrcError> {
        let (a, b) = (f.dom(), g.dom());
        PMap::pair(&PMap::compose(&PMap::proj0(a, b), f)?, &PMap::compose(&PMap::proj1(a, b), g)?)
    }

    pub fn proj0(left: usize, right: usize) -> PMap {
        if right == 0 {
            return PMap::identity(left);
        }
        PMap::node(left + right, left, true, Kind::Proj0 { left })
    }

    pub fn proj1(left: usize, right: usize) -> PMap {
        if left == 0 {
            return PMap::identity(right);
        }
        PMap::node(left + right, right, true, Kind::Proj1 { left })
    }

    pub fn inj0(left: usize, right: usize) -> PMap {
        if right == 0 {
            return PMap::identity(left);
        }
        PMap::node(left, left + right, true, Kind::Inj0 { right })
    }

    pub fn inj1(left: usize, right: usize) -> PMap {
        if left == 0 {
            return PMap::identity(right);
        }
        PMap::node(right, left + right, true, Kind::Inj1 { left })
    }

    pub fn zero(dom: usize, cod: usize) -> PMap {
        PMap::node(dom, cod, true, Kind::Zero)
    }

    /// `! : R^dom -> R^0`.
    pub fn bang(dom: usize) -> PMap {
        PMap::node(dom, 0, true, Kind::Bang)
    }

    /// A point `R^0 -> R^n`.
    pub fn const_point(v: Vec<f64>) -> PMap {
        PMap::node(0, v.len(), true, Kind::ConstPoint(v))
    }

    /// The nowhere-defined map.
    pub fn empty(dom: usize, cod: usize) -> PMap {
        PMap::node(dom, cod, false, Kind::Empty)
    }

    pub fn prim(p: &Arc<Primitive>) -> PMap {
        PMap::node(p.dom, p.cod, p.total, Kind::Prim(p.clone()))
    }

    pub fn add(f: &PMap, g: &PMap) -> Result<PMap, RdrcError> {
        PMap::sum(vec![f.clone(), g.clone()], f.dom(), f.cod())
    }

    /// Pointwise sum; the empty sum is `0`.
    pub fn sum(maps: Vec<PMap>, dom: usize, cod: usize) -> Result<PMap, RdrcError> {
        for f in &maps {
            check_dim("sum (domain)", dom, f.dom())?;
            check_dim("sum (codomain)", cod, f.cod())?;
        }
        // Zero summands are total, so dropping them is exact.
        let maps: Vec<PMap> = maps
            .into_iter()
            .flat_map(|f| match &f.0.kind {
                Kind::Add(inner) => inner.clone(),
                Kind::Zero => Vec::new(),
                _ => vec![f],
            })
            .collect();
        match maps.len() {
            0 => Ok(PMap::zero(dom, cod)),
            1 => Ok(maps.into_iter().next().unwrap()),
            _ => {
                let total = maps.iter().all(PMap::is_total);
                Ok(PMap::node(dom, cod, total, Kind::Add(maps)))
            }
        }
    }

    /// The restriction idempotent `f̄`.
    pub fn restrict(f: &PMap) -> PMap {
        if f.is_total() {
            return PMap::identity(f.dom());
        }
        if f.is_restriction() {
            return f.clone();
        }
        PMap::node(f.dom(), f.dom(), false, Kind::Restrict(f.clone()))
    }

    /// Join of pairwise compatible maps.
    pub fn join(maps: Vec<PMap>, dom: usize, cod: usize) -> Result<PMap, RdrcError> {
        for f in &maps {
            check_dim("join (domain)", dom, f.dom())?;
            check_dim("join (codomain)", cod, f.cod())?;
        }
        match maps.len() {
            0 => Ok(PMap::empty(dom, cod)),
            1 => Ok(maps.into_iter().next().unwrap()),
            _ => {
                let total = maps.iter().any(PMap::is_total);
                Ok(PMap::node(dom, cod, total, Kind::Join(maps)))
            }
        }
    }

    /// `R[f] : dom + cod -> dom`, built lazily.
    pub fn reverse(f: &PMap) -> PMap {
        let mut slot = f.0.reversed.lock().unwrap();
        if let Some(r) = slot.upgrade() {
            return PMap(r);
        }
        let r = PMap::node(f.dom() + f.cod(), f.dom(), f.is_total(), Kind::Reverse(f.clone(), OnceLock::new()));
        *slot = Arc::downgrade(&r.0);
        r
    }

    /// The join over `0 ≤ i ≤ fuel` of `step^i ; exit`, where `exit` is a
    /// restriction idempotent disjoint from the domain of `step`.
    pub fn while_loop(step: &PMap, exit: &PMap, fuel: usize) -> Result<PMap, RdrcError> {
        check_dim("while (step)", step.dom(), step.cod())?;
        check_dim("while (exit)", step.dom(), exit.dom())?;
        check_dim("while (exit)", exit.dom(), exit.cod())?;
        Ok(PMap::loop_node(LoopData {
            base: step.dom(),
            step: step.clone(),
            exit: exit.clone(),
            fuel,
            order: 0,
            chains: Mutex::new(HashMap::new()),
        }))
    }

    fn loop_node(data: LoopData) -> PMap {
        let (mut d, mut c) = (data.base, data.base);
        for _ in 0..data.order {
            (d, c) = (d + c, d);
        }
        PMap::node(d, c, false, Kind::Loop(Arc::new(data)))
    }

    /// The Kleene approximant `F^level(∅)` of a functional on maps
    /// `dom -> cod`. Levels are unfolded on demand.
    pub fn fixpoint(functional: Functional, dom: usize, cod: usize, level: usize) -> PMap {
        if level == 0 {
            return PMap::empty(dom, cod);
        }
        PMap::node(
            dom,
            cod,
            false,
            Kind::Fixpoint(Arc::new(FixData { functional, level, expansion: OnceLock::new() })),
        )
    }

    pub fn kind_name(&self) -> &'static str {
        match &self.0.kind {
            Kind::Identity => "Identity",
            Kind::Compose(..) => "Compose",
            Kind::Pair(..) => "Pair",
            Kind::Proj0 { .. } => "Proj0",
            Kind::Proj1 { .. } => "Proj1",
            Kind::Inj0 { .. } => "Inj0",
            Kind::Inj1 { .. } => "Inj1",
            Kind::Zero => "Zero",
            Kind::Add(_) => "AddMaps",
            Kind::ConstPoint(_) => "ConstPoint",
            Kind::Prim(_) => "Prim",
            Kind::Restrict(_) => "Restrict",
            Kind::Join(_) => "Join",
            Kind::Empty => "Empty",
            Kind::Reverse(..) => "Reverse",
            Kind::Bang => "Bang",
            Kind::Loop(_) => "Loop",
            Kind::Fixpoint(_) => "Fixpoint",
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<EvalResult, RdrcError> {
        Ok(match self.eval(x)? {
            Some(v) => EvalResult::Defined(v),
            None => EvalResult::Undefined,
        })
    }

    /// `Ok(None)` where the map is undefined.
    pub fn eval(&self, x: &[f64]) -> Result<Option<Vec<f64>>, RdrcError> {
        check_dim("evaluate", self.dom(), x.len())?;
        Ok(self.eval_raw(x, &mut Memo::default())?.map(|v| v.into_vec()))
    }

    /// Evaluation with results of composite nodes shared within one call;
    /// nested reverse derivatives revisit the same forward subgraphs often.
    fn eval_raw(&self, x: &[f64], memo: &mut Memo) -> Result<Option<Val>, RdrcError> {
        let cached = matches!(
            self.0.kind,
            Kind::Compose(..)
                | Kind::Pair(..)
                | Kind::Add(_)
                | Kind::Prim(_)
                | Kind::Restrict(_)
                | Kind::Join(_)
                | Kind::Reverse(..)
                | Kind::Loop(_)
                | Kind::Fixpoint(_)
        );
        if !cached {
            return self.eval_node(x, memo);
        }
        let key = (Arc::as_ptr(&self.0) as usize, x.iter().map(|v| v.to_bits()).collect::<Key>());
        if let Some(hit) = memo.get(&key) {
            return Ok(hit.clone());
        }
        let out = self.eval_node(x, memo)?;
        memo.insert(key, out.clone());
        Ok(out)
    }

    fn eval_node(&self, x: &[f64], memo: &mut Memo) -> Result<Option<Val>, RdrcError> {
        macro_rules! defined {
            ($e:expr) => {
                match $e? {
                    Some(v) => v,
                    None => return Ok(None),
                }
            };
        }
        Ok(Some(match &self.0.kind {
            Kind::Identity => Val::from_slice(x),
            Kind::Compose(f, g) => {
                let y = defined!(f.eval_raw(x, memo));
                defined!(g.eval_raw(&y, memo))
            }
            Kind::Pair(f, g) => {
                let mut y = defined!(f.eval_raw(x, memo));
                y.extend(defined!(g.eval_raw(x, memo)));
                y
            }
            Kind::Proj0 { left } => Val::from_slice(&x[..*left]),
            Kind::Proj1 { left } => Val::from_slice(&x[*left..]),
            Kind::Inj0 { right } => {
                let mut y = Val::from_slice(x);
                y.resize(x.len() + right, 0.0);
                y
            }
            Kind::Inj1 { left } => {
                let mut y: Val = smallvec![0.0; *left];
                y.extend_from_slice(x);
                y
            }
            Kind::Zero => smallvec![0.0; self.cod()],
            Kind::Add(fs) => {
                let mut acc: Val = smallvec![0.0; self.cod()];
                for f in fs {
                    let y = defined!(f.eval_raw(x, memo));
                    acc.iter_mut().zip(y).for_each(|(a, b)| *a += b);
                }
                acc
            }
            Kind::ConstPoint(v) => Val::from_slice(v),
            Kind::Prim(p) => Val::from_vec(defined!(Ok::<_, RdrcError>(p.apply(x)))),
            Kind::Restrict(f) => {
                defined!(f.eval_raw(x, memo));
                Val::from_slice(x)
            }
            Kind::Join(fs) => {
                let mut found: Option<Val> = None;
                for f in fs {
                    if let Some(y) = f.eval_raw(x, memo)? {
                        match &found {
                            None => found = Some(y),
                            Some(prev) => {
                                let agree = prev.iter().zip(&y).all(|(a, b)| (a - b).abs() <= JOIN_TOLERANCE);
                                if !agree {
                                    return Err(RdrcError::JoinConflict {
                                        point: x.to_vec(),
                                        left: prev.to_vec(),
                                        right: y.into_vec(),
                                    });
                                }
                            }
                        }
                    }
                }
                defined!(Ok::<_, RdrcError>(found))
            }
            Kind::Empty => return Ok(None),
            Kind::Reverse(..) | Kind::Fixpoint(_) => return self.unfold()?.eval_raw(x, memo),
            Kind::Bang => Val::new(),
            Kind::Loop(data) => return data.eval(x, memo),
        }))
    }

    /// For lazily built nodes, the structural map they stand for; chains of
    /// fixpoint approximants are followed iteratively.
    fn unfold(&self) -> Result<PMap, RdrcError> {
        let mut cur = self.clone();
        loop {
            let next = match &cur.0.kind {
                Kind::Reverse(f, cell) => cell.get_or_init(|| reverse::reverse_step(f)).clone()?,
                Kind::Fixpoint(data) => data
                    .expansion
                    .get_or_init(|| {
                        let below = PMap::fixpoint(data.functional.clone(), cur.dom(), cur.cod(), data.level - 1);
                        let f = (data.functional)(below)?;
                        check_dim("fixpoint (domain)", cur.dom(), f.dom())?;
                        check_dim("fixpoint (codomain)", cur.cod(), f.cod())?;
                        Ok(f)
                    })
                    .clone()?,
                _ => return Ok(cur),
            };
            cur = next;
        }
    }
}

impl LoopData {
    fn eval(&self, x: &[f64], memo: &mut Memo) -> Result<Option<Val>, RdrcError> {
        let mut cur = Val::from_slice(&x[..self.base]);
        let mut count = None;
        for i in 0..=self.fuel {
            if self.exit.eval_raw(&cur, memo)?.is_some() {
                count = Some(i);
                break;
            }
            match self.step.eval_raw(&cur, memo)? {
                Some(next) => cur = next,
                None => return Ok(None),
            }
        }
        let Some(n) = count else { return Ok(None) };
        if self.order == 0 {
            return Ok(Some(cur));
        }
        let chain = self.chain(n)?;
        chain.eval_raw(x, memo)
    }

    /// `R^order` of `step^n ; exit`.
    fn chain(&self, n: usize) -> Result<PMap, RdrcError> {
        if let Some(c) = self.chains.lock().unwrap().get(&n) {
            return Ok(c.clone());
        }
        let mut c = self.exit.clone();
        for _ in 0..n {
            c = PMap::compose(&self.step, &c)?;
        }
        for _ in 0..self.order {
            c = PMap::reverse(&c);
        }
        self.chains.lock().unwrap().insert(n, c.clone());
        Ok(c)
    }

    fn derived(&self) -> LoopData {
        LoopData {
            base: self.base,
            step: self.step.clone(),
            exit: self.exit.clone(),
            fuel: self.fuel,
            order: self.order + 1,
            chains: Mutex::new(HashMap::new()),
        }
    }
}

impl fmt::Debug for PMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn go(m: &PMap, f: &mut fmt::Formatter<'_>, depth: usize) -> fmt::Result {
            write!(f, "{}[{}->{}]", m.kind_name(), m.dom(), m.cod())?;
            if let Kind::Prim(p) = &m.0.kind {
                write!(f, "({})", p.name)?;
            }
            let kids = m.children();
            if kids.is_empty() {
                return Ok(());
            }
            if depth == 0 {
                return f.write_str("(..)");
            }
            f.write_str("(")?;
            for (i, k) in kids.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                go(k, f, depth - 1)?;
            }
            f.write_str(")")
        }
        go(self, f, 4)
    }
}

impl PMap {
    fn children(&self) -> Vec<PMap> {
        match &self.0.kind {
            Kind::Compose(a, b) | Kind::Pair(a, b) => vec![a.clone(), b.clone()],
            Kind::Add(fs) | Kind::Join(fs) => fs.clone(),
            Kind::Restrict(f) | Kind::Reverse(f, _) => vec![f.clone()],
            Kind::Loop(d) => vec![d.step.clone(), d.exit.clone()],
            _ => Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> PrimTable {
        PrimTable::standard(4)
    }

    fn p(name: &str) -> PMap {
        PMap::prim(table().get(name).unwrap())
    }

    fn at(f: &PMap, x: &[f64]) -> Option<Vec<f64>> {
        f.eval(x).unwrap()
    }

    #[test]
    fn identity_evaluates_to_input() {
        assert_eq!(at(&PMap::identity(3), &[1.0, 2.0, 3.0]), Some(vec![1.0, 2.0, 3.0]));
    }

    #[test]
    fn restriction_of_sqrt() {
        let r = PMap::restrict(&p("sqrtp"));
        assert_eq!(at(&r, &[-1.0]), None);
        assert_eq!(at(&r, &[4.0]), Some(vec![4.0]));
        assert!(PMap::restrict(&PMap::identity(2)).is_identity());
        assert!(PMap::restrict(&r).ptr_eq(&r));
    }

    #[test]
    fn join_of_disjoint_branches() {
        let sq = PMap::compose(&PMap::pair(&PMap::identity(1), &PMap::identity(1)).unwrap(), &p("mul")).unwrap();
        let pos = PMap::compose(&PMap::restrict(&p("gt0_T")), &sq).unwrap();
        let neg = PMap::compose(&PMap::restrict(&p("gt0_F")), &p("neg")).unwrap();
        let j = PMap::join(vec![pos, neg], 1, 1).unwrap();
        assert_eq!(at(&j, &[2.0]), Some(vec![4.0]));
        assert_eq!(at(&j, &[-3.0]), Some(vec![3.0]));
        assert_eq!(at(&j, &[0.0]), None);
    }

    #[test]
    fn join_conflict_is_reported() {
        let j = PMap::join(vec![PMap::identity(1), PMap::zero(1, 1)], 1, 1).unwrap();
        assert!(matches!(j.eval(&[1.0]), Err(RdrcError::JoinConflict { .. })));
        assert_eq!(at(&j, &[0.0]), Some(vec![0.0]));
    }

    #[test]
    fn dimension_checks() {
        assert!(matches!(PMap::compose(&PMap::identity(2), &p("sin")), Err(RdrcError::DimensionMismatch { .. })));
        assert!(PMap::identity(2).eval(&[1.0]).is_err());
    }

    #[test]
    fn sum_with_zero_is_unchanged() {
        let f = p("sin");
        let g = PMap::add(&f, &PMap::zero(1, 1)).unwrap();
        for x in [-1.0, 0.3, 2.0] {
            assert_eq!(at(&g, &[x]), at(&f, &[x]));
        }
    }

    #[test]
    fn projections_and_injections() {
        let x = [1.0, 2.0, 3.0];
        assert_eq!(at(&PMap::proj0(1, 2), &x), Some(vec![1.0]));
        assert_eq!(at(&PMap::proj1(1, 2), &x), Some(vec![2.0, 3.0]));
        assert_eq!(at(&PMap::inj0(1, 2), &[5.0]), Some(vec![5.0, 0.0, 0.0]));
        assert_eq!(at(&PMap::inj1(2, 1), &[5.0]), Some(vec![0.0, 0.0, 5.0]));
        let id = PMap::pair(&PMap::proj0(1, 2), &PMap::proj1(1, 2)).unwrap();
        assert_eq!(at(&id, &x), Some(x.to_vec()));
    }

    #[test]
    fn loop_counts_down() {
        let dec = PMap::compose(
            &PMap::pair(&PMap::identity(1), &PMap::compose(&PMap::bang(1), &PMap::const_point(vec![-1.0])).unwrap())
                .unwrap(),
            &p("add"),
        )
        .unwrap();
        let step = PMap::compose(&PMap::restrict(&p("gt0_T")), &dec).unwrap();
        let exit = PMap::restrict(&p("gt0_F"));
        let l = PMap::while_loop(&step, &exit, 100).unwrap();
        assert_eq!(at(&l, &[2.5]), Some(vec![-0.5]));
        assert_eq!(at(&l, &[2.0]), None);
        let short = PMap::while_loop(&step, &exit, 2).unwrap();
        assert_eq!(at(&short, &[2.5]), None);
        assert_eq!(at(&short, &[1.5]), Some(vec![-0.5]));
    }

    #[test]
    fn fixpoint_of_identity_functional_is_empty() {
        let f: Functional = Arc::new(Ok);
        let m = PMap::fixpoint(f, 1, 1, 10_000);
        assert_eq!(at(&m, &[1.0]), None);
    }

    #[test]
    fn fixpoint_of_constant_functional_stabilizes() {
        let c = PMap::compose(&PMap::bang(1), &PMap::const_point(vec![7.0])).unwrap();
        let f: Functional = Arc::new(move |_| Ok(c.clone()));
        assert_eq!(at(&PMap::fixpoint(f.clone(), 1, 1, 1), &[3.0]), Some(vec![7.0]));
        assert_eq!(at(&PMap::fixpoint(f, 1, 1, 0), &[3.0]), None);
    }
}
