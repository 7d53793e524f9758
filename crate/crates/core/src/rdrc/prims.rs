//! Primitive smooth partial maps and their iterated reverse derivatives.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

type Evaluator = Box<dyn Fn(&[f64]) -> Option<Vec<f64>> + Send + Sync>;

/// A primitive partial map `R^dom ⇀ R^cod`. The evaluator returns `None`
/// outside the (open) domain. `reverse` is the primitive for `R[self]`.
pub struct Primitive {
    pub name: String,
    pub dom: usize,
    pub cod: usize,
    /// Defined everywhere.
    pub total: bool,
    pub reverse: Option<Arc<Primitive>>,
    eval: Evaluator,
}

impl Primitive {
    pub fn new(
        name: impl Into<String>,
        dom: usize,
        cod: usize,
        total: bool,
        reverse: Option<Arc<Primitive>>,
        eval: impl Fn(&[f64]) -> Option<Vec<f64>> + Send + Sync + 'static,
    ) -> Primitive {
        Primitive { name: name.into(), dom, cod, total, reverse, eval: Box::new(eval) }
    }

    pub fn apply(&self, x: &[f64]) -> Option<Vec<f64>> {
        debug_assert_eq!(x.len(), self.dom, "{}", self.name);
        (self.eval)(x)
    }
}

impl fmt::Debug for Primitive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}->{}", self.name, self.dom, self.cod)
    }
}

#[derive(Clone, Default)]
pub struct PrimTable {
    prims: BTreeMap<String, Arc<Primitive>>,
}

impl fmt::Debug for PrimTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.prims.keys()).finish()
    }
}

/// Derivatives `f, f', f'', f''', f''''` of a unary function at a point.
type Jet = fn(f64) -> [f64; 5];
type Domain = fn(f64) -> bool;

fn sin_jet(x: f64) -> [f64; 5] {
    let (s, c) = x.sin_cos();
    [s, c, -s, -c, s]
}

fn cos_jet(x: f64) -> [f64; 5] {
    let (s, c) = x.sin_cos();
    [c, -s, -c, s, c]
}

fn exp_jet(x: f64) -> [f64; 5] {
    [x.exp(); 5]
}

fn neg_jet(x: f64) -> [f64; 5] {
    [-x, -1.0, 0.0, 0.0, 0.0]
}

fn recip_jet(x: f64) -> [f64; 5] {
    let r = 1.0 / x;
    [r, -r * r, 2.0 * r.powi(3), -6.0 * r.powi(4), 24.0 * r.powi(5)]
}

fn sqrtp_jet(x: f64) -> [f64; 5] {
    let s = x.sqrt();
    [s, 0.5 / s, -0.25 / (x * s), 0.375 / (x * x * s), -0.9375 / (x * x * x * s)]
}

/// The `k`-th iterated reverse derivative of a unary function, on the
/// flattened input `[x, w, u, z1, z2, c1, c2, c3]` prefix.
fn unary_level(k: usize, d: &[f64; 5], v: &[f64]) -> Vec<f64> {
    match k {
        0 => vec![d[0]],
        1 => vec![d[1] * v[1]],
        2 => {
            let (w, u) = (v[1], v[2]);
            vec![d[2] * w * u, d[1] * u]
        }
        3 => {
            let (w, u, z1, z2) = (v[1], v[2], v[3], v[4]);
            vec![d[3] * w * u * z1 + d[2] * u * z2, d[2] * u * z1, d[2] * w * z1 + d[1] * z2]
        }
        4 => {
            let (w, u, z1, z2) = (v[1], v[2], v[3], v[4]);
            let (c1, c2, c3) = (v[5], v[6], v[7]);
            vec![
                (d[4] * w * u * z1 + d[3] * u * z2) * c1 + d[3] * u * z1 * c2 + (d[3] * w * z1 + d[2] * z2) * c3,
                d[3] * u * z1 * c1 + d[2] * z1 * c3,
                (d[3] * w * z1 + d[2] * z2) * c1 + d[2] * z1 * c2,
                d[3] * w * u * c1 + d[2] * u * c2 + d[2] * w * c3,
                d[2] * u * c1 + d[1] * c3,
            ]
        }
        _ => unreachable!("reverse depth"),
    }
}

fn mul_level(k: usize, v: &[f64]) -> Vec<f64> {
    let (x, y) = (v[0], v[1]);
    match k {
        0 => vec![x * y],
        1 => {
            let w = v[2];
            vec![y * w, x * w]
        }
        2 => {
            let (w, u1, u2) = (v[2], v[3], v[4]);
            vec![w * u2, w * u1, y * u1 + x * u2]
        }
        3 => {
            let (w, u1, u2, z1, z2, z3) = (v[2], v[3], v[4], v[5], v[6], v[7]);
            vec![u2 * z3, u1 * z3, u2 * z1 + u1 * z2, w * z2 + y * z3, w * z1 + x * z3]
        }
        4 => {
            let (w, u1, u2, z1, z2, z3) = (v[2], v[3], v[4], v[5], v[6], v[7]);
            let (c1, c2, c3, c4, c5) = (v[8], v[9], v[10], v[11], v[12]);
            vec![
                z3 * c5,
                z3 * c4,
                z2 * c4 + z1 * c5,
                z3 * c2 + z2 * c3,
                z3 * c1 + z1 * c3,
                u2 * c3 + w * c5,
                u1 * c3 + w * c4,
                u2 * c1 + u1 * c2 + y * c4 + x * c5,
            ]
        }
        _ => unreachable!("reverse depth"),
    }
}

fn add_level(k: usize, v: &[f64]) -> Vec<f64> {
    match k {
        0 => vec![v[0] + v[1]],
        1 => vec![v[2], v[2]],
        2 => vec![0.0, 0.0, v[3] + v[4]],
        3 => vec![0.0, 0.0, 0.0, v[7], v[7]],
        4 => {
            let mut out = vec![0.0; 8];
            out[7] = v[11] + v[12];
            out
        }
        _ => unreachable!("reverse depth"),
    }
}

/// Dimensions of `f, R[f], R[R[f]], ...` starting from `dom -> cod`.
fn chain_dims(dom: usize, cod: usize, depth: usize) -> Vec<(usize, usize)> {
    let mut dims = vec![(dom, cod)];
    for _ in 0..depth {
        let (d, c) = *dims.last().unwrap();
        dims.push((d + c, d));
    }
    dims
}

fn level_name(base: &str, k: usize) -> String {
    if k == 0 {
        base.to_string()
    } else {
        format!("{base}_{}", "R".repeat(k))
    }
}

impl PrimTable {
    pub fn new() -> PrimTable {
        PrimTable::default()
    }

    pub fn insert(&mut self, p: Arc<Primitive>) {
        self.prims.insert(p.name.clone(), p);
    }

    pub fn get(&self, name: &str) -> Option<&Arc<Primitive>> {
        self.prims.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.prims.keys().map(String::as_str)
    }

    /// Registers `base` and its reverse chain `base_R`, ..., `base_R^depth`,
    /// where `level(k, input)` evaluates the `k`-th member and `domain` tests
    /// the first coordinate.
    pub fn insert_chain(
        &mut self,
        base: &str,
        dom: usize,
        cod: usize,
        depth: usize,
        total: bool,
        domain: Domain,
        level: Arc<dyn Fn(usize, &[f64]) -> Vec<f64> + Send + Sync>,
    ) {
        let dims = chain_dims(dom, cod, depth);
        let mut next: Option<Arc<Primitive>> = None;
        for k in (0..=depth).rev() {
            let (d, c) = dims[k];
            let level = level.clone();
            let p = Arc::new(Primitive::new(level_name(base, k), d, c, total, next.take(), move |v| {
                domain(v[0]).then(|| level(k, v))
            }));
            self.insert(p.clone());
            next = Some(p);
        }
    }

    /// `add`, `mul`, `neg`, `sin`, `cos`, `exp`, `recip` (x ≠ 0), `sqrtp`
    /// (x > 0), each with reverse chain of depth `depth` (at most 4), and the
    /// predicate halves `gt0_T`, `gt0_F`, `lt0_T`, `lt0_F`.
    pub fn standard(depth: usize) -> PrimTable {
        assert!(depth <= 4, "reverse chains are tabulated up to depth 4");
        let mut t = PrimTable::new();
        let everywhere: Domain = |_| true;
        t.insert_chain("add", 2, 1, depth, true, everywhere, Arc::new(add_level));
        t.insert_chain("mul", 2, 1, depth, true, everywhere, Arc::new(mul_level));
        let unary: [(&str, Jet, Domain, bool); 6] = [
            ("neg", neg_jet, everywhere, true),
            ("sin", sin_jet, everywhere, true),
            ("cos", cos_jet, everywhere, true),
            ("exp", exp_jet, everywhere, true),
            ("recip", recip_jet, |x| x != 0.0, false),
            ("sqrtp", sqrtp_jet, |x| x > 0.0, false),
        ];
        for (name, jet, domain, total) in unary {
            let level = move |k: usize, v: &[f64]| unary_level(k, &jet(v[0]), v);
            t.insert_chain(name, 1, 1, depth, total, domain, Arc::new(level));
        }
        let preds: [(&str, fn(f64) -> bool); 4] = [
            ("gt0_T", |x| x > 0.0),
            ("gt0_F", |x| x < 0.0),
            ("lt0_T", |x| x < 0.0),
            ("lt0_F", |x| x > 0.0),
        ];
        for (name, holds) in preds {
            t.insert(Arc::new(Primitive::new(name, 1, 0, false, None, move |v| holds(v[0]).then(Vec::new))));
        }
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_types() {
        let t = PrimTable::standard(4);
        let m = t.get("mul_RR").unwrap();
        assert_eq!((m.dom, m.cod), (5, 3));
        assert!(t.get("sin_RRRR").unwrap().reverse.is_none());
        assert_eq!(t.get("sin_RRR").unwrap().reverse.as_ref().unwrap().name, "sin_RRRR");
    }

    #[test]
    fn domains_test_the_first_coordinate() {
        let t = PrimTable::standard(4);
        assert_eq!(t.get("sqrtp").unwrap().apply(&[-1.0]), None);
        assert_eq!(t.get("sqrtp_R").unwrap().apply(&[-1.0, 5.0]), None);
        assert_eq!(t.get("recip_RR").unwrap().apply(&[0.0, 1.0, 1.0]), None);
        assert_eq!(t.get("recip").unwrap().apply(&[2.0]), Some(vec![0.5]));
    }

    #[test]
    fn mul_reverse() {
        let t = PrimTable::standard(1);
        assert_eq!(t.get("mul_R").unwrap().apply(&[2.0, 3.0, 5.0]), Some(vec![15.0, 10.0]));
    }

    #[test]
    fn reverse_is_linear_in_direction() {
        let t = PrimTable::standard(4);
        for name in ["sin_R", "recip_RR", "mul_RRR", "exp_RRRR", "sqrtp_RRR"] {
            let p = t.get(name).unwrap();
            let k = p.dom - p.cod;
            let base: Vec<f64> = (0..p.cod).map(|i| 0.3 + 0.1 * i as f64).collect();
            let dir = |s: f64| -> Vec<f64> { (0..k).map(|j| s * (1.0 + j as f64)).collect() };
            let at = |d: Vec<f64>| p.apply(&[base.clone(), d].concat()).unwrap();
            let (a, b, ab) = (at(dir(1.0)), at(dir(2.5)), at(dir(3.5)));
            for i in 0..a.len() {
                assert!((a[i] + b[i] - ab[i]).abs() < 1e-9, "{name}");
            }
        }
    }
}
