//! The restriction order and its relatives, decided on a finite sample of
//! points. A `true` answer only means no counterexample was found.

use super::PMap;

/// Componentwise `|a - b| <= tol * (1 + |b|)`.
pub fn approx_eq(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * (1.0 + y.abs()))
}

const TOL: f64 = 1e-9;

fn values(f: &PMap, x: &[f64]) -> Option<Option<Vec<f64>>> {
    f.eval(x).ok()
}

/// `f ≤ g`, i.e. `f̄ g = f`.
pub fn leq(f: &PMap, g: &PMap, points: &[Vec<f64>]) -> bool {
    points.iter().all(|x| match (values(f, x), values(g, x)) {
        (Some(None), Some(_)) => true,
        (Some(Some(a)), Some(Some(b))) => approx_eq(&a, &b, TOL),
        _ => false,
    })
}

/// `f̄ g = ḡ f`: equal wherever both are defined.
pub fn compatible(f: &PMap, g: &PMap, points: &[Vec<f64>]) -> bool {
    points.iter().all(|x| match (values(f, x), values(g, x)) {
        (Some(Some(a)), Some(Some(b))) => approx_eq(&a, &b, TOL),
        (Some(_), Some(_)) => true,
        _ => false,
    })
}

/// `f̄ g` is nowhere defined.
pub fn disjoint(f: &PMap, g: &PMap, points: &[Vec<f64>]) -> bool {
    points.iter().all(|x| match (values(f, x), values(g, x)) {
        (Some(a), Some(b)) => a.is_none() || b.is_none(),
        _ => false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rdrc::PrimTable;

    fn p(name: &str) -> PMap {
        PMap::prim(PrimTable::standard(1).get(name).unwrap())
    }

    fn grid() -> Vec<Vec<f64>> {
        (-20..=20).map(|i| vec![i as f64 * 0.25]).collect()
    }

    #[test]
    fn restricting_shrinks() {
        let f = p("sin");
        let g = PMap::compose(&PMap::restrict(&p("sqrtp")), &f).unwrap();
        assert!(leq(&g, &f, &grid()));
        assert!(!leq(&f, &g, &grid()));
    }

    #[test]
    fn predicate_halves_are_disjoint() {
        assert!(disjoint(&p("gt0_T"), &p("gt0_F"), &grid()));
        assert!(!disjoint(&p("gt0_T"), &p("lt0_F"), &grid()));
    }

    #[test]
    fn compatible_with_itself() {
        let f = p("recip");
        assert!(compatible(&f, &f, &grid()));
        assert!(!compatible(&f, &p("sin"), &grid()));
    }
}
