//! The structural reverse derivative and the maps derived from it.

use super::{Kind, PMap, RdrcError};

/// `R[f] : A × B -> A` for `f : A -> B`.
pub fn reverse_derivative(f: &PMap) -> PMap {
    PMap::reverse(f)
}

/// `D[f] = ⟨⟨π₀, 0⟩, π₁⟩ R[R[f]] π₁ : A × A -> B`.
pub fn forward_derivative(f: &PMap) -> Result<PMap, RdrcError> {
    let (a, b) = (f.dom(), f.cod());
    let zero_dir = PMap::pair(&PMap::proj0(a, a), &PMap::zero(2 * a, b))?;
    let entry = PMap::pair(&zero_dir, &PMap::proj1(a, a))?;
    PMap::seq(&[&entry, &PMap::reverse(&PMap::reverse(f)), &PMap::proj1(a, b)])
}

/// `f^{†[A]} = (ι₀ × 1) R[f] π₁ : A × C -> B` for `f : A × B -> C`.
pub fn dagger_ctx(f: &PMap, a: usize) -> Result<PMap, RdrcError> {
    if a > f.dom() {
        return Err(RdrcError::DimensionMismatch { op: "dagger split", expected: f.dom(), found: a });
    }
    let (b, c) = (f.dom() - a, f.cod());
    let entry = PMap::product(&PMap::inj0(a, b), &PMap::identity(c))?;
    PMap::seq(&[&entry, &PMap::reverse(f), &PMap::proj1(a, b)])
}

/// Coordinates `start .. start + len` of `R^n`.
pub(super) fn slice(n: usize, start: usize, len: usize) -> PMap {
    PMap::compose(&PMap::proj1(start, n - start), &PMap::proj0(len, n - start - len)).unwrap()
}

/// `ex : (A × B) × (C × D) -> (A × C) × (B × D)`.
pub fn exchange(a: usize, b: usize, c: usize, d: usize) -> PMap {
    let n = a + b + c + d;
    let ac = PMap::pair(&slice(n, 0, a), &slice(n, a + b, c)).unwrap();
    let bd = PMap::pair(&slice(n, a, b), &slice(n, a + b + c, d)).unwrap();
    PMap::pair(&ac, &bd).unwrap()
}

/// `Lᵀ` for a linear map `L`, so that `R[L] = π₁ Lᵀ`.
fn transpose(l: &PMap) -> Result<Option<PMap>, RdrcError> {
    if !l.is_linear() {
        return Ok(None);
    }
    let (a, b) = (l.dom(), l.cod());
    let t = |m: &PMap| transpose(m).map(|t| t.expect("parts of a linear map are linear"));
    Ok(Some(match &l.0.kind {
        Kind::Identity => l.clone(),
        Kind::Proj0 { left } => PMap::inj0(*left, a - left),
        Kind::Proj1 { left } => PMap::inj1(*left, a - left),
        Kind::Inj0 { right } => PMap::proj0(a, *right),
        Kind::Inj1 { left } => PMap::proj1(*left, b - left),
        Kind::Zero => PMap::zero(b, a),
        Kind::Compose(f, g) => PMap::compose(&t(g)?, &t(f)?)?,
        Kind::Pair(f, g) => PMap::add(
            &PMap::compose(&PMap::proj0(f.cod(), g.cod()), &t(f)?)?,
            &PMap::compose(&PMap::proj1(f.cod(), g.cod()), &t(g)?)?,
        )?,
        Kind::Add(fs) => PMap::sum(fs.iter().map(t).collect::<Result<_, _>>()?, b, a)?,
        _ => unreachable!("non-linear node flagged linear"),
    }))
}

/// One structural rewrite of `R[f]`; subterms stay lazy.
pub(super) fn reverse_step(f: &PMap) -> Result<PMap, RdrcError> {
    let (a, b) = (f.dom(), f.cod());
    Ok(match &f.0.kind {
        Kind::Identity => PMap::proj1(a, a),
        _ if f.is_linear() => PMap::compose(&PMap::proj1(a, b), &transpose(f)?.unwrap())?,
        Kind::Compose(g, h) if g.is_linear() => {
            // R[L h] = (L × 1) R[h] Lᵀ
            let lt = transpose(g)?.unwrap();
            PMap::seq(&[&PMap::product(g, &PMap::identity(b))?, &PMap::reverse(h), &lt])?
        }
        Kind::Compose(g, h) if h.is_linear() => {
            // R[g L] = (1 × Lᵀ) R[g]
            let lt = transpose(h)?.unwrap();
            PMap::compose(&PMap::product(&PMap::identity(a), &lt)?, &PMap::reverse(g))?
        }
        Kind::Compose(g, h) => {
            let p0 = PMap::proj0(a, b);
            let inner = PMap::pair(&PMap::compose(&p0, g)?, &PMap::proj1(a, b))?;
            let outer = PMap::pair(&p0, &PMap::compose(&inner, &PMap::reverse(h))?)?;
            PMap::compose(&outer, &PMap::reverse(g))?
        }
        Kind::Pair(g, h) => {
            let (b1, b2) = (g.cod(), h.cod());
            let id = PMap::identity(a);
            let left = PMap::compose(&PMap::product(&id, &PMap::proj0(b1, b2))?, &PMap::reverse(g))?;
            let right = PMap::compose(&PMap::product(&id, &PMap::proj1(b1, b2))?, &PMap::reverse(h))?;
            PMap::add(&left, &right)?
        }
        Kind::Proj0 { left } => {
            PMap::compose(&PMap::proj1(a, b), &PMap::inj0(*left, a - left))?
        }
        Kind::Proj1 { left } => PMap::compose(&PMap::proj1(a, b), &PMap::inj1(*left, a - left))?,
        Kind::Inj0 { right } => PMap::compose(&PMap::proj1(a, b), &PMap::proj0(a, *right))?,
        Kind::Inj1 { left } => PMap::compose(&PMap::proj1(a, b), &PMap::proj1(*left, a))?,
        Kind::Zero | Kind::ConstPoint(_) | Kind::Bang => PMap::zero(a + b, a),
        Kind::Add(fs) => PMap::sum(fs.iter().map(PMap::reverse).collect(), a + b, a)?,
        Kind::Restrict(g) => PMap::compose(
            &PMap::product(&PMap::restrict(g), &PMap::identity(a))?,
            &PMap::proj1(a, a),
        )?,
        Kind::Join(fs) => PMap::join(fs.iter().map(PMap::reverse).collect(), a + b, a)?,
        Kind::Empty => PMap::empty(a + b, a),
        Kind::Prim(p) => match &p.reverse {
            Some(r) => PMap::prim(r),
            None if p.cod == 0 => PMap::compose(&PMap::restrict(f), &PMap::zero(a, a))?,
            None => return Err(RdrcError::MissingReversePrimitive(p.name.clone())),
        },
        Kind::Reverse(..) | Kind::Fixpoint(_) => reverse_step(&f.unfold()?)?,
        Kind::Loop(data) => PMap::loop_node(data.derived()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rdrc::PrimTable;

    fn p(name: &str) -> PMap {
        PMap::prim(PrimTable::standard(4).get(name).unwrap())
    }

    fn at(f: &PMap, x: &[f64]) -> Option<Vec<f64>> {
        f.eval(x).unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * (1.0 + y.abs()))
    }

    fn sin_sq() -> PMap {
        let sq = PMap::compose(&PMap::pair(&PMap::identity(1), &PMap::identity(1)).unwrap(), &p("mul")).unwrap();
        PMap::compose(&sq, &p("sin")).unwrap()
    }

    #[test]
    fn reverse_of_first_projection() {
        let r = reverse_derivative(&PMap::proj0(1, 1));
        assert_eq!(at(&r, &[3.0, 4.0, 7.0]), Some(vec![7.0, 0.0]));
    }

    #[test]
    fn reverse_of_mul() {
        let r = reverse_derivative(&p("mul"));
        let (x, y, w) = (1.5, -2.0, 0.7);
        let h = 1e-5;
        let fd = |dx: f64, dy: f64| ((x + dx) * (y + dy) - (x - dx) * (y - dy)) / (2.0 * h);
        let expect = [fd(h, 0.0) * w, fd(0.0, h) * w];
        assert!(close(&at(&r, &[x, y, w]).unwrap(), &expect, 1e-6));
    }

    #[test]
    fn reverse_of_composite() {
        let r = reverse_derivative(&sin_sq());
        let h = 1e-5;
        let fd = (((1.0f64 + h).powi(2)).sin() - ((1.0f64 - h).powi(2)).sin()) / (2.0 * h);
        let got = at(&r, &[1.0, 1.0]).unwrap();
        assert!(close(&got, &[fd], 1e-6));
        assert!((got[0] - 2.0 * 1.0f64.cos()).abs() < 1e-12);
    }

    #[test]
    fn forward_derivatives() {
        let d = forward_derivative(&PMap::identity(1)).unwrap();
        assert_eq!(at(&d, &[3.0, 5.0]), Some(vec![5.0]));
        let d = forward_derivative(&p("mul")).unwrap();
        let (x, y, dx, dy) = (2.0, 3.0, 0.5, -1.0);
        assert!(close(&at(&d, &[x, y, dx, dy]).unwrap(), &[y * dx + x * dy], 1e-12));
        let d = forward_derivative(&PMap::restrict(&p("sqrtp"))).unwrap();
        assert_eq!(at(&d, &[4.0, 2.5]), Some(vec![2.5]));
        assert_eq!(at(&d, &[-4.0, 2.5]), None);
    }

    #[test]
    fn partiality_of_reverse_follows_the_map() {
        let r = reverse_derivative(&PMap::compose(&p("sqrtp"), &p("sin")).unwrap());
        assert_eq!(at(&r, &[-1.0, 0.0]), None);
        assert!(at(&r, &[1.0, 0.0]).is_some());
    }

    #[test]
    fn daggers() {
        let snd = PMap::proj1(1, 1);
        let d = dagger_ctx(&snd, 1).unwrap();
        assert_eq!(at(&d, &[3.0, 5.0]), Some(vec![5.0]));
        let d = dagger_ctx(&p("mul"), 1).unwrap();
        assert!(close(&at(&d, &[3.0, 5.0]).unwrap(), &[15.0], 1e-12));
        assert!(dagger_ctx(&p("sin"), 2).is_err());
    }

    #[test]
    fn dagger_of_forward_derivative_is_reverse() {
        let f = sin_sq();
        let round = dagger_ctx(&forward_derivative(&f).unwrap(), 1).unwrap();
        let r = reverse_derivative(&f);
        for (x, w) in [(0.3, 1.0), (-1.2, 0.5), (2.0, -3.0)] {
            assert!(close(&at(&round, &[x, w]).unwrap(), &at(&r, &[x, w]).unwrap(), 1e-9));
        }
    }

    #[test]
    fn exchange_swaps_the_middle() {
        let ex = exchange(1, 2, 1, 1);
        assert_eq!(at(&ex, &[1.0, 2.0, 3.0, 4.0, 5.0]), Some(vec![1.0, 4.0, 2.0, 3.0, 5.0]));
    }

    #[test]
    fn depth_limit_is_reported() {
        let mut f = p("sin");
        for _ in 0..5 {
            f = reverse_derivative(&f);
        }
        assert!(matches!(f.eval(&vec![0.0; f.dom()]), Err(RdrcError::MissingReversePrimitive(_))));
    }
}
