//! Central finite differences, used as an independent check on `R` and `D`.

use crate::rdrc::PMap;

/// Step used by the checks.
pub const FD_STEP: f64 = 1e-5;

/// The step-`h` estimate is trusted when the step-`2h` estimate agrees with
/// it to this relative tolerance; otherwise the oracle abstains.
const STABILITY: f64 = 1e-5;

fn shifted(x: &[f64], v: &[f64], t: f64) -> Vec<f64> {
    x.iter().zip(v).map(|(a, b)| a + t * b).collect()
}

fn central(f: &PMap, x: &[f64], v: &[f64], h: f64) -> Option<Vec<f64>> {
    let hi = f.eval(&shifted(x, v, h)).ok()??;
    let lo = f.eval(&shifted(x, v, -h)).ok()??;
    Some(hi.iter().zip(&lo).map(|(a, b)| (a - b) / (2.0 * h)).collect())
}

fn stable(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(p, q)| p.is_finite() && (p - q).abs() <= STABILITY * (1.0 + q.abs()))
}

/// `J(x) v` by central differences with step `h`, or `None` when a probe is
/// undefined or the estimate moves when the step is doubled (a
/// discontinuity or a badly conditioned point nearby).
pub fn jvp(f: &PMap, x: &[f64], v: &[f64], h: f64) -> Option<Vec<f64>> {
    let fine = central(f, x, v, h)?;
    let coarse = central(f, x, v, 2.0 * h)?;
    stable(&fine, &coarse).then_some(fine)
}

/// `J(x)ᵀ w`, one directional difference per input coordinate.
pub fn vjp(f: &PMap, x: &[f64], w: &[f64], h: f64) -> Option<Vec<f64>> {
    let n = x.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        let col = jvp(f, x, &e, h)?;
        out.push(col.iter().zip(w).map(|(a, b)| a * b).sum());
    }
    Some(out)
}

/// `|a - b| <= tol (1 + |b|)` componentwise.
pub fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    crate::rdrc::approx_eq(a, b, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rdrc::PrimTable;

    #[test]
    fn sin_derivative() {
        let t = PrimTable::standard(1);
        let f = PMap::prim(t.get("sin").unwrap());
        let d = jvp(&f, &[0.3], &[2.0], FD_STEP).unwrap();
        assert!((d[0] - 2.0 * 0.3f64.cos()).abs() < 1e-8);
    }

    #[test]
    fn mul_gradient() {
        let t = PrimTable::standard(1);
        let f = PMap::prim(t.get("mul").unwrap());
        let g = vjp(&f, &[2.0, 5.0], &[1.0], FD_STEP).unwrap();
        assert!(close(&g, &[5.0, 2.0], 1e-8));
    }

    #[test]
    fn abstains_at_domain_edge() {
        let t = PrimTable::standard(1);
        let f = PMap::prim(t.get("sqrtp").unwrap());
        assert!(jvp(&f, &[1e-6], &[1.0], FD_STEP).is_none());
    }
}
