//! Derived forms: typed zero and sum, the dagger and forward derivative.

use super::{NameSupply, Term, Ty};

/// `0_T`: `0` at `real`, `*` at `1`, pairs of zeros at products.
pub fn zero_term(ty: &Ty) -> Term {
    match ty {
        Ty::Real => Term::Const(0.0),
        Ty::Unit => Term::Star,
        Ty::Prod(a, b) => Term::pair(zero_term(a), zero_term(b)),
    }
}

/// `m +_T n`. At `real` this is `+`; at `1` both summands are still
/// evaluated; at products the summands are split with `fst`/`snd`.
pub fn sum_term(ty: &Ty, m: Term, n: Term, supply: &mut NameSupply) -> Term {
    match ty {
        Ty::Real => Term::add(m, n),
        Ty::Unit => {
            let (u1, u2) = (supply.fresh("u"), supply.fresh("u"));
            Term::let_(u1, Ty::Unit, m, Term::let_(u2, Ty::Unit, n, Term::Star))
        }
        Ty::Prod(a, b) => {
            let (p, q) = (supply.fresh("p"), supply.fresh("q"));
            let first = sum_term(a, Term::fst(Term::var(p.clone())), Term::fst(Term::var(q.clone())), supply);
            let second = sum_term(b, Term::snd(Term::var(p.clone())), Term::snd(Term::var(q.clone())), supply);
            Term::let_(p, ty.clone(), m, Term::let_(q, ty.clone(), n, Term::pair(first, second)))
        }
    }
}

/// `m^{†}` for `Γ, x:A ⊢ m : B`: the term `y.rd(x:A. m)(0_A)` in `Γ, y:B`.
pub fn dagger(x: &str, x_ty: &Ty, m: &Term, y: &str) -> Term {
    Term::rd(Term::var(y), x, x_ty.clone(), m.clone(), zero_term(x_ty))
}

/// `fd(x:A. m)(a).v`, where `Γ, x:A ⊢ m : B`, expanded to
/// `let z:A = v in z.rd(y:B. y.rd(x:A. m)(a))(0_B)`.
pub fn forward_derivative(
    x: &str,
    x_ty: &Ty,
    m: &Term,
    m_ty: &Ty,
    a: &Term,
    v: &Term,
    supply: &mut NameSupply,
) -> Term {
    let y = supply.fresh("y");
    let z = supply.fresh("z");
    let inner = Term::rd(Term::var(y.clone()), x, x_ty.clone(), m.clone(), a.clone());
    Term::let_(z.clone(), x_ty.clone(), v.clone(), dagger(&y, m_ty, &inner, &z))
}
