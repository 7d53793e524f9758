use serde_json::{json, Value};

use super::{BoolTerm, Term};

/// AST dump. Every node has `"kind"` and `"children"`; binders add `"var"`
/// and `"ty"`, constants `"value"`, named formers `"name"`.
pub fn term_to_json(t: &Term) -> Value {
    let kids = |ts: &[&Term]| Value::Array(ts.iter().map(|t| term_to_json(t)).collect());
    match t {
        Term::Var(x) => json!({"kind": "Var", "var": x, "children": []}),
        Term::Const(r) => json!({"kind": "Const", "value": r, "children": []}),
        Term::Star => json!({"kind": "Star", "children": []}),
        Term::Add(a, b) => json!({"kind": "Add", "children": kids(&[a, b])}),
        Term::Op(name, a) => json!({"kind": "Op", "name": name, "children": kids(&[a])}),
        Term::Pair(a, b) => json!({"kind": "Pair", "children": kids(&[a, b])}),
        Term::Fst(a) => json!({"kind": "Fst", "children": kids(&[a])}),
        Term::Snd(a) => json!({"kind": "Snd", "children": kids(&[a])}),
        Term::Let(x, ty, m, n) => {
            json!({"kind": "Let", "var": x, "ty": ty.to_string(), "children": kids(&[m, n])})
        }
        Term::If(b, m, n) => json!({
            "kind": "If",
            "children": [bool_to_json(b), term_to_json(m), term_to_json(n)]
        }),
        Term::While(b, m) => json!({
            "kind": "While",
            "children": [bool_to_json(b), term_to_json(m)]
        }),
        Term::Rd { dir, var, var_ty, body, point } => json!({
            "kind": "Rd",
            "var": var,
            "ty": var_ty.to_string(),
            "children": kids(&[dir, body, point])
        }),
        Term::FunCall(name, a) => json!({"kind": "FunCall", "name": name, "children": kids(&[a])}),
        Term::LetRec { name, param, param_ty, ret_ty, body, cont } => json!({
            "kind": "LetRec",
            "name": name,
            "var": param,
            "ty": param_ty.to_string(),
            "ret_ty": ret_ty.to_string(),
            "children": kids(&[body, cont])
        }),
    }
}

fn bool_to_json(b: &BoolTerm) -> Value {
    match b {
        BoolTerm::True => json!({"kind": "True", "children": []}),
        BoolTerm::False => json!({"kind": "False", "children": []}),
        BoolTerm::Pred(p, m) => json!({"kind": "Pred", "name": p, "children": [term_to_json(m)]}),
    }
}
