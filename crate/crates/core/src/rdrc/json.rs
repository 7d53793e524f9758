use serde_json::{json, Value};

use super::{Kind, PMap};

/// A debugging view of the expression graph. Shared subgraphs are repeated;
/// nesting deeper than `max_depth` is elided.
pub fn pmap_to_json(f: &PMap, max_depth: usize) -> Value {
    let mut obj = json!({ "kind": f.kind_name(), "dom": f.dom(), "cod": f.cod() });
    match &f.0.kind {
        Kind::Prim(p) => obj["name"] = json!(p.name),
        Kind::ConstPoint(v) => obj["value"] = json!(v),
        Kind::Loop(d) => {
            obj["fuel"] = json!(d.fuel);
            obj["order"] = json!(d.order);
        }
        Kind::Fixpoint(d) => obj["level"] = json!(d.level),
        _ => {}
    }
    let kids = f.children();
    if !kids.is_empty() {
        obj["children"] = if max_depth == 0 {
            json!("...")
        } else {
            Value::Array(kids.iter().map(|k| pmap_to_json(k, max_depth - 1)).collect())
        };
    }
    obj
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rdrc::PrimTable;

    #[test]
    fn shows_kind_and_children() {
        let sin = PMap::prim(PrimTable::standard(1).get("sin").unwrap());
        let v = pmap_to_json(&PMap::reverse(&sin), 3);
        assert_eq!(v["kind"], "Reverse");
        assert_eq!(v["dom"], 2);
        assert_eq!(v["children"][0]["name"], "sin");
    }
}
