//! Call counts of the two differentiation modes on a chain of lets.

use serde::Serialize;

use crate::interp::{denote, FunAssignment, InterpretationStructure};
use crate::symdiff::{rd_symbolic, RdMode};
use crate::syntax::{NameSupply, Term, Ty};
use crate::transforms::deviation;
use crate::typing::Context;

/// Point and direction used for every depth.
pub const AT: f64 = 0.7;
pub const DIRECTION: f64 = 1.3;

/// `let y1 = sin(x) in let y2 = sin(y1) in ... in yn`. No body after the
/// first mentions `x`.
pub fn let_chain(n: usize) -> Term {
    let name = |k: usize| if k == 0 { "x".to_string() } else { format!("y{k}") };
    (1..=n).rev().fold(Term::var(name(n)), |body, k| {
        Term::let_(name(k), Ty::Real, Term::op("sin", Term::var(name(k - 1))), body)
    })
}

/// `d/dx sinⁿ(x)` times the direction, by the chain rule.
pub fn chain_oracle(n: usize, x: f64, w: f64) -> f64 {
    let mut y = x;
    let mut d = w;
    for _ in 0..n {
        d *= y.cos();
        y = y.sin();
    }
    d
}

#[derive(Debug, Clone, Serialize)]
pub struct BlowupRow {
    pub depth: usize,
    pub standard_calls: u64,
    pub optimized_calls: u64,
    pub standard_nodes: u64,
    pub optimized_nodes: u64,
    pub standard_value: f64,
    pub optimized_value: f64,
    pub oracle_value: f64,
    pub passed: bool,
    pub error: Option<String>,
}

pub fn blowup_row(i: &InterpretationStructure, n: usize, tol: f64) -> BlowupRow {
    let m = let_chain(n);
    let (w, a) = (Term::Const(DIRECTION), Term::Const(AT));
    let run = |mode| -> Result<(u64, u64, f64), String> {
        let mut supply = NameSupply::avoiding([&m]);
        let (t, stats) = rd_symbolic(&i.sig, &Context::new(), &w, "x", &Ty::Real, &m, &a, mode, &mut supply)
            .map_err(|e| e.to_string())?;
        let f = denote(i, &FunAssignment::new(), &Context::new(), &t, 1).map_err(|e| e.to_string())?;
        let v = f.eval(&[]).map_err(|e| e.to_string())?.ok_or("derivative undefined")?;
        Ok((stats.recursive_call_count, stats.output_node_count, v[0]))
    };
    let oracle = chain_oracle(n, AT, DIRECTION);
    let mut row = BlowupRow {
        depth: n,
        standard_calls: 0,
        optimized_calls: 0,
        standard_nodes: 0,
        optimized_nodes: 0,
        standard_value: f64::NAN,
        optimized_value: f64::NAN,
        oracle_value: oracle,
        passed: false,
        error: None,
    };
    match (run(RdMode::Standard), run(RdMode::Optimized)) {
        (Ok(s), Ok(o)) => {
            (row.standard_calls, row.standard_nodes, row.standard_value) = s;
            (row.optimized_calls, row.optimized_nodes, row.optimized_value) = o;
            let agree = deviation(&[s.2], &[o.2]) <= tol && deviation(&[o.2], &[oracle]) <= tol;
            let separated = s.0 as f64 >= 2f64.powf(n as f64 / 2.0) && o.0 <= 10 * n as u64;
            row.passed = agree && separated;
        }
        (Err(e), _) | (_, Err(e)) => row.error = Some(e),
    }
    row
}

pub fn blowup(i: &InterpretationStructure, depths: &[usize], tol: f64) -> Vec<BlowupRow> {
    depths.iter().map(|&n| blowup_row(i, n, tol)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_shape() {
        assert_eq!(let_chain(2).to_string(), "let y1:real = sin(x) in let y2:real = sin(y1) in y2");
    }

    #[test]
    fn small_depths_separate() {
        let i = InterpretationStructure::standard();
        for n in [1, 4, 8] {
            let r = blowup_row(&i, n, 1e-9);
            assert!(r.passed, "{r:?}");
        }
        let r = blowup_row(&i, 8, 1e-9);
        assert!(r.standard_calls > 4 * r.optimized_calls, "{r:?}");
    }
}
