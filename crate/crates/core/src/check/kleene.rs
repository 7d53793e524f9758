//! Least fixed points by Kleene iteration: factorial against its closed form,
//! and monotonicity in the fuel bound.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::check::corpus::{find, CorpusEntry};
use crate::interp::{denote, FunAssignment, InterpretationStructure};
use crate::opsem::{encode, eval, FunEnv, OpsemConfig};
use crate::transforms::bind_point;

#[derive(Debug, Clone, Serialize)]
pub struct FactorialRow {
    pub n: u32,
    pub fuel: usize,
    pub expected: f64,
    pub denoted: Option<f64>,
    pub evaluated: Option<f64>,
    pub passed: bool,
}

pub fn factorial_oracle(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// `fact(n)` for `n` in `0..=max`, by denotation at the given fuel and by
/// evaluation.
pub fn check_factorial(i: &InterpretationStructure, max: u32, fuel: usize) -> Vec<FactorialRow> {
    let prog = find("factorial").expect("factorial is in the corpus").program(&i.sig);
    let f = denote(i, &FunAssignment::new(), &prog.params, &prog.body, fuel).expect("factorial denotes");
    (0..=max)
        .map(|n| {
            let x = [f64::from(n)];
            let denoted = f.eval(&x).ok().flatten().map(|v| v[0]);
            let rho = bind_point(i, &prog.params, &x).expect("one real parameter");
            let evaluated = eval(&rho, &FunEnv::new(), i, &prog.body, &OpsemConfig::default()).ok().map(|v| encode(&v)[0]);
            let expected = factorial_oracle(n);
            FactorialRow { n, fuel, expected, denoted, evaluated, passed: denoted == Some(expected) && evaluated == Some(expected) }
        })
        .collect()
}

/// Programs whose denotation depends on the fuel bound.
pub const ITERATIVE: [&str; 10] = [
    "countdown",
    "doubling",
    "counter_pair",
    "nested_while",
    "factorial",
    "power",
    "nested_letrec",
    "letrec_loop",
    "rd_letrec",
    "rd_while",
];

#[derive(Debug, Clone, Default, Serialize)]
pub struct MonotoneReport {
    pub triples: usize,
    /// Triples defined at fuel `k`, each of which must stay defined and
    /// equal at `k + 1`.
    pub defined: usize,
    /// Triples undefined at `k` but defined at `k + 1`.
    pub grew: usize,
    pub failures: Vec<String>,
}

impl MonotoneReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.triples > 0
    }
}

/// Samples `(program, input, fuel)` and checks that definedness at fuel `k`
/// implies the same value at fuel `k + 1`.
pub fn check_fuel_monotone(i: &InterpretationStructure, triples: usize, seed: u64) -> MonotoneReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let entries: Vec<&CorpusEntry> = ITERATIVE.iter().map(|n| find(n).expect("in the corpus")).collect();
    let mut rep = MonotoneReport::default();
    for _ in 0..triples {
        let e = *entries.choose(&mut rng).unwrap();
        let prog = e.program(&i.sig);
        let dim = i.context_dim(&prog.params);
        let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(e.lo..=e.hi)).collect();
        let k = rng.gen_range(0..16);
        rep.triples += 1;
        let at = |fuel| -> Result<Option<Vec<f64>>, String> {
            let f = denote(i, &FunAssignment::new(), &prog.params, &prog.body, fuel).map_err(|e| e.to_string())?;
            f.eval(&x).map_err(|e| e.to_string())
        };
        match (at(k), at(k + 1)) {
            (Ok(Some(a)), Ok(Some(b))) => {
                rep.defined += 1;
                if a != b {
                    rep.failures.push(format!("{} at {x:?}: fuel {k} gives {a:?}, fuel {} gives {b:?}", e.name, k + 1));
                }
            }
            (Ok(Some(a)), Ok(None)) => {
                rep.failures.push(format!("{} at {x:?}: defined as {a:?} at fuel {k} but not at {}", e.name, k + 1))
            }
            (Ok(None), Ok(Some(_))) => rep.grew += 1,
            (Ok(None), Ok(None)) => {}
            (Err(err), _) | (_, Err(err)) => rep.failures.push(format!("{}: {err}", e.name)),
        }
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factorial_matches_closed_form() {
        let i = InterpretationStructure::standard();
        for r in check_factorial(&i, 10, 12) {
            assert!(r.passed, "{r:?}");
        }
    }

    #[test]
    fn too_little_fuel_leaves_factorial_undefined() {
        let i = InterpretationStructure::standard();
        let rows = check_factorial(&i, 10, 5);
        assert_eq!(rows[3].denoted, Some(6.0));
        assert_eq!(rows[8].denoted, None);
    }

    #[test]
    fn fuel_is_monotone() {
        let r = check_fuel_monotone(&InterpretationStructure::standard(), 50, 0);
        assert!(r.passed(), "{r:?}");
        assert!(r.defined > 0 && r.grew > 0, "{r:?}");
    }
}
