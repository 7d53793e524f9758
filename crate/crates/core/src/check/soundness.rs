//! Evaluation, denotation and the denotation of the symbolic trace must agree
//! on every corpus program.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::check::corpus::CorpusEntry;
use crate::interp::{denote, FunAssignment, InterpretationStructure};
use crate::opsem::{encode, eval, symbolic_eval, FunEnv, OpsemConfig, OpsemError};
use crate::rdrc::PMap;
use crate::syntax::Program;
use crate::transforms::{bind_point, bind_point_symbolic, deviation};
use crate::typing::Context;

#[derive(Debug, Clone, Copy)]
pub struct SoundnessConfig {
    pub points: usize,
    pub seed: u64,
    pub tol: f64,
    pub fuel: usize,
    pub budget: u64,
}

impl Default for SoundnessConfig {
    fn default() -> Self {
        SoundnessConfig { points: 20, seed: 0, tol: 1e-9, fuel: 1000, budget: 1_000_000 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ProgramReport {
    pub name: String,
    pub points: usize,
    /// Points where evaluation produced a value.
    pub evaluated: usize,
    /// Points where evaluation was stuck or hit an undefined primitive.
    pub undefined: usize,
    /// Points where evaluation ran out of budget; nothing is compared there.
    pub out_of_fuel: usize,
    /// Sampled points rejected as lying on a guard boundary.
    pub boundary_rejected: usize,
    pub max_deviation: f64,
    pub failures: Vec<String>,
}

impl ProgramReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

const NUDGE: f64 = 1e-7;

/// True when the definedness of `f` is the same at `x` and at every
/// coordinate nudge of it; points where it is not lie on a guard boundary.
fn interior(f: &PMap, x: &[f64]) -> bool {
    let here = matches!(f.eval(x), Ok(Some(_)));
    (0..x.len()).all(|k| {
        [NUDGE, -NUDGE].iter().all(|d| {
            let mut y = x.to_vec();
            y[k] += d;
            matches!(f.eval(&y), Ok(Some(_))) == here
        })
    })
}

pub fn check_program(
    i: &InterpretationStructure,
    entry: &CorpusEntry,
    cfg: &SoundnessConfig,
) -> ProgramReport {
    check_parsed(i, entry.name, &entry.program(&i.sig), (entry.lo, entry.hi), cfg)
}

/// The soundness check on a parsed program, with every input coordinate
/// drawn from `range`.
pub fn check_parsed(
    i: &InterpretationStructure,
    name: &str,
    prog: &Program,
    range: (f64, f64),
    cfg: &SoundnessConfig,
) -> ProgramReport {
    let mut rep = ProgramReport {
        name: name.to_string(),
        points: 0,
        evaluated: 0,
        undefined: 0,
        out_of_fuel: 0,
        boundary_rejected: 0,
        max_deviation: 0.0,
        failures: Vec::new(),
    };
    let gamma = &prog.params;
    let f = match denote(i, &FunAssignment::new(), gamma, &prog.body, cfg.fuel) {
        Ok(f) => f,
        Err(e) => {
            rep.failures.push(format!("no denotation: {e}"));
            return rep;
        }
    };
    let opsem = OpsemConfig { budget: cfg.budget, ..OpsemConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ hash_name(name));
    let dim = f.dom();
    let mut attempts = 0;
    while rep.points < cfg.points && attempts < 20 * cfg.points {
        attempts += 1;
        let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(range.0..=range.1)).collect();
        if !interior(&f, &x) {
            rep.boundary_rejected += 1;
            continue;
        }
        rep.points += 1;
        let mut fail = |msg: String| {
            if rep.failures.len() < 5 {
                rep.failures.push(format!("at {x:?}: {msg}"));
            }
        };
        let denoted = match f.eval(&x) {
            Ok(d) => d,
            Err(e) => {
                fail(format!("denotation failed: {e}"));
                continue;
            }
        };
        let rho = bind_point(i, gamma, &x).expect("point matches the parameters");
        let value = match eval(&rho, &FunEnv::new(), i, &prog.body, &opsem) {
            Ok(v) => encode(&v),
            Err(OpsemError::OutOfFuel) => {
                rep.out_of_fuel += 1;
                continue;
            }
            Err(OpsemError::UndefinedPrimitive { .. } | OpsemError::StuckPredicate(_)) => {
                rep.undefined += 1;
                if let Some(d) = denoted {
                    fail(format!("evaluation is undefined but the denotation is {d:?}"));
                }
                continue;
            }
            Err(e) => {
                fail(format!("evaluation failed: {e}"));
                continue;
            }
        };
        rep.evaluated += 1;
        let Some(d) = denoted else {
            fail(format!("evaluates to {value:?} but the denotation is undefined"));
            continue;
        };
        let dev = deviation(&value, &d);
        rep.max_deviation = rep.max_deviation.max(dev);
        if dev > cfg.tol {
            fail(format!("evaluates to {value:?}, denotes {d:?}"));
        }
        match trace_value(i, gamma, &prog.body, &x, &opsem, cfg.fuel) {
            Ok(t) => {
                let dev = deviation(&t, &d);
                rep.max_deviation = rep.max_deviation.max(dev);
                if dev > cfg.tol {
                    fail(format!("trace denotes {t:?}, program denotes {d:?}"));
                }
            }
            Err(e) => fail(e),
        }
    }
    if rep.points < cfg.points {
        rep.failures.push(format!("only {} interior points found", rep.points));
    }
    rep
}

/// `⟦c⟧(x)` for the trace `c` of the program at `x`.
fn trace_value(
    i: &InterpretationStructure,
    gamma: &Context,
    m: &crate::syntax::Term,
    x: &[f64],
    opsem: &OpsemConfig,
    fuel: usize,
) -> Result<Vec<f64>, String> {
    let rho = bind_point_symbolic(i, gamma, x).ok_or("cannot bind point")?;
    let (trace, _) = symbolic_eval(&rho, &FunEnv::new(), i, m, opsem).map_err(|e| format!("symbolic evaluation failed: {e}"))?;
    let c = denote(i, &FunAssignment::new(), gamma, &trace, fuel).map_err(|e| format!("trace has no denotation: {e}"))?;
    match c.eval(x) {
        Ok(Some(v)) => Ok(v),
        Ok(None) => Err(format!("trace {trace} is undefined at its own point")),
        Err(e) => Err(format!("trace denotation failed: {e}")),
    }
}

fn hash_name(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3))
}

pub fn check_corpus(
    i: &InterpretationStructure,
    corpus: &[CorpusEntry],
    cfg: &SoundnessConfig,
) -> Vec<ProgramReport> {
    corpus.iter().map(|e| check_program(i, e, cfg)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::check::corpus::{find, CORPUS};

    #[test]
    fn straight_line_program_is_sound() {
        let i = InterpretationStructure::standard();
        let r = check_program(&i, find("cubic").unwrap(), &SoundnessConfig::default());
        assert!(r.passed(), "{r:?}");
        assert_eq!(r.evaluated, 20);
    }

    #[test]
    fn partial_program_reports_undefined_points() {
        let i = InterpretationStructure::standard();
        let r = check_program(&i, find("sqrt_partial").unwrap(), &SoundnessConfig::default());
        assert!(r.passed(), "{r:?}");
        assert!(r.undefined > 0 && r.evaluated > 0);
    }

    #[test]
    fn whole_corpus() {
        let i = InterpretationStructure::standard();
        for r in check_corpus(&i, CORPUS, &SoundnessConfig::default()) {
            assert!(r.passed(), "{r:?}");
        }
    }
}
