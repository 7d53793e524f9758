//! The fixed program corpus shipped with the crate.

use crate::syntax::{parse_program, Program, Signature};

/// A named source together with the box its inputs are drawn from.
#[derive(Debug, Clone, Copy)]
pub struct CorpusEntry {
    pub name: &'static str,
    pub source: &'static str,
    pub lo: f64,
    pub hi: f64,
}

impl CorpusEntry {
    pub fn program(&self, sig: &Signature) -> Program {
        parse_program(self.source, sig).unwrap_or_else(|e| panic!("corpus program {} does not parse: {e}", self.name))
    }
}

const fn entry(name: &'static str, source: &'static str, lo: f64, hi: f64) -> CorpusEntry {
    CorpusEntry { name, source, lo, hi }
}

pub const CORPUS: &[CorpusEntry] = &[
    entry("abs", include_str!("../../programs/abs.sdpl"), -3.0, 3.0),
    entry("countdown", include_str!("../../programs/countdown.sdpl"), -2.0, 12.0),
    entry("counter_pair", include_str!("../../programs/counter_pair.sdpl"), -3.0, 3.0),
    entry("cubic", include_str!("../../programs/cubic.sdpl"), -3.0, 3.0),
    entry("doubling", include_str!("../../programs/doubling.sdpl"), -3.0, 1.5),
    entry("exp_chain", include_str!("../../programs/exp_chain.sdpl"), -3.0, 3.0),
    entry("factorial", include_str!("../../programs/factorial.sdpl"), -1.0, 10.0),
    entry("fd_loop", include_str!("../../programs/fd_loop.sdpl"), -2.0, 3.0),
    entry("letrec_loop", include_str!("../../programs/letrec_loop.sdpl"), -3.0, 1.5),
    entry("nested_if", include_str!("../../programs/nested_if.sdpl"), -3.0, 3.0),
    entry("nested_letrec", include_str!("../../programs/nested_letrec.sdpl"), -2.0, 8.0),
    entry("nested_while", include_str!("../../programs/nested_while.sdpl"), -3.0, 3.0),
    entry("pair_ops", include_str!("../../programs/pair_ops.sdpl"), -3.0, 3.0),
    entry("piecewise", include_str!("../../programs/piecewise.sdpl"), -3.0, 3.0),
    entry("power", include_str!("../../programs/power.sdpl"), -2.0, 2.0),
    entry("rd_if", include_str!("../../programs/rd_if.sdpl"), -3.0, 3.0),
    entry("rd_letrec", include_str!("../../programs/rd_letrec.sdpl"), -3.0, 6.0),
    entry("rd_nested", include_str!("../../programs/rd_nested.sdpl"), -3.0, 3.0),
    entry("rd_pair", include_str!("../../programs/rd_pair.sdpl"), -3.0, 3.0),
    entry("rd_square", include_str!("../../programs/rd_square.sdpl"), -3.0, 3.0),
    entry("rd_while", include_str!("../../programs/rd_while.sdpl"), -3.0, 1.5),
    entry("sqrt_partial", include_str!("../../programs/sqrt_partial.sdpl"), -2.0, 4.0),
    entry("square", include_str!("../../programs/square.sdpl"), -3.0, 3.0),
    entry("trig_mix", include_str!("../../programs/trig_mix.sdpl"), -3.0, 3.0),
];

pub fn find(name: &str) -> Option<&'static CorpusEntry> {
    CORPUS.iter().find(|e| e.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::Signature;
    use crate::typing::{typecheck, FunContext};

    #[test]
    fn every_program_parses_and_typechecks() {
        let sig = Signature::standard();
        for e in CORPUS {
            let p = e.program(&sig);
            typecheck(&sig, &FunContext::new(), &p.params, &p.body).unwrap_or_else(|err| panic!("{}: {err}", e.name));
        }
    }
}
