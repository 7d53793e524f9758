//! Property suites shared by the test harness and the command line:
//! generators, a finite-difference oracle, the axiom checks, the program
//! corpus and its soundness checks.

pub mod axioms;
pub mod blowup;
pub mod corpus;
pub mod equivalence;
pub mod gen;
pub mod kleene;
pub mod oracle;
pub mod soundness;
pub mod symbolic;
