//! A small differentiable programming language with `while` loops and
//! `letrec`, together with a model of partial smooth maps in which its
//! reverse derivatives are interpreted.

pub mod syntax;
pub mod check;
pub mod interp;
pub mod opsem;
pub mod rdrc;
pub mod symdiff;
pub mod transforms;
pub mod typing;
