//! Exact solver for probabilistic max/min polynomial equation systems
//! (max/minPPS) — the Bellman optimality equations of branching Markov
//! decision processes.
//!
//! The library computes, to any requested additive precision 2^-j, the least
//! fixed point q* in [0,1]^n of a system x = P(x) whose right-hand sides are
//! probabilistic polynomials, optionally wrapped in max or min operators.  It
//! also extracts ε-optimal pure policies and verifies guessed policy pairs
//! for max-min systems (branching simple stochastic games).
//!
//! All arithmetic on the solve path is exact rational arithmetic; the only
//! loss is the explicit rounding step of the iteration, whose error the
//! iteration-count bound accounts for.
//!
//! Pipeline for a solve:
//!
//! 1. [`parse::parse_system`] / [`bmdp::bmdp_to_system`] build an
//!    [`system::EquationSystem`];
//! 2. [`snf::to_snf`] normalizes it to simple normal form (equations of kind
//!    L, Q, M);
//! 3. [`qualitative::reduce`] eliminates variables with q*_i ∈ {0, 1}
//!    exactly;
//! 4. [`gnm::solve`] runs the rounded generalized Newton iteration, each step
//!    an exact LP solve ([`lp`]) over the linearization, or an exact Newton
//!    step on pure PPS;
//! 5. [`policy`] / [`bssg`] build policy certificates on top.

pub mod bmdp;
pub mod bssg;
pub mod error;
pub mod gnm;
pub mod linalg;
pub mod lp;
pub mod parse;
pub mod policy;
pub mod qualitative;
pub mod rational;
pub mod snf;
pub mod system;

pub use error::Error;
pub use rational::Rational;
pub use system::{ChoiceOp, Equation, EquationSystem, Flavor, Policy};
