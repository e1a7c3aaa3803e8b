//! Branching processes with pairwise interactions (BPI processes).
//!
//! A BPI process is a continuous-time Markov chain on the nonnegative
//! integers in which individuals branch and die at linear rates and, in
//! addition, every ordered pair of individuals competes (a death at rate
//! `c`) or cooperates (a litter of births at rate `b_i`). The long-term
//! behaviour of the chain — explosion, extinction, absorption, stationarity,
//! coming down from infinity — is governed by a family of integral tests
//! built from the branching mechanism `Ψ` and the interaction mechanism `Φ`.
//!
//! This crate provides:
//!
//! * [`mechanisms`] — parameter sets, offspring laws (finite support plus
//!   optional power-law tails) and numerically stable evaluation of `Ψ`, `Φ`
//!   and the ratio `Ψ/(uΦ)`;
//! * [`functionals`] — the six boundary functionals `Q, J, S, R, E, I`, the
//!   time-change map `Υ`, and certified limits at the singular endpoints
//!   `0` and `1` returning finite values or divergence verdicts;
//! * [`classifier`] — the integral-test decision tree producing a complete
//!   [`classifier::BehaviorReport`];
//! * [`ctmc`] — exact Gillespie simulation of the chain `Z` and the
//!   immigration-type chain `X`, the Lamperti time change between them,
//!   closed-form generating functions and truncated-generator oracles;
//! * [`dual`] — the dual diffusion on `[0,1]` (a generalised Wright–Fisher
//!   diffusion), exit statistics and moment-duality checks;
//! * [`extinction`] — extinction-time Laplace transforms and means via a
//!   Riccati boundary-value problem;
//! * [`harness`] — a reproducible (optionally data-parallel) Monte Carlo
//!   engine and the experiment drivers behind the `bpi` CLI.
//!
//! With the default `parallel` feature the Monte Carlo engine fans
//! trajectories out over a rayon pool; results are bitwise independent of
//! the worker count because every path derives its own counter-based
//! random stream and reductions run in path order.

pub mod classifier;
pub mod ctmc;
pub mod dual;
mod error;
pub mod extinction;
pub mod functionals;
pub mod harness;
pub mod mechanisms;
pub mod quad;
pub mod rng;
pub mod series;
pub mod special;

pub use error::BpiError;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, BpiError>;
