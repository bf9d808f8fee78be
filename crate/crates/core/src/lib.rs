//! Analysis toolkit for nonatomic routing games played under behavioral biases.
//!
//! Agents route infinitesimal mass through a directed network and best-respond
//! to *perceived* edge costs (risk margins, tax sensitivity, variance penalties,
//! soft capacities) while welfare is measured on the true costs. The crate
//! computes biased Wardrop equilibria and social optima, certifies
//! biased-smoothness parameters numerically, evaluates the closed-form
//! certificates for standard cost classes, and generates the worst-case
//! networks that make the bounds tight.
//!
//! The crate is `no_std` (with `alloc`); all IO and file formats live in the
//! companion `cgbias` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod costfun;
pub mod exhibits;
pub mod flowsolve;
pub mod netgraph;
pub mod smoothbounds;

mod rng;

pub use rng::SplitRng;
