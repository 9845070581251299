//! Side-constrained user equilibria on schedule-based, capacitated,
//! time-expanded transit networks.
//!
//! The crate is `no_std` and only needs `alloc`. All capacities, demands,
//! flows and costs are exact rationals; times are integer seconds.
//!
//! Layout:
//! - [`network`]: time-expanded graph, periodic unrolling, commodity extension.
//! - [`demand`]: commodities, elastic groups, path costs, fixed-departure transform.
//! - [`flow`]: path flows, deviations, availability, the three verifiers, metrics.
//! - [`solver_single`], [`solver_exact`], [`solver_heuristic`], [`sysopt`]: solvers.
//! - [`instances`]: the in-memory instance plus generators for the catalogue networks.
//! - [`lp`]: exact rational simplex used by the exact solver and the system optimum.
#![no_std]

extern crate alloc;

pub mod demand;
pub mod flow;
pub mod instances;
pub mod lp;
pub mod network;
pub mod rational;
mod route;
pub mod solver_exact;
pub mod solver_heuristic;
pub mod solver_single;
pub mod sysopt;

pub use demand::{Commodity, Window};
pub use flow::{Flow, Path, Strategy};
pub use instances::Instance;
pub use network::{EdgeIdx, ExtendedGraph, NodeIdx, TimeExpandedGraph};
pub use rational::{Rational, Time};
