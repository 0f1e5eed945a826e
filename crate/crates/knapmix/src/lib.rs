//! Uniform sampling of 0-1 knapsack solutions via a lazy single-flip chain,
//! canonical paths between solutions with their congestion and
//! determination audits, exact spectral and mixing-time analysis on
//! enumerable instances, and exact plus sampler-driven approximate counting.
//!
//! The pieces fit together like this:
//!
//! * [`instance`] holds instances, feasibility, exhaustive enumeration, and
//!   the exact two-branch counter;
//! * [`chain`] runs the seeded lazy chain and replicate sampling;
//! * [`paths`] builds the deterministic flip path between any two feasible
//!   solutions and audits the whole path family (per-edge loads, endpoint
//!   determination, prefix-count bounds);
//! * [`analysis`] carries the exact transition kernel, its spectrum, exact
//!   total-variation evolution, and the cubic mixing bound;
//! * [`counting`] estimates the solution count from chain samples by
//!   telescoping level ratios;
//! * [`verify`] bundles every audit into one pass/fail report.
//!
//! All randomness is ChaCha8 addressed by `(seed, stream)`, so every result
//! in the crate is replayable bit for bit.

pub mod analysis;
pub mod chain;
pub mod counting;
pub mod error;
pub mod instance;
pub mod paths;
pub mod verify;

pub use error::{Error, Result};
pub use instance::{KnapsackInstance, Solution, SolutionSet};
