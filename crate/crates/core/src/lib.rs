//! Stochastic alignments between a trace and a stochastic labeled Petri net.
//!
//! Given a trace and a net whose transitions carry weights, the engine finds
//! the model path minimising a loss that trades edit distance against path
//! probability, using A* over the synchronous product with two MILP bounds
//! (remaining edit distance from below, remaining probability from above).

pub mod alignment;
pub mod bench;
pub mod cli;
pub mod format;
pub mod heuristics;
pub mod loss;
pub mod milp;
pub mod multiset;
pub mod net;
pub mod oracle;
pub mod product;
pub mod search;
pub mod samples;
