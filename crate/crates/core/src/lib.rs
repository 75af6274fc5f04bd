//! Risk-bounded policy synthesis for temporal-logic driving tasks.
//!
//! A task is written as `cosafe ∧ safety` over atomic propositions. Both
//! halves are compiled to finite automata, composed with a stochastic
//! vehicle/environment model, and the resulting product MDP is solved as a
//! linear program over discounted occupation measures: the co-safety goal is
//! maximised while the expected discounted cost of safety violations stays
//! under a threshold.
//!
//! Module map:
//!
//! * [`ltl`] parses formulas and translates them into DFAs.
//! * [`models`] holds MDP / Markov chain containers and their composition.
//! * [`product`] builds the product MDP with terminal goal/violation sets.
//! * [`lp`] is the linear-programming backend (embedded simplex or an
//!   external solver process).
//! * [`synth`] assembles the occupation-measure LP and extracts policies.
//! * [`oracles`] evaluates policies independently of the LP.
//! * [`vehicle`] covers the continuous side: bicycle dynamics, gridding,
//!   tracking and closed-loop simulation.
//! * [`scenarios`] defines the scenario file format and built-in scenarios.

pub mod ltl;
pub mod lp;
pub mod models;
pub mod oracles;
pub mod product;
pub mod scenarios;
pub mod synth;
pub mod testkit;
pub mod vehicle;

/// Version string recorded in run manifests and JSON outputs.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Version tag carried by every JSON document this crate writes.
pub const SCHEMA_VERSION: u32 = 1;
