//! Reference implementations, fixtures and generators used by the test
//! suites.
//!
//! Nothing here shares code with the paths it checks: the LTL evaluator
//! works directly on the formula tree and the generators only use public
//! constructors.

pub mod fixtures;
pub mod formulas;
pub mod random;
pub mod semantics;
