//! Continuous side of the pipeline: kinematic bicycle, grid abstraction,
//! lattice MPC tracking and closed-loop simulation.

mod dynamics;
mod grid;
mod mpc;
mod sim;

use thiserror::Error;

pub use dynamics::{bicycle_step, BicycleParams, VehicleInput, VehicleState};
pub use grid::{king_moves, ActionDef, GridAbstraction, Outcome};
pub use mpc::{track, MpcParams};
pub use sim::{simulate, write_csv, SimContext, SimOptions, Trajectory, TrajectoryRow, CSV_HEADER};

#[derive(Debug, Error, PartialEq)]
pub enum VehicleError {
    #[error("input (phi = {phi}, a = {a}) outside the admissible box")]
    InputOutOfRange { phi: f64, a: f64 },
    #[error("bad distribution for action `{action}`: {detail}")]
    BadDistribution { action: String, detail: String },
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("vehicle left the gridded area at ({px:.3}, {py:.3})")]
    AbstractionMismatch { px: f64, py: f64 },
    #[error("policy does not fit the product: {0}")]
    Policy(String),
}
