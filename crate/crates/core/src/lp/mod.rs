//! Linear programs over non-negative variables and the solvers behind them.

mod cplex;
mod simplex;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cplex::{parse_solution, write_lp, ExternalSolver};
pub use simplex::{Simplex, SimplexOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// `maximize objective·x + constant` subject to `constraints`, `x >= 0`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinearProgram {
    pub var_names: Vec<String>,
    pub objective: Vec<f64>,
    pub constant: f64,
    pub constraints: Vec<Constraint>,
    /// Optional `(row, column)` pairs for a starting basis. Solvers may
    /// ignore it; the embedded simplex uses it when the resulting basis is
    /// nonsingular and feasible in the hinted columns.
    pub basis_hint: Vec<(usize, usize)>,
}

impl LinearProgram {
    pub fn num_vars(&self) -> usize {
        self.var_names.len()
    }

    pub fn add_var(&mut self, name: impl Into<String>, objective: f64) -> usize {
        self.var_names.push(name.into());
        self.objective.push(objective);
        self.var_names.len() - 1
    }

    pub fn add_constraint(&mut self, name: impl Into<String>, coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> usize {
        self.constraints.push(Constraint {
            name: name.into(),
            coeffs,
            sense,
            rhs,
        });
        self.constraints.len() - 1
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.constant + self.objective.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }

    pub fn row_value(&self, row: usize, x: &[f64]) -> f64 {
        self.constraints[row].coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Largest violation of any constraint or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = x.iter().map(|v| (-v).max(0.0)).fold(0.0, f64::max);
        for (i, c) in self.constraints.iter().enumerate() {
            let lhs = self.row_value(i, x);
            let v = match c.sense {
                Sense::Le => lhs - c.rhs,
                Sense::Ge => c.rhs - lhs,
                Sense::Eq => (lhs - c.rhs).abs(),
            };
            worst = worst.max(v);
        }
        worst
    }

    fn check(&self) -> Result<(), LpError> {
        if self.objective.len() != self.var_names.len() {
            return Err(LpError::Malformed("objective length differs from variable count".into()));
        }
        let finite = self.objective.iter().all(|v| v.is_finite()) && self.constant.is_finite();
        if !finite {
            return Err(LpError::Malformed("non-finite objective coefficient".into()));
        }
        for c in &self.constraints {
            if !c.rhs.is_finite() || c.coeffs.iter().any(|&(j, a)| j >= self.num_vars() || !a.is_finite()) {
                return Err(LpError::Malformed(format!("row `{}` has a bad coefficient", c.name)));
            }
        }
        if self.basis_hint.iter().any(|&(i, j)| i >= self.constraints.len() || j >= self.num_vars()) {
            return Err(LpError::Malformed("basis hint refers to a missing row or column".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

impl fmt::Display for LpStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LpStatus::Optimal => "optimal",
            LpStatus::Infeasible => "infeasible",
            LpStatus::Unbounded => "unbounded",
        })
    }
}

/// `x` and `objective` are meaningful only when `status` is optimal.
#[derive(Debug, Clone, PartialEq)]
pub struct LpResult {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

#[derive(Debug, Error)]
pub enum LpError {
    #[error("numerical failure at row {row}, column {col}: {detail}")]
    NumericalFailure { row: usize, col: usize, detail: String },
    #[error("iteration limit {0} reached")]
    IterationLimit(usize),
    #[error("malformed program: {0}")]
    Malformed(String),
    #[error("external solver: {0}")]
    External(String),
}

pub trait Solver: Send + Sync {
    fn name(&self) -> String;
    fn solve(&self, lp: &LinearProgram) -> Result<LpResult, LpError>;
}

/// `builtin` or `external:<command>`.
pub fn solver_from_spec(spec: &str) -> Result<Box<dyn Solver>, LpError> {
    match spec {
        "builtin" => Ok(Box::new(Simplex::default())),
        s => match s.strip_prefix("external:") {
            Some(cmd) if !cmd.trim().is_empty() => Ok(Box::new(ExternalSolver::new(cmd.trim()))),
            _ => Err(LpError::External(format!(
                "unknown solver `{s}`; expected `builtin` or `external:<command>`"
            ))),
        },
    }
}
