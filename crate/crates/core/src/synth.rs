//! Risk-bounded synthesis over discounted occupation measures.
//!
//! One variable `β(z, a)` per enabled action of every transient product
//! state. Arrival at a terminal state happens one step after the occupation
//! that causes it, so goal and violation inflow carry one extra factor `γ`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::{LinearProgram, LpError, LpStatus, Sense, Solver};
use crate::product::{ProductMdp, StateKind};

/// Occupations at or below this are treated as an unvisited state.
pub const VISIT_THRESHOLD: f64 = 1e-12;

/// Default weight of the relaxation variable in the objective.
pub const DEFAULT_PENALTY: f64 = 1e3;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("solution does not belong to this product: {0}")]
    Mismatch(String),
}

/// Only first-hit termination is implemented; absorbing goal and violation
/// sets with self-loops would rescale risk by `1 / (1 - γ)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalMode {
    #[default]
    FirstHit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisConfig {
    pub gamma: f64,
    /// `None` drops the risk row.
    pub r_th: Option<f64>,
    pub relaxed: bool,
    pub penalty: f64,
    pub terminal_mode: TerminalMode,
}

impl SynthesisConfig {
    pub fn new(gamma: f64, r_th: Option<f64>) -> SynthesisConfig {
        SynthesisConfig {
            gamma,
            r_th,
            relaxed: false,
            penalty: DEFAULT_PENALTY,
            terminal_mode: TerminalMode::FirstHit,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(SynthError::Config(format!("gamma = {} is outside (0, 1)", self.gamma)));
        }
        if let Some(r) = self.r_th {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(SynthError::Config(format!("r_th = {r} must be finite and >= 0")));
            }
        }
        if !(self.penalty > 0.0 && self.penalty.is_finite()) {
            return Err(SynthError::Config(format!("penalty = {} must be positive", self.penalty)));
        }
        Ok(())
    }
}

/// The program plus the bookkeeping to read a solution back.
#[derive(Debug, Clone)]
pub struct SynthesisLp {
    pub lp: LinearProgram,
    /// `(z, a)` of every occupation column, in column order.
    pub columns: Vec<(usize, usize)>,
    /// Balance row of each transient state.
    pub balance_row: Vec<Option<usize>>,
    pub risk_row: Option<usize>,
    pub slack_col: Option<usize>,
    /// Coefficients of the reward and risk expressions per column.
    pub reward_coef: Vec<f64>,
    pub risk_coef: Vec<f64>,
    pub reward_const: f64,
    pub risk_const: f64,
}

impl SynthesisLp {
    pub fn num_pairs(&self) -> usize {
        self.columns.len()
    }
}

fn inflow(p: &ProductMdp, z: usize, a: usize, weight: impl Fn(usize) -> f64) -> f64 {
    p.row(z, a).map_or(0.0, |row| row.iter().map(|&(t, q)| q * weight(t)).sum())
}

pub fn build_lp(p: &ProductMdp, cfg: &SynthesisConfig) -> Result<SynthesisLp, SynthError> {
    cfg.validate()?;
    let g = cfg.gamma;
    let n = p.num_states();
    let mut lp = LinearProgram::default();
    let mut columns = Vec::new();
    let mut reward_coef = Vec::new();
    let mut risk_coef = Vec::new();
    let is_goal = |t: usize| if p.kind(t) == StateKind::Goal { 1.0 } else { 0.0 };
    for z in 0..n {
        for a in p.enabled(z) {
            let r = g * inflow(p, z, a, is_goal);
            let c = g * inflow(p, z, a, |t| p.cost[t]);
            lp.add_var(format!("beta_{z}_{a}"), r);
            columns.push((z, a));
            reward_coef.push(r);
            risk_coef.push(c);
        }
    }
    let z0 = p.initial;
    let reward_const = is_goal(z0);
    let risk_const = p.cost[z0];
    lp.constant = reward_const;

    // Balance: out-flow minus discounted in-flow equals initial mass.
    let mut balance_row = vec![None; n];
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    for z in 0..n {
        if !p.is_terminal(z) {
            balance_row[z] = Some(rows.len());
            rows.push(Vec::new());
        }
    }
    for (col, &(z, a)) in columns.iter().enumerate() {
        rows[balance_row[z].unwrap()].push((col, 1.0));
        for &(t, q) in p.row(z, a).unwrap() {
            if let Some(r) = balance_row[t] {
                rows[r].push((col, -g * q));
            }
        }
    }
    for (z, r) in balance_row.iter().enumerate() {
        if let Some(r) = *r {
            let mut coeffs = std::mem::take(&mut rows[r]);
            coeffs.sort_by_key(|e| e.0);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(coeffs.len());
            for (c, v) in coeffs {
                match merged.last_mut() {
                    Some(last) if last.0 == c => last.1 += v,
                    _ => merged.push((c, v)),
                }
            }
            lp.add_constraint(format!("balance_{z}"), merged, Sense::Eq, if z == z0 { 1.0 } else { 0.0 });
        }
    }

    // Any deterministic policy gives a nonsingular, feasible starting basis.
    for (col, &(z, _)) in columns.iter().enumerate() {
        let r = balance_row[z].unwrap();
        if lp.basis_hint.last().is_none_or(|&(last, _)| last != r) {
            lp.basis_hint.push((r, col));
        }
    }

    let mut risk_row = None;
    let mut slack_col = None;
    if let Some(r_th) = cfg.r_th {
        let mut coeffs: Vec<(usize, f64)> = risk_coef
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(j, c)| (j, *c))
            .collect();
        if cfg.relaxed {
            let s = lp.add_var("slack", -cfg.penalty);
            coeffs.push((s, -1.0));
            slack_col = Some(s);
        }
        risk_row = Some(lp.add_constraint("risk", coeffs, Sense::Le, r_th - risk_const));
    }
    Ok(SynthesisLp {
        lp,
        columns,
        balance_row,
        risk_row,
        slack_col,
        reward_coef,
        risk_coef,
        reward_const,
        risk_const,
    })
}

/// Solved occupation measure; `beta` follows `SynthesisLp::columns`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupationSolution {
    pub status: LpStatus,
    /// Reward metric, without the relaxation penalty.
    pub objective: f64,
    pub risk: f64,
    pub slack: Option<f64>,
    pub columns: Vec<(usize, usize)>,
    pub beta: Vec<f64>,
    pub iterations: usize,
}

impl OccupationSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

pub fn solve(slp: &SynthesisLp, solver: &dyn Solver) -> Result<OccupationSolution, SynthError> {
    let res = solver.solve(&slp.lp)?;
    if res.status != LpStatus::Optimal {
        return Ok(OccupationSolution {
            status: res.status,
            objective: f64::NAN,
            risk: f64::NAN,
            slack: None,
            columns: slp.columns.clone(),
            beta: Vec::new(),
            iterations: res.iterations,
        });
    }
    let beta: Vec<f64> = res.x[..slp.num_pairs()]
        .iter()
        .map(|&v| if v < 0.0 && v >= -1e-10 { 0.0 } else { v })
        .collect();
    let objective = slp.reward_const + dot(&slp.reward_coef, &beta);
    let risk = slp.risk_const + dot(&slp.risk_coef, &beta);
    Ok(OccupationSolution {
        status: res.status,
        objective,
        risk,
        slack: slp.slack_col.map(|s| res.x[s]),
        columns: slp.columns.clone(),
        beta,
        iterations: res.iterations,
    })
}

/// `build_lp` and `solve` in one call.
pub fn synthesize(p: &ProductMdp, cfg: &SynthesisConfig, solver: &dyn Solver) -> Result<(SynthesisLp, OccupationSolution), SynthError> {
    let slp = build_lp(p, cfg)?;
    let sol = solve(&slp, solver)?;
    Ok((slp, sol))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_columns(sol: &OccupationSolution, p: &ProductMdp) -> Result<(), SynthError> {
    if sol.beta.len() != sol.columns.len() {
        return Err(SynthError::Mismatch("beta and column lists differ".into()));
    }
    for &(z, a) in &sol.columns {
        if p.row(z, a).is_none() {
            return Err(SynthError::Mismatch(format!("no action {a} at state {z}")));
        }
    }
    Ok(())
}

/// Reward metric recomputed from `beta`.
pub fn reward_of(sol: &OccupationSolution, p: &ProductMdp, cfg: &SynthesisConfig) -> Result<f64, SynthError> {
    check_columns(sol, p)?;
    let is_goal = |t: usize| if p.kind(t) == StateKind::Goal { 1.0 } else { 0.0 };
    let flow: f64 = sol
        .columns
        .iter()
        .zip(&sol.beta)
        .map(|(&(z, a), b)| b * inflow(p, z, a, is_goal))
        .sum();
    Ok(is_goal(p.initial) + cfg.gamma * flow)
}

/// Risk metric recomputed from `beta`.
pub fn risk_of(sol: &OccupationSolution, p: &ProductMdp, cfg: &SynthesisConfig) -> Result<f64, SynthError> {
    check_columns(sol, p)?;
    let flow: f64 = sol
        .columns
        .iter()
        .zip(&sol.beta)
        .map(|(&(z, a), b)| b * inflow(p, z, a, |t| p.cost[t]))
        .sum();
    Ok(p.cost[p.initial] + cfg.gamma * flow)
}

/// Discounted probability mass entering each state, `γ Σ β(z,a) P(z,a,t)`;
/// the initial state additionally receives 1.
pub fn state_inflow(sol: &OccupationSolution, p: &ProductMdp, cfg: &SynthesisConfig) -> Result<Vec<f64>, SynthError> {
    check_columns(sol, p)?;
    let mut flow = vec![0.0; p.num_states()];
    flow[p.initial] = 1.0;
    for (&(z, a), &b) in sol.columns.iter().zip(&sol.beta) {
        for &(t, q) in p.row(z, a).unwrap() {
            flow[t] += cfg.gamma * q * b;
        }
    }
    Ok(flow)
}

/// Largest balance-equation residual of `sol`.
pub fn balance_residual(sol: &OccupationSolution, p: &ProductMdp, cfg: &SynthesisConfig) -> f64 {
    let n = p.num_states();
    let mut res = vec![0.0; n];
    res[p.initial] -= 1.0;
    for (&(z, a), &b) in sol.columns.iter().zip(&sol.beta) {
        res[z] += b;
        for &(t, q) in p.row(z, a).unwrap() {
            res[t] -= cfg.gamma * q * b;
        }
    }
    (0..n)
        .filter(|&z| !p.is_terminal(z))
        .map(|z| res[z].abs())
        .fold(0.0, f64::max)
}

/// Stationary policy; rows of terminal states are empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochasticPolicy {
    pub probs: Vec<Vec<f64>>,
    /// Set where the occupation vanished and the uniform fallback applies.
    pub fallback: Vec<bool>,
}

impl StochasticPolicy {
    /// Uniform over enabled actions everywhere.
    pub fn uniform(p: &ProductMdp) -> StochasticPolicy {
        let probs = (0..p.num_states()).map(|z| uniform_row(p, z)).collect();
        StochasticPolicy {
            probs,
            fallback: (0..p.num_states()).map(|z| !p.is_terminal(z)).collect(),
        }
    }

    /// Deterministic choice `choice[z]` at every transient state.
    pub fn deterministic(p: &ProductMdp, choice: impl Fn(usize) -> usize) -> StochasticPolicy {
        let probs = (0..p.num_states())
            .map(|z| {
                if p.is_terminal(z) {
                    return Vec::new();
                }
                let mut row = vec![0.0; p.num_actions()];
                row[choice(z)] = 1.0;
                row
            })
            .collect();
        StochasticPolicy {
            probs,
            fallback: vec![false; p.num_states()],
        }
    }

    pub fn action_probs(&self, z: usize) -> &[f64] {
        &self.probs[z]
    }
}

fn uniform_row(p: &ProductMdp, z: usize) -> Vec<f64> {
    if p.is_terminal(z) {
        return Vec::new();
    }
    let k = p.enabled(z).count() as f64;
    let mut row = vec![0.0; p.num_actions()];
    for a in p.enabled(z) {
        row[a] = 1.0 / k;
    }
    row
}

/// `π(z, a) = β(z, a) / Σ_a β(z, a)`, uniform where the sum vanishes.
pub fn extract_policy(sol: &OccupationSolution, p: &ProductMdp) -> Result<StochasticPolicy, SynthError> {
    check_columns(sol, p)?;
    let n = p.num_states();
    let mut probs: Vec<Vec<f64>> = (0..n)
        .map(|z| if p.is_terminal(z) { Vec::new() } else { vec![0.0; p.num_actions()] })
        .collect();
    let mut total = vec![0.0; n];
    for (&(z, a), &b) in sol.columns.iter().zip(&sol.beta) {
        let b = b.max(0.0);
        probs[z][a] = b;
        total[z] += b;
    }
    let mut fallback = vec![false; n];
    for z in 0..n {
        if p.is_terminal(z) {
            continue;
        }
        if total[z] > VISIT_THRESHOLD {
            for v in &mut probs[z] {
                *v /= total[z];
            }
        } else {
            probs[z] = uniform_row(p, z);
            fallback[z] = true;
        }
    }
    Ok(StochasticPolicy { probs, fallback })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaEntry {
    pub state: usize,
    pub action: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyEntry {
    pub state: usize,
    pub probs: Vec<f64>,
    #[serde(default)]
    pub fallback: bool,
}

/// JSON form of a solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionDump {
    pub schema_version: u32,
    pub status: LpStatus,
    pub objective: Option<f64>,
    pub risk: Option<f64>,
    pub slack: Option<f64>,
    pub gamma: f64,
    pub r_th: Option<f64>,
    pub relaxed: bool,
    pub decision_variables: usize,
    pub beta: Vec<BetaEntry>,
    pub policy: Vec<PolicyEntry>,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

pub fn policy_entries(pol: &StochasticPolicy) -> Vec<PolicyEntry> {
    pol.probs
        .iter()
        .enumerate()
        .filter(|(_, r)| !r.is_empty())
        .map(|(z, r)| PolicyEntry {
            state: z,
            probs: r.clone(),
            fallback: pol.fallback[z],
        })
        .collect()
}

impl SolutionDump {
    pub fn new(
        sol: &OccupationSolution,
        pol: Option<&StochasticPolicy>,
        p: &ProductMdp,
        cfg: &SynthesisConfig,
    ) -> SolutionDump {
        SolutionDump {
            schema_version: crate::SCHEMA_VERSION,
            status: sol.status,
            objective: finite(sol.objective),
            risk: finite(sol.risk),
            slack: sol.slack,
            gamma: cfg.gamma,
            r_th: cfg.r_th,
            relaxed: cfg.relaxed,
            decision_variables: sol.columns.len(),
            beta: sol
                .columns
                .iter()
                .zip(&sol.beta)
                .map(|(&(z, a), &v)| BetaEntry {
                    state: z,
                    action: p.action_names[a].clone(),
                    value: v,
                })
                .collect(),
            policy: pol.map(policy_entries).unwrap_or_default(),
        }
    }

    /// Occupation measure back in column form, for the risk-field export.
    pub fn to_solution(&self, p: &ProductMdp) -> Result<OccupationSolution, SynthError> {
        let mut columns = Vec::with_capacity(self.beta.len());
        let mut beta = Vec::with_capacity(self.beta.len());
        for e in &self.beta {
            let a = p
                .action_names
                .iter()
                .position(|n| *n == e.action)
                .ok_or_else(|| SynthError::Mismatch(format!("unknown action `{}`", e.action)))?;
            if e.state >= p.num_states() {
                return Err(SynthError::Mismatch(format!("state {} out of range", e.state)));
            }
            columns.push((e.state, a));
            beta.push(e.value);
        }
        let sol = OccupationSolution {
            status: self.status,
            objective: self.objective.unwrap_or(f64::NAN),
            risk: self.risk.unwrap_or(f64::NAN),
            slack: self.slack,
            columns,
            beta,
            iterations: 0,
        };
        check_columns(&sol, p)?;
        Ok(sol)
    }
}

/// Rebuilds a policy from dumped entries; unlisted transient states get the
/// uniform fallback.
pub fn policy_from_entries(entries: &[PolicyEntry], p: &ProductMdp) -> Result<StochasticPolicy, SynthError> {
    let mut pol = StochasticPolicy::uniform(p);
    for e in entries {
        if e.state >= p.num_states() || p.is_terminal(e.state) || e.probs.len() != p.num_actions() {
            return Err(SynthError::Mismatch(format!("policy row for state {} does not fit", e.state)));
        }
        let sum: f64 = e.probs.iter().sum();
        let ok = e
            .probs
            .iter()
            .enumerate()
            .all(|(a, &v)| v >= 0.0 && (v == 0.0 || p.row(e.state, a).is_some()));
        if !ok || (sum - 1.0).abs() > 1e-9 {
            return Err(SynthError::Mismatch(format!("policy row for state {} is not a distribution", e.state)));
        }
        pol.probs[e.state] = e.probs.clone();
        pol.fallback[e.state] = e.fallback;
    }
    Ok(pol)
}
