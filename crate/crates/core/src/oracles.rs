//! Independent checks of synthesized policies: exact fixed-policy
//! evaluation, optimal-reach value iteration, and Monte-Carlo rollouts.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::product::{ProductMdp, StateKind};
use crate::synth::StochasticPolicy;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("singular linear system")]
    SingularSystem,
    #[error("policy does not fit the product: {0}")]
    PolicyShape(String),
    #[error("invalid argument: {0}")]
    Argument(String),
}

/// Exact values of a fixed stationary policy.
///
/// `value[z]` and `cost_value[z]` are the discounted goal and cost sums
/// started from `z` (a goal counts 1 at time zero, a violation its cost).
/// `occupation[z]` is the expected discounted number of visits, terminal
/// states included; `state_action[z][a]` splits it by action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationResult {
    pub reward: f64,
    pub risk: f64,
    pub occupation: Vec<f64>,
    pub state_action: Vec<Vec<f64>>,
    pub value: Vec<f64>,
    pub cost_value: Vec<f64>,
}

fn check_policy(p: &ProductMdp, pol: &StochasticPolicy) -> Result<(), OracleError> {
    if pol.probs.len() != p.num_states() {
        return Err(OracleError::PolicyShape(format!(
            "{} rows for {} states",
            pol.probs.len(),
            p.num_states()
        )));
    }
    for z in 0..p.num_states() {
        if p.is_terminal(z) {
            continue;
        }
        let row = &pol.probs[z];
        if row.len() != p.num_actions() {
            return Err(OracleError::PolicyShape(format!("state {z} has {} entries", row.len())));
        }
        for (a, &v) in row.iter().enumerate() {
            if v < 0.0 || (v > 0.0 && p.row(z, a).is_none()) {
                return Err(OracleError::PolicyShape(format!("state {z} puts {v} on action {a}")));
            }
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(OracleError::PolicyShape(format!("state {z} sums to {sum}")));
        }
    }
    Ok(())
}

fn check_gamma(gamma: f64) -> Result<(), OracleError> {
    if gamma > 0.0 && gamma < 1.0 {
        Ok(())
    } else {
        Err(OracleError::Argument(format!("gamma = {gamma} is outside (0, 1)")))
    }
}

/// Solves `(I - γP)V = γg` and its cost and occupation counterparts.
pub fn policy_eval(p: &ProductMdp, pol: &StochasticPolicy, gamma: f64) -> Result<EvaluationResult, OracleError> {
    check_gamma(gamma)?;
    check_policy(p, pol)?;
    let n = p.num_states();
    let transient: Vec<usize> = (0..n).filter(|&z| !p.is_terminal(z)).collect();
    let mut local = vec![usize::MAX; n];
    for (i, &z) in transient.iter().enumerate() {
        local[z] = i;
    }
    let k = transient.len();
    let mut m = DMatrix::<f64>::identity(k, k);
    let mut goal_in = DVector::<f64>::zeros(k);
    let mut cost_in = DVector::<f64>::zeros(k);
    for (i, &z) in transient.iter().enumerate() {
        for (a, &pa) in pol.probs[z].iter().enumerate() {
            if pa == 0.0 {
                continue;
            }
            for &(t, q) in p.row(z, a).expect("checked above") {
                let w = pa * q;
                match p.kind(t) {
                    StateKind::Transient => m[(i, local[t])] -= gamma * w,
                    StateKind::Goal => goal_in[i] += w,
                    StateKind::Violation => cost_in[i] += w * p.cost[t],
                }
            }
        }
    }
    let mut value = vec![0.0; n];
    let mut cost_value = vec![0.0; n];
    let mut occupation = vec![0.0; n];
    let mut state_action: Vec<Vec<f64>> = (0..n).map(|_| Vec::new()).collect();
    for z in 0..n {
        match p.kind(z) {
            StateKind::Goal => value[z] = 1.0,
            StateKind::Violation => cost_value[z] = p.cost[z],
            StateKind::Transient => {}
        }
    }
    if k > 0 {
        let lu = m.clone().lu();
        let v = lu.solve(&(goal_in * gamma)).ok_or(OracleError::SingularSystem)?;
        let c = lu.solve(&(cost_in * gamma)).ok_or(OracleError::SingularSystem)?;
        let mut e0 = DVector::<f64>::zeros(k);
        if !p.is_terminal(p.initial) {
            e0[local[p.initial]] = 1.0;
        }
        let occ = m.transpose().lu().solve(&e0).ok_or(OracleError::SingularSystem)?;
        for (i, &z) in transient.iter().enumerate() {
            value[z] = v[i];
            cost_value[z] = c[i];
            occupation[z] = occ[i];
            state_action[z] = pol.probs[z].iter().map(|pa| pa * occ[i]).collect();
        }
    }
    // Terminal occupation is discounted inflow, plus the initial mass.
    let mut inflow = vec![0.0; n];
    for &z in &transient {
        for (a, &x) in state_action[z].iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            for &(t, q) in p.row(z, a).unwrap() {
                if p.is_terminal(t) {
                    inflow[t] += gamma * q * x;
                }
            }
        }
    }
    for z in 0..n {
        if p.is_terminal(z) {
            occupation[z] = inflow[z] + if z == p.initial { 1.0 } else { 0.0 };
        }
    }
    Ok(EvaluationResult {
        reward: value[p.initial],
        risk: cost_value[p.initial],
        occupation,
        state_action,
        value,
        cost_value,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueIteration {
    /// Optimal discounted reach value per state (goals 1, violations 0).
    pub values: Vec<f64>,
    pub iterations: usize,
    /// Sup-norm change per sweep.
    pub residuals: Vec<f64>,
    pub converged: bool,
}

/// Jacobi value iteration for `max E[γ^τ 1(goal hit at τ)]`, stopping once
/// the sweep change is at most `eps (1 - γ) / γ` so values are within `eps`.
pub fn value_iteration_reach(p: &ProductMdp, gamma: f64, eps: f64) -> Result<ValueIteration, OracleError> {
    check_gamma(gamma)?;
    if !(eps > 0.0) {
        return Err(OracleError::Argument(format!("eps = {eps} must be positive")));
    }
    let n = p.num_states();
    let mut w: Vec<f64> = (0..n)
        .map(|z| if p.kind(z) == StateKind::Goal { 1.0 } else { 0.0 })
        .collect();
    let stop = eps * (1.0 - gamma) / gamma;
    let max_iter = ((stop.ln() / gamma.ln()).ceil() as usize).saturating_add(10).min(50_000_000);
    let mut residuals = Vec::new();
    let mut next = w.clone();
    let mut converged = false;
    for _ in 0..max_iter {
        let mut delta = 0.0f64;
        for z in 0..n {
            if p.is_terminal(z) {
                continue;
            }
            let best = p
                .enabled(z)
                .map(|a| gamma * p.row(z, a).unwrap().iter().map(|&(t, q)| q * w[t]).sum::<f64>())
                .fold(0.0, f64::max);
            delta = delta.max((best - w[z]).abs());
            next[z] = best;
        }
        std::mem::swap(&mut w, &mut next);
        residuals.push(delta);
        if delta <= stop {
            converged = true;
            break;
        }
    }
    Ok(ValueIteration {
        values: w,
        iterations: residuals.len(),
        residuals,
        converged,
    })
}

/// Smallest horizon with `γ^h <= 1e-6`.
pub fn default_horizon(gamma: f64) -> usize {
    (1e-6f64.ln() / gamma.ln()).ceil().max(1.0) as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutStats {
    pub n: usize,
    pub seed: u64,
    pub horizon: usize,
    pub reward_mean: f64,
    pub reward_stderr: f64,
    pub risk_mean: f64,
    pub risk_stderr: f64,
}

/// Index sampled from unnormalized non-negative `weights` using `u` in [0, 1).
fn pick(weights: impl Iterator<Item = (usize, f64)> + Clone, u: f64) -> usize {
    let total: f64 = weights.clone().map(|w| w.1).sum();
    let target = u * total;
    let mut acc = 0.0;
    let mut last = None;
    for (i, w) in weights {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last = Some(i);
        if target < acc {
            return i;
        }
    }
    last.expect("distribution has positive mass")
}

/// One trajectory's discounted (reward, risk).
pub fn sample_trajectory(p: &ProductMdp, pol: &StochasticPolicy, gamma: f64, horizon: usize, rng: &mut impl Rng) -> (f64, f64) {
    let mut z = p.initial;
    let mut disc = 1.0;
    for t in 0..=horizon {
        match p.kind(z) {
            StateKind::Goal => return (disc, 0.0),
            StateKind::Violation => return (0.0, disc * p.cost[z]),
            StateKind::Transient if t == horizon => break,
            StateKind::Transient => {}
        }
        let a = pick(pol.probs[z].iter().copied().enumerate(), rng.random::<f64>());
        let row = p.row(z, a).expect("policy only uses enabled actions");
        z = row[pick(row.iter().map(|e| e.1).enumerate(), rng.random::<f64>())].0;
        disc *= gamma;
    }
    (0.0, 0.0)
}

fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    // Shifted by the first sample: identical samples give an exact mean.
    let n = xs.len() as f64;
    let shift = xs[0];
    let mean = shift + xs.iter().map(|x| x - shift).sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// `n` trajectories; trajectory `i` draws from stream `i` of a generator
/// seeded with `seed`, so results do not depend on the thread count.
pub fn rollout(
    p: &ProductMdp,
    pol: &StochasticPolicy,
    gamma: f64,
    n: usize,
    horizon: Option<usize>,
    seed: u64,
) -> Result<RolloutStats, OracleError> {
    check_gamma(gamma)?;
    check_policy(p, pol)?;
    if n == 0 {
        return Err(OracleError::Argument("rollout needs n >= 1".into()));
    }
    let horizon = horizon.unwrap_or_else(|| default_horizon(gamma));
    let samples: Vec<(f64, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            sample_trajectory(p, pol, gamma, horizon, &mut rng)
        })
        .collect();
    let rewards: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let risks: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let (reward_mean, reward_stderr) = mean_stderr(&rewards);
    let (risk_mean, risk_stderr) = mean_stderr(&risks);
    Ok(RolloutStats {
        n,
        seed,
        horizon,
        reward_mean,
        reward_stderr,
        risk_mean,
        risk_stderr,
    })
}
