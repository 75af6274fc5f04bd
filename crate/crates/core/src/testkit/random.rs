//! Random models and products for property tests.

use rand::seq::index::sample;
use rand::Rng;

use crate::models::{Mc, Mdp, Row};
use crate::product::{reachable_prune, ProductMdp, ProductState, StateKind};

/// Random distribution over `1..=max_support` distinct targets in `0..n`.
pub fn random_row<R: Rng>(rng: &mut R, n: usize, max_support: usize) -> Row {
    let k = rng.random_range(1..=max_support.min(n));
    let mut targets: Vec<usize> = sample(rng, n, k).into_vec();
    targets.sort_unstable();
    let weights: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = weights.iter().sum();
    targets.into_iter().zip(weights).map(|(t, w)| (t, w / total)).collect()
}

pub fn random_mdp<R: Rng>(rng: &mut R, max_states: usize, max_actions: usize) -> Mdp {
    let n = rng.random_range(1..=max_states);
    let na = rng.random_range(1..=max_actions);
    let kernel = (0..n)
        .map(|_| {
            let forced = rng.random_range(0..na);
            (0..na)
                .map(|a| (a == forced || rng.random_bool(0.7)).then(|| random_row(rng, n, 4)))
                .collect()
        })
        .collect();
    Mdp {
        state_names: (0..n).map(|i| format!("s{i}")).collect(),
        initial: rng.random_range(0..n),
        action_names: (0..na).map(|a| format!("a{a}")).collect(),
        kernel,
    }
}

pub fn random_mc<R: Rng>(rng: &mut R, max_states: usize) -> Mc {
    let n = rng.random_range(1..=max_states);
    Mc {
        state_names: (0..n).map(|i| format!("e{i}")).collect(),
        initial: rng.random_range(0..n),
        kernel: (0..n).map(|_| random_row(rng, n, 3)).collect(),
    }
}

/// Random product with at most `max_states` states and `max_actions`
/// actions, pruned to the part reachable from its transient initial state.
/// Roughly a fifth of the states are goals and a tenth violations with
/// costs in `[0.5, 10)`; at least one goal always exists.
pub fn random_product<R: Rng>(rng: &mut R, max_states: usize, max_actions: usize) -> ProductMdp {
    let n = rng.random_range(3..=max_states.max(3));
    let na = rng.random_range(1..=max_actions.max(1));
    let mut kinds: Vec<StateKind> = (0..n)
        .map(|_| match rng.random_range(0..10) {
            0 | 1 => StateKind::Goal,
            2 => StateKind::Violation,
            _ => StateKind::Transient,
        })
        .collect();
    kinds[0] = StateKind::Transient;
    if !kinds.contains(&StateKind::Goal) {
        kinds[n - 1] = StateKind::Goal;
    }
    let kernel = (0..n)
        .map(|z| {
            if kinds[z].is_terminal() {
                return Vec::new();
            }
            let forced = rng.random_range(0..na);
            (0..na)
                .map(|a| (a == forced || rng.random_bool(0.6)).then(|| random_row(rng, n, 4)))
                .collect()
        })
        .collect();
    let cost = kinds
        .iter()
        .map(|k| if *k == StateKind::Violation { rng.random_range(0.5..10.0) } else { 0.0 })
        .collect();
    let states = (0..n)
        .map(|i| ProductState {
            composed: i,
            q_cs: 0,
            q_s: 0,
            entry: None,
        })
        .collect();
    let p = ProductMdp::new(
        states,
        kinds,
        0,
        (0..na).map(|a| format!("a{a}")).collect(),
        kernel,
        cost,
    )
    .expect("generator keeps product invariants");
    reachable_prune(&p)
}
