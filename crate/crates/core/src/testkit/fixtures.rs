//! Small hand-built products with known answers.

use crate::product::{ProductMdp, ProductState, StateKind};

fn st(i: usize) -> ProductState {
    ProductState {
        composed: i,
        q_cs: 0,
        q_s: 0,
        entry: None,
    }
}

/// `z0 --a--> z1` with `z1` of the given terminal kind.
pub fn chain_to(kind: StateKind, cost: f64) -> ProductMdp {
    ProductMdp::new(
        vec![st(0), st(1)],
        vec![StateKind::Transient, kind],
        0,
        vec!["a".into()],
        vec![vec![Some(vec![(1, 1.0)])], vec![]],
        vec![0.0, cost],
    )
    .expect("valid fixture")
}

/// `z0 -> z1 -> goal`.
pub fn two_step_chain() -> ProductMdp {
    ProductMdp::new(
        vec![st(0), st(1), st(2)],
        vec![StateKind::Transient, StateKind::Transient, StateKind::Goal],
        0,
        vec!["a".into()],
        vec![vec![Some(vec![(1, 1.0)])], vec![Some(vec![(2, 1.0)])], vec![]],
        vec![0.0; 3],
    )
    .expect("valid fixture")
}

/// Single state that is already a goal.
pub fn initial_goal() -> ProductMdp {
    ProductMdp::new(vec![st(0)], vec![StateKind::Goal], 0, vec!["a".into()], vec![vec![]], vec![0.0])
        .expect("valid fixture")
}

/// Fair coin from `z0` into a goal or a violation of cost `cost`.
pub fn coin_fork(cost: f64) -> ProductMdp {
    ProductMdp::new(
        vec![st(0), st(1), st(2)],
        vec![StateKind::Transient, StateKind::Goal, StateKind::Violation],
        0,
        vec!["flip".into()],
        vec![vec![Some(vec![(1, 0.5), (2, 0.5)])], vec![], vec![]],
        vec![0.0, 0.0, cost],
    )
    .expect("valid fixture")
}

/// Two transient states with two actions each; state 1 is never entered.
pub fn two_action_fork() -> ProductMdp {
    ProductMdp::new(
        vec![st(0), st(1), st(2)],
        vec![StateKind::Transient, StateKind::Transient, StateKind::Goal],
        0,
        vec!["l".into(), "r".into()],
        vec![
            vec![Some(vec![(2, 1.0)]), Some(vec![(0, 0.5), (2, 0.5)])],
            vec![Some(vec![(2, 1.0)]), Some(vec![(2, 1.0)])],
            vec![],
        ],
        vec![0.0; 3],
    )
    .expect("valid fixture")
}
