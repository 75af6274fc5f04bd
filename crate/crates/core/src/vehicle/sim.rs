use std::collections::HashMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{bicycle_step, track, BicycleParams, GridAbstraction, MpcParams, VehicleError, VehicleInput, VehicleState};
use crate::ltl::{Alphabet, Dfa, Letter};
use crate::models::{ComposedMdp, Labeling, Mc};
use crate::product::{kind_of, ProductMdp, StateKind, TieBreak};
use crate::synth::StochasticPolicy;

pub const CSV_HEADER: &str = "t,px,py,theta,v,phi,a,cell,q_cs,q_s,letter";

const ENV_STREAM: u64 = 0;
const POLICY_STREAM: u64 = 1;
const NOISE_STREAM: u64 = 2;

/// Everything the closed loop reads. The vehicle MDP behind `composed` must
/// be the abstraction of `grid`, so action indices agree.
#[derive(Debug, Clone, Copy)]
pub struct SimContext<'a> {
    pub grid: &'a GridAbstraction,
    pub env: &'a Mc,
    pub composed: &'a ComposedMdp,
    pub labeling: &'a Labeling,
    pub a_cs: &'a Dfa,
    pub a_s: &'a Dfa,
    pub tie: TieBreak,
    pub product: &'a ProductMdp,
    pub policy: &'a StochasticPolicy,
    pub bicycle: &'a BicycleParams,
    pub mpc: &'a MpcParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions {
    /// Abstract steps; each one spans `substeps` integration steps.
    pub steps: usize,
    pub substeps: usize,
    pub seed: u64,
    pub zero_noise: bool,
    pub start: VehicleState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub t: f64,
    pub state: VehicleState,
    /// First input applied during this abstract step; zero on a final row.
    pub input: VehicleInput,
    pub cell: usize,
    pub env: usize,
    pub composed: usize,
    pub q_cs: usize,
    pub q_s: usize,
    /// Product state, when the pair is part of the product.
    pub z: Option<usize>,
    pub letter: Letter,
    pub kind: StateKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub rows: Vec<TrajectoryRow>,
    pub alphabet: Alphabet,
}

impl Trajectory {
    /// Kind of the last recorded state; `Transient` when the step cap hit first.
    pub fn outcome(&self) -> StateKind {
        self.rows.last().map_or(StateKind::Transient, |r| r.kind)
    }
}

fn pick(weights: impl Iterator<Item = (usize, f64)>, u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (i, w) in weights {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

fn stream(seed: u64, s: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(s);
    rng
}

/// Closed-loop run: the policy picks an abstract action from the current
/// product state, MPC tracks the intended cell centre, the environment and
/// the automata advance once per abstract step. Stops on a goal or
/// violation state or after `steps` steps.
pub fn simulate(ctx: &SimContext<'_>, opts: &SimOptions) -> Result<Trajectory, VehicleError> {
    ctx.bicycle.validate()?;
    ctx.mpc.validate()?;
    if opts.substeps == 0 {
        return Err(VehicleError::Params("substeps must be positive".into()));
    }
    if ctx.policy.probs.len() != ctx.product.num_states() {
        return Err(VehicleError::Policy(format!(
            "{} policy rows for {} product states",
            ctx.policy.probs.len(),
            ctx.product.num_states()
        )));
    }
    let index: HashMap<(usize, usize, usize), usize> = ctx
        .product
        .states
        .iter()
        .enumerate()
        .filter(|(z, _)| !ctx.product.is_terminal(*z))
        .map(|(z, s)| ((s.composed, s.q_cs, s.q_s), z))
        .collect();

    let mut env_rng = stream(opts.seed, ENV_STREAM);
    let mut pol_rng = stream(opts.seed, POLICY_STREAM);
    let mut noise_rng = stream(opts.seed, NOISE_STREAM);
    let std: Vec<f64> = ctx.bicycle.noise.iter().map(|v| if opts.zero_noise { 0.0 } else { v.sqrt() }).collect();

    let step_time = opts.substeps as f64 * ctx.bicycle.dt;
    let mismatch = |x: &VehicleState| VehicleError::AbstractionMismatch { px: x.px, py: x.py };
    let advance = |dfa: &Dfa, q: usize, l: Letter| {
        dfa.step(q, l).map_err(|e| VehicleError::Policy(e.to_string()))
    };

    let mut x = opts.start;
    let mut e = ctx.env.initial;
    let mut q = (ctx.a_cs.initial(), ctx.a_s.initial());
    let mut rows = Vec::new();
    for t in 0..opts.steps {
        let cell = ctx.grid.cell_of(x.px, x.py).ok_or_else(|| mismatch(&x))?;
        let composed = ctx.composed.index(cell, e);
        let letter = ctx.labeling.letters[composed];
        if t == 0 {
            q = (advance(ctx.a_cs, q.0, letter)?, advance(ctx.a_s, q.1, letter)?);
        }
        let kind = kind_of(ctx.a_cs, ctx.a_s, q.0, q.1, ctx.tie);
        let z = index.get(&(composed, q.0, q.1)).copied();
        let mut row = TrajectoryRow {
            t: t as f64 * step_time,
            state: x,
            input: VehicleInput::default(),
            cell,
            env: e,
            composed,
            q_cs: q.0,
            q_s: q.1,
            z,
            letter,
            kind,
        };
        if kind.is_terminal() {
            rows.push(row);
            break;
        }

        let action = match z {
            Some(z) => pick(ctx.policy.probs[z].iter().copied().enumerate(), pol_rng.random::<f64>()),
            None => {
                log::warn!("step {t}: state outside the product, acting uniformly");
                pol_rng.random_range(0..ctx.grid.actions.len())
            }
        };
        let (dx, dy) = ctx.grid.actions[action].intended();
        let target = ctx.grid.shift(cell, dx, dy);
        let (cx, cy) = ctx.grid.center(target);
        let x_ref = if target == cell {
            VehicleState::new(cx, cy, x.theta, 0.0)
        } else {
            let (tx, ty) = ctx.grid.center(cell);
            let dist = ((cx - tx).powi(2) + (cy - ty).powi(2)).sqrt();
            VehicleState::new(cx, cy, (cy - ty).atan2(cx - tx), dist / step_time)
        };
        for k in 0..opts.substeps {
            let u = track(x, x_ref, ctx.bicycle, ctx.mpc)?;
            if k == 0 {
                row.input = u;
            }
            let mut w = [0.0; 4];
            for (wi, s) in w.iter_mut().zip(&std) {
                if *s > 0.0 {
                    *wi = s * noise_rng.sample::<f64, _>(StandardNormal);
                }
            }
            x = bicycle_step(x, u, ctx.bicycle, w)?;
        }
        rows.push(row);

        let env_row = &ctx.env.kernel[e];
        e = env_row[pick(env_row.iter().map(|r| r.1).enumerate(), env_rng.random::<f64>())].0;
        q = (advance(ctx.a_cs, q.0, letter)?, advance(ctx.a_s, q.1, letter)?);
    }
    Ok(Trajectory {
        rows,
        alphabet: ctx.labeling.alphabet.clone(),
    })
}

/// Trajectory as CSV; the letter column is quoted since it contains commas.
pub fn write_csv(traj: &Trajectory, out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in &traj.rows {
        let s = &r.state;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},\"{}\"",
            r.t,
            s.px,
            s.py,
            s.theta,
            s.v,
            r.input.phi,
            r.input.a,
            r.cell,
            r.q_cs,
            r.q_s,
            traj.alphabet.render(r.letter)
        )?;
    }
    Ok(())
}
