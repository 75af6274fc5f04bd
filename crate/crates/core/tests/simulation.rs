use std::sync::OnceLock;

use proptest::prelude::*;

use riskplan_core::lp::Simplex;
use riskplan_core::scenarios::{compile, gen_construction, gen_intersection, gen_pedestrian, CompiledScenario};
use riskplan_core::synth::{extract_policy, synthesize, StochasticPolicy};
use riskplan_core::vehicle::{bicycle_step, track, write_csv, BicycleParams, MpcParams, VehicleState};

fn fixtures() -> &'static [(CompiledScenario, StochasticPolicy)] {
    static CELL: OnceLock<Vec<(CompiledScenario, StochasticPolicy)>> = OnceLock::new();
    CELL.get_or_init(|| {
        [gen_construction(), gen_pedestrian(), gen_intersection()]
            .iter()
            .map(|c| {
                let cs = compile(c).unwrap();
                let (_, sol) = synthesize(&cs.product, &cs.synthesis_config(), &Simplex::default()).unwrap();
                let pol = extract_policy(&sol, &cs.product).unwrap();
                (cs, pol)
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn runs_are_reproducible_and_consistent(which in 0usize..3, seed in any::<u64>(), zero_noise in any::<bool>()) {
        let (cs, pol) = &fixtures()[which];
        let opts = cs.sim_options(30, seed, zero_noise);
        let tr = cs.simulate(pol, &opts).unwrap();
        prop_assert_eq!(&cs.simulate(pol, &opts).unwrap(), &tr);

        let mut q = (cs.a_cs.initial(), cs.a_s.initial());
        for (t, row) in tr.rows.iter().enumerate() {
            prop_assert_eq!(Some(row.cell), cs.grid.cell_of(row.state.px, row.state.py));
            prop_assert_eq!(row.composed, cs.composed.index(row.cell, row.env));
            prop_assert_eq!(row.letter, cs.labeling.letters[row.composed]);
            if t == 0 {
                prop_assert_eq!(row.env, cs.env.initial);
                q = (cs.a_cs.step(q.0, row.letter).unwrap(), cs.a_s.step(q.1, row.letter).unwrap());
            } else {
                let prev = &tr.rows[t - 1];
                prop_assert!(cs.env.kernel[prev.env].iter().any(|&(e, p)| e == row.env && p > 0.0));
            }
            prop_assert_eq!((row.q_cs, row.q_s), q);
            if let Some(z) = row.z {
                let s = &cs.product.states[z];
                prop_assert_eq!((s.composed, s.q_cs, s.q_s), (row.composed, row.q_cs, row.q_s));
            } else {
                prop_assert!(row.kind.is_terminal());
            }
            q = (cs.a_cs.step(q.0, row.letter).unwrap(), cs.a_s.step(q.1, row.letter).unwrap());
        }
        if let Some((last, body)) = tr.rows.split_last() {
            prop_assert!(body.iter().all(|r| !r.kind.is_terminal()));
            prop_assert!(last.kind.is_terminal() || tr.rows.len() == 30);
        }

        let (mut a, mut b) = (Vec::new(), Vec::new());
        write_csv(&tr, &mut a).unwrap();
        write_csv(&cs.simulate(pol, &opts).unwrap(), &mut b).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn tracking_closes_on_a_fixed_reference_ahead() {
    let params = BicycleParams::default();
    let mpc = MpcParams::default();
    for (x_ref, start) in [
        (VehicleState::new(8.0, 0.0, 0.0, 0.0), VehicleState::new(0.0, 0.0, 0.0, 2.0)),
        (VehicleState::new(0.0, 6.0, std::f64::consts::FRAC_PI_2, 0.0), VehicleState::new(0.0, 0.0, std::f64::consts::FRAC_PI_2, 1.0)),
    ] {
        let dist = |x: &VehicleState| ((x.px - x_ref.px).powi(2) + (x.py - x_ref.py).powi(2)).sqrt();
        let mut x = start;
        let mut d = dist(&x);
        let mut steps = 0;
        while d > 0.5 {
            let u = track(x, x_ref, &params, &mpc).unwrap();
            x = bicycle_step(x, u, &params, [0.0; 4]).unwrap();
            let next = dist(&x);
            assert!(next < d, "distance grew from {d} to {next} at step {steps}");
            d = next;
            steps += 1;
            assert!(steps < 200, "reference not reached");
        }
    }
}

#[test]
fn stochastic_runs_differ_across_seeds() {
    let (cs, pol) = &fixtures()[1];
    let a = cs.simulate(pol, &cs.sim_options(10, 1, false)).unwrap();
    let b = cs.simulate(pol, &cs.sim_options(10, 2, false)).unwrap();
    assert_ne!(a.rows[1].state, b.rows[1].state);
}
