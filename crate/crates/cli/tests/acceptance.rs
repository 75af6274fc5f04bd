//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any criterion fails.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

use riskplan_core::lp::{LpStatus, Simplex};
use riskplan_core::ltl::{translate_cosafe, translate_safety, Alphabet, Fragment};
use riskplan_core::oracles::{policy_eval, rollout, value_iteration_reach};
use riskplan_core::scenarios::{
    builtin, compile, gen_construction, gen_intersection, gen_pedestrian, gen_reach_avoid, risk_field, CompiledScenario,
    PEDESTRIAN_THRESHOLDS,
};
use riskplan_core::synth::{extract_policy, state_inflow, synthesize, OccupationSolution, SynthesisConfig};
use riskplan_core::testkit::formulas::random_formula;
use riskplan_core::testkit::random::random_product;
use riskplan_core::testkit::semantics::{bad_prefix, good_prefix, words};

const ORACLE_TOL: f64 = 1e-6;
const RISK_TOL: f64 = 1e-8;
const RANDOM_PRODUCTS: usize = 200;
const RANDOM_PRODUCTS_BUDGET: Duration = Duration::from_secs(60);
const RANDOM_FORMULAS: usize = 500;
const MAX_WORD_LEN: usize = 5;
const FORMULAS_BUDGET: Duration = Duration::from_secs(120);
const INTERSECTION_COLUMNS: usize = 2880;
const INTERSECTION_BUDGET: Duration = Duration::from_secs(30);
/// Metres; the grid cell is 4 m, so this absorbs tracking jitter only.
const CLEARANCE_TOL: f64 = 0.5;
const PEDESTRIAN_STEPS: usize = 40;
const VIOLATION_SHARE_ON_O: f64 = 0.9;
const OBSTACLE_SHARE: f64 = 0.01;
const FIELD_CELL_DIFF: f64 = 1e-6;
const FIELD_CELLS_CHANGED: f64 = 0.05;
const ROLLOUTS: usize = 100_000;
const ROLLOUT_SIGMAS: f64 = 3.0;

type Verdict = Result<String, String>;

fn main() {
    let criteria: [(&str, fn() -> Verdict); 10] = [
        ("1 oracle agreement on random products", random_products_match_oracle),
        ("2 value-iteration equivalence", unconstrained_matches_value_iteration),
        ("3 risk bound respected", risk_stays_under_threshold),
        ("4 automata match brute-force semantics", automata_match_semantics),
        ("5 intersection scale", intersection_scale),
        ("6 pedestrian clearance ordering", pedestrian_clearance),
        ("7 construction minimal violation", construction_violations),
        ("8 reach-avoid risk field", reach_avoid_field),
        ("9 rollouts agree with exact evaluation", rollouts_agree),
        ("10 replay is byte-identical", replay_is_identical),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let t = Instant::now();
        let verdict = check();
        let secs = t.elapsed().as_secs_f64();
        match verdict {
            Ok(detail) => println!("PASS  {name}: {detail} ({secs:.1} s)"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail} ({secs:.1} s)");
            }
        }
    }
    println!("{} of 10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn solve(p: &riskplan_core::product::ProductMdp, cfg: &SynthesisConfig) -> Result<OccupationSolution, String> {
    synthesize(p, cfg, &Simplex::default()).map(|x| x.1).map_err(|e| e.to_string())
}

fn solve_scenario(cs: &CompiledScenario) -> Result<OccupationSolution, String> {
    let sol = solve(&cs.product, &cs.synthesis_config())?;
    ensure(sol.is_optimal(), || format!("{}: status {:?}", cs.config.name, sol.status))?;
    Ok(sol)
}

fn random_products_match_oracle() -> Verdict {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for i in 0..RANDOM_PRODUCTS {
        let p = random_product(&mut rng, 60, 5);
        let gamma = [0.9, 0.95, 0.99][i % 3];
        let free = solve(&p, &SynthesisConfig::new(gamma, None))?;
        let r_th = rng.random_range(0.3..1.0) * free.risk;
        let mut sol = solve(&p, &SynthesisConfig::new(gamma, Some(r_th)))?;
        if sol.status != LpStatus::Optimal {
            sol = free;
        }
        let pol = extract_policy(&sol, &p).map_err(|e| e.to_string())?;
        let ev = policy_eval(&p, &pol, gamma).map_err(|e| e.to_string())?;
        worst = worst.max((ev.reward - sol.objective).abs()).max((ev.risk - sol.risk).abs());
    }
    let elapsed = t.elapsed();
    ensure(worst <= ORACLE_TOL, || format!("max deviation {worst:.2e} > {ORACLE_TOL:.0e}"))?;
    ensure(elapsed <= RANDOM_PRODUCTS_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!("{RANDOM_PRODUCTS} products, max deviation {worst:.2e}"))
}

fn unconstrained_matches_value_iteration() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for i in 0..RANDOM_PRODUCTS {
        let mut p = random_product(&mut rng, 60, 5);
        p.cost.iter_mut().for_each(|c| *c = 0.0);
        let gamma = [0.9, 0.95, 0.99][i % 3];
        let sol = solve(&p, &SynthesisConfig::new(gamma, None))?;
        let vi = value_iteration_reach(&p, gamma, 1e-10).map_err(|e| e.to_string())?;
        ensure(vi.converged, || format!("value iteration did not converge on product {i}"))?;
        worst = worst.max((sol.objective - vi.values[p.initial]).abs());
    }
    ensure(worst <= ORACLE_TOL, || format!("max deviation {worst:.2e}"))?;
    Ok(format!("{RANDOM_PRODUCTS} products, max deviation {worst:.2e}"))
}

fn risk_stays_under_threshold() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut checked = 0;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..RANDOM_PRODUCTS {
        let p = random_product(&mut rng, 40, 4);
        let r_th = rng.random_range(0.0..2.0);
        let sol = solve(&p, &SynthesisConfig::new(0.95, Some(r_th)))?;
        if sol.status == LpStatus::Optimal {
            checked += 1;
            worst = worst.max(sol.risk - r_th);
        }
    }
    for cfg in [gen_construction(), gen_pedestrian(), gen_intersection(), gen_reach_avoid()] {
        for &r_th in &cfg.synthesis.r_th_grid {
            let mut c = cfg.clone();
            c.synthesis.r_th = Some(r_th);
            let cs = compile(&c).map_err(|e| e.to_string())?;
            let sol = solve_scenario(&cs)?;
            checked += 1;
            worst = worst.max(sol.risk - r_th);
        }
    }
    ensure(worst <= RISK_TOL, || format!("risk exceeds threshold by {worst:.2e}"))?;
    Ok(format!("{checked} optimal solves, max excess {worst:.2e}"))
}

fn automata_match_semantics() -> Verdict {
    const ATOMS: [&str; 3] = ["a", "b", "c"];
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut words_checked = 0usize;
    for i in 0..RANDOM_FORMULAS {
        let width = 1 + i % ATOMS.len();
        let ab = Alphabet::new(&ATOMS[..width]).map_err(|e| e.to_string())?;
        let frag = if i % 2 == 0 { Fragment::CoSafety } else { Fragment::Safety };
        let f = random_formula(&mut rng, &ATOMS[..width], 4, frag);
        let dfa = match frag {
            Fragment::CoSafety => translate_cosafe(&f, &ab),
            _ => translate_safety(&f, &ab),
        }
        .map_err(|e| format!("{f}: {e}"))?;
        for len in 0..=MAX_WORD_LEN {
            for w in words(&ab, len) {
                let expected = match frag {
                    Fragment::CoSafety => good_prefix(&f, &w, &ab),
                    _ => bad_prefix(&f, &w, &ab),
                };
                let got = dfa.accepts(&w).map_err(|e| e.to_string())?;
                ensure(got == expected, || format!("{f} on {w:?}: automaton {got}, semantics {expected}"))?;
                words_checked += 1;
            }
        }
    }
    let elapsed = t.elapsed();
    ensure(elapsed <= FORMULAS_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!("{RANDOM_FORMULAS} formulas, {words_checked} words"))
}

fn intersection_scale() -> Verdict {
    let t = Instant::now();
    let cs = compile(&gen_intersection()).map_err(|e| e.to_string())?;
    let (slp, sol) = synthesize(&cs.product, &cs.synthesis_config(), &Simplex::default()).map_err(|e| e.to_string())?;
    let elapsed = t.elapsed();
    ensure(slp.num_pairs() == INTERSECTION_COLUMNS, || format!("{} columns", slp.num_pairs()))?;
    ensure(sol.status == LpStatus::Optimal, || format!("status {:?}", sol.status))?;
    ensure(elapsed <= INTERSECTION_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!("{} columns, optimal in {} ms", slp.num_pairs(), elapsed.as_millis()))
}

/// Per threshold: the smallest distance to the crosswalk's near edge while
/// the pedestrian is present and the car has not passed the crosswalk, and
/// whether the car moved into the crosswalk while the pedestrian was there.
fn pedestrian_clearance() -> Verdict {
    const NEAR_EDGE: f64 = 7.0 * 4.0;
    const FAR_EDGE: f64 = 9.0 * 4.0;
    let mut results = Vec::new();
    for &r_th in &PEDESTRIAN_THRESHOLDS {
        let mut c = gen_pedestrian();
        c.synthesis.r_th = Some(r_th);
        let cs = compile(&c).map_err(|e| e.to_string())?;
        let sol = solve_scenario(&cs)?;
        let pol = extract_policy(&sol, &cs.product).map_err(|e| e.to_string())?;
        let tr = cs.simulate(&pol, &cs.sim_options(PEDESTRIAN_STEPS, 0, true)).map_err(|e| e.to_string())?;
        let p = cs.alphabet.index_of("p").ok_or("no p")?;
        let cw = cs.alphabet.index_of("c").ok_or("no c")?;
        let mut clearance = f64::INFINITY;
        let mut entered = false;
        for (k, row) in tr.rows.iter().enumerate() {
            if row.letter.contains(p) && row.state.px < FAR_EDGE {
                clearance = clearance.min(NEAR_EDGE - row.state.px);
            }
            if row.letter.contains(p) && !row.letter.contains(cw) && tr.rows.get(k + 1).is_some_and(|n| n.letter.contains(cw)) {
                entered = true;
            }
        }
        results.push((r_th, clearance, entered));
    }
    let summary = results
        .iter()
        .map(|(r, c, e)| format!("r_th {r}: {c:.2} m{}", if *e { " enters" } else { "" }))
        .collect::<Vec<_>>()
        .join(", ");
    ensure(results.windows(2).all(|w| w[1].1 <= w[0].1 + CLEARANCE_TOL), || format!("not monotone: {summary}"))?;
    let last = results.last().unwrap();
    ensure(last.2, || format!("r_th {} never enters while p holds: {summary}", last.0))?;
    Ok(summary)
}

fn construction_violations() -> Verdict {
    let mut c = builtin("construction").unwrap();
    c.synthesis.r_th = None;
    let cs = compile(&c).map_err(|e| e.to_string())?;
    let cfg = cs.synthesis_config();
    let sol = solve_scenario(&cs)?;
    let inflow = state_inflow(&sol, &cs.product, &cfg).map_err(|e| e.to_string())?;
    let o = cs.alphabet.index_of("o").ok_or("no o")?;
    let (mut on_o, mut all) = (0.0, 0.0);
    for z in cs.product.violations() {
        all += inflow[z];
        if cs.product.states[z].entry.is_some_and(|l| l.contains(o)) {
            on_o += inflow[z];
        }
    }
    ensure(all > 0.0, || "no violation inflow".into())?;
    let share = on_o / all;
    ensure(share > VIOLATION_SHARE_ON_O, || format!("share on o {share:.4}"))?;
    Ok(format!("share of violation inflow on o {share:.4}"))
}

fn reach_avoid_field() -> Verdict {
    let base = gen_reach_avoid();
    let mut fields = Vec::new();
    let mut notes = Vec::new();
    for &r_th in &base.synthesis.r_th_grid {
        let mut c = base.clone();
        c.synthesis.r_th = Some(r_th);
        let cs = compile(&c).map_err(|e| e.to_string())?;
        let sol = solve_scenario(&cs)?;
        let field = risk_field(&cs, &sol).map_err(|e| e.to_string())?;
        let share = field.mass_on(&cs.cells_with("o")) / field.total();
        ensure(share < OBSTACLE_SHARE, || format!("r_th {r_th}: obstacle share {share:.4}"))?;
        let targets = cs.cells_with("t");
        let path = field.path_cells(&cs);
        ensure(path.last().is_some_and(|c| targets.contains(c)), || format!("r_th {r_th}: path ends off target"))?;
        // Where the corridor meets the target, it carries the most mass of
        // any free cell bordering the target.
        let obstacles = cs.cells_with("o");
        let border: Vec<usize> = (0..cs.grid.num_cells())
            .filter(|c| !targets.contains(c) && !obstacles.contains(c))
            .filter(|&c| {
                let (x, y) = cs.grid.coords(c);
                targets.iter().any(|&t| {
                    let (tx, ty) = cs.grid.coords(t);
                    x.abs_diff(tx) <= 1 && y.abs_diff(ty) <= 1
                })
            })
            .collect();
        let entry = path[path.len() - 2];
        let best = border.iter().map(|&c| field.values[c]).fold(0.0, f64::max);
        ensure(border.contains(&entry) && field.values[entry] >= best, || {
            format!("r_th {r_th}: corridor enters the target from a cell with {} < {best}", field.values[entry])
        })?;
        notes.push(format!("r_th {r_th}: obstacle share {share:.4}"));
        fields.push(field.values);
    }
    let n = fields[0].len();
    let changed = fields[0].iter().zip(&fields[1]).filter(|(a, b)| (*a - *b).abs() > FIELD_CELL_DIFF).count();
    ensure(changed as f64 >= FIELD_CELLS_CHANGED * n as f64, || format!("only {changed} of {n} cells change"))?;
    Ok(format!("{}, {changed} of {n} cells change, corridors reach the target through the heaviest bordering cell", notes.join(", ")))
}

fn rollouts_agree() -> Verdict {
    let mut notes = Vec::new();
    for (i, cfg) in [gen_construction(), gen_pedestrian(), gen_intersection()].into_iter().enumerate() {
        let cs = compile(&cfg).map_err(|e| e.to_string())?;
        let sol = solve_scenario(&cs)?;
        let pol = extract_policy(&sol, &cs.product).map_err(|e| e.to_string())?;
        let gamma = cs.config.synthesis.gamma;
        let ev = policy_eval(&cs.product, &pol, gamma).map_err(|e| e.to_string())?;
        let st = rollout(&cs.product, &pol, gamma, ROLLOUTS, None, 9 + i as u64).map_err(|e| e.to_string())?;
        let dr = (st.reward_mean - ev.reward).abs();
        let dk = (st.risk_mean - ev.risk).abs();
        // The floor covers the zero-variance case.
        ensure(dr <= ROLLOUT_SIGMAS * st.reward_stderr + 1e-12, || {
            format!("{}: reward {} vs {} (stderr {})", cfg.name, st.reward_mean, ev.reward, st.reward_stderr)
        })?;
        ensure(dk <= ROLLOUT_SIGMAS * st.risk_stderr + 1e-12, || {
            format!("{}: risk {} vs {} (stderr {})", cfg.name, st.risk_mean, ev.risk, st.risk_stderr)
        })?;
        notes.push(format!(
            "{} {:.2}/{:.2} sigma",
            cfg.name,
            dr / st.reward_stderr.max(f64::MIN_POSITIVE),
            dk / st.risk_stderr.max(f64::MIN_POSITIVE)
        ));
    }
    Ok(notes.join(", "))
}

fn run(args: &[&str]) -> Result<(), String> {
    let o = Command::new(env!("CARGO_BIN_EXE_riskplan")).args(args).output().map_err(|e| e.to_string())?;
    ensure(o.status.success(), || format!("riskplan {}: {}", args.join(" "), String::from_utf8_lossy(&o.stderr)))
}

fn same_files(a: &Path, b: &Path, rel: &[&str]) -> Result<usize, String> {
    for r in rel {
        let x = fs::read(a.join(r)).map_err(|e| format!("{r}: {e}"))?;
        let y = fs::read(b.join(r)).map_err(|e| format!("{r}: {e}"))?;
        ensure(x == y, || format!("{r} differs"))?;
    }
    Ok(rel.len())
}

fn replay_is_identical() -> Verdict {
    let dir = TempDir::new().map_err(|e| e.to_string())?;
    let p = |r: &str| dir.path().join(r).to_string_lossy().into_owned();
    run(&["generate", "pedestrian", "--out", &p("scn")])?;
    let scn = p("scn/pedestrian.toml");
    run(&["synthesize", "--scenario", &scn, "--rth-grid", "1,10", "--dump-product", "--out", &p("syn")])?;
    run(&["simulate", "--policy", &p("syn/rth_10/policy.json"), "--scenario", &scn, "--seed", "7", "--out", &p("sim")])?;
    run(&["replay", &p("syn/manifest.json")])?;
    run(&["replay", &p("sim/manifest.json")])?;
    let syn = dir.path().join("syn");
    let sim = dir.path().join("sim");
    let mut n = same_files(
        &syn,
        &syn.join("replay"),
        &[
            "rth_1/solution.json",
            "rth_1/policy.json",
            "rth_1/problem.lp",
            "rth_10/solution.json",
            "rth_10/policy.json",
            "product.json",
            "cosafe_dfa.json",
            "safety_dfa.json",
        ],
    )?;
    n += same_files(&sim, &sim.join("replay"), &["trajectory.csv"])?;
    Ok(format!("{n} files identical after replay"))
}
