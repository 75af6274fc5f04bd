use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde_json::json;

use riskplan_core::lp::{solver_from_spec, write_lp, LpStatus};
use riskplan_core::oracles::{policy_eval, rollout};
use riskplan_core::scenarios::{
    builtin, compile, from_str, risk_field, to_string, validate, write_risk_field_csv, CompiledScenario, Format,
    ScenarioConfig, BUILTIN_NAMES,
};
use riskplan_core::synth::{
    extract_policy, policy_entries, policy_from_entries, synthesize, OccupationSolution, SolutionDump,
    StochasticPolicy, SynthesisConfig,
};
use riskplan_core::vehicle::write_csv;
use riskplan_core::SCHEMA_VERSION;

use crate::args::{
    Command, EvaluateArgs, ExportArgs, FileFormat, GenerateArgs, ReplayArgs, SimulateArgs, SynthesizeArgs,
};
use crate::error::{CliError, Stage, StageExt};
use crate::files::{
    read, read_json, sha256_hex, to_json, write_atomic, Metrics, Outputs, Pair, PolicyFile, RolloutReport,
    RunManifest, ScenarioRef, SolutionFile, MANIFEST,
};

/// How a successful command ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Done,
    /// At least one threshold admits no policy.
    Infeasible,
}

impl Outcome {
    pub fn exit_code(self) -> u8 {
        match self {
            Outcome::Done => 0,
            Outcome::Infeasible => 2,
        }
    }
}

pub fn run(cmd: &Command) -> Result<Outcome, CliError> {
    let cmd = absolute(cmd)?;
    match &cmd {
        Command::Synthesize(a) => cmd_synthesize(&cmd, a),
        Command::Evaluate(a) => cmd_evaluate(&cmd, a),
        Command::Simulate(a) => cmd_simulate(&cmd, a),
        Command::ExportRiskField(a) => cmd_export_risk_field(&cmd, a),
        Command::Generate(a) => cmd_generate(&cmd, a),
        Command::Replay(a) => cmd_replay(a),
    }
}

fn abs(p: &Path) -> Result<PathBuf, CliError> {
    std::path::absolute(p).map_err(|e| CliError::io(p, e))
}

/// Inputs and outputs as absolute paths, so a manifest can be replayed from
/// any working directory.
fn absolute(cmd: &Command) -> Result<Command, CliError> {
    let mut c = cmd.clone();
    match &mut c {
        Command::Synthesize(a) => {
            a.scenario = abs(&a.scenario)?;
            a.out = abs(&a.out)?;
        }
        Command::Evaluate(a) => {
            a.policy = abs(&a.policy)?;
            a.scenario = abs(&a.scenario)?;
            a.out = a.out.as_deref().map(abs).transpose()?;
        }
        Command::Simulate(a) => {
            a.policy = abs(&a.policy)?;
            a.scenario = abs(&a.scenario)?;
            a.out = abs(&a.out)?;
        }
        Command::ExportRiskField(a) => {
            a.solution = abs(&a.solution)?;
            a.scenario = abs(&a.scenario)?;
            a.out = abs(&a.out)?;
        }
        Command::Generate(a) => a.out = abs(&a.out)?,
        Command::Replay(a) => {
            a.manifest = abs(&a.manifest)?;
            a.out = a.out.as_deref().map(abs).transpose()?;
        }
    }
    Ok(c)
}

struct Timer {
    timings: BTreeMap<String, f64>,
}

impl Timer {
    fn new() -> Timer {
        Timer { timings: BTreeMap::new() }
    }

    fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.timings.insert(stage.to_string(), start.elapsed().as_secs_f64() * 1e3);
        out
    }
}

fn load_scenario(path: &Path) -> Result<(ScenarioConfig, ScenarioRef), CliError> {
    let bytes = read(path)?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| CliError::Format {
        path: path.to_path_buf(),
        message: "scenario is not UTF-8".into(),
    })?;
    let config = from_str(&text, Format::of(path)).at(Stage::Load)?;
    let sref = ScenarioRef {
        path: path.to_path_buf(),
        sha256: sha256_hex(&bytes),
    };
    Ok((config, sref))
}

fn check_hash(file: &Path, expected: &str, sref: &ScenarioRef) -> Result<(), CliError> {
    if expected != sref.sha256 {
        return Err(CliError::HashMismatch {
            file: file.to_path_buf(),
            scenario: sref.path.clone(),
            expected: expected.to_string(),
            found: sref.sha256.clone(),
        });
    }
    Ok(())
}

fn finish(out: &Path, outputs: &Outputs, mut manifest: RunManifest, timer: Timer) -> Result<(), CliError> {
    manifest.outputs = outputs.entries();
    manifest.timings_ms = timer.timings;
    outputs.write_all(out)?;
    write_atomic(&out.join(MANIFEST), &to_json(&manifest))
}

fn threshold_dir(r: Option<f64>) -> String {
    match r {
        Some(r) => format!("rth_{r}"),
        None => "rth_inf".into(),
    }
}

fn composed_names(cs: &CompiledScenario) -> Vec<String> {
    (0..cs.composed.mdp.num_states())
        .map(|s| {
            let (v, e) = cs.composed.pair(s);
            format!("{}|{}", cs.grid.cell_name(v), cs.env.state_names[e])
        })
        .collect()
}

struct Solved {
    r_th: Option<f64>,
    cfg: SynthesisConfig,
    lp_text: Option<String>,
    sol: OccupationSolution,
    policy: Option<StochasticPolicy>,
    millis: f64,
}

fn solve_one(cs: &CompiledScenario, cfg: SynthesisConfig, spec: &str, dump_lp: bool) -> Result<Solved, CliError> {
    let start = Instant::now();
    let solver = solver_from_spec(spec).at(Stage::Synthesize)?;
    let (slp, sol) = synthesize(&cs.product, &cfg, solver.as_ref()).at(Stage::Synthesize)?;
    if sol.status == LpStatus::Unbounded {
        return Err(CliError::Stage {
            stage: Stage::Synthesize,
            source: "the LP is unbounded, which a valid product cannot produce".into(),
        });
    }
    let policy = match sol.status {
        LpStatus::Optimal => Some(extract_policy(&sol, &cs.product).at(Stage::Synthesize)?),
        _ => None,
    };
    Ok(Solved {
        r_th: cfg.r_th,
        lp_text: dump_lp.then(|| write_lp(&slp.lp)),
        cfg,
        sol,
        policy,
        millis: start.elapsed().as_secs_f64() * 1e3,
    })
}

pub fn cmd_synthesize(cmd: &Command, a: &SynthesizeArgs) -> Result<Outcome, CliError> {
    let mut timer = Timer::new();
    let (mut config, sref) = timer.time("load", || load_scenario(&a.scenario))?;
    let mut overrides = BTreeMap::new();
    if let Some(g) = a.gamma {
        config.synthesis.gamma = g;
        overrides.insert("gamma".to_string(), json!(g));
    }
    if let Some(r) = a.rth {
        config.synthesis.r_th = Some(r);
        overrides.insert("r_th".to_string(), json!(r));
    }
    if !a.rth_grid.is_empty() {
        config.synthesis.r_th_grid = a.rth_grid.clone();
        overrides.insert("r_th_grid".to_string(), json!(a.rth_grid));
    }
    if a.relaxed {
        config.synthesis.relaxed = true;
        overrides.insert("relaxed".to_string(), json!(true));
    }
    if a.solver != "builtin" {
        overrides.insert("solver".to_string(), json!(a.solver));
    }
    validate(&config).at(Stage::Load)?;
    let thresholds: Vec<Option<f64>> = if !a.rth_grid.is_empty() || a.scenario_grid {
        if config.synthesis.r_th_grid.is_empty() {
            return Err(CliError::Usage("the scenario bundles no threshold grid".into()));
        }
        config.synthesis.r_th_grid.iter().map(|&r| Some(r)).collect()
    } else {
        vec![config.synthesis.r_th]
    };
    let batch = thresholds.len() > 1 || !a.rth_grid.is_empty() || a.scenario_grid;

    let cs = timer.time("compile", || compile(&config)).at(Stage::Compile)?;
    log::info!(
        "product: {} states, {} decision variables",
        cs.product.num_states(),
        cs.product.num_pairs()
    );
    let base = cs.synthesis_config();
    let solved: Vec<Solved> = thresholds
        .par_iter()
        .map(|&r| {
            let cfg = SynthesisConfig { r_th: r, ..base.clone() };
            solve_one(&cs, cfg, &a.solver, a.dump_product)
        })
        .collect::<Result<_, _>>()?;

    let mut outputs = Outputs::default();
    if a.dump_product {
        let names = composed_names(&cs);
        outputs.add("product.json", to_json(&cs.product.to_dump(Some(&names))));
        outputs.add("cosafe_dfa.json", to_json(&cs.a_cs.to_dump()));
        outputs.add("safety_dfa.json", to_json(&cs.a_s.to_dump()));
    }
    let mut outcome = Outcome::Done;
    for s in &solved {
        let dir = if batch { PathBuf::from(threshold_dir(s.r_th)) } else { PathBuf::new() };
        timer.timings.insert(format!("solve[{}]", threshold_dir(s.r_th)), s.millis);
        let dump = SolutionDump::new(&s.sol, s.policy.as_ref(), &cs.product, &s.cfg);
        let file = SolutionFile {
            scenario_sha256: sref.sha256.clone(),
            solution: dump,
        };
        outputs.add(dir.join("solution.json"), to_json(&file));
        if let Some(text) = &s.lp_text {
            outputs.add(dir.join("problem.lp"), text.clone().into_bytes());
        }
        let shown = s.r_th.map_or("inf".to_string(), |r| r.to_string());
        match &s.policy {
            Some(pol) => {
                let pf = PolicyFile {
                    schema_version: SCHEMA_VERSION,
                    scenario_sha256: sref.sha256.clone(),
                    gamma: s.cfg.gamma,
                    r_th: s.r_th,
                    relaxed: s.cfg.relaxed,
                    objective: s.sol.objective,
                    risk: s.sol.risk,
                    actions: cs.product.action_names.clone(),
                    num_states: cs.product.num_states(),
                    policy: policy_entries(pol),
                };
                outputs.add(dir.join("policy.json"), to_json(&pf));
                let slack = s.sol.slack.map(|v| format!(", slack {v:.6}")).unwrap_or_default();
                println!(
                    "r_th = {shown}: optimal, objective {:.6}, risk {:.6}{slack}",
                    s.sol.objective, s.sol.risk
                );
            }
            None => {
                outcome = Outcome::Infeasible;
                println!("r_th = {shown}: infeasible");
                eprintln!(
                    "no policy keeps the risk under r_th = {shown}; rerun with --relaxed to get the \
                     minimal-violation policy instead"
                );
            }
        }
    }

    let mut manifest = RunManifest::new(cmd.clone(), Some(sref));
    manifest.overrides = overrides;
    finish(&a.out, &outputs, manifest, timer)?;
    Ok(outcome)
}

/// Compiled scenario and the policy file checked against it.
fn load_policy(policy: &Path, scenario: &Path, timer: &mut Timer) -> Result<(CompiledScenario, PolicyFile, StochasticPolicy, ScenarioRef), CliError> {
    let (config, sref) = timer.time("load", || load_scenario(scenario))?;
    let pf: PolicyFile = read_json(policy)?;
    check_hash(policy, &pf.scenario_sha256, &sref)?;
    let cs = timer.time("compile", || compile(&config)).at(Stage::Compile)?;
    if pf.actions != cs.product.action_names || pf.num_states != cs.product.num_states() {
        return Err(CliError::Format {
            path: policy.to_path_buf(),
            message: "policy does not fit the compiled product".into(),
        });
    }
    let pol = policy_from_entries(&pf.policy, &cs.product).at(Stage::Load)?;
    Ok((cs, pf, pol, sref))
}

pub fn cmd_evaluate(cmd: &Command, a: &EvaluateArgs) -> Result<Outcome, CliError> {
    let mut timer = Timer::new();
    let (cs, pf, pol, sref) = load_policy(&a.policy, &a.scenario, &mut timer)?;
    let ev = timer.time("oracle", || policy_eval(&cs.product, &pol, pf.gamma)).at(Stage::Evaluate)?;
    let rollout = if a.rollouts > 0 {
        let r = timer
            .time("rollout", || rollout(&cs.product, &pol, pf.gamma, a.rollouts, None, a.seed))
            .at(Stage::Evaluate)?;
        Some(RolloutReport {
            n: r.n,
            seed: r.seed,
            horizon: r.horizon,
            reward_mean: r.reward_mean,
            reward_stderr: r.reward_stderr,
            risk_mean: r.risk_mean,
            risk_stderr: r.risk_stderr,
        })
    } else {
        None
    };
    let metrics = Metrics {
        schema_version: SCHEMA_VERSION,
        scenario_sha256: sref.sha256.clone(),
        gamma: pf.gamma,
        r_th: pf.r_th,
        lp: Pair {
            reward: pf.objective,
            risk: pf.risk,
        },
        oracle: Pair {
            reward: ev.reward,
            risk: ev.risk,
        },
        abs_diff: Pair {
            reward: (ev.reward - pf.objective).abs(),
            risk: (ev.risk - pf.risk).abs(),
        },
        rollout,
    };
    let bytes = to_json(&metrics);
    match &a.out {
        Some(out) => {
            let mut outputs = Outputs::default();
            outputs.add("metrics.json", bytes);
            let mut manifest = RunManifest::new(cmd.clone(), Some(sref));
            manifest.seed = Some(a.seed);
            finish(out, &outputs, manifest, timer)?;
        }
        None => print!("{}", String::from_utf8(bytes).expect("JSON is UTF-8")),
    }
    Ok(Outcome::Done)
}

pub fn cmd_simulate(cmd: &Command, a: &SimulateArgs) -> Result<Outcome, CliError> {
    let mut timer = Timer::new();
    let (cs, _, pol, sref) = load_policy(&a.policy, &a.scenario, &mut timer)?;
    let steps = a.steps.unwrap_or(cs.config.vehicle.steps);
    let opts = cs.sim_options(steps, a.seed, a.zero_noise);
    let traj = timer.time("simulate", || cs.simulate(&pol, &opts)).at(Stage::Simulate)?;
    let mut csv = Vec::new();
    write_csv(&traj, &mut csv).map_err(|e| CliError::io(&a.out, e))?;
    let mut outputs = Outputs::default();
    outputs.add("trajectory.csv", csv);
    let mut manifest = RunManifest::new(cmd.clone(), Some(sref));
    manifest.seed = Some(a.seed);
    if a.zero_noise {
        manifest.overrides.insert("zero_noise".into(), json!(true));
    }
    finish(&a.out, &outputs, manifest, timer)?;
    println!("{} steps, outcome {:?}", traj.rows.len(), traj.outcome());
    Ok(Outcome::Done)
}

pub fn cmd_export_risk_field(cmd: &Command, a: &ExportArgs) -> Result<Outcome, CliError> {
    let mut timer = Timer::new();
    let (config, sref) = timer.time("load", || load_scenario(&a.scenario))?;
    let sf: SolutionFile = read_json(&a.solution)?;
    check_hash(&a.solution, &sf.scenario_sha256, &sref)?;
    if sf.solution.status != LpStatus::Optimal {
        return Err(CliError::Stage {
            stage: Stage::Export,
            source: format!("the risk field needs an optimal solution, got {}", sf.solution.status).into(),
        });
    }
    let cs = timer.time("compile", || compile(&config)).at(Stage::Compile)?;
    let sol = sf.solution.to_solution(&cs.product).at(Stage::Export)?;
    let field = timer.time("export", || risk_field(&cs, &sol)).at(Stage::Export)?;
    let mut csv = Vec::new();
    write_risk_field_csv(&field, &cs, &mut csv).map_err(|e| CliError::io(&a.out, e))?;
    let mut outputs = Outputs::default();
    outputs.add("risk_field.csv", csv);
    finish(&a.out, &outputs, RunManifest::new(cmd.clone(), Some(sref)), timer)?;
    Ok(Outcome::Done)
}

pub fn cmd_generate(cmd: &Command, a: &GenerateArgs) -> Result<Outcome, CliError> {
    let names: Vec<&str> = if a.name == "all" {
        BUILTIN_NAMES.to_vec()
    } else {
        vec![a.name.as_str()]
    };
    let mut outputs = Outputs::default();
    for name in names {
        let config = builtin(name).ok_or_else(|| {
            CliError::Usage(format!("unknown scenario `{name}`; expected one of {} or all", BUILTIN_NAMES.join(", ")))
        })?;
        let (format, ext) = match a.format {
            FileFormat::Toml => (Format::Toml, "toml"),
            FileFormat::Json => (Format::Json, "json"),
        };
        let mut text = String::new();
        if format == Format::Toml {
            text.push_str(&format!(
                "# Built-in scenario `{name}`. Transition probabilities, costs and geometry are\n\
                 # illustrative defaults, not measured values.\n\n"
            ));
        }
        text.push_str(&to_string(&config, format));
        outputs.add(format!("{name}.{ext}"), text.into_bytes());
    }
    finish(&a.out, &outputs, RunManifest::new(cmd.clone(), None), Timer::new())?;
    Ok(Outcome::Done)
}

pub fn cmd_replay(a: &ReplayArgs) -> Result<Outcome, CliError> {
    let recorded: RunManifest = read_json(&a.manifest)?;
    if matches!(recorded.invocation, Command::Replay(_)) {
        return Err(CliError::Usage("a replay manifest cannot be replayed".into()));
    }
    if let Some(sref) = &recorded.scenario {
        let now = sha256_hex(&read(&sref.path)?);
        if now != sref.sha256 {
            return Err(CliError::HashMismatch {
                file: a.manifest.clone(),
                scenario: sref.path.clone(),
                expected: sref.sha256.clone(),
                found: now,
            });
        }
    }
    let out = match &a.out {
        Some(o) => o.clone(),
        None => a.manifest.parent().unwrap_or(Path::new(".")).join("replay"),
    };
    let outcome = run(&recorded.invocation.with_out(out.clone()))?;
    let fresh: RunManifest = read_json(&out.join(MANIFEST))?;
    if fresh.outputs != recorded.outputs {
        let mut diffs = Vec::new();
        for e in &recorded.outputs {
            match fresh.outputs.iter().find(|f| f.path == e.path) {
                Some(f) if f == e => {}
                Some(_) => diffs.push(format!("{} changed", e.path)),
                None => diffs.push(format!("{} missing", e.path)),
            }
        }
        for f in &fresh.outputs {
            if !recorded.outputs.iter().any(|e| e.path == f.path) {
                diffs.push(format!("{} is new", f.path));
            }
        }
        return Err(CliError::ReplayMismatch(diffs.join(", ")));
    }
    println!("replayed {} outputs into {}; all identical", fresh.outputs.len(), out.display());
    Ok(outcome)
}
