use std::collections::BTreeSet;

use super::{ActionsSpec, ScenarioConfig, ScenarioError};
use crate::ltl::{classify, parse, translate_cosafe, translate_safety, Alphabet, Dfa, Fragment, Letter};
use crate::models::{compose, ComposedMdp, Labeling, Mc, Mdp, Row};
use crate::product::{build_product, violating_letters, CostTable, ProductError, ProductMdp};
use crate::synth::{StochasticPolicy, SynthesisConfig};
use crate::vehicle::{
    king_moves, ActionDef, BicycleParams, GridAbstraction, SimContext, SimOptions, VehicleError, VehicleState,
};

/// A scenario with every derived object built.
#[derive(Debug, Clone)]
pub struct CompiledScenario {
    pub config: ScenarioConfig,
    pub alphabet: Alphabet,
    pub a_cs: Dfa,
    pub a_s: Dfa,
    pub grid: GridAbstraction,
    pub vehicle_mdp: Mdp,
    pub env: Mc,
    pub composed: ComposedMdp,
    pub labeling: Labeling,
    pub vehicle_letters: Vec<Letter>,
    pub costs: CostTable,
    pub product: ProductMdp,
    pub bicycle: BicycleParams,
}

fn schema(path: impl Into<String>, message: impl ToString) -> ScenarioError {
    ScenarioError::schema(path, message)
}

fn resolve_actions(spec: &ActionsSpec) -> Result<Vec<ActionDef>, ScenarioError> {
    match spec {
        ActionsSpec::Preset(name) if name == "king" => Ok(king_moves()),
        ActionsSpec::Preset(name) => Err(schema("grid.actions", format!("unknown preset `{name}`"))),
        ActionsSpec::Custom(list) => Ok(list.clone()),
    }
}

fn grid_of(c: &ScenarioConfig) -> Result<GridAbstraction, ScenarioError> {
    let g = &c.grid;
    if g.nx == 0 || g.ny == 0 {
        return Err(schema("grid", "nx and ny must be positive"));
    }
    if !(g.cell_size > 0.0 && g.cell_size.is_finite()) {
        return Err(schema("grid.cell_size", "must be positive"));
    }
    if g.origin.iter().any(|o| !o.is_finite()) {
        return Err(schema("grid.origin", "must be finite"));
    }
    if g.start[0] >= g.nx || g.start[1] >= g.ny {
        return Err(schema("grid.start", "outside the grid"));
    }
    let actions = resolve_actions(&g.actions)?;
    let mut names = BTreeSet::new();
    for (i, a) in actions.iter().enumerate() {
        if !names.insert(a.name.as_str()) {
            return Err(schema(format!("grid.actions[{i}].name"), format!("duplicate action `{}`", a.name)));
        }
    }
    let grid = GridAbstraction {
        origin: g.origin,
        cell_size: g.cell_size,
        nx: g.nx,
        ny: g.ny,
        actions,
    };
    grid.validate().map_err(|e| schema("grid.actions", e))?;
    Ok(grid)
}

fn alphabet_of(c: &ScenarioConfig) -> Result<Alphabet, ScenarioError> {
    if c.labels.ap.is_empty() {
        return Err(schema("labels.ap", "no propositions declared"));
    }
    Alphabet::new(&c.labels.ap).map_err(|e| schema("labels.ap", e))
}

fn vehicle_letters(c: &ScenarioConfig, ab: &Alphabet) -> Result<Vec<Letter>, ScenarioError> {
    let g = &c.grid;
    let mut letters = vec![Letter::EMPTY; g.nx * g.ny];
    for (ap, regions) in &c.labels.cells {
        let bit = ab
            .index_of(ap)
            .ok_or_else(|| schema(format!("labels.cells.{ap}"), "proposition not declared in labels.ap"))?;
        for (k, r) in regions.iter().enumerate() {
            if r.x[0] > r.x[1] || r.y[0] > r.y[1] || r.x[1] >= g.nx || r.y[1] >= g.ny {
                return Err(schema(format!("labels.cells.{ap}[{k}]"), "region is empty or leaves the grid"));
            }
            for iy in r.y[0]..=r.y[1] {
                for ix in r.x[0]..=r.x[1] {
                    let cell = iy * g.nx + ix;
                    letters[cell] = letters[cell].with(bit);
                }
            }
        }
    }
    Ok(letters)
}

fn environment_of(c: &ScenarioConfig, ab: &Alphabet) -> Result<(Mc, Vec<Letter>), ScenarioError> {
    let env = &c.environment;
    if env.states.is_empty() {
        return Err(schema("environment.states", "no states"));
    }
    let mut names = Vec::with_capacity(env.states.len());
    let mut letters = Vec::with_capacity(env.states.len());
    for (i, s) in env.states.iter().enumerate() {
        if names.contains(&s.name) {
            return Err(schema(format!("environment.states[{i}].name"), format!("duplicate state `{}`", s.name)));
        }
        names.push(s.name.clone());
        let letter = ab
            .letter(&s.labels)
            .map_err(|e| schema(format!("environment.states[{i}].labels"), e))?;
        letters.push(letter);
        if let Some(k) = s.occupies.iter().position(|&[x, y]| x >= c.grid.nx || y >= c.grid.ny) {
            return Err(schema(format!("environment.states[{i}].occupies[{k}]"), "cell outside the grid"));
        }
    }
    let index = |name: &str| names.iter().position(|n| n == name);
    let initial = index(&env.initial).ok_or_else(|| schema("environment.initial", format!("unknown state `{}`", env.initial)))?;
    let mut kernel: Vec<Row> = vec![Vec::new(); names.len()];
    for (k, t) in env.transitions.iter().enumerate() {
        let path = |f: &str| format!("environment.transitions[{k}].{f}");
        let from = index(&t.from).ok_or_else(|| schema(path("from"), format!("unknown state `{}`", t.from)))?;
        let to = index(&t.to).ok_or_else(|| schema(path("to"), format!("unknown state `{}`", t.to)))?;
        if !(t.p > 0.0 && t.p <= 1.0) {
            return Err(schema(path("p"), "probability must be in (0, 1]"));
        }
        match kernel[from].iter_mut().find(|e| e.0 == to) {
            Some(e) => e.1 += t.p,
            None => kernel[from].push((to, t.p)),
        }
    }
    for row in &mut kernel {
        row.sort_by_key(|e| e.0);
    }
    let mc = Mc {
        state_names: names,
        initial,
        kernel,
    };
    let report = mc.validate();
    if !report.is_valid() {
        return Err(schema("environment.transitions", format!("{:?}", report.violations[0])));
    }
    Ok((mc, letters))
}

fn formulas_of(c: &ScenarioConfig, ab: &Alphabet) -> Result<(Dfa, Dfa), ScenarioError> {
    let cosafe = parse(&c.spec.cosafe, ab).map_err(|e| schema("spec.cosafe", e))?;
    if classify(&cosafe) != Fragment::CoSafety {
        return Err(schema("spec.cosafe", format!("formula is {:?}, expected CoSafety", classify(&cosafe))));
    }
    let safety = parse(&c.spec.safety, ab).map_err(|e| schema("spec.safety", e))?;
    let a_cs = translate_cosafe(&cosafe, ab).map_err(|e| schema("spec.cosafe", e))?;
    let a_s = translate_safety(&safety, ab).map_err(|e| schema("spec.safety", e))?;
    Ok((a_cs, a_s))
}

fn costs_of(c: &ScenarioConfig, ab: &Alphabet, a_s: &Dfa) -> Result<CostTable, ScenarioError> {
    let table = CostTable::new(ab, &c.costs).map_err(|e| match e {
        ProductError::BadCost { key, reason } => schema(format!("costs.{key}"), reason),
        other => schema("costs", other),
    })?;
    if let Some(&l) = violating_letters(a_s).iter().find(|&&l| table.lookup(l).is_none()) {
        return Err(schema(
            format!("costs.{}", ab.names_of(l).join("&")),
            format!("no cost covers violation letter {}", ab.render(l)),
        ));
    }
    Ok(table)
}

fn check_synthesis(c: &ScenarioConfig) -> Result<(), ScenarioError> {
    let s = &c.synthesis;
    if !(s.gamma > 0.0 && s.gamma < 1.0) {
        return Err(schema("synthesis.gamma", format!("{} is outside the open interval (0, 1)", s.gamma)));
    }
    if let Some(r) = s.r_th {
        if !(r >= 0.0 && r.is_finite()) {
            return Err(schema("synthesis.r_th", "must be finite and non-negative"));
        }
    }
    if !(s.penalty > 0.0 && s.penalty.is_finite()) {
        return Err(schema("synthesis.penalty", "must be positive"));
    }
    if let Some(k) = s.r_th_grid.iter().position(|r| !(*r >= 0.0 && r.is_finite())) {
        return Err(schema(format!("synthesis.r_th_grid[{k}]"), "must be finite and non-negative"));
    }
    Ok(())
}

fn check_vehicle(c: &ScenarioConfig) -> Result<BicycleParams, ScenarioError> {
    let b = c.vehicle.bicycle();
    b.validate().map_err(|e| schema("vehicle", e))?;
    if c.vehicle.substeps == 0 {
        return Err(schema("vehicle.substeps", "must be positive"));
    }
    if !(c.vehicle.heading.is_finite() && c.vehicle.speed.is_finite()) {
        return Err(schema("vehicle", "heading and speed must be finite"));
    }
    c.mpc.validate().map_err(|e| schema("mpc", e))?;
    Ok(b)
}

struct Parts {
    alphabet: Alphabet,
    grid: GridAbstraction,
    vehicle_letters: Vec<Letter>,
    env: Mc,
    env_letters: Vec<Letter>,
    a_cs: Dfa,
    a_s: Dfa,
    costs: CostTable,
    bicycle: BicycleParams,
}

fn check(c: &ScenarioConfig) -> Result<Parts, ScenarioError> {
    if c.schema_version != crate::SCHEMA_VERSION {
        return Err(schema("schema_version", format!("unsupported version {}", c.schema_version)));
    }
    let grid = grid_of(c)?;
    let alphabet = alphabet_of(c)?;
    let vehicle_letters = vehicle_letters(c, &alphabet)?;
    if let Some(ap) = &c.labels.occupancy {
        if alphabet.index_of(ap).is_none() {
            return Err(schema("labels.occupancy", format!("proposition `{ap}` not declared in labels.ap")));
        }
    }
    let (env, env_letters) = environment_of(c, &alphabet)?;
    let (a_cs, a_s) = formulas_of(c, &alphabet)?;
    let costs = costs_of(c, &alphabet, &a_s)?;
    check_synthesis(c)?;
    let bicycle = check_vehicle(c)?;
    Ok(Parts {
        alphabet,
        grid,
        vehicle_letters,
        env,
        env_letters,
        a_cs,
        a_s,
        costs,
        bicycle,
    })
}

/// Semantic checks beyond the file schema.
pub fn validate(c: &ScenarioConfig) -> Result<(), ScenarioError> {
    check(c).map(|_| ())
}

/// Automata, models, labeling and product of a scenario.
pub fn compile(config: &ScenarioConfig) -> Result<CompiledScenario, ScenarioError> {
    let parts = check(config)?;
    let start = parts.grid.index(config.grid.start[0], config.grid.start[1]);
    let vehicle_mdp = parts.grid.abstract_mdp(start)?;
    let composed = compose(&vehicle_mdp, &parts.env)?;
    let occupancy = config.labels.occupancy.as_ref().and_then(|ap| parts.alphabet.index_of(ap));
    let letters = (0..composed.mdp.num_states())
        .map(|s| {
            let (sv, se) = composed.pair(s);
            let mut l = parts.vehicle_letters[sv].union(parts.env_letters[se]);
            if let Some(bit) = occupancy {
                let (ix, iy) = parts.grid.coords(sv);
                if config.environment.states[se].occupies.contains(&[ix, iy]) {
                    l = l.with(bit);
                }
            }
            l
        })
        .collect();
    let labeling = Labeling {
        alphabet: parts.alphabet.clone(),
        letters,
    };
    let product = build_product(&composed, &labeling, &parts.a_cs, &parts.a_s, &parts.costs, config.spec.tie_break)?;
    log::info!(
        "scenario `{}`: {} composed states, {} product states",
        config.name,
        composed.mdp.num_states(),
        product.num_states()
    );
    Ok(CompiledScenario {
        config: config.clone(),
        alphabet: parts.alphabet,
        a_cs: parts.a_cs,
        a_s: parts.a_s,
        grid: parts.grid,
        vehicle_mdp,
        env: parts.env,
        composed,
        labeling,
        vehicle_letters: parts.vehicle_letters,
        costs: parts.costs,
        product,
        bicycle: parts.bicycle,
    })
}

impl CompiledScenario {
    pub fn synthesis_config(&self) -> SynthesisConfig {
        let s = &self.config.synthesis;
        SynthesisConfig {
            relaxed: s.relaxed,
            penalty: s.penalty,
            ..SynthesisConfig::new(s.gamma, s.r_th)
        }
    }

    /// Start cell centre with the configured heading and speed.
    pub fn start_state(&self) -> VehicleState {
        let (x, y) = self.grid.center(self.vehicle_mdp.initial);
        VehicleState::new(x, y, self.config.vehicle.heading, self.config.vehicle.speed)
    }

    pub fn sim_options(&self, steps: usize, seed: u64, zero_noise: bool) -> SimOptions {
        SimOptions {
            steps,
            substeps: self.config.vehicle.substeps,
            seed,
            zero_noise,
            start: self.start_state(),
        }
    }

    pub fn sim_context<'a>(&'a self, policy: &'a StochasticPolicy) -> SimContext<'a> {
        SimContext {
            grid: &self.grid,
            env: &self.env,
            composed: &self.composed,
            labeling: &self.labeling,
            a_cs: &self.a_cs,
            a_s: &self.a_s,
            tie: self.config.spec.tie_break,
            product: &self.product,
            policy,
            bicycle: &self.bicycle,
            mpc: &self.config.mpc,
        }
    }

    /// Cells carrying proposition `ap`.
    pub fn cells_with(&self, ap: &str) -> Vec<usize> {
        match self.alphabet.index_of(ap) {
            Some(bit) => (0..self.grid.num_cells()).filter(|&c| self.vehicle_letters[c].contains(bit)).collect(),
            None => Vec::new(),
        }
    }

    pub fn simulate(
        &self,
        policy: &StochasticPolicy,
        opts: &SimOptions,
    ) -> Result<crate::vehicle::Trajectory, VehicleError> {
        crate::vehicle::simulate(&self.sim_context(policy), opts)
    }
}
