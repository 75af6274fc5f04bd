//! Product of the composed model with the co-safety and safety automata.
//!
//! A product state `(s̄, q_cs, q_s)` carries automaton states that have
//! consumed the labels of every *earlier* composed state; the label of `s̄`
//! itself is consumed on the next step. The initial state is the exception:
//! its automaton coordinates already include one step on `L(s̄0)`.
//!
//! States whose automaton coordinates are final are terminal: the process
//! stops on entry, so each goal or violation is counted once. Violation
//! states also remember the letter that drove the safety automaton into its
//! final state, since that letter (not the label of `s̄`) determines the cost.

use std::collections::{BTreeMap, HashMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ltl::{Alphabet, Dfa, Letter, Polarity};
use crate::models::{label_of, ComposedMdp, Labeling, is_stochastic_sum, ModelError, Row};

#[derive(Debug, Error)]
pub enum ProductError {
    #[error("automata and labeling disagree on the alphabet")]
    AlphabetMismatch,
    #[error("automaton polarity: expected {expected:?}")]
    Polarity { expected: Polarity },
    #[error("no cost entry covers violation letter {letter}")]
    CostMissing { letter: String },
    #[error("invalid cost entry `{key}`: {reason}")]
    BadCost { key: String, reason: String },
    #[error("invalid product: {0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateKind {
    Goal,
    Violation,
    Transient,
}

impl StateKind {
    pub fn is_terminal(self) -> bool {
        self != StateKind::Transient
    }
}

/// Which set wins when one step finalizes both automata.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    #[default]
    Violation,
    Goal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ProductState {
    pub composed: usize,
    pub q_cs: usize,
    pub q_s: usize,
    /// Letter that caused the violation; set only on violation states.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entry: Option<Letter>,
}

/// Violation costs keyed by AP combinations. The cost of a letter is the
/// largest cost among entries whose propositions are all present in it.
#[derive(Debug, Clone, PartialEq)]
pub struct CostTable {
    entries: Vec<(String, Letter, f64)>,
}

impl CostTable {
    /// Keys are `&`-joined AP names such as `c` or `p&c`; costs must be
    /// finite and positive.
    pub fn new(alphabet: &Alphabet, table: &BTreeMap<String, f64>) -> Result<CostTable, ProductError> {
        let mut entries = Vec::new();
        for (key, &cost) in table {
            let bad = |reason: &str| ProductError::BadCost {
                key: key.clone(),
                reason: reason.to_string(),
            };
            if !(cost.is_finite() && cost > 0.0) {
                return Err(bad("cost must be finite and positive"));
            }
            let names: Vec<&str> = key.split('&').map(str::trim).collect();
            if names.iter().any(|n| n.is_empty()) {
                return Err(bad("empty proposition"));
            }
            let letter = alphabet.letter(&names).map_err(|_| bad("unknown proposition"))?;
            entries.push((key.clone(), letter, cost));
        }
        Ok(CostTable { entries })
    }

    pub fn lookup(&self, letter: Letter) -> Option<f64> {
        self.entries
            .iter()
            .filter(|(_, aps, _)| aps.is_subset_of(letter))
            .map(|e| e.2)
            .reduce(f64::max)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, f64)> {
        self.entries.iter().map(|(k, _, c)| (k.as_str(), *c))
    }
}

/// Letters that move some reachable non-final state of `dfa` into a final
/// state, ordered by number of propositions and then by bits.
pub fn violating_letters(dfa: &Dfa) -> Vec<Letter> {
    let ab = dfa.alphabet();
    let mut seen = vec![false; dfa.num_states()];
    let mut stack = vec![dfa.initial()];
    seen[dfa.initial()] = true;
    let mut out = Vec::new();
    while let Some(q) = stack.pop() {
        if dfa.is_final(q) {
            continue;
        }
        for l in ab.all_letters() {
            let r = dfa.step(q, l).expect("letter from own alphabet");
            if dfa.is_final(r) && !out.contains(&l) {
                out.push(l);
            }
            if !seen[r] {
                seen[r] = true;
                stack.push(r);
            }
        }
    }
    out.sort_by_key(|l| (l.count(), l.bits()));
    out
}

/// Product MDP with terminal goal/violation states.
///
/// `kernel[z]` is empty for terminal `z` and has one slot per action
/// otherwise; `cost[z] > 0` exactly on violation states.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductMdp {
    pub states: Vec<ProductState>,
    pub kinds: Vec<StateKind>,
    pub initial: usize,
    pub action_names: Vec<String>,
    pub kernel: Vec<Vec<Option<Row>>>,
    pub cost: Vec<f64>,
}

impl ProductMdp {
    /// Checks every structural invariant; used for hand-built and random
    /// products as well as by `build_product` in debug builds.
    pub fn new(
        states: Vec<ProductState>,
        kinds: Vec<StateKind>,
        initial: usize,
        action_names: Vec<String>,
        kernel: Vec<Vec<Option<Row>>>,
        cost: Vec<f64>,
    ) -> Result<ProductMdp, ProductError> {
        let p = ProductMdp {
            states,
            kinds,
            initial,
            action_names,
            kernel,
            cost,
        };
        p.check()?;
        Ok(p)
    }

    fn check(&self) -> Result<(), ProductError> {
        let n = self.states.len();
        let bad = |m: String| Err(ProductError::Invalid(m));
        if self.kinds.len() != n || self.kernel.len() != n || self.cost.len() != n {
            return bad("per-state vectors differ in length".into());
        }
        if self.initial >= n {
            return bad(format!("initial state {} out of range", self.initial));
        }
        for z in 0..n {
            let kind = self.kinds[z];
            if (kind == StateKind::Violation) != (self.cost[z] > 0.0) || !self.cost[z].is_finite() || self.cost[z] < 0.0 {
                return bad(format!("state {z}: cost {} inconsistent with {kind:?}", self.cost[z]));
            }
            if kind.is_terminal() {
                if !self.kernel[z].is_empty() {
                    return bad(format!("terminal state {z} has outgoing rows"));
                }
                continue;
            }
            if self.kernel[z].len() != self.action_names.len() {
                return bad(format!("state {z} has {} action slots", self.kernel[z].len()));
            }
            if self.kernel[z].iter().all(Option::is_none) {
                return bad(format!("state {z} has no enabled action"));
            }
            for row in self.kernel[z].iter().flatten() {
                let mut sum = 0.0;
                for &(t, p) in row {
                    if t >= n || !(0.0..=1.0).contains(&p) {
                        return bad(format!("state {z}: bad entry ({t}, {p})"));
                    }
                    sum += p;
                }
                if !is_stochastic_sum(sum) {
                    return bad(format!("state {z}: row sums to {sum}"));
                }
            }
        }
        Ok(())
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_actions(&self) -> usize {
        self.action_names.len()
    }

    pub fn kind(&self, z: usize) -> StateKind {
        self.kinds[z]
    }

    pub fn is_terminal(&self, z: usize) -> bool {
        self.kinds[z].is_terminal()
    }

    pub fn row(&self, z: usize, a: usize) -> Option<&Row> {
        self.kernel.get(z)?.get(a)?.as_ref()
    }

    /// Enabled actions of `z`; empty for terminal states.
    pub fn enabled(&self, z: usize) -> impl Iterator<Item = usize> + '_ {
        self.kernel[z]
            .iter()
            .enumerate()
            .filter_map(|(a, r)| r.as_ref().map(|_| a))
    }

    pub fn goals(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_states()).filter(|&z| self.kinds[z] == StateKind::Goal)
    }

    pub fn violations(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_states()).filter(|&z| self.kinds[z] == StateKind::Violation)
    }

    /// Number of `(z, a)` pairs over non-terminal states.
    pub fn num_pairs(&self) -> usize {
        (0..self.num_states()).map(|z| self.enabled(z).count()).sum()
    }

    pub fn to_dump(&self, composed_names: Option<&[String]>) -> ProductDump {
        let mut transitions = Vec::new();
        for z in 0..self.num_states() {
            for a in self.enabled(z) {
                for &(t, p) in self.row(z, a).unwrap() {
                    transitions.push(DumpTransition { from: z, action: a, to: t, p });
                }
            }
        }
        ProductDump {
            schema_version: crate::SCHEMA_VERSION,
            states: self
                .states
                .iter()
                .map(|s| DumpState {
                    composed: s.composed,
                    name: composed_names.map(|n| n[s.composed].clone()),
                    q_cs: s.q_cs,
                    q_s: s.q_s,
                    entry: s.entry,
                })
                .collect(),
            z0: self.initial,
            actions: self.action_names.clone(),
            goal: self.goals().collect(),
            violation: self.violations().collect(),
            cost: self.violations().map(|z| (z, self.cost[z])).collect(),
            transitions,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpState {
    pub composed: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub q_cs: usize,
    pub q_s: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entry: Option<Letter>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpTransition {
    pub from: usize,
    pub action: usize,
    pub to: usize,
    pub p: f64,
}

/// JSON form written by `--dump-product`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductDump {
    pub schema_version: u32,
    pub states: Vec<DumpState>,
    pub z0: usize,
    pub actions: Vec<String>,
    #[serde(rename = "G")]
    pub goal: Vec<usize>,
    #[serde(rename = "D")]
    pub violation: Vec<usize>,
    pub cost: Vec<(usize, f64)>,
    pub transitions: Vec<DumpTransition>,
}

/// Kind of a product state from its automaton coordinates.
pub fn kind_of(a_cs: &Dfa, a_s: &Dfa, q_cs: usize, q_s: usize, tie: TieBreak) -> StateKind {
    match (a_cs.is_final(q_cs), a_s.is_final(q_s)) {
        (true, true) if tie == TieBreak::Goal => StateKind::Goal,
        (_, true) => StateKind::Violation,
        (true, false) => StateKind::Goal,
        (false, false) => StateKind::Transient,
    }
}

pub fn classify_state(p: &ProductMdp, z: usize) -> StateKind {
    p.kinds[z]
}

/// Builds the reachable part of the product.
pub fn build_product(
    c: &ComposedMdp,
    lab: &Labeling,
    a_cs: &Dfa,
    a_s: &Dfa,
    costs: &CostTable,
    tie: TieBreak,
) -> Result<ProductMdp, ProductError> {
    if a_cs.polarity() != Polarity::Accepting {
        return Err(ProductError::Polarity {
            expected: Polarity::Accepting,
        });
    }
    if a_s.polarity() != Polarity::NonAccepting {
        return Err(ProductError::Polarity {
            expected: Polarity::NonAccepting,
        });
    }
    if a_cs.alphabet() != &lab.alphabet || a_s.alphabet() != &lab.alphabet {
        return Err(ProductError::AlphabetMismatch);
    }
    if lab.letters.len() != c.mdp.num_states() {
        return Err(ModelError::MissingLabel(lab.letters.len().min(c.mdp.num_states())).into());
    }

    let mut states: Vec<ProductState> = Vec::new();
    let mut index: HashMap<ProductState, usize> = HashMap::new();
    let mut queue = VecDeque::new();
    let mut intern = |st: ProductState, states: &mut Vec<ProductState>, queue: &mut VecDeque<usize>| {
        *index.entry(st).or_insert_with(|| {
            states.push(st);
            queue.push_back(states.len() - 1);
            states.len() - 1
        })
    };

    let s0 = c.mdp.initial;
    let l0 = label_of(c, lab, s0)?;
    let q_cs0 = a_cs.step(a_cs.initial(), l0).map_err(|_| ProductError::AlphabetMismatch)?;
    let q_s0 = a_s.step(a_s.initial(), l0).map_err(|_| ProductError::AlphabetMismatch)?;
    let k0 = kind_of(a_cs, a_s, q_cs0, q_s0, tie);
    let z0 = ProductState {
        composed: s0,
        q_cs: q_cs0,
        q_s: q_s0,
        entry: (k0 == StateKind::Violation).then_some(l0),
    };
    intern(z0, &mut states, &mut queue);

    let na = c.mdp.num_actions();
    let mut kernel: Vec<Vec<Option<Row>>> = Vec::new();
    let mut kinds = Vec::new();
    while let Some(z) = queue.pop_front() {
        let st = states[z];
        let kind = kind_of(a_cs, a_s, st.q_cs, st.q_s, tie);
        kinds.push(kind);
        if kind.is_terminal() {
            kernel.push(Vec::new());
            continue;
        }
        let letter = lab.letters[st.composed];
        let q_cs = a_cs.step(st.q_cs, letter).map_err(|_| ProductError::AlphabetMismatch)?;
        let q_s = a_s.step(st.q_s, letter).map_err(|_| ProductError::AlphabetMismatch)?;
        let entry = (kind_of(a_cs, a_s, q_cs, q_s, tie) == StateKind::Violation).then_some(letter);
        let mut rows = Vec::with_capacity(na);
        for a in 0..na {
            rows.push(c.mdp.row(st.composed, a).map(|row| {
                row.iter()
                    .map(|&(t, p)| {
                        let succ = ProductState {
                            composed: t,
                            q_cs,
                            q_s,
                            entry,
                        };
                        (intern(succ, &mut states, &mut queue), p)
                    })
                    .collect()
            }));
        }
        kernel.push(rows);
    }

    let mut cost = vec![0.0; states.len()];
    for (z, st) in states.iter().enumerate() {
        if kinds[z] == StateKind::Violation {
            let letter = st.entry.expect("violation states record their entry letter");
            cost[z] = costs.lookup(letter).ok_or_else(|| ProductError::CostMissing {
                letter: lab.alphabet.render(letter),
            })?;
        }
    }
    let p = ProductMdp {
        states,
        kinds,
        initial: 0,
        action_names: c.mdp.action_names.clone(),
        kernel,
        cost,
    };
    debug_assert!(p.check().is_ok());
    Ok(p)
}

/// Drops states unreachable from the initial state, preserving order.
pub fn reachable_prune(p: &ProductMdp) -> ProductMdp {
    let n = p.num_states();
    let mut seen = vec![false; n];
    let mut stack = vec![p.initial];
    seen[p.initial] = true;
    while let Some(z) = stack.pop() {
        for row in p.kernel[z].iter().flatten() {
            for &(t, _) in row {
                if !seen[t] {
                    seen[t] = true;
                    stack.push(t);
                }
            }
        }
    }
    let mut remap = vec![usize::MAX; n];
    let mut next = 0;
    for z in 0..n {
        if seen[z] {
            remap[z] = next;
            next += 1;
        }
    }
    let keep = |z: usize| seen[z];
    ProductMdp {
        states: (0..n).filter(|&z| keep(z)).map(|z| p.states[z]).collect(),
        kinds: (0..n).filter(|&z| keep(z)).map(|z| p.kinds[z]).collect(),
        initial: remap[p.initial],
        action_names: p.action_names.clone(),
        kernel: (0..n)
            .filter(|&z| keep(z))
            .map(|z| {
                p.kernel[z]
                    .iter()
                    .map(|row| row.as_ref().map(|r| r.iter().map(|&(t, q)| (remap[t], q)).collect()))
                    .collect()
            })
            .collect(),
        cost: (0..n).filter(|&z| keep(z)).map(|z| p.cost[z]).collect(),
    }
}
