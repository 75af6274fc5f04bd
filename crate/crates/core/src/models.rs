//! Finite MDPs, Markov chains, labelings and the vehicle x environment
//! composition.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ltl::{Alphabet, Letter, LtlError};

/// Row sums must be within this distance of 1.
pub const STOCHASTIC_TOL: f64 = 1e-9;

/// `|sum - 1| <= STOCHASTIC_TOL`, allowing for rounding in the summation.
pub fn is_stochastic_sum(sum: f64) -> bool {
    (sum - 1.0).abs() <= STOCHASTIC_TOL + 8.0 * f64::EPSILON
}

/// Sparse distribution over successor indices; zero entries are omitted.
pub type Row = Vec<(usize, f64)>;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model:\n{0}")]
    InvalidModel(ValidationReport),
    #[error("state {0} has no label")]
    MissingLabel(usize),
    #[error("unknown state `{0}`")]
    UnknownState(String),
    #[error("unknown action `{0}`")]
    UnknownAction(String),
    #[error("duplicate name `{0}`")]
    DuplicateName(String),
    #[error(transparent)]
    Alphabet(#[from] LtlError),
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Violation {
    RowSum { state: usize, action: Option<usize>, sum: f64 },
    BadProbability { state: usize, action: Option<usize>, successor: usize, p: f64 },
    SuccessorOutOfRange { state: usize, action: Option<usize>, successor: usize },
    NoActions { state: usize },
    InitialOutOfRange { initial: usize },
    ShapeMismatch { detail: String },
}

/// Problems found by `validate`; empty means valid.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn check_row(&mut self, state: usize, action: Option<usize>, row: &Row, n: usize) {
        let mut sum = 0.0;
        for &(succ, p) in row {
            if succ >= n {
                self.violations.push(Violation::SuccessorOutOfRange { state, action, successor: succ });
            }
            if !(0.0..=1.0).contains(&p) || !p.is_finite() {
                self.violations.push(Violation::BadProbability { state, action, successor: succ, p });
            }
            sum += p;
        }
        if !is_stochastic_sum(sum) {
            self.violations.push(Violation::RowSum { state, action, sum });
        }
    }

    pub fn into_result(self) -> Result<(), ModelError> {
        if self.is_valid() {
            Ok(())
        } else {
            Err(ModelError::InvalidModel(self))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "  {v:?}")?;
        }
        Ok(())
    }
}

/// Markov decision process with sparse rows; `kernel[s][a]` is `None` when
/// action `a` is not enabled in `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mdp {
    pub state_names: Vec<String>,
    pub initial: usize,
    pub action_names: Vec<String>,
    pub kernel: Vec<Vec<Option<Row>>>,
}

impl Mdp {
    pub fn num_states(&self) -> usize {
        self.state_names.len()
    }

    pub fn num_actions(&self) -> usize {
        self.action_names.len()
    }

    pub fn row(&self, s: usize, a: usize) -> Option<&Row> {
        self.kernel[s][a].as_ref()
    }

    pub fn enabled(&self, s: usize) -> impl Iterator<Item = usize> + '_ {
        self.kernel[s]
            .iter()
            .enumerate()
            .filter_map(|(a, r)| r.as_ref().map(|_| a))
    }

    pub fn validate(&self) -> ValidationReport {
        let mut rep = ValidationReport::default();
        let n = self.num_states();
        if self.initial >= n {
            rep.violations.push(Violation::InitialOutOfRange { initial: self.initial });
        }
        if self.kernel.len() != n {
            rep.violations.push(Violation::ShapeMismatch {
                detail: format!("{} kernel blocks for {n} states", self.kernel.len()),
            });
            return rep;
        }
        for (s, rows) in self.kernel.iter().enumerate() {
            if rows.len() != self.num_actions() {
                rep.violations.push(Violation::ShapeMismatch {
                    detail: format!("state {s} has {} action slots", rows.len()),
                });
                continue;
            }
            if rows.iter().all(Option::is_none) {
                rep.violations.push(Violation::NoActions { state: s });
            }
            for (a, row) in rows.iter().enumerate() {
                if let Some(row) = row {
                    rep.check_row(s, Some(a), row, n);
                }
            }
        }
        rep
    }
}

/// Finite Markov chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Mc {
    pub state_names: Vec<String>,
    pub initial: usize,
    pub kernel: Vec<Row>,
}

impl Mc {
    pub fn num_states(&self) -> usize {
        self.state_names.len()
    }

    /// A single absorbing state; used for static environments.
    pub fn trivial(name: &str) -> Mc {
        Mc {
            state_names: vec![name.to_string()],
            initial: 0,
            kernel: vec![vec![(0, 1.0)]],
        }
    }

    pub fn validate(&self) -> ValidationReport {
        let mut rep = ValidationReport::default();
        let n = self.num_states();
        if self.initial >= n {
            rep.violations.push(Violation::InitialOutOfRange { initial: self.initial });
        }
        if self.kernel.len() != n {
            rep.violations.push(Violation::ShapeMismatch {
                detail: format!("{} rows for {n} states", self.kernel.len()),
            });
            return rep;
        }
        for (s, row) in self.kernel.iter().enumerate() {
            rep.check_row(s, None, row, n);
        }
        rep
    }
}

/// Composed model `M̄`; state `sv * |S_e| + se` is the pair `(sv, se)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComposedMdp {
    pub mdp: Mdp,
    pub num_vehicle: usize,
    pub num_env: usize,
}

impl ComposedMdp {
    pub fn index(&self, sv: usize, se: usize) -> usize {
        sv * self.num_env + se
    }

    pub fn pair(&self, s: usize) -> (usize, usize) {
        (s / self.num_env, s % self.num_env)
    }
}

/// Synchronous product `T̄ = T_v · T_e`.
pub fn compose(mv: &Mdp, ce: &Mc) -> Result<ComposedMdp, ModelError> {
    mv.validate().into_result()?;
    ce.validate().into_result()?;
    let ne = ce.num_states();
    let mut names = Vec::with_capacity(mv.num_states() * ne);
    let mut kernel = Vec::with_capacity(mv.num_states() * ne);
    for sv in 0..mv.num_states() {
        for se in 0..ne {
            names.push(format!("{}|{}", mv.state_names[sv], ce.state_names[se]));
            let rows = mv.kernel[sv]
                .iter()
                .map(|row| {
                    row.as_ref().map(|row| {
                        let mut out = Row::with_capacity(row.len() * ce.kernel[se].len());
                        for &(tv, pv) in row {
                            for &(te, pe) in &ce.kernel[se] {
                                let p = pv * pe;
                                if p > 0.0 {
                                    out.push((tv * ne + te, p));
                                }
                            }
                        }
                        out
                    })
                })
                .collect();
            kernel.push(rows);
        }
    }
    Ok(ComposedMdp {
        mdp: Mdp {
            state_names: names,
            initial: mv.initial * ne + ce.initial,
            action_names: mv.action_names.clone(),
            kernel,
        },
        num_vehicle: mv.num_states(),
        num_env: ne,
    })
}

/// Letter per composed state over a shared alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct Labeling {
    pub alphabet: Alphabet,
    pub letters: Vec<Letter>,
}

impl Labeling {
    /// Union of per-factor letters: `L(sv, se) = L_v(sv) ∪ L_e(se)`.
    pub fn from_factors(c: &ComposedMdp, alphabet: Alphabet, vehicle: &[Letter], env: &[Letter]) -> Labeling {
        let letters = (0..c.mdp.num_states())
            .map(|s| {
                let (sv, se) = c.pair(s);
                vehicle[sv].union(env[se])
            })
            .collect();
        Labeling { alphabet, letters }
    }
}

/// Letter of composed state `s`.
pub fn label_of(c: &ComposedMdp, lab: &Labeling, s: usize) -> Result<Letter, ModelError> {
    if s >= c.mdp.num_states() {
        return Err(ModelError::MissingLabel(s));
    }
    lab.letters.get(s).copied().ok_or(ModelError::MissingLabel(s))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionEntry {
    pub from: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<String>,
    pub to: String,
    pub p: f64,
}

/// On-disk model: an MDP when `actions` is present, otherwise an MC.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub states: Vec<String>,
    pub initial: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actions: Option<Vec<String>>,
    pub transitions: Vec<TransitionEntry>,
}

fn name_index(names: &[String]) -> Result<BTreeMap<&str, usize>, ModelError> {
    let mut map = BTreeMap::new();
    for (i, n) in names.iter().enumerate() {
        if map.insert(n.as_str(), i).is_some() {
            return Err(ModelError::DuplicateName(n.clone()));
        }
    }
    Ok(map)
}

fn lookup(map: &BTreeMap<&str, usize>, name: &str) -> Result<usize, ModelError> {
    map.get(name).copied().ok_or_else(|| ModelError::UnknownState(name.to_string()))
}

fn push_entry(row: &mut Row, to: usize, p: f64) {
    match row.iter_mut().find(|(t, _)| *t == to) {
        Some(e) => e.1 += p,
        None => row.push((to, p)),
    }
}

impl ModelFile {
    pub fn to_mdp(&self) -> Result<Mdp, ModelError> {
        let states = name_index(&self.states)?;
        let actions_list = self.actions.clone().unwrap_or_default();
        let actions = name_index(&actions_list)?;
        let mut kernel: Vec<Vec<Option<Row>>> = vec![vec![None; actions_list.len()]; self.states.len()];
        for t in &self.transitions {
            let s = lookup(&states, &t.from)?;
            let to = lookup(&states, &t.to)?;
            let name = t.action.as_deref().unwrap_or("");
            let a = *actions
                .get(name)
                .ok_or_else(|| ModelError::UnknownAction(name.to_string()))?;
            push_entry(kernel[s][a].get_or_insert_with(Vec::new), to, t.p);
        }
        for rows in &mut kernel {
            for row in rows.iter_mut().flatten() {
                row.sort_by_key(|e| e.0);
            }
        }
        let m = Mdp {
            state_names: self.states.clone(),
            initial: lookup(&states, &self.initial)?,
            action_names: actions_list,
            kernel,
        };
        m.validate().into_result()?;
        Ok(m)
    }

    pub fn to_mc(&self) -> Result<Mc, ModelError> {
        let states = name_index(&self.states)?;
        let mut kernel: Vec<Row> = vec![Vec::new(); self.states.len()];
        for t in &self.transitions {
            if let Some(a) = &t.action {
                return Err(ModelError::UnknownAction(a.clone()));
            }
            let s = lookup(&states, &t.from)?;
            push_entry(&mut kernel[s], lookup(&states, &t.to)?, t.p);
        }
        for row in &mut kernel {
            row.sort_by_key(|e| e.0);
        }
        let m = Mc {
            state_names: self.states.clone(),
            initial: lookup(&states, &self.initial)?,
            kernel,
        };
        m.validate().into_result()?;
        Ok(m)
    }

    pub fn from_mdp(m: &Mdp) -> ModelFile {
        let mut transitions = Vec::new();
        for (s, rows) in m.kernel.iter().enumerate() {
            for (a, row) in rows.iter().enumerate() {
                for &(t, p) in row.iter().flatten() {
                    transitions.push(TransitionEntry {
                        from: m.state_names[s].clone(),
                        action: Some(m.action_names[a].clone()),
                        to: m.state_names[t].clone(),
                        p,
                    });
                }
            }
        }
        ModelFile {
            states: m.state_names.clone(),
            initial: m.state_names[m.initial].clone(),
            actions: Some(m.action_names.clone()),
            transitions,
        }
    }

    pub fn from_mc(m: &Mc) -> ModelFile {
        let mut transitions = Vec::new();
        for (s, row) in m.kernel.iter().enumerate() {
            for &(t, p) in row {
                transitions.push(TransitionEntry {
                    from: m.state_names[s].clone(),
                    action: None,
                    to: m.state_names[t].clone(),
                    p,
                });
            }
        }
        ModelFile {
            states: m.state_names.clone(),
            initial: m.state_names[m.initial].clone(),
            actions: None,
            transitions,
        }
    }

    pub fn read(path: &Path) -> Result<ModelFile, ModelError> {
        let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| ModelError::Json {
            path: path.display().to_string(),
            source,
        })
    }
}

/// On-disk labeling keyed by state name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelFile {
    pub ap: Vec<String>,
    pub labels: BTreeMap<String, Vec<String>>,
}

impl LabelFile {
    /// Letters for `names`; states absent from the file get the empty letter.
    pub fn letters_for(&self, names: &[String]) -> Result<(Alphabet, Vec<Letter>), ModelError> {
        let alphabet = Alphabet::new(&self.ap)?;
        for key in self.labels.keys() {
            if !names.contains(key) {
                return Err(ModelError::UnknownState(key.clone()));
            }
        }
        let letters = names
            .iter()
            .map(|n| match self.labels.get(n) {
                Some(aps) => alphabet.letter(aps).map_err(ModelError::from),
                None => Ok(Letter::EMPTY),
            })
            .collect::<Result<_, _>>()?;
        Ok((alphabet, letters))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_state_vehicle() -> Mdp {
        Mdp {
            state_names: vec!["v0".into()],
            initial: 0,
            action_names: vec!["a".into()],
            kernel: vec![vec![Some(vec![(0, 1.0)])]],
        }
    }

    fn chain() -> Mc {
        Mc {
            state_names: vec!["e0".into(), "e1".into()],
            initial: 0,
            kernel: vec![vec![(1, 1.0)], vec![(1, 1.0)]],
        }
    }

    #[test]
    fn tolerance_boundary() {
        let mut m = chain();
        m.kernel[0] = vec![(0, 0.5), (1, 0.499999999)];
        assert!(m.validate().is_valid());
        m.kernel[0] = vec![(0, 0.5), (1, 0.4)];
        assert!(matches!(m.validate().violations[..], [Violation::RowSum { state: 0, .. }]));
        m.kernel[0] = vec![(0, 1.1), (1, -0.1)];
        assert!(m
            .validate()
            .violations
            .iter()
            .any(|v| matches!(v, Violation::BadProbability { p, .. } if *p == -0.1)));
    }

    #[test]
    fn degenerate_vehicle_composition() {
        let c = compose(&one_state_vehicle(), &chain()).unwrap();
        assert_eq!(c.mdp.num_states(), 2);
        assert_eq!(c.mdp.initial, 0);
        assert_eq!(c.mdp.row(0, 0).unwrap(), &vec![(1, 1.0)]);
        assert_eq!(c.mdp.state_names[1], "v0|e1");
    }

    #[test]
    fn product_of_rows() {
        let mv = Mdp {
            state_names: vec!["x".into(), "y".into()],
            initial: 0,
            action_names: vec!["go".into()],
            kernel: vec![vec![Some(vec![(0, 0.7), (1, 0.3)])], vec![Some(vec![(1, 1.0)])]],
        };
        let ce = Mc {
            state_names: vec!["e0".into(), "e1".into()],
            initial: 0,
            kernel: vec![vec![(0, 0.5), (1, 0.5)], vec![(1, 1.0)]],
        };
        let c = compose(&mv, &ce).unwrap();
        let row = c.mdp.row(0, 0).unwrap();
        assert_eq!(row, &vec![(0, 0.35), (1, 0.35), (2, 0.15), (3, 0.15)]);
        assert!(c.mdp.validate().is_valid());
    }

    #[test]
    fn sizes_multiply() {
        let cells = 40;
        let mv = Mdp {
            state_names: (0..cells).map(|i| format!("c{i}")).collect(),
            initial: 0,
            action_names: vec!["stay".into()],
            kernel: (0..cells).map(|i| vec![Some(vec![(i, 1.0)])]).collect(),
        };
        let ce = Mc {
            state_names: (0..8).map(|i| format!("e{i}")).collect(),
            initial: 0,
            kernel: (0..8).map(|i| vec![((i + 1) % 8, 1.0)]).collect(),
        };
        assert_eq!(compose(&mv, &ce).unwrap().mdp.num_states(), 320);
    }

    #[test]
    fn labels_union_factors() {
        let c = compose(&one_state_vehicle(), &chain()).unwrap();
        let ab = Alphabet::new(["t", "p"]).unwrap();
        let lab = Labeling::from_factors(
            &c,
            ab.clone(),
            &[ab.letter(&["t"]).unwrap()],
            &[Letter::EMPTY, ab.letter(&["p"]).unwrap()],
        );
        assert_eq!(label_of(&c, &lab, 0).unwrap(), ab.letter(&["t"]).unwrap());
        assert_eq!(label_of(&c, &lab, 1).unwrap(), ab.letter(&["t", "p"]).unwrap());
        assert!(matches!(label_of(&c, &lab, 2), Err(ModelError::MissingLabel(2))));
    }

    #[test]
    fn model_file_round_trip() {
        let text = r#"{"states":["a","b"],"initial":"a","actions":["go"],
            "transitions":[{"from":"a","action":"go","to":"b","p":1.0},
                           {"from":"b","action":"go","to":"b","p":1.0}]}"#;
        let f: ModelFile = serde_json::from_str(text).unwrap();
        let m = f.to_mdp().unwrap();
        assert_eq!(ModelFile::from_mdp(&m), f);
        let mc = ModelFile::from_mc(&chain()).to_mc().unwrap();
        assert_eq!(mc, chain());
        let bad: ModelFile = serde_json::from_str(
            r#"{"states":["a"],"initial":"a","actions":["go"],
                "transitions":[{"from":"a","action":"go","to":"a","p":0.9}]}"#,
        )
        .unwrap();
        assert!(matches!(bad.to_mdp(), Err(ModelError::InvalidModel(_))));
    }

    #[test]
    fn label_file_expansion() {
        let f: LabelFile = serde_json::from_str(r#"{"ap":["t","p"],"labels":{"b":["t"]}}"#).unwrap();
        let (ab, letters) = f.letters_for(&["a".into(), "b".into()]).unwrap();
        assert_eq!(letters, vec![Letter::EMPTY, ab.letter(&["t"]).unwrap()]);
        assert!(f.letters_for(&["a".into()]).is_err());
    }
}
