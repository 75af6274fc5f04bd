//! DFA construction by formula progression over canonical residuals.
//!
//! A residual is kept as a monotone DNF over "temporal atoms" (literals,
//! `X φ` and `φ U ψ` subformulas). Cubes are sets of atom ids and the cube
//! set is closed under absorption, so two residuals denote the same DFA
//! state exactly when their DNFs are equal. `true` is the single cube `{}`,
//! `false` the empty cube set.

use std::collections::{BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::formula::Formula;
use super::normal::{classify, nnf, Fragment, Nnf};
use super::{Alphabet, Letter, LtlError};

/// Default bound on the number of DFA states.
pub const DEFAULT_STATE_CAP: usize = 100_000;

/// Accepting for co-safety automata, non-accepting for safety automata.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Accepting,
    NonAccepting,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dfa {
    alphabet: Alphabet,
    initial: usize,
    /// Row-major `state * 2^|AP| + letter`.
    delta: Vec<usize>,
    finals: Vec<bool>,
    polarity: Polarity,
    names: Vec<String>,
}

impl Dfa {
    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn num_states(&self) -> usize {
        self.finals.len()
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn polarity(&self) -> Polarity {
        self.polarity
    }

    pub fn is_final(&self, q: usize) -> bool {
        self.finals[q]
    }

    pub fn finals(&self) -> impl Iterator<Item = usize> + '_ {
        self.finals.iter().enumerate().filter(|(_, f)| **f).map(|(q, _)| q)
    }

    /// Residual formula represented by state `q`.
    pub fn state_name(&self, q: usize) -> &str {
        &self.names[q]
    }

    fn letters(&self) -> usize {
        self.alphabet.num_letters()
    }

    pub fn step(&self, q: usize, letter: Letter) -> Result<usize, LtlError> {
        self.alphabet.check(letter)?;
        Ok(self.delta[q * self.letters() + letter.bits() as usize])
    }

    /// Final state reached from the initial state on `word`.
    pub fn run(&self, word: &[Letter]) -> Result<usize, LtlError> {
        word.iter().try_fold(self.initial, |q, &l| self.step(q, l))
    }

    /// True iff the run on `word` ends in a final state.
    pub fn accepts(&self, word: &[Letter]) -> Result<bool, LtlError> {
        Ok(self.finals[self.run(word)?])
    }

    /// Same automaton with the other polarity.
    pub fn with_polarity(mut self, polarity: Polarity) -> Dfa {
        self.polarity = polarity;
        self
    }

    pub fn to_dump(&self) -> DfaDump {
        let n = self.letters();
        let mut transitions = Vec::with_capacity(self.delta.len());
        for q in 0..self.num_states() {
            for l in 0..n {
                transitions.push([q as u64, l as u64, self.delta[q * n + l] as u64]);
            }
        }
        DfaDump {
            schema_version: crate::SCHEMA_VERSION,
            alphabet: self.alphabet.names().to_vec(),
            states: self.names.clone(),
            initial: self.initial,
            r#final: self.finals().collect(),
            polarity: self.polarity,
            transitions,
        }
    }

    pub fn from_dump(dump: &DfaDump) -> Result<Dfa, LtlError> {
        let alphabet = Alphabet::new(dump.alphabet.iter().map(String::as_str))?;
        let n = alphabet.num_letters();
        let states = dump.states.len();
        let bad = |msg: String| LtlError::MalformedDfa(msg);
        if dump.initial >= states {
            return Err(bad(format!("initial state {} out of range", dump.initial)));
        }
        let mut delta = vec![usize::MAX; states * n];
        for &[q, l, next] in &dump.transitions {
            let (q, l, next) = (q as usize, l as usize, next as usize);
            if q >= states || l >= n || next >= states {
                return Err(bad(format!("transition ({q}, {l}, {next}) out of range")));
            }
            delta[q * n + l] = next;
        }
        if delta.contains(&usize::MAX) {
            return Err(bad("transition function is not total".into()));
        }
        let mut finals = vec![false; states];
        for &f in &dump.r#final {
            if f >= states {
                return Err(bad(format!("final state {f} out of range")));
            }
            finals[f] = true;
        }
        Ok(Dfa {
            alphabet,
            initial: dump.initial,
            delta,
            finals,
            polarity: dump.polarity,
            names: dump.states.clone(),
        })
    }
}

/// JSON form of a [`Dfa`]: transitions are `[state, letter-bitmask, next]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DfaDump {
    pub schema_version: u32,
    pub alphabet: Vec<String>,
    pub states: Vec<String>,
    pub initial: usize,
    pub r#final: Vec<usize>,
    pub polarity: Polarity,
    pub transitions: Vec<[u64; 3]>,
}

type Cube = BTreeSet<usize>;
type Dnf = BTreeSet<Cube>;

fn dnf_true() -> Dnf {
    BTreeSet::from([Cube::new()])
}

/// Drops every cube that is a superset of another cube.
fn absorb(d: Dnf) -> Dnf {
    let cubes: Vec<Cube> = d.into_iter().collect();
    let mut keep = Dnf::new();
    'outer: for (i, c) in cubes.iter().enumerate() {
        for (j, other) in cubes.iter().enumerate() {
            if i != j && other.len() < c.len() && other.is_subset(c) {
                continue 'outer;
            }
        }
        keep.insert(c.clone());
    }
    keep
}

fn dnf_or(a: Dnf, b: Dnf) -> Dnf {
    let mut out = a;
    out.extend(b);
    absorb(out)
}

fn dnf_and(a: &Dnf, b: &Dnf) -> Dnf {
    let mut out = Dnf::new();
    for x in a {
        for y in b {
            out.insert(x.union(y).copied().collect());
        }
    }
    absorb(out)
}

struct Progression {
    atoms: Vec<Nnf>,
    ids: HashMap<Nnf, usize>,
    lits: Vec<Option<usize>>,
    cache: HashMap<(usize, u64), Dnf>,
}

impl Progression {
    fn new() -> Self {
        Progression {
            atoms: Vec::new(),
            ids: HashMap::new(),
            lits: Vec::new(),
            cache: HashMap::new(),
        }
    }

    fn intern(&mut self, f: &Nnf, alphabet: &Alphabet) -> usize {
        if let Some(&id) = self.ids.get(f) {
            return id;
        }
        let id = self.atoms.len();
        self.atoms.push(f.clone());
        self.ids.insert(f.clone(), id);
        self.lits.push(match f {
            Nnf::Lit { atom, .. } => alphabet.index_of(atom),
            _ => None,
        });
        id
    }

    fn to_dnf(&mut self, f: &Nnf, alphabet: &Alphabet) -> Dnf {
        match f {
            Nnf::True => dnf_true(),
            Nnf::False => Dnf::new(),
            Nnf::And(parts) => {
                let mut acc = dnf_true();
                for p in parts {
                    let d = self.to_dnf(p, alphabet);
                    acc = dnf_and(&acc, &d);
                }
                acc
            }
            Nnf::Or(parts) => {
                let mut acc = Dnf::new();
                for p in parts {
                    let d = self.to_dnf(p, alphabet);
                    acc = dnf_or(acc, d);
                }
                acc
            }
            Nnf::Lit { .. } | Nnf::Next(_) | Nnf::Until(..) => {
                BTreeSet::from([Cube::from([self.intern(f, alphabet)])])
            }
            Nnf::Release(..) => unreachable!("release outside the co-safe fragment"),
        }
    }

    /// Progression of a structured subformula through one letter.
    fn prog_formula(&mut self, f: &Nnf, letter: Letter, alphabet: &Alphabet) -> Dnf {
        match f {
            Nnf::True => dnf_true(),
            Nnf::False => Dnf::new(),
            Nnf::And(parts) => {
                let mut acc = dnf_true();
                for p in parts {
                    let d = self.prog_formula(p, letter, alphabet);
                    acc = dnf_and(&acc, &d);
                    if acc.is_empty() {
                        break;
                    }
                }
                acc
            }
            Nnf::Or(parts) => {
                let mut acc = Dnf::new();
                for p in parts {
                    let d = self.prog_formula(p, letter, alphabet);
                    acc = dnf_or(acc, d);
                }
                acc
            }
            _ => {
                let id = self.intern(f, alphabet);
                self.prog_atom(id, letter, alphabet)
            }
        }
    }

    fn prog_atom(&mut self, id: usize, letter: Letter, alphabet: &Alphabet) -> Dnf {
        if let Some(d) = self.cache.get(&(id, letter.bits())) {
            return d.clone();
        }
        let atom = self.atoms[id].clone();
        let d = match &atom {
            Nnf::Lit { positive, .. } => {
                let holds = self.lits[id].is_some_and(|bit| letter.contains(bit));
                if holds == *positive {
                    dnf_true()
                } else {
                    Dnf::new()
                }
            }
            Nnf::Next(inner) => self.to_dnf(inner, alphabet),
            Nnf::Until(lhs, rhs) => {
                let now = self.prog_formula(rhs, letter, alphabet);
                let hold = self.prog_formula(lhs, letter, alphabet);
                let again = dnf_and(&hold, &BTreeSet::from([Cube::from([id])]));
                dnf_or(now, again)
            }
            _ => unreachable!("not a temporal atom"),
        };
        self.cache.insert((id, letter.bits()), d.clone());
        d
    }

    fn step(&mut self, state: &Dnf, letter: Letter, alphabet: &Alphabet) -> Dnf {
        let mut out = Dnf::new();
        for cube in state {
            let mut acc = dnf_true();
            for &id in cube {
                let d = self.prog_atom(id, letter, alphabet);
                acc = dnf_and(&acc, &d);
                if acc.is_empty() {
                    break;
                }
            }
            out = dnf_or(out, acc);
        }
        out
    }

    fn render(&self, d: &Dnf) -> String {
        if d.is_empty() {
            return "false".into();
        }
        let cubes: Vec<String> = d
            .iter()
            .map(|c| {
                if c.is_empty() {
                    "true".to_string()
                } else {
                    c.iter()
                        .map(|&id| format!("({})", self.atoms[id]))
                        .collect::<Vec<_>>()
                        .join(" & ")
                }
            })
            .collect();
        cubes.join(" | ")
    }
}

fn build(root: &Nnf, alphabet: &Alphabet, cap: usize, polarity: Polarity) -> Result<Dfa, LtlError> {
    let letters = alphabet.num_letters();
    let mut prog = Progression::new();
    let init = prog.to_dnf(root, alphabet);
    let mut index: HashMap<Dnf, usize> = HashMap::new();
    let mut states: Vec<Dnf> = Vec::new();
    let mut queue = VecDeque::new();
    index.insert(init.clone(), 0);
    states.push(init);
    queue.push_back(0);
    let mut delta: Vec<usize> = Vec::new();
    while let Some(q) = queue.pop_front() {
        // BFS order means rows are appended in state order.
        debug_assert_eq!(delta.len(), q * letters);
        let current = states[q].clone();
        for l in 0..letters {
            let next = prog.step(&current, Letter::from_bits(l as u64), alphabet);
            let id = match index.get(&next) {
                Some(&id) => id,
                None => {
                    let id = states.len();
                    if id >= cap {
                        return Err(LtlError::StateBlowup { cap });
                    }
                    index.insert(next.clone(), id);
                    states.push(next);
                    queue.push_back(id);
                    id
                }
            };
            delta.push(id);
        }
    }
    let truth = dnf_true();
    Ok(Dfa {
        alphabet: alphabet.clone(),
        initial: 0,
        delta,
        finals: states.iter().map(|s| *s == truth).collect(),
        polarity,
        names: states.iter().map(|s| prog.render(s)).collect(),
    })
}

fn check_atoms(f: &Formula, alphabet: &Alphabet) -> Result<(), LtlError> {
    for a in f.atoms() {
        if alphabet.index_of(a.as_str()).is_none() {
            return Err(LtlError::UnknownAtom {
                atom: a.as_str().to_string(),
                position: 0,
            });
        }
    }
    Ok(())
}

/// DFA whose final (accepting, sink) state is reached exactly on the good
/// prefixes of a co-safety formula.
pub fn translate_cosafe(f: &Formula, alphabet: &Alphabet) -> Result<Dfa, LtlError> {
    translate_cosafe_capped(f, alphabet, DEFAULT_STATE_CAP)
}

pub fn translate_cosafe_capped(f: &Formula, alphabet: &Alphabet, cap: usize) -> Result<Dfa, LtlError> {
    check_atoms(f, alphabet)?;
    let n = nnf(f, false);
    if !n.is_cosafe() {
        return Err(LtlError::Fragment {
            expected: Fragment::CoSafety,
            found: classify(f),
        });
    }
    build(&n, alphabet, cap, Polarity::Accepting)
}

/// DFA whose final (non-accepting, sink) state is reached exactly on the
/// bad prefixes of a safety formula.
pub fn translate_safety(f: &Formula, alphabet: &Alphabet) -> Result<Dfa, LtlError> {
    translate_safety_capped(f, alphabet, DEFAULT_STATE_CAP)
}

pub fn translate_safety_capped(f: &Formula, alphabet: &Alphabet, cap: usize) -> Result<Dfa, LtlError> {
    check_atoms(f, alphabet)?;
    let n = nnf(f, true);
    if !n.is_cosafe() {
        return Err(LtlError::Fragment {
            expected: Fragment::Safety,
            found: classify(f),
        });
    }
    build(&n, alphabet, cap, Polarity::NonAccepting)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ltl::parse;

    fn setup(names: &[&str]) -> Alphabet {
        Alphabet::new(names.iter().copied()).unwrap()
    }

    fn word(ab: &Alphabet, letters: &[&[&str]]) -> Vec<Letter> {
        letters.iter().map(|l| ab.letter(l).unwrap()).collect()
    }

    #[test]
    fn eventually_target_has_two_states() {
        let ab = setup(&["t"]);
        let d = translate_cosafe(&parse("F t", &ab).unwrap(), &ab).unwrap();
        assert_eq!(d.num_states(), 2);
        assert_eq!(d.polarity(), Polarity::Accepting);
        let t = ab.letter(&["t"]).unwrap();
        let empty = Letter::EMPTY;
        let fin = d.step(d.initial(), t).unwrap();
        assert!(d.is_final(fin));
        assert_eq!(d.step(d.initial(), empty).unwrap(), d.initial());
        assert_eq!(d.step(fin, empty).unwrap(), fin);
        assert!(d.accepts(&word(&ab, &[&[], &["t"]])).unwrap());
        assert!(!d.accepts(&word(&ab, &[&[], &[]])).unwrap());
    }

    #[test]
    fn true_is_a_single_final_state() {
        let ab = setup(&["a"]);
        let d = translate_cosafe(&Formula::True, &ab).unwrap();
        assert_eq!(d.num_states(), 1);
        assert!(d.is_final(d.initial()));
        assert!(d.accepts(&[]).unwrap());
    }

    #[test]
    fn until_examples() {
        let ab = setup(&["a", "b"]);
        let d = translate_cosafe(&parse("a U b", &ab).unwrap(), &ab).unwrap();
        assert!(d.accepts(&word(&ab, &[&["a"], &["a"], &["b"]])).unwrap());
        assert!(!d.accepts(&word(&ab, &[&[], &["b"]])).unwrap());
    }

    #[test]
    fn safety_examples() {
        let ab = setup(&["n", "g", "i"]);
        let d = translate_safety(&parse("G !n", &ab).unwrap(), &ab).unwrap();
        assert_eq!(d.num_states(), 2);
        assert_eq!(d.polarity(), Polarity::NonAccepting);
        assert!(d.accepts(&word(&ab, &[&["n"]])).unwrap());
        assert!(!d.accepts(&word(&ab, &[&["g"], &["i", "g"]])).unwrap());

        let light = translate_safety(&parse("G(!g -> !i)", &ab).unwrap(), &ab).unwrap();
        assert!(light.accepts(&word(&ab, &[&[], &["i"]])).unwrap());
        assert!(!light.accepts(&word(&ab, &[&["g", "i"], &["g"]])).unwrap());

        let never = translate_safety(&parse("G true", &ab).unwrap(), &ab).unwrap();
        assert_eq!(never.num_states(), 1);
        assert_eq!(never.finals().count(), 0);
    }

    #[test]
    fn wrong_fragment_is_rejected() {
        let ab = setup(&["a"]);
        assert!(matches!(
            translate_cosafe(&parse("G a", &ab).unwrap(), &ab),
            Err(LtlError::Fragment { .. })
        ));
        assert!(matches!(
            translate_safety(&parse("F a", &ab).unwrap(), &ab),
            Err(LtlError::Fragment { .. })
        ));
    }

    #[test]
    fn state_cap_is_enforced() {
        let ab = setup(&["a", "b"]);
        let f = parse("X X X a", &ab).unwrap();
        assert!(matches!(
            translate_cosafe_capped(&f, &ab, 2),
            Err(LtlError::StateBlowup { cap: 2 })
        ));
    }

    #[test]
    fn letter_width_is_checked() {
        let ab = setup(&["a"]);
        let d = translate_cosafe(&parse("F a", &ab).unwrap(), &ab).unwrap();
        assert!(matches!(
            d.accepts(&[Letter::from_bits(0b10)]),
            Err(LtlError::AlphabetMismatch { .. })
        ));
    }

    #[test]
    fn dump_round_trip() {
        let ab = setup(&["a", "b"]);
        let d = translate_cosafe(&parse("a U (b & X a)", &ab).unwrap(), &ab).unwrap();
        let json = serde_json::to_string(&d.to_dump()).unwrap();
        let back = Dfa::from_dump(&serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back, d);
    }
}
