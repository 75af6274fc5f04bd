//! Safety / co-safety LTL: parsing, classification and DFA translation.

mod dfa;
mod formula;
mod normal;
mod parse;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dfa::{
    translate_cosafe, translate_cosafe_capped, translate_safety, translate_safety_capped, Dfa,
    DfaDump, Polarity, DEFAULT_STATE_CAP,
};
pub use formula::{is_atom_name, Atom, Formula};
pub use normal::{classify, nnf, Fragment, Nnf};
pub use parse::parse;

/// Largest alphabet we tabulate transitions for (2^16 letters per state).
pub const MAX_ATOMS: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LtlError {
    #[error("syntax error at offset {position}: found {found}, expected one of {expected:?}")]
    Syntax {
        position: usize,
        expected: Vec<&'static str>,
        found: String,
    },
    #[error("unknown atomic proposition `{atom}` at offset {position}")]
    UnknownAtom { atom: String, position: usize },
    #[error("invalid atomic proposition name `{0}`")]
    InvalidAtom(String),
    #[error("duplicate atomic proposition `{0}`")]
    DuplicateAtom(String),
    #[error("alphabet has {0} propositions, at most {MAX_ATOMS} are supported")]
    AlphabetTooLarge(usize),
    #[error("formula is {found:?}, expected {expected:?}")]
    Fragment { expected: Fragment, found: Fragment },
    #[error("automaton exceeds {cap} states")]
    StateBlowup { cap: usize },
    #[error("letter {bits:#b} does not fit an alphabet of width {width}")]
    AlphabetMismatch { bits: u64, width: usize },
    #[error("malformed automaton: {0}")]
    MalformedDfa(String),
}

/// Ordered list of atomic propositions; bit `i` of a [`Letter`] is `aps[i]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Alphabet {
    aps: Vec<String>,
}

impl Alphabet {
    pub fn new<S: AsRef<str>>(names: impl IntoIterator<Item = S>) -> Result<Self, LtlError> {
        let mut aps: Vec<String> = Vec::new();
        for n in names {
            let n = n.as_ref();
            if !is_atom_name(n) {
                return Err(LtlError::InvalidAtom(n.to_string()));
            }
            if aps.iter().any(|a| a == n) {
                return Err(LtlError::DuplicateAtom(n.to_string()));
            }
            aps.push(n.to_string());
        }
        if aps.len() > MAX_ATOMS {
            return Err(LtlError::AlphabetTooLarge(aps.len()));
        }
        Ok(Alphabet { aps })
    }

    pub fn width(&self) -> usize {
        self.aps.len()
    }

    pub fn num_letters(&self) -> usize {
        1 << self.aps.len()
    }

    pub fn names(&self) -> &[String] {
        &self.aps
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.aps.iter().position(|a| a == name)
    }

    /// Letter with exactly the named propositions set.
    pub fn letter<S: AsRef<str>>(&self, names: &[S]) -> Result<Letter, LtlError> {
        let mut bits = 0u64;
        for n in names {
            let n = n.as_ref();
            let i = self.index_of(n).ok_or_else(|| LtlError::UnknownAtom {
                atom: n.to_string(),
                position: 0,
            })?;
            bits |= 1 << i;
        }
        Ok(Letter(bits))
    }

    pub fn names_of(&self, letter: Letter) -> Vec<&str> {
        (0..self.width())
            .filter(|&i| letter.contains(i))
            .map(|i| self.aps[i].as_str())
            .collect()
    }

    /// `{a,b}` style rendering.
    pub fn render(&self, letter: Letter) -> String {
        format!("{{{}}}", self.names_of(letter).join(","))
    }

    pub fn check(&self, letter: Letter) -> Result<(), LtlError> {
        if letter.bits() >> self.width() != 0 {
            return Err(LtlError::AlphabetMismatch {
                bits: letter.bits(),
                width: self.width(),
            });
        }
        Ok(())
    }

    pub fn all_letters(&self) -> impl Iterator<Item = Letter> {
        (0..self.num_letters() as u64).map(Letter)
    }
}

impl TryFrom<Vec<String>> for Alphabet {
    type Error = LtlError;
    fn try_from(v: Vec<String>) -> Result<Self, LtlError> {
        Alphabet::new(v)
    }
}

impl From<Alphabet> for Vec<String> {
    fn from(a: Alphabet) -> Self {
        a.aps
    }
}

/// A set of atomic propositions, as a bitmask over an [`Alphabet`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Letter(u64);

impl Letter {
    pub const EMPTY: Letter = Letter(0);

    pub fn from_bits(bits: u64) -> Letter {
        Letter(bits)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn contains(self, index: usize) -> bool {
        self.0 >> index & 1 == 1
    }

    pub fn with(self, index: usize) -> Letter {
        Letter(self.0 | 1 << index)
    }

    pub fn union(self, other: Letter) -> Letter {
        Letter(self.0 | other.0)
    }

    pub fn is_subset_of(self, other: Letter) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn count(self) -> u32 {
        self.0.count_ones()
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#b}", self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alphabet_validation() {
        assert!(Alphabet::new(["a", "b_1"]).is_ok());
        assert_eq!(Alphabet::new(["A"]), Err(LtlError::InvalidAtom("A".into())));
        assert_eq!(Alphabet::new(["a", "a"]), Err(LtlError::DuplicateAtom("a".into())));
        assert_eq!(Alphabet::new(["true"]), Err(LtlError::InvalidAtom("true".into())));
        let many: Vec<String> = (0..17).map(|i| format!("p{i}")).collect();
        assert_eq!(Alphabet::new(many), Err(LtlError::AlphabetTooLarge(17)));
    }

    #[test]
    fn letters() {
        let ab = Alphabet::new(["t", "v", "g"]).unwrap();
        let l = ab.letter(&["g", "t"]).unwrap();
        assert_eq!(l.bits(), 0b101);
        assert_eq!(ab.names_of(l), vec!["t", "g"]);
        assert_eq!(ab.render(l), "{t,g}");
        assert!(ab.check(Letter::from_bits(0b1000)).is_err());
        assert!(ab.letter(&["x"]).is_err());
    }
}
