//! Negation normal form over the core operators and fragment classification.

use std::fmt;

use super::formula::Formula;

/// Negation normal form: negation only on literals, `F`/`G`/`->` rewritten
/// into `U`/`R`. Built through the smart constructors below, which absorb
/// constants and flatten nested conjunctions/disjunctions.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Nnf {
    True,
    False,
    Lit { atom: String, positive: bool },
    And(Vec<Nnf>),
    Or(Vec<Nnf>),
    Next(Box<Nnf>),
    Until(Box<Nnf>, Box<Nnf>),
    Release(Box<Nnf>, Box<Nnf>),
}

impl Nnf {
    pub fn and(parts: impl IntoIterator<Item = Nnf>) -> Nnf {
        let mut out = Vec::new();
        for p in parts {
            match p {
                Nnf::True => {}
                Nnf::False => return Nnf::False,
                Nnf::And(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        out.sort();
        out.dedup();
        match out.len() {
            0 => Nnf::True,
            1 => out.pop().unwrap(),
            _ => Nnf::And(out),
        }
    }

    pub fn or(parts: impl IntoIterator<Item = Nnf>) -> Nnf {
        let mut out = Vec::new();
        for p in parts {
            match p {
                Nnf::False => {}
                Nnf::True => return Nnf::True,
                Nnf::Or(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        out.sort();
        out.dedup();
        match out.len() {
            0 => Nnf::False,
            1 => out.pop().unwrap(),
            _ => Nnf::Or(out),
        }
    }

    pub fn next(f: Nnf) -> Nnf {
        match f {
            Nnf::True => Nnf::True,
            Nnf::False => Nnf::False,
            f => Nnf::Next(Box::new(f)),
        }
    }

    pub fn until(a: Nnf, b: Nnf) -> Nnf {
        match (a, b) {
            (_, Nnf::True) => Nnf::True,
            (_, Nnf::False) => Nnf::False,
            (Nnf::False, b) => b,
            (a, b) => Nnf::Until(Box::new(a), Box::new(b)),
        }
    }

    pub fn release(a: Nnf, b: Nnf) -> Nnf {
        match (a, b) {
            (_, Nnf::True) => Nnf::True,
            (_, Nnf::False) => Nnf::False,
            (Nnf::True, b) => b,
            (a, b) => Nnf::Release(Box::new(a), Box::new(b)),
        }
    }

    fn has_release(&self) -> bool {
        match self {
            Nnf::True | Nnf::False | Nnf::Lit { .. } => false,
            Nnf::Release(..) => true,
            Nnf::And(v) | Nnf::Or(v) => v.iter().any(Nnf::has_release),
            Nnf::Next(a) => a.has_release(),
            Nnf::Until(a, b) => a.has_release() || b.has_release(),
        }
    }

    /// Member of the syntactically co-safe grammar (no `R` after rewriting).
    pub fn is_cosafe(&self) -> bool {
        !self.has_release()
    }
}

impl fmt::Display for Nnf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn join(f: &mut fmt::Formatter<'_>, parts: &[Nnf], sep: &str) -> fmt::Result {
            for (i, p) in parts.iter().enumerate() {
                if i > 0 {
                    write!(f, " {sep} ")?;
                }
                write!(f, "({p})")?;
            }
            Ok(())
        }
        match self {
            Nnf::True => write!(f, "true"),
            Nnf::False => write!(f, "false"),
            Nnf::Lit { atom, positive: true } => write!(f, "{atom}"),
            Nnf::Lit { atom, positive: false } => write!(f, "!{atom}"),
            Nnf::And(v) => join(f, v, "&"),
            Nnf::Or(v) => join(f, v, "|"),
            Nnf::Next(a) => write!(f, "X({a})"),
            Nnf::Until(a, b) => write!(f, "({a}) U ({b})"),
            Nnf::Release(a, b) => write!(f, "({a}) R ({b})"),
        }
    }
}

/// Negation normal form of `f` (or of `!f` when `negate` is set).
pub fn nnf(f: &Formula, negate: bool) -> Nnf {
    match (f, negate) {
        (Formula::True, false) | (Formula::False, true) => Nnf::True,
        (Formula::False, false) | (Formula::True, true) => Nnf::False,
        (Formula::Atom(a), neg) => Nnf::Lit {
            atom: a.as_str().to_string(),
            positive: !neg,
        },
        (Formula::Not(a), neg) => nnf(a, !neg),
        (Formula::And(a, b), false) => Nnf::and([nnf(a, false), nnf(b, false)]),
        (Formula::And(a, b), true) => Nnf::or([nnf(a, true), nnf(b, true)]),
        (Formula::Or(a, b), false) => Nnf::or([nnf(a, false), nnf(b, false)]),
        (Formula::Or(a, b), true) => Nnf::and([nnf(a, true), nnf(b, true)]),
        (Formula::Implies(a, b), false) => Nnf::or([nnf(a, true), nnf(b, false)]),
        (Formula::Implies(a, b), true) => Nnf::and([nnf(a, false), nnf(b, true)]),
        (Formula::Next(a), neg) => Nnf::next(nnf(a, neg)),
        (Formula::Until(a, b), false) => Nnf::until(nnf(a, false), nnf(b, false)),
        (Formula::Until(a, b), true) => Nnf::release(nnf(a, true), nnf(b, true)),
        (Formula::Eventually(a), false) => Nnf::until(Nnf::True, nnf(a, false)),
        (Formula::Eventually(a), true) => Nnf::release(Nnf::False, nnf(a, true)),
        (Formula::Always(a), false) => Nnf::release(Nnf::False, nnf(a, false)),
        (Formula::Always(a), true) => Nnf::until(Nnf::True, nnf(a, true)),
    }
}

/// Which finite-prefix fragment a formula belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Fragment {
    CoSafety,
    Safety,
    Neither,
}

/// Co-safety if the NNF is in the scLTL grammar, safety if the NNF of the
/// negation is. Purely propositional/next formulas are reported as
/// co-safety.
pub fn classify(f: &Formula) -> Fragment {
    if nnf(f, false).is_cosafe() {
        Fragment::CoSafety
    } else if nnf(f, true).is_cosafe() {
        Fragment::Safety
    } else {
        Fragment::Neither
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ltl::{parse, Alphabet};

    fn f(text: &str) -> Formula {
        parse(text, &Alphabet::new(["a", "b", "t", "n", "v", "g", "i"]).unwrap()).unwrap()
    }

    #[test]
    fn classification_examples() {
        assert_eq!(classify(&f("F t")), Fragment::CoSafety);
        assert_eq!(classify(&f("G(!n & !v)")), Fragment::Safety);
        assert_eq!(classify(&f("(G a) U b")), Fragment::Neither);
        assert_eq!(classify(&f("G(!g -> !i) & G(!n & !v)")), Fragment::Safety);
        assert_eq!(classify(&f("a & X b")), Fragment::CoSafety);
        // `G true` simplifies to `true`, which sits in both fragments.
        assert_eq!(classify(&f("G true")), Fragment::CoSafety);
        assert_eq!(classify(&f("!(G a)")), Fragment::CoSafety);
        assert_eq!(classify(&f("(F a) -> (F b)")), Fragment::Neither);
        assert_eq!(classify(&f("(G a) -> (F b)")), Fragment::CoSafety);
    }

    #[test]
    fn constants_are_absorbed() {
        assert_eq!(nnf(&f("G true"), true), Nnf::False);
        assert_eq!(nnf(&f("a U false"), false), Nnf::False);
        assert_eq!(nnf(&f("false U b"), false), nnf(&f("b"), false));
        assert_eq!(nnf(&f("X true & a"), false), nnf(&f("a"), false));
        assert_eq!(nnf(&f("a & a & b"), false), nnf(&f("b & a"), false));
    }

    #[test]
    fn negation_pushes_to_literals() {
        let n = nnf(&f("G(!g -> !i)"), true);
        assert_eq!(n.to_string(), "(true) U ((!g) & (i))");
    }
}
