//! Brute-force informative-prefix semantics on the raw formula tree.
//!
//! `good(w, f)` holds iff the finite word `w` already witnesses `f` no matter
//! how it is continued, judged structurally: positions at or past `w.len()`
//! carry no information, so atoms (and negated atoms) are never witnessed
//! there. Positions `>= w.len()` are indistinguishable, so every
//! quantifier over future positions only needs to range up to `w.len()`.

use crate::ltl::{Alphabet, Formula, Letter};

/// True iff `word` is an informative good prefix of `f`.
pub fn good_prefix(f: &Formula, word: &[Letter], alphabet: &Alphabet) -> bool {
    Eval { word, alphabet }.good(0, f, false)
}

/// True iff `word` is an informative bad prefix of `f`.
pub fn bad_prefix(f: &Formula, word: &[Letter], alphabet: &Alphabet) -> bool {
    Eval { word, alphabet }.good(0, f, true)
}

/// Every word over `alphabet` of length exactly `len`.
pub fn words(alphabet: &Alphabet, len: usize) -> Vec<Vec<Letter>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|w| {
                alphabet.all_letters().map(move |l| {
                    let mut w = w.clone();
                    w.push(l);
                    w
                })
            })
            .collect();
    }
    out
}

struct Eval<'a> {
    word: &'a [Letter],
    alphabet: &'a Alphabet,
}

impl Eval<'_> {
    fn end(&self, i: usize) -> usize {
        i.max(self.word.len())
    }

    /// Witness for `f` at position `i`, or for `!f` when `neg` is set.
    fn good(&self, i: usize, f: &Formula, neg: bool) -> bool {
        match f {
            Formula::True => !neg,
            Formula::False => neg,
            Formula::Atom(a) => match self.word.get(i) {
                None => false,
                Some(l) => {
                    let bit = self.alphabet.index_of(a.as_str()).expect("atom not in alphabet");
                    l.contains(bit) != neg
                }
            },
            Formula::Not(a) => self.good(i, a, !neg),
            Formula::And(a, b) if !neg => self.good(i, a, false) && self.good(i, b, false),
            Formula::And(a, b) => self.good(i, a, true) || self.good(i, b, true),
            Formula::Or(a, b) if !neg => self.good(i, a, false) || self.good(i, b, false),
            Formula::Or(a, b) => self.good(i, a, true) && self.good(i, b, true),
            Formula::Implies(a, b) if !neg => self.good(i, a, true) || self.good(i, b, false),
            Formula::Implies(a, b) => self.good(i, a, false) && self.good(i, b, true),
            Formula::Next(a) => self.good(i + 1, a, neg),
            Formula::Until(a, b) if !neg => self.until(i, |k| self.good(k, a, false), |k| self.good(k, b, false)),
            Formula::Until(a, b) => self.release(i, |k| self.good(k, a, true), |k| self.good(k, b, true)),
            Formula::Eventually(b) if !neg => self.until(i, |_| true, |k| self.good(k, b, false)),
            Formula::Eventually(b) => self.release(i, |_| false, |k| self.good(k, b, true)),
            Formula::Always(b) if !neg => self.release(i, |_| false, |k| self.good(k, b, false)),
            Formula::Always(b) => self.until(i, |_| true, |k| self.good(k, b, true)),
        }
    }

    fn until(&self, i: usize, a: impl Fn(usize) -> bool, b: impl Fn(usize) -> bool) -> bool {
        for k in i..=self.end(i) {
            if b(k) {
                return true;
            }
            if !a(k) {
                return false;
            }
        }
        false
    }

    fn release(&self, i: usize, a: impl Fn(usize) -> bool, b: impl Fn(usize) -> bool) -> bool {
        for k in i..=self.end(i) {
            if !b(k) {
                return false;
            }
            if a(k) {
                return true;
            }
        }
        // `b` holds on every position, including the uninformative tail.
        true
    }
}
