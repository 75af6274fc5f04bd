//! Random formulas inside the safety and co-safety fragments.

use rand::Rng;

use crate::ltl::{Formula, Fragment};

/// Random formula of the requested fragment with at most `depth` levels.
///
/// The generator builds from the fragment grammars directly (negation only
/// across fragment boundaries), so `classify` never reports `Neither`;
/// shallow results may still land in both fragments at once.
pub fn random_formula<R: Rng>(rng: &mut R, atoms: &[&str], depth: usize, fragment: Fragment) -> Formula {
    match fragment {
        Fragment::CoSafety => cosafe(rng, atoms, depth),
        Fragment::Safety => safety(rng, atoms, depth),
        Fragment::Neither => panic!("no generator for formulas outside both fragments"),
    }
}

/// `!a` counts two levels, so it needs `depth >= 2`.
fn literal<R: Rng>(rng: &mut R, atoms: &[&str], depth: usize) -> Formula {
    let top = if depth >= 2 { 10 } else { 6 };
    match rng.random_range(0..top) {
        0 => Formula::True,
        1 => Formula::False,
        2..=5 => Formula::atom(atoms[rng.random_range(0..atoms.len())]),
        _ => Formula::not(Formula::atom(atoms[rng.random_range(0..atoms.len())])),
    }
}

fn cosafe<R: Rng>(rng: &mut R, atoms: &[&str], depth: usize) -> Formula {
    if depth <= 1 || rng.random_range(0..5) == 0 {
        return literal(rng, atoms, depth);
    }
    let d = depth - 1;
    match rng.random_range(0..8) {
        0 => Formula::and(cosafe(rng, atoms, d), cosafe(rng, atoms, d)),
        1 => Formula::or(cosafe(rng, atoms, d), cosafe(rng, atoms, d)),
        2 => Formula::next(cosafe(rng, atoms, d)),
        3 => Formula::until(cosafe(rng, atoms, d), cosafe(rng, atoms, d)),
        4 => Formula::eventually(cosafe(rng, atoms, d)),
        5 => Formula::implies(safety(rng, atoms, d), cosafe(rng, atoms, d)),
        6 => Formula::not(safety(rng, atoms, d)),
        _ => literal(rng, atoms, depth),
    }
}

fn safety<R: Rng>(rng: &mut R, atoms: &[&str], depth: usize) -> Formula {
    if depth <= 1 || rng.random_range(0..5) == 0 {
        return literal(rng, atoms, depth);
    }
    let d = depth - 1;
    match rng.random_range(0..8) {
        0 => Formula::and(safety(rng, atoms, d), safety(rng, atoms, d)),
        1 => Formula::or(safety(rng, atoms, d), safety(rng, atoms, d)),
        2 => Formula::next(safety(rng, atoms, d)),
        3 => Formula::always(safety(rng, atoms, d)),
        4 if d >= 2 => Formula::not(Formula::until(cosafe(rng, atoms, d - 1), cosafe(rng, atoms, d - 1))),
        5 => Formula::implies(cosafe(rng, atoms, d), safety(rng, atoms, d)),
        6 => Formula::not(cosafe(rng, atoms, d)),
        _ => literal(rng, atoms, depth),
    }
}
