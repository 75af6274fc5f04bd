use std::io::Write;

use super::CompiledScenario;
use crate::synth::{OccupationSolution, SynthError};

/// Occupation mass per grid cell, summed over environment and automaton
/// coordinates and actions, plus a greedy ascent path from the start cell.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskField {
    pub nx: usize,
    pub ny: usize,
    pub values: Vec<f64>,
    pub path: Vec<bool>,
}

impl RiskField {
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn mass_on(&self, cells: &[usize]) -> f64 {
        cells.iter().map(|&c| self.values[c]).sum()
    }

    /// Cells in path order.
    pub fn path_cells(&self, cs: &CompiledScenario) -> Vec<usize> {
        greedy_path(cs, &self.values)
    }
}

fn neighbours(cs: &CompiledScenario, cell: usize) -> Vec<usize> {
    let g = &cs.grid;
    let (ix, iy) = g.coords(cell);
    let mut out = Vec::with_capacity(8);
    for dy in -1i64..=1 {
        for dx in -1i64..=1 {
            let (x, y) = (ix as i64 + dx, iy as i64 + dy);
            if (dx, dy) != (0, 0) && x >= 0 && y >= 0 && x < g.nx as i64 && y < g.ny as i64 {
                out.push(g.index(x as usize, y as usize));
            }
        }
    }
    out
}

/// From the start cell, step to a goal cell when one is adjacent and
/// otherwise to the unvisited neighbour with the most mass; stop when no
/// unvisited neighbour carries mass.
fn greedy_path(cs: &CompiledScenario, values: &[f64]) -> Vec<usize> {
    let n = cs.grid.num_cells();
    // Labels are read on leaving a cell, so a goal cell is one whose letter
    // completes the co-safe automaton, not the cell a goal state sits in.
    let mut goal = vec![false; n];
    for (z, st) in cs.product.states.iter().enumerate() {
        if cs.product.is_terminal(z) {
            continue;
        }
        let letter = cs.labeling.letters[st.composed];
        if cs.a_cs.step(st.q_cs, letter).is_ok_and(|q| cs.a_cs.is_final(q)) {
            goal[cs.composed.pair(st.composed).0] = true;
        }
    }
    let mut visited = vec![false; n];
    let mut cell = cs.vehicle_mdp.initial;
    let mut path = vec![cell];
    visited[cell] = true;
    while !goal[cell] {
        let nb = neighbours(cs, cell);
        let next = nb.iter().copied().find(|&c| goal[c] && !visited[c]).or_else(|| {
            nb.iter()
                .copied()
                .filter(|&c| !visited[c] && values[c] > 0.0)
                .fold(None, |best: Option<usize>, c| match best {
                    Some(b) if values[b] >= values[c] => Some(b),
                    _ => Some(c),
                })
        });
        match next {
            Some(c) => {
                visited[c] = true;
                path.push(c);
                cell = c;
            }
            None => break,
        }
    }
    path
}

pub fn risk_field(cs: &CompiledScenario, sol: &OccupationSolution) -> Result<RiskField, SynthError> {
    if sol.columns.len() != sol.beta.len() {
        return Err(SynthError::Mismatch("column and value counts differ".into()));
    }
    let mut values = vec![0.0; cs.grid.num_cells()];
    for (&(z, _), &b) in sol.columns.iter().zip(&sol.beta) {
        let st = cs
            .product
            .states
            .get(z)
            .ok_or_else(|| SynthError::Mismatch(format!("state {z} outside the product")))?;
        values[cs.composed.pair(st.composed).0] += b;
    }
    let mut path = vec![false; values.len()];
    for c in greedy_path(cs, &values) {
        path[c] = true;
    }
    Ok(RiskField {
        nx: cs.grid.nx,
        ny: cs.grid.ny,
        values,
        path,
    })
}

/// One row per cell: indices, centre coordinates, mass and path flag.
pub fn write_risk_field_csv(field: &RiskField, cs: &CompiledScenario, out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "ix,iy,x,y,beta,path")?;
    for (c, v) in field.values.iter().enumerate() {
        let (ix, iy) = cs.grid.coords(c);
        let (x, y) = cs.grid.center(c);
        writeln!(out, "{ix},{iy},{x},{y},{v},{}", u8::from(field.path[c]))?;
    }
    Ok(())
}
