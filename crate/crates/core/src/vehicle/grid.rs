use serde::{Deserialize, Serialize};

use super::VehicleError;
use crate::models::{is_stochastic_sum, Mdp, Row};

/// One possible displacement of an action, in cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outcome {
    pub dx: i32,
    pub dy: i32,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionDef {
    pub name: String,
    pub outcomes: Vec<Outcome>,
}

impl ActionDef {
    pub fn new(name: &str, outcomes: &[(i32, i32, f64)]) -> Self {
        ActionDef {
            name: name.to_string(),
            outcomes: outcomes.iter().map(|&(dx, dy, p)| Outcome { dx, dy, p }).collect(),
        }
    }

    /// The most likely displacement; the first one wins ties.
    pub fn intended(&self) -> (i32, i32) {
        let mut best = (0, 0, f64::NEG_INFINITY);
        for o in &self.outcomes {
            if o.p > best.2 {
                best = (o.dx, o.dy, o.p);
            }
        }
        (best.0, best.1)
    }
}

/// Stay plus the eight king moves; a move lands on its intended neighbour
/// with probability 0.8 and slips to either 45-degree neighbour with 0.1.
pub fn king_moves() -> Vec<ActionDef> {
    const DIRS: [(&str, i32, i32); 8] = [
        ("east", 1, 0),
        ("north_east", 1, 1),
        ("north", 0, 1),
        ("north_west", -1, 1),
        ("west", -1, 0),
        ("south_west", -1, -1),
        ("south", 0, -1),
        ("south_east", 1, -1),
    ];
    let mut out = vec![ActionDef::new("stay", &[(0, 0, 1.0)])];
    for (k, &(name, dx, dy)) in DIRS.iter().enumerate() {
        let (_, lx, ly) = DIRS[(k + 1) % 8];
        let (_, rx, ry) = DIRS[(k + 7) % 8];
        out.push(ActionDef::new(name, &[(dx, dy, 0.8), (lx, ly, 0.1), (rx, ry, 0.1)]));
    }
    out
}

/// Rectangular grid over the workspace. Cell `(ix, iy)` has index
/// `iy * nx + ix` and covers `[x0 + ix*size, x0 + (ix+1)*size)` and likewise in y.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridAbstraction {
    pub origin: [f64; 2],
    pub cell_size: f64,
    pub nx: usize,
    pub ny: usize,
    pub actions: Vec<ActionDef>,
}

impl GridAbstraction {
    pub fn new(nx: usize, ny: usize, cell_size: f64, actions: Vec<ActionDef>) -> Self {
        GridAbstraction {
            origin: [0.0, 0.0],
            cell_size,
            nx,
            ny,
            actions,
        }
    }

    pub fn num_cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    pub fn coords(&self, cell: usize) -> (usize, usize) {
        (cell % self.nx, cell / self.nx)
    }

    pub fn cell_name(&self, cell: usize) -> String {
        let (ix, iy) = self.coords(cell);
        format!("x{ix}y{iy}")
    }

    pub fn center(&self, cell: usize) -> (f64, f64) {
        let (ix, iy) = self.coords(cell);
        (
            self.origin[0] + (ix as f64 + 0.5) * self.cell_size,
            self.origin[1] + (iy as f64 + 0.5) * self.cell_size,
        )
    }

    pub fn cell_of(&self, px: f64, py: f64) -> Option<usize> {
        let fx = ((px - self.origin[0]) / self.cell_size).floor();
        let fy = ((py - self.origin[1]) / self.cell_size).floor();
        if fx >= 0.0 && fy >= 0.0 && fx < self.nx as f64 && fy < self.ny as f64 {
            Some(self.index(fx as usize, fy as usize))
        } else {
            None
        }
    }

    /// Cell reached by a displacement; leaving the grid means staying put.
    pub fn shift(&self, cell: usize, dx: i32, dy: i32) -> usize {
        let (ix, iy) = self.coords(cell);
        let tx = ix as i64 + dx as i64;
        let ty = iy as i64 + dy as i64;
        if tx < 0 || ty < 0 || tx >= self.nx as i64 || ty >= self.ny as i64 {
            cell
        } else {
            self.index(tx as usize, ty as usize)
        }
    }

    pub fn action_index(&self, name: &str) -> Option<usize> {
        self.actions.iter().position(|a| a.name == name)
    }

    pub fn validate(&self) -> Result<(), VehicleError> {
        if self.nx == 0 || self.ny == 0 || !(self.cell_size > 0.0 && self.cell_size.is_finite()) {
            return Err(VehicleError::Params("grid needs positive size".into()));
        }
        if self.actions.is_empty() {
            return Err(VehicleError::Params("grid has no actions".into()));
        }
        for a in &self.actions {
            let bad = |detail: String| VehicleError::BadDistribution {
                action: a.name.clone(),
                detail,
            };
            if a.outcomes.is_empty() {
                return Err(bad("no outcomes".into()));
            }
            if let Some(o) = a.outcomes.iter().find(|o| !(o.p >= 0.0 && o.p <= 1.0)) {
                return Err(bad(format!("probability {} outside [0, 1]", o.p)));
            }
            let sum: f64 = a.outcomes.iter().map(|o| o.p).sum();
            if !is_stochastic_sum(sum) {
                return Err(bad(format!("probabilities sum to {sum}")));
            }
        }
        Ok(())
    }

    /// Vehicle MDP over grid cells. Mass that would leave the grid is folded
    /// into the self-loop, so every row stays stochastic.
    pub fn abstract_mdp(&self, initial: usize) -> Result<Mdp, VehicleError> {
        self.validate()?;
        if initial >= self.num_cells() {
            return Err(VehicleError::Params(format!("initial cell {initial} outside the grid")));
        }
        let mut kernel = Vec::with_capacity(self.num_cells());
        for cell in 0..self.num_cells() {
            let mut rows = Vec::with_capacity(self.actions.len());
            for a in &self.actions {
                let sum: f64 = a.outcomes.iter().map(|o| o.p).sum();
                let mut row: Row = Vec::new();
                for o in &a.outcomes {
                    if o.p == 0.0 {
                        continue;
                    }
                    let to = self.shift(cell, o.dx, o.dy);
                    match row.iter_mut().find(|(t, _)| *t == to) {
                        Some(entry) => entry.1 += o.p / sum,
                        None => row.push((to, o.p / sum)),
                    }
                }
                row.sort_by_key(|&(t, _)| t);
                rows.push(Some(row));
            }
            kernel.push(rows);
        }
        let mdp = Mdp {
            state_names: (0..self.num_cells()).map(|c| self.cell_name(c)).collect(),
            initial,
            action_names: self.actions.iter().map(|a| a.name.clone()).collect(),
            kernel,
        };
        debug_assert!(mdp.validate().is_valid());
        Ok(mdp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> GridAbstraction {
        GridAbstraction::new(5, 4, 2.0, king_moves())
    }

    #[test]
    fn interior_move_has_three_successors() {
        let g = grid();
        let m = g.abstract_mdp(0).unwrap();
        let north = g.action_index("north").unwrap();
        let c = g.index(2, 1);
        let row = m.row(c, north).unwrap();
        assert_eq!(row.len(), 3);
        let p = |ix, iy| row.iter().find(|(t, _)| *t == g.index(ix, iy)).unwrap().1;
        assert_eq!(p(2, 2), 0.8);
        assert_eq!(p(1, 2), 0.1);
        assert_eq!(p(3, 2), 0.1);
    }

    #[test]
    fn boundary_mass_folds_into_self_loop() {
        let g = grid();
        let m = g.abstract_mdp(0).unwrap();
        let sw = g.action_index("south_west").unwrap();
        let row = m.row(0, sw).unwrap();
        assert_eq!(row, &vec![(0, 1.0)]);
        let north = g.action_index("north").unwrap();
        let edge = g.index(4, 1);
        let row = m.row(edge, north).unwrap();
        assert_eq!(row.len(), 3);
        assert!((row.iter().find(|(t, _)| *t == edge).unwrap().1 - 0.1).abs() < 1e-15);
        assert!(m.validate().is_valid());
    }

    #[test]
    fn bad_distribution_is_rejected() {
        let mut g = grid();
        g.actions.push(ActionDef::new("odd", &[(1, 0, 0.5), (0, 1, 0.4)]));
        assert!(matches!(g.abstract_mdp(0), Err(VehicleError::BadDistribution { .. })));
    }

    #[test]
    fn cell_lookup_round_trips() {
        let g = grid();
        for c in 0..g.num_cells() {
            let (x, y) = g.center(c);
            assert_eq!(g.cell_of(x, y), Some(c));
        }
        assert_eq!(g.cell_of(-0.1, 1.0), None);
        assert_eq!(g.cell_of(10.0, 1.0), None);
        assert_eq!(king_moves()[1].intended(), (1, 0));
    }
}
