//! Two-phase revised primal simplex with an explicit dense basis inverse.
//!
//! Columns are sparse. Pricing is Dantzig's rule with a Harris ratio test,
//! switching to Bland's rule (smallest entering index, ratio ties to the
//! smallest basic index) after a run of degenerate pivots. The inverse is rebuilt by Gauss-Jordan elimination
//! every `refactor_every` pivots and once more before the answer is read.

use std::collections::HashMap;

use log::debug;

use super::{LinearProgram, LpError, LpResult, LpStatus, Sense, Solver};

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexOptions {
    /// Residual allowed in `Ax = b` and in the phase-one objective.
    pub feasibility_tol: f64,
    /// Reduced costs above `-optimality_tol` count as non-improving.
    pub optimality_tol: f64,
    /// Smallest pivot element accepted by the ratio test.
    pub pivot_tol: f64,
    pub refactor_every: usize,
    pub degenerate_switch: usize,
    /// `None` means `50 * (rows + columns) + 10_000`.
    pub max_iterations: Option<usize>,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            feasibility_tol: 1e-8,
            optimality_tol: 1e-9,
            pivot_tol: 1e-7,
            refactor_every: 100,
            degenerate_switch: 50,
            max_iterations: None,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Simplex {
    pub options: SimplexOptions,
}

impl Solver for Simplex {
    fn name(&self) -> String {
        "builtin".into()
    }

    fn solve(&self, lp: &LinearProgram) -> Result<LpResult, LpError> {
        lp.check()?;
        let (reduced, keep) = merge_duplicate_columns(lp);
        if keep.len() == lp.num_vars() {
            return Tableau::new(lp, &self.options).run(lp);
        }
        debug!("presolve merged {} duplicate columns", lp.num_vars() - keep.len());
        let r = Tableau::new(&reduced, &self.options).run(&reduced)?;
        let mut x = vec![0.0; lp.num_vars()];
        for (k, &j) in keep.iter().enumerate() {
            x[j] = r.x[k];
        }
        Ok(LpResult {
            objective: if r.status == LpStatus::Optimal { lp.objective_value(&x) } else { f64::NAN },
            x,
            ..r
        })
    }
}

/// Drops every column whose constraint coefficients repeat an earlier
/// column, keeping the copy with the largest objective (the first on ties).
/// Copies are harmless in exact arithmetic, but round-off can let two of
/// them into the basis together, which makes it exactly singular.
fn merge_duplicate_columns(lp: &LinearProgram) -> (LinearProgram, Vec<usize>) {
    let n = lp.num_vars();
    let mut cols: Vec<Vec<(usize, u64)>> = vec![Vec::new(); n];
    for (i, c) in lp.constraints.iter().enumerate() {
        for &(j, a) in &c.coeffs {
            if a != 0.0 {
                cols[j].push((i, a.to_bits()));
            }
        }
    }
    let mut first: HashMap<&[(usize, u64)], usize> = HashMap::new();
    let mut keep: Vec<usize> = Vec::new();
    let mut group = vec![0; n];
    for (j, col) in cols.iter().enumerate() {
        match first.get(col.as_slice()) {
            Some(&k) => {
                group[j] = k;
                if lp.objective[j] > lp.objective[keep[k]] {
                    keep[k] = j;
                }
            }
            None => {
                group[j] = keep.len();
                first.insert(col.as_slice(), keep.len());
                keep.push(j);
            }
        }
    }
    if keep.len() == n {
        return (LinearProgram::default(), keep);
    }
    let mut new_index = vec![usize::MAX; n];
    for (k, &j) in keep.iter().enumerate() {
        new_index[j] = k;
    }
    // A merged copy has the same coefficients, so it can stand in for a hinted column.
    let mut basis_hint: Vec<(usize, usize)> = Vec::new();
    for &(i, j) in &lp.basis_hint {
        if !basis_hint.iter().any(|&(_, k)| k == group[j]) {
            basis_hint.push((i, group[j]));
        }
    }
    let reduced = LinearProgram {
        var_names: keep.iter().map(|&j| lp.var_names[j].clone()).collect(),
        objective: keep.iter().map(|&j| lp.objective[j]).collect(),
        constant: lp.constant,
        constraints: lp
            .constraints
            .iter()
            .map(|c| super::Constraint {
                name: c.name.clone(),
                coeffs: c
                    .coeffs
                    .iter()
                    .filter(|&&(j, _)| new_index[j] != usize::MAX)
                    .map(|&(j, a)| (new_index[j], a))
                    .collect(),
                sense: c.sense,
                rhs: c.rhs,
            })
            .collect(),
        basis_hint,
    };
    (reduced, keep)
}

#[derive(Clone, Copy, PartialEq)]
enum Kind {
    Structural,
    Slack,
    Artificial,
}

struct Tableau<'a> {
    opts: &'a SimplexOptions,
    m: usize,
    cols: Vec<Vec<(usize, f64)>>,
    kinds: Vec<Kind>,
    b: Vec<f64>,
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    /// Row-major `m x m`.
    binv: Vec<f64>,
    xb: Vec<f64>,
    iterations: usize,
    limit: usize,
}

enum Outcome {
    Optimal,
    Unbounded,
}

impl<'a> Tableau<'a> {
    /// Standard form `[A | slacks | artificials] x = b` with `b >= 0`.
    fn new(lp: &LinearProgram, opts: &'a SimplexOptions) -> Tableau<'a> {
        let m = lp.constraints.len();
        let n = lp.num_vars();
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut kinds = vec![Kind::Structural; n];
        let mut b = vec![0.0; m];
        let mut basis = vec![usize::MAX; m];
        let mut pending = Vec::new();
        for (i, c) in lp.constraints.iter().enumerate() {
            let flip = c.rhs < 0.0;
            let sign = if flip { -1.0 } else { 1.0 };
            b[i] = sign * c.rhs;
            for &(j, a) in &c.coeffs {
                if a != 0.0 {
                    match cols[j].last_mut() {
                        Some(e) if e.0 == i => e.1 += sign * a,
                        _ => cols[j].push((i, sign * a)),
                    }
                }
            }
            let slack = match c.sense {
                Sense::Eq => None,
                Sense::Le => Some(sign),
                Sense::Ge => Some(-sign),
            };
            if let Some(s) = slack {
                cols.push(vec![(i, s)]);
                kinds.push(Kind::Slack);
                if s > 0.0 {
                    basis[i] = cols.len() - 1;
                    continue;
                }
            }
            pending.push(i);
        }
        for i in pending {
            cols.push(vec![(i, 1.0)]);
            kinds.push(Kind::Artificial);
            basis[i] = cols.len() - 1;
        }
        for c in &mut cols {
            c.sort_by_key(|e| e.0);
            c.retain(|e| e.1 != 0.0);
        }
        let mut in_basis = vec![false; cols.len()];
        for &j in &basis {
            in_basis[j] = true;
        }
        let mut binv = vec![0.0; m * m];
        for i in 0..m {
            binv[i * m + i] = 1.0;
        }
        let limit = opts.max_iterations.unwrap_or(50 * (m + cols.len()) + 10_000);
        let mut t = Tableau {
            opts,
            m,
            xb: b.clone(),
            cols,
            kinds,
            b,
            basis,
            in_basis,
            binv,
            iterations: 0,
            limit,
        };
        if !lp.basis_hint.is_empty() && !t.crash(&lp.basis_hint) {
            debug!("basis hint rejected, starting from the slack basis");
        }
        t
    }

    /// Installs the hinted columns as basic. Unit columns left in rows that
    /// come out negative are replaced by artificials of opposite sign, so
    /// phase one starts feasible. Restores the slack basis and returns false
    /// when the hinted basis is singular or a hinted column is negative.
    fn crash(&mut self, hint: &[(usize, usize)]) -> bool {
        let saved = (self.basis.clone(), self.in_basis.clone(), self.cols.len());
        let restore = |t: &mut Tableau| {
            t.basis = saved.0.clone();
            t.in_basis = saved.1.clone();
            t.cols.truncate(saved.2);
            t.kinds.truncate(saved.2);
            t.in_basis.truncate(saved.2);
            t.binv = vec![0.0; t.m * t.m];
            for i in 0..t.m {
                t.binv[i * t.m + i] = 1.0;
            }
            t.xb = t.b.clone();
        };
        for &(i, j) in hint {
            if self.in_basis[j] {
                restore(self);
                return false;
            }
            self.in_basis[self.basis[i]] = false;
            self.basis[i] = j;
            self.in_basis[j] = true;
        }
        if self.refactor_unchecked().is_err() {
            restore(self);
            return false;
        }
        let tol = self.opts.feasibility_tol;
        let mut flipped = false;
        for i in 0..self.m {
            if self.xb[i] >= -tol {
                continue;
            }
            let j = self.basis[i];
            if self.kinds[j] == Kind::Structural || self.cols[j].len() != 1 {
                restore(self);
                return false;
            }
            let (r, v) = self.cols[j][0];
            self.cols.push(vec![(r, -v)]);
            self.kinds.push(Kind::Artificial);
            self.in_basis[j] = false;
            self.in_basis.push(true);
            self.basis[i] = self.cols.len() - 1;
            flipped = true;
        }
        if flipped && (self.refactor_unchecked().is_err() || self.xb.iter().any(|&v| v < -tol)) {
            restore(self);
            return false;
        }
        true
    }

    fn run(mut self, lp: &LinearProgram) -> Result<LpResult, LpError> {
        let n_total = self.cols.len();
        let has_artificials = self.basis.iter().any(|&j| self.kinds[j] == Kind::Artificial);
        if has_artificials {
            let cost: Vec<f64> = self
                .kinds
                .iter()
                .map(|k| if *k == Kind::Artificial { 1.0 } else { 0.0 })
                .collect();
            self.optimize(&cost, |_| true)?;
            self.refactor()?;
            let infeas: f64 = (0..self.m)
                .filter(|&i| self.kinds[self.basis[i]] == Kind::Artificial)
                .map(|i| self.xb[i])
                .sum();
            let scale = 1.0 + self.b.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            debug!("phase one finished after {} pivots, infeasibility {infeas:e}", self.iterations);
            if infeas > self.opts.feasibility_tol * scale {
                return Ok(self.result(LpStatus::Infeasible, lp));
            }
            self.drive_out_artificials()?;
        }
        let mut cost = vec![0.0; n_total];
        for (j, c) in lp.objective.iter().enumerate() {
            cost[j] = -c;
        }
        let kinds = self.kinds.clone();
        let outcome = self.optimize(&cost, |j| kinds[j] != Kind::Artificial)?;
        self.refactor()?;
        debug!("phase two finished after {} pivots", self.iterations);
        match outcome {
            Outcome::Unbounded => Ok(self.result(LpStatus::Unbounded, lp)),
            Outcome::Optimal => Ok(self.result(LpStatus::Optimal, lp)),
        }
    }

    fn result(&self, status: LpStatus, lp: &LinearProgram) -> LpResult {
        let n = lp.num_vars();
        let mut x = vec![0.0; n];
        if status == LpStatus::Optimal {
            for (i, &j) in self.basis.iter().enumerate() {
                if j < n {
                    x[j] = self.xb[i].max(0.0);
                }
            }
        }
        LpResult {
            status,
            objective: if status == LpStatus::Optimal { lp.objective_value(&x) } else { f64::NAN },
            x,
            iterations: self.iterations,
        }
    }

    /// `B^-1 a_j`.
    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut w = vec![0.0; m];
        for &(r, v) in &self.cols[j] {
            for i in 0..m {
                w[i] += self.binv[i * m + r] * v;
            }
        }
        w
    }

    /// Minimizes `cost·x` over columns admitted by `allowed`.
    fn optimize(&mut self, cost: &[f64], allowed: impl Fn(usize) -> bool) -> Result<Outcome, LpError> {
        let m = self.m;
        let mut degenerate_run = 0usize;
        let mut since_refactor = 0usize;
        loop {
            if self.iterations >= self.limit {
                return Err(LpError::IterationLimit(self.limit));
            }
            if since_refactor >= self.opts.refactor_every {
                self.refactor()?;
                since_refactor = 0;
            }
            // y = c_B B^-1
            let mut y = vec![0.0; m];
            for (i, &j) in self.basis.iter().enumerate() {
                let cb = cost[j];
                if cb != 0.0 {
                    let row = &self.binv[i * m..(i + 1) * m];
                    for (yk, rk) in y.iter_mut().zip(row) {
                        *yk += cb * rk;
                    }
                }
            }
            let bland = degenerate_run >= self.opts.degenerate_switch;
            let mut entering = None;
            let mut best = -self.opts.optimality_tol;
            for j in 0..self.cols.len() {
                if self.in_basis[j] || !allowed(j) {
                    continue;
                }
                let d = cost[j] - self.cols[j].iter().map(|&(r, v)| y[r] * v).sum::<f64>();
                if d < best {
                    entering = Some(j);
                    if bland {
                        break;
                    }
                    best = d;
                }
            }
            let Some(q) = entering else {
                return Ok(Outcome::Optimal);
            };
            let w = self.ftran(q);
            let Some((p, ratio)) = self.ratio_test(&w, bland) else {
                return Ok(Outcome::Unbounded);
            };
            if ratio <= 1e-12 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(p, q, &w);
            self.iterations += 1;
            since_refactor += 1;
        }
    }

    /// Leaving row and step length. Bland mode takes the exact minimum
    /// ratio with ties to the smallest basic index. Otherwise a Harris
    /// two-pass test: bound the step using slightly relaxed bounds, then
    /// take the largest pivot element among rows within that bound.
    fn ratio_test(&self, w: &[f64], bland: bool) -> Option<(usize, f64)> {
        let tol = self.opts.pivot_tol;
        let rows = || (0..self.m).filter(move |&i| w[i] > tol);
        if bland {
            let mut best: Option<(usize, f64)> = None;
            for i in rows() {
                let r = self.xb[i].max(0.0) / w[i];
                best = match best {
                    None => Some((i, r)),
                    Some((l, br)) => {
                        let slack = 1e-12 * (1.0 + br.abs());
                        if r < br - slack || (r <= br + slack && self.basis[i] < self.basis[l]) {
                            Some((i, r.min(br)))
                        } else {
                            Some((l, br))
                        }
                    }
                };
            }
            return best;
        }
        let relax = self.opts.feasibility_tol * 0.1;
        let bound = rows()
            .map(|i| (self.xb[i].max(0.0) + relax) / w[i])
            .fold(f64::INFINITY, f64::min);
        if !bound.is_finite() {
            return None;
        }
        let mut pick: Option<usize> = None;
        for i in rows() {
            if self.xb[i].max(0.0) / w[i] <= bound {
                pick = match pick {
                    Some(l) if w[l] > w[i] || (w[l] == w[i] && self.basis[l] < self.basis[i]) => Some(l),
                    _ => Some(i),
                };
            }
        }
        pick.map(|i| (i, self.xb[i].max(0.0) / w[i]))
    }

    fn pivot(&mut self, p: usize, q: usize, w: &[f64]) {
        let m = self.m;
        let piv = w[p];
        for k in 0..m {
            self.binv[p * m + k] /= piv;
        }
        self.xb[p] /= piv;
        let prow: Vec<f64> = self.binv[p * m..(p + 1) * m].to_vec();
        let xp = self.xb[p];
        for i in 0..m {
            if i == p || w[i] == 0.0 {
                continue;
            }
            let f = w[i];
            let row = &mut self.binv[i * m..(i + 1) * m];
            for (rk, pk) in row.iter_mut().zip(&prow) {
                *rk -= f * pk;
            }
            self.xb[i] -= f * xp;
            // Harris steps may overshoot a bound by at most the relaxation.
            if self.xb[i].abs() < 1e-14 || (self.xb[i] < 0.0 && self.xb[i] > -self.opts.feasibility_tol) {
                self.xb[i] = 0.0;
            }
        }
        self.in_basis[self.basis[p]] = false;
        self.in_basis[q] = true;
        self.basis[p] = q;
    }

    /// Rebuilds `B^-1` and `x_B` and checks that `x_B` stayed feasible.
    fn refactor(&mut self) -> Result<(), LpError> {
        self.refactor_unchecked()?;
        for i in 0..self.m {
            if self.xb[i] < -self.opts.feasibility_tol * 10.0 {
                return Err(LpError::NumericalFailure {
                    row: i,
                    col: self.basis[i],
                    detail: format!("basic value {} lost feasibility", self.xb[i]),
                });
            }
        }
        Ok(())
    }

    /// Rebuilds `B^-1` and `x_B` from the basis columns.
    fn refactor_unchecked(&mut self) -> Result<(), LpError> {
        let m = self.m;
        let mut a = vec![0.0; m * m];
        for (k, &j) in self.basis.iter().enumerate() {
            for &(r, v) in &self.cols[j] {
                a[r * m + k] = v;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for c in 0..m {
            let (mut piv_row, mut piv_val) = (c, 0.0f64);
            for r in c..m {
                if a[r * m + c].abs() > piv_val.abs() {
                    piv_row = r;
                    piv_val = a[r * m + c];
                }
            }
            if piv_val.abs() < 1e-12 {
                return Err(LpError::NumericalFailure {
                    row: c,
                    col: self.basis[c],
                    detail: "singular basis during refactorization".into(),
                });
            }
            if piv_row != c {
                for k in 0..m {
                    a.swap(c * m + k, piv_row * m + k);
                    inv.swap(c * m + k, piv_row * m + k);
                }
            }
            for k in 0..m {
                a[c * m + k] /= piv_val;
                inv[c * m + k] /= piv_val;
            }
            for r in 0..m {
                let f = a[r * m + c];
                if r != c && f != 0.0 {
                    for k in 0..m {
                        a[r * m + k] -= f * a[c * m + k];
                        inv[r * m + k] -= f * inv[c * m + k];
                    }
                }
            }
        }
        // Column k of B is basis[k], so row k of B^-1 belongs to it.
        self.binv = inv;
        for i in 0..m {
            let v: f64 = (0..m).map(|k| self.binv[i * m + k] * self.b[k]).sum();
            self.xb[i] = if v.abs() < 1e-13 { 0.0 } else { v };
        }
        Ok(())
    }

    /// Pivots zero-level artificials out of the basis where some other
    /// column can replace them; rows where none can are redundant.
    fn drive_out_artificials(&mut self) -> Result<(), LpError> {
        for p in 0..self.m {
            if self.kinds[self.basis[p]] != Kind::Artificial {
                continue;
            }
            let m = self.m;
            // Largest pivot element keeps the new basis well conditioned.
            let mut pick: Option<(usize, f64)> = None;
            for j in 0..self.cols.len() {
                if self.in_basis[j] || self.kinds[j] == Kind::Artificial {
                    continue;
                }
                let wp: f64 = self.cols[j].iter().map(|&(r, v)| self.binv[p * m + r] * v).sum::<f64>().abs();
                if wp > 1e-7 && pick.is_none_or(|(_, best)| wp > best) {
                    pick = Some((j, wp));
                }
            }
            if let Some((q, _)) = pick {
                let w = self.ftran(q);
                self.pivot(p, q, &w);
                self.iterations += 1;
            }
        }
        self.refactor()
    }
}
