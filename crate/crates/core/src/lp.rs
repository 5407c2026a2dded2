//! Dense two-phase simplex.
//!
//! Small and medium linear programs only: the tableau is stored densely.
//! Solutions carry the dual prices of the constraint rows, which the
//! oracle uses to recover supporting lines of value functions.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("linear program is infeasible (phase-one residual {0:.3e})")]
    Infeasible(f64),
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("simplex iteration limit {0} reached")]
    IterationLimit(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
struct Row {
    coeffs: Vec<(usize, f64)>,
    sense: Sense,
    rhs: f64,
}

/// A maximization problem `max c·x` over rows `a·x (<=|>=|=) b`.
/// Variables are nonnegative unless declared free.
#[derive(Debug, Clone, Default)]
pub struct Lp {
    objective: Vec<f64>,
    free: Vec<bool>,
    rows: Vec<Row>,
    /// Suggested starting basis: `(variable, row)` pairs pivoted in order.
    hints: Vec<(usize, usize)>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub objective: f64,
    pub x: Vec<f64>,
    /// Marginal value of each row's right-hand side.
    pub duals: Vec<f64>,
    pub iterations: usize,
}

const ENTER_TOL: f64 = 1e-11;
const PIVOT_TOL: f64 = 1e-9;
const HARRIS_TOL: f64 = 1e-10;
const BLOCK_TOL: f64 = 1e-7;
const REFACTOR_EVERY: usize = 100;
/// Smallest pivot accepted when driving a zero artificial out of the basis.
const DRIVE_TOL: f64 = 1e-6;
const FEASIBLE_TOL: f64 = 1e-12;

impl Lp {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a variable with objective coefficient `c`, returns its index.
    pub fn add_var(&mut self, c: f64, free: bool) -> usize {
        self.objective.push(c);
        self.free.push(free);
        self.objective.len() - 1
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> usize {
        debug_assert!(coeffs.iter().all(|&(j, _)| j < self.objective.len()));
        self.rows.push(Row { coeffs, sense, rhs });
        self.rows.len() - 1
    }

    /// Suggests `var` as the basic variable of `row` in the starting basis.
    /// Hints are applied in the order given and dropped as a whole if they
    /// do not produce a feasible start.
    pub fn hint_basis(&mut self, var: usize, row: usize) {
        self.hints.push((var, row));
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// Number of tableau cells the solver would allocate.
    pub fn tableau_size(&self) -> usize {
        let n_struct: usize = self.free.iter().map(|&f| if f { 2 } else { 1 }).sum();
        let m = self.rows.len();
        (m + 1) * (n_struct + 2 * m + 1)
    }

    pub fn solve(&self) -> Result<LpSolution, LpError> {
        let (scaled, rs, cs, os) = self.equilibrate();
        let mut tab = Tableau::build(&scaled);
        if !scaled.hints.is_empty() && !tab.crash(&scaled.hints) {
            tab = Tableau::build(&scaled);
        }
        let sol = tab.run(&scaled)?;
        Ok(LpSolution {
            objective: sol.objective / os,
            x: sol.x.iter().zip(&cs).map(|(x, c)| x * c).collect(),
            duals: sol.duals.iter().zip(&rs).map(|(y, r)| y * r / os).collect(),
            iterations: sol.iterations,
        })
    }

    /// Power-of-two row, column and objective scaling so every row and
    /// column has its largest entry near one. Returns the scaled program
    /// with the row, column and objective factors.
    fn equilibrate(&self) -> (Lp, Vec<f64>, Vec<f64>, f64) {
        let pow2 = |m: f64| if m > 0.0 { (-m.log2().round()).exp2() } else { 1.0 };
        let n = self.objective.len();
        let mut rs = vec![1.0; self.rows.len()];
        let mut cs = vec![1.0; n];
        for _ in 0..2 {
            for (r, row) in self.rows.iter().enumerate() {
                let m = row.coeffs.iter().map(|&(j, a)| (a * cs[j]).abs()).fold(0.0, f64::max);
                rs[r] = pow2(m);
            }
            let mut colmax = vec![0.0f64; n];
            for (r, row) in self.rows.iter().enumerate() {
                for &(j, a) in &row.coeffs {
                    colmax[j] = colmax[j].max((a * rs[r]).abs());
                }
            }
            for j in 0..n {
                cs[j] = pow2(colmax[j]);
            }
        }
        let om = self.objective.iter().zip(&cs).map(|(c, s)| (c * s).abs()).fold(0.0, f64::max);
        let os = pow2(om);
        let scaled = Lp {
            objective: self.objective.iter().zip(&cs).map(|(c, s)| c * s * os).collect(),
            free: self.free.clone(),
            hints: self.hints.clone(),
            rows: self
                .rows
                .iter()
                .zip(&rs)
                .map(|(row, r)| Row {
                    coeffs: row.coeffs.iter().map(|&(j, a)| (j, a * r * cs[j])).collect(),
                    sense: row.sense,
                    rhs: row.rhs * r,
                })
                .collect(),
        };
        (scaled, rs, cs, os)
    }
}

struct Tableau {
    m: usize,
    width: usize,
    cells: Vec<f64>,
    basis: Vec<usize>,
    /// Structural columns: `(variable, sign)`.
    structural: Vec<(usize, f64)>,
    /// Column holding the unit vector of each row, and the row's sign flip.
    unit_col: Vec<usize>,
    flipped: Vec<bool>,
    artificial_start: usize,
    n_cols: usize,
    /// Split partner of each structural column, `usize::MAX` if none.
    partner: Vec<usize>,
    is_basic: Vec<bool>,
    col_of: Vec<usize>,
    /// Constraint rows as built, for refactoring.
    original: Vec<f64>,
    costs: Vec<f64>,
    since_refactor: usize,
}

impl Tableau {
    fn build(lp: &Lp) -> Self {
        let m = lp.rows.len();
        let mut structural = Vec::new();
        let mut col_of = Vec::with_capacity(lp.objective.len());
        for (j, &free) in lp.free.iter().enumerate() {
            col_of.push(structural.len());
            structural.push((j, 1.0));
            if free {
                structural.push((j, -1.0));
            }
        }
        let n_struct = structural.len();
        let mut partner = vec![usize::MAX; n_struct];
        for (j, &free) in lp.free.iter().enumerate() {
            if free {
                partner[col_of[j]] = col_of[j] + 1;
                partner[col_of[j] + 1] = col_of[j];
            }
        }
        let mut flipped = vec![false; m];
        let mut senses = Vec::with_capacity(m);
        for (r, row) in lp.rows.iter().enumerate() {
            let mut s = row.sense;
            if row.rhs < 0.0 {
                flipped[r] = true;
                s = match s {
                    Sense::Le => Sense::Ge,
                    Sense::Ge => Sense::Le,
                    Sense::Eq => Sense::Eq,
                };
            }
            senses.push(s);
        }
        let n_slack = senses.iter().filter(|s| **s != Sense::Eq).count();
        let n_art = senses.iter().filter(|s| **s != Sense::Le).count();
        let artificial_start = n_struct + n_slack;
        let n_cols = artificial_start + n_art;
        let width = n_cols + 1;
        let mut cells = vec![0.0; (m + 1) * width];
        let mut basis = vec![0; m];
        let mut unit_col = vec![0; m];
        let (mut next_slack, mut next_art) = (n_struct, artificial_start);
        for (r, row) in lp.rows.iter().enumerate() {
            let sign = if flipped[r] { -1.0 } else { 1.0 };
            let base = r * width;
            for &(j, a) in &row.coeffs {
                let c = col_of[j];
                cells[base + c] += sign * a;
                if lp.free[j] {
                    cells[base + c + 1] -= sign * a;
                }
            }
            cells[base + n_cols] = sign * row.rhs;
            match senses[r] {
                Sense::Le => {
                    cells[base + next_slack] = 1.0;
                    basis[r] = next_slack;
                    unit_col[r] = next_slack;
                    next_slack += 1;
                }
                Sense::Ge => {
                    cells[base + next_slack] = -1.0;
                    next_slack += 1;
                    cells[base + next_art] = 1.0;
                    basis[r] = next_art;
                    unit_col[r] = next_art;
                    next_art += 1;
                }
                Sense::Eq => {
                    cells[base + next_art] = 1.0;
                    basis[r] = next_art;
                    unit_col[r] = next_art;
                    next_art += 1;
                }
            }
        }
        let mut is_basic = vec![false; n_cols];
        for &b in &basis {
            is_basic[b] = true;
        }
        let original = cells[..m * width].to_vec();
        Tableau {
            original,
            costs: Vec::new(),
            since_refactor: 0,
            col_of,
            partner,
            is_basic,
            m,
            width,
            cells,
            basis,
            structural,
            unit_col,
            flipped,
            artificial_start,
            n_cols,
        }
    }

    /// Pivots hinted columns into rows still held by artificials. Returns
    /// false if the resulting basis is not primal feasible.
    fn crash(&mut self, hints: &[(usize, usize)]) -> bool {
        let w = self.width;
        for &(var, row) in hints {
            let c = self.col_of[var];
            if self.basis[row] >= self.artificial_start && self.cells[row * w + c].abs() > PIVOT_TOL {
                self.pivot(row, c);
            }
        }
        (0..self.m).all(|r| self.cells[r * w + self.n_cols] >= -1e-12)
    }

    fn obj_row(&self) -> usize {
        self.m * self.width
    }

    fn set_objective(&mut self, costs: &[f64]) {
        self.costs = costs.to_vec();
        let o = self.obj_row();
        self.cells[o..o + self.n_cols].copy_from_slice(&costs[..self.n_cols]);
        self.cells[o + self.n_cols] = 0.0;
        for r in 0..self.m {
            let cb = costs[self.basis[r]];
            if cb != 0.0 {
                for c in 0..self.width {
                    let v = self.cells[r * self.width + c];
                    self.cells[o + c] -= cb * v;
                }
            }
        }
    }

    /// Rebuilds the constraint rows as `B⁻¹ A` from the original data by
    /// Gaussian elimination with partial pivoting, then the objective row.
    /// Returns false if the basis matrix is numerically singular.
    fn refactor(&mut self) -> bool {
        let (m, w) = (self.m, self.width);
        let aw = m + w;
        let mut aug = vec![0.0; m * aw];
        for r in 0..m {
            for (c, &b) in self.basis.iter().enumerate() {
                aug[r * aw + c] = self.original[r * w + b];
            }
            aug[r * aw + m..(r + 1) * aw].copy_from_slice(&self.original[r * w..(r + 1) * w]);
        }
        for c in 0..m {
            let piv = (c..m)
                .max_by(|&a, &b| aug[a * aw + c].abs().total_cmp(&aug[b * aw + c].abs()))
                .expect("nonempty");
            if aug[piv * aw + c].abs() < 1e-13 {
                return false;
            }
            if piv != c {
                for k in 0..aw {
                    aug.swap(piv * aw + k, c * aw + k);
                }
            }
            let inv = 1.0 / aug[c * aw + c];
            for k in c..aw {
                aug[c * aw + k] *= inv;
            }
            let (head, tail) = aug.split_at_mut(c * aw);
            let (prow, rest) = tail.split_at_mut(aw);
            let eliminate = |row: &mut [f64]| {
                let f = row[c];
                if f != 0.0 {
                    for k in c..aw {
                        row[k] -= f * prow[k];
                    }
                }
            };
            head.chunks_mut(aw).for_each(eliminate);
            rest.chunks_mut(aw).for_each(eliminate);
        }
        for r in 0..m {
            self.cells[r * w..(r + 1) * w].copy_from_slice(&aug[r * aw + m..(r + 1) * aw]);
            for (c, &b) in self.basis.iter().enumerate() {
                self.cells[r * w + b] = (r == c) as u8 as f64;
            }
            let b = &mut self.cells[r * w + self.n_cols];
            if *b < 0.0 && *b > -1e-9 {
                *b = 0.0;
            }
        }
        let costs = std::mem::take(&mut self.costs);
        self.set_objective(&costs);
        self.since_refactor = 0;
        true
    }

    /// Refactoring pays off on small tableaus only.
    fn refactor_cheap(&self) -> bool {
        (self.m * self.m) as f64 * (self.m + self.width) as f64 <= 2e8
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.width;
        let inv = 1.0 / self.cells[pr * w + pc];
        for c in 0..w {
            self.cells[pr * w + c] *= inv;
        }
        self.cells[pr * w + pc] = 1.0;
        let (before, rest) = self.cells.split_at_mut(pr * w);
        let (prow, after) = rest.split_at_mut(w);
        let update = |row: &mut [f64]| {
            let f = row[pc];
            if f != 0.0 {
                for (x, p) in row.iter_mut().zip(prow.iter()) {
                    *x -= f * p;
                }
                row[pc] = 0.0;
            }
        };
        for row in before.chunks_mut(w) {
            update(row);
        }
        for row in after.chunks_mut(w) {
            update(row);
        }
        self.is_basic[self.basis[pr]] = false;
        self.is_basic[pc] = true;
        self.basis[pr] = pc;
    }

    /// The other half of a split free variable is basic: entering `c` would
    /// only move along the zero-cost ray of the pair.
    fn partner_basic(&self, c: usize) -> bool {
        let Some(&p) = self.partner.get(c) else { return false };
        p != usize::MAX && self.is_basic[p]
    }

    /// Runs simplex iterations on the current objective row.
    ///
    /// Leaving rows are picked with a two-pass Harris test: among rows whose
    /// ratio is within `HARRIS_TOL` of the minimum, the largest pivot wins.
    /// After a long run of degenerate pivots the entering column follows
    /// Bland's rule.
    fn iterate(&mut self, allow: usize, limit: usize, count: &mut usize, phase_one: bool) -> Result<(), LpError> {
        let w = self.width;
        let rhs = self.n_cols;
        let mut degenerate_streak = 0usize;
        let mut blocked = vec![false; allow];
        let mut rechecks = 0;
        loop {
            if self.since_refactor >= REFACTOR_EVERY && self.refactor_cheap() {
                self.refactor();
            }
            if *count >= limit {
                return Err(LpError::IterationLimit(limit));
            }
            let o = self.obj_row();
            if phase_one && self.cells[o + rhs].abs() <= FEASIBLE_TOL {
                // all artificials are at zero; further pivots only chase noise
                return Ok(());
            }
            let bland = degenerate_streak > 50;
            let mut enter = None;
            let mut best = ENTER_TOL;
            for c in 0..allow {
                let d = self.cells[o + c];
                if d > best && !blocked[c] && !self.is_basic[c] && !self.partner_basic(c) {
                    enter = Some(c);
                    if bland {
                        break;
                    }
                    best = d;
                }
            }
            let Some(pc) = enter else {
                // confirm optimality on freshly factored rows
                if rechecks < 2 && self.since_refactor > 0 && self.refactor_cheap() && self.refactor() {
                    rechecks += 1;
                    continue;
                }
                return Ok(());
            };
            let mut theta = f64::INFINITY;
            for r in 0..self.m {
                let a = self.cells[r * w + pc];
                if a > PIVOT_TOL {
                    theta = theta.min((self.cells[r * w + rhs].max(0.0) + HARRIS_TOL) / a);
                }
            }
            let mut leave: Option<usize> = None;
            let mut best_a = 0.0;
            let mut ratio = 0.0;
            for r in 0..self.m {
                let a = self.cells[r * w + pc];
                if a > PIVOT_TOL {
                    let rr = self.cells[r * w + rhs].max(0.0) / a;
                    if rr <= theta {
                        let better = match leave {
                            None => true,
                            Some(l) if bland => self.basis[r] < self.basis[l],
                            Some(_) => a > best_a,
                        };
                        if better {
                            leave = Some(r);
                            best_a = a;
                            ratio = rr;
                        }
                    }
                }
            }
            let Some(pr) = leave else {
                if self.cells[o + pc] <= BLOCK_TOL {
                    // a numerically zero improvement along a ray
                    blocked[pc] = true;
                    continue;
                }
                if self.since_refactor > 0 && self.refactor() {
                    continue;
                }
                return Err(LpError::Unbounded);
            };
            if ratio <= 1e-14 {
                degenerate_streak += 1;
            } else {
                degenerate_streak = 0;
            }
            self.pivot(pr, pc);
            self.since_refactor += 1;
            blocked.iter_mut().for_each(|b| *b = false);
            // Harris steps may leave tiny negative levels behind
            for r in 0..self.m {
                let b = &mut self.cells[r * w + rhs];
                if *b < 0.0 && *b > -HARRIS_TOL {
                    *b = 0.0;
                }
            }
            *count += 1;
        }
    }

    fn run(mut self, lp: &Lp) -> Result<LpSolution, LpError> {
        let limit = 50 * (self.m + self.n_cols) + 1000;
        let mut count = 0;
        let w = self.width;
        if self.artificial_start < self.n_cols {
            let mut costs = vec![0.0; self.n_cols];
            for c in costs.iter_mut().skip(self.artificial_start) {
                *c = -1.0;
            }
            self.set_objective(&costs);
            self.iterate(self.n_cols, limit, &mut count, true)?;
            let infeas = self.cells[self.obj_row() + self.n_cols];
            let scale = 1.0 + lp.rows.iter().map(|r| r.rhs.abs()).fold(0.0, f64::max);
            if infeas > 1e-9 * scale {
                return Err(LpError::Infeasible(infeas));
            }
            // Drive zero-level artificials out of the basis where possible.
            for r in 0..self.m {
                if self.basis[r] >= self.artificial_start {
                    let mut best: Option<(usize, f64)> = None;
                    for c in 0..self.artificial_start {
                        let a = self.cells[r * w + c].abs();
                        if a > DRIVE_TOL && best.is_none_or(|(_, b)| a > b) {
                            best = Some((c, a));
                        }
                    }
                    if let Some((c, _)) = best {
                        self.pivot(r, c);
                    }
                }
            }
        }
        let mut costs = vec![0.0; self.n_cols];
        for (c, &(j, s)) in self.structural.iter().enumerate() {
            costs[c] = s * lp.objective[j];
        }
        self.set_objective(&costs);
        self.iterate(self.artificial_start, limit, &mut count, false)?;

        let mut x = vec![0.0; lp.objective.len()];
        for r in 0..self.m {
            let b = self.basis[r];
            if b < self.structural.len() {
                let (j, s) = self.structural[b];
                x[j] += s * self.cells[r * w + self.n_cols];
            }
        }
        let o = self.obj_row();
        let duals = (0..self.m)
            .map(|r| {
                let y = -self.cells[o + self.unit_col[r]];
                if self.flipped[r] {
                    -y
                } else {
                    y
                }
            })
            .collect();
        let objective = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        Ok(LpSolution {
            objective,
            x,
            duals,
            iterations: count,
        })
    }
}
