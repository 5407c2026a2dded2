use serde::Serialize;

use crate::lp::{Lp, Sense};

/// Solution of a zero-sum matrix game; the row player maximizes.
#[derive(Debug, Clone, Serialize)]
pub struct MatrixGameSolution {
    pub value: f64,
    pub row: Vec<f64>,
    pub col: Vec<f64>,
    /// `max_i (A y)_i - min_j (x A)_j`
    pub gap: f64,
}

/// Solves the game with payoff `a[r * cols + c]`.
pub fn matrix_game_value(rows: usize, cols: usize, a: &[f64]) -> MatrixGameSolution {
    assert_eq!(a.len(), rows * cols);
    assert!(rows > 0 && cols > 0);
    if rows > cols {
        // keep the constraint count small: solve the transposed game
        let mut t = vec![0.0; rows * cols];
        for r in 0..rows {
            for c in 0..cols {
                t[c * rows + r] = -a[r * cols + c];
            }
        }
        let s = solve_oriented(cols, rows, &t);
        return finish(rows, cols, a, s.col, s.row, -s.value);
    }
    let s = solve_oriented(rows, cols, a);
    finish(rows, cols, a, s.row, s.col, s.value)
}

fn solve_oriented(rows: usize, cols: usize, a: &[f64]) -> MatrixGameSolution {
    let lo = a.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo <= 1e-15 * (1.0 + hi.abs()) {
        let mut row = vec![0.0; rows];
        let mut col = vec![0.0; cols];
        row[0] = 1.0;
        col[0] = 1.0;
        return MatrixGameSolution {
            value: a[0],
            row,
            col,
            gap: 0.0,
        };
    }
    // scale to [1, 2] so the program is well conditioned
    let scale = hi - lo;
    let mut lp = Lp::new();
    for _ in 0..cols {
        lp.add_var(1.0, false);
    }
    for r in 0..rows {
        let coeffs = (0..cols).map(|c| (c, (a[r * cols + c] - lo) / scale + 1.0)).collect();
        lp.add_row(coeffs, Sense::Le, 1.0);
    }
    let sol = lp.solve().expect("matrix game programs are feasible and bounded");
    let s: f64 = sol.x.iter().sum();
    let col = normalize(sol.x);
    let row = normalize(sol.duals);
    MatrixGameSolution {
        value: (1.0 / s - 1.0) * scale + lo,
        row,
        col,
        gap: 0.0,
    }
}

fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    v.iter_mut().for_each(|x| *x = x.max(0.0));
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        v.iter_mut().for_each(|x| *x /= s);
    } else {
        let n = v.len() as f64;
        v.iter_mut().for_each(|x| *x = 1.0 / n);
    }
    v
}

fn finish(rows: usize, cols: usize, a: &[f64], row: Vec<f64>, col: Vec<f64>, value: f64) -> MatrixGameSolution {
    let (lower, upper) = guarantees(rows, cols, a, &row, &col);
    MatrixGameSolution {
        value: value.clamp(lower.min(upper), upper.max(lower)),
        row,
        col,
        gap: (upper - lower).max(0.0),
    }
}

/// `(min_j (x A)_j, max_i (A y)_i)`
pub fn guarantees(rows: usize, cols: usize, a: &[f64], row: &[f64], col: &[f64]) -> (f64, f64) {
    let mut lower = f64::INFINITY;
    for c in 0..cols {
        let v: f64 = (0..rows).map(|r| row[r] * a[r * cols + c]).sum();
        lower = lower.min(v);
    }
    let mut upper = f64::NEG_INFINITY;
    for r in 0..rows {
        let v: f64 = (0..cols).map(|c| a[r * cols + c] * col[c]).sum();
        upper = upper.max(v);
    }
    (lower, upper)
}
