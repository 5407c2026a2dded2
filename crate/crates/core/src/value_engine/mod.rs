//! Discounted values of Γ^f by value iteration.
//!
//! Stage games over the compact action sets are restricted to barycentric
//! grids and solved as matrix games. States whose base state is absorbing
//! are assigned their exact value `Σ p(k) q(l) g(k, l, ω)` directly.

mod checks;
mod gamma_f;
mod grid;
mod matrix_game;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{precondition, Error, Result};

pub use checks::{
    eta_stage_check, frontier_lipschitz_check, separable_decomposition_check, DecompositionReport, EtaReport, FrontierReport,
};
pub use gamma_f::{build_gamma_f, BeliefState, FiniteBeliefGame, StageTable};
pub use grid::ActionGrid;
pub use matrix_game::{guarantees, matrix_game_value, MatrixGameSolution};

#[derive(Debug, Clone, Serialize)]
pub struct ValueFunction {
    pub values: Vec<f64>,
    pub lambda: f64,
    pub residual: f64,
    pub iterations: usize,
    /// Largest duality gap met in the last sweep.
    pub max_gap: f64,
}

impl ValueFunction {
    pub fn zeros(g: &FiniteBeliefGame, lambda: f64) -> Self {
        ValueFunction {
            values: vec![0.0; g.n_states()],
            lambda,
            residual: f64::INFINITY,
            iterations: 0,
            max_gap: 0.0,
        }
    }

    pub fn at(&self, g: &FiniteBeliefGame, s: BeliefState) -> f64 {
        self.values[g.index(s)]
    }
}

/// Grids for both players plus the cached stage tables of every
/// non-absorbing state.
pub struct StageCache<'a> {
    pub game: &'a FiniteBeliefGame,
    pub gx: ActionGrid,
    pub gy: ActionGrid,
    tables: Vec<Option<StageTable>>,
}

impl<'a> StageCache<'a> {
    pub fn new(game: &'a FiniteBeliefGame, gx: ActionGrid, gy: ActionGrid) -> Self {
        let d = game.spec.dims();
        assert_eq!((gx.types, gx.actions), (d.k, d.i), "Player 1 grid has the wrong shape");
        assert_eq!((gy.types, gy.actions), (d.l, d.j), "Player 2 grid has the wrong shape");
        let tables = (0..game.n_states())
            .into_par_iter()
            .map(|idx| {
                let s = game.state(idx);
                (!game.is_absorbing(s.w)).then(|| StageTable::build(game, game.p(s), game.q(s), s.w, &gx, &gy))
            })
            .collect();
        StageCache { game, gx, gy, tables }
    }

    pub fn table(&self, idx: usize) -> Option<&StageTable> {
        self.tables[idx].as_ref()
    }

    /// One Shapley sweep. Returns the new values and the largest duality gap.
    pub fn sweep(&self, v: &[f64], lambda: f64) -> (Vec<f64>, f64) {
        let g = self.game;
        let out: Vec<(f64, f64)> = (0..g.n_states())
            .into_par_iter()
            .map(|idx| {
                let s = g.state(idx);
                match &self.tables[idx] {
                    None => (g.absorbing_value(g.p(s), g.q(s), s.w), 0.0),
                    Some(t) => {
                        let m = t.matrix(v, lambda);
                        let sol = matrix_game_value(t.rows, t.cols, &m);
                        (sol.value, sol.gap)
                    }
                }
            })
            .collect();
        let gap = out.iter().fold(0.0, |a: f64, e| a.max(e.1));
        (out.into_iter().map(|e| e.0).collect(), gap)
    }

    /// Optimal grid mixes of both players at one state under continuation `v`.
    pub fn stage_solution(&self, idx: usize, v: &[f64], lambda: f64) -> Option<MatrixGameSolution> {
        let t = self.tables[idx].as_ref()?;
        Some(matrix_game_value(t.rows, t.cols, &t.matrix(v, lambda)))
    }
}

/// The Shapley operator on the grid: one sweep from `v`.
pub fn shapley_operator(g: &FiniteBeliefGame, v: &ValueFunction, gx: &ActionGrid, gy: &ActionGrid) -> ValueFunction {
    let cache = StageCache::new(g, gx.clone(), gy.clone());
    let (values, gap) = cache.sweep(&v.values, v.lambda);
    let residual = sup_dist(&values, &v.values);
    ValueFunction {
        values,
        lambda: v.lambda,
        residual,
        iterations: v.iterations + 1,
        max_gap: gap,
    }
}

pub fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// `10 ⌈log(tol λ / 2‖g‖∞) / log(1 - λ)⌉`
pub fn iteration_cap(lambda: f64, tol: f64, g_inf: f64) -> usize {
    if lambda >= 1.0 || g_inf == 0.0 {
        return 10;
    }
    let n = ((tol * lambda / (2.0 * g_inf)).ln() / (1.0 - lambda).ln()).ceil();
    10 * (n.max(1.0) as usize)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(precondition(format!("λ = {lambda} outside (0, 1]")));
    }
    Ok(())
}

/// Value iteration until the residual is at most `tol·λ`.
pub fn solve_discounted(g: &FiniteBeliefGame, lambda: f64, gx: &ActionGrid, gy: &ActionGrid, tol: f64) -> Result<ValueFunction> {
    let cache = StageCache::new(g, gx.clone(), gy.clone());
    solve_with_cache(&cache, lambda, tol, None)
}

pub fn solve_with_cache(cache: &StageCache, lambda: f64, tol: f64, start: Option<&[f64]>) -> Result<ValueFunction> {
    check_lambda(lambda)?;
    if tol <= 0.0 {
        return Err(precondition("tol must be positive"));
    }
    let cap = iteration_cap(lambda, tol, cache.game.spec.g_inf());
    let mut v = start.map_or_else(|| vec![0.0; cache.game.n_states()], |s| s.to_vec());
    for it in 1..=cap {
        let (next, gap) = cache.sweep(&v, lambda);
        let residual = sup_dist(&next, &v);
        v = next;
        if residual <= tol * lambda {
            return Ok(ValueFunction {
                values: v,
                lambda,
                residual,
                iterations: it,
                max_gap: gap,
            });
        }
    }
    let (next, _) = cache.sweep(&v, lambda);
    Err(Error::Precondition(format!(
        "value iteration cap {cap} reached with residual {:.3e}",
        sup_dist(&next, &v)
    )))
}

/// Stationary grid strategies read off the stage games at the fixed point.
#[derive(Debug, Clone, Serialize)]
pub struct GridStrategies {
    /// Per state: Player 1's mix over grid points (empty at absorbing states).
    pub player1: Vec<Vec<(usize, f64)>>,
    pub player2: Vec<Vec<(usize, f64)>>,
}

pub fn optimal_strategies(cache: &StageCache, v: &ValueFunction) -> GridStrategies {
    let sols: Vec<Option<MatrixGameSolution>> = (0..cache.game.n_states())
        .into_par_iter()
        .map(|idx| cache.stage_solution(idx, &v.values, v.lambda))
        .collect();
    let sparse = |m: &[f64]| -> Vec<(usize, f64)> { m.iter().enumerate().filter(|(_, a)| **a > 1e-12).map(|(i, a)| (i, *a)).collect() };
    let mut out = GridStrategies {
        player1: Vec::new(),
        player2: Vec::new(),
    };
    for s in sols {
        match s {
            Some(s) => {
                out.player1.push(sparse(&s.row));
                out.player2.push(sparse(&s.col));
            }
            None => {
                out.player1.push(vec![(0, 1.0)]);
                out.player2.push(vec![(0, 1.0)]);
            }
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitTable {
    pub lambdas: Vec<f64>,
    pub values: Vec<ValueFunction>,
    /// Per state: max - min over the last three ladder points.
    pub oscillation: Vec<f64>,
    pub max_oscillation: f64,
}

pub fn limit_value_estimate(g: &FiniteBeliefGame, gx: &ActionGrid, gy: &ActionGrid, ladder: &[f64], tol: f64) -> Result<LimitTable> {
    if ladder.is_empty() || ladder.windows(2).any(|w| w[1] >= w[0]) {
        return Err(precondition("λ ladder must be strictly decreasing"));
    }
    let cache = StageCache::new(g, gx.clone(), gy.clone());
    let mut values: Vec<ValueFunction> = Vec::new();
    for &lam in ladder {
        // warm start from the previous ladder point
        let start = values.last().map(|v| v.values.clone());
        values.push(solve_with_cache(&cache, lam, tol, start.as_deref())?);
    }
    let tail = &values[values.len().saturating_sub(3)..];
    let oscillation: Vec<f64> = (0..g.n_states())
        .map(|s| {
            let hi = tail.iter().map(|v| v.values[s]).fold(f64::NEG_INFINITY, f64::max);
            let lo = tail.iter().map(|v| v.values[s]).fold(f64::INFINITY, f64::min);
            hi - lo
        })
        .collect();
    let max_oscillation = oscillation.iter().cloned().fold(0.0, f64::max);
    Ok(LimitTable {
        lambdas: ladder.to_vec(),
        values,
        oscillation,
        max_oscillation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game_model::{catalog, Dims, GameSpec};
    use crate::triangulation::Triangulation;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn big_match_game() -> FiniteBeliefGame {
        let t1 = Triangulation::new(1, 1).unwrap();
        build_gamma_f(&catalog::big_match(), &t1, &t1)
    }

    #[test]
    fn constant_payoff_one_sweep() {
        let d = Dims {
            k: 2,
            l: 1,
            states: 1,
            i: 2,
            j: 2,
        };
        let spec = GameSpec::from_fn(d, |_, _, _, _| 1.0, |_, _, _, _, _| 0.7).unwrap();
        let tk = Triangulation::new(2, 2).unwrap();
        let tl = Triangulation::new(1, 1).unwrap();
        let g = build_gamma_f(&spec, &tk, &tl);
        let (gx, gy) = (ActionGrid::new(2, 2, 2), ActionGrid::new(2, 1, 2));
        let v = ValueFunction::zeros(&g, 0.3);
        let out = shapley_operator(&g, &v, &gx, &gy);
        for val in out.values {
            // the single state is absorbing: exact value, not λc
            assert!((val - 0.7).abs() < 1e-15);
        }
    }

    #[test]
    fn constant_payoff_nonabsorbing_is_lambda_c() {
        // two states swapping each stage: nothing absorbs
        let d = Dims {
            k: 1,
            l: 1,
            states: 2,
            i: 2,
            j: 2,
        };
        let spec = GameSpec::from_fn(d, |w, _, _, w2| (w != w2) as u8 as f64, |_, _, _, _, _| 0.4).unwrap();
        let t1 = Triangulation::new(1, 1).unwrap();
        let g = build_gamma_f(&spec, &t1, &t1);
        let (gx, gy) = (ActionGrid::new(1, 1, 2), ActionGrid::new(1, 1, 2));
        let out = shapley_operator(&g, &ValueFunction::zeros(&g, 0.25), &gx, &gy);
        for val in out.values {
            assert!((val - 0.1).abs() < 1e-15);
        }
    }

    #[test]
    fn all_absorbing_one_iteration() {
        let d = Dims {
            k: 2,
            l: 2,
            states: 2,
            i: 2,
            j: 2,
        };
        let spec = GameSpec::from_fn(
            d,
            |w, _, _, w2| (w == w2) as u8 as f64,
            |k, l, w, _, _| (k + 2 * l + w) as f64 * 0.1,
        )
        .unwrap();
        let t = Triangulation::new(2, 2).unwrap();
        let g = build_gamma_f(&spec, &t, &t);
        let grid = ActionGrid::new(1, 2, 2);
        let once = shapley_operator(&g, &ValueFunction::zeros(&g, 0.2), &grid, &grid);
        for idx in 0..g.n_states() {
            let s = g.state(idx);
            assert_eq!(once.values[idx], g.absorbing_value(g.p(s), g.q(s), s.w));
        }
        // the second sweep only confirms the fixed point
        let v = solve_discounted(&g, 0.2, &grid, &grid, 1e-8).unwrap();
        assert_eq!(v.iterations, 2);
        assert_eq!(v.residual, 0.0);
        assert_eq!(v.values, once.values);
        let lt = limit_value_estimate(&g, &grid, &grid, &[0.5, 0.2, 0.1], 1e-8).unwrap();
        assert_eq!(lt.max_oscillation, 0.0);
    }

    #[test]
    fn big_match_discounted() {
        let g = big_match_game();
        let grid = ActionGrid::new(4, 1, 2);
        for lam in [0.5, 0.1, 0.01] {
            let v = solve_discounted(&g, lam, &grid, &grid, 1e-6).unwrap();
            assert!((v.values[0] - 0.5).abs() < 2e-3, "λ={lam}: {}", v.values[0]);
            assert!(v.residual <= 1e-6 * lam);
            assert!(v.max_gap <= 1e-9);
        }
    }

    #[test]
    fn big_match_ladder() {
        let g = big_match_game();
        let grid = ActionGrid::new(2, 1, 2);
        let lt = limit_value_estimate(&g, &grid, &grid, &[0.5, 0.2, 0.1, 0.05], 1e-6).unwrap();
        for v in &lt.values {
            assert!((v.values[0] - 0.5).abs() < 2e-3);
        }
        assert!(lt.max_oscillation < 4e-3);
        assert!(limit_value_estimate(&g, &grid, &grid, &[0.1, 0.2], 1e-6).is_err());
    }

    #[test]
    fn values_bounded_and_player2_refinement_helps_player2() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let spec = catalog::random_one_sided(&mut rng, 2, 2, 2, 2);
        let tk = Triangulation::new(2, 2).unwrap();
        let tl = Triangulation::new(1, 1).unwrap();
        let g = build_gamma_f(&spec, &tk, &tl);
        let gx = ActionGrid::new(2, 2, 2);
        let coarse = solve_discounted(&g, 0.3, &gx, &ActionGrid::new(1, 1, 2), 1e-7).unwrap();
        let fine = solve_discounted(&g, 0.3, &gx, &ActionGrid::new(4, 1, 2), 1e-7).unwrap();
        for (c, f) in coarse.values.iter().zip(&fine.values) {
            assert!(f <= &(c + 1e-6));
            assert!(c.abs() <= spec.g_inf() + 1e-12);
        }
        let x_fine = solve_discounted(&g, 0.3, &ActionGrid::new(4, 2, 2), &ActionGrid::new(1, 1, 2), 1e-7).unwrap();
        for (c, f) in coarse.values.iter().zip(&x_fine.values) {
            assert!(f >= &(c - 1e-6));
        }
    }

    #[test]
    fn refinement_ladder_reports_changes() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let spec = catalog::random_one_sided(&mut rng, 2, 2, 2, 1);
        let tk = Triangulation::new(2, 2).unwrap();
        let tl = Triangulation::new(1, 1).unwrap();
        let g = build_gamma_f(&spec, &tk, &tl);
        let mut prev: Option<Vec<f64>> = None;
        let mut changes = Vec::new();
        for m in [1, 2, 4, 8] {
            let v = solve_discounted(&g, 0.3, &ActionGrid::new(m, 2, 2), &ActionGrid::new(m, 1, 2), 1e-8).unwrap();
            if let Some(p) = prev {
                changes.push(sup_dist(&p, &v.values));
            }
            prev = Some(v.values);
        }
        // diagnostic only: the ladder is finite and recorded
        assert_eq!(changes.len(), 3);
        assert!(changes.iter().all(|c| c.is_finite()));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn shapley_contracts(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let spec = catalog::random_absorbing(&mut rng, 2, 2, 2, 2, 2);
            let t = Triangulation::new(2, 2).unwrap();
            let g = build_gamma_f(&spec, &t, &t);
            let grid = ActionGrid::new(1, 2, 2);
            let lam = rng.gen_range(0.05..0.95);
            let cache = StageCache::new(&g, grid.clone(), grid);
            let v1: Vec<f64> = (0..g.n_states()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let v2: Vec<f64> = (0..g.n_states()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (t1, _) = cache.sweep(&v1, lam);
            let (t2, _) = cache.sweep(&v2, lam);
            prop_assert!(sup_dist(&t1, &t2) <= (1.0 - lam) * sup_dist(&v1, &v2) + 1e-9);
        }
    }
}
