//! Discounted values of the Big Match on the finite belief game, checked
//! against the exact oracle.

use absorbing_values::exact_oracle::solve_truncated;
use absorbing_values::game_model::catalog;
use absorbing_values::triangulation::Triangulation;
use absorbing_values::value_engine::{build_gamma_f, optimal_strategies, solve_with_cache, ActionGrid, BeliefState, StageCache};

fn main() {
    let bm = catalog::big_match();
    let t1 = Triangulation::new(1, 1).unwrap();
    let g = build_gamma_f(&bm, &t1, &t1);
    let grid = ActionGrid::new(4, 1, 2);
    let cache = StageCache::new(&g, grid.clone(), grid.clone());
    let play = BeliefState { p: 0, q: 0, w: 0 };

    println!("{:>6} {:>10} {:>10} {:>8}", "λ", "v^f", "oracle", "Pr(T)");
    for lambda in [0.5, 0.2, 0.1, 0.05, 0.01] {
        let v = solve_with_cache(&cache, lambda, 1e-10, None).unwrap();
        let s = optimal_strategies(&cache, &v);
        // probability of the absorbing row under the optimal grid mix
        let top: f64 = s.player1[g.index(play)].iter().map(|&(a, m)| m * grid.point(a).get(0, 0)).sum();
        let o = solve_truncated(&bm, &[1.0], &[1.0], 0, lambda, 1e-6).unwrap();
        println!("{lambda:>6} {:>10.6} {:>10.6} {top:>8.4}", v.at(&g, play), o.value);
    }
}
