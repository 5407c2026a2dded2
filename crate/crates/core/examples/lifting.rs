//! Play a grid-optimal strategy of the finite game in the original game
//! and score it both ways.

use absorbing_values::coupling_sim::{lifted_payoff, path_rng, GridPolicy};
use absorbing_values::game_model::catalog;
use absorbing_values::triangulation::Triangulation;
use absorbing_values::value_engine::{build_gamma_f, optimal_strategies, solve_with_cache, ActionGrid, BeliefState, StageCache};

fn main() {
    let lambda = 0.3;
    let spec = catalog::random_one_sided(&mut path_rng(12, 0), 2, 2, 2, 1);
    let tri = Triangulation::new(2, 4).unwrap();
    let g = build_gamma_f(&spec, &tri, &Triangulation::new(1, 1).unwrap());
    let gx = ActionGrid::new(6, 2, 2);
    let cache = StageCache::new(&g, gx.clone(), ActionGrid::new(6, 1, 2));
    let v = solve_with_cache(&cache, lambda, 1e-8, None).unwrap();
    let sigma = GridPolicy::player1(&g, gx, &optimal_strategies(&cache, &v));
    let p = [0.5, 0.5];
    let vf = v.at(
        &g,
        BeliefState {
            p: tri.vertex_index(&p).unwrap(),
            q: 0,
            w: 0,
        },
    );
    println!("v^f at {p:?} = {vf:.4}");

    for y in [[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]] {
        let tau = move |_: usize| y.to_vec();
        let r = lifted_payoff(&spec, &tri, &sigma, &tau, &p, 0, lambda, 20_000, 5).unwrap();
        println!(
            "τ = {y:?}: lifted {:.4} ± {:.4}, Γ^φ {:.4} ± {:.4}, agree {}",
            r.lifted.mean, r.lifted.se, r.phi.mean, r.phi.se, r.agree
        );
    }
}
