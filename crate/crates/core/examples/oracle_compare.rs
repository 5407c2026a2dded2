//! Refining the belief triangulation on a random one-sided game and
//! comparing v^f at p = (1/2, 1/2) with the exact value.

use absorbing_values::coupling_sim::path_rng;
use absorbing_values::exact_oracle::solve_truncated;
use absorbing_values::game_model::catalog;
use absorbing_values::triangulation::Triangulation;
use absorbing_values::value_engine::{build_gamma_f, solve_discounted, ActionGrid, BeliefState};

fn main() {
    let lambda = 0.2;
    let p = [0.5, 0.5];
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let spec = catalog::random_one_sided(&mut path_rng(seed, 0), 2, 2, 2, 2);
    let truth = solve_truncated(&spec, &p, &[1.0], 0, lambda, 1e-5).unwrap();
    println!(
        "oracle v = {:.5} (± {:.1e}, horizon {})",
        truth.value, truth.error_bound, truth.horizon
    );

    let t1 = Triangulation::new(1, 1).unwrap();
    for n in [2, 4, 8, 16] {
        let tri = Triangulation::new(2, n).unwrap();
        let g = build_gamma_f(&spec, &tri, &t1);
        let v = solve_discounted(&g, lambda, &ActionGrid::new(8, 2, 2), &ActionGrid::new(8, 1, 2), 1e-8).unwrap();
        let vf = v.at(
            &g,
            BeliefState {
                p: tri.vertex_index(&p).unwrap(),
                q: 0,
                w: 0,
            },
        );
        println!("N={n:<3} v^f = {vf:.5}  gap {:.5}", (vf - truth.value).abs());
    }
}
