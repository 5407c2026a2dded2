//! Ladder of discount factors towards 0 on a small one-sided game.

use absorbing_values::coupling_sim::path_rng;
use absorbing_values::game_model::catalog;
use absorbing_values::triangulation::Triangulation;
use absorbing_values::value_engine::{build_gamma_f, limit_value_estimate, ActionGrid, BeliefState};

fn main() {
    let spec = catalog::random_one_sided(&mut path_rng(21, 0), 2, 2, 2, 1);
    let tri = Triangulation::new(2, 4).unwrap();
    let g = build_gamma_f(&spec, &tri, &Triangulation::new(1, 1).unwrap());
    let ladder = [0.5, 0.2, 0.1, 0.05, 0.02, 0.01];
    let table = limit_value_estimate(&g, &ActionGrid::new(4, 2, 2), &ActionGrid::new(4, 1, 2), &ladder, 1e-8).unwrap();

    print!("{:>12}", "p \\ λ");
    for l in &table.lambdas {
        print!("{l:>9}");
    }
    println!();
    for v in 0..tri.n_vertices() {
        print!("{:>12}", format!("{:.2?}", tri.vertex(v)));
        for vf in &table.values {
            print!("{:>9.4}", vf.at(&g, BeliefState { p: v, q: 0, w: 0 }));
        }
        println!();
    }
    println!("largest oscillation over the last three rungs: {:.2e}", table.max_oscillation);
}
