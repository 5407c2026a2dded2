//! Rebuild payoff and transition of the finite belief game from their
//! separable form on a two-sided game.

use absorbing_values::coupling_sim::path_rng;
use absorbing_values::game_model::catalog;
use absorbing_values::triangulation::Triangulation;
use absorbing_values::value_engine::{build_gamma_f, separable_decomposition_check};

fn main() {
    let mut rng = path_rng(9, 0);
    let spec = catalog::random_absorbing(&mut rng, 2, 3, 2, 2, 2);
    let g = build_gamma_f(&spec, &Triangulation::new(2, 4).unwrap(), &Triangulation::new(3, 2).unwrap());
    println!("{} belief states", g.n_states());
    let r = separable_decomposition_check(&g, 1000, &mut rng);
    println!("{r:?}");
    println!("exact to 1e-12: {}", r.holds(1e-12));
}
