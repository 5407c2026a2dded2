//! Belief variation of a partially revealing strategy.

use absorbing_values::belief_kernel::MixedAction;
use absorbing_values::coupling_sim::{simulate_eta, ConstantStrategy, Lottery};
use absorbing_values::game_model::{Dims, GameSpec};

fn revealing(p: &[f64], _: &[f64], _: usize) -> Lottery {
    let a = 0.7 + 0.2 * (p[0] - 0.5);
    vec![(1.0, MixedAction::from_rows(&[vec![a, 1.0 - a], vec![1.0 - a, a]]).unwrap())]
}

fn main() {
    // one state that never absorbs, so play lasts the whole horizon
    let d = Dims {
        k: 2,
        l: 1,
        states: 1,
        i: 2,
        j: 2,
    };
    let spec = GameSpec::from_fn(d, |_, _, _, _| 1.0, |k, _, _, i, j| ((k + i + j) % 2) as f64).unwrap();
    let tau = ConstantStrategy(MixedAction::type_independent(1, &[0.5, 0.5]));
    for horizon in [10, 40, 160] {
        let s = simulate_eta(&spec, &revealing, &tau, &[0.5, 0.5], &[1.0], 0, horizon, 2000, 3, 0.25).unwrap();
        println!(
            "H={horizon:<4} E Σ‖Δp‖₁ = {:.3} ± {:.3}   Σ E‖Δp‖₂² = {:.4} ± {:.4}   martingale ok: {}",
            s.variation.mean,
            s.variation.se,
            s.squared_variation.mean,
            s.squared_variation.se,
            s.martingale_ok()
        );
    }
}
