//! Make a revealing action concise and ambiguous with the silent mapping.

use absorbing_values::belief_kernel::{l1, marginal, posterior, MixedAction};
use absorbing_values::strategy_transforms::{
    check_witness, classify_nr, concise_ambiguous_check, eps0, make_convexification_witness, silent_map,
};

fn main() {
    let eps = 0.1;
    let e0 = eps0(eps).unwrap();
    let p = [0.6, 0.4];
    // action 0 is nearly non-revealing, action 2 reveals type 1
    let x = MixedAction::from_rows(&[vec![0.50, 0.45, 0.05], vec![0.48, 0.22, 0.30]]).unwrap();
    let xs = silent_map(&x, &p, e0).unwrap();

    println!("ε = {eps}, ε₀ = {e0:.5}");
    println!("NR set of x at ε₀: {:?}", classify_nr(&x, &p, e0).nr);
    println!("marginals: {:?} -> {:?}", marginal(&x, &p), marginal(&xs, &p));
    for i in 0..3 {
        let (a, b) = (posterior(&x, &p, i), posterior(&xs, &p, i));
        println!("  i={i}: p^x = {a:.3?}  p^x' = {b:.3?}  shift {:.3}", l1(&a, &b));
    }
    println!("{:?}", concise_ambiguous_check(&xs, &p, eps));

    let w = make_convexification_witness(&x, &p, eps).unwrap();
    let r = check_witness(&w, &x, &p);
    println!("witness: {r:?}\n  holds at 6ε: {}", r.holds(w.epsilon, 1e-9));
}
