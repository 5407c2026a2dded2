//! Re-centre an action from prior p to a nearby prior p'.

use absorbing_values::belief_kernel::{marginal, posterior, MixedAction};
use absorbing_values::strategy_transforms::{in_translation_domain, translation_map};

fn main() {
    let p = [0.5, 0.5];
    let pp = [0.55, 0.45];
    let x = MixedAction::from_rows(&[vec![0.7, 0.3], vec![0.4, 0.6]]).unwrap();
    assert!(in_translation_domain(&x, &p, &pp));
    let xt = translation_map(&x, &p, &pp);
    println!("x  = {:?}", x.data());
    println!("x' = {:.4?}", xt.data());
    println!("marginal at p {:?}, at p' {:.4?}", marginal(&x, &p), marginal(&xt, &pp));
    for i in 0..2 {
        let shift: Vec<f64> = posterior(&xt, &pp, i)
            .iter()
            .zip(posterior(&x, &p, i))
            .map(|(a, b)| a - b)
            .collect();
        println!("  posterior shift after i={i}: {shift:.4?}");
    }

    // far away priors leave the domain and the map is the identity
    let far = [0.05, 0.95];
    println!("in domain at {far:?}: {}", in_translation_domain(&x, &p, &far));
}
