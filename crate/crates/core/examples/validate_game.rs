//! Load a game file, validate it and list its absorbing states.
//!
//! cargo run --example validate_game -- fixtures/big_match.json

use std::path::PathBuf;

use absorbing_values::game_model::{augment_safety, classify_states, load_game_spec, validate_game};

fn main() {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/big_match.json"));
    let spec = load_game_spec(&path).expect("readable game file");
    let d = spec.dims();
    println!(
        "{}: |K|={} |L|={} |Ω|={} |I|={} |J|={}",
        path.display(),
        d.k,
        d.l,
        d.states,
        d.i,
        d.j
    );

    let report = validate_game(&spec);
    for v in &report.violations {
        println!("  violation: {v}");
    }
    if !report.is_ok() {
        std::process::exit(1);
    }
    let info = classify_states(&spec).unwrap();
    for (w, name) in spec.states.iter().enumerate() {
        let tag = if w == info.omega0 { "non-absorbing" } else { "absorbing" };
        println!("  {name:<12} {tag}");
    }
    println!("‖g‖∞ = {}", spec.g_inf());

    // the safety augmentation adds an absorbing escape state
    let aug = augment_safety(&spec).unwrap();
    println!("augmented game has {} states", aug.dims().states);
}
