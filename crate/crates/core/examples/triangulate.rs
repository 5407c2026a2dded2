//! Triangulate Δ(K), split a belief onto its cell and certify the (α, C)
//! constants.

use absorbing_values::coupling_sim::path_rng;
use absorbing_values::triangulation::{triangulation_stats, Triangulation};

fn main() {
    let tri = Triangulation::new(3, 4).unwrap();
    let p = [0.5, 0.3, 0.2];
    println!("split of {p:?}:");
    for (v, a) in tri.split(&p).unwrap() {
        println!("  {:.3} × {:?}", a, tri.vertex(v));
    }

    for n in [2, 4, 8, 16] {
        let t = Triangulation::new(3, n).unwrap();
        let s = triangulation_stats(&t, 20_000, &mut path_rng(1, n as u64)).unwrap();
        println!(
            "N={n:<3} vertices {:<4} cells {:<4} stepsize {:.4} (≤ {:.4}) C_cert {:.3} C_loose {:.3}",
            s.n_vertices, s.n_cells, s.stepsize, s.stepsize_bound, s.c_cert, s.c_loose
        );
    }
}
