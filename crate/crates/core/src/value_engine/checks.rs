use rand::Rng;
use serde::Serialize;

use crate::belief_kernel::{in_frontier, marginal, payoff_e, posterior, sample_mixed_action, transition_e, MixedAction};
use crate::error::{precondition, Result};
use crate::exact_oracle::solve_truncated;

use super::gamma_f::{BeliefState, FiniteBeliefGame};
use super::grid::ActionGrid;
use super::ValueFunction;

#[derive(Debug, Clone, Serialize)]
pub struct EtaReport {
    /// `max_y (E(y) - F(y))`; non-positive when `v` is convex in `q`.
    pub max_e_minus_f: f64,
    /// `min_y E(y) - min_y min(E(y), F(y))`
    pub deviation: f64,
    pub value_e: f64,
    pub value_eta: f64,
}

/// Compares the two continuation branches offered to Player 2 at one stage.
///
/// With `x` fixed, `E(y)` continues at the exact posterior `q′` and `F(y)`
/// first splits `q′` onto the vertices of the `L` triangulation.
pub fn eta_stage_check<V>(g: &FiniteBeliefGame, v: V, lambda: f64, s: BeliefState, x: &MixedAction, gy: &ActionGrid) -> EtaReport
where
    V: Fn(&[f64], &[f64], usize) -> f64,
{
    let (p, q) = (g.p(s), g.q(s));
    let mut max_diff = f64::NEG_INFINITY;
    let mut min_e = f64::INFINITY;
    let mut min_eta = f64::INFINITY;
    for y in gy.points() {
        let pay = payoff_e(&g.spec, p, q, s.w, x, y);
        let (mut e, mut f) = (0.0, 0.0);
        for a in transition_e(&g.spec, p, q, s.w, x, y) {
            e += a.mass * v(&a.p, &a.q, a.state);
            let split = g.tri_l.split(&a.q).expect("posterior in the simplex");
            f += a.mass * split.iter().map(|&(qv, w)| w * v(&a.p, g.tri_l.vertex(qv), a.state)).sum::<f64>();
        }
        let e = lambda * pay + (1.0 - lambda) * e;
        let f = lambda * pay + (1.0 - lambda) * f;
        max_diff = max_diff.max(e - f);
        min_e = min_e.min(e);
        min_eta = min_eta.min(e.min(f));
    }
    EtaReport {
        max_e_minus_f: max_diff,
        deviation: min_e - min_eta,
        value_e: min_e,
        value_eta: min_eta,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DecompositionReport {
    pub samples: usize,
    pub max_payoff_error: f64,
    pub max_transition_error: f64,
}

impl DecompositionReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.max_payoff_error < tol && self.max_transition_error < tol
    }
}

/// Rebuilds `g^f` and `ρ^f` from the separable form and compares them
/// with the kernel used by the solver.
///
/// The payoff is `Σ m_{(k,i),(l,j)} a_{(k,i)} b_{(l,j)}` with
/// `m = p(k) q(l) g(k,l,ω,i,j)`, `a = x(i|k)`, `b = y(j|l)`. The transition
/// is `Σ_{i,j} ρ(ω′|ω,i,j) c_i(p′) d_j(q′)` with `c_i(p′) = x̄(i) S[p′|p^x(·|i)]`.
/// It is also rebuilt a second way, by splitting the atoms of `ρ^e`.
pub fn separable_decomposition_check<R: Rng>(g: &FiniteBeliefGame, samples: usize, rng: &mut R) -> DecompositionReport {
    let d = g.spec.dims();
    let (nq, ns) = (g.tri_l.n_vertices(), d.states);
    let mut max_pay: f64 = 0.0;
    let mut max_tr: f64 = 0.0;
    for _ in 0..samples {
        let s = g.state(rng.gen_range(0..g.n_states()));
        let x = sample_mixed_action(rng, d.k, d.i);
        let y = sample_mixed_action(rng, d.l, d.j);
        let (p, q) = (g.p(s), g.q(s));

        let mut pay = 0.0;
        for k in 0..d.k {
            for i in 0..d.i {
                for l in 0..d.l {
                    for j in 0..d.j {
                        let m = p[k] * q[l] * g.spec.g(k, l, s.w, i, j);
                        pay += m * x.get(k, i) * y.get(l, j);
                    }
                }
            }
        }
        max_pay = max_pay.max((pay - g.payoff(s, &x, &y)).abs());

        let coeffs = |tri: &crate::triangulation::Triangulation, a: &MixedAction, b: &[f64]| -> Vec<Vec<f64>> {
            let bar = marginal(a, b);
            (0..a.actions())
                .map(|i| {
                    let mut c = vec![0.0; tri.n_vertices()];
                    if bar[i] > 0.0 {
                        for (v, w) in tri.split(&posterior(a, b, i)).expect("posterior in the simplex") {
                            c[v] = bar[i] * w;
                        }
                    }
                    c
                })
                .collect()
        };
        let c = coeffs(&g.tri_k, &x, p);
        let dd = coeffs(&g.tri_l, &y, q);
        let mut dense = vec![0.0; g.n_states()];
        for i in 0..d.i {
            for j in 0..d.j {
                for w2 in 0..ns {
                    let n = g.spec.rho(s.w, i, j, w2);
                    if n == 0.0 {
                        continue;
                    }
                    for (pv, ci) in c[i].iter().enumerate() {
                        for (qv, dj) in dd[j].iter().enumerate() {
                            dense[(pv * nq + qv) * ns + w2] += n * ci * dj;
                        }
                    }
                }
            }
        }
        let mut via_e = vec![0.0; g.n_states()];
        for a in transition_e(&g.spec, p, q, s.w, &x, &y) {
            for (pv, u) in g.tri_k.split(&a.p).expect("posterior in the simplex") {
                for (qv, w) in g.tri_l.split(&a.q).expect("posterior in the simplex") {
                    via_e[(pv * nq + qv) * ns + a.state] += a.mass * u * w;
                }
            }
        }
        let mut solver = vec![0.0; g.n_states()];
        for (t, m) in g.transition(s, &x, &y) {
            solver[t] = m;
        }
        for t in 0..g.n_states() {
            max_tr = max_tr.max((dense[t] - solver[t]).abs()).max((via_e[t] - solver[t]).abs());
        }
    }
    DecompositionReport {
        samples,
        max_payoff_error: max_pay,
        max_transition_error: max_tr,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FrontierPoint {
    pub p_vertex: usize,
    pub q_vertex: usize,
    pub omega: usize,
    pub v_f: f64,
    pub oracle: f64,
    pub slack: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FrontierReport {
    pub eps: f64,
    pub alpha: f64,
    /// `max |v^f - oracle|` over non-frontier vertex states.
    pub interior_gap: f64,
    pub checked: usize,
    pub points: Vec<FrontierPoint>,
    pub violations: usize,
}

/// At every frontier vertex state checks
/// `v^f ≥ v_oracle - interior_gap - (4ε + α)‖g‖∞ - tol`, with `α` the
/// stepsize of the `K` triangulation. Only non-absorbing base states are
/// visited.
pub fn frontier_lipschitz_check(g: &FiniteBeliefGame, v: &ValueFunction, eps: f64, tol: f64) -> Result<FrontierReport> {
    if !g.spec.is_augmented() {
        return Err(precondition("frontier check requires a spec augmented with the safety actions"));
    }
    if !(eps > 0.0 && eps <= 0.25) {
        return Err(precondition(format!("ε = {eps} outside (0, 1/4]")));
    }
    let oracle_tol = tol / 4.0;
    let alpha = g.tri_k.stepsize();
    let g_inf = g.spec.g_inf();
    let mut interior_gap: f64 = 0.0;
    let mut frontier = Vec::new();
    for idx in 0..g.n_states() {
        let s = g.state(idx);
        if g.is_absorbing(s.w) {
            continue;
        }
        let o = solve_truncated(&g.spec, g.p(s), g.q(s), s.w, v.lambda, oracle_tol)?;
        if in_frontier(g.p(s), eps) {
            frontier.push((s, o.value));
        } else {
            interior_gap = interior_gap.max((v.values[idx] - o.value).abs());
        }
    }
    let bound = (4.0 * eps + alpha) * g_inf;
    let mut points = Vec::new();
    let mut violations = 0;
    for (s, o) in frontier {
        let vf = v.values[g.index(s)];
        let slack = vf - (o - interior_gap - bound) + tol;
        if slack < 0.0 {
            violations += 1;
        }
        points.push(FrontierPoint {
            p_vertex: s.p,
            q_vertex: s.q,
            omega: s.w,
            v_f: vf,
            oracle: o,
            slack,
        });
    }
    Ok(FrontierReport {
        eps,
        alpha,
        interior_gap,
        checked: points.len(),
        points,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game_model::{augment_safety, catalog};
    use crate::triangulation::Triangulation;
    use crate::value_engine::{build_gamma_f, solve_discounted};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn eta_single_type_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let spec = catalog::random_one_sided(&mut rng, 2, 2, 2, 2);
        let g = build_gamma_f(&spec, &Triangulation::new(2, 4).unwrap(), &Triangulation::new(1, 1).unwrap());
        let gy = ActionGrid::new(4, 1, 2);
        let v = |p: &[f64], _: &[f64], w: usize| p[0] * p[0] + w as f64;
        for _ in 0..20 {
            let s = g.state(rng.gen_range(0..g.n_states()));
            let x = sample_mixed_action(&mut rng, 2, 2);
            let r = eta_stage_check(&g, v, 0.3, s, &x, &gy);
            assert_eq!(r.deviation, 0.0);
            assert_eq!(r.max_e_minus_f, 0.0);
        }
    }

    #[test]
    fn eta_linear_and_convex_in_q() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let spec = catalog::random_absorbing(&mut rng, 2, 2, 2, 2, 2);
        let t = Triangulation::new(2, 3).unwrap();
        let g = build_gamma_f(&spec, &t, &t);
        let gy = ActionGrid::new(3, 2, 2);
        let lin = |p: &[f64], q: &[f64], w: usize| 0.3 * q[0] - 0.7 * q[1] + p[0] * p[1] + 0.1 * w as f64;
        for _ in 0..50 {
            let s = g.state(rng.gen_range(0..g.n_states()));
            let x = sample_mixed_action(&mut rng, 2, 2);
            let r = eta_stage_check(&g, lin, 0.2, s, &x, &gy);
            assert!(r.deviation <= 1e-9 && r.max_e_minus_f.abs() <= 1e-9);
            let (a, b) = (rng.gen_range(0.1..2.0), rng.gen_range(-1.0..1.0));
            let convex = move |p: &[f64], q: &[f64], w: usize| a * (q[0] - 0.4).powi(2) + b * q[1] + p[0] - w as f64;
            let r = eta_stage_check(&g, convex, 0.2, s, &x, &gy);
            assert!(r.max_e_minus_f <= 1e-9);
            assert!(r.deviation <= 1e-9);
        }
    }

    #[test]
    fn decomposition_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let spec = catalog::random_absorbing(&mut rng, 2, 3, 2, 3, 2);
        let g = build_gamma_f(&spec, &Triangulation::new(2, 4).unwrap(), &Triangulation::new(3, 2).unwrap());
        let r = separable_decomposition_check(&g, 200, &mut rng);
        assert!(r.holds(1e-12), "{r:?}");
    }

    #[test]
    fn decomposition_single_types_is_bilinear() {
        let bm = catalog::big_match();
        let t1 = Triangulation::new(1, 1).unwrap();
        let g = build_gamma_f(&bm, &t1, &t1);
        let s = g.state(0);
        let x = MixedAction::type_independent(1, &[0.3, 0.7]);
        let y = MixedAction::type_independent(1, &[0.6, 0.4]);
        // x' A y with A = [[1, 0], [0, 1]]
        assert!((g.payoff(s, &x, &y) - (0.3 * 0.6 + 0.7 * 0.4)).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(separable_decomposition_check(&g, 50, &mut rng).holds(1e-12));
    }

    #[test]
    fn frontier_requires_augmentation() {
        let bm = catalog::big_match();
        let t1 = Triangulation::new(1, 1).unwrap();
        let g = build_gamma_f(&bm, &t1, &t1);
        let v = ValueFunction::zeros(&g, 0.5);
        assert!(frontier_lipschitz_check(&g, &v, 0.1, 5e-2).is_err());
    }

    #[test]
    fn frontier_single_type_trivial() {
        let bm = augment_safety(&catalog::big_match()).unwrap();
        let t1 = Triangulation::new(1, 1).unwrap();
        let g = build_gamma_f(&bm, &t1, &t1);
        let grid = ActionGrid::new(2, 1, 3);
        let v = solve_discounted(&g, 0.5, &grid, &grid, 1e-6).unwrap();
        let r = frontier_lipschitz_check(&g, &v, 0.1, 5e-2).unwrap();
        assert_eq!(r.checked, 0);
        assert_eq!(r.violations, 0);
    }

    #[test]
    fn frontier_one_sided_coarse() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let spec = augment_safety(&catalog::random_one_sided(&mut rng, 2, 2, 2, 1)).unwrap();
        let g = build_gamma_f(&spec, &Triangulation::new(2, 4).unwrap(), &Triangulation::new(1, 1).unwrap());
        let v = solve_discounted(&g, 0.3, &ActionGrid::new(2, 2, 3), &ActionGrid::new(4, 1, 3), 1e-6).unwrap();
        let r = frontier_lipschitz_check(&g, &v, 0.25, 5e-2).unwrap();
        assert!(r.checked > 0);
        assert_eq!(r.violations, 0, "{r:?}");
    }
}
