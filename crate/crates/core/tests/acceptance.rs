//! Acceptance run: one PASS/FAIL line per criterion with its measured
//! runtime. Exits nonzero if any criterion fails.

#![allow(clippy::needless_range_loop)]

use std::time::{Duration, Instant};

use absorbing_values::belief_kernel::{l1, linf, marginal, payoff_e, posterior, sample_mixed_action, sample_simplex, MixedAction};
use absorbing_values::coupling_sim::{
    lifted_payoff, path_rng, simulate_coupling, simulate_eta, ConstantStrategy, CouplingOptions, GreedyConcise, GridPolicy, Lottery,
};
use absorbing_values::exact_oracle::solve_truncated;
use absorbing_values::game_model::{catalog, Dims, GameSpec};
use absorbing_values::strategy_transforms::{
    check_witness, eps0, in_translation_domain, make_convexification_witness, nr_stability_check, silent_map, translation_map,
};
use absorbing_values::triangulation::{certify_alpha_c, Triangulation};
use absorbing_values::value_engine::{
    build_gamma_f, optimal_strategies, separable_decomposition_check, solve_discounted, solve_with_cache, ActionGrid, BeliefState,
    StageCache,
};
use rand::Rng;

// tolerances
const EXACT: f64 = 1e-12;
const WITNESS_TOL: f64 = 1e-9;
const BIG_MATCH_TOL: f64 = 2e-3;
const SOLVER_TOL: f64 = 1e-8;
const ORACLE_TOL: f64 = 1e-4;
const MONOTONE_SLACK: f64 = 5e-3;
const SE_K: f64 = 3.0;

struct Outcome {
    ok: bool,
    detail: String,
}

fn outcome(ok: bool, detail: String) -> Outcome {
    Outcome { ok, detail }
}

fn run(n: usize, name: &str, budget: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let t = Instant::now();
    let o = f();
    let dt = t.elapsed();
    let in_time = dt <= budget;
    let ok = o.ok && in_time;
    let late = if in_time {
        String::new()
    } else {
        format!(" over budget {:?}", budget)
    };
    println!(
        "{} {:>2} {:<34} {:>8.2}s  {}{}",
        if ok { "PASS" } else { "FAIL" },
        n,
        name,
        dt.as_secs_f64(),
        o.detail,
        late
    );
    ok
}

fn splitting_conservation() -> Outcome {
    let mut rng = path_rng(101, 0);
    let mut worst: f64 = 0.0;
    for k in 2..=4 {
        for n in [2, 4, 8] {
            let tri = Triangulation::new(k, n).unwrap();
            for _ in 0..10_000 {
                let p = sample_simplex(&mut rng, k);
                let mut back = vec![0.0; k];
                for (v, a) in tri.split(&p).unwrap() {
                    for (b, pv) in back.iter_mut().zip(tri.vertex(v)) {
                        *b += a * pv;
                    }
                }
                worst = worst.max(linf(&back, &p));
            }
        }
    }
    outcome(worst < EXACT, format!("max |Σ S[p'|p] p' - p| = {worst:.1e}"))
}

fn alpha_c_certificate() -> Outcome {
    let mut rng = path_rng(102, 0);
    let mut cs = Vec::new();
    let mut steps_ok = true;
    let mut detail = String::new();
    for n in [2, 4, 8] {
        let tri = Triangulation::new(3, n).unwrap();
        let cert = certify_alpha_c(&tri, 100_000, &mut rng).unwrap();
        steps_ok &= cert.alpha <= tri.stepsize_bound() + EXACT;
        detail += &format!("N={n}: C={:.3} s={:.3} ", cert.c, cert.alpha);
        cs.push(cert.c);
    }
    let finite = cs.iter().all(|c| c.is_finite() && *c > 0.0);
    let ratio = cs.iter().cloned().fold(0.0, f64::max) / cs.iter().cloned().fold(f64::INFINITY, f64::min);
    outcome(finite && ratio < 2.0 && steps_ok, format!("{detail}ratio {ratio:.3}"))
}

fn silent_mapping_suite() -> Outcome {
    let mut rng = path_rng(103, 0);
    let (mut marg, mut shift_excess, mut nr_fail, mut witness_fail, mut cases) = (0.0f64, f64::NEG_INFINITY, 0, 0, 0);
    for eps in [0.05, 0.1, 0.25] {
        let e0 = eps0(eps).unwrap();
        for _ in 0..10_000 {
            let nk = rng.gen_range(2..5);
            let ni = rng.gen_range(2..5);
            let p = sample_simplex(&mut rng, nk);
            let x = sample_mixed_action(&mut rng, nk, ni);
            let xp = silent_map(&x, &p, e0).unwrap();
            let xb = marginal(&x, &p);
            marg = marg.max(linf(&marginal(&xp, &p), &xb));
            for i in 0..ni {
                if xb[i] > 0.0 {
                    shift_excess = shift_excess.max(l1(&posterior(&xp, &p, i), &posterior(&x, &p, i)) - 6.0 * eps);
                }
            }
            if !nr_stability_check(&x, &p, eps).unwrap() {
                nr_fail += 1;
            }
            let w = make_convexification_witness(&x, &p, eps).unwrap();
            if !check_witness(&w, &x, &p).holds(6.0 * eps, WITNESS_TOL) {
                witness_fail += 1;
            }
            cases += 1;
        }
    }
    outcome(
        marg < EXACT && nr_fail == 0 && witness_fail == 0 && shift_excess <= 0.0,
        format!(
            "{cases} cases: marginal err {marg:.1e}, NR mismatches {nr_fail}, witness failures {witness_fail}, max (shift - 6ε) {shift_excess:.3}"
        ),
    )
}

fn translation_suite() -> Outcome {
    let mut rng = path_rng(104, 0);
    let (mut marg, mut shift, mut row_excess, mut pay_excess) = (0.0f64, 0.0f64, f64::NEG_INFINITY, f64::NEG_INFINITY);
    let (mut accepted, mut tried) = (0, 0);
    let mut spec = catalog::random_absorbing(&mut rng, 2, 2, 3, 2, 2);
    while accepted < 10_000 && tried < 1_000_000 {
        tried += 1;
        let nk = rng.gen_range(2..5);
        if accepted % 100 == 0 || spec.dims().k != nk {
            spec = catalog::random_absorbing(&mut rng, nk, 2, 3, 2, 2);
        }
        let p = sample_simplex(&mut rng, nk);
        let noise = sample_simplex(&mut rng, nk);
        let t = rng.gen_range(0.0..0.1);
        let pp: Vec<f64> = p.iter().zip(&noise).map(|(a, b)| (1.0 - t) * a + t * b).collect();
        let x = silent_map(&sample_mixed_action(&mut rng, nk, 3), &p, 0.2).unwrap();
        if !in_translation_domain(&x, &p, &pp) {
            continue;
        }
        accepted += 1;
        let xp = translation_map(&x, &p, &pp);
        let xb = marginal(&x, &p);
        marg = marg.max(linf(&marginal(&xp, &pp), &xb));
        for i in 0..3 {
            if xb[i] > 0.0 {
                let (a, b) = (posterior(&xp, &pp, i), posterior(&x, &p, i));
                for k in 0..nk {
                    shift = shift.max((a[k] - b[k] - (pp[k] - p[k])).abs());
                }
            }
        }
        let inv = p.iter().map(|v| 1.0 / v).fold(0.0, f64::max);
        row_excess = row_excess.max(xp.max_abs_diff(&x) - linf(&p, &pp) * inv);
        let y = sample_mixed_action(&mut rng, 2, 2);
        let q = sample_simplex(&mut rng, 2);
        let g0 = payoff_e(&spec, &p, &q, 0, &x, &y);
        let g1 = payoff_e(&spec, &pp, &q, 0, &xp, &y);
        pay_excess = pay_excess.max((g1 - g0).abs() - spec.g_inf() * l1(&pp, &p));
    }
    outcome(
        accepted == 10_000 && marg < EXACT && shift < EXACT && row_excess <= EXACT && pay_excess <= EXACT,
        format!(
            "{accepted}/{tried} in domain: marginal {marg:.1e}, shift identity {shift:.1e}, row slack {row_excess:.1e}, payoff slack {pay_excess:.1e}"
        ),
    )
}

fn big_match_ground_truth() -> Outcome {
    let bm = catalog::big_match();
    let t1 = Triangulation::new(1, 1).unwrap();
    let g = build_gamma_f(&bm, &t1, &t1);
    let grid = ActionGrid::new(4, 1, 2);
    let mut ok = true;
    let mut detail = String::new();
    for lambda in [0.5, 0.1, 0.01] {
        let v = solve_discounted(&g, lambda, &grid, &grid, SOLVER_TOL).unwrap();
        let vf = v.at(&g, BeliefState { p: 0, q: 0, w: 0 });
        let o = solve_truncated(&bm, &[1.0], &[1.0], 0, lambda, ORACLE_TOL).unwrap();
        let agree = (vf - o.value).abs() <= SOLVER_TOL + o.error_bound + EXACT;
        ok &= (vf - 0.5).abs() <= BIG_MATCH_TOL && (o.value - 0.5).abs() <= BIG_MATCH_TOL && agree;
        detail += &format!("λ={lambda}: {vf:.6}/{:.6} ", o.value);
    }
    outcome(ok, detail.trim_end().to_string())
}

fn discretization_convergence() -> Outcome {
    let mut rng = path_rng(106, 0);
    let lambda = 0.2;
    let t1 = Triangulation::new(1, 1).unwrap();
    let mut ok = true;
    let mut detail = String::new();
    for game in 0..3 {
        let spec = catalog::random_one_sided(&mut rng, 2, 2, 2, 1 + game);
        let p = [0.5, 0.5];
        let truth = solve_truncated(&spec, &p, &[1.0], 0, lambda, ORACLE_TOL).unwrap();
        let mut errs = Vec::new();
        for n in [2, 4, 8] {
            let tri = Triangulation::new(2, n).unwrap();
            let g = build_gamma_f(&spec, &tri, &t1);
            let v = solve_discounted(&g, lambda, &ActionGrid::new(8, 2, 2), &ActionGrid::new(8, 1, 2), SOLVER_TOL).unwrap();
            let idx = tri.vertex_index(&p).unwrap();
            errs.push((v.at(&g, BeliefState { p: idx, q: 0, w: 0 }) - truth.value).abs());
        }
        ok &= errs.windows(2).all(|w| w[1] <= w[0] + MONOTONE_SLACK);
        detail += &format!("[{}] ", errs.iter().map(|e| format!("{e:.4}")).collect::<Vec<_>>().join(" "));
    }
    outcome(ok, format!("|v^f - v| for N=2,4,8: {}", detail.trim_end()))
}

fn coupling_identities() -> Outcome {
    let mut rng = path_rng(21, 0);
    let spec = catalog::random_one_sided(&mut rng, 2, 2, 2, 1);
    let g = build_gamma_f(&spec, &Triangulation::new(2, 8).unwrap(), &Triangulation::new(1, 1).unwrap());
    let (gx, gy) = (ActionGrid::new(4, 2, 2), ActionGrid::new(4, 1, 2));
    let cache = StageCache::new(&g, gx.clone(), gy.clone());
    let v = solve_with_cache(&cache, 0.3, 1e-7, None).unwrap();
    let strat = optimal_strategies(&cache, &v);
    let sigma = GreedyConcise::new(&g, &v, gx, gy.clone(), 0.1).unwrap();
    let tau = GridPolicy::player2(&g, gy, &strat);
    let c = certify_alpha_c(&g.tri_k, 10_000, &mut rng).unwrap().c;
    let opts = CouplingOptions {
        eps: 0.1,
        horizon: 40,
        paths: 80_000,
        seed: 7,
        c_cert: Some(c),
    };
    let s = simulate_coupling(&g, &sigma, &tau, &[0.5, 0.5], &[1.0], 0, &opts).unwrap();
    let z = s
        .z_mean
        .iter()
        .map(|e| format!("{:.1e}±{:.1e}", e.mean, e.se))
        .collect::<Vec<_>>()
        .join(" ");
    outcome(
        s.z_stages >= 100_000 && s.zero_mean_ok() && s.variance_identity_ok(),
        format!(
            "{} informative path-stages, Z mean {z}, E‖P'-P‖² - ΣE‖Z‖² = {:.1e}±{:.1e}",
            s.z_stages, s.variance_gap.mean, s.variance_gap.se
        ),
    )
}

fn revealing(p: &[f64], _: &[f64], _: usize) -> Lottery {
    let a = 0.7 + 0.2 * (p[0] - 0.5);
    vec![(1.0, MixedAction::from_rows(&[vec![a, 1.0 - a], vec![1.0 - a, a]]).unwrap())]
}

fn variation_bounds() -> Outcome {
    let d = Dims {
        k: 2,
        l: 1,
        states: 1,
        i: 2,
        j: 2,
    };
    let spec = GameSpec::from_fn(d, |_, _, _, _| 1.0, |k, _, _, i, j| (k + i + j) as f64 % 2.0).unwrap();
    let tau = ConstantStrategy(MixedAction::type_independent(1, &[0.5, 0.5]));
    let s = simulate_eta(&spec, &revealing, &tau, &[0.5, 0.5], &[1.0], 0, 40, 2500, 108, 0.25).unwrap();
    outcome(
        s.variation_ok() && s.squared_variation_ok(),
        format!(
            "E Σ‖Δp‖₁ = {:.3} (bound {:.0}), Σ E‖Δp‖₂² = {:.4}±{:.4}",
            s.variation.mean, s.variation_bound, s.squared_variation.mean, s.squared_variation.se
        ),
    )
}

fn separable_decomposition() -> Outcome {
    let mut rng = path_rng(109, 0);
    let spec = catalog::random_absorbing(&mut rng, 2, 2, 2, 2, 2);
    let g = build_gamma_f(&spec, &Triangulation::new(2, 4).unwrap(), &Triangulation::new(2, 4).unwrap());
    let r = separable_decomposition_check(&g, 1000, &mut rng);
    outcome(
        r.holds(EXACT),
        format!(
            "payoff err {:.1e}, transition err {:.1e}",
            r.max_payoff_error, r.max_transition_error
        ),
    )
}

fn strategy_lifting() -> Outcome {
    let bm = catalog::big_match();
    let t1 = Triangulation::new(1, 1).unwrap();
    let g = build_gamma_f(&bm, &t1, &t1);
    let grid = ActionGrid::new(8, 1, 2);
    let cache = StageCache::new(&g, grid.clone(), grid.clone());
    let v = solve_with_cache(&cache, 0.1, SOLVER_TOL, None).unwrap();
    let s = optimal_strategies(&cache, &v);
    let sigma = GridPolicy::player1(&g, grid, &s);
    let tau = |_: usize| vec![0.5, 0.5];
    let r = lifted_payoff(&bm, &t1, &sigma, &tau, &[1.0], 0, 0.1, 100_000, 110).unwrap();
    outcome(
        r.difference.within(0.0, SE_K),
        format!(
            "lifted {:.4}±{:.4}, Γ^φ {:.4}±{:.4}, paired diff {:.1e}",
            r.lifted.mean, r.lifted.se, r.phi.mean, r.phi.se, r.difference.mean
        ),
    )
}

fn main() {
    let s = Duration::from_secs;
    let results = [
        run(1, "splitting conservation", s(10), splitting_conservation),
        run(2, "(α, C) certificate", s(30), alpha_c_certificate),
        run(3, "silent mapping", s(60), silent_mapping_suite),
        run(4, "translation mapping", s(60), translation_suite),
        run(5, "Big Match ground truth", s(120), big_match_ground_truth),
        run(6, "discretization convergence", s(600), discretization_convergence),
        run(7, "coupling zero mean and variance", s(300), coupling_identities),
        run(8, "L1 and L2 variation bounds", s(120), variation_bounds),
        run(9, "separable decomposition", s(10), separable_decomposition),
        run(10, "strategy lifting", s(300), strategy_lifting),
    ];
    let failed = results.iter().filter(|ok| !**ok).count();
    println!("{} of {} criteria pass", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
