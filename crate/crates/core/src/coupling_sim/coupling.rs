use rayon::prelude::*;
use serde::Serialize;

use super::{check_eps, draw, draw_lottery, path_rng, Estimate, Strategy, Welford};
use crate::belief_kernel::{check_belief, in_frontier, l1, marginal, posterior_given, MixedAction};
use crate::error::{precondition, Result};
use crate::strategy_transforms::{in_translation_domain, translation_map};
use crate::value_engine::FiniteBeliefGame;

#[derive(Debug, Clone, Serialize)]
pub struct CouplingOptions {
    pub eps: f64,
    /// Stage cap; `T₀` beyond it is treated as infinite.
    pub horizon: usize,
    pub paths: usize,
    pub seed: u64,
    /// Non-flatness constant of the triangulation of Δ(K), used for the α-gate.
    pub c_cert: Option<f64>,
}

/// Stage `m` of one coupled path. Beliefs are the ones held at the start of
/// the stage.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoupledStage {
    pub m: usize,
    pub x: MixedAction,
    pub x_prime: MixedAction,
    pub y_prime: MixedAction,
    pub i: usize,
    pub j: usize,
    pub p: Vec<f64>,
    pub p_prime: Vec<f64>,
    pub q: Vec<f64>,
    pub omega: usize,
    /// `‖P_{m+1} - P_m‖₁`
    pub dp_l1: f64,
    /// `P'_{m+1} - P'^{X'}_m(·|I_m)`, zero from `T₀` on.
    pub z: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoupledTrace {
    pub stages: Vec<CoupledStage>,
    /// Beliefs and state after the last simulated stage.
    pub p_end: Vec<f64>,
    pub p_prime_end: Vec<f64>,
    pub q_end: Vec<f64>,
    pub omega_end: usize,
    pub t0: Option<usize>,
    /// Set when play stopped early because the state absorbed.
    pub absorbed_at: Option<usize>,
}

impl CoupledTrace {
    /// `P_m` for `m = 1 ..= stages + 1`.
    pub fn p_path(&self) -> Vec<&[f64]> {
        self.stages.iter().map(|s| s.p.as_slice()).chain([self.p_end.as_slice()]).collect()
    }

    pub fn p_prime_path(&self) -> Vec<&[f64]> {
        self.stages
            .iter()
            .map(|s| s.p_prime.as_slice())
            .chain([self.p_prime_end.as_slice()])
            .collect()
    }

    pub fn q_path(&self) -> Vec<&[f64]> {
        self.stages.iter().map(|s| s.q.as_slice()).chain([self.q_end.as_slice()]).collect()
    }

    /// `Σ_{m ≤ T} ‖P_{m+1} - P_m‖₁`, `T` the last stage with `P_m ∉ F_ε`.
    pub fn variation(&self, eps: f64) -> f64 {
        let ps = self.p_path();
        match (0..ps.len() - 1).rev().find(|&m| !in_frontier(ps[m], eps)) {
            None => 0.0,
            Some(t) => self.stages[..=t].iter().map(|s| s.dp_l1).sum(),
        }
    }

    /// `P'_m - P_m` for `m = 1 ..= stages + 1`.
    fn gaps(&self) -> Vec<Vec<f64>> {
        self.p_prime_path()
            .into_iter()
            .zip(self.p_path())
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
            .collect()
    }
}

/// `α ≤ ε¹¹ / (12 (C+1) |K|²)`, with `α` the measured stepsize.
#[derive(Debug, Clone, Serialize)]
pub struct AlphaGate {
    pub alpha: f64,
    pub c: Option<f64>,
    pub required: Option<f64>,
    pub holds: Option<bool>,
}

impl AlphaGate {
    pub fn new(alpha: f64, c: Option<f64>, eps: f64, types: usize) -> Self {
        let required = c.map(|c| eps.powi(11) / (12.0 * (c + 1.0) * (types * types) as f64));
        AlphaGate {
            alpha,
            c,
            required,
            holds: required.map(|r| alpha <= r),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CouplingStats {
    pub paths: usize,
    pub horizon: usize,
    pub eps: f64,
    pub alpha_gate: AlphaGate,
    /// `max_t E‖P'_{t∧T₀} - P_{t∧T₀}‖₁` and the stage where it is reached.
    pub sup_gap: Estimate,
    pub sup_gap_stage: usize,
    /// `E[1_{T₀ ≤ H} ‖P'_{T₀} - P_{T₀}‖₁]`
    pub gap_at_t0: Estimate,
    /// `Pr(T₀ ≤ H, P'_{T₀} ∉ F_{2ε})`
    pub t0_outside_2eps: Estimate,
    /// `Pr(T₀ ≤ H)`
    pub stopped: Estimate,
    /// `E Σ_{m ≤ T} ‖P_{m+1} - P_m‖₁`
    pub variation: Estimate,
    pub variation_bound: f64,
    /// Per type: mean of `Z_m` over the stages before `T₀` of unabsorbed play.
    pub z_mean: Vec<Estimate>,
    pub z_stages: usize,
    /// `E‖P'_{H'∧T₀} - P_{H'∧T₀}‖₂²` at the end of the cap.
    pub gap_sq: Estimate,
    /// `E Σ_{m < H'∧T₀} ‖Z_m‖₂²`
    pub z_sq: Estimate,
    /// Paired difference of the two above, path by path.
    pub variance_gap: Estimate,
    /// Largest `|(P' - P)_{m+1} - (P' - P)_m - Z_m|` before `T₀`.
    pub telescoping_error: f64,
}

impl CouplingStats {
    pub fn zero_mean_ok(&self) -> bool {
        self.z_mean.iter().all(|e| e.within(0.0, 3.0))
    }

    pub fn variance_identity_ok(&self) -> bool {
        self.variance_gap.within(0.0, 3.0)
    }

    pub fn telescoping_ok(&self, tol: f64) -> bool {
        self.telescoping_error <= tol
    }
}

struct Setup<'a> {
    game: &'a FiniteBeliefGame,
    sigma: &'a dyn Strategy,
    tau: &'a dyn Strategy,
    p: &'a [f64],
    q: &'a [f64],
    omega: usize,
    eps: f64,
    horizon: usize,
}

fn check(game: &FiniteBeliefGame, p: &[f64], q: &[f64], omega: usize, opts: &CouplingOptions) -> Result<()> {
    check_eps(opts.eps)?;
    if opts.horizon == 0 || opts.paths == 0 {
        return Err(precondition("horizon and path count must be positive"));
    }
    let d = game.spec.dims();
    if p.len() != d.k || q.len() != d.l || omega >= d.states {
        return Err(precondition("initial point has the wrong dimensions"));
    }
    check_belief(p)?;
    check_belief(q)?;
    if game.tri_k.vertex_index(p).is_none() {
        return Err(precondition(format!("p = {p:?} is not a vertex of the triangulation of Δ(K)")));
    }
    if game.tri_l.vertex_index(q).is_none() {
        return Err(precondition(format!("q = {q:?} is not a vertex of the triangulation of Δ(L)")));
    }
    Ok(())
}

fn split_draw(rng: &mut impl rand::Rng, tri: &crate::triangulation::Triangulation, post: &[f64]) -> Vec<f64> {
    let split = tri.split(post).expect("posteriors stay in the simplex");
    let v = split[draw(rng, split.iter().map(|e| e.1))].0;
    tri.vertex(v).to_vec()
}

fn coupled_path(s: &Setup, rng: &mut impl rand::Rng) -> CoupledTrace {
    let g = s.game;
    let mut p = s.p.to_vec();
    let mut pp = s.p.to_vec();
    let mut q = s.q.to_vec();
    let mut w = s.omega;
    let mut t0 = None;
    let mut absorbed_at = None;
    let mut stages = Vec::new();
    for m in 1..=s.horizon {
        if g.is_absorbing(w) {
            absorbed_at = Some(m);
            break;
        }
        let x = draw_lottery(rng, &s.sigma.lottery(&p, &q, w));
        let y = draw_lottery(rng, &s.tau.lottery(&pp, &q, w));
        if t0.is_none() && (in_frontier(&p, s.eps) || !in_translation_domain(&x, &p, &pp)) {
            t0 = Some(m);
        }
        let xp = translation_map(&x, &p, &pp);
        let xb = marginal(&x, &p);
        let yb = marginal(&y, &q);
        let i = draw(rng, xb.iter().copied());
        let j = draw(rng, yb.iter().copied());
        let w2 = draw(rng, g.spec.rho_row(w, i, j).iter().copied());
        let p2 = posterior_given(&x, &p, i, xb[i]);
        let pi = posterior_given(&xp, &pp, i, marginal(&xp, &pp)[i]);
        let pp2 = split_draw(rng, &g.tri_k, &pi);
        let q2 = split_draw(rng, &g.tri_l, &posterior_given(&y, &q, j, yb[j]));
        let z = if t0.is_none() {
            pp2.iter().zip(&pi).map(|(a, b)| a - b).collect()
        } else {
            vec![0.0; p.len()]
        };
        stages.push(CoupledStage {
            m,
            dp_l1: l1(&p2, &p),
            x,
            x_prime: xp,
            y_prime: y,
            i,
            j,
            p: std::mem::replace(&mut p, p2),
            p_prime: std::mem::replace(&mut pp, pp2),
            q: std::mem::replace(&mut q, q2),
            omega: w,
            z,
        });
        w = w2;
    }
    if absorbed_at.is_none() && g.is_absorbing(w) {
        absorbed_at = Some(s.horizon + 1);
    }
    CoupledTrace {
        stages,
        p_end: p,
        p_prime_end: pp,
        q_end: q,
        omega_end: w,
        t0,
        absorbed_at,
    }
}

/// Path `path` of the coupled process, drawn exactly as in
/// [`simulate_coupling`] with the same options.
#[allow(clippy::too_many_arguments)]
pub fn simulate_coupled_trace(
    game: &FiniteBeliefGame,
    sigma_eta: &dyn Strategy,
    tau_f: &dyn Strategy,
    p: &[f64],
    q: &[f64],
    omega: usize,
    opts: &CouplingOptions,
    path: u64,
) -> Result<CoupledTrace> {
    check(game, p, q, omega, opts)?;
    let s = Setup {
        game,
        sigma: sigma_eta,
        tau: tau_f,
        p,
        q,
        omega,
        eps: opts.eps,
        horizon: opts.horizon,
    };
    Ok(coupled_path(&s, &mut path_rng(opts.seed, path)))
}

/// Per-path numbers the aggregate needs; traces themselves are dropped.
struct PathSummary {
    /// `‖P'_{t∧T₀} - P_{t∧T₀}‖₁` for `t = 1 ..`, constant after the last entry.
    gap_l1: Vec<f64>,
    gap_at_t0: Option<(f64, bool)>,
    variation: f64,
    z: Vec<Vec<f64>>,
    gap_sq: f64,
    z_sq: f64,
    telescoping: f64,
}

fn summarize(t: &CoupledTrace, eps: f64) -> PathSummary {
    let gaps = t.gaps();
    // stopped at T₀: stage index T₀ - 1 in the belief paths
    let stop = t.t0.map_or(gaps.len() - 1, |m| m - 1);
    let gap_l1: Vec<f64> = gaps[..=stop].iter().map(|d| d.iter().map(|v| v.abs()).sum()).collect();
    let gap_at_t0 = t.t0.map(|m| (gap_l1[m - 1], !in_frontier(t.p_prime_path()[m - 1], 2.0 * eps)));
    let mut z = Vec::new();
    let mut z_sq = 0.0;
    let mut telescoping: f64 = 0.0;
    for (m, st) in t.stages[..stop].iter().enumerate() {
        z_sq += st.z.iter().map(|v| v * v).sum::<f64>();
        for (k, zk) in st.z.iter().enumerate() {
            telescoping = telescoping.max((gaps[m + 1][k] - gaps[m][k] - zk).abs());
        }
        z.push(st.z.clone());
    }
    PathSummary {
        gap_sq: gaps[stop].iter().map(|v| v * v).sum(),
        gap_l1,
        gap_at_t0,
        variation: t.variation(eps),
        z,
        z_sq,
        telescoping,
    }
}

/// Monte Carlo estimate of the closeness properties of the coupling of
/// Γ^η (σ_η at continuous beliefs) with Γ^f (τ_f at vertex beliefs).
///
/// Both `p` and `q` must be vertices. The α-gate is evaluated and reported
/// but never enforced.
#[allow(clippy::too_many_arguments)]
pub fn simulate_coupling(
    game: &FiniteBeliefGame,
    sigma_eta: &dyn Strategy,
    tau_f: &dyn Strategy,
    p: &[f64],
    q: &[f64],
    omega: usize,
    opts: &CouplingOptions,
) -> Result<CouplingStats> {
    check(game, p, q, omega, opts)?;
    let s = Setup {
        game,
        sigma: sigma_eta,
        tau: tau_f,
        p,
        q,
        omega,
        eps: opts.eps,
        horizon: opts.horizon,
    };
    let sums: Vec<PathSummary> = (0..opts.paths as u64)
        .into_par_iter()
        .map(|r| summarize(&coupled_path(&s, &mut path_rng(opts.seed, r)), opts.eps))
        .collect();

    let k = p.len();
    let mut by_t = vec![Welford::default(); opts.horizon + 1];
    let mut at_t0 = Welford::default();
    let mut outside = Welford::default();
    let mut stopped = Welford::default();
    let mut var = Welford::default();
    let mut z_mean = vec![Welford::default(); k];
    let mut gap_sq = Welford::default();
    let mut z_sq = Welford::default();
    let mut paired = Welford::default();
    let mut telescoping: f64 = 0.0;
    let mut z_stages = 0;
    for ps in &sums {
        let last = *ps.gap_l1.last().expect("at least the initial gap");
        for (t, acc) in by_t.iter_mut().enumerate() {
            acc.push(ps.gap_l1.get(t).copied().unwrap_or(last));
        }
        let (g0, out) = ps.gap_at_t0.unwrap_or((0.0, false));
        at_t0.push(g0);
        outside.push(out as u8 as f64);
        stopped.push(ps.gap_at_t0.is_some() as u8 as f64);
        var.push(ps.variation);
        for z in &ps.z {
            for (acc, v) in z_mean.iter_mut().zip(z) {
                acc.push(*v);
            }
        }
        z_stages += ps.z.len();
        gap_sq.push(ps.gap_sq);
        z_sq.push(ps.z_sq);
        paired.push(ps.gap_sq - ps.z_sq);
        telescoping = telescoping.max(ps.telescoping);
    }
    let (sup_t, sup) =
        by_t.iter().map(|w| w.estimate()).enumerate().fold(
            (0, Estimate::default()),
            |best, (t, e)| if e.mean > best.1.mean { (t, e) } else { best },
        );
    Ok(CouplingStats {
        paths: opts.paths,
        horizon: opts.horizon,
        eps: opts.eps,
        alpha_gate: AlphaGate::new(game.tri_k.stepsize(), opts.c_cert, opts.eps, k),
        sup_gap: if sup.n == 0 { by_t[0].estimate() } else { sup },
        sup_gap_stage: sup_t + 1,
        gap_at_t0: at_t0.estimate(),
        t0_outside_2eps: outside.estimate(),
        stopped: stopped.estimate(),
        variation: var.estimate(),
        variation_bound: 3.0 * (k as f64).sqrt() * opts.eps.powi(-5),
        z_mean: z_mean.iter().map(|w| w.estimate()).collect(),
        z_stages,
        gap_sq: gap_sq.estimate(),
        z_sq: z_sq.estimate(),
        variance_gap: paired.estimate(),
        telescoping_error: telescoping,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling_sim::{ConstantStrategy, GreedyConcise, GridPolicy};
    use crate::game_model::catalog;
    use crate::triangulation::Triangulation;
    use crate::value_engine::{build_gamma_f, optimal_strategies, solve_with_cache, ActionGrid, StageCache};

    fn toy() -> FiniteBeliefGame {
        let mut rng = path_rng(21, 0);
        let spec = catalog::random_one_sided(&mut rng, 2, 2, 2, 1);
        build_gamma_f(&spec, &Triangulation::new(2, 8).unwrap(), &Triangulation::new(1, 1).unwrap())
    }

    fn opts(paths: usize, horizon: usize) -> CouplingOptions {
        CouplingOptions {
            eps: 0.1,
            horizon,
            paths,
            seed: 5,
            c_cert: Some(2.0),
        }
    }

    #[test]
    fn silent_play_keeps_beliefs_together() {
        let g = toy();
        let sigma = ConstantStrategy(MixedAction::type_independent(2, &[0.4, 0.6]));
        let tau = ConstantStrategy(MixedAction::type_independent(1, &[0.5, 0.5]));
        let s = simulate_coupling(&g, &sigma, &tau, &[0.5, 0.5], &[1.0], 0, &opts(200, 30)).unwrap();
        assert_eq!(s.sup_gap.mean, 0.0);
        assert_eq!(s.gap_at_t0.mean, 0.0);
        assert_eq!(s.t0_outside_2eps.mean, 0.0);
        assert_eq!(s.variation.mean, 0.0);
        assert_eq!(s.gap_sq.mean, 0.0);
        assert_eq!(s.z_sq.mean, 0.0);
        assert!(s.zero_mean_ok() && s.variance_identity_ok());
        assert_eq!(s.alpha_gate.holds, Some(false));
    }

    #[test]
    fn greedy_coupling_has_orthogonal_increments() {
        let g = toy();
        let (gx, gy) = (ActionGrid::new(4, 2, 2), ActionGrid::new(4, 1, 2));
        let cache = StageCache::new(&g, gx.clone(), gy.clone());
        let v = solve_with_cache(&cache, 0.3, 1e-7, None).unwrap();
        let strat = optimal_strategies(&cache, &v);
        let sigma = GreedyConcise::new(&g, &v, gx, gy.clone(), 0.1).unwrap();
        let tau = GridPolicy::player2(&g, gy, &strat);
        let o = opts(400, 25);
        let s = simulate_coupling(&g, &sigma, &tau, &[0.5, 0.5], &[1.0], 0, &o).unwrap();
        assert!(s.zero_mean_ok(), "{:?}", s.z_mean);
        assert!(s.variance_identity_ok(), "{:?}", s.variance_gap);
        assert!(s.telescoping_ok(1e-12), "{}", s.telescoping_error);
        assert!(s.z_stages > 0);

        for r in 0..20 {
            let t = simulate_coupled_trace(&g, &sigma, &tau, &[0.5, 0.5], &[1.0], 0, &o, r).unwrap();
            for st in &t.stages {
                assert!(g.tri_k.vertex_index(&st.p_prime).is_some());
                assert!(g.tri_l.vertex_index(&st.q).is_some());
                assert_eq!(st.x_prime, translation_map(&st.x, &st.p, &st.p_prime));
                assert!(
                    g.spec
                        .rho(st.omega, st.i, st.j, t.stages.get(st.m).map_or(t.omega_end, |n| n.omega))
                        > 0.0
                );
            }
            assert!(g.tri_k.vertex_index(&t.p_prime_end).is_some());
        }
    }

    #[test]
    fn traces_are_reproducible() {
        let g = toy();
        let sigma = |p: &[f64], _: &[f64], _: usize| -> super::super::Lottery {
            let a = 0.5 + 0.3 * (p[0] - 0.5);
            vec![(1.0, MixedAction::from_rows(&[vec![a, 1.0 - a], vec![1.0 - a, a]]).unwrap())]
        };
        let tau = ConstantStrategy(MixedAction::type_independent(1, &[0.5, 0.5]));
        let o = opts(1, 40);
        let a = simulate_coupled_trace(&g, &sigma, &tau, &[0.5, 0.5], &[1.0], 0, &o, 3).unwrap();
        let b = simulate_coupled_trace(&g, &sigma, &tau, &[0.5, 0.5], &[1.0], 0, &o, 3).unwrap();
        assert_eq!(a, b);
        let c = simulate_coupled_trace(&g, &sigma, &tau, &[0.5, 0.5], &[1.0], 0, &o, 4).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn absorbed_play_stops() {
        let g = build_gamma_f(
            &catalog::big_match(),
            &Triangulation::new(1, 1).unwrap(),
            &Triangulation::new(1, 1).unwrap(),
        );
        let top = ConstantStrategy(MixedAction::pure(1, 2, 0));
        let s = simulate_coupled_trace(&g, &top, &top, &[1.0], &[1.0], 0, &opts(1, 10), 0).unwrap();
        assert_eq!(s.stages.len(), 1);
        assert_eq!(s.absorbed_at, Some(2));
        assert!(g.is_absorbing(s.omega_end));
    }

    #[test]
    fn rejects_off_vertex_start() {
        let g = toy();
        let s = ConstantStrategy(MixedAction::type_independent(2, &[0.5, 0.5]));
        let t = ConstantStrategy(MixedAction::type_independent(1, &[0.5, 0.5]));
        assert!(simulate_coupling(&g, &s, &t, &[0.3, 0.7], &[1.0], 0, &opts(10, 10)).is_err());
        assert!(simulate_coupling(&g, &s, &t, &[0.5, 0.5], &[0.5, 0.5], 0, &opts(10, 10)).is_err());
        assert!(simulate_coupling(&g, &s, &t, &[0.5, 0.5], &[1.0], 9, &opts(10, 10)).is_err());
    }

    #[test]
    fn alpha_gate_formula() {
        let a = AlphaGate::new(1e-20, Some(1.0), 0.5, 2);
        let want = 0.5f64.powi(11) / (12.0 * 2.0 * 4.0);
        assert!((a.required.unwrap() - want).abs() < 1e-18);
        assert_eq!(a.holds, Some(true));
        assert_eq!(AlphaGate::new(0.1, None, 0.5, 2).holds, None);
    }
}
