use rayon::prelude::*;
use serde::Serialize;

use super::{draw, draw_lottery, path_rng, Estimate, Strategy, Welford};
use crate::belief_kernel::{check_belief, marginal, posterior_given, MixedAction};
use crate::error::{precondition, Result};
use crate::game_model::GameSpec;
use crate::triangulation::Triangulation;

/// Player 1's copy of a Γ^φ strategy in the original game.
///
/// The informed player carries a vertex belief in her head. Each stage she
/// draws `x` from `σ_φ` at that belief, plays `i ~ x(·|k)` with her true
/// type `k`, then moves to vertex `p'` with probability
/// `S[p'|π] p'(k) / π(k)`, `π = p^x(·|i)`. Given the public history the
/// type is then distributed as the new vertex, as in Γ^φ.
pub struct LiftedStrategy<'a> {
    spec: &'a GameSpec,
    tri: &'a Triangulation,
    sigma: &'a dyn Strategy,
}

impl<'a> LiftedStrategy<'a> {
    pub fn new(spec: &'a GameSpec, tri: &'a Triangulation, sigma_phi: &'a dyn Strategy) -> Result<Self> {
        let d = spec.dims();
        if d.l != 1 {
            return Err(precondition(format!(
                "strategy lifting needs one-sided information, got |L| = {}",
                d.l
            )));
        }
        if tri.types() != d.k {
            return Err(precondition("triangulation has the wrong dimension"));
        }
        Ok(LiftedStrategy {
            spec,
            tri,
            sigma: sigma_phi,
        })
    }

    /// Law of the stage action of type `k` at vertex belief `p`.
    pub fn play_distribution(&self, k: usize, p: &[f64], w: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.spec.dims().i];
        for (m, x) in self.sigma.lottery(p, &[1.0], w) {
            for (o, v) in out.iter_mut().zip(x.row(k)) {
                *o += m * v;
            }
        }
        out
    }

    /// Law of the next vertex after type `k` played `i` under `x` at `p`.
    pub fn split_law(&self, k: usize, p: &[f64], x: &MixedAction, i: usize) -> Vec<(usize, f64)> {
        let xb = marginal(x, p);
        let post = posterior_given(x, p, i, xb[i]);
        if post[k] == 0.0 {
            // type k never plays i here
            return Vec::new();
        }
        self.tri
            .split(&post)
            .expect("posteriors stay in the simplex")
            .into_iter()
            .map(|(v, a)| (v, a * self.tri.vertex(v)[k] / post[k]))
            .collect()
    }

    /// One stage: the drawn mixed action and the played action.
    pub fn act(&self, rng: &mut impl rand::Rng, k: usize, p: &[f64], w: usize) -> (MixedAction, usize) {
        let x = draw_lottery(rng, &self.sigma.lottery(p, &[1.0], w));
        let i = draw(rng, x.row(k).iter().copied());
        (x, i)
    }

    pub fn next_belief(&self, rng: &mut impl rand::Rng, k: usize, p: &[f64], x: &MixedAction, i: usize) -> Vec<f64> {
        let law = self.split_law(k, p, x, i);
        self.tri.vertex(law[draw(rng, law.iter().map(|e| e.1))].0).to_vec()
    }
}

/// Paired discounted payoffs of the lifted strategy in Γ and of `σ_φ` in Γ^φ.
#[derive(Debug, Clone, Serialize)]
pub struct LiftReport {
    pub paths: usize,
    pub lambda: f64,
    pub horizon: usize,
    /// Discounted payoff in Γ with the realized type and actions.
    pub lifted: Estimate,
    /// The same path scored with the Γ^φ payoff at the carried vertex.
    pub phi: Estimate,
    pub difference: Estimate,
    pub agree: bool,
}

/// Truncation stage where the discount weight left falls under `1e-4`.
pub fn payoff_horizon(lambda: f64) -> usize {
    if lambda >= 1.0 {
        return 1;
    }
    (1e-4f64.ln() / (1.0 - lambda).ln()).ceil() as usize
}

/// Plays the lifted strategy against a stationary `τ` (a law on `J` per
/// state) and scores every path twice. Both scores have the same
/// expectation; `agree` asks for a paired difference within 3 standard
/// errors of 0.
#[allow(clippy::too_many_arguments)]
pub fn lifted_payoff(
    spec: &GameSpec,
    tri: &Triangulation,
    sigma_phi: &dyn Strategy,
    tau: &(dyn Fn(usize) -> Vec<f64> + Sync),
    p: &[f64],
    omega: usize,
    lambda: f64,
    paths: usize,
    seed: u64,
) -> Result<LiftReport> {
    let lift = LiftedStrategy::new(spec, tri, sigma_phi)?;
    check_belief(p)?;
    let d = spec.dims();
    if p.len() != d.k || omega >= d.states {
        return Err(precondition("initial point has the wrong dimensions"));
    }
    if tri.vertex_index(p).is_none() {
        return Err(precondition(format!("p = {p:?} is not a vertex of the triangulation")));
    }
    if !(lambda > 0.0 && lambda <= 1.0) || paths == 0 {
        return Err(precondition("need λ in (0, 1] and a positive path count"));
    }
    let horizon = payoff_horizon(lambda);
    let scores: Vec<(f64, f64)> = (0..paths as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = path_rng(seed, r);
            let k = draw(&mut rng, p.iter().copied());
            let mut pm = p.to_vec();
            let mut w = omega;
            let (mut a, mut b) = (0.0, 0.0);
            let mut weight = 1.0;
            for _ in 0..horizon {
                if spec.is_absorbing_state(w) {
                    a += weight * spec.g(k, 0, w, 0, 0);
                    b += weight * (0..d.k).map(|k2| pm[k2] * spec.g(k2, 0, w, 0, 0)).sum::<f64>();
                    return (a, b);
                }
                let (x, i) = lift.act(&mut rng, k, &pm, w);
                let j = draw(&mut rng, tau(w));
                let w2 = draw(&mut rng, spec.rho_row(w, i, j).iter().copied());
                a += lambda * weight * spec.g(k, 0, w, i, j);
                let mut gphi = 0.0;
                for (k2, pk) in pm.iter().enumerate() {
                    if *pk > 0.0 {
                        gphi += pk * (0..d.i).map(|i2| x.get(k2, i2) * spec.g(k2, 0, w, i2, j)).sum::<f64>();
                    }
                }
                b += lambda * weight * gphi;
                pm = lift.next_belief(&mut rng, k, &pm, &x, i);
                w = w2;
                weight *= 1.0 - lambda;
            }
            (a, b)
        })
        .collect();
    let (mut la, mut lb, mut diff) = (Welford::default(), Welford::default(), Welford::default());
    for (a, b) in scores {
        la.push(a);
        lb.push(b);
        diff.push(a - b);
    }
    let difference = diff.estimate();
    Ok(LiftReport {
        paths,
        lambda,
        horizon,
        lifted: la.estimate(),
        phi: lb.estimate(),
        agree: difference.within(0.0, 3.0),
        difference,
    })
}
