use rayon::prelude::*;
use serde::Serialize;

use super::{check_eps, draw, draw_lottery, path_rng, Estimate, Strategy, Welford};
use crate::belief_kernel::{check_belief, in_frontier, l1, marginal, posterior_given};
use crate::error::{precondition, Result};
use crate::game_model::GameSpec;

/// Beliefs about Player 1's type along one path of Γ^e, `p_1 … p_{H+1}`.
#[derive(Debug, Clone, Serialize)]
pub struct EtaTrace {
    pub beliefs: Vec<Vec<f64>>,
    pub states: Vec<usize>,
}

impl EtaTrace {
    /// `Σ_{m ≤ T} ‖p_{m+1} - p_m‖₁` with `T` the last stage whose belief is
    /// outside the ε-frontier, found on the truncated trace.
    pub fn variation(&self, eps: f64) -> f64 {
        let last = (0..self.beliefs.len() - 1).rev().find(|&m| !in_frontier(&self.beliefs[m], eps));
        match last {
            None => 0.0,
            Some(t) => (0..=t).map(|m| l1(&self.beliefs[m + 1], &self.beliefs[m])).sum(),
        }
    }

    pub fn squared_variation(&self) -> f64 {
        self.beliefs
            .windows(2)
            .map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
            .sum()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EtaStats {
    pub paths: usize,
    pub horizon: usize,
    pub eps: f64,
    /// `E Σ_{m ≤ T} ‖Δp‖₁`
    pub variation: Estimate,
    /// `3 √|K| ε⁻⁵`
    pub variation_bound: f64,
    /// `Σ_m E‖Δp‖₂²`, at most 1 for a martingale on the simplex.
    pub squared_variation: Estimate,
    /// Per type: mean of `p_{m+1} - p_m` over all path-stages.
    pub increment_mean: Vec<Estimate>,
    pub path_stages: usize,
}

impl EtaStats {
    pub fn variation_ok(&self) -> bool {
        self.variation.mean <= self.variation_bound + 3.0 * self.variation.se
    }

    pub fn squared_variation_ok(&self) -> bool {
        self.squared_variation.mean <= 1.0 + 3.0 * self.squared_variation.se
    }

    pub fn martingale_ok(&self) -> bool {
        self.increment_mean.iter().all(|e| e.within(0.0, 3.0))
    }
}

/// One path of Γ^e under stationary strategies. Draw order per stage:
/// `x` from σ, `y` from τ, then `i`, `j`, the next state.
#[allow(clippy::too_many_arguments)]
pub fn eta_path(
    spec: &GameSpec,
    sigma: &dyn Strategy,
    tau: &dyn Strategy,
    p: &[f64],
    q: &[f64],
    omega: usize,
    horizon: usize,
    rng: &mut impl rand::Rng,
) -> EtaTrace {
    let mut p = p.to_vec();
    let mut q = q.to_vec();
    let mut w = omega;
    let mut trace = EtaTrace {
        beliefs: vec![p.clone()],
        states: vec![w],
    };
    for _ in 0..horizon {
        let x = draw_lottery(rng, &sigma.lottery(&p, &q, w));
        let y = draw_lottery(rng, &tau.lottery(&p, &q, w));
        let xb = marginal(&x, &p);
        let yb = marginal(&y, &q);
        let i = draw(rng, xb.iter().copied());
        let j = draw(rng, yb.iter().copied());
        let w2 = draw(rng, spec.rho_row(w, i, j).iter().copied());
        p = posterior_given(&x, &p, i, xb[i]);
        q = posterior_given(&y, &q, j, yb[j]);
        w = w2;
        trace.beliefs.push(p.clone());
        trace.states.push(w);
    }
    trace
}

/// Variation statistics of Player 1's beliefs over `paths` independent
/// plays of Γ^e, each truncated at `horizon` stages.
#[allow(clippy::too_many_arguments)]
pub fn simulate_eta(
    spec: &GameSpec,
    sigma: &dyn Strategy,
    tau: &dyn Strategy,
    p: &[f64],
    q: &[f64],
    omega: usize,
    horizon: usize,
    paths: usize,
    seed: u64,
    eps: f64,
) -> Result<EtaStats> {
    if horizon == 0 || paths == 0 {
        return Err(precondition("horizon and path count must be positive"));
    }
    check_eps(eps)?;
    check_belief(p)?;
    check_belief(q)?;
    let d = spec.dims();
    if p.len() != d.k || q.len() != d.l || omega >= d.states {
        return Err(precondition("initial point has the wrong dimensions"));
    }
    let traces: Vec<EtaTrace> = (0..paths as u64)
        .into_par_iter()
        .map(|r| eta_path(spec, sigma, tau, p, q, omega, horizon, &mut path_rng(seed, r)))
        .collect();
    let mut var = Welford::default();
    let mut sq = Welford::default();
    let mut inc = vec![Welford::default(); d.k];
    for t in &traces {
        var.push(t.variation(eps));
        sq.push(t.squared_variation());
        for w in t.beliefs.windows(2) {
            for k in 0..d.k {
                inc[k].push(w[1][k] - w[0][k]);
            }
        }
    }
    Ok(EtaStats {
        paths,
        horizon,
        eps,
        variation: var.estimate(),
        variation_bound: 3.0 * (d.k as f64).sqrt() * eps.powi(-5),
        squared_variation: sq.estimate(),
        increment_mean: inc.iter().map(|w| w.estimate()).collect(),
        path_stages: paths * horizon,
    })
}
