//! Action-level transformations for the informed player.
//!
//! An action `i` is non-revealing at `(x, ε, p)` when every type plays it
//! with probability within a factor `1 ± ε` of its marginal. The silent
//! mapping pushes an action towards non-revealing behaviour while keeping
//! marginals fixed, and the translation mapping rewrites an action played
//! at belief `p` so that it moves a different belief `p'` by the same jump.

use serde::Serialize;

use crate::belief_kernel::{l1, marginal, posterior_given, MixedAction};
use crate::error::{precondition, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NrPartition {
    pub nr: Vec<usize>,
    pub r: Vec<usize>,
    pub null: Vec<usize>,
    pub mass_nr: f64,
    pub mass_r: f64,
}

pub fn classify_nr(x: &MixedAction, p: &[f64], eps: f64) -> NrPartition {
    let xb = marginal(x, p);
    classify_with(x, &xb, eps)
}

fn classify_with(x: &MixedAction, xb: &[f64], eps: f64) -> NrPartition {
    let mut part = NrPartition {
        nr: Vec::new(),
        r: Vec::new(),
        null: Vec::new(),
        mass_nr: 0.0,
        mass_r: 0.0,
    };
    for (i, &m) in xb.iter().enumerate() {
        if m == 0.0 {
            part.null.push(i);
            continue;
        }
        let lo = (1.0 - eps) * m;
        let hi = (1.0 + eps) * m;
        if (0..x.types()).all(|k| lo <= x.get(k, i) && x.get(k, i) <= hi) {
            part.nr.push(i);
            part.mass_nr += m;
        } else {
            part.r.push(i);
            part.mass_r += m;
        }
    }
    part
}

/// `ε₀ = (1 - √(1 - 4ε)) / 2`, written without cancellation.
pub fn eps0(eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps <= 0.25) {
        return Err(precondition(format!("ε = {eps} outside (0, 1/4]")));
    }
    Ok(2.0 * eps / (1.0 + (1.0 - 4.0 * eps).sqrt()))
}

/// The ε-silent mapping `c_ε(x, p)`.
pub fn silent_map(x: &MixedAction, p: &[f64], eps: f64) -> Result<MixedAction> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(precondition(format!("ε = {eps} outside (0, 1]")));
    }
    let xb = marginal(x, p);
    let part = classify_with(x, &xb, eps);
    let (nk, ni) = (x.types(), x.actions());
    let mut data = vec![0.0; nk * ni];
    for k in 0..nk {
        let x_nr: f64 = part.nr.iter().map(|&i| x.get(k, i)).sum();
        let bracket = (1.0 - eps) * x_nr / part.mass_nr.max(f64::MIN_POSITIVE) + eps;
        for i in 0..ni {
            data[k * ni + i] = if part.nr.contains(&i) {
                bracket * xb[i]
            } else {
                (1.0 - eps) * x.get(k, i) + eps * xb[i]
            };
        }
    }
    Ok(MixedAction::from_raw(nk, ni, data))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ConciseAmbiguous {
    pub concise: bool,
    pub ambiguous: bool,
}

pub fn concise_ambiguous_check(x: &MixedAction, p: &[f64], eps: f64) -> ConciseAmbiguous {
    let xb = marginal(x, p);
    let part = classify_with(x, &xb, eps);
    let mut concise = true;
    for k in 0..x.types() {
        let x_nr: f64 = part.nr.iter().map(|&i| x.get(k, i)).sum();
        for &i in &part.nr {
            let want = x_nr * xb[i] / part.mass_nr;
            if (x.get(k, i) - want).abs() > 1e-10 {
                concise = false;
            }
        }
    }
    let pmin = p.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut ambiguous = true;
    for i in 0..x.actions() {
        let post = posterior_given(x, p, i, xb[i]);
        if post.iter().any(|v| *v < eps * pmin) {
            ambiguous = false;
        }
    }
    ConciseAmbiguous { concise, ambiguous }
}

/// Does `c_{ε₀}(x, p)` have the same non-revealing set at `ε` as `x` at `ε₀`?
pub fn nr_stability_check(x: &MixedAction, p: &[f64], eps: f64) -> Result<bool> {
    let e0 = eps0(eps)?;
    let xp = silent_map(x, p, e0)?;
    Ok(classify_nr(&xp, p, eps).nr == classify_nr(x, p, e0).nr)
}

/// Explicit mixing weights `β` showing that `x' = c_{ε₀}(x, p)` is a
/// convexification of `x`: each posterior of `x'` is a `β`-mixture of the
/// posteriors of `x`.
#[derive(Debug, Clone, Serialize)]
pub struct ConvexificationWitness {
    pub beta: Vec<Vec<f64>>,
    pub epsilon: f64,
    pub x_prime: MixedAction,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct WitnessReport {
    pub posterior_mixing: f64,
    pub marginal_conservation: f64,
    pub mass_transport: f64,
    pub max_l1_shift: f64,
    pub beta_row_sums: f64,
}

impl WitnessReport {
    pub fn holds(&self, certificate: f64, tol: f64) -> bool {
        self.posterior_mixing <= tol
            && self.marginal_conservation <= tol
            && self.mass_transport <= tol
            && self.beta_row_sums <= tol
            && self.max_l1_shift <= certificate + tol
    }
}

pub fn make_convexification_witness(x: &MixedAction, p: &[f64], eps: f64) -> Result<ConvexificationWitness> {
    let e0 = eps0(eps)?;
    let xb = marginal(x, p);
    let part = classify_with(x, &xb, e0);
    let ni = x.actions();
    let mut beta = vec![vec![0.0; ni]; ni];
    for (i, row) in beta.iter_mut().enumerate() {
        let in_nr = part.nr.contains(&i);
        for (ip, b) in row.iter_mut().enumerate() {
            *b = if in_nr {
                let ind = if part.nr.contains(&ip) { 1.0 / part.mass_nr } else { 0.0 };
                ((1.0 - e0) * ind + e0) * xb[ip]
            } else {
                (1.0 - e0) * ((i == ip) as u8 as f64) + e0 * xb[ip]
            };
        }
    }
    Ok(ConvexificationWitness {
        beta,
        epsilon: 6.0 * eps,
        x_prime: silent_map(x, p, e0)?,
    })
}

/// Measures the four witness properties.
pub fn check_witness(w: &ConvexificationWitness, x: &MixedAction, p: &[f64]) -> WitnessReport {
    let xb = marginal(x, p);
    let xpb = marginal(&w.x_prime, p);
    let ni = x.actions();
    let posts: Vec<Vec<f64>> = (0..ni).map(|i| posterior_given(x, p, i, xb[i])).collect();
    let mut rep = WitnessReport::default();
    for i in 0..ni {
        let post_new = posterior_given(&w.x_prime, p, i, xpb[i]);
        let mut mix = vec![0.0; p.len()];
        for (ip, post) in posts.iter().enumerate() {
            for (m, v) in mix.iter_mut().zip(post) {
                *m += w.beta[i][ip] * v;
            }
        }
        rep.posterior_mixing = rep.posterior_mixing.max(l1(&mix, &post_new));
        rep.marginal_conservation = rep.marginal_conservation.max((xpb[i] - xb[i]).abs());
        let transport: f64 = (0..ni).map(|a| w.beta[a][i] * xb[a]).sum();
        rep.mass_transport = rep.mass_transport.max((transport - xb[i]).abs());
        rep.max_l1_shift = rep.max_l1_shift.max(l1(&post_new, &posts[i]));
        let rs: f64 = w.beta[i].iter().sum();
        rep.beta_row_sums = rep.beta_row_sums.max((rs - 1.0).abs());
    }
    rep
}

/// Posterior of `c_{ε₀}(x, p)` after `i`, from the mixture formula:
/// non-revealing actions pool their posteriors, the rest keep their own;
/// both are then shrunk towards `p` by `ε₀`.
pub fn silent_posterior_by_mixture(x: &MixedAction, p: &[f64], eps: f64, i: usize) -> Result<Vec<f64>> {
    let e0 = eps0(eps)?;
    let xb = marginal(x, p);
    let part = classify_with(x, &xb, e0);
    let mut base = vec![0.0; p.len()];
    if part.nr.contains(&i) {
        for &ip in &part.nr {
            let post = posterior_given(x, p, ip, xb[ip]);
            for (b, v) in base.iter_mut().zip(post) {
                *b += xb[ip] / part.mass_nr * v;
            }
        }
    } else {
        base = posterior_given(x, p, i, xb[i]);
    }
    Ok(base.iter().zip(p).map(|(b, pk)| (1.0 - e0) * b + e0 * pk).collect())
}

/// Is `(x, p, p')` in the domain where the translation mapping is defined?
pub fn in_translation_domain(x: &MixedAction, p: &[f64], pp: &[f64]) -> bool {
    if pp.iter().any(|v| *v <= 0.0) {
        return false;
    }
    let xb = marginal(x, p);
    (0..x.actions()).all(|i| {
        let post = posterior_given(x, p, i, xb[i]);
        (0..p.len()).all(|k| pp[k] + post[k] - p[k] >= 0.0)
    })
}

/// `T(x, p, p')(i|k) = x̄^p(i) (p'(k) + p^x(k|i) - p(k)) / p'(k)` on the
/// domain, `x` itself elsewhere.
pub fn translation_map(x: &MixedAction, p: &[f64], pp: &[f64]) -> MixedAction {
    if !in_translation_domain(x, p, pp) {
        return x.clone();
    }
    let xb = marginal(x, p);
    let (nk, ni) = (x.types(), x.actions());
    let mut data = vec![0.0; nk * ni];
    for i in 0..ni {
        let post = posterior_given(x, p, i, xb[i]);
        for k in 0..nk {
            data[k * ni + i] = xb[i] / pp[k] * (pp[k] + post[k] - p[k]);
        }
    }
    MixedAction::from_raw(nk, ni, data)
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct JumpReport {
    pub checked: usize,
    pub violations: Vec<String>,
    /// Smallest `‖p^x(·|i) - p‖₁ / (ε min p)` over revealing actions.
    pub min_revealing_ratio: f64,
    /// Largest `‖p^x(·|i) - p‖₁` over non-revealing actions, against its bound.
    pub max_nr_jump: f64,
    pub nr_bound: f64,
}

pub fn jump_bounds_check(x: &MixedAction, p: &[f64], eps: f64) -> Result<JumpReport> {
    if p.iter().any(|v| *v <= 0.0) {
        return Err(precondition("jump bounds need a full-support belief"));
    }
    if !concise_ambiguous_check(x, p, eps).concise {
        return Err(precondition("action is not concise"));
    }
    let xb = marginal(x, p);
    let part = classify_with(x, &xb, eps);
    let inv_p = p.iter().map(|v| 1.0 / v).fold(0.0, f64::max);
    let pmin = p.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut rep = JumpReport {
        min_revealing_ratio: f64::INFINITY,
        ..Default::default()
    };
    if part.mass_nr > 0.0 {
        rep.nr_bound = 2.0 * inv_p * part.mass_r / part.mass_nr;
    }
    for &i in &part.nr {
        let jump = l1(&posterior_given(x, p, i, xb[i]), p);
        rep.checked += 1;
        rep.max_nr_jump = rep.max_nr_jump.max(jump);
        if jump > rep.nr_bound + 1e-12 {
            rep.violations.push(format!("nr action {i}: jump {jump} > {}", rep.nr_bound));
        }
    }
    for &i in &part.r {
        let jump = l1(&posterior_given(x, p, i, xb[i]), p);
        rep.checked += 1;
        rep.min_revealing_ratio = rep.min_revealing_ratio.min(jump / (eps * pmin));
        if jump < eps * pmin - 1e-12 {
            rep.violations.push(format!("revealing action {i}: jump {jump} < {}", eps * pmin));
        }
    }
    Ok(rep)
}
