//! Beliefs, type-dependent mixed actions and the belief-space game Γ^e.
//!
//! A state of Γ^e is `(p, q, ω)`: the public beliefs about the two types and
//! the current state. Players choose type-dependent mixed actions and beliefs
//! move by Bayes' rule.

use serde::{Deserialize, Serialize};

use crate::error::{precondition, Result};
use crate::game_model::GameSpec;

pub const BELIEF_TOL: f64 = 1e-12;

pub fn check_belief(p: &[f64]) -> Result<()> {
    if p.is_empty() || p.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(precondition(format!("not a belief: {p:?}")));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > BELIEF_TOL {
        return Err(precondition(format!("belief sums to {s}")));
    }
    Ok(())
}

/// A type-dependent mixed action `x(i|k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedAction {
    types: usize,
    actions: usize,
    data: Vec<f64>,
}

impl MixedAction {
    /// Rows are indexed by type, each row a distribution over actions.
    pub fn new(types: usize, actions: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != types * actions {
            return Err(precondition("mixed action has wrong size"));
        }
        for k in 0..types {
            let row = &data[k * actions..(k + 1) * actions];
            if row.iter().any(|v| !v.is_finite() || *v < -1e-15) {
                return Err(precondition(format!("row {k} has a negative entry")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(precondition(format!("row {k} sums to {s}")));
            }
        }
        Ok(Self::from_raw(types, actions, data))
    }

    pub(crate) fn from_raw(types: usize, actions: usize, data: Vec<f64>) -> Self {
        MixedAction { types, actions, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let actions = rows.first().map_or(0, |r| r.len());
        Self::new(rows.len(), actions, rows.concat())
    }

    pub fn pure(types: usize, actions: usize, i: usize) -> Self {
        let mut data = vec![0.0; types * actions];
        for k in 0..types {
            data[k * actions + i] = 1.0;
        }
        Self::from_raw(types, actions, data)
    }

    /// Same distribution for every type.
    pub fn type_independent(types: usize, dist: &[f64]) -> Self {
        Self::from_raw(types, dist.len(), dist.repeat(types))
    }

    pub fn types(&self) -> usize {
        self.types
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    #[inline]
    pub fn get(&self, k: usize, i: usize) -> f64 {
        self.data[k * self.actions + i]
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.data[k * self.actions..(k + 1) * self.actions]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Largest entrywise difference.
    pub fn max_abs_diff(&self, other: &MixedAction) -> f64 {
        self.data.iter().zip(&other.data).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// `x̄^p(i) = Σ_k p(k) x(i|k)`
pub fn marginal(x: &MixedAction, p: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.actions];
    for (k, pk) in p.iter().enumerate() {
        if *pk != 0.0 {
            for (o, v) in out.iter_mut().zip(x.row(k)) {
                *o += pk * v;
            }
        }
    }
    out
}

/// Bayes update after action `i`; the prior is returned when `i` has zero mass.
pub fn posterior(x: &MixedAction, p: &[f64], i: usize) -> Vec<f64> {
    let m: f64 = p.iter().enumerate().map(|(k, pk)| pk * x.get(k, i)).sum();
    posterior_given(x, p, i, m)
}

pub(crate) fn posterior_given(x: &MixedAction, p: &[f64], i: usize, m: f64) -> Vec<f64> {
    if m == 0.0 {
        return p.to_vec();
    }
    // uninformative action: keep the prior bit for bit
    let mut support = p.iter().enumerate().filter(|(_, pk)| **pk > 0.0).map(|(k, _)| x.get(k, i));
    if let Some(first) = support.next() {
        if support.all(|v| v == first) {
            return p.to_vec();
        }
    }
    p.iter().enumerate().map(|(k, pk)| x.get(k, i) * pk / m).collect()
}

/// One atom of the Γ^e transition, with the action pairs that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct EAtom {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub state: usize,
    pub mass: f64,
    pub sources: Vec<(usize, usize)>,
}

/// `ρ^e(·|p, q, ω, x, y)`. Atoms with bitwise-equal beliefs and state are merged.
pub fn transition_e(spec: &GameSpec, p: &[f64], q: &[f64], w: usize, x: &MixedAction, y: &MixedAction) -> Vec<EAtom> {
    let d = spec.dims();
    let xb = marginal(x, p);
    let yb = marginal(y, q);
    let mut atoms: Vec<EAtom> = Vec::new();
    for i in 0..d.i {
        if xb[i] == 0.0 {
            continue;
        }
        let pi = posterior_given(x, p, i, xb[i]);
        for j in 0..d.j {
            if yb[j] == 0.0 {
                continue;
            }
            let qj = posterior_given(y, q, j, yb[j]);
            for (w2, r) in spec.rho_row(w, i, j).iter().enumerate() {
                if *r == 0.0 {
                    continue;
                }
                let mass = r * xb[i] * yb[j];
                match atoms.iter_mut().find(|a| a.state == w2 && a.p == pi && a.q == qj) {
                    Some(a) => {
                        a.mass += mass;
                        if !a.sources.contains(&(i, j)) {
                            a.sources.push((i, j));
                        }
                    }
                    None => atoms.push(EAtom {
                        p: pi.clone(),
                        q: qj.clone(),
                        state: w2,
                        mass,
                        sources: vec![(i, j)],
                    }),
                }
            }
        }
    }
    atoms
}

/// `g^e(p, q, ω, x, y)`
pub fn payoff_e(spec: &GameSpec, p: &[f64], q: &[f64], w: usize, x: &MixedAction, y: &MixedAction) -> f64 {
    let d = spec.dims();
    let mut total = 0.0;
    for k in 0..d.k {
        if p[k] == 0.0 {
            continue;
        }
        for l in 0..d.l {
            if q[l] == 0.0 {
                continue;
            }
            let mut s = 0.0;
            for i in 0..d.i {
                let xi = x.get(k, i);
                if xi == 0.0 {
                    continue;
                }
                for j in 0..d.j {
                    s += xi * y.get(l, j) * spec.g(k, l, w, i, j);
                }
            }
            total += p[k] * q[l] * s;
        }
    }
    total
}

/// The frontier `F_ε`: beliefs with some coordinate at most `ε`.
pub fn in_frontier(p: &[f64], eps: f64) -> bool {
    p.iter().any(|v| *v <= eps)
}

pub fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

pub fn l2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Uniform sample from the simplex (normalized exponentials).
pub fn sample_simplex<R: rand::Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

pub fn sample_mixed_action<R: rand::Rng>(rng: &mut R, types: usize, actions: usize) -> MixedAction {
    let data = (0..types).flat_map(|_| sample_simplex(rng, actions)).collect();
    MixedAction::from_raw(types, actions, data)
}
