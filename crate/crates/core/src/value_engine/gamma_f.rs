use crate::belief_kernel::{marginal, posterior_given, MixedAction};
use crate::game_model::GameSpec;
use crate::triangulation::Triangulation;

use super::grid::ActionGrid;

/// The finite-state game Γ^f on `P × Q × Ω`.
///
/// After each stage the posterior beliefs are split onto the vertices of the
/// two triangulations, independently.
#[derive(Debug, Clone)]
pub struct FiniteBeliefGame {
    pub spec: GameSpec,
    pub tri_k: Triangulation,
    pub tri_l: Triangulation,
    absorbing: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BeliefState {
    pub p: usize,
    pub q: usize,
    pub w: usize,
}

pub fn build_gamma_f(spec: &GameSpec, tri_k: &Triangulation, tri_l: &Triangulation) -> FiniteBeliefGame {
    let d = spec.dims();
    assert_eq!(tri_k.types(), d.k, "triangulation of Δ(K) has the wrong dimension");
    assert_eq!(tri_l.types(), d.l, "triangulation of Δ(L) has the wrong dimension");
    FiniteBeliefGame {
        spec: spec.clone(),
        tri_k: tri_k.clone(),
        tri_l: tri_l.clone(),
        absorbing: (0..d.states).map(|w| spec.is_absorbing_state(w)).collect(),
    }
}

/// Split of each action's posterior: `(vertex, x̄(i) · S[vertex | p^x(·|i)])`.
pub(crate) type ActionSplit = Vec<Vec<(usize, f64)>>;

pub(crate) fn action_split(tri: &Triangulation, x: &MixedAction, p: &[f64]) -> (Vec<f64>, ActionSplit) {
    let xb = marginal(x, p);
    let splits = xb
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            if m == 0.0 {
                return Vec::new();
            }
            let post = posterior_given(x, p, i, m);
            tri.split(&post)
                .expect("posteriors stay in the simplex")
                .into_iter()
                .map(|(v, a)| (v, a * m))
                .collect()
        })
        .collect();
    (xb, splits)
}

impl FiniteBeliefGame {
    pub fn n_states(&self) -> usize {
        self.tri_k.n_vertices() * self.tri_l.n_vertices() * self.spec.dims().states
    }

    #[inline]
    pub fn index(&self, s: BeliefState) -> usize {
        (s.p * self.tri_l.n_vertices() + s.q) * self.spec.dims().states + s.w
    }

    pub fn state(&self, idx: usize) -> BeliefState {
        let ns = self.spec.dims().states;
        let nq = self.tri_l.n_vertices();
        BeliefState {
            p: idx / (ns * nq),
            q: (idx / ns) % nq,
            w: idx % ns,
        }
    }

    pub fn is_absorbing(&self, w: usize) -> bool {
        self.absorbing[w]
    }

    pub fn p(&self, s: BeliefState) -> &[f64] {
        self.tri_k.vertex(s.p)
    }

    pub fn q(&self, s: BeliefState) -> &[f64] {
        self.tri_l.vertex(s.q)
    }

    /// Expected payoff at an absorbing state; also its exact value.
    pub fn absorbing_value(&self, p: &[f64], q: &[f64], w: usize) -> f64 {
        let d = self.spec.dims();
        let mut v = 0.0;
        for k in 0..d.k {
            for l in 0..d.l {
                v += p[k] * q[l] * self.spec.g(k, l, w, 0, 0);
            }
        }
        v
    }

    /// `g^f`, equal to `g^e` at the vertex beliefs.
    pub fn payoff(&self, s: BeliefState, x: &MixedAction, y: &MixedAction) -> f64 {
        crate::belief_kernel::payoff_e(&self.spec, self.p(s), self.q(s), s.w, x, y)
    }

    /// `ρ^f(·|s, x, y)` as `(state index, mass)` sorted by index.
    pub fn transition(&self, s: BeliefState, x: &MixedAction, y: &MixedAction) -> Vec<(usize, f64)> {
        self.transition_from(self.p(s), self.q(s), s.w, x, y)
    }

    /// The same kernel from arbitrary beliefs `(p, q)`.
    pub fn transition_from(&self, p: &[f64], q: &[f64], w: usize, x: &MixedAction, y: &MixedAction) -> Vec<(usize, f64)> {
        let (_, sx) = action_split(&self.tri_k, x, p);
        let (_, sy) = action_split(&self.tri_l, y, q);
        self.combine(w, &sx, &sy)
    }

    pub(crate) fn combine(&self, w: usize, sx: &ActionSplit, sy: &ActionSplit) -> Vec<(usize, f64)> {
        let d = self.spec.dims();
        let mut raw = Vec::new();
        for (i, si) in sx.iter().enumerate() {
            if si.is_empty() {
                continue;
            }
            for (j, sj) in sy.iter().enumerate() {
                if sj.is_empty() {
                    continue;
                }
                for (w2, &r) in self.spec.rho_row(w, i, j).iter().enumerate() {
                    if r == 0.0 {
                        continue;
                    }
                    for &(pv, a) in si {
                        for &(qv, b) in sj {
                            let t = (pv * self.tri_l.n_vertices() + qv) * d.states + w2;
                            raw.push((t, r * a * b));
                        }
                    }
                }
            }
        }
        raw.sort_by_key(|e| e.0);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(raw.len());
        for (t, m) in raw {
            match out.last_mut() {
                Some(last) if last.0 == t => last.1 += m,
                _ => out.push((t, m)),
            }
        }
        out
    }
}

/// Payoffs and transitions of one stage game, for every grid pair.
/// Entries are stored row-major over `(x, y)` with transitions in CSR form.
#[derive(Debug, Clone)]
pub struct StageTable {
    pub rows: usize,
    pub cols: usize,
    pub payoff: Vec<f64>,
    offsets: Vec<u32>,
    targets: Vec<u32>,
    masses: Vec<f64>,
}

impl StageTable {
    pub fn build(g: &FiniteBeliefGame, p: &[f64], q: &[f64], w: usize, gx: &ActionGrid, gy: &ActionGrid) -> Self {
        let d = g.spec.dims();
        let xs: Vec<(Vec<f64>, ActionSplit)> = gx.points().iter().map(|x| action_split(&g.tri_k, x, p)).collect();
        let ys: Vec<(Vec<f64>, ActionSplit)> = gy.points().iter().map(|y| action_split(&g.tri_l, y, q)).collect();
        // u[x][l][j] = Σ_k p(k) Σ_i x(i|k) g(k, l, w, i, j)
        let us: Vec<Vec<f64>> = gx
            .points()
            .iter()
            .map(|x| {
                let mut u = vec![0.0; d.l * d.j];
                for k in 0..d.k {
                    if p[k] == 0.0 {
                        continue;
                    }
                    for i in 0..d.i {
                        let xi = p[k] * x.get(k, i);
                        if xi == 0.0 {
                            continue;
                        }
                        for l in 0..d.l {
                            for j in 0..d.j {
                                u[l * d.j + j] += xi * g.spec.g(k, l, w, i, j);
                            }
                        }
                    }
                }
                u
            })
            .collect();
        let (rows, cols) = (gx.len(), gy.len());
        let mut payoff = Vec::with_capacity(rows * cols);
        let mut offsets = Vec::with_capacity(rows * cols + 1);
        let mut targets = Vec::new();
        let mut masses = Vec::new();
        offsets.push(0);
        for (xi, (_, sx)) in xs.iter().enumerate() {
            for (yi, (_, sy)) in ys.iter().enumerate() {
                let y = gy.point(yi);
                let mut v = 0.0;
                for l in 0..d.l {
                    if q[l] == 0.0 {
                        continue;
                    }
                    let s: f64 = (0..d.j).map(|j| y.get(l, j) * us[xi][l * d.j + j]).sum();
                    v += q[l] * s;
                }
                payoff.push(v);
                for (t, m) in g.combine(w, sx, sy) {
                    targets.push(t as u32);
                    masses.push(m);
                }
                offsets.push(targets.len() as u32);
            }
        }
        StageTable {
            rows,
            cols,
            payoff,
            offsets,
            targets,
            masses,
        }
    }

    /// `λ g + (1 - λ) E[v]` for every grid pair.
    pub fn matrix(&self, v: &[f64], lambda: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.payoff.len());
        for e in 0..self.payoff.len() {
            let (a, b) = (self.offsets[e] as usize, self.offsets[e + 1] as usize);
            let cont: f64 = (a..b).map(|t| self.masses[t] * v[self.targets[t] as usize]).sum();
            out.push(lambda * self.payoff[e] + (1.0 - lambda) * cont);
        }
        out
    }

    pub fn transition(&self, x: usize, y: usize) -> Vec<(usize, f64)> {
        let e = x * self.cols + y;
        let (a, b) = (self.offsets[e] as usize, self.offsets[e + 1] as usize);
        (a..b).map(|t| (self.targets[t] as usize, self.masses[t])).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief_kernel::{sample_mixed_action, transition_e};
    use crate::game_model::catalog;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_type_reduces_to_base_game() {
        let bm = catalog::big_match();
        let t1 = Triangulation::new(1, 3).unwrap();
        let g = build_gamma_f(&bm, &t1, &t1);
        assert_eq!(g.n_states(), 3);
        let x = MixedAction::type_independent(1, &[0.25, 0.75]);
        let y = MixedAction::type_independent(1, &[0.5, 0.5]);
        let s = g.state(0);
        let t = g.transition(s, &x, &y);
        let want = [0.75, 0.125, 0.125];
        for (idx, m) in t {
            assert!((m - want[idx]).abs() < 1e-15);
        }
    }

    #[test]
    fn silent_actions_keep_vertex_beliefs() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let spec = catalog::random_absorbing(&mut rng, 2, 2, 2, 2, 2);
        let tk = Triangulation::new(2, 4).unwrap();
        let g = build_gamma_f(&spec, &tk, &tk);
        let s = BeliefState { p: 1, q: 3, w: 0 };
        let x = MixedAction::type_independent(2, &[0.3, 0.7]);
        let y = MixedAction::type_independent(2, &[0.6, 0.4]);
        for (t, _) in g.transition(s, &x, &y) {
            let u = g.state(t);
            assert_eq!((u.p, u.q), (1, 3));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn rho_f_is_stochastic_with_base_marginal(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let spec = catalog::random_absorbing(&mut rng, 2, 3, 2, 2, 2);
            let tk = Triangulation::new(2, 3).unwrap();
            let tl = Triangulation::new(3, 2).unwrap();
            let g = build_gamma_f(&spec, &tk, &tl);
            let s = g.state(rand::Rng::gen_range(&mut rng, 0..g.n_states()));
            let x = sample_mixed_action(&mut rng, 2, 2);
            let y = sample_mixed_action(&mut rng, 3, 2);
            let t = g.transition(s, &x, &y);
            let total: f64 = t.iter().map(|e| e.1).sum();
            prop_assert!((total - 1.0).abs() < 1e-10);
            let mut wf = [0.0; 3];
            for (idx, m) in &t { wf[g.state(*idx).w] += m; }
            let mut we = [0.0; 3];
            for a in transition_e(&spec, g.p(s), g.q(s), s.w, &x, &y) { we[a.state] += a.mass; }
            for w in 0..3 { prop_assert!((wf[w] - we[w]).abs() < 1e-12); }
        }
    }
}
