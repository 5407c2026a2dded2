//! Ground-truth values of the original game at small scale.
//!
//! The discounted game is truncated after `N` stages, with `N` the first
//! horizon such that `(1 - λ)^N ‖g‖∞ ≤ tol / 2`, and the truncated game is
//! solved exactly. Three engines share the same stage weights:
//!
//! * `|K| = |L| = 1`: backward induction over `Ω` with a matrix game per
//!   stage and state.
//! * one-sided information with two types on the informed side: backward
//!   induction on the piecewise-linear concave value in the belief, rebuilt
//!   exactly at each stage from its supporting lines.
//! * anything else: the sequence form of the truncated game as one linear
//!   program, refused when the tableau would exceed the budget.

use rand::Rng;
use serde::Serialize;

use crate::belief_kernel::{l1, sample_simplex};
use crate::error::{precondition, Error, Result};
use crate::game_model::GameSpec;
use crate::lp::{Lp, Sense};
use crate::value_engine::matrix_game_value;

/// Default limit on dense tableau cells for one linear program.
pub const DEFAULT_BUDGET: usize = 2_000_000;

/// Numerical slack charged per stage on top of the truncation tail.
const STAGE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMethod {
    Absorbed,
    CompleteInformation,
    PiecewiseLinear,
    SequenceForm,
}

#[derive(Debug, Clone)]
pub struct OracleOptions {
    pub budget: usize,
    /// Force an engine instead of the automatic choice.
    pub method: Option<OracleMethod>,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            budget: DEFAULT_BUDGET,
            method: None,
        }
    }
}

/// The truncated discounted game from `(p, q, ω)`.
#[derive(Debug, Clone, Serialize)]
pub struct TruncatedGame {
    pub horizon: usize,
    pub lambda: f64,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub omega: usize,
    pub tail_bound: f64,
}

impl TruncatedGame {
    pub fn new(spec: &GameSpec, p: &[f64], q: &[f64], omega: usize, lambda: f64, tol: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(precondition(format!("λ = {lambda} outside (0, 1]")));
        }
        if tol.is_nan() || tol <= 0.0 {
            return Err(precondition("tol must be positive"));
        }
        let d = spec.dims();
        if p.len() != d.k || q.len() != d.l || omega >= d.states {
            return Err(precondition("initial point has the wrong dimensions"));
        }
        crate::belief_kernel::check_belief(p)?;
        crate::belief_kernel::check_belief(q)?;
        let g = spec.g_inf();
        let horizon = horizon(lambda, tol, g);
        Ok(TruncatedGame {
            horizon,
            lambda,
            p: p.to_vec(),
            q: q.to_vec(),
            omega,
            tail_bound: (1.0 - lambda).powi(horizon as i32) * g,
        })
    }

    /// Stage weights `λ (1 - λ)^{m-1}`, `m = 1..=N`.
    pub fn weights(&self) -> Vec<f64> {
        discounted_weights(self.lambda, self.horizon)
    }
}

/// Smallest `N ≥ 1` with `(1 - λ)^N g ≤ tol / 2`.
pub fn horizon(lambda: f64, tol: f64, g_inf: f64) -> usize {
    if lambda >= 1.0 || g_inf == 0.0 {
        return 1;
    }
    let mut n = 1;
    let mut t = (1.0 - lambda) * g_inf;
    while t > tol / 2.0 {
        t *= 1.0 - lambda;
        n += 1;
    }
    n
}

fn discounted_weights(lambda: f64, n: usize) -> Vec<f64> {
    let mut w = Vec::with_capacity(n);
    let mut f = lambda;
    for _ in 0..n {
        w.push(f);
        f *= 1.0 - lambda;
    }
    w
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleValue {
    pub value: f64,
    pub error_bound: f64,
    pub horizon: usize,
    pub lambda: f64,
    pub method: OracleMethod,
}

/// Discounted value `v_λ(p, q, ω)` within `tol`.
pub fn solve_truncated(spec: &GameSpec, p: &[f64], q: &[f64], omega: usize, lambda: f64, tol: f64) -> Result<OracleValue> {
    solve_truncated_with(spec, p, q, omega, lambda, tol, &OracleOptions::default())
}

pub fn solve_truncated_with(
    spec: &GameSpec,
    p: &[f64],
    q: &[f64],
    omega: usize,
    lambda: f64,
    tol: f64,
    opts: &OracleOptions,
) -> Result<OracleValue> {
    let tg = TruncatedGame::new(spec, p, q, omega, lambda, tol)?;
    let weights = tg.weights();
    // coarser envelopes keep long one-sided horizons tractable
    let slack = tol / 4.0;
    let (value, method) = match solve_weighted(spec, p, q, omega, &weights, slack, opts) {
        Ok(v) => v,
        Err(Error::BudgetExceeded { needed, budget, .. }) => {
            let fits = largest_fitting_horizon(spec, p, q, omega, lambda, tg.horizon, opts);
            let g = spec.g_inf();
            return Err(Error::BudgetExceeded {
                needed,
                budget,
                min_tol: 2.0 * (1.0 - lambda).powi(fits as i32) * g,
            });
        }
        Err(e) => return Err(e),
    };
    Ok(OracleValue {
        value,
        error_bound: tg.tail_bound + STAGE_SLACK * tg.horizon as f64 + if method == OracleMethod::PiecewiseLinear { slack } else { 0.0 },
        horizon: tg.horizon,
        lambda,
        method,
    })
}

fn largest_fitting_horizon(spec: &GameSpec, p: &[f64], q: &[f64], omega: usize, lambda: f64, upto: usize, opts: &OracleOptions) -> usize {
    (1..upto)
        .rev()
        .find(|&n| {
            let w = discounted_weights(lambda, n);
            let mut probe = opts.clone();
            probe.method = Some(choose_method(spec, omega, opts));
            matches!(size_only(spec, p, q, omega, &w, &probe), Ok(()))
        })
        .unwrap_or(0)
}

/// Exact value of the `n`-stage game with average payoff.
pub fn brute_force_vn(spec: &GameSpec, p: &[f64], q: &[f64], omega: usize, n: usize) -> Result<f64> {
    brute_force_vn_with(spec, p, q, omega, n, &OracleOptions::default())
}

pub fn brute_force_vn_with(spec: &GameSpec, p: &[f64], q: &[f64], omega: usize, n: usize, opts: &OracleOptions) -> Result<f64> {
    if n == 0 {
        return Err(precondition("n must be at least 1"));
    }
    let d = spec.dims();
    if p.len() != d.k || q.len() != d.l || omega >= d.states {
        return Err(precondition("initial point has the wrong dimensions"));
    }
    let w = vec![1.0 / n as f64; n];
    match solve_weighted(spec, p, q, omega, &w, 0.0, opts) {
        Ok((v, _)) => Ok(v),
        Err(Error::BudgetExceeded { needed, budget, .. }) => Err(Error::BudgetExceeded {
            needed,
            budget,
            min_tol: f64::NAN,
        }),
        Err(e) => Err(e),
    }
}

fn choose_method(spec: &GameSpec, omega: usize, opts: &OracleOptions) -> OracleMethod {
    if let Some(m) = opts.method {
        return m;
    }
    let d = spec.dims();
    if spec.is_absorbing_state(omega) {
        OracleMethod::Absorbed
    } else if d.k == 1 && d.l == 1 {
        OracleMethod::CompleteInformation
    } else if (d.l == 1 && d.k == 2) || (d.k == 1 && d.l == 2) {
        OracleMethod::PiecewiseLinear
    } else {
        OracleMethod::SequenceForm
    }
}

/// Value of the game with stage weights `w[m]`, `m = 0..N`.
/// `slack` is the total error the piecewise-linear engine may spend on
/// coarser envelopes.
fn solve_weighted(
    spec: &GameSpec,
    p: &[f64],
    q: &[f64],
    omega: usize,
    w: &[f64],
    slack: f64,
    opts: &OracleOptions,
) -> Result<(f64, OracleMethod)> {
    let method = choose_method(spec, omega, opts);
    let v = match method {
        OracleMethod::Absorbed => {
            if !spec.is_absorbing_state(omega) {
                return Err(precondition("state is not absorbing"));
            }
            w.iter().sum::<f64>() * expected_constant(spec, p, q, omega)
        }
        OracleMethod::CompleteInformation => {
            if spec.dims().k != 1 || spec.dims().l != 1 {
                return Err(precondition("complete-information engine needs |K| = |L| = 1"));
            }
            complete_information(spec, omega, w)
        }
        OracleMethod::PiecewiseLinear => {
            let d = spec.dims();
            if d.l == 1 && d.k == 2 {
                piecewise_linear(spec, p, omega, w, slack, opts.budget)?
            } else if d.k == 1 && d.l == 2 {
                -piecewise_linear(&spec.swap_players(), q, omega, w, slack, opts.budget)?
            } else {
                return Err(precondition("piecewise-linear engine needs one-sided information with two types"));
            }
        }
        OracleMethod::SequenceForm => sequence_form(spec, p, q, omega, w, opts.budget)?,
    };
    Ok((v, method))
}

fn size_only(spec: &GameSpec, p: &[f64], q: &[f64], omega: usize, w: &[f64], opts: &OracleOptions) -> Result<()> {
    match opts.method {
        Some(OracleMethod::SequenceForm) => Tree::build(spec, omega, w.len(), opts.budget, p.len(), q.len()).map(|_| ()),
        _ => solve_weighted(spec, p, q, omega, w, 0.0, opts).map(|_| ()),
    }
}

fn expected_constant(spec: &GameSpec, p: &[f64], q: &[f64], omega: usize) -> f64 {
    let mut v = 0.0;
    for (k, pk) in p.iter().enumerate() {
        for (l, ql) in q.iter().enumerate() {
            v += pk * ql * spec.g(k, l, omega, 0, 0);
        }
    }
    v
}

fn complete_information(spec: &GameSpec, omega: usize, w: &[f64]) -> f64 {
    let d = spec.dims();
    let mut next = vec![0.0; d.states];
    for m in (0..w.len()).rev() {
        let cur: Vec<f64> = (0..d.states)
            .map(|s| {
                let mut a = vec![0.0; d.i * d.j];
                for i in 0..d.i {
                    for j in 0..d.j {
                        let cont: f64 = spec.rho_row(s, i, j).iter().zip(&next).map(|(r, v)| r * v).sum();
                        a[i * d.j + j] = w[m] * spec.g(0, 0, s, i, j) + cont;
                    }
                }
                matrix_game_value(d.i, d.j, &a).value
            })
            .collect();
        next = cur;
    }
    next[omega]
}

// ----- one-sided, two types ------------------------------------------------

/// Concave, degree-one homogeneous function on `R^2_+` as a minimum of lines.
#[derive(Debug, Clone)]
struct Envelope {
    pieces: Vec<[f64; 2]>,
}

const ENVELOPE_TOL: f64 = 1e-11;
const ENVELOPE_DEPTH: usize = 60;
const CUT_TOL: f64 = 1e-12;

/// Lowest piece at `z` and its value.
fn argmin_piece(env: &Envelope, z: [f64; 2]) -> (usize, f64) {
    env.pieces
        .iter()
        .enumerate()
        .map(|(c, a)| (c, a[0] * z[0] + a[1] * z[1]))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("envelopes are nonempty")
}

/// One stage of the normalized recursion
/// `U_m = max_x min_j [w_m g + T_{m+1} E U_{m+1}] / T_m`, `T_m = Σ_{n≥m} w_n`.
struct StageProgram<'a> {
    spec: &'a GameSpec,
    omega: usize,
    weight: f64,
    carry: f64,
    next: &'a [Envelope],
    /// Absolute gap accepted between the envelope and the stage value.
    slack: f64,
    budget: usize,
}

impl StageProgram<'_> {
    /// Value at belief `p` and a supporting line there.
    ///
    /// Envelope pieces enter the program lazily: only those binding at some
    /// posterior are ever added as rows.
    fn solve(&self, p: [f64; 2]) -> Result<(f64, [f64; 2])> {
        let d = self.spec.dims();
        let first = |env: &Envelope, z: [f64; 2]| argmin_piece(env, z).0;
        let mut active: Vec<Vec<Vec<usize>>> = (0..d.i)
            .map(|_| (0..d.states).map(|w2| vec![first(&self.next[w2], p)]).collect())
            .collect();
        loop {
            let (sol, z, t) = self.solve_restricted(p, &active)?;
            let mut added = false;
            for i in 0..d.i {
                for w2 in 0..d.states {
                    let Some(tv) = t[i][w2] else { continue };
                    let zi = [sol.x[z[0][i]], sol.x[z[1][i]]];
                    let (a, m) = argmin_piece(&self.next[w2], zi);
                    if sol.x[tv] > m + CUT_TOL * (1.0 + m.abs()) && !active[i][w2].contains(&a) {
                        active[i][w2].push(a);
                        added = true;
                    }
                }
            }
            if !added {
                return Ok((sol.objective, [sol.duals[0], sol.duals[1]]));
            }
        }
    }

    #[allow(clippy::type_complexity)]
    fn solve_restricted(
        &self,
        p: [f64; 2],
        active: &[Vec<Vec<usize>>],
    ) -> Result<(crate::lp::LpSolution, Vec<Vec<usize>>, Vec<Vec<Option<usize>>>)> {
        let d = self.spec.dims();
        let mut lp = Lp::new();
        // z[k][i] = p(k) x(i|k)
        let z: Vec<Vec<usize>> = (0..2).map(|_| (0..d.i).map(|_| lp.add_var(0.0, false)).collect()).collect();
        let mut t = vec![vec![None; d.states]; d.i];
        for i in 0..d.i {
            for w2 in 0..d.states {
                if (0..d.j).any(|j| self.spec.rho(self.omega, i, j, w2) > 0.0) {
                    t[i][w2] = Some(lp.add_var(0.0, true));
                }
            }
        }
        let val = lp.add_var(1.0, true);
        for k in 0..2 {
            lp.add_row(z[k].iter().map(|&v| (v, 1.0)).collect(), Sense::Eq, p[k]);
        }
        for i in 0..d.i {
            for w2 in 0..d.states {
                let Some(tv) = t[i][w2] else { continue };
                for &c in &active[i][w2] {
                    let a = self.next[w2].pieces[c];
                    lp.add_row(vec![(tv, 1.0), (z[0][i], -a[0]), (z[1][i], -a[1])], Sense::Le, 0.0);
                }
            }
        }
        for j in 0..d.j {
            let mut row = vec![(val, 1.0)];
            for k in 0..2 {
                for i in 0..d.i {
                    row.push((z[k][i], -self.weight * self.spec.g(k, 0, self.omega, i, j)));
                }
            }
            for i in 0..d.i {
                for w2 in 0..d.states {
                    let r = self.spec.rho(self.omega, i, j, w2);
                    if r > 0.0 {
                        row.push((t[i][w2].expect("reachable"), -self.carry * r));
                    }
                }
            }
            lp.add_row(row, Sense::Le, 0.0);
        }
        if lp.tableau_size() > self.budget {
            return Err(Error::BudgetExceeded {
                needed: lp.tableau_size(),
                budget: self.budget,
                min_tol: f64::NAN,
            });
        }
        let sol = lp.solve()?;
        Ok((sol, z, t))
    }

    /// All linear pieces of the stage value, by sandwiching on `[0, 1]`.
    fn envelope(&self) -> Result<Envelope> {
        let at = |t: f64| [1.0 - t, t];
        let (_, a0) = self.solve(at(0.0))?;
        let (_, a1) = self.solve(at(1.0))?;
        let mut pieces = vec![a0];
        self.refine(0.0, a0, 1.0, a1, 0, &mut pieces)?;
        pieces.push(a1);
        pieces.dedup_by(|a, b| (a[0] - b[0]).abs() <= 1e-12 && (a[1] - b[1]).abs() <= 1e-12);
        Ok(Envelope { pieces })
    }

    fn refine(&self, tl: f64, al: [f64; 2], tr: f64, ar: [f64; 2], depth: usize, out: &mut Vec<[f64; 2]>) -> Result<()> {
        // lines a0 (1 - t) + a1 t meet where their difference vanishes
        let (d0, d1) = (al[0] - ar[0], al[1] - ar[1]);
        if d0.abs() <= 1e-13 && d1.abs() <= 1e-13 {
            return Ok(());
        }
        let denom = d0 - d1;
        if denom.abs() <= 1e-15 || depth >= ENVELOPE_DEPTH {
            return Ok(());
        }
        let ts = (d0 / denom).clamp(tl, tr);
        let line = (al[0] * (1.0 - ts) + al[1] * ts).min(ar[0] * (1.0 - ts) + ar[1] * ts);
        let (v, am) = self.solve([1.0 - ts, ts])?;
        if line - v <= self.slack.max(ENVELOPE_TOL * (1.0 + v.abs())) || ts <= tl || ts >= tr {
            return Ok(());
        }
        self.refine(tl, al, ts, am, depth + 1, out)?;
        out.push(am);
        self.refine(ts, am, tr, ar, depth + 1, out)
    }
}

/// Each envelope overstates the normalized continuation by at most
/// `slack / n`; the error in the value is then at most `slack`.
fn piecewise_linear(spec: &GameSpec, p: &[f64], omega: usize, w: &[f64], slack: f64, budget: usize) -> Result<f64> {
    let d = spec.dims();
    let zero = Envelope { pieces: vec![[0.0, 0.0]] };
    let mut next: Vec<Envelope> = vec![zero; d.states];
    let n = w.len();
    let tails: Vec<f64> = (0..=n).map(|m| w[m..].iter().sum()).collect();
    for m in (1..n).rev() {
        let mut cur = Vec::with_capacity(d.states);
        for s in 0..d.states {
            if spec.is_absorbing_state(s) {
                cur.push(Envelope {
                    pieces: vec![[spec.g(0, 0, s, 0, 0), spec.g(1, 0, s, 0, 0)]],
                });
                continue;
            }
            let prog = StageProgram {
                spec,
                omega: s,
                weight: w[m] / tails[m],
                carry: tails[m + 1] / tails[m],
                next: &next,
                slack: slack / n as f64,
                budget,
            };
            cur.push(prog.envelope()?);
        }
        next = cur;
    }
    let prog = StageProgram {
        spec,
        omega,
        weight: w[0] / tails[0],
        carry: tails[1] / tails[0],
        next: &next,
        slack: slack / n as f64,
        budget,
    };
    Ok(tails[0] * prog.solve([p[0], p[1]])?.0)
}

// ----- sequence form -------------------------------------------------------

/// Public histories with a non-absorbing current state.
struct Node {
    stage: usize,
    state: usize,
    chance: f64,
    /// Parent sequences `(node, action)` of both players.
    parent: Option<(usize, usize, usize)>,
}

struct Tree {
    nodes: Vec<Node>,
    /// Children reached after `(i, j)` at each node.
    children: Vec<Vec<((usize, usize), usize)>>,
}

impl Tree {
    fn estimate(nodes: usize, k: usize, l: usize, i: usize, j: usize) -> usize {
        let rows = k * nodes + l * nodes * j;
        let cols = k * nodes * i + 2 * l * nodes;
        (rows + 1) * (cols + 2 * rows + 1)
    }

    fn build(spec: &GameSpec, omega: usize, n: usize, budget: usize, k: usize, l: usize) -> Result<Self> {
        let d = spec.dims();
        let mut nodes = vec![Node {
            stage: 0,
            state: omega,
            chance: 1.0,
            parent: None,
        }];
        let mut children = vec![Vec::new()];
        let mut head = 0;
        while head < nodes.len() {
            let (stage, s, c) = (nodes[head].stage, nodes[head].state, nodes[head].chance);
            if stage + 1 < n {
                for i in 0..d.i {
                    for j in 0..d.j {
                        for (w2, &r) in spec.rho_row(s, i, j).iter().enumerate() {
                            if r == 0.0 || spec.is_absorbing_state(w2) {
                                continue;
                            }
                            let id = nodes.len();
                            nodes.push(Node {
                                stage: stage + 1,
                                state: w2,
                                chance: c * r,
                                parent: Some((head, i, j)),
                            });
                            children.push(Vec::new());
                            children[head].push(((i, j), id));
                            let needed = Self::estimate(nodes.len(), k, l, d.i, d.j);
                            if needed > budget {
                                return Err(Error::BudgetExceeded {
                                    needed,
                                    budget,
                                    min_tol: f64::NAN,
                                });
                            }
                        }
                    }
                }
            }
            head += 1;
        }
        let needed = Self::estimate(nodes.len(), k, l, d.i, d.j);
        if needed > budget {
            return Err(Error::BudgetExceeded {
                needed,
                budget,
                min_tol: f64::NAN,
            });
        }
        Ok(Tree { nodes, children })
    }
}

/// Player 1's realization plan `r1` against Player 2's dual prices `u`:
/// `max Σ_l u[l][root]` subject to
/// `u[l][h] - Σ_{children c of (h, j)} u[l][c] ≤ Σ_{k,i} A[(k,h,i),(l,h,j)] r1[k][h,i]`
/// and the realization constraints of `r1`.
fn sequence_form(spec: &GameSpec, p: &[f64], q: &[f64], omega: usize, w: &[f64], budget: usize) -> Result<f64> {
    let d = spec.dims();
    if spec.is_absorbing_state(omega) {
        return Ok(w.iter().sum::<f64>() * expected_constant(spec, p, q, omega));
    }
    let n = w.len();
    let tree = Tree::build(spec, omega, n, budget, d.k, d.l)?;
    let nn = tree.nodes.len();
    let tails: Vec<f64> = (0..n).map(|m| w[m + 1..].iter().sum()).collect();
    // nonnegative payoffs make the slack basis of Player 2's rows feasible
    let lo = min_payoff(spec).min(0.0);
    let mut lp = Lp::new();
    let r1: Vec<usize> = (0..d.k * nn * d.i).map(|_| lp.add_var(0.0, false)).collect();
    let r1_at = |k: usize, h: usize, i: usize| r1[(k * nn + h) * d.i + i];
    let u: Vec<usize> = (0..d.l * nn)
        .map(|idx| lp.add_var(if idx % nn == 0 { 1.0 } else { 0.0 }, true))
        .collect();
    let u_at = |l: usize, h: usize| u[l * nn + h];
    for k in 0..d.k {
        for h in 0..nn {
            let mut row: Vec<(usize, f64)> = (0..d.i).map(|i| (r1_at(k, h, i), 1.0)).collect();
            let rhs = match tree.nodes[h].parent {
                None => 1.0,
                Some((ph, pi, _)) => {
                    row.push((r1_at(k, ph, pi), -1.0));
                    0.0
                }
            };
            let r = lp.add_row(row, Sense::Eq, rhs);
            // start from "always play the first action"
            lp.hint_basis(r1_at(k, h, 0), r);
        }
    }
    for l in 0..d.l {
        for h in 0..nn {
            let node = &tree.nodes[h];
            let (s, m) = (node.state, node.stage);
            for j in 0..d.j {
                let mut row = vec![(u_at(l, h), 1.0)];
                for &((_, cj), c) in &tree.children[h] {
                    if cj == j {
                        row.push((u_at(l, c), -1.0));
                    }
                }
                row.sort_by_key(|e| e.0);
                row.dedup_by(|a, b| {
                    if a.0 == b.0 {
                        b.1 += a.1;
                        true
                    } else {
                        false
                    }
                });
                for k in 0..d.k {
                    let pq = p[k] * q[l] * node.chance;
                    if pq == 0.0 {
                        continue;
                    }
                    for i in 0..d.i {
                        let mut a = w[m] * (spec.g(k, l, s, i, j) - lo);
                        if tails[m] > 0.0 {
                            for (w2, &r) in spec.rho_row(s, i, j).iter().enumerate() {
                                if r > 0.0 && spec.is_absorbing_state(w2) {
                                    a += r * tails[m] * (spec.g(k, l, w2, 0, 0) - lo);
                                }
                            }
                        }
                        if a != 0.0 {
                            row.push((r1_at(k, h, i), -pq * a));
                        }
                    }
                }
                lp.add_row(row, Sense::Le, 0.0);
            }
        }
    }
    if lp.tableau_size() > budget {
        return Err(Error::BudgetExceeded {
            needed: lp.tableau_size(),
            budget,
            min_tol: f64::NAN,
        });
    }
    Ok(lp.solve()?.objective + lo * w.iter().sum::<f64>())
}

fn min_payoff(spec: &GameSpec) -> f64 {
    let d = spec.dims();
    let mut lo = f64::INFINITY;
    for k in 0..d.k {
        for l in 0..d.l {
            for s in 0..d.states {
                for i in 0..d.i {
                    for j in 0..d.j {
                        lo = lo.min(spec.g(k, l, s, i, j));
                    }
                }
            }
        }
    }
    lo
}

// ----- probes --------------------------------------------------------------

#[derive(Debug, Clone, Default, Serialize)]
pub struct ProbeReport {
    pub samples: usize,
    pub concavity_violations: usize,
    pub convexity_violations: usize,
    pub lipschitz_violations: usize,
    /// Largest `β v(p′) + (1-β) v(p″) - v(p)` seen, and its mirror in `q`.
    pub worst_concavity: f64,
    pub worst_convexity: f64,
    pub worst_lipschitz: f64,
}

impl ProbeReport {
    pub fn violations(&self) -> usize {
        self.concavity_violations + self.convexity_violations + self.lipschitz_violations
    }
}

/// Samples `p = β p′ + (1-β) p″` (and the same in `q`) and checks concavity
/// in `p`, convexity in `q` and the `‖g‖∞`-Lipschitz bound, each up to
/// twice the oracle tolerance.
pub fn concavity_convexity_probe<R: Rng>(
    spec: &GameSpec,
    omega: usize,
    lambda: f64,
    samples: usize,
    tol: f64,
    rng: &mut R,
) -> Result<ProbeReport> {
    let d = spec.dims();
    let g = spec.g_inf();
    let v = |p: &[f64], q: &[f64]| solve_truncated(spec, p, q, omega, lambda, tol).map(|o| o.value);
    let mut rep = ProbeReport {
        samples,
        worst_concavity: f64::NEG_INFINITY,
        worst_convexity: f64::NEG_INFINITY,
        worst_lipschitz: f64::NEG_INFINITY,
        ..Default::default()
    };
    let slack = 2.0 * tol;
    for _ in 0..samples {
        let beta: f64 = rng.gen();
        let (p1, p2, q) = (sample_simplex(rng, d.k), sample_simplex(rng, d.k), sample_simplex(rng, d.l));
        let p: Vec<f64> = p1.iter().zip(&p2).map(|(a, b)| beta * a + (1.0 - beta) * b).collect();
        let (v1, v2, vm) = (v(&p1, &q)?, v(&p2, &q)?, v(&p, &q)?);
        let c = beta * v1 + (1.0 - beta) * v2 - vm;
        rep.worst_concavity = rep.worst_concavity.max(c);
        rep.concavity_violations += (c > slack) as usize;
        let lip = (v1 - v2).abs() - g * l1(&p1, &p2);
        rep.worst_lipschitz = rep.worst_lipschitz.max(lip);
        rep.lipschitz_violations += (lip > slack) as usize;

        let (q1, q2, p) = (sample_simplex(rng, d.l), sample_simplex(rng, d.l), sample_simplex(rng, d.k));
        let q: Vec<f64> = q1.iter().zip(&q2).map(|(a, b)| beta * a + (1.0 - beta) * b).collect();
        let (u1, u2, um) = (v(&p, &q1)?, v(&p, &q2)?, v(&p, &q)?);
        let c = um - (beta * u1 + (1.0 - beta) * u2);
        rep.worst_convexity = rep.worst_convexity.max(c);
        rep.convexity_violations += (c > slack) as usize;
        let lip = (u1 - u2).abs() - g * l1(&q1, &q2);
        rep.worst_lipschitz = rep.worst_lipschitz.max(lip);
        rep.lipschitz_violations += (lip > slack) as usize;
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game_model::{catalog, Dims};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn shifted(spec: &GameSpec, delta: f64) -> GameSpec {
        let d = spec.dims();
        GameSpec::from_fn(
            d,
            |w, i, j, w2| spec.rho(w, i, j, w2),
            |k, l, w, i, j| spec.g(k, l, w, i, j) + delta,
        )
        .unwrap()
    }

    #[test]
    fn horizon_rule() {
        assert_eq!(horizon(1.0, 1e-3, 5.0), 1);
        assert_eq!(horizon(0.5, 1e-3, 1.0), 11);
        let n = horizon(0.2, 1e-4, 2.0);
        assert!(0.8f64.powi(n as i32) * 2.0 <= 5e-5);
        assert!(0.8f64.powi(n as i32 - 1) * 2.0 > 5e-5);
    }

    #[test]
    fn big_match_value_one_half() {
        let bm = catalog::big_match();
        for lam in [0.5, 0.1, 0.01] {
            let o = solve_truncated(&bm, &[1.0], &[1.0], 0, lam, 1e-3).unwrap();
            assert_eq!(o.method, OracleMethod::CompleteInformation);
            assert!((o.value - 0.5).abs() <= 1e-3, "λ={lam}: {}", o.value);
            assert!(o.error_bound <= 1e-3);
        }
    }

    #[test]
    fn big_match_vn() {
        let bm = catalog::big_match();
        for n in 1..=3 {
            let v = brute_force_vn(&bm, &[1.0], &[1.0], 0, n).unwrap();
            assert!((v - 0.5).abs() < 1e-9);
            let opts = OracleOptions {
                method: Some(OracleMethod::SequenceForm),
                ..Default::default()
            };
            let v = brute_force_vn_with(&bm, &[1.0], &[1.0], 0, n, &opts).unwrap();
            assert!((v - 0.5).abs() < 1e-9, "n={n}: {v}");
        }
    }

    #[test]
    fn constant_payoff() {
        let d = Dims {
            k: 2,
            l: 2,
            states: 2,
            i: 2,
            j: 2,
        };
        let spec = GameSpec::from_fn(d, |_, i, j, w2| if (i + j) % 2 == w2 { 1.0 } else { 0.0 }, |_, _, _, _, _| 0.3).unwrap();
        for n in 1..=3 {
            let v = brute_force_vn(&spec, &[0.4, 0.6], &[0.5, 0.5], 0, n).unwrap();
            assert!((v - 0.3).abs() < 1e-9);
        }
    }

    #[test]
    fn one_stage_is_bayesian_matrix_game() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let spec = catalog::random_absorbing(&mut rng, 2, 2, 2, 2, 1);
        let (p, q) = ([0.3, 0.7], [0.6, 0.4]);
        // pure strategies of the one-shot game: a map type -> action for each player
        let mut a = vec![0.0; 16];
        for s1 in 0..4usize {
            for s2 in 0..4usize {
                let mut v = 0.0;
                for k in 0..2 {
                    for l in 0..2 {
                        v += p[k] * q[l] * spec.g(k, l, 0, (s1 >> k) & 1, (s2 >> l) & 1);
                    }
                }
                a[s1 * 4 + s2] = v;
            }
        }
        let want = matrix_game_value(4, 4, &a).value;
        let got = solve_truncated(&spec, &p, &q, 0, 1.0, 1e-6).unwrap();
        assert_eq!(got.horizon, 1);
        assert!((got.value - want).abs() < 1e-9);
        assert!((brute_force_vn(&spec, &p, &q, 0, 1).unwrap() - want).abs() < 1e-9);
    }

    #[test]
    fn piecewise_linear_matches_sequence_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let sf = OracleOptions {
            method: Some(OracleMethod::SequenceForm),
            ..Default::default()
        };
        for _ in 0..5 {
            let spec = catalog::random_one_sided(&mut rng, 2, 2, 2, 2);
            let p = sample_simplex(&mut rng, 2);
            for n in 1..=3 {
                let a = brute_force_vn(&spec, &p, &[1.0], 0, n).unwrap();
                let b = brute_force_vn_with(&spec, &p, &[1.0], 0, n, &sf).unwrap();
                assert!((a - b).abs() < 1e-9, "n={n}: {a} vs {b}");
            }
            let a = solve_truncated_with(&spec, &p, &[1.0], 0, 0.7, 5e-2, &OracleOptions::default()).unwrap();
            let b = solve_truncated_with(&spec, &p, &[1.0], 0, 0.7, 5e-2, &sf).unwrap();
            assert_eq!(a.method, OracleMethod::PiecewiseLinear);
            // only the envelope slack separates the two
            assert!(a.value >= b.value - 1e-9);
            assert!(a.value - b.value <= a.error_bound - b.error_bound + 1e-9);
        }
    }

    #[test]
    fn complete_information_matches_sequence_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let sf = OracleOptions {
            method: Some(OracleMethod::SequenceForm),
            ..Default::default()
        };
        for _ in 0..5 {
            let spec = catalog::random_absorbing(&mut rng, 1, 1, 3, 2, 2);
            let a = solve_truncated(&spec, &[1.0], &[1.0], 0, 0.6, 0.2).unwrap();
            let b = solve_truncated_with(&spec, &[1.0], &[1.0], 0, 0.6, 0.2, &sf).unwrap();
            assert!((a.value - b.value).abs() < 1e-9);
        }
    }

    #[test]
    fn antisymmetric_under_swap() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..4 {
            let spec = catalog::random_absorbing(&mut rng, 2, 2, 2, 2, 1);
            let (p, q) = (sample_simplex(&mut rng, 2), sample_simplex(&mut rng, 2));
            let a = brute_force_vn(&spec, &p, &q, 0, 2).unwrap();
            let b = brute_force_vn(&spec.swap_players(), &q, &p, 0, 2).unwrap();
            assert!((a + b).abs() < 1e-9);
        }
        let spec = catalog::random_one_sided(&mut rng, 2, 2, 2, 2);
        let a = solve_truncated(&spec, &[0.3, 0.7], &[1.0], 0, 0.3, 1e-4).unwrap();
        let b = solve_truncated(&spec.swap_players(), &[1.0], &[0.3, 0.7], 0, 0.3, 1e-4).unwrap();
        assert!((a.value + b.value).abs() < 1e-9);
    }

    #[test]
    fn truncation_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let spec = catalog::random_one_sided(&mut rng, 2, 2, 2, 3);
        let a = solve_truncated(&spec, &[0.5, 0.5], &[1.0], 0, 0.2, 1e-3).unwrap();
        let b = solve_truncated(&spec, &[0.5, 0.5], &[1.0], 0, 0.2, 1e-4).unwrap();
        assert!((a.value - b.value).abs() <= 1e-3);
        assert!(b.horizon > a.horizon);
    }

    #[test]
    fn budget_reports_min_tol() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let spec = catalog::random_absorbing(&mut rng, 2, 2, 2, 2, 1);
        let e = solve_truncated(&spec, &[0.5, 0.5], &[0.5, 0.5], 0, 0.1, 1e-4).unwrap_err();
        match e {
            Error::BudgetExceeded { min_tol, budget, needed } => {
                assert_eq!(budget, DEFAULT_BUDGET);
                assert!(needed > budget);
                assert!(min_tol > 1e-4 && min_tol.is_finite());
                let ok = solve_truncated(&spec, &[0.5, 0.5], &[0.5, 0.5], 0, 0.1, min_tol * 1.0001);
                assert!(ok.is_ok(), "{ok:?}");
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn probe_one_sided() {
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        let spec = catalog::random_one_sided(&mut rng, 2, 2, 2, 2);
        let r = concavity_convexity_probe(&spec, 0, 0.3, 20, 5e-3, &mut rng).unwrap();
        assert_eq!(r.violations(), 0, "{r:?}");
        let bm = catalog::big_match();
        let r = concavity_convexity_probe(&bm, 0, 0.3, 5, 5e-3, &mut rng).unwrap();
        assert_eq!(r.concavity_violations, 0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn shift_moves_value_exactly(seed in any::<u64>(), delta in -0.5f64..0.5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let spec = catalog::random_one_sided(&mut rng, 2, 2, 2, 2);
            let moved = shifted(&spec, delta);
            let p = sample_simplex(&mut rng, 2);
            for n in 1..=3 {
                let a = brute_force_vn(&spec, &p, &[1.0], 0, n).unwrap();
                let b = brute_force_vn(&moved, &p, &[1.0], 0, n).unwrap();
                prop_assert!((b - a - delta).abs() < 1e-9);
            }
            let a = solve_truncated(&spec, &p, &[1.0], 0, 0.4, 1e-4).unwrap();
            let b = solve_truncated(&moved, &p, &[1.0], 0, 0.4, 1e-4).unwrap();
            prop_assert!((b.value - a.value - delta).abs() <= a.error_bound + b.error_bound);
        }
    }
}
