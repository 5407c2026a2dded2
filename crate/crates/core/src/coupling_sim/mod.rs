//! Monte Carlo play of the belief dynamics.
//!
//! [`simulate_eta`] plays Γ^e directly, [`simulate_coupling`] runs the
//! coupled pair (continuous beliefs, vertex beliefs) and [`lifted_payoff`]
//! copies a Γ^φ strategy into the original one-sided game.
//!
//! Path `r` of a run draws from `ChaCha8Rng::seed_from_u64(seed)` on stream
//! `r`, so results do not depend on the worker count.

mod coupling;
mod eta;
mod lifting;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::belief_kernel::MixedAction;
use crate::error::{precondition, Result};
use crate::strategy_transforms::{eps0, silent_map};
use crate::value_engine::{matrix_game_value, ActionGrid, FiniteBeliefGame, GridStrategies, StageTable, ValueFunction};

pub use coupling::{simulate_coupled_trace, simulate_coupling, AlphaGate, CoupledStage, CoupledTrace, CouplingOptions, CouplingStats};
pub use eta::{simulate_eta, EtaStats, EtaTrace};
pub use lifting::{lifted_payoff, payoff_horizon, LiftReport, LiftedStrategy};

/// A lottery over mixed actions.
pub type Lottery = Vec<(f64, MixedAction)>;

/// Stationary strategy on public beliefs. The lottery picks the mixed action
/// of the stage; its rows are indexed by the player's own type.
pub trait Strategy: Sync {
    fn lottery(&self, p: &[f64], q: &[f64], w: usize) -> Lottery;
}

impl<F> Strategy for F
where
    F: Fn(&[f64], &[f64], usize) -> Lottery + Sync,
{
    fn lottery(&self, p: &[f64], q: &[f64], w: usize) -> Lottery {
        self(p, q, w)
    }
}

/// The same type-independent action everywhere.
#[derive(Debug, Clone)]
pub struct ConstantStrategy(pub MixedAction);

impl Strategy for ConstantStrategy {
    fn lottery(&self, _: &[f64], _: &[f64], _: usize) -> Lottery {
        vec![(1.0, self.0.clone())]
    }
}

/// Player 1's stage strategy from the Shapley operator at the visited
/// beliefs, made ε-concise by the silent mapping with `ε₀`.
///
/// The grid stage game is rebuilt at `(p, q, ω)` with `v` lifted through the
/// splitting as continuation, the optimal grid mix is averaged into one
/// mixed action and `c_{ε₀}` is applied to it.
pub struct GreedyConcise<'a> {
    game: &'a FiniteBeliefGame,
    values: &'a ValueFunction,
    gx: ActionGrid,
    gy: ActionGrid,
    eps: f64,
    eps0: f64,
}

impl<'a> GreedyConcise<'a> {
    pub fn new(game: &'a FiniteBeliefGame, values: &'a ValueFunction, gx: ActionGrid, gy: ActionGrid, eps: f64) -> Result<Self> {
        let e0 = eps0(eps)?;
        Ok(GreedyConcise {
            game,
            values,
            gx,
            gy,
            eps,
            eps0: e0,
        })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Averaged optimal grid mix before the silent mapping.
    pub fn raw_action(&self, p: &[f64], q: &[f64], w: usize) -> MixedAction {
        let d = self.game.spec.dims();
        if self.game.is_absorbing(w) {
            return MixedAction::pure(d.k, d.i, 0);
        }
        let t = StageTable::build(self.game, p, q, w, &self.gx, &self.gy);
        let sol = matrix_game_value(t.rows, t.cols, &t.matrix(&self.values.values, self.values.lambda));
        collapse(&self.gx, &sol.row)
    }

    pub fn action(&self, p: &[f64], q: &[f64], w: usize) -> MixedAction {
        let x = self.raw_action(p, q, w);
        silent_map(&x, p, self.eps0).expect("ε₀ lies in (0, 1/4]")
    }
}

impl Strategy for GreedyConcise<'_> {
    fn lottery(&self, p: &[f64], q: &[f64], w: usize) -> Lottery {
        vec![(1.0, self.action(p, q, w))]
    }
}

/// `Σ_r w_r x_r`, row by row.
pub fn collapse(grid: &ActionGrid, weights: &[f64]) -> MixedAction {
    let (nk, ni) = (grid.types, grid.actions);
    let mut data = vec![0.0; nk * ni];
    for (r, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            for (o, v) in data.iter_mut().zip(grid.point(r).data()) {
                *o += w * v;
            }
        }
    }
    for k in 0..nk {
        let row = &mut data[k * ni..(k + 1) * ni];
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= s);
    }
    MixedAction::new(nk, ni, data).expect("averages of grid points are mixed actions")
}

/// A stationary grid strategy of Γ^f, defined on vertex beliefs only.
pub struct GridPolicy<'a> {
    game: &'a FiniteBeliefGame,
    grid: ActionGrid,
    mixes: Vec<Vec<(usize, f64)>>,
    first_player: bool,
}

impl<'a> GridPolicy<'a> {
    pub fn player1(game: &'a FiniteBeliefGame, gx: ActionGrid, s: &GridStrategies) -> Self {
        GridPolicy {
            game,
            grid: gx,
            mixes: s.player1.clone(),
            first_player: true,
        }
    }

    pub fn player2(game: &'a FiniteBeliefGame, gy: ActionGrid, s: &GridStrategies) -> Self {
        GridPolicy {
            game,
            grid: gy,
            mixes: s.player2.clone(),
            first_player: false,
        }
    }

    /// The mix of the state collapsed into one mixed action.
    pub fn expected_action(&self, p: &[f64], q: &[f64], w: usize) -> MixedAction {
        let mut weights = vec![0.0; self.grid.len()];
        for (a, m) in self.lottery_indices(p, q, w) {
            weights[a] += m;
        }
        collapse(&self.grid, &weights)
    }

    fn lottery_indices(&self, p: &[f64], q: &[f64], w: usize) -> Vec<(usize, f64)> {
        let g = self.game;
        if g.is_absorbing(w) {
            return vec![(0, 1.0)];
        }
        let pv = g.tri_k.vertex_index(p).expect("grid strategies are defined on vertex beliefs");
        let qv = g.tri_l.vertex_index(q).expect("grid strategies are defined on vertex beliefs");
        let idx = g.index(crate::value_engine::BeliefState { p: pv, q: qv, w });
        self.mixes[idx].clone()
    }
}

impl Strategy for GridPolicy<'_> {
    fn lottery(&self, p: &[f64], q: &[f64], w: usize) -> Lottery {
        let g = self.game;
        if g.is_absorbing(w) {
            let d = g.spec.dims();
            let (t, a) = if self.first_player { (d.k, d.i) } else { (d.l, d.j) };
            return vec![(1.0, MixedAction::pure(t, a, 0))];
        }
        self.lottery_indices(p, q, w)
            .into_iter()
            .map(|(a, m)| (m, self.grid.point(a).clone()))
            .collect()
    }
}

/// Inverse-CDF draw from a distribution given by `probs`.
pub fn draw<R: Rng>(rng: &mut R, probs: impl IntoIterator<Item = f64>) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in probs.into_iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    // rounding left u above the total mass
    last
}

pub fn draw_lottery<R: Rng>(rng: &mut R, lottery: &Lottery) -> MixedAction {
    if lottery.len() == 1 {
        return lottery[0].1.clone();
    }
    let a = draw(rng, lottery.iter().map(|e| e.0));
    lottery[a].1.clone()
}

/// RNG for one simulated path: a fixed seed with the path index as stream.
pub fn path_rng(seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl Estimate {
    pub fn of(xs: &[f64]) -> Self {
        let mut acc = Welford::default();
        xs.iter().for_each(|&x| acc.push(x));
        acc.estimate()
    }

    /// `|mean - target| ≤ k·se`; a zero standard error demands equality up
    /// to rounding.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.se + 1e-12 * (1.0 + target.abs())
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Welford {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub(crate) fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub(crate) fn estimate(&self) -> Estimate {
        let se = if self.n > 1 {
            (self.m2 / (self.n - 1) as f64 / self.n as f64).sqrt()
        } else {
            0.0
        };
        Estimate {
            mean: self.mean,
            se,
            n: self.n,
        }
    }
}

pub(crate) fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps <= 0.25) {
        return Err(precondition(format!("ε = {eps} outside (0, 1/4]")));
    }
    Ok(())
}
