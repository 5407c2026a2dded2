//! Experiment driver behind the `absorb` binary.
//!
//! Every subcommand reads one JSON [`ExperimentConfig`], writes its
//! artifacts into the output directory and returns an exit code: 0 when all
//! checked invariants hold, 1 on a violation or a failed computation, 2 on a
//! usage or config error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::belief_kernel::{l1, MixedAction};
use crate::coupling_sim::{simulate_coupled_trace, simulate_coupling, CouplingOptions, GreedyConcise, GridPolicy};
use crate::error::{Error, Result};
use crate::exact_oracle::{solve_truncated_with, OracleOptions, DEFAULT_BUDGET};
use crate::game_model::{classify_states, validate_game, GameSpec};
use crate::triangulation::{certify_alpha_c, triangulation_stats, Triangulation};
use crate::value_engine::{
    build_gamma_f, optimal_strategies, separable_decomposition_check, solve_with_cache, ActionGrid, BeliefState, FiniteBeliefGame,
    StageCache, ValueFunction,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Decomposition residuals above this count as a violation.
const DECOMP_TOL: f64 = 1e-12;
/// Largest tolerated `|ΔP' - ΔP - Z|` in a coupled path.
const TELESCOPING_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartPoint {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub omega: usize,
}

/// One experiment. Relative `game` and `out` paths are resolved against the
/// directory of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub game: PathBuf,
    pub n_k: usize,
    pub n_l: usize,
    pub grid_m: usize,
    /// Strictly decreasing discount factors; the first one drives `couple`.
    pub lambdas: Vec<f64>,
    pub eps: f64,
    /// Value-iteration stopping tolerance.
    pub tol: f64,
    pub oracle_tol: f64,
    pub oracle_budget: usize,
    pub seed: u64,
    /// Stage cap of coupled paths.
    pub horizon: usize,
    pub paths: usize,
    /// Sample count of `certify-tri` and `decomp-check`.
    pub samples: usize,
    /// Coupled paths written to `traces.csv`; 0 writes none.
    pub trace_paths: usize,
    pub start: Option<StartPoint>,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            game: PathBuf::new(),
            n_k: 4,
            n_l: 4,
            grid_m: 4,
            lambdas: vec![0.5, 0.1],
            eps: 0.1,
            tol: 1e-6,
            oracle_tol: 1e-3,
            oracle_budget: DEFAULT_BUDGET,
            seed: 0,
            horizon: 10_000,
            paths: 1000,
            samples: 10_000,
            trace_paths: 0,
            start: None,
            out: PathBuf::from("out"),
        }
    }
}

const CONFIG_HELP: &str = "\
Config file (JSON, unknown keys rejected). Defaults:
  game          (required) path to the game spec
  n_k, n_l      4, 4        triangulation resolutions of Δ(K), Δ(L)
  grid_m        4           action-grid resolution
  lambdas       [0.5, 0.1]  strictly decreasing, each in (0, 1]
  eps           0.1         in (0, 1/4]
  tol           1e-6        value-iteration tolerance
  oracle_tol    1e-3
  oracle_budget 2000000     dense LP cells
  seed          0
  horizon       10000       stage cap of coupled paths
  paths         1000
  samples       10000       certify-tri and decomp-check samples
  trace_paths   0           coupled paths written to traces.csv
  start         none        {\"p\": [...], \"q\": [...], \"omega\": n}; default is the
                            vertex pair nearest the barycenters at the non-absorbing state
  out           \"out\"

Exit codes: 0 ok, 1 invariant violation or failed computation, 2 usage error.";

fn field(name: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{name}: {msg}"))
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.game.as_os_str().is_empty() {
            return Err(field("game", "missing"));
        }
        if self.n_k == 0 {
            return Err(field("n_k", "must be at least 1"));
        }
        if self.n_l == 0 {
            return Err(field("n_l", "must be at least 1"));
        }
        if self.grid_m == 0 {
            return Err(field("grid_m", "must be at least 1"));
        }
        if self.lambdas.is_empty() {
            return Err(field("lambdas", "empty"));
        }
        if let Some(l) = self.lambdas.iter().find(|l| !(**l > 0.0 && **l <= 1.0)) {
            return Err(field("lambdas", format!("{l} outside (0, 1]")));
        }
        if self.lambdas.windows(2).any(|w| w[1] >= w[0]) {
            return Err(field("lambdas", "must be strictly decreasing"));
        }
        if !(self.eps > 0.0 && self.eps <= 0.25) {
            return Err(field("eps", format!("{} outside (0, 1/4]", self.eps)));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(field("tol", "must be positive"));
        }
        if !(self.oracle_tol > 0.0 && self.oracle_tol.is_finite()) {
            return Err(field("oracle_tol", "must be positive"));
        }
        if self.oracle_budget == 0 {
            return Err(field("oracle_budget", "must be positive"));
        }
        if self.horizon == 0 {
            return Err(field("horizon", "must be at least 1"));
        }
        if self.paths == 0 {
            return Err(field("paths", "must be at least 1"));
        }
        if self.samples == 0 {
            return Err(field("samples", "must be at least 1"));
        }
        Ok(())
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Reads and validates a config; relative paths are made relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json_str(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        if cfg.game.is_relative() {
            cfg.game = base.join(&cfg.game);
        }
        if cfg.out.is_relative() {
            cfg.out = base.join(&cfg.out);
        }
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json_string())?;
        Ok(())
    }

    /// SHA-256 of the compact JSON form with `game` and `out` blanked: the
    /// game is hashed by content separately and the output location does
    /// not change results.
    pub fn sha256(&self) -> String {
        let mut c = self.clone();
        c.game = PathBuf::new();
        c.out = PathBuf::new();
        hex::encode(Sha256::digest(serde_json::to_string(&c).expect("config serializes")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Check the game spec and classify its states
    Validate,
    /// Solve Γ^f for every λ and write values.csv
    Solve,
    /// Exact truncated values at the start point (or every vertex state)
    Oracle,
    /// Coupled Γ^η / Γ^f simulation with the greedy concise strategy
    Couple,
    /// Triangulation statistics and the (α, C) certificate
    CertifyTri,
    /// Separable decomposition of g^f and ρ^f on sampled points
    DecompCheck,
    /// All of the above at the start point, in one report
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Solve => "solve",
            Command::Oracle => "oracle",
            Command::Couple => "couple",
            Command::CertifyTri => "certify-tri",
            Command::DecompCheck => "decomp-check",
            Command::Report => "report",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "absorb", version, about = "Values of absorbing games with incomplete information on both sides", after_help = CONFIG_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment config (JSON)
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides the config seed
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Overrides the config output directory
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads [default: available parallelism]
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,
    /// Print the result document on stdout
    #[arg(long, global = true)]
    json: bool,
}

/// What a command produced.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub ok: bool,
    pub result: Value,
    /// `(file name, body)`; bodies carry no header yet.
    pub files: Vec<(String, String)>,
    pub summary: Vec<String>,
    pub warnings: Vec<String>,
}

impl Artifacts {
    fn new(ok: bool, result: Value) -> Self {
        Artifacts {
            ok,
            result,
            files: Vec::new(),
            summary: Vec::new(),
            warnings: Vec::new(),
        }
    }
}

struct Context {
    cfg: ExperimentConfig,
    spec: GameSpec,
}

impl Context {
    fn game(&self) -> Result<FiniteBeliefGame> {
        let d = self.spec.dims();
        let tk = Triangulation::new(d.k, self.cfg.n_k)?;
        let tl = Triangulation::new(d.l, self.cfg.n_l)?;
        Ok(build_gamma_f(&self.spec, &tk, &tl))
    }

    fn grids(&self) -> (ActionGrid, ActionGrid) {
        let d = self.spec.dims();
        (
            ActionGrid::new(self.cfg.grid_m, d.k, d.i),
            ActionGrid::new(self.cfg.grid_m, d.l, d.j),
        )
    }

    fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.cfg.seed)
    }

    /// The configured start, or the vertices nearest the barycenters at the
    /// first non-absorbing state.
    fn start(&self, g: &FiniteBeliefGame) -> Result<BeliefState> {
        if let Some(s) = &self.cfg.start {
            let p = g
                .tri_k
                .vertex_index(&s.p)
                .ok_or_else(|| field("start.p", "not a vertex of the Δ(K) triangulation"))?;
            let q = g
                .tri_l
                .vertex_index(&s.q)
                .ok_or_else(|| field("start.q", "not a vertex of the Δ(L) triangulation"))?;
            if s.omega >= self.spec.dims().states {
                return Err(field("start.omega", "no such state"));
            }
            return Ok(BeliefState { p, q, w: s.omega });
        }
        let nearest = |tri: &Triangulation| {
            let c = vec![1.0 / tri.types() as f64; tri.types()];
            (0..tri.n_vertices())
                .min_by(|a, b| l1(tri.vertex(*a), &c).total_cmp(&l1(tri.vertex(*b), &c)))
                .expect("a triangulation has vertices")
        };
        let w = (0..self.spec.dims().states)
            .find(|w| !self.spec.is_absorbing_state(*w))
            .unwrap_or(0);
        Ok(BeliefState {
            p: nearest(&g.tri_k),
            q: nearest(&g.tri_l),
            w,
        })
    }
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

fn fmt_action(x: &MixedAction) -> String {
    (0..x.types()).map(|k| fmt_vec(x.row(k))).collect::<Vec<_>>().join("|")
}

fn csv_body(header: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

fn cmd_validate(ctx: &Context) -> Result<Artifacts> {
    let spec = &ctx.spec;
    let d = spec.dims();
    let rep = validate_game(spec);
    let classes = classify_states(spec);
    let ok = rep.is_ok() && classes.is_ok();
    let mut a = Artifacts::new(
        ok,
        json!({
            "dims": {"K": d.k, "L": d.l, "states": d.states, "I": d.i, "J": d.j},
            "g_inf": spec.g_inf(),
            "augmented": spec.is_augmented(),
            "report": rep,
            "absorbing": classes.as_ref().ok(),
            "classification_error": classes.as_ref().err().map(|e| e.to_string()),
        }),
    );
    a.summary.push(format!(
        "game: |K|={} |L|={} |Ω|={} |I|={} |J|={}, {}",
        d.k,
        d.l,
        d.states,
        d.i,
        d.j,
        if ok { "valid absorbing game" } else { "INVALID" }
    ));
    for v in &rep.violations {
        a.summary.push(format!("violation: {v}"));
    }
    if let Err(e) = classes {
        a.summary.push(format!("violation: {e}"));
    }
    Ok(a)
}

fn solve_all(ctx: &Context, g: &FiniteBeliefGame) -> Result<Vec<ValueFunction>> {
    let (gx, gy) = ctx.grids();
    let cache = StageCache::new(g, gx, gy);
    let mut values: Vec<ValueFunction> = Vec::new();
    for &lam in &ctx.cfg.lambdas {
        let start = values.last().map(|v| v.values.clone());
        values.push(solve_with_cache(&cache, lam, ctx.cfg.tol, start.as_deref())?);
    }
    Ok(values)
}

fn cmd_solve(ctx: &Context) -> Result<Artifacts> {
    let g = ctx.game()?;
    let values = solve_all(ctx, &g)?;
    let start = ctx.start(&g)?;
    let mut rows = Vec::new();
    for v in &values {
        for idx in 0..g.n_states() {
            let s = g.state(idx);
            rows.push(vec![
                fmt_vec(g.p(s)),
                fmt_vec(g.q(s)),
                ctx.spec.states[s.w].clone(),
                v.lambda.to_string(),
                v.values[idx].to_string(),
                v.residual.to_string(),
                ctx.cfg.grid_m.to_string(),
            ]);
        }
    }
    let at_start: Vec<f64> = values.iter().map(|v| v.at(&g, start)).collect();
    let ok = values.iter().all(|v| v.residual <= ctx.cfg.tol);
    let mut a = Artifacts::new(
        ok,
        json!({
            "n_states": g.n_states(),
            "grid_m": ctx.cfg.grid_m,
            "start": {"p": g.p(start), "q": g.q(start), "omega": start.w},
            "solves": values.iter().zip(&at_start).map(|(v, s)| json!({
                "lambda": v.lambda,
                "value_at_start": s,
                "residual": v.residual,
                "iterations": v.iterations,
                "max_gap": v.max_gap,
            })).collect::<Vec<_>>(),
        }),
    );
    a.files.push((
        "values.csv".into(),
        csv_body(&["p_vertex", "q_vertex", "omega", "lambda", "value", "residual", "grid_m"], rows),
    ));
    for (v, s) in values.iter().zip(&at_start) {
        a.summary.push(format!(
            "λ={}: v^f(start)={s:.6} residual={:.2e} after {} sweeps",
            v.lambda, v.residual, v.iterations
        ));
    }
    Ok(a)
}

fn oracle_rows(
    ctx: &Context,
    g: &FiniteBeliefGame,
    points: &[BeliefState],
) -> Result<Vec<(BeliefState, crate::exact_oracle::OracleValue)>> {
    use rayon::prelude::*;
    let opts = OracleOptions {
        budget: ctx.cfg.oracle_budget,
        method: None,
    };
    let jobs: Vec<(BeliefState, f64)> = ctx.cfg.lambdas.iter().flat_map(|&l| points.iter().map(move |s| (*s, l))).collect();
    jobs.into_par_iter()
        .map(|(s, l)| {
            Ok((
                s,
                solve_truncated_with(&ctx.spec, g.p(s), g.q(s), s.w, l, ctx.cfg.oracle_tol, &opts)?,
            ))
        })
        .collect()
}

fn oracle_artifacts(ctx: &Context, g: &FiniteBeliefGame, points: &[BeliefState]) -> Result<Artifacts> {
    let rows = oracle_rows(ctx, g, points)?;
    let csv_rows = rows
        .iter()
        .map(|(s, o)| {
            vec![
                fmt_vec(g.p(*s)),
                fmt_vec(g.q(*s)),
                ctx.spec.states[s.w].clone(),
                o.lambda.to_string(),
                o.value.to_string(),
                o.error_bound.to_string(),
                o.horizon.to_string(),
                serde_json::to_value(o.method)
                    .expect("method serializes")
                    .as_str()
                    .unwrap_or_default()
                    .to_string(),
            ]
        })
        .collect();
    let mut a = Artifacts::new(
        true,
        json!({
            "points": rows.len(),
            "values": rows.iter().map(|(s, o)| json!({"p": g.p(*s), "q": g.q(*s), "omega": s.w, "oracle": o})).collect::<Vec<_>>(),
        }),
    );
    a.files.push((
        "oracle.csv".into(),
        csv_body(
            &[
                "p_vertex",
                "q_vertex",
                "omega",
                "lambda",
                "value",
                "error_bound",
                "horizon",
                "method",
            ],
            csv_rows,
        ),
    ));
    if rows.len() <= 8 {
        for (s, o) in &rows {
            a.summary.push(format!(
                "λ={} at p={:?}, ω={}: v={:.6} ± {:.1e}",
                o.lambda,
                g.p(*s),
                s.w,
                o.value,
                o.error_bound
            ));
        }
    } else {
        a.summary.push(format!("{} oracle values written", rows.len()));
    }
    Ok(a)
}

fn cmd_oracle(ctx: &Context) -> Result<Artifacts> {
    let g = ctx.game()?;
    let points = if ctx.cfg.start.is_some() {
        vec![ctx.start(&g)?]
    } else {
        (0..g.n_states()).map(|i| g.state(i)).collect()
    };
    oracle_artifacts(ctx, &g, &points)
}

fn cmd_couple(ctx: &Context) -> Result<Artifacts> {
    let g = ctx.game()?;
    let (gx, gy) = ctx.grids();
    let cache = StageCache::new(&g, gx.clone(), gy.clone());
    let lambda = ctx.cfg.lambdas[0];
    let v = solve_with_cache(&cache, lambda, ctx.cfg.tol, None)?;
    let strat = optimal_strategies(&cache, &v);
    let sigma = GreedyConcise::new(&g, &v, gx, gy.clone(), ctx.cfg.eps)?;
    let tau = GridPolicy::player2(&g, gy, &strat);
    let start = ctx.start(&g)?;
    let c = certify_alpha_c(&g.tri_k, ctx.cfg.samples, &mut ctx.rng())?.c;
    let opts = CouplingOptions {
        eps: ctx.cfg.eps,
        horizon: ctx.cfg.horizon,
        paths: ctx.cfg.paths,
        seed: ctx.cfg.seed,
        c_cert: Some(c),
    };
    let (p, q) = (g.p(start).to_vec(), g.q(start).to_vec());
    let stats = simulate_coupling(&g, &sigma, &tau, &p, &q, start.w, &opts)?;
    let ok = stats.zero_mean_ok() && stats.variance_identity_ok() && stats.telescoping_ok(TELESCOPING_TOL);
    let mut a = Artifacts::new(
        ok,
        json!({"lambda": lambda, "start": {"p": p, "q": q, "omega": start.w}, "stats": stats}),
    );
    if stats.alpha_gate.holds == Some(false) {
        a.warnings.push(format!(
            "α-gate fails: stepsize {:.3e} > {:.3e} (not enforced)",
            stats.alpha_gate.alpha,
            stats.alpha_gate.required.unwrap_or(f64::NAN)
        ));
    }
    a.summary.push(format!(
        "{} paths, {} informative stages; Z mean {} ; variance gap {:.2e} ± {:.1e}",
        stats.paths,
        stats.z_stages,
        stats
            .z_mean
            .iter()
            .map(|e| format!("{:.1e}±{:.1e}", e.mean, e.se))
            .collect::<Vec<_>>()
            .join(" "),
        stats.variance_gap.mean,
        stats.variance_gap.se
    ));
    a.summary.push(format!(
        "sup E‖P'-P‖₁ = {:.4} (stage {}), Pr(T₀ ≤ H) = {:.3}, Pr(T₀ ≤ H, P'∉F_2ε) = {:.3}",
        stats.sup_gap.mean, stats.sup_gap_stage, stats.stopped.mean, stats.t0_outside_2eps.mean
    ));
    if ctx.cfg.trace_paths > 0 {
        let mut rows = Vec::new();
        for r in 0..ctx.cfg.trace_paths as u64 {
            let t = simulate_coupled_trace(&g, &sigma, &tau, &p, &q, start.w, &opts, r)?;
            for st in &t.stages {
                rows.push(vec![
                    r.to_string(),
                    st.m.to_string(),
                    fmt_action(&st.x),
                    fmt_action(&st.x_prime),
                    fmt_action(&st.y_prime),
                    ctx.spec.actions_1[st.i].clone(),
                    ctx.spec.actions_2[st.j].clone(),
                    fmt_vec(&st.p),
                    fmt_vec(&st.p_prime),
                    fmt_vec(&st.q),
                    ctx.spec.states[st.omega].clone(),
                    fmt_vec(&st.z),
                    t.t0.map_or(String::new(), |m| m.to_string()),
                ]);
            }
        }
        a.files.push((
            "traces.csv".into(),
            csv_body(
                &[
                    "path", "m", "X", "X_prime", "Y_prime", "I", "J", "P", "P_prime", "Q", "Omega", "Z", "T0",
                ],
                rows,
            ),
        ));
    }
    Ok(a)
}

fn cmd_certify(ctx: &Context) -> Result<Artifacts> {
    let d = ctx.spec.dims();
    let mut rng = ctx.rng();
    let tk = triangulation_stats(&Triangulation::new(d.k, ctx.cfg.n_k)?, ctx.cfg.samples, &mut rng)?;
    let tl = triangulation_stats(&Triangulation::new(d.l, ctx.cfg.n_l)?, ctx.cfg.samples, &mut rng)?;
    let good = |s: &crate::triangulation::TriangulationStats| s.c_cert.is_finite() && s.stepsize <= s.stepsize_bound * (1.0 + 1e-12);
    let mut a = Artifacts::new(good(&tk) && good(&tl), json!({"k": tk, "l": tl}));
    for (name, s) in [("Δ(K)", &tk), ("Δ(L)", &tl)] {
        a.summary.push(format!(
            "{name}: N={} vertices={} cells={} stepsize={:.4} (bound {:.4}) C={:.4}",
            s.resolution, s.n_vertices, s.n_cells, s.stepsize, s.stepsize_bound, s.c_cert
        ));
    }
    Ok(a)
}

fn cmd_decomp(ctx: &Context) -> Result<Artifacts> {
    let g = ctx.game()?;
    let rep = separable_decomposition_check(&g, ctx.cfg.samples, &mut ctx.rng());
    let mut a = Artifacts::new(rep.holds(DECOMP_TOL), json!(rep));
    a.summary.push(format!(
        "{} samples: payoff error {:.2e}, transition error {:.2e}",
        rep.samples, rep.max_payoff_error, rep.max_transition_error
    ));
    Ok(a)
}

fn cmd_report(ctx: &Context) -> Result<Artifacts> {
    let mut sections = serde_json::Map::new();
    let mut all = Artifacts::new(true, Value::Null);
    let validate = cmd_validate(ctx)?;
    let can_solve = validate.ok;
    let mut parts = vec![("validate", Ok(validate))];
    if can_solve {
        let g = ctx.game()?;
        let start = ctx.start(&g)?;
        parts.push(("certify-tri", cmd_certify(ctx)));
        parts.push(("decomp-check", cmd_decomp(ctx)));
        parts.push(("solve", cmd_solve(ctx)));
        parts.push(("oracle", oracle_artifacts(ctx, &g, &[start])));
        parts.push(("couple", cmd_couple(ctx)));
    }
    for (name, part) in parts {
        match part {
            Ok(p) => {
                all.ok &= p.ok;
                all.summary.extend(p.summary.iter().map(|s| format!("[{name}] {s}")));
                all.warnings.extend(p.warnings);
                all.files.extend(p.files);
                sections.insert(name.into(), json!({"ok": p.ok, "result": p.result}));
            }
            Err(e) => {
                all.ok = false;
                all.summary.push(format!("[{name}] failed: {e}"));
                sections.insert(name.into(), json!({"ok": false, "error": e.to_string()}));
            }
        }
    }
    all.result = Value::Object(sections);
    Ok(all)
}

/// Runs one subcommand on an already loaded config.
pub fn execute(command: Command, cfg: &ExperimentConfig) -> Result<Artifacts> {
    cfg.validate()?;
    let spec = crate::game_model::load_game_spec(&cfg.game);
    let spec = match (command, spec) {
        (_, Ok(s)) => s,
        (Command::Validate, Err(Error::InvalidSpec(v))) => {
            let mut a = Artifacts::new(false, json!({"violations": v}));
            a.summary.extend(v.iter().map(|s| format!("violation: {s}")));
            return Ok(a);
        }
        (_, Err(e)) => return Err(e),
    };
    let ctx = Context { cfg: cfg.clone(), spec };
    match command {
        Command::Validate => cmd_validate(&ctx),
        Command::Solve => cmd_solve(&ctx),
        Command::Oracle => cmd_oracle(&ctx),
        Command::Couple => cmd_couple(&ctx),
        Command::CertifyTri => cmd_certify(&ctx),
        Command::DecompCheck => cmd_decomp(&ctx),
        Command::Report => cmd_report(&ctx),
    }
}

#[derive(Serialize)]
struct Envelope<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config_sha256: &'a str,
    game_sha256: &'a str,
    seed: u64,
    ok: bool,
    result: &'a Value,
}

fn file_sha256(path: &Path) -> String {
    std::fs::read(path).map(|b| hex::encode(Sha256::digest(b))).unwrap_or_default()
}

/// Writes `<command>.json` and the command's tables into `cfg.out`.
/// Returns the result document.
pub fn write_artifacts(command: Command, cfg: &ExperimentConfig, a: &Artifacts) -> Result<String> {
    let config_sha = cfg.sha256();
    let game_sha = file_sha256(&cfg.game);
    std::fs::create_dir_all(&cfg.out)?;
    let doc = serde_json::to_string_pretty(&Envelope {
        tool: "absorb",
        version: VERSION,
        command: command.name(),
        config_sha256: &config_sha,
        game_sha256: &game_sha,
        seed: cfg.seed,
        ok: a.ok,
        result: &a.result,
    })
    .expect("result serializes");
    std::fs::write(cfg.out.join(format!("{}.json", command.name())), format!("{doc}\n"))?;
    for (name, body) in &a.files {
        let mut text = String::new();
        let _ = writeln!(text, "# absorb {VERSION} config_sha256={config_sha} game_sha256={game_sha}");
        text.push_str(body);
        std::fs::write(cfg.out.join(name), text)?;
    }
    Ok(doc)
}

/// Entry point of the binary; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let Some(path) = cli.config.as_deref() else {
        eprintln!(
            "error: --config PATH is required\n\nUsage: absorb <COMMAND> --config <PATH> [--seed U64] [--out DIR] [--workers N] [--json]"
        );
        return 2;
    };
    let mut cfg = match ExperimentConfig::load(path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = cli.out {
        cfg.out = o;
    }
    let work = || execute(cli.command, &cfg);
    let outcome = match cli.workers {
        Some(0) => {
            eprintln!("error: --workers must be at least 1");
            return 2;
        }
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(work),
            Err(e) => {
                eprintln!("error: thread pool: {e}");
                return 1;
            }
        },
        None => work(),
    };
    let a = match outcome {
        Ok(a) => a,
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            return 2;
        }
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    for w in &a.warnings {
        eprintln!("warning: {w}");
    }
    let doc = match write_artifacts(cli.command, &cfg, &a) {
        Ok(d) => d,
        Err(e) => {
            eprintln!("error: writing artifacts: {e}");
            return 1;
        }
    };
    // a closed stdout (say, piped into head) is not an error of the run
    let mut stdout = std::io::stdout().lock();
    if cli.json {
        let _ = writeln!(stdout, "{doc}");
    } else {
        for line in &a.summary {
            let _ = writeln!(stdout, "{line}");
        }
        let _ = writeln!(
            stdout,
            "{}: {}",
            cli.command.name(),
            if a.ok { "ok" } else { "INVARIANT VIOLATION" }
        );
    }
    if a.ok {
        0
    } else {
        1
    }
}
