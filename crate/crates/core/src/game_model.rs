//! Finite zero-sum stochastic games with incomplete information on both sides.
//!
//! Player 1 (maximizer) privately knows a type `k` drawn from `p`, Player 2 a
//! type `l` drawn from `q`. Actions and states are public. A game is
//! *absorbing* when all states but one are absorbing.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const RESERVED_ACTION_1: &str = "i*";
pub const RESERVED_ACTION_2: &str = "j*";
pub const RESERVED_STATE_LOW: &str = "w1*";
pub const RESERVED_STATE_HIGH: &str = "w2*";

const ROW_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct GameSpec {
    pub types_1: Vec<String>,
    pub types_2: Vec<String>,
    pub states: Vec<String>,
    pub actions_1: Vec<String>,
    pub actions_2: Vec<String>,
    /// `rho[ω][i][j][ω']`, flattened.
    rho: Vec<f64>,
    /// `g[k][l][ω][i][j]`, flattened.
    g: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub k: usize,
    pub l: usize,
    pub states: usize,
    pub i: usize,
    pub j: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AbsorbingInfo {
    pub absorbing: Vec<bool>,
    pub omega0: usize,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<String>,
    pub non_absorbing: Vec<String>,
    pub renormalized_rows: usize,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

fn names(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

impl GameSpec {
    /// Builds a spec from dense tables. Probability rows within `1e-12` of
    /// summing to one are renormalized, anything else is rejected.
    pub fn new(
        types_1: Vec<String>,
        types_2: Vec<String>,
        states: Vec<String>,
        actions_1: Vec<String>,
        actions_2: Vec<String>,
        rho: Vec<f64>,
        g: Vec<f64>,
    ) -> Result<Self> {
        let mut spec = GameSpec {
            types_1,
            types_2,
            states,
            actions_1,
            actions_2,
            rho,
            g,
        };
        let d = spec.dims();
        let mut errs = Vec::new();
        if spec.rho.len() != d.states * d.i * d.j * d.states {
            errs.push(format!(
                "rho has {} entries, expected {}",
                spec.rho.len(),
                d.states * d.i * d.j * d.states
            ));
        }
        if spec.g.len() != d.k * d.l * d.states * d.i * d.j {
            errs.push(format!(
                "g has {} entries, expected {}",
                spec.g.len(),
                d.k * d.l * d.states * d.i * d.j
            ));
        }
        if !errs.is_empty() {
            return Err(Error::InvalidSpec(errs));
        }
        let report = spec.check_structure(true);
        if report.is_ok() {
            Ok(spec)
        } else {
            Err(Error::InvalidSpec(report.violations))
        }
    }

    /// Dense constructor from closures, with generated names.
    pub fn from_fn(
        d: Dims,
        rho: impl Fn(usize, usize, usize, usize) -> f64,
        g: impl Fn(usize, usize, usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut r = Vec::with_capacity(d.states * d.i * d.j * d.states);
        for w in 0..d.states {
            for i in 0..d.i {
                for j in 0..d.j {
                    for w2 in 0..d.states {
                        r.push(rho(w, i, j, w2));
                    }
                }
            }
        }
        let mut pay = Vec::with_capacity(d.k * d.l * d.states * d.i * d.j);
        for k in 0..d.k {
            for l in 0..d.l {
                for w in 0..d.states {
                    for i in 0..d.i {
                        for j in 0..d.j {
                            pay.push(g(k, l, w, i, j));
                        }
                    }
                }
            }
        }
        GameSpec::new(
            names("k", d.k),
            names("l", d.l),
            names("w", d.states),
            names("i", d.i),
            names("j", d.j),
            r,
            pay,
        )
    }

    pub fn dims(&self) -> Dims {
        Dims {
            k: self.types_1.len(),
            l: self.types_2.len(),
            states: self.states.len(),
            i: self.actions_1.len(),
            j: self.actions_2.len(),
        }
    }

    #[inline]
    pub fn rho_row(&self, w: usize, i: usize, j: usize) -> &[f64] {
        let d = self.dims();
        let s = ((w * d.i + i) * d.j + j) * d.states;
        &self.rho[s..s + d.states]
    }

    #[inline]
    pub fn rho(&self, w: usize, i: usize, j: usize, w2: usize) -> f64 {
        self.rho_row(w, i, j)[w2]
    }

    #[inline]
    pub fn g(&self, k: usize, l: usize, w: usize, i: usize, j: usize) -> f64 {
        let d = self.dims();
        self.g[(((k * d.l + l) * d.states + w) * d.i + i) * d.j + j]
    }

    /// `‖g‖∞`
    pub fn g_inf(&self) -> f64 {
        self.g.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_augmented(&self) -> bool {
        self.actions_1.iter().any(|a| a == RESERVED_ACTION_1)
            && self.actions_2.iter().any(|a| a == RESERVED_ACTION_2)
            && self.states.iter().any(|a| a == RESERVED_STATE_LOW)
            && self.states.iter().any(|a| a == RESERVED_STATE_HIGH)
    }

    /// Is `w` absorbing: payoff constant in actions for every type pair,
    /// and every action pair loops back with probability exactly one.
    pub fn is_absorbing_state(&self, w: usize) -> bool {
        let d = self.dims();
        for i in 0..d.i {
            for j in 0..d.j {
                if self.rho(w, i, j, w) != 1.0 {
                    return false;
                }
            }
        }
        for k in 0..d.k {
            for l in 0..d.l {
                let c = self.g(k, l, w, 0, 0);
                for i in 0..d.i {
                    for j in 0..d.j {
                        if self.g(k, l, w, i, j) != c {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }

    /// Same game seen from the other side: players swapped and payoffs negated.
    pub fn swap_players(&self) -> GameSpec {
        let d = self.dims();
        let sw = Dims {
            k: d.l,
            l: d.k,
            states: d.states,
            i: d.j,
            j: d.i,
        };
        let mut out = GameSpec::from_fn(sw, |w, j, i, w2| self.rho(w, i, j, w2), |l, k, w, j, i| -self.g(k, l, w, i, j))
            .expect("swapping preserves validity");
        out.types_1 = self.types_2.clone();
        out.types_2 = self.types_1.clone();
        out.states = self.states.clone();
        out.actions_1 = self.actions_2.clone();
        out.actions_2 = self.actions_1.clone();
        out
    }

    fn check_structure(&mut self, renormalize: bool) -> ValidationReport {
        let d = self.dims();
        let mut rep = ValidationReport::default();
        for (what, list) in [
            ("K", &self.types_1),
            ("L", &self.types_2),
            ("Omega", &self.states),
            ("I", &self.actions_1),
            ("J", &self.actions_2),
        ] {
            if list.is_empty() {
                rep.violations.push(format!("{what} is empty"));
            }
            let mut seen = std::collections::HashSet::new();
            for n in list {
                if !seen.insert(n) {
                    rep.violations.push(format!("{what} has duplicate name {n:?}"));
                }
            }
        }
        if !rep.violations.is_empty() {
            return rep;
        }
        for w in 0..d.states {
            for i in 0..d.i {
                for j in 0..d.j {
                    let s = ((w * d.i + i) * d.j + j) * d.states;
                    let row = &mut self.rho[s..s + d.states];
                    let where_ = format!("rho[{}][{}][{}]", self.states[w], self.actions_1[i], self.actions_2[j]);
                    if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                        rep.violations.push(format!("{where_} has a negative or non-finite entry"));
                        continue;
                    }
                    let sum: f64 = row.iter().sum();
                    if (sum - 1.0).abs() > ROW_TOL {
                        rep.violations.push(format!("{where_} sums to {sum}"));
                    } else if sum != 1.0 && renormalize {
                        row.iter_mut().for_each(|p| *p /= sum);
                        rep.renormalized_rows += 1;
                    }
                }
            }
        }
        if self.g.iter().any(|v| !v.is_finite()) {
            rep.violations.push("g has a non-finite entry".into());
        }
        rep
    }

    // ----- document format -------------------------------------------------

    pub fn from_json_str(text: &str) -> Result<Self> {
        let doc: SpecDoc = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let spec = doc.into_spec()?;
        let rep = validate_game(&spec);
        if rep.is_ok() {
            Ok(spec)
        } else {
            Err(Error::InvalidSpec(rep.violations))
        }
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&SpecDoc::from_spec(self)).expect("spec serializes")
    }
}

/// Structural checks plus the absorbing-game invariant.
pub fn validate_game(spec: &GameSpec) -> ValidationReport {
    let mut copy = spec.clone();
    let mut rep = copy.check_structure(false);
    if rep.is_ok() {
        let non: Vec<usize> = (0..spec.dims().states).filter(|&w| !spec.is_absorbing_state(w)).collect();
        rep.non_absorbing = non.iter().map(|&w| spec.states[w].clone()).collect();
        if non.len() != 1 {
            rep.violations
                .push(format!("expected exactly one non-absorbing state, found {}", non.len()));
        }
    }
    rep
}

pub fn classify_states(spec: &GameSpec) -> Result<AbsorbingInfo> {
    let absorbing: Vec<bool> = (0..spec.dims().states).map(|w| spec.is_absorbing_state(w)).collect();
    let non: Vec<usize> = absorbing.iter().enumerate().filter(|(_, a)| !**a).map(|(w, _)| w).collect();
    if non.len() != 1 {
        return Err(Error::NotAbsorbing(non.len()));
    }
    Ok(AbsorbingInfo { absorbing, omega0: non[0] })
}

/// Adds the safety actions `i*`, `j*` and the absorbing states `w1*`
/// (payoff `-‖g‖∞`) and `w2*` (payoff `+‖g‖∞`).
///
/// From a non-absorbing state, `i*` against any ordinary action of Player 2
/// absorbs in `w1*`, `j*` against any ordinary action of Player 1 absorbs in
/// `w2*`, and the pair `(i*, j*)` absorbs in either with probability one half.
/// Stage payoffs of the new cells match their destination. Both new actions
/// are weakly dominated, so values are unchanged.
pub fn augment_safety(spec: &GameSpec) -> Result<GameSpec> {
    let clash = spec.actions_1.iter().any(|a| a == RESERVED_ACTION_1)
        || spec.actions_2.iter().any(|a| a == RESERVED_ACTION_2)
        || spec.states.iter().any(|s| s == RESERVED_STATE_LOW || s == RESERVED_STATE_HIGH);
    if clash {
        return Err(Error::InvalidSpec(vec![
            "spec already uses a reserved name (i*, j*, w1*, w2*)".into()
        ]));
    }
    let d = spec.dims();
    let gm = spec.g_inf();
    let absorbing: Vec<bool> = (0..d.states).map(|w| spec.is_absorbing_state(w)).collect();
    let (lo, hi) = (d.states, d.states + 1);
    let nd = Dims {
        k: d.k,
        l: d.l,
        states: d.states + 2,
        i: d.i + 1,
        j: d.j + 1,
    };
    let (is, js) = (d.i, d.j);
    let rho = |w: usize, i: usize, j: usize, w2: usize| -> f64 {
        if w >= d.states {
            return if w2 == w { 1.0 } else { 0.0 };
        }
        if i < is && j < js {
            return if w2 < d.states { spec.rho(w, i, j, w2) } else { 0.0 };
        }
        if absorbing[w] {
            return if w2 == w { 1.0 } else { 0.0 };
        }
        match (i == is, j == js) {
            (true, false) => (w2 == lo) as u8 as f64,
            (false, true) => (w2 == hi) as u8 as f64,
            _ => {
                if w2 == lo || w2 == hi {
                    0.5
                } else {
                    0.0
                }
            }
        }
    };
    let g = |k: usize, l: usize, w: usize, i: usize, j: usize| -> f64 {
        if w == lo {
            return -gm;
        }
        if w == hi {
            return gm;
        }
        if i < is && j < js {
            return spec.g(k, l, w, i, j);
        }
        if absorbing[w] {
            return spec.g(k, l, w, 0, 0);
        }
        match (i == is, j == js) {
            (true, false) => -gm,
            (false, true) => gm,
            _ => 0.0,
        }
    };
    let mut out = GameSpec::from_fn(nd, rho, g)?;
    out.types_1 = spec.types_1.clone();
    out.types_2 = spec.types_2.clone();
    out.states = spec.states.clone();
    out.states.push(RESERVED_STATE_LOW.into());
    out.states.push(RESERVED_STATE_HIGH.into());
    out.actions_1 = spec.actions_1.clone();
    out.actions_1.push(RESERVED_ACTION_1.into());
    out.actions_2 = spec.actions_2.clone();
    out.actions_2.push(RESERVED_ACTION_2.into());
    Ok(out)
}

pub fn load_game_spec(path: &Path) -> Result<GameSpec> {
    let text = std::fs::read_to_string(path)?;
    GameSpec::from_json_str(&text)
}

pub fn save_game_spec(spec: &GameSpec, path: &Path) -> Result<()> {
    std::fs::write(path, spec.to_json_string())?;
    Ok(())
}

// ----- serialized form -------------------------------------------------------

/// A number given either as a JSON number or as a decimal / `a/b` string.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum Num {
    F(f64),
    S(String),
}

impl Num {
    fn value(&self, at: &str) -> Result<f64> {
        match self {
            Num::F(v) => Ok(*v),
            Num::S(s) => parse_number(s).ok_or_else(|| Error::Parse(format!("{at}: bad number {s:?}"))),
        }
    }
}

/// Parses a decimal or a rational `a/b`.
pub fn parse_number(s: &str) -> Option<f64> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once('/') {
        let a: f64 = a.trim().parse().ok()?;
        let b: f64 = b.trim().parse().ok()?;
        if b == 0.0 {
            return None;
        }
        Some(a / b)
    } else {
        s.parse().ok()
    }
}

type Nest<T> = BTreeMap<String, T>;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecDoc {
    #[serde(rename = "K")]
    k: Vec<String>,
    #[serde(rename = "L")]
    l: Vec<String>,
    #[serde(rename = "Omega")]
    omega: Vec<String>,
    #[serde(rename = "I")]
    i: Vec<String>,
    #[serde(rename = "J")]
    j: Vec<String>,
    /// state -> action 1 -> action 2 -> next state -> probability.
    /// Omitted rows loop on the current state.
    rho: Nest<Nest<Nest<Nest<Num>>>>,
    /// type 1 -> type 2 -> state -> action 1 -> action 2 -> payoff.
    /// Omitted entries are zero.
    g: Nest<Nest<Nest<Nest<Nest<Num>>>>>,
}

fn index_of(list: &[String], name: &str, field: &str) -> Result<usize> {
    list.iter()
        .position(|n| n == name)
        .ok_or_else(|| Error::Parse(format!("{field}: unknown name {name:?}")))
}

impl SpecDoc {
    fn into_spec(self) -> Result<GameSpec> {
        let d = Dims {
            k: self.k.len(),
            l: self.l.len(),
            states: self.omega.len(),
            i: self.i.len(),
            j: self.j.len(),
        };
        let mut rho = vec![0.0; d.states * d.i * d.j * d.states];
        let mut given = vec![false; d.states * d.i * d.j];
        for (wn, by_i) in &self.rho {
            let w = index_of(&self.omega, wn, "rho")?;
            for (inn, by_j) in by_i {
                let i = index_of(&self.i, inn, &format!("rho.{wn}"))?;
                for (jn, row) in by_j {
                    let j = index_of(&self.j, jn, &format!("rho.{wn}.{inn}"))?;
                    let cell = (w * d.i + i) * d.j + j;
                    given[cell] = true;
                    for (w2n, p) in row {
                        let at = format!("rho.{wn}.{inn}.{jn}.{w2n}");
                        let w2 = index_of(&self.omega, w2n, &at)?;
                        rho[cell * d.states + w2] = p.value(&at)?;
                    }
                }
            }
        }
        for (cell, g) in given.iter().enumerate() {
            if !g {
                let w = cell / (d.i * d.j);
                rho[cell * d.states + w] = 1.0;
            }
        }
        let mut g = vec![0.0; d.k * d.l * d.states * d.i * d.j];
        for (kn, by_l) in &self.g {
            let k = index_of(&self.k, kn, "g")?;
            for (ln, by_w) in by_l {
                let l = index_of(&self.l, ln, &format!("g.{kn}"))?;
                for (wn, by_i) in by_w {
                    let w = index_of(&self.omega, wn, &format!("g.{kn}.{ln}"))?;
                    for (inn, by_j) in by_i {
                        let i = index_of(&self.i, inn, &format!("g.{kn}.{ln}.{wn}"))?;
                        for (jn, v) in by_j {
                            let at = format!("g.{kn}.{ln}.{wn}.{inn}.{jn}");
                            let j = index_of(&self.j, jn, &at)?;
                            g[(((k * d.l + l) * d.states + w) * d.i + i) * d.j + j] = v.value(&at)?;
                        }
                    }
                }
            }
        }
        GameSpec::new(self.k, self.l, self.omega, self.i, self.j, rho, g)
    }

    fn from_spec(s: &GameSpec) -> Self {
        let d = s.dims();
        let mut rho = Nest::new();
        for w in 0..d.states {
            let mut by_i = Nest::new();
            for i in 0..d.i {
                let mut by_j = Nest::new();
                for j in 0..d.j {
                    let row: Nest<Num> = (0..d.states)
                        .filter(|&w2| s.rho(w, i, j, w2) != 0.0)
                        .map(|w2| (s.states[w2].clone(), Num::F(s.rho(w, i, j, w2))))
                        .collect();
                    by_j.insert(s.actions_2[j].clone(), row);
                }
                by_i.insert(s.actions_1[i].clone(), by_j);
            }
            rho.insert(s.states[w].clone(), by_i);
        }
        let mut g = Nest::new();
        for k in 0..d.k {
            let mut by_l = Nest::new();
            for l in 0..d.l {
                let mut by_w = Nest::new();
                for w in 0..d.states {
                    let mut by_i = Nest::new();
                    for i in 0..d.i {
                        let by_j: Nest<Num> = (0..d.j).map(|j| (s.actions_2[j].clone(), Num::F(s.g(k, l, w, i, j)))).collect();
                        by_i.insert(s.actions_1[i].clone(), by_j);
                    }
                    by_w.insert(s.states[w].clone(), by_i);
                }
                by_l.insert(s.types_2[l].clone(), by_w);
            }
            g.insert(s.types_1[k].clone(), by_l);
        }
        SpecDoc {
            k: s.types_1.clone(),
            l: s.types_2.clone(),
            omega: s.states.clone(),
            i: s.actions_1.clone(),
            j: s.actions_2.clone(),
            rho,
            g,
        }
    }
}

/// Ready-made games used by tests, examples and the CLI.
pub mod catalog {
    use super::*;

    /// The Big Match. Row `T` absorbs (payoff 1 against `L`, 0 against `R`),
    /// row `B` continues (payoff 0 against `L`, 1 against `R`).
    pub fn big_match() -> GameSpec {
        // states: 0 play, 1 absorbed with payoff 1, 2 absorbed with payoff 0
        let d = Dims {
            k: 1,
            l: 1,
            states: 3,
            i: 2,
            j: 2,
        };
        let mut s = GameSpec::from_fn(
            d,
            |w, i, j, w2| {
                if w != 0 || i == 1 {
                    (w2 == w) as u8 as f64
                } else if j == 0 {
                    (w2 == 1) as u8 as f64
                } else {
                    (w2 == 2) as u8 as f64
                }
            },
            |_, _, w, i, j| match w {
                1 => 1.0,
                2 => 0.0,
                _ => {
                    if i == 0 {
                        (j == 0) as u8 as f64
                    } else {
                        (j == 1) as u8 as f64
                    }
                }
            },
        )
        .expect("big match is valid");
        s.types_1 = vec!["k".into()];
        s.types_2 = vec!["l".into()];
        s.states = vec!["play".into(), "absorbed_1".into(), "absorbed_0".into()];
        s.actions_1 = vec!["T".into(), "B".into()];
        s.actions_2 = vec!["L".into(), "R".into()];
        s
    }

    fn round2(x: f64) -> f64 {
        (x * 100.0).round() / 100.0
    }

    /// Random absorbing game: state 0 is the only non-absorbing state, the
    /// other `n_absorbing` states carry type-dependent constant payoffs.
    /// Each cell of state 0 stays with a random probability and otherwise
    /// moves to one random absorbing state. Payoffs lie on a 0.01 lattice in [-1, 1].
    pub fn random_absorbing<R: Rng>(rng: &mut R, k: usize, l: usize, i: usize, j: usize, n_absorbing: usize) -> GameSpec {
        assert!(n_absorbing >= 1);
        let states = n_absorbing + 1;
        let mut stay = vec![0.0; i * j];
        let mut target = vec![1usize; i * j];
        for c in 0..i * j {
            stay[c] = if rng.gen_bool(0.25) { 1.0 } else { round2(rng.gen_range(0.0..1.0)) };
            target[c] = rng.gen_range(1..states);
        }
        let mut pay = vec![0.0; k * l * states * i * j];
        let d = Dims { k, l, states, i, j };
        for kk in 0..k {
            for ll in 0..l {
                for w in 0..states {
                    let c = round2(rng.gen_range(-1.0..1.0));
                    for a in 0..i {
                        for b in 0..j {
                            let idx = (((kk * l + ll) * states + w) * i + a) * j + b;
                            pay[idx] = if w == 0 { round2(rng.gen_range(-1.0..1.0)) } else { c };
                        }
                    }
                }
            }
        }
        GameSpec::from_fn(
            d,
            |w, a, b, w2| {
                if w != 0 {
                    return (w2 == w) as u8 as f64;
                }
                let c = a * j + b;
                if w2 == 0 {
                    stay[c]
                } else if w2 == target[c] {
                    1.0 - stay[c]
                } else {
                    0.0
                }
            },
            |kk, ll, w, a, b| pay[(((kk * l + ll) * states + w) * i + a) * j + b],
        )
        .expect("random absorbing game is valid")
    }

    /// One-sided version: `|L| = 1`.
    pub fn random_one_sided<R: Rng>(rng: &mut R, k: usize, i: usize, j: usize, n_absorbing: usize) -> GameSpec {
        random_absorbing(rng, k, 1, i, j, n_absorbing)
    }
}

#[cfg(test)]
mod tests {
    use super::catalog::*;
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn big_match_classification() {
        let bm = big_match();
        let info = classify_states(&bm).unwrap();
        assert_eq!(info.omega0, 0);
        assert_eq!(info.absorbing, vec![false, true, true]);
        assert!(validate_game(&bm).is_ok());
    }

    #[test]
    fn rejects_bad_row() {
        let txt = r#"{"K":["k"],"L":["l"],"Omega":["a","b"],"I":["i"],"J":["j"],
            "rho":{"a":{"i":{"j":{"a":0.5,"b":0.4}}}},"g":{}}"#;
        let e = GameSpec::from_json_str(txt).unwrap_err().to_string();
        assert!(e.contains("rho[a][i][j]"), "{e}");
    }

    #[test]
    fn missing_field_is_named() {
        let txt = r#"{"K":["k"],"L":["l"],"Omega":["a"],"I":["i"],"J":["j"],"g":{}}"#;
        let e = GameSpec::from_json_str(txt).unwrap_err().to_string();
        assert!(e.contains("rho"), "{e}");
    }

    #[test]
    fn near_stochastic_rows_are_renormalized() {
        let txt = r#"{"K":["k"],"L":["l"],"Omega":["a","b"],"I":["i"],"J":["j"],
            "rho":{"a":{"i":{"j":{"a":"1/3","b":0.6666666666666667}}}},
            "g":{"k":{"l":{"a":{"i":{"j":"0.5"}},"b":{"i":{"j":2}}}}}}"#;
        let s = GameSpec::from_json_str(txt).unwrap();
        let row = s.rho_row(0, 0, 0);
        assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-15);
        assert_eq!(s.g(0, 0, 0, 0, 0), 0.5);
    }

    #[test]
    fn not_absorbing_is_reported() {
        let d = Dims {
            k: 1,
            l: 1,
            states: 2,
            i: 2,
            j: 1,
        };
        let s = GameSpec::from_fn(
            d,
            |_, i, _, w2| if i == 0 { 0.5 } else { (w2 == 0) as u8 as f64 },
            |_, _, _, i, _| i as f64,
        )
        .unwrap();
        assert!(matches!(classify_states(&s), Err(Error::NotAbsorbing(2))));
        assert!(!validate_game(&s).is_ok());
    }

    #[test]
    fn augmentation_shape() {
        let bm = big_match();
        let a = augment_safety(&bm).unwrap();
        assert!(a.is_augmented());
        let info = classify_states(&a).unwrap();
        assert_eq!(info.omega0, 0);
        let d = a.dims();
        assert_eq!((d.i, d.j, d.states), (3, 3, 5));
        let (lo, hi) = (3, 4);
        assert_eq!(a.rho(0, 2, 0, lo), 1.0);
        assert_eq!(a.rho(0, 1, 2, hi), 1.0);
        assert_eq!(a.rho(0, 2, 2, lo), 0.5);
        assert_eq!(a.g(0, 0, lo, 1, 1), -1.0);
        assert_eq!(a.g(0, 0, hi, 0, 2), 1.0);
        // absorbing states stay absorbing under the new actions
        assert_eq!(a.rho(1, 2, 2, 1), 1.0);
        assert!(augment_safety(&a).is_err());
    }

    #[test]
    fn swap_is_involution() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = random_absorbing(&mut rng, 2, 3, 2, 3, 2);
        let back = s.swap_players().swap_players();
        assert_eq!(s, back);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn json_round_trip(seed in any::<u64>(), k in 1usize..3, l in 1usize..3, n in 1usize..3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = random_absorbing(&mut rng, k, l, 2, 2, n);
            let back = GameSpec::from_json_str(&s.to_json_string()).unwrap();
            prop_assert_eq!(&s, &back);
            prop_assert!(validate_game(&back).is_ok());
        }

        #[test]
        fn rational_strings_round_trip(a in 1u32..50, b in 1u32..50) {
            let v = parse_number(&format!("{a}/{b}")).unwrap();
            let txt = format!(r#"{{"K":["k"],"L":["l"],"Omega":["a","b"],"I":["i"],"J":["j"],
                "rho":{{"a":{{"i":{{"j":{{"a":0.5,"b":0.5}}}}}}}},"g":{{"k":{{"l":{{"a":{{"i":{{"j":"{a}/{b}"}}}}}}}}}}}}"#);
            let s = GameSpec::from_json_str(&txt).unwrap();
            prop_assert_eq!(s.g(0, 0, 0, 0, 0), v);
            let back = GameSpec::from_json_str(&s.to_json_string()).unwrap();
            prop_assert_eq!(s, back);
        }
    }
}
