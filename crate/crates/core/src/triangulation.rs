//! Freudenthal (Kuhn) triangulation of the belief simplex at resolution `N`.
//!
//! Vertices are the beliefs with `N·p` integral. Through the cumulative map
//! `y_j = N Σ_{k≥j} p(k)` the simplex becomes `{N ≥ y_1 ≥ … ≥ y_d ≥ 0}`, which
//! the Kuhn subdivision of the unit cube lattice cuts into `N^d` congruent
//! cells. Locating a point sorts the fractional parts of `y`; ties go to
//! the lower coordinate index.

use std::collections::HashMap;

use rand::Rng;
use serde::Serialize;

use crate::belief_kernel::{l2, sample_simplex};
use crate::error::{precondition, Result};

/// Coordinates in `[-CLAMP_TOL, 0)` are treated as zero.
pub const CLAMP_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct Triangulation {
    types: usize,
    n: usize,
    vertices: Vec<Vec<f64>>,
    index: HashMap<Vec<u32>, usize>,
    stepsize: f64,
    n_cells: usize,
}

/// The cell containing a point, with barycentric coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub vertices: Vec<usize>,
    pub coords: Vec<f64>,
}

fn binom(n: usize, k: usize) -> usize {
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

impl Triangulation {
    pub fn new(types: usize, n: usize) -> Result<Self> {
        if types == 0 || n == 0 {
            return Err(precondition("triangulation needs |K| >= 1 and N >= 1"));
        }
        let mut lattice = Vec::new();
        let mut cur = vec![0u32; types];
        compositions(n as u32, 0, &mut cur, &mut lattice);
        let vertices: Vec<Vec<f64>> = lattice.iter().map(|v| v.iter().map(|&c| c as f64 / n as f64).collect()).collect();
        let index = lattice.into_iter().enumerate().map(|(i, v)| (v, i)).collect();
        let mut t = Triangulation {
            types,
            n,
            vertices,
            index,
            stepsize: 0.0,
            n_cells: 0,
        };
        let cells = t.cells();
        t.n_cells = cells.len();
        let mut s: f64 = 0.0;
        for c in &cells {
            for a in 0..c.len() {
                for b in a + 1..c.len() {
                    s = s.max(l2(&t.vertices[c[a]], &t.vertices[c[b]]));
                }
            }
        }
        t.stepsize = s;
        Ok(t)
    }

    pub fn types(&self) -> usize {
        self.types
    }

    pub fn resolution(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.types - 1
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn vertex(&self, v: usize) -> &[f64] {
        &self.vertices[v]
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    /// Longest edge of any cell.
    pub fn stepsize(&self) -> f64 {
        self.stepsize
    }

    /// Index of the vertex equal to `p`, if `p` is a vertex.
    pub fn vertex_index(&self, p: &[f64]) -> Option<usize> {
        let key: Vec<u32> = p
            .iter()
            .map(|v| {
                let c = (v * self.n as f64).round();
                (c.max(0.0)) as u32
            })
            .collect();
        let &idx = self.index.get(&key)?;
        let close = self.vertices[idx].iter().zip(p).all(|(a, b)| (a - b).abs() <= 1e-12);
        close.then_some(idx)
    }

    fn clean(&self, p: &[f64]) -> Result<Vec<f64>> {
        if p.len() != self.types {
            return Err(precondition(format!(
                "belief has {} entries, triangulation has {} types",
                p.len(),
                self.types
            )));
        }
        if p.iter().any(|v| !v.is_finite() || *v < -CLAMP_TOL) {
            return Err(precondition(format!("belief outside the simplex: {p:?}")));
        }
        let mut out: Vec<f64> = p.iter().map(|v| v.max(0.0)).collect();
        let s: f64 = out.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(precondition(format!("belief sums to {s}")));
        }
        if s != 1.0 {
            out.iter_mut().for_each(|v| *v /= s);
        }
        Ok(out)
    }

    fn lattice_to_index(&self, y: &[i64]) -> usize {
        let d = self.dim();
        let n = self.n as i64;
        let mut key = Vec::with_capacity(self.types);
        key.push((n - y[0]) as u32);
        for j in 0..d {
            let next = if j + 1 < d { y[j + 1] } else { 0 };
            key.push((y[j] - next) as u32);
        }
        self.index[&key]
    }

    pub fn locate(&self, p: &[f64]) -> Result<Cell> {
        let p = self.clean(p)?;
        let d = self.dim();
        if d == 0 {
            return Ok(Cell {
                vertices: vec![0],
                coords: vec![1.0],
            });
        }
        let nf = self.n as f64;
        // y_j for j = 1..d, stored at j - 1
        let mut y = vec![0.0; d];
        let mut acc = 0.0;
        for j in (1..=d).rev() {
            acc += p[j];
            y[j - 1] = (nf * acc).clamp(0.0, nf);
        }
        let base: Vec<i64> = y.iter().map(|v| (v.floor() as i64).min(self.n as i64 - 1)).collect();
        let frac: Vec<f64> = y.iter().zip(&base).map(|(v, b)| v - *b as f64).collect();
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| frac[b].partial_cmp(&frac[a]).unwrap());
        let mut vertices = Vec::with_capacity(d + 1);
        let mut coords = Vec::with_capacity(d + 1);
        let mut cur = base.clone();
        vertices.push(self.lattice_to_index(&cur));
        coords.push(1.0 - frac[order[0]]);
        for r in 0..d {
            cur[order[r]] += 1;
            vertices.push(self.lattice_to_index(&cur));
            let next = if r + 1 < d { frac[order[r + 1]] } else { 0.0 };
            coords.push(frac[order[r]] - next);
        }
        Ok(Cell { vertices, coords })
    }

    /// The splitting `S[·|p]`: vertices with positive weight.
    pub fn split(&self, p: &[f64]) -> Result<Vec<(usize, f64)>> {
        let cell = self.locate(p)?;
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(cell.vertices.len());
        for (v, a) in cell.vertices.into_iter().zip(cell.coords) {
            if a > 0.0 {
                out.push((v, a));
            }
        }
        Ok(out)
    }

    /// Every cell, as vertex index lists.
    pub fn cells(&self) -> Vec<Vec<usize>> {
        let d = self.dim();
        if d == 0 {
            return vec![vec![0]];
        }
        let n = self.n as i64;
        let mut out = Vec::new();
        let mut perms = Vec::new();
        permutations(&mut (0..d).collect::<Vec<_>>(), 0, &mut perms);
        let total = (self.n as u64).pow(d as u32);
        for code in 0..total {
            let mut base = vec![0i64; d];
            let mut c = code;
            for b in base.iter_mut() {
                *b = (c % self.n as u64) as i64;
                c /= self.n as u64;
            }
            'perm: for perm in &perms {
                let mut cur = base.clone();
                let mut ids = Vec::with_capacity(d + 1);
                for r in 0..=d {
                    if r > 0 {
                        cur[perm[r - 1]] += 1;
                    }
                    let ordered = cur[0] <= n && cur.windows(2).all(|w| w[0] >= w[1]) && cur[d - 1] >= 0;
                    if !ordered {
                        continue 'perm;
                    }
                    ids.push(self.lattice_to_index(&cur));
                }
                out.push(ids);
            }
        }
        out
    }

    /// `(√2 d)^d / (d V)` with `V` the volume of the whole simplex.
    pub fn loose_constant(&self) -> f64 {
        let d = self.dim();
        if d == 0 {
            return 0.0;
        }
        let fact: f64 = (1..=d).map(|i| i as f64).product();
        let vol = ((d + 1) as f64).sqrt() / fact;
        (2f64.sqrt() * d as f64).powi(d as i32) / (d as f64 * vol)
    }

    /// Upper bound on the stepsize of this construction.
    pub fn stepsize_bound(&self) -> f64 {
        2f64.sqrt() * self.dim() as f64 / self.n as f64
    }

    pub fn expected_counts(&self) -> (usize, usize) {
        let d = self.dim();
        (binom(self.n + d, d), self.n.pow(d as u32))
    }
}

fn compositions(left: u32, pos: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if pos + 1 == cur.len() {
        cur[pos] = left;
        out.push(cur.clone());
        return;
    }
    for v in (0..=left).rev() {
        cur[pos] = v;
        compositions(left - v, pos + 1, cur, out);
    }
}

fn permutations(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k == items.len() {
        out.push(items.clone());
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permutations(items, k + 1, out);
        items.swap(k, i);
    }
}

/// Empirical `(α, C)` certificate: `α` is the measured stepsize and `C` the
/// smallest constant with `1 - S[p'|p] ≤ (C/s)‖p' - p‖₂` over all sampled
/// `p` and all vertices `p'`.
#[derive(Debug, Clone, Serialize)]
pub struct AlphaCCertificate {
    pub alpha: f64,
    pub c: f64,
    pub samples: usize,
    pub worst_point: Vec<f64>,
    pub worst_vertex: usize,
}

pub fn certify_alpha_c<R: Rng>(tri: &Triangulation, samples: usize, rng: &mut R) -> Result<AlphaCCertificate> {
    let s = tri.stepsize();
    let mut cert = AlphaCCertificate {
        alpha: s,
        c: 0.0,
        samples,
        worst_point: Vec::new(),
        worst_vertex: 0,
    };
    if tri.dim() == 0 {
        return Ok(cert);
    }
    let mut weight = vec![0.0; tri.n_vertices()];
    for _ in 0..samples {
        let p = sample_simplex(rng, tri.types());
        let split = tri.split(&p)?;
        for &(v, a) in &split {
            weight[v] = a;
        }
        for (v, pv) in tri.vertices().iter().enumerate() {
            let dist = l2(pv, &p);
            if dist > 0.0 {
                let need = (1.0 - weight[v]) * s / dist;
                if need > cert.c {
                    cert.c = need;
                    cert.worst_point = p.clone();
                    cert.worst_vertex = v;
                }
            }
        }
        for &(v, _) in &split {
            weight[v] = 0.0;
        }
    }
    Ok(cert)
}

/// Sample points where the certificate fails for a given `C`.
pub fn certificate_violations<R: Rng>(tri: &Triangulation, c: f64, samples: usize, rng: &mut R) -> Result<Vec<(Vec<f64>, usize)>> {
    let s = tri.stepsize();
    let mut bad = Vec::new();
    for _ in 0..samples {
        let p = sample_simplex(rng, tri.types());
        let split = tri.split(&p)?;
        for (v, pv) in tri.vertices().iter().enumerate() {
            let a = split.iter().find(|(u, _)| *u == v).map_or(0.0, |x| x.1);
            if 1.0 - a > c / s * l2(pv, &p) + 1e-12 {
                bad.push((p.clone(), v));
            }
        }
    }
    Ok(bad)
}

#[derive(Debug, Clone, Serialize)]
pub struct TriangulationStats {
    pub types: usize,
    pub resolution: usize,
    pub n_vertices: usize,
    pub n_cells: usize,
    pub stepsize: f64,
    pub stepsize_bound: f64,
    pub c_cert: f64,
    pub c_loose: f64,
    pub samples: usize,
}

pub fn triangulation_stats<R: Rng>(tri: &Triangulation, samples: usize, rng: &mut R) -> Result<TriangulationStats> {
    let cert = certify_alpha_c(tri, samples, rng)?;
    Ok(TriangulationStats {
        types: tri.types(),
        resolution: tri.resolution(),
        n_vertices: tri.n_vertices(),
        n_cells: tri.n_cells(),
        stepsize: tri.stepsize(),
        stepsize_bound: tri.stepsize_bound(),
        c_cert: cert.c,
        c_loose: tri.loose_constant(),
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief_kernel::linf;
    use nalgebra::DMatrix;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn volume(pts: &[&[f64]]) -> f64 {
        // sqrt(det Gram) / d!
        let d = pts.len() - 1;
        let n = pts[0].len();
        let m = DMatrix::from_fn(n, d, |r, c| pts[c + 1][r] - pts[0][r]);
        let g = m.transpose() * &m;
        let fact: f64 = (1..=d).map(|i| i as f64).product();
        g.determinant().max(0.0).sqrt() / fact
    }

    #[test]
    fn segment_example() {
        let t = Triangulation::new(2, 2).unwrap();
        let c = t.locate(&[0.25, 0.75]).unwrap();
        let mut got: Vec<(Vec<f64>, f64)> = c.vertices.iter().zip(&c.coords).map(|(v, a)| (t.vertex(*v).to_vec(), *a)).collect();
        got.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        assert_eq!(got, vec![(vec![0.0, 1.0], 0.5), (vec![0.5, 0.5], 0.5)]);
    }

    #[test]
    fn counts_and_equal_volumes() {
        for (k, n) in [(2, 1), (2, 5), (3, 3), (3, 4), (4, 2), (4, 3)] {
            let t = Triangulation::new(k, n).unwrap();
            let (nv, nc) = t.expected_counts();
            assert_eq!(t.n_vertices(), nv);
            assert_eq!(t.n_cells(), nc, "k={k} n={n}");
            let cells = t.cells();
            let vols: Vec<f64> = cells
                .iter()
                .map(|c| volume(&c.iter().map(|&v| t.vertex(v)).collect::<Vec<_>>()))
                .collect();
            let total = ((k) as f64).sqrt() / (1..k).map(|i| i as f64).product::<f64>();
            let sum: f64 = vols.iter().sum();
            assert!((sum - total).abs() < 1e-10, "volumes cover the simplex");
            for v in &vols {
                assert!((v - vols[0]).abs() < 1e-12);
            }
            assert!(t.stepsize() <= t.stepsize_bound() + 1e-15);
        }
    }

    #[test]
    fn vertices_split_to_themselves() {
        let t = Triangulation::new(3, 4).unwrap();
        for (v, p) in t.vertices().iter().enumerate() {
            let s = t.split(p).unwrap();
            assert_eq!(s, vec![(v, 1.0)]);
            assert_eq!(t.vertex_index(p), Some(v));
        }
    }

    #[test]
    fn clamps_tiny_negatives() {
        let t = Triangulation::new(3, 2).unwrap();
        assert!(t.locate(&[-5e-11, 0.5, 0.5 + 5e-11]).is_ok());
        assert!(t.locate(&[-1e-6, 0.5, 0.5 + 1e-6]).is_err());
    }

    #[test]
    fn ties_on_shared_faces() {
        // the midpoint of an interior edge is shared by two cells; locate is deterministic
        let t = Triangulation::new(3, 2).unwrap();
        let p = [0.25, 0.5, 0.25];
        let a = t.locate(&p).unwrap();
        let b = t.locate(&p).unwrap();
        assert_eq!(a, b);
        let rec: Vec<f64> = (0..3)
            .map(|k| a.vertices.iter().zip(&a.coords).map(|(v, w)| w * t.vertex(*v)[k]).sum())
            .collect();
        assert!(linf(&rec, &p) < 1e-15);
    }

    #[test]
    fn single_type_is_trivial() {
        let t = Triangulation::new(1, 7).unwrap();
        assert_eq!(t.n_vertices(), 1);
        assert_eq!(t.split(&[1.0]).unwrap(), vec![(0, 1.0)]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(certify_alpha_c(&t, 10, &mut rng).unwrap().c, 0.0);
    }

    #[test]
    fn segment_certificate_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in [1, 2, 3, 8] {
            let t = Triangulation::new(2, n).unwrap();
            let c = certify_alpha_c(&t, 2000, &mut rng).unwrap();
            assert!(c.c <= 1.0 + 1e-12 && c.c > 0.99, "{}", c.c);
            assert!((t.loose_constant() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn certificate_has_no_violations() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let t = Triangulation::new(3, 3).unwrap();
        let c = certify_alpha_c(&t, 3000, &mut rng).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        assert!(certificate_violations(&t, c.c, 3000, &mut rng).unwrap().is_empty());
        assert!(c.c <= t.loose_constant());
    }

    proptest! {
        #[test]
        fn split_conserves_mean(seed in any::<u64>(), k in 2usize..5, n in 1usize..9) {
            let t = Triangulation::new(k, n).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = sample_simplex(&mut rng, k);
            let s = t.split(&p).unwrap();
            prop_assert!(s.len() <= k);
            let total: f64 = s.iter().map(|x| x.1).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            let mut mean = vec![0.0; k];
            for (v, a) in &s { for j in 0..k { mean[j] += a * t.vertex(*v)[j]; } }
            prop_assert!(linf(&mean, &p) < 1e-12);
        }
    }
}
