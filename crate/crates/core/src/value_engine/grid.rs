use crate::belief_kernel::MixedAction;

/// Barycentric grid of resolution `m` on `Δ(actions)^types`.
#[derive(Debug, Clone)]
pub struct ActionGrid {
    pub m: usize,
    pub types: usize,
    pub actions: usize,
    points: Vec<MixedAction>,
}

fn simplex_points(m: usize, n: usize) -> Vec<Vec<f64>> {
    fn rec(left: usize, pos: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if pos + 1 == cur.len() {
            cur[pos] = left;
            out.push(cur.clone());
            return;
        }
        for v in (0..=left).rev() {
            cur[pos] = v;
            rec(left - v, pos + 1, cur, out);
        }
    }
    let mut raw = Vec::new();
    rec(m, 0, &mut vec![0; n], &mut raw);
    raw.into_iter()
        .map(|c| c.into_iter().map(|v| v as f64 / m as f64).collect())
        .collect()
}

impl ActionGrid {
    pub fn new(m: usize, types: usize, actions: usize) -> Self {
        assert!(m >= 1 && types >= 1 && actions >= 1);
        let base = simplex_points(m, actions);
        let mut points = Vec::new();
        let mut idx = vec![0usize; types];
        loop {
            let data: Vec<f64> = idx.iter().flat_map(|&r| base[r].iter().copied()).collect();
            points.push(MixedAction::from_raw(types, actions, data));
            let mut t = types;
            loop {
                if t == 0 {
                    return ActionGrid { m, types, actions, points };
                }
                t -= 1;
                idx[t] += 1;
                if idx[t] < base.len() {
                    break;
                }
                idx[t] = 0;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &MixedAction {
        &self.points[i]
    }

    pub fn points(&self) -> &[MixedAction] {
        &self.points
    }

    /// `C(m + |I| - 1, |I| - 1)^|K|`
    pub fn expected_len(m: usize, types: usize, actions: usize) -> usize {
        let per: usize = (0..actions - 1).fold(1, |acc, i| acc * (m + i + 1) / (i + 1));
        per.pow(types as u32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_and_pure_actions() {
        for (m, k, i) in [(1, 1, 2), (8, 2, 2), (4, 2, 3), (2, 3, 2)] {
            let g = ActionGrid::new(m, k, i);
            assert_eq!(g.len(), ActionGrid::expected_len(m, k, i));
            for a in 0..i {
                let pure = MixedAction::pure(k, i, a);
                assert!(g.points().contains(&pure));
            }
        }
    }

    #[test]
    fn refinement_nests() {
        let coarse = ActionGrid::new(2, 2, 3);
        let fine = ActionGrid::new(4, 2, 3);
        for p in coarse.points() {
            assert!(fine.points().iter().any(|q| q.max_abs_diff(p) < 1e-15));
        }
    }
}
