//! Label correspondence between a partition and the reference.
//!
//! The optimal relabeling is a maximum-weight bipartite matching on the
//! contingency table. Ties between optimal matchings are broken towards the
//! lexicographically smallest assignment vector so results are reproducible.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AlignmentMap, Label, Partition};

/// Overlap counts between source labels (rows) and reference labels (columns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContingencyTable {
    counts: Vec<Vec<f64>>,
    k_src: usize,
    k_tgt: usize,
    n_effective: f64,
}

impl ContingencyTable {
    /// Builds a table from explicit non-negative weights.
    pub fn from_rows(counts: Vec<Vec<f64>>) -> Result<Self> {
        let k_src = counts.len();
        let k_tgt = counts.first().map_or(0, Vec::len);
        if k_src == 0 || k_tgt == 0 {
            return Err(Error::InvalidConfig("contingency table is empty".into()));
        }
        if let Some(r) = counts.iter().find(|r| r.len() != k_tgt) {
            return Err(Error::LengthMismatch {
                expected: k_tgt,
                found: r.len(),
            });
        }
        if let Some(&x) = counts.iter().flatten().find(|x| !(x.is_finite() && **x >= 0.0)) {
            return Err(Error::NegativeWeight(x));
        }
        let n_effective = counts.iter().flatten().sum();
        Ok(Self {
            counts,
            k_src,
            k_tgt,
            n_effective,
        })
    }

    pub fn counts(&self) -> &[Vec<f64>] {
        &self.counts
    }

    pub fn get(&self, src: Label, tgt: Label) -> f64 {
        self.counts[src][tgt]
    }

    pub fn k_src(&self) -> usize {
        self.k_src
    }

    pub fn k_tgt(&self) -> usize {
        self.k_tgt
    }

    pub fn n_effective(&self) -> f64 {
        self.n_effective
    }

    /// Overlap achieved by `mapping`; fresh targets contribute nothing.
    pub fn score(&self, mapping: &[Label]) -> f64 {
        mapping
            .iter()
            .enumerate()
            .filter(|&(_, &t)| t < self.k_tgt)
            .map(|(a, &t)| self.counts[a][t])
            .sum()
    }

    fn square(&self) -> usize {
        self.k_src.max(self.k_tgt)
    }

    /// Zero-padded weight, defined on the `square() × square()` grid.
    fn weight(&self, a: usize, t: usize) -> f64 {
        if a < self.k_src && t < self.k_tgt {
            self.counts[a][t]
        } else {
            0.0
        }
    }
}

/// `counts[a][b]` = objects labeled `a` in `p` and `b` in `reference`;
/// objects MISSING in either are skipped.
pub fn contingency_table(p: &Partition, reference: &Partition) -> Result<ContingencyTable> {
    if p.len() != reference.len() {
        return Err(Error::LengthMismatch {
            expected: reference.len(),
            found: p.len(),
        });
    }
    let mut counts = vec![vec![0.0; reference.k()]; p.k()];
    let mut total = 0usize;
    for (a, b) in p.labels().iter().zip(reference.labels()) {
        if let (Some(a), Some(b)) = (a, b) {
            counts[*a][*b] += 1.0;
            total += 1;
        }
    }
    Ok(ContingencyTable {
        counts,
        k_src: p.k(),
        k_tgt: reference.k(),
        n_effective: total as f64,
    })
}

/// Square min-cost assignment (Hungarian method with potentials).
///
/// Returns the row→column assignment and the dual potentials `(u, v)` with
/// `cost[i][j] - u[i] - v[j] >= 0`, zero on the assignment.
fn hungarian(cost: &[Vec<f64>]) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    let n = cost.len();
    // 1-based with a virtual column 0, as in the classic formulation.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![0; n];
    for j in 1..=n {
        row_to_col[p[j] - 1] = j - 1;
    }
    (row_to_col, u[1..].to_vec(), v[1..].to_vec())
}

/// Optimal matching on the padded square together with its tight-edge graph.
///
/// Every maximum-weight matching is a perfect matching of the tight graph
/// (complementary slackness against the optimal duals), so tie-breaking only
/// needs to search that graph.
struct Solved {
    s: usize,
    tight: Vec<Vec<bool>>,
    row_to_col: Vec<usize>,
    col_to_row: Vec<usize>,
}

impl Solved {
    fn new(t: &ContingencyTable) -> Self {
        let s = t.square();
        let cost: Vec<Vec<f64>> = (0..s)
            .map(|a| (0..s).map(|b| -t.weight(a, b)).collect())
            .collect();
        let (row_to_col, u, v) = hungarian(&cost);
        let scale = t.counts.iter().flatten().fold(1.0f64, |m, &x| m.max(x));
        let eps = 1e-9 * scale;
        let tight = (0..s)
            .map(|a| (0..s).map(|b| cost[a][b] - u[a] - v[b] <= eps).collect())
            .collect();
        let mut col_to_row = vec![0; s];
        for (a, &b) in row_to_col.iter().enumerate() {
            col_to_row[b] = a;
        }
        Self {
            s,
            tight,
            row_to_col,
            col_to_row,
        }
    }

    /// Rows passing `usable` that can give up their column and still reach
    /// `target` along an alternating path of tight edges.
    fn rows_reaching(&self, target: usize, usable: impl Fn(usize) -> bool) -> Vec<bool> {
        let mut reach = vec![false; self.s];
        let mut queue = VecDeque::new();
        for y in 0..self.s {
            if usable(y) && self.tight[y][target] {
                reach[y] = true;
                queue.push_back(y);
            }
        }
        while let Some(x) = queue.pop_front() {
            let col = self.row_to_col[x];
            for y in 0..self.s {
                if !reach[y] && usable(y) && self.tight[y][col] {
                    reach[y] = true;
                    queue.push_back(y);
                }
            }
        }
        reach
    }

    /// Walks source rows in order, moving each to the smallest column that
    /// still admits a perfect tight matching for the remaining rows.
    fn lexicographic(&mut self, rows: usize) {
        for a in 0..rows {
            let current = self.row_to_col[a];
            let usable = |y: usize| y > a;
            let reach = self.rows_reaching(current, usable);
            let pick = (0..current).find(|&t| {
                self.tight[a][t] && {
                    let r = self.col_to_row[t];
                    r > a && reach[r]
                }
            });
            if let Some(t) = pick {
                let r = self.col_to_row[t];
                // row a takes t; r must reach a's old column without using rows <= a
                self.row_to_col[a] = t;
                self.col_to_row[t] = a;
                self.col_to_row[current] = usize::MAX;
                self.reroute_free(r, current, a);
            }
        }
    }

    /// `r` lost its column; move rows above `a` so `free_col` is taken.
    fn reroute_free(&mut self, r: usize, free_col: usize, a: usize) {
        // r is temporarily unmatched; treat its column slot as the start.
        let mut parent_col = vec![usize::MAX; self.s];
        let mut seen_row = vec![false; self.s];
        let mut queue = VecDeque::from([r]);
        seen_row[r] = true;
        let mut found = false;
        'search: while let Some(x) = queue.pop_front() {
            for c in 0..self.s {
                if !self.tight[x][c] || parent_col[c] != usize::MAX {
                    continue;
                }
                if x != r && c == self.row_to_col[x] {
                    continue;
                }
                let owner = self.col_to_row[c];
                if c == free_col {
                    parent_col[c] = x;
                    found = true;
                    break 'search;
                }
                if owner == usize::MAX || owner <= a || owner == r {
                    continue;
                }
                parent_col[c] = x;
                if !seen_row[owner] {
                    seen_row[owner] = true;
                    queue.push_back(owner);
                }
            }
        }
        assert!(found, "reachability was checked before rerouting");
        let mut c = free_col;
        loop {
            let x = parent_col[c];
            let prev = self.row_to_col[x];
            self.row_to_col[x] = c;
            self.col_to_row[c] = x;
            if x == r {
                break;
            }
            c = prev;
        }
    }
}

/// Maximum-overlap injective relabeling of the table's source labels.
///
/// Unequal label counts are zero-padded to a square; source labels matched to
/// padding columns receive fresh targets `k_tgt, k_tgt + 1, ...`.
pub fn optimal_alignment(t: &ContingencyTable) -> AlignmentMap {
    let mut solved = Solved::new(t);
    solved.lexicographic(t.k_src);
    let mapping = solved.row_to_col[..t.k_src].to_vec();
    let score = t.score(&mapping);
    AlignmentMap { mapping, score }
}

/// Whether some other optimal mapping sends a source label to a different
/// reference label (fresh labels are interchangeable).
pub fn has_alternative_optimum(t: &ContingencyTable, map: &AlignmentMap) -> bool {
    let mut solved = Solved::new(t);
    for (a, &b) in map.mapping.iter().enumerate() {
        // re-seat the solver on the supplied optimum
        let displaced = solved.col_to_row[b];
        let old = solved.row_to_col[a];
        solved.row_to_col[displaced] = old;
        solved.col_to_row[old] = displaced;
        solved.row_to_col[a] = b;
        solved.col_to_row[b] = a;
    }
    if (t.score(&solved.row_to_col[..t.k_src]) - map.score).abs() > 1e-9 * (1.0 + map.score) {
        return true;
    }
    (0..t.k_src).any(|a| {
        let current = solved.row_to_col[a];
        let reach = solved.rows_reaching(current, |y| y != a);
        (0..solved.s).any(|c| {
            c != current
                && (c < t.k_tgt || current < t.k_tgt)
                && solved.tight[a][c]
                && reach[solved.col_to_row[c]]
        })
    })
}

/// Largest table side [`brute_force_alignment`] will enumerate.
pub const BRUTE_FORCE_MAX: usize = 8;

/// Exhaustive search over all injective mappings; the reference oracle for
/// [`optimal_alignment`].
pub fn brute_force_alignment(t: &ContingencyTable) -> Result<AlignmentMap> {
    let s = t.square();
    if s > BRUTE_FORCE_MAX {
        return Err(Error::TooLarge {
            k: s,
            max: BRUTE_FORCE_MAX,
        });
    }
    let mut best: Option<AlignmentMap> = None;
    let mut current = Vec::with_capacity(t.k_src);
    let mut used = vec![false; s];
    enumerate(t, s, &mut current, &mut used, &mut best);
    Ok(best.expect("at least one injective mapping exists"))
}

fn enumerate(
    t: &ContingencyTable,
    s: usize,
    current: &mut Vec<Label>,
    used: &mut [bool],
    best: &mut Option<AlignmentMap>,
) {
    if current.len() == t.k_src {
        let score = t.score(current);
        // visited in lexicographic order, so only a strict improvement replaces
        if best.as_ref().is_none_or(|b| score > b.score) {
            *best = Some(AlignmentMap {
                mapping: current.clone(),
                score,
            });
        }
        return;
    }
    for c in 0..s {
        if !used[c] {
            used[c] = true;
            current.push(c);
            enumerate(t, s, current, used, best);
            current.pop();
            used[c] = false;
        }
    }
}

/// Rewrites `p`'s labels through `m`, keeping MISSING entries.
pub fn apply_alignment(p: &Partition, m: &AlignmentMap) -> Result<Partition> {
    let labels = p
        .labels()
        .iter()
        .map(|l| match l {
            Some(l) => m.mapping.get(*l).copied().map(Some).ok_or(Error::UnmappedLabel(*l)),
            None => Ok(None),
        })
        .collect::<Result<Vec<_>>>()?;
    let k = m.mapping.iter().max().map_or(1, |&x| x + 1);
    Partition::new(labels, k, p.provenance().clone())
}
