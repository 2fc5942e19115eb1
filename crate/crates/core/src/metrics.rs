//! External validity indices and constraint checks.
//!
//! Objects MISSING in either partition are dropped pairwise before any index
//! is computed.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::alignment::{contingency_table, optimal_alignment};
use crate::error::{Error, Result};
use crate::model::{Label, Partition, ValidatedSupervision};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub ari: f64,
    pub nmi: f64,
    pub purity: f64,
    /// Fraction of jointly labeled objects whose label matches the truth
    /// after optimal alignment.
    pub agreement: f64,
    pub constraint_violations: usize,
}

/// Sparse joint counts over jointly labeled objects.
struct Joint {
    cells: BTreeMap<(Label, Label), u64>,
    rows: BTreeMap<Label, u64>,
    cols: BTreeMap<Label, u64>,
    n: u64,
}

fn joint(p: &Partition, q: &Partition, min: u64) -> Result<Joint> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch {
            expected: p.len(),
            found: q.len(),
        });
    }
    let mut j = Joint {
        cells: BTreeMap::new(),
        rows: BTreeMap::new(),
        cols: BTreeMap::new(),
        n: 0,
    };
    for (a, b) in p.labels().iter().zip(q.labels()) {
        if let (Some(a), Some(b)) = (a, b) {
            *j.cells.entry((*a, *b)).or_default() += 1;
            *j.rows.entry(*a).or_default() += 1;
            *j.cols.entry(*b).or_default() += 1;
            j.n += 1;
        }
    }
    if j.n < min {
        return Err(Error::TooFewObjects);
    }
    Ok(j)
}

fn pairs(x: u64) -> f64 {
    (x * x.saturating_sub(1) / 2) as f64
}

/// Hubert–Arabie adjusted Rand index.
///
/// Returns 1.0 when the adjustment is degenerate (both partitions a single
/// cluster, or both all singletons), where the two partitions coincide.
pub fn adjusted_rand_index(p: &Partition, q: &Partition) -> Result<f64> {
    let j = joint(p, q, 2)?;
    let index: f64 = j.cells.values().map(|&c| pairs(c)).sum();
    let sum_rows: f64 = j.rows.values().map(|&c| pairs(c)).sum();
    let sum_cols: f64 = j.cols.values().map(|&c| pairs(c)).sum();
    // scaled by the total pair count so integer-valued cases stay exact
    let total = pairs(j.n);
    let expected = sum_rows * sum_cols;
    let max = 0.5 * (sum_rows + sum_cols) * total;
    if max == expected {
        return Ok(1.0);
    }
    Ok((index * total - expected) / (max - expected))
}

fn entropy(counts: impl Iterator<Item = u64>, n: f64) -> f64 {
    counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Mutual information normalized by the arithmetic mean of the entropies.
pub fn normalized_mutual_information(p: &Partition, q: &Partition) -> Result<f64> {
    let j = joint(p, q, 2)?;
    let n = j.n as f64;
    let hp = entropy(j.rows.values().copied(), n);
    let hq = entropy(j.cols.values().copied(), n);
    match (j.rows.len() == 1, j.cols.len() == 1) {
        (true, true) => return Ok(1.0),
        (true, false) | (false, true) => return Ok(0.0),
        _ => {}
    }
    let mi: f64 = j
        .cells
        .iter()
        .map(|(&(a, b), &c)| {
            let pab = c as f64 / n;
            let pa = j.rows[&a] as f64 / n;
            let pb = j.cols[&b] as f64 / n;
            pab * (pab / (pa * pb)).ln()
        })
        .sum();
    Ok((mi / (0.5 * (hp + hq))).clamp(0.0, 1.0))
}

/// Share of objects that belong to their cluster's majority class.
pub fn purity(p: &Partition, truth: &Partition) -> Result<f64> {
    let j = joint(p, truth, 1)?;
    let mut best: BTreeMap<Label, u64> = BTreeMap::new();
    for (&(a, _), &c) in &j.cells {
        let e = best.entry(a).or_default();
        *e = (*e).max(c);
    }
    Ok(best.values().sum::<u64>() as f64 / j.n as f64)
}

/// Fraction of jointly labeled objects on which `p`, optimally relabeled
/// onto `truth`, agrees with it.
pub fn agreement(p: &Partition, truth: &Partition) -> Result<f64> {
    let table = contingency_table(p, truth)?;
    if table.n_effective() < 1.0 {
        return Err(Error::TooFewObjects);
    }
    Ok(optimal_alignment(&table).score / table.n_effective())
}

/// Closed must-link pairs split across clusters plus cannot-link pairs
/// sharing one. Pairs touching a MISSING label are skipped.
pub fn constraint_violation_count(p: &Partition, c: &ValidatedSupervision) -> usize {
    let labels = p.labels();
    let mut violations = 0usize;
    for group in c.must_link().groups().iter().filter(|g| g.len() > 1) {
        let mut by_label: BTreeMap<Label, usize> = BTreeMap::new();
        for &i in group {
            if let Some(Some(l)) = labels.get(i) {
                *by_label.entry(*l).or_default() += 1;
            }
        }
        let labeled: usize = by_label.values().sum();
        let same: usize = by_label.values().map(|&x| x * (x - 1) / 2).sum();
        violations += labeled * labeled.saturating_sub(1) / 2 - same;
    }
    violations += c
        .cannot_link()
        .iter()
        .filter(|&&(a, b)| matches!((labels.get(a), labels.get(b)), (Some(Some(x)), Some(Some(y))) if x == y))
        .count();
    violations
}

pub fn metric_report(
    p: &Partition,
    truth: &Partition,
    constraints: Option<&ValidatedSupervision>,
) -> Result<MetricReport> {
    Ok(MetricReport {
        ari: adjusted_rand_index(p, truth)?,
        nmi: normalized_mutual_information(p, truth)?,
        purity: purity(p, truth)?,
        agreement: agreement(p, truth)?,
        constraint_violations: constraints.map_or(0, |c| constraint_violation_count(p, c)),
    })
}
