//! Lloyd iteration shared by every k-means variant.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ClustererConfig, EmptyClusterPolicy};
use crate::error::{Error, Result};
use crate::model::{Label, ValidatedSupervision};
use crate::par::{map_range, Parallelism};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Geometry {
    /// Squared Euclidean distance; objective is WCSS (minimized).
    Euclidean,
    /// Unit-norm points, dot-product similarity; objective is total cosine (maximized).
    Cosine,
}

pub(crate) enum Rule<'a> {
    Free,
    /// `pins[i] = Some(c)` keeps object i in cluster c.
    Pinned(Vec<Option<Label>>),
    Cop(&'a ValidatedSupervision),
}

/// Row-major point matrix borrowed from a dataset (or its normalized copy).
pub(crate) struct Points<'a> {
    pub data: &'a [f64],
    pub n: usize,
    pub d: usize,
}

impl Points<'_> {
    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }
}

pub(crate) struct Run {
    pub labels: Vec<Label>,
    pub centroids: Vec<Vec<f64>>,
    pub iterations: usize,
    pub objective: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn normalize(v: &mut [f64]) -> bool {
    let norm = dot(v, v).sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
        true
    } else {
        false
    }
}

impl Geometry {
    /// Smaller is closer.
    fn cost(self, x: &[f64], c: &[f64]) -> f64 {
        match self {
            Geometry::Euclidean => sq_dist(x, c),
            Geometry::Cosine => -dot(x, c),
        }
    }

    /// How far a centroid moved between iterations.
    fn movement(self, old: &[f64], new: &[f64]) -> f64 {
        match self {
            Geometry::Euclidean => sq_dist(old, new).sqrt(),
            Geometry::Cosine => 1.0 - dot(old, new),
        }
    }

    fn objective(self, pts: &Points, labels: &[Label], centroids: &[Vec<f64>]) -> f64 {
        (0..pts.n)
            .map(|i| {
                let c = &centroids[labels[i]];
                match self {
                    Geometry::Euclidean => sq_dist(pts.row(i), c),
                    Geometry::Cosine => dot(pts.row(i), c),
                }
            })
            .sum()
    }

    /// True when `next` is no worse than `prev` up to rounding.
    fn improved(self, prev: f64, next: f64) -> bool {
        let slack = 1e-9 * (1.0 + prev.abs());
        match self {
            Geometry::Euclidean => next <= prev + slack,
            Geometry::Cosine => next >= prev - slack,
        }
    }
}

fn nearest(geom: Geometry, x: &[f64], centroids: &[Vec<f64>]) -> Label {
    let mut best = 0;
    let mut best_cost = f64::INFINITY;
    for (c, centroid) in centroids.iter().enumerate() {
        let cost = geom.cost(x, centroid);
        if cost < best_cost {
            best_cost = cost;
            best = c;
        }
    }
    best
}

/// k distinct rows drawn uniformly without replacement.
pub(crate) fn random_init(pts: &Points, k: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample(&mut rng, pts.n, k)
        .into_iter()
        .map(|i| pts.row(i).to_vec())
        .collect()
}

/// Per-class mean of the seeded rows.
pub(crate) fn seed_init(
    pts: &Points,
    seeds: &std::collections::BTreeMap<usize, Label>,
    k: usize,
    geom: Geometry,
) -> Result<Vec<Vec<f64>>> {
    let mut sums = vec![vec![0.0; pts.d]; k];
    let mut counts = vec![0usize; k];
    for (&i, &class) in seeds {
        if class >= k {
            return Err(Error::SeedClassOutOfRange { class, k });
        }
        counts[class] += 1;
        sums[class]
            .iter_mut()
            .zip(pts.row(i))
            .for_each(|(s, x)| *s += x);
    }
    if let Some(class) = counts.iter().position(|&c| c == 0) {
        return Err(Error::MissingSeedClass(class));
    }
    for (sum, &count) in sums.iter_mut().zip(&counts) {
        sum.iter_mut().for_each(|s| *s /= count as f64);
        if geom == Geometry::Cosine && !normalize(sum) {
            return Err(Error::InvalidConfig(
                "seed rows of a class cancel to the zero vector".into(),
            ));
        }
    }
    Ok(sums)
}

fn assign(
    pts: &Points,
    centroids: &[Vec<f64>],
    geom: Geometry,
    rule: &Rule,
    mode: Parallelism,
) -> Result<Vec<Label>> {
    match rule {
        Rule::Free => Ok(map_range(pts.n, mode, |i| {
            nearest(geom, pts.row(i), centroids)
        })),
        Rule::Pinned(pins) => Ok(map_range(pts.n, mode, |i| {
            pins[i].unwrap_or_else(|| nearest(geom, pts.row(i), centroids))
        })),
        Rule::Cop(sup) => cop_assign(pts, centroids, geom, sup),
    }
}

/// Greedy constrained assignment in ascending object order.
///
/// A must-link group is placed as a block at the centroid with the smallest
/// mean cost over its members, skipping centroids that already hold a
/// cannot-link partner of any member.
fn cop_assign(
    pts: &Points,
    centroids: &[Vec<f64>],
    geom: Geometry,
    sup: &ValidatedSupervision,
) -> Result<Vec<Label>> {
    const UNASSIGNED: usize = usize::MAX;
    let mut partners = vec![Vec::new(); pts.n];
    for &(a, b) in sup.cannot_link() {
        partners[a].push(b);
        partners[b].push(a);
    }
    let groups = sup.must_link();
    let mut labels = vec![UNASSIGNED; pts.n];
    let mut order: Vec<(f64, usize)> = Vec::with_capacity(centroids.len());
    for i in 0..pts.n {
        if labels[i] != UNASSIGNED {
            continue;
        }
        let members = groups.members(i);
        order.clear();
        order.extend(centroids.iter().enumerate().map(|(c, centroid)| {
            let total: f64 = members
                .iter()
                .map(|&m| geom.cost(pts.row(m), centroid))
                .sum();
            (total / members.len() as f64, c)
        }));
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let chosen = order.iter().map(|&(_, c)| c).find(|&c| {
            members
                .iter()
                .all(|&m| partners[m].iter().all(|&p| labels[p] != c))
        });
        let c = chosen.ok_or(Error::InfeasibleAssignment { object: i })?;
        for &m in members {
            labels[m] = c;
        }
    }
    Ok(labels)
}

/// Recomputes centroids; returns (centroids, labels) after applying the
/// empty-cluster policy. Labels change only when clusters are dropped.
fn update(
    pts: &Points,
    mut labels: Vec<Label>,
    old: &[Vec<f64>],
    geom: Geometry,
    policy: EmptyClusterPolicy,
    pins: Option<&mut Vec<Option<Label>>>,
) -> (Vec<Vec<f64>>, Vec<Label>) {
    let k = old.len();
    let mut sums = vec![vec![0.0; pts.d]; k];
    let mut counts = vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        sums[l].iter_mut().zip(pts.row(i)).for_each(|(s, x)| *s += x);
    }
    let mut centroids: Vec<Vec<f64>> = sums
        .into_iter()
        .zip(&counts)
        .zip(old)
        .map(|((mut s, &count), prev)| {
            if count == 0 {
                return prev.clone();
            }
            s.iter_mut().for_each(|x| *x /= count as f64);
            if geom == Geometry::Cosine && !normalize(&mut s) {
                return prev.clone();
            }
            s
        })
        .collect();

    let empty: Vec<usize> = (0..k).filter(|&c| counts[c] == 0).collect();
    if empty.is_empty() {
        return (centroids, labels);
    }
    match policy {
        EmptyClusterPolicy::ReseedFarthest => {
            let pinned = |i: usize| pins.as_ref().is_some_and(|p| p[i].is_some());
            let mut far: Vec<(f64, usize)> = (0..pts.n)
                .filter(|&i| !pinned(i))
                .map(|i| (geom.cost(pts.row(i), &centroids[labels[i]]), i))
                .collect();
            // farthest first, lowest index on ties
            far.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            for (c, &(_, i)) in empty.iter().zip(&far) {
                centroids[*c] = pts.row(i).to_vec();
            }
        }
        EmptyClusterPolicy::Drop => {
            let mut remap = vec![usize::MAX; k];
            let mut kept = Vec::with_capacity(k - empty.len());
            for (c, centroid) in centroids.into_iter().enumerate() {
                if counts[c] > 0 {
                    remap[c] = kept.len();
                    kept.push(centroid);
                }
            }
            labels.iter_mut().for_each(|l| *l = remap[*l]);
            if let Some(pins) = pins {
                pins.iter_mut().flatten().for_each(|l| *l = remap[*l]);
            }
            centroids = kept;
        }
    }
    (centroids, labels)
}

pub(crate) fn run(
    pts: &Points,
    init: Vec<Vec<f64>>,
    cfg: &ClustererConfig,
    geom: Geometry,
    mut rule: Rule,
    mode: Parallelism,
) -> Result<Run> {
    let mut centroids = init;
    let mut labels = Vec::new();
    let mut objective: Vec<f64> = Vec::new();
    let mut iterations = 0;
    let monotone = !matches!(rule, Rule::Cop(_));
    while iterations < cfg.max_iters {
        iterations += 1;
        let assigned = assign(pts, &centroids, geom, &rule, mode)?;
        if cfg!(debug_assertions) && monotone {
            if let Some(&prev) = objective.last() {
                let now = geom.objective(pts, &assigned, &centroids);
                debug_assert!(geom.improved(prev, now), "assignment worsened objective");
            }
        }
        let pins = match &mut rule {
            Rule::Pinned(p) => Some(p),
            _ => None,
        };
        let (next, relabeled) = update(pts, assigned, &centroids, geom, cfg.empty_cluster_policy, pins);
        let moved = if next.len() == centroids.len() {
            centroids
                .iter()
                .zip(&next)
                .map(|(a, b)| geom.movement(a, b))
                .fold(0.0, f64::max)
        } else {
            f64::INFINITY
        };
        let obj = geom.objective(pts, &relabeled, &next);
        if monotone {
            if let Some(&prev) = objective.last() {
                debug_assert!(geom.improved(prev, obj), "objective not monotone");
            }
        }
        objective.push(obj);
        centroids = next;
        labels = relabeled;
        if moved < cfg.tol {
            break;
        }
    }
    Ok(Run {
        labels,
        centroids,
        iterations,
        objective,
    })
}
