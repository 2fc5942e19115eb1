//! Domain types shared by every pipeline stage.
//!
//! Labels are dense non-negative integers. `None` in a label vector is the
//! MISSING sentinel (an unknown assignment); it never collides with a label
//! value. External label tokens read from files are kept alongside the
//! partition so results can be written back in the caller's alphabet.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Label = usize;

/// Token written for a MISSING label.
pub const MISSING_TOKEN: &str = "?";

/// An n×d table of finite features with unique object identifiers.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    n: usize,
    d: usize,
    object_ids: Vec<String>,
    feature_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(rows: Vec<Vec<f64>>, object_ids: Vec<String>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidDataset("no rows".into()));
        }
        if object_ids.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                found: object_ids.len(),
            });
        }
        let d = rows[0].len();
        if d == 0 {
            return Err(Error::InvalidDataset("rows have no features".into()));
        }
        let mut features = Vec::with_capacity(n * d);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::InvalidDataset(format!(
                    "row {i} has {} features, expected {d}",
                    row.len()
                )));
            }
            if let Some(j) = row.iter().position(|x| !x.is_finite()) {
                return Err(Error::InvalidDataset(format!(
                    "row {i}, feature {j} is not finite"
                )));
            }
            features.extend_from_slice(row);
        }
        let mut seen = HashSet::with_capacity(n);
        for id in &object_ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::DuplicateId(id.clone()));
            }
        }
        Ok(Self {
            features,
            n,
            d,
            object_ids,
            feature_names: None,
        })
    }

    /// Builds a dataset whose object ids are the row indices.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let ids = (0..rows.len()).map(|i| i.to_string()).collect();
        Self::new(rows, ids)
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.d {
            return Err(Error::LengthMismatch {
                expected: self.d,
                found: names.len(),
            });
        }
        self.feature_names = Some(names);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.d..(i + 1) * self.d]
    }

    /// Row-major features, `n * d` values.
    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.features.chunks_exact(self.d)
    }

    pub fn object_ids(&self) -> &[String] {
        &self.object_ids
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    /// Map from object id to row index.
    pub fn index_of(&self) -> HashMap<&str, usize> {
        self.object_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect()
    }
}

/// Where a partition came from.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub algorithm: String,
    pub run: String,
    pub seed: Option<u64>,
}

impl Provenance {
    pub fn new(algorithm: impl Into<String>, run: impl Into<String>, seed: Option<u64>) -> Self {
        Self {
            algorithm: algorithm.into(),
            run: run.into(),
            seed,
        }
    }
}

/// A hard labeling of n objects into `k` declared labels, with MISSING allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    labels: Vec<Option<Label>>,
    k: usize,
    provenance: Provenance,
    tokens: Option<Vec<String>>,
}

impl Partition {
    pub fn new(labels: Vec<Option<Label>>, k: usize, provenance: Provenance) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidPartition("k must be at least 1".into()));
        }
        if let Some(bad) = labels.iter().flatten().find(|&&l| l >= k) {
            return Err(Error::InvalidPartition(format!("label {bad} outside 0..{k}")));
        }
        if labels.iter().all(Option::is_none) {
            return Err(Error::InvalidPartition("every label is MISSING".into()));
        }
        Ok(Self {
            labels,
            k,
            provenance,
            tokens: None,
        })
    }

    /// Builds a partition with `k` inferred as one past the largest label.
    pub fn from_labels(labels: Vec<Option<Label>>) -> Result<Self> {
        let k = labels.iter().flatten().max().map_or(0, |&m| m + 1);
        Self::new(labels, k, Provenance::default())
    }

    /// Convenience for fully labeled vectors.
    pub fn from_dense(labels: &[Label]) -> Result<Self> {
        Self::from_labels(labels.iter().map(|&l| Some(l)).collect())
    }

    /// Attaches external names for labels `0..k`.
    pub fn with_tokens(mut self, tokens: Vec<String>) -> Result<Self> {
        if tokens.len() != self.k {
            return Err(Error::LengthMismatch {
                expected: self.k,
                found: tokens.len(),
            });
        }
        self.tokens = Some(tokens);
        Ok(self)
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn labels(&self) -> &[Option<Label>] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn tokens(&self) -> Option<&[String]> {
        self.tokens.as_deref()
    }

    /// External name of `label`: the recorded token, or its decimal form.
    pub fn token(&self, label: Label) -> String {
        match &self.tokens {
            Some(t) if label < t.len() => t[label].clone(),
            _ => label.to_string(),
        }
    }

    pub fn token_at(&self, i: usize) -> String {
        self.labels[i].map_or_else(|| MISSING_TOKEN.to_string(), |l| self.token(l))
    }

    pub fn missing_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_none()).count()
    }
}

/// Relabels so labels are `0..k'` in order of first appearance.
///
/// MISSING entries stay MISSING; tokens follow their labels.
pub fn canonicalize(p: &Partition) -> Partition {
    let mut remap: Vec<Option<Label>> = vec![None; p.k];
    let mut next = 0;
    let labels = p
        .labels
        .iter()
        .map(|l| {
            l.map(|l| {
                *remap[l].get_or_insert_with(|| {
                    next += 1;
                    next - 1
                })
            })
        })
        .collect();
    let tokens = p.tokens.as_ref().map(|t| {
        let mut out = vec![String::new(); next];
        for (old, new) in remap.iter().enumerate() {
            if let Some(new) = new {
                out[*new] = t[old].clone();
            }
        }
        out
    });
    Partition {
        labels,
        k: next,
        provenance: p.provenance.clone(),
        tokens,
    }
}

/// Connected components of a must-link graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MustLinkGroups {
    group_of: Vec<usize>,
    groups: Vec<Vec<usize>>,
}

impl MustLinkGroups {
    pub fn group_of(&self, i: usize) -> usize {
        self.group_of[i]
    }

    /// Groups in order of their smallest member; members ascending.
    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn members(&self, i: usize) -> &[usize] {
        &self.groups[self.group_of[i]]
    }

    pub fn same_group(&self, a: usize, b: usize) -> bool {
        self.group_of[a] == self.group_of[b]
    }

    /// Every pair implied by the closure, `a < b`.
    pub fn closed_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.groups.iter().flat_map(|g| {
            g.iter()
                .enumerate()
                .flat_map(move |(x, &a)| g[x + 1..].iter().map(move |&b| (a, b)))
        })
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Transitive closure of must-link pairs over objects `0..n`.
///
/// # Panics
/// If a pair member is not below `n`.
pub fn must_link_closure(pairs: &[(usize, usize)], n: usize) -> MustLinkGroups {
    let mut parent: Vec<usize> = (0..n).collect();
    for &(a, b) in pairs {
        assert!(a < n && b < n, "must-link pair ({a}, {b}) outside 0..{n}");
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            // smaller root wins so group ids follow the smallest member
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            parent[hi] = lo;
        }
    }
    let mut group_of = vec![usize::MAX; n];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut root_group = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if root_group[r] == usize::MAX {
            root_group[r] = groups.len();
            groups.push(Vec::new());
        }
        group_of[i] = root_group[r];
        groups[root_group[r]].push(i);
    }
    MustLinkGroups { group_of, groups }
}

/// Seeds and pairwise constraints as supplied, keyed by object id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SupervisionBundle {
    pub seeds: BTreeMap<String, Label>,
    pub must_link: BTreeSet<(String, String)>,
    pub cannot_link: BTreeSet<(String, String)>,
}

fn unordered(a: impl Into<String>, b: impl Into<String>) -> (String, String) {
    let (a, b) = (a.into(), b.into());
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

impl SupervisionBundle {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn seed(mut self, id: impl Into<String>, class: Label) -> Self {
        self.seeds.insert(id.into(), class);
        self
    }

    pub fn must_link(mut self, a: impl Into<String>, b: impl Into<String>) -> Self {
        self.must_link.insert(unordered(a, b));
        self
    }

    pub fn cannot_link(mut self, a: impl Into<String>, b: impl Into<String>) -> Self {
        self.cannot_link.insert(unordered(a, b));
        self
    }

    pub fn is_empty(&self) -> bool {
        self.seeds.is_empty() && self.must_link.is_empty() && self.cannot_link.is_empty()
    }
}

/// A supervision bundle resolved against a dataset, with must-link closed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidatedSupervision {
    n: usize,
    seeds: BTreeMap<usize, Label>,
    must_link: MustLinkGroups,
    cannot_link: Vec<(usize, usize)>,
}

impl ValidatedSupervision {
    /// No seeds, no constraints.
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            seeds: BTreeMap::new(),
            must_link: must_link_closure(&[], n),
            cannot_link: Vec::new(),
        }
    }

    /// Index-based constructor; applies the same checks as [`validate_supervision`].
    pub fn from_indices(
        n: usize,
        seeds: BTreeMap<usize, Label>,
        must_link: &[(usize, usize)],
        cannot_link: &[(usize, usize)],
    ) -> Result<Self> {
        let check = |i: usize| {
            if i < n {
                Ok(i)
            } else {
                Err(Error::UnknownObject(i.to_string()))
            }
        };
        for &i in seeds.keys() {
            check(i)?;
        }
        for &(a, b) in must_link.iter().chain(cannot_link) {
            check(a)?;
            check(b)?;
        }
        let groups = must_link_closure(must_link, n);
        let mut cl: Vec<(usize, usize)> = cannot_link
            .iter()
            .map(|&(a, b)| (a.min(b), a.max(b)))
            .collect();
        cl.sort_unstable();
        cl.dedup();
        if let Some(&(a, b)) = cl.iter().find(|&&(a, b)| groups.same_group(a, b)) {
            return Err(Error::ConflictingConstraints {
                a: a.to_string(),
                b: b.to_string(),
            });
        }
        Ok(Self {
            n,
            seeds,
            must_link: groups,
            cannot_link: cl,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn seeds(&self) -> &BTreeMap<usize, Label> {
        &self.seeds
    }

    pub fn must_link(&self) -> &MustLinkGroups {
        &self.must_link
    }

    /// Cannot-link pairs, `a < b`, sorted.
    pub fn cannot_link(&self) -> &[(usize, usize)] {
        &self.cannot_link
    }

    pub fn has_constraints(&self) -> bool {
        !self.cannot_link.is_empty() || self.must_link.groups.len() < self.n
    }
}

/// Resolves ids against `data`, closes must-link and rejects contradictions.
pub fn validate_supervision(
    bundle: &SupervisionBundle,
    data: &Dataset,
) -> Result<ValidatedSupervision> {
    let index = data.index_of();
    let resolve = |id: &String| {
        index
            .get(id.as_str())
            .copied()
            .ok_or_else(|| Error::UnknownObject(id.clone()))
    };
    let seeds = bundle
        .seeds
        .iter()
        .map(|(id, &c)| Ok((resolve(id)?, c)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    let resolve_pairs = |set: &BTreeSet<(String, String)>| {
        set.iter()
            .map(|(a, b)| Ok((resolve(a)?, resolve(b)?)))
            .collect::<Result<Vec<_>>>()
    };
    let ml = resolve_pairs(&bundle.must_link)?;
    let cl = resolve_pairs(&bundle.cannot_link)?;
    ValidatedSupervision::from_indices(data.n(), seeds, &ml, &cl).map_err(|e| match e {
        Error::ConflictingConstraints { a, b } => {
            let id = |s: String| data.object_ids()[s.parse::<usize>().unwrap()].clone();
            Error::ConflictingConstraints { a: id(a), b: id(b) }
        }
        other => other,
    })
}

/// Per-partition vote weights: `alpha` for the generating algorithm,
/// `beta` for supervisor feedback on the partition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionWeights {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for PartitionWeights {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
        }
    }
}

impl PartitionWeights {
    pub fn new(alpha: f64, beta: f64) -> Self {
        Self { alpha, beta }
    }
}

/// Base partitions over the same objects plus their weights and reference.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    partitions: Vec<Partition>,
    weights: Vec<PartitionWeights>,
    reference_index: usize,
}

impl Ensemble {
    pub fn new(
        partitions: Vec<Partition>,
        weights: Vec<PartitionWeights>,
        reference_index: usize,
    ) -> Result<Self> {
        let m = partitions.len();
        if m == 0 {
            return Err(Error::InvalidConfig("ensemble has no partitions".into()));
        }
        if weights.len() != m {
            return Err(Error::LengthMismatch {
                expected: m,
                found: weights.len(),
            });
        }
        let n = partitions[0].len();
        if let Some(p) = partitions.iter().find(|p| p.len() != n) {
            return Err(Error::LengthMismatch {
                expected: n,
                found: p.len(),
            });
        }
        if reference_index >= m {
            return Err(Error::IndexOutOfRange {
                index: reference_index,
                len: m,
            });
        }
        for w in &weights {
            for x in [w.alpha, w.beta] {
                if !(x.is_finite() && x >= 0.0) {
                    return Err(Error::NegativeWeight(x));
                }
            }
        }
        Ok(Self {
            partitions,
            weights,
            reference_index,
        })
    }

    /// Unit weights for every partition.
    pub fn unweighted(partitions: Vec<Partition>, reference_index: usize) -> Result<Self> {
        let m = partitions.len();
        Self::new(partitions, vec![PartitionWeights::default(); m], reference_index)
    }

    pub fn partitions(&self) -> &[Partition] {
        &self.partitions
    }

    pub fn weights(&self) -> &[PartitionWeights] {
        &self.weights
    }

    pub fn reference_index(&self) -> usize {
        self.reference_index
    }

    pub fn reference(&self) -> &Partition {
        &self.partitions[self.reference_index]
    }

    pub fn m(&self) -> usize {
        self.partitions.len()
    }

    pub fn n(&self) -> usize {
        self.partitions[0].len()
    }

    pub fn with_reference(mut self, reference_index: usize) -> Result<Self> {
        if reference_index >= self.m() {
            return Err(Error::IndexOutOfRange {
                index: reference_index,
                len: self.m(),
            });
        }
        self.reference_index = reference_index;
        Ok(self)
    }
}

/// Injective relabeling of a source partition into the reference label space.
///
/// `mapping[a]` is the target of source label `a`. Targets at or beyond the
/// reference's `k` are fresh labels for source clusters left unmatched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentMap {
    pub mapping: Vec<Label>,
    pub score: f64,
}

impl AlignmentMap {
    pub fn identity(k: usize, score: f64) -> Self {
        Self {
            mapping: (0..k).collect(),
            score,
        }
    }

    pub fn is_injective(&self) -> bool {
        let mut seen = HashSet::with_capacity(self.mapping.len());
        self.mapping.iter().all(|t| seen.insert(*t))
    }
}

/// Final labels with per-object vote bookkeeping.
///
/// `labels[i] == None` marks an UNRESOLVED object (a tie left open, or every
/// partition abstained).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusResult {
    pub labels: Vec<Option<Label>>,
    /// Per object, `(label, total weight)` for every label that received
    /// positive weight, ascending by label.
    pub scores: Vec<Vec<(Label, f64)>>,
    pub margin: Vec<f64>,
    pub tie_flags: Vec<bool>,
    /// Objects on which every partition abstained.
    pub abstained: Vec<usize>,
}

impl ConsensusResult {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn best_score(&self, i: usize) -> Option<f64> {
        self.scores[i].iter().map(|&(_, s)| s).reduce(f64::max)
    }
}
