//! Weighted majority voting over partitions aligned to a reference.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::alignment::{apply_alignment, contingency_table, has_alternative_optimum, optimal_alignment};
use crate::clusterers::{generate_ensemble_with, EnsembleSpec};
use crate::error::{Error, Result, Stage};
use crate::model::{
    ConsensusResult, Dataset, Ensemble, Label, Partition, PartitionWeights, Provenance,
    ValidatedSupervision,
};
use crate::par::{map_range, map_slice, Parallelism};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "kebab-case")]
pub enum ReferencePolicy {
    UserIndex { index: usize },
    Random { seed: u64 },
}

impl Default for ReferencePolicy {
    fn default() -> Self {
        ReferencePolicy::UserIndex { index: 0 }
    }
}

/// Picks the partition every other partition is aligned against.
pub fn select_reference(m: usize, policy: &ReferencePolicy) -> Result<usize> {
    match *policy {
        _ if m == 0 => Err(Error::IndexOutOfRange { index: 0, len: 0 }),
        ReferencePolicy::UserIndex { index } if index < m => Ok(index),
        ReferencePolicy::UserIndex { index } => Err(Error::IndexOutOfRange { index, len: m }),
        ReferencePolicy::Random { seed } => Ok(ChaCha8Rng::seed_from_u64(seed).gen_range(0..m)),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TiePolicy {
    /// Leave tied objects UNRESOLVED.
    #[default]
    Unresolved,
    /// Use the reference partition's label when it is among the tied labels,
    /// otherwise the lowest tied label.
    Reference,
    /// Smallest tied label.
    Lowest,
}

impl FromStr for TiePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unresolved" => Ok(TiePolicy::Unresolved),
            "reference" => Ok(TiePolicy::Reference),
            "lowest" => Ok(TiePolicy::Lowest),
            other => Err(Error::InvalidConfig(format!("unknown tie policy `{other}`"))),
        }
    }
}

impl fmt::Display for TiePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TiePolicy::Unresolved => "unresolved",
            TiePolicy::Reference => "reference",
            TiePolicy::Lowest => "lowest",
        })
    }
}

/// ω_j = α_j·β_j, optionally rescaled so the weights sum to m.
pub fn combine_weights(weights: &[PartitionWeights], normalize: bool) -> Result<Vec<f64>> {
    for w in weights {
        for x in [w.alpha, w.beta] {
            if !(x.is_finite() && x >= 0.0) {
                return Err(Error::NegativeWeight(x));
            }
        }
    }
    let mut omega: Vec<f64> = weights.iter().map(|w| w.alpha * w.beta).collect();
    let total: f64 = omega.iter().sum();
    if !(total > 0.0) {
        return Err(Error::AllZeroWeights);
    }
    if normalize {
        let scale = omega.len() as f64 / total;
        omega.iter_mut().for_each(|w| *w *= scale);
    }
    Ok(omega)
}

/// Votes each object into the label with the largest total weight.
///
/// Partitions that are MISSING at an object abstain there, as do partitions
/// with zero weight.
pub fn weighted_vote(aligned: &Ensemble, omega: &[f64], tie: TiePolicy) -> Result<ConsensusResult> {
    weighted_vote_with(aligned, omega, tie, Parallelism::default())
}

pub fn weighted_vote_with(
    aligned: &Ensemble,
    omega: &[f64],
    tie: TiePolicy,
    mode: Parallelism,
) -> Result<ConsensusResult> {
    if omega.len() != aligned.m() {
        return Err(Error::LengthMismatch {
            expected: aligned.m(),
            found: omega.len(),
        });
    }
    if let Some(&w) = omega.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(Error::NegativeWeight(w));
    }
    let total: f64 = omega.iter().sum();
    if !(total > 0.0) {
        return Err(Error::AllZeroWeights);
    }
    // ties are judged relative to the total weight so scaling ω changes nothing
    let tol = 1e-12 * total;
    let voters: Vec<(&[Option<Label>], f64)> = aligned
        .partitions()
        .iter()
        .zip(omega)
        .filter(|(_, &w)| w > 0.0)
        .map(|(p, &w)| (p.labels(), w))
        .collect();
    let reference = aligned.reference().labels();

    let per_object = map_range(aligned.n(), mode, |i| {
        let mut votes: Vec<(Label, f64)> = voters
            .iter()
            .filter_map(|(labels, w)| labels[i].map(|l| (l, *w)))
            .collect();
        votes.sort_by_key(|v| v.0);
        let mut scores: Vec<(Label, f64)> = Vec::with_capacity(votes.len());
        for (l, w) in votes {
            match scores.last_mut() {
                Some((last, s)) if *last == l => *s += w,
                _ => scores.push((l, w)),
            }
        }
        decide(scores, reference[i], tie, tol)
    });

    let n = aligned.n();
    let mut out = ConsensusResult {
        labels: Vec::with_capacity(n),
        scores: Vec::with_capacity(n),
        margin: Vec::with_capacity(n),
        tie_flags: Vec::with_capacity(n),
        abstained: Vec::new(),
    };
    for (i, d) in per_object.into_iter().enumerate() {
        if d.scores.is_empty() {
            out.abstained.push(i);
        }
        out.labels.push(d.label);
        out.scores.push(d.scores);
        out.margin.push(d.margin);
        out.tie_flags.push(d.tie);
    }
    Ok(out)
}

struct Decision {
    label: Option<Label>,
    scores: Vec<(Label, f64)>,
    margin: f64,
    tie: bool,
}

fn decide(scores: Vec<(Label, f64)>, reference: Option<Label>, tie: TiePolicy, tol: f64) -> Decision {
    let Some(best) = scores.iter().map(|s| s.1).reduce(f64::max) else {
        return Decision {
            label: None,
            scores,
            margin: 0.0,
            tie: false,
        };
    };
    let tied: Vec<Label> = scores
        .iter()
        .filter(|s| s.1 >= best - tol)
        .map(|s| s.0)
        .collect();
    let is_tie = tied.len() > 1;
    let margin = if is_tie {
        0.0
    } else {
        let second = scores
            .iter()
            .filter(|s| s.0 != tied[0])
            .map(|s| s.1)
            .fold(0.0, f64::max);
        best - second
    };
    let label = match tie {
        _ if !is_tie => Some(tied[0]),
        TiePolicy::Unresolved => None,
        TiePolicy::Lowest => Some(tied[0]),
        TiePolicy::Reference => Some(
            reference
                .filter(|r| tied.contains(r))
                .unwrap_or(tied[0]),
        ),
    };
    Decision {
        label,
        scores,
        margin,
        tie: is_tie,
    }
}

/// One partition's relabeling onto the reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentRecord {
    pub partition: usize,
    pub mapping: Vec<Label>,
    pub score: f64,
    /// Objects labeled in both this partition and the reference.
    pub n_effective: f64,
    /// Another optimal mapping exists; the reported one won the tie-break.
    pub alternative_optimum: bool,
}

/// Aligns every partition of `e` to its reference partition.
pub fn align_ensemble(e: &Ensemble, mode: Parallelism) -> Result<(Ensemble, Vec<AlignmentRecord>)> {
    let reference = e.reference();
    let results = map_slice(e.partitions(), mode, |j, p| -> Result<(Partition, AlignmentRecord)> {
        let table = contingency_table(p, reference)?;
        let map = optimal_alignment(&table);
        let aligned = apply_alignment(p, &map)?;
        let record = AlignmentRecord {
            partition: j,
            alternative_optimum: has_alternative_optimum(&table, &map),
            mapping: map.mapping,
            score: map.score,
            n_effective: table.n_effective(),
        };
        Ok((aligned, record))
    });
    let (partitions, records): (Vec<_>, Vec<_>) =
        results.into_iter().collect::<Result<Vec<_>>>()?.into_iter().unzip();
    let aligned = Ensemble::new(partitions, e.weights().to_vec(), e.reference_index())?;
    Ok((aligned, records))
}

/// A base partition as recorded in the audit trail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionRecord {
    pub provenance: Provenance,
    pub k: usize,
    pub labels: Vec<Option<Label>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tokens: Option<Vec<String>>,
}

impl From<&Partition> for PartitionRecord {
    fn from(p: &Partition) -> Self {
        Self {
            provenance: p.provenance().clone(),
            k: p.k(),
            labels: p.labels().to_vec(),
            tokens: p.tokens().map(<[String]>::to_vec),
        }
    }
}

/// Every intermediate of a consensus run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Audit {
    pub base_partitions: Vec<PartitionRecord>,
    pub reference_index: usize,
    pub weights: Vec<PartitionWeights>,
    pub omega: Vec<f64>,
    pub normalize: bool,
    pub tie_policy: TiePolicy,
    pub alignments: Vec<AlignmentRecord>,
    pub consensus: ConsensusResult,
}

/// Output of [`scev_run`] / [`vote_ensemble`].
#[derive(Debug, Clone)]
pub struct ScevOutput {
    pub ensemble: Ensemble,
    pub aligned: Ensemble,
    pub result: ConsensusResult,
    pub audit: Audit,
}

/// Align → combine weights → vote, for an ensemble already in hand.
pub fn vote_ensemble(
    ensemble: Ensemble,
    tie: TiePolicy,
    normalize: bool,
    mode: Parallelism,
) -> Result<ScevOutput> {
    let (aligned, alignments) =
        align_ensemble(&ensemble, mode).map_err(|e| e.in_stage(Stage::Alignment))?;
    let omega = combine_weights(ensemble.weights(), normalize).map_err(|e| e.in_stage(Stage::Weights))?;
    let result =
        weighted_vote_with(&aligned, &omega, tie, mode).map_err(|e| e.in_stage(Stage::Voting))?;
    let audit = Audit {
        base_partitions: ensemble.partitions().iter().map(PartitionRecord::from).collect(),
        reference_index: ensemble.reference_index(),
        weights: ensemble.weights().to_vec(),
        omega,
        normalize,
        tie_policy: tie,
        alignments,
        consensus: result.clone(),
    };
    Ok(ScevOutput {
        ensemble,
        aligned,
        result,
        audit,
    })
}

/// The full pipeline: generate the ensemble, then align and vote.
pub fn scev_run(
    data: &Dataset,
    spec: &EnsembleSpec,
    supervision: &ValidatedSupervision,
    tie: TiePolicy,
    normalize: bool,
) -> Result<ScevOutput> {
    scev_run_with(data, spec, supervision, tie, normalize, Parallelism::default())
}

pub fn scev_run_with(
    data: &Dataset,
    spec: &EnsembleSpec,
    supervision: &ValidatedSupervision,
    tie: TiePolicy,
    normalize: bool,
    mode: Parallelism,
) -> Result<ScevOutput> {
    let ensemble = generate_ensemble_with(data, spec, supervision, mode).map_err(|e| {
        let stage = match e {
            Error::IndexOutOfRange { .. } => Stage::Reference,
            _ => Stage::Ensemble,
        };
        e.in_stage(stage)
    })?;
    vote_ensemble(ensemble, tie, normalize, mode)
}
