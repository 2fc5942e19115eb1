//! JSON audit report written next to consensus outputs.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;

use scev::consensus::Audit;
use scev::io::consensus_token;
use scev::{Ensemble, MetricReport, PartitionWeights};

#[derive(Serialize)]
struct MappingPair {
    source: String,
    target: String,
}

#[derive(Serialize)]
struct AlignmentEntry {
    partition: usize,
    name: String,
    mapping: Vec<MappingPair>,
    score: f64,
    n_effective: f64,
    alternative_optimum: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    note: Option<String>,
}

#[derive(Serialize)]
struct PartitionEntry {
    name: String,
    algorithm: String,
    run: String,
    seed: Option<u64>,
    k: usize,
    /// Dense label i is written as `tokens[i]`.
    tokens: Vec<String>,
}

#[derive(Serialize)]
struct ObjectEntry {
    id: String,
    label: String,
    tie: bool,
    margin: f64,
    scores: BTreeMap<String, f64>,
}

#[derive(Serialize)]
struct Report {
    reference_index: usize,
    tie_policy: String,
    normalize: bool,
    partitions: Vec<PartitionEntry>,
    weights: Vec<PartitionWeights>,
    omega: Vec<f64>,
    alignments: Vec<AlignmentEntry>,
    objects: Vec<ObjectEntry>,
    unresolved: usize,
    ties: usize,
    abstained: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    metrics: Option<Metrics>,
}

#[derive(Serialize)]
pub struct Metrics {
    pub consensus: Option<MetricReport>,
    pub base_partitions: Vec<Option<MetricReport>>,
}

pub fn consensus_report(
    ids: &[String],
    names: &[String],
    ensemble: &Ensemble,
    audit: &Audit,
    metrics: Option<Metrics>,
) -> Value {
    let reference = ensemble.reference();
    let partitions = ensemble
        .partitions()
        .iter()
        .zip(names)
        .map(|(p, name)| PartitionEntry {
            name: name.clone(),
            algorithm: p.provenance().algorithm.clone(),
            run: p.provenance().run.clone(),
            seed: p.provenance().seed,
            k: p.k(),
            tokens: (0..p.k()).map(|l| p.token(l)).collect(),
        })
        .collect();
    let alignments = audit
        .alignments
        .iter()
        .map(|a| {
            let p = &ensemble.partitions()[a.partition];
            AlignmentEntry {
                partition: a.partition,
                name: names[a.partition].clone(),
                mapping: a
                    .mapping
                    .iter()
                    .enumerate()
                    .map(|(s, &t)| MappingPair {
                        source: p.token(s),
                        target: consensus_token(reference, t),
                    })
                    .collect(),
                score: a.score,
                n_effective: a.n_effective,
                alternative_optimum: a.alternative_optimum,
                note: a.alternative_optimum.then(|| {
                    format!(
                        "another one-to-one relabeling also reaches score {}; the lexicographically \
                         smallest mapping was kept, so a hand-derived relabeling may differ",
                        a.score
                    )
                }),
            }
        })
        .collect();
    let c = &audit.consensus;
    let objects = ids
        .iter()
        .enumerate()
        .map(|(i, id)| ObjectEntry {
            id: id.clone(),
            label: c.labels[i].map_or_else(|| "?".to_string(), |l| consensus_token(reference, l)),
            tie: c.tie_flags[i],
            margin: c.margin[i],
            scores: c.scores[i]
                .iter()
                .map(|&(l, s)| (consensus_token(reference, l), s))
                .collect(),
        })
        .collect();
    let report = Report {
        reference_index: audit.reference_index,
        tie_policy: audit.tie_policy.to_string(),
        normalize: audit.normalize,
        partitions,
        weights: audit.weights.clone(),
        omega: audit.omega.clone(),
        alignments,
        objects,
        unresolved: c.labels.iter().filter(|l| l.is_none()).count(),
        ties: c.tie_flags.iter().filter(|t| **t).count(),
        abstained: c.abstained.iter().map(|&i| ids[i].clone()).collect(),
        metrics,
    };
    serde_json::to_value(report).expect("report serializes")
}
