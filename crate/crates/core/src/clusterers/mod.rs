//! Base partition generators and ensemble orchestration.
//!
//! Every variant runs the same Lloyd loop; they differ in initialization
//! (random rows vs. seed means), in the assignment rule (free, pinned seeds,
//! COP constraint checks) and in geometry (Euclidean vs. cosine).

mod engine;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::consensus::{select_reference, ReferencePolicy};
use crate::error::{Error, Result};
use crate::model::{
    canonicalize, Dataset, Ensemble, Label, Partition, PartitionWeights, Provenance,
    ValidatedSupervision,
};
use crate::par::{map_slice, Parallelism};
use engine::{Geometry, Points, Rule};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmptyClusterPolicy {
    /// Move an empty centroid onto the point farthest from its own centroid.
    #[default]
    ReseedFarthest,
    /// Remove the empty cluster, reducing k.
    Drop,
}

impl FromStr for EmptyClusterPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reseed-farthest" => Ok(Self::ReseedFarthest),
            "drop" => Ok(Self::Drop),
            other => Err(Error::InvalidConfig(format!(
                "unknown empty-cluster policy `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClustererConfig {
    pub k: usize,
    pub max_iters: usize,
    /// Stop once every centroid moves less than this.
    pub tol: f64,
    pub rng_seed: u64,
    pub empty_cluster_policy: EmptyClusterPolicy,
}

impl ClustererConfig {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            max_iters: 100,
            tol: 1e-6,
            rng_seed: 0,
            empty_cluster_policy: EmptyClusterPolicy::default(),
        }
    }

    pub fn seed(mut self, rng_seed: u64) -> Self {
        self.rng_seed = rng_seed;
        self
    }

    fn check(&self, n: usize) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be positive".into()));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::InvalidConfig("tol must be non-negative".into()));
        }
        if self.k > n {
            return Err(Error::DegenerateInput { k: self.k, n });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    KMeans,
    Seeded,
    Constrained,
    Cop,
    Spherical,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::KMeans,
        Algorithm::Seeded,
        Algorithm::Constrained,
        Algorithm::Cop,
        Algorithm::Spherical,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::KMeans => "kmeans",
            Algorithm::Seeded => "seeded",
            Algorithm::Constrained => "constrained",
            Algorithm::Cop => "cop",
            Algorithm::Spherical => "spherical",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown algorithm `{s}`")))
    }
}

/// Result of one clusterer run, with the per-iteration objective.
#[derive(Debug, Clone)]
pub struct Fit {
    pub partition: Partition,
    pub centroids: Vec<Vec<f64>>,
    pub iterations: usize,
    /// WCSS (Euclidean variants) or summed cosine similarity (spherical),
    /// recorded after each centroid update.
    pub objective: Vec<f64>,
}

fn points(data: &Dataset) -> Points<'_> {
    Points {
        data: data.features(),
        n: data.n(),
        d: data.d(),
    }
}

fn finish(run: engine::Run, algorithm: Algorithm, cfg: &ClustererConfig) -> Result<Fit> {
    let k = run.centroids.len();
    let labels = run.labels.into_iter().map(Some).collect();
    let partition = Partition::new(
        labels,
        k,
        Provenance::new(algorithm.name(), "", Some(cfg.rng_seed)),
    )?;
    Ok(Fit {
        partition,
        centroids: run.centroids,
        iterations: run.iterations,
        objective: run.objective,
    })
}

/// Plain Lloyd k-means, from `init_centroids` or k random distinct rows.
pub fn lloyd_kmeans(
    data: &Dataset,
    cfg: &ClustererConfig,
    init_centroids: Option<&[Vec<f64>]>,
) -> Result<Partition> {
    lloyd_kmeans_fit(data, cfg, init_centroids, Parallelism::default()).map(|f| f.partition)
}

pub fn lloyd_kmeans_fit(
    data: &Dataset,
    cfg: &ClustererConfig,
    init_centroids: Option<&[Vec<f64>]>,
    mode: Parallelism,
) -> Result<Fit> {
    cfg.check(data.n())?;
    let pts = points(data);
    let init = explicit_or_random(&pts, cfg, init_centroids)?;
    let run = engine::run(&pts, init, cfg, Geometry::Euclidean, Rule::Free, mode)?;
    finish(run, Algorithm::KMeans, cfg)
}

fn explicit_or_random(
    pts: &Points,
    cfg: &ClustererConfig,
    init: Option<&[Vec<f64>]>,
) -> Result<Vec<Vec<f64>>> {
    match init {
        Some(rows) => {
            if rows.len() != cfg.k {
                return Err(Error::LengthMismatch {
                    expected: cfg.k,
                    found: rows.len(),
                });
            }
            if let Some(r) = rows.iter().find(|r| r.len() != pts.d) {
                return Err(Error::LengthMismatch {
                    expected: pts.d,
                    found: r.len(),
                });
            }
            Ok(rows.to_vec())
        }
        None => Ok(engine::random_init(pts, cfg.k, cfg.rng_seed)),
    }
}

/// Seed-initialized k-means: centroids start at the per-class seed means,
/// then iterate freely (seeded objects may change cluster).
pub fn seeded_kmeans(
    data: &Dataset,
    seeds: &BTreeMap<usize, Label>,
    cfg: &ClustererConfig,
) -> Result<Partition> {
    seeded_fit(data, seeds, cfg, false, Parallelism::default()).map(|f| f.partition)
}

/// As [`seeded_kmeans`], but seeded objects stay in their seed class.
pub fn constrained_kmeans(
    data: &Dataset,
    seeds: &BTreeMap<usize, Label>,
    cfg: &ClustererConfig,
) -> Result<Partition> {
    seeded_fit(data, seeds, cfg, true, Parallelism::default()).map(|f| f.partition)
}

pub fn seeded_fit(
    data: &Dataset,
    seeds: &BTreeMap<usize, Label>,
    cfg: &ClustererConfig,
    pin: bool,
    mode: Parallelism,
) -> Result<Fit> {
    cfg.check(data.n())?;
    check_seed_ids(seeds, data.n())?;
    let pts = points(data);
    let init = engine::seed_init(&pts, seeds, cfg.k, Geometry::Euclidean)?;
    let (rule, algorithm) = if pin {
        (Rule::Pinned(pins(seeds, data.n())), Algorithm::Constrained)
    } else {
        (Rule::Free, Algorithm::Seeded)
    };
    let run = engine::run(&pts, init, cfg, Geometry::Euclidean, rule, mode)?;
    finish(run, algorithm, cfg)
}

fn check_seed_ids(seeds: &BTreeMap<usize, Label>, n: usize) -> Result<()> {
    match seeds.keys().find(|&&i| i >= n) {
        Some(i) => Err(Error::UnknownObject(i.to_string())),
        None => Ok(()),
    }
}

fn pins(seeds: &BTreeMap<usize, Label>, n: usize) -> Vec<Option<Label>> {
    let mut out = vec![None; n];
    for (&i, &c) in seeds {
        out[i] = Some(c);
    }
    out
}

/// COP-KMeans: every assignment honors the closed must-link groups and the
/// cannot-link pairs. Seeds in `constraints` are ignored.
pub fn cop_kmeans(
    data: &Dataset,
    constraints: &ValidatedSupervision,
    cfg: &ClustererConfig,
) -> Result<Partition> {
    cop_kmeans_fit(data, constraints, cfg, None).map(|f| f.partition)
}

pub fn cop_kmeans_fit(
    data: &Dataset,
    constraints: &ValidatedSupervision,
    cfg: &ClustererConfig,
    init_centroids: Option<&[Vec<f64>]>,
) -> Result<Fit> {
    cfg.check(data.n())?;
    if constraints.n() != data.n() {
        return Err(Error::LengthMismatch {
            expected: data.n(),
            found: constraints.n(),
        });
    }
    let pts = points(data);
    let init = explicit_or_random(&pts, cfg, init_centroids)?;
    let run = engine::run(
        &pts,
        init,
        cfg,
        Geometry::Euclidean,
        Rule::Cop(constraints),
        Parallelism::Sequential,
    )?;
    finish(run, Algorithm::Cop, cfg)
}

/// Spherical k-means on unit-normalized rows; seeds, when given, initialize
/// the centroids as normalized per-class means.
pub fn spherical_kmeans(
    data: &Dataset,
    cfg: &ClustererConfig,
    seeds: Option<&BTreeMap<usize, Label>>,
) -> Result<Partition> {
    spherical_fit(data, cfg, seeds, Parallelism::default()).map(|f| f.partition)
}

pub fn spherical_fit(
    data: &Dataset,
    cfg: &ClustererConfig,
    seeds: Option<&BTreeMap<usize, Label>>,
    mode: Parallelism,
) -> Result<Fit> {
    cfg.check(data.n())?;
    let mut unit = data.features().to_vec();
    for (row, chunk) in unit.chunks_exact_mut(data.d()).enumerate() {
        if !engine::normalize(chunk) {
            return Err(Error::ZeroVector { row });
        }
    }
    let pts = Points {
        data: &unit,
        n: data.n(),
        d: data.d(),
    };
    let init = match seeds {
        Some(seeds) => {
            check_seed_ids(seeds, data.n())?;
            engine::seed_init(&pts, seeds, cfg.k, Geometry::Cosine)?
        }
        None => engine::random_init(&pts, cfg.k, cfg.rng_seed),
    };
    let run = engine::run(&pts, init, cfg, Geometry::Cosine, Rule::Free, mode)?;
    finish(run, Algorithm::Spherical, cfg)
}

/// Runs `algorithm` with whatever supervision it consumes.
pub fn run_algorithm(
    data: &Dataset,
    algorithm: Algorithm,
    cfg: &ClustererConfig,
    supervision: &ValidatedSupervision,
    mode: Parallelism,
) -> Result<Fit> {
    let seeds = supervision.seeds();
    match algorithm {
        Algorithm::KMeans => lloyd_kmeans_fit(data, cfg, None, mode),
        Algorithm::Seeded => seeded_fit(data, seeds, cfg, false, mode),
        Algorithm::Constrained => seeded_fit(data, seeds, cfg, true, mode),
        Algorithm::Cop => cop_kmeans_fit(data, supervision, cfg, None),
        Algorithm::Spherical => {
            let seeds = (!seeds.is_empty()).then_some(seeds);
            spherical_fit(data, cfg, seeds, mode)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleEntry {
    pub algorithm: Algorithm,
    pub config: ClustererConfig,
    #[serde(flatten)]
    pub weights: PartitionWeights,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSpec {
    pub entries: Vec<EnsembleEntry>,
    pub reference_policy: ReferencePolicy,
}

impl EnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::InvalidConfig("ensemble spec has no entries".into()));
        }
        if let ReferencePolicy::UserIndex { index: i } = self.reference_policy {
            if i >= self.entries.len() {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    len: self.entries.len(),
                });
            }
        }
        Ok(())
    }
}

/// Runs every entry, canonicalizes the outputs and picks the reference.
pub fn generate_ensemble(
    data: &Dataset,
    spec: &EnsembleSpec,
    supervision: &ValidatedSupervision,
) -> Result<Ensemble> {
    generate_ensemble_with(data, spec, supervision, Parallelism::default())
}

/// Entries may run concurrently; results are collected in entry order so the
/// ensemble is identical to a sequential run.
pub fn generate_ensemble_with(
    data: &Dataset,
    spec: &EnsembleSpec,
    supervision: &ValidatedSupervision,
    mode: Parallelism,
) -> Result<Ensemble> {
    spec.validate()?;
    let results = map_slice(&spec.entries, mode, |index, entry| {
        run_algorithm(data, entry.algorithm, &entry.config, supervision, mode)
            .map(|fit| {
                let prov = Provenance::new(
                    entry.algorithm.name(),
                    format!("entry{index}"),
                    Some(entry.config.rng_seed),
                );
                canonicalize(&fit.partition.with_provenance(prov))
            })
            .map_err(|e| Error::Entry {
                index,
                algorithm: entry.algorithm.name().to_string(),
                source: Box::new(e),
            })
    });
    let partitions = results.into_iter().collect::<Result<Vec<_>>>()?;
    let reference = select_reference(partitions.len(), &spec.reference_policy)?;
    let weights = spec.entries.iter().map(|e| e.weights).collect();
    Ensemble::new(partitions, weights, reference)
}
