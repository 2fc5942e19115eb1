//! Semi-supervised clustering ensembles combined by weighted voting.
//!
//! The pipeline generates base partitions with k-means variants (plain,
//! seeded, seed-constrained, COP, spherical), aligns each partition's labels
//! to a reference partition by maximum overlap, and votes per object with
//! per-partition weights ω = α·β.
//!
//! ```
//! use scev::{Ensemble, Partition, TiePolicy, vote_ensemble, Parallelism};
//!
//! let a = Partition::from_dense(&[0, 0, 1, 1]).unwrap();
//! let b = Partition::from_dense(&[1, 1, 0, 0]).unwrap();
//! let out = vote_ensemble(
//!     Ensemble::unweighted(vec![a, b], 0).unwrap(),
//!     TiePolicy::Unresolved,
//!     false,
//!     Parallelism::default(),
//! )
//! .unwrap();
//! assert_eq!(out.result.labels, vec![Some(0), Some(0), Some(1), Some(1)]);
//! ```

pub mod alignment;
pub mod clusterers;
pub mod consensus;
pub mod error;
pub mod io;
pub mod metrics;
pub mod model;
pub mod par;

pub use alignment::{
    apply_alignment, brute_force_alignment, contingency_table, optimal_alignment, ContingencyTable,
};
pub use clusterers::{
    constrained_kmeans, cop_kmeans, generate_ensemble, lloyd_kmeans, seeded_kmeans,
    spherical_kmeans, Algorithm, ClustererConfig, EmptyClusterPolicy, EnsembleEntry, EnsembleSpec,
};
pub use consensus::{
    combine_weights, scev_run, select_reference, vote_ensemble, weighted_vote, Audit,
    ReferencePolicy, ScevOutput, TiePolicy,
};
pub use error::{Error, Result, Stage};
pub use metrics::{
    adjusted_rand_index, constraint_violation_count, metric_report, normalized_mutual_information,
    purity, MetricReport,
};
pub use model::{
    canonicalize, must_link_closure, validate_supervision, AlignmentMap, ConsensusResult, Dataset,
    Ensemble, Label, Partition, PartitionWeights, Provenance, SupervisionBundle,
    ValidatedSupervision,
};
pub use par::Parallelism;
