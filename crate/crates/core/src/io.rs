//! Comma-separated fixtures, synthetic data and run configuration.
//!
//! Every table puts the object id in the first column. Partition files hold
//! one partition per further column, `?` marking MISSING. Label tokens are
//! mapped to dense integers in sorted order (numerically when every token is
//! an integer), and the tokens are kept on the partition for output.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::clusterers::{ClustererConfig, EmptyClusterPolicy, EnsembleEntry, EnsembleSpec, Algorithm};
use crate::consensus::{ReferencePolicy, TiePolicy};
use crate::error::{Error, Result};
use crate::model::{
    validate_supervision, ConsensusResult, Dataset, Label, Partition, PartitionWeights,
    Provenance, SupervisionBundle, ValidatedSupervision, MISSING_TOKEN,
};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Reads a headerless-or-headed CSV into trimmed string records.
fn read_records(path: &Path) -> Result<Vec<Vec<String>>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_records(path, &text)
}

fn parse_records(path: &Path, text: &str) -> Result<Vec<Vec<String>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            row: row + 1,
            column: 0,
            message: e.to_string(),
        })?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        out.push(rec.iter().map(str::to_string).collect());
    }
    Ok(out)
}

/// Writes via a sibling temp file and rename, so readers never see a
/// truncated file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(dir))?;
    tmp.write_all(contents).map_err(io_err(path))?;
    tmp.as_file().sync_all().map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

fn csv_line(cells: impl IntoIterator<Item = impl AsRef<str>>) -> String {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(cells.into_iter().map(|c| c.as_ref().to_string()))
        .expect("in-memory csv write");
    String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("utf8 csv")
}

/// Loads `id,f1,f2,...` rows. A first row whose feature cells all fail to
/// parse as numbers is taken as a header.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let records = read_records(path)?;
    parse_dataset(path, records)
}

fn parse_dataset(path: &Path, mut records: Vec<Vec<String>>) -> Result<Dataset> {
    if records.is_empty() {
        return Err(Error::InvalidDataset(format!("{}: no rows", path.display())));
    }
    let width = records[0].len();
    if width < 2 {
        return Err(Error::InvalidDataset(format!(
            "{}: need an id column and at least one feature",
            path.display()
        )));
    }
    let header = records[0][1..].iter().all(|c| c.parse::<f64>().is_err());
    let (names, first_row) = if header {
        (Some(records.remove(0)[1..].to_vec()), 2)
    } else {
        (None, 1)
    };
    let mut ids = Vec::with_capacity(records.len());
    let mut rows = Vec::with_capacity(records.len());
    let mut seen = HashMap::new();
    for (r, rec) in records.into_iter().enumerate() {
        let row = r + first_row;
        if rec.len() != width {
            return Err(Error::RaggedRows {
                path: path.to_path_buf(),
                row,
                expected: width,
                found: rec.len(),
            });
        }
        let mut features = Vec::with_capacity(width - 1);
        for (c, cell) in rec[1..].iter().enumerate() {
            let x: f64 = cell.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                row,
                column: c + 2,
                message: format!("`{cell}` is not a number"),
            })?;
            if !x.is_finite() {
                return Err(Error::NonNumericFeature {
                    path: path.to_path_buf(),
                    row,
                    column: c + 2,
                });
            }
            features.push(x);
        }
        let id = rec.into_iter().next().expect("width >= 2");
        if seen.insert(id.clone(), row).is_some() {
            return Err(Error::DuplicateId(id));
        }
        ids.push(id);
        rows.push(features);
    }
    let data = Dataset::new(rows, ids)?;
    match names {
        Some(n) => data.with_feature_names(n),
        None => Ok(data),
    }
}

fn fmt_f64(x: f64) -> String {
    // shortest representation that round-trips
    format!("{x:?}")
}

pub fn save_dataset(path: &Path, data: &Dataset) -> Result<()> {
    let mut out = String::new();
    let names: Vec<String> = match data.feature_names() {
        Some(n) => n.to_vec(),
        None => (0..data.d()).map(|j| format!("f{j}")).collect(),
    };
    out.push_str(&csv_line(std::iter::once("id".to_string()).chain(names)));
    for (id, row) in data.object_ids().iter().zip(data.rows()) {
        out.push_str(&csv_line(
            std::iter::once(id.clone()).chain(row.iter().map(|&x| fmt_f64(x))),
        ));
    }
    write_atomic(path, out.as_bytes())
}

/// Partitions read from one file, with the object ids in row order.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionTable {
    pub ids: Vec<String>,
    pub names: Vec<String>,
    pub partitions: Vec<Partition>,
}

impl PartitionTable {
    /// Reorders rows to follow `ids`; both must hold the same id set.
    pub fn reorder_to(&self, ids: &[String]) -> Result<PartitionTable> {
        if ids.len() != self.ids.len() {
            return Err(Error::LengthMismatch {
                expected: ids.len(),
                found: self.ids.len(),
            });
        }
        let pos: HashMap<&str, usize> =
            self.ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let order = ids
            .iter()
            .map(|id| pos.get(id.as_str()).copied().ok_or_else(|| Error::UnknownObject(id.clone())))
            .collect::<Result<Vec<_>>>()?;
        let partitions = self
            .partitions
            .iter()
            .map(|p| {
                let labels = order.iter().map(|&i| p.labels()[i]).collect();
                let out = Partition::new(labels, p.k(), p.provenance().clone())?;
                match p.tokens() {
                    Some(t) => out.with_tokens(t.to_vec()),
                    None => Ok(out),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PartitionTable {
            ids: ids.to_vec(),
            names: self.names.clone(),
            partitions,
        })
    }
}

/// Dense integer order for label tokens: numeric when all tokens are
/// integers, otherwise by code point.
pub fn token_order<'a>(tokens: impl IntoIterator<Item = &'a str>) -> Vec<String> {
    let set: BTreeSet<&str> = tokens.into_iter().collect();
    let numeric: Option<Vec<(i64, &str)>> = set
        .iter()
        .map(|t| t.parse::<i64>().ok().map(|v| (v, *t)))
        .collect();
    match numeric {
        Some(mut v) => {
            v.sort();
            v.into_iter().map(|(_, t)| t.to_string()).collect()
        }
        None => set.into_iter().map(str::to_string).collect(),
    }
}

/// Loads `id,label,label,...`; a first row starting with `id` is a header.
pub fn load_partitions(path: &Path) -> Result<PartitionTable> {
    let records = read_records(path)?;
    parse_partitions(path, records)
}

pub fn parse_partitions_str(path: &Path, text: &str) -> Result<PartitionTable> {
    parse_partitions(path, parse_records(path, text)?)
}

fn parse_partitions(path: &Path, mut records: Vec<Vec<String>>) -> Result<PartitionTable> {
    if records.is_empty() {
        return Err(Error::InvalidPartition(format!("{}: no rows", path.display())));
    }
    let width = records[0].len();
    if width < 2 {
        return Err(Error::InvalidPartition(format!(
            "{}: need an id column and at least one partition column",
            path.display()
        )));
    }
    let header = records[0][0].eq_ignore_ascii_case("id");
    let (names, first_row) = if header {
        (records.remove(0)[1..].to_vec(), 2)
    } else {
        ((1..width).map(|j| format!("p{}", j - 1)).collect(), 1)
    };
    for (r, rec) in records.iter().enumerate() {
        if rec.len() != width {
            return Err(Error::RaggedRows {
                path: path.to_path_buf(),
                row: r + first_row,
                expected: width,
                found: rec.len(),
            });
        }
    }
    let mut seen = BTreeSet::new();
    let ids: Vec<String> = records.iter().map(|r| r[0].clone()).collect();
    for id in &ids {
        if !seen.insert(id.as_str()) {
            return Err(Error::DuplicateId(id.clone()));
        }
    }
    let mut partitions = Vec::with_capacity(width - 1);
    for col in 1..width {
        let cells: Vec<&str> = records.iter().map(|r| r[col].as_str()).collect();
        let tokens = token_order(cells.iter().copied().filter(|c| *c != MISSING_TOKEN));
        if tokens.is_empty() {
            return Err(Error::EmptyColumn {
                path: path.to_path_buf(),
                column: col + 1,
            });
        }
        let index: HashMap<&str, Label> =
            tokens.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
        let labels = cells
            .iter()
            .map(|c| (*c != MISSING_TOKEN).then(|| index[c]))
            .collect();
        let prov = Provenance::new("file", names[col - 1].clone(), None);
        partitions.push(Partition::new(labels, tokens.len(), prov)?.with_tokens(tokens)?);
    }
    Ok(PartitionTable {
        ids,
        names,
        partitions,
    })
}

/// Writes partitions in the same layout [`load_partitions`] reads.
pub fn save_partitions(path: &Path, ids: &[String], names: &[String], partitions: &[Partition]) -> Result<()> {
    write_atomic(path, render_partitions(ids, names, partitions)?.as_bytes())
}

pub fn render_partitions(ids: &[String], names: &[String], partitions: &[Partition]) -> Result<String> {
    if names.len() != partitions.len() {
        return Err(Error::LengthMismatch {
            expected: partitions.len(),
            found: names.len(),
        });
    }
    if let Some(p) = partitions.iter().find(|p| p.len() != ids.len()) {
        return Err(Error::LengthMismatch {
            expected: ids.len(),
            found: p.len(),
        });
    }
    let mut out = csv_line(std::iter::once("id").chain(names.iter().map(String::as_str)));
    for (i, id) in ids.iter().enumerate() {
        out.push_str(&csv_line(
            std::iter::once(id.clone()).chain(partitions.iter().map(|p| p.token_at(i))),
        ));
    }
    Ok(out)
}

/// Token for a consensus label: the reference's own token inside its label
/// space, `new<label>` for fresh labels when the reference carries tokens.
pub fn consensus_token(reference: &Partition, label: Label) -> String {
    match reference.tokens() {
        Some(_) if label >= reference.k() => format!("new{label}"),
        _ => reference.token(label),
    }
}

/// Consensus labels as an `id,consensus` table; UNRESOLVED objects get `?`.
pub fn render_consensus(ids: &[String], result: &ConsensusResult, reference: &Partition) -> String {
    let mut out = csv_line(["id", "consensus"]);
    for (id, l) in ids.iter().zip(&result.labels) {
        let tok = l.map_or_else(|| MISSING_TOKEN.to_string(), |l| consensus_token(reference, l));
        out.push_str(&csv_line([id.as_str(), tok.as_str()]));
    }
    out
}

/// Seeds (`id,class`) and constraints (`id,id,ML|CL`), validated against `data`.
pub fn load_supervision(
    seeds: Option<&Path>,
    constraints: Option<&Path>,
    data: &Dataset,
) -> Result<ValidatedSupervision> {
    let bundle = read_supervision(seeds, constraints)?;
    validate_supervision(&bundle, data)
}

pub fn read_supervision(seeds: Option<&Path>, constraints: Option<&Path>) -> Result<SupervisionBundle> {
    let mut bundle = SupervisionBundle::new();
    if let Some(path) = seeds {
        for (r, rec) in read_records(path)?.into_iter().enumerate() {
            let parse_err = |column, message: String| Error::Parse {
                path: path.to_path_buf(),
                row: r + 1,
                column,
                message,
            };
            if rec.len() != 2 {
                return Err(parse_err(0, format!("expected `object_id,class`, got {} fields", rec.len())));
            }
            let class: Label = rec[1]
                .parse()
                .map_err(|_| parse_err(2, format!("`{}` is not a class index", rec[1])))?;
            bundle.seeds.insert(rec[0].clone(), class);
        }
    }
    if let Some(path) = constraints {
        for (r, rec) in read_records(path)?.into_iter().enumerate() {
            if rec.len() != 3 {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    row: r + 1,
                    column: 0,
                    message: format!("expected `id,id,ML|CL`, got {} fields", rec.len()),
                });
            }
            bundle = match rec[2].to_ascii_uppercase().as_str() {
                "ML" => bundle.must_link(rec[0].clone(), rec[1].clone()),
                "CL" => bundle.cannot_link(rec[0].clone(), rec[1].clone()),
                other => {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        row: r + 1,
                        column: 3,
                        message: format!("constraint kind `{other}` is neither ML nor CL"),
                    })
                }
            };
        }
    }
    Ok(bundle)
}

pub fn render_supervision_constraints(bundle: &SupervisionBundle) -> String {
    let mut out = String::new();
    for (a, b) in &bundle.must_link {
        out.push_str(&csv_line([a.as_str(), b.as_str(), "ML"]));
    }
    for (a, b) in &bundle.cannot_link {
        out.push_str(&csv_line([a.as_str(), b.as_str(), "CL"]));
    }
    out
}

/// Reads `partition_index,alpha,beta` lines for an ensemble of `m`
/// partitions; unlisted partitions default to α = β = 1.
pub fn load_weights(path: &Path, m: usize) -> Result<Vec<PartitionWeights>> {
    let mut weights = vec![PartitionWeights::default(); m];
    for (r, rec) in read_records(path)?.into_iter().enumerate() {
        let err = |column, message: String| Error::Parse {
            path: path.to_path_buf(),
            row: r + 1,
            column,
            message,
        };
        if rec.len() != 3 {
            return Err(err(0, format!("expected `index,alpha,beta`, got {} fields", rec.len())));
        }
        // a header line is tolerated
        if r == 0 && rec[0].parse::<usize>().is_err() {
            continue;
        }
        let index: usize = rec[0]
            .parse()
            .map_err(|_| err(1, format!("`{}` is not a partition index", rec[0])))?;
        if index >= m {
            return Err(Error::IndexOutOfRange { index, len: m });
        }
        let num = |c: usize| -> Result<f64> {
            let x: f64 = rec[c]
                .parse()
                .map_err(|_| err(c + 1, format!("`{}` is not a number", rec[c])))?;
            if x.is_finite() && x >= 0.0 {
                Ok(x)
            } else {
                Err(Error::NegativeWeight(x))
            }
        };
        weights[index] = PartitionWeights::new(num(1)?, num(2)?);
    }
    Ok(weights)
}

pub fn render_weights(weights: &[PartitionWeights]) -> String {
    let mut out = csv_line(["partition_index", "alpha", "beta"]);
    for (j, w) in weights.iter().enumerate() {
        out.push_str(&csv_line([j.to_string(), fmt_f64(w.alpha), fmt_f64(w.beta)]));
    }
    out
}

/// Isotropic Gaussian blobs around `centers`, `n_per_cluster` points each,
/// in cluster order. Returns the generating labels as the truth partition.
pub fn make_gaussians(
    n_per_cluster: usize,
    centers: &[Vec<f64>],
    sigma: f64,
    rng_seed: u64,
) -> Result<(Dataset, Partition)> {
    if centers.is_empty() || n_per_cluster == 0 {
        return Err(Error::InvalidConfig("need at least one center and one point".into()));
    }
    if !(sigma >= 0.0) {
        return Err(Error::InvalidConfig(format!("sigma must be >= 0, got {sigma}")));
    }
    let normal = Normal::new(0.0, sigma)
        .map_err(|_| Error::InvalidConfig(format!("sigma must be finite and >= 0, got {sigma}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut rows = Vec::with_capacity(n_per_cluster * centers.len());
    let mut truth = Vec::with_capacity(rows.capacity());
    for (c, center) in centers.iter().enumerate() {
        for _ in 0..n_per_cluster {
            rows.push(center.iter().map(|&x| x + normal.sample(&mut rng)).collect());
            truth.push(Some(c));
        }
    }
    let ids = (0..rows.len()).map(|i| format!("x{i}")).collect();
    let data = Dataset::new(rows, ids)?;
    let truth = Partition::new(truth, centers.len(), Provenance::new("truth", "make_gaussians", Some(rng_seed)))?;
    Ok((data, truth))
}

/// One `[[entries]]` table of a run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntryConfig {
    pub algorithm: Algorithm,
    pub k: usize,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default = "one")]
    pub alpha: f64,
    #[serde(default = "one")]
    pub beta: f64,
    #[serde(default)]
    pub empty_cluster_policy: EmptyClusterPolicy,
}

fn default_max_iters() -> usize {
    100
}

fn default_tol() -> f64 {
    1e-6
}

fn one() -> f64 {
    1.0
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Pipeline configuration read from TOML. Relative paths resolve against
/// the directory holding the configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: PathBuf,
    #[serde(default)]
    pub seeds: Option<PathBuf>,
    #[serde(default)]
    pub constraints: Option<PathBuf>,
    #[serde(default)]
    pub truth: Option<PathBuf>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub reference: ReferencePolicy,
    #[serde(default)]
    pub tie_policy: TiePolicy,
    #[serde(default)]
    pub normalize: bool,
    pub entries: Vec<EntryConfig>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            Error::InvalidConfig(m) => Error::InvalidConfig(format!("{}: {m}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut cfg.dataset);
        resolve(&mut cfg.output_dir);
        for p in [&mut cfg.seeds, &mut cfg.constraints, &mut cfg.truth].into_iter().flatten() {
            resolve(p);
        }
        Ok(cfg)
    }

    pub fn ensemble_spec(&self) -> Result<EnsembleSpec> {
        let entries = self
            .entries
            .iter()
            .map(|e| {
                if !(e.alpha.is_finite() && e.alpha >= 0.0) {
                    return Err(Error::NegativeWeight(e.alpha));
                }
                if !(e.beta.is_finite() && e.beta >= 0.0) {
                    return Err(Error::NegativeWeight(e.beta));
                }
                Ok(EnsembleEntry {
                    algorithm: e.algorithm,
                    config: ClustererConfig {
                        k: e.k,
                        max_iters: e.max_iters,
                        tol: e.tol,
                        rng_seed: e.rng_seed,
                        empty_cluster_policy: e.empty_cluster_policy,
                    },
                    weights: PartitionWeights::new(e.alpha, e.beta),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let spec = EnsembleSpec {
            entries,
            reference_policy: self.reference,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const TABLE2: &str = "\
x1,1,A,α,Z
x2,1,A,β,Y
x3,3,B,β,?
x4,2,C,α,Y
x5,2,B,γ,Z
x6,3,C,?,Z
x7,3,B,γ,?
";

    fn path() -> PathBuf {
        PathBuf::from("mem.csv")
    }

    #[test]
    fn seven_object_example_ingests() {
        let t = parse_partitions_str(&path(), TABLE2).unwrap();
        assert_eq!(t.partitions.len(), 4);
        assert_eq!(t.ids.len(), 7);
        let missing: Vec<(usize, usize)> = t
            .partitions
            .iter()
            .enumerate()
            .flat_map(|(j, p)| p.labels().iter().enumerate().filter(|(_, l)| l.is_none()).map(move |(i, _)| (i, j)))
            .collect();
        // (object, partition): x3/C4, x6/C3, x7/C4
        assert_eq!(missing, vec![(5, 2), (2, 3), (6, 3)]);
        assert_eq!(t.partitions[0].tokens().unwrap(), ["1", "2", "3"]);
        assert_eq!(t.partitions[3].tokens().unwrap(), ["Y", "Z"]);
        assert_eq!(t.partitions[2].tokens().unwrap(), ["α", "β", "γ"]);
    }

    #[test]
    fn numeric_tokens_sort_numerically() {
        assert_eq!(token_order(["10", "9", "2"]), ["2", "9", "10"]);
        assert_eq!(token_order(["b", "10", "a"]), ["10", "a", "b"]);
    }

    #[test]
    fn partition_file_errors() {
        let single = parse_partitions_str(&path(), "a,1\nb,2\n").unwrap();
        assert_eq!(single.partitions.len(), 1);
        assert!(matches!(
            parse_partitions_str(&path(), "a,1,?\nb,2,?\n"),
            Err(Error::EmptyColumn { column: 3, .. })
        ));
        assert!(matches!(
            parse_partitions_str(&path(), "a,1,2\nb,2\n"),
            Err(Error::RaggedRows { row: 2, .. })
        ));
    }

    #[test]
    fn dataset_parsing() {
        let recs = |s: &str| parse_records(&path(), s).unwrap();
        let d = parse_dataset(&path(), recs("a,1,2\nb,3,4\n")).unwrap();
        assert_eq!((d.n(), d.d()), (2, 2));
        assert!(d.feature_names().is_none());
        let h = parse_dataset(&path(), recs("id,x,y\na,1,2\n")).unwrap();
        assert_eq!(h.feature_names().unwrap(), ["x", "y"]);
        assert!(matches!(
            parse_dataset(&path(), recs("a,1,2\na,3,4\n")),
            Err(Error::DuplicateId(id)) if id == "a"
        ));
        assert!(matches!(
            parse_dataset(&path(), recs("a,1,2\nb,3,oops\n")),
            Err(Error::Parse { row: 2, column: 3, .. })
        ));
        assert!(matches!(
            parse_dataset(&path(), recs("a,1,oops\nb,3,4\n")),
            Err(Error::Parse { row: 1, column: 3, .. })
        ));
        assert!(matches!(
            parse_dataset(&path(), recs("a,1,inf\n")),
            Err(Error::NonNumericFeature { .. })
        ));
    }

    #[test]
    fn gaussians() {
        let centers = vec![vec![0.0, 0.0], vec![10.0, 0.0], vec![0.0, 10.0]];
        let (d, truth) = make_gaussians(20, &centers, 0.0, 1).unwrap();
        assert_eq!(d.n(), 60);
        assert_eq!(truth.k(), 3);
        for (i, row) in d.rows().enumerate() {
            assert_eq!(row, centers[truth.labels()[i].unwrap()].as_slice());
        }
        let a = make_gaussians(5, &centers, 0.5, 7).unwrap();
        let b = make_gaussians(5, &centers, 0.5, 7).unwrap();
        assert_eq!(a, b);
        assert!(make_gaussians(5, &centers, -1.0, 7).is_err());
    }

    #[test]
    fn run_config_parses() {
        let cfg = RunConfig::from_toml(
            r#"
            dataset = "data.csv"
            tie_policy = "lowest"
            [reference]
            policy = "random"
            seed = 3
            [[entries]]
            algorithm = "seeded"
            k = 3
            alpha = 2.0
            [[entries]]
            algorithm = "cop"
            k = 3
            rng_seed = 9
            empty_cluster_policy = "drop"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.reference, ReferencePolicy::Random { seed: 3 });
        assert_eq!(cfg.tie_policy, TiePolicy::Lowest);
        let spec = cfg.ensemble_spec().unwrap();
        assert_eq!(spec.entries[0].weights, PartitionWeights::new(2.0, 1.0));
        assert_eq!(spec.entries[1].config.empty_cluster_policy, EmptyClusterPolicy::Drop);
        assert_eq!(spec.entries[1].config.max_iters, 100);
        assert!(RunConfig::from_toml("dataset = \"d\"\nentries = []\n").unwrap().ensemble_spec().is_err());
    }

    proptest! {
        #[test]
        fn partitions_round_trip(
            cols in prop::collection::vec(prop::collection::vec(prop::option::weighted(0.8, 0usize..6), 12), 1..4)
        ) {
            prop_assume!(cols.iter().all(|c| c.iter().any(Option::is_some)));
            let parts: Vec<Partition> = cols.iter().map(|c| Partition::from_labels(c.clone()).unwrap()).collect();
            let ids: Vec<String> = (0..12).map(|i| format!("o{i}")).collect();
            let names: Vec<String> = (0..parts.len()).map(|j| format!("c{j}")).collect();
            let text = render_partitions(&ids, &names, &parts).unwrap();
            let back = parse_partitions_str(&path(), &text).unwrap();
            prop_assert_eq!(&back.ids, &ids);
            prop_assert_eq!(&back.names, &names);
            for (orig, read) in parts.iter().zip(&back.partitions) {
                // tokens carry the original label values
                for i in 0..12 {
                    prop_assert_eq!(orig.token_at(i), read.token_at(i));
                }
            }
        }
    }
}
