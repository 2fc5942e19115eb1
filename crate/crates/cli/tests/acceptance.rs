//! Acceptance criteria. Run with
//! `cargo test -p scev-cli --test acceptance -- --nocapture` to see one
//! PASS/FAIL line per criterion.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use num_rational::Rational64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use scev::alignment::{brute_force_alignment, contingency_table, optimal_alignment, ContingencyTable};
use scev::consensus::weighted_vote_with;
use scev::io::{load_partitions, make_gaussians, render_consensus};
use scev::metrics::agreement;
use scev::{
    adjusted_rand_index, constrained_kmeans, constraint_violation_count, cop_kmeans,
    normalized_mutual_information, purity, seeded_kmeans, vote_ensemble, ClustererConfig, Ensemble,
    Error, Label, Parallelism, Partition, TiePolicy, ValidatedSupervision,
};

// criteria run one at a time so the timing checks are not disturbed
static SERIAL: Mutex<()> = Mutex::new(());

fn report(id: &str, title: &str, checks: &[(String, bool)]) {
    let pass = checks.iter().all(|c| c.1);
    println!("{id} {}: {title}", if pass { "PASS" } else { "FAIL" });
    for (what, ok) in checks {
        println!("    [{}] {what}", if *ok { "ok" } else { "FAILED" });
    }
    assert!(pass, "{id} failed");
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

#[test]
fn ac1_worked_example() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let mut checks = Vec::new();
    let t = load_partitions(&fixture("relabel_vote.csv")).unwrap();
    let c1 = &t.partitions[0];
    let map_tokens = |j: usize| {
        let p = &t.partitions[j];
        let m = optimal_alignment(&contingency_table(p, c1).unwrap());
        let pairs: Vec<String> = m
            .mapping
            .iter()
            .enumerate()
            .map(|(a, &b)| format!("{}→{}", p.token(a), c1.token(b)))
            .collect();
        (pairs.join(","), m.score)
    };
    let (c2, _) = map_tokens(1);
    checks.push((format!("C2 mapping {c2} == A→1,B→3,C→2"), c2 == "A→1,B→3,C→2"));
    let (c3, s3) = map_tokens(2);
    checks.push((
        format!("C3 mapping {c3} (score {s3}) == α→1,β→3,γ→2 (score 3)"),
        c3 == "α→1,β→3,γ→2" && s3 == 3.0,
    ));
    let (c4, _) = map_tokens(3);
    checks.push((format!("C4 mapping {c4} == Y→1,Z→2"), c4 == "Y→1,Z→2"));

    let e = Ensemble::unweighted(t.partitions.clone(), 0).unwrap();
    let out = vote_ensemble(e, TiePolicy::Unresolved, false, Parallelism::default()).unwrap();
    let text = render_consensus(&t.ids, &out.result, c1);
    let fc: Vec<&str> = text.lines().skip(1).map(|l| l.rsplit(',').next().unwrap()).collect();
    checks.push((format!("library consensus {fc:?} == 1,1,3,?,2,2,3"), fc == ["1", "1", "3", "?", "2", "2", "3"]));
    checks.push(("x4 flagged as a tie".into(), out.result.tie_flags == [false, false, false, true, false, false, false]));

    let dir = tempfile::tempdir().unwrap();
    let labels = dir.path().join("labels.csv");
    let report_path = dir.path().join("report.json");
    let status = Command::new(env!("CARGO_BIN_EXE_scev"))
        .args(["consensus", "--tie-policy", "unresolved", "--partitions"])
        .arg(fixture("relabel_vote.csv"))
        .arg("--out")
        .arg(&labels)
        .arg("--report")
        .arg(&report_path)
        .status()
        .unwrap();
    let cli_fc: Vec<String> = fs::read_to_string(&labels)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().to_string())
        .collect();
    checks.push((
        format!("CLI consensus {cli_fc:?} == 1,1,3,?,2,2,3"),
        status.success() && cli_fc == ["1", "1", "3", "?", "2", "2", "3"],
    ));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report_path).unwrap()).unwrap();
    checks.push((
        "report marks and explains the tie-broken C3 alignment".into(),
        json["alignments"][2]["alternative_optimum"] == true
            && json["alignments"][2]["note"].is_string()
            && json["alignments"][1]["note"].is_null(),
    ));
    println!(
        "    note: the printed C3 relabeling sends β and γ both to 2, which is not a permutation; \
         the injective optimum above is used instead and the report flags the tie."
    );
    report("AC1", "worked example reproduces the FC column", &checks);
}


fn random_table(rng: &mut ChaCha8Rng) -> ContingencyTable {
    let rows = rng.gen_range(2..=6);
    let cols = rng.gen_range(2..=6);
    ContingencyTable::from_rows(
        (0..rows)
            .map(|_| (0..cols).map(|_| rng.gen_range(0..=20) as f64).collect())
            .collect(),
    )
    .unwrap()
}

#[test]
fn ac2_alignment_oracle() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut score_eq, mut map_eq) = (0, 0);
    for _ in 0..500 {
        let t = random_table(&mut rng);
        let fast = optimal_alignment(&t);
        let slow = brute_force_alignment(&t).unwrap();
        score_eq += usize::from(fast.score == slow.score);
        map_eq += usize::from(fast.mapping == slow.mapping);
    }
    report(
        "AC2",
        "optimal alignment equals brute force on 500 random tables",
        &[
            (format!("score equal in {score_eq}/500"), score_eq == 500),
            (format!("mapping equal in {map_eq}/500"), map_eq == 500),
        ],
    );
}

fn random_ensemble(rng: &mut ChaCha8Rng) -> (Ensemble, Vec<f64>) {
    let n = rng.gen_range(1..=50);
    let m = rng.gen_range(1..=6);
    let k = rng.gen_range(1..=6);
    let mut parts = Vec::with_capacity(m);
    while parts.len() < m {
        let labels: Vec<Option<Label>> = (0..n)
            .map(|_| (!rng.gen_bool(0.15)).then(|| rng.gen_range(0..k)))
            .collect();
        if let Ok(p) = Partition::new(labels, k, Default::default()) {
            parts.push(p);
        }
    }
    // inject unanimous objects
    for i in 0..n {
        if rng.gen_bool(0.2) {
            let l = rng.gen_range(0..k);
            let labels: Vec<Vec<Option<Label>>> = parts
                .iter()
                .map(|p| {
                    let mut v = p.labels().to_vec();
                    if v[i].is_some() {
                        v[i] = Some(l);
                    }
                    v
                })
                .collect();
            parts = labels
                .into_iter()
                .map(|v| Partition::new(v, k, Default::default()).unwrap())
                .collect();
        }
    }
    let reference = rng.gen_range(0..m);
    let omega: Vec<f64> = if rng.gen_bool(0.5) {
        // small integers make exact ties common
        (0..m).map(|_| rng.gen_range(1..=3) as f64).collect()
    } else {
        (0..m).map(|_| rng.gen_range(0.05..5.0)).collect()
    };
    (Ensemble::unweighted(parts, reference).unwrap(), omega)
}

#[test]
fn ac3_voting_invariants() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let mut rng = ChaCha8Rng::seed_from_u64(3003);
    let (mut unanimity_bad, mut dominance_bad, mut scale_bad) = (0, 0, 0);
    let (mut unanimous_objects, mut dominated_objects) = (0, 0);
    let trials = 1000;
    for _ in 0..trials {
        let (e, omega) = random_ensemble(&mut rng);
        let base = weighted_vote_with(&e, &omega, TiePolicy::Unresolved, Parallelism::Sequential).unwrap();
        for i in 0..e.n() {
            let votes: Vec<Label> = e.partitions().iter().filter_map(|p| p.labels()[i]).collect();
            if let Some(&first) = votes.first() {
                if votes.iter().all(|&v| v == first) {
                    unanimous_objects += 1;
                    if base.labels[i] != Some(first) || base.tie_flags[i] {
                        unanimity_bad += 1;
                    }
                }
            }
        }

        let j = rng.gen_range(0..e.m());
        let others: f64 = omega.iter().enumerate().filter(|(x, _)| *x != j).map(|(_, w)| w).sum();
        let mut dominant = omega.clone();
        dominant[j] = others + rng.gen_range(0.01..3.0);
        let dom = weighted_vote_with(&e, &dominant, TiePolicy::Unresolved, Parallelism::Sequential).unwrap();
        for i in 0..e.n() {
            if let Some(l) = e.partitions()[j].labels()[i] {
                dominated_objects += 1;
                if dom.labels[i] != Some(l) {
                    dominance_bad += 1;
                }
            }
        }

        for c in [0.5, 3.0, 10.0] {
            let scaled: Vec<f64> = omega.iter().map(|w| w * c).collect();
            let r = weighted_vote_with(&e, &scaled, TiePolicy::Unresolved, Parallelism::Parallel).unwrap();
            if r.labels != base.labels || r.tie_flags != base.tie_flags {
                scale_bad += 1;
            }
        }
    }
    report(
        "AC3",
        "voting invariants over 1000 random ensembles (n ≤ 50, m ≤ 6)",
        &[
            (format!("unanimity: {unanimity_bad} counterexamples over {unanimous_objects} unanimous objects"), unanimity_bad == 0 && unanimous_objects > 0),
            (format!("dominance: {dominance_bad} counterexamples over {dominated_objects} objects"), dominance_bad == 0),
            (format!("scale invariance (c ∈ {{0.5, 3, 10}}): {scale_bad} counterexamples"), scale_bad == 0),
        ],
    );
}

#[test]
fn ac4_semi_supervised_clusterers() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let sigma = 0.5;
    // pairwise center distances 10 and 14.1, i.e. at least 20σ
    let centers = vec![vec![0.0, 0.0], vec![10.0, 0.0], vec![0.0, 10.0]];
    let (data, truth) = make_gaussians(50, &centers, sigma, 4242).unwrap();
    let n = data.n();
    let truth_of = |i: usize| truth.labels()[i].unwrap();
    let mut checks = Vec::new();

    // 10% of the objects, spread over the three classes
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let mut seeded_ids: Vec<usize> = Vec::new();
    for class in 0..3 {
        let mut members: Vec<usize> = (0..n).filter(|&i| truth_of(i) == class).collect();
        members.shuffle(&mut rng);
        seeded_ids.extend(&members[..5]);
    }
    let seeds: BTreeMap<usize, Label> = seeded_ids.iter().map(|&i| (i, truth_of(i))).collect();
    let cfg = ClustererConfig::new(3).seed(7);
    let seeded = seeded_kmeans(&data, &seeds, &cfg).unwrap();
    let ari = adjusted_rand_index(&seeded, &truth).unwrap();
    checks.push((format!("seeded k-means with {} seeds: ARI {ari:.4} ≥ 0.95", seeds.len()), ari >= 0.95));

    // pin seeds that disagree with geometry too, so pinning is actually exercised
    let mut adversarial = seeds.clone();
    for &i in seeded_ids.iter().take(3) {
        adversarial.insert(i, (truth_of(i) + 1) % 3);
    }
    let mut pinned_ok = true;
    for s in [&seeds, &adversarial] {
        let p = constrained_kmeans(&data, s, &cfg).unwrap();
        pinned_ok &= s.iter().all(|(&i, &c)| p.labels()[i] == Some(c));
    }
    checks.push(("constrained k-means pins 100% of seeded objects".into(), pinned_ok));

    let (mut ok_runs, mut violations, mut infeasible) = (0, 0, 0);
    for trial in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + trial);
        let (mut ml, mut cl) = (Vec::new(), Vec::new());
        while ml.len() < 10 || cl.len() < 10 {
            let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
            if a == b {
                continue;
            }
            if truth_of(a) == truth_of(b) {
                if ml.len() < 10 {
                    ml.push((a, b));
                }
            } else if cl.len() < 10 {
                cl.push((a, b));
            }
        }
        let sup = ValidatedSupervision::from_indices(n, BTreeMap::new(), &ml, &cl).unwrap();
        match cop_kmeans(&data, &sup, &ClustererConfig::new(3).seed(trial)) {
            Ok(p) => {
                ok_runs += 1;
                violations += constraint_violation_count(&p, &sup);
            }
            Err(Error::InfeasibleAssignment { .. }) => infeasible += 1,
            Err(e) => panic!("unexpected COP error: {e}"),
        }
    }
    checks.push((
        format!("COP-KMeans on 100 feasible sets: {ok_runs} partitions, {violations} violations, {infeasible} infeasible"),
        ok_runs == 100 && violations == 0,
    ));

    let one_cl = ValidatedSupervision::from_indices(n, BTreeMap::new(), &[], &[(0, 1)]).unwrap();
    let k1 = cop_kmeans(&data, &one_cl, &ClustererConfig::new(1));
    checks.push((
        "COP-KMeans with k=1 and a cannot-link pair → InfeasibleAssignment".into(),
        matches!(k1, Err(Error::InfeasibleAssignment { .. })),
    ));
    report("AC4", "semi-supervised clusterers on separated Gaussians", &checks);
}

fn median(mut v: Vec<Duration>) -> Duration {
    v.sort();
    v[v.len() / 2]
}

fn consensus_time(n: usize, rng: &mut ChaCha8Rng) -> Duration {
    let (m, k) = (5, 5);
    let parts: Vec<Partition> = (0..m)
        .map(|_| Partition::from_dense(&(0..n).map(|_| rng.gen_range(0..k)).collect::<Vec<_>>()).unwrap())
        .collect();
    let e = Ensemble::unweighted(parts, 0).unwrap();
    let runs = (0..5)
        .map(|_| {
            let e = e.clone();
            let start = Instant::now();
            let out = vote_ensemble(e, TiePolicy::Lowest, false, Parallelism::Sequential).unwrap();
            let t = start.elapsed();
            assert_eq!(out.result.len(), n);
            t
        })
        .collect();
    median(runs)
}

fn alignment_time(k: usize, rng: &mut ChaCha8Rng) -> Duration {
    let tables: Vec<ContingencyTable> = (0..20)
        .map(|_| {
            ContingencyTable::from_rows(
                (0..k).map(|_| (0..k).map(|_| rng.gen_range(0..=50) as f64).collect()).collect(),
            )
            .unwrap()
        })
        .collect();
    let runs = (0..7)
        .map(|_| {
            let start = Instant::now();
            for t in &tables {
                std::hint::black_box(optimal_alignment(t));
            }
            start.elapsed()
        })
        .collect();
    median(runs)
}

#[test]
fn ac5_complexity() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    consensus_time(10_000, &mut rng); // warm-up
    let small = consensus_time(10_000, &mut rng);
    let large = consensus_time(100_000, &mut rng);
    let ratio = large.as_secs_f64() / small.as_secs_f64();

    alignment_time(20, &mut rng); // warm-up
    let k20 = alignment_time(20, &mut rng);
    let k40 = alignment_time(40, &mut rng);
    let kratio = k40.as_secs_f64() / k20.as_secs_f64();
    report(
        "AC5",
        "consensus is linear in n; alignment is at most cubic in k",
        &[
            (
                format!("consensus n=100k / n=10k = {ratio:.2} ({large:?} / {small:?}), required in [5, 20]"),
                (5.0..=20.0).contains(&ratio),
            ),
            (
                format!("alignment k=40 / k=20 = {kratio:.2} ({k40:?} / {k20:?}), required ≤ 4·2³ = 32"),
                kratio <= 32.0,
            ),
        ],
    );
}

/// Pair-counting ARI in exact rational arithmetic; `None` when the
/// chance-corrected index is undefined.
fn rational_ari(p: &[usize], q: &[usize]) -> Option<Rational64> {
    let n = p.len();
    let (mut a, mut b, mut c, mut d) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            match (p[i] == p[j], q[i] == q[j]) {
                (true, true) => a += 1,
                (true, false) => b += 1,
                (false, true) => c += 1,
                (false, false) => d += 1,
            }
        }
    }
    let denom = (a + b) * (b + d) + (a + c) * (c + d);
    (denom != 0).then(|| Rational64::new(2 * (a * d - b * c), denom))
}

fn permuted(labels: &[usize], rng: &mut ChaCha8Rng) -> Vec<usize> {
    let k = labels.iter().max().unwrap() + 1;
    let mut perm: Vec<usize> = (0..k).collect();
    perm.shuffle(rng);
    labels.iter().map(|&l| perm[l]).collect()
}

#[test]
fn ac6_metrics() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let mut checks = Vec::new();
    let dense = |v: &[usize]| Partition::from_dense(v).unwrap();

    let p = dense(&[0, 1, 2, 0, 1, 2, 2]);
    checks.push(("ARI(p, p) = 1.0".into(), adjusted_rand_index(&p, &p).unwrap() == 1.0));

    let (x, y) = ([0, 0, 1, 1], [0, 1, 0, 1]);
    let oracle = rational_ari(&x, &y).unwrap();
    let got = adjusted_rand_index(&dense(&x), &dense(&y)).unwrap();
    let oracle_f = *oracle.numer() as f64 / *oracle.denom() as f64;
    checks.push((
        format!("ARI([0,0,1,1],[0,1,0,1]) = {got} equals the rational pair-counting oracle {oracle}"),
        got == oracle_f,
    ));
    checks.push((
        format!("ARI([0,0,1,1],[0,1,0,1]) = -1/3 as stated (oracle gives {oracle}; 1/3 is the unadjusted Rand index)"),
        oracle == Rational64::new(-1, 3) && got == -1.0 / 3.0,
    ));

    let blocks = dense(&[0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1]);
    let crossing = dense(&[0, 1, 2, 0, 1, 2, 0, 1, 2, 0, 1, 2]);
    let nmi = normalized_mutual_information(&blocks, &crossing).unwrap();
    checks.push((format!("NMI of independent crossing = {nmi:e} ≤ 1e-12"), nmi <= 1e-12));

    let mut rng = ChaCha8Rng::seed_from_u64(66);
    let mut bad = 0;
    for _ in 0..200 {
        let n = rng.gen_range(2..60);
        let a: Vec<usize> = (0..n).map(|_| rng.gen_range(0..5)).collect();
        let b: Vec<usize> = (0..n).map(|_| rng.gen_range(0..5)).collect();
        let (pa, pb) = (dense(&a), dense(&b));
        let (qa, qb) = (dense(&permuted(&a, &mut rng)), dense(&permuted(&b, &mut rng)));
        let close = |u: f64, v: f64| (u - v).abs() <= 1e-12;
        let same = close(adjusted_rand_index(&pa, &pb).unwrap(), adjusted_rand_index(&qa, &qb).unwrap())
            && close(normalized_mutual_information(&pa, &pb).unwrap(), normalized_mutual_information(&qa, &qb).unwrap())
            && close(purity(&pa, &pb).unwrap(), purity(&qa, &qb).unwrap())
            && close(agreement(&pa, &pb).unwrap(), agreement(&qa, &qb).unwrap());
        bad += usize::from(!same);
        // oracle cross-check on the same cases
        let ari = adjusted_rand_index(&pa, &pb).unwrap();
        if let Some(exact) = rational_ari(&a, &b) {
            let e = *exact.numer() as f64 / *exact.denom() as f64;
            bad += usize::from((ari - e).abs() > 1e-12);
        }
    }
    checks.push((format!("label-permutation invariance and oracle agreement: {bad} failures in 200 cases"), bad == 0));
    report("AC6", "cluster-validity metrics", &checks);
}

fn run_cli(args: &[&str], dir: &Path) {
    let out = Command::new(env!("CARGO_BIN_EXE_scev"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "scev {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn ac7_pipeline_determinism() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    run_cli(
        &["synth", "--n-per-cluster", "40", "--centers", "0,0;10,0;0,10", "--sigma", "0.7", "--seed", "9", "--out", "data.csv", "--truth", "truth.csv"],
        d,
    );
    fs::write(d.join("seeds.csv"), "x0,0\nx45,1\nx90,2\nx3,0\nx50,1\nx100,2\n").unwrap();
    fs::write(d.join("constraints.csv"), "x1,x2,ML\nx41,x42,ML\nx5,x85,CL\nx44,x110,CL\n").unwrap();
    fs::write(
        d.join("run.toml"),
        r#"
dataset = "data.csv"
seeds = "seeds.csv"
constraints = "constraints.csv"
truth = "truth.csv"
output_dir = "out"
tie_policy = "unresolved"
normalize = true

[reference]
policy = "random"
seed = 17

[[entries]]
algorithm = "seeded"
k = 3
rng_seed = 1

[[entries]]
algorithm = "constrained"
k = 3
rng_seed = 2
alpha = 2.0

[[entries]]
algorithm = "cop"
k = 3
rng_seed = 3
beta = 0.5

[[entries]]
algorithm = "spherical"
k = 3
rng_seed = 4

[[entries]]
algorithm = "kmeans"
k = 4
rng_seed = 5
"#,
    )
    .unwrap();
    let files = ["partitions.csv", "weights.csv", "consensus.csv", "report.json"];
    run_cli(&["pipeline", "--config", "run.toml"], d);
    let first: Vec<Vec<u8>> = files.iter().map(|f| fs::read(d.join("out").join(f)).unwrap()).collect();
    fs::remove_dir_all(d.join("out")).unwrap();
    run_cli(&["pipeline", "--config", "run.toml"], d);
    let checks: Vec<(String, bool)> = files
        .iter()
        .zip(&first)
        .map(|(f, a)| {
            let b = fs::read(d.join("out").join(f)).unwrap();
            (format!("{f}: {} bytes, identical across runs", a.len()), !a.is_empty() && *a == b)
        })
        .collect();
    report("AC7", "pipeline runs are byte-identical", &checks);
}
