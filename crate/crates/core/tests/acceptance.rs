//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test --test acceptance`. Exit status is nonzero when any
//! criterion fails.

mod common;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use memprompt::backend::MockBackend;
use memprompt::correspondence::{match_constrained, MatchCandidate, MatchConfig};
use memprompt::eval::{
    ablate_bg, ablate_memory, compute_metrics, run_pipeline, Family, PipelineConfig, QueryFeatures,
};
use memprompt::memory_bank::{build_bank, load_bank, save_bank, Exemplar, Manifest, MANIFEST_FILE};
use memprompt::prompt::BgMode;
use memprompt::tensor_io::{
    decode_feature_grid, encode_feature_grid, read_feature_grid, write_feature_grid, BinaryMask,
    FeatureGrid, GridLayout,
};
use memprompt::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

const METRIC_TOL: f64 = 1e-9;
const METRIC_PAIRS: usize = 1000;
const METRIC_BUDGET: Duration = Duration::from_secs(10);
const RETRIEVAL_BANKS: usize = 200;
const RETRIEVAL_BUDGET: Duration = Duration::from_secs(5);
const MATCH_INSTANCES: usize = 100;
const MATCH_TAUS: [f32; 4] = [0.0, 0.5, 0.9, 0.99];
const MATCH_BUDGET: Duration = Duration::from_secs(10);
const E2E_SUPPORT: usize = 50;
const E2E_QUERIES: usize = 20;
const E2E_MIN_MIOU: f64 = 0.95;
const E2E_BUDGET: Duration = Duration::from_secs(60);
const ADVERSARIAL_SCENES: usize = 30;
const ADVERSARIAL_SUPPORT: usize = 20;
const POOL_SIZES: [usize; 3] = [1, 10, 20];
const POOL_SEEDS: u64 = 24;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, budget: Duration) -> Result<(), String> {
    ensure(elapsed < budget, || format!("took {elapsed:.2?}, budget {budget:?}"))
}

fn metric_oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x4d45_5452);
    let mut worst = 0.0f64;
    for case in 0..METRIC_PAIRS {
        let h = rng.random_range(16..=256);
        let w = rng.random_range(16..=256);
        let gt = random_mask(&mut rng, h, w);
        let pred = if rng.random_bool(0.1) {
            gt.clone()
        } else {
            random_mask(&mut rng, h, w)
        };
        let m = compute_metrics(&pred, &gt).map_err(|e| e.to_string())?;
        let got = [m.iou_fg, m.iou_bg, m.miou, m.mpa, m.acc];
        let want = metrics_oracle(&pred, &gt);
        for (g, o) in got.iter().zip(&want) {
            let d = (g - o).abs();
            worst = worst.max(d);
            ensure(d <= METRIC_TOL, || format!("pair {case} ({h}x{w}): {got:?} vs oracle {want:?}"))?;
        }
    }
    let elapsed = start.elapsed();
    within(elapsed, METRIC_BUDGET)?;
    Ok(format!("{METRIC_PAIRS} pairs, max |diff| {worst:.1e} <= {METRIC_TOL:e}, {elapsed:.2?}"))
}

fn unit_exemplar(id: String, v: Vec<f32>) -> Exemplar {
    let dim = v.len() as u32;
    Exemplar {
        id,
        image_path: PathBuf::from("none.png"),
        mask: BinaryMask::new(1, 1),
        features: FeatureGrid::new(GridLayout::native(1, 1, 1), dim, v).unwrap(),
    }
}

fn retrieval_exactness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5245_5452);
    let (mut near_tie_queries, mut planted_ties, mut queries) = (0usize, 0usize, 0usize);
    for b in 0..RETRIEVAL_BANKS {
        let n = rng.random_range(1..=128usize);
        let dim = rng.random_range(1..=64usize);
        let mut vectors: Vec<Vec<f32>> = Vec::with_capacity(n);
        for _ in 0..n {
            // about one entry in eight duplicates an earlier one
            if !vectors.is_empty() && rng.random_bool(0.125) {
                let k = rng.random_range(0..vectors.len());
                vectors.push(vectors[k].clone());
                planted_ties += 1;
            } else {
                vectors.push(unit_vector(&mut rng, dim));
            }
        }
        let bank = build_bank(
            vectors
                .into_iter()
                .enumerate()
                .map(|(i, v)| unit_exemplar(format!("e{i}"), v))
                .collect(),
        )
        .map_err(|e| e.to_string())?;
        let descriptors: Vec<Vec<f32>> = bank.entries().iter().map(|e| e.descriptor.clone()).collect();
        for _ in 0..4 {
            let query = if rng.random_bool(0.5) {
                descriptors[rng.random_range(0..n)].clone()
            } else {
                unit_vector(&mut rng, dim)
            };
            let k = rng.random_range(1..=n);
            let got = bank.retrieve(&query, k).map_err(|e| e.to_string())?;
            let oracle = retrieve_oracle(&descriptors, &query);
            // consecutive oracle ranks of distinct descriptors closer than NEAR_TIE may swap
            let mut group = vec![0usize; n];
            let mut g = 0;
            for r in 1..n {
                let (a, b2) = (oracle[r - 1], oracle[r]);
                if !((a.1 - b2.1).abs() < NEAR_TIE && descriptors[a.0] != descriptors[b2.0]) {
                    g += 1;
                }
                group[r] = g;
            }
            let group_of: HashMap<usize, usize> =
                oracle.iter().enumerate().map(|(r, (p, _))| (*p, group[r])).collect();
            if g + 1 < n {
                near_tie_queries += 1;
            }
            ensure(got.len() == k, || format!("bank {b}: {} results for k={k}", got.len()))?;
            for (r, hit) in got.iter().enumerate() {
                ensure(group_of[&hit.position] == group[r], || {
                    format!(
                        "bank {b} rank {r}: got position {} (sim {}), oracle {:?}",
                        hit.position,
                        hit.similarity,
                        &oracle[..k.min(5)]
                    )
                })?;
                let want = dot64(&descriptors[hit.position], &query);
                ensure((f64::from(hit.similarity) - want).abs() <= SIM_TOL, || {
                    format!("bank {b}: similarity {} vs oracle {want}", hit.similarity)
                })?;
                ensure(hit.entry.id == format!("e{}", hit.position), || "entry/position mismatch".into())?;
            }
            let distinct: BTreeSet<usize> = got.iter().map(|h| h.position).collect();
            ensure(distinct.len() == k, || format!("bank {b}: repeated positions"))?;
            queries += 1;
        }
    }
    let elapsed = start.elapsed();
    within(elapsed, RETRIEVAL_BUDGET)?;
    Ok(format!(
        "{RETRIEVAL_BANKS} banks, {queries} queries, {planted_ties} planted exact ties, {near_tie_queries} near-tie queries, {elapsed:.2?}"
    ))
}

/// Checks one side of `match_constrained` output against the oracle.
/// Returns the number of boundary cases skipped.
fn compare_side(
    side: &str,
    got: &[MatchCandidate],
    oracle: &[OracleMatch],
    tau: f32,
    layout: &GridLayout,
) -> Result<usize, String> {
    let by_patch: BTreeMap<usize, &MatchCandidate> = got.iter().map(|c| (c.query_patch, c)).collect();
    ensure(by_patch.len() == got.len(), || format!("{side}: duplicate query patches"))?;
    ensure(got.windows(2).all(|w| w[0].query_patch < w[1].query_patch), || {
        format!("{side}: not ordered by query patch")
    })?;
    let mut skipped = 0;
    for o in oracle {
        let boundary = (o.similarity - f64::from(tau)).abs() < NEAR_TIE;
        let expected = o.similarity >= f64::from(tau);
        match by_patch.get(&o.query_patch) {
            Some(c) => {
                ensure(expected || boundary, || {
                    format!("{side} tau {tau}: patch {} emitted at oracle sim {}", o.query_patch, o.similarity)
                })?;
                if !o.ambiguous {
                    ensure(c.ref_patch == o.ref_patch, || {
                        format!("{side}: patch {} matched {} but oracle says {}", o.query_patch, c.ref_patch, o.ref_patch)
                    })?;
                }
                ensure((f64::from(c.similarity) - o.similarity).abs() <= SIM_TOL, || {
                    format!("{side}: similarity {} vs oracle {}", c.similarity, o.similarity)
                })?;
                ensure(c.point == native_center(layout, o.query_patch), || {
                    format!("{side}: point {:?} for patch {}", c.point, o.query_patch)
                })?;
            }
            None => ensure(!expected || boundary, || {
                format!("{side} tau {tau}: patch {} missing at oracle sim {}", o.query_patch, o.similarity)
            })?,
        }
        if boundary || o.ambiguous {
            skipped += 1;
        }
    }
    Ok(skipped)
}

fn matching_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x4d41_5443);
    let (mut emitted, mut skipped) = (0usize, 0usize);
    for inst in 0..MATCH_INSTANCES {
        let dim = rng.random_range(1..=16usize);
        let ps = [4u32, 8, 16][rng.random_range(0..3)];
        let (qr, qc) = (rng.random_range(1..=8u32), rng.random_range(1..=8u32));
        // at least two reference patches so both label sets can be non-empty
        let (rr, rc) = (rng.random_range(1..=8u32), rng.random_range(2..=8u32));
        let reference = random_grid(&mut rng, rr, rc, dim, ps);
        let mut ref_data = reference.data().to_vec();
        // duplicate some reference patches so argmax ties are exercised
        for _ in 0..rng.random_range(0..=2) {
            let (a, b) = (rng.random_range(0..reference.len()), rng.random_range(0..reference.len()));
            let src = ref_data[a * dim..(a + 1) * dim].to_vec();
            ref_data[b * dim..(b + 1) * dim].copy_from_slice(&src);
        }
        let reference = FeatureGrid::new(*reference.layout(), dim as u32, ref_data).unwrap();
        let mut query = random_grid(&mut rng, qr, qc, dim, ps).data().to_vec();
        // plant copies of reference patches so high thresholds still fire
        for i in 0..(qr * qc) as usize {
            if rng.random_bool(0.3) {
                let j = rng.random_range(0..reference.len());
                query[i * dim..(i + 1) * dim].copy_from_slice(reference.patch(j));
            }
        }
        let query = FeatureGrid::new(GridLayout::native(qr * ps, qc * ps, ps), dim as u32, query).unwrap();
        let labels = random_labels(&mut rng, rr, rc);
        let fg_oracle = argmax_oracle(&query, &reference, &labels.foreground_indices());
        let bg_oracle = argmax_oracle(&query, &reference, &labels.background_indices());

        let mut previous: Option<(BTreeSet<(usize, usize)>, BTreeSet<(usize, usize)>)> = None;
        for &tau in &MATCH_TAUS {
            let cfg = MatchConfig { tau_fg: tau, tau_bg: tau };
            let got = match_constrained(&query, &reference, &labels, &cfg).map_err(|e| e.to_string())?;
            skipped += compare_side("fg", &got.fg, &fg_oracle, tau, query.layout())
                .map_err(|e| format!("instance {inst}: {e}"))?;
            skipped += compare_side("bg", &got.bg, &bg_oracle, tau, query.layout())
                .map_err(|e| format!("instance {inst}: {e}"))?;
            emitted += got.fg.len() + got.bg.len();
            let key = |cs: &[MatchCandidate]| cs.iter().map(|c| (c.query_patch, c.ref_patch)).collect::<BTreeSet<_>>();
            let now = (key(&got.fg), key(&got.bg));
            if let Some((pf, pb)) = &previous {
                ensure(now.0.is_subset(pf) && now.1.is_subset(pb), || {
                    format!("instance {inst}: raising tau to {tau} added candidates")
                })?;
            }
            previous = Some(now);
        }
    }
    let elapsed = start.elapsed();
    within(elapsed, MATCH_BUDGET)?;
    Ok(format!(
        "{MATCH_INSTANCES} instances x {} taus, {emitted} candidates checked, {skipped} boundary/near-tie rows relaxed, monotone, {elapsed:.2?}",
        MATCH_TAUS.len()
    ))
}

fn end_to_end_synthetic() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let bank = synth_bank(&dir.path().join("support"), E2E_SUPPORT, 101, Family::Simple);
    let queries = synth_queries(&dir.path().join("query"), E2E_QUERIES, 202, Family::Simple);
    let backend = MockBackend::new(Default::default()).map_err(|e| e.to_string())?;
    let config = PipelineConfig { jobs: 4, ..Default::default() };
    let report = run_pipeline(&queries, &bank, &backend, &config).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let a = &report.aggregate;
    ensure(a.miou >= E2E_MIN_MIOU, || format!("aggregate mIoU {:.4} < {E2E_MIN_MIOU}\n{}", a.miou, report.to_table()))?;
    within(elapsed, E2E_BUDGET)?;
    Ok(format!(
        "{E2E_SUPPORT} support / {E2E_QUERIES} queries: mIoU {:.4}, mPA {:.4}, Acc {:.4}, {} failures, {elapsed:.2?}",
        a.miou, a.mpa, a.acc, a.failures
    ))
}

fn bg_safety() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let bank = synth_bank(&dir.path().join("support"), ADVERSARIAL_SUPPORT, 303, Family::Adversarial);
    let queries = synth_queries(&dir.path().join("query"), ADVERSARIAL_SCENES, 404, Family::Adversarial);
    let backend = MockBackend::new(Default::default()).map_err(|e| e.to_string())?;
    let modes = [BgMode::Disabled, BgMode::TopN(5), BgMode::TopN(20), BgMode::All];
    let rows = ablate_bg(&queries, &bank, &backend, &modes, &PipelineConfig { jobs: 4, ..Default::default() })
        .map_err(|e| e.to_string())?;
    let agg: Vec<_> = rows.iter().map(|r| &r.report.aggregate).collect();
    let summary = rows
        .iter()
        .map(|r| format!("{}: mIoU {:.4} leaks {} failures {}", r.mode, r.report.aggregate.miou, r.report.aggregate.leakage_failures, r.report.aggregate.failures))
        .collect::<Vec<_>>()
        .join("; ");
    ensure(agg[0].leakage_failures >= 1, || format!("FG-only produced no leakage ({summary})"))?;
    ensure(agg[3].leakage_failures == 0, || format!("All-BG leaked ({summary})"))?;
    ensure(agg[3].failures == 0, || format!("All-BG had pipeline failures ({summary})"))?;
    ensure(agg[3].miou >= agg[2].miou && agg[2].miou >= agg[1].miou, || {
        format!("ordering All >= TopN(20) >= TopN(5) violated ({summary})")
    })?;
    Ok(format!("{ADVERSARIAL_SCENES} scenes; {summary}"))
}

fn memory_insensitivity() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let support = synth_bank(&dir.path().join("support"), 30, 505, Family::Simple);
    let queries = synth_queries(&dir.path().join("query"), 15, 606, Family::Simple);
    let backend = MockBackend::new(Default::default()).map_err(|e| e.to_string())?;
    let nearest: HashMap<String, String> = queries
        .iter()
        .map(|q| {
            let qf = QueryFeatures::extract(&backend, &q.image).unwrap();
            (q.id.clone(), support.nearest(&qf.descriptor).unwrap().entry.id.clone())
        })
        .collect();
    let config = PipelineConfig { jobs: 4, ..Default::default() };
    let (mut checked, mut total) = (0usize, 0usize);
    for seed in 0..POOL_SEEDS {
        let rows = ablate_memory(&queries, &support, &backend, &POOL_SIZES, seed, &config)
            .map_err(|e| e.to_string())?;
        for q in &queries {
            total += 1;
            let in_all = rows.iter().all(|r| r.pool_ids.contains(&nearest[&q.id]));
            if !in_all {
                continue;
            }
            let prompts: Vec<_> = rows
                .iter()
                .map(|r| r.report.per_image.iter().find(|x| x.id == q.id).and_then(|x| x.prompts.clone()))
                .collect();
            ensure(prompts[0].is_some() && prompts.windows(2).all(|w| w[0] == w[1]), || {
                format!("seed {seed}, query {}: prompt sets differ across pools {POOL_SIZES:?}", q.id)
            })?;
            checked += 1;
        }
    }
    ensure(checked > 0, || "no query had its nearest exemplar in every pool; criterion vacuous".into())?;
    Ok(format!("{checked} of {total} (query, pool draw) pairs had the global nearest in pools {POOL_SIZES:?}; all prompt sets identical"))
}

fn run_cli(cwd: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_memprompt"))
        .args(args)
        .current_dir(cwd)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        format!("`memprompt {}` exited {:?}: {}", args.join(" "), out.status.code(), String::from_utf8_lossy(&out.stderr))
    })
}

fn snapshot(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                files.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    files
}

const CLI_SCRIPT: &[&[&str]] = &[
    &["synth", "--count", "12", "--seed", "1", "--family", "simple", "--out", "data"],
    &["synth", "--count", "6", "--seed", "2", "--family", "adversarial", "--out", "adv"],
    &["build-memory", "--images", "data/images", "--masks", "data/masks", "--out", "bank", "--split", "support", "--no-dedup"],
    &["build-memory", "--images", "data/images", "--masks", "data/masks", "--out", "bank-dedup"],
    &["segment", "--query", "data/images/simple-s1-0000.png", "--memory", "bank", "--out", "seg"],
    &["segment", "--query", "adv/images/adversarial-s2-0000.png", "--memory", "bank", "--bg", "0", "--tau-fg", "0.5", "--out", "seg-nobg"],
    &["evaluate", "--data", "data", "--memory", "bank", "--split", "query", "--report", "eval/report.json"],
    &["ablate", "--mode", "bg", "--data", "data", "--memory", "bank", "--split", "query", "--report", "ablate/bg.json"],
    &["ablate", "--mode", "memory", "--data", "data", "--memory", "bank", "--split", "support", "--pools", "1,3,5", "--report", "ablate/memory.json"],
];

fn cli_determinism() -> Outcome {
    let mut trees = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        for args in CLI_SCRIPT {
            run_cli(dir.path(), args)?;
        }
        trees.push((snapshot(dir.path()), dir));
    }
    let (a, b) = (&trees[0].0, &trees[1].0);
    ensure(a.keys().eq(b.keys()), || "reruns produced different file sets".into())?;
    for (path, bytes) in a {
        ensure(&b[path] == bytes, || format!("{} differs between reruns", path.display()))?;
    }
    // worker count must not change results
    let dir = trees[1].1.path();
    run_cli(dir, &["--jobs", "4", "evaluate", "--data", "data", "--memory", "bank", "--split", "query", "--report", "eval4/report.json"])?;
    for f in ["report.json", "report.txt"] {
        let one = std::fs::read(dir.join("eval").join(f)).map_err(|e| e.to_string())?;
        let four = std::fs::read(dir.join("eval4").join(f)).map_err(|e| e.to_string())?;
        ensure(one == four, || format!("{f} differs between --jobs 1 and --jobs 4"))?;
    }
    Ok(format!("{} commands, {} output files bit-identical across reruns; --jobs 1 == --jobs 4", CLI_SCRIPT.len(), a.len()))
}

fn expect_err(bytes: &[u8], want: fn(&Error) -> bool, what: &str) -> Result<(), String> {
    match decode_feature_grid(bytes) {
        Err(e) if want(&e) => Ok(()),
        other => Err(format!("{what}: got {other:?}")),
    }
}

fn serialization() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5345_5249);
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let grids = 50;
    for i in 0..grids {
        let dim = rng.random_range(1..=48usize);
        let (rows, cols) = (rng.random_range(1..=12u32), rng.random_range(1..=12u32));
        let ps = rng.random_range(1..=16u32);
        let layout = GridLayout {
            rows,
            cols,
            patch_size: ps,
            source_height: rng.random_range(1..=200),
            source_width: rng.random_range(1..=200),
        };
        let data = (0..rows * cols).flat_map(|_| unit_vector(&mut rng, dim)).collect();
        let g = FeatureGrid::new(layout, dim as u32, data).map_err(|e| e.to_string())?;
        let path = dir.path().join(format!("g{i}.msfg"));
        write_feature_grid(&g, &path).map_err(|e| e.to_string())?;
        let back = read_feature_grid(&path).map_err(|e| e.to_string())?;
        ensure(back == g, || format!("grid {i} changed in round trip"))?;
        let bytes = std::fs::read(&path).map_err(|e| e.to_string())?;
        ensure(encode_feature_grid(&back) == bytes, || format!("grid {i} re-encodes differently"))?;
    }

    let g = FeatureGrid::new(GridLayout::native(32, 32, 16), 3, vec![1.0, 0.0, 0.0].repeat(4)).unwrap();
    let good = encode_feature_grid(&g);
    let mut bad = good.clone();
    bad[0] = b'X';
    expect_err(&bad, |e| matches!(e, Error::BadMagic { .. }), "bad magic")?;
    let mut bad = good.clone();
    bad[4..8].copy_from_slice(&2u32.to_le_bytes());
    expect_err(&bad, |e| matches!(e, Error::UnsupportedVersion { found: 2, .. }), "version")?;
    expect_err(&good[..good.len() - 1], |e| matches!(e, Error::Truncated { .. }), "short payload")?;
    expect_err(&good[..20], |e| matches!(e, Error::Truncated { .. }), "short header")?;
    let mut bad = good.clone();
    bad.push(0);
    expect_err(&bad, |e| matches!(e, Error::TrailingData { .. }), "trailing byte")?;
    let mut bad = good.clone();
    for off in [8, 12, 16] {
        bad[off..off + 4].copy_from_slice(&u32::MAX.to_le_bytes());
    }
    expect_err(&bad, |e| matches!(e, Error::DimensionOverflow { .. }), "overflow")?;

    let bank = synth_bank(&dir.path().join("scenes"), 6, 7, Family::Simple);
    let bank_dir = dir.path().join("bank");
    save_bank(&bank, &bank_dir).map_err(|e| e.to_string())?;
    let loaded = load_bank(&bank_dir).map_err(|e| e.to_string())?;
    ensure(loaded.entries() == bank.entries(), || "bank changed in round trip".into())?;

    let corrupt = |name: &str, f: &dyn Fn(&Path)| -> PathBuf {
        let d = dir.path().join(name);
        save_bank(&bank, &d).unwrap();
        f(&d);
        d
    };
    let manifest = |d: &Path| -> Manifest {
        serde_json::from_slice(&std::fs::read(d.join(MANIFEST_FILE)).unwrap()).unwrap()
    };
    let put = |d: &Path, m: &Manifest| std::fs::write(d.join(MANIFEST_FILE), serde_json::to_vec(m).unwrap()).unwrap();

    let d = corrupt("no-manifest", &|d| std::fs::remove_file(d.join(MANIFEST_FILE)).unwrap());
    ensure(matches!(load_bank(&d), Err(Error::MissingManifest(_))), || "missing manifest".into())?;
    let d = corrupt("garbled", &|d| std::fs::write(d.join(MANIFEST_FILE), b"{not json").unwrap());
    ensure(matches!(load_bank(&d), Err(Error::InvalidManifest(_))), || "garbled manifest".into())?;
    let d = corrupt("missing-file", &|d| {
        let m = manifest(d);
        std::fs::remove_file(d.join(&m.entries[2].features)).unwrap();
    });
    ensure(matches!(load_bank(&d), Err(Error::MissingFile { .. })), || "missing feature file".into())?;
    let d = corrupt("edited", &|d| {
        let mut m = manifest(d);
        m.entries[1].descriptor[0] += 0.01;
        put(d, &m);
    });
    ensure(matches!(load_bank(&d), Err(Error::ChecksumMismatch { .. })), || "edited descriptor".into())?;
    let d = corrupt("swapped", &|d| {
        let m = manifest(d);
        std::fs::copy(d.join(&m.entries[0].features), d.join(&m.entries[3].features)).unwrap();
    });
    let swapped_ok = match load_bank(&d) {
        Err(Error::ChecksumMismatch { .. }) => true,
        // identical scenes would make the swap undetectable
        Ok(_) => bank.entries()[0].features == bank.entries()[3].features,
        Err(_) => false,
    };
    ensure(swapped_ok, || "swapped feature file not detected".into())?;

    Ok(format!(
        "{grids} MSFG round trips, 6 header corruptions, bank round trip, 5 bank corruptions mapped to their errors"
    ))
}

fn main() {
    let criteria: &[(&str, fn() -> Outcome)] = &[
        ("metric-oracle-equivalence", metric_oracle_equivalence),
        ("retrieval-exactness", retrieval_exactness),
        ("matching-brute-force-equivalence", matching_equivalence),
        ("end-to-end-synthetic", end_to_end_synthetic),
        ("bg-safety", bg_safety),
        ("memory-size-insensitivity", memory_insensitivity),
        ("cli-determinism", cli_determinism),
        ("serialization", serialization),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
