//! Brute-force reference implementations and fixtures shared by integration tests.
#![allow(dead_code)]

use std::path::Path;

use memprompt::backend::MockBackend;
use memprompt::eval::{load_exemplars, pair_by_stem, synth_dataset, write_dataset, Family, QueryItem};
use memprompt::memory_bank::{build_bank, MemoryBank};
use memprompt::tensor_io::{BinaryMask, FeatureGrid, GridLayout, PatchLabelGrid, Pixel};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Similarities closer than this are treated as ties between the f32 kernel and the f64 oracle.
pub const NEAR_TIE: f64 = 1e-6;
/// Allowed gap between kernel similarity and f64 oracle similarity.
pub const SIM_TOL: f64 = 1e-5;

pub fn dot64(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| f64::from(x) * f64::from(y)).sum()
}

pub fn unit_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f32> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-3 {
            return v.iter().map(|x| (x / n) as f32).collect();
        }
    }
}

pub fn random_mask(rng: &mut ChaCha8Rng, h: u32, w: u32) -> BinaryMask {
    match rng.random_range(0..6) {
        0 => BinaryMask::new(h, w),
        1 => BinaryMask::new(h, w).complement(),
        2 => {
            let (cx, cy) = (rng.random_range(0..w), rng.random_range(0..h));
            let r = rng.random_range(1..=h.max(w));
            BinaryMask::from_fn(h, w, |x, y| {
                let (dx, dy) = (i64::from(x) - i64::from(cx), i64::from(y) - i64::from(cy));
                dx * dx + dy * dy <= i64::from(r * r)
            })
        }
        _ => {
            let p: f64 = rng.random_range(0.0..1.0);
            let mut m = BinaryMask::new(h, w);
            for y in 0..h {
                for x in 0..w {
                    m.set(x, y, rng.random_bool(p));
                }
            }
            m
        }
    }
}

/// `[iou_fg, iou_bg, miou, mpa, acc]` from per-pixel TP/FP/TN/FN counts.
pub fn metrics_oracle(pred: &BinaryMask, gt: &BinaryMask) -> [f64; 5] {
    let (mut tp, mut fp, mut tn, mut fn_) = (0u64, 0u64, 0u64, 0u64);
    for y in 0..gt.height() {
        for x in 0..gt.width() {
            match (pred.get(x, y), gt.get(x, y)) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, false) => tn += 1,
                (false, true) => fn_ += 1,
            }
        }
    }
    let ratio = |num: u64, den: u64| if den == 0 { 1.0 } else { num as f64 / den as f64 };
    let iou_fg = ratio(tp, tp + fp + fn_);
    let iou_bg = ratio(tn, tn + fp + fn_);
    let mut accs = Vec::new();
    if tp + fn_ > 0 {
        accs.push(tp as f64 / (tp + fn_) as f64);
    }
    if tn + fp > 0 {
        accs.push(tn as f64 / (tn + fp) as f64);
    }
    let mpa = accs.iter().sum::<f64>() / accs.len() as f64;
    let acc = (tp + tn) as f64 / (tp + fp + tn + fn_) as f64;
    [iou_fg, iou_bg, (iou_fg + iou_bg) / 2.0, mpa, acc]
}

/// Positions sorted by descending f64 similarity, then ascending position.
pub fn retrieve_oracle(descriptors: &[Vec<f32>], query: &[f32]) -> Vec<(usize, f64)> {
    let mut scored: Vec<(usize, f64)> = descriptors
        .iter()
        .enumerate()
        .map(|(p, d)| (p, dot64(d, query)))
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    scored
}

/// One oracle correspondence: query patch, best reference patch, similarity,
/// and whether a competing reference patch was within [`NEAR_TIE`].
#[derive(Debug, Clone, Copy)]
pub struct OracleMatch {
    pub query_patch: usize,
    pub ref_patch: usize,
    pub similarity: f64,
    pub ambiguous: bool,
}

/// Per query patch, argmax over `subset` (lowest index among exact ties).
pub fn argmax_oracle(query: &FeatureGrid, reference: &FeatureGrid, subset: &[usize]) -> Vec<OracleMatch> {
    (0..query.len())
        .map(|i| {
            let q = query.patch(i);
            let mut best = (usize::MAX, f64::NEG_INFINITY);
            for &j in subset {
                let s = dot64(q, reference.patch(j));
                if s > best.1 {
                    best = (j, s);
                }
            }
            let ambiguous = subset.iter().any(|&j| {
                j != best.0
                    && reference.patch(j) != reference.patch(best.0)
                    && (dot64(q, reference.patch(j)) - best.1).abs() < NEAR_TIE
            });
            OracleMatch {
                query_patch: i,
                ref_patch: best.0,
                similarity: best.1,
                ambiguous,
            }
        })
        .collect()
}

/// Patch center computed directly for a layout that tiles its source without resize.
pub fn native_center(layout: &GridLayout, index: usize) -> Pixel {
    let (r, c) = (index as u32 / layout.cols, index as u32 % layout.cols);
    let ps = layout.patch_size;
    Pixel::new(
        (c * ps + ps / 2).min(layout.source_width - 1),
        (r * ps + ps / 2).min(layout.source_height - 1),
    )
}

pub fn random_grid(rng: &mut ChaCha8Rng, rows: u32, cols: u32, dim: usize, ps: u32) -> FeatureGrid {
    let data: Vec<f32> = (0..rows * cols).flat_map(|_| unit_vector(rng, dim)).collect();
    FeatureGrid::new(GridLayout::native(rows * ps, cols * ps, ps), dim as u32, data).unwrap()
}

pub fn random_labels(rng: &mut ChaCha8Rng, rows: u32, cols: u32) -> PatchLabelGrid {
    let n = (rows * cols) as usize;
    loop {
        let labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
        if labels.iter().any(|&l| l) && labels.iter().any(|&l| !l) {
            return PatchLabelGrid::from_labels(rows, cols, labels).unwrap();
        }
    }
}

/// Writes a synthetic family under `dir` and returns its bank (built from
/// every scene) and query items.
pub fn synth_bank(dir: &Path, count: usize, seed: u64, family: Family) -> MemoryBank {
    let samples = synth_dataset(count, seed, family).unwrap();
    write_dataset(&samples, dir).unwrap();
    let items = pair_by_stem(&dir.join("images"), &dir.join("masks")).unwrap();
    let backend = MockBackend::new(Default::default()).unwrap();
    build_bank(load_exemplars(&items, &backend).unwrap()).unwrap()
}

pub fn synth_queries(dir: &Path, count: usize, seed: u64, family: Family) -> Vec<QueryItem> {
    let samples = synth_dataset(count, seed, family).unwrap();
    write_dataset(&samples, dir).unwrap();
    samples
        .into_iter()
        .map(|s| QueryItem {
            image: dir.join("images").join(format!("{}.png", s.id)),
            id: s.id,
            gt: s.mask,
        })
        .collect()
}
