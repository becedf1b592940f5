//! Mask-constrained dense matching.
//!
//! For every query patch `i` the best-matching exemplar patch is found twice:
//! once among the exemplar's foreground patches and once among its background
//! patches. A match becomes a candidate point (the center of query patch `i`)
//! on its side when its similarity reaches that side's threshold. A query
//! patch may therefore yield both a FG and a BG candidate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, MaskSide, Result};
use crate::kernel;
use crate::tensor_io::{FeatureGrid, PatchLabelGrid, Pixel};

/// Thresholds used to accept matches on each side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    pub tau_fg: f32,
    pub tau_bg: f32,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            tau_fg: 0.9,
            tau_bg: 0.9,
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, t) in [("tau_fg", self.tau_fg), ("tau_bg", self.tau_bg)] {
            if !(t > 0.0 && t <= 1.0) {
                return Err(Error::Config(format!("{name} must be in (0, 1], got {t}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Fg,
    Bg,
}

impl From<Side> for MaskSide {
    fn from(s: Side) -> Self {
        match s {
            Side::Fg => MaskSide::Foreground,
            Side::Bg => MaskSide::Background,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchCandidate {
    pub query_patch: usize,
    pub ref_patch: usize,
    pub similarity: f32,
    pub point: Pixel,
    pub side: Side,
}

/// Best match per query patch on each side, before thresholding.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatches {
    /// `(ref_patch, similarity)` over the exemplar foreground, indexed by query patch.
    pub fg: Vec<(usize, f32)>,
    /// Same over the exemplar background.
    pub bg: Vec<(usize, f32)>,
    /// Centers of the query patches.
    pub points: Vec<Pixel>,
}

/// Thresholded candidate sets, each ordered by query patch index.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Candidates {
    pub fg: Vec<MatchCandidate>,
    pub bg: Vec<MatchCandidate>,
}

/// Argmax of `query[i] . reference[j]` over `j` in `subset`, ties to the lowest `j`.
pub fn similarity_row(
    query: &FeatureGrid,
    i: usize,
    reference: &FeatureGrid,
    subset: &[usize],
) -> Result<(usize, f32)> {
    if subset.is_empty() {
        return Err(Error::EmptySubset);
    }
    if query.dim() != reference.dim() {
        return Err(Error::dim_mismatch(
            "query vs reference embedding",
            query.dim(),
            reference.dim(),
        ));
    }
    if i >= query.len() {
        return Err(Error::IndexOutOfRange {
            index: i,
            len: query.len(),
        });
    }
    if let Some(&j) = subset.iter().find(|&&j| j >= reference.len()) {
        return Err(Error::IndexOutOfRange {
            index: j,
            len: reference.len(),
        });
    }
    let mut sorted = subset.to_vec();
    sorted.sort_unstable();
    let x = query.patch(i);
    let mut best = (sorted[0], f32::NEG_INFINITY);
    for &j in &sorted {
        let s = kernel::dot(x, reference.patch(j));
        if s > best.1 {
            best = (j, s);
        }
    }
    Ok(best)
}

/// Gathered copy of selected reference rows, scanned against each query patch.
struct SubsetMatrix {
    indices: Vec<usize>,
    rows: Vec<f32>,
    dim: usize,
}

impl SubsetMatrix {
    fn gather(reference: &FeatureGrid, indices: Vec<usize>) -> Self {
        let dim = reference.dim() as usize;
        let mut rows = Vec::with_capacity(indices.len() * dim);
        for &j in &indices {
            rows.extend_from_slice(reference.patch(j));
        }
        Self { indices, rows, dim }
    }

    fn argmax(&self, x: &[f32]) -> (usize, f32) {
        let mut best = (self.indices[0], f32::NEG_INFINITY);
        for (&j, row) in self.indices.iter().zip(self.rows.chunks_exact(self.dim)) {
            let s = kernel::dot(x, row);
            if s > best.1 {
                best = (j, s);
            }
        }
        best
    }
}

/// Computes the per-side argmax for every query patch (no thresholding).
pub fn dense_matches(
    query: &FeatureGrid,
    reference: &FeatureGrid,
    ref_labels: &PatchLabelGrid,
) -> Result<DenseMatches> {
    if query.dim() != reference.dim() {
        return Err(Error::dim_mismatch(
            "query vs reference embedding",
            query.dim(),
            reference.dim(),
        ));
    }
    if (ref_labels.rows(), ref_labels.cols()) != (reference.rows(), reference.cols()) {
        return Err(Error::dim_mismatch(
            "exemplar labels vs feature grid",
            format!("{}x{}", reference.rows(), reference.cols()),
            format!("{}x{}", ref_labels.rows(), ref_labels.cols()),
        ));
    }
    let fg_idx = ref_labels.foreground_indices();
    if fg_idx.is_empty() {
        return Err(Error::DegenerateExemplar(MaskSide::Foreground));
    }
    let bg_idx = ref_labels.background_indices();
    if bg_idx.is_empty() {
        return Err(Error::DegenerateExemplar(MaskSide::Background));
    }
    let fg = SubsetMatrix::gather(reference, fg_idx);
    let bg = SubsetMatrix::gather(reference, bg_idx);

    let per_patch: Vec<((usize, f32), (usize, f32))> = (0..query.len())
        .into_par_iter()
        .map(|i| {
            let x = query.patch(i);
            (fg.argmax(x), bg.argmax(x))
        })
        .collect();
    let points = (0..query.len())
        .map(|i| query.patch_center(i))
        .collect::<Result<Vec<_>>>()?;
    let (fg, bg) = per_patch.into_iter().unzip();
    Ok(DenseMatches { fg, bg, points })
}

impl DenseMatches {
    /// Applies the side thresholds, keeping query-patch order.
    pub fn threshold(&self, config: &MatchConfig) -> Candidates {
        let collect = |best: &[(usize, f32)], tau: f32, side: Side| {
            best.iter()
                .enumerate()
                .filter(|(_, &(_, s))| s >= tau)
                .map(|(i, &(j, s))| MatchCandidate {
                    query_patch: i,
                    ref_patch: j,
                    similarity: s,
                    point: self.points[i],
                    side,
                })
                .collect()
        };
        Candidates {
            fg: collect(&self.fg, config.tau_fg, Side::Fg),
            bg: collect(&self.bg, config.tau_bg, Side::Bg),
        }
    }
}

/// Dense matching followed by thresholding.
pub fn match_constrained(
    query: &FeatureGrid,
    reference: &FeatureGrid,
    ref_labels: &PatchLabelGrid,
    config: &MatchConfig,
) -> Result<Candidates> {
    Ok(dense_matches(query, reference, ref_labels)?.threshold(config))
}
