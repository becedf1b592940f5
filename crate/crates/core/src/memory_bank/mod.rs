//! Exemplar memory: per-entry global descriptors and an exact flat cosine index.

mod persist;

use std::collections::HashSet;
use std::path::PathBuf;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::kernel;
use crate::tensor_io::{normalize_in_place, BinaryMask, FeatureGrid};

pub use persist::{load_bank, save_bank, Manifest, ManifestEntry, MANIFEST_FILE, MANIFEST_VERSION};

/// Default similarity at or above which two exemplars count as near-duplicates.
pub const DEFAULT_DEDUP_THRESHOLD: f32 = 0.995;

/// Mean-pools the patch vectors of `features` and rescales the mean to unit norm.
pub fn global_descriptor(features: &FeatureGrid) -> Result<Vec<f32>> {
    if features.is_empty() {
        return Err(Error::EmptyInput("feature grid has no patches".into()));
    }
    let dim = features.dim() as usize;
    let mut sum = vec![0.0f64; dim];
    for v in features.patches() {
        for (s, &x) in sum.iter_mut().zip(v) {
            *s += f64::from(x);
        }
    }
    let n = features.len() as f64;
    let mut mean: Vec<f32> = sum.iter().map(|s| (s / n) as f32).collect();
    normalize_in_place(&mut mean).map_err(|_| Error::DegenerateDescriptor)?;
    Ok(mean)
}

/// Raw material for one memory entry, before its descriptor is computed.
#[derive(Debug, Clone)]
pub struct Exemplar {
    pub id: String,
    pub image_path: PathBuf,
    pub mask: BinaryMask,
    pub features: FeatureGrid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemoryEntry {
    pub id: String,
    pub image_path: PathBuf,
    pub mask: BinaryMask,
    pub features: FeatureGrid,
    pub descriptor: Vec<f32>,
}

impl MemoryEntry {
    pub fn from_exemplar(ex: Exemplar) -> Result<Self> {
        if ex.mask.dims() != ex.features.source_dims() {
            let (fh, fw) = ex.features.source_dims();
            return Err(Error::dim_mismatch(
                format!("entry {:?} mask vs features", ex.id),
                format!("{fh}x{fw}"),
                format!("{}x{}", ex.mask.height(), ex.mask.width()),
            ));
        }
        let descriptor = global_descriptor(&ex.features)?;
        Ok(Self {
            id: ex.id,
            image_path: ex.image_path,
            mask: ex.mask,
            features: ex.features,
            descriptor,
        })
    }
}

/// One retrieval hit.
#[derive(Debug, Clone)]
pub struct Retrieved {
    /// Position of the entry in bank insertion order.
    pub position: usize,
    pub entry: Arc<MemoryEntry>,
    pub similarity: f32,
}

/// Ordered exemplar collection with a contiguous descriptor matrix for scanning.
#[derive(Debug, Clone)]
pub struct MemoryBank {
    entries: Vec<Arc<MemoryEntry>>,
    index: Vec<f32>,
    dim: usize,
}

impl PartialEq for MemoryBank {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.index == other.index
            && self.entries.len() == other.entries.len()
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|(a, b)| Arc::ptr_eq(a, b) || a == b)
    }
}

/// Builds a bank, computing each exemplar's descriptor. Insertion order is kept.
pub fn build_bank(exemplars: Vec<Exemplar>) -> Result<MemoryBank> {
    let entries = exemplars
        .into_iter()
        .map(MemoryEntry::from_exemplar)
        .collect::<Result<Vec<_>>>()?;
    MemoryBank::from_entries(entries.into_iter().map(Arc::new).collect())
}

impl MemoryBank {
    /// Assembles a bank from entries whose descriptors are already computed.
    pub fn from_entries(entries: Vec<Arc<MemoryEntry>>) -> Result<Self> {
        let first = entries.first().ok_or(Error::EmptyBank)?;
        let dim = first.descriptor.len();
        let mut seen = HashSet::with_capacity(entries.len());
        let mut index = Vec::with_capacity(entries.len() * dim);
        for e in &entries {
            if !seen.insert(e.id.as_str()) {
                return Err(Error::DuplicateId(e.id.clone()));
            }
            if e.descriptor.len() != dim || e.features.dim() as usize != dim {
                return Err(Error::dim_mismatch(
                    format!("entry {:?} embedding dimension", e.id),
                    dim,
                    e.features.dim(),
                ));
            }
            index.extend_from_slice(&e.descriptor);
        }
        Ok(Self {
            entries,
            index,
            dim,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[Arc<MemoryEntry>] {
        &self.entries
    }

    pub fn get(&self, id: &str) -> Option<&Arc<MemoryEntry>> {
        self.entries.iter().find(|e| e.id == id)
    }

    /// Row `k` of the descriptor index.
    pub fn index_row(&self, k: usize) -> &[f32] {
        &self.index[k * self.dim..(k + 1) * self.dim]
    }

    /// Top-`k` entries by descriptor dot product, descending; ties keep insertion order.
    pub fn retrieve(&self, query: &[f32], k: usize) -> Result<Vec<Retrieved>> {
        if self.entries.is_empty() {
            return Err(Error::EmptyBank);
        }
        if query.len() != self.dim {
            return Err(Error::dim_mismatch("query descriptor", self.dim, query.len()));
        }
        if k == 0 || k > self.entries.len() {
            return Err(Error::Config(format!(
                "k must be in 1..={}, got {k}",
                self.entries.len()
            )));
        }
        let mut scored: Vec<(usize, f32)> = self
            .index
            .chunks_exact(self.dim)
            .map(|row| kernel::dot(row, query))
            .enumerate()
            .collect();
        // stable sort keeps insertion order among equal similarities
        scored.sort_by(|a, b| b.1.total_cmp(&a.1));
        Ok(scored
            .into_iter()
            .take(k)
            .map(|(position, similarity)| Retrieved {
                position,
                entry: Arc::clone(&self.entries[position]),
                similarity,
            })
            .collect())
    }

    /// Nearest entry (`k = 1`).
    pub fn nearest(&self, query: &[f32]) -> Result<Retrieved> {
        Ok(self.retrieve(query, 1)?.remove(0))
    }

    /// Bank restricted to the given positions, in the given order.
    pub fn subset(&self, positions: &[usize]) -> Result<Self> {
        let entries = positions
            .iter()
            .map(|&p| {
                self.entries
                    .get(p)
                    .cloned()
                    .ok_or(Error::IndexOutOfRange {
                        index: p,
                        len: self.entries.len(),
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_entries(entries)
    }
}

/// Free-function form of [`MemoryBank::retrieve`].
pub fn retrieve(query: &[f32], bank: &MemoryBank, k: usize) -> Result<Vec<Retrieved>> {
    bank.retrieve(query, k)
}

/// Greedy near-duplicate removal in insertion order.
///
/// An entry is dropped when its descriptor similarity to any already kept
/// entry is `>= threshold`. Returns the reduced bank and the removed ids.
pub fn dedup(bank: &MemoryBank, threshold: f32) -> Result<(MemoryBank, Vec<String>)> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::Config(format!(
            "dedup threshold must be in (0, 1], got {threshold}"
        )));
    }
    let keep = dedup_positions(
        bank.entries.iter().map(|e| e.descriptor.as_slice()),
        threshold,
    );
    let removed = bank
        .entries
        .iter()
        .enumerate()
        .filter(|(p, _)| keep.binary_search(p).is_err())
        .map(|(_, e)| e.id.clone())
        .collect();
    Ok((bank.subset(&keep)?, removed))
}

/// Positions surviving greedy dedup over a sequence of unit descriptors.
pub fn dedup_positions<'a>(
    descriptors: impl IntoIterator<Item = &'a [f32]>,
    threshold: f32,
) -> Vec<usize> {
    let mut kept: Vec<&[f32]> = Vec::new();
    let mut positions = Vec::new();
    for (p, d) in descriptors.into_iter().enumerate() {
        if kept.iter().all(|k| kernel::dot(k, d) < threshold) {
            kept.push(d);
            positions.push(p);
        }
    }
    positions
}
