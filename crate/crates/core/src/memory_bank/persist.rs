//! On-disk bank layout:
//!
//! ```text
//! <dir>/manifest.json
//! <dir>/features/<nnnn>_<id>.msfg
//! <dir>/masks/<nnnn>_<id>.png
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{global_descriptor, MemoryBank, MemoryEntry};
use crate::error::{Error, Result};
use crate::io_util;
use crate::tensor_io::{read_feature_grid, read_mask_png, write_feature_grid, write_mask_png};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

/// Largest per-component difference tolerated between a stored descriptor
/// and the one recomputed from its feature file.
const DESCRIPTOR_CHECK_TOLERANCE: f32 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub dim: usize,
    pub entries: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub image: PathBuf,
    /// Relative to the bank directory.
    pub mask: PathBuf,
    /// Relative to the bank directory.
    pub features: PathBuf,
    pub descriptor: Vec<f32>,
}

fn file_stem_for(position: usize, id: &str) -> String {
    let safe: String = id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("{position:04}_{safe}")
}

pub fn save_bank(bank: &MemoryBank, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    let mut entries = Vec::with_capacity(bank.len());
    for (k, e) in bank.entries().iter().enumerate() {
        let stem = file_stem_for(k, &e.id);
        let features = PathBuf::from("features").join(format!("{stem}.msfg"));
        let mask = PathBuf::from("masks").join(format!("{stem}.png"));
        write_feature_grid(&e.features, dir.join(&features))?;
        write_mask_png(&e.mask, dir.join(&mask))?;
        entries.push(ManifestEntry {
            id: e.id.clone(),
            image: e.image_path.clone(),
            mask,
            features,
            descriptor: e.descriptor.clone(),
        });
    }
    let manifest = Manifest {
        version: MANIFEST_VERSION,
        dim: bank.dim(),
        entries,
    };
    io_util::write_json(&dir.join(MANIFEST_FILE), &manifest)
}

pub fn load_bank(dir: impl AsRef<Path>) -> Result<MemoryBank> {
    let dir = dir.as_ref();
    let manifest_path = dir.join(MANIFEST_FILE);
    if !manifest_path.is_file() {
        return Err(Error::MissingManifest(manifest_path));
    }
    let text = io_util::read(&manifest_path)?;
    let manifest: Manifest = serde_json::from_slice(&text)
        .map_err(|e| Error::InvalidManifest(e.to_string()))?;
    if manifest.version != MANIFEST_VERSION {
        return Err(Error::InvalidManifest(format!(
            "unsupported manifest version {}",
            manifest.version
        )));
    }
    let mut entries = Vec::with_capacity(manifest.entries.len());
    for rec in manifest.entries {
        if rec.descriptor.len() != manifest.dim {
            return Err(Error::dim_mismatch(
                format!("entry {:?} descriptor", rec.id),
                manifest.dim,
                rec.descriptor.len(),
            ));
        }
        let features_path = dir.join(&rec.features);
        let mask_path = dir.join(&rec.mask);
        for p in [&features_path, &mask_path] {
            if !p.is_file() {
                return Err(Error::MissingFile {
                    id: rec.id.clone(),
                    path: p.clone(),
                });
            }
        }
        let features = read_feature_grid(&features_path)?;
        let mask = read_mask_png(&mask_path)?;
        let recomputed = global_descriptor(&features)?;
        let consistent = recomputed.len() == rec.descriptor.len()
            && recomputed
                .iter()
                .zip(&rec.descriptor)
                .all(|(a, b)| (a - b).abs() <= DESCRIPTOR_CHECK_TOLERANCE);
        if !consistent {
            return Err(Error::ChecksumMismatch { id: rec.id });
        }
        if mask.dims() != features.source_dims() {
            return Err(Error::dim_mismatch(
                format!("entry {:?} mask vs features", rec.id),
                format!("{:?}", features.source_dims()),
                format!("{:?}", mask.dims()),
            ));
        }
        entries.push(Arc::new(MemoryEntry {
            id: rec.id,
            image_path: rec.image,
            mask,
            features,
            descriptor: rec.descriptor,
        }));
    }
    MemoryBank::from_entries(entries)
}
