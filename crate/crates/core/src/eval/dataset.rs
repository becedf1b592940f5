//! Image/mask pairing by filename stem.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::backend::Backend;
use crate::error::{Error, Result};
use crate::memory_bank::Exemplar;
use crate::tensor_io::read_mask_png;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetItem {
    pub id: String,
    pub image: PathBuf,
    pub mask: PathBuf,
}

fn files_by_stem(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let mut out = BTreeMap::new();
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if !path.is_file() {
            continue;
        }
        if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
            if stem.starts_with('.') {
                continue;
            }
            if let Some(prev) = out.insert(stem.to_string(), path.clone()) {
                return Err(Error::Unpaired {
                    what: format!("ambiguous stem in {}", dir.display()),
                    ids: vec![prev.display().to_string(), path.display().to_string()],
                });
            }
        }
    }
    Ok(out)
}

/// Pairs `images/<stem>.*` with `masks/<stem>.*`, sorted by stem.
/// Any image without a mask (or mask without an image) aborts with the list of offenders.
pub fn pair_by_stem(images_dir: &Path, masks_dir: &Path) -> Result<Vec<DatasetItem>> {
    let images = files_by_stem(images_dir)?;
    let mut masks = files_by_stem(masks_dir)?;
    let mut items = Vec::with_capacity(images.len());
    let mut unmatched = Vec::new();
    for (id, image) in images {
        match masks.remove(&id) {
            Some(mask) => items.push(DatasetItem { id, image, mask }),
            None => unmatched.push(format!("{id} (no mask)")),
        }
    }
    unmatched.extend(masks.into_keys().map(|id| format!("{id} (no image)")));
    if !unmatched.is_empty() {
        return Err(Error::Unpaired {
            what: "unmatched image/mask pairs".into(),
            ids: unmatched,
        });
    }
    if items.is_empty() {
        return Err(Error::EmptyInput(format!("no images found in {}", images_dir.display())));
    }
    Ok(items)
}

/// Extracts features and loads masks for every item, preserving order.
pub fn load_exemplars(items: &[DatasetItem], backend: &dyn Backend) -> Result<Vec<Exemplar>> {
    items
        .par_iter()
        .map(|item| {
            Ok(Exemplar {
                id: item.id.clone(),
                image_path: item.image.clone(),
                mask: read_mask_png(&item.mask)?,
                features: backend.extract_features(&item.image)?,
            })
        })
        .collect()
}
