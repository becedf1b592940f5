//! Feature extractor + promptable segmenter interface.

mod bridge;
mod mock;
pub mod protocol;

use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prompt::PromptSet;
use crate::tensor_io::{BinaryMask, FeatureGrid};

pub use bridge::{BridgeBackend, BridgeParams, DEFAULT_TIMEOUT_SECS};
pub(crate) use mock::open_rgb;
pub use mock::{hue_bin, patch_descriptor, MockBackend, MockParams, MOCK_DIM};

/// A candidate mask with the segmenter's confidence.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredMask {
    pub mask: BinaryMask,
    pub score: f64,
}

/// The two model roles the pipeline needs.
pub trait Backend: Send + Sync {
    /// Dense, unit-normalized patch features for the image at `image`.
    fn extract_features(&self, image: &Path) -> Result<FeatureGrid>;

    /// Candidate masks for `image` under `prompts`; at least one on success.
    fn segment(&self, image: &Path, prompts: &PromptSet) -> Result<Vec<ScoredMask>>;

    fn descriptor(&self) -> BackendDescriptor;
}

/// Highest-scoring candidate; ties go to the smaller FG area, then to the first.
pub fn select_best(candidates: &[ScoredMask]) -> Result<&BinaryMask> {
    let mut best: Option<(&ScoredMask, usize)> = None;
    for c in candidates {
        let area = c.mask.foreground_count();
        best = match best {
            Some((b, b_area))
                if !(c.score > b.score || (c.score == b.score && area < b_area)) =>
            {
                Some((b, b_area))
            }
            _ => Some((c, area)),
        };
    }
    best.map(|(c, _)| &c.mask).ok_or(Error::NoCandidates)
}

/// Which backend to run and how it is configured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BackendDescriptor {
    Mock(MockParams),
    Bridge(BridgeParams),
}

impl BackendDescriptor {
    pub fn instantiate(&self) -> Result<Arc<dyn Backend>> {
        Ok(match self {
            BackendDescriptor::Mock(p) => Arc::new(MockBackend::new(p.clone())?),
            BackendDescriptor::Bridge(p) => Arc::new(BridgeBackend::new(p.clone())?),
        })
    }
}

impl FromStr for BackendDescriptor {
    type Err = Error;

    /// `mock` or `bridge:<command line>`.
    fn from_str(s: &str) -> Result<Self> {
        if s == "mock" {
            return Ok(BackendDescriptor::Mock(MockParams::default()));
        }
        if let Some(cmd) = s.strip_prefix("bridge:") {
            if cmd.trim().is_empty() {
                return Err(Error::Config("bridge backend needs a command".into()));
            }
            return Ok(BackendDescriptor::Bridge(BridgeParams::new(cmd)));
        }
        Err(Error::Config(format!(
            "unknown backend {s:?} (expected `mock` or `bridge:CMD`)"
        )))
    }
}
