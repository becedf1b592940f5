use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Support/query partition parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    /// Fraction of ids assigned to the support set.
    pub ratio: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            ratio: 0.70,
            seed: 42,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return Err(Error::Config(format!(
                "split ratio must be in (0, 1), got {}",
                self.ratio
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitPart {
    Support,
    Query,
}

impl std::str::FromStr for SplitPart {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "support" => Ok(SplitPart::Support),
            "query" => Ok(SplitPart::Query),
            other => Err(Error::Config(format!("unknown split {other:?}"))),
        }
    }
}

/// First 8 bytes (big-endian) of SHA-256 over `seed` (LE) followed by `id`.
pub fn split_key(seed: u64, id: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(id.as_bytes());
    let digest = h.finalize();
    u64::from_be_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

/// Orders ids by keyed hash and cuts after `ceil(ratio * n)`.
///
/// Both parts are kept non-empty when there are at least two ids.
pub fn split_dataset(ids: &[String], spec: &SplitSpec) -> Result<(Vec<String>, Vec<String>)> {
    spec.validate()?;
    if ids.is_empty() {
        return Err(Error::EmptyInput("no ids to split".into()));
    }
    let mut keyed: Vec<(u64, &String)> = ids.iter().map(|id| (split_key(spec.seed, id), id)).collect();
    keyed.sort();
    let n = ids.len();
    let mut cut = (spec.ratio * n as f64 - 1e-9).ceil() as usize;
    if n >= 2 {
        cut = cut.clamp(1, n - 1);
    }
    let ordered: Vec<String> = keyed.into_iter().map(|(_, id)| id.clone()).collect();
    let query = ordered[cut.min(n)..].to_vec();
    let mut support = ordered;
    support.truncate(cut.min(n));
    Ok((support, query))
}
