//! The `MSFG` feature-grid file format.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "MSFG"
//! 4       4     version (u32 LE, currently 1)
//! 8       4     rows
//! 12      4     cols
//! 16      4     dim
//! 20      4     patch_size
//! 24      4     source height
//! 28      4     source width
//! 32      ...   rows * cols * dim little-endian f32, row-major
//! ```

use std::path::Path;

use super::grid::{FeatureGrid, GridLayout};
use crate::error::{Error, Result};
use crate::io_util;

pub const MAGIC: [u8; 4] = *b"MSFG";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 32;

pub fn encode_feature_grid(grid: &FeatureGrid) -> Vec<u8> {
    let l = grid.layout();
    let mut out = Vec::with_capacity(HEADER_LEN + grid.data().len() * 4);
    out.extend_from_slice(&MAGIC);
    for field in [
        VERSION,
        l.rows,
        l.cols,
        grid.dim(),
        l.patch_size,
        l.source_height,
        l.source_width,
    ] {
        out.extend_from_slice(&field.to_le_bytes());
    }
    for v in grid.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_feature_grid(bytes: &[u8]) -> Result<FeatureGrid> {
    if bytes.len() >= 4 && bytes[..4] != MAGIC {
        let mut found = [0u8; 4];
        found.copy_from_slice(&bytes[..4]);
        return Err(Error::BadMagic { found });
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated {
            expected: HEADER_LEN as u64,
            found: bytes.len() as u64,
        });
    }
    let field = |k: usize| {
        let at = 4 + 4 * k;
        u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap())
    };
    let version = field(0);
    if version != VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            expected: VERSION,
        });
    }
    let (rows, cols, dim) = (field(1), field(2), field(3));
    let layout = GridLayout {
        rows,
        cols,
        patch_size: field(4),
        source_height: field(5),
        source_width: field(6),
    };
    let payload = u64::from(rows)
        .checked_mul(u64::from(cols))
        .and_then(|n| n.checked_mul(u64::from(dim)))
        .and_then(|n| n.checked_mul(4))
        .filter(|&n| n <= isize::MAX as u64 - HEADER_LEN as u64)
        .ok_or(Error::DimensionOverflow { rows, cols, dim })?;
    let expected = HEADER_LEN as u64 + payload;
    let found = bytes.len() as u64;
    if found < expected {
        return Err(Error::Truncated { expected, found });
    }
    if found > expected {
        return Err(Error::TrailingData { expected, found });
    }
    let data = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    FeatureGrid::new(layout, dim, data)
}

pub fn write_feature_grid(grid: &FeatureGrid, path: impl AsRef<Path>) -> Result<()> {
    io_util::write_atomic(path.as_ref(), &encode_feature_grid(grid))
}

pub fn read_feature_grid(path: impl AsRef<Path>) -> Result<FeatureGrid> {
    decode_feature_grid(&io_util::read(path.as_ref())?)
}
