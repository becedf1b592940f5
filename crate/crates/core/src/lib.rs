//! Training-free retrieval-to-prompt segmentation.
//!
//! A query image is matched against a memory bank of annotated exemplars by
//! global descriptor similarity. Dense patch correspondences to the retrieved
//! exemplar, restricted separately to its foreground and background, become
//! one positive point and a set of negative points for a promptable
//! segmenter, whose highest-scoring candidate mask is the prediction.
//!
//! The neural models sit behind [`backend::Backend`]: a deterministic
//! color-statistics [`backend::MockBackend`] for tests and desk experiments,
//! and a [`backend::BridgeBackend`] that speaks line-delimited JSON to an
//! external model runner.
//!
//! Module map:
//!
//! - [`tensor_io`]: feature grids, masks, the `MSFG` format, patch geometry
//! - [`memory_bank`]: descriptors, exact flat retrieval, dedup, persistence
//! - [`correspondence`]: mask-constrained dense matching
//! - [`prompt`]: FG anchor / BG negative selection
//! - [`backend`]: extractor + segmenter interface, mock, bridge client
//! - [`eval`]: metrics, splits, pipeline runner, ablations, synthetic data
//! - [`cli`]: command implementations behind the `memprompt` binary

pub mod backend;
pub mod cli;
pub mod correspondence;
pub mod error;
pub mod eval;
pub mod io_util;
pub mod kernel;
pub mod memory_bank;
pub mod prompt;
pub mod tensor_io;

pub use error::{Error, MaskSide, Result};
