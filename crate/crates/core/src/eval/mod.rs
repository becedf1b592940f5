//! Pipeline driver, metrics, splits, ablations and synthetic data.

pub mod ablation;
pub mod dataset;
pub mod metrics;
pub mod overlay;
pub mod pipeline;
pub mod report;
pub mod split;
pub mod synth;

pub use ablation::{ablate_bg, ablate_memory, sample_pools, BgAblationRow, MemoryAblationRow};
pub use dataset::{load_exemplars, pair_by_stem, DatasetItem};
pub use metrics::{compute_metrics, Metrics};
pub use overlay::{render_overlay, write_rgb_png};
pub use pipeline::{
    finish, prepare, run_pipeline, segment_image, would_be_negatives, PipelineConfig, Prepared,
    QueryFeatures, QueryItem, Segmentation,
};
pub use report::{render_comparison, Aggregate, EvalReport, ImageRecord};
pub use split::{split_dataset, split_key, SplitPart, SplitSpec};
pub use synth::{synth_dataset, write_dataset, Family, SynthSample};
