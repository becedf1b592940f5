//! Feature grids, binary masks, their on-disk formats, and patch geometry.

mod grid;
mod mask;
mod msfg;

pub use grid::{
    l2_normalize_grid, FeatureGrid, GridLayout, Pixel, MIN_NORM, UNIT_NORM_TOLERANCE,
};
pub(crate) use grid::normalize_in_place;
pub use mask::{
    downsample_mask, downsample_to_layout, encode_mask_png, read_mask_png, write_mask_png,
    BinaryMask, PatchLabelGrid, FG_THRESHOLD,
};
pub use msfg::{
    decode_feature_grid, encode_feature_grid, read_feature_grid, write_feature_grid, HEADER_LEN,
    MAGIC, VERSION,
};

/// Center of patch `index` of `grid` in source-image pixels.
pub fn patch_center(index: usize, grid: &FeatureGrid) -> crate::Result<Pixel> {
    grid.patch_center(index)
}
