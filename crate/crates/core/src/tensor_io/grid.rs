use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel;

/// Minimum patch-vector norm accepted by [`l2_normalize_grid`].
pub const MIN_NORM: f64 = 1e-12;

/// Tolerance on the unit-norm invariant of a normalized grid.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-5;

/// A pixel coordinate in image space, `x` along the width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pixel {
    pub x: u32,
    pub y: u32,
}

impl Pixel {
    pub fn new(x: u32, y: u32) -> Self {
        Self { x, y }
    }
}

/// Geometry of a patch grid relative to the image it was extracted from.
///
/// An axis is *native* when its patch count equals `ceil(source / patch_size)`:
/// patch `i` then covers pixels `[i * patch_size, min((i + 1) * patch_size, source))`.
/// Any other count means the extractor resized the image, and patch `i`
/// covers the proportional span `[i * source / n, (i + 1) * source / n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridLayout {
    pub rows: u32,
    pub cols: u32,
    pub patch_size: u32,
    pub source_height: u32,
    pub source_width: u32,
}

impl GridLayout {
    /// Grid that tiles an `height x width` image with square patches, no resize.
    pub fn native(height: u32, width: u32, patch_size: u32) -> Self {
        Self {
            rows: height.div_ceil(patch_size.max(1)),
            cols: width.div_ceil(patch_size.max(1)),
            patch_size,
            source_height: height,
            source_width: width,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::EmptyInput("grid has zero rows or columns".into()));
        }
        if self.patch_size == 0 {
            return Err(Error::EmptyInput("patch size is zero".into()));
        }
        if self.source_height == 0 || self.source_width == 0 {
            return Err(Error::EmptyInput("source image has zero extent".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows as usize * self.cols as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_resized(&self) -> bool {
        !axis_is_native(self.rows, self.patch_size, self.source_height)
            || !axis_is_native(self.cols, self.patch_size, self.source_width)
    }

    pub fn row_span(&self, row: u32) -> Range<u32> {
        axis_span(row, self.rows, self.patch_size, self.source_height)
    }

    pub fn col_span(&self, col: u32) -> Range<u32> {
        axis_span(col, self.cols, self.patch_size, self.source_width)
    }

    /// Center of patch `index` in source-image pixels, clamped into bounds.
    pub fn patch_center(&self, index: usize) -> Result<Pixel> {
        if index >= self.len() {
            return Err(Error::IndexOutOfRange {
                index,
                len: self.len(),
            });
        }
        let row = (index / self.cols as usize) as u32;
        let col = (index % self.cols as usize) as u32;
        Ok(Pixel {
            x: axis_center(col, self.cols, self.patch_size, self.source_width),
            y: axis_center(row, self.rows, self.patch_size, self.source_height),
        })
    }
}

fn axis_is_native(count: u32, patch_size: u32, source: u32) -> bool {
    patch_size > 0 && count == source.div_ceil(patch_size)
}

fn axis_span(i: u32, count: u32, patch_size: u32, source: u32) -> Range<u32> {
    if axis_is_native(count, patch_size, source) {
        let start = (i * patch_size).min(source);
        start..((i + 1) * patch_size).min(source)
    } else {
        let (i, n, s) = (u64::from(i), u64::from(count), u64::from(source));
        ((i * s / n) as u32)..(((i + 1) * s / n) as u32)
    }
}

fn axis_center(i: u32, count: u32, patch_size: u32, source: u32) -> u32 {
    let center = u64::from(i) * u64::from(patch_size) + u64::from(patch_size / 2);
    let scaled = if axis_is_native(count, patch_size, source) {
        center
    } else {
        // extractor input extent is count * patch_size along this axis
        center * u64::from(source) / (u64::from(count) * u64::from(patch_size))
    };
    scaled.min(u64::from(source.saturating_sub(1))) as u32
}

/// Row-major grid of per-patch embedding vectors for one image.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGrid {
    layout: GridLayout,
    dim: u32,
    data: Vec<f32>,
}

impl FeatureGrid {
    pub fn new(layout: GridLayout, dim: u32, data: Vec<f32>) -> Result<Self> {
        layout.validate()?;
        if dim == 0 {
            return Err(Error::EmptyInput("embedding dimension is zero".into()));
        }
        let expected = layout.len() * dim as usize;
        if data.len() != expected {
            return Err(Error::dim_mismatch(
                "feature grid data length",
                expected,
                data.len(),
            ));
        }
        Ok(Self { layout, dim, data })
    }

    pub fn layout(&self) -> &GridLayout {
        &self.layout
    }

    pub fn rows(&self) -> u32 {
        self.layout.rows
    }

    pub fn cols(&self) -> u32 {
        self.layout.cols
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn patch_size(&self) -> u32 {
        self.layout.patch_size
    }

    /// `(height, width)` of the source image in pixels.
    pub fn source_dims(&self) -> (u32, u32) {
        (self.layout.source_height, self.layout.source_width)
    }

    /// Number of patches.
    pub fn len(&self) -> usize {
        self.layout.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layout.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn patch(&self, index: usize) -> &[f32] {
        let d = self.dim as usize;
        &self.data[index * d..(index + 1) * d]
    }

    pub fn patches(&self) -> std::slice::ChunksExact<'_, f32> {
        self.data.chunks_exact(self.dim as usize)
    }

    pub fn patch_center(&self, index: usize) -> Result<Pixel> {
        self.layout.patch_center(index)
    }

    /// Checks the unit-norm invariant on every patch.
    pub fn check_normalized(&self) -> Result<()> {
        for (i, v) in self.patches().enumerate() {
            let n = kernel::norm(v);
            if (n - 1.0).abs() > UNIT_NORM_TOLERANCE {
                return Err(Error::Invariant(format!(
                    "patch {i} has norm {n:.7}, expected 1"
                )));
            }
        }
        Ok(())
    }
}

/// Rescales every patch vector to unit Euclidean norm.
pub fn l2_normalize_grid(grid: FeatureGrid) -> Result<FeatureGrid> {
    let FeatureGrid {
        layout,
        dim,
        mut data,
    } = grid;
    for (i, v) in data.chunks_exact_mut(dim as usize).enumerate() {
        normalize_in_place(v).map_err(|_| Error::ZeroVector { patch: i })?;
    }
    Ok(FeatureGrid { layout, dim, data })
}

/// Normalizes `v` to unit norm; fails when its norm is below [`MIN_NORM`].
pub(crate) fn normalize_in_place(v: &mut [f32]) -> Result<()> {
    let n = kernel::norm(v);
    if n < MIN_NORM {
        return Err(Error::ZeroVector { patch: 0 });
    }
    for x in v.iter_mut() {
        *x = (f64::from(*x) / n) as f32;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_of(layout: GridLayout, dim: u32, data: Vec<f32>) -> FeatureGrid {
        FeatureGrid::new(layout, dim, data).unwrap()
    }

    #[test]
    fn normalizes_pythagorean_vector() {
        let g = grid_of(GridLayout::native(16, 16, 16), 2, vec![3.0, 4.0]);
        let n = l2_normalize_grid(g).unwrap();
        assert!((n.patch(0)[0] - 0.6).abs() < 1e-7);
        assert!((n.patch(0)[1] - 0.8).abs() < 1e-7);
    }

    #[test]
    fn unit_vector_is_fixed_point() {
        let g = grid_of(GridLayout::native(16, 16, 16), 3, vec![1.0, 0.0, 0.0]);
        assert_eq!(l2_normalize_grid(g).unwrap().patch(0), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn zero_vector_names_patch() {
        let g = grid_of(GridLayout::native(16, 32, 16), 2, vec![1.0, 1.0, 0.0, 0.0]);
        match l2_normalize_grid(g) {
            Err(Error::ZeroVector { patch }) => assert_eq!(patch, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn data_length_is_checked() {
        let err = FeatureGrid::new(GridLayout::native(32, 32, 16), 4, vec![0.0; 15]).unwrap_err();
        assert!(matches!(err, Error::DimMismatch { .. }));
    }

    #[test]
    fn native_layout_uses_ceiling() {
        let l = GridLayout::native(40, 33, 16);
        assert_eq!((l.rows, l.cols), (3, 3));
        assert!(!l.is_resized());
        assert_eq!(l.row_span(2), 32..40);
    }

    #[test]
    fn centers_follow_patch_formula() {
        let l = GridLayout::native(64, 64, 16);
        assert_eq!(l.patch_center(0).unwrap(), Pixel::new(8, 8));
        assert_eq!(l.patch_center(l.cols as usize).unwrap(), Pixel::new(8, 24));
        assert!(matches!(
            l.patch_center(16),
            Err(Error::IndexOutOfRange { index: 16, len: 16 })
        ));
    }

    #[test]
    fn resized_extraction_scales_centers() {
        // 512x512 extraction (32x32 patches of 16) of a 1024x1024 original
        let l = GridLayout {
            rows: 32,
            cols: 32,
            patch_size: 16,
            source_height: 1024,
            source_width: 1024,
        };
        assert!(l.is_resized());
        for index in [0usize, 1, 33, 1023] {
            let row = (index / 32) as u32;
            let col = (index % 32) as u32;
            let unscaled = Pixel::new(col * 16 + 8, row * 16 + 8);
            let c = l.patch_center(index).unwrap();
            assert_eq!(c, Pixel::new(unscaled.x * 2, unscaled.y * 2));
        }
        assert_eq!(l.row_span(3), 96..128);
    }

    #[test]
    fn partial_last_patch_center_is_clamped() {
        let l = GridLayout::native(16, 40, 16);
        assert_eq!(l.patch_center(2).unwrap(), Pixel::new(39, 8));
    }
}
