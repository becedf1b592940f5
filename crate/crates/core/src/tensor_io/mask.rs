use std::ops::Range;
use std::path::Path;

use image::{GrayImage, ImageEncoder, Luma};

use super::grid::{GridLayout, Pixel};
use crate::error::{Error, Result};
use crate::io_util;

/// Gray level at or above which a stored mask pixel reads as foreground.
pub const FG_THRESHOLD: u8 = 128;

/// Per-pixel foreground/background flags, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    height: u32,
    width: u32,
    data: Vec<bool>,
}

impl BinaryMask {
    /// All-background mask.
    pub fn new(height: u32, width: u32) -> Self {
        Self {
            height,
            width,
            data: vec![false; height as usize * width as usize],
        }
    }

    pub fn from_vec(height: u32, width: u32, data: Vec<bool>) -> Result<Self> {
        let expected = height as usize * width as usize;
        if data.len() != expected {
            return Err(Error::dim_mismatch("mask data length", expected, data.len()));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    /// Builds a mask by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(height: u32, width: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut data = Vec::with_capacity(height as usize * width as usize);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            height,
            width,
            data,
        }
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    /// `(height, width)`.
    pub fn dims(&self) -> (u32, u32) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.data[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, fg: bool) {
        self.data[y as usize * self.width as usize + x as usize] = fg;
    }

    pub fn contains(&self, p: Pixel) -> bool {
        p.x < self.width && p.y < self.height && self.get(p.x, p.y)
    }

    pub fn foreground_count(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    pub fn complement(&self) -> Self {
        Self {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|v| !v).collect(),
        }
    }

    pub fn to_gray_image(&self) -> GrayImage {
        GrayImage::from_fn(self.width, self.height, |x, y| {
            Luma([if self.get(x, y) { 255 } else { 0 }])
        })
    }

    pub fn from_gray_image(img: &GrayImage) -> Self {
        Self {
            height: img.height(),
            width: img.width(),
            data: img.pixels().map(|p| p.0[0] >= FG_THRESHOLD).collect(),
        }
    }
}

/// Reads a mask PNG (any color type; converted to 8-bit luma, >= 128 is FG).
pub fn read_mask_png(path: impl AsRef<Path>) -> Result<BinaryMask> {
    let path = path.as_ref();
    let img = image::open(path).map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::image(path, other),
    })?;
    Ok(BinaryMask::from_gray_image(&img.to_luma8()))
}

/// Encodes a mask as a single-channel 8-bit PNG, 0 = BG, 255 = FG.
pub fn encode_mask_png(mask: &BinaryMask) -> Result<Vec<u8>> {
    let img = mask.to_gray_image();
    let mut out = Vec::new();
    image::codecs::png::PngEncoder::new(&mut out)
        .write_image(
            img.as_raw(),
            img.width(),
            img.height(),
            image::ExtendedColorType::L8,
        )
        .map_err(|e| Error::image("<png encoder>", e))?;
    Ok(out)
}

pub fn write_mask_png(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    io_util::write_atomic(path.as_ref(), &encode_mask_png(mask)?)
}

/// Per-patch foreground labels aligned with a feature grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchLabelGrid {
    rows: u32,
    cols: u32,
    labels: Vec<bool>,
}

impl PatchLabelGrid {
    pub fn from_labels(rows: u32, cols: u32, labels: Vec<bool>) -> Result<Self> {
        let expected = rows as usize * cols as usize;
        if labels.len() != expected {
            return Err(Error::dim_mismatch("label grid length", expected, labels.len()));
        }
        Ok(Self { rows, cols, labels })
    }

    pub fn rows(&self) -> u32 {
        self.rows
    }

    pub fn cols(&self) -> u32 {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn is_foreground(&self, index: usize) -> bool {
        self.labels[index]
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    /// Foreground patch indices in ascending order.
    pub fn foreground_indices(&self) -> Vec<usize> {
        self.indices_where(true)
    }

    /// Background patch indices in ascending order.
    pub fn background_indices(&self) -> Vec<usize> {
        self.indices_where(false)
    }

    fn indices_where(&self, fg: bool) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(i, &l)| (l == fg).then_some(i))
            .collect()
    }
}

/// Majority-vote downsampling onto a `rows x cols` grid of proportional cells.
///
/// A cell is FG iff strictly more than half of its pixels are FG; ties go to BG.
pub fn downsample_mask(mask: &BinaryMask, rows: u32, cols: u32) -> Result<PatchLabelGrid> {
    check_downsample_input(mask, rows, cols)?;
    let row_spans: Vec<_> = (0..rows)
        .map(|r| proportional_span(r, rows, mask.height))
        .collect();
    let col_spans: Vec<_> = (0..cols)
        .map(|c| proportional_span(c, cols, mask.width))
        .collect();
    Ok(vote(mask, &row_spans, &col_spans))
}

/// Majority-vote downsampling using the exact patch footprint of `layout`.
///
/// The mask must have the layout's source dimensions.
pub fn downsample_to_layout(mask: &BinaryMask, layout: &GridLayout) -> Result<PatchLabelGrid> {
    check_downsample_input(mask, layout.rows, layout.cols)?;
    if mask.dims() != (layout.source_height, layout.source_width) {
        return Err(Error::dim_mismatch(
            "mask vs feature grid source",
            format!("{}x{}", layout.source_height, layout.source_width),
            format!("{}x{}", mask.height, mask.width),
        ));
    }
    let row_spans: Vec<_> = (0..layout.rows).map(|r| layout.row_span(r)).collect();
    let col_spans: Vec<_> = (0..layout.cols).map(|c| layout.col_span(c)).collect();
    Ok(vote(mask, &row_spans, &col_spans))
}

fn check_downsample_input(mask: &BinaryMask, rows: u32, cols: u32) -> Result<()> {
    if mask.height == 0 || mask.width == 0 {
        return Err(Error::EmptyInput("mask has zero size".into()));
    }
    if rows == 0 || cols == 0 {
        return Err(Error::EmptyInput("target grid has zero size".into()));
    }
    if mask.height < rows || mask.width < cols {
        return Err(Error::dim_mismatch(
            "mask smaller than patch grid",
            format!(">= {rows}x{cols}"),
            format!("{}x{}", mask.height, mask.width),
        ));
    }
    Ok(())
}

fn proportional_span(i: u32, n: u32, extent: u32) -> Range<u32> {
    let (i, n, e) = (u64::from(i), u64::from(n), u64::from(extent));
    ((i * e / n) as u32)..(((i + 1) * e / n) as u32)
}

fn vote(mask: &BinaryMask, row_spans: &[Range<u32>], col_spans: &[Range<u32>]) -> PatchLabelGrid {
    let mut labels = Vec::with_capacity(row_spans.len() * col_spans.len());
    for rs in row_spans {
        for cs in col_spans {
            let mut fg = 0usize;
            for y in rs.clone() {
                for x in cs.clone() {
                    fg += usize::from(mask.get(x, y));
                }
            }
            let total = rs.len() * cs.len();
            labels.push(2 * fg > total);
        }
    }
    PatchLabelGrid {
        rows: row_spans.len() as u32,
        cols: col_spans.len() as u32,
        labels,
    }
}
