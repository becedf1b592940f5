//! Deterministic stand-ins for the feature extractor and the segmenter.
//!
//! Features: per patch, `[mean R, G, B, std R, G, B, hue histogram x 8]` with
//! channels scaled to `[0, 1]`, then unit-normalized. Histogram entries are
//! pixel fractions; achromatic pixels (chroma below [`ACHROMATIC_CHROMA`])
//! fall in no bin, so gray texture differs from tinted regions only through
//! its color statistics.
//!
//! Segmenter: three flood fills (4-connected) from the FG point, each
//! admitting pixels within an RGB distance `t` of the seed color, for the
//! three configured `t`. Candidate `k` scores
//! `(1 - v_k / max(1, n_bg)) * (1 - |a_k - median(a)| / image_area)`,
//! where `v_k` counts BG prompts inside candidate `k` and `a_k` is its area.

use std::collections::VecDeque;
use std::path::Path;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use super::{Backend, BackendDescriptor, ScoredMask};
use crate::error::{Error, Result};
use crate::prompt::PromptSet;
use crate::tensor_io::{l2_normalize_grid, BinaryMask, FeatureGrid, GridLayout, Pixel};

pub const MOCK_DIM: u32 = 14;
const HUE_BINS: usize = 8;
/// Chroma (max - min channel, 0..=255) below which a pixel has no hue.
pub const ACHROMATIC_CHROMA: u8 = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockParams {
    pub patch_size: u32,
    /// Region-growing color tolerances (RGB Euclidean distance, 0..=255 scale).
    pub tolerances: [f64; 3],
}

impl Default for MockParams {
    fn default() -> Self {
        Self {
            patch_size: 16,
            tolerances: [28.0, 70.0, 140.0],
        }
    }
}

#[derive(Debug, Clone)]
pub struct MockBackend {
    params: MockParams,
}

impl MockBackend {
    pub fn new(params: MockParams) -> Result<Self> {
        if params.patch_size == 0 {
            return Err(Error::Config("mock patch size must be >= 1".into()));
        }
        if params.tolerances.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(Error::Config("mock tolerances must be finite and >= 0".into()));
        }
        Ok(Self { params })
    }

    pub fn params(&self) -> &MockParams {
        &self.params
    }

    pub fn features_of(&self, img: &RgbImage) -> Result<FeatureGrid> {
        if img.width() == 0 || img.height() == 0 {
            return Err(Error::EmptyInput("image has zero size".into()));
        }
        let layout = GridLayout::native(img.height(), img.width(), self.params.patch_size);
        let mut data = Vec::with_capacity(layout.len() * MOCK_DIM as usize);
        for r in 0..layout.rows {
            for c in 0..layout.cols {
                let pixels = layout.row_span(r).flat_map(|y| {
                    layout.col_span(c).map(move |x| img.get_pixel(x, y).0)
                });
                data.extend_from_slice(&patch_descriptor(pixels));
            }
        }
        l2_normalize_grid(FeatureGrid::new(layout, MOCK_DIM, data)?)
    }

    pub fn segment_image(&self, img: &RgbImage, prompts: &PromptSet) -> Result<Vec<ScoredMask>> {
        prompts.validate(img.height(), img.width())?;
        let seed = prompts.foreground().next().expect("validated").pixel();
        let bg: Vec<Pixel> = prompts.background().map(|p| p.pixel()).collect();

        let masks: Vec<BinaryMask> = self
            .params
            .tolerances
            .iter()
            .map(|&t| grow_region(img, seed, t))
            .collect();
        let areas: Vec<usize> = masks.iter().map(BinaryMask::foreground_count).collect();
        let mut sorted = areas.clone();
        sorted.sort_unstable();
        let median = sorted[sorted.len() / 2] as f64;
        let image_area = f64::from(img.width()) * f64::from(img.height());
        let n_bg = bg.len().max(1) as f64;

        Ok(masks
            .into_iter()
            .zip(areas)
            .map(|(mask, area)| {
                let violations = bg.iter().filter(|&&p| mask.contains(p)).count() as f64;
                let coverage = 1.0 - (area as f64 - median).abs() / image_area;
                ScoredMask {
                    score: (1.0 - violations / n_bg) * coverage,
                    mask,
                }
            })
            .collect())
    }
}

/// 8-way hue bin of an RGB pixel, or `None` when it is achromatic.
pub fn hue_bin(rgb: [u8; 3]) -> Option<usize> {
    let [r, g, b] = rgb.map(f64::from);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let chroma = max - min;
    if chroma < f64::from(ACHROMATIC_CHROMA) {
        return None;
    }
    let h = if max == r {
        ((g - b) / chroma).rem_euclid(6.0)
    } else if max == g {
        (b - r) / chroma + 2.0
    } else {
        (r - g) / chroma + 4.0
    };
    let degrees = h * 60.0;
    Some(((degrees / 45.0).floor() as usize) % HUE_BINS)
}

/// Unnormalized 14-component descriptor of a set of pixels.
pub fn patch_descriptor(pixels: impl IntoIterator<Item = [u8; 3]>) -> [f32; MOCK_DIM as usize] {
    let mut sum = [0.0f64; 3];
    let mut sum_sq = [0.0f64; 3];
    let mut hist = [0.0f64; HUE_BINS];
    let mut n = 0usize;
    for px in pixels {
        for ch in 0..3 {
            let v = f64::from(px[ch]) / 255.0;
            sum[ch] += v;
            sum_sq[ch] += v * v;
        }
        if let Some(bin) = hue_bin(px) {
            hist[bin] += 1.0;
        }
        n += 1;
    }
    let mut out = [0.0f32; MOCK_DIM as usize];
    if n == 0 {
        return out;
    }
    let n = n as f64;
    for ch in 0..3 {
        let mean = sum[ch] / n;
        out[ch] = mean as f32;
        out[3 + ch] = (sum_sq[ch] / n - mean * mean).max(0.0).sqrt() as f32;
    }
    for (o, h) in out[6..].iter_mut().zip(hist) {
        *o = (h / n) as f32;
    }
    out
}

fn color_dist2(a: [u8; 3], b: [u8; 3]) -> f64 {
    (0..3)
        .map(|c| {
            let d = f64::from(a[c]) - f64::from(b[c]);
            d * d
        })
        .sum()
}

/// 4-connected flood fill from `seed` over pixels within `tolerance` of the seed color.
pub(crate) fn grow_region(img: &RgbImage, seed: Pixel, tolerance: f64) -> BinaryMask {
    let (w, h) = img.dimensions();
    let mut mask = BinaryMask::new(h, w);
    let seed_color = img.get_pixel(seed.x, seed.y).0;
    let limit = tolerance * tolerance;
    let mut queue = VecDeque::from([seed]);
    mask.set(seed.x, seed.y, true);
    while let Some(p) = queue.pop_front() {
        let neighbors = [
            (p.x.checked_sub(1), Some(p.y)),
            ((p.x + 1 < w).then_some(p.x + 1), Some(p.y)),
            (Some(p.x), p.y.checked_sub(1)),
            (Some(p.x), (p.y + 1 < h).then_some(p.y + 1)),
        ];
        for (nx, ny) in neighbors {
            let (Some(x), Some(y)) = (nx, ny) else { continue };
            if !mask.get(x, y) && color_dist2(img.get_pixel(x, y).0, seed_color) <= limit {
                mask.set(x, y, true);
                queue.push_back(Pixel::new(x, y));
            }
        }
    }
    mask
}

pub(crate) fn open_rgb(path: &Path) -> Result<RgbImage> {
    image::open(path)
        .map(|img| img.to_rgb8())
        .map_err(|e| match e {
            image::ImageError::IoError(io) => Error::io(path, io),
            other => Error::image(path, other),
        })
}

impl Backend for MockBackend {
    fn extract_features(&self, image: &Path) -> Result<FeatureGrid> {
        self.features_of(&open_rgb(image)?)
    }

    fn segment(&self, image: &Path, prompts: &PromptSet) -> Result<Vec<ScoredMask>> {
        self.segment_image(&open_rgb(image)?, prompts)
    }

    fn descriptor(&self) -> BackendDescriptor {
        BackendDescriptor::Mock(self.params.clone())
    }
}
