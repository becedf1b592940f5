use std::path::Path;

use image::{Rgb, RgbImage};

use crate::error::{Error, Result};
use crate::io_util;
use crate::prompt::{PointLabel, PromptSet};
use crate::tensor_io::BinaryMask;

const BOUNDARY: Rgb<u8> = Rgb([255, 255, 0]);
const POSITIVE: Rgb<u8> = Rgb([0, 255, 0]);
const NEGATIVE: Rgb<u8> = Rgb([255, 0, 0]);
const MARKER_RADIUS: i64 = 3;

/// Draws the mask boundary and the prompt points over a copy of `image`.
pub fn render_overlay(image: &RgbImage, mask: &BinaryMask, prompts: &PromptSet) -> Result<RgbImage> {
    let (w, h) = image.dimensions();
    if mask.dims() != (h, w) {
        return Err(Error::dim_mismatch(
            "overlay mask vs image",
            format!("{:?}", (h, w)),
            format!("{:?}", mask.dims()),
        ));
    }
    let mut out = image.clone();
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            let edge = x == 0
                || y == 0
                || x + 1 == w
                || y + 1 == h
                || !mask.get(x - 1, y)
                || !mask.get(x + 1, y)
                || !mask.get(x, y - 1)
                || !mask.get(x, y + 1);
            if edge {
                out.put_pixel(x, y, BOUNDARY);
            }
        }
    }
    for p in &prompts.points {
        let color = match p.label {
            PointLabel::Foreground => POSITIVE,
            PointLabel::Background => NEGATIVE,
        };
        for dy in -MARKER_RADIUS..=MARKER_RADIUS {
            for dx in -MARKER_RADIUS..=MARKER_RADIUS {
                if dx != 0 && dy != 0 {
                    continue;
                }
                let (x, y) = (i64::from(p.x) + dx, i64::from(p.y) + dy);
                if x >= 0 && y >= 0 && x < i64::from(w) && y < i64::from(h) {
                    out.put_pixel(x as u32, y as u32, color);
                }
            }
        }
    }
    Ok(out)
}

pub fn encode_rgb_png(image: &RgbImage) -> Result<Vec<u8>> {
    let mut png = Vec::new();
    image::DynamicImage::ImageRgb8(image.clone())
        .write_to(&mut std::io::Cursor::new(&mut png), image::ImageFormat::Png)
        .map_err(|e| Error::image("<memory>", e))?;
    Ok(png)
}

pub fn write_rgb_png(image: &RgbImage, path: &Path) -> Result<()> {
    io_util::write_atomic(path, &encode_rgb_png(image)?)
}
