//! Seeded synthetic scenes for desk-scale experiments.
//!
//! `simple`: one flat-colored ellipse or star on grayscale texture.
//! `adversarial`: a flat target block with a larger, adjacent block of a
//! neighbouring red shade (the distractor), both aligned to the 16-pixel
//! patch grid, on grayscale texture. The target and distractor are close in
//! RGB, so region growing from the target easily spills into the distractor.

use std::f64::consts::PI;
use std::path::Path;

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io_util;
use crate::tensor_io::{write_mask_png, BinaryMask};

pub const SCENE_SIZE: u32 = 128;
pub const CELL: u32 = 16;

/// Blob colors of the simple family; each sits in a different hue bin.
pub const PALETTE: [[u8; 3]; 4] = [[230, 50, 40], [40, 200, 60], [30, 100, 230], [160, 40, 210]];
pub const TARGET_COLOR: [u8; 3] = [200, 40, 70];
pub const DISTRACTOR_COLOR: [u8; 3] = [200, 70, 40];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Simple,
    Adversarial,
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "simple" => Ok(Family::Simple),
            "adversarial" => Ok(Family::Adversarial),
            other => Err(Error::Config(format!("unknown synthetic family {other:?}"))),
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Family::Simple => "simple",
            Family::Adversarial => "adversarial",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSample {
    pub id: String,
    pub image: RgbImage,
    /// Ground-truth target.
    pub mask: BinaryMask,
    /// Distractor region (adversarial family only).
    pub distractor: Option<BinaryMask>,
}

pub fn synth_dataset(count: usize, seed: u64, family: Family) -> Result<Vec<SynthSample>> {
    if count == 0 {
        return Err(Error::EmptyInput("synthetic count must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|i| {
            let id = format!("{family}-s{seed}-{i:04}");
            match family {
                Family::Simple => simple_scene(&mut rng, id),
                Family::Adversarial => adversarial_scene(&mut rng, id),
            }
        })
        .collect())
}

/// Grayscale texture: base level, a smooth sinusoid, and per-pixel noise.
/// All three channels are equal, so every pixel is achromatic.
fn gray_texture(rng: &mut ChaCha8Rng) -> RgbImage {
    let base: f64 = rng.random_range(90.0..150.0);
    let fx: f64 = rng.random_range(0.02..0.08);
    let fy: f64 = rng.random_range(0.02..0.08);
    let phase: f64 = rng.random_range(0.0..2.0 * PI);
    let mut img = RgbImage::new(SCENE_SIZE, SCENE_SIZE);
    for y in 0..SCENE_SIZE {
        for x in 0..SCENE_SIZE {
            let wave = 8.0 * (fx * f64::from(x) + fy * f64::from(y) + phase).sin();
            let noise: f64 = rng.random_range(-8.0..8.0);
            let v = (base + wave + noise).round().clamp(0.0, 255.0) as u8;
            img.put_pixel(x, y, Rgb([v, v, v]));
        }
    }
    img
}

fn simple_scene(rng: &mut ChaCha8Rng, id: String) -> SynthSample {
    let mut image = gray_texture(rng);
    let color = PALETTE[rng.random_range(0..PALETTE.len())];
    let cx: f64 = rng.random_range(44.0..84.0);
    let cy: f64 = rng.random_range(44.0..84.0);
    let angle: f64 = rng.random_range(0.0..PI);
    let inside: Box<dyn Fn(f64, f64) -> bool> = if rng.random_bool(0.5) {
        let a: f64 = rng.random_range(24.0..38.0);
        let b: f64 = rng.random_range(20.0..32.0);
        let (s, c) = angle.sin_cos();
        Box::new(move |dx, dy| {
            let u = dx * c + dy * s;
            let v = -dx * s + dy * c;
            (u / a).powi(2) + (v / b).powi(2) <= 1.0
        })
    } else {
        let points: u32 = rng.random_range(5..=7);
        let outer: f64 = rng.random_range(32.0..40.0);
        let inner = outer * rng.random_range(0.55..0.7);
        Box::new(move |dx, dy| {
            let r = (dx * dx + dy * dy).sqrt();
            let theta = (dy.atan2(dx) - angle).rem_euclid(2.0 * PI);
            let sector = 2.0 * PI / f64::from(points);
            // piecewise-linear radius between tips (outer) and notches (inner)
            let t = ((theta % sector) / sector - 0.5).abs() * 2.0;
            r <= inner + (outer - inner) * t
        })
    };
    let mask = BinaryMask::from_fn(SCENE_SIZE, SCENE_SIZE, |x, y| {
        inside(f64::from(x) + 0.5 - cx, f64::from(y) + 0.5 - cy)
    });
    for y in 0..SCENE_SIZE {
        for x in 0..SCENE_SIZE {
            if mask.get(x, y) {
                image.put_pixel(x, y, Rgb(color));
            }
        }
    }
    SynthSample {
        id,
        image,
        mask,
        distractor: None,
    }
}

fn adversarial_scene(rng: &mut ChaCha8Rng, id: String) -> SynthSample {
    let mut image = gray_texture(rng);
    let cells = SCENE_SIZE / CELL;
    // target: tw x th cells; distractor: (tw + 2) x dh cells on one side
    let tw: u32 = rng.random_range(2..=3);
    let th: u32 = rng.random_range(2..=3);
    let dh: u32 = rng.random_range(2..=3);
    let dw = tw + 2;
    // layout in a canonical frame with the distractor above the target
    let (frame_w, frame_h) = (dw, dh + th);
    let orientation = rng.random_range(0..4u32);
    let (bw, bh) = if orientation % 2 == 0 {
        (frame_w, frame_h)
    } else {
        (frame_h, frame_w)
    };
    let ox = rng.random_range(1..=cells - 1 - bw);
    let oy = rng.random_range(1..=cells - 1 - bh);
    let in_target = |fx: u32, fy: u32| fy >= dh && fx >= 1 && fx < 1 + tw;
    let in_distractor = |_: u32, fy: u32| fy < dh;
    // map a cell in the bounding box back to the canonical frame
    let to_frame = |cx: u32, cy: u32| -> (u32, u32) {
        match orientation {
            0 => (cx, cy),
            1 => (cy, frame_h - 1 - cx),
            2 => (frame_w - 1 - cx, frame_h - 1 - cy),
            _ => (frame_w - 1 - cy, cx),
        }
    };
    let classify = |x: u32, y: u32| -> (bool, bool) {
        let (cx, cy) = (x / CELL, y / CELL);
        if cx < ox || cy < oy || cx >= ox + bw || cy >= oy + bh {
            return (false, false);
        }
        let (fx, fy) = to_frame(cx - ox, cy - oy);
        (in_target(fx, fy), in_distractor(fx, fy))
    };
    let mask = BinaryMask::from_fn(SCENE_SIZE, SCENE_SIZE, |x, y| classify(x, y).0);
    let distractor = BinaryMask::from_fn(SCENE_SIZE, SCENE_SIZE, |x, y| classify(x, y).1);
    for y in 0..SCENE_SIZE {
        for x in 0..SCENE_SIZE {
            if mask.get(x, y) {
                image.put_pixel(x, y, Rgb(TARGET_COLOR));
            } else if distractor.get(x, y) {
                image.put_pixel(x, y, Rgb(DISTRACTOR_COLOR));
            }
        }
    }
    SynthSample {
        id,
        image,
        mask,
        distractor: Some(distractor),
    }
}

/// Writes `<dir>/images/<id>.png` and `<dir>/masks/<id>.png` for every sample.
pub fn write_dataset(samples: &[SynthSample], dir: &Path) -> Result<()> {
    for s in samples {
        let mut png = Vec::new();
        image::DynamicImage::ImageRgb8(s.image.clone())
            .write_to(&mut std::io::Cursor::new(&mut png), image::ImageFormat::Png)
            .map_err(|e| Error::image(dir.join("images").join(&s.id), e))?;
        io_util::write_atomic(&dir.join("images").join(format!("{}.png", s.id)), &png)?;
        write_mask_png(&s.mask, dir.join("masks").join(format!("{}.png", s.id)))?;
    }
    Ok(())
}
