//! Dot-product kernel shared by retrieval, deduplication, and dense matching.
//!
//! Products are accumulated in eight `f32` lanes over blocks of 256
//! components; block partials are reduced in `f64`. For the 1024-wide
//! ViT-L embeddings this keeps the rounding error of a unit-vector dot
//! product well under 1e-6 while leaving the inner loop vectorizable.

const LANES: usize = 8;
const BLOCK: usize = 256;

/// Dot product of two equal-length slices.
///
/// Panics in debug builds if the lengths differ; callers validate
/// dimensions before reaching the kernel.
#[inline]
pub fn dot(a: &[f32], b: &[f32]) -> f32 {
    debug_assert_eq!(a.len(), b.len());
    let mut total = 0.0f64;
    for (block_a, block_b) in a.chunks(BLOCK).zip(b.chunks(BLOCK)) {
        let mut lanes = [0.0f32; LANES];
        let mut chunks_a = block_a.chunks_exact(LANES);
        let mut chunks_b = block_b.chunks_exact(LANES);
        for (xa, xb) in (&mut chunks_a).zip(&mut chunks_b) {
            for l in 0..LANES {
                lanes[l] += xa[l] * xb[l];
            }
        }
        let mut tail = 0.0f32;
        for (x, y) in chunks_a.remainder().iter().zip(chunks_b.remainder()) {
            tail += x * y;
        }
        total += lanes.iter().map(|&v| f64::from(v)).sum::<f64>() + f64::from(tail);
    }
    total as f32
}

/// Euclidean norm, accumulated in `f64`.
#[inline]
pub fn norm(v: &[f32]) -> f64 {
    v.iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>().sqrt()
}
