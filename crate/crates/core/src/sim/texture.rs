//! Procedural target textures in `[0, 1]`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::{GrayImage, RangeHint};

/// Constant-intensity texture.
pub fn uniform(height: usize, width: usize, value: f64) -> GrayImage {
    GrayImage::from_fn(height, width, RangeHint::Unit, |_| value).expect("finite constant")
}

/// Smooth random scene: Gaussian blobs plus a few axis-aligned rectangles,
/// rescaled to `[lo, hi]`.
pub fn blobs(height: usize, width: usize, seed: u64, lo: f64, hi: f64) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = height.max(width) as f64;
    let blobs: Vec<(f64, f64, f64, f64)> = (0..6)
        .map(|_| {
            (
                rng.gen_range(0.0..width as f64),
                rng.gen_range(0.0..height as f64),
                rng.gen_range(0.08..0.25) * scale,
                rng.gen_range(-1.0..1.0),
            )
        })
        .collect();
    let rects: Vec<(f64, f64, f64, f64, f64)> = (0..3)
        .map(|_| {
            let x0 = rng.gen_range(0.0..width as f64 * 0.8);
            let y0 = rng.gen_range(0.0..height as f64 * 0.8);
            (
                x0,
                y0,
                x0 + rng.gen_range(0.1..0.4) * width as f64,
                y0 + rng.gen_range(0.1..0.4) * height as f64,
                rng.gen_range(-0.6..0.6),
            )
        })
        .collect();
    let raw = GrayImage::from_fn(height, width, RangeHint::Raw, |(r, c)| {
        let (x, y) = (c as f64, r as f64);
        let mut v = 0.0;
        for &(bx, by, s, a) in &blobs {
            v += a * (-((x - bx).powi(2) + (y - by).powi(2)) / (2.0 * s * s)).exp();
        }
        for &(x0, y0, x1, y1, a) in &rects {
            if x >= x0 && x < x1 && y >= y0 && y < y1 {
                v += a;
            }
        }
        v
    })
    .expect("finite texture");
    rescale(&raw, lo, hi)
}

/// Dead-leaves texture: opaque discs with power-law radii and random gray
/// levels painted over each other, giving edges at all scales like natural images.
pub fn dead_leaves(height: usize, width: usize, seed: u64, lo: f64, hi: f64) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = height.max(width) as f64;
    let (r_min, r_max) = (0.02 * scale, 0.25 * scale);
    let mut data = ndarray::Array2::from_elem((height, width), rng.gen_range(lo..hi));
    let discs = (4.0 * (width * height) as f64 / (r_min * r_max)).ceil() as usize;
    for _ in 0..discs.min(4000) {
        // radius density proportional to r^-3 on [r_min, r_max]
        let u: f64 = rng.gen();
        let r = 1.0 / (1.0 / (r_min * r_min) - u * (1.0 / (r_min * r_min) - 1.0 / (r_max * r_max))).sqrt();
        let cx = rng.gen_range(-r..width as f64 + r);
        let cy = rng.gen_range(-r..height as f64 + r);
        let level = rng.gen_range(lo..hi);
        let (r0, r1) = ((cy - r).floor().max(0.0) as usize, ((cy + r).ceil() as usize).min(height));
        let (c0, c1) = ((cx - r).floor().max(0.0) as usize, ((cx + r).ceil() as usize).min(width));
        for row in r0..r1 {
            for col in c0..c1 {
                if (col as f64 - cx).powi(2) + (row as f64 - cy).powi(2) <= r * r {
                    data[[row, col]] = level;
                }
            }
        }
    }
    GrayImage::new(data, RangeHint::Unit).expect("finite texture")
}

/// Vertical bars of alternating intensity with period `period` pixels.
pub fn bars(height: usize, width: usize, period: usize, lo: f64, hi: f64) -> GrayImage {
    let period = period.max(2);
    GrayImage::from_fn(height, width, RangeHint::Unit, |(_, c)| {
        if (c % period) < period / 2 {
            hi
        } else {
            lo
        }
    })
    .expect("finite texture")
}

/// Scales log-intensity deviations from the geometric mean by `factor`.
pub fn scale_log_contrast(img: &GrayImage, factor: f64) -> Result<GrayImage> {
    if img.data().iter().any(|&v| v <= 0.0) {
        return Err(Error::invalid("log-contrast scaling needs positive intensities"));
    }
    let n = img.data().len() as f64;
    let mean_log = img.data().iter().map(|v| v.ln()).sum::<f64>() / n;
    let data = img
        .data()
        .mapv(|v| (mean_log + factor * (v.ln() - mean_log)).exp().min(1.0));
    GrayImage::new(data, RangeHint::Unit)
}

fn rescale(img: &GrayImage, lo: f64, hi: f64) -> GrayImage {
    let (a, b) = img.min_max();
    let span = if b > a { b - a } else { 1.0 };
    GrayImage::new(img.data().mapv(|v| lo + (hi - lo) * (v - a) / span), RangeHint::Unit)
        .expect("finite texture")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blobs_range_and_determinism() {
        let a = blobs(32, 40, 9, 0.1, 0.9);
        assert_eq!(a, blobs(32, 40, 9, 0.1, 0.9));
        let (lo, hi) = a.min_max();
        assert!((lo - 0.1).abs() < 1e-12 && (hi - 0.9).abs() < 1e-12);
        assert_ne!(a, blobs(32, 40, 10, 0.1, 0.9));
    }

    #[test]
    fn dead_leaves_range() {
        let a = dead_leaves(48, 48, 3, 0.1, 0.9);
        let (lo, hi) = a.min_max();
        assert!(lo >= 0.1 && hi <= 0.9 && hi - lo > 0.3);
        assert_eq!(a, dead_leaves(48, 48, 3, 0.1, 0.9));
    }

    #[test]
    fn log_contrast_zero_flattens() {
        let a = blobs(8, 8, 1, 0.2, 0.8);
        let flat = scale_log_contrast(&a, 0.0).unwrap();
        let (lo, hi) = flat.min_max();
        assert!(hi - lo < 1e-12);
    }
}
