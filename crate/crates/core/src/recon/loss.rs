//! Pixel and total-variation losses with their gradients.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::image::GrayImage;

/// Weights of the loss terms. The perceptual term of the full method needs a
/// pretrained network and is not available, so its weight is always zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub beta_pix: f64,
    pub beta_tv: f64,
}

impl LossWeights {
    pub const BETA_PER: f64 = 0.0;

    pub fn new(beta_pix: f64, beta_tv: f64) -> Result<Self> {
        if !(beta_pix >= 0.0 && beta_tv >= 0.0 && beta_pix.is_finite() && beta_tv.is_finite()) {
            return Err(Error::invalid(format!("loss weights ({beta_pix}, {beta_tv}) must be non-negative")));
        }
        Ok(Self { beta_pix, beta_tv })
    }
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            beta_pix: 32.0,
            beta_tv: 2e-4,
        }
    }
}

fn same_shape(a: &GrayImage, b: &GrayImage) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(())
}

/// Mean absolute error.
pub fn loss_pixel(truth: &GrayImage, pred: &GrayImage) -> Result<f64> {
    same_shape(truth, pred)?;
    let n = truth.data().len() as f64;
    Ok(truth.data().iter().zip(pred.data()).map(|(a, b)| (a - b).abs()).sum::<f64>() / n)
}

/// Subgradient of [`loss_pixel`] with respect to `pred` (zero where equal).
pub fn loss_pixel_grad(truth: &GrayImage, pred: &GrayImage) -> Result<Array2<f64>> {
    same_shape(truth, pred)?;
    let n = truth.data().len() as f64;
    Ok(ndarray::Zip::from(truth.data())
        .and(pred.data())
        .map_collect(|&t, &p| if p > t { 1.0 / n } else if p < t { -1.0 / n } else { 0.0 }))
}

fn tv_pairs(h: usize, w: usize) -> usize {
    h.saturating_sub(1) * w + h * w.saturating_sub(1)
}

/// Anisotropic total variation: all vertical and horizontal neighbour
/// differences, averaged over the number of such pairs. Zero for a single pixel.
pub fn loss_tv(img: &GrayImage) -> f64 {
    let d = img.data();
    let (h, w) = d.dim();
    let pairs = tv_pairs(h, w);
    if pairs == 0 {
        return 0.0;
    }
    let mut sum = 0.0;
    for r in 0..h {
        for c in 0..w {
            if r + 1 < h {
                sum += (d[[r + 1, c]] - d[[r, c]]).abs();
            }
            if c + 1 < w {
                sum += (d[[r, c + 1]] - d[[r, c]]).abs();
            }
        }
    }
    sum / pairs as f64
}

pub fn loss_tv_grad(img: &GrayImage) -> Array2<f64> {
    let d = img.data();
    let (h, w) = d.dim();
    let mut g = Array2::zeros((h, w));
    let pairs = tv_pairs(h, w);
    if pairs == 0 {
        return g;
    }
    let s = 1.0 / pairs as f64;
    let sign = |v: f64| if v > 0.0 { s } else if v < 0.0 { -s } else { 0.0 };
    for r in 0..h {
        for c in 0..w {
            if r + 1 < h {
                let k = sign(d[[r + 1, c]] - d[[r, c]]);
                g[[r + 1, c]] += k;
                g[[r, c]] -= k;
            }
            if c + 1 < w {
                let k = sign(d[[r, c + 1]] - d[[r, c]]);
                g[[r, c + 1]] += k;
                g[[r, c]] -= k;
            }
        }
    }
    g
}

/// `beta_pix * L_pix(truth, pred) + beta_tv * L_tv(pred)`.
pub fn total_loss(truth: &GrayImage, pred: &GrayImage, w: &LossWeights) -> Result<f64> {
    Ok(w.beta_pix * loss_pixel(truth, pred)? + w.beta_tv * loss_tv(pred))
}

pub fn total_loss_grad(truth: &GrayImage, pred: &GrayImage, w: &LossWeights) -> Result<Array2<f64>> {
    Ok(loss_pixel_grad(truth, pred)? * w.beta_pix + loss_tv_grad(pred) * w.beta_tv)
}
