//! PSNR and single-scale SSIM.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::image::{GrayImage, RangeHint};

pub const PSNR_CAP_DB: f64 = 99.0;
const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

fn check(a: &GrayImage, b: &GrayImage) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    if a.data().is_empty() {
        return Err(Error::Empty("image".into()));
    }
    Ok(())
}

/// `10 log10(peak^2 / MSE)`, capped at 99 dB.
pub fn psnr(a: &GrayImage, b: &GrayImage, peak: f64) -> Result<f64> {
    check(a, b)?;
    if !(peak > 0.0 && peak.is_finite()) {
        return Err(Error::invalid(format!("peak {peak} must be positive")));
    }
    let mse = a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.data().len() as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (peak * peak / mse).log10()).min(PSNR_CAP_DB))
}

fn gaussian_window(size: usize) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let g: Vec<f64> = (0..size)
        .map(|i| (-((i as f64 - c).powi(2)) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|v| v / s).collect()
}

/// Separable Gaussian filter, valid region only.
fn filter_valid(x: &Array2<f64>, g: &[f64]) -> Array2<f64> {
    let (h, w) = x.dim();
    let k = g.len();
    let (oh, ow) = (h - k + 1, w - k + 1);
    let mut rows = Array2::<f64>::zeros((h, ow));
    for r in 0..h {
        for c in 0..ow {
            rows[[r, c]] = (0..k).map(|i| g[i] * x[[r, c + i]]).sum();
        }
    }
    let mut out = Array2::<f64>::zeros((oh, ow));
    for r in 0..oh {
        for c in 0..ow {
            out[[r, c]] = (0..k).map(|i| g[i] * rows[[r + i, c]]).sum();
        }
    }
    out
}

/// Mean SSIM over all valid Gaussian windows (11x11, sigma 1.5; shrunk to the
/// image for smaller inputs). Dynamic range 255 for byte images, else 1.
pub fn ssim(a: &GrayImage, b: &GrayImage) -> Result<f64> {
    check(a, b)?;
    let range = if a.range_hint() == RangeHint::Byte { 255.0 } else { 1.0 };
    let (h, w) = a.shape();
    let size = SSIM_WINDOW.min(h).min(w);
    let g = gaussian_window(size);
    let (x, y) = (a.data(), b.data());
    let mx = filter_valid(x, &g);
    let my = filter_valid(y, &g);
    let sxx = filter_valid(&(x * x), &g) - &mx * &mx;
    let syy = filter_valid(&(y * y), &g) - &my * &my;
    let sxy = filter_valid(&(x * y), &g) - &mx * &my;
    let c1 = (SSIM_K1 * range).powi(2);
    let c2 = (SSIM_K2 * range).powi(2);
    let map = ndarray::Zip::from(&mx)
        .and(&my)
        .and(&sxx)
        .and(&syy)
        .and(&sxy)
        .map_collect(|&mx, &my, &sxx, &syy, &sxy| {
            ((2.0 * mx * my + c1) * (2.0 * sxy + c2)) / ((mx * mx + my * my + c1) * (sxx + syy + c2))
        });
    Ok(map.mean().expect("non-empty ssim map"))
}
