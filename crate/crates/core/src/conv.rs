//! Square stride-1 convolutions on channel-last (`H, W, C`) buffers.
//!
//! Two padding modes are supported: zeros, used by the spiking encoder with a
//! sparse input-driven scatter, and reflection, used by the dense decoder.

use ndarray::Array3;
use rand::Rng;

use crate::error::{Error, Result};

/// Weights `[out][in][ky][kx]` plus an optional per-output bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    pub out_ch: usize,
    pub in_ch: usize,
    pub size: usize,
    pub weights: Vec<f64>,
    pub bias: Option<Vec<f64>>,
}

impl Kernel {
    pub fn zeros(out_ch: usize, in_ch: usize, size: usize, with_bias: bool) -> Self {
        Self {
            out_ch,
            in_ch,
            size,
            weights: vec![0.0; out_ch * in_ch * size * size],
            bias: with_bias.then(|| vec![0.0; out_ch]),
        }
    }

    /// Weights drawn from `U(-scale, scale)`, zero bias.
    pub fn uniform(out_ch: usize, in_ch: usize, size: usize, with_bias: bool, scale: f64, rng: &mut impl Rng) -> Self {
        let mut k = Self::zeros(out_ch, in_ch, size, with_bias);
        for w in &mut k.weights {
            *w = rng.gen_range(-scale..=scale);
        }
        k
    }

    #[inline]
    pub fn index(&self, co: usize, ci: usize, ky: usize, kx: usize) -> usize {
        ((co * self.in_ch + ci) * self.size + ky) * self.size + kx
    }

    #[inline]
    pub fn get(&self, co: usize, ci: usize, ky: usize, kx: usize) -> f64 {
        self.weights[self.index(co, ci, ky, kx)]
    }

    pub fn fan_in(&self) -> usize {
        self.in_ch * self.size * self.size
    }

    pub fn validate(&self) -> Result<()> {
        if self.size % 2 == 0 {
            return Err(Error::shape(format!("kernel size {} must be odd", self.size)));
        }
        if self.weights.len() != self.out_ch * self.fan_in() {
            return Err(Error::shape(format!(
                "{} weights for a {}x{}x{}x{} kernel",
                self.weights.len(),
                self.out_ch,
                self.in_ch,
                self.size,
                self.size
            )));
        }
        if let Some(b) = &self.bias {
            if b.len() != self.out_ch {
                return Err(Error::shape(format!("{} biases for {} outputs", b.len(), self.out_ch)));
            }
        }
        if self.weights.iter().chain(self.bias.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite kernel parameter"));
        }
        Ok(())
    }

    /// Same structure, all zeros.
    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.out_ch, self.in_ch, self.size, self.bias.is_some())
    }

    /// Weights reordered to `[in][ky][kx][out]`.
    pub(crate) fn in_major(&self) -> Vec<f64> {
        let mut t = vec![0.0; self.weights.len()];
        let k = self.size;
        for co in 0..self.out_ch {
            for ci in 0..self.in_ch {
                for ky in 0..k {
                    for kx in 0..k {
                        t[((ci * k + ky) * k + kx) * self.out_ch + co] = self.get(co, ci, ky, kx);
                    }
                }
            }
        }
        t
    }

    /// Inverse of [`Kernel::in_major`], accumulated into `self.weights`.
    pub(crate) fn add_in_major(&mut self, t: &[f64]) {
        let k = self.size;
        for co in 0..self.out_ch {
            for ci in 0..self.in_ch {
                for ky in 0..k {
                    for kx in 0..k {
                        let i = self.index(co, ci, ky, kx);
                        self.weights[i] += t[((ci * k + ky) * k + kx) * self.out_ch + co];
                    }
                }
            }
        }
    }

    /// Weights reordered to `[out][ky][kx][in]`.
    pub(crate) fn out_major(&self) -> Vec<f64> {
        let mut t = vec![0.0; self.weights.len()];
        let k = self.size;
        for co in 0..self.out_ch {
            for ci in 0..self.in_ch {
                for ky in 0..k {
                    for kx in 0..k {
                        t[((co * k + ky) * k + kx) * self.in_ch + ci] = self.get(co, ci, ky, kx);
                    }
                }
            }
        }
        t
    }

    pub(crate) fn add_out_major(&mut self, t: &[f64]) {
        let k = self.size;
        for co in 0..self.out_ch {
            for ci in 0..self.in_ch {
                for ky in 0..k {
                    for kx in 0..k {
                        let i = self.index(co, ci, ky, kx);
                        self.weights[i] += t[((co * k + ky) * k + kx) * self.in_ch + ci];
                    }
                }
            }
        }
    }

    /// Weight and bias slices, in that order.
    pub fn tensors(&self) -> impl Iterator<Item = &Vec<f64>> {
        std::iter::once(&self.weights).chain(self.bias.iter())
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Vec<f64>> {
        std::iter::once(&mut self.weights).chain(self.bias.iter_mut())
    }
}

/// `(C, H, W)` array to a channel-last buffer.
pub(crate) fn to_hwc(a: &Array3<f64>) -> Vec<f64> {
    let (c, h, w) = a.dim();
    let mut out = vec![0.0; c * h * w];
    for ((ch, y, x), v) in a.indexed_iter() {
        out[(y * w + x) * c + ch] = *v;
    }
    out
}

pub(crate) fn from_hwc(buf: &[f64], c: usize, h: usize, w: usize) -> Array3<f64> {
    Array3::from_shape_fn((c, h, w), |(ch, y, x)| buf[(y * w + x) * c + ch])
}

#[inline]
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let r = if i < 0 {
        -i
    } else if i >= n {
        2 * (n - 1) - i
    } else {
        i
    };
    r as usize
}

/// Zero-padded convolution driven by the nonzero inputs.
///
/// Inputs are visited in `(ci, iy, ix)` order, so every output receives its
/// terms in `(ci, ky, kx)` order, exactly as a per-output direct sum would.
/// `w_in` comes from [`Kernel::in_major`]; `out` is overwritten.
pub(crate) fn scatter_zero(
    w_in: &[f64],
    k: usize,
    (ci_n, co_n): (usize, usize),
    (h, w): (usize, usize),
    input: &[f64],
    out: &mut [f64],
) {
    out.iter_mut().for_each(|v| *v = 0.0);
    let r = (k / 2) as isize;
    for ci in 0..ci_n {
        for iy in 0..h {
            for ix in 0..w {
                let v = input[(iy * w + ix) * ci_n + ci];
                if v == 0.0 {
                    continue;
                }
                for ky in 0..k {
                    let y = iy as isize - ky as isize + r;
                    if y < 0 || y >= h as isize {
                        continue;
                    }
                    for kx in 0..k {
                        let x = ix as isize - kx as isize + r;
                        if x < 0 || x >= w as isize {
                            continue;
                        }
                        let o = (y as usize * w + x as usize) * co_n;
                        let wr = &w_in[((ci * k + ky) * k + kx) * co_n..][..co_n];
                        for (acc, wt) in out[o..o + co_n].iter_mut().zip(wr) {
                            *acc += wt * v;
                        }
                    }
                }
            }
        }
    }
}

/// Accumulates `d loss / d w` (in `in_major` order) of [`scatter_zero`] given the output gradient.
pub(crate) fn scatter_zero_grad_w(
    k: usize,
    (ci_n, co_n): (usize, usize),
    (h, w): (usize, usize),
    input: &[f64],
    grad_out: &[f64],
    grad_w_in: &mut [f64],
) {
    let r = (k / 2) as isize;
    for iy in 0..h {
        for ix in 0..w {
            for ci in 0..ci_n {
                let v = input[(iy * w + ix) * ci_n + ci];
                if v == 0.0 {
                    continue;
                }
                for ky in 0..k {
                    let y = iy as isize - ky as isize + r;
                    if y < 0 || y >= h as isize {
                        continue;
                    }
                    for kx in 0..k {
                        let x = ix as isize - kx as isize + r;
                        if x < 0 || x >= w as isize {
                            continue;
                        }
                        let g = &grad_out[(y as usize * w + x as usize) * co_n..][..co_n];
                        let gw = &mut grad_w_in[((ci * k + ky) * k + kx) * co_n..][..co_n];
                        for (acc, gv) in gw.iter_mut().zip(g) {
                            *acc += gv * v;
                        }
                    }
                }
            }
        }
    }
}

/// Input gradient of [`scatter_zero`], computed only where `mask` is set; other entries are zero.
pub(crate) fn scatter_zero_grad_in(
    w_in: &[f64],
    k: usize,
    (ci_n, co_n): (usize, usize),
    (h, w): (usize, usize),
    grad_out: &[f64],
    mask: impl Fn(usize, usize) -> bool,
    grad_in: &mut [f64],
) {
    let r = (k / 2) as isize;
    for iy in 0..h {
        for ix in 0..w {
            let p = iy * w + ix;
            for ci in 0..ci_n {
                if !mask(p, ci) {
                    grad_in[p * ci_n + ci] = 0.0;
                    continue;
                }
                let mut acc = 0.0;
                for ky in 0..k {
                    let y = iy as isize - ky as isize + r;
                    if y < 0 || y >= h as isize {
                        continue;
                    }
                    for kx in 0..k {
                        let x = ix as isize - kx as isize + r;
                        if x < 0 || x >= w as isize {
                            continue;
                        }
                        let g = &grad_out[(y as usize * w + x as usize) * co_n..][..co_n];
                        let wr = &w_in[((ci * k + ky) * k + kx) * co_n..][..co_n];
                        acc += g.iter().zip(wr).map(|(a, b)| a * b).sum::<f64>();
                    }
                }
                grad_in[p * ci_n + ci] = acc;
            }
        }
    }
}

/// Dense reflection-padded convolution with bias; `w_out` comes from [`Kernel::out_major`].
pub(crate) fn conv_reflect(kernel: &Kernel, w_out: &[f64], (h, w): (usize, usize), input: &[f64], out: &mut [f64]) {
    let (ci_n, co_n, k) = (kernel.in_ch, kernel.out_ch, kernel.size);
    let r = (k / 2) as isize;
    for y in 0..h {
        for x in 0..w {
            let o = (y * w + x) * co_n;
            for co in 0..co_n {
                let mut acc = kernel.bias.as_ref().map_or(0.0, |b| b[co]);
                for ky in 0..k {
                    let sy = reflect(y as isize + ky as isize - r, h);
                    for kx in 0..k {
                        let sx = reflect(x as isize + kx as isize - r, w);
                        let src = &input[(sy * w + sx) * ci_n..][..ci_n];
                        let wr = &w_out[((co * k + ky) * k + kx) * ci_n..][..ci_n];
                        acc += src.iter().zip(wr).map(|(a, b)| a * b).sum::<f64>();
                    }
                }
                out[o + co] = acc;
            }
        }
    }
}

/// Backward pass of [`conv_reflect`]: accumulates weight (out-major) and bias
/// gradients and writes the input gradient.
pub(crate) fn conv_reflect_grad(
    kernel: &Kernel,
    w_out: &[f64],
    (h, w): (usize, usize),
    input: &[f64],
    grad_out: &[f64],
    grad_w_out: &mut [f64],
    grad_b: &mut [f64],
    grad_in: Option<&mut [f64]>,
) {
    let (ci_n, co_n, k) = (kernel.in_ch, kernel.out_ch, kernel.size);
    let r = (k / 2) as isize;
    let mut grad_in = grad_in;
    if let Some(g) = grad_in.as_deref_mut() {
        g.iter_mut().for_each(|v| *v = 0.0);
    }
    for y in 0..h {
        for x in 0..w {
            for co in 0..co_n {
                let g = grad_out[(y * w + x) * co_n + co];
                if g == 0.0 {
                    continue;
                }
                if !grad_b.is_empty() {
                    grad_b[co] += g;
                }
                for ky in 0..k {
                    let sy = reflect(y as isize + ky as isize - r, h);
                    for kx in 0..k {
                        let sx = reflect(x as isize + kx as isize - r, w);
                        let s = (sy * w + sx) * ci_n;
                        let wi = ((co * k + ky) * k + kx) * ci_n;
                        for ci in 0..ci_n {
                            grad_w_out[wi + ci] += g * input[s + ci];
                        }
                        if let Some(gi) = grad_in.as_deref_mut() {
                            for ci in 0..ci_n {
                                gi[s + ci] += g * w_out[wi + ci];
                            }
                        }
                    }
                }
            }
        }
    }
}
