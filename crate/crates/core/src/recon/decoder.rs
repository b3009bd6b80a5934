//! Three-layer convolutional decoder from encoder features to an image.

use ndarray::{Array2, Array3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::conv::{conv_reflect, conv_reflect_grad, from_hwc, to_hwc, Kernel};
use crate::error::{Error, Result};
use crate::image::{GrayImage, RangeHint};

/// 32 encoder features, 8 layer-1 spike rates, 2 mean event-count channels.
pub const DECODER_INPUT_CHANNELS: usize = 42;
const WIDTHS: [(usize, usize); 3] = [(DECODER_INPUT_CHANNELS, 16), (16, 8), (8, 1)];

/// 3x3 reflection-padded convolutions with biases: ReLU, ReLU, logistic.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderParams {
    pub layers: [Kernel; 3],
}

impl DecoderParams {
    pub fn zeros() -> Self {
        Self {
            layers: std::array::from_fn(|l| Kernel::zeros(WIDTHS[l].1, WIDTHS[l].0, 3, true)),
        }
    }

    /// He-style uniform init for the rectified layers, a smaller output layer.
    pub fn init(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gains = [2.0f64.sqrt(), 2.0f64.sqrt(), 0.5];
        Self {
            layers: std::array::from_fn(|l| {
                let (ci, co) = WIDTHS[l];
                let scale = gains[l] * (3.0 / (ci * 9) as f64).sqrt();
                Kernel::uniform(co, ci, 3, true, scale, &mut rng)
            }),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (l, k) in self.layers.iter().enumerate() {
            k.validate()?;
            if (k.in_ch, k.out_ch, k.size) != (WIDTHS[l].0, WIDTHS[l].1, 3) || k.bias.is_none() {
                return Err(Error::shape(format!(
                    "decoder layer {} is {}->{} {}x{}, expected {}->{} 3x3 with bias",
                    l + 1,
                    k.in_ch,
                    k.out_ch,
                    k.size,
                    k.size,
                    WIDTHS[l].0,
                    WIDTHS[l].1
                )));
            }
        }
        Ok(())
    }
}

/// Activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct DecoderTrace {
    height: usize,
    width: usize,
    inputs: [Vec<f64>; 3],
    pre: [Vec<f64>; 3],
    output: Vec<f64>,
}

fn logistic(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

pub fn decoder_forward(input: &Array3<f64>, params: &DecoderParams) -> Result<GrayImage> {
    Ok(decoder_forward_trace(input, params)?.0)
}

pub fn decoder_forward_trace(input: &Array3<f64>, params: &DecoderParams) -> Result<(GrayImage, DecoderTrace)> {
    params.validate()?;
    let (c, h, w) = input.dim();
    if c != DECODER_INPUT_CHANNELS {
        return Err(Error::shape(format!("decoder input has {c} channels, expected {DECODER_INPUT_CHANNELS}")));
    }
    if h < 2 || w < 2 {
        return Err(Error::shape(format!("reflection padding needs at least 2x2, got {h}x{w}")));
    }
    let mut x = to_hwc(input);
    let mut inputs: [Vec<f64>; 3] = Default::default();
    let mut pre: [Vec<f64>; 3] = Default::default();
    for (l, k) in params.layers.iter().enumerate() {
        let mut out = vec![0.0; h * w * k.out_ch];
        conv_reflect(k, &k.out_major(), (h, w), &x, &mut out);
        inputs[l] = std::mem::take(&mut x);
        x = if l < 2 {
            out.iter().map(|v| v.max(0.0)).collect()
        } else {
            out.iter().map(|&v| logistic(v)).collect()
        };
        pre[l] = out;
    }
    let img = GrayImage::new(Array2::from_shape_vec((h, w), x.clone()).expect("decoder output"), RangeHint::Unit)?;
    Ok((
        img,
        DecoderTrace {
            height: h,
            width: w,
            inputs,
            pre,
            output: x,
        },
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderGrads {
    pub layers: [Kernel; 3],
}

/// Parameter gradients and the input gradient `(42, H, W)` for `d loss / d output`.
pub fn decoder_backward(
    trace: &DecoderTrace,
    params: &DecoderParams,
    grad_output: &Array2<f64>,
) -> Result<(DecoderGrads, Array3<f64>)> {
    let (h, w) = (trace.height, trace.width);
    if grad_output.dim() != (h, w) {
        return Err(Error::shape(format!("output gradient {:?}, expected {:?}", grad_output.dim(), (h, w))));
    }
    params.validate()?;
    let mut g: Vec<f64> = grad_output
        .iter()
        .zip(&trace.output)
        .map(|(g, y)| g * y * (1.0 - y))
        .collect();
    let mut grads = DecoderGrads {
        layers: std::array::from_fn(|l| params.layers[l].zeros_like()),
    };
    for l in (0..3).rev() {
        let k = &params.layers[l];
        if l < 2 {
            for (gv, &p) in g.iter_mut().zip(&trace.pre[l]) {
                if p <= 0.0 {
                    *gv = 0.0;
                }
            }
        }
        let mut gw = vec![0.0; k.weights.len()];
        let mut gb = vec![0.0; k.out_ch];
        let mut gin = vec![0.0; h * w * k.in_ch];
        conv_reflect_grad(k, &k.out_major(), (h, w), &trace.inputs[l], &g, &mut gw, &mut gb, Some(&mut gin));
        grads.layers[l].add_out_major(&gw);
        grads.layers[l].bias = Some(gb);
        g = gin;
    }
    Ok((grads, from_hwc(&g, DECODER_INPUT_CHANNELS, h, w)))
}
