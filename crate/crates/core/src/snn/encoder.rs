//! Three-layer spiking convolutional encoder and its surrogate-gradient backward pass.
//!
//! Layer 1 (1x1, 2 -> 8) takes the raw event-count frame of each interval as
//! current, layer 2 (3x3, 8 -> 16) takes layer-1 spikes, and layer 3
//! (7x7, 24 -> 32) takes layer-2 spikes with layer-1 spikes concatenated
//! behind them. All layers are bias-free and zero-padded. Membranes start at
//! rest and every interval's frame drives the same step.

use ndarray::{s, Array3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::lif::{membrane, surrogate_grad, LifConfig};
use crate::conv::{from_hwc, scatter_zero, scatter_zero_grad_in, scatter_zero_grad_w, Kernel};
use crate::error::{Error, Result};
use crate::stack::FrameStack;

/// Output channels of the three layers.
pub const ENCODER_CHANNELS: [usize; 3] = [8, 16, 32];
pub const ENCODER_KERNELS: [usize; 3] = [1, 3, 7];
/// Input channels of the three layers.
pub const ENCODER_INPUTS: [usize; 3] = [2, 8, 16 + 8];

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub layers: [Kernel; 3],
    pub lif: [LifConfig; 3],
}

impl EncoderParams {
    pub fn zeros(lif: LifConfig) -> Self {
        Self {
            layers: std::array::from_fn(|l| Kernel::zeros(ENCODER_CHANNELS[l], ENCODER_INPUTS[l], ENCODER_KERNELS[l], false)),
            lif: [lif; 3],
        }
    }

    /// Uniform random weights scaled by fan-in.
    ///
    /// Layer 1 sees event counts of a few per interval, the deeper layers see
    /// sparse binary spikes, so the deeper scales are larger.
    pub fn init(seed: u64, lif: LifConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gains = [1.0, 3.0, 3.0];
        Self {
            layers: std::array::from_fn(|l| {
                let fan = (ENCODER_INPUTS[l] * ENCODER_KERNELS[l] * ENCODER_KERNELS[l]) as f64;
                Kernel::uniform(
                    ENCODER_CHANNELS[l],
                    ENCODER_INPUTS[l],
                    ENCODER_KERNELS[l],
                    false,
                    gains[l] * lif.u_th.min(1e6) * (3.0 / fan).sqrt(),
                    &mut rng,
                )
            }),
            lif: [lif; 3],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (l, k) in self.layers.iter().enumerate() {
            k.validate()?;
            let want = (ENCODER_CHANNELS[l], ENCODER_INPUTS[l], ENCODER_KERNELS[l]);
            if (k.out_ch, k.in_ch, k.size) != want || k.bias.is_some() {
                return Err(Error::shape(format!(
                    "encoder layer {} is {}x{}x{} (bias {}), expected {:?} without bias",
                    l + 1,
                    k.out_ch,
                    k.in_ch,
                    k.size,
                    k.bias.is_some(),
                    want
                )));
            }
            self.lif[l].validate()?;
        }
        Ok(())
    }
}

/// How spikes are emitted to the next layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpikeMode {
    /// Binary spikes, `u > u_th`.
    #[default]
    Hard,
    /// Spikes replaced by the clipped ramp whose slope is the surrogate; the
    /// reset still uses the binary spike. The backward pass is the exact
    /// derivative of this forward, which makes it finite-difference checkable.
    Relaxed,
}

/// Membrane potentials of every layer at every step plus the input frames.
#[derive(Debug, Clone)]
pub struct SnnTrace {
    height: usize,
    width: usize,
    steps: usize,
    mode: SpikeMode,
    lif: [LifConfig; 3],
    frames: Vec<Vec<f64>>,
    potentials: [Vec<Vec<f64>>; 3],
}

impl SnnTrace {
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn mode(&self) -> SpikeMode {
        self.mode
    }

    /// Spike output of `layer` (0-based) at `step`, shaped `(C, H, W)`.
    pub fn spikes(&self, layer: usize, step: usize) -> Array3<f64> {
        let out = emit(&self.potentials[layer][step], &self.lif[layer], self.mode);
        from_hwc(&out, ENCODER_CHANNELS[layer], self.height, self.width)
    }

    /// Membrane potential of `layer` at `step`, shaped `(C, H, W)`.
    pub fn potential(&self, layer: usize, step: usize) -> Array3<f64> {
        from_hwc(&self.potentials[layer][step], ENCODER_CHANNELS[layer], self.height, self.width)
    }

    /// Total number of output spikes per layer.
    pub fn spike_counts(&self) -> [f64; 3] {
        std::array::from_fn(|l| {
            self.potentials[l]
                .iter()
                .map(|u| u.iter().map(|&v| self.lif[l].fires(v)).sum::<f64>())
                .sum()
        })
    }
}

/// Result of a forward pass.
#[derive(Debug, Clone)]
pub struct SnnOutput {
    /// Time-mean of layer-3 spikes, `(32, H, W)`.
    pub features: Array3<f64>,
    /// Time-mean of layer-1 spikes, `(8, H, W)`, forwarded to the decoder.
    pub skip: Array3<f64>,
    pub trace: SnnTrace,
}

fn emit(u: &[f64], cfg: &LifConfig, mode: SpikeMode) -> Vec<f64> {
    match mode {
        SpikeMode::Hard => u.iter().map(|&v| cfg.fires(v)).collect(),
        SpikeMode::Relaxed => u.iter().map(|&v| cfg.ramp(v)).collect(),
    }
}

fn frame_hwc(stack: &FrameStack, t: usize) -> Vec<f64> {
    let (h, w) = (stack.height(), stack.width());
    let d = stack.data();
    let mut out = vec![0.0; h * w * 2];
    for c in 0..2 {
        for y in 0..h {
            for x in 0..w {
                out[(y * w + x) * 2 + c] = d[[t, c, y, x]];
            }
        }
    }
    out
}

fn concat(a: &[f64], ca: usize, b: &[f64], cb: usize) -> Vec<f64> {
    let px = a.len() / ca;
    let mut out = Vec::with_capacity(px * (ca + cb));
    for p in 0..px {
        out.extend_from_slice(&a[p * ca..(p + 1) * ca]);
        out.extend_from_slice(&b[p * cb..(p + 1) * cb]);
    }
    out
}

/// Binary-spike forward pass; returns the features and the trace.
pub fn snn_forward(stack: &FrameStack, params: &EncoderParams) -> Result<(Array3<f64>, SnnTrace)> {
    let out = snn_forward_mode(stack, params, SpikeMode::Hard)?;
    Ok((out.features, out.trace))
}

pub fn snn_forward_mode(stack: &FrameStack, params: &EncoderParams, mode: SpikeMode) -> Result<SnnOutput> {
    params.validate()?;
    let (n, h, w) = (stack.intervals(), stack.height(), stack.width());
    let hw = h * w;
    let kernels: Vec<Vec<f64>> = params.layers.iter().map(|k| k.in_major()).collect();
    let mut u: [Vec<f64>; 3] = std::array::from_fn(|l| vec![0.0; hw * ENCODER_CHANNELS[l]]);
    let mut gate: [Vec<f64>; 3] = std::array::from_fn(|l| vec![0.0; hw * ENCODER_CHANNELS[l]]);
    let mut currents: [Vec<f64>; 3] = std::array::from_fn(|l| vec![0.0; hw * ENCODER_CHANNELS[l]]);
    let mut feat_sum = vec![0.0; hw * ENCODER_CHANNELS[2]];
    let mut skip_sum = vec![0.0; hw * ENCODER_CHANNELS[0]];
    let mut frames = Vec::with_capacity(n);
    let mut potentials: [Vec<Vec<f64>>; 3] = Default::default();

    for t in 0..n {
        let frame = frame_hwc(stack, t);
        let mut input = frame.clone();
        let mut o1 = Vec::new();
        for l in 0..3 {
            if l == 2 {
                input = concat(&input, ENCODER_CHANNELS[1], &o1, ENCODER_CHANNELS[0]);
            }
            let cfg = &params.lif[l];
            scatter_zero(
                &kernels[l],
                ENCODER_KERNELS[l],
                (ENCODER_INPUTS[l], ENCODER_CHANNELS[l]),
                (h, w),
                &input,
                &mut currents[l],
            );
            for ((u, g), &i) in u[l].iter_mut().zip(gate[l].iter_mut()).zip(&currents[l]) {
                *u = membrane(cfg.alpha, *u, *g, i);
                *g = cfg.fires(*u);
            }
            let out = emit(&u[l], cfg, mode);
            potentials[l].push(u[l].clone());
            match l {
                0 => {
                    skip_sum.iter_mut().zip(&out).for_each(|(a, b)| *a += b);
                    o1 = out.clone();
                }
                2 => feat_sum.iter_mut().zip(&out).for_each(|(a, b)| *a += b),
                _ => {}
            }
            input = out;
        }
        frames.push(frame);
    }

    let nf = n as f64;
    feat_sum.iter_mut().for_each(|v| *v /= nf);
    skip_sum.iter_mut().for_each(|v| *v /= nf);
    Ok(SnnOutput {
        features: from_hwc(&feat_sum, ENCODER_CHANNELS[2], h, w),
        skip: from_hwc(&skip_sum, ENCODER_CHANNELS[0], h, w),
        trace: SnnTrace {
            height: h,
            width: w,
            steps: n,
            mode,
            lif: params.lif,
            frames,
            potentials,
        },
    })
}

/// Gradients for the three encoder kernels.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderGrads {
    pub layers: [Kernel; 3],
}

/// Backpropagation through time.
///
/// `grad_features` is `d loss / d features`; `grad_skip` optionally adds the
/// gradient with respect to the layer-1 spike mean. Spikes are differentiated
/// with the surrogate, the leak through `alpha * (1 - o)` exactly, with the
/// reset spike `o` held constant.
pub fn snn_backward(
    trace: &SnnTrace,
    params: &EncoderParams,
    grad_features: &Array3<f64>,
    grad_skip: Option<&Array3<f64>>,
) -> Result<EncoderGrads> {
    let (h, w) = (trace.height, trace.width);
    let hw = h * w;
    let [c1, c2, c3] = ENCODER_CHANNELS;
    if grad_features.dim() != (c3, h, w) {
        return Err(Error::shape(format!(
            "feature gradient {:?}, trace expects {:?}",
            grad_features.dim(),
            (c3, h, w)
        )));
    }
    if let Some(g) = grad_skip {
        if g.dim() != (c1, h, w) {
            return Err(Error::shape(format!("skip gradient {:?}, expected {:?}", g.dim(), (c1, h, w))));
        }
    }
    if trace.lif != params.lif {
        return Err(Error::invalid("trace was recorded with different neuron settings"));
    }
    params.validate()?;

    let nf = trace.steps as f64;
    let gf: Vec<f64> = crate::conv::to_hwc(grad_features).into_iter().map(|v| v / nf).collect();
    let gs: Vec<f64> = match grad_skip {
        Some(g) => crate::conv::to_hwc(g).into_iter().map(|v| v / nf).collect(),
        None => vec![0.0; hw * c1],
    };
    let kernels: Vec<Vec<f64>> = params.layers.iter().map(|k| k.in_major()).collect();
    let mut grads: Vec<Vec<f64>> = params.layers.iter().map(|k| vec![0.0; k.weights.len()]).collect();
    let mut next: [Vec<f64>; 3] = std::array::from_fn(|l| vec![0.0; hw * ENCODER_CHANNELS[l]]);
    let mut gin3 = vec![0.0; hw * (c2 + c1)];
    let mut gin2 = vec![0.0; hw * c1];
    let lif = &trace.lif;
    let mode = trace.mode;

    // d loss / d u at this step, given d loss / d o and the carried gradient from step t+1
    let step_grad = |gout: &dyn Fn(usize) -> f64, u: &[f64], carry: &mut Vec<f64>, cfg: &LifConfig| {
        for (i, c) in carry.iter_mut().enumerate() {
            let g = gout(i) * surrogate_grad(u[i], cfg) + *c;
            *c = g;
        }
    };

    for t in (0..trace.steps).rev() {
        let u1 = &trace.potentials[0][t];
        let u2 = &trace.potentials[1][t];
        let u3 = &trace.potentials[2][t];
        let o1 = emit(u1, &lif[0], mode);
        let o2 = emit(u2, &lif[1], mode);

        // carried terms: alpha * (1 - o(t)) * du(t+1)
        for l in 0..3 {
            let u = &trace.potentials[l][t];
            let cfg = &lif[l];
            for (c, &v) in next[l].iter_mut().zip(u) {
                *c *= cfg.alpha * (1.0 - cfg.fires(v));
            }
        }

        // layer 3
        step_grad(&|i| gf[i], u3, &mut next[2], &lif[2]);
        let in3 = concat(&o2, c2, &o1, c1);
        scatter_zero_grad_w(7, (c2 + c1, c3), (h, w), &in3, &next[2], &mut grads[2]);
        scatter_zero_grad_in(
            &kernels[2],
            7,
            (c2 + c1, c3),
            (h, w),
            &next[2],
            |p, ci| {
                if ci < c2 {
                    surrogate_grad(u2[p * c2 + ci], &lif[1]) != 0.0
                } else {
                    surrogate_grad(u1[p * c1 + ci - c2], &lif[0]) != 0.0
                }
            },
            &mut gin3,
        );

        // layer 2
        step_grad(&|i| gin3[(i / c2) * (c2 + c1) + i % c2], u2, &mut next[1], &lif[1]);
        scatter_zero_grad_w(3, (c1, c2), (h, w), &o1, &next[1], &mut grads[1]);
        scatter_zero_grad_in(
            &kernels[1],
            3,
            (c1, c2),
            (h, w),
            &next[1],
            |p, ci| surrogate_grad(u1[p * c1 + ci], &lif[0]) != 0.0,
            &mut gin2,
        );

        // layer 1
        step_grad(
            &|i| gs[i] + gin3[(i / c1) * (c2 + c1) + c2 + i % c1] + gin2[i],
            u1,
            &mut next[0],
            &lif[0],
        );
        scatter_zero_grad_w(1, (2, c1), (h, w), &trace.frames[t], &next[0], &mut grads[0]);
    }

    let mut out = EncoderGrads {
        layers: std::array::from_fn(|l| params.layers[l].zeros_like()),
    };
    for (k, g) in out.layers.iter_mut().zip(&grads) {
        k.add_in_major(g);
    }
    Ok(out)
}

/// Time-mean of the raw two-polarity frames, `(2, H, W)`.
pub fn mean_frame(stack: &FrameStack) -> Array3<f64> {
    let n = stack.intervals() as f64;
    let d = stack.data();
    let mut out = Array3::zeros((2, stack.height(), stack.width()));
    for t in 0..stack.intervals() {
        out += &d.slice(s![t, .., .., ..]);
    }
    out.mapv_inplace(|v| v / n);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array4;
    use rand::Rng;

    fn random_stack(n: usize, h: usize, w: usize, seed: u64) -> FrameStack {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = Array4::from_shape_fn((n, 2, h, w), |_| if rng.gen_bool(0.4) { rng.gen_range(1..5) as f64 } else { 0.0 });
        FrameStack::new(data, (0..=n).map(|i| i as f64 * 10.0).collect()).unwrap()
    }

    #[test]
    fn zero_stack_gives_zero_features() {
        let st = FrameStack::new(Array4::zeros((4, 2, 5, 5)), vec![0.0, 1.0, 2.0, 3.0, 4.0]).unwrap();
        let (f, _) = snn_forward(&st, &EncoderParams::init(1, LifConfig::default())).unwrap();
        assert_eq!(f.dim(), (32, 5, 5));
        assert!(f.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn features_are_multiples_of_one_over_n() {
        let st = random_stack(5, 6, 6, 2);
        let (f, tr) = snn_forward(&st, &EncoderParams::init(3, LifConfig::default())).unwrap();
        for &v in f.iter() {
            let k = v * 5.0;
            assert!((k - k.round()).abs() < 1e-12 && (0.0..=1.0).contains(&v));
        }
        assert!(tr.spike_counts()[2] > 0.0, "init should produce some layer-3 activity");
    }

    #[test]
    fn zero_upstream_gradient_gives_zero_grads() {
        let st = random_stack(3, 5, 5, 4);
        let p = EncoderParams::init(5, LifConfig::default());
        let (_, tr) = snn_forward(&st, &p).unwrap();
        let g = snn_backward(&tr, &p, &Array3::zeros((32, 5, 5)), None).unwrap();
        assert!(g.layers.iter().all(|k| k.weights.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn backward_rejects_mismatched_gradient() {
        let st = random_stack(2, 4, 4, 6);
        let p = EncoderParams::init(1, LifConfig::default());
        let (_, tr) = snn_forward(&st, &p).unwrap();
        assert!(snn_backward(&tr, &p, &Array3::zeros((32, 4, 5)), None).is_err());
    }

    #[test]
    fn deterministic() {
        let st = random_stack(4, 6, 6, 7);
        let p = EncoderParams::init(8, LifConfig::default());
        let (a, ta) = snn_forward(&st, &p).unwrap();
        let (b, _) = snn_forward(&st, &p).unwrap();
        assert_eq!(a, b);
        let g = Array3::from_elem((32, 6, 6), 0.3);
        assert_eq!(snn_backward(&ta, &p, &g, None).unwrap(), snn_backward(&ta, &p, &g, None).unwrap());
    }

    #[test]
    fn mean_frame_averages() {
        let st = random_stack(3, 2, 2, 9);
        let m = mean_frame(&st);
        let d = st.data();
        assert!((m[[1, 1, 0]] - (d[[0, 1, 1, 0]] + d[[1, 1, 1, 0]] + d[[2, 1, 1, 0]]) / 3.0).abs() < 1e-12);
    }
}
