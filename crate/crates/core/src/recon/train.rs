//! Joint training of encoder and decoder.
//!
//! Mini-batch Adam with a cosine learning-rate schedule restarted every
//! `t_max` epochs. Per-sample gradients may be computed in parallel but are
//! summed in batch order, so a run is reproducible from its seed.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::decoder::{decoder_backward, decoder_forward_trace, DecoderGrads, DecoderParams};
use super::loss::{total_loss, total_loss_grad, LossWeights};
use super::metrics::psnr;
use super::pipeline::{hybrid_input, infer_stack};
use crate::conv::Kernel;
use crate::error::{Error, Result};
use crate::image::{GrayImage, RangeHint};
use crate::snn::{snn_backward, snn_forward_mode, EncoderGrads, EncoderParams, LifConfig, SpikeMode, ENCODER_CHANNELS};
use crate::stack::FrameStack;

/// A refocused frame stack and its occlusion-free target in `[0, 1]`.
#[derive(Debug, Clone)]
pub struct TrainSample {
    pub stack: FrameStack,
    pub truth: GrayImage,
}

impl TrainSample {
    pub fn new(stack: FrameStack, truth: GrayImage) -> Result<Self> {
        if (stack.height(), stack.width()) != truth.shape() {
            return Err(Error::shape(format!(
                "stack {}x{} vs truth {:?}",
                stack.height(),
                stack.width(),
                truth.shape()
            )));
        }
        if truth.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid("truth image must lie in [0, 1]"));
        }
        let truth = GrayImage::new(truth.into_data(), RangeHint::Unit)?;
        Ok(Self { stack, truth })
    }

    fn crop(&self, top: usize, left: usize, size: usize) -> Result<Self> {
        let t = self.truth.data().slice(ndarray::s![top..top + size, left..left + size]).to_owned();
        Ok(Self {
            stack: self.stack.crop(top, left, size, size)?,
            truth: GrayImage::new(t, RangeHint::Unit)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Cosine schedule period in epochs.
    pub t_max: usize,
    pub seed: u64,
    /// Time intervals per stack.
    pub intervals: usize,
    pub loss: LossWeights,
    pub lif: LifConfig,
    /// Train on random square crops of this size instead of whole frames.
    pub crop: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 64,
            batch_size: 4,
            learning_rate: 5e-4,
            t_max: 64,
            seed: 0,
            intervals: 30,
            loss: LossWeights::default(),
            lif: LifConfig::default(),
            crop: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.t_max == 0 || self.intervals == 0 {
            return Err(Error::invalid("batch size, t_max and intervals must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(format!("learning rate {} must be positive", self.learning_rate)));
        }
        if self.crop == Some(0) || self.crop == Some(1) {
            return Err(Error::invalid("crop must be at least 2 pixels"));
        }
        self.lif.validate()
    }

    /// Learning rate for a 0-based epoch.
    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        let phase = (epoch % self.t_max) as f64 / self.t_max as f64;
        self.learning_rate * 0.5 * (1.0 + (std::f64::consts::PI * phase).cos())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean training loss over the epoch's samples.
    pub loss: f64,
    /// Mean validation PSNR (peak 1) after the epoch, if a validation set was given.
    pub psnr_val: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub encoder: EncoderParams,
    pub decoder: DecoderParams,
    pub history: Vec<EpochRecord>,
}

/// Loss and parameter gradients for one sample.
pub fn sample_gradients(
    sample: &TrainSample,
    enc: &EncoderParams,
    dec: &DecoderParams,
    weights: &LossWeights,
    mode: SpikeMode,
) -> Result<(f64, EncoderGrads, DecoderGrads)> {
    let encoded = snn_forward_mode(&sample.stack, enc, mode)?;
    let input = hybrid_input(&encoded, &sample.stack);
    let (pred, trace) = decoder_forward_trace(&input, dec)?;
    let loss = total_loss(&sample.truth, &pred, weights)?;
    let g_out = total_loss_grad(&sample.truth, &pred, weights)?;
    let (dec_grads, g_in) = decoder_backward(&trace, dec, &g_out)?;
    let [c1, _, c3] = ENCODER_CHANNELS;
    let g_feat = g_in.slice(ndarray::s![0..c3, .., ..]).to_owned();
    let g_skip = g_in.slice(ndarray::s![c3..c3 + c1, .., ..]).to_owned();
    let enc_grads = snn_backward(&encoded.trace, enc, &g_feat, Some(&g_skip))?;
    Ok((loss, enc_grads, dec_grads))
}

fn kernels_mut<'a>(enc: &'a mut [Kernel; 3], dec: &'a mut [Kernel; 3]) -> Vec<&'a mut Vec<f64>> {
    enc.iter_mut().chain(dec.iter_mut()).flat_map(|k| k.tensors_mut()).collect()
}

fn kernels<'a>(enc: &'a [Kernel; 3], dec: &'a [Kernel; 3]) -> Vec<&'a Vec<f64>> {
    enc.iter().chain(dec.iter()).flat_map(|k| k.tensors()).collect()
}

struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(shapes: &[&Vec<f64>]) -> Self {
        Self {
            m: shapes.iter().map(|t| vec![0.0; t.len()]).collect(),
            v: shapes.iter().map(|t| vec![0.0; t.len()]).collect(),
            step: 0,
        }
    }

    fn update(&mut self, params: Vec<&mut Vec<f64>>, grads: &[&Vec<f64>], lr: f64) {
        self.step += 1;
        let c1 = 1.0 - Self::B1.powi(self.step);
        let c2 = 1.0 - Self::B2.powi(self.step);
        for (i, p) in params.into_iter().enumerate() {
            for (j, w) in p.iter_mut().enumerate() {
                let g = grads[i][j];
                let m = &mut self.m[i][j];
                let v = &mut self.v[i][j];
                *m = Self::B1 * *m + (1.0 - Self::B1) * g;
                *v = Self::B2 * *v + (1.0 - Self::B2) * g * g;
                *w -= lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
            }
        }
    }
}

pub fn train(dataset: &[TrainSample], cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_with_validation(dataset, &[], cfg)
}

/// Trains from the seed's initialization. `validation` only feeds `psnr_val`.
pub fn train_with_validation(dataset: &[TrainSample], validation: &[TrainSample], cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::Empty("training set".into()));
    }
    for (i, s) in dataset.iter().chain(validation).enumerate() {
        if s.stack.intervals() != cfg.intervals {
            return Err(Error::shape(format!(
                "sample {i} has {} intervals, config says {}",
                s.stack.intervals(),
                cfg.intervals
            )));
        }
        if let Some(c) = cfg.crop {
            if c > s.stack.height() || c > s.stack.width() {
                return Err(Error::invalid(format!("crop {c} larger than sample {i}")));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut enc = EncoderParams::init(rng.gen(), cfg.lif);
    let mut dec = DecoderParams::init(rng.gen());
    let mut adam = Adam::new(&kernels(&enc.layers, &dec.layers));
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..dataset.len()).collect();

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let lr = cfg.learning_rate_at(epoch);
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let batch: Vec<TrainSample> = batch
                .iter()
                .map(|&i| match cfg.crop {
                    Some(c) => {
                        let s = &dataset[i];
                        let top = rng.gen_range(0..=s.stack.height() - c);
                        let left = rng.gen_range(0..=s.stack.width() - c);
                        s.crop(top, left, c)
                    }
                    None => Ok(dataset[i].clone()),
                })
                .collect::<Result<_>>()?;
            let results: Vec<_> = batch
                .par_iter()
                .map(|s| sample_gradients(s, &enc, &dec, &cfg.loss, SpikeMode::Hard))
                .collect::<Result<_>>()?;
            let mut enc_sum = EncoderParams::zeros(cfg.lif).layers;
            let mut dec_sum = DecoderParams::zeros().layers;
            for (loss, ge, gd) in &results {
                loss_sum += loss;
                for (acc, g) in kernels_mut(&mut enc_sum, &mut dec_sum).into_iter().zip(kernels(&ge.layers, &gd.layers)) {
                    acc.iter_mut().zip(g).for_each(|(a, b)| *a += b);
                }
            }
            let scale = 1.0 / results.len() as f64;
            let mut grads = kernels_mut(&mut enc_sum, &mut dec_sum);
            grads.iter_mut().for_each(|g| g.iter_mut().for_each(|v| *v *= scale));
            if grads.iter().any(|g| g.iter().any(|v| !v.is_finite())) {
                return Err(Error::Divergence { epoch: epoch + 1 });
            }
            let grads: Vec<&Vec<f64>> = grads.into_iter().map(|g| &*g).collect();
            adam.update(kernels_mut(&mut enc.layers, &mut dec.layers), &grads, lr);
        }
        let loss = loss_sum / dataset.len() as f64;
        if !loss.is_finite() {
            return Err(Error::Divergence { epoch: epoch + 1 });
        }
        let psnr_val = if validation.is_empty() {
            None
        } else {
            Some(mean_psnr(validation, &enc, &dec)?)
        };
        history.push(EpochRecord {
            epoch: epoch + 1,
            loss,
            psnr_val,
        });
    }
    Ok(TrainOutcome {
        encoder: enc,
        decoder: dec,
        history,
    })
}

/// Mean PSNR (peak 1) of hybrid reconstructions over `samples`.
pub fn mean_psnr(samples: &[TrainSample], enc: &EncoderParams, dec: &DecoderParams) -> Result<f64> {
    let scores: Vec<f64> = samples
        .par_iter()
        .map(|s| psnr(&infer_stack(&s.stack, enc, dec)?, &s.truth, 1.0))
        .collect::<Result<_>>()?;
    Ok(scores.iter().sum::<f64>() / scores.len().max(1) as f64)
}

/// `epoch,loss,psnr_val` CSV; an absent validation PSNR is left empty.
pub fn history_csv(history: &[EpochRecord]) -> String {
    let mut out = String::from("epoch,loss,psnr_val\n");
    for r in history {
        let v = r.psnr_val.map(|v| format!("{v:.6}")).unwrap_or_default();
        writeln!(out, "{},{:.9},{}", r.epoch, r.loss, v).expect("string write");
    }
    out
}

pub fn write_history(history: &[EpochRecord], path: &Path) -> Result<()> {
    std::fs::write(path, history_csv(history)).map_err(|e| Error::io(path, e))
}
