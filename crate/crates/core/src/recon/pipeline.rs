//! Accumulation baseline and the hybrid spiking/convolutional reconstruction.

use ndarray::{concatenate, Array3, Axis};

use super::decoder::{decoder_forward, DecoderParams};
use crate::error::Result;
use crate::event::EventStream;
use crate::image::{normalize_minmax, GrayImage};
use crate::refocus::{accumulate, warp_events, EventPoints, Voting, WarpParam};
use crate::snn::{mean_frame, snn_forward_mode, EncoderParams, SnnOutput, SpikeMode};
use crate::stack::{stack_events, FrameStack};

/// Polarity-blind nearest-pixel counts of refocused events, min-max normalized.
pub fn reconstruct_acc<S: EventPoints + ?Sized>(refocused: &S) -> GrayImage {
    normalize_minmax(&accumulate(refocused, Voting::Nearest))
}

/// Decoder input: encoder features, layer-1 spike rates, mean event counts.
pub fn hybrid_input(encoded: &SnnOutput, stack: &FrameStack) -> Array3<f64> {
    concatenate(
        Axis(0),
        &[encoded.features.view(), encoded.skip.view(), mean_frame(stack).view()],
    )
    .expect("matching spatial shapes")
}

/// Encoder then decoder on an already stacked (refocused) input.
pub fn infer_stack(stack: &FrameStack, enc: &EncoderParams, dec: &DecoderParams) -> Result<GrayImage> {
    let encoded = snn_forward_mode(stack, enc, SpikeMode::Hard)?;
    decoder_forward(&hybrid_input(&encoded, stack), dec)
}

/// Refocus, bin into `intervals` frames over the stream span, encode and decode.
pub fn reconstruct_hybrid(
    stream: &EventStream,
    w: &WarpParam,
    enc: &EncoderParams,
    dec: &DecoderParams,
    intervals: usize,
) -> Result<GrayImage> {
    let refocused = warp_events(stream, w);
    let stack = stack_events(&refocused, intervals, stream.t_span())?;
    infer_stack(&stack, enc, dec)
}
