//! Leaky integrate-and-fire spiking encoder.

pub mod encoder;
pub mod lif;

pub use encoder::{
    mean_frame, snn_backward, snn_forward, snn_forward_mode, EncoderGrads, EncoderParams, SnnOutput, SnnTrace,
    SpikeMode, ENCODER_CHANNELS, ENCODER_INPUTS, ENCODER_KERNELS,
};
pub use lif::{lif_step, membrane, surrogate_grad, LifConfig, LifLayerState, U_REST};
