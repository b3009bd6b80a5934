//! Reconstruction of the occluded target, training, and image metrics.

pub mod decoder;
pub mod loss;
pub mod metrics;
pub mod pipeline;
pub mod train;

pub use decoder::{decoder_backward, decoder_forward, decoder_forward_trace, DecoderGrads, DecoderParams, DecoderTrace, DECODER_INPUT_CHANNELS};
pub use loss::{loss_pixel, loss_pixel_grad, loss_tv, loss_tv_grad, total_loss, total_loss_grad, LossWeights};
pub use metrics::{psnr, ssim, PSNR_CAP_DB};
pub use pipeline::{hybrid_input, infer_stack, reconstruct_acc, reconstruct_hybrid};
pub use train::{
    history_csv, mean_psnr, sample_gradients, train, train_with_validation, write_history, EpochRecord, TrainConfig,
    TrainOutcome, TrainSample,
};
