//! Event-based synthetic aperture imaging.
//!
//! A moving event camera looks at a target through a dense occluder. Events
//! are refocused onto the target plane by warping them back to a reference
//! viewpoint, after which the occluded scene is reconstructed either by
//! accumulating counts or with a hybrid spiking/convolutional network.
//!
//! Modules:
//! - [`event`], [`stack`], [`io`], [`dataset`], [`image`]: data types and file formats
//! - [`sim`]: synthetic occluded scenes with ground truth
//! - [`refocus`]: warping, accumulation, focus search, E-EPIs and APSE
//! - [`snn`]: leaky integrate-and-fire encoder with surrogate-gradient training support
//! - [`recon`]: reconstruction, losses, training and image-quality metrics
//! - [`checkpoint`]: the `ESNN` parameter file shared by encoder and decoder

pub mod checkpoint;
pub mod conv;
pub mod dataset;
pub mod error;
pub mod event;
pub mod image;
pub mod io;
pub mod recon;
pub mod refocus;
pub mod sim;
pub mod snn;
pub mod stack;
pub mod stats;

pub use dataset::{load_sample, save_sample, DatasetSample, TimedFrame};
pub use error::{Error, Result};
pub use event::{split_polarity, Event, EventCategory, EventStream, LabeledEventStream, Polarity, Resolution};
pub use image::{normalize_minmax, GrayImage, RangeHint};
pub use io::{read_events, write_events, EventFormat};
pub use refocus::{SubpixelEventStream, WarpParam};
pub use stack::{stack_events, FrameStack};
