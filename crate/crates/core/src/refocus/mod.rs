//! Refocusing of event fields onto a target plane.

pub mod accumulate;
pub mod apse;
pub mod epi;
pub mod focus;
pub mod warp;

pub use accumulate::{accumulate, Voting};
pub use apse::apse;
pub use epi::{epi_slice, EpiImage, EpiMode};
pub use focus::{auto_refocus, focus_score, focus_score_with, FocusMetric, FocusObjective, RefocusSearch};
pub use warp::{
    compute_psi, warp_events, warp_events_general, CameraPose, EventPoints, SubpixelEvent, SubpixelEventStream,
    WarpParam,
};
