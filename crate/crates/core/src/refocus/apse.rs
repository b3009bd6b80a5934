//! Average pixel shift error of an estimated warp rate.

use super::warp::WarpParam;
use crate::error::{Error, Result};
use crate::event::EventStream;

/// Mean over all events of `|(psi_est - psi_gt) * |t - t_ref||`, in pixels.
///
/// `t_ref` is taken from the ground truth. The mean runs over the full stream.
pub fn apse(psi_est: &WarpParam, psi_gt: &WarpParam, stream: &EventStream) -> Result<f64> {
    if stream.is_empty() {
        return Err(Error::Empty("APSE needs at least one event".into()));
    }
    let dpsi = (psi_est.psi.0 - psi_gt.psi.0).hypot(psi_est.psi.1 - psi_gt.psi.1);
    let total: f64 = stream
        .events()
        .iter()
        .map(|e| dpsi * psi_gt.dt(e.t).abs())
        .sum();
    Ok(total / stream.len() as f64)
}
