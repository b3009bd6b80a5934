//! Event-based epipolar plane images: one sensor row plotted against viewpoint.
//!
//! Under uniform motion the viewpoint is proportional to time, so the
//! vertical axis bins time over the stream span.

use ndarray::Array2;

use super::warp::EventPoints;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EpiMode {
    /// Event counts.
    #[default]
    Merged,
    /// Sum of polarities.
    Signed,
}

impl std::str::FromStr for EpiMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "merged" => Ok(EpiMode::Merged),
            "signed" => Ok(EpiMode::Signed),
            other => Err(Error::invalid(format!("unknown EPI mode {other:?}"))),
        }
    }
}

/// A `(viewpoint bins, width)` slice of the event field at one row.
#[derive(Debug, Clone, PartialEq)]
pub struct EpiImage {
    pub data: Array2<f64>,
    pub mode: EpiMode,
    pub row: usize,
}

pub fn epi_slice<S: EventPoints + ?Sized>(
    stream: &S,
    row: usize,
    theta_bins: usize,
    mode: EpiMode,
) -> Result<EpiImage> {
    let res = stream.resolution();
    if row >= res.height {
        return Err(Error::invalid(format!("row {row} outside sensor height {}", res.height)));
    }
    if theta_bins == 0 {
        return Err(Error::invalid("theta_bins must be positive"));
    }
    let (t0, t1) = stream.t_span();
    let span = (t1 - t0).max(1) as u128;
    let mut data = Array2::zeros((theta_bins, res.width));
    for i in 0..stream.len() {
        let (t, x, y, p) = stream.point(i);
        if y.round() != row as f64 {
            continue;
        }
        let col = x.round();
        if col < 0.0 || col >= res.width as f64 {
            continue;
        }
        let bin = ((t.saturating_sub(t0) as u128 * theta_bins as u128 / span) as usize).min(theta_bins - 1);
        data[[bin, col as usize]] += match mode {
            EpiMode::Merged => 1.0,
            EpiMode::Signed => p.sign() as f64,
        };
    }
    Ok(EpiImage { data, mode, row })
}
