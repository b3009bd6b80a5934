//! Polarity-blind event-count images.

use ndarray::Array2;

use super::warp::EventPoints;
use crate::image::{GrayImage, RangeHint};

/// How an event with real-valued coordinates is assigned to pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Voting {
    /// Whole count to the nearest pixel centre.
    #[default]
    Nearest,
    /// Count split over the four neighbouring pixels.
    Bilinear,
}

impl std::str::FromStr for Voting {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> crate::error::Result<Self> {
        match s {
            "nearest" => Ok(Voting::Nearest),
            "bilinear" => Ok(Voting::Bilinear),
            other => Err(crate::error::Error::invalid(format!("unknown voting {other:?}"))),
        }
    }
}

/// Counts events per pixel ignoring polarity; events (or bilinear shares) outside the frame are dropped.
pub fn accumulate<S: EventPoints + ?Sized>(stream: &S, voting: Voting) -> GrayImage {
    let res = stream.resolution();
    let mut counts = vec![0.0; res.pixels()];
    for i in 0..stream.len() {
        let (_, x, y, _) = stream.point(i);
        vote(&mut counts, res.width, res.height, x, y, voting);
    }
    GrayImage::new(
        Array2::from_shape_vec((res.height, res.width), counts).expect("count buffer"),
        RangeHint::Raw,
    )
    .expect("finite counts")
}

#[inline]
pub(crate) fn vote(counts: &mut [f64], width: usize, height: usize, x: f64, y: f64, voting: Voting) {
    match voting {
        Voting::Nearest => {
            let (c, r) = (x.round(), y.round());
            if c >= 0.0 && r >= 0.0 && (c as usize) < width && (r as usize) < height {
                counts[r as usize * width + c as usize] += 1.0;
            }
        }
        Voting::Bilinear => {
            let (x0, y0) = (x.floor(), y.floor());
            let (fx, fy) = (x - x0, y - y0);
            let (x0, y0) = (x0 as i64, y0 as i64);
            let w = width as i64;
            let h = height as i64;
            let mut put = |cx: i64, cy: i64, wt: f64| {
                if wt != 0.0 && cx >= 0 && cy >= 0 && cx < w && cy < h {
                    counts[(cy * w + cx) as usize] += wt;
                }
            };
            put(x0, y0, (1.0 - fx) * (1.0 - fy));
            put(x0 + 1, y0, fx * (1.0 - fy));
            put(x0, y0 + 1, (1.0 - fx) * fy);
            put(x0 + 1, y0 + 1, fx * fy);
        }
    }
}
