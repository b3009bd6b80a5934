//! Focus measures over count images and the refocusing-parameter search.
//!
//! A correctly refocused event field piles events from the same target point
//! onto the same pixel (high count variance) while still covering the target
//! (high density). The search scores a coarse grid of warp rates and refines
//! the best grid point with golden-section search, one axis at a time.

use rayon::prelude::*;

use super::accumulate::{vote, Voting};
use super::warp::WarpParam;
use crate::error::{Error, Result};
use crate::event::EventStream;
use crate::image::GrayImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FocusMetric {
    /// Population variance of the counts.
    Variance,
    /// Fraction of pixels whose count reaches the density threshold.
    Density,
    /// Variance times density.
    #[default]
    Combined,
}

impl std::str::FromStr for FocusMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "variance" => Ok(FocusMetric::Variance),
            "density" => Ok(FocusMetric::Density),
            "combined" => Ok(FocusMetric::Combined),
            other => Err(Error::invalid(format!("unknown focus metric {other:?}"))),
        }
    }
}

/// Default density threshold (one event).
pub const DENSITY_THRESHOLD: f64 = 1.0;

pub fn focus_score(counts: &GrayImage, metric: FocusMetric) -> f64 {
    score_slice(counts.data().as_slice().expect("standard layout"), metric, DENSITY_THRESHOLD)
}

pub fn focus_score_with(counts: &GrayImage, metric: FocusMetric, threshold: f64) -> f64 {
    score_slice(counts.data().as_slice().expect("standard layout"), metric, threshold)
}

fn score_slice(counts: &[f64], metric: FocusMetric, threshold: f64) -> f64 {
    let n = counts.len() as f64;
    if counts.is_empty() {
        return 0.0;
    }
    let variance = || {
        let mean = counts.iter().sum::<f64>() / n;
        counts.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / n
    };
    let density = || counts.iter().filter(|&&c| c >= threshold).count() as f64 / n;
    match metric {
        FocusMetric::Variance => variance(),
        FocusMetric::Density => density(),
        FocusMetric::Combined => variance() * density(),
    }
}

/// Search settings for [`auto_refocus`].
#[derive(Debug, Clone, PartialEq)]
pub struct RefocusSearch {
    /// Horizontal warp-rate bounds (px/s); `None` pins the axis at zero.
    pub x_bounds: Option<(f64, f64)>,
    /// Vertical warp-rate bounds (px/s); `None` pins the axis at zero.
    pub y_bounds: Option<(f64, f64)>,
    pub grid_points: usize,
    pub refine_iters: usize,
    pub metric: FocusMetric,
    pub voting: Voting,
    /// Reference time; the stream-span midpoint when `None`.
    pub t_ref: Option<u64>,
}

impl Default for RefocusSearch {
    fn default() -> Self {
        Self {
            x_bounds: Some((-200.0, 200.0)),
            y_bounds: None,
            grid_points: 41,
            refine_iters: 30,
            metric: FocusMetric::Combined,
            voting: Voting::Bilinear,
            t_ref: None,
        }
    }
}

impl RefocusSearch {
    pub fn horizontal(lo: f64, hi: f64) -> Self {
        Self {
            x_bounds: Some((lo, hi)),
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        for (axis, b) in [("x", self.x_bounds), ("y", self.y_bounds)] {
            if let Some((lo, hi)) = b {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(Error::invalid(format!("degenerate {axis} bounds ({lo}, {hi})")));
                }
            }
        }
        if self.x_bounds.is_none() && self.y_bounds.is_none() {
            return Err(Error::invalid("at least one axis must be searched"));
        }
        if self.grid_points < 2 {
            return Err(Error::invalid("grid needs at least two points per axis"));
        }
        Ok(())
    }
}

/// Scores warp candidates for one stream; holds per-event offsets.
pub struct FocusObjective {
    xs: Vec<f64>,
    ys: Vec<f64>,
    dts: Vec<f64>,
    width: usize,
    height: usize,
    metric: FocusMetric,
    voting: Voting,
}

impl FocusObjective {
    pub fn new(stream: &EventStream, t_ref: u64, metric: FocusMetric, voting: Voting) -> Self {
        let probe = WarpParam {
            psi: (0.0, 0.0),
            t_ref,
        };
        let ev = stream.events();
        let res = stream.resolution();
        Self {
            xs: ev.iter().map(|e| e.x as f64).collect(),
            ys: ev.iter().map(|e| e.y as f64).collect(),
            dts: ev.iter().map(|e| probe.dt(e.t)).collect(),
            width: res.width,
            height: res.height,
            metric,
            voting,
        }
    }

    pub fn score(&self, psi: (f64, f64)) -> f64 {
        let mut counts = vec![0.0; self.width * self.height];
        for i in 0..self.xs.len() {
            let dt = self.dts[i];
            vote(
                &mut counts,
                self.width,
                self.height,
                self.xs[i] + psi.0 * dt,
                self.ys[i] + psi.1 * dt,
                self.voting,
            );
        }
        score_slice(&counts, self.metric, DENSITY_THRESHOLD)
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// `a` beats `b`: higher score, ties to the smaller warp magnitude.
fn better(a: (f64, (f64, f64)), b: (f64, (f64, f64))) -> bool {
    let norm = |p: (f64, f64)| p.0.hypot(p.1);
    a.0 > b.0 || (a.0 == b.0 && norm(a.1) < norm(b.1))
}

/// Golden-section maximization of `f` on `[lo, hi]`.
/// Returns the best point evaluated together with its score.
fn golden_max(mut lo: f64, mut hi: f64, iters: usize, f: impl Fn(f64) -> f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut best = if f2 > f1 { (f2, x2) } else { (f1, x1) };
    for _ in 0..iters {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
            if f1 > best.0 {
                best = (f1, x1);
            }
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
            if f2 > best.0 {
                best = (f2, x2);
            }
        }
    }
    (best.1, best.0)
}

/// Estimates the warp rate that best focuses `stream`.
pub fn auto_refocus(stream: &EventStream, search: &RefocusSearch) -> Result<WarpParam> {
    if stream.is_empty() {
        return Err(Error::Empty("cannot refocus an empty stream".into()));
    }
    search.validate()?;
    let t_ref = search.t_ref.unwrap_or_else(|| stream.t_mid());
    let objective = FocusObjective::new(stream, t_ref, search.metric, search.voting);

    let axis_grid = |b: Option<(f64, f64)>| match b {
        Some((lo, hi)) => linspace(lo, hi, search.grid_points),
        None => vec![0.0],
    };
    let gx = axis_grid(search.x_bounds);
    let gy = axis_grid(search.y_bounds);
    let candidates: Vec<(f64, f64)> = gy
        .iter()
        .flat_map(|&y| gx.iter().map(move |&x| (x, y)))
        .collect();
    let scores: Vec<f64> = candidates.par_iter().map(|&p| objective.score(p)).collect();
    let mut best = (scores[0], candidates[0]);
    for (&s, &p) in scores.iter().zip(&candidates).skip(1) {
        if better((s, p), best) {
            best = (s, p);
        }
    }

    // refine each searched axis inside one grid step of the coarse optimum
    let (mut score, mut psi) = best;
    for axis in 0..2 {
        let bounds = if axis == 0 { search.x_bounds } else { search.y_bounds };
        let Some((lo, hi)) = bounds else { continue };
        let step = (hi - lo) / (search.grid_points - 1) as f64;
        let centre = if axis == 0 { psi.0 } else { psi.1 };
        let a = (centre - step).max(lo);
        let b = (centre + step).min(hi);
        let at = |v: f64| if axis == 0 { (v, psi.1) } else { (psi.0, v) };
        let (v, s) = golden_max(a, b, search.refine_iters, |v| objective.score(at(v)));
        if s > score {
            score = s;
            psi = at(v);
        }
    }
    WarpParam::new(psi.0, psi.1, t_ref)
}
