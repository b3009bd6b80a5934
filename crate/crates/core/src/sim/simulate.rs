//! Idealized event-camera simulation of an occluded scene.
//!
//! Each pixel keeps a reference log-intensity level. The log signal is
//! linearly interpolated between camera-position samples, and an event fires
//! every time the signal moves a further `eta` away from the level of the last
//! event. Events carry ground-truth categories: a crossing is occluder-target
//! (OA) when occluder coverage of the pixel changed between the previous
//! event's reference state and the current crossing, otherwise it is OO for an
//! occluded pixel and AA for a visible one.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use super::scene::{render_rows, SceneSpec, ViewBuffers, MASK_COVERAGE};
use crate::dataset::{DatasetSample, TimedFrame, APS_PERIOD_US};
use crate::error::{Error, Result};
use crate::event::{Event, EventCategory, EventStream, LabeledEventStream, Polarity};
use crate::image::{GrayImage, RangeHint};

/// Largest per-sample log-intensity step, in multiples of `eta`.
pub const MAX_STEP_ETAS: f64 = 4.0;

/// Absolute slack on level crossings, absorbing round-off in `ln`.
const CROSSING_EPS: f64 = 1e-9;

/// Fronto-parallel uniform camera motion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trajectory {
    /// Camera velocity `(vx, vy)` in m/s.
    pub v: (f64, f64),
    /// Time window in microseconds.
    pub t_span: (u64, u64),
    /// Time at which the camera passes the reference viewpoint (position 0).
    pub t_ref: u64,
    /// Rendered camera positions per second.
    pub sample_rate: f64,
}

impl Trajectory {
    /// Horizontal sweep over `[0, duration_us]` centred on the reference view, sampled at 10 kHz.
    pub fn horizontal(v: f64, duration_us: u64) -> Self {
        Self {
            v: (v, 0.0),
            t_span: (0, duration_us),
            t_ref: duration_us / 2,
            sample_rate: 10_000.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (t0, t1) = self.t_span;
        if t0 >= t1 {
            return Err(Error::invalid(format!("zero-duration trajectory [{t0}, {t1}]")));
        }
        if self.t_ref < t0 || self.t_ref > t1 {
            return Err(Error::invalid(format!("reference time {} outside [{t0}, {t1}]", self.t_ref)));
        }
        if !(self.sample_rate > 0.0) || !self.v.0.is_finite() || !self.v.1.is_finite() {
            return Err(Error::invalid("sample rate must be positive and velocity finite"));
        }
        Ok(())
    }

    /// Camera position in metres at time `t` (µs).
    pub fn position(&self, t: f64) -> (f64, f64) {
        let dt = (t - self.t_ref as f64) * 1e-6;
        (self.v.0 * dt, self.v.1 * dt)
    }

    fn sample_times(&self) -> Vec<f64> {
        let (t0, t1) = self.t_span;
        let dur = (t1 - t0) as f64;
        let steps = ((dur * 1e-6 * self.sample_rate).ceil() as usize).max(1);
        (0..=steps)
            .map(|k| t0 as f64 + dur * k as f64 / steps as f64)
            .collect()
    }
}

struct RowsOutput {
    events: Vec<(Event, EventCategory)>,
    worst: Option<(f64, usize, usize)>,
}

fn simulate_rows(scene: &SceneSpec, traj: &Trajectory, times: &[f64], rows: std::ops::Range<usize>) -> RowsOutput {
    let res = scene.resolution;
    let width = res.width;
    let eta = scene.eta;
    let limit = MAX_STEP_ETAS * eta;
    let mut cur = ViewBuffers::new(res);
    let lo = rows.start * width;
    let hi = rows.end * width;

    let (cx, cy) = traj.position(times[0]);
    render_rows(scene, cx, cy, rows.clone(), &mut cur);
    let base: Vec<f64> = cur.log[lo..hi].to_vec();
    let mut prev_log = base.clone();
    let mut prev_cov: Vec<f64> = cur.coverage[lo..hi].to_vec();
    let mut level = vec![0i64; hi - lo];
    let mut transition = vec![false; hi - lo];

    let mut events = Vec::new();
    let mut worst: Option<(f64, usize, usize)> = None;

    for k in 1..times.len() {
        let (ta, tb) = (times[k - 1], times[k]);
        let (cx, cy) = traj.position(tb);
        render_rows(scene, cx, cy, rows.clone(), &mut cur);
        for i in 0..hi - lo {
            let la = prev_log[i];
            let lb = cur.log[lo + i];
            let cov_a = prev_cov[i];
            let cov_b = cur.coverage[lo + i];
            let delta = (lb - la).abs();
            if delta >= limit && worst.map_or(true, |w| delta > w.0) {
                worst = Some((delta, (lo + i) % width, (lo + i) / width));
            }
            let changing = cov_a != cov_b;
            let settled = if cov_b >= MASK_COVERAGE {
                EventCategory::OccluderOccluder
            } else {
                EventCategory::TargetTarget
            };
            let mut fired = false;
            loop {
                let reference = base[i] + level[i] as f64 * eta;
                let (p, next) = if lb - reference >= eta - CROSSING_EPS {
                    (Polarity::On, level[i] + 1)
                } else if reference - lb >= eta - CROSSING_EPS {
                    (Polarity::Off, level[i] - 1)
                } else {
                    break;
                };
                let target = base[i] + next as f64 * eta;
                let frac = if lb != la {
                    ((target - la) / (lb - la)).clamp(0.0, 1.0)
                } else {
                    1.0
                };
                let t = (ta + frac * (tb - ta)).round() as u64;
                let label = if transition[i] || changing {
                    EventCategory::OccluderTarget
                } else {
                    settled
                };
                let idx = lo + i;
                events.push((
                    Event::new(t, (idx % width) as u16, (idx / width) as u16, p),
                    label,
                ));
                level[i] = next;
                transition[i] = changing;
                fired = true;
            }
            if !fired {
                transition[i] |= changing;
            }
            prev_log[i] = lb;
            prev_cov[i] = cov_b;
        }
    }
    RowsOutput { events, worst }
}

/// Rows simulated per parallel task.
const ROW_CHUNK: usize = 8;

/// Simulates the event stream of `scene` under `traj`.
///
/// Returns the labelled stream and a dataset sample carrying ground-truth
/// speed, focal length and depth, 30 Hz occluded frames and the
/// occlusion-free frame at `traj.t_ref`.
pub fn simulate_events(
    scene: &SceneSpec,
    traj: &Trajectory,
    seed: u64,
) -> Result<(LabeledEventStream, DatasetSample)> {
    scene.validate()?;
    traj.validate()?;
    let res = scene.resolution;
    let times = traj.sample_times();

    let chunks: Vec<std::ops::Range<usize>> = (0..res.height)
        .step_by(ROW_CHUNK)
        .map(|r| r..(r + ROW_CHUNK).min(res.height))
        .collect();
    let outputs: Vec<RowsOutput> = chunks
        .into_par_iter()
        .map(|rows| simulate_rows(scene, traj, &times, rows))
        .collect();

    let limit = MAX_STEP_ETAS * scene.eta;
    let worst = outputs
        .iter()
        .filter_map(|o| o.worst)
        .fold(None, |acc: Option<(f64, usize, usize)>, w| match acc {
            Some(a) if a.0 >= w.0 => Some(a),
            _ => Some(w),
        });
    if let Some((delta, x, y)) = worst {
        return Err(Error::SamplingTooCoarse { x, y, delta, limit });
    }

    let mut labeled: Vec<(Event, EventCategory)> = outputs.into_iter().flat_map(|o| o.events).collect();
    add_noise(&mut labeled, scene, traj, seed);
    labeled.sort_by_key(|(e, _)| (e.t, e.y, e.x, e.p));

    let (events, labels): (Vec<Event>, Vec<EventCategory>) = labeled.into_iter().unzip();
    let stream = EventStream::new(events, res, traj.t_span)?;
    let sample = DatasetSample {
        v: traj.v.0,
        vy: traj.v.1,
        fx: scene.intrinsics.fx,
        fy: scene.intrinsics.fy,
        size: (res.height, res.width),
        depth: scene.depth,
        events: stream.clone(),
        occ_aps: occluded_frames(scene, traj),
        occ_free_aps: TimedFrame {
            t: traj.t_ref as i64,
            image: render_frame(&scene.without_occluder(), traj, traj.t_ref as f64),
        },
        t_offset: 0,
    };
    Ok((LabeledEventStream::new(stream, labels)?, sample))
}

/// Homogeneous Poisson noise: uniform pixel, time and polarity. Noise does not
/// disturb the pixels' reference levels.
fn add_noise(out: &mut Vec<(Event, EventCategory)>, scene: &SceneSpec, traj: &Trajectory, seed: u64) {
    let res = scene.resolution;
    let (t0, t1) = traj.t_span;
    let mean = scene.noise_rate * (t1 - t0) as f64 * 1e-6 * res.pixels() as f64;
    if mean <= 0.0 {
        return;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = Poisson::new(mean).expect("positive mean").sample(&mut rng) as usize;
    out.reserve(count);
    for _ in 0..count {
        let t = rng.gen_range(t0..=t1);
        let x = rng.gen_range(0..res.width) as u16;
        let y = rng.gen_range(0..res.height) as u16;
        let p = if rng.gen_bool(0.5) { Polarity::On } else { Polarity::Off };
        out.push((Event::new(t, x, y, p), EventCategory::Noise));
    }
}

fn render_frame(scene: &SceneSpec, traj: &Trajectory, t: f64) -> GrayImage {
    let res = scene.resolution;
    let mut buf = ViewBuffers::new(res);
    let (cx, cy) = traj.position(t);
    render_rows(scene, cx, cy, 0..res.height, &mut buf);
    let bytes: Vec<f64> = buf
        .intensity
        .iter()
        .map(|&v| (v * 255.0).round().clamp(0.0, 255.0))
        .collect();
    GrayImage::new(
        Array2::from_shape_vec((res.height, res.width), bytes).expect("buffer shape"),
        RangeHint::Byte,
    )
    .expect("finite frame")
}

fn occluded_frames(scene: &SceneSpec, traj: &Trajectory) -> Vec<TimedFrame> {
    let (t0, t1) = traj.t_span;
    (0..)
        .map(|k| t0 + k * APS_PERIOD_US as u64)
        .take_while(|&t| t <= t1)
        .map(|t| TimedFrame {
            t: t as i64,
            image: render_frame(scene, traj, t as f64),
        })
        .collect()
}
