//! Event-field refocusing: per-event projection onto the reference viewpoint.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::event::{Event, EventStream, Polarity, Resolution};

/// Uniform-motion refocusing parameter in pixels per second, about `t_ref` (µs).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WarpParam {
    pub psi: (f64, f64),
    pub t_ref: u64,
}

impl WarpParam {
    pub fn new(psi_x: f64, psi_y: f64, t_ref: u64) -> Result<Self> {
        if !psi_x.is_finite() || !psi_y.is_finite() {
            return Err(Error::invalid(format!("non-finite warp ({psi_x}, {psi_y})")));
        }
        Ok(Self {
            psi: (psi_x, psi_y),
            t_ref,
        })
    }

    /// Time offset from the reference in seconds.
    #[inline]
    pub fn dt(&self, t: u64) -> f64 {
        (t as i64 - self.t_ref as i64) as f64 * 1e-6
    }
}

/// `psi = (fx * vx / d, fy * vy / d)` for camera speed `v` (m/s) and target depth `d` (m).
pub fn compute_psi(f: (f64, f64), v: (f64, f64), d: f64, t_ref: u64) -> Result<WarpParam> {
    if !(d > 0.0) {
        return Err(Error::invalid(format!("depth {d} must be positive")));
    }
    WarpParam::new(f.0 * v.0 / d, f.1 * v.1 / d, t_ref)
}

/// An event with real-valued (refocused) coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubpixelEvent {
    pub t: u64,
    pub x: f64,
    pub y: f64,
    pub p: Polarity,
}

/// Refocused events. Coordinates are not clipped to the sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct SubpixelEventStream {
    events: Vec<SubpixelEvent>,
    resolution: Resolution,
    t_span: (u64, u64),
}

impl SubpixelEventStream {
    pub fn new(events: Vec<SubpixelEvent>, resolution: Resolution, t_span: (u64, u64)) -> Result<Self> {
        if events.windows(2).any(|w| w[0].t > w[1].t) {
            return Err(Error::invalid("subpixel events must be sorted by time"));
        }
        Ok(Self {
            events,
            resolution,
            t_span,
        })
    }

    pub fn events(&self) -> &[SubpixelEvent] {
        &self.events
    }

    pub fn resolution(&self) -> Resolution {
        self.resolution
    }

    pub fn t_span(&self) -> (u64, u64) {
        self.t_span
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Integer-pixel stream: coordinates rounded to the nearest pixel, events leaving the frame dropped.
    pub fn rasterize(&self) -> EventStream {
        let Resolution { width, height } = self.resolution;
        let events = self
            .events
            .iter()
            .filter_map(|e| {
                let (c, r) = (e.x.round(), e.y.round());
                (c >= 0.0 && r >= 0.0 && (c as usize) < width && (r as usize) < height)
                    .then(|| Event::new(e.t, c as u16, r as u16, e.p))
            })
            .collect();
        EventStream::new(events, self.resolution, self.t_span).expect("sorted in-frame events")
    }
}

/// Anything that yields `(t, x, y, p)` points on a sensor.
pub trait EventPoints {
    fn resolution(&self) -> Resolution;
    fn t_span(&self) -> (u64, u64);
    fn len(&self) -> usize;
    fn point(&self, i: usize) -> (u64, f64, f64, Polarity);

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl EventPoints for EventStream {
    fn resolution(&self) -> Resolution {
        EventStream::resolution(self)
    }
    fn t_span(&self) -> (u64, u64) {
        EventStream::t_span(self)
    }
    fn len(&self) -> usize {
        EventStream::len(self)
    }
    #[inline]
    fn point(&self, i: usize) -> (u64, f64, f64, Polarity) {
        let e = self.events()[i];
        (e.t, e.x as f64, e.y as f64, e.p)
    }
}

impl EventPoints for SubpixelEventStream {
    fn resolution(&self) -> Resolution {
        self.resolution
    }
    fn t_span(&self) -> (u64, u64) {
        self.t_span
    }
    fn len(&self) -> usize {
        self.events.len()
    }
    #[inline]
    fn point(&self, i: usize) -> (u64, f64, f64, Polarity) {
        let e = self.events[i];
        (e.t, e.x, e.y, e.p)
    }
}

/// `x_ref = x + psi * (t - t_ref)`, applied to every event.
pub fn warp_events<S: EventPoints + ?Sized>(stream: &S, w: &WarpParam) -> SubpixelEventStream {
    let events = (0..stream.len())
        .map(|i| {
            let (t, x, y, p) = stream.point(i);
            let dt = w.dt(t);
            SubpixelEvent {
                t,
                x: x + w.psi.0 * dt,
                y: y + w.psi.1 * dt,
                p,
            }
        })
        .collect();
    SubpixelEventStream {
        events,
        resolution: stream.resolution(),
        t_span: stream.t_span(),
    }
}

/// Rotation, translation (metres) and intrinsics of a viewpoint relative to the reference one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    pub intrinsics: Matrix3<f64>,
}

impl CameraPose {
    pub fn validate(&self) -> Result<()> {
        let r = &self.rotation;
        let ortho = (r.transpose() * r - Matrix3::identity()).abs().max();
        if ortho > 1e-9 || (r.determinant() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("rotation must be orthonormal with determinant 1"));
        }
        if self.translation.z != 0.0 {
            return Err(Error::invalid(
                "translation along the optical axis is outside the planar refocusing model",
            ));
        }
        if self.intrinsics.try_inverse().is_none() {
            return Err(Error::invalid("singular intrinsics"));
        }
        Ok(())
    }
}

/// Refocuses each event through the plane-induced mapping
/// `x_ref ~ K R K^-1 x + K T / d` at its own timestamp.
pub fn warp_events_general<S, F>(stream: &S, pose_of: F, d: f64) -> Result<SubpixelEventStream>
where
    S: EventPoints + ?Sized,
    F: Fn(u64) -> Option<CameraPose>,
{
    if !(d > 0.0) {
        return Err(Error::invalid(format!("depth {d} must be positive")));
    }
    let mut events = Vec::with_capacity(stream.len());
    for i in 0..stream.len() {
        let (t, x, y, p) = stream.point(i);
        let pose = pose_of(t).ok_or_else(|| Error::invalid(format!("no camera pose at t={t} (event {i})")))?;
        pose.validate()?;
        let k = &pose.intrinsics;
        let k_inv = k.try_inverse().expect("validated");
        let h = k * pose.rotation * k_inv * Vector3::new(x, y, 1.0) + k * pose.translation / d;
        events.push(SubpixelEvent {
            t,
            x: h.x / h.z,
            y: h.y / h.z,
            p,
        });
    }
    Ok(SubpixelEventStream {
        events,
        resolution: stream.resolution(),
        t_span: stream.t_span(),
    })
}
