//! Events, event streams and per-event category labels.

use crate::error::{Error, Result};

/// Direction of a brightness change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Polarity {
    /// Log-intensity decrease (`-1`).
    Off,
    /// Log-intensity increase (`+1`).
    On,
}

impl Polarity {
    pub fn from_sign(sign: i64) -> Option<Self> {
        match sign {
            1 => Some(Polarity::On),
            -1 => Some(Polarity::Off),
            _ => None,
        }
    }

    #[inline]
    pub fn sign(self) -> i8 {
        match self {
            Polarity::On => 1,
            Polarity::Off => -1,
        }
    }

    /// Channel index inside a frame stack: 0 for positive, 1 for negative.
    #[inline]
    pub fn channel(self) -> usize {
        match self {
            Polarity::On => 0,
            Polarity::Off => 1,
        }
    }
}

/// Sensor size in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Resolution {
    pub width: usize,
    pub height: usize,
}

impl Resolution {
    pub const fn new(width: usize, height: usize) -> Self {
        Self { width, height }
    }

    pub fn pixels(&self) -> usize {
        self.width * self.height
    }
}

/// A single event: timestamp in microseconds, pixel column/row and polarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Event {
    pub t: u64,
    pub x: u16,
    pub y: u16,
    pub p: Polarity,
}

impl Event {
    pub const fn new(t: u64, x: u16, y: u16, p: Polarity) -> Self {
        Self { t, x, y, p }
    }
}

/// A time-ordered event sequence from one sensor.
///
/// Construction validates ordering, pixel bounds and the time span, so every
/// value of this type upholds those invariants.
#[derive(Debug, Clone, PartialEq)]
pub struct EventStream {
    events: Vec<Event>,
    resolution: Resolution,
    t_span: (u64, u64),
}

impl EventStream {
    /// Builds a stream with an explicit time span.
    pub fn new(events: Vec<Event>, resolution: Resolution, t_span: (u64, u64)) -> Result<Self> {
        if t_span.0 > t_span.1 {
            return Err(Error::invalid(format!(
                "inverted time span ({}, {})",
                t_span.0, t_span.1
            )));
        }
        validate_events(&events, resolution, Some(t_span))?;
        Ok(Self {
            events,
            resolution,
            t_span,
        })
    }

    /// Builds a stream whose span is the first and last timestamps (`(0, 0)` when empty).
    pub fn from_events(events: Vec<Event>, resolution: Resolution) -> Result<Self> {
        validate_events(&events, resolution, None)?;
        let t_span = match (events.first(), events.last()) {
            (Some(a), Some(b)) => (a.t, b.t),
            _ => (0, 0),
        };
        Ok(Self {
            events,
            resolution,
            t_span,
        })
    }

    pub fn empty(resolution: Resolution, t_span: (u64, u64)) -> Self {
        Self {
            events: Vec::new(),
            resolution,
            t_span,
        }
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn into_events(self) -> Vec<Event> {
        self.events
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

    /// Midpoint of the time span, the default refocusing reference time.
    pub fn t_mid(&self) -> u64 {
        self.t_span.0 + (self.t_span.1 - self.t_span.0) / 2
    }

    /// Shifts every timestamp so the span starts at zero. Returns the removed offset.
    pub fn rezero(&mut self) -> u64 {
        let offset = self.t_span.0;
        if offset != 0 {
            for e in &mut self.events {
                e.t -= offset;
            }
            self.t_span = (0, self.t_span.1 - offset);
        }
        offset
    }
}

fn validate_events(events: &[Event], res: Resolution, span: Option<(u64, u64)>) -> Result<()> {
    let mut prev = 0u64;
    for (index, e) in events.iter().enumerate() {
        if e.x as usize >= res.width || e.y as usize >= res.height {
            return Err(Error::InvalidEvent {
                index,
                message: format!(
                    "pixel ({}, {}) outside {}x{} sensor",
                    e.x, e.y, res.width, res.height
                ),
            });
        }
        if index > 0 && e.t < prev {
            return Err(Error::InvalidEvent {
                index,
                message: format!("timestamp {} precedes {}", e.t, prev),
            });
        }
        if let Some((t0, t1)) = span {
            if e.t < t0 || e.t > t1 {
                return Err(Error::InvalidEvent {
                    index,
                    message: format!("timestamp {} outside span [{t0}, {t1}]", e.t),
                });
            }
        }
        prev = e.t;
    }
    Ok(())
}

/// Splits a stream into its positive and negative events, preserving order.
pub fn split_polarity(stream: &EventStream) -> (EventStream, EventStream) {
    let (on, off): (Vec<Event>, Vec<Event>) = stream
        .events
        .iter()
        .partition(|e| e.p == Polarity::On);
    let make = |events| EventStream {
        events,
        resolution: stream.resolution,
        t_span: stream.t_span,
    };
    (make(on), make(off))
}

/// Source of an event in the occluded-scene decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventCategory {
    /// Target texture edges seen through the occluder.
    TargetTarget,
    /// Occluder texture edges.
    OccluderOccluder,
    /// Contrast between occluder and target as an occluder edge passes.
    OccluderTarget,
    /// Sensor noise.
    Noise,
}

impl EventCategory {
    pub fn code(self) -> &'static str {
        match self {
            EventCategory::TargetTarget => "AA",
            EventCategory::OccluderOccluder => "OO",
            EventCategory::OccluderTarget => "OA",
            EventCategory::Noise => "NOISE",
        }
    }
}

/// An event stream with a ground-truth category per event.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledEventStream {
    stream: EventStream,
    labels: Vec<EventCategory>,
}

impl LabeledEventStream {
    pub fn new(stream: EventStream, labels: Vec<EventCategory>) -> Result<Self> {
        if labels.len() != stream.len() {
            return Err(Error::shape(format!(
                "{} labels for {} events",
                labels.len(),
                stream.len()
            )));
        }
        Ok(Self { stream, labels })
    }

    pub fn stream(&self) -> &EventStream {
        &self.stream
    }

    pub fn labels(&self) -> &[EventCategory] {
        &self.labels
    }

    pub fn into_parts(self) -> (EventStream, Vec<EventCategory>) {
        (self.stream, self.labels)
    }

    pub fn count(&self, category: EventCategory) -> usize {
        self.labels.iter().filter(|&&c| c == category).count()
    }

    /// Events of one category, as a stream with the parent's span.
    pub fn select(&self, category: EventCategory) -> EventStream {
        let events = self
            .stream
            .events
            .iter()
            .zip(&self.labels)
            .filter(|(_, &c)| c == category)
            .map(|(e, _)| *e)
            .collect();
        EventStream {
            events,
            resolution: self.stream.resolution,
            t_span: self.stream.t_span,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const RES: Resolution = Resolution::new(16, 8);

    fn ev(t: u64, x: u16, y: u16, s: i64) -> Event {
        Event::new(t, x, y, Polarity::from_sign(s).unwrap())
    }

    #[test]
    fn rejects_out_of_range_and_unsorted() {
        let err = EventStream::from_events(vec![ev(0, 16, 0, 1)], RES).unwrap_err();
        assert!(matches!(err, Error::InvalidEvent { index: 0, .. }));
        let err = EventStream::from_events(vec![ev(5, 0, 0, 1), ev(4, 0, 0, 1)], RES).unwrap_err();
        assert!(matches!(err, Error::InvalidEvent { index: 1, .. }));
        let err = EventStream::new(vec![ev(50, 0, 0, 1)], RES, (0, 10)).unwrap_err();
        assert!(matches!(err, Error::InvalidEvent { index: 0, .. }));
    }

    #[test]
    fn polarity_rejects_zero() {
        assert_eq!(Polarity::from_sign(0), None);
        assert_eq!(Polarity::from_sign(-1), Some(Polarity::Off));
    }

    #[test]
    fn split_all_positive_and_empty() {
        let s = EventStream::from_events(vec![ev(0, 1, 1, 1), ev(3, 2, 1, 1)], RES).unwrap();
        let (on, off) = split_polarity(&s);
        assert_eq!(on, s);
        assert!(off.is_empty());

        let e = EventStream::empty(RES, (0, 0));
        let (on, off) = split_polarity(&e);
        assert!(on.is_empty() && off.is_empty());
    }

    #[test]
    fn split_mixed_partitions() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut t = 0;
        let events: Vec<Event> = (0..100)
            .map(|_| {
                t += rng.gen_range(0..5);
                let s = if rng.gen_bool(0.5) { 1 } else { -1 };
                ev(t, rng.gen_range(0..16), rng.gen_range(0..8), s)
            })
            .collect();
        let s = EventStream::from_events(events.clone(), RES).unwrap();
        let (on, off) = split_polarity(&s);
        assert_eq!(on.len() + off.len(), 100);
        assert!(on.events().iter().all(|e| e.p == Polarity::On));
        assert!(off.events().iter().all(|e| e.p == Polarity::Off));
        // brute-force partition keeps relative order
        let want_on: Vec<Event> = events.iter().copied().filter(|e| e.p == Polarity::On).collect();
        assert_eq!(on.events(), &want_on[..]);
        assert!(on.events().windows(2).all(|w| w[0].t <= w[1].t));
    }

    #[test]
    fn rezero_shifts_span() {
        let mut s = EventStream::new(vec![ev(1500, 0, 0, 1)], RES, (1000, 2000)).unwrap();
        assert_eq!(s.rezero(), 1000);
        assert_eq!(s.t_span(), (0, 1000));
        assert_eq!(s.events()[0].t, 500);
    }
}
