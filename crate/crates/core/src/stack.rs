//! Spatio-temporal binning of an event stream into `N` two-polarity frames.

use ndarray::{Array2, Array4, Axis};

use crate::error::{Error, Result};
use crate::event::Resolution;
use crate::refocus::EventPoints;

/// Event counts of shape `(N, 2, H, W)`; channel 0 holds positive events.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameStack {
    data: Array4<f64>,
    t_edges: Vec<f64>,
}

impl FrameStack {
    pub fn new(data: Array4<f64>, t_edges: Vec<f64>) -> Result<Self> {
        let n = data.dim().0;
        if data.dim().1 != 2 {
            return Err(Error::shape(format!("{} polarity channels, expected 2", data.dim().1)));
        }
        if t_edges.len() != n + 1 || t_edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid(format!(
                "need {} strictly increasing interval edges",
                n + 1
            )));
        }
        Ok(Self { data, t_edges })
    }

    pub fn data(&self) -> &Array4<f64> {
        &self.data
    }

    pub fn intervals(&self) -> usize {
        self.data.dim().0
    }

    pub fn height(&self) -> usize {
        self.data.dim().2
    }

    pub fn width(&self) -> usize {
        self.data.dim().3
    }

    /// Interval boundaries in microseconds, `N + 1` entries.
    pub fn t_edges(&self) -> &[f64] {
        &self.t_edges
    }

    pub fn total(&self) -> f64 {
        self.data.sum()
    }

    /// Spatial window `rows x cols` starting at `(top, left)`.
    pub fn crop(&self, top: usize, left: usize, rows: usize, cols: usize) -> Result<FrameStack> {
        if top + rows > self.height() || left + cols > self.width() || rows == 0 || cols == 0 {
            return Err(Error::invalid(format!(
                "crop {rows}x{cols} at ({top}, {left}) outside {}x{}",
                self.height(),
                self.width()
            )));
        }
        Ok(FrameStack {
            data: self
                .data
                .slice(ndarray::s![.., .., top..top + rows, left..left + cols])
                .to_owned(),
            t_edges: self.t_edges.clone(),
        })
    }

    /// Sum over intervals and polarities.
    pub fn collapse(&self) -> Array2<f64> {
        self.data.sum_axis(Axis(0)).sum_axis(Axis(0))
    }
}

/// Bins events with `t` in `[t0, t1]` into `n` equal intervals.
///
/// Intervals are half-open `[edge_i, edge_{i+1})` except the last, which also
/// takes events stamped exactly `t1`. Real-valued coordinates go to the
/// nearest pixel; events falling outside the frame are dropped.
pub fn stack_events<S: EventPoints + ?Sized>(stream: &S, n: usize, window: (u64, u64)) -> Result<FrameStack> {
    let (t0, t1) = window;
    if n == 0 {
        return Err(Error::invalid("interval count must be positive"));
    }
    if t0 >= t1 {
        return Err(Error::invalid(format!("inverted window ({t0}, {t1})")));
    }
    let Resolution { width, height } = stream.resolution();
    let mut data = Array4::<f64>::zeros((n, 2, height, width));
    let span = (t1 - t0) as u128;
    for i in 0..stream.len() {
        let (t, x, y, p) = stream.point(i);
        if t < t0 || t > t1 {
            continue;
        }
        let (c, r) = (x.round(), y.round());
        if c < 0.0 || r < 0.0 || c as usize >= width || r as usize >= height {
            continue;
        }
        let bin = (((t - t0) as u128 * n as u128) / span).min(n as u128 - 1) as usize;
        data[[bin, p.channel(), r as usize, c as usize]] += 1.0;
    }
    let t_edges = (0..=n)
        .map(|i| t0 as f64 + (t1 - t0) as f64 * i as f64 / n as f64)
        .collect();
    Ok(FrameStack { data, t_edges })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::{Event, EventStream, Polarity};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const RES: Resolution = Resolution::new(12, 10);

    #[test]
    fn empty_stream_gives_zero_stack() {
        let s = EventStream::empty(RES, (0, 3000));
        let st = stack_events(&s, 30, (0, 3000)).unwrap();
        assert_eq!(st.data().dim(), (30, 2, 10, 12));
        assert_eq!(st.total(), 0.0);
    }

    #[test]
    fn single_event_placement() {
        // interval 3 of 30 over [0, 3000) is [300, 400)
        let s = EventStream::new(vec![Event::new(350, 5, 7, Polarity::On)], RES, (0, 3000)).unwrap();
        let st = stack_events(&s, 30, (0, 3000)).unwrap();
        assert_eq!(st.data()[[3, 0, 7, 5]], 1.0);
        assert_eq!(st.total(), 1.0);
    }

    #[test]
    fn final_edge_inclusive_and_outside_ignored() {
        let ev = vec![
            Event::new(5, 0, 0, Polarity::Off),
            Event::new(10, 0, 0, Polarity::Off),
            Event::new(20, 1, 0, Polarity::On),
            Event::new(21, 1, 0, Polarity::On),
        ];
        let s = EventStream::from_events(ev, RES).unwrap();
        let st = stack_events(&s, 4, (10, 20)).unwrap();
        assert_eq!(st.data()[[0, 1, 0, 0]], 1.0);
        assert_eq!(st.data()[[3, 0, 0, 1]], 1.0);
        assert_eq!(st.total(), 2.0);
    }

    #[test]
    fn errors() {
        let s = EventStream::empty(RES, (0, 10));
        assert!(stack_events(&s, 0, (0, 10)).is_err());
        assert!(stack_events(&s, 3, (10, 10)).is_err());
        assert!(stack_events(&s, 3, (11, 10)).is_err());
    }

    #[test]
    fn random_counts_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut ts: Vec<u64> = (0..10_000).map(|_| rng.gen_range(0..=700_000)).collect();
        ts.sort_unstable();
        let events: Vec<Event> = ts
            .iter()
            .map(|&t| {
                let p = if rng.gen_bool(0.5) { Polarity::On } else { Polarity::Off };
                Event::new(t, rng.gen_range(0..12), rng.gen_range(0..10), p)
            })
            .collect();
        let s = EventStream::new(events.clone(), RES, (0, 700_000)).unwrap();
        let st = stack_events(&s, 30, (0, 700_000)).unwrap();
        assert_eq!(st.total(), 10_000.0);
        // brute force: compare against the f64 edges
        let edges = st.t_edges();
        for b in 0..30 {
            let want = events
                .iter()
                .filter(|e| {
                    let t = e.t as f64;
                    t >= edges[b] && (t < edges[b + 1] || (b == 29 && t <= edges[b + 1]))
                })
                .count() as f64;
            let got = st.data().index_axis(Axis(0), b).sum();
            assert_eq!(got, want, "bin {b}");
        }
    }
}
