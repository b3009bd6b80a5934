//! On-disk dataset samples.
//!
//! A sample directory holds:
//!
//! ```text
//! meta.txt                 key=value lines: v, fx, size (H,W), depth; optional vy, fy, t_span, t_offset
//! events.bin               binary event file
//! occ_aps/frame_%04d.pgm   occluded frames (8-bit P5)
//! occ_aps_ts.txt           one timestamp (µs) per frame
//! occ_free_aps.pgm         occlusion-free reference frame
//! occ_free_aps_ts.txt      its timestamp (µs)
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::event::EventStream;
use crate::image::{read_pgm, write_pgm, GrayImage};
use crate::io::{read_events, write_events, EventFormat};

/// Default APS frame period (30 Hz) in microseconds.
pub const APS_PERIOD_US: i64 = 33_334;

/// A timestamped APS frame. Timestamps are signed so frames may precede the first event.
#[derive(Debug, Clone, PartialEq)]
pub struct TimedFrame {
    pub t: i64,
    pub image: GrayImage,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSample {
    /// Horizontal camera speed, m/s.
    pub v: f64,
    /// Vertical camera speed, m/s.
    pub vy: f64,
    /// Pixel focal lengths.
    pub fx: f64,
    pub fy: f64,
    /// `(height, width)` in pixels.
    pub size: (usize, usize),
    /// Target-plane depth, m.
    pub depth: f64,
    pub events: EventStream,
    pub occ_aps: Vec<TimedFrame>,
    pub occ_free_aps: TimedFrame,
    /// Amount subtracted from the original timestamps when re-zeroing.
    pub t_offset: u64,
}

impl DatasetSample {
    /// Checks frame sizes and frame timestamps against the event span.
    pub fn validate(&self) -> Result<()> {
        let (h, w) = self.size;
        let res = self.events.resolution();
        if (res.height, res.width) != self.size {
            return Err(Error::shape(format!(
                "events are {}x{}, sample size is {h}x{w}",
                res.height, res.width
            )));
        }
        for (i, f) in self.occ_aps.iter().enumerate() {
            if f.image.shape() != self.size {
                return Err(Error::shape(format!(
                    "occ_aps frame {i} is {:?}, sample size is {:?}",
                    f.image.shape(),
                    self.size
                )));
            }
        }
        if self.occ_free_aps.image.shape() != self.size {
            return Err(Error::shape(format!(
                "occ_free_aps is {:?}, sample size is {:?}",
                self.occ_free_aps.image.shape(),
                self.size
            )));
        }
        let tol = self
            .occ_aps
            .windows(2)
            .map(|w| (w[1].t - w[0].t).abs())
            .max()
            .unwrap_or(APS_PERIOD_US)
            .max(APS_PERIOD_US);
        let (t0, t1) = self.events.t_span();
        for (i, f) in self.occ_aps.iter().enumerate() {
            if f.t < t0 as i64 - tol || f.t > t1 as i64 + tol {
                return Err(Error::invalid(format!(
                    "occ_aps frame {i} at {} outside event span [{t0}, {t1}]",
                    f.t
                )));
            }
        }
        Ok(())
    }

    /// Re-zeroes event and frame timestamps so the event span starts at 0.
    pub fn rezero(&mut self) {
        let offset = self.events.rezero();
        if offset != 0 {
            for f in &mut self.occ_aps {
                f.t -= offset as i64;
            }
            self.occ_free_aps.t -= offset as i64;
            self.t_offset += offset;
        }
    }
}

pub fn save_sample(sample: &DatasetSample, dir: &Path) -> Result<()> {
    sample.validate()?;
    let mk = |p: &Path| fs::create_dir_all(p).map_err(|e| Error::io(p, e));
    mk(dir)?;
    let aps_dir = dir.join("occ_aps");
    mk(&aps_dir)?;

    let (h, w) = sample.size;
    let (t0, t1) = sample.events.t_span();
    let meta = format!(
        "v={}\nvy={}\nfx={}\nfy={}\nsize={h},{w}\ndepth={}\nt_span={t0},{t1}\nt_offset={}\n",
        sample.v, sample.vy, sample.fx, sample.fy, sample.depth, sample.t_offset
    );
    write_text(&dir.join("meta.txt"), &meta)?;
    write_events(&sample.events, &dir.join("events.bin"), EventFormat::Bin)?;

    let mut ts = String::new();
    for (i, f) in sample.occ_aps.iter().enumerate() {
        write_pgm(&f.image, &aps_dir.join(format!("frame_{i:04}.pgm")))?;
        ts.push_str(&format!("{}\n", f.t));
    }
    write_text(&dir.join("occ_aps_ts.txt"), &ts)?;
    write_pgm(&sample.occ_free_aps.image, &dir.join("occ_free_aps.pgm"))?;
    write_text(
        &dir.join("occ_free_aps_ts.txt"),
        &format!("{}\n", sample.occ_free_aps.t),
    )
}

/// Loads a sample directory; timestamps are re-zeroed so the event span starts at 0.
pub fn load_sample(dir: &Path) -> Result<DatasetSample> {
    let meta_path = dir.join("meta.txt");
    let meta = parse_key_values(&read_text(&meta_path, "meta")?, &meta_path)?;
    let get = |key: &str| meta.get(key).ok_or_else(|| Error::MissingKey(key.to_string()));
    let num = |key: &str| -> Result<f64> {
        let raw = get(key)?;
        raw.parse::<f64>()
            .map_err(|_| Error::parse(meta_path.display().to_string(), format!("bad {key} value {raw:?}")))
    };
    let v = num("v")?;
    let fx = num("fx")?;
    let depth = num("depth")?;
    let size = parse_pair::<usize>(get("size")?)
        .ok_or_else(|| Error::parse(meta_path.display().to_string(), "size must be H,W"))?;
    let vy = if meta.contains_key("vy") { num("vy")? } else { 0.0 };
    let fy = if meta.contains_key("fy") { num("fy")? } else { fx };
    let t_offset = match meta.get("t_offset") {
        Some(s) => s
            .parse::<u64>()
            .map_err(|_| Error::parse(meta_path.display().to_string(), "bad t_offset"))?,
        None => 0,
    };

    let events_path = dir.join("events.bin");
    require(&events_path, "events")?;
    let mut events = read_events(&events_path, EventFormat::Bin, None)?;
    if let Some(span) = meta.get("t_span") {
        let span = parse_pair::<u64>(span)
            .ok_or_else(|| Error::parse(meta_path.display().to_string(), "t_span must be t0,t1"))?;
        let res = events.resolution();
        events = EventStream::new(events.into_events(), res, span)?;
    }

    let aps_dir = dir.join("occ_aps");
    require(&aps_dir, "occ_aps")?;
    let aps_ts = parse_timestamps(&dir.join("occ_aps_ts.txt"), "occ_aps_ts")?;
    let mut occ_aps = Vec::with_capacity(aps_ts.len());
    for (i, &t) in aps_ts.iter().enumerate() {
        let p = aps_dir.join(format!("frame_{i:04}.pgm"));
        require(&p, &format!("occ_aps/frame_{i:04}"))?;
        occ_aps.push(TimedFrame { t, image: read_pgm(&p)? });
    }
    let free_path = dir.join("occ_free_aps.pgm");
    require(&free_path, "occ_free_aps")?;
    let free_ts = parse_timestamps(&dir.join("occ_free_aps_ts.txt"), "occ_free_aps_ts")?;
    let [free_t] = free_ts[..] else {
        return Err(Error::parse("occ_free_aps_ts.txt", "expected exactly one timestamp"));
    };
    let occ_free_aps = TimedFrame {
        t: free_t,
        image: read_pgm(&free_path)?,
    };

    let mut sample = DatasetSample {
        v,
        vy,
        fx,
        fy,
        size,
        depth,
        events,
        occ_aps,
        occ_free_aps,
        t_offset,
    };
    sample.validate()?;
    sample.rezero();
    Ok(sample)
}

/// Parses `key=value` lines; blank lines and `#` comments are skipped.
pub fn parse_key_values(text: &str, origin: &Path) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::parse(format!("{}:{}", origin.display(), i + 1), "expected key=value")
        })?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn parse_pair<T: std::str::FromStr>(s: &str) -> Option<(T, T)> {
    let (a, b) = s.split_once(',')?;
    Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
}

fn require(path: &Path, key: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::MissingKey(key.to_string()))
    }
}

fn read_text(path: &Path, key: &str) -> Result<String> {
    require(path, key)?;
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn parse_timestamps(path: &PathBuf, key: &str) -> Result<Vec<i64>> {
    read_text(path, key)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim()
                .parse::<i64>()
                .map_err(|_| Error::parse(format!("{}:{}", path.display(), i + 1), "bad timestamp"))
        })
        .collect()
}
