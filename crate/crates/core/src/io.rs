//! Event file formats.
//!
//! CSV: UTF-8, header `t,x,y,p`, one event per line, `p` is `1` or `-1`.
//!
//! Binary (all little-endian): a 16-byte header of magic `ESAI`, `u16`
//! version (1), `u16` width, `u16` height, `u16` reserved (0) and `u32` event
//! count, followed by 13-byte records `(u64 t_us, u16 x, u16 y, i8 p)`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::event::{Event, EventStream, Polarity, Resolution};

pub const BIN_MAGIC: &[u8; 4] = b"ESAI";
pub const BIN_VERSION: u16 = 1;
pub const BIN_HEADER_LEN: usize = 16;
pub const BIN_RECORD_LEN: usize = 13;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventFormat {
    Csv,
    Bin,
}

impl EventFormat {
    /// Picks the format from a file extension (`.csv` or `.bin`).
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()? {
            "csv" => Some(EventFormat::Csv),
            "bin" => Some(EventFormat::Bin),
            _ => None,
        }
    }
}

impl FromStr for EventFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(EventFormat::Csv),
            "bin" => Ok(EventFormat::Bin),
            other => Err(Error::invalid(format!("unknown event format {other:?}"))),
        }
    }
}

/// Reads an event file.
///
/// The binary header carries the resolution. CSV has none, so `resolution`
/// must be given or it is inferred from the largest coordinates. The span of
/// the returned stream runs from the first to the last timestamp.
pub fn read_events(path: &Path, format: EventFormat, resolution: Option<Resolution>) -> Result<EventStream> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let loc = path.display().to_string();
    match format {
        EventFormat::Csv => {
            let text = std::str::from_utf8(&bytes)
                .map_err(|e| Error::parse(format!("{loc}: byte {}", e.valid_up_to()), "invalid UTF-8"))?;
            decode_csv(text, resolution, &loc)
        }
        EventFormat::Bin => decode_bin(&bytes, &loc),
    }
}

pub fn write_events(stream: &EventStream, path: &Path, format: EventFormat) -> Result<()> {
    let bytes = match format {
        EventFormat::Csv => encode_csv(stream).into_bytes(),
        EventFormat::Bin => encode_bin(stream)?,
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn encode_csv(stream: &EventStream) -> String {
    let mut out = String::with_capacity(16 + stream.len() * 20);
    out.push_str("t,x,y,p\n");
    for e in stream.events() {
        let _ = writeln!(out, "{},{},{},{}", e.t, e.x, e.y, e.p.sign());
    }
    out
}

pub fn decode_csv(text: &str, resolution: Option<Resolution>, loc: &str) -> Result<EventStream> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "t,x,y,p" => {}
        _ => return Err(Error::parse(format!("{loc}:1"), "expected header `t,x,y,p`")),
    }
    let mut events = Vec::new();
    for (i, line) in lines {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let at = || format!("{loc}:{lineno}");
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(Error::parse(at(), format!("expected 4 fields, found {}", fields.len())));
        }
        let t = fields[0]
            .parse::<u64>()
            .map_err(|_| Error::parse(at(), format!("bad timestamp {:?}", fields[0])))?;
        let x = fields[1]
            .parse::<u16>()
            .map_err(|_| Error::parse(at(), format!("bad x {:?}", fields[1])))?;
        let y = fields[2]
            .parse::<u16>()
            .map_err(|_| Error::parse(at(), format!("bad y {:?}", fields[2])))?;
        let p = fields[3]
            .parse::<i64>()
            .ok()
            .and_then(Polarity::from_sign)
            .ok_or_else(|| Error::parse(at(), format!("polarity must be 1 or -1, found {:?}", fields[3])))?;
        events.push(Event::new(t, x, y, p));
    }
    let resolution = resolution.unwrap_or_else(|| {
        let w = events.iter().map(|e| e.x as usize + 1).max().unwrap_or(0);
        let h = events.iter().map(|e| e.y as usize + 1).max().unwrap_or(0);
        Resolution::new(w, h)
    });
    EventStream::from_events(events, resolution)
}

pub fn encode_bin(stream: &EventStream) -> Result<Vec<u8>> {
    let res = stream.resolution();
    let (Ok(w), Ok(h), Ok(n)) = (
        u16::try_from(res.width),
        u16::try_from(res.height),
        u32::try_from(stream.len()),
    ) else {
        return Err(Error::invalid("stream too large for the binary event format"));
    };
    let mut buf = Vec::with_capacity(BIN_HEADER_LEN + BIN_RECORD_LEN * stream.len());
    buf.extend_from_slice(BIN_MAGIC);
    buf.extend_from_slice(&BIN_VERSION.to_le_bytes());
    buf.extend_from_slice(&w.to_le_bytes());
    buf.extend_from_slice(&h.to_le_bytes());
    buf.extend_from_slice(&0u16.to_le_bytes());
    buf.extend_from_slice(&n.to_le_bytes());
    for e in stream.events() {
        buf.extend_from_slice(&e.t.to_le_bytes());
        buf.extend_from_slice(&e.x.to_le_bytes());
        buf.extend_from_slice(&e.y.to_le_bytes());
        buf.push(e.p.sign() as u8);
    }
    Ok(buf)
}

pub fn decode_bin(bytes: &[u8], loc: &str) -> Result<EventStream> {
    let at = |offset: usize| format!("{loc}: byte {offset}");
    if bytes.len() < BIN_HEADER_LEN {
        return Err(Error::parse(at(bytes.len()), "truncated header"));
    }
    if &bytes[0..4] != BIN_MAGIC {
        return Err(Error::parse(at(0), "bad magic, expected ESAI"));
    }
    let u16_at = |o: usize| u16::from_le_bytes([bytes[o], bytes[o + 1]]);
    let version = u16_at(4);
    if version != BIN_VERSION {
        return Err(Error::parse(at(4), format!("unsupported version {version}")));
    }
    let resolution = Resolution::new(u16_at(6) as usize, u16_at(8) as usize);
    let count = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let body = &bytes[BIN_HEADER_LEN..];
    let whole = body.len() / BIN_RECORD_LEN;
    if whole < count {
        let offset = BIN_HEADER_LEN + whole * BIN_RECORD_LEN;
        let msg = if body.len() % BIN_RECORD_LEN != 0 {
            format!("record {whole} truncated ({count} declared)")
        } else {
            format!("file ends after {whole} of {count} records")
        };
        return Err(Error::parse(at(offset), msg));
    }
    if body.len() != count * BIN_RECORD_LEN {
        return Err(Error::parse(
            at(BIN_HEADER_LEN + count * BIN_RECORD_LEN),
            format!("trailing bytes after {count} records"),
        ));
    }
    let mut events = Vec::with_capacity(count);
    for (i, rec) in body.chunks_exact(BIN_RECORD_LEN).enumerate() {
        let t = u64::from_le_bytes(rec[0..8].try_into().unwrap());
        let x = u16::from_le_bytes([rec[8], rec[9]]);
        let y = u16::from_le_bytes([rec[10], rec[11]]);
        let p = Polarity::from_sign(rec[12] as i8 as i64).ok_or_else(|| {
            Error::parse(
                at(BIN_HEADER_LEN + i * BIN_RECORD_LEN + 12),
                format!("polarity byte {} is not 1 or -1", rec[12] as i8),
            )
        })?;
        events.push(Event::new(t, x, y, p));
    }
    EventStream::from_events(events, resolution)
}
