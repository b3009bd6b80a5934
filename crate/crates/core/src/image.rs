//! Grayscale images, min-max normalization and the PGM / `.f32` grid formats.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

/// Expected value range of a [`GrayImage`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RangeHint {
    /// Normalized intensities in `[0, 1]`.
    Unit,
    /// 8-bit intensities in `[0, 255]`.
    Byte,
    /// Unbounded values such as event counts.
    Raw,
}

/// A single-channel image indexed `[row, col]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    data: Array2<f64>,
    range_hint: RangeHint,
}

impl GrayImage {
    pub fn new(data: Array2<f64>, range_hint: RangeHint) -> Result<Self> {
        if let Some(v) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite pixel value {v}")));
        }
        Ok(Self { data, range_hint })
    }

    pub fn zeros(height: usize, width: usize, range_hint: RangeHint) -> Self {
        Self {
            data: Array2::zeros((height, width)),
            range_hint,
        }
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        range_hint: RangeHint,
        f: impl FnMut((usize, usize)) -> f64,
    ) -> Result<Self> {
        Self::new(Array2::from_shape_fn((height, width), f), range_hint)
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn into_data(self) -> Array2<f64> {
        self.data
    }

    pub fn range_hint(&self) -> RangeHint {
        self.range_hint
    }

    pub fn height(&self) -> usize {
        self.data.nrows()
    }

    pub fn width(&self) -> usize {
        self.data.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.data.dim()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[[row, col]]
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Rescales a `[0, 255]` image to `[0, 1]`; unit images are returned as is.
    pub fn to_unit(&self) -> GrayImage {
        match self.range_hint {
            RangeHint::Byte => GrayImage {
                data: self.data.mapv(|v| v / 255.0),
                range_hint: RangeHint::Unit,
            },
            _ => GrayImage {
                data: self.data.clone(),
                range_hint: RangeHint::Unit,
            },
        }
    }

    /// Quantizes to bytes. Unit images are scaled by 255 first; values are clamped.
    pub fn to_bytes(&self) -> Vec<u8> {
        let scale = if self.range_hint == RangeHint::Unit {
            255.0
        } else {
            1.0
        };
        self.data
            .iter()
            .map(|&v| (v * scale).round().clamp(0.0, 255.0) as u8)
            .collect()
    }
}

/// Affine map onto `[0, 1]`; a constant image maps to all zeros.
pub fn normalize_minmax(img: &GrayImage) -> GrayImage {
    let (lo, hi) = img.min_max();
    let span = hi - lo;
    let data = if span > 0.0 {
        img.data.mapv(|v| (v - lo) / span)
    } else {
        Array2::zeros(img.data.raw_dim())
    };
    GrayImage {
        data,
        range_hint: RangeHint::Unit,
    }
}

/// Writes an 8-bit binary PGM (P5). Unit-range images are scaled by 255.
pub fn write_pgm(img: &GrayImage, path: &Path) -> Result<()> {
    let mut buf = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    buf.extend(img.to_bytes());
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Writes an image min-max scaled to the full 8-bit range.
pub fn write_pgm_scaled(img: &GrayImage, path: &Path) -> Result<()> {
    write_pgm(&normalize_minmax(img), path)
}

/// Reads an 8-bit binary PGM (P5) into a `[0, 255]` image.
pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_pgm(&bytes).map_err(|msg| Error::parse(path.display().to_string(), msg))
}

fn parse_pgm(bytes: &[u8]) -> std::result::Result<GrayImage, String> {
    let mut pos = 0;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err("truncated PGM header".into());
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    if fields[0] != "P5" {
        return Err(format!("unsupported magic {:?}, expected P5", fields[0]));
    }
    let num = |s: &str, what: &str| {
        s.parse::<usize>()
            .map_err(|_| format!("bad {what} field {s:?}"))
    };
    let width = num(&fields[1], "width")?;
    let height = num(&fields[2], "height")?;
    if num(&fields[3], "maxval")? != 255 {
        return Err("only maxval 255 is supported".into());
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let body = bytes.get(pos..pos + width * height).ok_or_else(|| {
        format!(
            "raster truncated at byte {}: need {} bytes",
            bytes.len(),
            width * height
        )
    })?;
    let data = Array2::from_shape_fn((height, width), |(r, c)| body[r * width + c] as f64);
    Ok(GrayImage {
        data,
        range_hint: RangeHint::Byte,
    })
}

/// Writes a little-endian `.f32` grid: `u32 rows`, `u32 cols`, then row-major `f32`.
pub fn write_f32_grid(data: &Array2<f64>, path: &Path) -> Result<()> {
    let (rows, cols) = data.dim();
    let mut buf = Vec::with_capacity(8 + 4 * rows * cols);
    buf.extend_from_slice(&(rows as u32).to_le_bytes());
    buf.extend_from_slice(&(cols as u32).to_le_bytes());
    for &v in data.iter() {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

pub fn read_f32_grid(path: &Path) -> Result<Array2<f64>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let loc = || path.display().to_string();
    if bytes.len() < 8 {
        return Err(Error::parse(loc(), "truncated grid header"));
    }
    let rows = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let need = 8 + 4 * rows * cols;
    if bytes.len() != need {
        return Err(Error::parse(
            loc(),
            format!("expected {need} bytes for {rows}x{cols} grid, found {}", bytes.len()),
        ));
    }
    Ok(Array2::from_shape_fn((rows, cols), |(r, c)| {
        let o = 8 + 4 * (r * cols + c);
        f32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as f64
    }))
}
