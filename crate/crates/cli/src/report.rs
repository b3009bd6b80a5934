//! Sweep summaries: one CSV row per run plus a two-panel PGM plot.

use std::fs;
use std::path::Path;

use esai_core::dataset::parse_key_values;
use esai_core::image::write_pgm;
use esai_core::{Error, GrayImage, Result};
use canvas::Canvas;

#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub name: String,
    pub r_o: f64,
    pub r_t: f64,
    pub psnr: f64,
    pub ssim: f64,
}

impl RunRow {
    /// Reads `r_o`, `r_t`, `psnr` and `ssim` from a run file; the error names what is missing.
    pub fn load(name: &str, path: &Path) -> std::result::Result<Self, String> {
        let text = fs::read_to_string(path).map_err(|_| "no run.txt".to_string())?;
        let map = parse_key_values(&text, path).map_err(|e| e.to_string())?;
        let get = |k: &str| -> std::result::Result<f64, String> {
            let v = map.get(k).ok_or_else(|| format!("missing {k}"))?;
            v.parse().map_err(|_| format!("bad {k} {v:?}"))
        };
        Ok(Self {
            name: name.to_string(),
            r_o: get("r_o")?,
            r_t: get("r_t")?,
            psnr: get("psnr")?,
            ssim: get("ssim")?,
        })
    }
}

pub fn report_csv(rows: &[RunRow]) -> String {
    let mut s = String::from("name,r_o,r_t,psnr,ssim\n");
    for r in rows {
        s.push_str(&format!("{},{:.6},{:.6},{:.6},{:.6}\n", r.name, r.r_o, r.r_t, r.psnr, r.ssim));
    }
    s
}

pub fn write_report_csv(rows: &[RunRow], path: &Path) -> Result<()> {
    fs::write(path, report_csv(rows)).map_err(|e| Error::io(path, e))
}

const PANEL_W: usize = 160;
const PANEL_H: usize = 120;
const MARGIN: usize = 12;

/// PSNR against `r_o` (left) and against `r_t` (right), black on white.
pub fn render_plot(rows: &[RunRow]) -> GrayImage {
    let mut c = Canvas::new(2 * PANEL_W, PANEL_H);
    let (lo, hi) = span(rows.iter().map(|r| r.psnr));
    for (panel, key) in [(0usize, 0usize), (1, 1)] {
        let x0 = panel * PANEL_W;
        c.line(x0 + MARGIN, PANEL_H - MARGIN, x0 + PANEL_W - MARGIN, PANEL_H - MARGIN);
        c.line(x0 + MARGIN, MARGIN, x0 + MARGIN, PANEL_H - MARGIN);
        let xs = |r: &RunRow| if key == 0 { r.r_o } else { r.r_t };
        let (xlo, xhi) = span(rows.iter().map(xs));
        let mut pts: Vec<(usize, usize)> = rows
            .iter()
            .map(|r| {
                let u = (xs(r) - xlo) / (xhi - xlo);
                let v = (r.psnr - lo) / (hi - lo);
                let px = x0 + MARGIN + 4 + (u * (PANEL_W - 2 * MARGIN - 8) as f64).round() as usize;
                let py = PANEL_H - MARGIN - 4 - (v * (PANEL_H - 2 * MARGIN - 8) as f64).round() as usize;
                (px, py)
            })
            .collect();
        pts.sort();
        for w in pts.windows(2) {
            c.line(w[0].0, w[0].1, w[1].0, w[1].1);
        }
        for &(x, y) in &pts {
            c.dot(x, y);
        }
    }
    c.into_image()
}

pub fn write_plot(rows: &[RunRow], path: &Path) -> Result<()> {
    write_pgm(&render_plot(rows), path)
}

/// Value range padded so a constant series sits mid-panel.
fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !(hi > lo) {
        let m = if lo.is_finite() { lo } else { 0.0 };
        (m - 1.0, m + 1.0)
    } else {
        (lo, hi)
    }
}

mod canvas {
    use esai_core::{GrayImage, RangeHint};

    pub struct Canvas {
        w: usize,
        h: usize,
        px: Vec<f64>,
    }

    impl Canvas {
        pub fn new(w: usize, h: usize) -> Self {
            Self { w, h, px: vec![255.0; w * h] }
        }

        fn set(&mut self, x: isize, y: isize) {
            if x >= 0 && y >= 0 && (x as usize) < self.w && (y as usize) < self.h {
                self.px[y as usize * self.w + x as usize] = 0.0;
            }
        }

        /// Bresenham segment.
        pub fn line(&mut self, x0: usize, y0: usize, x1: usize, y1: usize) {
            let (mut x, mut y) = (x0 as isize, y0 as isize);
            let (x1, y1) = (x1 as isize, y1 as isize);
            let dx = (x1 - x).abs();
            let dy = -(y1 - y).abs();
            let (sx, sy) = (if x < x1 { 1 } else { -1 }, if y < y1 { 1 } else { -1 });
            let mut err = dx + dy;
            loop {
                self.set(x, y);
                if x == x1 && y == y1 {
                    break;
                }
                let e2 = 2 * err;
                if e2 >= dy {
                    err += dy;
                    x += sx;
                }
                if e2 <= dx {
                    err += dx;
                    y += sy;
                }
            }
        }

        pub fn dot(&mut self, x: usize, y: usize) {
            for dy in -2..=2 {
                for dx in -2..=2 {
                    self.set(x as isize + dx, y as isize + dy);
                }
            }
        }

        pub fn into_image(self) -> GrayImage {
            GrayImage::from_fn(self.h, self.w, RangeHint::Byte, |(r, c)| self.px[r * self.w + c])
                .expect("finite canvas")
        }
    }
}
