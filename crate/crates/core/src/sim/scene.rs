//! Occluded-scene geometry and rendering.
//!
//! The camera translates in its own image plane. Both the target and the
//! occluder are fronto-parallel planes; at camera position `(0, 0)` (the
//! reference viewpoint) target texture pixel `(u, v)` sits under image pixel
//! `(u, v)` shifted so the texture centre meets the principal point. Moving the
//! camera by `cam_x` metres shifts plane content by `fx * cam_x / depth` pixels.

use ndarray::Array2;

use super::occluder::{OccluderSpec, Orientation};
use crate::error::{Error, Result};
use crate::event::Resolution;
use crate::image::{GrayImage, RangeHint};

/// Intensity floor applied before taking logarithms.
pub const INTENSITY_FLOOR: f64 = 1.0 / 255.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    /// Square pixels with the principal point at the image centre.
    pub fn centered(f: f64, res: Resolution) -> Self {
        Self {
            fx: f,
            fy: f,
            cx: (res.width as f64 - 1.0) / 2.0,
            cy: (res.height as f64 - 1.0) / 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    /// Target plane texture, intensities in `[0, 1]`.
    pub target_texture: GrayImage,
    /// Target depth, metres.
    pub depth: f64,
    pub occluder: OccluderSpec,
    /// Occluder depth, metres; must be below `depth` when an occluder is present.
    pub occluder_depth: f64,
    pub intrinsics: Intrinsics,
    pub resolution: Resolution,
    /// Event threshold in log-intensity units.
    pub eta: f64,
    /// Expected noise events per pixel per second.
    pub noise_rate: f64,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) {
            return Err(Error::invalid(format!("event threshold {} must be positive", self.eta)));
        }
        if !(self.depth > 0.0) {
            return Err(Error::invalid(format!("target depth {} must be positive", self.depth)));
        }
        if !self.occluder.is_empty() && !(self.occluder_depth > 0.0 && self.occluder_depth < self.depth) {
            return Err(Error::invalid(format!(
                "occluder depth {} must lie in (0, {})",
                self.occluder_depth, self.depth
            )));
        }
        if !(self.noise_rate >= 0.0) {
            return Err(Error::invalid("noise rate must be non-negative"));
        }
        if self.resolution.pixels() == 0 {
            return Err(Error::invalid("empty resolution"));
        }
        if !(self.intrinsics.fx > 0.0 && self.intrinsics.fy > 0.0) {
            return Err(Error::invalid("focal lengths must be positive"));
        }
        Ok(())
    }

    /// Ground-truth warp rate `(fx * vx / d, fy * vy / d)` of the target plane.
    pub fn target_psi(&self, v: (f64, f64)) -> (f64, f64) {
        (
            self.intrinsics.fx * v.0 / self.depth,
            self.intrinsics.fy * v.1 / self.depth,
        )
    }

    /// Same scene with the occluder removed.
    pub fn without_occluder(&self) -> SceneSpec {
        SceneSpec {
            occluder: OccluderSpec::empty(),
            ..self.clone()
        }
    }
}

/// Per-view render buffers: log intensity and occluder coverage per pixel.
pub(crate) struct ViewBuffers {
    pub log: Vec<f64>,
    pub coverage: Vec<f64>,
    pub intensity: Vec<f64>,
    line_cover: Vec<(f64, f64)>,
}

impl ViewBuffers {
    pub fn new(res: Resolution) -> Self {
        let n = res.pixels();
        Self {
            log: vec![0.0; n],
            coverage: vec![0.0; n],
            intensity: vec![0.0; n],
            line_cover: Vec::with_capacity(res.width.max(res.height)),
        }
    }
}

/// Renders rows `rows` of the view from camera position `(cam_x, cam_y)` metres.
pub(crate) fn render_rows(
    scene: &SceneSpec,
    cam_x: f64,
    cam_y: f64,
    rows: std::ops::Range<usize>,
    buf: &mut ViewBuffers,
) {
    let Resolution { width, .. } = scene.resolution;
    let k = &scene.intrinsics;
    let tex = scene.target_texture.data();
    let (th, tw) = tex.dim();
    let off_u = -k.cx + k.fx * cam_x / scene.depth + (tw as f64 - 1.0) / 2.0;
    let off_v = -k.cy + k.fy * cam_y / scene.depth + (th as f64 - 1.0) / 2.0;

    let occ = &scene.occluder;
    let occluded = !occ.is_empty();
    buf.line_cover.clear();
    if occluded {
        let (shift, n) = match occ.orientation {
            Orientation::Vertical => (k.fx * cam_x / scene.occluder_depth, width),
            Orientation::Horizontal => (k.fy * cam_y / scene.occluder_depth, scene.resolution.height),
        };
        for i in 0..n {
            let s = i as f64 + shift;
            buf.line_cover.push(occ.cover(s - 0.5, s + 0.5));
        }
    }

    for r in rows {
        let v = r as f64 + off_v;
        for c in 0..width {
            let target = bilinear(tex, c as f64 + off_u, v);
            let (cov, occ_int) = if occluded {
                match occ.orientation {
                    Orientation::Vertical => buf.line_cover[c],
                    Orientation::Horizontal => buf.line_cover[r],
                }
            } else {
                (0.0, 0.0)
            };
            let i = occ_int + (1.0 - cov) * target;
            let idx = r * width + c;
            buf.intensity[idx] = i;
            buf.coverage[idx] = cov;
            buf.log[idx] = i.max(INTENSITY_FLOOR).ln();
        }
    }
}

/// Bilinear sample with clamp-to-edge borders.
fn bilinear(tex: &Array2<f64>, u: f64, v: f64) -> f64 {
    let (h, w) = tex.dim();
    let u = u.clamp(0.0, (w - 1) as f64);
    let v = v.clamp(0.0, (h - 1) as f64);
    let u0 = (u.floor() as usize).min(w.saturating_sub(2));
    let v0 = (v.floor() as usize).min(h.saturating_sub(2));
    let u1 = (u0 + 1).min(w - 1);
    let v1 = (v0 + 1).min(h - 1);
    let fu = u - u0 as f64;
    let fv = v - v0 as f64;
    let top = tex[[v0, u0]] * (1.0 - fu) + tex[[v0, u1]] * fu;
    let bottom = tex[[v1, u0]] * (1.0 - fu) + tex[[v1, u1]] * fu;
    top * (1.0 - fv) + bottom * fv
}

/// Occluder masks at or above this coverage count as occluded.
pub const MASK_COVERAGE: f64 = 0.5;

/// Renders one view. Returns unit-range intensities and the binary occlusion
/// mask (1 where at least half the pixel footprint is covered).
///
/// Partially covered pixels mix occluder and target intensity by area, so the
/// rendering is continuous in the camera position.
pub fn render_view(scene: &SceneSpec, cam_x: f64, cam_y: f64) -> Result<(GrayImage, Array2<u8>)> {
    scene.validate()?;
    let res = scene.resolution;
    let mut buf = ViewBuffers::new(res);
    render_rows(scene, cam_x, cam_y, 0..res.height, &mut buf);
    let image = GrayImage::new(
        Array2::from_shape_vec((res.height, res.width), buf.intensity).expect("buffer shape"),
        RangeHint::Unit,
    )?;
    let mask = Array2::from_shape_vec(
        (res.height, res.width),
        buf.coverage.iter().map(|&c| u8::from(c >= MASK_COVERAGE)).collect(),
    )
    .expect("buffer shape");
    Ok((image, mask))
}
