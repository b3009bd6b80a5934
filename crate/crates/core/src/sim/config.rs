//! `key=value` scene configuration files.
//!
//! | key | meaning | default |
//! |-----|---------|---------|
//! | `width`, `height` | sensor size in pixels | 64, 64 |
//! | `texture` | PGM path (relative to the config file), `blobs:<seed>`, `dead_leaves:<seed>`, `uniform:<value>` or `bars:<period>` | `blobs:0` |
//! | `depth`, `occluder_depth` | plane depths in metres | 1.0, 0.2 |
//! | `fx`, `fy` | pixel focal lengths | 200, `fx` |
//! | `eta` | event threshold, log units | 0.2 |
//! | `v`, `vy` | camera speed in m/s | 0.5, 0 |
//! | `duration` | sweep length in µs, centred on the reference view | 300000 |
//! | `sample_rate` | rendered positions per second | 10000 |
//! | `pattern` | `fence`, `stripes` or `none` | `fence` |
//! | `r_o`, `slats`, `orientation` | fence density, slat count, `vertical`/`horizontal` | 0.85, 4, vertical |
//! | `stripes_per_slat`, `stripe_contrast` | stripe texture (sets `r_t`) | 2, 0.5 |
//! | `occluder_intensity`, `occluder_jitter` | slat brightness and per-slat spread | 0.35, 0 |
//! | `noise_rate` | noise events per pixel per second | 0 |
//! | `seed` | noise seed | 0 |

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use super::occluder::{make_fence_occluder, make_stripe_occluder, OccluderSpec, Orientation};
use super::scene::{Intrinsics, SceneSpec};
use super::simulate::Trajectory;
use super::texture;
use crate::dataset::parse_key_values;
use crate::error::{Error, Result};
use crate::event::Resolution;
use crate::image::{read_pgm, GrayImage};

const KNOWN_KEYS: &[&str] = &[
    "width",
    "height",
    "texture",
    "depth",
    "occluder_depth",
    "fx",
    "fy",
    "eta",
    "v",
    "vy",
    "duration",
    "sample_rate",
    "pattern",
    "r_o",
    "slats",
    "orientation",
    "stripes_per_slat",
    "stripe_contrast",
    "occluder_intensity",
    "occluder_jitter",
    "noise_rate",
    "seed",
];

/// A parsed scene configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub scene: SceneSpec,
    pub trajectory: Trajectory,
    pub seed: u64,
}

impl SceneConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let map = parse_key_values(&text, path)?;
        Self::from_map(&map, path.parent().unwrap_or(Path::new(".")))
    }

    /// Builds a configuration; `base` resolves relative texture paths.
    pub fn from_map(map: &BTreeMap<String, String>, base: &Path) -> Result<Self> {
        if let Some(k) = map.keys().find(|k| !KNOWN_KEYS.contains(&k.as_str())) {
            return Err(Error::invalid(format!("unknown scene key {k:?}")));
        }
        let get = |k: &str| map.get(k).map(String::as_str);
        let width: usize = parse_or(get("width"), "width", 64)?;
        let height: usize = parse_or(get("height"), "height", 64)?;
        let res = Resolution::new(width, height);
        let fx: f64 = parse_or(get("fx"), "fx", 200.0)?;
        let fy: f64 = parse_or(get("fy"), "fy", fx)?;
        let orientation: Orientation = parse_or(get("orientation"), "orientation", Orientation::Vertical)?;
        let extent = match orientation {
            Orientation::Vertical => width,
            Orientation::Horizontal => height,
        };
        let r_o: f64 = parse_or(get("r_o"), "r_o", 0.85)?;
        let slats: usize = parse_or(get("slats"), "slats", 4)?;
        let mut occluder = match get("pattern").unwrap_or("fence") {
            "none" => OccluderSpec::empty(),
            "fence" => make_fence_occluder(r_o, slats, orientation, extent)?,
            "stripes" => make_stripe_occluder(
                r_o,
                slats,
                parse_or(get("stripes_per_slat"), "stripes_per_slat", 2)?,
                parse_or(get("stripe_contrast"), "stripe_contrast", 0.5)?,
                orientation,
                extent,
            )?,
            other => return Err(Error::invalid(format!("unknown occluder pattern {other:?}"))),
        };
        if !occluder.is_empty() {
            occluder.intensity = parse_or(get("occluder_intensity"), "occluder_intensity", occluder.intensity)?;
            occluder.jitter = parse_or(get("occluder_jitter"), "occluder_jitter", 0.0)?;
        }
        let seed: u64 = parse_or(get("seed"), "seed", 0)?;
        occluder.seed = seed;

        let target_texture = load_texture(get("texture").unwrap_or("blobs:0"), base, res)?;
        let scene = SceneSpec {
            target_texture,
            depth: parse_or(get("depth"), "depth", 1.0)?,
            occluder,
            occluder_depth: parse_or(get("occluder_depth"), "occluder_depth", 0.2)?,
            intrinsics: Intrinsics {
                fx,
                fy,
                ..Intrinsics::centered(fx, res)
            },
            resolution: res,
            eta: parse_or(get("eta"), "eta", 0.2)?,
            noise_rate: parse_or(get("noise_rate"), "noise_rate", 0.0)?,
        };
        scene.validate()?;
        let duration: u64 = parse_or(get("duration"), "duration", 300_000)?;
        let trajectory = Trajectory {
            v: (parse_or(get("v"), "v", 0.5)?, parse_or(get("vy"), "vy", 0.0)?),
            sample_rate: parse_or(get("sample_rate"), "sample_rate", 10_000.0)?,
            ..Trajectory::horizontal(0.0, duration)
        };
        trajectory.validate()?;
        Ok(Self {
            scene,
            trajectory,
            seed,
        })
    }
}

fn parse_or<T: FromStr>(raw: Option<&str>, key: &str, default: T) -> Result<T> {
    match raw {
        None => Ok(default),
        Some(s) => s
            .parse()
            .map_err(|_| Error::invalid(format!("bad value {s:?} for scene key {key}"))),
    }
}

fn load_texture(spec: &str, base: &Path, res: Resolution) -> Result<GrayImage> {
    let (h, w) = (res.height, res.width);
    if let Some(seed) = spec.strip_prefix("blobs:") {
        let seed = seed
            .parse()
            .map_err(|_| Error::invalid(format!("bad texture seed {seed:?}")))?;
        return Ok(texture::blobs(h, w, seed, 0.1, 0.95));
    }
    if let Some(seed) = spec.strip_prefix("dead_leaves:") {
        let seed = seed
            .parse()
            .map_err(|_| Error::invalid(format!("bad texture seed {seed:?}")))?;
        return Ok(texture::dead_leaves(h, w, seed, 0.1, 0.95));
    }
    if let Some(v) = spec.strip_prefix("uniform:") {
        let v: f64 = v
            .parse()
            .map_err(|_| Error::invalid(format!("bad uniform texture value {v:?}")))?;
        return Ok(texture::uniform(h, w, v));
    }
    if let Some(p) = spec.strip_prefix("bars:") {
        let p: usize = p
            .parse()
            .map_err(|_| Error::invalid(format!("bad bar period {p:?}")))?;
        return Ok(texture::bars(h, w, p, 0.2, 0.9));
    }
    Ok(read_pgm(&base.join(spec))?.to_unit())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn defaults_parse() {
        let c = SceneConfig::from_map(&map(&[]), Path::new(".")).unwrap();
        assert_eq!(c.scene.resolution, Resolution::new(64, 64));
        assert_eq!(c.scene.occluder.r_o, 14.0 / 16.0);
        assert_eq!(c.trajectory.t_ref, 150_000);
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(SceneConfig::from_map(&map(&[("colour", "red")]), Path::new(".")).is_err());
        assert!(SceneConfig::from_map(&map(&[("eta", "abc")]), Path::new(".")).is_err());
    }

    #[test]
    fn stripes_set_r_t() {
        let c = SceneConfig::from_map(
            &map(&[("pattern", "stripes"), ("stripes_per_slat", "3")]),
            Path::new("."),
        )
        .unwrap();
        assert_eq!(c.scene.occluder.r_t, 2.5);
    }
}
