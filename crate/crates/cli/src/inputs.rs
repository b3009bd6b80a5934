//! Argument parsing helpers, path checks and file plumbing shared by subcommands.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use esai_core::dataset::parse_key_values;
use esai_core::image::{read_f32_grid, read_pgm, write_f32_grid, write_pgm};
use esai_core::recon::{LossWeights, TrainConfig};
use esai_core::refocus::{auto_refocus, compute_psi, FocusMetric, RefocusSearch};
use esai_core::snn::LifConfig;
use esai_core::{load_sample, read_events, DatasetSample, Error, EventFormat, EventStream, GrayImage, RangeHint, WarpParam};

use crate::{CliError, CliResult, EventSource, PsiArgs};

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn missing(path: &Path, what: &str) -> CliError {
    CliError::Core(Error::io(
        path,
        std::io::Error::new(std::io::ErrorKind::NotFound, format!("{what} not found")),
    ))
}

pub fn require_file(path: &Path) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(missing(path, "file"))
    }
}

pub fn require_dir(path: &Path) -> CliResult<()> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(missing(path, "directory"))
    }
}

/// The directory an output will be written into must already exist.
pub fn require_output(path: &Path) -> CliResult<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => require_dir(p),
        _ => Ok(()),
    }
}

pub fn parse_value<T: FromStr>(raw: &str, what: &str) -> CliResult<T> {
    raw.trim()
        .parse()
        .map_err(|_| usage(format!("bad {what} {raw:?}")))
}

/// `KEY=VALUE` overrides, applied in order.
pub fn apply_overrides(map: &mut BTreeMap<String, String>, sets: &[String]) -> CliResult<()> {
    for s in sets {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| usage(format!("--set expects KEY=VALUE, got {s:?}")))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(())
}

pub fn read_key_values(path: &Path) -> CliResult<BTreeMap<String, String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_key_values(&text, path)?)
}

pub fn write_key_values(path: &Path, map: &BTreeMap<String, String>) -> CliResult<()> {
    let text: String = map.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
    fs::write(path, text).map_err(|e| CliError::Core(Error::io(path, e)))
}

pub fn parse_pair(raw: &str, sep: char, what: &str) -> CliResult<(f64, f64)> {
    let (a, b) = raw
        .split_once(sep)
        .ok_or_else(|| usage(format!("{what} expects A{sep}B, got {raw:?}")))?;
    Ok((parse_value(a, what)?, parse_value(b, what)?))
}

pub fn event_format(path: &Path) -> CliResult<EventFormat> {
    EventFormat::from_path(path).ok_or_else(|| usage(format!("{}: event files must end in .bin or .csv", path.display())))
}

pub fn read_event_file(path: &Path) -> CliResult<EventStream> {
    let format = event_format(path)?;
    require_file(path)?;
    Ok(read_events(path, format, None)?)
}

pub enum Loaded {
    Sample(Box<DatasetSample>),
    Events(EventStream),
}

impl Loaded {
    pub fn stream(&self) -> &EventStream {
        match self {
            Loaded::Sample(s) => &s.events,
            Loaded::Events(e) => e,
        }
    }

    pub fn sample(&self) -> Option<&DatasetSample> {
        match self {
            Loaded::Sample(s) => Some(s),
            Loaded::Events(_) => None,
        }
    }
}

pub fn check_source(src: &EventSource) -> CliResult<()> {
    match (&src.sample, &src.events) {
        (Some(dir), _) => require_dir(dir),
        (None, Some(f)) => event_format(f).and_then(|_| require_file(f)),
        (None, None) => Err(usage("one of --sample or --events is required")),
    }
}

pub fn load_source(src: &EventSource) -> CliResult<Loaded> {
    match (&src.sample, &src.events) {
        (Some(dir), _) => Ok(Loaded::Sample(Box::new(load_sample(dir)?))),
        (None, Some(f)) => Ok(Loaded::Events(read_event_file(f)?)),
        (None, None) => Err(usage("one of --sample or --events is required")),
    }
}

/// Time of the occlusion-free reference frame, clamped into the event span.
pub fn reference_time(sample: &DatasetSample) -> u64 {
    let (t0, t1) = sample.events.t_span();
    (sample.occ_free_aps.t.max(0) as u64).clamp(t0, t1)
}

pub fn meta_psi(sample: &DatasetSample) -> CliResult<WarpParam> {
    Ok(compute_psi(
        (sample.fx, sample.fy),
        (sample.v, sample.vy),
        sample.depth,
        reference_time(sample),
    )?)
}

pub enum PsiChoice {
    Auto(RefocusSearch),
    FromMeta,
    Fixed(f64, f64),
}

/// Validates the warp-rate flags without touching any data.
pub fn parse_psi(args: &PsiArgs, has_sample: bool) -> CliResult<PsiChoice> {
    match args.psi.as_str() {
        "auto" => {
            let x = parse_pair(&args.bounds, ':', "--bounds")?;
            let y = args
                .y_bounds
                .as_deref()
                .map(|b| parse_pair(b, ':', "--y-bounds"))
                .transpose()?;
            let metric: FocusMetric = args.metric.parse().map_err(|e: Error| usage(e.to_string()))?;
            for (lo, hi) in std::iter::once(x).chain(y) {
                if !(lo < hi) {
                    return Err(usage(format!("search bounds {lo}:{hi} must be increasing")));
                }
            }
            Ok(PsiChoice::Auto(RefocusSearch {
                x_bounds: Some(x),
                y_bounds: y,
                metric,
                t_ref: args.t_ref,
                ..RefocusSearch::default()
            }))
        }
        "from-meta" if has_sample => Ok(PsiChoice::FromMeta),
        "from-meta" => Err(usage("--psi from-meta needs --sample")),
        raw => {
            let (px, py) = parse_pair(raw, ',', "--psi")?;
            if !(px.is_finite() && py.is_finite()) {
                return Err(usage(format!("--psi {raw:?} must be finite")));
            }
            Ok(PsiChoice::Fixed(px, py))
        }
    }
}

pub fn resolve_psi(choice: PsiChoice, loaded: &Loaded, t_ref: Option<u64>) -> CliResult<WarpParam> {
    let stream = loaded.stream();
    let default_t = || {
        t_ref
            .or_else(|| loaded.sample().map(reference_time))
            .unwrap_or_else(|| stream.t_mid())
    };
    match choice {
        PsiChoice::Auto(mut search) => {
            search.t_ref = Some(default_t());
            Ok(auto_refocus(stream, &search)?)
        }
        PsiChoice::FromMeta => {
            let sample = loaded.sample().ok_or_else(|| usage("--psi from-meta needs --sample"))?;
            let w = meta_psi(sample)?;
            Ok(match t_ref {
                Some(t) => WarpParam::new(w.psi.0, w.psi.1, t)?,
                None => w,
            })
        }
        PsiChoice::Fixed(px, py) => Ok(WarpParam::new(px, py, default_t())?),
    }
}

pub fn psi_text(w: &WarpParam) -> String {
    format!("psi_x={}\npsi_y={}\nt_ref={}\n", w.psi.0, w.psi.1, w.t_ref)
}

/// Reads a warp rate from a `psi_x`/`psi_y`/`t_ref` file or a literal `PX,PY`.
pub fn read_psi(raw: &str, default_t: u64) -> CliResult<WarpParam> {
    let path = Path::new(raw);
    if path.is_file() {
        let map = read_key_values(path)?;
        let get = |k: &str| -> CliResult<f64> {
            let v = map
                .get(k)
                .ok_or_else(|| CliError::Core(Error::MissingKey(format!("{k} in {raw}"))))?;
            v.parse()
                .map_err(|_| CliError::Core(Error::parse(raw.to_string(), format!("bad {k} value {v:?}"))))
        };
        let t = match map.get("t_ref") {
            Some(v) => v
                .parse()
                .map_err(|_| CliError::Core(Error::parse(raw.to_string(), format!("bad t_ref {v:?}"))))?,
            None => default_t,
        };
        return Ok(WarpParam::new(get("psi_x")?, get("psi_y")?, t)?);
    }
    let (px, py) = parse_pair(raw, ',', "warp rate")?;
    Ok(WarpParam::new(px, py, default_t)?)
}

enum ImageKind {
    Pgm,
    F32,
}

fn image_kind(path: &Path) -> CliResult<ImageKind> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("pgm") => Ok(ImageKind::Pgm),
        Some("f32") => Ok(ImageKind::F32),
        _ => Err(usage(format!("{}: images must end in .pgm or .f32", path.display()))),
    }
}

pub fn check_image_path(path: &Path) -> CliResult<()> {
    image_kind(path).map(|_| ())
}

/// Reads an image as `[0, 1]` intensities.
pub fn read_image(path: &Path) -> CliResult<GrayImage> {
    require_file(path)?;
    Ok(match image_kind(path)? {
        ImageKind::Pgm => read_pgm(path)?.to_unit(),
        ImageKind::F32 => GrayImage::new(read_f32_grid(path)?, RangeHint::Unit)?,
    })
}

pub fn write_image(img: &GrayImage, path: &Path) -> CliResult<()> {
    match image_kind(path)? {
        ImageKind::Pgm => write_pgm(img, path)?,
        ImageKind::F32 => write_f32_grid(img.data(), path)?,
    }
    Ok(())
}

/// Subdirectories of `root` holding a `meta.txt`, sorted by name.
pub fn sample_dirs(root: &Path) -> CliResult<Vec<PathBuf>> {
    require_dir(root)?;
    let mut dirs: Vec<PathBuf> = fs::read_dir(root)
        .map_err(|e| Error::io(root, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("meta.txt").is_file())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(CliError::Core(Error::Empty(format!(
            "{} holds no sample directories",
            root.display()
        ))));
    }
    Ok(dirs)
}

const TRAIN_KEYS: &[&str] = &[
    "epochs",
    "batch_size",
    "learning_rate",
    "t_max",
    "seed",
    "intervals",
    "beta_pix",
    "beta_tv",
    "alpha",
    "u_th",
    "surrogate_width",
    "crop",
];

/// Training settings from `key=value` pairs; absent keys keep the defaults, `crop=0` disables cropping.
pub fn train_config(map: &BTreeMap<String, String>) -> CliResult<TrainConfig> {
    if let Some(k) = map.keys().find(|k| !TRAIN_KEYS.contains(&k.as_str())) {
        return Err(usage(format!("unknown training key {k:?}")));
    }
    let d = TrainConfig::default();
    let get = |k: &str| map.get(k).map(String::as_str);
    fn or<T: FromStr>(raw: Option<&str>, key: &str, default: T) -> CliResult<T> {
        raw.map_or(Ok(default), |r| parse_value(r, key))
    }
    let loss = LossWeights::new(
        or(get("beta_pix"), "beta_pix", d.loss.beta_pix)?,
        or(get("beta_tv"), "beta_tv", d.loss.beta_tv)?,
    )
    .map_err(|e| usage(e.to_string()))?;
    let lif = LifConfig::new(
        or(get("alpha"), "alpha", d.lif.alpha)?,
        or(get("u_th"), "u_th", d.lif.u_th)?,
        or(get("surrogate_width"), "surrogate_width", d.lif.surrogate_width)?,
    )
    .map_err(|e| usage(e.to_string()))?;
    let crop: usize = or(get("crop"), "crop", 0)?;
    let cfg = TrainConfig {
        epochs: or(get("epochs"), "epochs", d.epochs)?,
        batch_size: or(get("batch_size"), "batch_size", d.batch_size)?,
        learning_rate: or(get("learning_rate"), "learning_rate", d.learning_rate)?,
        t_max: or(get("t_max"), "t_max", d.t_max)?,
        seed: or(get("seed"), "seed", d.seed)?,
        intervals: or(get("intervals"), "intervals", d.intervals)?,
        loss,
        lif,
        crop: (crop > 0).then_some(crop),
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}
