//! Scene builders, independent reference implementations and small helpers.

use std::path::{Path, PathBuf};
use std::process::Command;

use esai_core::refocus::WarpParam;
use esai_core::sim::texture::dead_leaves;
use esai_core::sim::{make_fence_occluder, simulate_events, Intrinsics, OccluderSpec, Orientation, SceneSpec, Trajectory};
use esai_core::snn::EncoderParams;
use esai_core::{DatasetSample, FrameStack, GrayImage, LabeledEventStream, Resolution};
use ndarray::{Array3, Array4};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const FX: f64 = 200.0;
pub const DEPTH: f64 = 1.0;
pub const DURATION_US: u64 = 300_000;
pub const T_REF: u64 = DURATION_US / 2;

pub fn scene_spec(texture: GrayImage, occluder: OccluderSpec, noise_rate: f64) -> SceneSpec {
    let (h, w) = texture.data().dim();
    let res = Resolution::new(w, h);
    SceneSpec {
        target_texture: texture,
        depth: DEPTH,
        occluder,
        occluder_depth: DEPTH / 5.0,
        intrinsics: Intrinsics::centered(FX, res),
        resolution: res,
        eta: 0.2,
        noise_rate,
    }
}

/// Fence scene over a dead-leaves target, swept horizontally at warp rate `psi`.
pub struct FenceScene {
    pub texture_seed: u64,
    pub size: usize,
    pub r_o: f64,
    pub psi: f64,
    pub noise_rate: f64,
}

impl FenceScene {
    pub fn simulate(&self, seed: u64) -> (LabeledEventStream, DatasetSample, WarpParam) {
        let spec = scene_spec(
            dead_leaves(self.size, self.size, self.texture_seed, 0.1, 0.95),
            make_fence_occluder(self.r_o, 4, Orientation::Vertical, self.size).unwrap(),
            self.noise_rate,
        );
        let traj = Trajectory::horizontal(self.psi * DEPTH / FX, DURATION_US);
        let (labeled, sample) = simulate_events(&spec, &traj, seed).unwrap();
        (labeled, sample, WarpParam::new(self.psi, 0.0, T_REF).unwrap())
    }
}

pub fn random_stack(rng: &mut ChaCha8Rng, n: usize, h: usize, w: usize) -> FrameStack {
    let data = Array4::from_shape_fn((n, 2, h, w), |_| if rng.gen_bool(0.5) { rng.gen_range(1..6) as f64 } else { 0.0 });
    FrameStack::new(data, (0..=n).map(|i| i as f64).collect()).unwrap()
}

/// Per-neuron LIF simulation: each neuron gathers its zero-padded inputs in
/// `(ci, ky, kx)` order, then `u = alpha * u_prev * (1 - o_prev) + I`, fires when `u > U_th`.
/// Returns mean layer-3 spikes and mean layer-1 spikes.
pub fn scalar_encoder(stack: &FrameStack, p: &EncoderParams) -> (Array3<f64>, Array3<f64>) {
    let (n, h, w) = (stack.intervals(), stack.height(), stack.width());
    let chans = [8usize, 16, 32];
    let mut u: Vec<Array3<f64>> = chans.iter().map(|&c| Array3::zeros((c, h, w))).collect();
    let mut o = u.clone();
    let mut feat = Array3::<f64>::zeros((32, h, w));
    let mut skip = Array3::<f64>::zeros((8, h, w));
    for t in 0..n {
        let frame = stack.data().slice(ndarray::s![t, .., .., ..]).to_owned();
        for l in 0..3 {
            let input = match l {
                0 => frame.clone(),
                1 => o[0].clone(),
                _ => ndarray::concatenate(ndarray::Axis(0), &[o[1].view(), o[0].view()]).unwrap(),
            };
            let k = &p.layers[l];
            let r = (k.size / 2) as isize;
            let cfg = p.lif[l];
            let mut fired = Array3::zeros((chans[l], h, w));
            for co in 0..chans[l] {
                for y in 0..h {
                    for x in 0..w {
                        let mut current = 0.0;
                        for ci in 0..k.in_ch {
                            for ky in 0..k.size {
                                for kx in 0..k.size {
                                    let iy = y as isize + ky as isize - r;
                                    let ix = x as isize + kx as isize - r;
                                    if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                        continue;
                                    }
                                    let v = input[[ci, iy as usize, ix as usize]];
                                    if v != 0.0 {
                                        current += k.get(co, ci, ky, kx) * v;
                                    }
                                }
                            }
                        }
                        let now = cfg.alpha * u[l][[co, y, x]] * (1.0 - o[l][[co, y, x]]) + current;
                        u[l][[co, y, x]] = now;
                        fired[[co, y, x]] = if now > cfg.u_th { 1.0 } else { 0.0 };
                    }
                }
            }
            o[l] = fired;
        }
        feat += &o[2];
        skip += &o[0];
    }
    (feat / n as f64, skip / n as f64)
}

pub fn relative_ok(an: f64, fd: f64, tol: f64, abs: f64) -> bool {
    (an - fd).abs() <= tol * an.abs().max(fd.abs()) + abs
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn esai(args: &[&str], threads: &str) -> Result<String, String> {
    let o = Command::new(env!("CARGO_BIN_EXE_esai"))
        .args(args)
        .env("ESAI_THREADS", threads)
        .output()
        .map_err(|e| e.to_string())?;
    if o.status.success() {
        Ok(String::from_utf8_lossy(&o.stdout).into_owned())
    } else {
        Err(format!("esai {} -> {:?}: {}", args.join(" "), o.status.code(), String::from_utf8_lossy(&o.stderr)))
    }
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Every file below `root`, as paths relative to it, sorted.
pub fn files_below(root: &Path) -> Vec<PathBuf> {
    let mut out = vec![];
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}
