use esai_core::recon::reconstruct_acc;
use esai_core::refocus::{warp_events, SubpixelEventStream, WarpParam};
use esai_core::sim::texture::{blobs, dead_leaves, scale_log_contrast, uniform};
use esai_core::sim::{make_fence_occluder, simulate_events, Intrinsics, OccluderSpec, Orientation, SceneSpec, Trajectory};
use esai_core::stats::spearman;
use esai_core::{EventCategory, GrayImage, LabeledEventStream, Resolution};
use std::collections::HashMap;

const FX: f64 = 200.0;
const DEPTH: f64 = 1.0;

fn scene(texture: GrayImage, occluder: OccluderSpec) -> SceneSpec {
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
        noise_rate: 0.0,
    }
}

fn run(spec: &SceneSpec, psi: f64, seed: u64) -> LabeledEventStream {
    simulate_events(spec, &Trajectory::horizontal(psi * DEPTH / FX, 300_000), seed).unwrap().0
}

#[test]
fn occlusion_contrast_drives_oa_count() {
    let target = 0.6;
    let mut contrast = vec![];
    let mut counts = vec![];
    for k in 1..=10 {
        let occ = target * (-0.25 * k as f64).exp();
        let spec = scene(
            uniform(24, 48, target),
            make_fence_occluder(0.5, 4, Orientation::Vertical, 48).unwrap().with_intensity(occ),
        );
        let labeled = run(&spec, 80.0, k);
        contrast.push((target.ln() - occ.ln()).abs());
        counts.push(labeled.count(EventCategory::OccluderTarget) as f64);
    }
    let rho = spearman(&contrast, &counts);
    assert!(rho > 0.9, "rank correlation {rho}: {counts:?}");
}

#[test]
fn target_gradient_drives_aa_count() {
    let base = dead_leaves(32, 48, 7, 0.1, 0.5);
    let mut gradient = vec![];
    let mut counts = vec![];
    for k in 1..=10 {
        let tex = scale_log_contrast(&base, 0.2 * k as f64).unwrap();
        let log = tex.data().mapv(f64::ln);
        let (h, w) = log.dim();
        let mut g = 0.0;
        for r in 0..h - 1 {
            for c in 0..w - 1 {
                g += (log[[r, c + 1]] - log[[r, c]]).hypot(log[[r + 1, c]] - log[[r, c]]);
            }
        }
        let labeled = run(&scene(tex, OccluderSpec::empty()), 80.0, k);
        gradient.push(g);
        counts.push(labeled.count(EventCategory::TargetTarget) as f64);
    }
    let rho = spearman(&gradient, &counts);
    assert!(rho > 0.9, "rank correlation {rho}: {counts:?}");
}

#[test]
fn refocused_accumulation_tracks_occlusion_contrast() {
    let tex = blobs(48, 64, 3, 0.1, 0.95);
    let occ = make_fence_occluder(0.8, 4, Orientation::Vertical, 64).unwrap();
    let occ_level = occ.intensity;
    let spec = scene(tex.clone(), occ);
    let psi = 100.0;
    let labeled = run(&spec, psi, 1);
    let acc = reconstruct_acc(&warp_events(labeled.stream(), &WarpParam::new(psi, 0.0, 150_000).unwrap()));
    // columns near the border see the target only part of the sweep
    let mut a = vec![];
    let mut b = vec![];
    for ((r, c), v) in acc.data().indexed_iter() {
        if (16..48).contains(&c) {
            a.push(*v);
            b.push((tex.data()[[r, c]].ln() - occ_level.ln()).abs());
        }
    }
    let rho = spearman(&a, &b);
    assert!(rho > 0.8, "pixelwise rank correlation {rho}");
}

/// Fraction of OA events whose EPI column lies within half a pixel of the mean column of their trajectory.
///
/// A trajectory collects the events of one target pixel: same row and same
/// rounded position after warping by the true rate.
fn vertical_fraction(labeled: &LabeledEventStream, truth: &WarpParam, shown: &SubpixelEventStream) -> f64 {
    let ideal = warp_events(labeled.stream(), truth);
    let mut groups: HashMap<(i64, i64), Vec<f64>> = HashMap::new();
    for ((e, label), s) in ideal.events().iter().zip(labeled.labels()).zip(shown.events()) {
        if *label == EventCategory::OccluderTarget {
            groups.entry((e.y.round() as i64, e.x.round() as i64)).or_default().push(s.x.round());
        }
    }
    let (mut near, mut total) = (0usize, 0usize);
    for xs in groups.values() {
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        near += xs.iter().filter(|x| (*x - mean).abs() <= 0.5).count();
        total += xs.len();
    }
    near as f64 / total as f64
}

#[test]
fn focused_epi_lines_are_vertical() {
    let spec = scene(
        dead_leaves(32, 64, 11, 0.1, 0.95),
        make_fence_occluder(0.8, 4, Orientation::Vertical, 64).unwrap(),
    );
    let psi = 100.0;
    let labeled = run(&spec, psi, 2);
    let truth = WarpParam::new(psi, 0.0, 150_000).unwrap();
    let focused = warp_events(labeled.stream(), &truth);
    let unfocused = warp_events(labeled.stream(), &WarpParam::new(0.0, 0.0, 150_000).unwrap());
    let f = vertical_fraction(&labeled, &truth, &focused);
    let u = vertical_fraction(&labeled, &truth, &unfocused);
    assert!(f >= 0.95, "focused {f}");
    assert!(u < 0.5, "unfocused {u}");
}

