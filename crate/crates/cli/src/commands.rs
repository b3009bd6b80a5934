use std::fs;
use std::path::Path;

use esai_core::checkpoint::{load_checkpoint, round_to_f32, save_checkpoint};
use esai_core::dataset::parse_key_values;
use esai_core::image::{write_f32_grid, write_pgm_scaled};
use esai_core::recon::{infer_stack, psnr, reconstruct_acc, ssim, train_with_validation, write_history, TrainSample};
use esai_core::refocus::{apse, epi_slice, warp_events, EpiMode};
use esai_core::sim::config::SceneConfig;
use esai_core::sim::{export_sample, simulate_events};
use esai_core::{load_sample, stack_events, write_events, Error, GrayImage, RangeHint};

use crate::inputs::*;
use crate::report::{write_plot, write_report_csv, RunRow};
use crate::{
    AccArgs, CliError, CliResult, Command, EpiArgs, EvalArgs, InferArgs, RefocusArgs, ReportArgs, SimulateArgs,
    TrainArgs,
};

pub fn dispatch(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Simulate(a) => simulate(a),
        Command::Refocus(a) => refocus(a),
        Command::Epi(a) => epi(a),
        Command::Acc(a) => acc(a),
        Command::Train(a) => train(a),
        Command::Infer(a) => infer(a),
        Command::Eval(a) => eval(a),
        Command::Report(a) => report(a),
    }
}

fn simulate(a: SimulateArgs) -> CliResult<()> {
    require_file(&a.scene)?;
    require_output(&a.out)?;
    let text = fs::read_to_string(&a.scene).map_err(|e| Error::io(&a.scene, e))?;
    let mut map = parse_key_values(&text, &a.scene)?;
    apply_overrides(&mut map, &a.set)?;
    if let Some(seed) = a.seed {
        map.insert("seed".into(), seed.to_string());
    }
    let cfg = SceneConfig::from_map(&map, a.scene.parent().unwrap_or(Path::new(".")))?;
    let (_, sample) = simulate_events(&cfg.scene, &cfg.trajectory, cfg.seed)?;
    export_sample(&sample, &a.out)?;
    let psi = cfg.scene.target_psi(cfg.trajectory.v);
    let info = format!(
        "r_o={}\nr_t={}\npsi_x={}\npsi_y={}\nseed={}\n",
        cfg.scene.occluder.r_o, cfg.scene.occluder.r_t, psi.0, psi.1, cfg.seed
    );
    fs::write(a.out.join("scene.txt"), info).map_err(|e| Error::io(a.out.join("scene.txt"), e))?;
    println!("{}: {} events", a.out.display(), sample.events.len());
    Ok(())
}

fn refocus(a: RefocusArgs) -> CliResult<()> {
    check_source(&a.source)?;
    let choice = parse_psi(&a.psi, a.source.sample.is_some())?;
    let format = event_format(&a.out)?;
    require_output(&a.out)?;
    if let Some(p) = &a.psi_out {
        require_output(p)?;
    }
    let loaded = load_source(&a.source)?;
    let w = resolve_psi(choice, &loaded, a.psi.t_ref)?;
    let refocused = warp_events(loaded.stream(), &w).rasterize();
    write_events(&refocused, &a.out, format)?;
    if let Some(p) = &a.psi_out {
        fs::write(p, psi_text(&w)).map_err(|e| Error::io(p, e))?;
    }
    print!("{}", psi_text(&w));
    Ok(())
}

fn epi(a: EpiArgs) -> CliResult<()> {
    let mode: EpiMode = a.mode.parse().map_err(|e: Error| usage(e.to_string()))?;
    if a.bins == 0 {
        return Err(usage("--bins must be positive"));
    }
    check_image_path(&a.out)?;
    require_output(&a.out)?;
    let stream = read_event_file(&a.input)?;
    let img = epi_slice(&stream, a.row, a.bins, mode)?;
    if a.out.extension().is_some_and(|e| e == "f32") {
        write_f32_grid(&img.data, &a.out)?;
    } else {
        write_pgm_scaled(&GrayImage::new(img.data, RangeHint::Raw)?, &a.out)?;
    }
    Ok(())
}

fn acc(a: AccArgs) -> CliResult<()> {
    check_image_path(&a.out)?;
    require_output(&a.out)?;
    let stream = read_event_file(&a.input)?;
    write_image(&reconstruct_acc(&stream), &a.out)
}

/// Stack of a sample refocused at its ground-truth rate, paired with the occlusion-free frame.
fn training_sample(dir: &Path, intervals: usize) -> CliResult<TrainSample> {
    let sample = load_sample(dir)?;
    let refocused = warp_events(&sample.events, &meta_psi(&sample)?);
    let stack = stack_events(&refocused, intervals, sample.events.t_span())?;
    Ok(TrainSample::new(stack, sample.occ_free_aps.image.to_unit())?)
}

fn train(a: TrainArgs) -> CliResult<()> {
    let mut map = match &a.config {
        Some(p) => {
            require_file(p)?;
            read_key_values(p)?
        }
        None => Default::default(),
    };
    apply_overrides(&mut map, &a.set)?;
    if let Some(seed) = a.seed {
        map.insert("seed".into(), seed.to_string());
    }
    let cfg = train_config(&map)?;
    let dirs = match &a.data {
        Some(root) => sample_dirs(root)?,
        None => {
            for d in &a.sample {
                require_dir(d)?;
            }
            a.sample.clone()
        }
    };
    let val_dirs = a.val.as_deref().map(sample_dirs).transpose()?.unwrap_or_default();
    require_output(&a.out)?;
    if let Some(h) = &a.history {
        require_output(h)?;
    }

    let load = |ds: &[std::path::PathBuf]| -> CliResult<Vec<TrainSample>> {
        ds.iter().map(|d| training_sample(d, cfg.intervals)).collect()
    };
    let set = load(&dirs)?;
    let val = load(&val_dirs)?;
    let mut out = train_with_validation(&set, &val, &cfg)?;
    round_to_f32(&mut out.encoder, &mut out.decoder);
    save_checkpoint(&a.out, &out.encoder, &out.decoder)?;
    if let Some(h) = &a.history {
        write_history(&out.history, h)?;
    }
    if let Some(last) = out.history.last() {
        println!("epoch {} loss {:.6}", last.epoch, last.loss);
    }
    Ok(())
}

fn infer(a: InferArgs) -> CliResult<()> {
    check_source(&a.source)?;
    let choice = if a.refocused {
        None
    } else {
        Some(parse_psi(&a.psi, a.source.sample.is_some())?)
    };
    if a.intervals == 0 {
        return Err(usage("--intervals must be positive"));
    }
    require_file(&a.model)?;
    check_image_path(&a.out)?;
    require_output(&a.out)?;
    let (enc, dec) = load_checkpoint(&a.model)?;
    let loaded = load_source(&a.source)?;
    let stream = loaded.stream();
    let stack = match choice {
        None => stack_events(stream, a.intervals, stream.t_span())?,
        Some(c) => {
            let w = resolve_psi(c, &loaded, a.psi.t_ref)?;
            stack_events(&warp_events(stream, &w), a.intervals, stream.t_span())?
        }
    };
    write_image(&infer_stack(&stack, &enc, &dec)?, &a.out)
}

fn eval(a: EvalArgs) -> CliResult<()> {
    if let Some(s) = &a.sample {
        require_dir(s)?;
    }
    if let Some(r) = &a.record {
        require_output(r)?;
    }
    let value = match a.metric.as_str() {
        "psnr" | "ssim" => {
            let pred = a.pred.as_ref().ok_or_else(|| usage("--pred is required for psnr and ssim"))?;
            let gt_path = match (&a.gt, &a.sample) {
                (Some(g), _) => g.clone(),
                (None, Some(s)) => s.join("occ_free_aps.pgm"),
                (None, None) => return Err(usage("--gt or --sample is required for psnr and ssim")),
            };
            check_image_path(pred)?;
            check_image_path(&gt_path)?;
            let (p, g) = (read_image(pred)?, read_image(&gt_path)?);
            if a.metric == "psnr" {
                psnr(&p, &g, 1.0)?
            } else {
                ssim(&p, &g)?
            }
        }
        "apse" => {
            let dir = a.sample.as_ref().ok_or_else(|| usage("--sample is required for apse"))?;
            let est = a.psi.as_ref().ok_or_else(|| usage("--psi is required for apse"))?;
            let sample = load_sample(dir)?;
            let gt = match a.gt_psi.as_str() {
                "from-meta" => meta_psi(&sample)?,
                raw => {
                    let (px, py) = parse_pair(raw, ',', "--gt-psi")?;
                    esai_core::WarpParam::new(px, py, reference_time(&sample))?
                }
            };
            let est = read_psi(est, gt.t_ref)?;
            apse(&est, &gt, &sample.events)?
        }
        other => return Err(usage(format!("unknown metric {other:?} (psnr, ssim, apse)"))),
    };
    println!("{}={value:.6}", a.metric);
    if let Some(r) = &a.record {
        let mut map = if r.is_file() { read_key_values(r)? } else { Default::default() };
        if let Some(info) = a.sample.as_ref().map(|s| s.join("scene.txt")).filter(|p| p.is_file()) {
            let scene = read_key_values(&info)?;
            for k in ["r_o", "r_t"] {
                if let Some(v) = scene.get(k) {
                    map.insert(k.into(), v.clone());
                }
            }
        }
        map.insert(a.metric.clone(), format!("{value:.6}"));
        write_key_values(r, &map)?;
    }
    Ok(())
}

fn report(a: ReportArgs) -> CliResult<()> {
    require_dir(&a.runs)?;
    require_output(&a.out)?;
    if let Some(p) = &a.plot {
        require_output(p)?;
    }
    let mut dirs: Vec<_> = fs::read_dir(&a.runs)
        .map_err(|e| Error::io(&a.runs, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    let mut rows = vec![];
    let mut broken = vec![];
    for d in &dirs {
        let name = d.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        match RunRow::load(&name, &d.join("run.txt")) {
            Ok(r) => rows.push(r),
            Err(why) => broken.push(format!("{name} ({why})")),
        }
    }
    if !broken.is_empty() {
        return Err(CliError::Core(Error::MissingKey(format!(
            "incomplete runs in {}: {}",
            a.runs.display(),
            broken.join(", ")
        ))));
    }
    if rows.is_empty() {
        return Err(CliError::Core(Error::Empty(format!("{}: 0 runs found", a.runs.display()))));
    }
    write_report_csv(&rows, &a.out)?;
    if let Some(p) = &a.plot {
        write_plot(&rows, p)?;
    }
    println!("{} runs", rows.len());
    Ok(())
}
