use std::io::Write;
use std::path::Path;

use privcam_core::optics::CurveTable;
use privcam_core::pipeline::config::CameraSpec;
use privcam_core::pipeline::{io, RUN_FILE, MANIFEST_FILE};
use privcam_core::render::apply_variant_with;
use privcam_core::{
    blur_depth_curve, blur_field, decode_disparity, fill_invalid, quantize_8bit, run_dataset, triangulate,
    CameraConfig, DepthClip, DepthMap, DisparityEncoding, Error, GrayscaleWeights, JobConfig, RenderOptions,
    Result, StereoRig,
};
use serde_json::json;

use crate::{BatchArgs, CurveArgs, InspectArgs, LensArgs, RigArgs, SimulateArgs};

fn usage(msg: impl Into<String>) -> Error {
    Error::Usage(msg.into())
}

fn data(msg: impl Into<String>) -> Error {
    Error::Data(msg.into())
}

fn camera_from(lens: &LensArgs) -> Result<CameraConfig> {
    CameraConfig::from_lens_units(lens.focal_length_mm, lens.f_number, lens.pixel_size_um, lens.focus_m, "")
}

enum RigInput<'a> {
    None,
    Fixed(StereoRig),
    Sidecar(&'a Path),
}

fn rig_input(args: &RigArgs) -> Result<RigInput<'_>> {
    match (&args.camera_json, args.fx_px, args.baseline_m) {
        (Some(p), _, _) => Ok(RigInput::Sidecar(p)),
        (None, Some(fx), Some(b)) => Ok(RigInput::Fixed(StereoRig::new(fx, b)?)),
        _ => Ok(RigInput::None),
    }
}

fn resolve_rig(input: RigInput<'_>) -> Result<Option<StereoRig>> {
    match input {
        RigInput::None => Ok(None),
        RigInput::Fixed(r) => Ok(Some(r)),
        RigInput::Sidecar(p) => StereoRig::from_sidecar_file(p).map(Some),
    }
}

fn disparity_encoding(path: &Path) -> DisparityEncoding {
    match io::extension(path).as_str() {
        "tif" | "tiff" => DisparityEncoding::PlainFloat,
        _ => DisparityEncoding::Cityscapes16,
    }
}

fn write_output(path: &Path, bytes: &[u8]) -> Result<()> {
    io::write_atomic(path, bytes)
}

pub fn simulate(a: SimulateArgs) -> Result<u8> {
    // everything that can be checked without touching files
    let cam = camera_from(&a.lens)?;
    if a.k == 0 {
        return Err(usage("--k must be at least 1"));
    }
    let has_depth_input = a.disparity.is_some() || a.depth.is_some();
    let rig = rig_input(&a.rig)?;
    if !a.variant.needs_depth() {
        if has_depth_input {
            return Err(usage(format!(
                "--variant {} ignores depth; drop --disparity/--depth or use --variant B or BG",
                a.variant
            )));
        }
        if !matches!(rig, RigInput::None) {
            return Err(usage(format!("--variant {} takes no stereo rig flags", a.variant)));
        }
    } else if !has_depth_input {
        return Err(usage(format!("--variant {} needs --disparity or --depth", a.variant)));
    }
    if a.disparity.is_some() && matches!(rig, RigInput::None) {
        return Err(usage("--disparity needs --camera-json or both --fx-px and --baseline-m"));
    }
    if a.depth.is_some() && !matches!(rig, RigInput::None) {
        return Err(usage("--depth is already metric; drop --camera-json/--fx-px/--baseline-m"));
    }
    if io::extension(&a.out) != "png" {
        return Err(usage(format!("--out must name a .png file, got {}", a.out.display())));
    }

    let img = io::read_rgb_image(&a.image)?;
    let clip = DepthClip::default();
    let mut valid_fraction = None;
    let depth = if let Some(path) = &a.disparity {
        let disp = decode_disparity(&io::read_disparity_raster(path)?, disparity_encoding(path))?;
        valid_fraction = Some(disp.valid_fraction());
        let rig = resolve_rig(rig)?.expect("checked above");
        Some(triangulate(&disp, &rig, &clip)?)
    } else if let Some(path) = &a.depth {
        let raw = io::decode_tiff_f32(&io::read_bytes(path)?)?;
        let (w, h) = raw.dimensions();
        let values = match raw {
            privcam_core::RawRaster::F32 { data, .. } => data.into_iter().map(f64::from).collect(),
            privcam_core::RawRaster::U16 { .. } => unreachable!("TIFF decoder yields f32"),
        };
        let mut d = DepthMap::with_missing(w, h, values)?;
        for (z, ok) in d.depth.iter_mut().zip(&d.valid) {
            if *ok {
                *z = z.clamp(clip.near_m, clip.far_m);
            }
        }
        valid_fraction = Some(d.valid_count() as f64 / d.valid.len() as f64);
        Some(d)
    } else {
        None
    };

    let filled = match depth {
        Some(d) => {
            if (d.width, d.height) != (img.width(), img.height()) {
                return Err(data(format!(
                    "depth input is {}x{} but image is {}x{}",
                    d.width,
                    d.height,
                    img.width(),
                    img.height()
                )));
            }
            Some(fill_invalid(&d, a.fill_policy)?)
        }
        None => None,
    };

    let opts = RenderOptions {
        clip,
        ..RenderOptions::with_k(a.k)
    };
    let out = apply_variant_with(&img, filled.as_ref(), &cam, a.variant, &opts, &GrayscaleWeights::default())?;
    let q = quantize_8bit(&out);
    write_output(&a.out, &io::encode_png(&q.raster)?)?;

    println!("image: {}x{}", img.width(), img.height());
    println!("variant: {}", a.variant);
    if let Some(f) = valid_fraction {
        println!("valid_depth_fraction: {f}");
    }
    if let Some(d) = &filled {
        let field = blur_field(d, &cam)?;
        println!("coc_px min={} mean={} max={}", field.min(), field.mean(), field.max());
        println!("layers: {}", a.k);
    }
    println!("clamped_values: {}", q.clamped);
    println!("wrote {}", a.out.display());
    Ok(0)
}

fn read_camera_json(path: &Path) -> Result<CameraConfig> {
    let text = io::read_bytes(path)?;
    let value: serde_json::Value = serde_json::from_slice(&text)
        .map_err(|e| usage(format!("{}: invalid JSON: {e}", path.display())))?;
    let block = match value.get("camera") {
        Some(c) => c.clone(),
        None => value,
    };
    let spec: CameraSpec = serde_json::from_value(block)
        .map_err(|e| usage(format!("{}: camera block: {e}", path.display())))?;
    spec.to_camera()
}

pub fn curve(a: CurveArgs) -> Result<u8> {
    if !(a.z_min.is_finite() && a.z_max.is_finite() && a.z_min > 0.0 && a.z_min <= a.z_max) {
        return Err(Error::Domain(format!(
            "depth range must satisfy 0 < z-min <= z-max, got [{}, {}]",
            a.z_min, a.z_max
        )));
    }
    let cams = if a.config_json.is_empty() {
        vec![CameraConfig::tele_80mm(), CameraConfig::tele_60mm()]
    } else {
        a.config_json.iter().map(|p| read_camera_json(p)).collect::<Result<Vec<_>>>()?
    };
    let table: CurveTable = blur_depth_curve(&cams, a.z_min, a.z_max, a.samples, a.spacing)?;
    let mut csv = Vec::new();
    table.write_csv(&mut csv).expect("writing to memory");
    eprintln!("spacing: {}", table.spacing);
    match &a.out {
        Some(p) => {
            write_output(p, &csv)?;
            eprintln!("wrote {} rows to {}", table.z_m.len(), p.display());
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(&csv)
                .and_then(|_| stdout.flush())
                .map_err(|e| Error::Io { path: "<stdout>".into(), source: e })?;
        }
    }
    Ok(0)
}

pub fn batch(a: BatchArgs) -> Result<u8> {
    let text = io::read_bytes(&a.config)?;
    let text = String::from_utf8(text).map_err(|_| usage(format!("{} is not UTF-8", a.config.display())))?;
    let mut cfg = JobConfig::from_json(&text, &a.out_dir)?;
    if let Some(j) = a.jobs {
        cfg.jobs = j;
    }
    cfg.validate()?;
    let (manifest, report) = run_dataset(&a.root, &a.splits, &cfg)?;
    for s in &report.skipped {
        eprintln!("skipped {}: {}", s.frame_id, s.reason);
    }
    for r in manifest.records.iter().filter(|r| r.error.is_some()) {
        eprintln!("failed {}: {}", r.frame_id, r.error.as_deref().unwrap_or(""));
    }
    println!(
        "processed {} items: {} ok, {} failed, {} skipped",
        report.processed,
        report.ok,
        report.failed,
        report.skipped.len()
    );
    println!("manifest: {}", cfg.output_dir.join(MANIFEST_FILE).display());
    println!("run report: {}", cfg.output_dir.join(RUN_FILE).display());
    Ok(if report.failed > 0 { 4 } else { 0 })
}

// nearest-rank percentile of sorted values
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

fn log_histogram(sorted: &[f64], bins: usize) -> Vec<(f64, f64, usize)> {
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
    if lo == hi {
        return vec![(lo, hi, sorted.len())];
    }
    let (llo, lhi) = (lo.ln(), hi.ln());
    let edges: Vec<f64> = (0..=bins)
        .map(|i| match i {
            0 => lo,
            i if i == bins => hi,
            i => (llo + (lhi - llo) * i as f64 / bins as f64).exp(),
        })
        .collect();
    let mut counts = vec![0usize; bins];
    for &z in sorted {
        let b = edges[1..bins].partition_point(|&e| e <= z);
        counts[b] += 1;
    }
    (0..bins).map(|i| (edges[i], edges[i + 1], counts[i])).collect()
}

pub fn inspect(a: InspectArgs) -> Result<u8> {
    if a.bins == 0 {
        return Err(usage("--bins must be at least 1"));
    }
    let rig = rig_input(&a.rig)?;
    let disp = decode_disparity(&io::read_disparity_raster(&a.disparity)?, disparity_encoding(&a.disparity))?;
    let rig = resolve_rig(rig)?;
    let total = disp.valid.len();
    let valid = disp.valid_count();
    let disparities: Vec<f64> = disp
        .disparity
        .iter()
        .zip(&disp.valid)
        .filter_map(|(&d, &ok)| ok.then_some(d))
        .collect();
    let (dmin, dmax) = disparities
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &d| (lo.min(d), hi.max(d)));

    const PERCENTILES: [f64; 7] = [1.0, 5.0, 25.0, 50.0, 75.0, 95.0, 99.0];
    let depth_stats = match rig {
        Some(rig) if valid > 0 => {
            let z = triangulate(&disp, &rig, &DepthClip::default())?;
            let mut sorted: Vec<f64> = z.valid_depths().collect();
            sorted.sort_by(f64::total_cmp);
            let pct: Vec<(f64, f64)> = PERCENTILES.iter().map(|&p| (p, percentile(&sorted, p))).collect();
            Some((pct, log_histogram(&sorted, a.bins)))
        }
        _ => None,
    };

    if a.json {
        let mut report = json!({
            "path": a.disparity.display().to_string(),
            "width": disp.width,
            "height": disp.height,
            "valid_pixels": valid,
            "total_pixels": total,
            "valid_fraction": disp.valid_fraction(),
        });
        if valid > 0 {
            report["disparity_px"] = json!({"min": dmin, "max": dmax});
        }
        if let Some((pct, hist)) = &depth_stats {
            report["depth_m_percentiles"] = pct
                .iter()
                .map(|(p, v)| (format!("p{p}"), json!(v)))
                .collect::<serde_json::Map<_, _>>()
                .into();
            report["depth_m_histogram"] = hist
                .iter()
                .map(|(lo, hi, n)| json!({"lo": lo, "hi": hi, "count": n}))
                .collect::<Vec<_>>()
                .into();
        }
        println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    } else {
        println!("size: {}x{}", disp.width, disp.height);
        println!("valid: {:.2}% ({valid} of {total} pixels)", 100.0 * disp.valid_fraction());
        if valid > 0 {
            println!("disparity_px: min {dmin} max {dmax}");
        }
        if let Some((pct, hist)) = &depth_stats {
            let line: Vec<String> = pct.iter().map(|(p, v)| format!("p{p}={v:.3}")).collect();
            println!("depth_m percentiles: {}", line.join(" "));
            println!("depth_m histogram (log bins):");
            for (lo, hi, n) in hist {
                println!("  {lo:>10.3} .. {hi:>10.3}  {n}");
            }
        }
    }
    if valid == 0 {
        return Err(data(format!("{} has no valid disparity pixels", a.disparity.display())));
    }
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_rank_percentiles() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(percentile(&v, 1.0), 1.0);
        assert_eq!(percentile(&v, 50.0), 50.0);
        assert_eq!(percentile(&v, 99.0), 99.0);
        assert_eq!(percentile(&[7.0], 5.0), 7.0);
    }

    #[test]
    fn histogram_counts_everything() {
        let v: Vec<f64> = (0..1000).map(|i| 1.0 + f64::from(i)).collect();
        let h = log_histogram(&v, 7);
        assert_eq!(h.len(), 7);
        assert_eq!(h.iter().map(|b| b.2).sum::<usize>(), 1000);
        assert_eq!(h[0].0, 1.0);
        assert_eq!(h[6].1, 1000.0);
        assert_eq!(log_histogram(&[3.0, 3.0], 4), vec![(3.0, 3.0, 2)]);
    }
}
