//! Dataset-scale orchestration.
//!
//! Per item: decode → triangulate → fill → variant → quantize → atomic
//! write. Items are processed in parallel but the manifest always follows
//! input order, and no stage draws random numbers, so a given input tree
//! and config always produce the same bytes.

pub mod config;
pub mod io;
pub mod scan;

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::depth::{decode_disparity, fill_invalid, triangulate, DisparityEncoding, RawRaster, StereoRig};
use crate::error::{Error, Result};
use crate::render::{apply_variant_with, RenderOptions};
use crate::transform::{dequantize_8bit, quantize_8bit};

pub use config::{CameraSpec, JobConfig, JobConfigFile, RigSource};
pub use scan::{plan_items, scan_dataset, DatasetItem, SkippedItem, Split};

pub const TOOL_NAME: &str = "privcam";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const RUN_FILE: &str = "run.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub elapsed_ms: f64,
    pub megapixels_per_s: f64,
}

/// One manifest line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub frame_id: String,
    pub split: Split,
    pub city: String,
    pub status: Status,
    pub variant: String,
    pub k: usize,
    pub camera: CameraSpec,
    pub input_sha256: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disparity_sha256: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub camera_sha256: Option<String>,
    pub output_path: Option<String>,
    pub output_sha256: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valid_disparity_fraction: Option<f64>,
    pub clamped_values: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub timing: Option<Timing>,
}

impl ManifestRecord {
    fn new(item: &DatasetItem, cfg: &JobConfig) -> Self {
        ManifestRecord {
            frame_id: item.frame_id.clone(),
            split: item.split,
            city: item.city.clone(),
            status: Status::Error,
            variant: cfg.variant.to_string(),
            k: cfg.k,
            camera: CameraSpec::from_camera(&cfg.camera),
            input_sha256: None,
            disparity_sha256: None,
            camera_sha256: None,
            output_path: None,
            output_sha256: None,
            valid_disparity_fraction: None,
            clamped_values: 0,
            error: None,
            timing: None,
        }
    }

    /// Copy with timing removed, for reproducibility comparisons.
    pub fn without_timing(&self) -> Self {
        ManifestRecord {
            timing: None,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config: JobConfigFile,
    pub records: Vec<ManifestRecord>,
}

impl Manifest {
    pub fn failed(&self) -> usize {
        self.records.iter().filter(|r| r.status == Status::Error).count()
    }

    pub fn succeeded(&self) -> usize {
        self.records.len() - self.failed()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn read_jsonl(text: &str) -> Result<Vec<ManifestRecord>> {
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(|e| Error::data(format!("manifest line: {e}"))))
            .collect()
    }
}

/// Run-level summary written next to the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub tool: String,
    pub version: String,
    pub config: JobConfigFile,
    pub processed: usize,
    pub ok: usize,
    pub failed: usize,
    pub skipped: Vec<SkippedItem>,
}

/// Where an item's output lands: the image tree is mirrored under
/// `<output_dir>/leftImg8bit_<variant>/`.
pub fn output_path_for(item: &DatasetItem, cfg: &JobConfig) -> PathBuf {
    cfg.output_dir
        .join(format!("{}_{}", scan::IMAGE_DIR, cfg.variant))
        .join(item.split.as_str())
        .join(&item.city)
        .join(item.file_name())
}

fn disparity_encoding_for(path: &Path) -> DisparityEncoding {
    match io::extension(path).as_str() {
        "tif" | "tiff" => DisparityEncoding::PlainFloat,
        _ => DisparityEncoding::Cityscapes16,
    }
}

fn relative(path: &Path, base: &Path) -> String {
    path.strip_prefix(base)
        .unwrap_or(path)
        .components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

/// Processes one item, writing its output image. Failures are reported in
/// the returned record rather than as `Err`.
pub fn process_item(item: &DatasetItem, cfg: &JobConfig) -> (Option<PathBuf>, ManifestRecord) {
    let start = Instant::now();
    let mut record = ManifestRecord::new(item, cfg);
    match process_inner(item, cfg, &mut record) {
        Ok((path, pixels)) => {
            let secs = start.elapsed().as_secs_f64();
            record.status = Status::Ok;
            record.timing = Some(Timing {
                elapsed_ms: secs * 1e3,
                megapixels_per_s: if secs > 0.0 { pixels as f64 / 1e6 / secs } else { 0.0 },
            });
            (Some(path), record)
        }
        Err(e) => {
            record.status = Status::Error;
            record.error = Some(e.to_string());
            record.timing = Some(Timing {
                elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
                megapixels_per_s: 0.0,
            });
            (None, record)
        }
    }
}

fn process_inner(item: &DatasetItem, cfg: &JobConfig, record: &mut ManifestRecord) -> Result<(PathBuf, usize)> {
    let image_bytes = io::read_bytes(&item.image_path)?;
    record.input_sha256 = Some(io::sha256_hex(&image_bytes));
    let img = dequantize_8bit(&io::decode_rgb8(&image_bytes)?)?;

    let depth = if cfg.variant.needs_depth() {
        let disp_path = item
            .disparity_path
            .as_deref()
            .ok_or_else(|| Error::usage(format!("variant {} needs a disparity map", cfg.variant)))?;
        let disp_bytes = io::read_bytes(disp_path)?;
        record.disparity_sha256 = Some(io::sha256_hex(&disp_bytes));
        let raw: RawRaster = match disparity_encoding_for(disp_path) {
            DisparityEncoding::PlainFloat => io::decode_tiff_f32(&disp_bytes)?,
            DisparityEncoding::Cityscapes16 => io::decode_png16(&disp_bytes)?,
        };
        let disp = decode_disparity(&raw, disparity_encoding_for(disp_path))?;
        record.valid_disparity_fraction = Some(disp.valid_fraction());
        let rig = match cfg.rig_source {
            RigSource::Fixed(rig) => rig,
            RigSource::Sidecar => {
                let cam_path = item.camera_path.as_deref().ok_or_else(|| {
                    Error::usage(format!("variant {} needs a camera sidecar", cfg.variant))
                })?;
                let text = io::read_bytes(cam_path)?;
                record.camera_sha256 = Some(io::sha256_hex(&text));
                let text = String::from_utf8(text)
                    .map_err(|_| Error::data(format!("{} is not UTF-8", cam_path.display())))?;
                StereoRig::from_sidecar_json(&text)?
            }
        };
        if (disp.width, disp.height) != (img.width(), img.height()) {
            return Err(Error::data(format!(
                "disparity is {}x{} but image is {}x{}",
                disp.width,
                disp.height,
                img.width(),
                img.height()
            )));
        }
        let z = triangulate(&disp, &rig, &cfg.clip)?;
        Some(fill_invalid(&z, cfg.fill_policy)?)
    } else {
        None
    };

    let opts = RenderOptions {
        k: cfg.k,
        clip: cfg.clip,
        ..RenderOptions::default()
    };
    let out = apply_variant_with(&img, depth.as_ref(), &cfg.camera, cfg.variant, &opts, &cfg.weights)?;
    let q = quantize_8bit(&out);
    record.clamped_values = q.clamped;
    let bytes = io::encode_png(&q.raster)?;
    record.output_sha256 = Some(io::sha256_hex(&bytes));
    let path = output_path_for(item, cfg);
    io::write_atomic(&path, &bytes)?;
    record.output_path = Some(relative(&path, &cfg.output_dir));
    Ok((path, img.width() * img.height()))
}

fn ensure_writable(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    tempfile::Builder::new()
        .prefix(".privcam-probe")
        .tempfile_in(dir)
        .map(drop)
        .map_err(|e| Error::io(dir, e))
}

/// Processes `items` on `cfg.jobs` workers and writes the manifest.
///
/// Fails before touching any item if the output directory is not writable.
/// Per-item failures become error records; check [`Manifest::failed`].
pub fn run_batch(items: &[DatasetItem], cfg: &JobConfig) -> Result<Manifest> {
    cfg.validate()?;
    if items.is_empty() {
        return Err(Error::data("no items to process"));
    }
    ensure_writable(&cfg.output_dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Error::usage(format!("cannot start {} workers: {e}", cfg.jobs)))?;
    let records: Vec<ManifestRecord> = pool.install(|| {
        items
            .par_iter()
            .with_max_len(1)
            .map(|item| process_item(item, cfg).1)
            .collect()
    });
    let manifest = Manifest {
        tool: TOOL_NAME.to_string(),
        version: TOOL_VERSION.to_string(),
        config: cfg.to_file(),
        records,
    };
    io::write_atomic(&cfg.output_dir.join(MANIFEST_FILE), manifest.to_jsonl().as_bytes())?;
    Ok(manifest)
}

/// Scan, plan and run a whole dataset tree, writing `manifest.jsonl` and
/// `run.json` into the output directory.
pub fn run_dataset(root: &Path, splits: &[Split], cfg: &JobConfig) -> Result<(Manifest, RunReport)> {
    cfg.validate()?;
    ensure_writable(&cfg.output_dir)?;
    let items = scan_dataset(root, splits)?;
    let (ready, skipped) = plan_items(items, cfg);
    let manifest = if ready.is_empty() {
        let m = Manifest {
            tool: TOOL_NAME.to_string(),
            version: TOOL_VERSION.to_string(),
            config: cfg.to_file(),
            records: Vec::new(),
        };
        io::write_atomic(&cfg.output_dir.join(MANIFEST_FILE), b"")?;
        m
    } else {
        run_batch(&ready, cfg)?
    };
    let report = RunReport {
        tool: TOOL_NAME.to_string(),
        version: TOOL_VERSION.to_string(),
        config: cfg.to_file(),
        processed: manifest.records.len(),
        ok: manifest.succeeded(),
        failed: manifest.failed(),
        skipped,
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    io::write_atomic(&cfg.output_dir.join(RUN_FILE), json.as_bytes())?;
    Ok((manifest, report))
}
