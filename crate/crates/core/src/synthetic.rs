//! Procedural street scenes and Cityscapes-layout fixture trees for tests,
//! examples and benchmarks. Fully deterministic (hash-based texture).

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use crate::depth::{DepthMap, StereoRig};
use crate::error::{Error, Result};
use crate::image::ImageBuffer;
use crate::optics::CameraConfig;
use crate::pipeline::{io, run_batch, scan_dataset, JobConfig};
use crate::pipeline::scan::{Split, CAMERA_DIR, DISPARITY_DIR, IMAGE_DIR};
use crate::render::Variant;
use crate::transform::{quantize_8bit, Raster8};

/// Stereo rig close to the one the Cityscapes camera files describe.
pub const FIXTURE_RIG: StereoRig = StereoRig {
    focal_length_px: 2262.52,
    baseline_m: 0.209313,
};

fn hash(x: u32, y: u32, salt: u32) -> u32 {
    let mut h = x.wrapping_mul(0x8da6_b343) ^ y.wrapping_mul(0xd816_3841) ^ salt.wrapping_mul(0xcb1a_b31f);
    h ^= h >> 13;
    h = h.wrapping_mul(0x5bd1_e995);
    h ^ (h >> 15)
}

fn noise(x: usize, y: usize, salt: u32) -> f32 {
    (hash(x as u32, y as u32, salt) & 0xffff) as f32 / 65535.0
}

/// Rectangular object in a scene: pixel box and distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneBox {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
    pub depth_m: f64,
}

/// A rendered street scene: image, metric depth and the boxes of the
/// nearest and farthest textured objects.
#[derive(Debug, Clone)]
pub struct StreetScene {
    pub image: ImageBuffer,
    pub depth: DepthMap,
    pub near_box: SceneBox,
    pub far_box: SceneBox,
}

/// Road scene seen from a car: sky, a row of buildings, a ground plane and
/// two vehicles. `variant` shifts texture and layout.
pub fn street_scene(width: usize, height: usize, variant: u32) -> StreetScene {
    let (w, h) = (width.max(8), height.max(8));
    let horizon = h * 9 / 20;
    let cam_height = 1.3;
    let fx = FIXTURE_RIG.focal_length_px * w as f64 / 2048.0;
    let mut depth = vec![0.0f64; w * h];
    let mut rgb = vec![0.0f32; w * h * 3];

    let shift = (variant as usize * 37) % w.max(1);
    let far_box = SceneBox {
        x0: (w / 2 + shift / 4) % (w - w / 5),
        y0: h / 5,
        x1: (w / 2 + shift / 4) % (w - w / 5) + w / 6,
        y1: horizon,
        depth_m: 350.0,
    };
    let near_box = SceneBox {
        x0: w / 10 + shift / 8,
        y0: horizon - h / 10,
        x1: w / 10 + shift / 8 + w / 4,
        y1: horizon + h * 3 / 10,
        depth_m: 7.0 + f64::from(variant % 3),
    };
    let mid_box = SceneBox {
        x0: w * 6 / 10,
        y0: horizon - h / 20,
        x1: w * 6 / 10 + w / 8,
        y1: horizon + h / 8,
        depth_m: 25.0,
    };

    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let (z, c) = if y < horizon {
                let building = (x / (w / 8).max(1)) as u32;
                let top = h / 8 + (hash(building, variant, 3) as usize % (h / 6).max(1));
                if y >= top {
                    let z = 80.0 + f64::from(hash(building, variant, 4) % 300);
                    let window = (x / 3 + y / 4) % 2 == 0;
                    let base = 0.35 + 0.3 * noise(building as usize, 0, variant);
                    let v = if window { base * 0.6 } else { base };
                    (z, [v, v * 0.95, v * 0.9])
                } else {
                    let t = y as f32 / horizon as f32;
                    (5000.0, [0.45 + 0.2 * t, 0.6 + 0.2 * t, 0.9])
                }
            } else {
                let dy = (y - horizon) as f64 + 0.5;
                let z = (fx * cam_height / dy).min(5000.0);
                let lane = (x as i64 - w as i64 / 2).unsigned_abs() < (w / 100).max(1) as u64
                    && (z as i64 / 3) % 2 == 0;
                let g = 0.3 + 0.15 * noise(x, y, variant + 11);
                if lane {
                    (z, [0.95, 0.95, 0.9])
                } else {
                    (z, [g, g, g * 1.05])
                }
            };
            depth[i] = z;
            rgb[i * 3..i * 3 + 3].copy_from_slice(&c);
        }
    }

    let mut paint = |b: &SceneBox, salt: u32, tint: [f32; 3]| {
        for y in b.y0..b.y1.min(h) {
            for x in b.x0..b.x1.min(w) {
                let i = y * w + x;
                depth[i] = b.depth_m;
                // fine checker plus noise: strong high-frequency content
                let check = if (x / 2 + y / 2) % 2 == 0 { 0.25 } else { 0.0 };
                let n = 0.5 * noise(x, y, salt);
                for c in 0..3 {
                    rgb[i * 3 + c] = (tint[c] * (0.3 + check + n)).clamp(0.0, 1.0);
                }
            }
        }
    };
    paint(&far_box, variant + 21, [0.9, 0.8, 0.7]);
    paint(&mid_box, variant + 22, [0.3, 0.5, 0.9]);
    paint(&near_box, variant + 23, [0.9, 0.2, 0.2]);

    for v in &mut rgb {
        *v = v.clamp(0.0, 1.0);
    }
    StreetScene {
        image: ImageBuffer::new(w, h, 3, rgb).expect("scene values are clamped"),
        depth: DepthMap::from_meters(w, h, depth).expect("scene depths are positive"),
        near_box,
        far_box,
    }
}

/// Encodes depth as Cityscapes 16-bit disparity (`raw = 256 d + 1`), with
/// every `hole_every`-th pixel (in scan order) zeroed as missing.
pub fn encode_cityscapes_disparity(depth: &DepthMap, rig: &StereoRig, hole_every: Option<usize>) -> Vec<u16> {
    depth
        .depth
        .iter()
        .enumerate()
        .map(|(i, &z)| {
            if hole_every.is_some_and(|n| n > 0 && i % n == 0) {
                return 0;
            }
            let d = rig.focal_length_px * rig.baseline_m / z;
            (d * 256.0 + 1.0).round().clamp(2.0, 65535.0) as u16
        })
        .collect()
}

pub fn camera_sidecar_json(rig: &StereoRig) -> String {
    format!(
        "{{\n  \"extrinsic\": {{\"baseline\": {}, \"pitch\": 0.038, \"roll\": 0.0, \"x\": 1.7, \"y\": 0.1, \"yaw\": -0.0195, \"z\": 1.22}},\n  \"intrinsic\": {{\"fx\": {}, \"fy\": {}, \"u0\": 1096.98, \"v0\": 513.137}}\n}}\n",
        rig.baseline_m, rig.focal_length_px, rig.focal_length_px
    )
}

/// One frame of a fixture tree.
#[derive(Debug, Clone)]
pub struct FixtureFrame {
    pub split: Split,
    pub city: String,
    pub frame_id: String,
    pub with_disparity: bool,
    pub with_camera: bool,
}

impl FixtureFrame {
    pub fn new(split: Split, city: &str, index: usize) -> Self {
        FixtureFrame {
            split,
            city: city.to_string(),
            frame_id: format!("{city}_000000_{:06}", 19 + index),
            with_disparity: true,
            with_camera: true,
        }
    }
}

/// Writes a Cityscapes-layout tree with synthetic frames; returns image paths.
pub fn write_fixture_tree(
    root: &Path,
    frames: &[FixtureFrame],
    width: usize,
    height: usize,
    hole_every: Option<usize>,
) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for (n, f) in frames.iter().enumerate() {
        let scene = street_scene(width, height, n as u32);
        let dir = |kind: &str| root.join(kind).join(f.split.as_str()).join(&f.city);
        let img_path = dir(IMAGE_DIR).join(format!("{}_leftImg8bit.png", f.frame_id));
        let raster: Raster8 = quantize_8bit(&scene.image).raster;
        io::write_atomic(&img_path, &io::encode_png(&raster)?)?;
        if f.with_disparity {
            let raw = encode_cityscapes_disparity(&scene.depth, &FIXTURE_RIG, hole_every);
            let bytes = io::encode_png16(scene.depth.width, scene.depth.height, &raw)?;
            io::write_atomic(&dir(DISPARITY_DIR).join(format!("{}_disparity.png", f.frame_id)), &bytes)?;
        }
        if f.with_camera {
            io::write_atomic(
                &dir(CAMERA_DIR).join(format!("{}_camera.json", f.frame_id)),
                camera_sidecar_json(&FIXTURE_RIG).as_bytes(),
            )?;
        }
        paths.push(img_path);
    }
    Ok(paths)
}

/// Wall time of one frame through the batch pipeline at a worker count.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameTiming {
    pub jobs: usize,
    pub wall: Duration,
    pub output_sha256: String,
}

/// Writes one `width`x`height` fixture frame under `work_dir` and runs it
/// through the B variant with `k` layers once per entry of `jobs`.
pub fn time_frame(work_dir: &Path, width: usize, height: usize, k: usize, jobs: &[usize]) -> Result<Vec<FrameTiming>> {
    let root = work_dir.join("fixture");
    write_fixture_tree(&root, &[FixtureFrame::new(Split::Val, "frankfurt", 0)], width, height, Some(1009))?;
    let items = scan_dataset(&root, &[Split::Val])?;
    let mut timings = Vec::new();
    for &j in jobs {
        let mut cfg = JobConfig::new(CameraConfig::tele_80mm(), Variant::B, work_dir.join(format!("out_{j}")));
        cfg.k = k;
        cfg.jobs = j;
        let start = Instant::now();
        let manifest = run_batch(&items, &cfg)?;
        let wall = start.elapsed();
        let record = &manifest.records[0];
        let output_sha256 = record
            .output_sha256
            .clone()
            .ok_or_else(|| Error::data(record.error.clone().unwrap_or_default()))?;
        timings.push(FrameTiming { jobs: j, wall, output_sha256 });
    }
    Ok(timings)
}
