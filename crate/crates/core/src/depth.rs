//! Disparity decoding, stereo triangulation and invalid-pixel filling.

use std::collections::VecDeque;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Raw single-channel disparity raster as read from disk.
#[derive(Debug, Clone, PartialEq)]
pub enum RawRaster {
    U16 {
        width: usize,
        height: usize,
        data: Vec<u16>,
    },
    F32 {
        width: usize,
        height: usize,
        data: Vec<f32>,
    },
}

impl RawRaster {
    pub fn dimensions(&self) -> (usize, usize) {
        match self {
            RawRaster::U16 { width, height, .. } | RawRaster::F32 { width, height, .. } => {
                (*width, *height)
            }
        }
    }

    fn len(&self) -> usize {
        match self {
            RawRaster::U16 { data, .. } => data.len(),
            RawRaster::F32 { data, .. } => data.len(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisparityEncoding {
    /// 16-bit PNG: `d = (raw - 1) / 256`, raw 0 marks a missing value.
    Cityscapes16,
    /// Values are disparities in pixels; non-positive values are missing.
    PlainFloat,
}

impl std::str::FromStr for DisparityEncoding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cityscapes16" => Ok(DisparityEncoding::Cityscapes16),
            "plain_float" => Ok(DisparityEncoding::PlainFloat),
            other => Err(Error::usage(format!(
                "unknown disparity encoding '{other}' (expected cityscapes16|plain_float)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DisparityMap {
    pub width: usize,
    pub height: usize,
    pub disparity: Vec<f64>,
    pub valid: Vec<bool>,
}

impl DisparityMap {
    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    pub fn valid_fraction(&self) -> f64 {
        if self.valid.is_empty() {
            0.0
        } else {
            self.valid_count() as f64 / self.valid.len() as f64
        }
    }
}

pub fn decode_disparity(raw: &RawRaster, encoding: DisparityEncoding) -> Result<DisparityMap> {
    let (width, height) = raw.dimensions();
    if width == 0 || height == 0 || raw.len() != width * height {
        return Err(Error::data(format!(
            "disparity raster is empty or malformed ({width}x{height}, {} values)",
            raw.len()
        )));
    }
    let values: Vec<f64> = match (raw, encoding) {
        (RawRaster::U16 { data, .. }, DisparityEncoding::Cityscapes16) => data
            .iter()
            .map(|&r| if r == 0 { 0.0 } else { (f64::from(r) - 1.0) / 256.0 })
            .collect(),
        (RawRaster::F32 { .. }, DisparityEncoding::Cityscapes16) => {
            return Err(Error::usage("cityscapes16 encoding requires a 16-bit raster"));
        }
        (RawRaster::U16 { data, .. }, DisparityEncoding::PlainFloat) => {
            data.iter().map(|&r| f64::from(r)).collect()
        }
        (RawRaster::F32 { data, .. }, DisparityEncoding::PlainFloat) => {
            data.iter().map(|&r| f64::from(r)).collect()
        }
    };
    let valid: Vec<bool> = match (raw, encoding) {
        // raw 1 decodes to d = 0, which cannot be triangulated either
        (RawRaster::U16 { data, .. }, DisparityEncoding::Cityscapes16) => {
            data.iter().map(|&r| r > 1).collect()
        }
        _ => values.iter().map(|&d| d.is_finite() && d > 0.0).collect(),
    };
    let disparity = values
        .into_iter()
        .zip(&valid)
        .map(|(d, &ok)| if ok { d } else { 0.0 })
        .collect();
    Ok(DisparityMap {
        width,
        height,
        disparity,
        valid,
    })
}

/// Stereo pair geometry: focal length in pixels and baseline in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StereoRig {
    pub focal_length_px: f64,
    pub baseline_m: f64,
}

impl StereoRig {
    pub fn new(focal_length_px: f64, baseline_m: f64) -> Result<Self> {
        let rig = StereoRig {
            focal_length_px,
            baseline_m,
        };
        rig.validate()?;
        Ok(rig)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.focal_length_px.is_finite() && self.focal_length_px > 0.0) {
            return Err(Error::domain(format!(
                "stereo focal length must be positive, got {} px",
                self.focal_length_px
            )));
        }
        if !(self.baseline_m.is_finite() && self.baseline_m > 0.0) {
            return Err(Error::domain(format!(
                "stereo baseline must be positive, got {} m",
                self.baseline_m
            )));
        }
        Ok(())
    }

    /// Reads a per-frame camera sidecar (`intrinsic.fx`, `extrinsic.baseline`).
    pub fn from_sidecar_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Intrinsic {
            fx: f64,
        }
        #[derive(Deserialize)]
        struct Extrinsic {
            baseline: f64,
        }
        #[derive(Deserialize)]
        struct Sidecar {
            intrinsic: Intrinsic,
            extrinsic: Extrinsic,
        }
        let parsed: Sidecar = serde_json::from_str(text)
            .map_err(|e| Error::data(format!("camera sidecar: {e}")))?;
        StereoRig::new(parsed.intrinsic.fx, parsed.extrinsic.baseline)
            .map_err(|e| Error::data(format!("camera sidecar: {e}")))
    }

    pub fn from_sidecar_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_sidecar_json(&text)
    }
}

/// Bounds applied to triangulated depth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthClip {
    pub near_m: f64,
    pub far_m: f64,
}

impl Default for DepthClip {
    fn default() -> Self {
        DepthClip {
            near_m: 0.5,
            far_m: 20_000.0,
        }
    }
}

impl DepthClip {
    pub fn validate(&self) -> Result<()> {
        if !(self.near_m > 0.0 && self.near_m < self.far_m && self.far_m.is_finite()) {
            return Err(Error::domain(format!(
                "depth clip range must satisfy 0 < near < far < inf, got ({}, {})",
                self.near_m, self.far_m
            )));
        }
        Ok(())
    }
}

/// Metric depth with an explicit validity mask. Invalid pixels hold 0.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    pub width: usize,
    pub height: usize,
    pub depth: Vec<f64>,
    pub valid: Vec<bool>,
}

impl DepthMap {
    /// Builds a fully valid map; every value must be positive and finite.
    pub fn from_meters(width: usize, height: usize, depth: Vec<f64>) -> Result<Self> {
        if depth.len() != width * height || depth.is_empty() {
            return Err(Error::usage(format!(
                "depth buffer has {} values for a {width}x{height} map",
                depth.len()
            )));
        }
        let valid: Vec<bool> = depth.iter().map(|z| z.is_finite() && *z > 0.0).collect();
        if valid.iter().any(|v| !v) {
            return Err(Error::domain("depth values must be positive and finite"));
        }
        Ok(DepthMap {
            width,
            height,
            depth,
            valid,
        })
    }

    /// Builds a map where non-positive or non-finite values are invalid.
    pub fn with_missing(width: usize, height: usize, depth: Vec<f64>) -> Result<Self> {
        if depth.len() != width * height || depth.is_empty() {
            return Err(Error::usage(format!(
                "depth buffer has {} values for a {width}x{height} map",
                depth.len()
            )));
        }
        let valid: Vec<bool> = depth.iter().map(|z| z.is_finite() && *z > 0.0).collect();
        let depth = depth
            .into_iter()
            .zip(&valid)
            .map(|(z, &ok)| if ok { z } else { 0.0 })
            .collect();
        Ok(DepthMap {
            width,
            height,
            depth,
            valid,
        })
    }

    pub fn constant(width: usize, height: usize, z: f64) -> Result<Self> {
        Self::from_meters(width, height, vec![z; width * height])
    }

    pub fn is_fully_valid(&self) -> bool {
        self.valid.iter().all(|v| *v)
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    pub fn valid_depths(&self) -> impl Iterator<Item = f64> + '_ {
        self.depth
            .iter()
            .zip(&self.valid)
            .filter_map(|(&z, &ok)| ok.then_some(z))
    }
}

/// `z = f_px * b / d` for every valid pixel, clamped to `clip`.
pub fn triangulate(disp: &DisparityMap, rig: &StereoRig, clip: &DepthClip) -> Result<DepthMap> {
    rig.validate()?;
    clip.validate()?;
    let fb = rig.focal_length_px * rig.baseline_m;
    let depth = disp
        .disparity
        .iter()
        .zip(&disp.valid)
        .map(|(&d, &ok)| {
            if ok {
                (fb / d).clamp(clip.near_m, clip.far_m)
            } else {
                0.0
            }
        })
        .collect();
    Ok(DepthMap {
        width: disp.width,
        height: disp.height,
        depth,
        valid: disp.valid.clone(),
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FillPolicy {
    /// Missing pixels take the nearest (smallest) valid depth in the map,
    /// which lands them in the strongest near-field blur.
    #[default]
    NearestLayerMaxBlur,
    /// Missing pixels copy the spatially closest valid pixel (4-connected
    /// distance, ties resolved in scan order).
    NearestNeighbor,
}

impl std::str::FromStr for FillPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nearest_layer_max_blur" => Ok(FillPolicy::NearestLayerMaxBlur),
            "nearest_neighbor" => Ok(FillPolicy::NearestNeighbor),
            other => Err(Error::usage(format!(
                "unknown fill policy '{other}' (expected nearest_layer_max_blur|nearest_neighbor)"
            ))),
        }
    }
}

pub fn fill_invalid(depth: &DepthMap, policy: FillPolicy) -> Result<DepthMap> {
    if depth.is_fully_valid() {
        return Ok(depth.clone());
    }
    let nearest = depth.valid_depths().fold(f64::INFINITY, f64::min);
    if !nearest.is_finite() {
        return Err(Error::data("depth map has no valid pixels to fill from"));
    }
    let filled = match policy {
        FillPolicy::NearestLayerMaxBlur => depth
            .depth
            .iter()
            .zip(&depth.valid)
            .map(|(&z, &ok)| if ok { z } else { nearest })
            .collect(),
        FillPolicy::NearestNeighbor => nearest_neighbor_fill(depth),
    };
    Ok(DepthMap {
        width: depth.width,
        height: depth.height,
        depth: filled,
        valid: vec![true; depth.depth.len()],
    })
}

// Multi-source BFS from every valid pixel; each invalid pixel inherits the
// source that reaches it first.
fn nearest_neighbor_fill(depth: &DepthMap) -> Vec<f64> {
    let (w, h) = (depth.width, depth.height);
    let mut out = depth.depth.clone();
    let mut seen = depth.valid.clone();
    let mut queue: VecDeque<usize> = (0..w * h).filter(|&i| seen[i]).collect();
    while let Some(i) = queue.pop_front() {
        let (x, y) = (i % w, i / w);
        let z = out[i];
        let mut visit = |j: usize| {
            if !seen[j] {
                seen[j] = true;
                out[j] = z;
                queue.push_back(j);
            }
        };
        if y > 0 {
            visit(i - w);
        }
        if x > 0 {
            visit(i - 1);
        }
        if x + 1 < w {
            visit(i + 1);
        }
        if y + 1 < h {
            visit(i + w);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn u16_raster(width: usize, height: usize, data: Vec<u16>) -> RawRaster {
        RawRaster::U16 {
            width,
            height,
            data,
        }
    }

    #[test]
    fn cityscapes_zero_is_missing() {
        let d = decode_disparity(&u16_raster(2, 1, vec![0, 257]), DisparityEncoding::Cityscapes16)
            .unwrap();
        assert_eq!(d.valid, vec![false, true]);
        assert_eq!(d.disparity, vec![0.0, 1.0]);
    }

    #[test]
    fn cityscapes_raw_one_decodes_to_zero_disparity_and_is_missing() {
        let d = decode_disparity(&u16_raster(1, 1, vec![1]), DisparityEncoding::Cityscapes16)
            .unwrap();
        assert_eq!(d.valid, vec![false]);
    }

    #[test]
    fn plain_float_passthrough() {
        let raw = RawRaster::F32 {
            width: 3,
            height: 1,
            data: vec![32.5, 0.0, -4.0],
        };
        let d = decode_disparity(&raw, DisparityEncoding::PlainFloat).unwrap();
        assert_eq!(d.disparity[0], 32.5);
        assert_eq!(d.valid, vec![true, false, false]);
    }

    #[test]
    fn encoding_tags() {
        assert!(matches!("bogus".parse::<DisparityEncoding>(), Err(Error::Usage(_))));
        assert_eq!(
            "cityscapes16".parse::<DisparityEncoding>().unwrap(),
            DisparityEncoding::Cityscapes16
        );
        let float = RawRaster::F32 {
            width: 1,
            height: 1,
            data: vec![1.0],
        };
        assert!(decode_disparity(&float, DisparityEncoding::Cityscapes16).is_err());
        assert!(decode_disparity(&u16_raster(0, 0, vec![]), DisparityEncoding::Cityscapes16).is_err());
    }

    #[test]
    fn triangulation_arithmetic() {
        let disp = DisparityMap {
            width: 2,
            height: 1,
            disparity: vec![100.0, 0.0],
            valid: vec![true, false],
        };
        let rig = StereoRig::new(1000.0, 0.2).unwrap();
        let z = triangulate(&disp, &rig, &DepthClip::default()).unwrap();
        assert_eq!(z.depth[0], 2.0);
        assert_eq!(z.valid, vec![true, false]);
        assert_eq!(z.depth[1], 0.0);
    }

    #[test]
    fn triangulation_clamps() {
        let disp = DisparityMap {
            width: 2,
            height: 1,
            disparity: vec![1e6, 1e-6],
            valid: vec![true, true],
        };
        let rig = StereoRig::new(2000.0, 0.2).unwrap();
        let z = triangulate(&disp, &rig, &DepthClip::default()).unwrap();
        assert_eq!(z.depth, vec![0.5, 20_000.0]);
    }

    #[test]
    fn sidecar_parsing() {
        let text = r#"{"extrinsic": {"baseline": 0.209313, "pitch": 0.038, "x": 1.7},
                       "intrinsic": {"fx": 2262.52, "fy": 2265.3, "u0": 1096.98, "v0": 513.137}}"#;
        let rig = StereoRig::from_sidecar_json(text).unwrap();
        assert_eq!(rig.focal_length_px, 2262.52);
        assert_eq!(rig.baseline_m, 0.209313);
        assert!(matches!(StereoRig::from_sidecar_json("{}"), Err(Error::Data(_))));
    }

    #[test]
    fn fill_keeps_valid_maps() {
        let m = DepthMap::from_meters(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        for p in [FillPolicy::NearestLayerMaxBlur, FillPolicy::NearestNeighbor] {
            assert_eq!(fill_invalid(&m, p).unwrap(), m);
        }
    }

    #[test]
    fn fill_max_blur_uses_min_depth() {
        let m = DepthMap::with_missing(2, 2, vec![5.0, 0.0, 30.0, 12.0]).unwrap();
        let f = fill_invalid(&m, FillPolicy::NearestLayerMaxBlur).unwrap();
        assert_eq!(f.depth, vec![5.0, 5.0, 30.0, 12.0]);
        assert!(f.is_fully_valid());
    }

    #[test]
    fn fill_requires_some_valid_pixel() {
        let m = DepthMap::with_missing(2, 1, vec![0.0, 0.0]).unwrap();
        assert!(matches!(fill_invalid(&m, FillPolicy::NearestNeighbor), Err(Error::Data(_))));
    }

    // Brute force: every filled pixel must carry the value of some valid
    // source at minimal L1 distance.
    fn check_nearest_neighbor(m: &DepthMap, filled: &DepthMap) {
        let w = m.width;
        for i in 0..m.depth.len() {
            if m.valid[i] {
                assert_eq!(filled.depth[i], m.depth[i]);
                continue;
            }
            let (x, y) = ((i % w) as i64, (i / w) as i64);
            let dist = |j: usize| ((j % w) as i64 - x).abs() + ((j / w) as i64 - y).abs();
            let best = (0..m.depth.len()).filter(|&j| m.valid[j]).map(dist).min().unwrap();
            let ok = (0..m.depth.len())
                .filter(|&j| m.valid[j] && dist(j) == best)
                .any(|j| m.depth[j] == filled.depth[i]);
            assert!(ok, "pixel {i} got {} not a nearest source", filled.depth[i]);
        }
    }

    #[test]
    fn nearest_neighbor_center_hole() {
        let m = DepthMap::with_missing(3, 3, vec![1.0, 2.0, 3.0, 4.0, 0.0, 6.0, 7.0, 8.0, 9.0])
            .unwrap();
        let f = fill_invalid(&m, FillPolicy::NearestNeighbor).unwrap();
        assert!([2.0, 4.0, 6.0, 8.0].contains(&f.depth[4]));
        check_nearest_neighbor(&m, &f);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn nearest_neighbor_is_l1_nearest(
                (w, h, vals) in (1usize..9, 1usize..9).prop_flat_map(|(w, h)| {
                    (Just(w), Just(h), proptest::collection::vec(prop_oneof![Just(0.0), 1.0f64..100.0], w * h))
                })
            ) {
                let m = DepthMap::with_missing(w, h, vals).unwrap();
                prop_assume!(m.valid_count() > 0);
                let f = fill_invalid(&m, FillPolicy::NearestNeighbor).unwrap();
                prop_assert!(f.is_fully_valid());
                check_nearest_neighbor(&m, &f);
            }

            #[test]
            fn plain_float_identity_on_positive(vals in proptest::collection::vec(1e-3f32..1e4, 1..64)) {
                let raw = RawRaster::F32 { width: vals.len(), height: 1, data: vals.clone() };
                let d = decode_disparity(&raw, DisparityEncoding::PlainFloat).unwrap();
                prop_assert!(d.valid.iter().all(|v| *v));
                for (a, b) in d.disparity.iter().zip(&vals) {
                    prop_assert_eq!(*a as f32, *b);
                }
            }

            #[test]
            fn triangulation_round_trip_and_monotone(d1 in 0.5f64..500.0, d2 in 0.5f64..500.0) {
                let rig = StereoRig::new(2262.52, 0.209313).unwrap();
                let clip = DepthClip { near_m: 1e-9, far_m: 1e12 };
                let disp = DisparityMap { width: 2, height: 1, disparity: vec![d1, d2], valid: vec![true, true] };
                let z = triangulate(&disp, &rig, &clip).unwrap();
                for (zi, di) in z.depth.iter().zip([d1, d2]) {
                    let back = rig.focal_length_px * rig.baseline_m / zi;
                    prop_assert!((back - di).abs() / di < 1e-6);
                }
                if d1 < d2 { prop_assert!(z.depth[0] > z.depth[1]); }
                if d1 > d2 { prop_assert!(z.depth[0] < z.depth[1]); }
            }

            #[test]
            fn valid_count_non_increasing(raw in proptest::collection::vec(0u16..2000, 1..100)) {
                let n = raw.len();
                let total = n;
                let d = decode_disparity(&RawRaster::U16 { width: n, height: 1, data: raw }, DisparityEncoding::Cityscapes16).unwrap();
                prop_assert!(d.valid_count() <= total);
                let z = triangulate(&d, &StereoRig::new(2000.0, 0.2).unwrap(), &DepthClip::default()).unwrap();
                prop_assert!(z.valid_count() <= d.valid_count());
                if z.valid_count() > 0 {
                    let f = fill_invalid(&z, FillPolicy::default()).unwrap();
                    prop_assert_eq!(f.valid_count(), total);
                }
            }
        }
    }
}
