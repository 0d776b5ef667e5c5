//! Depth slicing for layered defocus.
//!
//! Slices are uniform in *signed* CoC, `s(z) = sign(z - z_fp) * eps(z)`,
//! which is strictly increasing in depth. Uniform slicing there bounds the
//! blur spread inside each slice by `(s_max - s_min) / k`.

use crate::depth::{DepthClip, DepthMap};
use crate::error::{Error, Result};
use crate::optics::{coc_unchecked, CameraConfig};

use super::convolve::Rect;

/// One depth slice.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// Blur diameter applied to the whole slice, pixels.
    pub coc_px: f64,
    /// Depth interval `(z_lo, z_hi]` in meters.
    pub depth_range: (f64, f64),
    /// Bounding box of the covered pixels.
    pub bbox: Rect,
    pub pixel_count: usize,
}

/// Ordered far → near. Coverage is binary: every pixel belongs to exactly
/// one layer, recorded in `assignment`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerStack {
    pub width: usize,
    pub height: usize,
    pub layers: Vec<Layer>,
    assignment: Vec<u32>,
}

impl LayerStack {
    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    /// Index into `layers` owning pixel `(x, y)`.
    pub fn layer_of(&self, x: usize, y: usize) -> usize {
        self.assignment[y * self.width + x] as usize
    }

    pub fn assignment(&self) -> &[u32] {
        &self.assignment
    }

    /// Coverage of layer `i` at pixel `(x, y)`, 0 or 1.
    pub fn coverage(&self, i: usize, x: usize, y: usize) -> f32 {
        if self.layer_of(x, y) == i {
            1.0
        } else {
            0.0
        }
    }

    /// Full-size coverage mask of layer `i`.
    pub fn mask(&self, i: usize) -> Vec<f32> {
        self.assignment
            .iter()
            .map(|&a| if a as usize == i { 1.0 } else { 0.0 })
            .collect()
    }
}

#[derive(Debug, Clone)]
struct Bin {
    s_lo: f64,
    s_hi: f64,
    z_lo: f64,
    z_hi: f64,
    count: usize,
    bbox: Rect,
}

/// Slices a fully valid depth map into at most `k` layers with the default
/// depth clip range.
pub fn quantize_layers(depth: &DepthMap, cam: &CameraConfig, k: usize) -> Result<LayerStack> {
    quantize_layers_with_clip(depth, cam, k, &DepthClip::default())
}

pub fn quantize_layers_with_clip(
    depth: &DepthMap,
    cam: &CameraConfig,
    k: usize,
    clip: &DepthClip,
) -> Result<LayerStack> {
    if k == 0 {
        return Err(Error::usage("layer count k must be at least 1"));
    }
    if k > u32::MAX as usize {
        return Err(Error::usage(format!("layer count {k} is too large")));
    }
    cam.validate()?;
    clip.validate()?;
    if !depth.is_fully_valid() {
        return Err(Error::usage(
            "depth map has invalid pixels; fill them before slicing into layers",
        ));
    }
    let (w, h) = (depth.width, depth.height);
    let signed: Vec<f64> = depth.depth.iter().map(|&z| cam.signed_coc_px(z)).collect();
    let s_min = signed.iter().copied().fold(f64::INFINITY, f64::min);
    let s_max = signed.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let step = (s_max - s_min) / k as f64;

    let bin_of = |s: f64| -> usize {
        if step <= 0.0 {
            return 0;
        }
        // bins are (b_i, b_{i+1}], the lowest one closed at s_min
        let t = ((s - s_min) / step).ceil() as isize - 1;
        t.clamp(0, k as isize - 1) as usize
    };

    let mut bins: Vec<Option<Bin>> = vec![None; k];
    let mut raw_assign = vec![0u32; w * h];
    for (i, (&s, &z)) in signed.iter().zip(&depth.depth).enumerate() {
        let b = bin_of(s);
        raw_assign[i] = b as u32;
        let (x, y) = (i % w, i / w);
        let bin = bins[b].get_or_insert(Bin {
            s_lo: s,
            s_hi: s,
            z_lo: z,
            z_hi: z,
            count: 0,
            bbox: Rect { x0: x, y0: y, x1: x + 1, y1: y + 1 },
        });
        bin.s_lo = bin.s_lo.min(s);
        bin.s_hi = bin.s_hi.max(s);
        bin.z_lo = bin.z_lo.min(z);
        bin.z_hi = bin.z_hi.max(z);
        bin.count += 1;
        bin.bbox.x0 = bin.bbox.x0.min(x);
        bin.bbox.y0 = bin.bbox.y0.min(y);
        bin.bbox.x1 = bin.bbox.x1.max(x + 1);
        bin.bbox.y1 = bin.bbox.y1.max(y + 1);
    }

    // Occupied bins, near → far.
    let occupied: Vec<(usize, Bin)> = bins
        .into_iter()
        .enumerate()
        .filter_map(|(i, b)| b.map(|b| (i, b)))
        .collect();
    // clipped depths sit exactly on the near bound, which the half-open
    // range (lo, hi] would exclude
    let outer_lo = if occupied[0].1.z_lo > clip.near_m { clip.near_m } else { 0.0 };
    let outer_hi = clip.far_m.max(occupied[occupied.len() - 1].1.z_hi);

    let mut near_to_far = Vec::with_capacity(occupied.len());
    let mut lower = outer_lo;
    for (n, (i, bin)) in occupied.iter().enumerate() {
        let upper = if n + 1 == occupied.len() {
            outer_hi
        } else {
            // upper edge of bin i in signed-CoC space, mapped back to depth,
            // kept inside the occupied gap so the ranges stay ordered
            let edge = cam.depth_for_signed_coc(s_min + (*i as f64 + 1.0) * step);
            let next_lo = occupied[n + 1].1.z_lo;
            if edge < next_lo {
                edge.max(bin.z_hi)
            } else {
                let mid = bin.z_hi + 0.5 * (next_lo - bin.z_hi);
                if mid < next_lo { mid } else { bin.z_hi }
            }
        };
        let coc_px = if bin.z_lo == bin.z_hi {
            coc_unchecked(bin.z_lo, cam)
        } else {
            (0.5 * (bin.s_lo + bin.s_hi)).abs()
        };
        near_to_far.push(Layer {
            coc_px,
            depth_range: (lower, upper),
            bbox: bin.bbox,
            pixel_count: bin.count,
        });
        lower = upper;
    }

    // Reindex far → near.
    let m = occupied.len();
    let mut remap = vec![0u32; k];
    for (n, (i, _)) in occupied.iter().enumerate() {
        remap[*i] = (m - 1 - n) as u32;
    }
    let assignment = raw_assign.into_iter().map(|b| remap[b as usize]).collect();
    near_to_far.reverse();
    Ok(LayerStack {
        width: w,
        height: h,
        layers: near_to_far,
        assignment,
    })
}
