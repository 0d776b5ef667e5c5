//! Layered defocus rendering.
//!
//! The depth map is sliced into layers ([`layers`]); each layer's masked
//! color and its coverage mask are blurred with the layer's disk PSF
//! ([`kernel`], [`convolve`]) and composited far to near with the blurred
//! coverage as alpha. The accumulated color is divided by the accumulated
//! coverage, which removes the dark fringes that appear where a blurred
//! foreground uncovers background that was never rendered.
//!
//! Blur operates on the stored (gamma-encoded) values with clamp-to-edge
//! boundaries.

pub mod convolve;
pub mod kernel;
pub mod layers;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::depth::{DepthClip, DepthMap};
use crate::error::{Error, Result};
use crate::image::ImageBuffer;
use crate::optics::CameraConfig;
use crate::transform::{to_grayscale, GrayscaleWeights};

pub use convolve::{blur_planes, convolve_direct, Backend, Rect};
pub use kernel::{disk_kernel, DiskKernel};
pub use layers::{quantize_layers, quantize_layers_with_clip, Layer, LayerStack};

pub const DEFAULT_LAYERS: usize = 32;
pub const DEFAULT_TAU_MASK: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderOptions {
    pub k: usize,
    /// Coverage below which a layer contributes nothing at a pixel.
    pub tau_mask: f64,
    pub clip: DepthClip,
    pub backend: Backend,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions {
            k: DEFAULT_LAYERS,
            tau_mask: DEFAULT_TAU_MASK,
            clip: DepthClip::default(),
            backend: Backend::Auto,
        }
    }
}

impl RenderOptions {
    pub fn with_k(k: usize) -> Self {
        RenderOptions {
            k,
            ..Default::default()
        }
    }
}

/// Renders defocus with default options and `k` layers.
pub fn render_defocus(
    img: &ImageBuffer,
    depth: &DepthMap,
    cam: &CameraConfig,
    k: usize,
) -> Result<ImageBuffer> {
    render_defocus_with(img, depth, cam, &RenderOptions::with_k(k))
}

pub fn render_defocus_with(
    img: &ImageBuffer,
    depth: &DepthMap,
    cam: &CameraConfig,
    opts: &RenderOptions,
) -> Result<ImageBuffer> {
    if img.width() != depth.width || img.height() != depth.height {
        return Err(Error::usage(format!(
            "image is {}x{} but depth map is {}x{}",
            img.width(),
            img.height(),
            depth.width,
            depth.height
        )));
    }
    if !(opts.tau_mask >= 0.0 && opts.tau_mask < 1.0) {
        return Err(Error::domain(format!("tau_mask must lie in [0, 1), got {}", opts.tau_mask)));
    }
    let stack = quantize_layers_with_clip(depth, cam, opts.k, &opts.clip)?;
    composite(img, &stack, opts)
}

/// Blurs and composites a prepared layer stack over `img`.
pub fn composite(img: &ImageBuffer, stack: &LayerStack, opts: &RenderOptions) -> Result<ImageBuffer> {
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    if stack.width != w || stack.height != h {
        return Err(Error::usage("layer stack and image dimensions differ"));
    }
    let planes: Vec<Vec<f64>> = (0..ch)
        .map(|c| img.plane(c).into_iter().map(f64::from).collect())
        .collect();

    let mut acc_color = vec![vec![0.0f64; w * h]; ch];
    let mut acc_alpha = vec![0.0f64; w * h];
    let tau = opts.tau_mask;

    for (li, layer) in stack.layers.iter().enumerate() {
        let kernel = disk_kernel(layer.coc_px)?;
        let region = layer.bbox.grow(kernel.radius(), w, h);

        // masked color planes then the mask itself
        let owned = |i: usize| stack.assignment()[i] as usize == li;
        let mut inputs: Vec<Vec<f64>> = planes
            .iter()
            .map(|p| {
                p.iter()
                    .enumerate()
                    .map(|(i, &v)| if owned(i) { v } else { 0.0 })
                    .collect()
            })
            .collect();
        inputs.push((0..w * h).map(|i| if owned(i) { 1.0 } else { 0.0 }).collect());
        let refs: Vec<&[f64]> = inputs.iter().map(Vec::as_slice).collect();
        let blurred = blur_planes(&refs, w, h, region, &kernel, opts.backend);
        let (colors, alpha) = blurred.split_at(ch);
        let alpha = &alpha[0];

        let rw = region.width();
        // Row-parallel over the region; each pixel's update is independent.
        let mut rows: Vec<(&mut [f64], Vec<&mut [f64]>)> = Vec::new();
        {
            let alpha_rows = acc_alpha.chunks_mut(w).skip(region.y0).take(region.height());
            let mut color_rows: Vec<_> = acc_color
                .iter_mut()
                .map(|p| p.chunks_mut(w).skip(region.y0).take(region.height()))
                .collect();
            for a in alpha_rows {
                let cs: Vec<&mut [f64]> = color_rows.iter_mut().map(|it| it.next().unwrap()).collect();
                rows.push((a, cs));
            }
        }
        rows.into_par_iter().enumerate().for_each(|(ry, (arow, mut crows))| {
            for rx in 0..rw {
                let a = alpha[ry * rw + rx].clamp(0.0, 1.0);
                if a <= tau {
                    continue;
                }
                let x = region.x0 + rx;
                let keep = 1.0 - a;
                for (c, crow) in crows.iter_mut().enumerate() {
                    crow[x] = colors[c][ry * rw + rx] + keep * crow[x];
                }
                arow[x] = a + keep * arow[x];
            }
        });
    }

    let mut out = vec![0.0f32; w * h * ch];
    out.par_chunks_mut(w * ch).enumerate().for_each(|(y, row)| {
        for x in 0..w {
            let i = y * w + x;
            let a = acc_alpha[i];
            for c in 0..ch {
                row[x * ch + c] = if a > tau {
                    (acc_color[c][i] / a) as f32
                } else {
                    planes[c][i] as f32
                };
            }
        }
    });
    Ok(ImageBuffer::from_clamped(w, h, ch, out))
}

/// Dataset variant: original color, grayscale, defocus, or both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    C,
    G,
    B,
    BG,
}

impl Variant {
    pub fn needs_depth(self) -> bool {
        matches!(self, Variant::B | Variant::BG)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::C => "C",
            Variant::G => "G",
            Variant::B => "B",
            Variant::BG => "BG",
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "C" => Ok(Variant::C),
            "G" => Ok(Variant::G),
            "B" => Ok(Variant::B),
            "BG" | "GB" => Ok(Variant::BG),
            other => Err(Error::usage(format!("unknown variant '{other}' (expected C|G|B|BG)"))),
        }
    }
}

pub fn apply_variant(
    img: &ImageBuffer,
    depth: Option<&DepthMap>,
    cam: &CameraConfig,
    variant: Variant,
    k: usize,
) -> Result<ImageBuffer> {
    apply_variant_with(
        img,
        depth,
        cam,
        variant,
        &RenderOptions::with_k(k),
        &GrayscaleWeights::default(),
    )
}

pub fn apply_variant_with(
    img: &ImageBuffer,
    depth: Option<&DepthMap>,
    cam: &CameraConfig,
    variant: Variant,
    opts: &RenderOptions,
    weights: &GrayscaleWeights,
) -> Result<ImageBuffer> {
    let blurred = |img: &ImageBuffer| -> Result<ImageBuffer> {
        let depth = depth.ok_or_else(|| {
            Error::usage(format!("variant {variant} needs a depth or disparity map"))
        })?;
        render_defocus_with(img, depth, cam, opts)
    };
    match variant {
        Variant::C => Ok(img.clone()),
        Variant::G => to_grayscale(img, weights),
        Variant::B => blurred(img),
        Variant::BG => to_grayscale(&blurred(img)?, weights),
    }
}
