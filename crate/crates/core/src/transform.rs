//! Monochrome-camera simulation and 8-bit value conversions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ImageBuffer;

/// Luma weights for RGB → gray. Non-negative and summing to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrayscaleWeights {
    pub wr: f64,
    pub wg: f64,
    pub wb: f64,
}

impl GrayscaleWeights {
    /// ITU-R BT.601 luma.
    pub const REC601: GrayscaleWeights = GrayscaleWeights {
        wr: 0.299,
        wg: 0.587,
        wb: 0.114,
    };

    pub fn new(wr: f64, wg: f64, wb: f64) -> Result<Self> {
        let w = GrayscaleWeights { wr, wg, wb };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.wr, self.wg, self.wb];
        if all.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::domain(format!("grayscale weights must be non-negative: {all:?}")));
        }
        let sum: f64 = all.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::domain(format!("grayscale weights sum to {sum}, expected 1")));
        }
        Ok(())
    }
}

impl Default for GrayscaleWeights {
    fn default() -> Self {
        Self::REC601
    }
}

/// Weighted luma replicated into three identical channels.
pub fn to_grayscale(img: &ImageBuffer, w: &GrayscaleWeights) -> Result<ImageBuffer> {
    if img.channels() != 3 {
        return Err(Error::usage(format!(
            "grayscale conversion needs an RGB image, got {} channel(s)",
            img.channels()
        )));
    }
    w.validate()?;
    let mut out = Vec::with_capacity(img.data().len());
    for px in img.data().chunks_exact(3) {
        let luma = w.wr * f64::from(px[0]) + w.wg * f64::from(px[1]) + w.wb * f64::from(px[2]);
        let v = (luma as f32).clamp(0.0, 1.0);
        out.extend_from_slice(&[v, v, v]);
    }
    Ok(ImageBuffer::from_clamped(img.width(), img.height(), 3, out))
}

/// 8-bit raster with the same layout as [`ImageBuffer`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster8 {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<u8>,
}

/// Result of [`quantize_8bit`]: the raster plus how many source values had
/// to be clamped into range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Quantized {
    pub raster: Raster8,
    pub clamped: usize,
}

/// `round_half_even(v * 255)`, clamping out-of-range values.
pub fn quantize_8bit(img: &ImageBuffer) -> Quantized {
    let (data, clamped) = quantize_values(img.data());
    Quantized {
        raster: Raster8 {
            width: img.width(),
            height: img.height(),
            channels: img.channels(),
            data,
        },
        clamped,
    }
}

/// Quantizes raw values. NaN counts as clamped and maps to 0.
pub fn quantize_values(values: &[f32]) -> (Vec<u8>, usize) {
    let mut clamped = 0;
    let data = values
        .iter()
        .map(|&v| {
            if !(0.0..=1.0).contains(&v) {
                clamped += 1;
            }
            let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
            (v * 255.0).round_ties_even() as u8
        })
        .collect();
    (data, clamped)
}

pub fn dequantize_8bit(raster: &Raster8) -> Result<ImageBuffer> {
    let data = raster.data.iter().map(|&q| f32::from(q) / 255.0).collect();
    ImageBuffer::new(raster.width, raster.height, raster.channels, data)
}
