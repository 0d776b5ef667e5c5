//! Floating-point raster shared by the renderer and color transforms.

use crate::error::{Error, Result};

/// Interleaved H×W×C raster with values in `[0, 1]`, C ∈ {1, 3}.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

impl ImageBuffer {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::usage(format!("images need 1 or 3 channels, got {channels}")));
        }
        if width == 0 || height == 0 || data.len() != width * height * channels {
            return Err(Error::usage(format!(
                "buffer of {} values does not describe a {width}x{height}x{channels} image",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !(v.is_finite() && (0.0..=1.0).contains(*v))) {
            return Err(Error::domain(format!("pixel value {bad} outside [0, 1]")));
        }
        Ok(ImageBuffer {
            width,
            height,
            channels,
            data,
        })
    }

    /// Every pixel set to `value` (one entry per channel).
    pub fn filled(width: usize, height: usize, value: &[f32]) -> Result<Self> {
        let data = value.iter().copied().cycle().take(width * height * value.len()).collect();
        Self::new(width, height, value.len(), data)
    }

    /// Clamps into `[0, 1]`; NaN maps to 0. Used by producers whose
    /// arithmetic can drift a few ulps past the range.
    pub(crate) fn from_clamped(width: usize, height: usize, channels: usize, mut data: Vec<f32>) -> Self {
        for v in &mut data {
            *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        }
        debug_assert_eq!(data.len(), width * height * channels);
        ImageBuffer {
            width,
            height,
            channels,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[f32] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    /// One channel as a contiguous plane.
    pub fn plane(&self, channel: usize) -> Vec<f32> {
        self.data.iter().skip(channel).step_by(self.channels).copied().collect()
    }

    pub fn mean(&self, channel: usize) -> f64 {
        let sum: f64 = self.data.iter().skip(channel).step_by(self.channels).map(|&v| f64::from(v)).sum();
        sum / (self.width * self.height) as f64
    }

    /// Anisotropic total variation of one channel.
    pub fn total_variation(&self, channel: usize) -> f64 {
        let p = self.plane(channel);
        let (w, h) = (self.width, self.height);
        let mut tv = 0.0;
        for y in 0..h {
            for x in 0..w {
                let v = f64::from(p[y * w + x]);
                if x + 1 < w {
                    tv += (f64::from(p[y * w + x + 1]) - v).abs();
                }
                if y + 1 < h {
                    tv += (f64::from(p[(y + 1) * w + x]) - v).abs();
                }
            }
        }
        tv
    }

    pub fn max_abs_diff(&self, other: &ImageBuffer) -> f64 {
        assert_eq!(self.data.len(), other.data.len(), "image shapes differ");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (f64::from(*a) - f64::from(*b)).abs())
            .fold(0.0, f64::max)
    }
}
