//! Privacy-aware camera simulation.
//!
//! Converts all-in-focus RGB frames plus stereo disparity into what a
//! fixed-focus, wide-aperture camera or a monochrome sensor would have
//! recorded:
//!
//! - [`optics`]: thin-lens circle of confusion and blur-vs-depth curves
//! - [`depth`]: disparity decoding, triangulation, missing-pixel filling
//! - [`render`]: layered defocus rendering with disk PSFs
//! - [`transform`]: grayscale conversion and 8-bit quantization
//! - [`pipeline`]: dataset scanning, batch processing and manifests
//! - [`synthetic`]: procedural scenes and fixture trees

pub mod depth;
pub mod error;
pub mod image;
pub mod optics;
pub mod pipeline;
pub mod render;
pub mod synthetic;
pub mod transform;

pub use depth::{
    decode_disparity, fill_invalid, triangulate, DepthClip, DepthMap, DisparityEncoding,
    DisparityMap, FillPolicy, RawRaster, StereoRig,
};
pub use error::{Error, Result};
pub use image::ImageBuffer;
pub use optics::{blur_depth_curve, blur_field, coc_diameter_px, BlurField, CameraConfig, CurveTable, Spacing};
pub use pipeline::{run_batch, run_dataset, scan_dataset, DatasetItem, JobConfig, Manifest, Split};
pub use render::{apply_variant, render_defocus, RenderOptions, Variant};
pub use transform::{dequantize_8bit, quantize_8bit, to_grayscale, GrayscaleWeights, Raster8};
