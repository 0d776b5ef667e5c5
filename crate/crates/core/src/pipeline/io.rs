//! File formats: 8-bit RGB PNG frames, 16-bit PNG disparity, 32-bit float
//! TIFF disparity/depth.

use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, ImageEncoder};
use sha2::{Digest, Sha256};

use crate::depth::RawRaster;
use crate::error::{Error, Result};
use crate::image::ImageBuffer;
use crate::transform::{dequantize_8bit, Raster8};

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Decodes a PNG into an 8-bit RGB raster, dropping alpha.
pub fn decode_rgb8(bytes: &[u8]) -> Result<Raster8> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(|e| Error::data(format!("cannot decode PNG frame: {e}")))?;
    let rgb = img.to_rgb8();
    Ok(Raster8 {
        width: rgb.width() as usize,
        height: rgb.height() as usize,
        channels: 3,
        data: rgb.into_raw(),
    })
}

pub fn read_rgb_image(path: &Path) -> Result<ImageBuffer> {
    let raster = decode_rgb8(&read_bytes(path)?)?;
    dequantize_8bit(&raster)
}

/// Encodes an 8-bit raster (1 or 3 channels) as PNG.
pub fn encode_png(raster: &Raster8) -> Result<Vec<u8>> {
    let color = match raster.channels {
        1 => image::ExtendedColorType::L8,
        3 => image::ExtendedColorType::Rgb8,
        c => return Err(Error::usage(format!("cannot encode {c}-channel PNG"))),
    };
    let mut buf = Vec::new();
    image::codecs::png::PngEncoder::new(&mut buf)
        .write_image(&raster.data, raster.width as u32, raster.height as u32, color)
        .map_err(|e| Error::data(format!("PNG encoding failed: {e}")))?;
    Ok(buf)
}

/// Encodes a 16-bit single-channel PNG.
pub fn encode_png16(width: usize, height: usize, data: &[u16]) -> Result<Vec<u8>> {
    let bytes: Vec<u8> = data.iter().flat_map(|v| v.to_ne_bytes()).collect();
    let mut buf = Vec::new();
    image::codecs::png::PngEncoder::new(&mut buf)
        .write_image(&bytes, width as u32, height as u32, image::ExtendedColorType::L16)
        .map_err(|e| Error::data(format!("PNG encoding failed: {e}")))?;
    Ok(buf)
}

/// Writes `bytes` to `path` through a temporary file in the same directory
/// followed by a rename, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    use std::io::Write;
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::Builder::new()
        .prefix(".privcam-")
        .suffix(".part")
        .tempfile_in(dir)
        .map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(tmp.path(), e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Reads a disparity raster: 16-bit grayscale PNG or 32-bit float TIFF,
/// chosen by extension.
pub fn read_disparity_raster(path: &Path) -> Result<RawRaster> {
    let bytes = read_bytes(path)?;
    match extension(path).as_str() {
        "png" => decode_png16(&bytes),
        "tif" | "tiff" => decode_tiff_f32(&bytes),
        other => Err(Error::usage(format!(
            "unsupported disparity file extension '{other}' (expected .png, .tif or .tiff)"
        ))),
    }
}

pub fn extension(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase()
}

pub fn decode_png16(bytes: &[u8]) -> Result<RawRaster> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(|e| Error::data(format!("cannot decode disparity PNG: {e}")))?;
    match img {
        DynamicImage::ImageLuma16(buf) => Ok(RawRaster::U16 {
            width: buf.width() as usize,
            height: buf.height() as usize,
            data: buf.into_raw(),
        }),
        other => Err(Error::data(format!(
            "disparity PNG must be 16-bit single-channel, got {:?}",
            other.color()
        ))),
    }
}

pub fn decode_tiff_f32(bytes: &[u8]) -> Result<RawRaster> {
    use tiff::decoder::{Decoder, DecodingResult};
    let bad = |e: tiff::TiffError| Error::data(format!("cannot decode TIFF: {e}"));
    let mut dec = Decoder::new(Cursor::new(bytes)).map_err(bad)?;
    let (w, h) = dec.dimensions().map_err(bad)?;
    match dec.read_image().map_err(bad)? {
        DecodingResult::F32(data) if data.len() == (w as usize) * (h as usize) => Ok(RawRaster::F32 {
            width: w as usize,
            height: h as usize,
            data,
        }),
        _ => Err(Error::data("TIFF must hold one 32-bit float sample per pixel")),
    }
}

pub fn encode_tiff_f32(width: usize, height: usize, data: &[f32]) -> Result<Vec<u8>> {
    use tiff::encoder::{colortype, TiffEncoder};
    let mut cursor = Cursor::new(Vec::new());
    TiffEncoder::new(&mut cursor)
        .and_then(|mut enc| {
            enc.write_image::<colortype::Gray32Float>(width as u32, height as u32, data)
        })
        .map_err(|e| Error::data(format!("TIFF encoding failed: {e}")))?;
    Ok(cursor.into_inner())
}
