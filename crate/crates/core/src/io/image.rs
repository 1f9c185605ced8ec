use std::path::Path;

use image::{ImageFormat, RgbImage};

use crate::error::{Error, Result};
use crate::raster::ImageBuffer;

/// Quantizes an intensity to a byte: `round(v * 255)` with halves rounded up.
pub fn to_byte(v: f64) -> u8 {
    (v * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
}

pub fn from_byte(b: u8) -> f64 {
    b as f64 / 255.0
}

pub fn to_rgb8(img: &ImageBuffer) -> RgbImage {
    let bytes = img.data().iter().map(|&v| to_byte(v)).collect();
    RgbImage::from_raw(img.width() as u32, img.height() as u32, bytes)
        .expect("buffer length matches dimensions")
}

pub fn from_rgb8(rgb: &RgbImage) -> ImageBuffer {
    let data = rgb.as_raw().iter().map(|&b| from_byte(b)).collect();
    ImageBuffer::from_clamped(rgb.height() as usize, rgb.width() as usize, data)
}

/// Loads a PNG or JPEG file; other channel layouts are converted to RGB.
pub fn load_image(path: &Path) -> Result<ImageBuffer> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let decoded = image::load_from_memory(&bytes).map_err(|e| Error::Codec {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(from_rgb8(&decoded.to_rgb8()))
}

/// Encodes to memory; the format follows the file extension (`png`, `jpg`, `jpeg`).
pub fn encode_image(img: &ImageBuffer, path: &Path) -> Result<Vec<u8>> {
    let format = match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase) {
        Some(ext) if ext == "png" => ImageFormat::Png,
        Some(ext) if ext == "jpg" || ext == "jpeg" => ImageFormat::Jpeg,
        other => {
            return Err(Error::Codec {
                path: path.to_path_buf(),
                message: format!("unsupported image extension {other:?}"),
            })
        }
    };
    let mut out = std::io::Cursor::new(Vec::new());
    to_rgb8(img).write_to(&mut out, format).map_err(|e| Error::Codec {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(out.into_inner())
}

pub fn save_image(img: &ImageBuffer, path: &Path) -> Result<()> {
    let bytes = encode_image(img, path)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
