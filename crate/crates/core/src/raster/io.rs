use std::path::Path;

use image::{DynamicImage, ImageError, ImageFormat, ImageReader};

use super::color::{linear_to_srgb, srgb_to_linear};
use super::{RasterImage, Transfer};
use crate::error::{Error, Result};

fn map_image_error(path: &Path, e: ImageError) -> Error {
    match e {
        ImageError::IoError(io) => Error::io(path, io),
        ImageError::Unsupported(u) => Error::UnsupportedFormat(format!("{}: {u}", path.display())),
        other => Error::decode(path, other),
    }
}

/// Loads an 8- or 16-bit PNG or JPEG. Alpha is dropped; grey stays one channel.
///
/// JPEG chroma upsampling follows the decoder default.
pub fn load_image(path: impl AsRef<Path>, transfer: Transfer) -> Result<RasterImage> {
    let path = path.as_ref();
    let reader = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    match reader.format() {
        Some(ImageFormat::Png) | Some(ImageFormat::Jpeg) => {}
        other => {
            return Err(Error::UnsupportedFormat(format!(
                "{}: {other:?}",
                path.display()
            )))
        }
    }
    let decoded = reader.decode().map_err(|e| map_image_error(path, e))?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);

    let (channels, mut data): (usize, Vec<f32>) = match decoded {
        DynamicImage::ImageLuma8(_) | DynamicImage::ImageLumaA8(_) => (
            1,
            decoded.to_luma8().into_raw().into_iter().map(|v| v as f32 / 255.0).collect(),
        ),
        DynamicImage::ImageLuma16(_) | DynamicImage::ImageLumaA16(_) => (
            1,
            decoded
                .to_luma16()
                .into_raw()
                .into_iter()
                .map(|v| v as f32 / 65535.0)
                .collect(),
        ),
        DynamicImage::ImageRgb8(_) | DynamicImage::ImageRgba8(_) => (
            3,
            decoded.to_rgb8().into_raw().into_iter().map(|v| v as f32 / 255.0).collect(),
        ),
        DynamicImage::ImageRgb16(_) | DynamicImage::ImageRgba16(_) => (
            3,
            decoded
                .to_rgb16()
                .into_raw()
                .into_iter()
                .map(|v| v as f32 / 65535.0)
                .collect(),
        ),
        other => {
            return Err(Error::UnsupportedFormat(format!(
                "{}: pixel layout {:?}",
                path.display(),
                other.color()
            )))
        }
    };

    if transfer == Transfer::Srgb {
        for v in &mut data {
            *v = srgb_to_linear(f64::from(*v)) as f32;
        }
    }
    RasterImage::new(w, h, channels, data)
}

#[inline]
fn quantize(v: f32, transfer: Transfer) -> u8 {
    let v = f64::from(v).clamp(0.0, 1.0);
    let v = match transfer {
        Transfer::Srgb => linear_to_srgb(v),
        Transfer::Linear => v,
    };
    (v * 255.0).round() as u8
}

/// Reads `(width, height)` from the header without decoding pixels.
pub fn image_dimensions(path: impl AsRef<Path>) -> Result<(usize, usize)> {
    let path = path.as_ref();
    let (w, h) = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?
        .into_dimensions()
        .map_err(|e| map_image_error(path, e))?;
    Ok((w as usize, h as usize))
}

/// Writes an 8-bit PNG. Values are clamped to `[0, 1]` before quantization.
///
/// Only PNG is written; the tooling never re-encodes lossily.
pub fn save_image(img: &RasterImage, path: impl AsRef<Path>, transfer: Transfer) -> Result<()> {
    let path = path.as_ref();
    match ImageFormat::from_path(path) {
        Ok(ImageFormat::Png) => {}
        _ => {
            return Err(Error::UnsupportedFormat(format!(
                "{}: only .png output is supported",
                path.display()
            )))
        }
    }
    let bytes: Vec<u8> = img.data().iter().map(|&v| quantize(v, transfer)).collect();
    let (w, h) = (img.width() as u32, img.height() as u32);
    let dynamic = if img.channels() == 1 {
        DynamicImage::ImageLuma8(image::GrayImage::from_raw(w, h, bytes).expect("buffer size"))
    } else {
        DynamicImage::ImageRgb8(image::RgbImage::from_raw(w, h, bytes).expect("buffer size"))
    };
    dynamic
        .save_with_format(path, ImageFormat::Png)
        .map_err(|e| map_image_error(path, e))
}
