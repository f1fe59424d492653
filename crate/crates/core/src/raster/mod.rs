//! Image and depth rasters plus the file formats they travel in.

pub mod color;
mod io;
mod pfm;

pub use io::{image_dimensions, load_image, save_image};
pub use pfm::{load_depth, save_depth};

use crate::error::{Error, Result};

/// Transfer function of the stored pixel values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Transfer {
    /// Values are sRGB-encoded on disk and converted to linear light in memory.
    Srgb,
    /// Values are used as stored.
    #[default]
    Linear,
}

/// Row-major `height x width x channels` float image, channels interleaved.
///
/// Values are nominally in `[0, 1]`. Only the renderer's highlight stage
/// produces values above one, and it never hands them back to callers.
#[derive(Clone, Debug, PartialEq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

impl RasterImage {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidRaster(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidRaster(format!(
                "channel count must be 1 or 3, got {channels}"
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::InvalidRaster(format!(
                "expected {} samples for {width}x{height}x{channels}, got {}",
                width * height * channels,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f32) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f32) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    pub fn same_shape(&self, other: &RasterImage) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    pub(crate) fn check_same_shape(&self, other: &RasterImage, what: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "{what}: {}x{}x{} vs {}x{}x{}",
                self.width, self.height, self.channels, other.width, other.height, other.channels
            )))
        }
    }

    /// Applies `f` to every sample.
    pub fn map(&self, f: impl Fn(f32) -> f32) -> RasterImage {
        RasterImage {
            data: self.data.iter().map(|&v| f(v)).collect(),
            ..*self
        }
    }

    pub fn clamped(&self) -> RasterImage {
        self.map(|v| v.clamp(0.0, 1.0))
    }

    /// Copies the `width x height` window whose top-left corner is `(x0, y0)`.
    pub fn crop(&self, x0: usize, y0: usize, width: usize, height: usize) -> Result<RasterImage> {
        if x0 + width > self.width || y0 + height > self.height {
            return Err(Error::DimensionMismatch(format!(
                "crop {width}x{height}+{x0}+{y0} exceeds {}x{}",
                self.width, self.height
            )));
        }
        let c = self.channels;
        let mut data = Vec::with_capacity(width * height * c);
        for y in y0..y0 + height {
            let start = (y * self.width + x0) * c;
            data.extend_from_slice(&self.data[start..start + width * c]);
        }
        RasterImage::new(width, height, c, data)
    }
}

/// Per-pixel scene depth. Finite and non-negative; relative scale is allowed.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl DepthMap {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidRaster(format!(
                "depth dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::InvalidRaster(format!(
                "expected {} depth samples, got {}",
                width * height,
                data.len()
            )));
        }
        for (i, &d) in data.iter().enumerate() {
            let (x, y) = (i % width, i / width);
            if !d.is_finite() {
                return Err(Error::NonFiniteDepth { x, y });
            }
            if d < 0.0 {
                return Err(Error::NegativeDepth { x, y });
            }
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn constant(width: usize, height: usize, depth: f32) -> Result<Self> {
        Self::new(width, height, vec![depth; width * height])
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    pub fn crop(&self, x0: usize, y0: usize, width: usize, height: usize) -> Result<DepthMap> {
        if x0 + width > self.width || y0 + height > self.height {
            return Err(Error::DimensionMismatch(format!(
                "crop {width}x{height}+{x0}+{y0} exceeds {}x{}",
                self.width, self.height
            )));
        }
        let mut data = Vec::with_capacity(width * height);
        for y in y0..y0 + height {
            let start = y * self.width + x0;
            data.extend_from_slice(&self.data[start..start + width]);
        }
        Ok(DepthMap {
            width,
            height,
            data,
        })
    }

    pub(crate) fn check_matches(&self, img: &RasterImage) -> Result<()> {
        if self.width == img.width() && self.height == img.height() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "depth {}x{} vs image {}x{}",
                self.width,
                self.height,
                img.width(),
                img.height()
            )))
        }
    }

    /// Builds a map from data already known to satisfy the invariants.
    pub(crate) fn from_parts_unchecked(width: usize, height: usize, data: Vec<f32>) -> Self {
        debug_assert_eq!(data.len(), width * height);
        Self {
            width,
            height,
            data,
        }
    }
}

/// Exact median depth; the mean of the two central order statistics for
/// even pixel counts.
pub fn median_depth(depth: &DepthMap) -> f64 {
    let mut v = depth.data.clone();
    let n = v.len();
    let mid = n / 2;
    let (lower, upper, _) = v.select_nth_unstable_by(mid, f32::total_cmp);
    let upper = f64::from(*upper);
    if n % 2 == 1 {
        upper
    } else {
        let lower_max = lower
            .iter()
            .copied()
            .max_by(f32::total_cmp)
            .map(f64::from)
            .unwrap_or(upper);
        (lower_max + upper) / 2.0
    }
}

/// The photographic control signal: f-number, focal length and optional focus distance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ApertureSetting {
    pub f_number: f64,
    pub focal_length_mm: f64,
    pub focus_distance_m: Option<f64>,
}

impl ApertureSetting {
    pub const MIN_F_NUMBER: f64 = 1.0;
    pub const MAX_F_NUMBER: f64 = 32.0;

    /// Validates the f-number range. Focal lengths outside the 28–70 mm zoom
    /// range are accepted; see [`ApertureSetting::focal_length_warning`].
    pub fn new(f_number: f64, focal_length_mm: f64, focus_distance_m: Option<f64>) -> Result<Self> {
        if !(Self::MIN_F_NUMBER..=Self::MAX_F_NUMBER).contains(&f_number) {
            return Err(Error::InvalidConfig(format!(
                "f-number must lie in [1, 32], got {f_number}"
            )));
        }
        if !(focal_length_mm > 0.0) {
            return Err(Error::non_positive("focal_length_mm", focal_length_mm));
        }
        if let Some(d) = focus_distance_m {
            if !(d > 0.0) {
                return Err(Error::non_positive("focus_distance_m", d));
            }
        }
        Ok(Self {
            f_number,
            focal_length_mm,
            focus_distance_m,
        })
    }

    /// True when the focal length lies outside the 28–70 mm capture range.
    pub fn focal_length_warning(&self) -> bool {
        !(28.0..=70.0).contains(&self.focal_length_mm)
    }
}
