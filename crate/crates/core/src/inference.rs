//! Model-agnostic inference wrappers.
//!
//! Operators must be dimension-covariant: given a `w x h` input they return a
//! `w x h` output with the same channel count. Under quarter-turn rotations
//! the operator sees the rotated dimensions. Aligned depth rasters are
//! permuted and cropped together with the image.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::par::Exec;
use crate::raster::{DepthMap, RasterImage};

pub const DEFAULT_TILE_PX: usize = 896;
pub const DEFAULT_STRIDE_PX: usize = 384;

/// Element `R^r F^h` of the dihedral group of the square: an optional
/// horizontal flip followed by `r` clockwise quarter turns.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct DihedralTransform {
    pub rotation_quarter_turns: u8,
    pub flip_horizontal: bool,
}

impl DihedralTransform {
    pub const IDENTITY: Self = Self {
        rotation_quarter_turns: 0,
        flip_horizontal: false,
    };

    pub fn new(rotation_quarter_turns: u8, flip_horizontal: bool) -> Self {
        Self {
            rotation_quarter_turns: rotation_quarter_turns % 4,
            flip_horizontal,
        }
    }

    /// All eight elements; the identity comes first.
    pub fn all() -> [Self; 8] {
        let mut out = [Self::IDENTITY; 8];
        for (i, t) in out.iter_mut().enumerate() {
            *t = Self::new((i % 4) as u8, i >= 4);
        }
        out
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(self, other: Self) -> Self {
        // F R^k = R^-k F
        let (ra, rb) = (self.rotation_quarter_turns, other.rotation_quarter_turns);
        if self.flip_horizontal {
            Self::new(ra + 4 - rb, !other.flip_horizontal)
        } else {
            Self::new(ra + rb, other.flip_horizontal)
        }
    }

    pub fn inverse(self) -> Self {
        if self.flip_horizontal {
            self
        } else {
            Self::new(4 - self.rotation_quarter_turns, false)
        }
    }

    /// Output dimensions for a `width x height` input.
    pub fn output_dims(self, width: usize, height: usize) -> (usize, usize) {
        if self.rotation_quarter_turns % 2 == 1 {
            (height, width)
        } else {
            (width, height)
        }
    }
}

/// Permutes a row-major `w x h x ch` buffer.
fn permute<T: Copy>(data: &[T], w: usize, h: usize, ch: usize, t: DihedralTransform) -> Vec<T> {
    let (ow, oh) = t.output_dims(w, h);
    let r = t.rotation_quarter_turns;
    let mut out = Vec::with_capacity(data.len());
    for y in 0..oh {
        for x in 0..ow {
            // undo the rotation; clockwise turn maps (x, y) <- (y, h-1-x)
            let (mut sx, sy) = match r {
                0 => (x, y),
                1 => (y, h - 1 - x),
                2 => (w - 1 - x, h - 1 - y),
                _ => (w - 1 - y, x),
            };
            if t.flip_horizontal {
                sx = w - 1 - sx;
            }
            let s = (sy * w + sx) * ch;
            out.extend_from_slice(&data[s..s + ch]);
        }
    }
    out
}

pub fn apply_transform(img: &RasterImage, t: DihedralTransform) -> RasterImage {
    let (w, h, c) = (img.width(), img.height(), img.channels());
    let (ow, oh) = t.output_dims(w, h);
    RasterImage::new(ow, oh, c, permute(img.data(), w, h, c, t))
        .expect("permutation preserves sample count")
}

pub fn apply_transform_depth(depth: &DepthMap, t: DihedralTransform) -> DepthMap {
    let (w, h) = (depth.width(), depth.height());
    let (ow, oh) = t.output_dims(w, h);
    DepthMap::from_parts_unchecked(ow, oh, permute(depth.data(), w, h, 1, t))
}

/// An image-to-image operator with an optional aligned depth raster.
pub trait ImageOperator: Sync {
    fn apply(&self, img: &RasterImage, aux: Option<&DepthMap>) -> Result<RasterImage>;
}

impl<F> ImageOperator for F
where
    F: Fn(&RasterImage, Option<&DepthMap>) -> Result<RasterImage> + Sync,
{
    fn apply(&self, img: &RasterImage, aux: Option<&DepthMap>) -> Result<RasterImage> {
        self(img, aux)
    }
}

fn run_checked<O: ImageOperator + ?Sized>(
    op: &O,
    img: &RasterImage,
    aux: Option<&DepthMap>,
) -> Result<RasterImage> {
    let out = op.apply(img, aux)?;
    if !out.same_shape(img) {
        return Err(Error::OperatorDimension {
            want_width: img.width(),
            want_height: img.height(),
            got_width: out.width(),
            got_height: out.height(),
        });
    }
    Ok(out)
}

/// Mean of the operator's outputs under all eight transforms, each mapped
/// back by the inverse transform.
pub fn tta_ensemble<O: ImageOperator + ?Sized>(
    op: &O,
    img: &RasterImage,
    aux: Option<&DepthMap>,
) -> Result<RasterImage> {
    tta_ensemble_with(op, img, aux, Exec::default())
}

pub fn tta_ensemble_with<O: ImageOperator + ?Sized>(
    op: &O,
    img: &RasterImage,
    aux: Option<&DepthMap>,
    exec: Exec,
) -> Result<RasterImage> {
    if let Some(d) = aux {
        d.check_matches(img)?;
    }
    let branches = exec.map_range(8, |i| {
        let t = DihedralTransform::all()[i];
        let x = apply_transform(img, t);
        let d = aux.map(|d| apply_transform_depth(d, t));
        run_checked(op, &x, d.as_ref()).map(|y| apply_transform(&y, t.inverse()))
    });
    let mut acc = vec![0f64; img.data().len()];
    for b in branches {
        for (a, &v) in acc.iter_mut().zip(b?.data()) {
            *a += f64::from(v);
        }
    }
    let data = acc.into_iter().map(|v| (v / 8.0) as f32).collect();
    RasterImage::new(img.width(), img.height(), img.channels(), data)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TileSpec {
    pub tile_px: usize,
    pub stride_px: usize,
}

impl Default for TileSpec {
    fn default() -> Self {
        Self {
            tile_px: DEFAULT_TILE_PX,
            stride_px: DEFAULT_STRIDE_PX,
        }
    }
}

impl TileSpec {
    pub fn new(tile_px: usize, stride_px: usize) -> Result<Self> {
        if stride_px == 0 || stride_px > tile_px {
            return Err(Error::InvalidConfig(format!(
                "tile stride must satisfy 0 < stride <= tile, got tile {tile_px} stride {stride_px}"
            )));
        }
        Ok(Self { tile_px, stride_px })
    }
}

/// Tile origins along one axis of length `len`; the last origin is clamped so
/// the final tile ends at the border. `tile` must not exceed `len`.
pub fn tile_origins(len: usize, tile: usize, stride: usize) -> Vec<usize> {
    debug_assert!(tile <= len && stride > 0);
    let last = len - tile;
    let mut out: Vec<usize> = (0..).map(|k| k * stride).take_while(|&o| o < last).collect();
    out.push(last);
    out
}

/// Raised-cosine profile, strictly positive on every sample.
pub fn hann_profile(len: usize) -> Vec<f64> {
    (0..len)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * (i as f64 + 0.5) / len as f64).cos())
        .collect()
}

/// Tile geometry after clipping oversized tiles to the image.
#[derive(Clone, Debug)]
struct TileLayout {
    tile_w: usize,
    tile_h: usize,
    xs: Vec<usize>,
    ys: Vec<usize>,
    wx: Vec<f64>,
    wy: Vec<f64>,
}

impl TileLayout {
    fn new(width: usize, height: usize, spec: TileSpec) -> Self {
        let tile_w = spec.tile_px.min(width);
        let tile_h = spec.tile_px.min(height);
        if tile_w < spec.tile_px || tile_h < spec.tile_px {
            log::warn!(
                "tile {0}x{0} larger than {width}x{height} image; clipped to {tile_w}x{tile_h}",
                spec.tile_px
            );
        }
        Self {
            tile_w,
            tile_h,
            xs: tile_origins(width, tile_w, spec.stride_px.min(tile_w)),
            ys: tile_origins(height, tile_h, spec.stride_px.min(tile_h)),
            wx: hann_profile(tile_w),
            wy: hann_profile(tile_h),
        }
    }

    fn tiles(&self) -> Vec<(usize, usize)> {
        self.ys
            .iter()
            .flat_map(|&y| self.xs.iter().map(move |&x| (x, y)))
            .collect()
    }

    /// Per-pixel sum of raw tile weights.
    fn weight_sum(&self, width: usize, height: usize) -> Vec<f64> {
        let mut sum = vec![0f64; width * height];
        for (x0, y0) in self.tiles() {
            for (ty, &wy) in self.wy.iter().enumerate() {
                let row = &mut sum[(y0 + ty) * width + x0..][..self.tile_w];
                for (s, &wx) in row.iter_mut().zip(&self.wx) {
                    *s += wx * wy;
                }
            }
        }
        sum
    }
}

/// Per-pixel sum of the normalized blending weights; one everywhere up to
/// rounding.
pub fn tile_weight_coverage(width: usize, height: usize, spec: TileSpec) -> Vec<f64> {
    let layout = TileLayout::new(width, height, spec);
    let sum = layout.weight_sum(width, height);
    let mut cover = vec![0f64; width * height];
    for (x0, y0) in layout.tiles() {
        for (ty, &wy) in layout.wy.iter().enumerate() {
            for (tx, &wx) in layout.wx.iter().enumerate() {
                let i = (y0 + ty) * width + x0 + tx;
                cover[i] += wx * wy / sum[i];
            }
        }
    }
    cover
}

/// Runs `op` on overlapping tiles and blends the results with normalized
/// separable Hann weights.
pub fn tile_process<O: ImageOperator + ?Sized>(
    op: &O,
    img: &RasterImage,
    aux: Option<&DepthMap>,
    spec: TileSpec,
) -> Result<RasterImage> {
    tile_process_with(op, img, aux, spec, Exec::default())
}

pub fn tile_process_with<O: ImageOperator + ?Sized>(
    op: &O,
    img: &RasterImage,
    aux: Option<&DepthMap>,
    spec: TileSpec,
    exec: Exec,
) -> Result<RasterImage> {
    let spec = TileSpec::new(spec.tile_px, spec.stride_px)?;
    if let Some(d) = aux {
        d.check_matches(img)?;
    }
    let (w, h, c) = (img.width(), img.height(), img.channels());
    let layout = TileLayout::new(w, h, spec);
    let tiles = layout.tiles();
    if tiles.len() == 1 {
        return run_checked(op, img, aux);
    }
    let (tw, th) = (layout.tile_w, layout.tile_h);
    let outputs = exec.map_range(tiles.len(), |i| {
        let (x0, y0) = tiles[i];
        let patch = img.crop(x0, y0, tw, th)?;
        let d = aux.map(|d| d.crop(x0, y0, tw, th)).transpose()?;
        run_checked(op, &patch, d.as_ref())
    });

    let sum = layout.weight_sum(w, h);
    let mut acc = vec![0f64; w * h * c];
    for (&(x0, y0), out) in tiles.iter().zip(outputs) {
        let out = out?;
        for (ty, &wy) in layout.wy.iter().enumerate() {
            for (tx, &wx) in layout.wx.iter().enumerate() {
                let p = (y0 + ty) * w + x0 + tx;
                let wt = wx * wy / sum[p];
                let src = &out.data()[(ty * tw + tx) * c..][..c];
                for (a, &v) in acc[p * c..][..c].iter_mut().zip(src) {
                    *a += wt * f64::from(v);
                }
            }
        }
    }
    RasterImage::new(w, h, c, acc.into_iter().map(|v| v as f32).collect())
}

/// Weighted mean of equally shaped images; weights are normalized to sum 1.
pub fn average_outputs(outputs: &[RasterImage], weights: &[f64]) -> Result<RasterImage> {
    let Some(first) = outputs.first() else {
        return Err(Error::DimensionMismatch("no outputs to average".into()));
    };
    if weights.len() != outputs.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} outputs but {} weights",
            outputs.len(),
            weights.len()
        )));
    }
    if let Some(&w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(Error::InvalidConfig(format!(
            "ensemble weights must be finite and non-negative, got {w}"
        )));
    }
    for o in &outputs[1..] {
        first.check_same_shape(o, "average_outputs")?;
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroWeightSum);
    }
    let mut acc = vec![0f64; first.data().len()];
    for (o, &wt) in outputs.iter().zip(weights) {
        let wn = wt / total;
        if wn == 0.0 {
            continue;
        }
        for (a, &v) in acc.iter_mut().zip(o.data()) {
            *a += wn * f64::from(v);
        }
    }
    RasterImage::new(
        first.width(),
        first.height(),
        first.channels(),
        acc.into_iter().map(|v| v as f32).collect(),
    )
}
