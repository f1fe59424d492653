//! Aperture conditioning primitives: encodings, FiLM modulation, auxiliary
//! input maps and random block masking.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Width of a projected aperture embedding.
pub const PROJECTED_DIM: usize = 64;
pub const DEFAULT_BAND_COUNT: usize = 8;

/// Strength normalization: the widest transition in the data, f/22 to f/2.
const MAX_LOG_RATIO: f64 = 2.397_895_272_798_371; // ln(11)

#[derive(Clone, Debug, PartialEq)]
pub struct ApertureEmbedding {
    pub values: Vec<f64>,
}

/// Sinusoidal encoding `[sin(2^k pi x), cos(2^k pi x)]` for `k < band_count`,
/// interleaved per band, with `x = (f - 1) / 31` over the f/1–f/32 range.
pub fn fourier_encode(f_number: f64, band_count: usize) -> Result<ApertureEmbedding> {
    if !(f_number > 0.0) {
        return Err(Error::non_positive("f_number", f_number));
    }
    if band_count == 0 {
        return Err(Error::non_positive("band_count", 0.0));
    }
    let x = (f_number - 1.0) / 31.0;
    let mut values = Vec::with_capacity(2 * band_count);
    for k in 0..band_count {
        let arg = 2f64.powi(k as i32) * PI * x;
        values.push(arg.sin());
        values.push(arg.cos());
    }
    Ok(ApertureEmbedding { values })
}

/// Fixed linear map from a raw encoding to [`PROJECTED_DIM`] values.
#[derive(Clone, Debug, PartialEq)]
pub struct ApertureProjection {
    input_dim: usize,
    /// Row-major `PROJECTED_DIM x input_dim`.
    weights: Vec<f32>,
}

impl ApertureProjection {
    pub fn new(input_dim: usize, weights: Vec<f32>) -> Result<Self> {
        if input_dim == 0 || weights.len() != PROJECTED_DIM * input_dim {
            return Err(Error::DimensionMismatch(format!(
                "projection needs {PROJECTED_DIM}x{input_dim} weights, got {}",
                weights.len()
            )));
        }
        Ok(Self { input_dim, weights })
    }

    /// Reads `64 x (2 * band_count)` little-endian `f32`s, row-major.
    pub fn load(path: impl AsRef<Path>, band_count: usize) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let input_dim = 2 * band_count;
        if bytes.len() != PROJECTED_DIM * input_dim * 4 {
            return Err(Error::decode(
                path,
                format!(
                    "expected {} bytes for a {PROJECTED_DIM}x{input_dim} matrix, got {}",
                    PROJECTED_DIM * input_dim * 4,
                    bytes.len()
                ),
            ));
        }
        let weights = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Self::new(input_dim, weights)
    }

    pub fn project(&self, e: &ApertureEmbedding) -> Result<ApertureEmbedding> {
        if e.values.len() != self.input_dim {
            return Err(Error::DimensionMismatch(format!(
                "embedding has {} values, projection expects {}",
                e.values.len(),
                self.input_dim
            )));
        }
        let values = self
            .weights
            .chunks_exact(self.input_dim)
            .map(|row| row.iter().zip(&e.values).map(|(&w, &v)| f64::from(w) * v).sum())
            .collect();
        Ok(ApertureEmbedding { values })
    }
}

/// `ln(source / target)`; positive when the target aperture is wider.
pub fn log_aperture_ratio(source_f: f64, target_f: f64) -> Result<f64> {
    if !(source_f > 0.0) {
        return Err(Error::non_positive("source_f", source_f));
    }
    if !(target_f > 0.0) {
        return Err(Error::non_positive("target_f", target_f));
    }
    Ok((source_f / target_f).ln())
}

/// Channel-major `channels x height x width` feature tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(Error::DimensionMismatch(format!(
                "feature map {channels}x{height}x{width} needs {} values, got {}",
                channels * height * width,
                data.len()
            )));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }
}

/// Feature-wise affine modulation `x * scale[c] + shift[c]`.
pub fn film_modulate(x: &FeatureMap, scale: &[f64], shift: &[f64]) -> Result<FeatureMap> {
    if scale.len() != x.channels || shift.len() != x.channels {
        return Err(Error::DimensionMismatch(format!(
            "FiLM parameters have {}/{} entries for {} channels",
            scale.len(),
            shift.len(),
            x.channels
        )));
    }
    let plane = x.height * x.width;
    let data = x
        .data
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let c = i / plane.max(1);
            v * scale[c] + shift[c]
        })
        .collect();
    FeatureMap::new(x.channels, x.height, x.width, data)
}

fn check_dims(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidRaster(format!(
            "dimensions must be positive, got {width}x{height}"
        )));
    }
    Ok(())
}

/// Two-channel positional map: `x / (width - 1)` and `y / (height - 1)`,
/// zero along a unit-length axis.
pub fn coordinate_map(width: usize, height: usize) -> Result<FeatureMap> {
    check_dims(width, height)?;
    let norm = |i: usize, n: usize| if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
    let mut data = Vec::with_capacity(2 * width * height);
    for _y in 0..height {
        data.extend((0..width).map(|x| norm(x, width)));
    }
    for y in 0..height {
        let v = norm(y, height);
        data.extend(std::iter::repeat_n(v, width));
    }
    FeatureMap::new(2, height, width, data)
}

/// Constant one-channel map of `clip(ln(source / target) / ln 11, 0, 1)`.
pub fn bokeh_strength_map(
    width: usize,
    height: usize,
    source_f: f64,
    target_f: f64,
) -> Result<FeatureMap> {
    check_dims(width, height)?;
    let s = (log_aperture_ratio(source_f, target_f)? / MAX_LOG_RATIO).clamp(0.0, 1.0);
    FeatureMap::new(1, height, width, vec![s; width * height])
}

/// Linearly shrinking masking ratio.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaskSchedule {
    pub start_ratio: f64,
    pub end_ratio: f64,
    pub total_steps: usize,
}

impl MaskSchedule {
    pub fn new(start_ratio: f64, end_ratio: f64, total_steps: usize) -> Result<Self> {
        for r in [start_ratio, end_ratio] {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::InvalidRatio(r));
            }
        }
        if start_ratio < end_ratio {
            return Err(Error::InvalidConfig(format!(
                "masking must shrink: start {start_ratio} < end {end_ratio}"
            )));
        }
        if total_steps == 0 {
            return Err(Error::non_positive("total_steps", 0.0));
        }
        Ok(Self {
            start_ratio,
            end_ratio,
            total_steps,
        })
    }
}

pub fn mask_ratio_at(s: &MaskSchedule, step: usize) -> Result<f64> {
    if step > s.total_steps {
        return Err(Error::StepOutOfRange {
            step,
            total: s.total_steps,
        });
    }
    let t = step as f64 / s.total_steps as f64;
    Ok(s.start_ratio * (1.0 - t) + s.end_ratio * t)
}

/// Block-granular binary mask over a `width x height` raster.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockMask {
    pub width: usize,
    pub height: usize,
    pub block_px: usize,
    pub blocks_x: usize,
    pub blocks_y: usize,
    /// Row-major block grid, `true` where masked.
    pub blocks: Vec<bool>,
}

impl BlockMask {
    #[inline]
    pub fn is_masked(&self, x: usize, y: usize) -> bool {
        self.blocks[(y / self.block_px) * self.blocks_x + x / self.block_px]
    }

    pub fn masked_blocks(&self) -> usize {
        self.blocks.iter().filter(|&&b| b).count()
    }

    /// Per-pixel raster, 1 where masked.
    pub fn to_raster(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.width * self.height);
        for y in 0..self.height {
            out.extend((0..self.width).map(|x| u8::from(self.is_masked(x, y))));
        }
        out
    }
}

/// Masks exactly `round(ratio * blocks)` blocks of a `ceil(h/b) x ceil(w/b)`
/// grid, sampled uniformly without replacement from `seed`.
pub fn block_mask(
    width: usize,
    height: usize,
    block_px: usize,
    ratio: f64,
    seed: u64,
) -> Result<BlockMask> {
    check_dims(width, height)?;
    if block_px == 0 {
        return Err(Error::non_positive("block_px", 0.0));
    }
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::InvalidRatio(ratio));
    }
    let blocks_x = width.div_ceil(block_px);
    let blocks_y = height.div_ceil(block_px);
    let count = blocks_x * blocks_y;
    let masked = ((ratio * count as f64).round() as usize).min(count);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut blocks = vec![false; count];
    for i in rand::seq::index::sample(&mut rng, count, masked) {
        blocks[i] = true;
    }
    Ok(BlockMask {
        width,
        height,
        block_px,
        blocks_x,
        blocks_y,
        blocks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fourier_examples() {
        let e = fourier_encode(1.0, 8).unwrap();
        assert_eq!(e.values.len(), 16);
        for k in 0..8 {
            assert_eq!(e.values[2 * k], 0.0);
            assert_eq!(e.values[2 * k + 1], 1.0);
        }
        let e = fourier_encode(16.5, 8).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-12);
        assert!(e.values[1].abs() < 1e-12);
        assert!(fourier_encode(0.0, 8).is_err());
        assert!(fourier_encode(2.0, 0).is_err());
    }

    #[test]
    fn projection() {
        let mut w = vec![0f32; PROJECTED_DIM * 4];
        w[0] = 1.0; // row 0 picks the first entry
        w[4 + 1] = 2.0; // row 1 doubles the second
        let p = ApertureProjection::new(4, w.clone()).unwrap();
        let e = fourier_encode(16.5, 2).unwrap();
        let out = p.project(&e).unwrap();
        assert_eq!(out.values.len(), PROJECTED_DIM);
        assert!((out.values[0] - e.values[0]).abs() < 1e-12);
        assert!((out.values[1] - 2.0 * e.values[1]).abs() < 1e-12);
        assert!(p.project(&fourier_encode(2.0, 3).unwrap()).is_err());

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("proj.bin");
        let bytes: Vec<u8> = w.iter().flat_map(|v| v.to_le_bytes()).collect();
        fs::write(&path, &bytes).unwrap();
        assert_eq!(ApertureProjection::load(&path, 2).unwrap(), p);
        assert!(ApertureProjection::load(&path, 8).is_err());
    }

    #[test]
    fn log_ratio() {
        assert_eq!(log_aperture_ratio(4.0, 4.0).unwrap(), 0.0);
        assert!((log_aperture_ratio(22.0, 2.0).unwrap() - 11f64.ln()).abs() < 1e-12);
        assert!((MAX_LOG_RATIO - 11f64.ln()).abs() < 1e-15);
        assert!(log_aperture_ratio(0.0, 2.0).is_err());
        assert!(log_aperture_ratio(2.0, -1.0).is_err());
    }

    #[test]
    fn film_examples() {
        let x = FeatureMap::new(2, 1, 2, vec![0.5, 1.0, -1.0, 3.0]).unwrap();
        assert_eq!(film_modulate(&x, &[1.0, 1.0], &[0.0, 0.0]).unwrap(), x);
        let y = film_modulate(&x, &[2.0, 0.5], &[-1.0, 1.0]).unwrap();
        assert_eq!(y.data, vec![0.0, 1.0, 0.5, 2.5]);
        let z = FeatureMap::new(2, 2, 2, vec![0.0; 8]).unwrap();
        let s = film_modulate(&z, &[3.0, 3.0], &[0.25, -4.0]).unwrap();
        assert!(s.plane(0).iter().all(|&v| v == 0.25));
        assert!(s.plane(1).iter().all(|&v| v == -4.0));
        assert!(film_modulate(&x, &[1.0], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn coordinates() {
        let m = coordinate_map(1, 1).unwrap();
        assert_eq!(m.data, vec![0.0, 0.0]);
        let m = coordinate_map(3, 3).unwrap();
        assert_eq!((m.get(0, 1, 1), m.get(1, 1, 1)), (0.5, 0.5));
        let m = coordinate_map(2000, 1500).unwrap();
        assert_eq!((m.get(0, 1499, 1999), m.get(1, 1499, 1999)), (1.0, 1.0));
        assert_eq!((m.get(0, 0, 0), m.get(1, 0, 0)), (0.0, 0.0));
        assert!(coordinate_map(0, 3).is_err());
    }

    #[test]
    fn strength_map() {
        assert!(bokeh_strength_map(3, 2, 8.0, 8.0).unwrap().data.iter().all(|&v| v == 0.0));
        assert!(bokeh_strength_map(3, 2, 22.0, 2.0)
            .unwrap()
            .data
            .iter()
            .all(|&v| (v - 1.0).abs() < 1e-12));
        let half = bokeh_strength_map(1, 1, 22.0, 6.633).unwrap().data[0];
        assert!((half - 0.5).abs() < 1e-3);
        assert_eq!(bokeh_strength_map(1, 1, 2.0, 22.0).unwrap().data[0], 0.0);
        assert_eq!(bokeh_strength_map(1, 1, 32.0, 1.0).unwrap().data[0], 1.0);
    }

    #[test]
    fn schedule() {
        let s = MaskSchedule::new(0.75, 0.01, 100).unwrap();
        assert_eq!(mask_ratio_at(&s, 0).unwrap(), 0.75);
        assert_eq!(mask_ratio_at(&s, 100).unwrap(), 0.01);
        assert!((mask_ratio_at(&s, 50).unwrap() - 0.38).abs() < 1e-12);
        assert!(matches!(mask_ratio_at(&s, 101), Err(Error::StepOutOfRange { .. })));
        assert!(MaskSchedule::new(0.1, 0.5, 10).is_err());
        assert!(MaskSchedule::new(0.5, 0.1, 0).is_err());
        assert!(MaskSchedule::new(1.5, 0.1, 10).is_err());
    }

    #[test]
    fn block_mask_examples() {
        let m = block_mask(64, 64, 16, 0.25, 42).unwrap();
        let mut count = 0;
        for by in 0..4 {
            for bx in 0..4 {
                let v = m.is_masked(bx * 16, by * 16);
                for y in by * 16..by * 16 + 16 {
                    for x in bx * 16..bx * 16 + 16 {
                        assert_eq!(m.is_masked(x, y), v);
                    }
                }
                count += usize::from(v);
            }
        }
        assert_eq!(count, 4);
        assert_eq!(m, block_mask(64, 64, 16, 0.25, 42).unwrap());
        assert!(block_mask(40, 24, 16, 0.0, 1).unwrap().to_raster().iter().all(|&v| v == 0));
        let full = block_mask(40, 24, 16, 1.0, 1).unwrap();
        assert_eq!((full.blocks_x, full.blocks_y), (3, 2));
        assert!(full.to_raster().iter().all(|&v| v == 1));
        assert!(matches!(block_mask(8, 8, 4, 1.2, 0), Err(Error::InvalidRatio(_))));
        assert!(block_mask(8, 8, 0, 0.5, 0).is_err());
    }

    proptest! {
        #[test]
        fn fourier_bounds(f in 1.0f64..32.0, bands in 1usize..=8) {
            let e = fourier_encode(f, bands).unwrap();
            prop_assert_eq!(e.values.len(), 2 * bands);
            prop_assert!(e.values.iter().all(|v| (-1.0..=1.0).contains(v)));
        }

        #[test]
        fn film_is_invertible(
            data in proptest::collection::vec(-10.0f64..10.0, 12),
            scale in proptest::collection::vec(prop_oneof![-5.0f64..-0.1, 0.1f64..5.0], 3),
            shift in proptest::collection::vec(-5.0f64..5.0, 3),
        ) {
            let x = FeatureMap::new(3, 2, 2, data).unwrap();
            let y = film_modulate(&x, &scale, &shift).unwrap();
            let inv_s: Vec<f64> = scale.iter().map(|s| 1.0 / s).collect();
            let inv_b: Vec<f64> = scale.iter().zip(&shift).map(|(s, b)| -b / s).collect();
            let back = film_modulate(&y, &inv_s, &inv_b).unwrap();
            for (a, b) in back.data.iter().zip(&x.data) {
                prop_assert!((a - b).abs() < 1e-6);
            }
        }

        #[test]
        fn schedule_is_monotone(start in 0.0f64..=1.0, frac in 0.0f64..=1.0, steps in 1usize..200) {
            let s = MaskSchedule::new(start, start * frac, steps).unwrap();
            let mut prev = mask_ratio_at(&s, 0).unwrap();
            for k in 1..=steps {
                let v = mask_ratio_at(&s, k).unwrap();
                prop_assert!(v <= prev + 1e-15);
                prev = v;
            }
        }
    }
}
