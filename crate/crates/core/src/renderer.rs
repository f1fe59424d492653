//! Depth-layered scatter renderer.
//!
//! The pipeline for [`render_bokeh`]:
//!
//! 1. Resolve the focus depth and compute per-pixel blur radii for the target
//!    aperture. The input already carries the f/22 defocus, so the radius
//!    actually applied is the quadrature difference between the target and
//!    the f/22 radius; it vanishes for any target at or above f/22.
//! 2. Bucket pixels into equal-population layers of `|D - D~|`.
//! 3. Linearize, boost highlights, then scatter every pixel with its PSF into
//!    its layer, accumulating premultiplied colour and coverage.
//! 4. Composite layers back to front (far from focus first) so layers nearer
//!    the focal plane eclipse those behind them, renormalize by accumulated
//!    coverage, undo the highlight boost and re-encode.
//!
//! Scattering is evaluated per output row: every row sums the kernel rows that
//! reach it in a fixed source order, so results do not depend on thread count.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optics::{
    coc_map, coc_to_radius_px, default_max_radius_px, make_psf, CoCMap, FocusRef, PsfKernel,
    RadiusMap, REFERENCE_F_NUMBER,
};
use crate::par::Exec;
use crate::raster::color::{linear_to_srgb, srgb_to_linear};
use crate::raster::{ApertureSetting, DepthMap, RasterImage};

pub const DEFAULT_SHARP_THRESHOLD: f64 = 0.05;

/// Kernel radii are snapped to this many steps per pixel so kernels can be shared.
const RADIUS_STEPS_PER_PX: f64 = 8.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderConfig {
    /// 0 for a circular aperture, otherwise 5..=11 blades.
    pub blade_count: u32,
    pub blade_rotation_rad: f64,
    /// `None` scales 32 px at 2000x1500 by the image diagonal.
    pub max_radius_px: Option<f64>,
    pub highlight_gain: f64,
    pub highlight_knee: f64,
    pub layer_count: usize,
    pub focus_ref: FocusRef,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            blade_count: 0,
            blade_rotation_rad: 0.0,
            max_radius_px: None,
            highlight_gain: 4.0,
            highlight_knee: 0.9,
            layer_count: 8,
            focus_ref: FocusRef::Median,
        }
    }
}

impl RenderConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RenderConfig =
            serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.blade_count != 0 && !(5..=11).contains(&self.blade_count) {
            return Err(Error::InvalidBladeCount(self.blade_count));
        }
        if !(1..=64).contains(&self.layer_count) {
            return Err(Error::InvalidConfig(format!(
                "layer_count must lie in [1, 64], got {}",
                self.layer_count
            )));
        }
        check_highlight(self.highlight_gain, self.highlight_knee)?;
        if let Some(r) = self.max_radius_px {
            if !(r >= 0.0) || !r.is_finite() {
                return Err(Error::non_positive("max_radius_px", r));
            }
        }
        if let FocusRef::Distance(d) = self.focus_ref {
            if !(d >= 0.0) || !d.is_finite() {
                return Err(Error::InvalidConfig(format!("focus_ref must be >= 0, got {d}")));
            }
        }
        Ok(())
    }
}

fn check_highlight(gain: f64, knee: f64) -> Result<()> {
    if !(0.0..1.0).contains(&knee) {
        return Err(Error::InvalidKnee(knee));
    }
    if !(gain >= 1.0) || !gain.is_finite() {
        return Err(Error::InvalidGain(gain));
    }
    Ok(())
}

#[inline]
fn boost(v: f64, gain: f64, knee: f64) -> f64 {
    if v > knee {
        knee + (v - knee) * gain
    } else {
        v
    }
}

#[inline]
fn unboost(v: f64, gain: f64, knee: f64) -> f64 {
    if v > knee {
        knee + (v - knee) / gain
    } else {
        v
    }
}

/// Stretches values above `knee` by `gain`. Output may exceed one.
pub fn highlight_boost(img: &RasterImage, gain: f64, knee: f64) -> Result<RasterImage> {
    check_highlight(gain, knee)?;
    Ok(img.map(|v| boost(f64::from(v), gain, knee) as f32))
}

/// Inverse of [`highlight_boost`].
pub fn highlight_unboost(img: &RasterImage, gain: f64, knee: f64) -> Result<RasterImage> {
    check_highlight(gain, knee)?;
    Ok(img.map(|v| unboost(f64::from(v), gain, knee) as f32))
}

/// Blur radius to add on top of the defocus already present in the f/22 input.
///
/// Defocus blur scales with `1 / f`, so the input already carries `f / 22` of
/// the target radius; the remainder adds in quadrature. Zero for `f >= 22`.
pub fn effective_radius_map(
    depth: &DepthMap,
    target_f_number: f64,
    focus_depth: f64,
    max_radius_px: f64,
) -> Result<RadiusMap> {
    let focus = FocusRef::Distance(focus_depth);
    let target = coc_to_radius_px(&coc_map(depth, target_f_number, focus)?, target_f_number, max_radius_px)?;
    let ratio = target_f_number / REFERENCE_F_NUMBER;
    let residual = (1.0 - ratio * ratio).max(0.0).sqrt();
    let data = target.data.iter().map(|&t| t * residual).collect();
    Ok(RadiusMap { data, ..target })
}

/// Equal-population buckets of `distances`; layer 0 is nearest the focal plane.
/// Equal distances always share a layer.
pub fn assign_layers(distances: &[f64], layer_count: usize) -> Vec<usize> {
    let layer_count = layer_count.max(1);
    let mut sorted = distances.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let thresholds: Vec<f64> = (1..layer_count).map(|k| sorted[k * n / layer_count]).collect();
    distances
        .iter()
        .map(|&d| thresholds.partition_point(|&t| t < d))
        .collect()
}

struct KernelBank {
    kernels: Vec<PsfKernel>,
    index: Vec<u32>,
}

impl KernelBank {
    fn build(radii: &[f64], blade_count: u32, rotation: f64, exec: Exec) -> Result<Self> {
        let pixel_keys: Vec<u32> = radii
            .iter()
            .map(|&r| (r * RADIUS_STEPS_PER_PX).round() as u32)
            .collect();
        let ordered: Vec<u32> = pixel_keys.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
        let kernels = exec
            .map_range(ordered.len(), |i| {
                make_psf(f64::from(ordered[i]) / RADIUS_STEPS_PER_PX, blade_count, rotation)
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        let index = pixel_keys
            .iter()
            .map(|k| ordered.binary_search(k).expect("key present") as u32)
            .collect();
        Ok(Self { kernels, index })
    }
}

struct Layer {
    /// Source pixels of this layer per image row: `(x, kernel id)`.
    rows: Vec<Vec<(u32, u32)>>,
    reach: usize,
}

/// Layered scatter-composite in linear light. `radii` and `layers` are per
/// pixel; the result is renormalized by coverage but not clamped.
pub fn render_layered(
    linear: &RasterImage,
    radii: &[f64],
    layers: &[usize],
    blade_count: u32,
    blade_rotation_rad: f64,
    exec: Exec,
) -> Result<RasterImage> {
    let (w, h, c) = (linear.width(), linear.height(), linear.channels());
    if radii.len() != w * h || layers.len() != w * h {
        return Err(Error::DimensionMismatch(format!(
            "radius/layer maps must have {} entries",
            w * h
        )));
    }
    let bank = KernelBank::build(radii, blade_count, blade_rotation_rad, exec)?;
    let layer_count = layers.iter().copied().max().unwrap_or(0) + 1;
    let mut stack: Vec<Layer> = (0..layer_count)
        .map(|_| Layer {
            rows: vec![Vec::new(); h],
            reach: 0,
        })
        .collect();
    for (i, &l) in layers.iter().enumerate() {
        let (x, y) = (i % w, i / w);
        let k = bank.index[i];
        let layer = &mut stack[l];
        layer.rows[y].push((x as u32, k));
        layer.reach = layer.reach.max(bank.kernels[k as usize].half());
    }

    let src = linear.data();
    let mut out = vec![0f32; w * h * c];
    exec.for_each_chunk_mut(&mut out, w * c, |y, out_row| {
        let stride = c + 1;
        let mut color = vec![0f64; w * c];
        let mut alpha_total = vec![0f64; w];
        let mut acc = vec![0f64; w * stride];
        for layer in stack.iter().rev() {
            let lo = y.saturating_sub(layer.reach);
            let hi = (y + layer.reach).min(h - 1);
            if (lo..=hi).all(|sy| layer.rows[sy].is_empty()) {
                continue;
            }
            acc.fill(0.0);
            for sy in lo..=hi {
                let dy = y as isize - sy as isize;
                for &(sx, ki) in &layer.rows[sy] {
                    let kernel = &bank.kernels[ki as usize];
                    let half = kernel.half() as isize;
                    if dy.abs() > half {
                        continue;
                    }
                    let krow = kernel.row(dy);
                    let sx = sx as isize;
                    let pix = &src[(sy * w + sx as usize) * c..][..c];
                    let x0 = (sx - half).max(0);
                    let x1 = (sx + half).min(w as isize - 1);
                    for x in x0..=x1 {
                        let wgt = krow[(x - sx + half) as usize];
                        if wgt == 0.0 {
                            continue;
                        }
                        let a = &mut acc[x as usize * stride..][..stride];
                        for ch in 0..c {
                            a[ch] += f64::from(pix[ch]) * wgt;
                        }
                        a[c] += wgt;
                    }
                }
            }
            for x in 0..w {
                let a = &acc[x * stride..][..stride];
                let cov = a[c];
                if cov <= 0.0 {
                    continue;
                }
                let alpha = cov.min(1.0);
                let norm = if cov > 1.0 { 1.0 / cov } else { 1.0 };
                for ch in 0..c {
                    let o = &mut color[x * c + ch];
                    *o = a[ch] * norm + (1.0 - alpha) * *o;
                }
                alpha_total[x] = alpha + (1.0 - alpha) * alpha_total[x];
            }
        }
        for x in 0..w {
            let at = alpha_total[x];
            for ch in 0..c {
                let v = color[x * c + ch];
                out_row[x * c + ch] = if at > 0.0 { (v / at) as f32 } else { 0.0 };
            }
        }
    });
    RasterImage::new(w, h, c, out)
}

/// Renders the bokeh of `target` from an all-in-focus f/22 capture and its depth.
///
/// `img` holds sRGB-encoded values as loaded from disk. The focus depth is
/// `cfg.focus_ref` when it is an explicit distance, else
/// `target.focus_distance_m` when present, else the median depth.
pub fn render_bokeh(
    img: &RasterImage,
    depth: &DepthMap,
    target: &ApertureSetting,
    cfg: &RenderConfig,
) -> Result<RasterImage> {
    render_bokeh_with(img, depth, target, cfg, Exec::default())
}

pub fn render_bokeh_with(
    img: &RasterImage,
    depth: &DepthMap,
    target: &ApertureSetting,
    cfg: &RenderConfig,
    exec: Exec,
) -> Result<RasterImage> {
    depth.check_matches(img)?;
    if !(target.f_number > 0.0) {
        return Err(Error::non_positive("f_number", target.f_number));
    }
    cfg.validate()?;

    let focus = match (cfg.focus_ref, target.focus_distance_m) {
        (FocusRef::Distance(d), _) => FocusRef::Distance(d),
        (FocusRef::Median, Some(d)) => FocusRef::Distance(d),
        (FocusRef::Median, None) => FocusRef::Median,
    };
    let focus_depth = focus.resolve(depth);
    let max_radius = cfg
        .max_radius_px
        .unwrap_or_else(|| default_max_radius_px(img.width(), img.height()));
    let radii = effective_radius_map(depth, target.f_number, focus_depth, max_radius)?;

    let distances: Vec<f64> = depth
        .data()
        .iter()
        .map(|&d| (f64::from(d) - focus_depth).abs())
        .collect();
    let layers = assign_layers(&distances, cfg.layer_count);

    let (gain, knee) = (cfg.highlight_gain, cfg.highlight_knee);
    let linear = img.map(|v| boost(srgb_to_linear(f64::from(v.clamp(0.0, 1.0))), gain, knee) as f32);
    let blurred = render_layered(
        &linear,
        &radii.data,
        &layers,
        cfg.blade_count,
        cfg.blade_rotation_rad,
        exec,
    )?;
    Ok(blurred.map(|v| {
        let lin = unboost(f64::from(v), gain, knee).clamp(0.0, 1.0);
        linear_to_srgb(lin).clamp(0.0, 1.0) as f32
    }))
}

/// Per-pixel weight of the sharp prediction, 1 meaning fully in focus.
#[derive(Clone, Debug, PartialEq)]
pub struct FocusWeights {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

/// `w = clip(1 - CoC / threshold, 0, 1)`.
pub fn focus_weights_from_coc(coc: &CoCMap, sharp_threshold: f64) -> Result<FocusWeights> {
    if !(sharp_threshold > 0.0 && sharp_threshold < 1.0) {
        return Err(Error::InvalidThreshold(sharp_threshold));
    }
    Ok(FocusWeights {
        width: coc.width,
        height: coc.height,
        data: coc
            .data
            .iter()
            .map(|&v| (1.0 - v / sharp_threshold).clamp(0.0, 1.0))
            .collect(),
    })
}

/// `coarse + residual * (1 - w)` without the final clamp.
pub fn compose_refinement_unclamped(
    coarse: &RasterImage,
    residual: &RasterImage,
    w: &FocusWeights,
) -> Result<RasterImage> {
    coarse.check_same_shape(residual, "refinement residual")?;
    if w.width != coarse.width() || w.height != coarse.height() {
        return Err(Error::DimensionMismatch(format!(
            "focus weights {}x{} vs image {}x{}",
            w.width,
            w.height,
            coarse.width(),
            coarse.height()
        )));
    }
    let c = coarse.channels();
    let data = coarse
        .data()
        .iter()
        .zip(residual.data())
        .enumerate()
        .map(|(i, (&a, &r))| (f64::from(a) + f64::from(r) * (1.0 - w.data[i / c])) as f32)
        .collect();
    RasterImage::new(coarse.width(), coarse.height(), c, data)
}

/// Refinement composition `coarse + residual * (1 - w)`, clamped to `[0, 1]`.
pub fn compose_refinement(
    coarse: &RasterImage,
    residual: &RasterImage,
    w: &FocusWeights,
) -> Result<RasterImage> {
    Ok(compose_refinement_unclamped(coarse, residual, w)?.clamped())
}
