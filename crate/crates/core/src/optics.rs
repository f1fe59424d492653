//! Thin-lens aperture arithmetic, circle-of-confusion maps and PSF kernels.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{median_depth, DepthMap};

/// The all-in-focus inputs are captured at f/22; radii are normalized to it.
pub const REFERENCE_F_NUMBER: f64 = 22.0;

/// Default maximum blur radius at the 2000x1500 capture resolution.
pub const DEFAULT_MAX_RADIUS_PX: f64 = 32.0;

const REFERENCE_DIAGONAL_PX: f64 = 2500.0;

/// Where the lens is focused. In JSON: the string `"median"` or a number.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum FocusRef {
    /// Median scene depth.
    #[default]
    Median,
    /// Explicit focus depth in the depth map's units.
    Distance(f64),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum FocusRefRepr {
    Distance(f64),
    Keyword(String),
}

impl Serialize for FocusRef {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            FocusRef::Median => FocusRefRepr::Keyword("median".into()).serialize(s),
            FocusRef::Distance(d) => FocusRefRepr::Distance(d).serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for FocusRef {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match FocusRefRepr::deserialize(d)? {
            FocusRefRepr::Distance(v) => Ok(FocusRef::Distance(v)),
            FocusRefRepr::Keyword(k) if k.eq_ignore_ascii_case("median") => Ok(FocusRef::Median),
            FocusRefRepr::Keyword(k) => Err(serde::de::Error::custom(format!(
                "focus_ref must be \"median\" or a number, got {k:?}"
            ))),
        }
    }
}

impl FocusRef {
    /// Resolves the focus depth for `depth`.
    pub fn resolve(self, depth: &DepthMap) -> f64 {
        match self {
            FocusRef::Median => median_depth(depth),
            FocusRef::Distance(d) => d,
        }
    }
}

/// Aperture diameter in millimetres: focal length over f-number.
pub fn aperture_diameter_mm(focal_length_mm: f64, f_number: f64) -> Result<f64> {
    if !(focal_length_mm > 0.0) {
        return Err(Error::non_positive("focal_length_mm", focal_length_mm));
    }
    if !(f_number > 0.0) {
        return Err(Error::non_positive("f_number", f_number));
    }
    Ok(focal_length_mm / f_number)
}

/// Normalized per-pixel defocus magnitude in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoCMap {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

/// Unclipped `|D(p) - focus| / f` for every pixel.
pub fn defocus_ratio(depth: &DepthMap, f_number: f64, focus_depth: f64) -> Result<Vec<f64>> {
    if !(f_number > 0.0) {
        return Err(Error::non_positive("f_number", f_number));
    }
    Ok(depth
        .data()
        .iter()
        .map(|&d| (f64::from(d) - focus_depth).abs() / f_number)
        .collect())
}

/// `CoC(p) = clip(|D(p) - D~| / f, 0, 1)` where `D~` is the focus depth
/// (the median depth unless an explicit distance is given) and `f` the
/// target f-number.
pub fn coc_map(depth: &DepthMap, f_number: f64, focus: FocusRef) -> Result<CoCMap> {
    let focus_depth = focus.resolve(depth);
    let data = defocus_ratio(depth, f_number, focus_depth)?
        .into_iter()
        .map(|v| v.clamp(0.0, 1.0))
        .collect();
    Ok(CoCMap {
        width: depth.width(),
        height: depth.height(),
        data,
    })
}

/// Per-pixel blur radius in pixels.
#[derive(Clone, Debug, PartialEq)]
pub struct RadiusMap {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

/// `radius = max_radius * CoC * (22 / f_number)`, clamped to `[0, max_radius]`.
pub fn coc_to_radius_px(coc: &CoCMap, f_number: f64, max_radius_px: f64) -> Result<RadiusMap> {
    if !(f_number > 0.0) {
        return Err(Error::non_positive("f_number", f_number));
    }
    if !(max_radius_px >= 0.0) || !max_radius_px.is_finite() {
        return Err(Error::non_positive("max_radius_px", max_radius_px));
    }
    let scale = max_radius_px * REFERENCE_F_NUMBER / f_number;
    let data = coc
        .data
        .iter()
        .map(|&c| (scale * c).clamp(0.0, max_radius_px))
        .collect();
    Ok(RadiusMap {
        width: coc.width,
        height: coc.height,
        data,
    })
}

/// Default maximum radius scaled with the image diagonal.
pub fn default_max_radius_px(width: usize, height: usize) -> f64 {
    let diag = ((width * width + height * height) as f64).sqrt();
    DEFAULT_MAX_RADIUS_PX * diag / REFERENCE_DIAGONAL_PX
}

/// Aperture-shaped point spread function on a `(2*half + 1)^2` grid, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct PsfKernel {
    pub radius_px: f64,
    pub blade_count: u32,
    pub rotation_rad: f64,
    half: usize,
    weights: Vec<f64>,
}

impl PsfKernel {
    pub fn identity() -> Self {
        Self {
            radius_px: 0.0,
            blade_count: 0,
            rotation_rad: 0.0,
            half: 0,
            weights: vec![1.0],
        }
    }

    /// Half-width of the grid; the kernel spans `-half..=half` in both axes.
    #[inline]
    pub fn half(&self) -> usize {
        self.half
    }

    #[inline]
    pub fn size(&self) -> usize {
        2 * self.half + 1
    }

    #[inline]
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weight at offset `(dx, dy)` from the centre, zero outside the grid.
    pub fn at(&self, dx: isize, dy: isize) -> f64 {
        let h = self.half as isize;
        if dx.abs() > h || dy.abs() > h {
            return 0.0;
        }
        self.weights[((dy + h) as usize) * self.size() + (dx + h) as usize]
    }

    /// One kernel row, `dy` in `-half..=half`.
    #[inline]
    pub fn row(&self, dy: isize) -> &[f64] {
        let n = self.size();
        let r = (dy + self.half as isize) as usize;
        &self.weights[r * n..(r + 1) * n]
    }

    pub fn is_identity(&self) -> bool {
        self.weights.iter().enumerate().all(|(i, &w)| {
            if i == self.weights.len() / 2 {
                w == 1.0
            } else {
                w == 0.0
            }
        })
    }
}

const SUPERSAMPLE: usize = 4;
const EDGE_EPS: f64 = 1e-12;

fn aperture_contains(blades: &[(f64, f64)], radius: f64, x: f64, y: f64) -> bool {
    if blades.is_empty() {
        return x * x + y * y <= radius * radius;
    }
    let n = blades.len();
    (0..n).all(|k| {
        let (ax, ay) = blades[k];
        let (bx, by) = blades[(k + 1) % n];
        (bx - ax) * (y - ay) - (by - ay) * (x - ax) >= -EDGE_EPS
    })
}

/// Builds a disk (`blade_count == 0`) or regular `blade_count`-gon PSF of
/// circumradius `radius_px`, antialiased by 4x4 supersampling per pixel and
/// normalized to unit mass.
pub fn make_psf(radius_px: f64, blade_count: u32, rotation_rad: f64) -> Result<PsfKernel> {
    if !(radius_px >= 0.0) || !radius_px.is_finite() {
        return Err(Error::non_positive("radius_px", radius_px));
    }
    if blade_count != 0 && !(5..=11).contains(&blade_count) {
        return Err(Error::InvalidBladeCount(blade_count));
    }
    if radius_px == 0.0 {
        return Ok(PsfKernel {
            blade_count,
            rotation_rad,
            ..PsfKernel::identity()
        });
    }

    let half = radius_px.ceil() as usize;
    let size = 2 * half + 1;
    let vertices: Vec<(f64, f64)> = (0..blade_count)
        .map(|k| {
            let a = rotation_rad + 2.0 * PI * f64::from(k) / f64::from(blade_count);
            (radius_px * a.cos(), radius_px * a.sin())
        })
        .collect();

    let offsets: Vec<f64> = (0..SUPERSAMPLE)
        .map(|i| (i as f64 + 0.5) / SUPERSAMPLE as f64 - 0.5)
        .collect();
    let mut weights = vec![0.0; size * size];
    for (j, row) in weights.chunks_exact_mut(size).enumerate() {
        let cy = j as f64 - half as f64;
        for (i, w) in row.iter_mut().enumerate() {
            let cx = i as f64 - half as f64;
            let mut hits = 0u32;
            for &oy in &offsets {
                for &ox in &offsets {
                    if aperture_contains(&vertices, radius_px, cx + ox, cy + oy) {
                        hits += 1;
                    }
                }
            }
            *w = f64::from(hits);
        }
    }

    let total: f64 = weights.iter().sum();
    if total == 0.0 {
        // sub-pixel aperture: no sample falls inside, so nothing spreads
        weights[size * size / 2] = 1.0;
    } else {
        for w in &mut weights {
            *w /= total;
        }
    }
    Ok(PsfKernel {
        radius_px,
        blade_count,
        rotation_rad,
        half,
        weights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn depth(v: &[f32]) -> DepthMap {
        DepthMap::new(v.len(), 1, v.to_vec()).unwrap()
    }

    #[test]
    fn aperture_diameter() {
        assert_eq!(aperture_diameter_mm(70.0, 2.0).unwrap(), 35.0);
        assert!((aperture_diameter_mm(28.0, 22.0).unwrap() - 1.272_727_272_727).abs() < 1e-9);
        assert_eq!(aperture_diameter_mm(4.5, 4.5).unwrap(), 1.0);
        assert!(aperture_diameter_mm(0.0, 2.0).is_err());
        assert!(aperture_diameter_mm(50.0, -1.0).is_err());
    }

    #[test]
    fn coc_examples() {
        let c = coc_map(&depth(&[3.0; 5]), 2.0, FocusRef::Median).unwrap();
        assert!(c.data.iter().all(|&v| v == 0.0));
        let c = coc_map(&depth(&[10.0, 4.5, 4.0]), 2.0, FocusRef::Distance(4.0)).unwrap();
        assert_eq!(c.data, vec![1.0, 0.25, 0.0]);
        assert!(coc_map(&depth(&[1.0]), 0.0, FocusRef::Median).is_err());
    }

    #[test]
    fn radius_examples() {
        let coc = CoCMap {
            width: 3,
            height: 1,
            data: vec![0.0, 1.0, 0.5],
        };
        let r = coc_to_radius_px(&coc, 22.0, 30.0).unwrap();
        assert_eq!(r.data, vec![0.0, 30.0, 15.0]);
        let r = coc_to_radius_px(&coc, 44.0, 30.0).unwrap();
        assert_eq!(r.data, vec![0.0, 15.0, 7.5]);
        let r = coc_to_radius_px(&coc, 2.0, 30.0).unwrap();
        assert_eq!(r.data, vec![0.0, 30.0, 30.0]);
        assert!(coc_to_radius_px(&coc, 2.0, -1.0).is_err());
        assert!(coc_to_radius_px(&coc, 0.0, 1.0).is_err());
    }

    #[test]
    fn default_radius_scales_with_diagonal() {
        assert!((default_max_radius_px(2000, 1500) - 32.0).abs() < 1e-12);
        assert!((default_max_radius_px(1000, 750) - 16.0).abs() < 1e-12);
    }

    #[test]
    fn focus_ref_json() {
        let m: FocusRef = serde_json::from_str("\"median\"").unwrap();
        assert_eq!(m, FocusRef::Median);
        let d: FocusRef = serde_json::from_str("2.5").unwrap();
        assert_eq!(d, FocusRef::Distance(2.5));
        assert!(serde_json::from_str::<FocusRef>("\"middle\"").is_err());
        assert_eq!(serde_json::to_string(&FocusRef::Median).unwrap(), "\"median\"");
    }

    #[test]
    fn radius_zero_is_identity() {
        let k = make_psf(0.0, 0, 0.0).unwrap();
        assert_eq!(k.weights(), &[1.0]);
        assert!(k.is_identity());
        assert!(make_psf(0.1, 6, 0.3).unwrap().is_identity());
    }

    #[test]
    fn disk_is_normalized_and_symmetric() {
        let k = make_psf(5.0, 0, 0.0).unwrap();
        assert_eq!(k.size(), 11);
        assert!((k.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let h = k.half() as isize;
        for dy in -h..=h {
            for dx in -h..=h {
                let w = k.at(dx, dy);
                assert!((w - k.at(-dx, dy)).abs() < 1e-15);
                assert!((w - k.at(dx, -dy)).abs() < 1e-15);
                assert!((w - k.at(dy, dx)).abs() < 1e-15);
            }
        }
        // interior is uniform
        assert_eq!(k.at(0, 0), k.at(2, 1));
        assert_eq!(k.at(5, 5), 0.0);
    }

    #[test]
    fn hexagon_has_sixfold_symmetry() {
        let a = make_psf(5.0, 6, 0.0).unwrap();
        let b = make_psf(5.0, 6, PI / 3.0).unwrap();
        for (x, y) in a.weights().iter().zip(b.weights()) {
            assert!((x - y).abs() < 1e-6);
        }
        let c = make_psf(5.0, 6, PI / 6.0).unwrap();
        assert!(a.weights().iter().zip(c.weights()).any(|(x, y)| (x - y).abs() > 1e-6));
    }

    #[test]
    fn invalid_blade_counts() {
        for n in [1, 2, 3, 4, 12] {
            assert!(matches!(make_psf(3.0, n, 0.0), Err(Error::InvalidBladeCount(_))));
        }
        assert!(make_psf(-1.0, 0, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn kernel_mass_is_one(r in 0.0f64..20.0, blades in prop_oneof![Just(0u32), 5u32..=11], rot in 0.0f64..(2.0 * PI)) {
            let k = make_psf(r, blades, rot).unwrap();
            prop_assert!((k.weights().iter().sum::<f64>() - 1.0).abs() <= 1e-6);
            prop_assert!(k.weights().iter().all(|&w| w >= 0.0));
        }

        #[test]
        fn coc_is_homogeneous(scale in 0.1f64..10.0, f in 0.5f64..30.0, focus in 0.0f64..5.0,
                              v in proptest::collection::vec(0.0f32..10.0, 1..40)) {
            // scaling depth, focus and f-number together leaves |D - D~| / f unchanged
            let d = DepthMap::new(v.len(), 1, v.clone()).unwrap();
            let scaled: Vec<f32> = v.iter().map(|&x| (f64::from(x) * scale) as f32).collect();
            let ds = DepthMap::new(v.len(), 1, scaled).unwrap();
            let a = defocus_ratio(&d, f, focus).unwrap();
            let b = defocus_ratio(&ds, f * scale, focus * scale).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() <= 1e-6 * (1.0 + x.abs()));
            }
        }

        #[test]
        fn mean_coc_non_increasing_in_f(f1 in 0.5f64..30.0, df in 0.0f64..10.0,
                                         v in proptest::collection::vec(0.0f32..10.0, 1..40)) {
            let d = DepthMap::new(v.len(), 1, v).unwrap();
            let mean = |f| {
                let c = coc_map(&d, f, FocusRef::Median).unwrap();
                c.data.iter().sum::<f64>() / c.data.len() as f64
            };
            prop_assert!(mean(f1 + df) <= mean(f1) + 1e-12);
        }
    }
}
