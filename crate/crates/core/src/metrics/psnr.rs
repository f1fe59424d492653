use crate::error::Result;
use crate::raster::RasterImage;

/// Mean squared error over all pixels and channels.
pub fn mse(a: &RasterImage, b: &RasterImage) -> Result<f64> {
    a.check_same_shape(b, "psnr")?;
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = f64::from(x) - f64::from(y);
            d * d
        })
        .sum();
    Ok(sum / a.data().len() as f64)
}

/// `10 log10(1 / MSE)` for unit dynamic range; `f64::INFINITY` when MSE is zero.
pub fn psnr(a: &RasterImage, b: &RasterImage) -> Result<f64> {
    let m = mse(a, b)?;
    Ok(if m == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * m.log10()
    })
}

/// Infinite PSNR is written as `inf`.
pub fn format_psnr(v: f64, decimals: usize) -> String {
    if v.is_infinite() && v > 0.0 {
        "inf".to_string()
    } else {
        format!("{v:.decimals$}")
    }
}

pub fn parse_psnr(s: &str) -> Option<f64> {
    let s = s.trim();
    if s.eq_ignore_ascii_case("inf") {
        Some(f64::INFINITY)
    } else {
        s.parse().ok().filter(|v: &f64| !v.is_nan())
    }
}
