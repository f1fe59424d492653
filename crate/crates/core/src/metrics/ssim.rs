//! Gaussian-window SSIM.
//!
//! 11x11 window with sigma 1.5, K1 = 0.01, K2 = 0.03 and unit dynamic range.
//! Only windows lying fully inside the image contribute. Multi-channel images
//! are scored per channel and the channel scores averaged.

use crate::error::{Error, Result};
use crate::par::Exec;
use crate::raster::RasterImage;

pub const SSIM_WINDOW: usize = 11;
const SIGMA: f64 = 1.5;
const C1: f64 = 0.01 * 0.01;
const C2: f64 = 0.03 * 0.03;

fn gaussian_taps() -> [f64; SSIM_WINDOW] {
    let mut taps = [0.0; SSIM_WINDOW];
    let mid = (SSIM_WINDOW / 2) as f64;
    for (i, t) in taps.iter_mut().enumerate() {
        let d = i as f64 - mid;
        *t = (-(d * d) / (2.0 * SIGMA * SIGMA)).exp();
    }
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    taps
}

pub fn ssim(a: &RasterImage, b: &RasterImage) -> Result<f64> {
    ssim_with(a, b, Exec::default())
}

pub fn ssim_with(a: &RasterImage, b: &RasterImage, exec: Exec) -> Result<f64> {
    a.check_same_shape(b, "ssim")?;
    let (w, h, c) = (a.width(), a.height(), a.channels());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::ImageTooSmall { width: w, height: h });
    }
    let taps = gaussian_taps();
    let (ow, oh) = (w - SSIM_WINDOW + 1, h - SSIM_WINDOW + 1);

    let mut total = 0.0;
    for ch in 0..c {
        let x: Vec<f64> = a.data().iter().skip(ch).step_by(c).map(|&v| f64::from(v)).collect();
        let y: Vec<f64> = b.data().iter().skip(ch).step_by(c).map(|&v| f64::from(v)).collect();

        // horizontal pass of the five moment images, valid columns only
        let rows: Vec<[Vec<f64>; 5]> = exec.map_range(h, |r| {
            let mut m: [Vec<f64>; 5] = Default::default();
            for v in &mut m {
                v.reserve_exact(ow);
            }
            let xr = &x[r * w..(r + 1) * w];
            let yr = &y[r * w..(r + 1) * w];
            for col in 0..ow {
                let mut s = [0.0; 5];
                for (k, &t) in taps.iter().enumerate() {
                    let (p, q) = (xr[col + k], yr[col + k]);
                    s[0] += t * p;
                    s[1] += t * q;
                    s[2] += t * p * p;
                    s[3] += t * q * q;
                    s[4] += t * p * q;
                }
                for (v, s) in m.iter_mut().zip(s) {
                    v.push(s);
                }
            }
            m
        });

        // vertical pass and the per-window SSIM, summed per output row
        let row_sums: Vec<f64> = exec.map_range(oh, |r| {
            let mut acc = 0.0;
            for col in 0..ow {
                let mut s = [0.0; 5];
                for (k, &t) in taps.iter().enumerate() {
                    let row = &rows[r + k];
                    for (j, sj) in s.iter_mut().enumerate() {
                        *sj += t * row[j][col];
                    }
                }
                acc += window_ssim(s);
            }
            acc
        });
        total += row_sums.iter().sum::<f64>() / (ow * oh) as f64;
    }
    Ok(total / c as f64)
}

#[inline]
fn window_ssim([mx, my, exx, eyy, exy]: [f64; 5]) -> f64 {
    let vx = exx - mx * mx;
    let vy = eyy - my * my;
    let cov = exy - mx * my;
    ((2.0 * mx * my + C1) * (2.0 * cov + C2)) / ((mx * mx + my * my + C1) * (vx + vy + C2))
}
