//! Full-reference fidelity metrics, the LPIPS adapter contract and MOS handling.

mod lpips;
mod mos;
mod psnr;
mod ssim;

pub use lpips::{lpips_adapter, lpips_for_pairs, LpipsAdapter, LpipsPair};
pub use mos::{mos_aggregate, validate_mos, MosRecord};
pub use psnr::{format_psnr, mse, parse_psnr, psnr};
pub use ssim::{ssim, ssim_with, SSIM_WINDOW};

/// Scores for one prediction. `psnr_db` is `f64::INFINITY` for identical images.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricReport {
    pub psnr_db: f64,
    pub ssim: f64,
    pub lpips: Option<f64>,
}
