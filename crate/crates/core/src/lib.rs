//! Aperture-controlled bokeh rendering and the numerical kernels around it.
//!
//! The crate is split by concern:
//!
//! - [`raster`]: image and depth rasters, sRGB transfer, PNG/JPEG/PFM I/O.
//! - [`optics`]: thin-lens aperture arithmetic, circle-of-confusion maps and
//!   aperture-shaped PSF kernels.
//! - [`renderer`]: the depth-layered scatter renderer and refinement composition.
//! - [`conditioning`]: aperture encodings, FiLM modulation, auxiliary maps and masking.
//! - [`metrics`]: PSNR, SSIM, the LPIPS adapter contract and MOS handling.
//! - [`inference`]: dihedral test-time augmentation, tiled processing and output averaging.
//!
//! Data-parallel loops go through [`par::Exec`]. With the `parallel` feature
//! (default) they run on rayon; without it every kernel runs sequentially.
//! Results are bit-identical in both modes.

// `!(x > 0.0)` rejects NaN together with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod conditioning;
pub mod error;
pub mod inference;
pub mod metrics;
pub mod optics;
pub mod par;
pub mod raster;
pub mod renderer;

pub use error::{Error, Result};
pub use par::Exec;
pub use raster::{ApertureSetting, DepthMap, RasterImage, Transfer};
