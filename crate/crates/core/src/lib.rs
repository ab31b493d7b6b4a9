//! Optics-aware spectral data layer.
//!
//! `specforge` turns hyperspectral datacubes into RGB measurements and back
//! into evaluation numbers:
//!
//! - [`colorimetry`]: linear spectrum-to-RGB projection and quantization.
//! - [`optics`]: per-band PSF stacks, parametric spectral encodings
//!   (chromatic aberration, grating, rotating blur) and aberrated formation.
//! - [`metamer`]: metameric black decomposition, metamer generation with
//!   clipping statistics, and metamer separability under a given optics.
//! - [`degrade`]: Poisson shot noise, quantization and an external codec hook.
//! - [`metrics`]: MRAE, RMSE, band-averaged PSNR, SAM and L1.
//! - [`pipeline`]: deterministic splits, patches, augmentation and dataset
//!   synthesis.
//! - [`oracle`]: dense reference implementations used for verification.
//!
//! Cubes are stored on disk in the HSC container, PSF stacks in the PSF
//! container, camera responses as CSV and RGB images as PNG; see [`io`].

pub mod colorimetry;
pub mod cube;
pub mod degrade;
pub mod error;
pub mod io;
pub mod metamer;
pub mod metrics;
pub mod optics;
pub mod oracle;
pub mod pipeline;
pub mod seed;

pub use cube::{default_wavelengths, Planar, RgbImage, SpectralCube, Srf};
pub use error::{Error, Result};

/// Container format versions written by this crate.
pub const FORMAT_VERSIONS: &str = "HSC1, PSF1";
