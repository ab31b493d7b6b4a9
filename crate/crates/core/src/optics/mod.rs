//! Spectral point spread functions and aberrated image formation.
//!
//! A [`PsfStack`] holds one shift-invariant kernel per band. Formation
//! convolves every band with its own kernel and then projects through the
//! camera response, so wavelength-dependent blur leaves spectral structure
//! in the RGB image that plain projection discards.

mod convolve;
mod generators;
mod psf_io;

pub use convolve::{convolve_band, convolve_band_with, ConvMethod, Padding, Plane, DIRECT_MAX_KERNEL};
pub use generators::{
    gen_chromatic, gen_grating, gen_rotation, ChromaticParams, EncodingKind, EncodingSpec, GratingParams,
    RotationParams, DEFAULT_PSF_SIZE,
};
pub use psf_io::{decode_psf, encode_psf, read_psf, write_psf, PSF_MAGIC};

use rayon::prelude::*;

use crate::colorimetry::{check_grid, project_planes};
use crate::cube::{RgbImage, SpectralCube, Srf};
use crate::error::{validation, Result};

/// Tolerance on per-kernel energy normalization.
pub const KERNEL_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct PsfStack {
    wavelengths: Vec<f64>,
    kernel_height: usize,
    kernel_width: usize,
    kernels: Vec<f64>,
    padding: Padding,
}

impl PsfStack {
    /// `kernels` holds `wavelengths.len()` row-major kernels back to back.
    pub fn new(
        wavelengths: Vec<f64>,
        kernel_height: usize,
        kernel_width: usize,
        kernels: Vec<f64>,
        padding: Padding,
    ) -> Result<Self> {
        convolve::check_kernel(kernel_height, kernel_width)?;
        if wavelengths.is_empty() {
            return Err(validation("PSF stack needs at least one band"));
        }
        if wavelengths.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(validation("PSF wavelengths must be strictly increasing"));
        }
        let size = kernel_height * kernel_width;
        if kernels.len() != size * wavelengths.len() {
            return Err(validation(format!(
                "PSF data length {} does not match {} kernels of {kernel_height}x{kernel_width}",
                kernels.len(),
                wavelengths.len()
            )));
        }
        for (k, kernel) in kernels.chunks_exact(size).enumerate() {
            if kernel.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(validation(format!(
                    "PSF kernel {k} has negative or non-finite entries"
                )));
            }
            let sum: f64 = kernel.iter().sum();
            if (sum - 1.0).abs() > KERNEL_SUM_TOLERANCE {
                return Err(validation(format!("PSF kernel {k} sums to {sum}, expected 1")));
            }
        }
        Ok(Self {
            wavelengths,
            kernel_height,
            kernel_width,
            kernels,
            padding,
        })
    }

    /// Centered unit impulses: formation through this stack is plain projection.
    pub fn delta(wavelengths: Vec<f64>, size: usize, padding: Padding) -> Result<Self> {
        convolve::check_kernel(size, size)?;
        let mut kernel = vec![0.0; size * size];
        kernel[size * size / 2] = 1.0;
        let kernels = kernel.repeat(wavelengths.len());
        Self::new(wavelengths, size, size, kernels, padding)
    }

    pub fn bands(&self) -> usize {
        self.wavelengths.len()
    }

    pub fn wavelengths(&self) -> &[f64] {
        &self.wavelengths
    }

    pub fn kernel_height(&self) -> usize {
        self.kernel_height
    }

    pub fn kernel_width(&self) -> usize {
        self.kernel_width
    }

    pub fn padding(&self) -> Padding {
        self.padding
    }

    pub fn with_padding(mut self, padding: Padding) -> Self {
        self.padding = padding;
        self
    }

    pub fn kernel_data(&self) -> &[f64] {
        &self.kernels
    }

    pub fn kernel(&self, k: usize) -> Plane {
        let size = self.kernel_height * self.kernel_width;
        Plane {
            height: self.kernel_height,
            width: self.kernel_width,
            data: self.kernels[k * size..(k + 1) * size].to_vec(),
        }
    }
}

/// Convolves every band with its kernel, returning band-major planes.
pub fn blur_cube(cube: &SpectralCube, psf: &PsfStack) -> Result<Vec<f64>> {
    if psf.bands() != cube.bands() {
        return Err(validation(format!(
            "PSF stack has {} bands but cube has {}",
            psf.bands(),
            cube.bands()
        )));
    }
    if psf
        .wavelengths()
        .iter()
        .zip(cube.wavelengths())
        .any(|(a, b)| (a - b).abs() > 1e-3)
    {
        return Err(validation("PSF and cube wavelength grids differ"));
    }
    if psf.kernel_height() > cube.height() || psf.kernel_width() > cube.width() {
        return Err(validation(format!(
            "kernel {}x{} larger than image {}x{}",
            psf.kernel_height(),
            psf.kernel_width(),
            cube.height(),
            cube.width()
        )));
    }
    let planes: Vec<Plane> = (0..cube.bands())
        .into_par_iter()
        .map(|k| {
            let band = Plane {
                height: cube.height(),
                width: cube.width(),
                data: cube.band(k).to_vec(),
            };
            convolve_band(&band, &psf.kernel(k), psf.padding())
        })
        .collect::<Result<_>>()?;
    Ok(planes.into_iter().flat_map(|p| p.data).collect())
}

/// Aberrated RGB formation: per-band convolution followed by projection.
pub fn form_aberrated(cube: &SpectralCube, psf: &PsfStack, srf: &Srf) -> Result<RgbImage> {
    check_grid(cube, srf)?;
    let blurred = blur_cube(cube, psf)?;
    RgbImage::new(cube.height(), cube.width(), project_planes(&blurred, cube.pixels(), srf))
}

/// Forms RGB through `psf` when given, otherwise by plain projection.
pub fn form(cube: &SpectralCube, psf: Option<&PsfStack>, srf: &Srf) -> Result<RgbImage> {
    match psf {
        Some(psf) => form_aberrated(cube, psf, srf),
        None => crate::colorimetry::project(cube, srf),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::colorimetry::project;
    use crate::cube::default_wavelengths;
    use crate::error::Error;

    fn pseudo_cube(h: usize, w: usize, wl: Vec<f64>) -> SpectralCube {
        SpectralCube::from_fn(h, w, wl, |k, y, x| {
            (((k * 131 + y * 71 + x * 29) % 97) as f64) / 97.0
        })
        .unwrap()
    }

    #[test]
    fn delta_stack_equals_projection() {
        let wl = default_wavelengths();
        let cube = pseudo_cube(9, 7, wl.clone());
        let srf = Srf::gaussian_rgb(&wl).unwrap();
        let psf = PsfStack::delta(wl, 5, Padding::Reflect).unwrap();
        let a = form_aberrated(&cube, &psf, &srf).unwrap();
        let b = project(&cube, &srf).unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).abs() <= 1e-9);
        }
    }

    #[test]
    fn constant_cube_is_blur_invariant_under_circular_padding() {
        let wl = default_wavelengths();
        let cube = SpectralCube::filled(12, 12, wl.clone(), 0.37).unwrap();
        let srf = Srf::gaussian_rgb(&wl).unwrap();
        let psf = gen_chromatic(&wl, &ChromaticParams::default(), 11)
            .unwrap()
            .with_padding(Padding::Circular);
        let a = form_aberrated(&cube, &psf, &srf).unwrap();
        let b = project(&cube, &srf).unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).abs() <= 1e-9);
        }
    }

    #[test]
    fn stack_validation() {
        let wl = vec![500.0, 600.0];
        assert!(matches!(
            PsfStack::new(wl.clone(), 3, 3, vec![0.1; 18], Padding::Reflect),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            PsfStack::new(wl.clone(), 2, 2, vec![0.25; 8], Padding::Reflect),
            Err(Error::Validation(_))
        ));
        let mut neg = vec![0.0; 18];
        neg[4] = 1.5;
        neg[0] = -0.5;
        neg[13] = 1.0;
        assert!(matches!(
            PsfStack::new(wl, 3, 3, neg, Padding::Reflect),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn band_mismatch_and_oversized_kernel() {
        let wl = default_wavelengths();
        let cube = pseudo_cube(6, 6, wl.clone());
        let srf = Srf::gaussian_rgb(&wl).unwrap();
        let short = PsfStack::delta(wl[..30].to_vec(), 3, Padding::Reflect).unwrap();
        assert!(matches!(form_aberrated(&cube, &short, &srf), Err(Error::Validation(_))));
        let big = PsfStack::delta(wl, 7, Padding::Reflect).unwrap();
        assert!(matches!(form_aberrated(&cube, &big, &srf), Err(Error::Validation(_))));
    }
}
