//! Datacube, RGB image and spectral response data model.
//!
//! Both image types use planar storage: a cube holds `bands` planes of
//! `height * width` samples (row-major within a plane), an RGB image holds
//! three such planes in R, G, B order. Values are kept in `f64` in memory;
//! the on-disk containers in [`crate::io`] store `f32`.

use crate::error::{validation, Result};

/// Default band centers: 400 nm to 700 nm in 10 nm steps (31 bands).
pub fn default_wavelengths() -> Vec<f64> {
    (0..31).map(|i| 400.0 + 10.0 * i as f64).collect()
}

fn check_wavelengths(wavelengths: &[f64]) -> Result<()> {
    if wavelengths.iter().any(|w| !w.is_finite()) {
        return Err(validation("wavelengths must be finite"));
    }
    if wavelengths.windows(2).any(|w| w[1] <= w[0]) {
        return Err(validation("wavelengths must be strictly increasing"));
    }
    Ok(())
}

/// Read access to planar image data, shared by cubes and RGB images so the
/// metrics have a single definition for both.
pub trait Planar {
    fn planes(&self) -> usize;
    fn height(&self) -> usize;
    fn width(&self) -> usize;
    fn samples(&self) -> &[f64];

    fn plane_len(&self) -> usize {
        self.height() * self.width()
    }

    fn plane(&self, index: usize) -> &[f64] {
        let len = self.plane_len();
        &self.samples()[index * len..(index + 1) * len]
    }
}

/// An `height x width x bands` radiance datacube.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCube {
    height: usize,
    width: usize,
    wavelengths: Vec<f64>,
    data: Vec<f64>,
    normalized: bool,
}

impl SpectralCube {
    /// Builds a cube from band-major planar data.
    ///
    /// A `normalized` cube must hold values in `[0, 1]`; intermediate products
    /// such as metameric blacks are built with `normalized = false` and may be
    /// negative. All values must be finite either way.
    pub fn new(
        height: usize,
        width: usize,
        wavelengths: Vec<f64>,
        data: Vec<f64>,
        normalized: bool,
    ) -> Result<Self> {
        let cube = Self {
            height,
            width,
            wavelengths,
            data,
            normalized,
        };
        cube.validate()?;
        Ok(cube)
    }

    /// Like [`SpectralCube::new`] but sets the normalized flag from the data.
    pub fn with_auto_flag(
        height: usize,
        width: usize,
        wavelengths: Vec<f64>,
        data: Vec<f64>,
    ) -> Result<Self> {
        let normalized = data.iter().all(|v| (0.0..=1.0).contains(v));
        Self::new(height, width, wavelengths, data, normalized)
    }

    pub fn filled(height: usize, width: usize, wavelengths: Vec<f64>, value: f64) -> Result<Self> {
        let len = height * width * wavelengths.len();
        Self::with_auto_flag(height, width, wavelengths, vec![value; len])
    }

    /// Builds a cube by evaluating `f(band, y, x)` for every sample.
    pub fn from_fn(
        height: usize,
        width: usize,
        wavelengths: Vec<f64>,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let bands = wavelengths.len();
        let mut data = Vec::with_capacity(height * width * bands);
        for k in 0..bands {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(k, y, x));
                }
            }
        }
        Self::with_auto_flag(height, width, wavelengths, data)
    }

    pub fn validate(&self) -> Result<()> {
        if self.wavelengths.is_empty() {
            return Err(validation("cube must have at least one band"));
        }
        check_wavelengths(&self.wavelengths)?;
        let expected = self.height * self.width * self.wavelengths.len();
        if self.data.len() != expected {
            return Err(validation(format!(
                "cube data length {} does not match {}x{}x{} = {expected}",
                self.data.len(),
                self.height,
                self.width,
                self.wavelengths.len()
            )));
        }
        if let Some(i) = self.data.iter().position(|v| !v.is_finite()) {
            return Err(validation(format!("cube sample {i} is not finite")));
        }
        if self.normalized {
            if let Some(i) = self.data.iter().position(|v| !(0.0..=1.0).contains(v)) {
                return Err(validation(format!(
                    "normalized cube sample {i} = {} outside [0, 1]",
                    self.data[i]
                )));
            }
        }
        Ok(())
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bands(&self) -> usize {
        self.wavelengths.len()
    }

    pub fn wavelengths(&self) -> &[f64] {
        &self.wavelengths
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn band(&self, k: usize) -> &[f64] {
        self.plane(k)
    }

    pub fn get(&self, k: usize, y: usize, x: usize) -> f64 {
        self.data[(k * self.height + y) * self.width + x]
    }

    /// Copies the spectrum of pixel `p` (row-major pixel index).
    pub fn spectrum(&self, p: usize) -> Vec<f64> {
        let n = self.pixels();
        (0..self.bands()).map(|k| self.data[k * n + p]).collect()
    }

    pub fn same_shape(&self, other: &SpectralCube) -> bool {
        self.height == other.height && self.width == other.width && self.bands() == other.bands()
    }
}

impl Planar for SpectralCube {
    fn planes(&self) -> usize {
        self.bands()
    }
    fn height(&self) -> usize {
        self.height
    }
    fn width(&self) -> usize {
        self.width
    }
    fn samples(&self) -> &[f64] {
        &self.data
    }
}

/// A three-channel planar color image.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl RgbImage {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width * 3 {
            return Err(validation(format!(
                "rgb data length {} does not match {height}x{width}x3",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(validation(format!("rgb sample {i} is not finite")));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(height, width, vec![value; height * width * 3])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        self.plane(c)
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    /// Applies `f` to every sample; the result must stay finite.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<RgbImage> {
        RgbImage::new(self.height, self.width, self.data.iter().map(|&v| f(v)).collect())
    }

    pub(crate) fn from_parts_unchecked(height: usize, width: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), height * width * 3);
        Self {
            height,
            width,
            data,
        }
    }
}

impl Planar for RgbImage {
    fn planes(&self) -> usize {
        3
    }
    fn height(&self) -> usize {
        self.height
    }
    fn width(&self) -> usize {
        self.width
    }
    fn samples(&self) -> &[f64] {
        &self.data
    }
}

/// Camera spectral response: one `[r, g, b]` row per band.
#[derive(Debug, Clone, PartialEq)]
pub struct Srf {
    wavelengths: Vec<f64>,
    q: Vec<[f64; 3]>,
}

impl Srf {
    /// Validates non-negativity and that every channel responds somewhere.
    ///
    /// Rank is not checked here; [`crate::metamer::Projector::new`] rejects
    /// rank-deficient responses where the projector needs full rank.
    pub fn new(wavelengths: Vec<f64>, q: Vec<[f64; 3]>) -> Result<Self> {
        if wavelengths.is_empty() {
            return Err(validation("SRF must have at least one band"));
        }
        if wavelengths.len() != q.len() {
            return Err(validation(format!(
                "SRF has {} wavelengths but {} response rows",
                wavelengths.len(),
                q.len()
            )));
        }
        check_wavelengths(&wavelengths)?;
        for (k, row) in q.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(validation(format!("SRF entry ({k}, {c}) is not finite")));
                }
                if v < 0.0 {
                    return Err(validation(format!("SRF entry ({k}, {c}) = {v} is negative")));
                }
            }
        }
        for c in 0..3 {
            if !q.iter().any(|row| row[c] > 0.0) {
                return Err(validation(format!("SRF channel {c} is identically zero")));
            }
        }
        Ok(Self { wavelengths, q })
    }

    /// Synthetic Gaussian R/G/B sensitivities (peaks 600/540/460 nm), used
    /// when no measured response is supplied.
    ///
    /// Each channel is scaled to sum to 1 over the grid, so a flat unit
    /// spectrum maps to RGB (1, 1, 1) and `[0, 1]` cubes stay in `[0, 1]`.
    pub fn gaussian_rgb(wavelengths: &[f64]) -> Result<Self> {
        const CHANNELS: [(f64, f64); 3] = [(600.0, 40.0), (540.0, 35.0), (460.0, 30.0)];
        let mut q: Vec<[f64; 3]> = wavelengths
            .iter()
            .map(|&w| {
                let mut row = [0.0; 3];
                for (c, (peak, width)) in CHANNELS.iter().enumerate() {
                    let z = (w - peak) / width;
                    row[c] = (-0.5 * z * z).exp();
                }
                row
            })
            .collect();
        for c in 0..3 {
            let sum: f64 = q.iter().map(|r| r[c]).sum();
            if sum > 0.0 {
                q.iter_mut().for_each(|r| r[c] /= sum);
            }
        }
        Self::new(wavelengths.to_vec(), q)
    }

    pub fn bands(&self) -> usize {
        self.wavelengths.len()
    }

    pub fn wavelengths(&self) -> &[f64] {
        &self.wavelengths
    }

    pub fn rows(&self) -> &[[f64; 3]] {
        &self.q
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        self.q.iter().map(|row| row[c]).collect()
    }

    pub fn matches(&self, wavelengths: &[f64]) -> bool {
        self.wavelengths == wavelengths
    }
}
