//! Spectrum-to-color projection and value quantization.

use crate::cube::{Planar, RgbImage, SpectralCube, Srf};
use crate::error::{validation, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum BitDepth {
    #[serde(rename = "8")]
    Eight,
    #[serde(rename = "16")]
    Sixteen,
}

impl BitDepth {
    pub fn from_bits(bits: u32) -> Result<Self> {
        match bits {
            8 => Ok(BitDepth::Eight),
            16 => Ok(BitDepth::Sixteen),
            other => Err(validation(format!("bit depth must be 8 or 16, got {other}"))),
        }
    }

    pub fn bits(self) -> u32 {
        match self {
            BitDepth::Eight => 8,
            BitDepth::Sixteen => 16,
        }
    }

    /// Largest integer code, `2^d - 1`.
    pub fn max_code(self) -> f64 {
        ((1u32 << self.bits()) - 1) as f64
    }

    pub(crate) fn bytes(self) -> usize {
        self.bits() as usize / 8
    }
}

/// Uniform quantizer; rounding is half-away-from-zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuantizationSpec {
    pub bit_depth: BitDepth,
}

impl QuantizationSpec {
    pub fn new(bit_depth: BitDepth) -> Self {
        Self { bit_depth }
    }

    pub fn quantize_value(&self, v: f64) -> f64 {
        let max = self.bit_depth.max_code();
        (v.clamp(0.0, 1.0) * max).round() / max
    }
}

/// Projects band-major planes through `srf`: `out[c][p] = sum_k planes[k][p] * q[k][c]`.
///
/// Accumulation runs over bands in ascending order for every pixel, so the
/// result does not depend on how callers partition the work.
pub(crate) fn project_planes(planes: &[f64], pixels: usize, srf: &Srf) -> Vec<f64> {
    debug_assert_eq!(planes.len(), pixels * srf.bands());
    let mut out = vec![0.0; pixels * 3];
    for (k, row) in srf.rows().iter().enumerate() {
        let band = &planes[k * pixels..(k + 1) * pixels];
        for c in 0..3 {
            let q = row[c];
            if q == 0.0 {
                continue;
            }
            let dst = &mut out[c * pixels..(c + 1) * pixels];
            for (d, &s) in dst.iter_mut().zip(band) {
                *d += s * q;
            }
        }
    }
    out
}

pub(crate) fn check_grid(cube: &SpectralCube, srf: &Srf) -> Result<()> {
    if cube.bands() != srf.bands() {
        return Err(validation(format!(
            "cube has {} bands but SRF has {}",
            cube.bands(),
            srf.bands()
        )));
    }
    if !srf.matches(cube.wavelengths()) {
        return Err(validation("cube and SRF wavelength grids differ"));
    }
    Ok(())
}

/// Linear projection of every pixel spectrum to RGB. No clamping.
pub fn project(cube: &SpectralCube, srf: &Srf) -> Result<RgbImage> {
    check_grid(cube, srf)?;
    let data = project_planes(cube.data(), cube.pixels(), srf);
    RgbImage::new(cube.height(), cube.width(), data)
}

pub fn quantize(image: &RgbImage, spec: QuantizationSpec) -> RgbImage {
    let data = image.samples().iter().map(|&v| spec.quantize_value(v)).collect();
    RgbImage::from_parts_unchecked(image.height(), image.width(), data)
}

/// Rescales each channel so its peak response is 1.
pub fn normalize_srf(srf: &Srf) -> Result<Srf> {
    let mut peaks = [0.0f64; 3];
    for row in srf.rows() {
        for c in 0..3 {
            peaks[c] = peaks[c].max(row[c]);
        }
    }
    if let Some(c) = peaks.iter().position(|&p| p <= 0.0) {
        return Err(validation(format!("SRF channel {c} is identically zero")));
    }
    let q = srf
        .rows()
        .iter()
        .map(|row| [row[0] / peaks[0], row[1] / peaks[1], row[2] / peaks[2]])
        .collect();
    Srf::new(srf.wavelengths().to_vec(), q)
}
