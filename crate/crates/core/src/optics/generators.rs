//! Parametric PSF families for the spectral encodings: lateral chromatic
//! aberration with wavelength-dependent defocus, a two-order grating, and a
//! rotating anisotropic blur.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{convolve::check_kernel, Padding, PsfStack};
use crate::error::{validation, Result};

/// Kernel support used when none is specified (on-axis, 21x21).
pub const DEFAULT_PSF_SIZE: usize = 21;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChromaticParams {
    /// Blur sigma at the reference wavelength, px.
    pub sigma0: f64,
    /// Sigma growth per nm away from the reference, px/nm.
    pub sigma_slope: f64,
    /// Lateral x shift per nm relative to the reference, px/nm.
    pub shift_slope: f64,
    pub ref_lambda: f64,
}

impl Default for ChromaticParams {
    fn default() -> Self {
        Self {
            sigma0: 1.0,
            sigma_slope: 0.01,
            shift_slope: 0.01,
            ref_lambda: 550.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GratingParams {
    /// Energy fraction sent to the first diffraction order.
    pub eta: f64,
    /// First-order x displacement per nm relative to the reference, px/nm.
    pub disp_slope: f64,
    pub ref_lambda: f64,
}

impl Default for GratingParams {
    fn default() -> Self {
        Self {
            eta: 0.5,
            disp_slope: 0.02,
            ref_lambda: 550.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationParams {
    pub sigma_major: f64,
    pub sigma_minor: f64,
    /// Total rotation of the major axis from the first to the last band, rad.
    pub angle_span: f64,
}

impl Default for RotationParams {
    fn default() -> Self {
        Self {
            sigma_major: 3.0,
            sigma_minor: 1.0,
            angle_span: PI / 2.0,
        }
    }
}

fn check_size(size: usize, max_sigma: f64) -> Result<usize> {
    check_kernel(size, size)?;
    if (size as f64) < 4.0 * max_sigma {
        return Err(validation(format!(
            "kernel size {size} is smaller than 4 sigma ({:.3})",
            4.0 * max_sigma
        )));
    }
    Ok(size / 2)
}

fn normalize(kernel: &mut [f64]) {
    let sum: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|v| *v /= sum);
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(validation(format!("{name} must be finite")))
    }
}

/// Isotropic Gaussians whose width grows and whose center drifts along x
/// with distance from the reference wavelength.
pub fn gen_chromatic(wavelengths: &[f64], p: &ChromaticParams, size: usize) -> Result<PsfStack> {
    for (n, v) in [
        ("sigma0", p.sigma0),
        ("sigma_slope", p.sigma_slope),
        ("shift_slope", p.shift_slope),
        ("ref_lambda", p.ref_lambda),
    ] {
        finite(n, v)?;
    }
    if p.sigma0 <= 0.0 {
        return Err(validation("sigma0 must be positive"));
    }
    let sigmas: Vec<f64> = wavelengths
        .iter()
        .map(|w| p.sigma0 + p.sigma_slope * (w - p.ref_lambda).abs())
        .collect();
    if sigmas.iter().any(|&s| s <= 0.0) {
        return Err(validation("sigma must stay positive over the band range"));
    }
    let max_sigma = sigmas.iter().cloned().fold(0.0, f64::max);
    let r = check_size(size, max_sigma)?;
    let shifts: Vec<f64> = wavelengths
        .iter()
        .map(|w| p.shift_slope * (w - p.ref_lambda))
        .collect();
    if let Some(s) = shifts.iter().find(|s| s.abs() > r as f64) {
        return Err(validation(format!(
            "lateral shift {s:.3} px exceeds kernel radius {r}"
        )));
    }
    let mut kernels = Vec::with_capacity(wavelengths.len() * size * size);
    for (&sigma, &shift) in sigmas.iter().zip(&shifts) {
        let mut k = Vec::with_capacity(size * size);
        let denom = 2.0 * sigma * sigma;
        for y in 0..size {
            let dy = y as f64 - r as f64;
            for x in 0..size {
                let dx = x as f64 - r as f64 - shift;
                k.push((-(dx * dx + dy * dy) / denom).exp());
            }
        }
        normalize(&mut k);
        kernels.extend(k);
    }
    PsfStack::new(wavelengths.to_vec(), size, size, kernels, Padding::default())
}

/// Zeroth order at the center plus a first order displaced along x,
/// bilinearly split between the two nearest columns.
pub fn gen_grating(wavelengths: &[f64], p: &GratingParams, size: usize) -> Result<PsfStack> {
    for (n, v) in [
        ("eta", p.eta),
        ("disp_slope", p.disp_slope),
        ("ref_lambda", p.ref_lambda),
    ] {
        finite(n, v)?;
    }
    if !(0.0..=1.0).contains(&p.eta) {
        return Err(validation(format!("eta {} outside [0, 1]", p.eta)));
    }
    check_kernel(size, size)?;
    let r = (size / 2) as isize;
    let mut kernels = Vec::with_capacity(wavelengths.len() * size * size);
    for &w in wavelengths {
        let d = p.disp_slope * (w - p.ref_lambda);
        if d.abs().ceil() > r as f64 {
            return Err(validation(format!(
                "first-order displacement {d:.3} px exceeds kernel radius {r}"
            )));
        }
        let mut k = vec![0.0; size * size];
        let row = r as usize * size;
        k[row + r as usize] += 1.0 - p.eta;
        let x0 = d.floor();
        let frac = d - x0;
        let col0 = (r + x0 as isize) as usize;
        k[row + col0] += p.eta * (1.0 - frac);
        if frac > 0.0 {
            k[row + col0 + 1] += p.eta * frac;
        }
        kernels.extend(k);
    }
    PsfStack::new(wavelengths.to_vec(), size, size, kernels, Padding::default())
}

/// Anisotropic Gaussians whose major axis turns linearly with wavelength,
/// from angle 0 at the first band to `angle_span` at the last.
pub fn gen_rotation(wavelengths: &[f64], p: &RotationParams, size: usize) -> Result<PsfStack> {
    for (n, v) in [
        ("sigma_major", p.sigma_major),
        ("sigma_minor", p.sigma_minor),
        ("angle_span", p.angle_span),
    ] {
        finite(n, v)?;
    }
    if p.sigma_minor <= 0.0 {
        return Err(validation("sigma_minor must be positive"));
    }
    if p.sigma_minor > p.sigma_major {
        return Err(validation("sigma_minor must not exceed sigma_major"));
    }
    let r = check_size(size, p.sigma_major)? as f64;
    let first = wavelengths.first().copied().unwrap_or(0.0);
    let range = wavelengths.last().copied().unwrap_or(0.0) - first;
    let mut kernels = Vec::with_capacity(wavelengths.len() * size * size);
    for &w in wavelengths {
        let t = if range > 0.0 { (w - first) / range } else { 0.0 };
        let (sin, cos) = (t * p.angle_span).sin_cos();
        let mut k = Vec::with_capacity(size * size);
        for y in 0..size {
            let dy = y as f64 - r;
            for x in 0..size {
                let dx = x as f64 - r;
                let u = dx * cos + dy * sin;
                let v = -dx * sin + dy * cos;
                let q = u * u / (p.sigma_major * p.sigma_major) + v * v / (p.sigma_minor * p.sigma_minor);
                k.push((-0.5 * q).exp());
            }
        }
        normalize(&mut k);
        kernels.extend(k);
    }
    PsfStack::new(wavelengths.to_vec(), size, size, kernels, Padding::default())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EncodingKind {
    None,
    Chromatic(ChromaticParams),
    Grating(GratingParams),
    Rotation(RotationParams),
}

/// A spectral encoding: which PSF family, its support and boundary handling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncodingSpec {
    pub kind: EncodingKind,
    pub size: usize,
    pub padding: Padding,
}

impl EncodingSpec {
    pub fn none() -> Self {
        Self {
            kind: EncodingKind::None,
            size: DEFAULT_PSF_SIZE,
            padding: Padding::default(),
        }
    }

    pub fn new(kind: EncodingKind) -> Self {
        Self {
            kind,
            ..Self::none()
        }
    }

    /// Default parameters for a named family.
    pub fn from_name(name: &str) -> Result<Self> {
        let kind = match name {
            "none" => EncodingKind::None,
            "chromatic" => EncodingKind::Chromatic(ChromaticParams::default()),
            "grating" => EncodingKind::Grating(GratingParams::default()),
            "rotation" => EncodingKind::Rotation(RotationParams::default()),
            other => return Err(validation(format!("unknown encoding kind {other:?}"))),
        };
        Ok(Self::new(kind))
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            EncodingKind::None => "none",
            EncodingKind::Chromatic(_) => "chromatic",
            EncodingKind::Grating(_) => "grating",
            EncodingKind::Rotation(_) => "rotation",
        }
    }

    /// The PSF stack for this encoding, or `None` for plain projection.
    pub fn build(&self, wavelengths: &[f64]) -> Result<Option<PsfStack>> {
        let stack = match &self.kind {
            EncodingKind::None => return Ok(None),
            EncodingKind::Chromatic(p) => gen_chromatic(wavelengths, p, self.size)?,
            EncodingKind::Grating(p) => gen_grating(wavelengths, p, self.size)?,
            EncodingKind::Rotation(p) => gen_rotation(wavelengths, p, self.size)?,
        };
        Ok(Some(stack.with_padding(self.padding)))
    }
}
