//! Pipeline configuration and its flat TOML form.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::colorimetry::{BitDepth, QuantizationSpec};
use crate::degrade::{CodecCommand, DegradationConfig};
use crate::error::{validation, Result};
use crate::optics::{
    ChromaticParams, EncodingKind, EncodingSpec, GratingParams, Padding, RotationParams, DEFAULT_PSF_SIZE,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum MetamerMode {
    None,
    Fixed { alpha: f64 },
    OnTheFly { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Crop {
    None,
    Center { width: usize, height: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub patch_size: usize,
    pub stride: usize,
    /// Fraction of scenes assigned to training, in `(0, 1)`.
    pub split_fraction: f64,
    pub spatial_aug: bool,
    pub metamer_mode: MetamerMode,
    pub encoding: EncodingSpec,
    /// Noise, quantization and codec settings. The `seed` field is ignored:
    /// each pair draws its own noise seed.
    pub degradation: DegradationConfig,
    pub crop: Crop,
    pub seed: u64,
    /// Camera response CSV; the built-in Gaussian RGB response when unset.
    pub srf: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            patch_size: 128,
            stride: 64,
            split_fraction: 0.9,
            spatial_aug: true,
            metamer_mode: MetamerMode::None,
            encoding: EncodingSpec::none(),
            degradation: DegradationConfig::default(),
            crop: Crop::None,
            seed: 0,
            srf: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.patch_size == 0 || self.stride == 0 {
            return Err(validation("patch_size and stride must be positive"));
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(validation(format!(
                "split_fraction must be in (0, 1), got {}",
                self.split_fraction
            )));
        }
        match self.metamer_mode {
            MetamerMode::Fixed { alpha } if !alpha.is_finite() => {
                return Err(validation("alpha must be finite"))
            }
            MetamerMode::OnTheFly { lo, hi } if !(lo.is_finite() && hi.is_finite() && lo < hi) => {
                return Err(validation(format!("alpha range [{lo}, {hi}] is empty or invalid")))
            }
            _ => {}
        }
        let npe = self.degradation.npe;
        if !(npe >= 0.0 && npe.is_finite()) {
            return Err(validation(format!("npe must be finite and >= 0, got {npe}")));
        }
        if let Crop::Center { width, height } = self.crop {
            if width == 0 || height == 0 {
                return Err(validation("crop dimensions must be positive"));
            }
        }
        Ok(())
    }

    /// Parses the flat TOML form. Relative `srf` paths resolve against `base`.
    pub fn from_toml_str(text: &str, base: Option<&Path>) -> Result<Self> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| validation(format!("config: {}", e.message())))?;
        let config = raw.into_config(base)?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_toml_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text, path.parent())
    }
}

/// On-disk keys. Encoding parameters that do not belong to the selected
/// family are rejected rather than silently ignored.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    patch_size: Option<usize>,
    stride: Option<usize>,
    split_fraction: Option<f64>,
    spatial_aug: Option<bool>,
    metamer_mode: Option<String>,
    alpha: Option<f64>,
    alpha_lo: Option<f64>,
    alpha_hi: Option<f64>,
    encoding: Option<String>,
    psf_size: Option<usize>,
    padding: Option<Padding>,
    sigma0: Option<f64>,
    sigma_slope: Option<f64>,
    shift_slope: Option<f64>,
    ref_lambda: Option<f64>,
    eta: Option<f64>,
    disp_slope: Option<f64>,
    sigma_major: Option<f64>,
    sigma_minor: Option<f64>,
    angle_span: Option<f64>,
    npe: Option<f64>,
    bits: Option<u32>,
    codec: Option<String>,
    crop_width: Option<usize>,
    crop_height: Option<usize>,
    seed: Option<u64>,
    srf: Option<PathBuf>,
}

fn reject(name: &str, v: Option<f64>, family: &str) -> Result<()> {
    match v {
        Some(_) => Err(validation(format!("{name} does not apply to encoding {family:?}"))),
        None => Ok(()),
    }
}

impl RawConfig {
    fn encoding(&self) -> Result<EncodingSpec> {
        let name = self.encoding.as_deref().unwrap_or("none");
        let chromatic = [self.sigma0, self.sigma_slope, self.shift_slope];
        let grating = [self.eta, self.disp_slope];
        let rotation = [self.sigma_major, self.sigma_minor, self.angle_span];
        let names_c = ["sigma0", "sigma_slope", "shift_slope"];
        let names_g = ["eta", "disp_slope"];
        let names_r = ["sigma_major", "sigma_minor", "angle_span"];
        let mut foreign: Vec<(&str, Option<f64>)> = Vec::new();
        let kind = match name {
            "none" => {
                foreign.extend(names_c.iter().copied().zip(chromatic));
                foreign.extend(names_g.iter().copied().zip(grating));
                foreign.extend(names_r.iter().copied().zip(rotation));
                foreign.push(("ref_lambda", self.ref_lambda));
                EncodingKind::None
            }
            "chromatic" => {
                foreign.extend(names_g.iter().copied().zip(grating));
                foreign.extend(names_r.iter().copied().zip(rotation));
                let d = ChromaticParams::default();
                EncodingKind::Chromatic(ChromaticParams {
                    sigma0: self.sigma0.unwrap_or(d.sigma0),
                    sigma_slope: self.sigma_slope.unwrap_or(d.sigma_slope),
                    shift_slope: self.shift_slope.unwrap_or(d.shift_slope),
                    ref_lambda: self.ref_lambda.unwrap_or(d.ref_lambda),
                })
            }
            "grating" => {
                foreign.extend(names_c.iter().copied().zip(chromatic));
                foreign.extend(names_r.iter().copied().zip(rotation));
                let d = GratingParams::default();
                EncodingKind::Grating(GratingParams {
                    eta: self.eta.unwrap_or(d.eta),
                    disp_slope: self.disp_slope.unwrap_or(d.disp_slope),
                    ref_lambda: self.ref_lambda.unwrap_or(d.ref_lambda),
                })
            }
            "rotation" => {
                foreign.extend(names_c.iter().copied().zip(chromatic));
                foreign.extend(names_g.iter().copied().zip(grating));
                foreign.push(("ref_lambda", self.ref_lambda));
                let d = RotationParams::default();
                EncodingKind::Rotation(RotationParams {
                    sigma_major: self.sigma_major.unwrap_or(d.sigma_major),
                    sigma_minor: self.sigma_minor.unwrap_or(d.sigma_minor),
                    angle_span: self.angle_span.unwrap_or(d.angle_span),
                })
            }
            other => return Err(validation(format!("unknown encoding {other:?}"))),
        };
        for (n, v) in foreign {
            reject(n, v, name)?;
        }
        Ok(EncodingSpec {
            kind,
            size: self.psf_size.unwrap_or(DEFAULT_PSF_SIZE),
            padding: self.padding.unwrap_or_default(),
        })
    }

    fn metamer_mode(&self) -> Result<MetamerMode> {
        let mode = self.metamer_mode.as_deref().unwrap_or("none");
        let (uses_alpha, uses_range) = match mode {
            "none" => (false, false),
            "fixed" => (true, false),
            "on_the_fly" => (false, true),
            other => return Err(validation(format!("unknown metamer_mode {other:?}"))),
        };
        if !uses_alpha && self.alpha.is_some() {
            return Err(validation(format!("alpha does not apply to metamer_mode {mode:?}")));
        }
        if !uses_range && (self.alpha_lo.is_some() || self.alpha_hi.is_some()) {
            return Err(validation(format!(
                "alpha_lo/alpha_hi do not apply to metamer_mode {mode:?}"
            )));
        }
        Ok(match mode {
            "fixed" => MetamerMode::Fixed {
                alpha: self
                    .alpha
                    .ok_or_else(|| validation("metamer_mode \"fixed\" needs alpha"))?,
            },
            "on_the_fly" => MetamerMode::OnTheFly {
                lo: self.alpha_lo.unwrap_or(-1.0),
                hi: self.alpha_hi.unwrap_or(2.0),
            },
            _ => MetamerMode::None,
        })
    }

    fn into_config(self, base: Option<&Path>) -> Result<PipelineConfig> {
        let d = PipelineConfig::default();
        let patch_size = self.patch_size.unwrap_or(d.patch_size);
        let crop = match (self.crop_width, self.crop_height) {
            (None, None) => Crop::None,
            (Some(width), Some(height)) => Crop::Center { width, height },
            _ => return Err(validation("crop_width and crop_height must be given together")),
        };
        let quant = self
            .bits
            .map(|b| BitDepth::from_bits(b).map(QuantizationSpec::new))
            .transpose()?;
        let codec = self.codec.clone().map(CodecCommand::new).transpose()?;
        let srf = self.srf.clone().map(|p| match base {
            Some(b) if p.is_relative() => b.join(p),
            _ => p,
        });
        Ok(PipelineConfig {
            patch_size,
            stride: self.stride.unwrap_or((patch_size / 2).max(1)),
            split_fraction: self.split_fraction.unwrap_or(d.split_fraction),
            spatial_aug: self.spatial_aug.unwrap_or(d.spatial_aug),
            metamer_mode: self.metamer_mode()?,
            encoding: self.encoding()?,
            degradation: DegradationConfig {
                npe: self.npe.unwrap_or(0.0),
                quant,
                codec,
                seed: 0,
            },
            crop,
            seed: self.seed.unwrap_or(0),
            srf,
        })
    }
}
