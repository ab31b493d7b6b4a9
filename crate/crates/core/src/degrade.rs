//! Sensor degradation: Poisson shot noise, quantization and an optional
//! external lossy codec.
//!
//! Noise is drawn from a counter-based stream: every sample owns the ChaCha8
//! stream keyed by `(seed, sample index)`, so results do not depend on thread
//! count or iteration order.

use std::path::Path;
use std::process::Command;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::colorimetry::{quantize, BitDepth, QuantizationSpec};
use crate::cube::{Planar, RgbImage};
use crate::error::{validation, Error, Result};
use crate::io;

/// Means at or below this use inversion; larger means use PTRS rejection.
pub const INVERSION_MAX_MEAN: f64 = 10.0;

/// External codec invoked as `sh -c <template>` with `{in}` and `{out}`
/// replaced by PNG paths. The command must write a PNG of the same size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodecCommand {
    pub template: String,
}

impl CodecCommand {
    pub fn new(template: impl Into<String>) -> Result<Self> {
        let template = template.into();
        if !template.contains("{in}") || !template.contains("{out}") {
            return Err(validation(
                "codec command must contain {in} and {out} placeholders",
            ));
        }
        Ok(Self { template })
    }

    fn render(&self, input: &Path, output: &Path) -> String {
        self.template
            .replace("{in}", &shell_quote(input))
            .replace("{out}", &shell_quote(output))
    }
}

fn shell_quote(p: &Path) -> String {
    format!("'{}'", p.to_string_lossy().replace('\'', r"'\''"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegradationConfig {
    /// Full-scale photon-electron count; 0 disables shot noise.
    pub npe: f64,
    pub quant: Option<QuantizationSpec>,
    pub codec: Option<CodecCommand>,
    pub seed: u64,
}

impl Default for DegradationConfig {
    fn default() -> Self {
        Self {
            npe: 0.0,
            quant: None,
            codec: None,
            seed: 0,
        }
    }
}

/// `ln Gamma(x)` for `x >= 1` via a Stirling series, shifted upward below 7.
fn ln_gamma(x: f64) -> f64 {
    const A: [f64; 10] = [
        8.333333333333333e-02,
        -2.777777777777778e-03,
        7.936507936507937e-04,
        -5.952380952380952e-04,
        8.417508417508418e-04,
        -1.917526917526918e-03,
        6.410256410256410e-03,
        -2.955065359477124e-02,
        1.796443723688307e-01,
        -1.39243221690590e+00,
    ];
    if x == 1.0 || x == 2.0 {
        return 0.0;
    }
    let n = if x < 7.0 { (7.0 - x) as i64 } else { 0 };
    let mut x0 = x + n as f64;
    let x2 = (1.0 / x0) * (1.0 / x0);
    let mut gl0 = A[9];
    for &a in A[..9].iter().rev() {
        gl0 = gl0 * x2 + a;
    }
    let mut gl = gl0 / x0 + 0.5 * (2.0 * std::f64::consts::PI).ln() + (x0 - 0.5) * x0.ln() - x0;
    for _ in 0..n {
        gl -= (x0 - 1.0).ln();
        x0 -= 1.0;
    }
    gl
}

/// Draws from Poisson(`mean`).
///
/// Sequential-search inversion for `mean <= 10`; above that, Hörmann's PTRS
/// transformed rejection, which is exact (no normal approximation).
pub fn poisson_sample<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    if mean <= INVERSION_MAX_MEAN {
        let u: f64 = rng.random();
        let mut p = (-mean).exp();
        let mut cdf = p;
        let mut k = 0u64;
        // cdf can stall just below 1 from rounding; the tail past 1000 is nil
        while u > cdf && k < 1000 {
            k += 1;
            p *= mean / k as f64;
            cdf += p;
        }
        return k;
    }
    let slam = mean.sqrt();
    let loglam = mean.ln();
    let b = 0.931 + 2.53 * slam;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let vr = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u = rng.random::<f64>() - 0.5;
        let v: f64 = rng.random();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + mean + 0.43).floor();
        if us >= 0.07 && v <= vr {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        if v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln()
            <= -mean + k * loglam - ln_gamma(k + 1.0)
        {
            return k as u64;
        }
    }
}

/// Per-sample generator for the counter-based noise stream.
pub(crate) fn sample_stream(base: &ChaCha8Rng, index: u64) -> ChaCha8Rng {
    let mut rng = base.clone();
    rng.set_stream(index);
    rng.set_word_pos(0);
    rng
}

pub fn clamp_unit(image: &RgbImage) -> RgbImage {
    RgbImage::from_parts_unchecked(
        image.height(),
        image.width(),
        image.samples().iter().map(|v| v.clamp(0.0, 1.0)).collect(),
    )
}

/// Shot noise: `Poisson(v * npe) / npe` per clamped sample.
pub fn poisson_noise(image: &RgbImage, npe: f64, seed: u64) -> Result<RgbImage> {
    if !(npe >= 0.0) || !npe.is_finite() {
        return Err(validation(format!("npe must be finite and >= 0, got {npe}")));
    }
    let clamped = clamp_unit(image);
    if npe == 0.0 {
        return Ok(clamped);
    }
    let base = ChaCha8Rng::seed_from_u64(seed);
    let data: Vec<f64> = clamped
        .samples()
        .par_iter()
        .enumerate()
        .map(|(i, &v)| {
            let mut rng = sample_stream(&base, i as u64);
            poisson_sample(v * npe, &mut rng) as f64 / npe
        })
        .collect();
    Ok(RgbImage::from_parts_unchecked(image.height(), image.width(), data))
}

/// Round-trips the image through an external codec.
pub fn run_codec(image: &RgbImage, codec: &CodecCommand, depth: BitDepth) -> Result<RgbImage> {
    let dir = tempfile::tempdir()?;
    let input = dir.path().join("in.png");
    let output = dir.path().join("out.png");
    io::write_rgb(&quantize(image, QuantizationSpec::new(depth)), &input, depth)?;
    let out = Command::new("sh")
        .arg("-c")
        .arg(codec.render(&input, &output))
        .output()?;
    if !out.status.success() {
        return Err(Error::Codec {
            status: out.status.code(),
            message: String::from_utf8_lossy(&out.stderr).trim().to_string(),
        });
    }
    let decoded = io::read_rgb(&output).map_err(|e| Error::Codec {
        status: out.status.code(),
        message: format!("codec output unreadable: {e}"),
    })?;
    if decoded.height() != image.height() || decoded.width() != image.width() {
        return Err(Error::Codec {
            status: out.status.code(),
            message: "codec changed image dimensions".into(),
        });
    }
    Ok(decoded)
}

/// clamp, shot noise, quantization, codec, in that order.
pub fn apply_chain(image: &RgbImage, config: &DegradationConfig) -> Result<RgbImage> {
    let mut out = poisson_noise(image, config.npe, config.seed)?;
    if let Some(q) = config.quant {
        out = quantize(&out, q);
    }
    if let Some(codec) = &config.codec {
        let depth = config.quant.map_or(BitDepth::Sixteen, |q| q.bit_depth);
        out = run_codec(&out, codec, depth)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp() -> RgbImage {
        RgbImage::new(4, 5, (0..60).map(|i| i as f64 / 59.0 * 1.2 - 0.1).collect()).unwrap()
    }

    #[test]
    fn ln_gamma_matches_factorials() {
        let mut fact = 1.0f64;
        for k in 1..30u32 {
            fact *= k as f64;
            assert!((ln_gamma(k as f64 + 1.0) - fact.ln()).abs() < 1e-10, "{k}");
        }
    }

    #[test]
    fn noiseless_is_clamp() {
        let img = ramp();
        let out = poisson_noise(&img, 0.0, 5).unwrap();
        assert_eq!(out, clamp_unit(&img));
        let inside = RgbImage::new(1, 2, vec![0.0, 0.1, 0.2, 0.3, 0.9, 1.0]).unwrap();
        assert_eq!(poisson_noise(&inside, 0.0, 5).unwrap(), inside);
    }

    #[test]
    fn zero_signal_stays_zero() {
        let img = RgbImage::filled(8, 8, 0.0).unwrap();
        let out = poisson_noise(&img, 1000.0, 1).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn negative_npe_is_rejected() {
        assert!(matches!(
            poisson_noise(&ramp(), -1.0, 0),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn seeds_are_deterministic_and_distinct() {
        let img = RgbImage::filled(6, 6, 0.4).unwrap();
        let a = poisson_noise(&img, 1000.0, 7).unwrap();
        let b = poisson_noise(&img, 1000.0, 7).unwrap();
        let c = poisson_noise(&img, 1000.0, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn small_mean_matches_pmf() {
        // inversion branch: empirical frequencies vs pmf of Poisson(3.5)
        let mean = 3.5;
        let n = 200_000;
        let base = ChaCha8Rng::seed_from_u64(42);
        let mut counts = [0usize; 20];
        for i in 0..n {
            let k = poisson_sample(mean, &mut sample_stream(&base, i)) as usize;
            counts[k.min(19)] += 1;
        }
        let mut p = (-mean as f64).exp();
        for (k, &c) in counts.iter().enumerate().take(12) {
            if k > 0 {
                p *= mean / k as f64;
            }
            let sd = (p * (1.0 - p) / n as f64).sqrt();
            let freq = c as f64 / n as f64;
            assert!((freq - p).abs() < 5.0 * sd + 1e-6, "k={k} freq={freq} p={p}");
        }
    }

    #[test]
    fn rejection_branch_moments() {
        for mean in [10.5, 57.0, 2500.0] {
            let n = 100_000u64;
            let base = ChaCha8Rng::seed_from_u64(mean as u64);
            let draws: Vec<f64> = (0..n)
                .map(|i| poisson_sample(mean, &mut sample_stream(&base, i)) as f64)
                .collect();
            let m = draws.iter().sum::<f64>() / n as f64;
            let var = draws.iter().map(|d| (d - m).powi(2)).sum::<f64>() / (n - 1) as f64;
            assert!((m - mean).abs() < 5.0 * (mean / n as f64).sqrt(), "mean {mean}: {m}");
            assert!((var / mean - 1.0).abs() < 0.03, "var {mean}: {var}");
        }
    }

    #[test]
    fn chain_examples() {
        let img = ramp();
        assert_eq!(apply_chain(&img, &DegradationConfig::default()).unwrap(), clamp_unit(&img));

        let half = RgbImage::filled(2, 2, 0.5).unwrap();
        let cfg = DegradationConfig {
            quant: Some(QuantizationSpec::new(BitDepth::Eight)),
            ..Default::default()
        };
        let out = apply_chain(&half, &cfg).unwrap();
        assert!(out.data().iter().all(|&v| v == 128.0 / 255.0));

        let noisy = DegradationConfig {
            npe: 1000.0,
            seed: 3,
            ..Default::default()
        };
        assert_eq!(apply_chain(&img, &noisy).unwrap(), apply_chain(&img, &noisy).unwrap());
    }

    #[test]
    fn codec_passthrough_and_failure() {
        let img = RgbImage::new(2, 3, (0..18).map(|i| i as f64 / 17.0).collect()).unwrap();
        let cfg = DegradationConfig {
            quant: Some(QuantizationSpec::new(BitDepth::Eight)),
            codec: Some(CodecCommand::new("cp {in} {out}").unwrap()),
            ..Default::default()
        };
        let out = apply_chain(&img, &cfg).unwrap();
        assert_eq!(out, quantize(&img, QuantizationSpec::new(BitDepth::Eight)));

        let failing = DegradationConfig {
            codec: Some(CodecCommand::new("echo boom >&2; exit 3 # {in} {out}").unwrap()),
            ..Default::default()
        };
        match apply_chain(&img, &failing) {
            Err(Error::Codec { status, message }) => {
                assert_eq!(status, Some(3));
                assert_eq!(message, "boom");
            }
            other => panic!("expected codec error, got {other:?}"),
        }
        assert!(CodecCommand::new("cjpeg {in}").is_err());
    }
}
