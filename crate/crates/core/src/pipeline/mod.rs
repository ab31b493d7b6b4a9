//! Dataset orchestration: scene splits, patches, metamer substitution,
//! aberrated formation and degradation, all reproducible from a seed.
//!
//! Every emitted [`SamplePair`] carries a [`Provenance`] record. Feeding the
//! source cube and that record to [`regenerate`] rebuilds the pair bit for
//! bit, which is also how [`synthesize_pair`] itself produces it.

mod augment;
mod config;
mod run;

pub use augment::{
    apply_ops, center_crop, crop, draw_ops, extract_patches, patch_origins, AugOp, Patch,
};
pub use config::{Crop, MetamerMode, PipelineConfig};
pub use run::{encoding_sweep, run_synth, sweep_csv, SweepRow, SynthSummary, SWEEP_HEADER};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::colorimetry::{BitDepth, QuantizationSpec};
use crate::cube::{RgbImage, SpectralCube, Srf};
use crate::degrade::{apply_chain, CodecCommand, DegradationConfig};
use crate::error::{validation, Result};
use crate::metamer::{self, sample_alpha, MetamerSummary};
use crate::optics::{self, EncodingSpec};
use crate::seed;

/// Deterministic split: shuffle with `seed`, the first `ceil(fraction * n)`
/// ids go to training.
pub fn split(ids: &[String], fraction: f64, seed: u64) -> Result<(Vec<String>, Vec<String>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(validation(format!("split fraction must be in (0, 1), got {fraction}")));
    }
    let mut shuffled = ids.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    // the epsilon keeps 0.9 * 10 from rounding up to 10
    let n_train = ((fraction * ids.len() as f64 - 1e-9).ceil().max(0.0) as usize).min(ids.len());
    let val = shuffled.split_off(n_train);
    Ok((shuffled, val))
}

/// Everything needed to turn a (cropped, augmented) cube into a pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recipe {
    /// Metamer coefficient; `None` keeps the source spectra.
    pub alpha: Option<f64>,
    pub encoding: EncodingSpec,
    pub npe: f64,
    /// Quantization depth; `None` leaves samples continuous.
    pub bits: Option<u32>,
    pub codec: Option<String>,
    pub noise_seed: u64,
}

impl Recipe {
    fn degradation(&self) -> Result<DegradationConfig> {
        Ok(DegradationConfig {
            npe: self.npe,
            quant: self
                .bits
                .map(|b| BitDepth::from_bits(b).map(QuantizationSpec::new))
                .transpose()?,
            codec: self.codec.clone().map(CodecCommand::new).transpose()?,
            seed: self.noise_seed,
        })
    }
}

/// Where a pair came from and how it was made.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub id: String,
    pub source: String,
    /// `(y, x)` of the window in the source cube.
    pub origin: (usize, usize),
    /// `(height, width)` of the window before augmentation.
    pub size: (usize, usize),
    pub ops: Vec<AugOp>,
    pub patch_seed: Option<u64>,
    pub recipe: Recipe,
    /// Clipping statistics when a metamer replaced the source.
    pub metamer: Option<MetamerSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplePair {
    /// Degraded network input.
    pub rgb: RgbImage,
    /// Formed RGB before degradation.
    pub clean_rgb: RgbImage,
    /// Ground truth, after metamer substitution.
    pub hsi: SpectralCube,
    pub provenance: Provenance,
}

/// Recipe draw for one pair: the metamer coefficient (when sampled) first,
/// then the noise seed.
fn draw_recipe<R: Rng + ?Sized>(config: &PipelineConfig, rng: &mut R) -> Result<Recipe> {
    let alpha = match config.metamer_mode {
        MetamerMode::None => None,
        MetamerMode::Fixed { alpha } => Some(alpha),
        MetamerMode::OnTheFly { lo, hi } => Some(sample_alpha(rng, lo, hi)?),
    };
    Ok(recipe_with(config, alpha, rng.random()))
}

fn recipe_with(config: &PipelineConfig, alpha: Option<f64>, noise_seed: u64) -> Recipe {
    let d = &config.degradation;
    Recipe {
        alpha,
        encoding: config.encoding,
        npe: d.npe,
        bits: d.quant.map(|q| q.bit_depth.bits()),
        codec: d.codec.as_ref().map(|c| c.template.clone()),
        noise_seed,
    }
}

/// Applies a recipe. Returns `(hsi, clean_rgb, rgb, metamer summary)`.
fn render(
    cube: &SpectralCube,
    srf: &Srf,
    recipe: &Recipe,
) -> Result<(SpectralCube, RgbImage, RgbImage, Option<MetamerSummary>)> {
    let (hsi, summary) = match recipe.alpha {
        // alpha = 1 reproduces the source exactly, flag included
        None | Some(1.0) => (cube.clone(), None),
        Some(alpha) => {
            let r = metamer::generate(cube, srf, alpha)?;
            let s = r.summary();
            (r.cube, Some(s))
        }
    };
    let psf = recipe.encoding.build(hsi.wavelengths())?;
    let clean = optics::form(&hsi, psf.as_ref(), srf)?;
    let rgb = apply_chain(&clean, &recipe.degradation()?)?;
    Ok((hsi, clean, rgb, summary))
}

fn assemble(cube: &SpectralCube, srf: &Srf, mut provenance: Provenance) -> Result<SamplePair> {
    let (hsi, clean_rgb, rgb, summary) = render(cube, srf, &provenance.recipe)?;
    provenance.metamer = summary;
    Ok(SamplePair {
        rgb,
        clean_rgb,
        hsi,
        provenance,
    })
}

/// Builds one pair from a whole cube: metamer substitution per the config's
/// mode, formation under its encoding, then the degradation chain.
pub fn synthesize_pair<R: Rng + ?Sized>(
    cube: &SpectralCube,
    srf: &Srf,
    config: &PipelineConfig,
    rng: &mut R,
) -> Result<SamplePair> {
    let recipe = draw_recipe(config, rng)?;
    let provenance = Provenance {
        id: String::new(),
        source: String::new(),
        origin: (0, 0),
        size: (cube.height(), cube.width()),
        ops: Vec::new(),
        patch_seed: None,
        recipe,
        metamer: None,
    };
    assemble(cube, srf, provenance)
}

/// Rebuilds a pair from its source cube and provenance.
pub fn regenerate(source: &SpectralCube, srf: &Srf, provenance: &Provenance) -> Result<SamplePair> {
    let (y, x) = provenance.origin;
    let (h, w) = provenance.size;
    let window = if (y, x, h, w) == (0, 0, source.height(), source.width()) {
        source.clone()
    } else {
        crop(source, y, x, h, w)?
    };
    let cube = apply_ops(&window, &provenance.ops);
    let mut p = provenance.clone();
    p.metamer = None;
    assemble(&cube, srf, p)
}

/// Window of `cube` the pipeline works on, and its offset in the source.
pub(crate) fn working_region(cube: &SpectralCube, crop_mode: Crop) -> Result<(SpectralCube, (usize, usize))> {
    match crop_mode {
        Crop::None => Ok((cube.clone(), (0, 0))),
        Crop::Center { width, height } => {
            let off = augment::center_offset(cube, height, width)?;
            Ok((augment::crop(cube, off.0, off.1, height, width)?, off))
        }
    }
}

/// Training pairs for one scene, one per patch, in patch-origin order.
pub fn training_pairs(
    scene_id: &str,
    cube: &SpectralCube,
    srf: &Srf,
    config: &PipelineConfig,
) -> Result<Vec<SamplePair>> {
    let (region, (oy, ox)) = working_region(cube, config.crop)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(config.seed, &["train", scene_id]));
    let patches = extract_patches(&region, config.patch_size, config.stride, &mut rng, config.spatial_aug)?;
    let mut out = Vec::new();
    for (idx, patch) in patches.enumerate() {
        let patch = patch?;
        let mut prng = ChaCha8Rng::seed_from_u64(seed::derive(patch.seed, &["pair"]));
        let recipe = draw_recipe(config, &mut prng)?;
        let provenance = Provenance {
            id: format!("{scene_id}_{idx:04}"),
            source: scene_id.to_string(),
            origin: (oy + patch.origin.0, ox + patch.origin.1),
            size: (config.patch_size, config.patch_size),
            ops: patch.ops.clone(),
            patch_seed: Some(patch.seed),
            recipe,
            metamer: None,
        };
        out.push(assemble(&patch.cube, srf, provenance)?);
    }
    Ok(out)
}

/// Validation pairs for one scene: the standard pair `<id>_std` and, unless
/// the metamer mode is `none`, its fundamental metamer (`alpha = 0`) as
/// `<id>_m0`. Both share one noise seed.
pub fn validation_pairs(
    scene_id: &str,
    cube: &SpectralCube,
    srf: &Srf,
    config: &PipelineConfig,
) -> Result<Vec<SamplePair>> {
    let (region, origin) = working_region(cube, config.crop)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(config.seed, &["val", scene_id]));
    let noise_seed: u64 = rng.random();
    let mut variants = vec![("std", None)];
    if config.metamer_mode != MetamerMode::None {
        variants.push(("m0", Some(0.0)));
    }
    variants
        .into_iter()
        .map(|(suffix, alpha)| {
            let provenance = Provenance {
                id: format!("{scene_id}_{suffix}"),
                source: scene_id.to_string(),
                origin,
                size: (region.height(), region.width()),
                ops: Vec::new(),
                patch_seed: None,
                recipe: recipe_with(config, alpha, noise_seed),
                metamer: None,
            };
            assemble(&region, srf, provenance)
        })
        .collect()
}

/// Validation set over named scenes, in input order.
pub fn build_validation_set(
    scenes: &[(String, SpectralCube)],
    srf: &Srf,
    config: &PipelineConfig,
) -> Result<Vec<SamplePair>> {
    let mut out = Vec::new();
    for (id, cube) in scenes {
        out.extend(validation_pairs(id, cube, srf, config)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::colorimetry::project;
    use crate::cube::default_wavelengths;
    use crate::optics::{ChromaticParams, EncodingKind};

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("s{i}")).collect()
    }

    fn scene(seed: u64, h: usize, w: usize) -> SpectralCube {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        SpectralCube::from_fn(h, w, default_wavelengths(), |_, _, _| rng.random::<f64>()).unwrap()
    }

    fn small_config() -> PipelineConfig {
        PipelineConfig {
            patch_size: 12,
            stride: 12,
            ..PipelineConfig::default()
        }
    }

    #[test]
    fn split_sizes_and_determinism() {
        let (t, v) = split(&ids(10), 0.9, 3).unwrap();
        assert_eq!((t.len(), v.len()), (9, 1));
        assert_eq!(split(&ids(10), 0.9, 3).unwrap(), (t.clone(), v.clone()));
        let mut all: Vec<String> = t.into_iter().chain(v).collect();
        all.sort();
        let mut expected = ids(10);
        expected.sort();
        assert_eq!(all, expected);
        assert_eq!(split(&ids(7), 0.5, 1).unwrap().0.len(), 4);
        assert!(split(&ids(3), 1.0, 0).is_err());
    }

    #[test]
    fn identity_configuration() {
        let c = scene(1, 6, 6);
        let srf = Srf::gaussian_rgb(&default_wavelengths()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = synthesize_pair(&c, &srf, &PipelineConfig::default(), &mut rng).unwrap();
        assert_eq!(p.hsi, c);
        assert_eq!(p.rgb, project(&c, &srf).unwrap());
    }

    #[test]
    fn fixed_one_matches_none() {
        let c = scene(2, 6, 6);
        let srf = Srf::gaussian_rgb(&default_wavelengths()).unwrap();
        let mut cfg = PipelineConfig::default();
        cfg.degradation.npe = 500.0;
        let a = synthesize_pair(&c, &srf, &cfg, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        cfg.metamer_mode = MetamerMode::Fixed { alpha: 1.0 };
        let b = synthesize_pair(&c, &srf, &cfg, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(a.rgb, b.rgb);
        assert_eq!(a.hsi, b.hsi);
    }

    #[test]
    fn regeneration_is_bit_exact() {
        let c = scene(3, 30, 28);
        let srf = Srf::gaussian_rgb(&default_wavelengths()).unwrap();
        let mut cfg = small_config();
        cfg.metamer_mode = MetamerMode::OnTheFly { lo: -1.0, hi: 2.0 };
        cfg.encoding = EncodingSpec {
            size: 11,
            ..EncodingSpec::new(EncodingKind::Chromatic(ChromaticParams::default()))
        };
        cfg.degradation.npe = 2000.0;
        cfg.degradation.quant = Some(QuantizationSpec::new(BitDepth::Eight));
        cfg.crop = Crop::Center { width: 24, height: 25 };
        let pairs = training_pairs("scene", &c, &srf, &cfg).unwrap();
        assert_eq!(pairs.len(), 6);
        for p in &pairs {
            let again = regenerate(&c, &srf, &p.provenance).unwrap();
            assert_eq!(&again, p);
            // the ground truth explains its own clean measurement
            let psf = cfg.encoding.build(&default_wavelengths()).unwrap();
            let formed = optics::form(&p.hsi, psf.as_ref(), &srf).unwrap();
            assert_eq!(formed, p.clean_rgb);
        }
        assert_eq!(training_pairs("scene", &c, &srf, &cfg).unwrap(), pairs);
        assert_ne!(training_pairs("other", &c, &srf, &cfg).unwrap(), pairs);
    }

    #[test]
    fn validation_doubling() {
        let srf = Srf::gaussian_rgb(&default_wavelengths()).unwrap();
        let scenes: Vec<(String, SpectralCube)> =
            (0..3).map(|i| (format!("v{i}"), scene(10 + i, 5, 5))).collect();
        let mut cfg = small_config();
        assert_eq!(build_validation_set(&scenes, &srf, &cfg).unwrap().len(), 3);
        cfg.metamer_mode = MetamerMode::Fixed { alpha: 0.5 };
        let set = build_validation_set(&scenes, &srf, &cfg).unwrap();
        assert_eq!(set.len(), 6);
        let ids: Vec<&str> = set.iter().map(|p| p.provenance.id.as_str()).collect();
        assert_eq!(ids, ["v0_std", "v0_m0", "v1_std", "v1_m0", "v2_std", "v2_m0"]);
        assert_eq!(set[0].provenance.recipe.noise_seed, set[1].provenance.recipe.noise_seed);
    }
}
