//! Directory-level jobs: dataset synthesis and encoding sweeps.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::{split, training_pairs, validation_pairs, PipelineConfig, SamplePair};
use crate::colorimetry::BitDepth;
use crate::cube::{SpectralCube, Srf};
use crate::error::{validation, Error, Result};
use crate::io;
use crate::metamer::separability;
use crate::optics::EncodingSpec;
use crate::seed;

pub const SWEEP_HEADER: &str = "pair_id,encoding,max_abs_diff,mean_abs_diff";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SynthSummary {
    pub train_scenes: usize,
    pub val_scenes: usize,
    pub train_pairs: usize,
    pub val_pairs: usize,
}

/// `*.hsc` files in `dir`, sorted by name, keyed by file stem.
pub(crate) fn list_scenes(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut scenes = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == "hsc") {
            let stem = path
                .file_stem()
                .and_then(|s| s.to_str())
                .ok_or_else(|| validation(format!("non UTF-8 file name {}", path.display())))?
                .to_string();
            scenes.push((stem, path));
        }
    }
    scenes.sort();
    Ok(scenes)
}

fn write_pair(dir: &Path, pair: &SamplePair) -> Result<()> {
    let id = &pair.provenance.id;
    let depth = match pair.provenance.recipe.bits {
        Some(b) => BitDepth::from_bits(b)?,
        None => BitDepth::Sixteen,
    };
    io::write_cube(&pair.hsi, dir.join(format!("{id}.hsc")))?;
    io::write_rgb(&pair.rgb, dir.join(format!("{id}.png")), depth)?;
    let mut json = serde_json::to_string_pretty(&pair.provenance)
        .map_err(|e| validation(format!("provenance: {e}")))?;
    json.push('\n');
    io::write_atomic(&dir.join(format!("{id}.json")), json.as_bytes())
}

fn scene_srf(loaded: &Option<Srf>, cube: &SpectralCube) -> Result<Srf> {
    match loaded {
        Some(s) => Ok(s.clone()),
        None => Srf::gaussian_rgb(cube.wavelengths()),
    }
}

/// Synthesizes a paired dataset from every `*.hsc` cube in `in_dir`.
///
/// Scenes are split into `train/` and `val/`, each pair written as
/// `<id>.hsc`, `<id>.png` and `<id>.json`, plus `split.json` listing the
/// scene ids. The tree is built in a sibling temporary directory and moved
/// to `out_dir` only on success; `out_dir` must not exist or be empty.
/// Output bytes do not depend on `threads`.
pub fn run_synth(
    config: &PipelineConfig,
    in_dir: &Path,
    out_dir: &Path,
    threads: Option<usize>,
) -> Result<SynthSummary> {
    config.validate()?;
    let scenes = list_scenes(in_dir)?;
    if scenes.is_empty() {
        return Err(validation(format!("no .hsc files in {}", in_dir.display())));
    }
    if out_dir.exists() && fs::read_dir(out_dir)?.next().is_some() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::AlreadyExists,
            format!("output directory {} is not empty", out_dir.display()),
        )));
    }
    let srf = config.srf.as_ref().map(io::read_srf).transpose()?;
    let ids: Vec<String> = scenes.iter().map(|(id, _)| id.clone()).collect();
    let (train, val) = split(&ids, config.split_fraction, seed::derive(config.seed, &["split"]))?;

    let parent = match out_dir.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let staging = tempfile::Builder::new()
        .prefix(".specforge-synth-")
        .tempdir_in(&parent)?;
    let (train_dir, val_dir) = (staging.path().join("train"), staging.path().join("val"));
    fs::create_dir(&train_dir)?;
    fs::create_dir(&val_dir)?;

    let jobs: Vec<(&str, &Path, bool)> = scenes
        .iter()
        .map(|(id, path)| (id.as_str(), path.as_path(), train.contains(id)))
        .collect();
    let work = || -> Result<Vec<usize>> {
        jobs.par_iter()
            .map(|&(id, path, is_train)| {
                let cube = io::read_cube(path)?;
                let srf = scene_srf(&srf, &cube)?;
                let (pairs, dir) = if is_train {
                    (training_pairs(id, &cube, &srf, config)?, &train_dir)
                } else {
                    (validation_pairs(id, &cube, &srf, config)?, &val_dir)
                };
                for pair in &pairs {
                    write_pair(dir, pair)?;
                }
                eprintln!(
                    "{id}: {} pairs -> {}",
                    pairs.len(),
                    if is_train { "train" } else { "val" }
                );
                Ok(pairs.len())
            })
            .collect()
    };
    let counts = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| validation(format!("thread pool: {e}")))?
            .install(work)?,
        None => work()?,
    };

    let mut summary = SynthSummary {
        train_scenes: train.len(),
        val_scenes: val.len(),
        train_pairs: 0,
        val_pairs: 0,
    };
    for (&(_, _, is_train), n) in jobs.iter().zip(counts) {
        if is_train {
            summary.train_pairs += n;
        } else {
            summary.val_pairs += n;
        }
    }
    let mut train_sorted = train.clone();
    train_sorted.sort();
    let mut val_sorted = val.clone();
    val_sorted.sort();
    let split_json = serde_json::json!({ "train": train_sorted, "val": val_sorted });
    let mut text = serde_json::to_string_pretty(&split_json).expect("plain JSON value");
    text.push('\n');
    io::write_atomic(&staging.path().join("split.json"), text.as_bytes())?;

    if out_dir.exists() {
        fs::remove_dir(out_dir)?;
    }
    let staged = staging.keep();
    if let Err(e) = fs::rename(&staged, out_dir) {
        let _ = fs::remove_dir_all(&staged);
        return Err(e.into());
    }
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub pair_id: String,
    pub encoding: String,
    pub max_abs_diff: f64,
    pub mean_abs_diff: f64,
}

/// One separability row per `(pair, encoding)`, pair-major.
pub fn encoding_sweep(
    pairs: &[(String, SpectralCube, SpectralCube)],
    srf: &Srf,
    encodings: &[EncodingSpec],
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(pairs.len() * encodings.len());
    for (id, a, b) in pairs {
        for enc in encodings {
            let psf = enc.build(a.wavelengths())?;
            let r = separability(a, b, srf, psf.as_ref())?;
            rows.push(SweepRow {
                pair_id: id.clone(),
                encoding: enc.name().to_string(),
                max_abs_diff: r.max_abs_rgb_diff,
                mean_abs_diff: r.mean_abs_rgb_diff,
            });
        }
    }
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from(SWEEP_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&format!(
            "{},{},{:e},{:e}\n",
            r.pair_id, r.encoding, r.max_abs_diff, r.mean_abs_diff
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cube::default_wavelengths;
    use crate::metamer;

    #[test]
    fn sweep_rows() {
        let wl = default_wavelengths();
        let srf = Srf::gaussian_rgb(&wl).unwrap();
        let a = SpectralCube::from_fn(12, 12, wl, |k, y, x| {
            0.5 + 0.3 * (((k * 7 + y * 3 + x * 5) % 11) as f64 / 11.0 - 0.5)
        })
        .unwrap();
        let d = metamer::decompose(&a, &srf).unwrap();
        let b = metamer::candidate(&a, &d, 0.0).unwrap();
        let pairs = vec![("p".to_string(), a, b)];
        let encs: Vec<EncodingSpec> = ["none", "chromatic"]
            .iter()
            .map(|n| EncodingSpec {
                size: 11,
                ..EncodingSpec::from_name(n).unwrap()
            })
            .collect();
        let rows = encoding_sweep(&pairs, &srf, &encs).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows[0].max_abs_diff <= 1e-9);
        assert!(rows[1].max_abs_diff > rows[0].max_abs_diff);
        let csv = sweep_csv(&rows);
        assert!(csv.starts_with("pair_id,encoding,max_abs_diff,mean_abs_diff\np,none,"));
        assert_eq!(csv.lines().count(), 3);
    }
}
