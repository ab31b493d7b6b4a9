//! Spectral reconstruction metrics: MRAE, RMSE, band-averaged PSNR, SAM and L1.
//!
//! All functions take any [`Planar`] image so the same definitions serve
//! datacubes and three-channel RGB images. Reductions run serially in a fixed
//! order, which keeps reports byte-stable.

use serde::{Deserialize, Serialize};

use crate::cube::Planar;
use crate::error::{validation, Result};

/// Denominator floor for MRAE.
pub const MRAE_EPSILON: f64 = 1e-8;
/// Pixels whose spectrum norm is at or below this are excluded from SAM.
pub const SAM_NORM_CUTOFF: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricReport {
    pub mrae: f64,
    pub rmse: f64,
    #[serde(serialize_with = "serialize_db")]
    pub psnr_db: f64,
    pub sam_rad: f64,
    pub l1: f64,
    pub pixels_excluded_sam: usize,
    pub denom_floored_mrae: usize,
}

/// Serializes `+inf` as the string `"inf"`; JSON has no infinity literal.
pub fn serialize_db<S: serde::Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_infinite() && *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*v)
    }
}

/// Inverse of [`serialize_db`]: accepts a number or the string `"inf"`.
pub fn deserialize_db<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(serde::Deserialize)]
    #[serde(untagged)]
    enum Db {
        Num(f64),
        Text(String),
    }
    match Db::deserialize(d)? {
        Db::Num(v) => Ok(v),
        Db::Text(t) if t == "inf" => Ok(f64::INFINITY),
        Db::Text(t) => Err(serde::de::Error::custom(format!("expected a number or \"inf\", got {t:?}"))),
    }
}

fn check<T: Planar + ?Sized>(est: &T, gt: &T) -> Result<()> {
    if est.planes() != gt.planes() || est.height() != gt.height() || est.width() != gt.width() {
        return Err(validation(format!(
            "dimension mismatch: {}x{}x{} vs {}x{}x{}",
            est.height(),
            est.width(),
            est.planes(),
            gt.height(),
            gt.width(),
            gt.planes()
        )));
    }
    if est.samples().is_empty() {
        return Err(validation("metrics need at least one sample"));
    }
    Ok(())
}

/// MRAE and the number of samples whose denominator hit the floor.
pub fn mrae_with_count<T: Planar + ?Sized>(est: &T, gt: &T) -> Result<(f64, usize)> {
    check(est, gt)?;
    let mut sum = 0.0;
    let mut floored = 0;
    for (&e, &g) in est.samples().iter().zip(gt.samples()) {
        let denom = if g < MRAE_EPSILON {
            floored += 1;
            MRAE_EPSILON
        } else {
            g
        };
        sum += (e - g).abs() / denom;
    }
    Ok((sum / est.samples().len() as f64, floored))
}

pub fn mrae<T: Planar + ?Sized>(est: &T, gt: &T) -> Result<f64> {
    mrae_with_count(est, gt).map(|(v, _)| v)
}

pub fn rmse<T: Planar + ?Sized>(est: &T, gt: &T) -> Result<f64> {
    check(est, gt)?;
    let sum: f64 = est
        .samples()
        .iter()
        .zip(gt.samples())
        .map(|(e, g)| (e - g) * (e - g))
        .sum();
    Ok((sum / est.samples().len() as f64).sqrt())
}

/// Band-averaged PSNR in dB. Any band with zero error yields `+inf`.
pub fn psnr<T: Planar + ?Sized>(est: &T, gt: &T, max_value: f64) -> Result<f64> {
    check(est, gt)?;
    if !(max_value > 0.0 && max_value.is_finite()) {
        return Err(validation("PSNR peak value must be positive and finite"));
    }
    let n = est.plane_len() as f64;
    let mut total = 0.0;
    for k in 0..est.planes() {
        let mse: f64 = est
            .plane(k)
            .iter()
            .zip(gt.plane(k))
            .map(|(e, g)| (e - g) * (e - g))
            .sum::<f64>()
            / n;
        if mse == 0.0 {
            return Ok(f64::INFINITY);
        }
        total += 20.0 * (max_value / mse.sqrt()).log10();
    }
    Ok(total / est.planes() as f64)
}

/// Mean spectral angle in radians and the number of excluded pixels.
///
/// When every pixel is excluded the angle is reported as 0.
pub fn sam_with_count<T: Planar + ?Sized>(est: &T, gt: &T) -> Result<(f64, usize)> {
    check(est, gt)?;
    let n = est.plane_len();
    let mut dot = vec![0.0; n];
    let mut ee = vec![0.0; n];
    let mut gg = vec![0.0; n];
    for k in 0..est.planes() {
        for (p, (&e, &g)) in est.plane(k).iter().zip(gt.plane(k)).enumerate() {
            dot[p] += e * g;
            ee[p] += e * e;
            gg[p] += g * g;
        }
    }
    let mut sum = 0.0;
    let mut used = 0usize;
    for p in 0..n {
        if ee[p].sqrt() <= SAM_NORM_CUTOFF || gg[p].sqrt() <= SAM_NORM_CUTOFF {
            continue;
        }
        let cos = (dot[p] / (ee[p] * gg[p]).sqrt()).clamp(-1.0, 1.0);
        sum += cos.acos();
        used += 1;
    }
    let mean = if used == 0 { 0.0 } else { sum / used as f64 };
    Ok((mean, n - used))
}

pub fn sam<T: Planar + ?Sized>(est: &T, gt: &T) -> Result<f64> {
    sam_with_count(est, gt).map(|(v, _)| v)
}

pub fn l1<T: Planar + ?Sized>(est: &T, gt: &T) -> Result<f64> {
    check(est, gt)?;
    let sum: f64 = est
        .samples()
        .iter()
        .zip(gt.samples())
        .map(|(e, g)| (e - g).abs())
        .sum();
    Ok(sum / est.samples().len() as f64)
}

/// All metrics at once, with PSNR peak 1.0.
pub fn report<T: Planar + ?Sized>(est: &T, gt: &T) -> Result<MetricReport> {
    let (mrae, denom_floored_mrae) = mrae_with_count(est, gt)?;
    let (sam_rad, pixels_excluded_sam) = sam_with_count(est, gt)?;
    Ok(MetricReport {
        mrae,
        rmse: rmse(est, gt)?,
        psnr_db: psnr(est, gt, 1.0)?,
        sam_rad,
        l1: l1(est, gt)?,
        pixels_excluded_sam,
        denom_floored_mrae,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cube::SpectralCube;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn cube(h: usize, w: usize, wl: &[f64], data: Vec<f64>) -> SpectralCube {
        SpectralCube::new(h, w, wl.to_vec(), data, false).unwrap()
    }

    fn constant(v: f64) -> SpectralCube {
        SpectralCube::filled(2, 3, vec![450.0, 550.0, 650.0], v).unwrap()
    }

    #[test]
    fn identical_inputs() {
        let c = constant(0.3);
        let r = report(&c, &c).unwrap();
        assert_eq!(r.mrae, 0.0);
        assert_eq!(r.rmse, 0.0);
        assert_eq!(r.l1, 0.0);
        assert_eq!(r.sam_rad, 0.0);
        assert!(r.psnr_db.is_infinite());
        let json = serde_json::to_value(r).unwrap();
        assert_eq!(json["psnr_db"], "inf");
    }

    #[test]
    fn constant_offsets() {
        let gt = constant(0.5);
        let est = constant(0.6);
        assert!((mrae(&est, &gt).unwrap() - 0.2).abs() < 1e-15);
        assert!((rmse(&est, &gt).unwrap() - 0.1).abs() < 1e-15);
        assert!((psnr(&est, &gt, 1.0).unwrap() - 20.0).abs() < 1e-12);
        let est = constant(0.55);
        assert!((l1(&est, &gt).unwrap() - 0.05).abs() < 1e-15);
    }

    #[test]
    fn mrae_floor_on_dark_pixel() {
        let gt = cube(1, 1, &[500.0], vec![0.0]);
        let est = cube(1, 1, &[500.0], vec![0.1]);
        let (v, floored) = mrae_with_count(&est, &gt).unwrap();
        assert!((v - 1e7).abs() < 1e-6);
        assert_eq!(floored, 1);
    }

    #[test]
    fn psnr_two_bands() {
        // per-band MSE 0.01 and 0.04: 20 dB and 20*log10(5) dB
        let gt = cube(1, 2, &[500.0, 600.0], vec![0.0; 4]);
        let est = cube(1, 2, &[500.0, 600.0], vec![0.1, -0.1, 0.2, 0.2]);
        let expected = (20.0 + 20.0 * 5f64.log10()) / 2.0;
        let got = psnr(&est, &gt, 1.0).unwrap();
        assert!((got - expected).abs() < 1e-12);
        assert!((got - 16.9897).abs() < 1e-4);
    }

    #[test]
    fn psnr_infinite_if_any_band_exact() {
        let gt = cube(1, 1, &[500.0, 600.0], vec![0.5, 0.5]);
        let est = cube(1, 1, &[500.0, 600.0], vec![0.5, 0.7]);
        assert!(psnr(&est, &gt, 1.0).unwrap().is_infinite());
    }

    #[test]
    fn sam_angles() {
        let wl = [500.0, 600.0];
        let a = cube(1, 1, &wl, vec![1.0, 0.0]);
        let b = cube(1, 1, &wl, vec![0.0, 1.0]);
        assert!((sam(&a, &b).unwrap() - FRAC_PI_2).abs() < 1e-15);
        let c = cube(1, 1, &wl, vec![1.0, 1.0]);
        assert!((sam(&c, &a).unwrap() - FRAC_PI_4).abs() < 1e-15);
        assert_eq!(sam(&c, &c).unwrap(), 0.0);
    }

    #[test]
    fn sam_excludes_dark_pixels() {
        let wl = [500.0, 600.0];
        let a = cube(1, 2, &wl, vec![0.0, 1.0, 0.0, 0.0]);
        let b = cube(1, 2, &wl, vec![0.3, 1.0, 0.4, 0.0]);
        let (v, excluded) = sam_with_count(&a, &b).unwrap();
        assert_eq!(excluded, 1);
        assert_eq!(v, 0.0);
        let (v, excluded) = sam_with_count(&a, &a).unwrap();
        assert_eq!((v, excluded), (0.0, 1));
    }

    #[test]
    fn l1_equals_mrae_for_unit_ground_truth() {
        let gt = constant(1.0);
        let est = cube(2, 3, &[450.0, 550.0, 650.0], (0..18).map(|i| i as f64 / 17.0).collect());
        assert!((l1(&est, &gt).unwrap() - mrae(&est, &gt).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn rmse_matches_hand_sum() {
        let wl = [450.0, 550.0, 650.0];
        let est_v: Vec<f64> = vec![0.12, 0.95, 0.33, 0.47, 0.81, 0.05, 0.66, 0.29, 0.73, 0.18, 0.54, 0.91];
        let gt_v: Vec<f64> = vec![0.10, 0.90, 0.40, 0.50, 0.80, 0.00, 0.70, 0.20, 0.75, 0.25, 0.50, 1.00];
        let mut acc = 0.0f64;
        for i in 0..12 {
            acc += (est_v[i] - gt_v[i]).powi(2);
        }
        let expected = (acc / 12.0).sqrt();
        let est = cube(2, 2, &wl, est_v);
        let gt = cube(2, 2, &wl, gt_v);
        assert!((rmse(&est, &gt).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let a = constant(0.1);
        let b = SpectralCube::filled(3, 2, vec![450.0, 550.0, 650.0], 0.1).unwrap();
        assert!(report(&a, &b).is_err());
    }
}
