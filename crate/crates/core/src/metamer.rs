//! Metameric black decomposition and metamer generation.
//!
//! Every spectrum `S` splits into a fundamental metamer `S* = P S`, where `P`
//! is the orthogonal projector onto the column space of the camera response
//! `Q`, and a metameric black `B = S - S*` that projects to zero RGB. Scaling
//! the black, `S* + alpha B`, produces spectra that all share one RGB value;
//! `alpha = 1` recovers the source and `alpha = 0` the fundamental metamer.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::colorimetry::{check_grid, project, project_planes};
use crate::cube::{Planar, RgbImage, SpectralCube, Srf};
use crate::error::{validation, Result};
use crate::metrics::{self, deserialize_db, serialize_db};
use crate::optics::{self, PsfStack};

/// Relative singular-value threshold below which the response is rank deficient.
pub const RANK_TOLERANCE: f64 = 1e-10;
/// Largest RGB deviation for which a clipped metamer still counts as exact.
pub const EXACT_TOLERANCE: f64 = 1e-9;

/// The `K x K` projector onto the span of the response columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    bands: usize,
    matrix: Vec<f64>,
}

impl Projector {
    /// Builds `P = Q (Q^T Q)^-1 Q^T` as `U U^T` from a thin SVD of `Q`, which
    /// also provides the rank check.
    pub fn new(srf: &Srf) -> Result<Self> {
        let k = srf.bands();
        if k < 3 {
            return Err(validation(format!(
                "metamer projector needs at least 3 bands, SRF has {k}"
            )));
        }
        let q = DMatrix::from_fn(k, 3, |r, c| srf.rows()[r][c]);
        let svd = q.svd(true, false);
        let sv = &svd.singular_values;
        let smax = sv.max();
        let smin = sv.min();
        if !(smin > RANK_TOLERANCE * smax) {
            return Err(validation(format!(
                "SRF is rank deficient (singular values {smax:e} .. {smin:e})"
            )));
        }
        let u = svd.u.expect("left singular vectors requested");
        let p = &u * u.transpose();
        let mut matrix = Vec::with_capacity(k * k);
        for r in 0..k {
            for c in 0..k {
                matrix.push(p[(r, c)]);
            }
        }
        Ok(Self { bands: k, matrix })
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    /// Row-major `K x K` entries.
    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    pub fn apply(&self, spectrum: &[f64]) -> Vec<f64> {
        let k = self.bands;
        (0..k)
            .map(|r| {
                self.matrix[r * k..(r + 1) * k]
                    .iter()
                    .zip(spectrum)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    /// Applies the projector to every pixel of band-major planes.
    fn apply_planes(&self, planes: &[f64], pixels: usize) -> Vec<f64> {
        let k = self.bands;
        let mut out = vec![0.0; planes.len()];
        for r in 0..k {
            let dst = &mut out[r * pixels..(r + 1) * pixels];
            for c in 0..k {
                let w = self.matrix[r * k + c];
                let src = &planes[c * pixels..(c + 1) * pixels];
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d += w * s;
                }
            }
        }
        out
    }
}

/// Fundamental metamer and metameric black of a cube.
#[derive(Debug, Clone, PartialEq)]
pub struct MetamerDecomposition {
    pub fundamental: SpectralCube,
    pub black: SpectralCube,
}

pub fn decompose(cube: &SpectralCube, srf: &Srf) -> Result<MetamerDecomposition> {
    check_grid(cube, srf)?;
    let projector = Projector::new(srf)?;
    decompose_with(cube, &projector)
}

pub fn decompose_with(cube: &SpectralCube, projector: &Projector) -> Result<MetamerDecomposition> {
    if projector.bands() != cube.bands() {
        return Err(validation("projector and cube band counts differ"));
    }
    let fundamental = projector.apply_planes(cube.data(), cube.pixels());
    let black: Vec<f64> = cube
        .data()
        .iter()
        .zip(&fundamental)
        .map(|(s, f)| s - f)
        .collect();
    let (h, w, wl) = (cube.height(), cube.width(), cube.wavelengths().to_vec());
    Ok(MetamerDecomposition {
        fundamental: SpectralCube::new(h, w, wl.clone(), fundamental, false)?,
        black: SpectralCube::new(h, w, wl, black, false)?,
    })
}

/// Unclipped metamer `S* + alpha B` for a cube and its decomposition.
///
/// Evaluated as `S + (alpha - 1) B`, which is the same quantity and makes
/// `alpha = 1` return the source bit for bit.
pub fn candidate(
    source: &SpectralCube,
    decomposition: &MetamerDecomposition,
    alpha: f64,
) -> Result<SpectralCube> {
    if !alpha.is_finite() {
        return Err(validation("alpha must be finite"));
    }
    if !source.same_shape(&decomposition.black) {
        return Err(validation("decomposition does not match source cube"));
    }
    let scale = alpha - 1.0;
    let data: Vec<f64> = source
        .data()
        .iter()
        .zip(decomposition.black.data())
        .map(|(s, b)| if scale == 0.0 { *s } else { s + scale * b })
        .collect();
    SpectralCube::new(
        source.height(),
        source.width(),
        source.wavelengths().to_vec(),
        data,
        false,
    )
}

/// A clipped metamer together with how far clipping moved its RGB image.
#[derive(Debug, Clone, PartialEq)]
pub struct MetamerResult {
    pub alpha: f64,
    /// Non-negative metamer; flagged normalized when every value is in `[0, 1]`
    /// (for `alpha = 1`, the source's flag).
    pub cube: SpectralCube,
    /// Pixels where at least one band was clipped at zero.
    pub clipped_pixel_count: usize,
    /// RGB of the clipped cube matches the source within [`EXACT_TOLERANCE`].
    pub exact: bool,
    /// PSNR between clipped and source RGB (peak 1.0); `+inf` when exact.
    pub rgb_psnr_vs_source: f64,
    pub max_abs_rgb_diff: f64,
}

impl MetamerResult {
    pub fn summary(&self) -> MetamerSummary {
        MetamerSummary {
            alpha: self.alpha,
            clipped_pixel_count: self.clipped_pixel_count,
            exact: self.exact,
            rgb_psnr_vs_source: self.rgb_psnr_vs_source,
            max_abs_rgb_diff: self.max_abs_rgb_diff,
            pixels: self.cube.pixels(),
        }
    }
}

/// JSON-friendly view of a [`MetamerResult`] without the cube payload.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetamerSummary {
    pub alpha: f64,
    pub clipped_pixel_count: usize,
    pub exact: bool,
    #[serde(serialize_with = "serialize_db", deserialize_with = "deserialize_db")]
    pub rgb_psnr_vs_source: f64,
    pub max_abs_rgb_diff: f64,
    pub pixels: usize,
}

pub fn generate(cube: &SpectralCube, srf: &Srf, alpha: f64) -> Result<MetamerResult> {
    let decomposition = decompose(cube, srf)?;
    let source_rgb = project(cube, srf)?;
    generate_from(cube, &decomposition, &source_rgb, srf, alpha)
}

/// [`generate`] with a precomputed decomposition and source projection, for
/// callers drawing many metamers from one cube.
pub fn generate_from(
    cube: &SpectralCube,
    decomposition: &MetamerDecomposition,
    source_rgb: &RgbImage,
    srf: &Srf,
    alpha: f64,
) -> Result<MetamerResult> {
    let pre = candidate(cube, decomposition, alpha)?;
    let n = cube.pixels();
    let mut clipped_pixels = vec![false; n];
    let data: Vec<f64> = pre
        .data()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if v < 0.0 {
                clipped_pixels[i % n] = true;
                0.0
            } else {
                v
            }
        })
        .collect();
    let clipped_pixel_count = clipped_pixels.iter().filter(|&&c| c).count();
    let (h, w, wl) = (cube.height(), cube.width(), cube.wavelengths().to_vec());
    // alpha = 1 is the source itself, so it keeps the source's flag
    let clipped = if alpha == 1.0 {
        SpectralCube::new(h, w, wl, data, cube.is_normalized())?
    } else {
        SpectralCube::with_auto_flag(h, w, wl, data)?
    };
    let rgb = RgbImage::new(
        cube.height(),
        cube.width(),
        project_planes(clipped.data(), n, srf),
    )?;
    let max_abs_rgb_diff = max_abs_diff(rgb.samples(), source_rgb.samples());
    let exact = max_abs_rgb_diff <= EXACT_TOLERANCE;
    let rgb_psnr_vs_source = if exact {
        f64::INFINITY
    } else {
        metrics::psnr(&rgb, source_rgb, 1.0)?
    };
    Ok(MetamerResult {
        alpha,
        cube: clipped,
        clipped_pixel_count,
        exact,
        rgb_psnr_vs_source,
        max_abs_rgb_diff,
    })
}

/// Draws a metamer coefficient uniformly from `[lo, hi]`.
pub fn sample_alpha<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> Result<f64> {
    if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
        return Err(validation(format!("alpha range [{lo}, {hi}] is empty or invalid")));
    }
    Ok(rng.random_range(lo..=hi))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparabilityReport {
    pub max_abs_rgb_diff: f64,
    pub mean_abs_rgb_diff: f64,
    /// Per-sample `|rgb(a) - rgb(b)|`.
    pub diff_image: RgbImage,
}

/// Pushes both cubes through the same formation and compares the RGB images.
pub fn separability(
    a: &SpectralCube,
    b: &SpectralCube,
    srf: &Srf,
    psf: Option<&PsfStack>,
) -> Result<SeparabilityReport> {
    if !a.same_shape(b) {
        return Err(validation(format!(
            "cube shapes differ: {}x{}x{} vs {}x{}x{}",
            a.height(),
            a.width(),
            a.bands(),
            b.height(),
            b.width(),
            b.bands()
        )));
    }
    if a.wavelengths() != b.wavelengths() {
        return Err(validation("cube wavelength grids differ"));
    }
    let ra = optics::form(a, psf, srf)?;
    let rb = optics::form(b, psf, srf)?;
    let diff: Vec<f64> = ra
        .samples()
        .iter()
        .zip(rb.samples())
        .map(|(x, y)| (x - y).abs())
        .collect();
    let max_abs_rgb_diff = diff.iter().cloned().fold(0.0, f64::max);
    let mean_abs_rgb_diff = diff.iter().sum::<f64>() / diff.len() as f64;
    Ok(SeparabilityReport {
        max_abs_rgb_diff,
        mean_abs_rgb_diff,
        diff_image: RgbImage::new(a.height(), a.width(), diff)?,
    })
}

pub(crate) fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cube::default_wavelengths;
    use crate::error::Error;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn four_band() -> (SpectralCube, Srf) {
        let wl = vec![400.0, 500.0, 600.0, 700.0];
        let srf = Srf::new(
            wl.clone(),
            vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 0.0]],
        )
        .unwrap();
        let cube = SpectralCube::new(1, 1, wl, vec![0.1, 0.2, 0.3, 0.4], true).unwrap();
        (cube, srf)
    }

    fn random_cube(rng: &mut ChaCha8Rng, h: usize, w: usize) -> SpectralCube {
        SpectralCube::from_fn(h, w, default_wavelengths(), |_, _, _| rng.random::<f64>()).unwrap()
    }

    #[test]
    fn orthonormal_columns_select_coordinates() {
        let (cube, srf) = four_band();
        let d = decompose(&cube, &srf).unwrap();
        let expect_f = [0.1, 0.2, 0.3, 0.0];
        let expect_b = [0.0, 0.0, 0.0, 0.4];
        for i in 0..4 {
            assert!((d.fundamental.data()[i] - expect_f[i]).abs() < 1e-12);
            assert!((d.black.data()[i] - expect_b[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn full_rank_three_band_has_no_black() {
        let wl = vec![450.0, 550.0, 650.0];
        let srf = Srf::new(
            wl.clone(),
            vec![[0.9, 0.2, 0.0], [0.1, 0.8, 0.3], [0.0, 0.3, 0.7]],
        )
        .unwrap();
        let cube = SpectralCube::new(1, 2, wl, vec![0.1, 0.5, 0.2, 0.9, 0.7, 0.3], true).unwrap();
        let d = decompose(&cube, &srf).unwrap();
        assert!(d.black.data().iter().all(|v| v.abs() < 1e-12));
        for (a, b) in d.fundamental.data().iter().zip(cube.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn black_projects_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cube = random_cube(&mut rng, 5, 4);
        let srf = Srf::gaussian_rgb(&default_wavelengths()).unwrap();
        let d = decompose(&cube, &srf).unwrap();
        let rgb = project(&d.black, &srf).unwrap();
        assert!(rgb.data().iter().all(|v| v.abs() <= 1e-9));
        // sum reconstructs the source
        for ((f, b), s) in d.fundamental.data().iter().zip(d.black.data()).zip(cube.data()) {
            assert!((f + b - s).abs() <= 1e-9);
        }
    }

    #[test]
    fn rank_deficient_response_is_rejected() {
        let wl = vec![400.0, 500.0, 600.0, 700.0];
        let srf = Srf::new(
            wl.clone(),
            vec![[1.0, 2.0, 0.0], [1.0, 2.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 1.0]],
        )
        .unwrap();
        let cube = SpectralCube::filled(1, 1, wl, 0.5).unwrap();
        assert!(matches!(decompose(&cube, &srf), Err(Error::Validation(_))));
    }

    #[test]
    fn alpha_one_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cube = random_cube(&mut rng, 4, 4);
        let srf = Srf::gaussian_rgb(&default_wavelengths()).unwrap();
        let r = generate(&cube, &srf, 1.0).unwrap();
        assert_eq!(r.cube, cube);
        assert!(r.exact);
        assert_eq!(r.clipped_pixel_count, 0);
        assert!(r.rgb_psnr_vs_source.is_infinite());
    }

    #[test]
    fn alpha_zero_keeps_rgb_when_fundamental_nonnegative() {
        let (cube, srf) = four_band();
        let r = generate(&cube, &srf, 0.0).unwrap();
        assert!(r.exact);
        let a = project(&r.cube, &srf).unwrap();
        let b = project(&cube, &srf).unwrap();
        assert!(max_abs_diff(a.data(), b.data()) <= 1e-9);
    }

    #[test]
    fn negative_alpha_clips() {
        let (cube, srf) = four_band();
        let pre = candidate(&cube, &decompose(&cube, &srf).unwrap(), -1.0).unwrap();
        let expect = [0.1, 0.2, 0.3, -0.4];
        for (a, b) in pre.data().iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        let r = generate(&cube, &srf, -1.0).unwrap();
        assert_eq!(r.clipped_pixel_count, 1);
        assert!((r.cube.data()[3]).abs() == 0.0);
        // the dropped band has zero response here, so RGB is unchanged
        assert!(r.exact);

        // give band 4 a response and clipping becomes visible; the black is
        // now (-0.5, -0.5, -0.5, 1) * 0.1 / 1.75 so alpha = -10 drives band 4 negative
        let wl = cube.wavelengths().to_vec();
        let srf2 = Srf::new(
            wl,
            vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.5, 0.5, 0.5]],
        )
        .unwrap();
        let r = generate(&cube, &srf2, -10.0).unwrap();
        assert_eq!(r.clipped_pixel_count, 1);
        assert!(!r.exact);
        assert!(r.rgb_psnr_vs_source.is_finite());
        assert!(r.max_abs_rgb_diff > 1e-9);
    }

    #[test]
    fn alpha_sampling() {
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..5).map(|_| sample_alpha(&mut rng, -1.0, 2.0).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(draw(9), draw(9));
        assert_ne!(draw(9), draw(10));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(matches!(sample_alpha(&mut rng, 2.0, 2.0), Err(Error::Validation(_))));
        assert!(matches!(sample_alpha(&mut rng, 2.0, -1.0), Err(Error::Validation(_))));
    }

    #[test]
    fn uniform_alpha_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let a = sample_alpha(&mut rng, -1.0, 2.0).unwrap();
            assert!((-1.0..=2.0).contains(&a));
            sum += a;
        }
        // sample-mean standard error is 3/sqrt(12 n) ~ 0.0027
        assert!((sum / n as f64 - 0.5).abs() < 0.03);
    }

    #[test]
    fn separability_basics() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_cube(&mut rng, 6, 6);
        let srf = Srf::gaussian_rgb(&default_wavelengths()).unwrap();
        let same = separability(&a, &a, &srf, None).unwrap();
        assert_eq!(same.max_abs_rgb_diff, 0.0);
        let d = decompose(&a, &srf).unwrap();
        let b = candidate(&a, &d, 0.0).unwrap();
        assert!(separability(&a, &b, &srf, None).unwrap().max_abs_rgb_diff <= 1e-9);
        let small = random_cube(&mut rng, 5, 6);
        assert!(matches!(
            separability(&a, &small, &srf, None),
            Err(Error::Validation(_))
        ));
    }
}
