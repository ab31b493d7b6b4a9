//! Patch grids and the spatial augmentations applied to patches.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cube::SpectralCube;
use crate::error::{validation, Result};

/// A lossless spatial transform. Rotations are counterclockwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugOp {
    Rot90,
    Rot180,
    Rot270,
    FlipH,
    FlipV,
}

impl AugOp {
    pub fn apply(self, cube: &SpectralCube) -> SpectralCube {
        let (h, w) = (cube.height(), cube.width());
        let (nh, nw) = match self {
            AugOp::Rot90 | AugOp::Rot270 => (w, h),
            _ => (h, w),
        };
        // source coordinate for each destination pixel
        let src = |y: usize, x: usize| -> (usize, usize) {
            match self {
                AugOp::Rot90 => (x, w - 1 - y),
                AugOp::Rot180 => (h - 1 - y, w - 1 - x),
                AugOp::Rot270 => (h - 1 - x, y),
                AugOp::FlipH => (y, w - 1 - x),
                AugOp::FlipV => (h - 1 - y, x),
            }
        };
        let mut data = Vec::with_capacity(cube.data().len());
        for k in 0..cube.bands() {
            let band = cube.band(k);
            for y in 0..nh {
                for x in 0..nw {
                    let (sy, sx) = src(y, x);
                    data.push(band[sy * w + sx]);
                }
            }
        }
        SpectralCube::new(nh, nw, cube.wavelengths().to_vec(), data, cube.is_normalized())
            .expect("permutation of a valid cube")
    }
}

pub fn apply_ops(cube: &SpectralCube, ops: &[AugOp]) -> SpectralCube {
    ops.iter().fold(cube.clone(), |c, op| op.apply(&c))
}

/// Draws a random rotation by a multiple of 90 degrees and independent
/// horizontal and vertical flips. Identity steps are left out of the list.
pub fn draw_ops<R: Rng + ?Sized>(rng: &mut R) -> Vec<AugOp> {
    let mut ops = Vec::new();
    match rng.random_range(0..4u32) {
        1 => ops.push(AugOp::Rot90),
        2 => ops.push(AugOp::Rot180),
        3 => ops.push(AugOp::Rot270),
        _ => {}
    }
    if rng.random::<bool>() {
        ops.push(AugOp::FlipH);
    }
    if rng.random::<bool>() {
        ops.push(AugOp::FlipV);
    }
    ops
}

fn axis_origins(len: usize, patch: usize, stride: usize) -> Vec<usize> {
    let last = len - patch;
    let mut v: Vec<usize> = (0..=last).step_by(stride).collect();
    if *v.last().unwrap() != last {
        v.push(last);
    }
    v
}

/// Top-left corners `(y, x)` of all patches: the stride grid plus one extra
/// row and column flush with the bottom and right edges when the grid does
/// not reach them.
pub fn patch_origins(
    height: usize,
    width: usize,
    patch: usize,
    stride: usize,
) -> Result<Vec<(usize, usize)>> {
    if patch == 0 || stride == 0 {
        return Err(validation("patch size and stride must be positive"));
    }
    if patch > height || patch > width {
        return Err(validation(format!(
            "patch size {patch} exceeds image {height}x{width}"
        )));
    }
    let ys = axis_origins(height, patch, stride);
    let xs = axis_origins(width, patch, stride);
    Ok(ys
        .iter()
        .flat_map(|&y| xs.iter().map(move |&x| (y, x)))
        .collect())
}

/// Copies the `height x width` window at `(y, x)`.
pub fn crop(cube: &SpectralCube, y: usize, x: usize, height: usize, width: usize) -> Result<SpectralCube> {
    if y + height > cube.height() || x + width > cube.width() || height == 0 || width == 0 {
        return Err(validation(format!(
            "window {height}x{width} at ({y}, {x}) outside {}x{} image",
            cube.height(),
            cube.width()
        )));
    }
    let src_w = cube.width();
    let mut data = Vec::with_capacity(height * width * cube.bands());
    for k in 0..cube.bands() {
        let band = cube.band(k);
        for row in y..y + height {
            data.extend_from_slice(&band[row * src_w + x..row * src_w + x + width]);
        }
    }
    SpectralCube::new(height, width, cube.wavelengths().to_vec(), data, cube.is_normalized())
}

/// The centered `height x width` window; odd margins put the extra pixel at
/// the bottom and right.
pub fn center_crop(cube: &SpectralCube, height: usize, width: usize) -> Result<SpectralCube> {
    let (y, x) = center_offset(cube, height, width)?;
    crop(cube, y, x, height, width)
}

pub(crate) fn center_offset(cube: &SpectralCube, height: usize, width: usize) -> Result<(usize, usize)> {
    if height > cube.height() || width > cube.width() {
        return Err(validation(format!(
            "crop {height}x{width} larger than image {}x{}",
            cube.height(),
            cube.width()
        )));
    }
    Ok(((cube.height() - height) / 2, (cube.width() - width) / 2))
}

/// One extracted patch, with everything needed to cut it again.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub origin: (usize, usize),
    pub ops: Vec<AugOp>,
    /// Per-patch seed; the augmentation draw uses a stream seeded from it.
    pub seed: u64,
    pub cube: SpectralCube,
}

/// Lazily cuts patches in origin order. Each patch takes one `u64` seed from
/// `rng`; when `spatial_aug` is set the ops are drawn from that seed.
pub fn extract_patches<'a, R: Rng + ?Sized>(
    cube: &'a SpectralCube,
    patch: usize,
    stride: usize,
    rng: &'a mut R,
    spatial_aug: bool,
) -> Result<impl Iterator<Item = Result<Patch>> + 'a> {
    let origins = patch_origins(cube.height(), cube.width(), patch, stride)?;
    Ok(origins.into_iter().map(move |(y, x)| {
        let seed: u64 = rng.random();
        let ops = if spatial_aug {
            draw_ops(&mut ChaCha8Rng::seed_from_u64(seed))
        } else {
            Vec::new()
        };
        let window = crop(cube, y, x, patch, patch)?;
        Ok(Patch {
            origin: (y, x),
            cube: apply_ops(&window, &ops),
            ops,
            seed,
        })
    }))
}
