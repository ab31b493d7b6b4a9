//! Brute-force reference implementations for verification.
//!
//! Nothing here is fast. Formation is evaluated literally as dense matrix
//! products (one `MN x MN` operator per band, stacked into a `KMN x MN`
//! block matrix), and the metamer projector uses an explicit 3x3 inverse,
//! so the checks share no code path with the production routines.

use crate::cube::{RgbImage, SpectralCube, Srf};
use crate::error::{validation, Result};
use crate::optics::{Plane, PsfStack};

/// Upper bound on `M * N` for dense operators.
pub const MAX_DENSE_PIXELS: usize = 4096;

/// Dense circular-convolution operator for one band, row-major `(MN) x (MN)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    pub band: usize,
    pub size: usize,
    pub matrix: Vec<f64>,
}

impl DenseOperator {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.matrix
            .chunks_exact(self.size)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.matrix
            .chunks_exact(self.size)
            .map(|row| row.iter().sum())
            .collect()
    }
}

/// Builds the matrix with `(A x)[y,x] = sum_{i,j} k[i][j] x[(y+cy-i) mod M][(x+cx-j) mod N]`.
pub fn build_dense(kernel: &Plane, height: usize, width: usize) -> Result<DenseOperator> {
    build_dense_band(kernel, height, width, 0)
}

fn build_dense_band(kernel: &Plane, height: usize, width: usize, band: usize) -> Result<DenseOperator> {
    let n = height * width;
    if n == 0 || n > MAX_DENSE_PIXELS {
        return Err(validation(format!(
            "dense operator needs 1..={MAX_DENSE_PIXELS} pixels, got {n}"
        )));
    }
    if kernel.height % 2 == 0 || kernel.width % 2 == 0 {
        return Err(validation("kernel dimensions must be odd"));
    }
    let (cy, cx) = ((kernel.height / 2) as i64, (kernel.width / 2) as i64);
    let (m, nn) = (height as i64, width as i64);
    let mut matrix = vec![0.0; n * n];
    for y in 0..m {
        for x in 0..nn {
            let row = (y * nn + x) as usize;
            for i in 0..kernel.height as i64 {
                for j in 0..kernel.width as i64 {
                    let sy = (y + cy - i).rem_euclid(m);
                    let sx = (x + cx - j).rem_euclid(nn);
                    let col = (sy * nn + sx) as usize;
                    matrix[row * n + col] += kernel.get(i as usize, j as usize);
                }
            }
        }
    }
    Ok(DenseOperator {
        band,
        size: n,
        matrix,
    })
}

/// `Z = diag(A X) Q` evaluated with explicit dense products.
///
/// `A` stacks the per-band operators vertically (`KMN x MN`), `X` is the
/// `MN x K` pixel-by-band matrix, and `diag` keeps block `(k, k)` of the
/// `KMN x K` product, i.e. column `k` of the `k`-th row block.
pub fn form_aberrated_dense(cube: &SpectralCube, psf: &PsfStack, srf: &Srf) -> Result<RgbImage> {
    let (k, n) = (cube.bands(), cube.pixels());
    if psf.bands() != k || srf.bands() != k {
        return Err(validation("band counts of cube, PSF and SRF differ"));
    }
    let ops: Vec<DenseOperator> = (0..k)
        .map(|b| build_dense_band(&psf.kernel(b), cube.height(), cube.width(), b))
        .collect::<Result<_>>()?;
    // X as row-major MN x K
    let mut x = vec![0.0; n * k];
    for b in 0..k {
        for p in 0..n {
            x[p * k + b] = cube.band(b)[p];
        }
    }
    // AX: row-major (K*MN) x K
    let mut ax = vec![0.0; k * n * k];
    for (blk, op) in ops.iter().enumerate() {
        for r in 0..n {
            let arow = &op.matrix[r * n..(r + 1) * n];
            for c in 0..k {
                let mut acc = 0.0;
                for (t, a) in arow.iter().enumerate() {
                    acc += a * x[t * k + c];
                }
                ax[(blk * n + r) * k + c] = acc;
            }
        }
    }
    // W = diag(AX): MN x K
    let mut w = vec![0.0; n * k];
    for blk in 0..k {
        for r in 0..n {
            w[r * k + blk] = ax[(blk * n + r) * k + blk];
        }
    }
    // Z = W Q, stored planar
    let mut z = vec![0.0; n * 3];
    for r in 0..n {
        for c in 0..3 {
            let mut acc = 0.0;
            for b in 0..k {
                acc += w[r * k + b] * srf.rows()[b][c];
            }
            z[c * n + r] = acc;
        }
    }
    RgbImage::new(cube.height(), cube.width(), z)
}

fn inverse_3x3(m: &[[f64; 3]; 3]) -> Result<[[f64; 3]; 3]> {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    let scale = m.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
    if det.abs() <= 1e-14 * scale.powi(3) {
        return Err(validation("Q^T Q is singular"));
    }
    let mut inv = [[0.0; 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            // adjugate entry (r, c) is the cofactor of (c, r)
            let (r1, r2) = ((c + 1) % 3, (c + 2) % 3);
            let (c1, c2) = ((r + 1) % 3, (r + 2) % 3);
            inv[r][c] = (m[r1][c1] * m[r2][c2] - m[r1][c2] * m[r2][c1]) / det;
        }
    }
    Ok(inv)
}

/// Explicit `P = Q (Q^T Q)^-1 Q^T`, row-major `K x K`.
///
/// Fails unless `P P == P` and `Q^T (I - P) == 0`, both within 1e-9.
pub fn projector_dense(srf: &Srf) -> Result<Vec<f64>> {
    let q = srf.rows();
    let k = q.len();
    let mut qtq = [[0.0; 3]; 3];
    for row in q {
        for a in 0..3 {
            for b in 0..3 {
                qtq[a][b] += row[a] * row[b];
            }
        }
    }
    let g = inverse_3x3(&qtq)?;
    let mut p = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            let mut acc = 0.0;
            for a in 0..3 {
                for b in 0..3 {
                    acc += q[i][a] * g[a][b] * q[j][b];
                }
            }
            p[i * k + j] = acc;
        }
    }
    for i in 0..k {
        for j in 0..k {
            let pp: f64 = (0..k).map(|t| p[i * k + t] * p[t * k + j]).sum();
            if (pp - p[i * k + j]).abs() > 1e-9 {
                return Err(validation("projector is not idempotent"));
            }
        }
    }
    for c in 0..3 {
        for j in 0..k {
            let v: f64 = (0..k)
                .map(|i| q[i][c] * (if i == j { 1.0 } else { 0.0 } - p[i * k + j]))
                .sum();
            if v.abs() > 1e-9 {
                return Err(validation("Q^T (I - P) is not zero"));
            }
        }
    }
    Ok(p)
}
