use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{validation, Result};

/// Kernels up to this size on both axes use the direct method.
pub const DIRECT_MAX_KERNEL: usize = 15;

/// Boundary handling for band convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    /// Mirror without repeating the edge sample (`d c b | a b c d | c b a`).
    #[default]
    Reflect,
    /// Periodic wrap-around.
    Circular,
}

impl Padding {
    pub fn code(self) -> u8 {
        match self {
            Padding::Reflect => 0,
            Padding::Circular => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Padding::Reflect),
            1 => Some(Padding::Circular),
            _ => None,
        }
    }

    /// Maps a possibly out-of-range index into `0..len`.
    pub(crate) fn index(self, i: isize, len: usize) -> usize {
        let n = len as isize;
        match self {
            Padding::Circular => i.rem_euclid(n) as usize,
            Padding::Reflect => {
                if n == 1 {
                    return 0;
                }
                let period = 2 * (n - 1);
                let m = i.rem_euclid(period);
                (if m < n { m } else { period - m }) as usize
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConvMethod {
    #[default]
    Auto,
    Direct,
    Fft,
}

/// A single-channel 2-D real image, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl Plane {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width {
            return Err(validation(format!(
                "plane data length {} does not match {height}x{width}",
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.data[y * self.width + x]
    }
}

pub(crate) fn check_kernel(kh: usize, kw: usize) -> Result<()> {
    if kh == 0 || kw == 0 || kh % 2 == 0 || kw % 2 == 0 {
        return Err(validation(format!(
            "kernel dimensions must be odd, got {kh}x{kw}"
        )));
    }
    Ok(())
}

/// Convolves `plane` with `kernel`, output cropped to the input size.
///
/// `out[y][x] = sum_{i,j} kernel[i][j] * in[y + cy - i][x + cx - j]` where
/// `(cy, cx)` is the kernel center and out-of-range input indices follow
/// `padding`. A kernel whose energy sits at `(cy, cx + d)` therefore moves
/// image content `d` pixels toward larger `x`.
pub fn convolve_band(plane: &Plane, kernel: &Plane, padding: Padding) -> Result<Plane> {
    convolve_band_with(plane, kernel, padding, ConvMethod::Auto)
}

pub fn convolve_band_with(
    plane: &Plane,
    kernel: &Plane,
    padding: Padding,
    method: ConvMethod,
) -> Result<Plane> {
    check_kernel(kernel.height, kernel.width)?;
    if kernel.height > plane.height || kernel.width > plane.width {
        return Err(validation(format!(
            "kernel {}x{} larger than image {}x{}",
            kernel.height, kernel.width, plane.height, plane.width
        )));
    }
    let padded = pad(plane, kernel.height / 2, kernel.width / 2, padding);
    let direct = match method {
        ConvMethod::Auto => kernel.height <= DIRECT_MAX_KERNEL && kernel.width <= DIRECT_MAX_KERNEL,
        ConvMethod::Direct => true,
        ConvMethod::Fft => false,
    };
    let data = if direct {
        direct_valid(&padded, kernel, plane.height, plane.width)
    } else {
        fft_valid(&padded, kernel, plane.height, plane.width)
    };
    Ok(Plane {
        height: plane.height,
        width: plane.width,
        data,
    })
}

/// Extends the plane by `ry` rows and `rx` columns on each side.
fn pad(plane: &Plane, ry: usize, rx: usize, padding: Padding) -> Plane {
    let (h, w) = (plane.height + 2 * ry, plane.width + 2 * rx);
    let mut data = Vec::with_capacity(h * w);
    for py in 0..h {
        let sy = padding.index(py as isize - ry as isize, plane.height);
        let row = &plane.data[sy * plane.width..(sy + 1) * plane.width];
        for px in 0..w {
            data.push(row[padding.index(px as isize - rx as isize, plane.width)]);
        }
    }
    Plane {
        height: h,
        width: w,
        data,
    }
}

fn direct_valid(padded: &Plane, kernel: &Plane, h: usize, w: usize) -> Vec<f64> {
    let (kh, kw) = (kernel.height, kernel.width);
    let mut out = vec![0.0; h * w];
    // flipped-kernel correlation over the padded plane
    for i in 0..kh {
        for j in 0..kw {
            let k = kernel.data[(kh - 1 - i) * kw + (kw - 1 - j)];
            if k == 0.0 {
                continue;
            }
            for y in 0..h {
                let src = &padded.data[(y + i) * padded.width + j..][..w];
                let dst = &mut out[y * w..(y + 1) * w];
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d += k * s;
                }
            }
        }
    }
    out
}

fn fft2(buf: &mut [Complex<f64>], h: usize, w: usize, planner: &mut FftPlanner<f64>, inverse: bool) {
    let row_fft = if inverse {
        planner.plan_fft_inverse(w)
    } else {
        planner.plan_fft_forward(w)
    };
    row_fft.process(buf);
    let mut t = vec![Complex::new(0.0, 0.0); h * w];
    for y in 0..h {
        for x in 0..w {
            t[x * h + y] = buf[y * w + x];
        }
    }
    let col_fft = if inverse {
        planner.plan_fft_inverse(h)
    } else {
        planner.plan_fft_forward(h)
    };
    col_fft.process(&mut t);
    for x in 0..w {
        for y in 0..h {
            buf[y * w + x] = t[x * h + y];
        }
    }
}

fn fft_valid(padded: &Plane, kernel: &Plane, h: usize, w: usize) -> Vec<f64> {
    let (kh, kw) = (kernel.height, kernel.width);
    // full linear convolution size, so nothing wraps
    let fh = padded.height + kh - 1;
    let fw = padded.width + kw - 1;
    let zero = Complex::new(0.0, 0.0);
    let mut a = vec![zero; fh * fw];
    for y in 0..padded.height {
        for x in 0..padded.width {
            a[y * fw + x] = Complex::new(padded.data[y * padded.width + x], 0.0);
        }
    }
    let mut b = vec![zero; fh * fw];
    for y in 0..kh {
        for x in 0..kw {
            b[y * fw + x] = Complex::new(kernel.data[y * kw + x], 0.0);
        }
    }
    let mut planner = FftPlanner::new();
    fft2(&mut a, fh, fw, &mut planner, false);
    fft2(&mut b, fh, fw, &mut planner, false);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= y;
    }
    fft2(&mut a, fh, fw, &mut planner, true);
    let scale = 1.0 / (fh * fw) as f64;
    let (oy, ox) = (kh - 1, kw - 1);
    let mut out = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            out.push(a[(y + oy) * fw + x + ox].re * scale);
        }
    }
    out
}
