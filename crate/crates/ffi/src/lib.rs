//! C ABI for `specforge`.
//!
//! Objects cross the boundary as opaque handles created by `sf_*_new`,
//! `sf_*_read` or an operation, and released with the matching `sf_*_free`.
//! Every function returns an [`SfStatus`]; on failure a description is
//! available from [`sf_last_error_message`] on the same thread. Panics never
//! unwind into C: they are caught and reported as `SF_STATUS_PANIC`.
//!
//! Cube data is band-major (`k`, then `y`, then `x`); RGB data is
//! channel-major. All buffers are `double`.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::OnceLock;

use specforge::colorimetry::{self, BitDepth, QuantizationSpec};
use specforge::degrade;
use specforge::metamer;
use specforge::metrics;
use specforge::optics::{self, ChromaticParams, GratingParams, Padding, PsfStack, RotationParams};
use specforge::{io, Error, RgbImage, SpectralCube, Srf, FORMAT_VERSIONS};

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SfStatus {
    Ok = 0,
    /// A required pointer argument was NULL.
    NullArgument = 1,
    Validation = 2,
    Format = 3,
    Io = 4,
    Codec = 5,
    /// A path was not valid UTF-8.
    InvalidUtf8 = 6,
    /// An internal panic was caught.
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SfPadding {
    Reflect = 0,
    Circular = 1,
}

impl From<SfPadding> for Padding {
    fn from(p: SfPadding) -> Self {
        match p {
            SfPadding::Reflect => Padding::Reflect,
            SfPadding::Circular => Padding::Circular,
        }
    }
}

pub struct SfCube(SpectralCube);
pub struct SfSrf(Srf);
pub struct SfRgb(RgbImage);
pub struct SfPsf(PsfStack);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SfChromaticParams {
    pub sigma0: f64,
    pub sigma_slope: f64,
    pub shift_slope: f64,
    pub ref_lambda: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SfGratingParams {
    pub eta: f64,
    pub disp_slope: f64,
    pub ref_lambda: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SfRotationParams {
    pub sigma_major: f64,
    pub sigma_minor: f64,
    pub angle_span: f64,
}

/// Clipping statistics of a generated metamer. `rgb_psnr_vs_source` is
/// `+inf` when `exact` is true.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SfMetamerInfo {
    pub alpha: f64,
    pub clipped_pixel_count: usize,
    pub exact: bool,
    pub rgb_psnr_vs_source: f64,
    pub max_abs_rgb_diff: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SfMetricReport {
    pub mrae: f64,
    pub rmse: f64,
    pub psnr_db: f64,
    pub sam_rad: f64,
    pub l1: f64,
    pub pixels_excluded_sam: usize,
    pub denom_floored_mrae: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(SfStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Validation(_) => SfStatus::Validation,
            Error::Format(_) => SfStatus::Format,
            Error::Io(_) => SfStatus::Io,
            Error::Codec { .. } => SfStatus::Codec,
        };
        Failure(status, e.to_string())
    }
}

type FfiResult<T> = std::result::Result<T, Failure>;

fn guard(f: impl FnOnce() -> FfiResult<()>) -> SfStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SfStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            SfStatus::Panic
        }
    }
}

fn null(name: &str) -> Failure {
    Failure(SfStatus::NullArgument, format!("{name} is NULL"))
}

unsafe fn get<'a, T>(p: *const T, name: &str) -> FfiResult<&'a T> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn slice<'a>(p: *const f64, len: usize, name: &str) -> FfiResult<&'a [f64]> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn utf8_path<'a>(p: *const c_char) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(SfStatus::InvalidUtf8, "path is not valid UTF-8".into()))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> FfiResult<()> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn copy_out(src: &[f64], buf: *mut f64, len: usize) -> FfiResult<()> {
    if len != src.len() {
        return Err(Failure(
            SfStatus::Validation,
            format!("buffer holds {len} values, {} required", src.len()),
        ));
    }
    if len > 0 {
        if buf.is_null() {
            return Err(null("buf"));
        }
        ptr::copy_nonoverlapping(src.as_ptr(), buf, len);
    }
    Ok(())
}

fn bits(b: u32) -> FfiResult<BitDepth> {
    Ok(BitDepth::from_bits(b)?)
}

/// Message for the last failed call on this thread, or NULL. The pointer
/// stays valid until the next `sf_*` call on the same thread.
#[no_mangle]
pub extern "C" fn sf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version and container formats, as a static string.
#[no_mangle]
pub extern "C" fn sf_version() -> *const c_char {
    static VERSION: OnceLock<CString> = OnceLock::new();
    VERSION
        .get_or_init(|| {
            CString::new(format!("{} (formats: {FORMAT_VERSIONS})", env!("CARGO_PKG_VERSION")))
                .expect("no NUL in version")
        })
        .as_ptr()
}

// ---- cubes

/// Builds a cube from `k` wavelengths and `h * w * k` band-major values.
#[no_mangle]
pub unsafe extern "C" fn sf_cube_new(
    height: usize,
    width: usize,
    bands: usize,
    wavelengths: *const f64,
    data: *const f64,
    out: *mut *mut SfCube,
) -> SfStatus {
    guard(|| {
        let wl = slice(wavelengths, bands, "wavelengths")?.to_vec();
        let values = slice(data, height * width * bands, "data")?.to_vec();
        let cube = SpectralCube::with_auto_flag(height, width, wl, values)?;
        put(out, SfCube(cube))
    })
}

#[no_mangle]
pub unsafe extern "C" fn sf_cube_read(path: *const c_char, out: *mut *mut SfCube) -> SfStatus {
    guard(|| put(out, SfCube(io::read_cube(utf8_path(path)?)?)))
}

#[no_mangle]
pub unsafe extern "C" fn sf_cube_write(cube: *const SfCube, path: *const c_char) -> SfStatus {
    guard(|| Ok(io::write_cube(&get(cube, "cube")?.0, utf8_path(path)?)?))
}

#[no_mangle]
pub unsafe extern "C" fn sf_cube_free(cube: *mut SfCube) {
    if !cube.is_null() {
        drop(Box::from_raw(cube));
    }
}

/// Any of the output pointers may be NULL.
#[no_mangle]
pub unsafe extern "C" fn sf_cube_dims(
    cube: *const SfCube,
    height: *mut usize,
    width: *mut usize,
    bands: *mut usize,
) -> SfStatus {
    guard(|| {
        let c = &get(cube, "cube")?.0;
        for (p, v) in [(height, c.height()), (width, c.width()), (bands, c.bands())] {
            if !p.is_null() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Copies the band-major samples; `len` must equal `h * w * k`.
#[no_mangle]
pub unsafe extern "C" fn sf_cube_copy_data(cube: *const SfCube, buf: *mut f64, len: usize) -> SfStatus {
    guard(|| copy_out(get(cube, "cube")?.0.data(), buf, len))
}

#[no_mangle]
pub unsafe extern "C" fn sf_cube_copy_wavelengths(cube: *const SfCube, buf: *mut f64, len: usize) -> SfStatus {
    guard(|| copy_out(get(cube, "cube")?.0.wavelengths(), buf, len))
}

// ---- spectral response

/// `q` holds `bands` rows of (r, g, b) sensitivities.
#[no_mangle]
pub unsafe extern "C" fn sf_srf_new(
    bands: usize,
    wavelengths: *const f64,
    q: *const f64,
    out: *mut *mut SfSrf,
) -> SfStatus {
    guard(|| {
        let wl = slice(wavelengths, bands, "wavelengths")?.to_vec();
        let rows = slice(q, bands * 3, "q")?
            .chunks_exact(3)
            .map(|r| [r[0], r[1], r[2]])
            .collect();
        put(out, SfSrf(Srf::new(wl, rows)?))
    })
}

/// Built-in Gaussian RGB response on the given grid.
#[no_mangle]
pub unsafe extern "C" fn sf_srf_gaussian(bands: usize, wavelengths: *const f64, out: *mut *mut SfSrf) -> SfStatus {
    guard(|| {
        let wl = slice(wavelengths, bands, "wavelengths")?;
        put(out, SfSrf(Srf::gaussian_rgb(wl)?))
    })
}

#[no_mangle]
pub unsafe extern "C" fn sf_srf_read(path: *const c_char, out: *mut *mut SfSrf) -> SfStatus {
    guard(|| put(out, SfSrf(io::read_srf(utf8_path(path)?)?)))
}

#[no_mangle]
pub unsafe extern "C" fn sf_srf_free(srf: *mut SfSrf) {
    if !srf.is_null() {
        drop(Box::from_raw(srf));
    }
}

// ---- RGB images

/// Builds an image from `3 * h * w` channel-major values.
#[no_mangle]
pub unsafe extern "C" fn sf_rgb_new(height: usize, width: usize, data: *const f64, out: *mut *mut SfRgb) -> SfStatus {
    guard(|| {
        let values = slice(data, 3 * height * width, "data")?.to_vec();
        put(out, SfRgb(RgbImage::new(height, width, values)?))
    })
}

#[no_mangle]
pub unsafe extern "C" fn sf_rgb_read(path: *const c_char, out: *mut *mut SfRgb) -> SfStatus {
    guard(|| put(out, SfRgb(io::read_rgb(utf8_path(path)?)?)))
}

/// Writes a PNG at 8 or 16 bits; values must lie in `[0, 1]`.
#[no_mangle]
pub unsafe extern "C" fn sf_rgb_write(rgb: *const SfRgb, path: *const c_char, bit_depth: u32) -> SfStatus {
    guard(|| {
        let d = bits(bit_depth)?;
        let img = colorimetry::quantize(&get(rgb, "rgb")?.0, QuantizationSpec::new(d));
        Ok(io::write_rgb(&img, utf8_path(path)?, d)?)
    })
}

#[no_mangle]
pub unsafe extern "C" fn sf_rgb_free(rgb: *mut SfRgb) {
    if !rgb.is_null() {
        drop(Box::from_raw(rgb));
    }
}

#[no_mangle]
pub unsafe extern "C" fn sf_rgb_dims(rgb: *const SfRgb, height: *mut usize, width: *mut usize) -> SfStatus {
    guard(|| {
        let r = &get(rgb, "rgb")?.0;
        if !height.is_null() {
            *height = r.height();
        }
        if !width.is_null() {
            *width = r.width();
        }
        Ok(())
    })
}

/// Copies the channel-major samples; `len` must equal `3 * h * w`.
#[no_mangle]
pub unsafe extern "C" fn sf_rgb_copy_data(rgb: *const SfRgb, buf: *mut f64, len: usize) -> SfStatus {
    guard(|| copy_out(get(rgb, "rgb")?.0.data(), buf, len))
}

// ---- formation

#[no_mangle]
pub unsafe extern "C" fn sf_project(cube: *const SfCube, srf: *const SfSrf, out: *mut *mut SfRgb) -> SfStatus {
    guard(|| {
        let rgb = colorimetry::project(&get(cube, "cube")?.0, &get(srf, "srf")?.0)?;
        put(out, SfRgb(rgb))
    })
}

#[no_mangle]
pub unsafe extern "C" fn sf_form_aberrated(
    cube: *const SfCube,
    psf: *const SfPsf,
    srf: *const SfSrf,
    out: *mut *mut SfRgb,
) -> SfStatus {
    guard(|| {
        let rgb = optics::form_aberrated(&get(cube, "cube")?.0, &get(psf, "psf")?.0, &get(srf, "srf")?.0)?;
        put(out, SfRgb(rgb))
    })
}

// ---- PSF stacks

#[no_mangle]
pub unsafe extern "C" fn sf_psf_read(path: *const c_char, out: *mut *mut SfPsf) -> SfStatus {
    guard(|| put(out, SfPsf(optics::read_psf(utf8_path(path)?)?)))
}

#[no_mangle]
pub unsafe extern "C" fn sf_psf_write(psf: *const SfPsf, path: *const c_char) -> SfStatus {
    guard(|| Ok(optics::write_psf(&get(psf, "psf")?.0, utf8_path(path)?)?))
}

#[no_mangle]
pub unsafe extern "C" fn sf_psf_free(psf: *mut SfPsf) {
    if !psf.is_null() {
        drop(Box::from_raw(psf));
    }
}

#[no_mangle]
pub unsafe extern "C" fn sf_psf_dims(
    psf: *const SfPsf,
    bands: *mut usize,
    kernel_height: *mut usize,
    kernel_width: *mut usize,
) -> SfStatus {
    guard(|| {
        let p = &get(psf, "psf")?.0;
        for (o, v) in [
            (bands, p.bands()),
            (kernel_height, p.kernel_height()),
            (kernel_width, p.kernel_width()),
        ] {
            if !o.is_null() {
                *o = v;
            }
        }
        Ok(())
    })
}

/// Copies all kernels back to back; `len` must equal `k * kh * kw`.
#[no_mangle]
pub unsafe extern "C" fn sf_psf_copy_kernels(psf: *const SfPsf, buf: *mut f64, len: usize) -> SfStatus {
    guard(|| copy_out(get(psf, "psf")?.0.kernel_data(), buf, len))
}

/// Fills `params` with the library defaults.
#[no_mangle]
pub unsafe extern "C" fn sf_chromatic_defaults(params: *mut SfChromaticParams) -> SfStatus {
    guard(|| {
        let p = params.as_mut().ok_or_else(|| null("params"))?;
        let d = ChromaticParams::default();
        *p = SfChromaticParams {
            sigma0: d.sigma0,
            sigma_slope: d.sigma_slope,
            shift_slope: d.shift_slope,
            ref_lambda: d.ref_lambda,
        };
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn sf_psf_chromatic(
    bands: usize,
    wavelengths: *const f64,
    params: *const SfChromaticParams,
    size: usize,
    padding: SfPadding,
    out: *mut *mut SfPsf,
) -> SfStatus {
    guard(|| {
        let wl = slice(wavelengths, bands, "wavelengths")?;
        let p = get(params, "params")?;
        let p = ChromaticParams {
            sigma0: p.sigma0,
            sigma_slope: p.sigma_slope,
            shift_slope: p.shift_slope,
            ref_lambda: p.ref_lambda,
        };
        let stack = optics::gen_chromatic(wl, &p, size)?.with_padding(padding.into());
        put(out, SfPsf(stack))
    })
}

#[no_mangle]
pub unsafe extern "C" fn sf_psf_grating(
    bands: usize,
    wavelengths: *const f64,
    params: *const SfGratingParams,
    size: usize,
    padding: SfPadding,
    out: *mut *mut SfPsf,
) -> SfStatus {
    guard(|| {
        let wl = slice(wavelengths, bands, "wavelengths")?;
        let p = get(params, "params")?;
        let p = GratingParams {
            eta: p.eta,
            disp_slope: p.disp_slope,
            ref_lambda: p.ref_lambda,
        };
        let stack = optics::gen_grating(wl, &p, size)?.with_padding(padding.into());
        put(out, SfPsf(stack))
    })
}

#[no_mangle]
pub unsafe extern "C" fn sf_psf_rotation(
    bands: usize,
    wavelengths: *const f64,
    params: *const SfRotationParams,
    size: usize,
    padding: SfPadding,
    out: *mut *mut SfPsf,
) -> SfStatus {
    guard(|| {
        let wl = slice(wavelengths, bands, "wavelengths")?;
        let p = get(params, "params")?;
        let p = RotationParams {
            sigma_major: p.sigma_major,
            sigma_minor: p.sigma_minor,
            angle_span: p.angle_span,
        };
        let stack = optics::gen_rotation(wl, &p, size)?.with_padding(padding.into());
        put(out, SfPsf(stack))
    })
}

// ---- metamers, degradation, metrics

/// Generates the clipped metamer `S* + alpha B`. `info` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn sf_metamer_generate(
    cube: *const SfCube,
    srf: *const SfSrf,
    alpha: f64,
    out: *mut *mut SfCube,
    info: *mut SfMetamerInfo,
) -> SfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let r = metamer::generate(&get(cube, "cube")?.0, &get(srf, "srf")?.0, alpha)?;
        if let Some(i) = info.as_mut() {
            *i = SfMetamerInfo {
                alpha: r.alpha,
                clipped_pixel_count: r.clipped_pixel_count,
                exact: r.exact,
                rgb_psnr_vs_source: r.rgb_psnr_vs_source,
                max_abs_rgb_diff: r.max_abs_rgb_diff,
            };
        }
        put(out, SfCube(r.cube))
    })
}

/// Shot noise at `npe` photon electrons full scale; `npe = 0` only clamps.
#[no_mangle]
pub unsafe extern "C" fn sf_poisson_noise(rgb: *const SfRgb, npe: f64, seed: u64, out: *mut *mut SfRgb) -> SfStatus {
    guard(|| put(out, SfRgb(degrade::poisson_noise(&get(rgb, "rgb")?.0, npe, seed)?)))
}

#[no_mangle]
pub unsafe extern "C" fn sf_quantize(rgb: *const SfRgb, bit_depth: u32, out: *mut *mut SfRgb) -> SfStatus {
    guard(|| {
        let spec = QuantizationSpec::new(bits(bit_depth)?);
        put(out, SfRgb(colorimetry::quantize(&get(rgb, "rgb")?.0, spec)))
    })
}

/// All metrics for an estimate against ground truth (PSNR peak 1.0).
#[no_mangle]
pub unsafe extern "C" fn sf_evaluate(est: *const SfCube, gt: *const SfCube, report: *mut SfMetricReport) -> SfStatus {
    guard(|| {
        let out = report.as_mut().ok_or_else(|| null("report"))?;
        let r = metrics::report(&get(est, "est")?.0, &get(gt, "gt")?.0)?;
        *out = SfMetricReport {
            mrae: r.mrae,
            rmse: r.rmse,
            psnr_db: r.psnr_db,
            sam_rad: r.sam_rad,
            l1: r.l1,
            pixels_excluded_sam: r.pixels_excluded_sam,
            denom_floored_mrae: r.denom_floored_mrae,
        };
        Ok(())
    })
}
