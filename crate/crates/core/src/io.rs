//! File containers: HSC datacubes, SRF tables and lossless PNG color images.
//!
//! HSC layout (little-endian):
//!
//! ```text
//! "HSC1" | u32 height | u32 width | u32 bands | u8 normalized | 3 reserved
//!        | bands x f32 wavelengths | height*width*bands x f32 samples (band-major)
//! ```
//!
//! All writers stage the bytes in a sibling temporary file and rename it into
//! place, so a failed write never leaves a partial file at `path`.

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::colorimetry::BitDepth;
use crate::cube::{RgbImage, SpectralCube, Srf};
use crate::error::{format_err, validation, Error, Result};

pub const HSC_MAGIC: &[u8; 4] = b"HSC1";
pub const HSC_HEADER_LEN: usize = 20;

/// Writes `bytes` to `path` via a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = temp_sibling(path);
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(Error::from)
}

fn temp_sibling(path: &Path) -> PathBuf {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!(".{name}.{}.tmp", std::process::id()))
}

pub(crate) struct LeReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> LeReader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| format_err("truncated file"))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn f32s(&mut self, count: usize) -> Result<Vec<f64>> {
        let bytes = count
            .checked_mul(4)
            .ok_or_else(|| format_err("declared dimensions overflow"))?;
        Ok(self
            .take(bytes)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect())
    }

    pub(crate) fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}

pub(crate) fn push_f32s(out: &mut Vec<u8>, values: &[f64]) {
    for &v in values {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
}

/// Serializes a cube to HSC bytes. Samples are rounded to `f32`.
pub fn encode_cube(cube: &SpectralCube) -> Result<Vec<u8>> {
    cube.validate()?;
    let dim = |v: usize, what: &str| {
        u32::try_from(v).map_err(|_| validation(format!("{what} {v} exceeds u32")))
    };
    let mut out = Vec::with_capacity(HSC_HEADER_LEN + 4 * (cube.bands() + cube.data().len()));
    out.extend_from_slice(HSC_MAGIC);
    out.extend_from_slice(&dim(cube.height(), "height")?.to_le_bytes());
    out.extend_from_slice(&dim(cube.width(), "width")?.to_le_bytes());
    out.extend_from_slice(&dim(cube.bands(), "bands")?.to_le_bytes());
    out.push(u8::from(cube.is_normalized()));
    out.extend_from_slice(&[0u8; 3]);
    push_f32s(&mut out, cube.wavelengths());
    push_f32s(&mut out, cube.data());
    Ok(out)
}

pub fn decode_cube(bytes: &[u8]) -> Result<SpectralCube> {
    let mut r = LeReader::new(bytes);
    if r.take(4).map_err(|_| format_err("file too short for HSC magic"))? != HSC_MAGIC {
        return Err(format_err("bad magic, expected HSC1"));
    }
    let height = r.u32()? as usize;
    let width = r.u32()? as usize;
    let bands = r.u32()? as usize;
    let flag = r.u8()?;
    r.take(3)?;
    if bands == 0 {
        return Err(format_err("HSC header declares zero bands"));
    }
    let normalized = match flag {
        0 => false,
        1 => true,
        other => return Err(format_err(format!("invalid normalized flag {other}"))),
    };
    let samples = height
        .checked_mul(width)
        .and_then(|n| n.checked_mul(bands))
        .ok_or_else(|| format_err("declared dimensions overflow"))?;
    let wavelengths = r.f32s(bands)?;
    let data = r
        .f32s(samples)
        .map_err(|_| format_err("payload shorter than header dimensions"))?;
    if r.remaining() != 0 {
        return Err(format_err(format!(
            "{} trailing bytes after declared payload",
            r.remaining()
        )));
    }
    SpectralCube::new(height, width, wavelengths, data, normalized)
}

pub fn read_cube(path: impl AsRef<Path>) -> Result<SpectralCube> {
    decode_cube(&fs::read(path)?)
}

pub fn write_cube(cube: &SpectralCube, path: impl AsRef<Path>) -> Result<()> {
    let bytes = encode_cube(cube)?;
    write_atomic(path.as_ref(), &bytes)
}

const SRF_HEADER: &str = "wavelength_nm,r,g,b";

pub fn parse_srf(text: &str) -> Result<Srf> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    match lines.next() {
        Some(h) if h.trim_start_matches('\u{feff}') == SRF_HEADER => {}
        Some(h) => return Err(format_err(format!("unexpected SRF header {h:?}"))),
        None => return Err(format_err("empty SRF file")),
    }
    let mut wavelengths = Vec::new();
    let mut q = Vec::new();
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(format_err(format!(
                "SRF row {} has {} fields, expected 4",
                i + 1,
                fields.len()
            )));
        }
        let mut vals = [0.0; 4];
        for (v, f) in vals.iter_mut().zip(&fields) {
            *v = f
                .parse::<f64>()
                .map_err(|e| format_err(format!("SRF row {}: {f:?}: {e}", i + 1)))?;
        }
        wavelengths.push(vals[0]);
        q.push([vals[1], vals[2], vals[3]]);
    }
    Srf::new(wavelengths, q)
}

pub fn format_srf(srf: &Srf) -> String {
    let mut s = String::from(SRF_HEADER);
    s.push('\n');
    for (w, row) in srf.wavelengths().iter().zip(srf.rows()) {
        s.push_str(&format!("{w},{},{},{}\n", row[0], row[1], row[2]));
    }
    s
}

pub fn read_srf(path: impl AsRef<Path>) -> Result<Srf> {
    parse_srf(&fs::read_to_string(path)?)
}

pub fn write_srf(srf: &Srf, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), format_srf(srf).as_bytes())
}

/// Encodes an RGB image as PNG. Every sample must already lie in `[0, 1]`;
/// stored integers are `round(v * max)`.
pub fn encode_rgb_png(image: &RgbImage, depth: BitDepth) -> Result<Vec<u8>> {
    if let Some(i) = image.data().iter().position(|v| !(0.0..=1.0).contains(v)) {
        return Err(validation(format!(
            "rgb sample {i} = {} outside [0, 1]; quantize before writing",
            image.data()[i]
        )));
    }
    let (h, w) = (image.height(), image.width());
    let max = depth.max_code();
    let n = h * w;
    let mut raw = Vec::with_capacity(n * 3 * depth.bytes());
    for p in 0..n {
        for c in 0..3 {
            let code = (image.data()[c * n + p] * max).round() as u16;
            match depth {
                BitDepth::Eight => raw.push(code as u8),
                BitDepth::Sixteen => raw.extend_from_slice(&code.to_be_bytes()),
            }
        }
    }
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(
            BufWriter::new(&mut out),
            u32::try_from(w).map_err(|_| validation("image too wide"))?,
            u32::try_from(h).map_err(|_| validation("image too tall"))?,
        );
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(match depth {
            BitDepth::Eight => png::BitDepth::Eight,
            BitDepth::Sixteen => png::BitDepth::Sixteen,
        });
        let mut writer = enc
            .write_header()
            .map_err(|e| format_err(format!("png encode: {e}")))?;
        writer
            .write_image_data(&raw)
            .map_err(|e| format_err(format!("png encode: {e}")))?;
        writer
            .finish()
            .map_err(|e| format_err(format!("png encode: {e}")))?;
    }
    Ok(out)
}

/// Decodes an 8- or 16-bit RGB PNG; samples become `n / (2^d - 1)`.
pub fn decode_rgb_png(bytes: &[u8]) -> Result<(RgbImage, BitDepth)> {
    if bytes.starts_with(HSC_MAGIC) {
        return Err(format_err("file is an HSC cube, not an RGB image"));
    }
    let decoder = png::Decoder::new(std::io::Cursor::new(bytes));
    let mut reader = decoder
        .read_info()
        .map_err(|e| format_err(format!("png decode: {e}")))?;
    let info = reader.info();
    if info.color_type != png::ColorType::Rgb {
        return Err(format_err(format!(
            "expected 3-channel RGB png, found {:?}",
            info.color_type
        )));
    }
    let depth = match info.bit_depth {
        png::BitDepth::Eight => BitDepth::Eight,
        png::BitDepth::Sixteen => BitDepth::Sixteen,
        other => return Err(format_err(format!("unsupported png bit depth {other:?}"))),
    };
    let (w, h) = (info.width as usize, info.height as usize);
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| format_err("png too large"))?;
    let mut buf = vec![0u8; size];
    let frame = reader
        .next_frame(&mut buf)
        .map_err(|e| format_err(format!("png decode: {e}")))?;
    let buf = &buf[..frame.buffer_size()];
    let n = w * h;
    let max = depth.max_code();
    let mut data = vec![0.0; n * 3];
    for p in 0..n {
        for c in 0..3 {
            let i = p * 3 + c;
            let code = match depth {
                BitDepth::Eight => buf[i] as f64,
                BitDepth::Sixteen => u16::from_be_bytes([buf[2 * i], buf[2 * i + 1]]) as f64,
            };
            data[c * n + p] = code / max;
        }
    }
    Ok((RgbImage::new(h, w, data)?, depth))
}

pub fn read_rgb(path: impl AsRef<Path>) -> Result<RgbImage> {
    read_rgb_with_depth(path).map(|(img, _)| img)
}

pub fn read_rgb_with_depth(path: impl AsRef<Path>) -> Result<(RgbImage, BitDepth)> {
    let f = fs::File::open(path)?;
    let mut bytes = Vec::new();
    std::io::Read::read_to_end(&mut BufReader::new(f), &mut bytes)?;
    decode_rgb_png(&bytes)
}

pub fn write_rgb(image: &RgbImage, path: impl AsRef<Path>, depth: BitDepth) -> Result<()> {
    let bytes = encode_rgb_png(image, depth)?;
    write_atomic(path.as_ref(), &bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cube::default_wavelengths;

    fn cube(h: usize, w: usize, k: usize, v: f64) -> SpectralCube {
        let wl: Vec<f64> = (0..k).map(|i| 400.0 + 10.0 * i as f64).collect();
        SpectralCube::filled(h, w, wl, v).unwrap()
    }

    #[test]
    fn constant_cube_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.hsc");
        let c = cube(4, 4, 5, 0.25);
        write_cube(&c, &p).unwrap();
        let back = read_cube(&p).unwrap();
        assert!(back.data().iter().all(|&v| v == 0.25));
        assert_eq!(back, c);
    }

    #[test]
    fn single_pixel_file_size() {
        let c = cube(1, 1, 31, 0.5);
        // 20-byte header, 31 wavelengths, 31 samples, all f32
        assert_eq!(encode_cube(&c).unwrap().len(), 20 + 31 * 4 + 31 * 4);
    }

    #[test]
    fn deterministic_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let c = SpectralCube::from_fn(3, 2, default_wavelengths(), |k, y, x| {
            ((k * 7 + y * 3 + x) % 11) as f64 / 11.0
        })
        .unwrap();
        let (a, b) = (dir.path().join("a.hsc"), dir.path().join("b.hsc"));
        write_cube(&c, &a).unwrap();
        write_cube(&c, &b).unwrap();
        assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
    }

    #[test]
    fn rejects_malformed_headers() {
        let good = encode_cube(&cube(2, 2, 3, 0.5)).unwrap();
        let mut bad_magic = good.clone();
        bad_magic[0] = b'X';
        assert!(matches!(decode_cube(&bad_magic), Err(Error::Format(_))));
        assert!(matches!(decode_cube(&good[..good.len() - 1]), Err(Error::Format(_))));
        let mut trailing = good.clone();
        trailing.push(0);
        assert!(matches!(decode_cube(&trailing), Err(Error::Format(_))));
        let mut flag = good.clone();
        flag[16] = 7;
        assert!(matches!(decode_cube(&flag), Err(Error::Format(_))));
        let mut zero_bands = good.clone();
        zero_bands[12..16].copy_from_slice(&0u32.to_le_bytes());
        assert!(matches!(decode_cube(&zero_bands), Err(Error::Format(_))));
    }

    #[test]
    fn rejects_non_increasing_wavelengths() {
        let mut bytes = encode_cube(&cube(1, 1, 3, 0.5)).unwrap();
        bytes[24..28].copy_from_slice(&400.0f32.to_le_bytes());
        assert!(matches!(decode_cube(&bytes), Err(Error::Validation(_))));
    }

    #[test]
    fn nan_cube_never_reaches_disk() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("nan.hsc");
        let made = SpectralCube::new(1, 1, vec![500.0], vec![f64::NAN], false);
        assert!(matches!(made, Err(Error::Validation(_))));
        assert!(!p.exists());
    }

    #[test]
    fn hsc_file_is_not_an_rgb_image() {
        let bytes = encode_cube(&cube(2, 2, 2, 0.5)).unwrap();
        assert!(matches!(decode_rgb_png(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn srf_csv_roundtrip_and_errors() {
        let srf = Srf::gaussian_rgb(&default_wavelengths()).unwrap();
        let text = format_srf(&srf);
        assert!(text.starts_with("wavelength_nm,r,g,b\n"));
        let back = parse_srf(&text).unwrap();
        assert_eq!(back, srf);
        assert_eq!(back.bands(), 31);

        let zero = "wavelength_nm,r,g,b\n400,1,0,0\n410,0,0,1\n420,1,0,1\n";
        assert!(matches!(parse_srf(zero), Err(Error::Validation(_))));
        let neg = "wavelength_nm,r,g,b\n400,1,0.5,0\n410,0,1,-1\n420,1,0,1\n";
        assert!(matches!(parse_srf(neg), Err(Error::Validation(_))));
        assert!(matches!(parse_srf("lambda,r,g,b\n"), Err(Error::Format(_))));
        assert!(matches!(
            parse_srf("wavelength_nm,r,g,b\n400,1,2\n"),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn png_constant_images() {
        let one = RgbImage::filled(3, 2, 1.0).unwrap();
        let bytes = encode_rgb_png(&one, BitDepth::Eight).unwrap();
        let (back, depth) = decode_rgb_png(&bytes).unwrap();
        assert_eq!(depth, BitDepth::Eight);
        assert!(back.data().iter().all(|&v| v == 1.0));

        let zero = RgbImage::filled(3, 2, 0.0).unwrap();
        let (back, _) = decode_rgb_png(&encode_rgb_png(&zero, BitDepth::Sixteen).unwrap()).unwrap();
        assert!(back.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn png_sixteen_bit_codes() {
        let data: Vec<f64> = (0..12).map(|i| (i * 5000) as f64 / 65535.0).collect();
        let img = RgbImage::new(2, 2, data.clone()).unwrap();
        let (back, _) = decode_rgb_png(&encode_rgb_png(&img, BitDepth::Sixteen).unwrap()).unwrap();
        assert_eq!(back.data(), &data[..]);
    }

    #[test]
    fn png_rejects_out_of_range() {
        let img = RgbImage::filled(1, 1, 1.2).unwrap();
        assert!(matches!(
            encode_rgb_png(&img, BitDepth::Eight),
            Err(Error::Validation(_))
        ));
    }
}
