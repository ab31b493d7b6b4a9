//! PSF container (little-endian):
//!
//! ```text
//! "PSF1" | u32 bands | u32 kh | u32 kw | u8 padding | 3 reserved
//!        | bands x f32 wavelengths | bands*kh*kw x f32 kernel samples
//! ```
//!
//! Padding codes: 0 reflect, 1 circular. Kernel normalization is checked
//! again on read.

use std::fs;
use std::path::Path;

use super::{Padding, PsfStack};
use crate::error::{format_err, validation, Result};
use crate::io::{push_f32s, write_atomic, LeReader};

pub const PSF_MAGIC: &[u8; 4] = b"PSF1";

pub fn encode_psf(stack: &PsfStack) -> Result<Vec<u8>> {
    let dim = |v: usize| u32::try_from(v).map_err(|_| validation("PSF dimension exceeds u32"));
    let mut out = Vec::with_capacity(20 + 4 * (stack.bands() + stack.kernel_data().len()));
    out.extend_from_slice(PSF_MAGIC);
    out.extend_from_slice(&dim(stack.bands())?.to_le_bytes());
    out.extend_from_slice(&dim(stack.kernel_height())?.to_le_bytes());
    out.extend_from_slice(&dim(stack.kernel_width())?.to_le_bytes());
    out.push(stack.padding().code());
    out.extend_from_slice(&[0u8; 3]);
    push_f32s(&mut out, stack.wavelengths());
    push_f32s(&mut out, stack.kernel_data());
    Ok(out)
}

pub fn decode_psf(bytes: &[u8]) -> Result<PsfStack> {
    let mut r = LeReader::new(bytes);
    if r.take(4).map_err(|_| format_err("file too short for PSF magic"))? != PSF_MAGIC {
        return Err(format_err("bad magic, expected PSF1"));
    }
    let bands = r.u32()? as usize;
    let kh = r.u32()? as usize;
    let kw = r.u32()? as usize;
    let code = r.u8()?;
    r.take(3)?;
    let padding = Padding::from_code(code)
        .ok_or_else(|| format_err(format!("unknown padding code {code}")))?;
    let count = bands
        .checked_mul(kh)
        .and_then(|n| n.checked_mul(kw))
        .ok_or_else(|| format_err("declared dimensions overflow"))?;
    let wavelengths = r.f32s(bands)?;
    let kernels = r
        .f32s(count)
        .map_err(|_| format_err("payload shorter than header dimensions"))?;
    if r.remaining() != 0 {
        return Err(format_err(format!(
            "{} trailing bytes after declared payload",
            r.remaining()
        )));
    }
    PsfStack::new(wavelengths, kh, kw, kernels, padding)
}

pub fn read_psf(path: impl AsRef<Path>) -> Result<PsfStack> {
    decode_psf(&fs::read(path)?)
}

pub fn write_psf(stack: &PsfStack, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &encode_psf(stack)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cube::default_wavelengths;
    use crate::error::Error;
    use crate::optics::{gen_rotation, RotationParams};

    #[test]
    fn roundtrip_is_stable_after_one_f32_pass() {
        let s = gen_rotation(&default_wavelengths(), &RotationParams::default(), 13)
            .unwrap()
            .with_padding(Padding::Circular);
        let once = decode_psf(&encode_psf(&s).unwrap()).unwrap();
        assert_eq!(once.padding(), Padding::Circular);
        let bytes = encode_psf(&once).unwrap();
        assert_eq!(decode_psf(&bytes).unwrap(), once);
        assert_eq!(encode_psf(&decode_psf(&bytes).unwrap()).unwrap(), bytes);
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.psf");
        let s = PsfStack::delta(vec![450.0, 550.0], 3, Padding::Reflect).unwrap();
        write_psf(&s, &p).unwrap();
        assert_eq!(read_psf(&p).unwrap(), s);
    }

    #[test]
    fn bad_inputs() {
        let s = PsfStack::delta(vec![450.0, 550.0], 3, Padding::Reflect).unwrap();
        let good = encode_psf(&s).unwrap();
        let mut magic = good.clone();
        magic[..4].copy_from_slice(b"HSC1");
        assert!(matches!(decode_psf(&magic), Err(Error::Format(_))));
        assert!(matches!(decode_psf(&good[..good.len() - 4]), Err(Error::Format(_))));
        let mut pad = good.clone();
        pad[16] = 9;
        assert!(matches!(decode_psf(&pad), Err(Error::Format(_))));
        // break normalization of the first kernel
        let mut unnormalized = good.clone();
        let first_sample = 20 + 2 * 4;
        unnormalized[first_sample..first_sample + 4].copy_from_slice(&0.5f32.to_le_bytes());
        assert!(matches!(decode_psf(&unnormalized), Err(Error::Validation(_))));
    }
}
