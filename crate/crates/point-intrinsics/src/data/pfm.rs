//! Portable FloatMap codec: `Pf` (grayscale) and `PF` (RGB) headers, rows
//! stored bottom-to-top, negative scale meaning little-endian.

use crate::raster::Raster;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PfmError {
    #[error("not a PFM file (bad magic)")]
    BadMagic,
    #[error("malformed PFM header: {0}")]
    BadHeader(String),
    #[error("PFM data length mismatch: header implies {expected} bytes, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("PFM dimensions overflow")]
    Overflow,
    #[error("non-finite PFM sample at index {0}")]
    NonFinite(usize),
}

fn take_token<'a>(bytes: &'a [u8], pos: &mut usize, what: &str) -> Result<&'a [u8], PfmError> {
    while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(PfmError::BadHeader(format!("missing {what}")));
    }
    Ok(&bytes[start..*pos])
}

fn parse_number<T: std::str::FromStr>(token: &[u8], what: &str) -> Result<T, PfmError> {
    std::str::from_utf8(token)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| PfmError::BadHeader(format!("unparseable {what}")))
}

/// Decodes PFM bytes into a 1- or 3-channel raster. The declared size must
/// match the payload exactly, so hostile headers cannot trigger large
/// allocations.
pub fn decode_pfm(bytes: &[u8]) -> Result<Raster, PfmError> {
    if bytes.len() < 2 {
        return Err(PfmError::BadMagic);
    }
    let channels = match &bytes[..2] {
        b"PF" => 3usize,
        b"Pf" => 1usize,
        _ => return Err(PfmError::BadMagic),
    };
    let mut pos = 2;
    let width: usize = parse_number(take_token(bytes, &mut pos, "width")?, "width")?;
    let height: usize = parse_number(take_token(bytes, &mut pos, "height")?, "height")?;
    let scale: f64 = parse_number(take_token(bytes, &mut pos, "scale")?, "scale")?;
    if width == 0 || height == 0 {
        return Err(PfmError::BadHeader("zero dimension".into()));
    }
    if scale == 0.0 || !scale.is_finite() {
        return Err(PfmError::BadHeader("invalid scale".into()));
    }
    // Exactly one whitespace byte separates the header from the payload.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(PfmError::BadHeader("missing header terminator".into()));
    }
    pos += 1;

    let samples = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or(PfmError::Overflow)?;
    let expected = samples.checked_mul(4).ok_or(PfmError::Overflow)?;
    let payload = &bytes[pos..];
    if payload.len() != expected {
        return Err(PfmError::LengthMismatch { expected, found: payload.len() });
    }

    let little_endian = scale < 0.0;
    let magnitude = scale.abs();
    let mut raster = Raster::new(width, height, channels);
    for (i, chunk) in payload.chunks_exact(4).enumerate() {
        let raw = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let value = if little_endian { f32::from_le_bytes(raw) } else { f32::from_be_bytes(raw) };
        if !value.is_finite() {
            return Err(PfmError::NonFinite(i));
        }
        // PFM stores rows bottom-to-top.
        let pixel = i / channels;
        let c = i % channels;
        let u = pixel % width;
        let v_bottom = pixel / width;
        let v = height - 1 - v_bottom;
        raster.set(u, v, c, value as f64 * magnitude);
    }
    Ok(raster)
}

/// Encodes a 1- or 3-channel raster as little-endian PFM.
pub fn encode_pfm(raster: &Raster) -> Result<Vec<u8>, PfmError> {
    let magic = match raster.channels() {
        1 => "Pf",
        3 => "PF",
        n => return Err(PfmError::BadHeader(format!("{n} channels unsupported"))),
    };
    let (w, h, ch) = (raster.width(), raster.height(), raster.channels());
    let mut out = format!("{magic}\n{w} {h}\n-1.0\n").into_bytes();
    for v_bottom in 0..h {
        let v = h - 1 - v_bottom;
        for u in 0..w {
            for c in 0..ch {
                out.extend_from_slice(&(raster.get(u, v, c) as f32).to_le_bytes());
            }
        }
    }
    Ok(out)
}
