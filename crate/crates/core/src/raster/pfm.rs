//! Single-channel portable float map (`Pf`) reader and writer.
//!
//! Rows are stored bottom-to-top. The scale line's sign gives the byte
//! order: negative for little-endian (always written), positive for big-endian.

use std::fs;
use std::path::Path;

use super::DepthMap;
use crate::error::{Error, Result};

/// Reads the next whitespace-delimited token, returning it and the offset after it.
fn token(bytes: &[u8], mut pos: usize) -> Option<(&str, usize)> {
    while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
        pos += 1;
    }
    let start = pos;
    while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
        pos += 1;
    }
    if start == pos {
        return None;
    }
    std::str::from_utf8(&bytes[start..pos]).ok().map(|s| (s, pos))
}

pub(crate) fn decode_pfm(path: &Path, bytes: &[u8]) -> Result<DepthMap> {
    let bad = |reason: &str| Error::decode(path, reason);

    let (magic, pos) = token(bytes, 0).ok_or_else(|| bad("empty file"))?;
    match magic {
        "Pf" => {}
        "PF" => {
            return Err(Error::UnsupportedFormat(format!(
                "{}: three-channel PFM, expected single-channel depth",
                path.display()
            )))
        }
        _ => return Err(bad("missing Pf header")),
    }
    let (w, pos) = token(bytes, pos).ok_or_else(|| bad("missing width"))?;
    let (h, pos) = token(bytes, pos).ok_or_else(|| bad("missing height"))?;
    let (scale, pos) = token(bytes, pos).ok_or_else(|| bad("missing scale"))?;
    let width: usize = w.parse().map_err(|_| bad("invalid width"))?;
    let height: usize = h.parse().map_err(|_| bad("invalid height"))?;
    let scale: f64 = scale.parse().map_err(|_| bad("invalid scale"))?;
    if width == 0 || height == 0 {
        return Err(bad("zero dimension"));
    }
    if scale == 0.0 || !scale.is_finite() {
        return Err(bad("invalid scale"));
    }
    let little_endian = scale < 0.0;

    // exactly one whitespace byte separates the header from the payload
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(bad("truncated header"));
    }
    let payload = &bytes[pos + 1..];
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| bad("dimensions overflow"))?;
    if payload.len() < expected {
        return Err(bad("truncated payload"));
    }

    let mut data = vec![0f32; width * height];
    for (i, chunk) in payload[..expected].chunks_exact(4).enumerate() {
        let raw = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little_endian {
            f32::from_le_bytes(raw)
        } else {
            f32::from_be_bytes(raw)
        };
        let (x, file_row) = (i % width, i / width);
        let y = height - 1 - file_row;
        data[y * width + x] = v;
    }
    DepthMap::new(width, height, data)
}

pub(crate) fn encode_pfm(depth: &DepthMap) -> Vec<u8> {
    let (w, h) = (depth.width(), depth.height());
    let mut out = format!("Pf\n{w} {h}\n-1.0\n").into_bytes();
    out.reserve(w * h * 4);
    for y in (0..h).rev() {
        for x in 0..w {
            out.extend_from_slice(&depth.get(x, y).to_le_bytes());
        }
    }
    out
}

/// Loads a single-channel PFM depth map, rejecting NaN/Inf and negative depths.
pub fn load_depth(path: impl AsRef<Path>) -> Result<DepthMap> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pfm(path, &bytes)
}

/// Writes a little-endian single-channel PFM.
pub fn save_depth(depth: &DepthMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pfm(depth)).map_err(|e| Error::io(path, e))
}
