//! Single-channel 32-bit float PFM maps.
//!
//! Header `Pf`, dimensions, then a scale whose sign encodes endianness
//! (negative = little-endian); rows are stored bottom-to-top. We always
//! write `-1.0` and read either endianness; the scale magnitude is not
//! applied to the samples, matching common readers.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::error::Error;
use crate::grid::ScalarMap;
use crate::Result;

pub fn write_pfm(map: &ScalarMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = Vec::with_capacity(32 + 4 * map.data.len());
    bytes.extend_from_slice(format!("Pf\n{} {}\n-1.0\n", map.width, map.height).as_bytes());
    for y in (0..map.height).rev() {
        for x in 0..map.width {
            bytes.extend_from_slice(&(map.at(x, y) as f32).to_le_bytes());
        }
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&bytes).map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_pfm(path: impl AsRef<Path>) -> Result<ScalarMap> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut pos = 0;
    let mut token = || -> Result<String> {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::decode(path, "truncated PFM header"));
        }
        // consume exactly one whitespace byte after the token
        let s = String::from_utf8_lossy(&bytes[start..pos]).into_owned();
        pos += 1;
        Ok(s)
    };
    let magic = token()?;
    if magic != "Pf" {
        return Err(Error::decode(
            path,
            format!("expected single-channel PFM magic 'Pf', found '{magic}'"),
        ));
    }
    let width: usize = token()?
        .parse()
        .map_err(|_| Error::decode(path, "bad PFM width"))?;
    let height: usize = token()?
        .parse()
        .map_err(|_| Error::decode(path, "bad PFM height"))?;
    let scale: f64 = token()?
        .parse()
        .map_err(|_| Error::decode(path, "bad PFM scale"))?;
    let little_endian = scale < 0.0;
    let expected = width * height * 4;
    if bytes.len() < pos + expected {
        return Err(Error::decode(
            path,
            format!(
                "PFM data truncated: need {expected} bytes, found {}",
                bytes.len() - pos
            ),
        ));
    }
    let mut map = ScalarMap::filled(width, height, 0.0);
    let mut offset = pos;
    for y in (0..height).rev() {
        for x in 0..width {
            let raw: [u8; 4] = bytes[offset..offset + 4].try_into().unwrap();
            let v = if little_endian {
                f32::from_le_bytes(raw)
            } else {
                f32::from_be_bytes(raw)
            };
            map.set(x, y, v as f64);
            offset += 4;
        }
    }
    Ok(map)
}
