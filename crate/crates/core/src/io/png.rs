//! PNG codecs: 16-bit RGB normal maps, 8-bit grayscale heatmaps and masks.
//!
//! Normal encoding maps channel value `c` in `[0, 65535]` to the component
//! `2c/65535 - 1`. Unmasked pixels are written as `(0, 0, 0)`, which decodes
//! to a back-facing raw normal and is masked out again on load.

use std::path::Path;

use image::{DynamicImage, GrayImage, ImageBuffer, Luma, Rgb};

use crate::error::Error;
use crate::gradients::NormalMap;
use crate::grid::ScalarMap;
use crate::Result;

pub fn write_normal_map(normals: &NormalMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let encode = |v: f64| -> u16 {
        let c = (v + 1.0) * 65535.0 / 2.0;
        c.round().clamp(0.0, 65535.0) as u16
    };
    let mut img: ImageBuffer<Rgb<u16>, Vec<u16>> =
        ImageBuffer::new(normals.width as u32, normals.height as u32);
    for (x, y, pixel) in img.enumerate_pixels_mut() {
        let i = normals.index(x as usize, y as usize);
        *pixel = if normals.mask[i] {
            Rgb([
                encode(normals.nx[i]),
                encode(normals.ny[i]),
                encode(normals.nz[i]),
            ])
        } else {
            Rgb([0, 0, 0])
        };
    }
    DynamicImage::ImageRgb16(img)
        .save(path)
        .map_err(|e| Error::decode(path, format!("PNG encode failed: {e}")))
}

/// Loads a 16-bit RGB PNG normal map. Normals are renormalized; pixels with
/// `|raw| < 0.1` or non-positive `n_z` are unmasked.
pub fn read_normal_map(path: impl AsRef<Path>) -> Result<NormalMap> {
    let path = path.as_ref();
    let img = image::open(path).map_err(|e| Error::decode(path, format!("unreadable: {e}")))?;
    let rgb16 = match img {
        DynamicImage::ImageRgb16(buf) => buf,
        other => {
            return Err(Error::UnsupportedFormat(format!(
                "{}: normal maps must be 16-bit RGB PNG, found {:?}",
                path.display(),
                other.color()
            )))
        }
    };
    let (w, h) = (rgb16.width() as usize, rgb16.height() as usize);
    let decode = |c: u16| -> f64 { 2.0 * c as f64 / 65535.0 - 1.0 };
    let mut nx = vec![0.0; w * h];
    let mut ny = vec![0.0; w * h];
    let mut nz = vec![0.0; w * h];
    for (x, y, pixel) in rgb16.enumerate_pixels() {
        let i = y as usize * w + x as usize;
        nx[i] = decode(pixel[0]);
        ny[i] = decode(pixel[1]);
        nz[i] = decode(pixel[2]);
    }
    NormalMap::from_raw(w, h, nx, ny, nz, vec![true; w * h])
}

/// Writes an 8-bit grayscale heatmap, tone-mapping `range` linearly onto
/// `[0, 255]`. NaN renders black.
pub fn write_heatmap_png(
    map: &ScalarMap,
    range: (f64, f64),
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let (lo, hi) = range;
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut img = GrayImage::new(map.width as u32, map.height as u32);
    for (x, y, pixel) in img.enumerate_pixels_mut() {
        let v = map.at(x as usize, y as usize);
        let level = if v.is_finite() {
            (((v - lo) / span).clamp(0.0, 1.0) * 255.0).round() as u8
        } else {
            0
        };
        *pixel = Luma([level]);
    }
    img.save(path)
        .map_err(|e| Error::decode(path, format!("PNG encode failed: {e}")))
}

pub fn write_mask_png(mask: &[bool], width: usize, height: usize, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut img = GrayImage::new(width as u32, height as u32);
    for (x, y, pixel) in img.enumerate_pixels_mut() {
        let m = mask[y as usize * width + x as usize];
        *pixel = Luma([if m { 255 } else { 0 }]);
    }
    img.save(path)
        .map_err(|e| Error::decode(path, format!("PNG encode failed: {e}")))
}

/// Reads a mask PNG: any pixel brighter than half scale counts as masked.
pub fn read_mask_png(path: impl AsRef<Path>) -> Result<(Vec<bool>, usize, usize)> {
    let path = path.as_ref();
    let img = image::open(path)
        .map_err(|e| Error::decode(path, format!("unreadable: {e}")))?
        .to_luma8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mask = img.pixels().map(|p| p[0] >= 128).collect();
    Ok((mask, w, h))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("normint-png-test");
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn encoding_midpoints() {
        // (32767, 32767, 65535) is the quantized identity normal.
        let path = tmp("midpoint.png");
        let mut img: ImageBuffer<Rgb<u16>, Vec<u16>> = ImageBuffer::new(1, 1);
        img.put_pixel(0, 0, Rgb([32767, 32767, 65535]));
        DynamicImage::ImageRgb16(img).save(&path).unwrap();
        let n = read_normal_map(&path).unwrap();
        assert!(n.mask[0]);
        assert!(n.nx[0].abs() < 1e-4);
        assert!(n.ny[0].abs() < 1e-4);
        assert!((n.nz[0] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn black_pixel_is_unmasked() {
        let path = tmp("black.png");
        let mut img: ImageBuffer<Rgb<u16>, Vec<u16>> = ImageBuffer::new(1, 1);
        img.put_pixel(0, 0, Rgb([0, 0, 0]));
        DynamicImage::ImageRgb16(img).save(&path).unwrap();
        let n = read_normal_map(&path).unwrap();
        assert!(!n.mask[0]);
    }

    #[test]
    fn round_trip_within_quantization() {
        let scene = crate::scene::make_plane((0.6, -0.2), (9, 7)).unwrap();
        let path = tmp("roundtrip.png");
        write_normal_map(&scene.normals, &path).unwrap();
        let back = read_normal_map(&path).unwrap();
        let bound = 2.0 / 65535.0 * 2.0;
        for i in 0..scene.normals.mask.len() {
            assert!(back.mask[i]);
            assert!((back.nx[i] - scene.normals.nx[i]).abs() <= bound);
            assert!((back.ny[i] - scene.normals.ny[i]).abs() <= bound);
            assert!((back.nz[i] - scene.normals.nz[i]).abs() <= bound);
        }
    }

    #[test]
    fn eight_bit_input_rejected_by_name() {
        let path = tmp("eightbit.png");
        let img = GrayImage::new(2, 2);
        img.save(&path).unwrap();
        let err = read_normal_map(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("16-bit RGB"), "{msg}");
    }

    #[test]
    fn heatmap_is_black_at_zero() {
        let path = tmp("heat.png");
        let map = ScalarMap::filled(3, 3, 0.0);
        write_heatmap_png(&map, (0.0, 1.0), &path).unwrap();
        let img = image::open(&path).unwrap().to_luma8();
        assert!(img.pixels().all(|p| p[0] == 0));
    }

    #[test]
    fn mask_round_trip() {
        let path = tmp("mask.png");
        let mask = vec![true, false, false, true];
        write_mask_png(&mask, 2, 2, &path).unwrap();
        let (back, w, h) = read_mask_png(&path).unwrap();
        assert_eq!((w, h), (2, 2));
        assert_eq!(back, mask);
    }
}
