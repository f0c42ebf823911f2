//! Image input/output: binary PGM (P5) as the bit-exact baseline path,
//! PNG through the `image` crate, and Rec.601 grayscale conversion.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::plane::ImagePlane;

/// Convert an 8-bit raster to a grayscale plane.
///
/// 1-channel input passes through; 3-channel input uses Rec.601 luma
/// (0.299 R + 0.587 G + 0.114 B) rounded to nearest.
pub fn to_grayscale(data: &[u8], width: usize, height: usize, channels: usize) -> Result<ImagePlane> {
    if data.len() != width * height * channels {
        return Err(Error::Decode(format!(
            "raster length {} does not match {}x{}x{}",
            data.len(),
            width,
            height,
            channels
        )));
    }
    let pixels: Vec<f32> = match channels {
        1 => data.iter().map(|&v| v as f32).collect(),
        3 => data
            .chunks_exact(3)
            .map(|px| {
                let luma = 0.299 * px[0] as f64 + 0.587 * px[1] as f64 + 0.114 * px[2] as f64;
                luma.round() as f32
            })
            .collect(),
        c => return Err(Error::Decode(format!("unsupported channel count {}", c))),
    };
    ImagePlane::from_vec(width, height, pixels)
}

fn skip_pgm_whitespace(bytes: &[u8], mut pos: usize) -> usize {
    loop {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
        } else {
            return pos;
        }
    }
}

fn read_pgm_uint(bytes: &[u8], pos: usize) -> Result<(usize, usize)> {
    let pos = skip_pgm_whitespace(bytes, pos);
    let start = pos;
    let mut end = pos;
    while end < bytes.len() && bytes[end].is_ascii_digit() {
        end += 1;
    }
    if end == start {
        return Err(Error::Decode("expected integer in PGM header".into()));
    }
    let text = std::str::from_utf8(&bytes[start..end]).expect("digits are ascii");
    let value = text
        .parse()
        .map_err(|_| Error::Decode("PGM header integer out of range".into()))?;
    Ok((value, end))
}

/// Parse a binary PGM (P5) buffer with maxval <= 255.
pub fn parse_pgm(bytes: &[u8]) -> Result<ImagePlane> {
    if bytes.len() < 2 || &bytes[0..2] != b"P5" {
        return Err(Error::Decode("not a binary PGM (P5) file".into()));
    }
    let (width, pos) = read_pgm_uint(bytes, 2)?;
    let (height, pos) = read_pgm_uint(bytes, pos)?;
    let (maxval, pos) = read_pgm_uint(bytes, pos)?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::Decode(format!("unsupported PGM maxval {}", maxval)));
    }
    // exactly one whitespace byte separates the header from the raster
    let pos = pos + 1;
    let n = width * height;
    if bytes.len() < pos + n {
        return Err(Error::Decode(format!(
            "PGM raster truncated: need {} bytes, have {}",
            n,
            bytes.len().saturating_sub(pos)
        )));
    }
    to_grayscale(&bytes[pos..pos + n], width, height, 1)
}

/// Encode a plane as binary PGM; intensities are rounded and clamped to 0..255.
pub fn encode_pgm(plane: &ImagePlane) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", plane.width(), plane.height()).into_bytes();
    out.extend(
        plane
            .data()
            .iter()
            .map(|&v| v.round().clamp(0.0, 255.0) as u8),
    );
    out
}

pub fn write_pgm<P: AsRef<Path>>(plane: &ImagePlane, path: P) -> Result<()> {
    fs::write(path, encode_pgm(plane))?;
    Ok(())
}

/// Load a grayscale plane from a PGM or PNG file, dispatching on extension.
pub fn load_image<P: AsRef<Path>>(path: P) -> Result<ImagePlane> {
    let path = path.as_ref();
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase());
    match ext.as_deref() {
        Some("pgm") => parse_pgm(&fs::read(path)?),
        Some("png") => {
            let img = image::open(path).map_err(|e| Error::Decode(e.to_string()))?;
            let rgb = img.to_rgb8();
            to_grayscale(
                rgb.as_raw(),
                rgb.width() as usize,
                rgb.height() as usize,
                3,
            )
        }
        _ => Err(Error::Decode(format!(
            "unsupported image extension in {}",
            path.display()
        ))),
    }
}

/// Burn a rectangle outline (value 255) into a plane, clamped to its bounds.
pub fn draw_rect(plane: &mut ImagePlane, x: i64, y: i64, w: i64, h: i64) {
    if w <= 0 || h <= 0 {
        return;
    }
    let (pw, ph) = (plane.width() as i64, plane.height() as i64);
    for cx in x.max(0)..(x + w).min(pw) {
        for cy in [y, y + h - 1] {
            if (0..ph).contains(&cy) {
                plane.set(cx as usize, cy as usize, 255.0);
            }
        }
    }
    for cy in y.max(0)..(y + h).min(ph) {
        for cx in [x, x + w - 1] {
            if (0..pw).contains(&cx) {
                plane.set(cx as usize, cy as usize, 255.0);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grayscale_passthrough() {
        let p = to_grayscale(&[5, 10, 15, 20], 2, 2, 1).unwrap();
        assert_eq!(p.data(), &[5.0, 10.0, 15.0, 20.0]);
    }

    #[test]
    fn grayscale_white_and_red() {
        let p = to_grayscale(&[255, 255, 255, 255, 0, 0], 2, 1, 3).unwrap();
        assert_eq!(p.get(0, 0), 255.0);
        // 0.299 * 255 = 76.245 -> 76
        assert_eq!(p.get(1, 0), 76.0);
    }

    #[test]
    fn grayscale_rejects_channels() {
        assert!(to_grayscale(&[0; 8], 2, 1, 4).is_err());
    }

    #[test]
    fn pgm_round_trip_bit_exact() {
        let p = ImagePlane::from_vec(3, 2, vec![0.0, 1.0, 2.0, 253.0, 254.0, 255.0]).unwrap();
        let bytes = encode_pgm(&p);
        let back = parse_pgm(&bytes).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn pgm_with_comment() {
        let bytes = b"P5\n# a comment\n2 1\n255\n\x05\x06".to_vec();
        let p = parse_pgm(&bytes).unwrap();
        assert_eq!(p.data(), &[5.0, 6.0]);
    }

    #[test]
    fn pgm_truncated() {
        let bytes = b"P5\n4 4\n255\n\x00".to_vec();
        assert!(parse_pgm(&bytes).is_err());
    }
}
