//! Binary Netpbm export: 16-bit PGM for depth-kind images, 8-bit PPM for
//! texture, packed PBM for landmark bitmaps. Row-major, big-endian sample
//! order as the format requires.

use super::IoError;
use crate::landmarks::LandmarkImage;
use crate::render::{GeomImage, ImageKind};
use std::io::Read;
use std::path::Path;

fn quant16(v: f64) -> u16 {
    (v.clamp(0.0, 1.0) * 65535.0).round() as u16
}

fn quant8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Writes a scalar image (depth kinds) as 16-bit binary PGM.
pub fn write_pgm16(img: &GeomImage, path: &Path) -> Result<(), IoError> {
    assert_ne!(img.kind, ImageKind::Texture, "texture images are PPM");
    let mut bytes = format!("P5\n{} {}\n65535\n", img.size, img.size).into_bytes();
    for &v in &img.pixels {
        bytes.extend_from_slice(&quant16(v).to_be_bytes());
    }
    std::fs::write(path, bytes).map_err(|e| IoError::io(path, e))
}

/// Writes raw scalar values (any [0,1] grid) as 16-bit binary PGM.
pub fn write_pgm16_values(values: &[f64], width: usize, height: usize, path: &Path) -> Result<(), IoError> {
    assert_eq!(values.len(), width * height);
    let mut bytes = format!("P5\n{width} {height}\n65535\n").into_bytes();
    for &v in values {
        bytes.extend_from_slice(&quant16(v).to_be_bytes());
    }
    std::fs::write(path, bytes).map_err(|e| IoError::io(path, e))
}

/// Writes a texture image as 8-bit binary PPM.
pub fn write_ppm8(img: &GeomImage, path: &Path) -> Result<(), IoError> {
    assert_eq!(img.kind, ImageKind::Texture);
    let mut bytes = format!("P6\n{} {}\n255\n", img.size, img.size).into_bytes();
    for &v in &img.pixels {
        bytes.push(quant8(v));
    }
    std::fs::write(path, bytes).map_err(|e| IoError::io(path, e))
}

/// Writes raw RGB values as 8-bit binary PPM.
pub fn write_ppm8_values(rgb: &[f64], width: usize, height: usize, path: &Path) -> Result<(), IoError> {
    assert_eq!(rgb.len(), width * height * 3);
    let mut bytes = format!("P6\n{width} {height}\n255\n").into_bytes();
    for &v in rgb {
        bytes.push(quant8(v));
    }
    std::fs::write(path, bytes).map_err(|e| IoError::io(path, e))
}

/// Writes a landmark bitmap as packed binary PBM (1 = set pixel).
pub fn write_pbm(img: &LandmarkImage, path: &Path) -> Result<(), IoError> {
    let b = img.size;
    let mut bytes = format!("P4\n{b} {b}\n").into_bytes();
    for r in 0..b {
        let mut acc = 0u8;
        let mut nbits = 0u8;
        for c in 0..b {
            acc = (acc << 1) | u8::from(img.get(r, c));
            nbits += 1;
            if nbits == 8 {
                bytes.push(acc);
                acc = 0;
                nbits = 0;
            }
        }
        if nbits > 0 {
            bytes.push(acc << (8 - nbits));
        }
    }
    std::fs::write(path, bytes).map_err(|e| IoError::io(path, e))
}

fn parse_header(bytes: &[u8], magic: &str, path: &Path) -> Result<(usize, usize, usize, usize), IoError> {
    // Header: magic, whitespace-separated width, height, maxval; comments
    // (lines starting with '#') allowed between tokens.
    let mut pos = 0usize;
    let mut tokens: Vec<String> = Vec::new();
    let mut current = String::new();
    let mut in_comment = false;
    while pos < bytes.len() && tokens.len() < 4 {
        let ch = bytes[pos] as char;
        pos += 1;
        if in_comment {
            if ch == '\n' {
                in_comment = false;
            }
            continue;
        }
        if ch == '#' {
            in_comment = true;
            continue;
        }
        if ch.is_ascii_whitespace() {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
                if tokens.len() == 4 {
                    break;
                }
            }
        } else {
            current.push(ch);
        }
    }
    if tokens.len() < 4 {
        return Err(IoError::parse(&path.display().to_string(), 1, "truncated header"));
    }
    if tokens[0] != magic {
        return Err(IoError::parse(
            &path.display().to_string(),
            1,
            format!("expected {magic}, found {}", tokens[0]),
        ));
    }
    let w: usize = tokens[1]
        .parse()
        .map_err(|_| IoError::parse(&path.display().to_string(), 1, "bad width"))?;
    let h: usize = tokens[2]
        .parse()
        .map_err(|_| IoError::parse(&path.display().to_string(), 1, "bad height"))?;
    let maxval: usize = tokens[3]
        .parse()
        .map_err(|_| IoError::parse(&path.display().to_string(), 1, "bad maxval"))?;
    Ok((w, h, maxval, pos))
}

/// Reads a 16-bit binary PGM into [0,1] scalars.
pub fn read_pgm16(path: &Path) -> Result<(Vec<f64>, usize, usize), IoError> {
    if !path.exists() {
        return Err(IoError::MissingFile(path.to_path_buf()));
    }
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| IoError::io(path, e))?;
    let (w, h, maxval, data_at) = parse_header(&bytes, "P5", path)?;
    if maxval != 65535 {
        return Err(IoError::parse(
            &path.display().to_string(),
            1,
            format!("expected maxval 65535, found {maxval}"),
        ));
    }
    let need = w * h * 2;
    let data = &bytes[data_at..];
    if data.len() < need {
        return Err(IoError::parse(&path.display().to_string(), 1, "truncated pixel data"));
    }
    let values = data[..need]
        .chunks_exact(2)
        .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 / 65535.0)
        .collect();
    Ok((values, w, h))
}

/// Reads an 8-bit binary PPM into [0,1] RGB triples (flat, 3 per pixel).
pub fn read_ppm8(path: &Path) -> Result<(Vec<f64>, usize, usize), IoError> {
    if !path.exists() {
        return Err(IoError::MissingFile(path.to_path_buf()));
    }
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| IoError::io(path, e))?;
    let (w, h, maxval, data_at) = parse_header(&bytes, "P6", path)?;
    if maxval != 255 {
        return Err(IoError::parse(
            &path.display().to_string(),
            1,
            format!("expected maxval 255, found {maxval}"),
        ));
    }
    let need = w * h * 3;
    let data = &bytes[data_at..];
    if data.len() < need {
        return Err(IoError::parse(&path.display().to_string(), 1, "truncated pixel data"));
    }
    Ok((
        data[..need].iter().map(|&b| b as f64 / 255.0).collect(),
        w,
        h,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::render::ViewAngle;

    #[test]
    fn pgm16_roundtrip_within_quantization() {
        let k = 16;
        let img = GeomImage {
            kind: ImageKind::Depth,
            size: k,
            pixels: (0..k * k).map(|i| i as f64 / (k * k - 1) as f64).collect(),
            background: vec![false; k * k],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.pgm");
        write_pgm16(&img, &path).unwrap();
        let (values, w, h) = read_pgm16(&path).unwrap();
        assert_eq!((w, h), (k, k));
        for (a, b) in values.iter().zip(&img.pixels) {
            assert!((a - b).abs() <= 0.5 / 65535.0);
        }
    }

    #[test]
    fn ppm8_roundtrip_within_quantization() {
        let k = 8;
        let img = GeomImage {
            kind: ImageKind::Texture,
            size: k,
            pixels: (0..k * k * 3).map(|i| (i % 256) as f64 / 255.0).collect(),
            background: vec![false; k * k],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.ppm");
        write_ppm8(&img, &path).unwrap();
        let (values, w, h) = read_ppm8(&path).unwrap();
        assert_eq!((w, h), (k, k));
        for (a, b) in values.iter().zip(&img.pixels) {
            assert!((a - b).abs() <= 0.5 / 255.0);
        }
    }

    #[test]
    fn pbm_packs_rows_msb_first() {
        let mut bits = vec![false; 100];
        bits[0] = true; // row 0, col 0 -> first byte 0b1000_0000
        bits[19] = true; // row 1, col 9 -> second byte of row 1
        let img = LandmarkImage {
            size: 10,
            bits,
            view: ViewAngle::frontal(),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.pbm");
        write_pbm(&img, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let header_len = b"P4\n10 10\n".len();
        assert_eq!(bytes[header_len], 0b1000_0000);
        // Row 1 starts at byte offset 2 (two bytes per 10-pixel row).
        assert_eq!(bytes[header_len + 2], 0b0000_0000);
        assert_eq!(bytes[header_len + 3], 0b0100_0000);
    }
}
