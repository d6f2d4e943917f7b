//! Binary PGM ("P5", maxval 255) reading and writing.

use std::fs;
use std::path::Path;

use super::GrayImage;
use crate::error::{Error, Result};

fn parse_err(offset: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        offset,
        message: message.into(),
    }
}

/// Header tokenizer: whitespace-separated fields, `#` comments to end of line.
struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(parse_err(start, format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err(start, format!("{what} out of range")))
    }
}

/// Decodes a P5 image from memory.
pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(parse_err(0, "missing P5 magic number"));
    }
    let mut h = Header { bytes, pos: 2 };
    let width = h.number("width")?;
    let height = h.number("height")?;
    let maxval_at = h.pos;
    let maxval = h.number("maxval")?;
    if maxval != 255 {
        return Err(Error::Unsupported(format!(
            "PGM maxval {maxval} at byte {maxval_at}; only 255 is supported"
        )));
    }
    if width == 0 || height == 0 {
        return Err(parse_err(2, "image dimensions must be positive"));
    }
    // Exactly one whitespace byte separates the header from the raster.
    match bytes.get(h.pos) {
        Some(b) if b.is_ascii_whitespace() => h.pos += 1,
        _ => return Err(parse_err(h.pos, "expected whitespace after maxval")),
    }
    let need = width
        .checked_mul(height)
        .ok_or_else(|| parse_err(2, "image dimensions overflow"))?;
    let raster = &bytes[h.pos..];
    if raster.len() < need {
        return Err(parse_err(
            bytes.len(),
            format!("truncated raster: expected {need} bytes, found {}", raster.len()),
        ));
    }
    let pixels = raster[..need].iter().map(|&p| f64::from(p) / 255.0).collect();
    GrayImage::new(width, height, pixels)
}

/// Encodes as P5, rounding each pixel to the nearest of 256 levels.
pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.pixels().iter().map(|&p| (p * 255.0).round().clamp(0.0, 255.0) as u8));
    out
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(&bytes)
}

pub fn write_pgm(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pgm(img)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decodes_two_by_two() {
        let mut bytes = b"P5\n2 2\n255\n".to_vec();
        bytes.extend([0, 255, 128, 64]);
        let img = decode_pgm(&bytes).unwrap();
        assert_eq!((img.width(), img.height()), (2, 2));
        assert_eq!(img.pixels(), &[0.0, 1.0, 128.0 / 255.0, 64.0 / 255.0]);
    }

    #[test]
    fn header_comments_are_skipped() {
        let mut bytes = b"P5 # made by hand\n3 # width\n1\n255\n".to_vec();
        bytes.extend([1, 2, 3]);
        let img = decode_pgm(&bytes).unwrap();
        assert_eq!(img.width(), 3);
        assert_eq!(img.pixels()[2], 3.0 / 255.0);
    }

    #[test]
    fn byte_round_trip() {
        let mut bytes = b"P5\n4 3\n255\n".to_vec();
        bytes.extend((0..12u8).map(|v| v.wrapping_mul(37)));
        let img = decode_pgm(&bytes).unwrap();
        assert_eq!(encode_pgm(&img), bytes);
    }

    #[test]
    fn rejects_other_maxval() {
        let mut bytes = b"P5\n1 1\n65535\n".to_vec();
        bytes.extend([0, 0]);
        assert!(matches!(decode_pgm(&bytes), Err(Error::Unsupported(_))));
    }

    #[test]
    fn malformed_inputs_report_offsets() {
        assert!(matches!(decode_pgm(b"P2\n1 1\n255\n0"), Err(Error::Parse { offset: 0, .. })));
        assert!(matches!(decode_pgm(b"P5\nx 1\n255\n"), Err(Error::Parse { offset: 3, .. })));
        let truncated = b"P5\n2 2\n255\n\x01\x02";
        match decode_pgm(truncated) {
            Err(Error::Parse { offset, message }) => {
                assert_eq!(offset, truncated.len());
                assert!(message.contains("truncated"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
