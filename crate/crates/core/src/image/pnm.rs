//! Portable graymap (PGM) reading and writing.
//!
//! Reads ASCII (`P2`) and binary (`P5`) graymaps with `maxval ≤ 255` and
//! `#` comments anywhere in the header. Samples are rescaled to the full
//! `0..=255` range when `maxval < 255`. Writing always produces `P5`.

use super::{GrayscaleImage, ImageError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Encoding {
    Ascii,
    Binary,
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderCursor<'a> {
    fn skip_whitespace_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32, ImageError> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(if self.pos >= self.bytes.len() {
                ImageError::Format(format!("PGM header truncated before {what}"))
            } else {
                ImageError::Format(format!("PGM header: expected {what}"))
            });
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| ImageError::Format(format!("PGM header: {what} out of range")))
    }
}

pub fn is_pgm(bytes: &[u8]) -> bool {
    bytes.len() >= 2 && bytes[0] == b'P' && (bytes[1] == b'2' || bytes[1] == b'5')
}

pub fn decode_pgm(bytes: &[u8]) -> Result<GrayscaleImage, ImageError> {
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(ImageError::Format("not a PGM file".into()));
    }
    let encoding = match bytes[1] {
        b'2' => Encoding::Ascii,
        b'5' => Encoding::Binary,
        other => {
            return Err(ImageError::Format(format!(
                "unsupported PNM variant P{}",
                other as char
            )))
        }
    };
    let mut cursor = HeaderCursor { bytes, pos: 2 };
    let width = cursor.number("width")?;
    let height = cursor.number("height")?;
    let maxval = cursor.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(ImageError::Format(format!(
            "PGM dimensions {width}x{height} are empty"
        )));
    }
    if maxval == 0 || maxval > 255 {
        return Err(ImageError::Format(format!(
            "PGM maxval {maxval} unsupported (1..=255)"
        )));
    }
    let count = (width as usize)
        .checked_mul(height as usize)
        .ok_or_else(|| ImageError::Format("PGM dimensions overflow".into()))?;

    let mut raw = Vec::with_capacity(count);
    match encoding {
        Encoding::Binary => {
            // exactly one whitespace byte separates maxval from the raster
            match bytes.get(cursor.pos) {
                Some(b) if b.is_ascii_whitespace() => cursor.pos += 1,
                _ => return Err(ImageError::Format("PGM header truncated".into())),
            }
            let data = &bytes[cursor.pos..];
            if data.len() < count {
                return Err(ImageError::Format(format!(
                    "PGM raster truncated: expected {count} bytes, found {}",
                    data.len()
                )));
            }
            raw.extend_from_slice(&data[..count]);
        }
        Encoding::Ascii => {
            for i in 0..count {
                let v = cursor.number("sample").map_err(|_| {
                    ImageError::Format(format!(
                        "PGM raster truncated: expected {count} samples, found {i}"
                    ))
                })?;
                if v > 255 {
                    return Err(ImageError::Format(format!("PGM sample {v} exceeds maxval")));
                }
                raw.push(v as u8);
            }
        }
    }

    if let Some(&v) = raw.iter().find(|&&v| v as u32 > maxval) {
        return Err(ImageError::Format(format!(
            "PGM sample {v} exceeds maxval {maxval}"
        )));
    }
    if maxval != 255 {
        for v in raw.iter_mut() {
            *v = ((*v as u32 * 255 + maxval / 2) / maxval) as u8;
        }
    }
    GrayscaleImage::new(width, height, raw)
}

/// Encodes `image` as a binary (`P5`) graymap with `maxval` 255.
pub fn encode_pgm(image: &GrayscaleImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend_from_slice(image.pixels());
    out
}

/// Encodes `image` as an ASCII (`P2`) graymap with `maxval` 255.
pub fn encode_pgm_ascii(image: &GrayscaleImage) -> Vec<u8> {
    let mut out = format!("P2\n{} {}\n255\n", image.width(), image.height());
    for row in image.pixels().chunks(image.width() as usize) {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out.into_bytes()
}
