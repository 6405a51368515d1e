//! Raster input: decoding, normalisation and edge-point feature extraction.

mod features;
pub mod pnm;

pub use features::{
    describe, describe_bytes, extract_edge_points, otsu_threshold, sobel_magnitude, EdgeThreshold,
    ExtractionParams, FeatureDescriptor,
};

use std::io::Cursor;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("{0}")]
    Format(String),
    #[error("image is {width}x{height}; edge extraction needs at least 3x3")]
    Degenerate { width: u32, height: u32 },
    #[error("no pixel exceeds the edge threshold {threshold}")]
    NoFeatures { threshold: u8 },
    #[error("invalid extraction parameters: {0}")]
    InvalidParams(String),
}

impl ImageError {
    pub fn code(&self) -> &'static str {
        match self {
            ImageError::Io { .. } => "IO_ERROR",
            ImageError::Format(_) => "FORMAT_ERROR",
            ImageError::Degenerate { .. } => "DEGENERATE_IMAGE",
            ImageError::NoFeatures { .. } => "NO_FEATURES",
            ImageError::InvalidParams(_) => "INVALID_PARAMS",
        }
    }
}

/// 8-bit single-channel raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayscaleImage {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl GrayscaleImage {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::Format(format!(
                "image dimensions {width}x{height} are empty"
            )));
        }
        if pixels.len() as u64 != width as u64 * height as u64 {
            return Err(ImageError::Format(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        Ok(GrayscaleImage {
            width,
            height,
            pixels,
        })
    }

    /// Image of constant intensity.
    pub fn filled(width: u32, height: u32, value: u8) -> Self {
        assert!(width > 0 && height > 0, "empty image");
        GrayscaleImage {
            width,
            height,
            pixels: vec![value; width as usize * height as usize],
        }
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> u8) -> Self {
        assert!(width > 0 && height > 0, "empty image");
        let mut pixels = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        GrayscaleImage {
            width,
            height,
            pixels,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    /// Pixel lookup with coordinates clamped to the frame.
    #[inline]
    fn get_clamped(&self, x: i64, y: i64) -> u8 {
        let x = x.clamp(0, self.width as i64 - 1) as u32;
        let y = y.clamp(0, self.height as i64 - 1) as u32;
        self.get(x, y)
    }
}

pub fn load_image(path: impl AsRef<Path>) -> Result<GrayscaleImage, ImageError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| ImageError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    decode_image(&bytes)
}

const PNG_SIGNATURE: &[u8] = b"\x89PNG\r\n\x1a\n";

/// Decodes PGM (`P2`/`P5`) or PNG bytes, sniffing the format from the magic.
pub fn decode_image(bytes: &[u8]) -> Result<GrayscaleImage, ImageError> {
    if pnm::is_pgm(bytes) {
        pnm::decode_pgm(bytes)
    } else if bytes.starts_with(PNG_SIGNATURE) {
        decode_png(bytes)
    } else if bytes.first() == Some(&b'P') {
        pnm::decode_pgm(bytes)
    } else {
        Err(ImageError::Format(
            "unsupported image format (expected PGM or PNG)".into(),
        ))
    }
}

/// Short media type for bytes accepted by [`decode_image`].
pub fn media_type(bytes: &[u8]) -> &'static str {
    if pnm::is_pgm(bytes) {
        "image/x-portable-graymap"
    } else if bytes.starts_with(PNG_SIGNATURE) {
        "image/png"
    } else {
        "application/octet-stream"
    }
}

fn decode_png(bytes: &[u8]) -> Result<GrayscaleImage, ImageError> {
    let format_err = |e: png::DecodingError| ImageError::Format(format!("PNG: {e}"));
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::normalize_to_color8());
    let mut reader = decoder.read_info().map_err(format_err)?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| ImageError::Format("PNG: image too large".into()))?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(format_err)?;

    let channels = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        png::ColorType::Indexed => {
            return Err(ImageError::Format("PNG: unexpanded palette".into()))
        }
    };
    let (w, h) = (info.width as usize, info.height as usize);
    let mut pixels = Vec::with_capacity(w * h);
    for row in buf.chunks(info.line_size).take(h) {
        for px in row[..w * channels].chunks_exact(channels) {
            let v = if channels >= 3 {
                ((299 * px[0] as u32 + 587 * px[1] as u32 + 114 * px[2] as u32) / 1000) as u8
            } else {
                px[0]
            };
            pixels.push(v);
        }
    }
    GrayscaleImage::new(info.width, info.height, pixels)
}

/// Nearest-neighbour downscale so the longest side is at most `max_dimension`.
///
/// Images already within bounds are returned unchanged.
pub fn resize_max(image: &GrayscaleImage, max_dimension: u32) -> GrayscaleImage {
    let (w, h) = (image.width, image.height);
    let longest = w.max(h);
    if longest <= max_dimension {
        return image.clone();
    }
    let scaled = |side: u32| -> u32 {
        let s = (side as u64 * max_dimension as u64 + longest as u64 / 2) / longest as u64;
        (s as u32).max(1)
    };
    let (nw, nh) = if w >= h {
        (max_dimension, scaled(h))
    } else {
        (scaled(w), max_dimension)
    };
    // sample at the centre of each destination pixel
    let src = |dst: u32, dst_len: u32, src_len: u32| -> u32 {
        ((2 * dst as u64 + 1) * src_len as u64 / (2 * dst_len as u64)) as u32
    };
    GrayscaleImage::from_fn(nw, nh, |x, y| image.get(src(x, nw, w), src(y, nh, h)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resize_examples() {
        let small = GrayscaleImage::filled(100, 50, 3);
        assert_eq!(resize_max(&small, 256), small);
        let big = GrayscaleImage::filled(512, 256, 3);
        let r = resize_max(&big, 256);
        assert_eq!((r.width(), r.height()), (256, 128));
        let r = resize_max(&GrayscaleImage::filled(300, 100, 3), 150);
        assert_eq!((r.width(), r.height()), (150, 50));
        let r = resize_max(&GrayscaleImage::filled(100, 300, 3), 150);
        assert_eq!((r.width(), r.height()), (50, 150));
        let r = resize_max(&GrayscaleImage::filled(1000, 1, 3), 16);
        assert_eq!((r.width(), r.height()), (16, 1));
    }

    #[test]
    fn resize_halving_picks_pixels() {
        let img = GrayscaleImage::from_fn(4, 2, |x, y| (y * 4 + x) as u8);
        let r = resize_max(&img, 2);
        assert_eq!((r.width(), r.height()), (2, 1));
        assert_eq!(r.pixels(), &[5, 7]);
    }

    #[test]
    fn png_gray_and_rgb() {
        fn encode(color: png::ColorType, data: &[u8], w: u32, h: u32) -> Vec<u8> {
            let mut out = Vec::new();
            {
                let mut enc = png::Encoder::new(&mut out, w, h);
                enc.set_color(color);
                enc.set_depth(png::BitDepth::Eight);
                let mut writer = enc.write_header().unwrap();
                writer.write_image_data(data).unwrap();
            }
            out
        }
        let gray = encode(png::ColorType::Grayscale, &[0, 255, 255, 0], 2, 2);
        let img = decode_image(&gray).unwrap();
        assert_eq!(img.pixels(), &[0, 255, 255, 0]);
        assert_eq!(media_type(&gray), "image/png");

        let rgb = encode(png::ColorType::Rgb, &[255, 0, 0, 10, 200, 30], 2, 1);
        let img = decode_image(&rgb).unwrap();
        assert_eq!(img.pixels(), &[76, 123]);
    }

    #[test]
    fn unknown_format_and_missing_file() {
        assert_eq!(decode_image(b"GIF89a...").unwrap_err().code(), "FORMAT_ERROR");
        assert_eq!(decode_image(b"").unwrap_err().code(), "FORMAT_ERROR");
        let err = load_image("/nonexistent/definitely/missing.pgm").unwrap_err();
        assert_eq!(err.code(), "IO_ERROR");
    }
}
