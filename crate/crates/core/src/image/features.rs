use super::{decode_image, load_image, resize_max, GrayscaleImage, ImageError};
use crate::geometry::{Point, PointSet};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

/// Binarisation level for the gradient magnitude map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum EdgeThreshold {
    #[default]
    OtsuAuto,
    Fixed(u8),
}

impl fmt::Display for EdgeThreshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EdgeThreshold::OtsuAuto => f.write_str("otsu"),
            EdgeThreshold::Fixed(t) => write!(f, "{t}"),
        }
    }
}

impl FromStr for EdgeThreshold {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("otsu") || s.eq_ignore_ascii_case("auto") {
            return Ok(EdgeThreshold::OtsuAuto);
        }
        s.parse::<u8>()
            .map(EdgeThreshold::Fixed)
            .map_err(|_| format!("edge threshold must be 'otsu' or 0..=255, got '{s}'"))
    }
}

impl From<EdgeThreshold> for String {
    fn from(t: EdgeThreshold) -> String {
        t.to_string()
    }
}

impl TryFrom<String> for EdgeThreshold {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ExtractionParams {
    pub max_dimension: u32,
    pub edge_threshold: EdgeThreshold,
    pub max_points: usize,
}

impl Default for ExtractionParams {
    fn default() -> Self {
        ExtractionParams {
            max_dimension: 256,
            edge_threshold: EdgeThreshold::OtsuAuto,
            max_points: 4096,
        }
    }
}

impl ExtractionParams {
    pub const MIN_DIMENSION: u32 = 16;

    pub fn validate(&self) -> Result<(), ImageError> {
        if self.max_dimension < Self::MIN_DIMENSION {
            return Err(ImageError::InvalidParams(format!(
                "max_dimension {} is below {}",
                self.max_dimension,
                Self::MIN_DIMENSION
            )));
        }
        if self.max_points == 0 {
            return Err(ImageError::InvalidParams("max_points must be at least 1".into()));
        }
        Ok(())
    }

    /// Stable identifier of this configuration; descriptors are only
    /// comparable when their fingerprints agree.
    pub fn fingerprint(&self) -> String {
        let canonical = format!(
            "hannot-features/1;sobel-l1;max_dimension={};edge_threshold={};max_points={}",
            self.max_dimension, self.edge_threshold, self.max_points
        );
        let digest = Sha256::digest(canonical.as_bytes());
        hex::encode(&digest[..8])
    }
}

/// The edge-point representation of one image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureDescriptor {
    pub points: PointSet,
    pub source_width: u32,
    pub source_height: u32,
    pub params_fingerprint: String,
}

impl FeatureDescriptor {
    pub fn point_count(&self) -> usize {
        self.points.len()
    }
}

/// `|gx| + |gy|` of the 3×3 Sobel operator, clamped to 255, with
/// edge-replicated borders.
pub fn sobel_magnitude(image: &GrayscaleImage) -> GrayscaleImage {
    GrayscaleImage::from_fn(image.width(), image.height(), |x, y| {
        let (x, y) = (x as i64, y as i64);
        let p = |dx: i64, dy: i64| image.get_clamped(x + dx, y + dy) as i32;
        let gx = (p(1, -1) + 2 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2 * p(-1, 0) + p(-1, 1));
        let gy = (p(-1, 1) + 2 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2 * p(0, -1) + p(1, -1));
        (gx.abs() + gy.abs()).min(255) as u8
    })
}

/// Otsu's threshold over the 256-bin histogram.
///
/// Pixels `≤ t` form the lower class. Returns the `t` maximising the
/// between-class variance, the smallest such `t` on ties. When no `t` splits
/// the pixels into two non-empty classes (a single intensity), that intensity
/// is returned.
pub fn otsu_threshold(image: &GrayscaleImage) -> u8 {
    let mut hist = [0u64; 256];
    for &v in image.pixels() {
        hist[v as usize] += 1;
    }
    let total = image.pixels().len() as i128;
    let total_sum: i128 = hist.iter().enumerate().map(|(v, &c)| v as i128 * c as i128).sum();

    let mut best: Option<(u8, f64)> = None;
    let (mut n0, mut s0) = (0i128, 0i128);
    for (t, &count) in hist.iter().enumerate() {
        n0 += count as i128;
        s0 += t as i128 * count as i128;
        let n1 = total - n0;
        if n0 == 0 || n1 == 0 {
            continue;
        }
        // N²·w0·w1·(μ0 − μ1)² = (N·S0 − n0·S)² / (n0·n1)
        let diff = (total * s0 - n0 * total_sum) as f64;
        let variance = diff * diff / (n0 as f64 * n1 as f64);
        if best.is_none_or(|(_, v)| variance > v) {
            best = Some((t as u8, variance));
        }
    }
    match best {
        Some((t, _)) => t,
        None => image.pixels()[0],
    }
}

/// Resize, Sobel magnitude, threshold, then keep pixels strictly above the
/// threshold as feature points, stride-subsampled to `max_points`.
pub fn extract_edge_points(
    image: &GrayscaleImage,
    params: &ExtractionParams,
) -> Result<FeatureDescriptor, ImageError> {
    params.validate()?;
    let normalized = resize_max(image, params.max_dimension);
    let (w, h) = (normalized.width(), normalized.height());
    if w < 3 || h < 3 {
        return Err(ImageError::Degenerate {
            width: w,
            height: h,
        });
    }
    let magnitude = sobel_magnitude(&normalized);
    let threshold = match params.edge_threshold {
        EdgeThreshold::OtsuAuto => otsu_threshold(&magnitude),
        EdgeThreshold::Fixed(t) => t,
    };

    // row-major scan yields (y, x) order directly
    let mut points = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if magnitude.get(x, y) > threshold {
                points.push(Point::new(x, y));
            }
        }
    }
    if points.is_empty() {
        return Err(ImageError::NoFeatures { threshold });
    }
    let points = subsample(points, params.max_points);
    let points = PointSet::from_sorted(points).expect("raster scan order is (y, x) sorted");
    Ok(FeatureDescriptor {
        points,
        source_width: w,
        source_height: h,
        params_fingerprint: params.fingerprint(),
    })
}

fn subsample(points: Vec<Point>, max_points: usize) -> Vec<Point> {
    let n = points.len();
    if n <= max_points {
        return points;
    }
    (0..max_points).map(|i| points[i * n / max_points]).collect()
}

pub fn describe(path: impl AsRef<Path>, params: &ExtractionParams) -> Result<FeatureDescriptor, ImageError> {
    let image = load_image(path)?;
    extract_edge_points(&image, params)
}

/// [`describe`] over in-memory file contents.
pub fn describe_bytes(bytes: &[u8], params: &ExtractionParams) -> Result<FeatureDescriptor, ImageError> {
    let image = decode_image(bytes)?;
    extract_edge_points(&image, params)
}
