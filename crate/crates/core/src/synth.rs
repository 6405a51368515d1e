//! Synthetic labelled images for evaluation without real scans.
//!
//! Each class is one filled base shape (circle, rectangle, cross) drawn on a
//! dark square canvas, jittered per image by an integer translation and a
//! uniform scale factor. Generation is deterministic in the seed.

use crate::image::GrayscaleImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SPECIALTY: &str = "Synthetic";
pub const BACKGROUND: u8 = 20;
pub const FOREGROUND: u8 = 220;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeClass {
    Circle,
    Rectangle,
    Cross,
}

impl ShapeClass {
    pub const ALL: [ShapeClass; 3] = [ShapeClass::Circle, ShapeClass::Rectangle, ShapeClass::Cross];

    pub fn class_name(self) -> &'static str {
        match self {
            ShapeClass::Circle => "CIRCLE",
            ShapeClass::Rectangle => "RECTANGLE",
            ShapeClass::Cross => "CROSS",
        }
    }

    pub fn sub_class(self) -> &'static str {
        match self {
            ShapeClass::Circle => "ROUND",
            ShapeClass::Rectangle => "OBLONG",
            ShapeClass::Cross => "CRUCIFORM",
        }
    }

    pub fn keywords(self) -> &'static [&'static str] {
        match self {
            ShapeClass::Circle => &["round opacity", "well circumscribed"],
            ShapeClass::Rectangle => &["rectangular opacity", "sharp margins"],
            ShapeClass::Cross => &["cruciform opacity", "branching pattern"],
        }
    }

    fn file_stem(self) -> &'static str {
        match self {
            ShapeClass::Circle => "circle",
            ShapeClass::Rectangle => "rectangle",
            ShapeClass::Cross => "cross",
        }
    }
}

/// Placement of one shape: offset from the canvas centre and size multiplier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jitter {
    pub dx: i32,
    pub dy: i32,
    pub scale: f64,
}

impl Jitter {
    pub const NONE: Jitter = Jitter {
        dx: 0,
        dy: 0,
        scale: 1.0,
    };
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub per_class: usize,
    pub seed: u64,
    pub canvas: u32,
    /// Largest absolute translation, in pixels, on each axis.
    pub max_shift: i32,
    /// Largest relative deviation of the scale factor from 1.
    pub max_scale_deviation: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            per_class: 12,
            seed: 7,
            canvas: 128,
            max_shift: 2,
            max_scale_deviation: 0.10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthImage {
    pub file_name: String,
    pub shape: ShapeClass,
    pub jitter: Jitter,
    pub image: GrayscaleImage,
}

/// Draws `shape` filled in [`FOREGROUND`] on a [`BACKGROUND`] canvas.
///
/// Pixels are sampled at their centres. Base sizes are relative to a 128 px
/// canvas: circle radius 28, rectangle 68×44, cross arms 64 long and 18 thick.
pub fn render_shape(shape: ShapeClass, canvas: u32, jitter: Jitter) -> GrayscaleImage {
    let unit = canvas as f64 / 128.0 * jitter.scale;
    let cx = canvas as f64 / 2.0 + jitter.dx as f64;
    let cy = canvas as f64 / 2.0 + jitter.dy as f64;
    GrayscaleImage::from_fn(canvas, canvas, |x, y| {
        let dx = x as f64 + 0.5 - cx;
        let dy = y as f64 + 0.5 - cy;
        let inside = match shape {
            ShapeClass::Circle => dx * dx + dy * dy <= (28.0 * unit).powi(2),
            ShapeClass::Rectangle => dx.abs() <= 34.0 * unit && dy.abs() <= 22.0 * unit,
            ShapeClass::Cross => {
                let (arm, half) = (32.0 * unit, 9.0 * unit);
                (dx.abs() <= arm && dy.abs() <= half) || (dx.abs() <= half && dy.abs() <= arm)
            }
        };
        if inside {
            FOREGROUND
        } else {
            BACKGROUND
        }
    })
}

/// Redraws before giving up on finding an unseen rendering.
const MAX_DRAWS: usize = 64;

/// `per_class` jittered images of each shape class, classes interleaved.
///
/// A jitter whose rendering repeats an earlier image is redrawn, so the
/// corpus holds no pixel-identical pairs unless the jitter range is too
/// small to avoid them.
pub fn synthetic_corpus(config: &SynthConfig) -> Vec<SynthImage> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut out: Vec<SynthImage> = Vec::with_capacity(config.per_class * ShapeClass::ALL.len());
    for i in 0..config.per_class {
        for shape in ShapeClass::ALL {
            let mut draw = 0;
            let (jitter, image) = loop {
                let jitter = Jitter {
                    dx: rng.random_range(-config.max_shift..=config.max_shift),
                    dy: rng.random_range(-config.max_shift..=config.max_shift),
                    scale: 1.0 + rng.random_range(-config.max_scale_deviation..=config.max_scale_deviation),
                };
                let image = render_shape(shape, config.canvas, jitter);
                draw += 1;
                if draw >= MAX_DRAWS || !out.iter().any(|o| o.image == image) {
                    break (jitter, image);
                }
            };
            out.push(SynthImage {
                file_name: format!("{}_{i:02}.pgm", shape.file_stem()),
                shape,
                jitter,
                image,
            });
        }
    }
    out
}
