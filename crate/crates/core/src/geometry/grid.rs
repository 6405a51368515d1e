use super::{GeometryError, NormKind, Point, PointSet};

/// Per-cell distance to the nearest point of a fixed reference set.
///
/// Cells hold the same integer keys as [`NormKind::key`], so a lookup returns
/// exactly what an exhaustive nearest-point scan would. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceGrid {
    width: u32,
    height: u32,
    norm: NormKind,
    keys: Vec<u64>,
}

impl DistanceGrid {
    /// Builds the exact transform of `reference` over a `width × height` grid.
    ///
    /// Euclidean grids use Meijster's separable algorithm on squared
    /// distances; Manhattan and Chebyshev use the two-pass raster scan with
    /// unit 4- and 8-neighbour steps, which is exact for those norms.
    pub fn build(
        reference: &PointSet,
        width: u32,
        height: u32,
        norm: NormKind,
    ) -> Result<Self, GeometryError> {
        if reference.is_empty() {
            return Err(GeometryError::EmptySet);
        }
        if width == 0 || height == 0 {
            let p = reference.points()[0];
            return Err(GeometryError::OutOfBounds {
                x: p.x,
                y: p.y,
                width,
                height,
            });
        }
        if let Some(p) = reference.iter().find(|p| p.x >= width || p.y >= height) {
            return Err(GeometryError::OutOfBounds {
                x: p.x,
                y: p.y,
                width,
                height,
            });
        }

        let (w, h) = (width as usize, height as usize);
        let mut seed = vec![false; w * h];
        for p in reference {
            seed[p.y as usize * w + p.x as usize] = true;
        }
        let keys = match norm {
            NormKind::Euclidean => meijster_squared(&seed, w, h),
            NormKind::Manhattan => raster_scan(&seed, w, h, false),
            NormKind::Chebyshev => raster_scan(&seed, w, h, true),
        };
        Ok(DistanceGrid {
            width,
            height,
            norm,
            keys,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn norm(&self) -> NormKind {
        self.norm
    }

    pub fn key_at(&self, p: Point) -> Result<u64, GeometryError> {
        if p.x >= self.width || p.y >= self.height {
            return Err(GeometryError::OutOfBounds {
                x: p.x,
                y: p.y,
                width: self.width,
                height: self.height,
            });
        }
        Ok(self.keys[p.y as usize * self.width as usize + p.x as usize])
    }

    /// Distance at `p` in the grid's norm units.
    pub fn value_at(&self, p: Point) -> Result<f64, GeometryError> {
        self.key_at(p).map(|k| self.norm.key_to_distance(k))
    }

    /// All cell distances, row-major.
    pub fn values(&self) -> Vec<f64> {
        self.keys
            .iter()
            .map(|&k| self.norm.key_to_distance(k))
            .collect()
    }
}

fn meijster_squared(seed: &[bool], w: usize, h: usize) -> Vec<u64> {
    let inf = (w + h) as i64;

    // column pass: vertical distance to the nearest seed in the same column
    let mut g = vec![0i64; w * h];
    for x in 0..w {
        g[x] = if seed[x] { 0 } else { inf };
        for y in 1..h {
            let i = y * w + x;
            g[i] = if seed[i] { 0 } else { g[i - w] + 1 };
        }
        for y in (0..h.saturating_sub(1)).rev() {
            let i = y * w + x;
            if g[i + w] < g[i] {
                g[i] = g[i + w] + 1;
            }
        }
    }

    // row pass: lower envelope of parabolas (x - i)^2 + g(i)^2
    let mut out = vec![0u64; w * h];
    let mut s = vec![0usize; w];
    let mut t = vec![0i64; w];
    for y in 0..h {
        let row = &g[y * w..(y + 1) * w];
        let f = |x: i64, i: usize| {
            let d = x - i as i64;
            d * d + row[i] * row[i]
        };
        let sep = |i: usize, u: usize| {
            let (ii, uu) = (i as i64, u as i64);
            (uu * uu - ii * ii + row[u] * row[u] - row[i] * row[i]).div_euclid(2 * (uu - ii))
        };

        let mut q: isize = 0;
        s[0] = 0;
        t[0] = 0;
        for u in 1..w {
            while q >= 0 && f(t[q as usize], s[q as usize]) > f(t[q as usize], u) {
                q -= 1;
            }
            if q < 0 {
                q = 0;
                s[0] = u;
            } else {
                let boundary = 1 + sep(s[q as usize], u);
                if boundary < w as i64 {
                    q += 1;
                    s[q as usize] = u;
                    t[q as usize] = boundary;
                }
            }
        }
        for u in (0..w).rev() {
            out[y * w + u] = f(u as i64, s[q as usize]) as u64;
            if u as i64 == t[q as usize] {
                q -= 1;
            }
        }
    }
    out
}

fn raster_scan(seed: &[bool], w: usize, h: usize, diagonal: bool) -> Vec<u64> {
    let inf = u64::MAX / 2;
    let mut d: Vec<u64> = seed.iter().map(|&s| if s { 0 } else { inf }).collect();

    let relax = |d: &mut Vec<u64>, x: usize, y: usize, nx: isize, ny: isize| {
        if nx < 0 || ny < 0 || nx as usize >= w || ny as usize >= h {
            return;
        }
        let n = d[ny as usize * w + nx as usize] + 1;
        let i = y * w + x;
        if n < d[i] {
            d[i] = n;
        }
    };

    for y in 0..h {
        for x in 0..w {
            let (xi, yi) = (x as isize, y as isize);
            relax(&mut d, x, y, xi - 1, yi);
            relax(&mut d, x, y, xi, yi - 1);
            if diagonal {
                relax(&mut d, x, y, xi - 1, yi - 1);
                relax(&mut d, x, y, xi + 1, yi - 1);
            }
        }
    }
    for y in (0..h).rev() {
        for x in (0..w).rev() {
            let (xi, yi) = (x as isize, y as isize);
            relax(&mut d, x, y, xi + 1, yi);
            relax(&mut d, x, y, xi, yi + 1);
            if diagonal {
                relax(&mut d, x, y, xi + 1, yi + 1);
                relax(&mut d, x, y, xi - 1, yi + 1);
            }
        }
    }
    d
}
