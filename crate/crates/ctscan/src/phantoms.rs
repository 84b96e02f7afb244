//! Binary phantom generation: parametric shapes with controlled rotation,
//! scale, and shift, plus corpus assembly and the out-of-distribution
//! rotation split.

use crate::error::{Error, Result};
use crate::image::Image;
use crate::rngutil::derive_rng;
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ShapeKind {
    Circle,
    Ellipse,
    Triangle,
    Pentagon,
    Hexagon,
}

impl ShapeKind {
    pub fn name(&self) -> &'static str {
        match self {
            ShapeKind::Circle => "circle",
            ShapeKind::Ellipse => "ellipse",
            ShapeKind::Triangle => "triangle",
            ShapeKind::Pentagon => "pentagon",
            ShapeKind::Hexagon => "hexagon",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        Ok(match s {
            "circle" => ShapeKind::Circle,
            "ellipse" => ShapeKind::Ellipse,
            "triangle" => ShapeKind::Triangle,
            "pentagon" => ShapeKind::Pentagon,
            "hexagon" => ShapeKind::Hexagon,
            other => return Err(Error::Config(format!("unknown shape kind '{other}'"))),
        })
    }

    pub fn code(&self) -> u8 {
        match self {
            ShapeKind::Circle => 0,
            ShapeKind::Ellipse => 1,
            ShapeKind::Triangle => 2,
            ShapeKind::Pentagon => 3,
            ShapeKind::Hexagon => 4,
        }
    }

    pub fn from_code(c: u8) -> Result<Self> {
        Ok(match c {
            0 => ShapeKind::Circle,
            1 => ShapeKind::Ellipse,
            2 => ShapeKind::Triangle,
            3 => ShapeKind::Pentagon,
            4 => ShapeKind::Hexagon,
            other => return Err(Error::Format(format!("bad shape code {other}"))),
        })
    }
}

/// One shape placement. `scale` is the circumradius as a fraction of the
/// image half-width; `center` is in pixel units; `aspect` is the ellipse
/// minor/major ratio and is ignored for other kinds.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeSpec {
    pub kind: ShapeKind,
    pub rotation_deg: f64,
    pub scale: f64,
    pub center: (f64, f64),
    pub aspect: f64,
}

impl ShapeSpec {
    /// Circumradius in pixels for a given image size.
    pub fn circumradius(&self, image_size: usize) -> f64 {
        self.scale * image_size as f64 / 2.0
    }
}

/// Corpus recipe; sampling is a pure function of `seed`.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    pub shape_kinds: Vec<ShapeKind>,
    pub count: usize,
    pub rotation_grid: Vec<f64>,
    pub scale_range: (f64, f64),
    pub shift_range: (f64, f64),
    pub image_size: usize,
    pub seed: u64,
}

/// 36 rotations equally spaced over [0, 180) in 5-degree steps.
pub fn default_rotation_grid() -> Vec<f64> {
    (0..36).map(|i| i as f64 * 5.0).collect()
}

pub const DEFAULT_SCALE_RANGE: (f64, f64) = (0.25, 0.40);
/// Shift range as a fraction of the image size: +/-10%.
pub const DEFAULT_SHIFT_FRAC: f64 = 0.10;
pub const DEFAULT_ELLIPSE_ASPECT: f64 = 0.5;

impl DatasetSpec {
    pub fn new(shape_kinds: Vec<ShapeKind>, count: usize, image_size: usize, seed: u64) -> Self {
        let shift = DEFAULT_SHIFT_FRAC * image_size as f64;
        DatasetSpec {
            shape_kinds,
            count,
            rotation_grid: default_rotation_grid(),
            scale_range: DEFAULT_SCALE_RANGE,
            shift_range: (-shift, shift),
            image_size,
            seed,
        }
    }
}

/// Signed-distance style inside test for the canonical (unrotated,
/// centered) shape with circumradius `r`.
fn inside_canonical(kind: ShapeKind, aspect: f64, r: f64, x: f64, y: f64) -> bool {
    match kind {
        ShapeKind::Circle => x * x + y * y <= r * r,
        ShapeKind::Ellipse => {
            let b = r * aspect;
            (x / r) * (x / r) + (y / b) * (y / b) <= 1.0
        }
        ShapeKind::Triangle => {
            // right isosceles, hypotenuse along x through the circumcenter,
            // right-angle vertex at (0, r)
            inside_convex_polygon(&[(-r, 0.0), (r, 0.0), (0.0, r)], x, y)
        }
        ShapeKind::Pentagon => inside_regular_polygon(5, r, x, y),
        ShapeKind::Hexagon => inside_regular_polygon(6, r, x, y),
    }
}

fn inside_regular_polygon(n: usize, r: f64, x: f64, y: f64) -> bool {
    // one vertex pointing up (+y) at rotation zero
    let verts: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let a = std::f64::consts::FRAC_PI_2 + 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            (r * a.cos(), r * a.sin())
        })
        .collect();
    inside_convex_polygon(&verts, x, y)
}

fn inside_convex_polygon(verts: &[(f64, f64)], x: f64, y: f64) -> bool {
    // vertices in counter-clockwise order; point is inside iff every cross
    // product is non-negative
    let n = verts.len();
    for i in 0..n {
        let (x0, y0) = verts[i];
        let (x1, y1) = verts[(i + 1) % n];
        let cross = (x1 - x0) * (y - y0) - (y1 - y0) * (x - x0);
        if cross < 0.0 {
            return false;
        }
    }
    true
}

/// Rasterize by the pixel-center inclusion rule: a pixel is 1 iff its
/// center lies inside the rotated, scaled, shifted shape.
pub fn rasterize_shape(spec: &ShapeSpec, image_size: usize) -> Result<Image> {
    let r = spec.circumradius(image_size);
    if !(spec.scale > 0.0 && spec.scale <= 1.0) {
        return Err(Error::Domain(format!("scale {} outside (0,1]", spec.scale)));
    }
    if !(0.0..180.0).contains(&spec.rotation_deg) {
        return Err(Error::Domain(format!(
            "rotation {} outside [0,180)",
            spec.rotation_deg
        )));
    }
    let (cx, cy) = spec.center;
    let hi = image_size as f64 - 1.0;
    // conservative bound: the circumcircle must fit
    for (value, name, lo_b, hi_b) in [
        (cx - r, "left", 0.0, hi),
        (cx + r, "right", 0.0, hi),
        (cy - r, "top", 0.0, hi),
        (cy + r, "bottom", 0.0, hi),
    ] {
        if value < lo_b || value > hi_b {
            return Err(Error::OutOfBounds(format!(
                "{name} extent {value:.2} violates pixel bound [{lo_b}, {hi}] \
                 (center ({cx:.2},{cy:.2}), circumradius {r:.2})"
            )));
        }
    }
    let theta = spec.rotation_deg.to_radians();
    let (cos_t, sin_t) = (theta.cos(), theta.sin());
    let mut img = Image::zeros(image_size);
    for row in 0..image_size {
        for col in 0..image_size {
            // map the pixel center into the shape frame (inverse rotation)
            let dx = col as f64 - cx;
            let dy = row as f64 - cy;
            let sx = cos_t * dx + sin_t * dy;
            let sy = -sin_t * dx + cos_t * dy;
            if inside_canonical(spec.kind, spec.aspect, r, sx, sy) {
                img.set(row, col, 1.0);
            }
        }
    }
    prune_to_largest_component(&mut img);
    Ok(img)
}

/// Sharp corners (the 45-degree triangle tips in particular) can rasterize
/// as pixels that touch the body only diagonally. Those one-to-few-pixel
/// fragments are artifacts of the sub-pixel tip, so keep only the largest
/// 4-connected component.
fn prune_to_largest_component(img: &mut Image) {
    let n = img.size();
    let mut label = vec![0usize; n * n];
    let mut sizes: Vec<usize> = vec![0]; // label 0 = background
    for start in 0..n * n {
        if img.pixels()[start] == 0.0 || label[start] != 0 {
            continue;
        }
        let id = sizes.len();
        sizes.push(0);
        let mut stack = vec![start];
        label[start] = id;
        while let Some(i) = stack.pop() {
            sizes[id] += 1;
            let (r, c) = (i / n, i % n);
            for (dr, dc) in [(-1isize, 0isize), (1, 0), (0, -1), (0, 1)] {
                let (r2, c2) = (r as isize + dr, c as isize + dc);
                if r2 < 0 || c2 < 0 || r2 >= n as isize || c2 >= n as isize {
                    continue;
                }
                let j = r2 as usize * n + c2 as usize;
                if img.pixels()[j] != 0.0 && label[j] == 0 {
                    label[j] = id;
                    stack.push(j);
                }
            }
        }
    }
    if sizes.len() <= 2 {
        return; // empty or already a single component
    }
    let keep = (1..sizes.len()).max_by_key(|&i| sizes[i]).unwrap();
    for (i, &l) in label.iter().enumerate() {
        if l != 0 && l != keep {
            img.pixels_mut()[i] = 0.0;
        }
    }
}

/// Deterministic corpus generation; each record's randomness comes from an
/// RNG stream derived from (seed, index).
pub fn generate_dataset(spec: &DatasetSpec) -> Result<Vec<(Image, ShapeSpec)>> {
    if spec.shape_kinds.is_empty() {
        return Err(Error::Config("dataset needs at least one shape kind".into()));
    }
    if spec.count < 1 {
        return Err(Error::Config("dataset count must be >= 1".into()));
    }
    if spec.rotation_grid.is_empty() {
        return Err(Error::Config("rotation grid must be non-empty".into()));
    }
    let mut out = Vec::with_capacity(spec.count);
    for index in 0..spec.count {
        let mut rng = derive_rng(spec.seed, index as u64);
        let kind = spec.shape_kinds[rng.gen_range(0..spec.shape_kinds.len())];
        let rotation_deg = spec.rotation_grid[rng.gen_range(0..spec.rotation_grid.len())];
        let scale = rng.gen_range(spec.scale_range.0..=spec.scale_range.1);
        let c = (spec.image_size as f64 - 1.0) / 2.0;
        let shift_x = rng.gen_range(spec.shift_range.0..=spec.shift_range.1);
        let shift_y = rng.gen_range(spec.shift_range.0..=spec.shift_range.1);
        let shape = ShapeSpec {
            kind,
            rotation_deg,
            scale,
            center: (c + shift_x, c + shift_y),
            aspect: DEFAULT_ELLIPSE_ASPECT,
        };
        let img = rasterize_shape(&shape, spec.image_size)?;
        out.push((img, shape));
    }
    Ok(out)
}

/// Rotations at midpoints between consecutive train-grid entries, with
/// wraparound at 180 degrees; disjoint from the input by construction.
pub fn ood_rotation_split(train_grid: &[f64]) -> Vec<f64> {
    if train_grid.is_empty() {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(train_grid.len());
    for i in 0..train_grid.len() {
        let a = train_grid[i];
        let b = if i + 1 < train_grid.len() {
            train_grid[i + 1]
        } else {
            train_grid[0] + 180.0
        };
        out.push((a + b) / 2.0 % 180.0);
    }
    out
}
