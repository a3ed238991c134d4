//! Axis-aligned rectangle primitives: overlap, IoU, strict directional
//! predicates with tolerance, and morphological erosion.
//!
//! Coordinates follow the raster image convention: origin at the top-left,
//! `x` grows rightward, `y` grows downward. "Above" therefore means smaller
//! `y`, and the manga reading direction "right to left" means larger `x`
//! first.

use serde::{Deserialize, Serialize};

/// Axis-aligned rectangle in page pixel coordinates.
///
/// Invariants (enforced at file-load time, assumed elsewhere): `x1 <= x2`,
/// `y1 <= y2`, all coordinates finite. Serialized as a `[x1, y1, x2, y2]`
/// array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl From<[f64; 4]> for BBox {
    fn from(v: [f64; 4]) -> Self {
        BBox {
            x1: v[0],
            y1: v[1],
            x2: v[2],
            y2: v[3],
        }
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.x1, b.y1, b.x2, b.y2]
    }
}

impl BBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        BBox { x1, y1, x2, y2 }
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Center point `(cx, cy)`.
    pub fn center(&self) -> (f64, f64) {
        ((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)
    }

    /// Zero width or height: the box has no interior.
    pub fn is_degenerate(&self) -> bool {
        self.width() <= 0.0 || self.height() <= 0.0
    }

    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        self.x1 <= x && x <= self.x2 && self.y1 <= y && y <= self.y2
    }

    /// True when the boxes share at least a boundary point (closed-set
    /// intersection). Distinct from positive-area overlap.
    pub fn touches(&self, other: &BBox) -> bool {
        self.x1.max(other.x1) <= self.x2.min(other.x2)
            && self.y1.max(other.y1) <= self.y2.min(other.y2)
    }
}

/// Slack parameters for the strict predicates and the erosion loop.
///
/// The defaults scale with the page so behaviour is resolution independent:
/// `epsilon` is 0.1% of the page diagonal, `erosion_step` 0.5% of the shorter
/// page side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    /// Strictness slack in pixels; `epsilon >= 0`.
    pub epsilon: f64,
    /// Inward shrink per erosion iteration in pixels; `> 0`.
    pub erosion_step: f64,
    /// Iteration cap for the erosion loops; `>= 1`.
    pub max_erosion_iters: usize,
}

pub const DEFAULT_EPSILON_FRACTION: f64 = 0.001;
pub const DEFAULT_EROSION_STEP_FRACTION: f64 = 0.005;
pub const DEFAULT_MAX_EROSION_ITERS: usize = 50;

impl Tolerance {
    /// Default tolerance for a page of the given dimensions.
    pub fn for_page(width: f64, height: f64) -> Tolerance {
        Tolerance::for_page_with(
            width,
            height,
            DEFAULT_EPSILON_FRACTION,
            DEFAULT_EROSION_STEP_FRACTION,
            DEFAULT_MAX_EROSION_ITERS,
        )
    }

    /// Tolerance with explicit fractions: `epsilon_fraction` of the page
    /// diagonal and `erosion_step_fraction` of the shorter page side.
    pub fn for_page_with(
        width: f64,
        height: f64,
        epsilon_fraction: f64,
        erosion_step_fraction: f64,
        max_erosion_iters: usize,
    ) -> Tolerance {
        let diagonal = (width * width + height * height).sqrt();
        Tolerance {
            epsilon: epsilon_fraction * diagonal,
            erosion_step: erosion_step_fraction * width.min(height),
            max_erosion_iters,
        }
    }
}

/// Positive-area intersection of two boxes; 0 when they are disjoint or only
/// share a boundary.
pub fn intersection_area(a: &BBox, b: &BBox) -> f64 {
    let w = a.x2.min(b.x2) - a.x1.max(b.x1);
    let h = a.y2.min(b.y2) - a.y1.max(b.y1);
    if w > 0.0 && h > 0.0 {
        w * h
    } else {
        0.0
    }
}

/// Intersection over union. 0 for disjoint boxes and for a degenerate
/// zero-area union.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = intersection_area(a, b);
    let union = a.area() + b.area() - inter;
    if union > 0.0 {
        inter / union
    } else {
        0.0
    }
}

/// `a` is strictly above `b`: `a.y2 <= b.y1 + epsilon`.
///
/// Tangent boxes count as strictly ordered (closed inequality).
pub fn is_strictly_above(a: &BBox, b: &BBox, tol: &Tolerance) -> bool {
    a.y2 <= b.y1 + tol.epsilon
}

/// `a` is strictly to the right of `b`: `a.x1 >= b.x2 - epsilon`.
pub fn is_strictly_right_of(a: &BBox, b: &BBox, tol: &Tolerance) -> bool {
    a.x1 >= b.x2 - tol.epsilon
}

/// Move every side of `b` inward by `step`, clamping each axis at the box
/// center so the result is a possibly zero-area box with the same center.
pub fn erode(b: &BBox, step: f64) -> BBox {
    let (cx, cy) = b.center();
    BBox {
        x1: (b.x1 + step).min(cx),
        y1: (b.y1 + step).min(cy),
        x2: (b.x2 - step).max(cx),
        y2: (b.y2 - step).max(cy),
    }
}

/// Erode copies of `a` and `b` simultaneously by `tol.erosion_step` per
/// iteration until their intersection area is at most `epsilon^2`. The inputs
/// are never mutated.
///
/// Returns `None` when the iteration cap is exhausted, or when either box
/// degenerates to zero area while the pair still intersects as point sets
/// (a containment-like overlap the directional rules cannot resolve; callers
/// fall back to a positional comparator).
pub fn erode_pair_until_disjoint(a: &BBox, b: &BBox, tol: &Tolerance) -> Option<(BBox, BBox)> {
    let eps2 = tol.epsilon * tol.epsilon;
    let mut ea = *a;
    let mut eb = *b;
    for iter in 0..=tol.max_erosion_iters {
        if (ea.is_degenerate() || eb.is_degenerate()) && ea.touches(&eb) {
            return None;
        }
        if intersection_area(&ea, &eb) <= eps2 {
            return Some((ea, eb));
        }
        if iter == tol.max_erosion_iters {
            break;
        }
        ea = erode(&ea, tol.erosion_step);
        eb = erode(&eb, tol.erosion_step);
    }
    None
}
