//! Planar primitives: points, clip rectangles, convex polygon clipping with
//! edge labels, and scanline coverage of polygons by pixel centers.

use serde::{Deserialize, Serialize};

use crate::divergence::Generator;
use crate::error::{Error, Result};

pub type Point2 = [f64; 2];

/// The axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        let r = Rect { x0, y0, x1, y1 };
        if ![x0, y0, x1, y1].iter().all(|v| v.is_finite()) || x0 >= x1 || y0 >= y1 {
            return Err(Error::invalid("diagram", format!("invalid clip rectangle {x0},{y0},{x1},{y1}")));
        }
        Ok(r)
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn center(&self) -> Point2 {
        [0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1)]
    }

    /// Corners in counter-clockwise order starting at `(x0, y0)`.
    pub fn corners(&self) -> [Point2; 4] {
        [[self.x0, self.y0], [self.x1, self.y0], [self.x1, self.y1], [self.x0, self.y1]]
    }

    pub fn contains(&self, p: Point2) -> bool {
        p[0] >= self.x0 && p[0] <= self.x1 && p[1] >= self.y0 && p[1] <= self.y1
    }

    /// Fails unless the closed rectangle lies inside the generator's domain.
    pub fn check_inside(&self, gen: &Generator) -> Result<()> {
        for c in self.corners() {
            if !gen.contains(&c) {
                return Err(Error::Domain { generator: gen.name().to_string(), point: c.to_vec() });
            }
        }
        Ok(())
    }

    /// Center of pixel `(col, row)` of a `w x h` grid; row 0 is the top edge.
    pub fn pixel_center(&self, w: usize, h: usize, col: usize, row: usize) -> Point2 {
        [
            self.x0 + (col as f64 + 0.5) * self.width() / w as f64,
            self.y1 - (row as f64 + 0.5) * self.height() / h as f64,
        ]
    }
}

/// The halfplane `a . x + c <= 0`, tagged with the cell on its far side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct HalfPlane {
    pub a: Point2,
    pub c: f64,
    pub tag: Option<usize>,
}

impl HalfPlane {
    pub fn eval(&self, p: Point2) -> f64 {
        self.a[0] * p[0] + self.a[1] * p[1] + self.c
    }
}

/// A convex polygon in counter-clockwise order; `tags[i]` labels the edge
/// from vertex `i` to vertex `i + 1`.
#[derive(Debug, Clone, Default, PartialEq)]
pub(crate) struct TaggedPolygon {
    pub pts: Vec<Point2>,
    pub tags: Vec<Option<usize>>,
}

impl TaggedPolygon {
    pub fn from_points(pts: &[Point2]) -> Self {
        Self { pts: pts.to_vec(), tags: vec![None; pts.len()] }
    }

    pub fn is_empty(&self) -> bool {
        self.pts.len() < 3
    }

    /// One Sutherland-Hodgman step keeping `h <= 0`.
    pub fn clip(&self, h: &HalfPlane, scale: f64) -> TaggedPolygon {
        let n = self.pts.len();
        if n == 0 {
            return self.clone();
        }
        let eps = 1e-13 * (scale * (h.a[0].abs() + h.a[1].abs()) + h.c.abs());
        let s: Vec<f64> = self.pts.iter().map(|&p| h.eval(p)).collect();
        if s.iter().all(|&v| v <= eps) {
            return self.clone();
        }
        if s.iter().all(|&v| v >= -eps) {
            return TaggedPolygon::default();
        }
        let mut out = TaggedPolygon::default();
        for i in 0..n {
            let j = (i + 1) % n;
            let (ci, cj) = (s[i] <= eps, s[j] <= eps);
            let cross = || {
                let t = s[i] / (s[i] - s[j]);
                let (a, b) = (self.pts[i], self.pts[j]);
                [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
            };
            match (ci, cj) {
                (true, true) => {
                    out.pts.push(self.pts[i]);
                    out.tags.push(self.tags[i]);
                }
                (true, false) => {
                    out.pts.push(self.pts[i]);
                    out.tags.push(self.tags[i]);
                    out.pts.push(cross());
                    out.tags.push(h.tag);
                }
                (false, true) => {
                    out.pts.push(cross());
                    out.tags.push(self.tags[i]);
                }
                (false, false) => {}
            }
        }
        out.dedup(1e-14 * scale.max(1e-300));
        if out.pts.len() < 3 || out.area() <= 1e-28 * scale * scale {
            return TaggedPolygon::default();
        }
        out
    }

    /// Drops zero-length edges, keeping the tag of the edge that follows.
    fn dedup(&mut self, eps: f64) {
        let mut i = 0;
        while self.pts.len() > 1 && i < self.pts.len() {
            let j = (i + 1) % self.pts.len();
            let (a, b) = (self.pts[i], self.pts[j]);
            if (a[0] - b[0]).abs() <= eps && (a[1] - b[1]).abs() <= eps {
                self.pts.remove(i);
                self.tags.remove(i);
            } else {
                i += 1;
            }
        }
    }

    pub fn area(&self) -> f64 {
        polygon_area(&self.pts)
    }
}

/// Signed area; positive for counter-clockwise polygons.
pub fn polygon_area(pts: &[Point2]) -> f64 {
    let n = pts.len();
    (0..n)
        .map(|i| {
            let (a, b) = (pts[i], pts[(i + 1) % n]);
            a[0] * b[1] - a[1] * b[0]
        })
        .sum::<f64>()
        * 0.5
}

/// Even-odd point-in-polygon test.
pub fn point_in_polygon(pts: &[Point2], p: Point2) -> bool {
    let n = pts.len();
    let mut inside = false;
    for i in 0..n {
        let (a, b) = (pts[i], pts[(i + 1) % n]);
        if (a[1] <= p[1]) != (b[1] <= p[1]) {
            let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p[0] < x {
                inside = !inside;
            }
        }
    }
    inside
}

/// Calls `visit(row * w + col)` for each pixel center inside the polygon
/// (even-odd rule, half-open in both axes so shared edges are not double counted).
pub(crate) fn scan_polygon(pts: &[Point2], clip: &Rect, w: usize, h: usize, mut visit: impl FnMut(usize)) {
    if pts.len() < 3 {
        return;
    }
    let dx = clip.width() / w as f64;
    let dy = clip.height() / h as f64;
    let ymin = pts.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min);
    let ymax = pts.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max);
    // Pixel center y = y1 - (row + 0.5) dy.
    let row_lo = (((clip.y1 - ymax) / dy - 0.5).floor().max(0.0)) as usize;
    let row_hi = ((((clip.y1 - ymin) / dy - 0.5).ceil() + 1.0).max(0.0) as usize).min(h);
    let mut xs = Vec::new();
    for row in row_lo..row_hi {
        let y = clip.y1 - (row as f64 + 0.5) * dy;
        xs.clear();
        for i in 0..pts.len() {
            let (a, b) = (pts[i], pts[(i + 1) % pts.len()]);
            if (a[1] <= y) != (b[1] <= y) {
                xs.push(a[0] + (y - a[1]) * (b[0] - a[0]) / (b[1] - a[1]));
            }
        }
        xs.sort_by(f64::total_cmp);
        for pair in xs.chunks_exact(2) {
            let start = ((pair[0] - clip.x0) / dx - 0.5).ceil().max(0.0) as usize;
            let end = (((pair[1] - clip.x0) / dx - 0.5).ceil().max(0.0) as usize).min(w);
            for col in start..end {
                visit(row * w + col);
            }
        }
    }
}
