//! Centroidal relaxation, Bregman k-means and epsilon-nets.

mod epsnet;
mod lloyd;

pub use epsnet::{eps_net, eps_net_with_limit, sample_error, sample_error_witness, InsertionStep, SampleRun};
pub use lloyd::{bregman_kmeans, lloyd, KMeansInit, KMeansRun, LloydOptions, LloydRun, SiteInit};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::divergence::Generator;
use crate::error::{Error, Result};
use crate::planar::{point_in_polygon, polygon_area, Point2, Rect};

const MODULE: &str = "sampling";

/// A convex polygon, counter-clockwise, with nonzero area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainPolygon {
    vertices: Vec<Point2>,
    /// Required clearance between the polygon and the generator's domain boundary.
    clearance: f64,
}

impl DomainPolygon {
    /// Accepts either orientation; the stored order is counter-clockwise.
    pub fn new(vertices: &[Point2]) -> Result<Self> {
        if vertices.len() < 3 || vertices.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid(MODULE, "a domain polygon needs at least three finite vertices"));
        }
        let mut v = vertices.to_vec();
        let area = polygon_area(&v);
        if area == 0.0 {
            return Err(Error::invalid(MODULE, "domain polygon has zero area"));
        }
        if area < 0.0 {
            v.reverse();
        }
        let n = v.len();
        for i in 0..n {
            let (a, b, c) = (v[i], v[(i + 1) % n], v[(i + 2) % n]);
            if (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]) < 0.0 {
                return Err(Error::invalid(MODULE, "domain polygon is not convex"));
            }
        }
        Ok(Self { vertices: v, clearance: 0.0 })
    }

    pub fn from_rect(r: &Rect) -> Self {
        Self { vertices: r.corners().to_vec(), clearance: 0.0 }
    }

    /// Requires every point within `clearance` (per axis) of the polygon to
    /// lie in the generator's domain.
    pub fn with_clearance(mut self, clearance: f64) -> Result<Self> {
        if !(clearance >= 0.0 && clearance.is_finite()) {
            return Err(Error::invalid(MODULE, "clearance must be finite and non-negative"));
        }
        self.clearance = clearance;
        Ok(self)
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn area(&self) -> f64 {
        polygon_area(&self.vertices)
    }

    /// Closed containment, tolerant of rounding in computed boundary points.
    pub fn contains(&self, p: Point2) -> bool {
        let n = self.vertices.len();
        let scale = 1.0 + p[0].abs().max(p[1].abs());
        (0..n).all(|i| {
            let (a, b) = (self.vertices[i], self.vertices[(i + 1) % n]);
            let len = (b[0] - a[0]).hypot(b[1] - a[1]);
            (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) >= -1e-12 * len * scale
        })
    }

    /// Area centroid.
    pub fn centroid(&self) -> Point2 {
        let (mut cx, mut cy, mut a2) = (0.0, 0.0, 0.0);
        let n = self.vertices.len();
        for i in 0..n {
            let (p, q) = (self.vertices[i], self.vertices[(i + 1) % n]);
            let w = p[0] * q[1] - q[0] * p[1];
            a2 += w;
            cx += (p[0] + q[0]) * w;
            cy += (p[1] + q[1]) * w;
        }
        [cx / (3.0 * a2), cy / (3.0 * a2)]
    }

    pub fn bbox(&self) -> Rect {
        let xs = self.vertices.iter().map(|v| v[0]);
        let ys = self.vertices.iter().map(|v| v[1]);
        Rect {
            x0: xs.clone().fold(f64::INFINITY, f64::min),
            x1: xs.fold(f64::NEG_INFINITY, f64::max),
            y0: ys.clone().fold(f64::INFINITY, f64::min),
            y1: ys.fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// The domain is convex, so checking the clearance box of each vertex
    /// covers the whole polygon.
    pub fn check_inside(&self, gen: &Generator) -> Result<()> {
        if gen.dim() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, got: gen.dim() });
        }
        let m = self.clearance;
        for v in &self.vertices {
            for p in [[v[0] - m, v[1] - m], [v[0] + m, v[1] - m], [v[0] + m, v[1] + m], [v[0] - m, v[1] + m]] {
                if !gen.contains(&p) {
                    return Err(Error::Domain { generator: gen.name().to_string(), point: p.to_vec() });
                }
            }
        }
        Ok(())
    }
}

/// Nonnegative density samples at pixel centers of a rectangle; row 0 is the top.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub clip: Rect,
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl DensityGrid {
    pub fn from_fn(clip: Rect, width: usize, height: usize, f: impl Fn(Point2) -> f64 + Sync) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid(MODULE, "density grid needs positive size"));
        }
        let values: Vec<f64> = (0..width * height)
            .into_par_iter()
            .map(|i| f(clip.pixel_center(width, height, i % width, i / width)))
            .collect();
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid(MODULE, "density must be finite and non-negative"));
        }
        Ok(Self { clip, width, height, values })
    }

    pub fn uniform(clip: Rect, width: usize, height: usize) -> Result<Self> {
        Self::from_fn(clip, width, height, |_| 1.0)
    }

    pub fn center(&self, i: usize) -> Point2 {
        self.clip.pixel_center(self.width, self.height, i % self.width, i / self.width)
    }

    /// Pixels whose centers fall inside `poly`.
    pub fn polygon_mask(&self, poly: &[Point2]) -> Vec<bool> {
        (0..self.values.len()).map(|i| point_in_polygon(poly, self.center(i))).collect()
    }
}

/// Mass centroid `sum p(x) x / sum p(x)` over the masked pixels.
pub fn region_centroid(grid: &DensityGrid, mask: &[bool]) -> Result<Point2> {
    if mask.len() != grid.values.len() {
        return Err(Error::DimensionMismatch { expected: grid.values.len(), got: mask.len() });
    }
    let (mut m, mut sx, mut sy) = (0.0, 0.0, 0.0);
    for (i, (&p, &inside)) in grid.values.iter().zip(mask).enumerate() {
        if inside && p > 0.0 {
            let x = grid.center(i);
            m += p;
            sx += p * x[0];
            sy += p * x[1];
        }
    }
    if m <= 0.0 {
        return Err(Error::EmptyRegion);
    }
    Ok([sx / m, sy / m])
}

/// The pixel center `c` minimizing `sum p(x) D_F(x || c)` over the masked
/// pixels, by direct summation on a coarse-to-fine candidate search.
pub fn centroid_grid_argmin(gen: &Generator, grid: &DensityGrid, mask: &[bool]) -> Result<Point2> {
    if mask.len() != grid.values.len() {
        return Err(Error::DimensionMismatch { expected: grid.values.len(), got: mask.len() });
    }
    let support: Vec<(Point2, f64, f64)> = (0..mask.len())
        .filter(|&i| mask[i] && grid.values[i] > 0.0)
        .map(|i| {
            let x = grid.center(i);
            Ok((x, grid.values[i], gen.value(&x)?))
        })
        .collect::<Result<_>>()?;
    if support.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let (w, h) = (grid.width as i64, grid.height as i64);
    let cost = |col: i64, row: i64| -> Option<f64> {
        if col < 0 || row < 0 || col >= w || row >= h || !mask[(row * w + col) as usize] {
            return None;
        }
        let c = grid.clip.pixel_center(grid.width, grid.height, col as usize, row as usize);
        let (fc, g) = (gen.value(&c).ok()?, gen.gradient(&c).ok()?);
        Some(support.iter().map(|(x, p, fx)| p * (fx - fc - (x[0] - c[0]) * g[0] - (x[1] - c[1]) * g[1])).sum())
    };
    let best_of = |cands: Vec<(i64, i64)>| -> Option<(i64, i64)> {
        cands
            .into_par_iter()
            .filter_map(|(c, r)| cost(c, r).map(|v| (v, c, r)))
            .min_by(|a, b| a.0.total_cmp(&b.0).then((a.2, a.1).cmp(&(b.2, b.1))))
            .map(|(_, c, r)| (c, r))
    };
    let mut stride = 16i64.min(w.max(h));
    let coarse: Vec<(i64, i64)> =
        (0..h).step_by(stride as usize).flat_map(|r| (0..w).step_by(stride as usize).map(move |c| (c, r))).collect();
    let mut best = match best_of(coarse) {
        Some(b) => b,
        // No coarse candidate is masked: fall back to every masked pixel.
        None => best_of((0..h).flat_map(|r| (0..w).map(move |c| (c, r))).collect()).ok_or(Error::EmptyRegion)?,
    };
    while stride > 1 {
        let reach = 2 * stride;
        stride /= 2;
        let (bc, br) = best;
        let cands: Vec<(i64, i64)> = (-reach..=reach)
            .step_by(stride as usize)
            .flat_map(|dr| (-reach..=reach).step_by(stride as usize).map(move |dc| (bc + dc, br + dr)))
            .collect();
        best = best_of(cands).unwrap_or(best);
    }
    // Final polish: walk to the best 8-neighbor until none improves.
    loop {
        let (bc, br) = best;
        let cands: Vec<(i64, i64)> = (-1..=1).flat_map(|dr| (-1..=1).map(move |dc| (bc + dc, br + dr))).collect();
        let next = best_of(cands).unwrap_or(best);
        if next == best {
            break;
        }
        best = next;
    }
    Ok(grid.clip.pixel_center(grid.width, grid.height, best.0 as usize, best.1 as usize))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polygon_validation_and_orientation() {
        let cw = [[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]];
        let d = DomainPolygon::new(&cw).unwrap();
        assert!(d.area() > 0.0);
        assert_eq!(d.centroid(), [0.5, 0.5]);
        assert!(DomainPolygon::new(&[[0.0, 0.0], [1.0, 0.0], [0.2, 0.2], [0.0, 1.0]]).is_err());
        assert!(DomainPolygon::new(&[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]).is_err());
    }

    #[test]
    fn clearance_is_enforced() {
        let d = DomainPolygon::from_rect(&Rect::new(0.05, 0.05, 0.95, 0.95).unwrap());
        assert!(d.check_inside(&Generator::shannon(2)).is_ok());
        assert!(d.clone().with_clearance(0.04).unwrap().check_inside(&Generator::shannon(2)).is_ok());
        assert!(d.with_clearance(0.06).unwrap().check_inside(&Generator::shannon(2)).is_err());
    }

    #[test]
    fn uniform_rectangle_centroid_is_its_center() {
        let clip = Rect::new(0.0, 0.0, 2.0, 1.0).unwrap();
        let g = DensityGrid::uniform(clip, 64, 32).unwrap();
        let c = region_centroid(&g, &vec![true; 64 * 32]).unwrap();
        assert!((c[0] - 1.0).abs() < 1e-12 && (c[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn point_mass_centroid_is_the_point() {
        let clip = Rect::new(0.0, 0.0, 1.0, 1.0).unwrap();
        let g = DensityGrid::uniform(clip, 16, 16).unwrap();
        let mut mask = vec![false; 256];
        mask[37] = true;
        assert_eq!(region_centroid(&g, &mask).unwrap(), g.center(37));
        assert!(matches!(region_centroid(&g, &vec![false; 256]), Err(Error::EmptyRegion)));
    }

    #[test]
    fn grid_argmin_lands_on_the_mass_centroid() {
        let clip = Rect::new(0.1, 0.1, 1.1, 1.1).unwrap();
        let g = DensityGrid::from_fn(clip, 128, 128, |x| 1.0 + 3.0 * x[0] * x[1]).unwrap();
        let mask = g.polygon_mask(&[[0.2, 0.15], [1.0, 0.4], [0.7, 1.05], [0.25, 0.8]]);
        let c = region_centroid(&g, &mask).unwrap();
        for gen in [Generator::shannon(2), Generator::burg(2), Generator::squared_half_norm(2)] {
            let a = centroid_grid_argmin(&gen, &g, &mask).unwrap();
            let cell = 1.0 / 128.0;
            assert!((a[0] - c[0]).abs() <= cell && (a[1] - c[1]).abs() <= cell, "{} {a:?} {c:?}", gen.name());
        }
    }
}
