//! Planar Bregman Voronoi diagrams.
//!
//! First-type cells `{x : D_F(x||p_i) <= D_F(x||p_j) for all j}` are convex:
//! the bisectors are affine in `x`, so each cell is a clip rectangle cut by
//! `n - 1` halfplanes. Weighted and k-order diagrams reduce to the same
//! construction with additive weights. Second-type cells
//! `{x : D_F(p_i||x) <= D_F(p_j||x)}` are first-type cells of the conjugate in
//! gradient coordinates, mapped back through `(grad F)^-1`; their edges are
//! curved and are sampled.
//!
//! Every exact construction has a brute-force counterpart in [`raster`].

mod raster;

pub use raster::{agreement, kbag_bisector, raster_diagram, Agreement, KBagSite, RasterLabels, RasterMode, NO_LABEL};

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::divergence::Generator;
use crate::error::{Error, Result};
use crate::planar::{point_in_polygon, HalfPlane, Point2, Rect, TaggedPolygon};
use crate::tol;

const MODULE: &str = "diagram";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagramKind {
    First,
    Second,
    SymmetrizedRaster,
    Weighted,
    KOrder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    /// The site, or the k-subset of sites, owning the cell.
    pub sites: Vec<usize>,
    /// Boundary in counter-clockwise order; empty when the cell misses the clip.
    pub polygon: Vec<Point2>,
    /// `neighbors[i]` is the cell across the edge `polygon[i] -> polygon[i+1]`,
    /// or `None` on the clip boundary.
    pub neighbors: Vec<Option<usize>>,
    /// Whether the cell of the unclipped diagram is bounded.
    pub bounded: bool,
    /// Second-type cells: the exact convex cell in gradient coordinates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gradient_polygon: Option<Vec<Point2>>,
    /// Weighted and k-order cells: the center and additive weight used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Point2>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
    /// Raster-traced cells may have several boundary rings.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extra_rings: Vec<Vec<Point2>>,
}

impl Cell {
    fn new(sites: Vec<usize>, poly: TaggedPolygon, bounded: bool) -> Self {
        Cell {
            sites,
            polygon: poly.pts,
            neighbors: poly.tags,
            bounded,
            gradient_polygon: None,
            center: None,
            weight: None,
            extra_rings: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanarDiagram {
    pub kind: DiagramKind,
    pub generator: String,
    pub clip: Rect,
    pub sites: Vec<Point2>,
    pub cells: Vec<Cell>,
}

impl PlanarDiagram {
    /// Index of the cell containing `x`, found through exact cell geometry.
    pub fn locate(&self, gen: &Generator, x: Point2) -> Option<usize> {
        if self.kind == DiagramKind::Second {
            let y = gen.gradient(&x).ok()?;
            return self.cells.iter().position(|c| {
                c.gradient_polygon.as_deref().is_some_and(|g| g.len() >= 3 && point_in_polygon(g, [y[0], y[1]]))
            });
        }
        self.cells.iter().position(|c| {
            (c.polygon.len() >= 3 && point_in_polygon(&c.polygon, x))
                || c.extra_rings.iter().any(|r| point_in_polygon(r, x))
        })
    }

    /// Pairs of cells sharing an edge of positive length.
    pub fn adjacency(&self) -> BTreeSet<(usize, usize)> {
        let scale = self.clip.width().max(self.clip.height());
        edge_adjacency(&self.cells, 1e-9 * scale)
    }
}

fn edge_adjacency(cells: &[Cell], min_len: f64) -> BTreeSet<(usize, usize)> {
    let mut out = BTreeSet::new();
    for (i, c) in cells.iter().enumerate() {
        let n = c.polygon.len();
        for k in 0..n {
            if let Some(j) = c.neighbors[k] {
                let (a, b) = (c.polygon[k], c.polygon[(k + 1) % n]);
                if (a[0] - b[0]).hypot(a[1] - b[1]) > min_len {
                    out.insert((i.min(j), i.max(j)));
                }
            }
        }
    }
    out
}

/// Checks that sites are planar, inside the domain and pairwise distinct.
pub fn validate_sites(gen: &Generator, sites: &[Point2]) -> Result<()> {
    if gen.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: gen.dim() });
    }
    if sites.is_empty() {
        return Err(Error::invalid(MODULE, "at least one site is required"));
    }
    for s in sites {
        if !gen.contains(s) {
            return Err(Error::Domain { generator: gen.name().to_string(), point: s.to_vec() });
        }
    }
    for i in 0..sites.len() {
        for j in i + 1..sites.len() {
            let d = (sites[i][0] - sites[j][0]).hypot(sites[i][1] - sites[j][1]);
            if d <= tol::DUPLICATE_SITE {
                return Err(Error::degenerate(MODULE, format!("sites {i} and {j} coincide")));
            }
        }
    }
    Ok(())
}

/// Per-site data of a diagram whose cells are `D_F(x||c_i) + w_i` minimal:
/// `D_F(x||c_i) + w_i = F(x) - <x, c_i'> + k_i` with `k_i = <c_i, c_i'> - F(c_i) + w_i`.
#[derive(Debug, Clone)]
pub(crate) struct AffineSite {
    pub grad: Point2,
    pub k: f64,
}

impl AffineSite {
    pub fn new(gen: &Generator, c: Point2, w: f64) -> Result<Self> {
        let g = gen.gradient(&c)?;
        let k = c[0] * g[0] + c[1] * g[1] - gen.value(&c)? + w;
        Ok(Self { grad: [g[0], g[1]], k })
    }

    /// Halfplane where this site beats `other`, tagged with `tag`.
    pub fn versus(&self, other: &AffineSite, tag: usize) -> HalfPlane {
        HalfPlane {
            a: [other.grad[0] - self.grad[0], other.grad[1] - self.grad[1]],
            c: self.k - other.k,
            tag: Some(tag),
        }
    }
}

/// Cells of the affine minimization diagram over a convex clip polygon.
pub(crate) fn affine_cells(sites: &[AffineSite], clip: &[Point2], order_by_gradient: bool) -> Vec<TaggedPolygon> {
    let scale = clip.iter().map(|p| p[0].abs().max(p[1].abs())).fold(0.0, f64::max).max(1e-300);
    let base = TaggedPolygon::from_points(clip);
    (0..sites.len())
        .map(|i| {
            let mut order: Vec<usize> = (0..sites.len()).filter(|&j| j != i).collect();
            if order_by_gradient {
                let gi = sites[i].grad;
                let dist = |j: usize| (sites[j].grad[0] - gi[0]).hypot(sites[j].grad[1] - gi[1]);
                order.sort_by(|&a, &b| dist(a).total_cmp(&dist(b)));
            }
            let mut poly = base.clone();
            for j in order {
                poly = poly.clip(&sites[i].versus(&sites[j], j), scale);
                if poly.is_empty() {
                    break;
                }
            }
            poly
        })
        .collect()
}

/// Whether the cell of `centers[i]` in an additively weighted power-type
/// diagram is unbounded: all `c_j - c_i` lie in a closed halfplane.
fn unbounded(centers: &[Point2], i: usize) -> bool {
    let mut angles: Vec<f64> = centers
        .iter()
        .enumerate()
        .filter(|&(j, c)| j != i && (c[0] - centers[i][0]).hypot(c[1] - centers[i][1]) > 0.0)
        .map(|(_, c)| (c[1] - centers[i][1]).atan2(c[0] - centers[i][0]))
        .collect();
    if angles.len() < 2 {
        return true;
    }
    angles.sort_by(f64::total_cmp);
    let mut gap = angles[0] + std::f64::consts::TAU - angles[angles.len() - 1];
    for w in angles.windows(2) {
        gap = gap.max(w[1] - w[0]);
    }
    gap >= std::f64::consts::PI - 1e-12
}

fn weighted_cells(gen: &Generator, centers: &[Point2], weights: &[f64], clip: &Rect) -> Result<Vec<Cell>> {
    let sites = centers.iter().zip(weights).map(|(c, w)| AffineSite::new(gen, *c, *w)).collect::<Result<Vec<_>>>()?;
    let grads: Vec<Point2> = sites.iter().map(|s| s.grad).collect();
    let polys = affine_cells(&sites, &clip.corners(), sites.len() > 64);
    Ok(polys
        .into_iter()
        .enumerate()
        .map(|(i, p)| Cell::new(vec![i], p, !unbounded(&grads, i)))
        .collect())
}

/// The ball with power `pow(x, B) = |x - center|^2 - squared_radius`. The
/// center is a gradient point `p'`; `squared_radius` may be negative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerBall {
    pub center: Vec<f64>,
    pub squared_radius: f64,
}

impl PowerBall {
    pub fn power(&self, x: &[f64]) -> f64 {
        crate::geometry::power_distance(&self.center, self.squared_radius, x)
    }
}

/// Power balls ordering sites exactly as `D_F(x || p_i)` does:
/// `pow(x, B_i) - pow(x, B_j) = 2 (D_F(x||p_i) - D_F(x||p_j))`.
pub fn to_power_balls(gen: &Generator, sites: &[Vec<f64>]) -> Result<Vec<PowerBall>> {
    sites
        .iter()
        .map(|s| {
            let (center, squared_radius) = crate::geometry::power_ball(gen, s)?;
            Ok(PowerBall { center, squared_radius })
        })
        .collect()
}

/// The first-type diagram `{x : D_F(x||p_i) <= D_F(x||p_j)}` clipped to `clip`.
pub fn first_type_diagram_2d(gen: &Generator, sites: &[Point2], clip: &Rect) -> Result<PlanarDiagram> {
    validate_sites(gen, sites)?;
    clip.check_inside(gen)?;
    let cells = weighted_cells(gen, sites, &vec![0.0; sites.len()], clip)?;
    Ok(PlanarDiagram { kind: DiagramKind::First, generator: gen.name().into(), clip: *clip, sites: sites.to_vec(), cells })
}

/// Cells minimizing `D_F(x||p_i) + w_i`; a cell may be empty.
pub fn weighted_first_type_diagram_2d(gen: &Generator, sites: &[Point2], weights: &[f64], clip: &Rect) -> Result<PlanarDiagram> {
    validate_sites(gen, sites)?;
    clip.check_inside(gen)?;
    if weights.len() != sites.len() {
        return Err(Error::DimensionMismatch { expected: sites.len(), got: weights.len() });
    }
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::invalid(MODULE, "weights must be finite"));
    }
    let mut cells = weighted_cells(gen, sites, weights, clip)?;
    for (c, w) in cells.iter_mut().zip(weights) {
        c.weight = Some(*w);
    }
    Ok(PlanarDiagram {
        kind: DiagramKind::Weighted,
        generator: gen.name().into(),
        clip: *clip,
        sites: sites.to_vec(),
        cells,
    })
}

/// The image of the clip rectangle under `grad F`, as a convex polygon.
fn gradient_clip(gen: &Generator, clip: &Rect) -> Result<Vec<Point2>> {
    let map = |p: Point2| -> Result<Point2> {
        let g = gen.gradient(&p)?;
        Ok([g[0], g[1]])
    };
    if gen.is_coordinate_separable() {
        let a = map([clip.x0, clip.y0])?;
        let b = map([clip.x1, clip.y1])?;
        return Ok(vec![a, [b[0], a[1]], b, [a[0], b[1]]]);
    }
    if gen.has_affine_gradient() {
        return clip.corners().iter().map(|&c| map(c)).collect();
    }
    Err(Error::unsupported(MODULE, format!("second-type diagram of `{}`: gradient does not map the clip to a polygon", gen.name())))
}

/// The second-type diagram `{x : D_F(p_i||x) <= D_F(p_j||x)}`.
///
/// Cells are first-type cells of `F*` around `grad F(p_i)`, clipped to the
/// gradient image of `clip` and mapped back edge by edge with `edge_samples`
/// points per edge.
pub fn second_type_diagram_2d(
    gen: &Generator,
    sites: &[Point2],
    clip: &Rect,
    edge_samples: usize,
) -> Result<PlanarDiagram> {
    validate_sites(gen, sites)?;
    clip.check_inside(gen)?;
    if edge_samples == 0 {
        return Err(Error::invalid(MODULE, "edge_samples must be >= 1"));
    }
    let dual = gen.dual()?;
    let grads = sites
        .iter()
        .map(|s| gen.gradient(s).map(|g| [g[0], g[1]]))
        .collect::<Result<Vec<Point2>>>()?;
    let affine = grads.iter().map(|g| AffineSite::new(&dual, *g, 0.0)).collect::<Result<Vec<_>>>()?;
    let gclip = gradient_clip(gen, clip)?;
    let polys = affine_cells(&affine, &gclip, sites.len() > 64);
    let mut cells = Vec::with_capacity(sites.len());
    for (i, poly) in polys.into_iter().enumerate() {
        let mut pts = Vec::new();
        let mut tags = Vec::new();
        let n = poly.pts.len();
        for k in 0..n {
            let (a, b) = (poly.pts[k], poly.pts[(k + 1) % n]);
            for s in 0..edge_samples {
                let t = s as f64 / edge_samples as f64;
                let y = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
                let x = gen.inverse_gradient(&y)?;
                pts.push([x[0].clamp(clip.x0, clip.x1), x[1].clamp(clip.y0, clip.y1)]);
                tags.push(poly.tags[k]);
            }
        }
        // Centers of the dual cells are grad F*(p_i') = p_i.
        let mut cell = Cell::new(vec![i], TaggedPolygon { pts, tags }, !unbounded(sites, i));
        cell.gradient_polygon = Some(poly.pts);
        cells.push(cell);
    }
    Ok(PlanarDiagram { kind: DiagramKind::Second, generator: gen.name().into(), clip: *clip, sites: sites.to_vec(), cells })
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i as u128 + 1))
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn k_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k == 0 || k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let mut i = k;
        while i > 0 && idx[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Center and additive weight representing a k-subset:
/// `(1/k) sum_{j in T} D_F(x||p_j) = D_F(x||c_T) + w_T` with
/// `grad F(c_T)` the mean of the site gradients.
///
/// The weight is measured at the clip center and checked to be constant at
/// ten further points.
pub fn k_order_center(gen: &Generator, sites: &[Point2], subset: &[usize], clip: &Rect) -> Result<(Point2, f64)> {
    let k = subset.len() as f64;
    let mut mean = [0.0; 2];
    for &j in subset {
        let g = gen.gradient(&sites[j])?;
        mean[0] += g[0] / k;
        mean[1] += g[1] / k;
    }
    let c = gen.inverse_gradient(&mean)?;
    let c = [c[0], c[1]];
    let avg = |x: Point2| -> Result<f64> {
        let mut s = 0.0;
        for &j in subset {
            s += gen.divergence(&x, &sites[j])?;
        }
        Ok(s / k)
    };
    let x0 = clip.center();
    let w = avg(x0)? - gen.divergence(&x0, &c)?;
    for m in 0..10 {
        let fx = 0.1 + 0.08 * m as f64;
        let fy = 0.9 - 0.07 * m as f64;
        let x = [clip.x0 + fx * clip.width(), clip.y0 + fy * clip.height()];
        let a = avg(x)?;
        let dev = (a - gen.divergence(&x, &c)? - w).abs();
        if dev > 1e-8 * (1.0 + a.abs() + w.abs()) {
            return Err(Error::Convergence {
                module: MODULE,
                message: format!("k-order weight of {subset:?} varies by {dev:e}"),
            });
        }
    }
    Ok((c, w))
}

/// The order-k diagram: one cell per k-subset `T`, the points whose k nearest
/// sites (by `D_F(x||.)`) are exactly `T`. Cells appear in lexicographic
/// subset order and may be empty.
pub fn k_order_diagram_2d(gen: &Generator, sites: &[Point2], k: usize, clip: &Rect) -> Result<PlanarDiagram> {
    validate_sites(gen, sites)?;
    clip.check_inside(gen)?;
    let n = sites.len();
    if k == 0 || k >= n {
        return Err(Error::invalid(MODULE, format!("k must satisfy 1 <= k < n = {n}, got {k}")));
    }
    let count = binomial(n, k);
    if count > tol::MAX_SUBSETS {
        return Err(Error::TooManySubsets { subsets: count, limit: tol::MAX_SUBSETS });
    }
    let subsets = k_subsets(n, k);
    let reps = subsets.iter().map(|s| k_order_center(gen, sites, s, clip)).collect::<Result<Vec<_>>>()?;
    let centers: Vec<Point2> = reps.iter().map(|r| r.0).collect();
    let weights: Vec<f64> = reps.iter().map(|r| r.1).collect();
    let affine = centers.iter().zip(&weights).map(|(c, w)| AffineSite::new(gen, *c, *w)).collect::<Result<Vec<_>>>()?;
    let grads: Vec<Point2> = affine.iter().map(|s| s.grad).collect();
    let polys = affine_cells(&affine, &clip.corners(), true);
    let cells = polys
        .into_iter()
        .zip(subsets)
        .enumerate()
        .map(|(i, (p, s))| {
            let mut cell = Cell::new(s, p, !unbounded(&grads, i));
            cell.center = Some(centers[i]);
            cell.weight = Some(weights[i]);
            cell
        })
        .collect();
    Ok(PlanarDiagram { kind: DiagramKind::KOrder, generator: gen.name().into(), clip: *clip, sites: sites.to_vec(), cells })
}

/// A vertex of the first-type diagram, extended to the whole plane through
/// its affine bisectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagramVertex {
    pub point: Point2,
    pub sites: [usize; 3],
    /// Whether the vertex lies in the generator's domain.
    pub in_domain: bool,
    /// Common divergence `D_F(x||p_i)` of the three sites, when in the domain.
    pub divergence: Option<f64>,
}

/// Points equidistant (first type) from three sites with no site strictly closer.
///
/// Equivalently, centers of second-type spheres through three sites that
/// enclose no other site.
pub fn diagram_vertices(gen: &Generator, sites: &[Point2]) -> Result<Vec<DiagramVertex>> {
    validate_sites(gen, sites)?;
    let aff = sites.iter().map(|s| AffineSite::new(gen, *s, 0.0)).collect::<Result<Vec<_>>>()?;
    // Tangent heights: D_F(x||p_i) = F(x) - height_i(x), height_i(x) = <x, p_i'> - k_i.
    let height = |i: usize, x: Point2| aff[i].grad[0] * x[0] + aff[i].grad[1] * x[1] - aff[i].k;
    let n = sites.len();
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            for l in j + 1..n {
                let (h1, h2) = (aff[i].versus(&aff[j], j), aff[i].versus(&aff[l], l));
                let det = h1.a[0] * h2.a[1] - h1.a[1] * h2.a[0];
                let scale = (h1.a[0].hypot(h1.a[1])) * (h2.a[0].hypot(h2.a[1]));
                if det.abs() <= 1e-12 * scale {
                    continue;
                }
                let x = [(-h1.c * h2.a[1] + h2.c * h1.a[1]) / det, (-h2.c * h1.a[0] + h1.c * h2.a[0]) / det];
                let top = height(i, x);
                let slack = 1e-9 * (1.0 + top.abs());
                if (0..n).any(|m| height(m, x) > top + slack) {
                    continue;
                }
                let in_domain = gen.contains(&x);
                let divergence = if in_domain { Some(gen.divergence(&x, &sites[i])?) } else { None };
                out.push(DiagramVertex { point: x, sites: [i, j, l], in_domain, divergence });
            }
        }
    }
    Ok(out)
}

/// Adjacency of the first-type diagram extended to the whole plane: the
/// affine bisectors define it everywhere, and outside the domain it is the
/// power diagram of the sites' power balls.
pub fn first_type_adjacency(gen: &Generator, sites: &[Point2]) -> Result<BTreeSet<(usize, usize)>> {
    validate_sites(gen, sites)?;
    let aff = sites.iter().map(|s| AffineSite::new(gen, *s, 0.0)).collect::<Result<Vec<_>>>()?;
    let verts = diagram_vertices(gen, sites)?;
    let pts = sites.iter().chain(verts.iter().map(|v| &v.point));
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in pts {
        for a in 0..2 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let pad = 1.0 + 0.5 * (hi[0] - lo[0]).max(hi[1] - lo[1]);
    let big = Rect { x0: lo[0] - pad, y0: lo[1] - pad, x1: hi[0] + pad, y1: hi[1] + pad };
    let polys = affine_cells(&aff, &big.corners(), sites.len() > 64);
    let cells: Vec<Cell> = polys.into_iter().enumerate().map(|(i, p)| Cell::new(vec![i], p, true)).collect();
    Ok(edge_adjacency(&cells, 1e-9 * big.width().max(big.height())))
}
