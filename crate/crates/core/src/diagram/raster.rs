//! Brute-force diagrams: every pixel center is labeled by direct comparison
//! of divergences, with ties going to the lowest index.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{k_subsets, validate_sites, Cell, DiagramKind, PlanarDiagram, MODULE};
use crate::divergence::Generator;
use crate::error::{Error, Result};
use crate::planar::{scan_polygon, Point2, Rect, TaggedPolygon};

/// Marks pixels that carry no label.
pub const NO_LABEL: u32 = u32::MAX;

/// A site of a k-bag diagram: its own generator `sum_l alpha_l F_l`.
#[derive(Debug, Clone)]
pub struct KBagSite {
    pub generator: Generator,
}

impl KBagSite {
    /// `sum_l alpha_l F_l`, skipping zero coefficients.
    pub fn new(bases: &[Generator], alphas: &[f64]) -> Result<Self> {
        if bases.len() != alphas.len() {
            return Err(Error::DimensionMismatch { expected: bases.len(), got: alphas.len() });
        }
        let terms: Vec<(f64, Generator)> =
            alphas.iter().zip(bases).filter(|(a, _)| **a != 0.0).map(|(a, g)| (*a, g.clone())).collect();
        Ok(Self { generator: Generator::linear_combination(&terms)? })
    }
}

/// Value at `x` of the k-bag bisector between sites `(p, F_a)` and `(q, F_b)`:
/// `D_{F_a}(x||p) - D_{F_b}(x||q)`, written as
/// `sum_l (a_l - b_l) F_l(x) + <x, grad F_b(q) - grad F_a(p)> + const`.
pub fn kbag_bisector(bases: &[Generator], a: &[f64], p: Point2, b: &[f64], q: Point2, x: Point2) -> Result<f64> {
    let fa = KBagSite::new(bases, a)?.generator;
    let fb = KBagSite::new(bases, b)?.generator;
    let ga = fa.gradient(&p)?;
    let gb = fb.gradient(&q)?;
    let mut v = 0.0;
    for (l, g) in bases.iter().enumerate() {
        v += (a[l] - b[l]) * g.value(&x)?;
    }
    v += x[0] * (gb[0] - ga[0]) + x[1] * (gb[1] - ga[1]);
    let c = (p[0] * ga[0] + p[1] * ga[1] - fa.value(&p)?) - (q[0] * gb[0] + q[1] * gb[1] - fb.value(&q)?);
    Ok(v + c)
}

#[derive(Debug, Clone)]
pub enum RasterMode {
    /// `argmin_i D_F(x||p_i)`.
    First,
    /// `argmin_i D_F(p_i||x)`.
    Second,
    /// `argmin_i (D_F(x||p_i) + D_F(p_i||x)) / 2`.
    Symmetrized,
    /// `argmin_i D_F(x||p_i) + w_i`.
    Weighted(Vec<f64>),
    /// Index of the set of `k` nearest sites in lexicographic subset order.
    KOrder(usize),
    /// `argmin_i D_{F_i}(x||p_i)` with a generator per site.
    KBag(Vec<KBagSite>),
}

/// Pixel labels over a clip rectangle; row 0 is the top edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RasterLabels {
    pub width: usize,
    pub height: usize,
    pub clip: Rect,
    pub labels: Vec<u32>,
}

impl RasterLabels {
    pub fn get(&self, col: usize, row: usize) -> u32 {
        self.labels[row * self.width + col]
    }

    /// Pixels whose 8-neighborhood carries more than one label, or no label.
    pub fn boundary_mask(&self) -> Vec<bool> {
        let (w, h) = (self.width, self.height);
        let mut mask = vec![false; w * h];
        for row in 0..h {
            for col in 0..w {
                let l = self.get(col, row);
                let mut edge = l == NO_LABEL;
                for dr in -1i64..=1 {
                    for dc in -1i64..=1 {
                        let (r, c) = (row as i64 + dr, col as i64 + dc);
                        if r >= 0 && c >= 0 && (r as usize) < h && (c as usize) < w && self.get(c as usize, r as usize) != l {
                            edge = true;
                        }
                    }
                }
                mask[row * w + col] = edge;
            }
        }
        mask
    }

    /// Traces the pixel regions of each label into boundary rings.
    pub fn to_planar_diagram(&self, generator: &str, sites: &[Point2]) -> PlanarDiagram {
        let labels = sites.len();
        let mut edges: Vec<HashMap<(usize, usize), Vec<(usize, usize)>>> = vec![HashMap::new(); labels];
        let (w, h) = (self.width, self.height);
        let same = |c: i64, r: i64, l: u32| c >= 0 && r >= 0 && (c as usize) < w && (r as usize) < h && self.get(c as usize, r as usize) == l;
        for row in 0..h {
            for col in 0..w {
                let l = self.get(col, row);
                if l == NO_LABEL || l as usize >= labels {
                    continue;
                }
                let (c, r) = (col as i64, row as i64);
                let mut add = |a: (usize, usize), b: (usize, usize)| edges[l as usize].entry(a).or_default().push(b);
                // Corners (col, row) in grid coordinates; counter-clockwise in the y-up plane.
                if !same(c, r + 1, l) {
                    add((col, row + 1), (col + 1, row + 1));
                }
                if !same(c + 1, r, l) {
                    add((col + 1, row + 1), (col + 1, row));
                }
                if !same(c, r - 1, l) {
                    add((col + 1, row), (col, row));
                }
                if !same(c - 1, r, l) {
                    add((col, row), (col, row + 1));
                }
            }
        }
        let to_world = |(c, r): (usize, usize)| {
            [self.clip.x0 + c as f64 * self.clip.width() / w as f64, self.clip.y1 - r as f64 * self.clip.height() / h as f64]
        };
        let cells = edges
            .into_iter()
            .enumerate()
            .map(|(i, mut map)| {
                let mut rings: Vec<Vec<Point2>> = Vec::new();
                let mut starts: Vec<(usize, usize)> = map.keys().copied().collect();
                starts.sort();
                for s in starts {
                    while map.get(&s).is_some_and(|v| !v.is_empty()) {
                        let mut ring = vec![s];
                        let mut cur = s;
                        while let Some(next) = map.get_mut(&cur).and_then(|v| v.pop()) {
                            if next == s {
                                break;
                            }
                            ring.push(next);
                            cur = next;
                        }
                        rings.push(simplify_ring(ring.into_iter().map(to_world).collect()));
                    }
                }
                rings.sort_by(|a, b| ring_len(b).total_cmp(&ring_len(a)));
                let mut rings = rings.into_iter();
                let outer = rings.next().unwrap_or_default();
                let mut cell = Cell::new(vec![i], TaggedPolygon::from_points(&outer), false);
                cell.extra_rings = rings.collect();
                cell
            })
            .collect();
        PlanarDiagram {
            kind: DiagramKind::SymmetrizedRaster,
            generator: generator.to_string(),
            clip: self.clip,
            sites: sites.to_vec(),
            cells,
        }
    }
}

fn ring_len(r: &[Point2]) -> f64 {
    (0..r.len()).map(|i| {
        let (a, b) = (r[i], r[(i + 1) % r.len()]);
        (a[0] - b[0]).abs() + (a[1] - b[1]).abs()
    })
    .sum()
}

/// Removes vertices lying on the straight line through their neighbors.
fn simplify_ring(pts: Vec<Point2>) -> Vec<Point2> {
    let n = pts.len();
    if n < 4 {
        return pts;
    }
    (0..n)
        .filter(|&i| {
            let (a, b, c) = (pts[(i + n - 1) % n], pts[i], pts[(i + 1) % n]);
            ((b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0])).abs() > 1e-15
        })
        .map(|i| pts[i])
        .collect()
}

fn argmin(values: impl Iterator<Item = f64>) -> u32 {
    let mut best = (NO_LABEL, f64::INFINITY);
    for (i, v) in values.enumerate() {
        if v < best.1 {
            best = (i as u32, v);
        }
    }
    best.0
}

/// Labels each pixel center of a `grid x grid` raster of `clip`; pixels
/// outside the domain keep `NO_LABEL`.
pub fn raster_diagram(gen: &Generator, sites: &[Point2], mode: &RasterMode, clip: &Rect, grid: usize) -> Result<RasterLabels> {
    validate_sites(gen, sites)?;
    if grid == 0 {
        return Err(Error::invalid(MODULE, "grid must be >= 1"));
    }
    let n = sites.len();
    let fs: Vec<f64> = sites.iter().map(|s| gen.value(s)).collect::<Result<_>>()?;
    let gs: Vec<Vec<f64>> = sites.iter().map(|s| gen.gradient(s)).collect::<Result<_>>()?;
    let subset_index: HashMap<Vec<usize>, u32> = match mode {
        RasterMode::KOrder(k) => {
            if *k == 0 || *k >= n {
                return Err(Error::invalid(MODULE, format!("k must satisfy 1 <= k < n = {n}, got {k}")));
            }
            k_subsets(n, *k).into_iter().enumerate().map(|(i, s)| (s, i as u32)).collect()
        }
        _ => HashMap::new(),
    };
    match mode {
        RasterMode::Weighted(w) if w.len() != n => return Err(Error::DimensionMismatch { expected: n, got: w.len() }),
        RasterMode::KBag(b) if b.len() != n => return Err(Error::DimensionMismatch { expected: n, got: b.len() }),
        RasterMode::KBag(b) => {
            for (site, s) in b.iter().zip(sites) {
                if site.generator.dim() != 2 || !site.generator.contains(s) {
                    return Err(Error::Domain { generator: site.generator.name().into(), point: s.to_vec() });
                }
            }
        }
        _ => {}
    }
    // D_F(x||p_i) from cached site data and F(x).
    let forward = |x: Point2, fx: f64, i: usize| fx - fs[i] - (x[0] - sites[i][0]) * gs[i][0] - (x[1] - sites[i][1]) * gs[i][1];
    let mut labels = vec![NO_LABEL; grid * grid];
    labels.par_chunks_mut(grid).enumerate().try_for_each(|(row, out)| -> Result<()> {
        let mut scratch: Vec<(f64, usize)> = Vec::with_capacity(n);
        let mut gx = [0.0; 2];
        for (col, o) in out.iter_mut().enumerate() {
            let x = clip.pixel_center(grid, grid, col, row);
            let outside = match mode {
                RasterMode::KBag(b) => b.iter().any(|s| !s.generator.contains(&x)),
                _ => !gen.contains(&x),
            };
            if outside {
                continue;
            }
            let fx = gen.f_unchecked(&x);
            *o = match mode {
                RasterMode::First => argmin((0..n).map(|i| forward(x, fx, i))),
                RasterMode::Weighted(w) => argmin((0..n).map(|i| forward(x, fx, i) + w[i])),
                RasterMode::Second => {
                    gen.grad_unchecked(&x, &mut gx);
                    argmin((0..n).map(|i| fs[i] - fx - (sites[i][0] - x[0]) * gx[0] - (sites[i][1] - x[1]) * gx[1]))
                }
                RasterMode::Symmetrized => {
                    gen.grad_unchecked(&x, &mut gx);
                    argmin((0..n).map(|i| {
                        0.5 * ((sites[i][0] - x[0]) * (gs[i][0] - gx[0]) + (sites[i][1] - x[1]) * (gs[i][1] - gx[1]))
                    }))
                }
                RasterMode::KOrder(k) => {
                    scratch.clear();
                    scratch.extend((0..n).map(|i| (forward(x, fx, i), i)));
                    scratch.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                    let mut key: Vec<usize> = scratch[..*k].iter().map(|e| e.1).collect();
                    key.sort_unstable();
                    subset_index[&key]
                }
                RasterMode::KBag(b) => {
                    let mut best = (NO_LABEL, f64::INFINITY);
                    for (i, site) in b.iter().enumerate() {
                        let d = site.generator.divergence(&x, &sites[i])?;
                        if d < best.1 {
                            best = (i as u32, d);
                        }
                    }
                    best.0
                }
            };
        }
        Ok(())
    })?;
    Ok(RasterLabels { width: grid, height: grid, clip: *clip, labels })
}

/// Pixelwise comparison of an exact diagram with a raster oracle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    /// Pixels compared (outside the one-pixel boundary band).
    pub compared: usize,
    pub agreeing: usize,
    /// Pixels in the boundary band.
    pub excluded: usize,
}

impl Agreement {
    pub fn fraction(&self) -> f64 {
        if self.compared == 0 {
            1.0
        } else {
            self.agreeing as f64 / self.compared as f64
        }
    }
}

/// Fraction of non-boundary pixels whose raster label equals the index of the
/// unique exact cell covering the pixel center. Cells are matched to labels
/// by position, so the diagram's cells must be in label order.
pub fn agreement(diagram: &PlanarDiagram, oracle: &RasterLabels) -> Result<Agreement> {
    if diagram.clip != oracle.clip {
        return Err(Error::invalid(MODULE, "diagram and raster use different clips"));
    }
    let (w, h) = (oracle.width, oracle.height);
    const CONFLICT: u32 = u32::MAX - 1;
    let mut claims = vec![NO_LABEL; w * h];
    for (ci, cell) in diagram.cells.iter().enumerate() {
        for ring in std::iter::once(&cell.polygon).chain(&cell.extra_rings) {
            scan_polygon(ring, &oracle.clip, w, h, |p| {
                claims[p] = if claims[p] == NO_LABEL { ci as u32 } else { CONFLICT };
            });
        }
    }
    let band = oracle.boundary_mask();
    let mut a = Agreement { compared: 0, agreeing: 0, excluded: 0 };
    for p in 0..w * h {
        if band[p] {
            a.excluded += 1;
            continue;
        }
        a.compared += 1;
        if claims[p] == oracle.labels[p] {
            a.agreeing += 1;
        }
    }
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagram::{first_type_diagram_2d, k_order_diagram_2d, second_type_diagram_2d, weighted_first_type_diagram_2d};

    fn clip() -> Rect {
        Rect::new(0.05, 0.05, 0.95, 0.95).unwrap()
    }

    fn sites() -> Vec<Point2> {
        vec![[0.2, 0.3], [0.7, 0.2], [0.5, 0.8], [0.8, 0.7], [0.3, 0.6], [0.55, 0.45]]
    }

    #[test]
    fn exact_and_raster_agree() {
        let gen = Generator::burg(2);
        let s = sites();
        let d = first_type_diagram_2d(&gen, &s, &clip()).unwrap();
        let r = raster_diagram(&gen, &s, &RasterMode::First, &clip(), 128).unwrap();
        assert!(agreement(&d, &r).unwrap().fraction() > 0.999);
        let w = [0.0, 0.01, -0.02, 0.03, 0.0, 0.01];
        let d = weighted_first_type_diagram_2d(&gen, &s, &w, &clip()).unwrap();
        let r = raster_diagram(&gen, &s, &RasterMode::Weighted(w.to_vec()), &clip(), 128).unwrap();
        assert!(agreement(&d, &r).unwrap().fraction() > 0.999);
        let d = k_order_diagram_2d(&gen, &s, 2, &clip()).unwrap();
        let r = raster_diagram(&gen, &s, &RasterMode::KOrder(2), &clip(), 128).unwrap();
        assert!(agreement(&d, &r).unwrap().fraction() > 0.999);
        let d = second_type_diagram_2d(&gen, &s, &clip(), 32).unwrap();
        let r = raster_diagram(&gen, &s, &RasterMode::Second, &clip(), 128).unwrap();
        assert!(agreement(&d, &r).unwrap().fraction() > 0.995);
    }

    #[test]
    fn kbag_bisector_is_a_divergence_difference() {
        let bases = [Generator::shannon(2), Generator::squared_half_norm(2)];
        let (a, b) = ([1.0, 0.5], [0.2, 2.0]);
        let (p, q, x) = ([0.3, 0.4], [0.8, 0.6], [0.5, 0.9]);
        let fa = KBagSite::new(&bases, &a).unwrap().generator;
        let fb = KBagSite::new(&bases, &b).unwrap().generator;
        let expect = fa.divergence(&x, &p).unwrap() - fb.divergence(&x, &q).unwrap();
        let got = kbag_bisector(&bases, &a, p, &b, q, x).unwrap();
        assert!((got - expect).abs() < 1e-12);
    }

    #[test]
    fn traced_cells_cover_the_raster() {
        let gen = Generator::shannon(2);
        let s = sites();
        let r = raster_diagram(&gen, &s, &RasterMode::Symmetrized, &clip(), 64).unwrap();
        let d = r.to_planar_diagram("shannon", &s);
        let a = agreement(&d, &r).unwrap();
        assert_eq!(a.agreeing, a.compared);
    }

    #[test]
    fn pixels_outside_the_domain_are_masked() {
        let gen = Generator::shannon(2);
        let c = Rect::new(-0.5, 0.1, 0.5, 1.0).unwrap();
        let r = raster_diagram(&gen, &[[0.2, 0.5], [0.4, 0.6]], &RasterMode::First, &c, 4).unwrap();
        assert_eq!(r.get(0, 0), NO_LABEL);
        assert_ne!(r.get(3, 0), NO_LABEL);
    }

    #[test]
    fn mahalanobis_first_and_second_agree() {
        let q = nalgebra::DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let gen = Generator::mahalanobis(q).unwrap();
        let first = raster_diagram(&gen, &sites(), &RasterMode::First, &clip(), 64).unwrap();
        let second = raster_diagram(&gen, &sites(), &RasterMode::Second, &clip(), 64).unwrap();
        assert_eq!(first.labels, second.labels);
    }

    #[test]
    fn kbag_with_equal_weights_is_the_first_type_raster() {
        let bases = [Generator::shannon(2), Generator::burg(2)];
        let bag: Vec<KBagSite> = sites().iter().map(|_| KBagSite::new(&bases, &[1.0, 0.5]).unwrap()).collect();
        let mix = Generator::linear_combination(&[(1.0, bases[0].clone()), (0.5, bases[1].clone())]).unwrap();
        let a = raster_diagram(&mix, &sites(), &RasterMode::KBag(bag), &clip(), 64).unwrap();
        let b = raster_diagram(&mix, &sites(), &RasterMode::First, &clip(), 64).unwrap();
        let same = a.labels.iter().zip(&b.labels).filter(|(x, y)| x == y).count();
        assert!(same as f64 >= 0.999 * a.labels.len() as f64);
    }

    #[test]
    fn ties_go_to_the_lowest_index() {
        let gen = Generator::squared_half_norm(2);
        let s = [[0.25, 0.5], [0.75, 0.5]];
        let c = Rect::new(0.0, 0.0, 1.0, 1.0).unwrap();
        // With 2 columns, neither pixel center is on the bisector; with 3, the middle one is.
        let r = raster_diagram(&gen, &s, &RasterMode::First, &c, 3).unwrap();
        assert_eq!(r.get(1, 0), 0);
    }
}
