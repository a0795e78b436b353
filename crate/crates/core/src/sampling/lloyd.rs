use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{DomainPolygon, MODULE};
use crate::divergence::Generator;
use crate::error::{Error, Result};
use crate::planar::{Point2, Rect};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SiteInit {
    /// `k` sites drawn uniformly from the domain with a seeded generator.
    Seeded { k: usize, seed: u64 },
    Sites(Vec<Point2>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LloydOptions {
    /// Raster resolution over the domain's bounding box.
    pub grid: usize,
    pub max_iter: usize,
    /// Stop once the relative objective decrease falls below this.
    pub tol: f64,
}

impl Default for LloydOptions {
    fn default() -> Self {
        Self { grid: 512, max_iter: 100, tol: 1e-9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LloydRun {
    pub sites: Vec<Point2>,
    /// Objective before the first move and after every iteration.
    pub trace: Vec<f64>,
    /// `(iteration, site)` for each empty cell that was reseeded.
    pub reseeded: Vec<(usize, usize)>,
    pub converged: bool,
}

/// Domain pixels with their quadrature weights and cached `F(x)`.
struct Quadrature {
    points: Vec<Point2>,
    mass: Vec<f64>,
    fx: Vec<f64>,
}

impl Quadrature {
    fn new(gen: &Generator, domain: &DomainPolygon, grid: usize, density: Option<&(dyn Fn(Point2) -> f64 + Sync)>) -> Result<Self> {
        let bb = domain.bbox();
        let cell = bb.width() * bb.height() / (grid * grid) as f64;
        let rect = Rect::new(bb.x0, bb.y0, bb.x1, bb.y1)?;
        let pts: Vec<Point2> = (0..grid * grid)
            .map(|i| rect.pixel_center(grid, grid, i % grid, i / grid))
            .filter(|&p| domain.contains(p))
            .collect();
        let mut q = Quadrature { points: Vec::new(), mass: Vec::new(), fx: Vec::new() };
        for p in pts {
            let w = density.map_or(1.0, |f| f(p));
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::invalid(MODULE, "density must be finite and non-negative"));
            }
            q.fx.push(gen.value(&p)?);
            q.points.push(p);
            q.mass.push(w * cell);
        }
        if q.points.is_empty() {
            return Err(Error::invalid(MODULE, "domain contains no pixel center; raise the grid"));
        }
        Ok(q)
    }

    /// Nearest site and its divergence for every pixel.
    fn assign(&self, gen: &Generator, sites: &[Point2]) -> Result<(Vec<usize>, Vec<f64>)> {
        let aff: Vec<(Point2, f64)> = sites
            .iter()
            .map(|s| {
                let g = gen.gradient(s)?;
                Ok(([g[0], g[1]], s[0] * g[0] + s[1] * g[1] - gen.value(s)?))
            })
            .collect::<Result<_>>()?;
        Ok(self
            .points
            .par_iter()
            .zip(&self.fx)
            .map(|(x, fx)| {
                let mut best = (0, f64::INFINITY);
                for (i, (g, k)) in aff.iter().enumerate() {
                    let v = k - x[0] * g[0] - x[1] * g[1];
                    if v < best.1 {
                        best = (i, v);
                    }
                }
                (best.0, (fx + best.1).max(0.0))
            })
            .unzip())
    }

    fn objective(&self, cost: &[f64]) -> f64 {
        cost.iter().zip(&self.mass).map(|(c, m)| c * m).sum()
    }
}

fn initial_sites(domain: &DomainPolygon, init: &SiteInit) -> Result<Vec<Point2>> {
    match init {
        SiteInit::Sites(s) => {
            if s.is_empty() {
                return Err(Error::invalid(MODULE, "k must be >= 1"));
            }
            if let Some(p) = s.iter().find(|p| !domain.contains(**p)) {
                return Err(Error::invalid(MODULE, format!("initial site {p:?} is outside the domain")));
            }
            Ok(s.clone())
        }
        SiteInit::Seeded { k, seed } => {
            if *k == 0 {
                return Err(Error::invalid(MODULE, "k must be >= 1"));
            }
            let bb = domain.bbox();
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut out = Vec::with_capacity(*k);
            while out.len() < *k {
                let p = [rng.gen_range(bb.x0..=bb.x1), rng.gen_range(bb.y0..=bb.y1)];
                if domain.contains(p) {
                    out.push(p);
                }
            }
            Ok(out)
        }
    }
}

/// Lloyd relaxation of first-type cells restricted to `domain`, with the
/// objective `sum_i int_{V_i} p(x) D_F(x || p_i) dx` summed over pixel centers.
///
/// Cells are moved to their mass centroids, which minimize the per-cell
/// objective for every generator. An empty cell's site is moved to the
/// pixel farthest from all sites.
pub fn lloyd(
    gen: &Generator,
    domain: &DomainPolygon,
    init: &SiteInit,
    density: Option<&(dyn Fn(Point2) -> f64 + Sync)>,
    opts: &LloydOptions,
) -> Result<LloydRun> {
    domain.check_inside(gen)?;
    if opts.grid == 0 {
        return Err(Error::invalid(MODULE, "grid must be >= 1"));
    }
    let mut sites = initial_sites(domain, init)?;
    let quad = Quadrature::new(gen, domain, opts.grid, density)?;
    let (mut labels, mut cost) = quad.assign(gen, &sites)?;
    let mut f = quad.objective(&cost);
    let mut run = LloydRun { sites: Vec::new(), trace: vec![f], reseeded: Vec::new(), converged: false };
    for it in 0..opts.max_iter {
        let k = sites.len();
        let mut acc = vec![(0.0, 0.0, 0.0); k];
        for ((x, m), &l) in quad.points.iter().zip(&quad.mass).zip(&labels) {
            acc[l].0 += m;
            acc[l].1 += m * x[0];
            acc[l].2 += m * x[1];
        }
        let mut empty = Vec::new();
        for (i, &(m, sx, sy)) in acc.iter().enumerate() {
            if m > 0.0 {
                sites[i] = [sx / m, sy / m];
            } else {
                empty.push(i);
            }
        }
        if !empty.is_empty() {
            // Farthest pixels are measured against the moved sites.
            let (_, mut c) = quad.assign(gen, &sites)?;
            for i in empty {
                let far = (0..c.len()).max_by(|&a, &b| c[a].total_cmp(&c[b]).then(b.cmp(&a))).unwrap_or(0);
                sites[i] = quad.points[far];
                let g = gen.gradient(&sites[i])?;
                let fs = gen.value(&sites[i])?;
                for (j, x) in quad.points.iter().enumerate() {
                    let d = quad.fx[j] - fs - (x[0] - sites[i][0]) * g[0] - (x[1] - sites[i][1]) * g[1];
                    c[j] = c[j].min(d.max(0.0));
                }
                run.reseeded.push((it, i));
            }
        }
        (labels, cost) = quad.assign(gen, &sites)?;
        let next = quad.objective(&cost);
        run.trace.push(next);
        let decrease = f - next;
        f = next;
        if decrease <= opts.tol * f.abs() {
            run.converged = true;
            break;
        }
    }
    run.sites = sites;
    Ok(run)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum KMeansInit {
    /// `k` distinct data points chosen with a seeded generator.
    Seeded { k: usize, seed: u64 },
    Centroids(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansRun {
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Objective `sum_x D_F(x || c_a(x))` after every assignment step.
    pub trace: Vec<f64>,
    pub reseeded: Vec<(usize, usize)>,
    pub converged: bool,
}

fn assign_points(gen: &Generator, data: &[Vec<f64>], centroids: &[Vec<f64>]) -> Result<(Vec<usize>, Vec<f64>)> {
    let cached = centroids
        .iter()
        .map(|c| Ok((gen.value(c)?, gen.gradient(c)?)))
        .collect::<Result<Vec<_>>>()?;
    let fx: Vec<f64> = data.iter().map(|x| gen.value(x)).collect::<Result<_>>()?;
    Ok(data
        .par_iter()
        .zip(&fx)
        .map(|(x, fx)| {
            let mut best = (0, f64::INFINITY);
            for (i, (c, (fc, g))) in centroids.iter().zip(&cached).enumerate() {
                let d = fx - fc - x.iter().zip(c).zip(g).map(|((a, b), g)| (a - b) * g).sum::<f64>();
                if d < best.1 {
                    best = (i, d);
                }
            }
            (best.0, best.1.max(0.0))
        })
        .unzip())
}

/// Bregman k-means: points go to the centroid `c` minimizing `D_F(x || c)`
/// and centroids are arithmetic means. An empty cluster is reseeded at the
/// data point farthest from its centroid.
pub fn bregman_kmeans(gen: &Generator, data: &[Vec<f64>], init: &KMeansInit, max_iter: usize) -> Result<KMeansRun> {
    if data.is_empty() {
        return Err(Error::invalid(MODULE, "k-means needs data"));
    }
    for x in data {
        if x.len() != gen.dim() {
            return Err(Error::DimensionMismatch { expected: gen.dim(), got: x.len() });
        }
        gen.value(x)?;
    }
    let mut centroids = match init {
        KMeansInit::Centroids(c) => {
            if c.is_empty() {
                return Err(Error::invalid(MODULE, "k must be >= 1"));
            }
            for x in c {
                gen.value(x)?;
            }
            c.clone()
        }
        KMeansInit::Seeded { k, seed } => {
            if *k == 0 || *k > data.len() {
                return Err(Error::invalid(MODULE, format!("k must satisfy 1 <= k <= {}, got {k}", data.len())));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut idx = sample(&mut rng, data.len(), *k).into_vec();
            idx.sort_unstable();
            idx.into_iter().map(|i| data[i].clone()).collect()
        }
    };
    let (k, d) = (centroids.len(), gen.dim());
    let (mut labels, cost) = assign_points(gen, data, &centroids)?;
    let mut run = KMeansRun {
        assignments: Vec::new(),
        centroids: Vec::new(),
        trace: vec![cost.iter().sum()],
        reseeded: Vec::new(),
        converged: false,
    };
    for it in 0..max_iter {
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (x, &l) in data.iter().zip(&labels) {
            counts[l] += 1;
            sums[l].iter_mut().zip(x).for_each(|(s, v)| *s += v);
        }
        for i in 0..k {
            if counts[i] > 0 {
                centroids[i] = sums[i].iter().map(|s| s / counts[i] as f64).collect();
            }
        }
        for i in (0..k).filter(|&i| counts[i] == 0) {
            let (_, c) = assign_points(gen, data, &centroids)?;
            let far = (0..c.len()).max_by(|&a, &b| c[a].total_cmp(&c[b]).then(b.cmp(&a))).unwrap_or(0);
            centroids[i] = data[far].clone();
            run.reseeded.push((it, i));
        }
        let (next, next_cost) = assign_points(gen, data, &centroids)?;
        run.trace.push(next_cost.iter().sum());
        let stable = next == labels;
        labels = next;
        if stable {
            run.converged = true;
            break;
        }
    }
    run.assignments = labels;
    run.centroids = centroids;
    Ok(run)
}
