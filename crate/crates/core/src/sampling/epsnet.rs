use serde::{Deserialize, Serialize};

use super::{DomainPolygon, MODULE};
use crate::diagram::{validate_sites, AffineSite};
use crate::divergence::Generator;
use crate::error::{Error, Result};
use crate::planar::{Point2, TaggedPolygon};
use crate::tol;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InsertionStep {
    pub point: Point2,
    /// Sample error just before this point was inserted.
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRun {
    pub points: Vec<Point2>,
    pub epsilon: f64,
    pub trace: Vec<InsertionStep>,
    /// Sample error of the final point set; at most `epsilon`.
    pub error: f64,
}

/// First-type cells of a growing point set, restricted to a convex domain.
struct RestrictedDiagram<'a> {
    gen: &'a Generator,
    domain: TaggedPolygon,
    scale: f64,
    sites: Vec<AffineSite>,
    cells: Vec<TaggedPolygon>,
}

impl<'a> RestrictedDiagram<'a> {
    fn new(gen: &'a Generator, domain: &DomainPolygon) -> Self {
        let scale = domain.vertices().iter().map(|p| p[0].abs().max(p[1].abs())).fold(0.0, f64::max);
        Self { gen, domain: TaggedPolygon::from_points(domain.vertices()), scale, sites: Vec::new(), cells: Vec::new() }
    }

    fn insert(&mut self, p: Point2) -> Result<()> {
        let s = AffineSite::new(self.gen, p, 0.0)?;
        let n = self.sites.len();
        let mut cell = self.domain.clone();
        for (j, other) in self.sites.iter().enumerate() {
            if !cell.is_empty() {
                cell = cell.clip(&s.versus(other, j), self.scale);
            }
            if !self.cells[j].is_empty() {
                self.cells[j] = self.cells[j].clip(&other.versus(&s, n), self.scale);
            }
        }
        self.sites.push(s);
        self.cells.push(cell);
        Ok(())
    }

    /// The cell vertex farthest from its own site, with that divergence.
    ///
    /// Inside a cell `min_i D_F(x||p_i) = F(x) - <x, p_i'> + k_i` is convex,
    /// so its maximum over the cell is attained at a vertex.
    fn farthest_vertex(&self) -> Result<(Point2, f64)> {
        let mut best = ([f64::NAN; 2], f64::NEG_INFINITY);
        for (s, cell) in self.sites.iter().zip(&self.cells) {
            for &v in &cell.pts {
                let d = (self.gen.value(&v)? - v[0] * s.grad[0] - v[1] * s.grad[1] + s.k).max(0.0);
                if d > best.1 {
                    best = (v, d);
                }
            }
        }
        Ok(best)
    }
}

fn check_points(gen: &Generator, points: &[Point2], domain: &DomainPolygon) -> Result<()> {
    domain.check_inside(gen)?;
    validate_sites(gen, points)?;
    if let Some(p) = points.iter().find(|p| !domain.contains(**p)) {
        return Err(Error::invalid(MODULE, format!("point {p:?} is outside the domain")));
    }
    Ok(())
}

/// `max_{x in domain} min_i D_F(x || p_i)` and a point attaining it.
pub fn sample_error_witness(gen: &Generator, points: &[Point2], domain: &DomainPolygon) -> Result<(Point2, f64)> {
    check_points(gen, points, domain)?;
    let mut diagram = RestrictedDiagram::new(gen, domain);
    for &p in points {
        diagram.insert(p)?;
    }
    diagram.farthest_vertex()
}

/// `max_{x in domain} min_i D_F(x || p_i)`, evaluated exactly at the
/// vertices of the restricted first-type diagram.
pub fn sample_error(gen: &Generator, points: &[Point2], domain: &DomainPolygon) -> Result<f64> {
    Ok(sample_error_witness(gen, points, domain)?.1)
}

/// Farthest-point insertion until the sample error is at most `epsilon`.
///
/// Every inserted point is more than `epsilon` from all earlier points in
/// the `D_F(x || p)` sense, so the output is `epsilon`-sparse whenever the
/// seeds are. Seeds default to the domain's centroid.
pub fn eps_net(gen: &Generator, domain: &DomainPolygon, epsilon: f64, seeds: Option<&[Point2]>) -> Result<SampleRun> {
    eps_net_with_limit(gen, domain, epsilon, seeds, tol::EPS_NET_MAX_POINTS)
}

/// `eps_net` failing with `NonTermination` once more than `max_points` points would be needed.
pub fn eps_net_with_limit(
    gen: &Generator,
    domain: &DomainPolygon,
    epsilon: f64,
    seeds: Option<&[Point2]>,
    max_points: usize,
) -> Result<SampleRun> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid(MODULE, "epsilon must be positive and finite"));
    }
    let seeds: Vec<Point2> = match seeds {
        Some(s) if !s.is_empty() => s.to_vec(),
        _ => vec![domain.centroid()],
    };
    check_points(gen, &seeds, domain)?;
    for i in 0..seeds.len() {
        for j in i + 1..seeds.len() {
            let d = gen.divergence(&seeds[i], &seeds[j])?.max(gen.divergence(&seeds[j], &seeds[i])?);
            if d <= epsilon {
                return Err(Error::invalid(MODULE, format!("seeds {i} and {j} are within epsilon of each other")));
            }
        }
    }
    let mut diagram = RestrictedDiagram::new(gen, domain);
    for &p in &seeds {
        diagram.insert(p)?;
    }
    let mut run = SampleRun { points: seeds, epsilon, trace: Vec::new(), error: 0.0 };
    loop {
        let (v, err) = diagram.farthest_vertex()?;
        if err <= epsilon {
            run.error = err;
            return Ok(run);
        }
        if run.points.len() >= max_points {
            return Err(Error::NonTermination { limit: max_points });
        }
        diagram.insert(v)?;
        run.points.push(v);
        run.trace.push(InsertionStep { point: v, error: err });
    }
}
