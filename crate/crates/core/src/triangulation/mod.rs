//! Bregman Delaunay and geodesic triangulations of planar sites.
//!
//! Both are lower hulls of lifted sites: the Delaunay kind lifts `p` to
//! `(p, F(p))`, the geodesic kind lifts the power ball `(p', r^2)` of each
//! site to `(p', <p', p'> - r^2)` in gradient coordinates. Geodesic triangles
//! are counter-clockwise in gradient coordinates; since `grad F` preserves
//! orientation, so are the curved triangles they map to.

mod hull;

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::diagram::validate_sites;
use crate::divergence::Generator;
use crate::error::{Error, Result};
use crate::geometry::{geodesic_point, in_sphere, power_ball, smallest_enclosing_ball, GeodesicKind};
use crate::planar::Point2;
use crate::tol;
use hull::{lower_hull, HullError};

const MODULE: &str = "triangulation";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriangulationKind {
    Delaunay,
    Geodesic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Triangulation {
    pub kind: TriangulationKind,
    pub generator: String,
    pub vertices: Vec<Point2>,
    /// Counter-clockwise index triples, sorted.
    pub triangles: Vec<[usize; 3]>,
    /// `adjacency[t][k]` is the triangle across the edge from vertex `k` to `k + 1`.
    pub adjacency: Vec<[Option<usize>; 3]>,
    /// Set when cospherical sites forced a deterministic tie-break.
    pub perturbed: bool,
}

fn canonical(mut t: [usize; 3]) -> [usize; 3] {
    // Rotate so the smallest index leads; orientation is kept.
    let m = (0..3).min_by_key(|&k| t[k]).unwrap_or(0);
    t.rotate_left(m);
    t
}

impl Triangulation {
    /// Builds a triangulation from counter-clockwise triples, computing adjacency.
    pub fn from_triangles(kind: TriangulationKind, generator: &str, vertices: &[Point2], triangles: &[[usize; 3]]) -> Result<Self> {
        let mut tris: Vec<[usize; 3]> = triangles.iter().map(|&t| canonical(t)).collect();
        tris.sort_unstable();
        let mut owner: HashMap<(usize, usize), usize> = HashMap::new();
        for (ti, t) in tris.iter().enumerate() {
            if t.iter().any(|&v| v >= vertices.len()) || t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                return Err(Error::invalid(MODULE, format!("invalid triangle {t:?}")));
            }
            for k in 0..3 {
                if owner.insert((t[k], t[(k + 1) % 3]), ti).is_some() {
                    return Err(Error::invalid(MODULE, format!("edge {}-{} is used twice in one direction", t[k], t[(k + 1) % 3])));
                }
            }
        }
        let adjacency = tris
            .iter()
            .map(|t| [0, 1, 2].map(|k| owner.get(&(t[(k + 1) % 3], t[k])).copied()))
            .collect();
        Ok(Triangulation { kind, generator: generator.to_string(), vertices: vertices.to_vec(), triangles: tris, adjacency, perturbed: false })
    }

    /// Undirected edges `(i, j)` with `i < j`.
    pub fn edges(&self) -> BTreeSet<(usize, usize)> {
        self.triangles
            .iter()
            .flat_map(|t| (0..3).map(move |k| (t[k].min(t[(k + 1) % 3]), t[k].max(t[(k + 1) % 3]))))
            .collect()
    }

    /// `V - E + T` over vertices used by some triangle; 1 for a triangulated disk.
    pub fn euler_characteristic(&self) -> i64 {
        let used: HashSet<usize> = self.triangles.iter().flatten().copied().collect();
        used.len() as i64 - self.edges().len() as i64 + self.triangles.len() as i64
    }

    /// The two triangles sharing edge `{a, b}` and the vertices opposite it.
    fn edge_pair(&self, a: usize, b: usize) -> Option<((usize, usize), (usize, usize))> {
        let mut found = Vec::new();
        for (ti, t) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                let (u, v) = (t[k], t[(k + 1) % 3]);
                if (u, v) == (a, b) || (u, v) == (b, a) {
                    found.push((ti, t[(k + 2) % 3]));
                }
            }
        }
        (found.len() == 2).then(|| (found[0], found[1]))
    }

    /// Replaces edge `{a, b}` by the other diagonal of its quadrilateral.
    ///
    /// The orientation used is that of the triangles themselves: source
    /// coordinates for the Delaunay kind, gradient coordinates for the geodesic kind.
    pub fn flip(&self, gen: &Generator, a: usize, b: usize) -> Result<Triangulation> {
        let ((t1, c), (t2, d)) =
            self.edge_pair(a, b).ok_or_else(|| Error::invalid(MODULE, format!("edge {a}-{b} is not interior")))?;
        let pts = self.orientation_points(gen)?;
        let ccw = |u: usize, v: usize, w: usize| {
            let o = robust::orient2d(
                robust::Coord { x: pts[u][0], y: pts[u][1] },
                robust::Coord { x: pts[v][0], y: pts[v][1] },
                robust::Coord { x: pts[w][0], y: pts[w][1] },
            );
            o > 0.0
        };
        let (n1, n2) = ([c, a, d], [c, d, b]);
        let fix = |t: [usize; 3]| if ccw(t[0], t[1], t[2]) { Some(t) } else if ccw(t[0], t[2], t[1]) { Some([t[0], t[2], t[1]]) } else { None };
        let (n1, n2) = match (fix(n1), fix(n2)) {
            (Some(x), Some(y)) => (x, y),
            _ => return Err(Error::degenerate(MODULE, format!("edge {a}-{b} sits in a non-convex quadrilateral"))),
        };
        // The quadrilateral is convex iff the new pair tiles the same area.
        let area = |t: [usize; 3]| {
            let (p, q, r) = (pts[t[0]], pts[t[1]], pts[t[2]]);
            ((q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])).abs()
        };
        let (old, new) = (area(self.triangles[t1]) + area(self.triangles[t2]), area(n1) + area(n2));
        if (old - new).abs() > 1e-12 * old {
            return Err(Error::degenerate(MODULE, format!("edge {a}-{b} sits in a non-convex quadrilateral")));
        }
        let mut tris: Vec<[usize; 3]> =
            self.triangles.iter().enumerate().filter(|(i, _)| *i != t1 && *i != t2).map(|(_, t)| *t).collect();
        tris.push(n1);
        tris.push(n2);
        Triangulation::from_triangles(self.kind, &self.generator, &self.vertices, &tris)
    }

    /// Coordinates in which the triangles are counter-clockwise.
    fn orientation_points(&self, gen: &Generator) -> Result<Vec<Point2>> {
        match self.kind {
            TriangulationKind::Delaunay => Ok(self.vertices.clone()),
            TriangulationKind::Geodesic => {
                self.vertices.iter().map(|v| gen.gradient(v).map(|g| [g[0], g[1]])).collect()
            }
        }
    }

    /// Each edge drawn as a sampled curve: straight for the Delaunay kind,
    /// a gamma geodesic for the geodesic kind.
    pub fn edge_curves(&self, gen: &Generator, samples: usize) -> Result<Vec<((usize, usize), Vec<Point2>)>> {
        let samples = samples.max(2);
        self.edges()
            .into_iter()
            .map(|(i, j)| {
                let (p, q) = (self.vertices[i], self.vertices[j]);
                let curve = (0..samples)
                    .map(|s| {
                        let t = s as f64 / (samples - 1) as f64;
                        match self.kind {
                            TriangulationKind::Delaunay => Ok([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]),
                            TriangulationKind::Geodesic => {
                                geodesic_point(gen, &p, &q, t, GeodesicKind::Gamma).map(|x| [x[0], x[1]])
                            }
                        }
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(((i, j), curve))
            })
            .collect()
    }
}

fn triangulate(
    kind: TriangulationKind,
    gen: &Generator,
    sites: &[Point2],
    lifted: Vec<[f64; 3]>,
) -> Result<Triangulation> {
    if sites.len() < 3 {
        return Err(Error::degenerate(MODULE, "at least three sites are required"));
    }
    let (tris, perturbed) = match lower_hull(&lifted) {
        Ok(t) => (t, false),
        Err(HullError::Collinear) => return Err(Error::degenerate(MODULE, "all sites are collinear")),
        Err(HullError::Coplanar) => {
            // Deterministic tie-break: raise later sites slightly more.
            let n = lifted.len() as f64;
            let zmax = lifted.iter().map(|p| p[2].abs()).fold(0.0, f64::max);
            let delta = tol::GENERAL_POSITION * (1.0 + zmax);
            let bumped: Vec<[f64; 3]> = lifted
                .iter()
                .enumerate()
                .map(|(i, p)| [p[0], p[1], p[2] + delta * ((i + 1) as f64 / n).powi(2)])
                .collect();
            match lower_hull(&bumped) {
                Ok(t) => (t, true),
                Err(_) => return Err(Error::degenerate(MODULE, "sites are not in general position")),
            }
        }
    };
    let mut t = Triangulation::from_triangles(kind, gen.name(), sites, &tris)?;
    t.perturbed = perturbed;
    Ok(t)
}

/// Projection of the lower hull of `(p, F(p))`.
pub fn bregman_delaunay_2d(gen: &Generator, sites: &[Point2]) -> Result<Triangulation> {
    validate_sites(gen, sites)?;
    let lifted = sites.iter().map(|s| Ok([s[0], s[1], gen.value(s)?])).collect::<Result<Vec<_>>>()?;
    triangulate(TriangulationKind::Delaunay, gen, sites, lifted)
}

/// Regular triangulation of the sites' power balls in gradient coordinates,
/// dual to the first-type diagram.
pub fn geodesic_triangulation_2d(gen: &Generator, sites: &[Point2]) -> Result<Triangulation> {
    validate_sites(gen, sites)?;
    let lifted = sites
        .iter()
        .map(|s| {
            let (c, r2) = power_ball(gen, s)?;
            Ok([c[0], c[1], c[0] * c[0] + c[1] * c[1] - r2])
        })
        .collect::<Result<Vec<_>>>()?;
    let t = triangulate(TriangulationKind::Geodesic, gen, sites, lifted)?;
    let used: HashSet<usize> = t.triangles.iter().flatten().copied().collect();
    if used.len() != sites.len() {
        return Err(Error::degenerate(MODULE, "a power ball is hidden by its neighbors"));
    }
    Ok(t)
}

/// The generator and coordinates in which the triangulation's spheres are tested.
fn sphere_frame(gen: &Generator, tri: &Triangulation) -> Result<(Generator, Vec<Vec<f64>>)> {
    match tri.kind {
        TriangulationKind::Delaunay => Ok((gen.clone(), tri.vertices.iter().map(|v| v.to_vec()).collect())),
        TriangulationKind::Geodesic => {
            let dual = gen.dual()?;
            let pts = tri.vertices.iter().map(|v| gen.gradient(v)).collect::<Result<Vec<_>>>()?;
            Ok((dual, pts))
        }
    }
}

/// Number of (triangle, non-incident site) pairs with the site strictly
/// inside the triangle's circumscribing Bregman sphere.
pub fn empty_sphere_violations(gen: &Generator, tri: &Triangulation) -> Result<usize> {
    let (g, pts) = sphere_frame(gen, tri)?;
    let mut bad = 0;
    for t in &tri.triangles {
        let simplex: Vec<Vec<f64>> = t.iter().map(|&i| pts[i].clone()).collect();
        for (s, p) in pts.iter().enumerate() {
            if !t.contains(&s) && in_sphere(&g, &simplex, p)? < 0 {
                bad += 1;
            }
        }
    }
    Ok(bad)
}

/// True when no site lies strictly inside any triangle's circumscribing sphere.
pub fn empty_sphere_check(gen: &Generator, tri: &Triangulation) -> Result<bool> {
    Ok(empty_sphere_violations(gen, tri)? == 0)
}

/// Whether each apex of the two triangles on `edge` lies outside the open
/// circumscribing sphere of the other triangle. Boundary edges are regular.
pub fn is_regular_pair(gen: &Generator, tri: &Triangulation, edge: (usize, usize)) -> Result<bool> {
    let Some(((t1, c), (t2, d))) = tri.edge_pair(edge.0, edge.1) else {
        return Ok(true);
    };
    let (g, pts) = sphere_frame(gen, tri)?;
    let simplex = |t: usize| -> Vec<Vec<f64>> { tri.triangles[t].iter().map(|&i| pts[i].clone()).collect() };
    Ok(in_sphere(&g, &simplex(t2), &pts[c])? >= 0 && in_sphere(&g, &simplex(t1), &pts[d])? >= 0)
}

/// Every triangulation of the same vertex set reachable by edge flips, up to
/// `limit` of them. In the plane the flip graph is connected, so this is the
/// full set whenever the limit is not reached.
pub fn enumerate_triangulations(gen: &Generator, tri: &Triangulation, limit: usize) -> Result<Vec<Triangulation>> {
    let mut seen: HashSet<Vec<[usize; 3]>> = HashSet::new();
    let mut out = Vec::new();
    let mut queue = VecDeque::from([tri.clone()]);
    seen.insert(tri.triangles.clone());
    while let Some(t) = queue.pop_front() {
        for (a, b) in t.edges() {
            if t.edge_pair(a, b).is_none() {
                continue;
            }
            let Ok(f) = t.flip(gen, a, b) else { continue };
            if seen.len() < limit && seen.insert(f.triangles.clone()) {
                queue.push_back(f);
            }
        }
        out.push(t);
    }
    Ok(out)
}

/// `max_t r(t)` over triangles, where `r(t)` is the radius of the smallest
/// first-type Bregman ball enclosing the triangle's vertices.
pub fn max_enclosing_radius(gen: &Generator, tri: &Triangulation) -> Result<f64> {
    let mut worst = 0.0_f64;
    for t in &tri.triangles {
        let pts: Vec<Vec<f64>> = t.iter().map(|&i| tri.vertices[i].to_vec()).collect();
        worst = worst.max(smallest_enclosing_ball(gen, &pts)?.ball.radius);
    }
    Ok(worst)
}
