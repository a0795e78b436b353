//! Lower convex hull of lifted planar points by incremental insertion.

use std::collections::HashMap;

use robust::{orient2d, orient3d, Coord, Coord3D};

fn c2(p: [f64; 3]) -> Coord<f64> {
    Coord { x: p[0], y: p[1] }
}

fn c3(p: [f64; 3]) -> Coord3D<f64> {
    Coord3D { x: p[0], y: p[1], z: p[2] }
}

/// Positive when `d` lies on the inner side of the face `(a, b, c)`, whose
/// vertices appear counter-clockwise from outside.
fn side(p: &[[f64; 3]], f: [usize; 3], d: usize) -> f64 {
    orient3d(c3(p[f[0]]), c3(p[f[1]]), c3(p[f[2]]), c3(p[d]))
}

#[derive(Debug)]
pub(crate) enum HullError {
    /// All points lie on one line of the plane.
    Collinear,
    /// Four lifted points are coplanar on the lower hull, or the start simplex is flat.
    Coplanar,
}

/// Triangles of the lower hull, counter-clockwise in the plane. Points that
/// are not hull vertices are absent from the output.
pub(crate) fn lower_hull(p: &[[f64; 3]]) -> Result<Vec<[usize; 3]>, HullError> {
    let n = p.len();
    if n < 3 {
        return Err(HullError::Collinear);
    }
    let i1 = (1..n).find(|&i| p[i][0] != p[0][0] || p[i][1] != p[0][1]).ok_or(HullError::Collinear)?;
    let i2 = (1..n).find(|&i| orient2d(c2(p[0]), c2(p[i1]), c2(p[i])) != 0.0).ok_or(HullError::Collinear)?;
    if n == 3 {
        // A lone triangle has no lifted tetrahedron to start from.
        let o = orient2d(c2(p[0]), c2(p[1]), c2(p[2]));
        return Ok(vec![if o > 0.0 { [0, 1, 2] } else { [0, 2, 1] }]);
    }
    let base = [0, i1, i2];
    let i3 = (1..n)
        .find(|&i| !base.contains(&i) && orient3d(c3(p[0]), c3(p[i1]), c3(p[i2]), c3(p[i])) != 0.0)
        .ok_or(HullError::Coplanar)?;

    let mut faces: Vec<[usize; 3]> = Vec::new();
    let mut alive: Vec<bool> = Vec::new();
    let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
    let push = |f: [usize; 3], faces: &mut Vec<[usize; 3]>, alive: &mut Vec<bool>, edges: &mut HashMap<(usize, usize), usize>| {
        let id = faces.len();
        faces.push(f);
        alive.push(true);
        for k in 0..3 {
            edges.insert((f[k], f[(k + 1) % 3]), id);
        }
    };
    let tet = [0, i1, i2, i3];
    for (skip, &opp) in tet.iter().enumerate().rev() {
        let mut f = [0; 3];
        let mut k = 0;
        for (j, &v) in tet.iter().enumerate() {
            if j != skip {
                f[k] = v;
                k += 1;
            }
        }
        if side(p, f, opp) < 0.0 {
            f.swap(1, 2);
        }
        push(f, &mut faces, &mut alive, &mut edges);
    }

    for q in 0..n {
        if tet.contains(&q) {
            continue;
        }
        let visible: Vec<usize> = (0..faces.len()).filter(|&f| alive[f] && side(p, faces[f], q) < 0.0).collect();
        if visible.is_empty() {
            continue;
        }
        let mut horizon = Vec::new();
        for &f in &visible {
            let v = faces[f];
            for k in 0..3 {
                let (a, b) = (v[k], v[(k + 1) % 3]);
                let twin = edges[&(b, a)];
                if side(p, faces[twin], q) >= 0.0 {
                    horizon.push((a, b));
                }
            }
        }
        for &f in &visible {
            alive[f] = false;
            let v = faces[f];
            for k in 0..3 {
                edges.remove(&(v[k], v[(k + 1) % 3]));
            }
        }
        for (a, b) in horizon {
            push([a, b, q], &mut faces, &mut alive, &mut edges);
        }
    }

    let mut out = Vec::new();
    for (f, v) in faces.iter().enumerate() {
        if !alive[f] || orient2d(c2(p[v[0]]), c2(p[v[1]]), c2(p[v[2]])) >= 0.0 {
            continue;
        }
        // A further point on the plane of a lower face makes the face ambiguous.
        if (0..n).any(|d| !v.contains(&d) && side(p, *v, d) == 0.0) {
            return Err(HullError::Coplanar);
        }
        out.push([v[0], v[2], v[1]]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paraboloid_lift_gives_delaunay_triangles() {
        let pts: Vec<[f64; 3]> =
            [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.1, 1.2], [0.4, 0.45]].iter().map(|&[x, y]| [x, y, x * x + y * y]).collect();
        let t = lower_hull(&pts).unwrap();
        assert_eq!(t.len(), 4);
        assert!(t.iter().all(|f| f.contains(&4)));
    }

    #[test]
    fn cocircular_and_collinear_inputs_are_flagged() {
        let sq: Vec<[f64; 3]> =
            [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]].iter().map(|&[x, y]| [x, y, x * x + y * y]).collect();
        assert!(matches!(lower_hull(&sq), Err(HullError::Coplanar)));
        let line: Vec<[f64; 3]> = (0..4).map(|i| [i as f64, 2.0 * i as f64, (i * i) as f64]).collect();
        assert!(matches!(lower_hull(&line), Err(HullError::Collinear)));
    }
}
