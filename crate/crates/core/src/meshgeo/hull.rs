//! Quickhull in 3D. Deterministic for a fixed input order: the next face to
//! expand is the lowest-index face with outside points, its eye is the
//! farthest outside point (lowest point index on ties), and orphaned points
//! are reassigned in increasing index order.

use std::collections::HashMap;

use super::{bounds, MeshError, PointCloud, TriMesh};
use crate::rotgeo::Vec3;

struct Face {
    v: [usize; 3],
    normal: Vec3,
    offset: f64,
    outside: Vec<usize>,
    alive: bool,
}

impl Face {
    fn new(points: &[Vec3], v: [usize; 3]) -> Face {
        let [a, b, c] = v.map(|i| points[i]);
        let n = (b - a).cross(&(c - a));
        let len = n.norm();
        let normal = if len > 0.0 { n / len } else { Vec3::zeros() };
        Face { v, normal, offset: normal.dot(&a), outside: Vec::new(), alive: true }
    }

    fn distance(&self, p: &Vec3) -> f64 {
        self.normal.dot(p) - self.offset
    }
}

pub fn convex_hull(cloud: &PointCloud) -> Result<TriMesh, MeshError> {
    convex_hull_points(cloud.points())
}

/// Convex hull of `points` as a closed, outward-wound triangle mesh whose
/// vertices are the extreme input points in increasing input-index order.
pub fn convex_hull_points(points: &[Vec3]) -> Result<TriMesh, MeshError> {
    if points.len() < 4 || points.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
        return Err(MeshError::DegenerateHull);
    }
    let (lo, hi) = bounds(points);
    let scale = (hi - lo).norm().max(lo.abs().max()).max(hi.abs().max());
    let eps = 1e-12 * scale.max(f64::MIN_POSITIVE) * 10.0;

    let simplex = initial_simplex(points, eps)?;
    let mut faces = Vec::new();
    let centroid = simplex.iter().map(|&i| points[i]).sum::<Vec3>() / 4.0;
    for tri in [[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]] {
        let mut v = tri.map(|k| simplex[k]);
        let f = Face::new(points, v);
        if f.distance(&centroid) > 0.0 {
            v.swap(1, 2);
        }
        faces.push(Face::new(points, v));
    }
    for i in 0..points.len() {
        if simplex.contains(&i) {
            continue;
        }
        if let Some(f) = faces.iter_mut().find(|f| f.distance(&points[i]) > eps) {
            f.outside.push(i);
        }
    }

    while let Some(fi) = faces.iter().position(|f| f.alive && !f.outside.is_empty()) {
        let eye = {
            let f = &faces[fi];
            let mut best = (f.outside[0], f.distance(&points[f.outside[0]]));
            for &i in &f.outside[1..] {
                let d = f.distance(&points[i]);
                if d > best.1 || (d == best.1 && i < best.0) {
                    best = (i, d);
                }
            }
            best.0
        };
        let eye_p = points[eye];

        let visible: Vec<usize> = (0..faces.len())
            .filter(|&k| faces[k].alive && faces[k].distance(&eye_p) > eps)
            .collect();

        let mut edge_owner: HashMap<(usize, usize), usize> = HashMap::new();
        for (k, f) in faces.iter().enumerate().filter(|(_, f)| f.alive) {
            for e in 0..3 {
                edge_owner.insert((f.v[e], f.v[(e + 1) % 3]), k);
            }
        }
        let is_visible = |k: usize| visible.binary_search(&k).is_ok();
        let mut horizon = Vec::new();
        for &k in &visible {
            let v = faces[k].v;
            for e in 0..3 {
                let (a, b) = (v[e], v[(e + 1) % 3]);
                match edge_owner.get(&(b, a)) {
                    Some(&twin) if !is_visible(twin) => horizon.push((a, b)),
                    Some(_) => {}
                    None => return Err(MeshError::DegenerateHull),
                }
            }
        }

        let mut orphans: Vec<usize> = Vec::new();
        for &k in &visible {
            faces[k].alive = false;
            orphans.append(&mut faces[k].outside);
        }
        orphans.sort_unstable();
        orphans.dedup();

        let first_new = faces.len();
        for (a, b) in horizon {
            faces.push(Face::new(points, [a, b, eye]));
        }
        for i in orphans {
            if i == eye {
                continue;
            }
            if let Some(f) = faces[first_new..].iter_mut().find(|f| f.distance(&points[i]) > eps) {
                f.outside.push(i);
            }
        }
    }

    let alive: Vec<[usize; 3]> = faces.iter().filter(|f| f.alive).map(|f| f.v).collect();
    let mut used: Vec<usize> = alive.iter().flatten().copied().collect();
    used.sort_unstable();
    used.dedup();
    let remap: HashMap<usize, usize> = used.iter().enumerate().map(|(new, &old)| (old, new)).collect();
    let vertices = used.iter().map(|&i| points[i]).collect();
    let tris = alive.iter().map(|f| f.map(|i| remap[&i])).collect();
    TriMesh::new(vertices, tris).map_err(|_| MeshError::DegenerateHull)
}

fn initial_simplex(points: &[Vec3], eps: f64) -> Result<[usize; 4], MeshError> {
    let argmax = |score: &dyn Fn(&Vec3) -> f64| -> (usize, f64) {
        let mut best = (0, f64::NEG_INFINITY);
        for (i, p) in points.iter().enumerate() {
            let s = score(p);
            if s > best.1 {
                best = (i, s);
            }
        }
        best
    };
    let (i0, _) = argmax(&|p: &Vec3| -p.x);
    let p0 = points[i0];
    let (i1, d1) = argmax(&|p: &Vec3| (p - p0).norm());
    if d1 <= eps {
        return Err(MeshError::DegenerateHull);
    }
    let dir = (points[i1] - p0) / d1;
    let (i2, d2) = argmax(&|p: &Vec3| (p - p0).cross(&dir).norm());
    if d2 <= eps {
        return Err(MeshError::DegenerateHull);
    }
    let n = (points[i1] - p0).cross(&(points[i2] - p0)).normalize();
    let (i3, d3) = argmax(&|p: &Vec3| (p - p0).dot(&n).abs());
    if d3 <= eps {
        return Err(MeshError::DegenerateHull);
    }
    Ok([i0, i1, i2, i3])
}
