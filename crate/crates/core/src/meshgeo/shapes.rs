//! Procedural closed meshes used as fixtures and demo inputs.

use std::f64::consts::PI;

use super::TriMesh;
use crate::rotgeo::Vec3;

fn build(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> TriMesh {
    TriMesh::new(vertices, faces).expect("procedural meshes are valid")
}

/// Axis-aligned box centered at the origin.
pub fn box_mesh(sx: f64, sy: f64, sz: f64) -> TriMesh {
    let (hx, hy) = (sx / 2.0, sy / 2.0);
    prism(&[[-hx, -hy], [hx, -hy], [hx, hy], [-hx, hy]], sz)
}

/// Regular tetrahedron with the given edge length, centroid at the origin.
pub fn regular_tetrahedron(edge: f64) -> TriMesh {
    let s = edge / (2.0 * 2f64.sqrt());
    let vertices = vec![
        Vec3::new(s, s, s),
        Vec3::new(s, -s, -s),
        Vec3::new(-s, s, -s),
        Vec3::new(-s, -s, s),
    ];
    build(vertices, vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]])
}

/// Extrudes a simple counter-clockwise polygon along z over `[-depth/2, depth/2]`.
/// Caps are ear-clipped, so the outline may be non-convex.
pub fn prism(outline: &[[f64; 2]], depth: f64) -> TriMesh {
    let n = outline.len();
    let h = depth / 2.0;
    let mut vertices: Vec<Vec3> = outline.iter().map(|p| Vec3::new(p[0], p[1], -h)).collect();
    vertices.extend(outline.iter().map(|p| Vec3::new(p[0], p[1], h)));

    let mut faces = Vec::new();
    for [a, b, c] in ear_clip(outline) {
        faces.push([n + a, n + b, n + c]);
        faces.push([c, b, a]);
    }
    for i in 0..n {
        let j = (i + 1) % n;
        faces.push([i, j, n + j]);
        faces.push([i, n + j, n + i]);
    }
    build(vertices, faces)
}

fn ear_clip(outline: &[[f64; 2]]) -> Vec<[usize; 3]> {
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut remaining: Vec<usize> = (0..outline.len()).collect();
    let mut tris = Vec::new();
    while remaining.len() > 3 {
        let m = remaining.len();
        let ear = (0..m).find(|&k| {
            let (i, j, l) = (remaining[(k + m - 1) % m], remaining[k], remaining[(k + 1) % m]);
            let (a, b, c) = (outline[i], outline[j], outline[l]);
            cross(a, b, c) > 0.0
                && remaining.iter().all(|&q| {
                    q == i
                        || q == j
                        || q == l
                        || !(cross(a, b, outline[q]) >= 0.0
                            && cross(b, c, outline[q]) >= 0.0
                            && cross(c, a, outline[q]) >= 0.0)
                })
        });
        let k = ear.expect("outline must be a simple counter-clockwise polygon");
        tris.push([remaining[(k + m - 1) % m], remaining[k], remaining[(k + 1) % m]]);
        remaining.remove(k);
    }
    tris.push([remaining[0], remaining[1], remaining[2]]);
    tris
}

/// Regular `n`-gon prism of circumradius `radius`.
pub fn ngon_prism(n: usize, radius: f64, height: f64) -> TriMesh {
    let outline: Vec<[f64; 2]> = (0..n)
        .map(|k| {
            let a = 2.0 * PI * k as f64 / n as f64;
            [radius * a.cos(), radius * a.sin()]
        })
        .collect();
    prism(&outline, height)
}

/// 2×2×1 block with a 1×1×1 corner removed: an L outline extruded by 1.
pub fn l_prism() -> TriMesh {
    prism(&[[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [1.0, 1.0], [1.0, 2.0], [0.0, 2.0]], 1.0)
}

/// T-nut-like profile: a 3×0.5 flange on a 1×2 stem, extruded by 1.
pub fn t_prism() -> TriMesh {
    prism(
        &[
            [-0.5, 0.0],
            [0.5, 0.0],
            [0.5, 2.0],
            [1.5, 2.0],
            [1.5, 2.5],
            [-1.5, 2.5],
            [-1.5, 2.0],
            [-0.5, 2.0],
        ],
        1.0,
    )
}

/// Prism over an obtuse triangle; the short side's support rectangle does
/// not contain the centroid's projection.
pub fn obtuse_prism() -> TriMesh {
    prism(&[[0.0, 0.0], [1.0, 0.0], [3.0, 1.0]], 1.0)
}

/// Latitude-longitude sphere approximation with `segments` around and
/// `rings` from pole to pole.
pub fn uv_sphere(radius: f64, segments: usize, rings: usize) -> TriMesh {
    let mut vertices = vec![Vec3::new(0.0, 0.0, radius)];
    for r in 1..rings {
        let phi = PI * r as f64 / rings as f64;
        for s in 0..segments {
            let theta = 2.0 * PI * s as f64 / segments as f64;
            vertices.push(Vec3::new(
                radius * phi.sin() * theta.cos(),
                radius * phi.sin() * theta.sin(),
                radius * phi.cos(),
            ));
        }
    }
    vertices.push(Vec3::new(0.0, 0.0, -radius));
    let south = vertices.len() - 1;
    let ring = |r: usize, s: usize| 1 + (r - 1) * segments + s % segments;

    let mut faces = Vec::new();
    for s in 0..segments {
        faces.push([0, ring(1, s), ring(1, s + 1)]);
        faces.push([south, ring(rings - 1, s + 1), ring(rings - 1, s)]);
    }
    for r in 1..rings - 1 {
        for s in 0..segments {
            faces.push([ring(r, s), ring(r + 1, s), ring(r + 1, s + 1)]);
            faces.push([ring(r, s), ring(r + 1, s + 1), ring(r, s + 1)]);
        }
    }
    build(vertices, faces)
}
