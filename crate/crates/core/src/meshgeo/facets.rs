use std::collections::{HashMap, VecDeque};

use super::TriMesh;
use crate::planar::{convex_hull_2d, Vec2};
use crate::rotgeo::Vec3;

/// Default normal-angle tolerance for merging hull triangles, radians.
pub const DEFAULT_MERGE_TOL: f64 = 1e-4;

/// Planar polygonal face of a convex hull.
#[derive(Clone, Debug, PartialEq)]
pub struct Facet {
    /// Hull vertex indices of the boundary polygon, counter-clockwise seen
    /// from outside.
    pub polygon: Vec<usize>,
    /// Every hull vertex lying on the facet.
    pub vertices: Vec<usize>,
    pub normal: Vec3,
    pub area: f64,
    pub triangles: Vec<usize>,
}

/// Orthonormal basis `(u, v)` of the plane with normal `n`, `u × v = n`.
pub(crate) fn plane_basis(n: &Vec3) -> (Vec3, Vec3) {
    let helper = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let u = n.cross(&helper).normalize();
    let v = n.cross(&u);
    (u, v)
}

/// Groups hull triangles into planar facets by region growing across shared
/// edges: a triangle joins a facet when its normal is within `angle_tol` of
/// the facet's seed normal. Seeds are taken in triangle order.
pub fn merge_coplanar_facets(hull: &TriMesh, angle_tol: f64) -> Vec<Facet> {
    let faces = hull.faces();
    let normals: Vec<Vec3> = (0..faces.len()).map(|f| hull.face_normal(f)).collect();
    let mut edge_owner: HashMap<(usize, usize), usize> = HashMap::new();
    for (fi, f) in faces.iter().enumerate() {
        for k in 0..3 {
            edge_owner.insert((f[k], f[(k + 1) % 3]), fi);
        }
    }

    let cos_tol = angle_tol.cos();
    let mut assigned = vec![false; faces.len()];
    let mut facets = Vec::new();
    for seed in 0..faces.len() {
        if assigned[seed] {
            continue;
        }
        assigned[seed] = true;
        let seed_normal = normals[seed];
        let mut members = vec![seed];
        let mut queue = VecDeque::from([seed]);
        while let Some(t) = queue.pop_front() {
            let f = faces[t];
            for k in 0..3 {
                let Some(&nb) = edge_owner.get(&(f[(k + 1) % 3], f[k])) else { continue };
                if !assigned[nb] && normals[nb].dot(&seed_normal) > cos_tol {
                    assigned[nb] = true;
                    members.push(nb);
                    queue.push_back(nb);
                }
            }
        }
        members.sort_unstable();
        facets.push(build_facet(hull, &normals, members));
    }
    facets
}

fn build_facet(hull: &TriMesh, normals: &[Vec3], triangles: Vec<usize>) -> Facet {
    let mut weighted = Vec3::zeros();
    let mut area = 0.0;
    let mut vertices: Vec<usize> = Vec::new();
    for &t in &triangles {
        let a = hull.face_area(t);
        weighted += normals[t] * a;
        area += a;
        vertices.extend_from_slice(&hull.faces()[t]);
    }
    vertices.sort_unstable();
    vertices.dedup();
    let normal = weighted.normalize();

    let (u, v) = plane_basis(&normal);
    let pts: Vec<Vec2> = vertices
        .iter()
        .map(|&i| {
            let p = hull.vertices()[i];
            Vec2::new(p.dot(&u), p.dot(&v))
        })
        .collect();
    let polygon = convex_hull_2d(&pts, 1e-12 * hull.extent().max(1e-300))
        .into_iter()
        .map(|k| vertices[k])
        .collect();
    Facet { polygon, vertices, normal, area, triangles }
}
