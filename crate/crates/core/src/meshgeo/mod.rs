//! Mesh ingestion and geometry: triangle meshes with mass properties,
//! convex hulls, facet merging, surface sampling and the auxiliary-plane
//! construction used to refine placements.

mod facets;
mod hull;
mod obj;
mod sample;
pub mod shapes;

use std::collections::HashMap;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::rotgeo::{shortest_arc_to_z, Rotation3, Vec3};

pub use facets::{merge_coplanar_facets, Facet, DEFAULT_MERGE_TOL};
pub use hull::{convex_hull, convex_hull_points};
pub use obj::{load_mesh, parse_obj};
pub use sample::sample_point_cloud;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum MeshError {
    #[error("cannot read mesh {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("OBJ parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("face {face} references vertex {index} but the mesh has {count} vertices")]
    InvalidFaceIndex { face: usize, index: usize, count: usize },
    #[error("mesh is degenerate: {0}")]
    DegenerateMesh(String),
    #[error("convex hull is degenerate: input points are coplanar or too few")]
    DegenerateHull,
    #[error("mesh is not watertight; its center of mass is only a surface estimate")]
    NotWatertight,
    #[error("contact points are collinear")]
    CollinearContacts,
    #[error("plane vector is zero; planes through the origin are not representable")]
    ZeroPlaneVector,
    #[error("point cloud is empty")]
    EmptyCloud,
}

impl MeshError {
    /// True for errors caused by unreadable or malformed input files.
    pub fn is_parse_error(&self) -> bool {
        matches!(self, MeshError::Io { .. } | MeshError::Parse { .. } | MeshError::InvalidFaceIndex { .. })
    }
}

/// Triangle mesh with uniform-density mass properties.
#[derive(Clone, Debug, PartialEq)]
pub struct TriMesh {
    vertices: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
    com: Vec3,
    volume: f64,
    watertight: bool,
}

impl TriMesh {
    /// Builds a mesh and integrates its mass properties.
    ///
    /// Closed meshes use signed-tetrahedron integration (faces are flipped
    /// if they wind inward). Open meshes get the area-weighted surface
    /// centroid and [`TriMesh::is_watertight`] returns false.
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        let count = vertices.len();
        for (fi, f) in faces.iter().enumerate() {
            if let Some(&index) = f.iter().find(|&&i| i >= count) {
                return Err(MeshError::InvalidFaceIndex { face: fi, index, count });
            }
        }
        if vertices.iter().any(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(MeshError::DegenerateMesh("non-finite vertex".into()));
        }
        let mut mesh = TriMesh { vertices, faces, com: Vec3::zeros(), volume: 0.0, watertight: false };
        let area = mesh.surface_area();
        if !(area > 1e-300) {
            return Err(MeshError::DegenerateMesh("zero surface area".into()));
        }
        mesh.watertight = is_closed(&mesh.faces);

        let mut volume = mesh.signed_volume();
        if mesh.watertight && volume < 0.0 {
            for f in mesh.faces.iter_mut() {
                f.swap(1, 2);
            }
            volume = -volume;
        }
        let scale = mesh.extent().max(f64::MIN_POSITIVE);
        if mesh.watertight && volume > 1e-12 * scale.powi(3) {
            mesh.volume = volume;
            mesh.com = first_moment(&mesh) / volume;
        } else {
            mesh.watertight = false;
            mesh.volume = volume.abs();
            mesh.com = mesh.surface_centroid(area);
        }
        Ok(mesh)
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn com(&self) -> Vec3 {
        self.com
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    /// Every undirected edge is shared by exactly two oppositely wound
    /// faces and the enclosed volume is positive.
    pub fn is_watertight(&self) -> bool {
        self.watertight
    }

    pub fn face_corners(&self, face: usize) -> [Vec3; 3] {
        let [a, b, c] = self.faces[face];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Unnormalized normal, twice the face area in length.
    pub fn face_cross(&self, face: usize) -> Vec3 {
        let [a, b, c] = self.face_corners(face);
        (b - a).cross(&(c - a))
    }

    pub fn face_area(&self, face: usize) -> f64 {
        0.5 * self.face_cross(face).norm()
    }

    pub fn face_normal(&self, face: usize) -> Vec3 {
        self.face_cross(face).normalize()
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    /// Largest bounding-box side.
    pub fn extent(&self) -> f64 {
        let (lo, hi) = bounds(&self.vertices);
        (hi - lo).max()
    }

    fn signed_volume(&self) -> f64 {
        let mut six_volume = 0.0;
        for f in 0..self.faces.len() {
            let [a, b, c] = self.face_corners(f);
            six_volume += a.dot(&b.cross(&c));
        }
        six_volume / 6.0
    }

    fn surface_centroid(&self, area: f64) -> Vec3 {
        let mut acc = Vec3::zeros();
        for f in 0..self.faces.len() {
            let [a, b, c] = self.face_corners(f);
            acc += (a + b + c) / 3.0 * self.face_area(f);
        }
        acc / area
    }

    /// Minimum distance from `p` to the mesh surface (brute force).
    pub fn distance_to_surface(&self, p: &Vec3) -> f64 {
        (0..self.faces.len())
            .map(|f| {
                let [a, b, c] = self.face_corners(f);
                (p - closest_point_on_triangle(p, &a, &b, &c)).norm()
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Applies `x -> r·x + t` to every vertex.
    pub fn transformed(&self, r: &Rotation3, t: &Vec3) -> TriMesh {
        TriMesh {
            vertices: self.vertices.iter().map(|v| r * v + t).collect(),
            faces: self.faces.clone(),
            com: r * &self.com + t,
            volume: self.volume,
            watertight: self.watertight,
        }
    }

    pub fn to_obj_string(&self) -> String {
        obj::write_obj(self)
    }
}

/// Volume-weighted centroid sum over the origin-apex tetrahedra.
fn first_moment(mesh: &TriMesh) -> Vec3 {
    let mut acc = Vec3::zeros();
    for f in 0..mesh.faces.len() {
        let [a, b, c] = mesh.face_corners(f);
        let six_v = a.dot(&b.cross(&c));
        acc += (a + b + c) * (six_v / 24.0);
    }
    acc
}

fn is_closed(faces: &[[usize; 3]]) -> bool {
    if faces.is_empty() {
        return false;
    }
    let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
    for f in faces {
        for k in 0..3 {
            *directed.entry((f[k], f[(k + 1) % 3])).or_default() += 1;
        }
    }
    directed
        .iter()
        .all(|(&(a, b), &n)| n == 1 && a != b && directed.get(&(b, a)) == Some(&1))
}

pub(crate) fn bounds(points: &[Vec3]) -> (Vec3, Vec3) {
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    (lo, hi)
}

pub(crate) fn closest_point_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Vec3 {
    // Ericson, Real-Time Collision Detection, 5.1.5
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    a + ab * (vb * denom) + ac * (vc * denom)
}

/// Ordered, non-empty set of points. Transforms keep the input order.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    points: Vec<Vec3>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Result<Self, MeshError> {
        if points.is_empty() {
            return Err(MeshError::EmptyCloud);
        }
        Ok(PointCloud { points })
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn into_points(self) -> Vec<Vec3> {
        self.points
    }
}

/// Plane `a x + b y + c z = a² + b² + c²` encoded by `v = (a, b, c)`: `v`
/// lies on the plane and is its closest point to the origin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlaneVector {
    v: Vec3,
}

impl PlaneVector {
    pub fn new(v: Vec3) -> Result<Self, MeshError> {
        if !(v.norm() > 1e-12) || !v.iter().all(|c| c.is_finite()) {
            return Err(MeshError::ZeroPlaneVector);
        }
        Ok(PlaneVector { v })
    }

    pub fn vector(&self) -> Vec3 {
        self.v
    }

    /// `v·p − |v|²`; zero for points on the plane.
    pub fn residual(&self, p: &Vec3) -> f64 {
        self.v.dot(p) - self.v.norm_squared()
    }
}

impl Serialize for PlaneVector {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        [self.v.x, self.v.y, self.v.z].serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for PlaneVector {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let [x, y, z] = <[f64; 3]>::deserialize(deserializer)?;
        PlaneVector::new(Vec3::new(x, y, z)).map_err(serde::de::Error::custom)
    }
}

/// Plane through three contact points, as its closest point to the origin.
pub fn plane_from_contacts(p1: &Vec3, p2: &Vec3, p3: &Vec3) -> Result<PlaneVector, MeshError> {
    // cyclic form of (p2 - p1) x (p3 - p1); odd permutations flip the sign only
    let n = p1.cross(p2) + p2.cross(p3) + p3.cross(p1);
    let scale = (p2 - p1).norm().max((p3 - p1).norm()).max(1.0);
    if 0.5 * n.norm() <= 1e-10 * scale {
        return Err(MeshError::CollinearContacts);
    }
    let n = n.normalize();
    let centroid = (p1 + p2 + p3) / 3.0;
    PlaneVector::new(n * n.dot(&centroid))
}

/// Shortest-path rotation taking the plane normal `v̂` onto +z. The
/// antiparallel case uses a half turn about x.
pub fn plane_align_rotation(v: &PlaneVector) -> Rotation3 {
    shortest_arc_to_z(&v.v).expect("plane vector is non-zero")
}

/// `P_o = R·(P_r − v)`: moves the auxiliary plane onto the support plane
/// z = 0 while keeping the cloud rigidly attached to it.
pub fn apply_refinement_transform(cloud: &PointCloud, v: &PlaneVector) -> PointCloud {
    let r = plane_align_rotation(v);
    PointCloud { points: cloud.points.iter().map(|p| &r * &(p - v.v)).collect() }
}
