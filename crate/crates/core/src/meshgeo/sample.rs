use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{PointCloud, TriMesh};
use crate::rotgeo::Vec3;

/// Area-weighted uniform surface sampling.
///
/// Triangles are picked by systematic sampling of the cumulative area (one
/// random offset, `m` evenly spaced positions) so each point's triangle is
/// still chosen with probability proportional to area while per-triangle
/// counts stay within one of their expectation. Positions inside a triangle
/// are uniform.
pub fn sample_point_cloud(mesh: &TriMesh, m: usize, seed: u64) -> PointCloud {
    let m = m.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cumulative = Vec::with_capacity(mesh.faces().len());
    let mut total = 0.0;
    for f in 0..mesh.faces().len() {
        total += mesh.face_area(f);
        cumulative.push(total);
    }
    let offset: f64 = rng.gen();
    let points = (0..m)
        .map(|k| {
            let target = (k as f64 + offset) / m as f64 * total;
            let face = cumulative.partition_point(|&c| c <= target).min(cumulative.len() - 1);
            let [a, b, c] = mesh.face_corners(face);
            let r1 = rng.gen::<f64>().sqrt();
            let r2: f64 = rng.gen();
            a * (1.0 - r1) + b * (r1 * (1.0 - r2)) + c * (r1 * r2)
        })
        .collect::<Vec<Vec3>>();
    PointCloud::new(points).expect("m >= 1")
}
