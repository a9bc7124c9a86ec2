//! Stable placements on the plane z = 0: facet enumeration, the geometric
//! stability test, quasi-static tumbling from arbitrary orientations, and
//! the dataset records built from settled drops.
//!
//! Poses map body coordinates to world coordinates as `x ↦ R·x + t`. A
//! resting pose is normalized so the lowest hull vertex sits on z = 0 and
//! the center of mass projects onto the world origin.

use std::f64::consts::FRAC_PI_2;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::meshgeo::{
    convex_hull_points, merge_coplanar_facets, plane_from_contacts, Facet, MeshError, PlaneVector, TriMesh,
    DEFAULT_MERGE_TOL,
};
use crate::planar::{ConvexRegion, Vec2};
use crate::rotgeo::{shortest_arc_to_z, Rotation3, Vec3};
use crate::vec3_array;

pub const DEFAULT_CONTACT_TOL: f64 = 1e-6;
pub const DEFAULT_MARGIN_EPS: f64 = 1e-4;
/// Default filter on [`Placement::score`] when selecting placements.
pub const DEFAULT_SCORE_THRESHOLD: f64 = 0.92;
pub const DEFAULT_MAX_TIPS: usize = 200;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum PlacementError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("settling did not converge within {0} tips")]
    SettleDiverged(usize),
    #[error("settled pose has fewer than three non-collinear contacts")]
    NoContactTriangle,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityOptions {
    pub margin_eps: f64,
    pub contact_tol: f64,
    pub merge_tol: f64,
    /// Accept open meshes, using their surface centroid as center of mass.
    pub allow_surface_com: bool,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        StabilityOptions {
            margin_eps: DEFAULT_MARGIN_EPS,
            contact_tol: DEFAULT_CONTACT_TOL,
            merge_tol: DEFAULT_MERGE_TOL,
            allow_surface_com: false,
        }
    }
}

impl StabilityOptions {
    pub fn with_margin_eps(margin_eps: f64) -> Self {
        StabilityOptions { margin_eps, ..Default::default() }
    }
}

/// A resting pose with its stability margin (meters) and score in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub rotation: Rotation3,
    #[serde(with = "vec3_array")]
    pub translation: Vec3,
    pub type_id: Option<usize>,
    pub stability_margin: f64,
    pub score: f64,
}

impl Placement {
    /// Resting height `h`, the z component of the translation.
    pub fn height(&self) -> f64 {
        self.translation.z
    }

    pub fn apply(&self, body: &Vec3) -> Vec3 {
        &self.rotation * body + self.translation
    }

    /// Same pose shifted vertically by `dz`.
    pub fn lifted(&self, dz: f64) -> Placement {
        Placement { translation: self.translation + Vec3::new(0.0, 0.0, dz), ..*self }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StabilityCheck {
    pub stable: bool,
    /// Signed distance of the center-of-mass projection to the support
    /// polygon boundary; `-inf` without contacts.
    pub margin: f64,
    pub penetrating: bool,
    /// Hull vertices touching the plane, world frame.
    pub contacts: Vec<Vec3>,
    pub support: ConvexRegion,
    pub com: Vec3,
}

impl StabilityCheck {
    /// Margin normalized by the support polygon's inradius, clamped to `[0, 1]`.
    pub fn score(&self) -> f64 {
        let r = self.support.inradius();
        if !self.stable || !(r > 0.0) {
            return 0.0;
        }
        (self.margin / r).clamp(0.0, 1.0)
    }
}

/// Outcome of [`StableBody::settle`].
#[derive(Clone, Debug, PartialEq)]
pub struct SettleOutcome {
    pub placement: Placement,
    pub tips: usize,
    /// Center-of-mass height before the first tip and after every tip.
    pub com_heights: Vec<f64>,
}

/// Rigid body reduced to what resting on a plane depends on: its convex
/// hull, merged hull facets and center of mass.
#[derive(Clone, Debug)]
pub struct StableBody {
    hull: TriMesh,
    facets: Vec<Facet>,
    com: Vec3,
    options: StabilityOptions,
}

impl StableBody {
    pub fn new(mesh: &TriMesh, options: StabilityOptions) -> Result<Self, PlacementError> {
        if !mesh.is_watertight() && !options.allow_surface_com {
            return Err(MeshError::NotWatertight.into());
        }
        let hull = convex_hull_points(mesh.vertices())?;
        let facets = merge_coplanar_facets(&hull, options.merge_tol);
        Ok(StableBody { hull, facets, com: mesh.com(), options })
    }

    pub fn hull(&self) -> &TriMesh {
        &self.hull
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    pub fn com(&self) -> Vec3 {
        self.com
    }

    pub fn options(&self) -> &StabilityOptions {
        &self.options
    }

    /// Translation that drops the body onto z = 0 with the center of mass
    /// over the origin.
    pub fn resting_translation(&self, rotation: &Rotation3) -> Vec3 {
        let c = rotation * &self.com;
        let min_z = self
            .hull
            .vertices()
            .iter()
            .map(|v| (rotation * v).z)
            .fold(f64::INFINITY, f64::min);
        // written as 0.0 - x so zero components never print as -0.0
        Vec3::new(0.0 - c.x, 0.0 - c.y, 0.0 - min_z)
    }

    /// Lowers the body onto the plane under `rotation` and scores the pose.
    pub fn rest(&self, rotation: &Rotation3) -> Placement {
        let mut p = Placement {
            rotation: *rotation,
            translation: self.resting_translation(rotation),
            type_id: None,
            stability_margin: 0.0,
            score: 0.0,
        };
        let check = self.check(&p);
        p.stability_margin = check.margin;
        p.score = check.score();
        p
    }

    pub fn check(&self, pose: &Placement) -> StabilityCheck {
        let tol = self.options.contact_tol;
        let world: Vec<Vec3> = self.hull.vertices().iter().map(|v| pose.apply(v)).collect();
        let min_z = world.iter().map(|w| w.z).fold(f64::INFINITY, f64::min);
        let contacts: Vec<Vec3> = world.iter().filter(|w| w.z.abs() <= tol).copied().collect();
        let flat: Vec<Vec2> = contacts.iter().map(|c| Vec2::new(c.x, c.y)).collect();
        let support = ConvexRegion::from_points(&flat, tol);
        let com = pose.apply(&self.com);
        let margin = support.signed_distance(&Vec2::new(com.x, com.y));
        let penetrating = min_z < -tol;
        StabilityCheck {
            stable: !penetrating && !contacts.is_empty() && margin >= self.options.margin_eps,
            margin,
            penetrating,
            contacts,
            support,
            com,
        }
    }

    /// One candidate per merged hull facet, resting on that facet with the
    /// canonical yaw; kept when the stability test passes.
    pub fn enumerate(&self) -> Vec<Placement> {
        self.facets
            .iter()
            .filter_map(|f| {
                let rotation = shortest_arc_to_z(&-f.normal)?;
                let p = self.rest(&rotation);
                self.check(&p).stable.then_some(p)
            })
            .collect()
    }

    /// Quasi-static tumble. While the center of mass projects outside the
    /// support region, the body pivots about the horizontal line through the
    /// nearest support point (perpendicular to the offset) until another
    /// hull vertex touches the plane.
    pub fn settle(&self, initial: &Rotation3, max_tips: usize) -> Result<SettleOutcome, PlacementError> {
        let tol = self.options.contact_tol;
        let mut rotation = *initial;
        let mut com_heights = Vec::new();
        for tips in 0..=max_tips {
            let pose = self.rest(&rotation);
            let check = self.check(&pose);
            com_heights.push(check.com.z);
            if check.stable {
                return Ok(SettleOutcome { placement: pose, tips, com_heights });
            }
            if tips == max_tips {
                break;
            }
            let g = Vec2::new(check.com.x, check.com.y);
            let (pivot, dir) = tipping_direction(&check.support, &g);
            let axis = Vec3::z().cross(&Vec3::new(dir.x, dir.y, 0.0));
            let pivot = Vec3::new(pivot.x, pivot.y, 0.0);

            let mut angle = f64::INFINITY;
            for v in self.hull.vertices() {
                let q = pose.apply(v) - pivot;
                if q.z <= tol {
                    continue;
                }
                let b = axis.cross(&q).z;
                angle = angle.min(b.atan2(q.z) + FRAC_PI_2);
            }
            if !angle.is_finite() {
                return Err(PlacementError::SettleDiverged(tips));
            }
            rotation = (Rotation3::axis_angle_unchecked(&axis, angle) * rotation).renormalized();
        }
        Err(PlacementError::SettleDiverged(max_tips))
    }
}

/// Pivot point on the support region and the unit horizontal direction in
/// which the center of mass falls.
fn tipping_direction(support: &ConvexRegion, g: &Vec2) -> (Vec2, Vec2) {
    let Some((q, edge)) = support.closest_boundary_point(g) else {
        return (*g, Vec2::x());
    };
    let offset = g - q;
    let len = offset.norm();
    if support.contains(g) {
        // inside but short of the required margin: roll over the nearest edge
        return if len > 0.0 { (q, -offset / len) } else { (q, edge_outward(support, edge)) };
    }
    if len > 1e-12 {
        return (q, offset / len);
    }
    match support.vertices.len() {
        1 => (q, Vec2::x()),
        _ => (q, edge_outward(support, edge)),
    }
}

fn edge_outward(support: &ConvexRegion, edge: usize) -> Vec2 {
    let (a, b) = support.edges()[edge];
    let e = (b - a).normalize();
    Vec2::new(e.y, -e.x)
}

pub fn enumerate_stable(mesh: &TriMesh, margin_eps: f64) -> Result<Vec<Placement>, PlacementError> {
    Ok(StableBody::new(mesh, StabilityOptions::with_margin_eps(margin_eps))?.enumerate())
}

pub fn stability_check(mesh: &TriMesh, pose: &Placement, margin_eps: f64) -> Result<StabilityCheck, PlacementError> {
    Ok(StableBody::new(mesh, StabilityOptions::with_margin_eps(margin_eps))?.check(pose))
}

pub fn settle(mesh: &TriMesh, initial: &Rotation3, max_tips: usize) -> Result<Placement, PlacementError> {
    Ok(StableBody::new(mesh, StabilityOptions::default())?.settle(initial, max_tips)?.placement)
}

/// One settled drop: the stable pose, three contact points on the plane and
/// a paired off-plane pose with its ground-truth auxiliary-plane vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlacementRecord {
    pub object_id: String,
    pub rotation: Rotation3,
    #[serde(with = "vec3_array")]
    pub translation: Vec3,
    pub type_id: Option<usize>,
    pub score: f64,
    pub stability_margin: f64,
    #[serde(with = "contact_array")]
    pub contact_points: [Vec3; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unstable_rotation: Option<Rotation3>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_gt: Option<PlaneVector>,
}

impl PlacementRecord {
    pub fn placement(&self) -> Placement {
        Placement {
            rotation: self.rotation,
            translation: self.translation,
            type_id: self.type_id,
            stability_margin: self.stability_margin,
            score: self.score,
        }
    }

    /// Rotation applied to the whole resting scene to produce the off-plane
    /// pose: `unstable_rotation · rotationᵀ`.
    pub fn scene_rotation(&self) -> Option<Rotation3> {
        self.unstable_rotation.map(|u| u * self.rotation.inverse())
    }

    /// Body-to-world transform of the off-plane pose.
    ///
    /// The resting scene is shifted up by `|v_gt|` (the center-of-mass
    /// height), which puts the origin under the support plane, then rotated
    /// about the origin.
    pub fn unstable_transform(&self) -> Option<(Rotation3, Vec3)> {
        let q = self.scene_rotation()?;
        let lift = self.v_gt?.vector().norm();
        Some((self.unstable_rotation?, &q * &(self.translation + Vec3::new(0.0, 0.0, lift))))
    }

    /// Contact points carried along with the off-plane pose.
    pub fn unstable_contacts(&self) -> Option<[Vec3; 3]> {
        let q = self.scene_rotation()?;
        let lift = Vec3::new(0.0, 0.0, self.v_gt?.vector().norm());
        Some(self.contact_points.map(|c| &q * &(c + lift)))
    }
}

mod contact_array {
    use super::Vec3;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[Vec3; 3], s: S) -> Result<S::Ok, S::Error> {
        v.map(|p| [p.x, p.y, p.z]).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[Vec3; 3], D::Error> {
        let raw = <[[f64; 3]; 3]>::deserialize(d)?;
        Ok(raw.map(|p| Vec3::new(p[0], p[1], p[2])))
    }
}

/// Three support-polygon vertices spanning the largest triangle found by a
/// farthest-point pair plus best apex; `None` for point or segment support.
pub fn contact_triangle(check: &StabilityCheck) -> Option<[Vec3; 3]> {
    let on_plane: Vec<Vec3> = check
        .support
        .vertices
        .iter()
        .filter_map(|v| {
            check
                .contacts
                .iter()
                .find(|c| (c.x - v.x).abs() <= 1e-12 && (c.y - v.y).abs() <= 1e-12)
                .copied()
        })
        .collect();
    if on_plane.len() < 3 {
        return None;
    }
    let a = on_plane[0];
    let b = *on_plane.iter().max_by(|p, q| (*p - a).norm().total_cmp(&(*q - a).norm()))?;
    let c = *on_plane
        .iter()
        .max_by(|p, q| ((b - a).cross(&(*p - a))).norm().total_cmp(&((b - a).cross(&(*q - a))).norm()))?;
    Some([a, b, c])
}

/// Objects to drop: an identifier and its mesh.
pub type DatasetObject = (String, TriMesh);

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetReport {
    pub object_id: String,
    pub settled: usize,
    pub diverged: usize,
}

/// Independent RNG stream for one drop, keyed by `(seed, object_id, drop_index)`.
pub fn drop_rng(seed: u64, object_id: &str, drop_index: usize) -> ChaCha8Rng {
    // FNV-1a over the object id, then SplitMix64 finalization of the mix
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in object_id.bytes() {
        h = (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3);
    }
    let mut z = seed
        .wrapping_add(h.rotate_left(17))
        .wrapping_add((drop_index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    ChaCha8Rng::seed_from_u64(z ^ (z >> 31))
}

/// Settles `drops` uniformly random orientations per object and records
/// each result. Drops that fail to settle are skipped and counted.
pub fn generate_dataset(
    objects: &[DatasetObject],
    drops: usize,
    seed: u64,
    options: StabilityOptions,
) -> Result<(Vec<PlacementRecord>, Vec<DatasetReport>), PlacementError> {
    let mut records = Vec::new();
    let mut reports = Vec::new();
    for (object_id, mesh) in objects {
        let body = StableBody::new(mesh, options)?;
        let results: Vec<Option<PlacementRecord>> = (0..drops)
            .into_par_iter()
            .map(|i| {
                let mut rng = drop_rng(seed, object_id, i);
                let initial = Rotation3::random(&mut rng);
                let scene = Rotation3::random(&mut rng);
                let outcome = body.settle(&initial, DEFAULT_MAX_TIPS).ok()?;
                make_record(&body, object_id, &outcome.placement, &scene).ok()
            })
            .collect();
        let mut report = DatasetReport { object_id: object_id.clone(), ..Default::default() };
        for r in results {
            match r {
                Some(rec) => {
                    report.settled += 1;
                    records.push(rec);
                }
                None => report.diverged += 1,
            }
        }
        reports.push(report);
    }
    Ok((records, reports))
}

/// Builds the record for a stable placement; `scene` rotates the resting
/// scene into the paired off-plane pose.
pub fn make_record(
    body: &StableBody,
    object_id: &str,
    placement: &Placement,
    scene: &Rotation3,
) -> Result<PlacementRecord, PlacementError> {
    let check = body.check(placement);
    let contacts = contact_triangle(&check).ok_or(PlacementError::NoContactTriangle)?;
    let lift = Vec3::new(0.0, 0.0, check.com.z);
    let lifted = contacts.map(|c| scene * &(c + lift));
    let v_gt = plane_from_contacts(&lifted[0], &lifted[1], &lifted[2])?;
    Ok(PlacementRecord {
        object_id: object_id.to_string(),
        rotation: placement.rotation,
        translation: placement.translation,
        type_id: placement.type_id,
        score: placement.score,
        stability_margin: placement.stability_margin,
        contact_points: contacts,
        unstable_rotation: Some(*scene * placement.rotation),
        v_gt: Some(v_gt),
    })
}
