//! Shared grasps between placements and regrasp planning over the
//! manipulation graph.
//!
//! The gripper is two finger boxes and nothing else: no arm, no kinematics.
//! A grasp is feasible in a placement when both boxes stay above the
//! clearance plane z = `plane_clearance`.

use std::collections::{BTreeMap, VecDeque};
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::meshgeo::TriMesh;
use crate::placements::Placement;
use crate::rotgeo::Vec3;
use crate::vec3_array;

pub const APPROACHES_PER_PAIR: usize = 8;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum RegraspError {
    #[error("no regrasp plan from placement {start} to placement {goal}")]
    NoPlanExists { start: usize, goal: usize },
    #[error("placement {0} is not in the graph")]
    UnknownNode(usize),
    #[error("invalid gripper: {0}")]
    InvalidGripper(&'static str),
}

/// Parallel-jaw gripper dimensions in meters; friction angle in radians.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GripperSpec {
    pub max_width: f64,
    pub finger_length: f64,
    pub finger_thickness: f64,
    pub friction_angle: f64,
    pub plane_clearance: f64,
}

impl Default for GripperSpec {
    fn default() -> Self {
        GripperSpec {
            max_width: 0.08,
            finger_length: 0.04,
            finger_thickness: 0.01,
            friction_angle: 0.3,
            plane_clearance: 0.002,
        }
    }
}

impl GripperSpec {
    pub fn validate(&self) -> Result<(), RegraspError> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.max_width) {
            return Err(RegraspError::InvalidGripper("max_width must be positive"));
        }
        if !positive(self.finger_length) || !positive(self.finger_thickness) {
            return Err(RegraspError::InvalidGripper("finger dimensions must be positive"));
        }
        if !(self.friction_angle >= 0.0 && self.friction_angle < PI / 2.0) {
            return Err(RegraspError::InvalidGripper("friction_angle must lie in [0, pi/2)"));
        }
        if !(self.plane_clearance >= 0.0 && self.plane_clearance.is_finite()) {
            return Err(RegraspError::InvalidGripper("plane_clearance must be non-negative"));
        }
        Ok(())
    }
}

/// Body-frame grasp: two contacts, the approach direction of the gripper
/// and the jaw opening.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraspConfig {
    #[serde(with = "vec3_array")]
    pub contact_a: Vec3,
    #[serde(with = "vec3_array")]
    pub contact_b: Vec3,
    #[serde(with = "vec3_array")]
    pub approach: Vec3,
    pub width: f64,
}

impl GraspConfig {
    /// Unit grasp axis from `contact_a` to `contact_b`.
    pub fn axis(&self) -> Vec3 {
        (self.contact_b - self.contact_a) / self.width
    }
}

fn ray_triangle(origin: &Vec3, dir: &Vec3, [a, b, c]: [Vec3; 3]) -> Option<f64> {
    // Möller–Trumbore
    let e1 = b - a;
    let e2 = c - a;
    let p = dir.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-14 {
        return None;
    }
    let inv = 1.0 / det;
    let s = origin - a;
    let u = s.dot(&p) * inv;
    if !(-1e-12..=1.0 + 1e-12).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = dir.dot(&q) * inv;
    if v < -1e-12 || u + v > 1.0 + 1e-12 {
        return None;
    }
    Some(e2.dot(&q) * inv)
}

/// Unit approach directions evenly spaced in the plane perpendicular to `d`.
pub fn approach_directions(d: &Vec3) -> [Vec3; APPROACHES_PER_PAIR] {
    let mut k = 0;
    for i in 1..3 {
        if d[i].abs() < d[k].abs() {
            k = i;
        }
    }
    let e = Vec3::ith(k, 1.0);
    let u = (e - d * d.dot(&e)).normalize();
    let v = d.cross(&u);
    std::array::from_fn(|j| {
        let phi = 2.0 * PI * j as f64 / APPROACHES_PER_PAIR as f64;
        u * phi.cos() + v * phi.sin()
    })
}

/// Samples `n` surface points (area-weighted, seeded), casts a ray from each
/// into the body along its inward normal, and keeps the pair when the exit
/// surface's normal lies within the friction angle of the grasp axis and
/// the separation fits the gripper. Each pair yields eight approaches.
pub fn sample_antipodal_grasps(mesh: &TriMesh, n: usize, g: &GripperSpec, seed: u64) -> Vec<GraspConfig> {
    let faces = mesh.faces();
    let mut cumulative = Vec::with_capacity(faces.len());
    let mut total = 0.0;
    for f in 0..faces.len() {
        total += mesh.face_area(f);
        cumulative.push(total);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cos_limit = g.friction_angle.cos() - 1e-9;
    let mut grasps = Vec::new();
    for _ in 0..n {
        let pick = rng.gen::<f64>() * total;
        let f = cumulative.partition_point(|&c| c <= pick).min(faces.len() - 1);
        let (mut r1, mut r2): (f64, f64) = (rng.gen(), rng.gen());
        if r1 + r2 > 1.0 {
            r1 = 1.0 - r1;
            r2 = 1.0 - r2;
        }
        let [a, b, c] = mesh.face_corners(f);
        let p = a + (b - a) * r1 + (c - a) * r2;
        let d = -mesh.face_normal(f);

        let mut hit: Option<(f64, usize)> = None;
        for k in 0..faces.len() {
            if k == f {
                continue;
            }
            if let Some(t) = ray_triangle(&p, &d, mesh.face_corners(k)) {
                if t > 1e-9 && hit.map_or(true, |(bt, _)| t < bt) {
                    hit = Some((t, k));
                }
            }
        }
        let Some((t, k)) = hit else { continue };
        if t > g.max_width || mesh.face_normal(k).dot(&d) < cos_limit {
            continue;
        }
        let q = p + d * t;
        for approach in approach_directions(&d) {
            grasps.push(GraspConfig { contact_a: p, contact_b: q, approach, width: t });
        }
    }
    grasps
}

/// Corners of both finger boxes in the world frame. Each box spans the
/// finger length back along the approach, the thickness across the jaw and
/// the thickness outward from its contact.
pub fn finger_corners(grasp: &GraspConfig, placement: &Placement, g: &GripperSpec) -> Vec<Vec3> {
    let a = placement.apply(&grasp.contact_a);
    let b = placement.apply(&grasp.contact_b);
    let axis = &placement.rotation * &grasp.axis();
    let w = &placement.rotation * &grasp.approach;
    let s = w.cross(&axis);
    let half = g.finger_thickness / 2.0;
    let mut corners = Vec::with_capacity(16);
    for (contact, outward) in [(a, -axis), (b, axis)] {
        for alpha in [-g.finger_length, 0.0] {
            for beta in [-half, half] {
                for gamma in [0.0, g.finger_thickness] {
                    corners.push(contact + w * alpha + s * beta + outward * gamma);
                }
            }
        }
    }
    corners
}

pub fn grasp_feasible_in_placement(grasp: &GraspConfig, placement: &Placement, g: &GripperSpec) -> bool {
    grasp.width <= g.max_width
        && finger_corners(grasp, placement, g)
            .iter()
            .all(|c| c.z >= g.plane_clearance)
}

/// Indices of the grasps feasible in both placements.
pub fn shared_grasp_indices(pa: &Placement, pb: &Placement, grasps: &[GraspConfig], g: &GripperSpec) -> Vec<usize> {
    (0..grasps.len())
        .filter(|&i| grasp_feasible_in_placement(&grasps[i], pa, g) && grasp_feasible_in_placement(&grasps[i], pb, g))
        .collect()
}

pub fn shared_grasps(pa: &Placement, pb: &Placement, grasps: &[GraspConfig], g: &GripperSpec) -> Vec<GraspConfig> {
    shared_grasp_indices(pa, pb, grasps, g)
        .into_iter()
        .map(|i| grasps[i])
        .collect()
}

/// Placements as nodes; an undirected edge wherever a grasp is shared.
#[derive(Clone, Debug, PartialEq)]
pub struct ManipulationGraph {
    pub placements: Vec<Placement>,
    pub grasps: Vec<GraspConfig>,
    edges: BTreeMap<(usize, usize), Vec<usize>>,
}

impl ManipulationGraph {
    pub fn node_count(&self) -> usize {
        self.placements.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Shared grasp indices between two nodes, in increasing order.
    pub fn shared(&self, a: usize, b: usize) -> &[usize] {
        let key = (a.min(b), a.max(b));
        self.edges.get(&key).map_or(&[], |v| v.as_slice())
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        !self.shared(a, b).is_empty()
    }

    pub fn neighbors(&self, a: usize) -> Vec<usize> {
        (0..self.node_count()).filter(|&b| b != a && self.has_edge(a, b)).collect()
    }

    /// Edges as `(a, b, grasp indices)` with `a < b`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, &[usize])> {
        self.edges.iter().map(|(&(a, b), v)| (a, b, v.as_slice()))
    }
}

pub fn build_manipulation_graph(placements: &[Placement], grasps: &[GraspConfig], g: &GripperSpec) -> ManipulationGraph {
    let feasible: Vec<Vec<bool>> = placements
        .par_iter()
        .map(|p| grasps.iter().map(|gr| grasp_feasible_in_placement(gr, p, g)).collect())
        .collect();
    let mut edges = BTreeMap::new();
    for a in 0..placements.len() {
        for b in a + 1..placements.len() {
            let shared: Vec<usize> = (0..grasps.len()).filter(|&i| feasible[a][i] && feasible[b][i]).collect();
            if !shared.is_empty() {
                edges.insert((a, b), shared);
            }
        }
    }
    ManipulationGraph { placements: placements.to_vec(), grasps: grasps.to_vec(), edges }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanStep {
    pub from_type: usize,
    pub to_type: usize,
    pub grasp: GraspConfig,
    #[serde(skip)]
    pub grasp_index: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub steps: Vec<PlanStep>,
}

/// Breadth-first shortest plan. Neighbors are expanded in increasing index
/// order and each step uses the lowest-index shared grasp.
pub fn plan_regrasp(graph: &ManipulationGraph, start: usize, goal: usize) -> Result<Plan, RegraspError> {
    let n = graph.node_count();
    for node in [start, goal] {
        if node >= n {
            return Err(RegraspError::UnknownNode(node));
        }
    }
    let mut parent = vec![None; n];
    let mut seen = vec![false; n];
    seen[start] = true;
    let mut queue = VecDeque::from([start]);
    while let Some(a) = queue.pop_front() {
        if a == goal {
            break;
        }
        for b in graph.neighbors(a) {
            if !seen[b] {
                seen[b] = true;
                parent[b] = Some(a);
                queue.push_back(b);
            }
        }
    }
    if !seen[goal] {
        return Err(RegraspError::NoPlanExists { start, goal });
    }
    let mut path = vec![goal];
    while let Some(p) = parent[*path.last().unwrap()] {
        path.push(p);
    }
    path.reverse();
    let steps = path
        .windows(2)
        .map(|w| {
            let grasp_index = graph.shared(w[0], w[1])[0];
            PlanStep { from_type: w[0], to_type: w[1], grasp: graph.grasps[grasp_index], grasp_index }
        })
        .collect();
    Ok(Plan { steps })
}
