//! Placement types: MeanShift over orientations modulo rotation about the
//! world z axis, and assignment of new orientations to the learned types.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rotgeo::{geodesic_distance, rotation_from_sixd, sixd_from_rotation, z_quotient_align, z_quotient_distance, Rotation3, SixD, Vec3};

pub const DEFAULT_BANDWIDTH_DEG: f64 = 15.0;
pub const MAX_SHIFT_ITERATIONS: usize = 200;
pub const SHIFT_TOL: f64 = 1e-6;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum ClusterError {
    #[error("no orientations to cluster")]
    Empty,
    #[error("bandwidth must be positive and finite, got {0}")]
    InvalidBandwidth(f64),
}

/// Orientation types as canonical-yaw cluster modes. Distances in radians.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TypeModel {
    pub bandwidth: f64,
    pub assign_threshold: f64,
    pub modes: Vec<Rotation3>,
}

impl TypeModel {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Nearest mode by quotient distance, lowest index on ties.
    pub fn nearest(&self, r: &Rotation3) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (k, m) in self.modes.iter().enumerate() {
            let d = z_quotient_distance(r, m);
            if best.map_or(true, |(_, bd)| d < bd) {
                best = Some((k, d));
            }
        }
        best
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Clustering {
    pub model: TypeModel,
    pub labels: Vec<usize>,
}

pub fn assign_type(r: &Rotation3, model: &TypeModel) -> Option<usize> {
    model
        .nearest(r)
        .and_then(|(k, d)| (d <= model.assign_threshold).then_some(k))
}

/// Flat-kernel MeanShift with the z-quotient distance as kernel distance.
///
/// Every input seeds a shift. A window mean aligns each member's yaw to the
/// current mode, averages the 6D representations and re-orthonormalizes; the
/// result is reduced to its canonical yaw. Converged modes are merged
/// greedily, largest window first, and every input is labeled with its
/// nearest surviving mode. Modes are numbered by first labeled occurrence.
pub fn mean_shift_orientations(rotations: &[Rotation3], bandwidth: f64) -> Result<Clustering, ClusterError> {
    if rotations.is_empty() {
        return Err(ClusterError::Empty);
    }
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(ClusterError::InvalidBandwidth(bandwidth));
    }

    let shifted: Vec<(Rotation3, usize)> = rotations
        .par_iter()
        .map(|r| shift_to_mode(rotations, r.canonical_yaw(), bandwidth))
        .collect();

    let mut order: Vec<usize> = (0..shifted.len()).collect();
    order.sort_by(|&a, &b| shifted[b].1.cmp(&shifted[a].1).then(a.cmp(&b)));
    let mut candidates: Vec<Rotation3> = Vec::new();
    for i in order {
        let m = shifted[i].0;
        if candidates.iter().all(|c| z_quotient_distance(c, &m) > bandwidth) {
            candidates.push(m);
        }
    }

    let provisional = TypeModel { bandwidth, assign_threshold: bandwidth, modes: candidates };
    let nearest: Vec<usize> = rotations
        .par_iter()
        .map(|r| provisional.nearest(r).map(|(k, _)| k).unwrap_or(0))
        .collect();

    let mut renumber: Vec<Option<usize>> = vec![None; provisional.modes.len()];
    let mut modes = Vec::new();
    let labels = nearest
        .iter()
        .map(|&k| {
            *renumber[k].get_or_insert_with(|| {
                modes.push(provisional.modes[k]);
                modes.len() - 1
            })
        })
        .collect();

    Ok(Clustering { model: TypeModel { bandwidth, assign_threshold: bandwidth, modes }, labels })
}

fn shift_to_mode(rotations: &[Rotation3], start: Rotation3, bandwidth: f64) -> (Rotation3, usize) {
    let mut mode = start;
    let mut window = 0;
    for _ in 0..MAX_SHIFT_ITERATIONS {
        let mut a = Vec3::zeros();
        let mut b = Vec3::zeros();
        window = 0;
        for r in rotations {
            let (d, theta) = z_quotient_align(r, &mode);
            if d <= bandwidth {
                let s = sixd_from_rotation(&(Rotation3::rot_z(theta) * *r));
                a += s.a;
                b += s.b;
                window += 1;
            }
        }
        if window == 0 {
            break;
        }
        let Ok(mean) = rotation_from_sixd(&SixD { a, b }) else { break };
        let next = mean.canonical_yaw();
        let shift = geodesic_distance(&next, &mode);
        mode = next;
        if shift < SHIFT_TOL {
            break;
        }
    }
    (mode, window)
}
