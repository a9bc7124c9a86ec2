//! Differentiable loss kernels: the geodesic Chamfer loss over orientation
//! sets and the auxiliary-plane refinement loss over per-point displacement
//! fields. Every kernel returns its value together with analytic gradients.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::meshgeo::PlaneVector;
use crate::rotgeo::{poly_geodesic_distance_raw, Mat3, PolyCoeffs, Rotation3, Vec3};

#[derive(Error, Debug, Clone, PartialEq)]
pub enum LossError {
    #[error("orientation set is empty")]
    EmptySet,
    #[error("displacement field is empty")]
    EmptyField,
    #[error("points and displacements differ in length ({points} vs {displacements})")]
    FieldShape { points: usize, displacements: usize },
    #[error("loss weights must be non-negative with a positive sum and a positive transition")]
    InvalidWeights,
    #[error("predicted plane vector is zero; planes through the origin are not representable")]
    ZeroPlaneVector,
}

/// Ordered, non-empty set of orientations.
#[derive(Clone, Debug, PartialEq)]
pub struct OrientationSet {
    rotations: Vec<Rotation3>,
}

impl OrientationSet {
    pub fn new(rotations: Vec<Rotation3>) -> Result<Self, LossError> {
        if rotations.is_empty() {
            return Err(LossError::EmptySet);
        }
        Ok(OrientationSet { rotations })
    }

    pub fn rotations(&self) -> &[Rotation3] {
        &self.rotations
    }

    pub fn len(&self) -> usize {
        self.rotations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rotations.is_empty()
    }

    fn matrices(&self) -> Vec<Mat3> {
        self.rotations.iter().map(|r| *r.matrix()).collect()
    }
}

/// Chamfer loss with the polynomial geodesic surrogate as ground distance.
/// Returns the loss and one gradient matrix per element of `generated`.
pub fn chamfer_geodesic_loss(
    generated: &OrientationSet,
    truth: &OrientationSet,
    c: &PolyCoeffs,
) -> (f64, Vec<Mat3>) {
    chamfer_geodesic_loss_raw(&generated.matrices(), &truth.matrices(), c)
        .expect("orientation sets are non-empty")
}

/// Same as [`chamfer_geodesic_loss`] on raw matrices, which need not be
/// orthonormal (network outputs before projection, finite-difference probes).
///
/// Each min realizes a single winner; ties go to the lowest index and the
/// subgradient is taken from that winner.
pub fn chamfer_geodesic_loss_raw(
    generated: &[Mat3],
    truth: &[Mat3],
    c: &PolyCoeffs,
) -> Result<(f64, Vec<Mat3>), LossError> {
    if generated.is_empty() || truth.is_empty() {
        return Err(LossError::EmptySet);
    }
    let pairs: Vec<Vec<(f64, Mat3)>> = generated
        .iter()
        .map(|g| truth.iter().map(|t| poly_geodesic_distance_raw(c, g, t)).collect())
        .collect();

    let mut value = 0.0;
    let mut grads = vec![Mat3::zeros(); generated.len()];

    for (gi, row) in pairs.iter().enumerate() {
        let best = argmin(row.iter().map(|(v, _)| *v));
        value += row[best].0;
        grads[gi] += row[best].1;
    }
    for ti in 0..truth.len() {
        let best = argmin(pairs.iter().map(|row| row[ti].0));
        value += pairs[best][ti].0;
        grads[best] += pairs[best][ti].1;
    }
    Ok((value, grads))
}

fn argmin(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, v) in values.enumerate() {
        if v < best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Per-point positions `p_i` with predicted displacements `v_i^d` toward
/// the auxiliary-plane vector.
#[derive(Clone, Debug, PartialEq)]
pub struct DisplacementField {
    points: Vec<Vec3>,
    displacements: Vec<Vec3>,
}

impl DisplacementField {
    pub fn new(points: Vec<Vec3>, displacements: Vec<Vec3>) -> Result<Self, LossError> {
        if points.len() != displacements.len() {
            return Err(LossError::FieldShape {
                points: points.len(),
                displacements: displacements.len(),
            });
        }
        if points.is_empty() {
            return Err(LossError::EmptyField);
        }
        Ok(DisplacementField { points, displacements })
    }

    /// Field whose every displacement points exactly at `target`.
    pub fn toward(points: Vec<Vec3>, target: &Vec3) -> Result<Self, LossError> {
        let displacements = points.iter().map(|p| target - p).collect();
        Self::new(points, displacements)
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn displacements(&self) -> &[Vec3] {
        &self.displacements
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn votes(&self) -> impl Iterator<Item = Vec3> + '_ {
        self.points.iter().zip(&self.displacements).map(|(p, d)| p + d)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefineLossWeights {
    pub alpha: f64,
    pub beta: f64,
    /// Smooth-L1 switch point between the quadratic and linear branches.
    pub smooth_l1_transition: f64,
}

impl Default for RefineLossWeights {
    fn default() -> Self {
        RefineLossWeights { alpha: 1.0, beta: 1.0, smooth_l1_transition: 1.0 }
    }
}

impl RefineLossWeights {
    pub fn validate(&self) -> Result<(), LossError> {
        let ok = self.alpha >= 0.0
            && self.beta >= 0.0
            && self.alpha + self.beta > 0.0
            && self.smooth_l1_transition > 0.0;
        if ok {
            Ok(())
        } else {
            Err(LossError::InvalidWeights)
        }
    }
}

fn smooth_l1(x: f64, transition: f64) -> (f64, f64) {
    if x.abs() < transition {
        (0.5 * x * x / transition, x / transition)
    } else {
        (x.abs() - 0.5 * transition, x.signum())
    }
}

/// Field loss plus variance loss. Smooth-L1 is applied per component and
/// summed over the three components of each row. Gradients are with
/// respect to the displacements.
pub fn refine_loss(
    field: &DisplacementField,
    v_gt: &PlaneVector,
    weights: &RefineLossWeights,
) -> Result<(f64, Vec<Vec3>), LossError> {
    weights.validate()?;
    if field.is_empty() {
        return Err(LossError::EmptyField);
    }
    let m = field.len() as f64;
    let target = v_gt.vector();
    let mean = predicted_plane_vector_raw(field);

    let mut field_term = 0.0;
    let mut var_term = 0.0;
    let mut grads = Vec::with_capacity(field.len());
    for (p, d) in field.points.iter().zip(&field.displacements) {
        let residual = d - (target - p);
        let mut g = Vec3::zeros();
        for k in 0..3 {
            let (v, dv) = smooth_l1(residual[k], weights.smooth_l1_transition);
            field_term += v;
            g[k] = weights.alpha * dv / m;
        }
        let centered = p + d - mean;
        var_term += centered.norm_squared();
        // the mean's own dependence on d cancels because the centered votes sum to zero
        g += centered * (2.0 * weights.beta / m);
        grads.push(g);
    }
    let value = weights.alpha * field_term / m + weights.beta * var_term / m;
    Ok((value, grads))
}

fn predicted_plane_vector_raw(field: &DisplacementField) -> Vec3 {
    let sum = field.votes().fold(Vec3::zeros(), |acc, v| acc + v);
    sum / field.len() as f64
}

/// Mean of the per-point votes `p_i + v_i^d`.
pub fn predicted_plane_vector(field: &DisplacementField) -> Result<PlaneVector, LossError> {
    if field.is_empty() {
        return Err(LossError::EmptyField);
    }
    PlaneVector::new(predicted_plane_vector_raw(field)).map_err(|_| LossError::ZeroPlaneVector)
}
