//! Rotations on SO(3): construction, geodesic distance, the degree-10
//! polynomial surrogate of the geodesic distance, the continuous 6D
//! representation, and distance modulo rotations about the world z-axis.

use std::f64::consts::PI;
use std::fmt;
use std::ops::Mul;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, Matrix3, UnitQuaternion, Vector3};
use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Number of trace samples used by the default surrogate fit.
pub const DEFAULT_FIT_SAMPLES: usize = 10_001;
/// Smallest sample grid accepted by [`fit_geodesic_polynomial`].
pub const MIN_FIT_SAMPLES: usize = 100;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum RotationError {
    #[error("rotation axis must be unit length (|axis| = {0})")]
    InvalidAxis(f64),
    #[error("matrix is not a proper rotation (orthonormality residual {residual:.3e}, det {det})")]
    NotARotation { residual: f64, det: f64 },
    #[error("6D representation is degenerate (zero or parallel columns)")]
    DegenerateSixD,
    #[error("polynomial fit needs at least {MIN_FIT_SAMPLES} samples, got {0}")]
    TooFewSamples(usize),
    #[error("polynomial fit failed: design matrix is rank deficient")]
    FitFailed,
}

/// A proper rotation, stored as a 3x3 matrix mapping body coordinates to
/// world coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation3(Mat3);

impl Rotation3 {
    /// Orthonormality and determinant tolerance for validated construction.
    pub const TOLERANCE: f64 = 1e-9;

    pub fn identity() -> Self {
        Rotation3(Mat3::identity())
    }

    /// Validates that `m` is orthonormal with determinant +1.
    pub fn from_matrix(m: Mat3) -> Result<Self, RotationError> {
        let residual = (m.transpose() * m - Mat3::identity()).abs().max();
        let det = m.determinant();
        if !residual.is_finite() || residual > Self::TOLERANCE || (det - 1.0).abs() > Self::TOLERANCE
        {
            return Err(RotationError::NotARotation { residual, det });
        }
        Ok(Rotation3(m))
    }

    pub fn from_row_major(values: &[f64; 9]) -> Result<Self, RotationError> {
        Self::from_matrix(Mat3::from_row_slice(values))
    }

    pub fn to_row_major(&self) -> [f64; 9] {
        let m = &self.0;
        [
            m[(0, 0)],
            m[(0, 1)],
            m[(0, 2)],
            m[(1, 0)],
            m[(1, 1)],
            m[(1, 2)],
            m[(2, 0)],
            m[(2, 1)],
            m[(2, 2)],
        ]
    }

    /// Rodrigues rotation of `angle` radians about the unit vector `axis`.
    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Result<Self, RotationError> {
        let n = axis.norm();
        if !n.is_finite() || (n - 1.0).abs() > Self::TOLERANCE {
            return Err(RotationError::InvalidAxis(n));
        }
        Ok(Self::axis_angle_unchecked(axis, angle))
    }

    pub(crate) fn axis_angle_unchecked(axis: &Vec3, angle: f64) -> Self {
        let k = axis.cross_matrix();
        let (s, c) = angle.sin_cos();
        Rotation3(Mat3::identity() + k * s + k * k * (1.0 - c))
    }

    pub fn rot_x(angle: f64) -> Self {
        Self::axis_angle_unchecked(&Vec3::x(), angle)
    }

    pub fn rot_y(angle: f64) -> Self {
        Self::axis_angle_unchecked(&Vec3::y(), angle)
    }

    pub fn rot_z(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Rotation3(Mat3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0))
    }

    pub fn from_unit_quaternion(q: &UnitQuaternion<f64>) -> Self {
        Rotation3(*q.to_rotation_matrix().matrix())
    }

    /// Uniformly distributed rotation (Shoemake's subgroup algorithm).
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let u1: f64 = rng.gen();
        let u2: f64 = rng.gen();
        let u3: f64 = rng.gen();
        let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
        let (s2, c2) = (2.0 * PI * u2).sin_cos();
        let (s3, c3) = (2.0 * PI * u3).sin_cos();
        let q = nalgebra::Quaternion::new(b * c3, a * s2, a * c2, b * s3);
        Self::from_unit_quaternion(&UnitQuaternion::new_normalize(q))
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn inverse(&self) -> Self {
        Rotation3(self.0.transpose())
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    /// World up-axis expressed in the body frame, `Rᵀ ẑ`. Invariant under
    /// left multiplication by any rotation about world z.
    pub fn body_up(&self) -> Vec3 {
        self.0.row(2).transpose()
    }

    /// Re-orthonormalizes through the 6D representation. Used to strip the
    /// drift accumulated by long products.
    pub fn renormalized(&self) -> Self {
        rotation_from_sixd(&sixd_from_rotation(self)).unwrap_or(*self)
    }

    /// Representative of this rotation's class modulo world-z rotations: the
    /// shortest-arc rotation taking the body up-axis onto world z.
    pub fn canonical_yaw(&self) -> Self {
        shortest_arc_to_z(&self.body_up()).unwrap_or(*self)
    }
}

impl Mul for Rotation3 {
    type Output = Rotation3;
    fn mul(self, rhs: Rotation3) -> Rotation3 {
        Rotation3(self.0 * rhs.0)
    }
}

impl Mul<Vec3> for Rotation3 {
    type Output = Vec3;
    fn mul(self, rhs: Vec3) -> Vec3 {
        self.0 * rhs
    }
}

impl Mul<&Vec3> for &Rotation3 {
    type Output = Vec3;
    fn mul(self, rhs: &Vec3) -> Vec3 {
        self.0 * rhs
    }
}

impl fmt::Display for Rotation3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = self.to_row_major();
        write!(
            f,
            "[{:.6} {:.6} {:.6}; {:.6} {:.6} {:.6}; {:.6} {:.6} {:.6}]",
            r[0], r[1], r[2], r[3], r[4], r[5], r[6], r[7], r[8]
        )
    }
}

impl Serialize for Rotation3 {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_row_major().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Rotation3 {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let values = <[f64; 9]>::deserialize(deserializer)?;
        Rotation3::from_row_major(&values).map_err(serde::de::Error::custom)
    }
}

/// Minimal rotation taking the direction of `v` onto +z. The antiparallel
/// case resolves to a half turn about x.
pub(crate) fn shortest_arc_to_z(v: &Vec3) -> Option<Rotation3> {
    let n = v.norm();
    if !(n > 1e-12) {
        return None;
    }
    let u = v / n;
    let axis = u.cross(&Vec3::z());
    let s = axis.norm();
    let c = u.z.clamp(-1.0, 1.0);
    if s < 1e-12 {
        return Some(if c > 0.0 {
            Rotation3::identity()
        } else {
            Rotation3::rot_x(PI)
        });
    }
    Some(Rotation3::axis_angle_unchecked(&(axis / s), s.atan2(c)))
}

/// Angle of the relative rotation `Rg·RTᵀ`, in `[0, π]`.
///
/// Evaluated as `atan2(sin, cos)` with `cos = (tr − 1)/2`; this equals the
/// clamped `arccos` form but keeps full precision near 0 and π.
pub fn geodesic_distance(rg: &Rotation3, rt: &Rotation3) -> f64 {
    relative_angle(&(rg.0 * rt.0.transpose()))
}

fn relative_angle(q: &Mat3) -> f64 {
    let cos = ((q.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    let sx = q[(2, 1)] - q[(1, 2)];
    let sy = q[(0, 2)] - q[(2, 0)];
    let sz = q[(1, 0)] - q[(0, 1)];
    let sin = 0.5 * (sx * sx + sy * sy + sz * sz).sqrt();
    sin.atan2(cos)
}

/// `arccos((t − 1)/2)` with the argument clamped; the quantity the
/// surrogate approximates.
pub fn geodesic_from_trace(t: f64) -> f64 {
    ((t - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
}

/// Coefficients `a0..a9` of the surrogate `(t − 3)·Σ aᵢ tⁱ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PolyCoeffs(pub [f64; 10]);

impl PolyCoeffs {
    /// Surrogate fitted on the default grid, computed once per process.
    pub fn default_fit() -> &'static PolyCoeffs {
        static FIT: OnceLock<PolyCoeffs> = OnceLock::new();
        FIT.get_or_init(|| {
            fit_geodesic_polynomial(DEFAULT_FIT_SAMPLES).expect("default grid is well conditioned")
        })
    }

    /// Surrogate value at trace `t`.
    pub fn eval(&self, t: f64) -> f64 {
        self.eval_with_derivative(t).0
    }

    /// Surrogate value and `d/dt` at trace `t`.
    pub fn eval_with_derivative(&self, t: f64) -> (f64, f64) {
        let mut p = 0.0;
        let mut dp = 0.0;
        for &a in self.0.iter().rev() {
            dp = dp * t + p;
            p = p * t + a;
        }
        ((t - 3.0) * p, p + (t - 3.0) * dp)
    }

    /// Largest deviation from `arccos((t−1)/2)` over a uniform grid on `[-1, 3]`.
    pub fn max_fit_error(&self, samples: usize) -> f64 {
        trace_grid(samples)
            .map(|t| (self.eval(t) - geodesic_from_trace(t)).abs())
            .fold(0.0, f64::max)
    }
}

fn trace_grid(samples: usize) -> impl Iterator<Item = f64> {
    let step = 4.0 / (samples.max(2) - 1) as f64;
    (0..samples).map(move |k| if k + 1 == samples { 3.0 } else { -1.0 + step * k as f64 })
}

/// Unweighted least-squares fit of the surrogate coefficients on `samples`
/// uniformly spaced traces in `[-1, 3]`.
pub fn fit_geodesic_polynomial(samples: usize) -> Result<PolyCoeffs, RotationError> {
    if samples < MIN_FIT_SAMPLES {
        return Err(RotationError::TooFewSamples(samples));
    }
    let ts: Vec<f64> = trace_grid(samples).collect();
    let design = DMatrix::from_fn(samples, 10, |r, c| (ts[r] - 3.0) * ts[r].powi(c as i32));
    let target = DVector::from_iterator(samples, ts.iter().map(|&t| geodesic_from_trace(t)));

    let svd = design.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > smax * 1e-14) {
        return Err(RotationError::FitFailed);
    }
    let solution = svd.solve(&target, 0.0).map_err(|_| RotationError::FitFailed)?;
    let mut coeffs = [0.0; 10];
    for (c, v) in coeffs.iter_mut().zip(solution.iter()) {
        if !v.is_finite() {
            return Err(RotationError::FitFailed);
        }
        *c = *v;
    }
    Ok(PolyCoeffs(coeffs))
}

/// Surrogate distance on raw 3x3 matrices, with its gradient with respect
/// to the entries of `rg`. `t = tr(rg·rtᵀ)`, so `dt/drg = rt`.
pub fn poly_geodesic_distance_raw(c: &PolyCoeffs, rg: &Mat3, rt: &Mat3) -> (f64, Mat3) {
    let t = rg.component_mul(rt).sum();
    let (value, slope) = c.eval_with_derivative(t);
    (value, rt * slope)
}

pub fn poly_geodesic_distance(c: &PolyCoeffs, rg: &Rotation3, rt: &Rotation3) -> (f64, Mat3) {
    poly_geodesic_distance_raw(c, &rg.0, &rt.0)
}

/// First two columns of a rotation, before orthonormalization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SixD {
    pub a: Vec3,
    pub b: Vec3,
}

impl SixD {
    pub fn to_array(&self) -> [f64; 6] {
        [self.a.x, self.a.y, self.a.z, self.b.x, self.b.y, self.b.z]
    }
}

pub fn sixd_from_rotation(r: &Rotation3) -> SixD {
    SixD {
        a: r.0.column(0).into_owned(),
        b: r.0.column(1).into_owned(),
    }
}

/// Gram-Schmidt on `(a, b)`, third column from the cross product.
pub fn rotation_from_sixd(s: &SixD) -> Result<Rotation3, RotationError> {
    let na = s.a.norm();
    if !(na > 1e-12) || !s.a.iter().all(|v| v.is_finite()) {
        return Err(RotationError::DegenerateSixD);
    }
    let x = s.a / na;
    let b = s.b - x * x.dot(&s.b);
    let nb = b.norm();
    if !(nb > 1e-12 * s.b.norm().max(1.0)) {
        return Err(RotationError::DegenerateSixD);
    }
    let y = b / nb;
    let z = x.cross(&y);
    Ok(Rotation3(Mat3::from_columns(&[x, y, z])))
}

/// Minimum over θ of `geodesic_distance(Rz(θ)·r1, r2)` and the minimizing θ.
///
/// `tr(Rz(θ)·M)` with `M = r1·r2ᵀ` is `A cos θ + B sin θ + M₂₂`, so the
/// maximizing θ is `atan2(B, A)`; when `A = B = 0` every θ is optimal and 0
/// is returned.
pub fn z_quotient_align(r1: &Rotation3, r2: &Rotation3) -> (f64, f64) {
    let m = r1.0 * r2.0.transpose();
    let a = m[(0, 0)] + m[(1, 1)];
    let b = m[(0, 1)] - m[(1, 0)];
    let theta = if a.hypot(b) > 0.0 { b.atan2(a) } else { 0.0 };
    let aligned = Rotation3::rot_z(theta) * *r1;
    (geodesic_distance(&aligned, r2), theta)
}

pub fn z_quotient_distance(r1: &Rotation3, r2: &Rotation3) -> f64 {
    z_quotient_align(r1, r2).0
}
