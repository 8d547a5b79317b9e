//! Small fixed-size linear algebra and SO(3) utilities.
//!
//! All attitudes are proper orthogonal 3×3 matrices acting as `b = A r`
//! (reference frame into body frame). Attitude perturbations follow the
//! left-multiplicative convention `A' = exp(−[δα×]) A`.

use nalgebra as na;

use crate::{Error, Result};

pub type Vec3 = na::Vector3<f64>;
pub type Vec6 = na::Vector6<f64>;
pub type Mat3 = na::Matrix3<f64>;
pub type Mat6 = na::Matrix6<f64>;

/// Frobenius tolerance on `AᵀA − I` and `|det A − 1|` for accepting a matrix
/// as a rotation.
pub const ROTATION_TOL: f64 = 1e-10;

/// Orthogonality residual above which [`small_rotation_update`] re-projects
/// its result onto SO(3).
const REORTHONORMALIZE_TOL: f64 = 1e-12;

/// Cross product matrix `[a×]` such that `[a×] b = a × b`.
pub fn cross_matrix(a: &Vec3) -> Mat3 {
    Mat3::new(0.0, -a.z, a.y, a.z, 0.0, -a.x, -a.y, a.x, 0.0)
}

/// A proper orthogonal 3×3 attitude matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix(Mat3);

impl RotationMatrix {
    /// Accepts `m` as a rotation if `‖mᵀm − I‖_F ≤ 1e-10` and
    /// `|det m − 1| ≤ 1e-10`.
    pub fn new(m: Mat3) -> Result<Self> {
        let ortho = (m.transpose() * m - Mat3::identity()).norm();
        let det = (m.determinant() - 1.0).abs();
        let residual = ortho.max(det);
        if residual <= ROTATION_TOL && m.iter().all(|x| x.is_finite()) {
            Ok(Self(m))
        } else {
            Err(Error::NotARotation { residual })
        }
    }

    pub fn identity() -> Self {
        Self(Mat3::identity())
    }

    /// Rotation by `angle` radians about `axis` (normalized internally).
    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        let n = axis.norm();
        if n == 0.0 {
            return Self::identity();
        }
        Self(rotation_exp(&(axis * (angle / n))))
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    /// The inverse rotation, `Aᵀ`.
    pub fn inverse(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }

    /// Rotation vector `w` with `self = exp([w×])` and `|w| ≤ π`.
    pub fn log(&self) -> Vec3 {
        rotation_log(&self.0)
    }

    /// Geodesic angle between two attitudes, `|log(self · otherᵀ)|`.
    pub fn angle_to(&self, other: &RotationMatrix) -> f64 {
        rotation_log(&(self.0 * other.0.transpose())).norm()
    }
}

/// `exp([v×])` by the Rodrigues formula.
pub(crate) fn rotation_exp(v: &Vec3) -> Mat3 {
    let theta = v.norm();
    let k = cross_matrix(v);
    if theta < 1e-12 {
        // second-order series; exact to machine precision at this scale
        return Mat3::identity() + k + k * k * 0.5;
    }
    Mat3::identity() + k * (theta.sin() / theta) + k * k * ((1.0 - theta.cos()) / (theta * theta))
}

/// Rotation vector of an orthonormal `m` (inverse of [`rotation_exp`]).
pub(crate) fn rotation_log(m: &Mat3) -> Vec3 {
    let q = na::UnitQuaternion::from_rotation_matrix(&na::Rotation3::from_matrix_unchecked(*m));
    q.scaled_axis()
}

/// Nearest rotation in the Frobenius sense, via SVD.
pub(crate) fn polar_project(m: &Mat3) -> Mat3 {
    let svd = m.svd(true, true);
    let u = svd.u.expect("3x3 SVD");
    let vt = svd.v_t.expect("3x3 SVD");
    let d = u.determinant() * vt.determinant();
    u * Mat3::from_diagonal(&Vec3::new(1.0, 1.0, d)) * vt
}

/// Applies the attitude error update `exp(−[δα×]) A` using the full matrix
/// exponential, re-projecting onto SO(3) if float accumulation pushes the
/// orthogonality residual above 1e-12.
pub fn small_rotation_update(delta_alpha: &Vec3, attitude: &RotationMatrix) -> RotationMatrix {
    let mut m = rotation_exp(&-delta_alpha) * attitude.matrix();
    if (m.transpose() * m - Mat3::identity()).norm() > REORTHONORMALIZE_TOL {
        m = polar_project(&m);
    }
    RotationMatrix(m)
}

/// Evaluates `A z` through the stacked-columns identity
/// `A z = (zᵀ ⊗ I_m) vec(A)`. Only used by tests that verify the
/// constraint-elimination steps of the estimator.
pub fn vec_kron_apply(a: &na::DMatrix<f64>, z: &na::DVector<f64>) -> Result<na::DVector<f64>> {
    let (m, k) = a.shape();
    if z.len() != k {
        return Err(Error::DimensionMismatch { rows: m, cols: k, len: z.len() });
    }
    // vec(A) stacks columns; (zᵀ ⊗ I_m) row i picks entry i of every column block
    let mut out = na::DVector::zeros(m);
    for col in 0..k {
        for row in 0..m {
            out[row] += z[col] * a[(row, col)];
        }
    }
    Ok(out)
}

/// Euler angles (roll, pitch, yaw) in degrees for the intrinsic z-y-x
/// sequence: `A = R₁(roll) R₂(pitch) R₃(yaw)`.
///
/// Refuses attitudes within 1e-6 degrees of the pitch singularity at ±90°.
pub fn attitude_to_euler(a: &RotationMatrix) -> Result<Vec3> {
    let m = a.matrix();
    let sin_pitch = -m[(0, 2)];
    let pitch = sin_pitch.clamp(-1.0, 1.0).asin();
    let pitch_deg = pitch.to_degrees();
    if pitch_deg.abs() >= 90.0 - 1e-6 {
        return Err(Error::GimbalLock { pitch_deg });
    }
    let yaw = m[(0, 1)].atan2(m[(0, 0)]);
    let roll = m[(1, 2)].atan2(m[(2, 2)]);
    Ok(Vec3::new(roll.to_degrees(), pitch_deg, yaw.to_degrees()))
}

/// Rebuilds the attitude from z-y-x Euler angles in degrees
/// (inverse of [`attitude_to_euler`]).
pub fn euler_to_attitude(rpy_deg: &Vec3) -> RotationMatrix {
    let (roll, pitch, yaw) = (
        rpy_deg.x.to_radians(),
        rpy_deg.y.to_radians(),
        rpy_deg.z.to_radians(),
    );
    let r1 = Mat3::new(
        1.0, 0.0, 0.0,
        0.0, roll.cos(), roll.sin(),
        0.0, -roll.sin(), roll.cos(),
    );
    let r2 = Mat3::new(
        pitch.cos(), 0.0, -pitch.sin(),
        0.0, 1.0, 0.0,
        pitch.sin(), 0.0, pitch.cos(),
    );
    let r3 = Mat3::new(
        yaw.cos(), yaw.sin(), 0.0,
        -yaw.sin(), yaw.cos(), 0.0,
        0.0, 0.0, 1.0,
    );
    RotationMatrix(r1 * r2 * r3)
}

/// Symmetrizes in place: `(M + Mᵀ) / 2`.
pub(crate) fn symmetrize3(m: &Mat3) -> Mat3 {
    (m + m.transpose()) * 0.5
}

pub(crate) fn symmetrize6(m: &Mat6) -> Mat6 {
    (m + m.transpose()) * 0.5
}
