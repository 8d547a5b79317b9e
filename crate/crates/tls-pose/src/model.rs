//! Problem definition: observation pairs, noise models, pose, and input
//! validation.
//!
//! All vectors are in meters and all covariances in m². The measurement model
//! is `bᵢ = A rᵢ − p` with additive zero-mean Gaussian noise on both `rᵢ`
//! and `bᵢ`, possibly correlated across the two frames.

use nalgebra as na;

use crate::geometry::{Mat3, Mat6, RotationMatrix, Vec3};

/// Relative factor on `trace(Rᵢ)` below which the smallest eigenvalue makes
/// the assembled covariance count as non-positive-definite.
pub const SPD_TOL_FACTOR: f64 = 1e-15;

/// Symmetry tolerance on the noise blocks.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Relative second-singular-value threshold for the collinearity test on the
/// centered reference vectors.
pub const COLLINEARITY_TOL: f64 = 1e-9;

/// Per-observation noise covariance, partitioned as
/// `Rᵢ = [[R_r, R_rb], [R_rbᵀ, R_b]]` over the stacked error `(Δrᵢ, Δbᵢ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    /// Covariance of the reference-frame error `Δrᵢ` (m²).
    pub r_r: Mat3,
    /// Covariance of the body-frame error `Δbᵢ` (m²).
    pub r_b: Mat3,
    /// Cross-covariance `E{Δrᵢ Δbᵢᵀ}` (m²).
    pub r_rb: Mat3,
}

impl NoiseModel {
    pub fn new(r_r: Mat3, r_b: Mat3, r_rb: Mat3) -> Self {
        Self { r_r, r_b, r_rb }
    }

    /// Isotropic, uncorrelated noise: `R_r = σ_r² I`, `R_b = σ_b² I`.
    pub fn isotropic(sigma_r: f64, sigma_b: f64) -> Self {
        Self {
            r_r: Mat3::identity() * sigma_r * sigma_r,
            r_b: Mat3::identity() * sigma_b * sigma_b,
            r_rb: Mat3::zeros(),
        }
    }

    /// Partitions an assembled 6×6 covariance into its blocks.
    pub fn from_assembled(r: &Mat6) -> Self {
        Self {
            r_r: r.fixed_view::<3, 3>(0, 0).into_owned(),
            r_rb: r.fixed_view::<3, 3>(0, 3).into_owned(),
            r_b: r.fixed_view::<3, 3>(3, 3).into_owned(),
        }
    }

    /// The assembled 6×6 covariance of `(Δrᵢ, Δbᵢ)`.
    pub fn assembled(&self) -> Mat6 {
        let mut r = Mat6::zeros();
        r.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.r_r);
        r.fixed_view_mut::<3, 3>(0, 3).copy_from(&self.r_rb);
        r.fixed_view_mut::<3, 3>(3, 0).copy_from(&self.r_rb.transpose());
        r.fixed_view_mut::<3, 3>(3, 3).copy_from(&self.r_b);
        r
    }

    /// Frobenius asymmetry of the worst diagonal block.
    pub fn symmetry_residual(&self) -> f64 {
        let a = (self.r_r - self.r_r.transpose()).norm();
        let b = (self.r_b - self.r_b.transpose()).norm();
        a.max(b)
    }

    /// Smallest eigenvalue of the assembled covariance.
    pub fn min_eigenvalue(&self) -> f64 {
        self.assembled().symmetric_eigen().eigenvalues.min()
    }

    /// Positive definiteness at the scale-relative tolerance
    /// `SPD_TOL_FACTOR × trace(Rᵢ)`.
    pub fn is_spd(&self) -> bool {
        self.min_eigenvalue() > SPD_TOL_FACTOR * self.assembled().trace()
    }
}

/// One matched landmark observation: coordinates in the reference frame and
/// the body frame, with the joint noise model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationPair {
    pub r_tilde: Vec3,
    pub b_tilde: Vec3,
    pub noise: NoiseModel,
}

/// An ordered set of observation pairs forming one solvable problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    observations: Vec<ObservationPair>,
}

impl ProblemInstance {
    pub fn new(observations: Vec<ObservationPair>) -> Self {
        Self { observations }
    }

    pub fn observations(&self) -> &[ObservationPair] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }
}

/// Rigid pose: attitude plus translation, `b = A r − p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub attitude: RotationMatrix,
    pub translation: Vec3,
}

impl Pose {
    pub fn identity() -> Self {
        Self { attitude: RotationMatrix::identity(), translation: Vec3::zeros() }
    }
}

/// A single validation finding.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    TooFewObservations { count: usize },
    NoiseNotSymmetric { index: usize, residual: f64 },
    NoiseNotPositiveDefinite { index: usize, min_eigenvalue: f64 },
    CollinearReferences { singular_value_ratio: f64 },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::TooFewObservations { count } => {
                write!(f, "instance has {count} observations, at least 3 are required")
            }
            Violation::NoiseNotSymmetric { index, residual } => {
                write!(f, "noise blocks of observation {index} are asymmetric (residual {residual:.3e})")
            }
            Violation::NoiseNotPositiveDefinite { index, min_eigenvalue } => {
                write!(f, "noise covariance of observation {index} is not positive definite (min eigenvalue {min_eigenvalue:.3e})")
            }
            Violation::CollinearReferences { singular_value_ratio } => {
                write!(f, "reference vectors are collinear (singular value ratio {singular_value_ratio:.3e})")
            }
        }
    }
}

/// Outcome of [`validate_instance`]; empty iff the instance is solvable.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has_observability_violation(&self) -> bool {
        self.violations.iter().any(|v| {
            matches!(v, Violation::TooFewObservations { .. } | Violation::CollinearReferences { .. })
        })
    }

    pub fn first_non_spd_index(&self) -> Option<usize> {
        self.violations.iter().find_map(|v| match v {
            Violation::NoiseNotPositiveDefinite { index, .. }
            | Violation::NoiseNotSymmetric { index, .. } => Some(*index),
            _ => None,
        })
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "instance is valid");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Diagnoses the preconditions of the estimator: at least three observations,
/// positive definite noise, and non-collinear reference vectors. Never fails;
/// returns the list of violations.
pub fn validate_instance(inst: &ProblemInstance) -> ValidationReport {
    let mut violations = Vec::new();
    let n = inst.len();
    if n < 3 {
        violations.push(Violation::TooFewObservations { count: n });
    }
    for (index, obs) in inst.observations().iter().enumerate() {
        let residual = obs.noise.symmetry_residual();
        if residual > SYMMETRY_TOL {
            violations.push(Violation::NoiseNotSymmetric { index, residual });
        }
        let min_eigenvalue = obs.noise.min_eigenvalue();
        if min_eigenvalue <= SPD_TOL_FACTOR * obs.noise.assembled().trace() {
            violations.push(Violation::NoiseNotPositiveDefinite { index, min_eigenvalue });
        }
    }
    if n >= 2 {
        if let Some(ratio) = reference_collinearity_ratio(inst) {
            if ratio <= COLLINEARITY_TOL {
                violations.push(Violation::CollinearReferences { singular_value_ratio: ratio });
            }
        } else {
            violations.push(Violation::CollinearReferences { singular_value_ratio: 0.0 });
        }
    }
    ValidationReport { violations }
}

/// σ₂/σ₁ of the centered reference-vector matrix; `None` when all reference
/// vectors coincide (σ₁ = 0).
fn reference_collinearity_ratio(inst: &ProblemInstance) -> Option<f64> {
    let n = inst.len();
    let mean: Vec3 = inst.observations().iter().map(|o| o.r_tilde).sum::<Vec3>() / n as f64;
    let centered = na::DMatrix::from_fn(3, n, |row, col| (inst.observations()[col].r_tilde - mean)[row]);
    let sv = centered.singular_values();
    let s1 = sv[0];
    if s1 == 0.0 {
        return None;
    }
    Some(if sv.len() > 1 { sv[1] / s1 } else { 0.0 })
}

/// Builds the reference vectors consistent with the truth pose:
/// `rᵢ = Aᵀ (bᵢ + p)`, so that `bᵢ = A rᵢ − p` holds exactly.
pub fn synthesize_reference_vectors(truth: &Pose, b_list: &[Vec3]) -> Vec<Vec3> {
    b_list
        .iter()
        .map(|b| truth.attitude.inverse().rotate(&(b + truth.translation)))
        .collect()
}
