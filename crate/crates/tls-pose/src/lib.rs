//! Total least squares (TLS) pose estimation from matched vector observations.
//!
//! Given `n ≥ 3` pairs of landmark coordinates `(r̃ᵢ, b̃ᵢ)` measured in a
//! reference frame and a body frame, with per-pair 6×6 noise covariances that
//! may be fully populated (anisotropic and cross-correlated between frames),
//! this crate estimates the rigid pose `(A, p)` satisfying `bᵢ = A rᵢ − p`
//! by total least squares, i.e. treating both frames' measurements as noisy.
//!
//! The crate provides:
//!
//! - [`solver::solve_pose`] — iterative Gauss–Newton solve on SO(3) with the
//!   attitude-dependent weight `Q_λᵢ = A R_rᵢ Aᵀ − A R_rbᵢ − R_rbᵢᵀ Aᵀ + R_bᵢ`,
//! - [`solver::solve_isotropic`] — closed-form SVD solution for isotropic
//!   noise (a generalized Wahba problem),
//! - [`analytics`] — first-order error covariances for the attitude,
//!   translation, observation estimates and residuals, the Fisher information
//!   matrix, and observability diagnostics,
//! - [`montecarlo`] — a reproducible sampling harness that checks the
//!   analytic covariances against empirical ones and 3σ coverage,
//! - [`oracle`] — brute-force reference implementations used only by tests.

pub mod analytics;
pub mod geometry;
pub mod model;
pub mod montecarlo;
pub mod oracle;
pub mod solver;

use geometry::Vec3;

/// Errors shared across the solver and analytics paths.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// The attitude normal matrix is singular (or nearly so). For two
    /// observations the null direction is `A(r₁ − r₂)`.
    #[error("attitude is not observable from this instance{}", null_direction_msg(.null_direction))]
    Observability { null_direction: Option<Vec3> },

    /// A per-observation weight or noise covariance failed its positive
    /// definiteness requirement.
    #[error("noise covariance of observation {index} is not positive definite")]
    NonSpdWeight { index: usize },

    /// The attitude profile matrix has rank below 2, so the closed-form
    /// isotropic solution does not determine the attitude.
    #[error("attitude profile matrix has rank {rank}, need at least 2")]
    RankDeficientB { rank: usize },

    /// A symmetric linear solve was abandoned because the condition estimate
    /// exceeded 1e12.
    #[error("linear system is ill-conditioned (condition estimate {condition:.3e})")]
    IllConditioned { condition: f64 },

    /// A matrix offered as an attitude failed the orthonormality or
    /// determinant check.
    #[error("matrix is not a proper rotation (residual {residual:.3e})")]
    NotARotation { residual: f64 },

    /// Euler extraction was refused near the pitch singularity.
    #[error("pitch {pitch_deg:.8} deg is too close to ±90 deg for a z-y-x Euler factorization")]
    GimbalLock { pitch_deg: f64 },

    /// Matrix/vector dimensions do not conform.
    #[error("dimension mismatch: matrix is {rows}x{cols}, vector has length {len}")]
    DimensionMismatch { rows: usize, cols: usize, len: usize },

    /// More than 1% of Monte Carlo samples failed to solve.
    #[error("{failed} of {total} Monte Carlo samples failed to solve (more than 1%)")]
    ExcessiveFailures { failed: usize, total: usize },
}

fn null_direction_msg(dir: &Option<Vec3>) -> String {
    match dir {
        Some(v) => format!(" (null direction [{:.6}, {:.6}, {:.6}])", v.x, v.y, v.z),
        None => String::new(),
    }
}

pub type Result<T> = std::result::Result<T, Error>;
