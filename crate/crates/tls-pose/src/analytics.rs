//! First-order error-covariance suite and observability diagnostics.
//!
//! With `𝒜ᵢ = [A r̃ᵢ×]`, `𝒢ᵢ = [𝒜ᵢ  −I]` and the weights `Q_λᵢ` at the
//! solved attitude, the linearized estimator is a weighted least squares in
//! `δf = (δα, δp)` with information matrix `F = Σᵢ 𝒢ᵢᵀ Q_λᵢ⁻¹ 𝒢ᵢ`. This
//! module exposes the resulting covariances:
//!
//! - attitude: `P_δα = 𝓗⁻¹` (the Gauss–Newton normal matrix inverse),
//! - translation: `cov{p̂} = S_λ + 𝒜̄ P_δα 𝒜̄ᵀ` with
//!   `𝒜̄ = S_λ Σᵢ Q_λᵢ⁻¹ 𝒜ᵢ`,
//! - joint: `P_f = F⁻¹`, whose diagonal blocks reproduce the two above,
//! - per-observation estimates `b̂ᵢ`, `r̂ᵢ`, their residual covariances
//!   `Cᵢ (Q_λᵢ − 𝒢ᵢ P_f 𝒢ᵢᵀ) Cᵢᵀ` (and the `Dᵢ` analogue), and estimate
//!   covariances `P_bᵢ = R_bᵢ − cov{b̂ᵢ − b̃ᵢ}`, `P_rᵢ = R_rᵢ − cov{r̂ᵢ − r̃ᵢ}`.
//!
//! The estimate-covariance cross terms collapse because
//! `E{Δbᵢ (Δaᵢ − 𝒢ᵢ δf)ᵀ} = −Cᵢ (Q_λᵢ − 𝒢ᵢ P_f 𝒢ᵢᵀ)`: the prior splits into
//! estimate-error and residual parts. The Monte Carlo harness checks every
//! expression against sampled covariances.
//!
//! All covariances are evaluated at the estimated pose; the difference from
//! evaluating at the (unknown) truth is second order in the noise.

use crate::geometry::{cross_matrix, symmetrize3, symmetrize6, Mat3, Mat6, RotationMatrix, Vec3};
use crate::model::{Pose, ProblemInstance};
use crate::solver::{
    attitude_profile_matrix, compute_s_lambda, instance_weights, profile_rank, svd_attitude,
    CONDITION_LIMIT,
};
use crate::{Error, Result};

/// Per-observation analytic quantities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerObservation {
    /// TLS estimate of the body-frame observation.
    pub b_hat: Vec3,
    /// TLS estimate of the reference-frame observation.
    pub r_hat: Vec3,
    /// Covariance of the residual `b̂ᵢ − b̃ᵢ`.
    pub cov_res_b: Mat3,
    /// Covariance of the residual `r̂ᵢ − r̃ᵢ`.
    pub cov_res_r: Mat3,
    /// Covariance of the estimate error `b̂ᵢ − bᵢ`.
    pub p_b: Mat3,
    /// Covariance of the estimate error `r̂ᵢ − rᵢ`.
    pub p_r: Mat3,
    /// `Cᵢ = (R_rbᵢᵀ Aᵀ − R_bᵢ) Q_λᵢ⁻¹`.
    pub c: Mat3,
    /// `Dᵢ = (R_rᵢ Aᵀ − R_rbᵢ) Q_λᵢ⁻¹`.
    pub d: Mat3,
}

/// Full analytic report at a solved pose.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticsReport {
    /// Attitude error-covariance `P_δα = 𝓗⁻¹` (rad²).
    pub p_delta_alpha: Mat3,
    /// Translation error-covariance `cov{p̂}` (m²).
    pub cov_p: Mat3,
    /// Joint covariance of `δf = (δα, δp)`.
    pub p_f: Mat6,
    /// `𝒜̄ = S_λ Σᵢ Q_λᵢ⁻¹ 𝒜ᵢ`.
    pub a_bar: Mat3,
    /// Fisher information matrix `F = Σᵢ 𝒢ᵢᵀ Q_λᵢ⁻¹ 𝒢ᵢ`.
    pub fim: Mat6,
    pub per_observation: Vec<PerObservation>,
}

/// Observability summary for an instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservabilityDiagnosis {
    /// Rank of the unit-weight attitude profile matrix (0..=3); at least 2
    /// is required for the attitude to be determined.
    pub rank_of_b: usize,
    /// Smallest eigenvalue of `𝓗` at the initialization attitude (NaN when
    /// the noise models do not admit weights).
    pub smallest_h_eigenvalue: f64,
    /// Near-null direction of `𝓗` when it is numerically singular; for two
    /// observations this is `A(r̃₁ − r̃₂)`.
    pub null_direction: Option<Vec3>,
}

/// `P_δα = 𝓗⁻¹`. Fails with [`Error::Observability`] when `𝓗` is singular
/// or its condition estimate exceeds 1e12.
pub fn attitude_covariance(h: &Mat3) -> Result<Mat3> {
    let eig = h.symmetric_eigen();
    let max = eig.eigenvalues.amax();
    let min = eig.eigenvalues.min();
    if !(min > 0.0) || max / min > CONDITION_LIMIT {
        let k = eig.eigenvalues.imin();
        return Err(Error::Observability {
            null_direction: Some(eig.eigenvectors.column(k).into_owned()),
        });
    }
    let inv = h.cholesky().ok_or(Error::Observability { null_direction: None })?.inverse();
    Ok(symmetrize3(&inv))
}

/// `cov{p̂} = S_λ + 𝒜̄ P_δα 𝒜̄ᵀ`.
pub fn translation_covariance(s_lambda: &Mat3, a_bar: &Mat3, p_delta_alpha: &Mat3) -> Mat3 {
    symmetrize3(&(s_lambda + a_bar * p_delta_alpha * a_bar.transpose()))
}

/// Fisher information matrix in `(δα, δp)` coordinates:
/// `F = [[Σ𝒜ᵢᵀQ⁻¹𝒜ᵢ, −Σ𝒜ᵢᵀQ⁻¹], [−ΣQ⁻¹𝒜ᵢ, ΣQ⁻¹]] = Σᵢ 𝒢ᵢᵀ Q_λᵢ⁻¹ 𝒢ᵢ`.
pub fn fim(inst: &ProblemInstance, attitude: &RotationMatrix) -> Result<Mat6> {
    let weights = instance_weights(attitude, inst)?;
    let mut f = Mat6::zeros();
    for (obs, q_inv) in inst.observations().iter().zip(&weights.q_inv) {
        let ai = cross_matrix(&attitude.rotate(&obs.r_tilde));
        let att = ai.transpose() * q_inv * ai;
        let cross = ai.transpose() * q_inv;
        let mut blk = f.fixed_view_mut::<3, 3>(0, 0);
        blk += att;
        let mut blk = f.fixed_view_mut::<3, 3>(0, 3);
        blk -= cross;
        let mut blk = f.fixed_view_mut::<3, 3>(3, 0);
        blk -= cross.transpose();
        let mut blk = f.fixed_view_mut::<3, 3>(3, 3);
        blk += q_inv;
    }
    Ok(symmetrize6(&f))
}

/// Joint covariance `P_f = F⁻¹`; its (1,1) block equals `P_δα` and its
/// (2,2) block equals `cov{p̂}` (checked by the acceptance suite).
pub fn joint_covariance(inst: &ProblemInstance, attitude: &RotationMatrix) -> Result<Mat6> {
    let f = fim(inst, attitude)?;
    let eig = f.symmetric_eigen();
    let max = eig.eigenvalues.amax();
    let min = eig.eigenvalues.min();
    if !(min > 0.0) || max / min > CONDITION_LIMIT {
        let k = eig.eigenvalues.imin();
        let dir = eig.eigenvectors.column(k).fixed_rows::<3>(0).into_owned();
        return Err(Error::Observability { null_direction: Some(dir) });
    }
    let inv = f.cholesky().ok_or(Error::Observability { null_direction: None })?.inverse();
    Ok(symmetrize6(&inv))
}

/// TLS estimates of the observation vectors at a solved pose:
///
/// ```text
/// b̂ᵢ = b̃ᵢ + (R_rbᵢᵀ Âᵀ − R_bᵢ) Q_λᵢ⁻¹ eᵢ
/// r̂ᵢ = r̃ᵢ + (R_rᵢ Âᵀ − R_rbᵢ) Q_λᵢ⁻¹ eᵢ,   eᵢ = b̃ᵢ − Â r̃ᵢ + p̂
/// ```
///
/// The estimates satisfy the constraint `b̂ᵢ = Â r̂ᵢ − p̂` identically.
pub fn estimate_observations(inst: &ProblemInstance, pose: &Pose) -> Result<Vec<(Vec3, Vec3)>> {
    let weights = instance_weights(&pose.attitude, inst)?;
    let a = pose.attitude.matrix();
    let mut out = Vec::with_capacity(inst.len());
    for (obs, q_inv) in inst.observations().iter().zip(&weights.q_inv) {
        let e = obs.b_tilde - pose.attitude.rotate(&obs.r_tilde) + pose.translation;
        let w = q_inv * e;
        let b_hat = obs.b_tilde + (obs.noise.r_rb.transpose() * a.transpose() - obs.noise.r_b) * w;
        let r_hat = obs.r_tilde + (obs.noise.r_r * a.transpose() - obs.noise.r_rb) * w;
        out.push((b_hat, r_hat));
    }
    Ok(out)
}

/// Residual covariances `cov{b̂ᵢ − b̃ᵢ} = Cᵢ (Q_λᵢ − 𝒢ᵢ P_f 𝒢ᵢᵀ) Cᵢᵀ` and the
/// `Dᵢ` analogue for `r̂ᵢ − r̃ᵢ`. The inner matrix `Q_λᵢ − 𝒢ᵢ P_f 𝒢ᵢᵀ` is
/// positive semidefinite on every observable instance.
pub fn residual_covariances(
    inst: &ProblemInstance,
    pose: &Pose,
    p_f: &Mat6,
) -> Result<Vec<(Mat3, Mat3)>> {
    Ok(per_observation_terms(inst, pose, p_f)?
        .into_iter()
        .map(|t| (t.cov_res_b, t.cov_res_r))
        .collect())
}

/// Estimate covariances `P_bᵢ = R_bᵢ − cov{b̂ᵢ − b̃ᵢ}` and
/// `P_rᵢ = R_rᵢ − cov{r̂ᵢ − r̃ᵢ}`.
pub fn estimate_covariances(
    inst: &ProblemInstance,
    pose: &Pose,
    p_f: &Mat6,
) -> Result<Vec<(Mat3, Mat3)>> {
    Ok(per_observation_terms(inst, pose, p_f)?
        .into_iter()
        .map(|t| (t.p_b, t.p_r))
        .collect())
}

struct ObservationTerms {
    c: Mat3,
    d: Mat3,
    cov_res_b: Mat3,
    cov_res_r: Mat3,
    p_b: Mat3,
    p_r: Mat3,
}

fn per_observation_terms(
    inst: &ProblemInstance,
    pose: &Pose,
    p_f: &Mat6,
) -> Result<Vec<ObservationTerms>> {
    let weights = instance_weights(&pose.attitude, inst)?;
    let a = pose.attitude.matrix();
    let mut out = Vec::with_capacity(inst.len());
    for ((obs, q), q_inv) in inst.observations().iter().zip(&weights.q).zip(&weights.q_inv) {
        let ai = cross_matrix(&pose.attitude.rotate(&obs.r_tilde));
        let c = (obs.noise.r_rb.transpose() * a.transpose() - obs.noise.r_b) * q_inv;
        let d = (obs.noise.r_r * a.transpose() - obs.noise.r_rb) * q_inv;
        // 𝒢ᵢ P_f 𝒢ᵢᵀ with 𝒢ᵢ = [𝒜ᵢ  −I]
        let p11 = p_f.fixed_view::<3, 3>(0, 0).into_owned();
        let p12 = p_f.fixed_view::<3, 3>(0, 3).into_owned();
        let p22 = p_f.fixed_view::<3, 3>(3, 3).into_owned();
        let gpg = ai * p11 * ai.transpose() - ai * p12 - p12.transpose() * ai.transpose() + p22;
        let inner = symmetrize3(&(q - gpg));
        let cov_res_b = symmetrize3(&(c * inner * c.transpose()));
        let cov_res_r = symmetrize3(&(d * inner * d.transpose()));
        let p_b = symmetrize3(&(obs.noise.r_b - cov_res_b));
        let p_r = symmetrize3(&(obs.noise.r_r - cov_res_r));
        out.push(ObservationTerms { c, d, cov_res_b, cov_res_r, p_b, p_r });
    }
    Ok(out)
}

/// Full analytic report at a solved pose.
pub fn analyze(inst: &ProblemInstance, pose: &Pose) -> Result<AnalyticsReport> {
    let weights = instance_weights(&pose.attitude, inst)?;
    let s = compute_s_lambda(&weights.q)?;
    let mut sum_qinv_ai = Mat3::zeros();
    let mut h = Mat3::zeros();
    for (obs, q_inv) in inst.observations().iter().zip(&weights.q_inv) {
        let ai = cross_matrix(&pose.attitude.rotate(&obs.r_tilde));
        h += ai.transpose() * q_inv * ai;
        sum_qinv_ai += q_inv * ai;
    }
    h -= sum_qinv_ai.transpose() * s * sum_qinv_ai;
    let h = symmetrize3(&h);

    let p_delta_alpha = attitude_covariance(&h)?;
    let a_bar = s * sum_qinv_ai;
    let cov_p = translation_covariance(&s, &a_bar, &p_delta_alpha);
    let fim_matrix = fim(inst, &pose.attitude)?;
    let p_f = joint_covariance(inst, &pose.attitude)?;

    let estimates = estimate_observations(inst, pose)?;
    let terms = per_observation_terms(inst, pose, &p_f)?;
    let per_observation = estimates
        .into_iter()
        .zip(terms)
        .map(|((b_hat, r_hat), t)| PerObservation {
            b_hat,
            r_hat,
            cov_res_b: t.cov_res_b,
            cov_res_r: t.cov_res_r,
            p_b: t.p_b,
            p_r: t.p_r,
            c: t.c,
            d: t.d,
        })
        .collect();

    Ok(AnalyticsReport { p_delta_alpha, cov_p, p_f, a_bar, fim: fim_matrix, per_observation })
}

/// Rank of the unit-weight attitude profile matrix, the smallest eigenvalue
/// of `𝓗` at the initialization attitude, and the near-null direction when
/// `𝓗` is numerically singular. Diagnostic only; never fails.
pub fn observability_check(inst: &ProblemInstance) -> ObservabilityDiagnosis {
    if inst.is_empty() {
        return ObservabilityDiagnosis {
            rank_of_b: 0,
            smallest_h_eigenvalue: f64::NAN,
            null_direction: None,
        };
    }
    let pairs: Vec<(Vec3, Vec3)> = inst
        .observations()
        .iter()
        .map(|o| (o.r_tilde, o.b_tilde))
        .collect();
    let unit = vec![1.0; pairs.len()];
    let (b, _, _) = attitude_profile_matrix(&pairs, &unit);
    let rank_of_b = profile_rank(&b);
    let attitude = svd_attitude(&b);

    let Ok(weights) = instance_weights(&attitude, inst) else {
        return ObservabilityDiagnosis { rank_of_b, smallest_h_eigenvalue: f64::NAN, null_direction: None };
    };
    let Ok(s) = compute_s_lambda(&weights.q) else {
        return ObservabilityDiagnosis { rank_of_b, smallest_h_eigenvalue: f64::NAN, null_direction: None };
    };
    let mut h = Mat3::zeros();
    let mut sum_qinv_ai = Mat3::zeros();
    for (obs, q_inv) in inst.observations().iter().zip(&weights.q_inv) {
        let ai = cross_matrix(&attitude.rotate(&obs.r_tilde));
        h += ai.transpose() * q_inv * ai;
        sum_qinv_ai += q_inv * ai;
    }
    h -= sum_qinv_ai.transpose() * s * sum_qinv_ai;
    let eig = symmetrize3(&h).symmetric_eigen();
    let min = eig.eigenvalues.min();
    let max = eig.eigenvalues.amax();
    let null_direction = if !(min > 0.0) || (max > 0.0 && min / max < 1e-9) {
        Some(eig.eigenvectors.column(eig.eigenvalues.imin()).into_owned())
    } else {
        None
    };
    ObservabilityDiagnosis { rank_of_b, smallest_h_eigenvalue: min, null_direction }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{NoiseModel, ObservationPair};
    use crate::montecarlo::demo_instance;
    use crate::solver::compute_q_lambda;
    use approx::assert_relative_eq;

    #[test]
    fn attitude_covariance_identity() {
        assert_eq!(attitude_covariance(&Mat3::identity()).unwrap(), Mat3::identity());
    }

    #[test]
    fn attitude_covariance_rejects_singular() {
        let h = Mat3::from_diagonal(&Vec3::new(1.0, 1.0, 0.0));
        assert!(matches!(attitude_covariance(&h), Err(Error::Observability { .. })));
    }

    #[test]
    fn translation_covariance_reduces_to_s_lambda_for_zero_a_bar() {
        let s = Mat3::from_diagonal(&Vec3::new(1.0, 2.0, 3.0));
        let cov = translation_covariance(&s, &Mat3::zeros(), &Mat3::identity());
        assert_eq!(cov, s);
    }

    #[test]
    fn joint_covariance_blocks_match_marginals() {
        let (truth, inst) = demo_instance();
        let report = analyze(&inst, &truth).unwrap();
        let p11 = report.p_f.fixed_view::<3, 3>(0, 0).into_owned();
        let p22 = report.p_f.fixed_view::<3, 3>(3, 3).into_owned();
        assert_relative_eq!(p11, report.p_delta_alpha, epsilon = 1e-10 * report.p_delta_alpha.norm());
        assert_relative_eq!(p22, report.cov_p, epsilon = 1e-10 * report.cov_p.norm());
    }

    #[test]
    fn joint_covariance_inverts_fim() {
        let (truth, inst) = demo_instance();
        let f = fim(&inst, &truth.attitude).unwrap();
        let p = joint_covariance(&inst, &truth.attitude).unwrap();
        assert_relative_eq!(f * p, Mat6::identity(), epsilon = 1e-10);
    }

    #[test]
    fn joint_covariance_two_observations_singular() {
        let (_, inst) = demo_instance();
        let two = crate::model::ProblemInstance::new(inst.observations()[..2].to_vec());
        assert!(matches!(
            joint_covariance(&two, &RotationMatrix::identity()),
            Err(Error::Observability { .. })
        ));
    }

    #[test]
    fn estimates_are_unchanged_at_zero_residual() {
        let (truth, inst) = demo_instance();
        // noiseless instance: residuals vanish at the truth pose
        let est = estimate_observations(&inst, &truth).unwrap();
        for (obs, (b_hat, r_hat)) in inst.observations().iter().zip(&est) {
            assert_relative_eq!(*b_hat, obs.b_tilde, epsilon = 1e-14);
            assert_relative_eq!(*r_hat, obs.r_tilde, epsilon = 1e-14);
        }
    }

    #[test]
    fn estimates_satisfy_the_pose_constraint() {
        use crate::montecarlo::sample_noise;
        use crate::solver::{solve_pose, SolverConfig};
        use rand::SeedableRng;
        let (_, inst) = demo_instance();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(21);
        let obs: Vec<ObservationPair> = inst
            .observations()
            .iter()
            .map(|o| {
                let (dr, db) = sample_noise(&o.noise, &mut rng).unwrap();
                ObservationPair { r_tilde: o.r_tilde + dr, b_tilde: o.b_tilde + db, noise: o.noise }
            })
            .collect();
        let noisy = crate::model::ProblemInstance::new(obs);
        let sol = solve_pose(&noisy, &SolverConfig::default()).unwrap();
        for (b_hat, r_hat) in estimate_observations(&noisy, &sol.pose).unwrap() {
            let lhs = b_hat;
            let rhs = sol.pose.attitude.rotate(&r_hat) - sol.pose.translation;
            assert_relative_eq!(lhs, rhs, epsilon = 1e-10);
        }
    }

    #[test]
    fn isotropic_estimates_reduce_to_fractional_corrections() {
        let (sr, sb) = (1.5e-3, 0.8e-3);
        let noise = NoiseModel::isotropic(sr, sb);
        let rs = [
            Vec3::new(1.0, 0.0, 0.2),
            Vec3::new(-0.4, 1.3, 0.5),
            Vec3::new(0.6, -0.7, 1.1),
        ];
        let pose = Pose {
            attitude: RotationMatrix::from_axis_angle(&Vec3::new(0.2, 0.5, -1.0), 0.8),
            translation: Vec3::new(0.1, -0.3, 0.25),
        };
        // small inconsistencies so the residuals are nonzero
        let obs: Vec<ObservationPair> = rs
            .iter()
            .enumerate()
            .map(|(i, r)| ObservationPair {
                r_tilde: *r,
                b_tilde: pose.attitude.rotate(r) - pose.translation
                    + Vec3::new(1e-4, -2e-4, 3e-4) * (i as f64 + 1.0),
                noise,
            })
            .collect();
        let inst = crate::model::ProblemInstance::new(obs);
        let est = estimate_observations(&inst, &pose).unwrap();
        let frac_b = sb * sb / (sb * sb + sr * sr);
        let frac_r = sr * sr / (sb * sb + sr * sr);
        for (obs, (b_hat, r_hat)) in inst.observations().iter().zip(&est) {
            let e = obs.b_tilde - pose.attitude.rotate(&obs.r_tilde) + pose.translation;
            assert_relative_eq!(*b_hat, obs.b_tilde - e * frac_b, epsilon = 1e-12);
            assert_relative_eq!(
                *r_hat,
                obs.r_tilde + pose.attitude.inverse().rotate(&e) * frac_r,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn residual_inner_matrix_is_psd() {
        let (truth, inst) = demo_instance();
        let p_f = joint_covariance(&inst, &truth.attitude).unwrap();
        for (i, obs) in inst.observations().iter().enumerate() {
            let q = compute_q_lambda(&truth.attitude, &obs.noise);
            let ai = cross_matrix(&truth.attitude.rotate(&obs.r_tilde));
            let p11 = p_f.fixed_view::<3, 3>(0, 0).into_owned();
            let p12 = p_f.fixed_view::<3, 3>(0, 3).into_owned();
            let p22 = p_f.fixed_view::<3, 3>(3, 3).into_owned();
            let gpg =
                ai * p11 * ai.transpose() - ai * p12 - p12.transpose() * ai.transpose() + p22;
            let inner = symmetrize3(&(q - gpg));
            let min = inner.symmetric_eigen().eigenvalues.min();
            assert!(min >= -1e-12 * inner.trace(), "obs {i}: min eigenvalue {min}");
        }
    }

    #[test]
    fn covariances_are_symmetric_psd() {
        let (truth, inst) = demo_instance();
        let report = analyze(&inst, &truth).unwrap();
        let check3 = |m: &Mat3, what: &str| {
            assert!((m - m.transpose()).norm() <= 1e-10 * (1.0 + m.norm()), "{what} asymmetric");
            let min = m.symmetric_eigen().eigenvalues.min();
            assert!(min >= -1e-12 * m.trace().abs().max(1e-300), "{what} min eig {min}");
        };
        check3(&report.p_delta_alpha, "P_delta_alpha");
        check3(&report.cov_p, "cov_p");
        for (i, per) in report.per_observation.iter().enumerate() {
            check3(&per.cov_res_b, &format!("cov_res_b[{i}]"));
            check3(&per.cov_res_r, &format!("cov_res_r[{i}]"));
            check3(&per.p_b, &format!("p_b[{i}]"));
            check3(&per.p_r, &format!("p_r[{i}]"));
        }
        assert!((report.p_f - report.p_f.transpose()).norm() <= 1e-10);
        assert!((report.fim - report.fim.transpose()).norm() <= 1e-10 * report.fim.norm());
    }

    #[test]
    fn observability_demo_instance_is_observable() {
        // three centered observation pairs always leave rank(B) ≤ 2; the
        // observability requirement is rank ≥ 2 with an SPD normal matrix
        let (_, inst) = demo_instance();
        let diag = observability_check(&inst);
        assert_eq!(diag.rank_of_b, 2);
        assert!(diag.smallest_h_eigenvalue > 0.0);
        assert!(diag.null_direction.is_none());
    }

    #[test]
    fn observability_four_generic_observations_reach_rank_three() {
        let noise = NoiseModel::isotropic(1e-3, 1e-3);
        let pose = Pose {
            attitude: RotationMatrix::from_axis_angle(&Vec3::new(0.1, 0.9, -0.3), 0.5),
            translation: Vec3::new(0.3, 0.1, -0.2),
        };
        let rs = [
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
            Vec3::new(1.0, 1.0, 1.0),
        ];
        let obs: Vec<ObservationPair> = rs
            .iter()
            .map(|r| ObservationPair {
                r_tilde: *r,
                b_tilde: pose.attitude.rotate(r) - pose.translation,
                noise,
            })
            .collect();
        let diag = observability_check(&crate::model::ProblemInstance::new(obs));
        assert_eq!(diag.rank_of_b, 3);
        assert!(diag.null_direction.is_none());
    }

    #[test]
    fn observability_two_observations_rank_one_with_null_direction() {
        let (truth, inst) = demo_instance();
        let two = crate::model::ProblemInstance::new(inst.observations()[..2].to_vec());
        let diag = observability_check(&two);
        assert_eq!(diag.rank_of_b, 1);
        let dir = diag.null_direction.expect("singular H must report a direction");
        let expected = truth
            .attitude
            .rotate(&(two.observations()[0].r_tilde - two.observations()[1].r_tilde));
        assert!(dir.normalize().dot(&expected.normalize()).abs() >= (1e-8f64).cos());
    }

    #[test]
    fn observability_identical_references_rank_zero() {
        let noise = NoiseModel::isotropic(1e-3, 1e-3);
        let obs: Vec<ObservationPair> = (0..3)
            .map(|_| ObservationPair {
                r_tilde: Vec3::new(1.0, 2.0, 3.0),
                b_tilde: Vec3::new(1.0, 2.0, 3.0),
                noise,
            })
            .collect();
        let diag = observability_check(&crate::model::ProblemInstance::new(obs));
        assert_eq!(diag.rank_of_b, 0);
    }
}
