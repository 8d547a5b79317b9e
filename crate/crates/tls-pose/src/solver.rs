//! Total least squares pose solvers.
//!
//! The general solver minimizes
//!
//! ```text
//! J(Â, p̂) = ½ Σᵢ (b̃ᵢ − Â r̃ᵢ + p̂)ᵀ Q_λᵢ(Â)⁻¹ (b̃ᵢ − Â r̃ᵢ + p̂)
//! Q_λᵢ(Â) = Â R_rᵢ Âᵀ − Â R_rbᵢ − R_rbᵢᵀ Âᵀ + R_bᵢ
//! ```
//!
//! by block-coordinate Gauss–Newton: the translation has a closed-form
//! optimum for a fixed attitude, and the attitude is updated on SO(3) by
//! `Â ← exp(−[δα×]) Â` with `δα = −𝓗⁻¹ g`. The gradient `g` is exact for
//! the attitude-only cost, including the sensitivity of the weight `Q_λᵢ`
//! to the attitude; `𝓗` is the Gauss–Newton normal matrix, which is also
//! the inverse attitude error-covariance reported by the analytics module.
//!
//! For isotropic noise (`R_rᵢ = σ_rᵢ² I`, `R_bᵢ = σ_bᵢ² I`, no cross terms)
//! the weight collapses to `(σ_rᵢ² + σ_bᵢ²) I` for every attitude and the
//! minimizer has the closed form of a weighted orthogonal Procrustes
//! problem; [`solve_isotropic`] computes it from one SVD.


use crate::geometry::{
    cross_matrix, small_rotation_update, symmetrize3, Mat3, RotationMatrix, Vec3,
};
use crate::model::{validate_instance, NoiseModel, Pose, ProblemInstance};
use crate::{Error, Result};

/// Condition-estimate ceiling for symmetric solves; beyond it the system is
/// reported as unobservable or ill-conditioned instead of being solved.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Attitude initialization for [`solve_pose`].
#[derive(Debug, Clone, PartialEq)]
pub enum Initialization {
    /// Closed-form SVD solve with unit weights (σᵢ = 1). Rotation-global.
    UnitWeightSvd,
    /// Start from a caller-provided pose.
    Provided(Pose),
}

/// Iteration controls for [`solve_pose`].
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub max_iterations: usize,
    /// Declares convergence once the accepted attitude step satisfies
    /// `|δα| <` this bound (radians) together with the translation bound.
    pub step_tolerance_rad: f64,
    /// Translation step bound (meters) paired with `step_tolerance_rad`.
    pub step_tolerance_m: f64,
    /// Stops iterating when the relative cost decrease falls below this;
    /// the `converged` flag still requires the step bounds to hold.
    pub cost_tolerance: f64,
    pub initialization: Initialization,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            step_tolerance_rad: 1e-10,
            step_tolerance_m: 1e-10,
            cost_tolerance: 1e-12,
            initialization: Initialization::UnitWeightSvd,
        }
    }
}

/// One accepted iteration of the Gauss–Newton loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    /// `|δα|` of the accepted attitude step (radians).
    pub rotation_step: f64,
    /// `|p̂ₖ₊₁ − p̂ₖ|` (meters).
    pub translation_step: f64,
    /// Cost after the step.
    pub cost: f64,
}

/// Solver output: the estimated pose plus convergence metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseSolution {
    pub pose: Pose,
    pub final_cost: f64,
    pub iterations: usize,
    pub converged: bool,
    pub steps: Vec<IterationRecord>,
}

/// The attitude-dependent weight
/// `Q_λᵢ = A R_rᵢ Aᵀ − A R_rbᵢ − R_rbᵢᵀ Aᵀ + R_bᵢ`, symmetrized.
///
/// For a positive definite `Rᵢ` the result is positive definite for every
/// attitude (`Q_λᵢ = M Rᵢ Mᵀ` with the full-row-rank `M = [−A  I]`); a
/// non-SPD result downstream therefore signals an invalid noise model.
pub fn compute_q_lambda(attitude: &RotationMatrix, noise: &NoiseModel) -> Mat3 {
    let a = attitude.matrix();
    let q = a * noise.r_r * a.transpose() - a * noise.r_rb - noise.r_rb.transpose() * a.transpose()
        + noise.r_b;
    symmetrize3(&q)
}

/// `S_λ = (Σᵢ Q_λᵢ⁻¹)⁻¹`, the information-weighted translation covariance
/// core. Fails with [`Error::NonSpdWeight`] if any `Q` has no Cholesky
/// factor.
pub fn compute_s_lambda(q_list: &[Mat3]) -> Result<Mat3> {
    let mut sum = Mat3::zeros();
    for (index, q) in q_list.iter().enumerate() {
        sum += spd_inverse(q).ok_or(Error::NonSpdWeight { index })?;
    }
    // sum of SPD inverses is SPD; a failure here means the inputs were not
    let inv = spd_inverse(&sum).ok_or(Error::IllConditioned { condition: f64::INFINITY })?;
    Ok(symmetrize3(&inv))
}

/// Optimal translation for a fixed attitude:
/// `p̂ = −S_λ Σᵢ Q_λᵢ⁻¹ (b̃ᵢ − A r̃ᵢ)`.
pub fn solve_translation(
    attitude: &RotationMatrix,
    inst: &ProblemInstance,
    q_list: &[Mat3],
) -> Result<Vec3> {
    let s = compute_s_lambda(q_list)?;
    let mut acc = Vec3::zeros();
    for (index, (obs, q)) in inst.observations().iter().zip(q_list).enumerate() {
        let d = obs.b_tilde - attitude.rotate(&obs.r_tilde);
        let chol = q.cholesky().ok_or(Error::NonSpdWeight { index })?;
        acc += chol.solve(&d);
    }
    Ok(-s * acc)
}

/// One attitude update of the Gauss–Newton loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussNewtonStep {
    /// Proposed step `δα = −𝓗⁻¹ g`.
    pub delta_alpha: Vec3,
    /// Gradient of the attitude-only cost at the current attitude.
    pub gradient: Vec3,
    /// Gauss–Newton normal matrix `𝓗` (symmetric positive definite for an
    /// observable instance).
    pub hessian: Mat3,
}

/// Computes the gradient `g`, the normal matrix `𝓗`, and the step
/// `δα = −𝓗⁻¹ g` at the given attitude, with residuals
/// `eᵢ = b̃ᵢ − A r̃ᵢ + p` taken at the supplied translation.
///
/// `g = Σᵢ 𝒜ᵢ Q_λᵢ⁻¹ eᵢ + Σᵢ (K₁ᵢ wᵢ) × wᵢ` where `𝒜ᵢ = [A r̃ᵢ×]`,
/// `wᵢ = Q_λᵢ⁻¹ eᵢ` and `K₁ᵢ = A R_rᵢ Aᵀ − A R_rbᵢ`. The second sum is the
/// exact sensitivity of the cost to the attitude through the weight
/// `Q_λᵢ(A)`; it vanishes at zero residual and for isotropic noise, and it
/// makes the converged iterate a true stationary point of the cost (checked
/// against central differences in the test suite).
///
/// `𝓗 = Σᵢ 𝒜ᵢᵀ Q_λᵢ⁻¹ 𝒜ᵢ − (Σᵢ Q_λᵢ⁻¹ 𝒜ᵢ)ᵀ S_λ (Σᵢ Q_λᵢ⁻¹ 𝒜ᵢ)`.
///
/// Fails with [`Error::Observability`] when `𝓗` is singular (for two
/// observations its null direction is `A(r̃₁ − r̃₂)`).
pub fn gauss_newton_step(
    attitude: &RotationMatrix,
    translation: &Vec3,
    inst: &ProblemInstance,
) -> Result<GaussNewtonStep> {
    let weights = instance_weights(attitude, inst)?;
    let s = compute_s_lambda(&weights.q)?;

    let a = attitude.matrix();
    let mut gradient = Vec3::zeros();
    let mut h = Mat3::zeros();
    let mut sum_qinv_ai = Mat3::zeros();
    for (obs, q_inv) in inst.observations().iter().zip(&weights.q_inv) {
        let ai = cross_matrix(&attitude.rotate(&obs.r_tilde));
        let e = obs.b_tilde - attitude.rotate(&obs.r_tilde) + translation;
        let w = q_inv * e;
        gradient += ai * w;
        // weight-sensitivity term from dQ_λᵢ/dδα
        let k1 = a * obs.noise.r_r * a.transpose() - a * obs.noise.r_rb;
        gradient += (k1 * w).cross(&w);
        h += ai.transpose() * q_inv * ai;
        sum_qinv_ai += q_inv * ai;
    }
    h -= sum_qinv_ai.transpose() * s * sum_qinv_ai;
    let h = symmetrize3(&h);

    let delta_alpha = -solve_spd_checked(&h, &gradient)?;
    Ok(GaussNewtonStep { delta_alpha, gradient, hessian: h })
}

/// Solves the general anisotropic, correlated TLS pose problem.
///
/// Iterates: recompute `Q_λᵢ` at the current attitude, take the closed-form
/// translation, apply the Gauss–Newton attitude step with step-halving (up
/// to 10 halvings) whenever a step would increase the cost, and stop once
/// both step norms fall below their tolerances. The attitude stays a valid
/// rotation throughout.
///
/// Returns `converged = false` (with the best iterate) when the iteration
/// budget is exhausted or a step cannot decrease the cost;
/// [`Error::Observability`] / [`Error::NonSpdWeight`] report unusable
/// instances.
pub fn solve_pose(inst: &ProblemInstance, config: &SolverConfig) -> Result<PoseSolution> {
    let report = validate_instance(inst);
    if let Some(index) = report.first_non_spd_index() {
        return Err(Error::NonSpdWeight { index });
    }
    if report.has_observability_violation() {
        return Err(Error::Observability { null_direction: observability_null_direction(inst) });
    }

    let mut attitude = match &config.initialization {
        Initialization::UnitWeightSvd => {
            let pairs: Vec<(Vec3, Vec3)> = inst
                .observations()
                .iter()
                .map(|o| (o.r_tilde, o.b_tilde))
                .collect();
            let weights = vec![1.0; pairs.len()];
            wahba_svd(&pairs, &weights)?.0
        }
        Initialization::Provided(pose) => pose.attitude,
    };
    let mut translation = {
        let q = instance_weights(&attitude, inst)?.q;
        solve_translation(&attitude, inst, &q)?
    };
    let mut cost = instance_cost(&attitude, &translation, inst)?;
    let mut steps = Vec::new();
    let mut converged = false;
    let mut stalled = 0usize;

    let mut iterations = 0;
    while iterations < config.max_iterations {
        iterations += 1;
        let step = gauss_newton_step(&attitude, &translation, inst)?;
        let tiny = step.delta_alpha.norm() < config.step_tolerance_rad;

        // step halving: accept the first candidate that does not increase the
        // cost. A proposal already below the step tolerance is not halved —
        // at the cost floor the decrease is beneath float resolution and
        // standing still is the fixed point.
        let mut delta = step.delta_alpha;
        let mut accepted = None;
        let trials = if tiny { 1 } else { 11 };
        for _ in 0..trials {
            let cand_attitude = small_rotation_update(&delta, &attitude);
            let q = instance_weights(&cand_attitude, inst)?.q;
            let cand_translation = solve_translation(&cand_attitude, inst, &q)?;
            let cand_cost = instance_cost(&cand_attitude, &cand_translation, inst)?;
            if cand_cost <= cost {
                accepted = Some((cand_attitude, cand_translation, cand_cost, delta));
                break;
            }
            delta *= 0.5;
        }

        let record = match accepted {
            Some((new_attitude, new_translation, new_cost, delta)) => {
                let record = IterationRecord {
                    rotation_step: delta.norm(),
                    translation_step: (new_translation - translation).norm(),
                    cost: new_cost,
                };
                let cost_drop = cost - new_cost;
                attitude = new_attitude;
                translation = new_translation;
                cost = new_cost;
                if cost_drop <= config.cost_tolerance * (1.0 + cost.abs()) {
                    stalled += 1;
                } else {
                    stalled = 0;
                }
                record
            }
            None if tiny => {
                stalled += 1;
                IterationRecord { rotation_step: 0.0, translation_step: 0.0, cost }
            }
            // no decrease possible at the smallest trial step
            None => break,
        };
        steps.push(record);

        if record.rotation_step < config.step_tolerance_rad
            && record.translation_step < config.step_tolerance_m
        {
            converged = true;
            break;
        }
        if stalled >= 2 {
            // the cost stopped improving while the steps stayed large
            break;
        }
    }

    Ok(PoseSolution {
        pose: Pose { attitude, translation },
        final_cost: cost,
        iterations,
        converged,
        steps,
    })
}

/// Closed-form solve for isotropic noise with per-observation standard
/// deviations `σ_rᵢ`, `σ_bᵢ`.
///
/// Builds the weighted attitude profile matrix
/// `B = Σᵢ σᵢ⁻² (b̃ᵢ − b̄)(r̃ᵢ − r̄)ᵀ` (σᵢ² = σ_rᵢ² + σ_bᵢ², weighted means),
/// takes `Â = U diag(1, 1, det U · det V) Vᵀ` from its SVD so the estimate
/// stays a proper rotation, and recovers `p̂ = Â r̄ − b̄`. No iteration.
///
/// Fails with [`Error::RankDeficientB`] when `rank(B) < 2` (two observations
/// always produce a rank-1 `B`).
pub fn solve_isotropic(
    inst: &ProblemInstance,
    sigmas_r: &[f64],
    sigmas_b: &[f64],
) -> Result<PoseSolution> {
    let n = inst.len();
    assert_eq!(sigmas_r.len(), n, "one sigma_r per observation");
    assert_eq!(sigmas_b.len(), n, "one sigma_b per observation");
    let weights: Vec<f64> = sigmas_r
        .iter()
        .zip(sigmas_b)
        .map(|(sr, sb)| 1.0 / (sr * sr + sb * sb))
        .collect();
    let pairs: Vec<(Vec3, Vec3)> = inst
        .observations()
        .iter()
        .map(|o| (o.r_tilde, o.b_tilde))
        .collect();
    let (attitude, r_bar, b_bar) = wahba_svd(&pairs, &weights)?;
    let translation = attitude.rotate(&r_bar) - b_bar;

    let q_list: Vec<Mat3> = weights.iter().map(|w| Mat3::identity() / *w).collect();
    let mut cost = 0.0;
    for (obs, q) in inst.observations().iter().zip(&q_list) {
        let e = obs.b_tilde - attitude.rotate(&obs.r_tilde) + translation;
        let w = q.cholesky().expect("isotropic weight is SPD").solve(&e);
        cost += 0.5 * e.dot(&w);
    }

    Ok(PoseSolution {
        pose: Pose { attitude, translation },
        final_cost: cost,
        iterations: 0,
        converged: true,
        steps: Vec::new(),
    })
}

/// The cost `J(A, p)` of the objective with weights recomputed at `A`.
pub(crate) fn instance_cost(
    attitude: &RotationMatrix,
    translation: &Vec3,
    inst: &ProblemInstance,
) -> Result<f64> {
    let mut cost = 0.0;
    for (index, obs) in inst.observations().iter().enumerate() {
        let q = compute_q_lambda(attitude, &obs.noise);
        let e = obs.b_tilde - attitude.rotate(&obs.r_tilde) + translation;
        let chol = q.cholesky().ok_or(Error::NonSpdWeight { index })?;
        cost += 0.5 * e.dot(&chol.solve(&e));
    }
    Ok(cost)
}

pub(crate) struct InstanceWeights {
    pub q: Vec<Mat3>,
    pub q_inv: Vec<Mat3>,
}

pub(crate) fn instance_weights(
    attitude: &RotationMatrix,
    inst: &ProblemInstance,
) -> Result<InstanceWeights> {
    let mut q = Vec::with_capacity(inst.len());
    let mut q_inv = Vec::with_capacity(inst.len());
    for (index, obs) in inst.observations().iter().enumerate() {
        let qi = compute_q_lambda(attitude, &obs.noise);
        let inv = spd_inverse(&qi).ok_or(Error::NonSpdWeight { index })?;
        q.push(qi);
        q_inv.push(symmetrize3(&inv));
    }
    Ok(InstanceWeights { q, q_inv })
}

fn spd_inverse(m: &Mat3) -> Option<Mat3> {
    m.cholesky().map(|c| c.inverse())
}

/// Symmetric solve with a condition estimate; reports observability loss
/// (with the near-null direction) instead of returning garbage.
fn solve_spd_checked(m: &Mat3, rhs: &Vec3) -> Result<Vec3> {
    let eig = m.symmetric_eigen();
    let max = eig.eigenvalues.amax();
    let min = eig.eigenvalues.min();
    if !(min > 0.0) || max / min > CONDITION_LIMIT {
        let k = eig.eigenvalues.imin();
        let dir = eig.eigenvectors.column(k).into_owned();
        return Err(Error::Observability { null_direction: Some(dir) });
    }
    let chol = m.cholesky().ok_or(Error::Observability { null_direction: None })?;
    Ok(chol.solve(rhs))
}

/// Weighted orthogonal-Procrustes attitude from the SVD of the profile
/// matrix; also returns the weighted means of the reference and body
/// vectors. Shared by the isotropic solver and the unit-weight
/// initialization.
pub(crate) fn wahba_svd(
    pairs: &[(Vec3, Vec3)],
    weights: &[f64],
) -> Result<(RotationMatrix, Vec3, Vec3)> {
    let (b, r_bar, b_bar) = attitude_profile_matrix(pairs, weights);
    let rank = profile_rank(&b);
    if rank < 2 {
        return Err(Error::RankDeficientB { rank });
    }
    Ok((svd_attitude(&b), r_bar, b_bar))
}

/// `B = Σᵢ wᵢ (b̃ᵢ − b̄)(r̃ᵢ − r̄)ᵀ` with weighted means `b̄`, `r̄`.
pub(crate) fn attitude_profile_matrix(
    pairs: &[(Vec3, Vec3)],
    weights: &[f64],
) -> (Mat3, Vec3, Vec3) {
    let wsum: f64 = weights.iter().sum();
    let mut r_bar = Vec3::zeros();
    let mut b_bar = Vec3::zeros();
    for ((r, bv), w) in pairs.iter().zip(weights) {
        r_bar += r * *w;
        b_bar += bv * *w;
    }
    r_bar /= wsum;
    b_bar /= wsum;
    let mut b = Mat3::zeros();
    for ((r, bv), w) in pairs.iter().zip(weights) {
        b += (bv - b_bar) * (r - r_bar).transpose() * *w;
    }
    (b, r_bar, b_bar)
}

/// Rank of the profile matrix at the relative singular-value threshold 1e-9.
pub(crate) fn profile_rank(b: &Mat3) -> usize {
    let sv = b.svd(false, false).singular_values;
    if sv[0] <= 0.0 {
        return 0;
    }
    sv.iter().filter(|s| **s > 1e-9 * sv[0]).count()
}

/// `Â = U diag(1, 1, det U · det V) Vᵀ`; defined (though not unique) even for
/// a rank-deficient profile matrix, which the observability diagnostics use.
pub(crate) fn svd_attitude(b: &Mat3) -> RotationMatrix {
    if b.norm() == 0.0 {
        return RotationMatrix::identity();
    }
    let svd = b.svd(true, true);
    let u = svd.u.expect("3x3 SVD");
    let vt = svd.v_t.expect("3x3 SVD");
    let d = u.determinant() * vt.determinant();
    let m = u * Mat3::from_diagonal(&Vec3::new(1.0, 1.0, d)) * vt;
    RotationMatrix::new(crate::geometry::polar_project(&m))
        .expect("SVD attitude is a proper rotation")
}

/// Null direction reported for unobservable instances: the smallest
/// eigenvector of `𝓗` evaluated at the rank-agnostic SVD attitude. For two
/// observations this is `A(r̃₁ − r̃₂)` exactly, for any weights.
pub(crate) fn observability_null_direction(inst: &ProblemInstance) -> Option<Vec3> {
    if inst.len() < 2 {
        return None;
    }
    let pairs: Vec<(Vec3, Vec3)> = inst
        .observations()
        .iter()
        .map(|o| (o.r_tilde, o.b_tilde))
        .collect();
    let weights = vec![1.0; pairs.len()];
    let (b, _, _) = attitude_profile_matrix(&pairs, &weights);
    let attitude = svd_attitude(&b);
    let weights = instance_weights(&attitude, inst).ok()?;
    let s = compute_s_lambda(&weights.q).ok()?;
    let mut h = Mat3::zeros();
    let mut sum_qinv_ai = Mat3::zeros();
    for (obs, q_inv) in inst.observations().iter().zip(&weights.q_inv) {
        let ai = cross_matrix(&attitude.rotate(&obs.r_tilde));
        h += ai.transpose() * q_inv * ai;
        sum_qinv_ai += q_inv * ai;
    }
    h -= sum_qinv_ai.transpose() * s * sum_qinv_ai;
    let eig = symmetrize3(&h).symmetric_eigen();
    let k = eig.eigenvalues.imin();
    Some(eig.eigenvectors.column(k).into_owned())
}


#[cfg(test)]
mod debug_tests {
    use super::*;
    use crate::model::ObservationPair;
    use crate::montecarlo::{demo_instance, sample_noise};
    use rand::SeedableRng;

    #[test]
    fn debug_step_history() {
        let (_, inst) = demo_instance();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(11);
        let obs: Vec<ObservationPair> = inst
            .observations()
            .iter()
            .map(|o| {
                let (dr, db) = sample_noise(&o.noise, &mut rng).unwrap();
                ObservationPair { r_tilde: o.r_tilde + dr, b_tilde: o.b_tilde + db, noise: o.noise }
            })
            .collect();
        let noisy = ProblemInstance::new(obs);
        let sol = solve_pose(&noisy, &SolverConfig::default()).unwrap();
        eprintln!("converged={} iters={} final={:e}", sol.converged, sol.iterations, sol.final_cost);
        for (i, s) in sol.steps.iter().enumerate() {
            eprintln!("  step {i}: rot={:e} trans={:e} cost={:.17e}", s.rotation_step, s.translation_step, s.cost);
        }
    
    #[test]
    fn debug_endgame() {
        let (_, inst) = demo_instance();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(11);
        let obs: Vec<ObservationPair> = inst
            .observations()
            .iter()
            .map(|o| {
                let (dr, db) = sample_noise(&o.noise, &mut rng).unwrap();
                ObservationPair { r_tilde: o.r_tilde + dr, b_tilde: o.b_tilde + db, noise: o.noise }
            })
            .collect();
        let noisy = ProblemInstance::new(obs);
        let sol = solve_pose(&noisy, &SolverConfig::default()).unwrap();
        let a = sol.pose.attitude;
        let p = sol.pose.translation;
        let step = gauss_newton_step(&a, &p, &noisy).unwrap();
        eprintln!("gradient = {:?} |g|={:e}", step.gradient, step.gradient.norm());
        eprintln!("proposal |da| = {:e}", step.delta_alpha.norm());
        let c0 = instance_cost(&a, &p, &noisy).unwrap();
        eprintln!("cost at iterate = {:.17e}", c0);
        let mut d = step.delta_alpha;
        for k in 0..11 {
            let ca = small_rotation_update(&d, &a);
            let q = instance_weights(&ca, &noisy).unwrap().q;
            let cp = solve_translation(&ca, &noisy, &q).unwrap();
            let cc = instance_cost(&ca, &cp, &noisy).unwrap();
            eprintln!("halving {k}: |d|={:e} cost={:.17e} drop={:e}", d.norm(), cc, c0 - cc);
            d *= 0.5;
        }
    }
}
}
