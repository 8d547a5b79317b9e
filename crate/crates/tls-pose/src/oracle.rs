//! Brute-force reference implementations used only to validate the solver
//! and the analytics — never in the production path.
//!
//! [`cost_direct`] evaluates the objective exactly as written, with the
//! weight recomputed at the supplied attitude. [`brute_force_minimize`] runs
//! a multi-start derivative-free simplex search over six local coordinates,
//! and the finite-difference routines probe the same cost, so any sign or
//! transpose mistake in the analytic gradient, normal matrix, or Fisher
//! information shows up as a disagreement.


use crate::geometry::{rotation_exp, symmetrize6, Mat6, RotationMatrix, Vec3, Vec6};
use crate::model::{Pose, ProblemInstance};
use crate::solver::compute_q_lambda;
use crate::{Error, Result};

/// Default central-difference step for the Hessian (radians / meters),
/// balancing truncation against roundoff at the noise scales used in the
/// tests.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Default step for the gradient. Stationarity checks need the smaller step:
/// the third-derivative truncation term scales with the normal matrix
/// (≈ 1e6–1e10 here), so 1e-5 would leave a visible false gradient at a
/// true optimum.
pub const DEFAULT_FD_GRADIENT_STEP: f64 = 1e-7;

/// The objective `J = ½ Σᵢ eᵢᵀ Q_λᵢ(A)⁻¹ eᵢ` with `eᵢ = b̃ᵢ − A r̃ᵢ + p`,
/// evaluated directly.
pub fn cost_direct(inst: &ProblemInstance, pose: &Pose) -> Result<f64> {
    let mut j = 0.0;
    for (index, obs) in inst.observations().iter().enumerate() {
        let q = compute_q_lambda(&pose.attitude, &obs.noise);
        let chol = q.cholesky().ok_or(Error::NonSpdWeight { index })?;
        let e = obs.b_tilde - pose.attitude.rotate(&obs.r_tilde) + pose.translation;
        j += 0.5 * e.dot(&chol.solve(&e));
    }
    Ok(j)
}

/// Derivative-free direct search: Nelder–Mead over the chart
/// `x ↦ (exp(−[x₀..₂×]) A₀, p₀ + x₃..₅)` from 8 deterministic attitude
/// starts (identity, ±axis quarter/half turns, one diagonal), restarted
/// twice with shrinking initial simplices. Returns the best pose found;
/// ties break toward the lowest start index.
pub fn brute_force_minimize(inst: &ProblemInstance) -> Pose {
    let starts: [Vec3; 8] = [
        Vec3::zeros(),
        Vec3::new(std::f64::consts::FRAC_PI_2, 0.0, 0.0),
        Vec3::new(0.0, std::f64::consts::FRAC_PI_2, 0.0),
        Vec3::new(0.0, 0.0, std::f64::consts::FRAC_PI_2),
        Vec3::new(std::f64::consts::PI, 0.0, 0.0),
        Vec3::new(0.0, std::f64::consts::PI, 0.0),
        Vec3::new(0.0, 0.0, std::f64::consts::PI),
        Vec3::new(1.0, 1.0, 1.0) * (2.0 * std::f64::consts::FRAC_PI_3 / 3.0_f64.sqrt()),
    ];
    let mut best: Option<(f64, Pose)> = None;
    for v in &starts {
        let a0 = RotationMatrix::new(rotation_exp(&-v)).expect("exponential is a rotation");
        // translation start from the mean residual at this attitude
        let n = inst.len() as f64;
        let p0 = -inst
            .observations()
            .iter()
            .map(|o| o.b_tilde - a0.rotate(&o.r_tilde))
            .fold(Vec3::zeros(), |acc, d| acc + d)
            / n;
        let cost = |x: &Vec6| {
            let pose = chart_pose(&a0, &p0, x);
            cost_direct(inst, &pose).unwrap_or(f64::INFINITY)
        };
        let mut x = Vec6::zeros();
        for h in [0.25, 1e-4, 1e-7] {
            x = nelder_mead(&cost, x, h);
        }
        let f = cost(&x);
        let better = match &best {
            None => true,
            Some((fb, _)) => f < *fb,
        };
        if better {
            best = Some((f, chart_pose(&a0, &p0, &x)));
        }
    }
    best.expect("at least one start").1
}

fn chart_pose(a0: &RotationMatrix, p0: &Vec3, x: &Vec6) -> Pose {
    let v = x.fixed_rows::<3>(0).into_owned();
    let attitude = crate::geometry::small_rotation_update(&v, a0);
    Pose { attitude, translation: p0 + x.fixed_rows::<3>(3).into_owned() }
}

/// Gradient of [`cost_direct`] by central differences over the six local
/// coordinates `(δα, δp)` at the given pose, with the default step.
pub fn finite_difference_gradient(inst: &ProblemInstance, pose: &Pose) -> Vec6 {
    finite_difference_gradient_with_step(inst, pose, DEFAULT_FD_GRADIENT_STEP)
}

pub fn finite_difference_gradient_with_step(
    inst: &ProblemInstance,
    pose: &Pose,
    step: f64,
) -> Vec6 {
    let f = |x: &Vec6| {
        let p = chart_pose(&pose.attitude, &pose.translation, x);
        cost_direct(inst, &p).expect("positive definite weights")
    };
    let mut g = Vec6::zeros();
    for k in 0..6 {
        let mut xp = Vec6::zeros();
        xp[k] = step;
        let mut xm = Vec6::zeros();
        xm[k] = -step;
        g[k] = (f(&xp) - f(&xm)) / (2.0 * step);
    }
    g
}

/// Hessian of [`cost_direct`] by central differences over the six local
/// coordinates, symmetrized. At a noiseless optimum it reproduces the
/// Fisher information matrix.
pub fn finite_difference_hessian(inst: &ProblemInstance, pose: &Pose) -> Mat6 {
    finite_difference_hessian_with_step(inst, pose, DEFAULT_FD_STEP)
}

pub fn finite_difference_hessian_with_step(
    inst: &ProblemInstance,
    pose: &Pose,
    step: f64,
) -> Mat6 {
    let f = |x: &Vec6| {
        let p = chart_pose(&pose.attitude, &pose.translation, x);
        cost_direct(inst, &p).expect("positive definite weights")
    };
    let f0 = f(&Vec6::zeros());
    let mut h = Mat6::zeros();
    for i in 0..6 {
        for j in i..6 {
            let hij = if i == j {
                let mut xp = Vec6::zeros();
                xp[i] = step;
                let mut xm = Vec6::zeros();
                xm[i] = -step;
                (f(&xp) - 2.0 * f0 + f(&xm)) / (step * step)
            } else {
                let mut xpp = Vec6::zeros();
                xpp[i] = step;
                xpp[j] = step;
                let mut xpm = Vec6::zeros();
                xpm[i] = step;
                xpm[j] = -step;
                let mut xmp = Vec6::zeros();
                xmp[i] = -step;
                xmp[j] = step;
                let mut xmm = Vec6::zeros();
                xmm[i] = -step;
                xmm[j] = -step;
                (f(&xpp) - f(&xpm) - f(&xmp) + f(&xmm)) / (4.0 * step * step)
            };
            h[(i, j)] = hij;
            h[(j, i)] = hij;
        }
    }
    symmetrize6(&h)
}

/// Standard Nelder–Mead on R⁶ with reflection/expansion/contraction/shrink
/// coefficients (1, 2, ½, ½). Stops when the simplex diameter or the
/// function spread collapses, or after 20000 iterations.
fn nelder_mead(f: &dyn Fn(&Vec6) -> f64, x0: Vec6, initial_step: f64) -> Vec6 {
    const MAX_ITER: usize = 20_000;
    let n = 6;
    let mut xs: Vec<Vec6> = Vec::with_capacity(n + 1);
    xs.push(x0);
    for i in 0..n {
        let mut x = x0;
        x[i] += initial_step;
        xs.push(x);
    }
    let mut fs: Vec<f64> = xs.iter().map(|x| f(x)).collect();

    for _ in 0..MAX_ITER {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| fs[a].partial_cmp(&fs[b]).expect("finite costs"));
        let xs_sorted: Vec<Vec6> = order.iter().map(|&i| xs[i]).collect();
        let fs_sorted: Vec<f64> = order.iter().map(|&i| fs[i]).collect();
        xs = xs_sorted;
        fs = fs_sorted;

        let diam = xs[1..]
            .iter()
            .map(|x| (x - xs[0]).norm())
            .fold(0.0f64, f64::max);
        if diam < 1e-12 * (1.0 + xs[0].norm())
            || (fs[n] - fs[0]).abs() < 1e-16 * (1.0 + fs[0].abs())
        {
            break;
        }

        let centroid: Vec6 = xs[..n].iter().fold(Vec6::zeros(), |acc, x| acc + x) / n as f64;
        let reflected = centroid + (centroid - xs[n]);
        let fr = f(&reflected);
        if fr < fs[0] {
            let expanded = centroid + (centroid - xs[n]) * 2.0;
            let fe = f(&expanded);
            if fe < fr {
                xs[n] = expanded;
                fs[n] = fe;
            } else {
                xs[n] = reflected;
                fs[n] = fr;
            }
        } else if fr < fs[n - 1] {
            xs[n] = reflected;
            fs[n] = fr;
        } else {
            let contracted = centroid + (xs[n] - centroid) * 0.5;
            let fc = f(&contracted);
            if fc < fs[n] {
                xs[n] = contracted;
                fs[n] = fc;
            } else {
                for i in 1..=n {
                    xs[i] = xs[0] + (xs[i] - xs[0]) * 0.5;
                    fs[i] = f(&xs[i]);
                }
            }
        }
    }
    let mut best = 0;
    for i in 1..=n {
        if fs[i] < fs[best] {
            best = i;
        }
    }
    xs[best]
}
