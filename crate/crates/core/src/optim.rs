//! Damped Gauss-Newton over a rigid base pose plus box-limited joint
//! angles — the shared solver behind retargeting and configuration
//! fitting.
//!
//! The state is (base ∈ SE(3), angles ∈ ℝᵈ). Steps are taken in local
//! coordinates `[δω, δt, δangles]`, with the base updated by the
//! body-frame retraction `R ← R·exp(δω)`, `t ← t + R·δt`; this makes the
//! solve exactly equivariant under rigid transforms of the target (the
//! base absorbs them without touching the angles). Jacobians are numeric
//! central differences; damping is Levenberg-Marquardt style (×10 on a
//! rejected step, ÷3 on an accepted one) on the scaled normal equations.
//! Angle limits are enforced by clamping each candidate step.

use nalgebra::{DMatrix, DVector, Isometry3};

#[derive(Debug, Clone, Copy)]
pub struct GnOptions {
    pub max_iters: usize,
    /// Convergence: stop when an accepted step improves the RMS residual
    /// by less than this (meters).
    pub tol: f64,
    /// Central-difference step for numeric Jacobians (rad / m).
    pub fd_step: f64,
    /// Initial Levenberg damping.
    pub init_damping: f64,
    /// When false the base pose is held fixed and only angles move.
    pub optimize_base: bool,
}

impl Default for GnOptions {
    fn default() -> Self {
        GnOptions {
            max_iters: 100,
            tol: 1e-10,
            fd_step: 1e-6,
            init_damping: 1e-3,
            optimize_base: true,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GnReport {
    /// Final sum of squared residuals.
    pub cost: f64,
    /// Final RMS residual (per residual component).
    pub rms: f64,
    pub iterations: usize,
    pub converged: bool,
}

const DAMPING_MAX: f64 = 1e12;
const DAMPING_MIN: f64 = 1e-15;

/// Minimizes `‖residuals(base, angles)‖²` in place. The residual closure
/// must write the same number of components on every call. Angles are kept
/// inside `limits` throughout (the initial state is clamped too).
pub fn solve_pose_angles<F>(
    mut residuals: F,
    base: &mut Isometry3<f64>,
    angles: &mut [f64],
    limits: &[(f64, f64)],
    opts: &GnOptions,
) -> GnReport
where
    F: FnMut(&Isometry3<f64>, &[f64], &mut Vec<f64>),
{
    assert_eq!(angles.len(), limits.len(), "one limit pair per angle");
    clamp(angles, limits);

    let base_dims = if opts.optimize_base { 6 } else { 0 };
    let n = base_dims + angles.len();

    let mut buf = Vec::new();
    residuals(base, angles, &mut buf);
    let m = buf.len();
    let mut cost = sum_sq(&buf);
    if n == 0 || m == 0 {
        return GnReport {
            cost,
            rms: rms(cost, m),
            iterations: 0,
            converged: true,
        };
    }

    let mut lambda = opts.init_damping;
    let mut iterations = 0;
    let mut converged = false;

    let mut jac = DMatrix::zeros(m, n);
    let mut plus = Vec::with_capacity(m);
    let mut minus = Vec::with_capacity(m);
    let mut cand_angles = vec![0.0; angles.len()];

    'outer: for iter in 1..=opts.max_iters {
        iterations = iter;

        // Numeric Jacobian around the current state (local coordinates,
        // unclamped so boundary derivatives survive).
        let h = opts.fd_step;
        for col in 0..n {
            let (bp, ap) = perturbed(base, angles, base_dims, col, h, &mut cand_angles);
            residuals(&bp, ap, &mut plus);
            let (bm, am) = perturbed(base, angles, base_dims, col, -h, &mut cand_angles);
            residuals(&bm, am, &mut minus);
            debug_assert_eq!(plus.len(), m);
            for row in 0..m {
                jac[(row, col)] = (plus[row] - minus[row]) / (2.0 * h);
            }
        }

        residuals(base, angles, &mut buf);
        let r = DVector::from_column_slice(&buf);
        let a = jac.transpose() * &jac;
        let g = jac.transpose() * r;

        // Inner damping loop: retry with stronger damping until a step
        // lowers the cost or damping saturates.
        loop {
            let mut lhs = a.clone();
            for i in 0..n {
                lhs[(i, i)] += lambda * a[(i, i)].max(1e-12);
            }
            let step = match lhs.cholesky() {
                Some(ch) => -(ch.solve(&g)),
                None => {
                    lambda *= 10.0;
                    if lambda > DAMPING_MAX {
                        break 'outer;
                    }
                    continue;
                }
            };

            let cand_base = if opts.optimize_base {
                retract(base, step.as_slice())
            } else {
                *base
            };
            for (i, ca) in cand_angles.iter_mut().enumerate() {
                *ca = angles[i] + step[base_dims + i];
            }
            clamp(&mut cand_angles, limits);

            residuals(&cand_base, &cand_angles, &mut buf);
            let cand_cost = sum_sq(&buf);
            if cand_cost < cost {
                let improvement = rms(cost, m) - rms(cand_cost, m);
                *base = cand_base;
                angles.copy_from_slice(&cand_angles);
                cost = cand_cost;
                lambda = (lambda / 3.0).max(DAMPING_MIN);
                if improvement < opts.tol {
                    converged = true;
                    break 'outer;
                }
                break;
            }
            lambda *= 10.0;
            if lambda > DAMPING_MAX {
                // No descent direction left at any damping: a (possibly
                // constrained) local minimum.
                converged = true;
                break 'outer;
            }
        }
    }

    GnReport {
        cost,
        rms: rms(cost, m),
        iterations,
        converged,
    }
}

fn sum_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

fn rms(cost: f64, m: usize) -> f64 {
    (cost / m.max(1) as f64).sqrt()
}

fn clamp(angles: &mut [f64], limits: &[(f64, f64)]) {
    for (a, &(lo, hi)) in angles.iter_mut().zip(limits) {
        *a = a.clamp(lo, hi);
    }
}

/// Body-frame retraction of the first 6 local coordinates.
fn retract(base: &Isometry3<f64>, step: &[f64]) -> Isometry3<f64> {
    let delta = Isometry3::new(
        nalgebra::Vector3::new(step[3], step[4], step[5]),
        nalgebra::Vector3::new(step[0], step[1], step[2]),
    );
    base * delta
}

/// State with local coordinate `col` perturbed by `h`; angle storage is
/// borrowed from `scratch`.
fn perturbed<'a>(
    base: &Isometry3<f64>,
    angles: &[f64],
    base_dims: usize,
    col: usize,
    h: f64,
    scratch: &'a mut [f64],
) -> (Isometry3<f64>, &'a [f64]) {
    scratch.copy_from_slice(angles);
    if col < base_dims {
        let mut step = [0.0; 6];
        step[col] = h;
        (retract(base, &step), &*scratch)
    } else {
        scratch[col - base_dims] += h;
        (*base, &*scratch)
    }
}
