//! Smoothed gradient descent ascent over a constraint set.
//!
//! `L̂(g, ν; z) = Σ_b (q_b − Q_b*(g))² + Σ_S ν g^H V g + (p/2) ‖g − z‖²`.
//! Gradients use the real convention `∇ = 2 ∂/∂ḡ`, i.e. the gradient of `L̂`
//! with respect to the stacked real and imaginary parts:
//!
//! `∇_g L̂ = Σ_b (4 Q_b* − 4 q_b) U_b* g + Σ_S 2 ν V g + p (g − z)`.
//!
//! Updates alternate: `g` with the current `ν`, then `ν` with the new `g`,
//! then `z ← z + β (g − z)`.

use std::time::Instant;

use nalgebra::Complex;

use super::{check_instance, count_violations, power_method, SolverFlags, SolverOptions, SolverReport, TraceRow};
use crate::feedback::{ConstraintId, CprInstance};
use crate::{CMatrix, CVector, Result, SenseError, C64};

pub fn sgda_lagrangian(
    instance: &CprInstance,
    set: &[ConstraintId],
    nu: &[f64],
    z: &CVector,
    p: f64,
    g: &CVector,
) -> f64 {
    let dual: f64 = set
        .iter()
        .zip(nu)
        .map(|(&id, &n)| n * instance.constraint_value(id, g))
        .sum();
    instance.objective(g) + dual + 0.5 * p * (g - z).norm_squared()
}

pub fn sgda_gradient(
    instance: &CprInstance,
    set: &[ConstraintId],
    nu: &[f64],
    z: &CVector,
    p: f64,
    g: &CVector,
) -> CVector {
    let mut grad = (g - z) * C64::new(p, 0.0);
    for (b, blk) in instance.blocks.iter().enumerate() {
        let coef = 4.0 * (instance.selected_power(b, g) - blk.target);
        grad += instance.apply_selected(b, g) * C64::new(coef, 0.0);
    }
    for (&id, &n) in set.iter().zip(nu) {
        if n != 0.0 {
            grad += instance.apply_constraint(id, g) * C64::new(2.0 * n, 0.0);
        }
    }
    grad
}

fn default_p(instance: &CprInstance, opts: &SolverOptions) -> f64 {
    let mut m = CMatrix::zeros(instance.dim(), instance.dim());
    for (b, blk) in instance.blocks.iter().enumerate() {
        m += instance.selected_outer(b) * Complex::new(blk.target, 0.0);
    }
    (4.0 * power_method(&m, opts.power_tol, opts.power_max_iters).value).max(f64::MIN_POSITIVE)
}

const DIVERGENCE_WINDOW: usize = 50;
const DIVERGENCE_FACTOR: f64 = 10.0;

pub fn sgda_solve(
    instance: &CprInstance,
    set: &[ConstraintId],
    opts: &SolverOptions,
    init: &CVector,
) -> Result<SolverReport> {
    check_instance(instance)?;
    opts.validate()?;
    if init.len() != instance.dim() {
        return Err(SenseError::dims(format!(
            "initial point has {} entries, instance has dimension {}",
            init.len(),
            instance.dim()
        )));
    }
    let started = Instant::now();
    let so = opts.sgda;
    let mut p = so.p.unwrap_or_else(|| default_p(instance, opts));
    let mut s1 = so.s1.unwrap_or(1.0 / (2.0 * p));
    let mut flags = SolverFlags::default();
    let mut trace = Vec::new();
    let mut total_iters = 0;

    'attempt: loop {
        let mut g = init.clone();
        let mut z = init.clone();
        let mut nu = vec![0.0; set.len()];
        let mut history: Vec<f64> = Vec::with_capacity(so.max_iters + 1);
        history.push(instance.objective(&g));
        for k in 1..=so.max_iters {
            let grad = sgda_gradient(instance, set, &nu, &z, p, &g);
            let next = &g - grad * C64::new(s1, 0.0);
            for (&id, n) in set.iter().zip(nu.iter_mut()) {
                *n = (*n + so.s2 * instance.constraint_value(id, &next)).max(0.0);
            }
            z += (&next - &z) * C64::new(so.beta_avg, 0.0);
            let change = (&next - &g).norm() / g.norm().max(f64::MIN_POSITIVE);
            g = next;
            total_iters += 1;

            let obj = instance.objective(&g);
            history.push(obj);
            if opts.trace {
                trace.push(TraceRow {
                    iter: total_iters,
                    objective: obj,
                    violation_count: count_violations(&g, instance, None).count,
                });
            }
            let diverged = !obj.is_finite()
                || (k >= DIVERGENCE_WINDOW
                    && obj > DIVERGENCE_FACTOR * history[k - DIVERGENCE_WINDOW]
                    && obj > f64::EPSILON * history[0]);
            if diverged {
                if flags.divergence_restarts >= so.max_restarts {
                    // Out of retries: fall back to the starting point.
                    let mut r = SolverReport::finish(instance, init.clone(), total_iters, 1, started, flags, trace);
                    r.flags.divergence_restarts += 1;
                    return Ok(r);
                }
                flags.divergence_restarts += 1;
                s1 *= 0.5;
                p *= 2.0;
                continue 'attempt;
            }
            if change < opts.inner_tol {
                break;
            }
        }
        return Ok(SolverReport::finish(instance, g, total_iters, 1, started, flags, trace));
    }
}
