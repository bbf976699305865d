//! Minimal effective constraint set construction.
//!
//! Starting from the unconstrained MM solution, every round adds the constraints
//! violated at the current point to `S` and restores feasibility on `S` by
//! minimising `Σ_S max(g^H V' g, 0)²` with Levenberg-Marquardt steps. The
//! constraints are homogeneous, so the descent runs on the sphere of the
//! current radius (otherwise `g → 0` would be a trivial minimiser), and
//! `V' = U_j − (1 − δ) U_j*` adds a small relative margin `δ`. The final
//! point is rescaled to fit the CQI targets, which leaves every constraint
//! sign unchanged.

use std::collections::BTreeSet;

use super::mm::{mm_unconstrained_solve, rescale_to_targets};
use super::{check_instance, violated_constraints, SolverOptions};
use crate::feedback::{ConstraintId, CprInstance};
use nalgebra::{DMatrix, DVector};

use crate::{CVector, Result, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct MecsResult {
    pub g: CVector,
    /// The constraint set, sorted.
    pub set: Vec<ConstraintId>,
    /// Number of construction rounds.
    pub rounds: usize,
    /// The feasibility solve stalled and the construction stopped early.
    pub partial: bool,
    /// `|S|` after each round.
    pub sizes: Vec<usize>,
}

/// Hinge residuals `max(Q_j − keep·Q_j*, 0)` over `set`, and their sum of squares.
fn residuals(instance: &CprInstance, set: &[ConstraintId], g: &CVector, keep: f64) -> (Vec<(ConstraintId, f64)>, f64) {
    let mut active = Vec::new();
    let mut f = 0.0;
    for &id in set {
        let v = instance.codeword_power(id.block, id.codeword, g) - keep * instance.selected_power(id.block, g);
        if v > 0.0 {
            f += v * v;
            active.push((id, v));
        }
    }
    (active, f)
}

/// Levenberg-Marquardt on the hinge penalty, restricted to the sphere of
/// radius `‖g0‖`. Steps aim at a margin ten times `feas_margin`; success is
/// judged at `feas_margin`, so a step that lands on its target boundary is
/// already strictly feasible. Returns the final point and whether every
/// constraint in `set` holds.
fn feasibility_solve(instance: &CprInstance, set: &[ConstraintId], g0: &CVector, opts: &SolverOptions) -> (CVector, bool) {
    let keep = 1.0 - opts.feas_margin;
    let aim = 1.0 - (10.0 * opts.feas_margin).min(0.5);
    let radius = g0.norm();
    let n = g0.len();
    let mut g = g0.clone();
    let mut mu = 1e-3;
    let (mut active, mut f) = residuals(instance, set, &g, aim);
    for _ in 0..opts.feas_max_iters {
        if residuals(instance, set, &g, keep).0.is_empty() {
            return (g, true);
        }
        // Real Jacobian of the active residuals: d(g^H A g) = 2 Re((A g)^H dg).
        let x = DVector::from_iterator(2 * n, g.iter().map(|c| c.re).chain(g.iter().map(|c| c.im)));
        let mut jac = DMatrix::zeros(active.len(), 2 * n);
        let mut r = DVector::zeros(active.len());
        for (row, &(id, v)) in active.iter().enumerate() {
            let y = instance.apply_codeword(id.block, id.codeword, &g) - instance.apply_selected(id.block, &g) * C64::new(aim, 0.0);
            for i in 0..n {
                jac[(row, i)] = 2.0 * y[i].re;
                jac[(row, n + i)] = 2.0 * y[i].im;
            }
            r[row] = v;
        }
        // Tangent directions only: the residuals are homogeneous in g.
        let radial = &x / x.norm();
        let jr = &jac * &radial;
        jac -= jr * radial.transpose();
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * &r;
        let scale = jtj.diagonal().max().max(f64::MIN_POSITIVE);
        let mut improved = false;
        while mu < 1e12 {
            let mut lhs = jtj.clone();
            for i in 0..2 * n {
                lhs[(i, i)] += mu * scale;
            }
            let Some(chol) = lhs.cholesky() else {
                mu *= 10.0;
                continue;
            };
            let step = chol.solve(&(-&jtr));
            let xs = &x + step;
            let mut cand = CVector::from_iterator(n, (0..n).map(|i| C64::new(xs[i], xs[n + i])));
            let norm = cand.norm();
            if !(norm > 0.0) {
                mu *= 10.0;
                continue;
            }
            cand *= C64::new(radius / norm, 0.0);
            let (a2, f2) = residuals(instance, set, &cand, aim);
            if f2 < f {
                g = cand;
                active = a2;
                f = f2;
                mu = (mu / 3.0).max(1e-12);
                improved = true;
                break;
            }
            mu *= 4.0;
        }
        if !improved || f == 0.0 {
            break;
        }
    }
    let ok = residuals(instance, set, &g, keep).0.is_empty();
    (g, ok)
}

pub fn mecs_construct(instance: &CprInstance, opts: &SolverOptions) -> Result<MecsResult> {
    check_instance(instance)?;
    opts.validate()?;
    let mut g = mm_unconstrained_solve(instance, opts)?.g_star;
    let mut set: BTreeSet<ConstraintId> = BTreeSet::new();
    let mut sizes = Vec::new();
    let mut rounds = 0;
    let mut partial = false;
    loop {
        rounds += 1;
        let violated = violated_constraints(&g, instance);
        if violated.is_empty() {
            break;
        }
        let before = set.len();
        set.extend(violated);
        sizes.push(set.len());
        if set.len() == before {
            // Nothing new: the previous feasibility solve could not satisfy S.
            partial = true;
            break;
        }
        let ids: Vec<ConstraintId> = set.iter().copied().collect();
        let (next, _) = feasibility_solve(instance, &ids, &g, opts);
        g = next;
    }
    Ok(MecsResult {
        g: rescale_to_targets(instance, &g),
        set: set.into_iter().collect(),
        rounds,
        partial,
        sizes,
    })
}
