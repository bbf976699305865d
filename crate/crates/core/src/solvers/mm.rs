//! Majorization-minimization and the primal-dual eigenvector method.
//!
//! With `β ≥ λ_max` of the Gram matrix `K_st = Tr(U_s* U_t*)`, each inner step
//! minimises `‖g g^H − R‖_F` with
//!
//! `R = g g^H + (1/β) Σ_b (q_b − Q_b*(g)) U_b* − (1/β) Σ λ V`,
//!
//! whose solution is `sqrt(λ_max(R)) u_max(R)`. The dual term majorizes
//! `Σ (q − Q*)² + 2 Σ λ g^H V g`, so `λ` carries a factor of two relative to
//! the plain Lagrangian; only the effective dual step changes.

use std::time::Instant;

use nalgebra::Complex;

use super::{
    check_instance, count_violations, is_violation, power_method, power_method_from, SolverFlags,
    SolverOptions, SolverReport, TraceRow,
};
use crate::feedback::{ConstraintId, CprInstance};
use crate::linalg::{complex_gaussian, rng_from_seed};
use crate::{CMatrix, CVector, Result, C64};

/// `λ_max` of the Gram matrix of the selected-codeword outer products.
pub fn mm_beta(instance: &CprInstance, opts: &SolverOptions) -> f64 {
    let n = instance.n_blocks();
    let sel: Vec<Vec<CVector>> = instance
        .blocks
        .iter()
        .map(|b| b.components.iter().map(|a| a.column(b.pmi).into_owned()).collect())
        .collect();
    let mut k = CMatrix::zeros(n, n);
    for s in 0..n {
        for t in s..n {
            let v: f64 = sel[s]
                .iter()
                .flat_map(|a| sel[t].iter().map(move |b| a.dotc(b).norm_sqr()))
                .sum();
            k[(s, t)] = Complex::new(v, 0.0);
            k[(t, s)] = Complex::new(v, 0.0);
        }
    }
    power_method(&k, opts.power_tol, opts.power_max_iters).value
}

fn scale_to_targets(instance: &CprInstance, u: &CVector) -> CVector {
    let (mut num, mut den) = (0.0, 0.0);
    for (b, blk) in instance.blocks.iter().enumerate() {
        let q = instance.selected_power(b, u);
        num += blk.target * q;
        den += q * q;
    }
    if den > 0.0 && num > 0.0 {
        u * Complex::new((num / den).sqrt(), 0.0)
    } else {
        u.clone()
    }
}

/// Leading eigenvector of `Σ q_b U_b*`, scaled so that the selected-codeword
/// powers fit the CQI targets in the least-squares sense.
pub fn initial_point(instance: &CprInstance, opts: &SolverOptions) -> CVector {
    let mut m = CMatrix::zeros(instance.dim(), instance.dim());
    for (b, blk) in instance.blocks.iter().enumerate() {
        m += instance.selected_outer(b) * Complex::new(blk.target, 0.0);
    }
    let u = power_method(&m, opts.power_tol, opts.power_max_iters).vector;
    scale_to_targets(instance, &u)
}

pub(crate) fn rescale_to_targets(instance: &CprInstance, g: &CVector) -> CVector {
    scale_to_targets(instance, g)
}

struct Inner<'a> {
    instance: &'a CprInstance,
    opts: &'a SolverOptions,
    beta: f64,
    selected: Vec<CMatrix>,
    init: CVector,
    restart_rng: crate::linalg::SenseRng,
}

impl Inner<'_> {
    /// Runs the inner MM loop from `g` with fixed dual term `penalty = Σ λ V`.
    fn run(
        &mut self,
        mut g: CVector,
        penalty: Option<&CMatrix>,
        flags: &mut SolverFlags,
        trace: &mut Vec<TraceRow>,
        iter_base: usize,
    ) -> (CVector, usize) {
        let inv_beta = 1.0 / self.beta;
        let mut iters = 0;
        while iters < self.opts.inner_max_iters {
            let mut r = &g * g.adjoint();
            for (b, blk) in self.instance.blocks.iter().enumerate() {
                let resid = blk.target - self.instance.selected_power(b, &g);
                r += &self.selected[b] * C64::new(inv_beta * resid, 0.0);
            }
            if let Some(p) = penalty {
                r -= p * C64::new(inv_beta, 0.0);
            }
            let eig = power_method_from(&r, Some(&g), self.opts.power_tol, self.opts.power_max_iters);
            flags.power_not_converged |= !eig.converged;
            iters += 1;
            let next = if eig.value > 0.0 {
                eig.vector * C64::new(eig.value.sqrt(), 0.0)
            } else {
                flags.eig_restarts += 1;
                let noise = CVector::from_fn(g.len(), |_, _| complex_gaussian(&mut self.restart_rng, 1.0));
                let scale = 0.1 * self.init.norm() / noise.norm().max(f64::MIN_POSITIVE);
                &self.init + noise * C64::new(scale, 0.0)
            };
            let change = (&next - &g).norm() / g.norm().max(f64::MIN_POSITIVE);
            g = next;
            if self.opts.trace {
                trace.push(TraceRow {
                    iter: iter_base + iters,
                    objective: self.instance.objective(&g),
                    violation_count: count_violations(&g, self.instance, None).count,
                });
            }
            if change < self.opts.inner_tol || flags.eig_restarts > 10 {
                break;
            }
        }
        (g, iters)
    }
}

fn setup<'a>(instance: &'a CprInstance, opts: &'a SolverOptions) -> Inner<'a> {
    Inner {
        instance,
        opts,
        beta: mm_beta(instance, opts).max(f64::MIN_POSITIVE),
        selected: (0..instance.n_blocks()).map(|b| instance.selected_outer(b)).collect(),
        init: initial_point(instance, opts),
        restart_rng: rng_from_seed(opts.seed),
    }
}

/// Unconstrained MM baseline: fits the CQI targets only.
pub fn mm_unconstrained_solve(instance: &CprInstance, opts: &SolverOptions) -> Result<SolverReport> {
    check_instance(instance)?;
    opts.validate()?;
    let started = Instant::now();
    let mut inner = setup(instance, opts);
    let mut flags = SolverFlags::default();
    let mut trace = Vec::new();
    if opts.trace {
        let g0 = &inner.init;
        trace.push(TraceRow {
            iter: 0,
            objective: instance.objective(g0),
            violation_count: count_violations(g0, instance, None).count,
        });
    }
    let g0 = inner.init.clone();
    let (g, iters) = inner.run(g0, None, &mut flags, &mut trace, 0);
    Ok(SolverReport::finish(instance, g, iters, 1, started, flags, trace))
}

/// Projected dual ascent over `set` (the full constraint set when `None`).
pub fn pd_evd_solve(
    instance: &CprInstance,
    opts: &SolverOptions,
    set: Option<&[ConstraintId]>,
) -> Result<SolverReport> {
    check_instance(instance)?;
    opts.validate()?;
    let started = Instant::now();
    let ids: Vec<ConstraintId> = match set {
        Some(s) => s.to_vec(),
        None => instance.all_constraints().collect(),
    };
    let gamma = opts.dual_step.unwrap_or_else(|| 0.1 / instance.mean_target().max(f64::MIN_POSITIVE));
    let mut inner = setup(instance, opts);
    let mut lambda = vec![0.0; ids.len()];
    let mut flags = SolverFlags::default();
    let mut trace = Vec::new();
    let mut g = inner.init.clone();
    let mut total_inner = 0;
    let mut outer = 0;
    let dim = instance.dim();
    while outer < opts.outer_max_iters {
        let penalty = if lambda.iter().any(|&l| l > 0.0) {
            let mut p = CMatrix::zeros(dim, dim);
            for (id, &l) in ids.iter().zip(&lambda) {
                if l > 0.0 {
                    let v = instance.codeword_outer(id.block, id.codeword) - &inner.selected[id.block];
                    p += v * C64::new(l, 0.0);
                }
            }
            Some(p)
        } else {
            None
        };
        let (next, iters) = inner.run(g, penalty.as_ref(), &mut flags, &mut trace, total_inner);
        g = next;
        total_inner += iters;
        outer += 1;

        let mut any = false;
        for (id, l) in ids.iter().zip(lambda.iter_mut()) {
            let v = instance.constraint_value(*id, &g);
            any |= is_violation(v, instance.selected_power(id.block, &g));
            *l = (*l + gamma * v).max(0.0);
        }
        if !any {
            break;
        }
    }
    Ok(SolverReport::finish(instance, g, total_inner, outer, started, flags, trace))
}
