//! Solvers for the constrained phase retrieval problem.
//!
//! * [`mm_unconstrained_solve`]: majorization-minimization on the CQI fit
//!   alone; every step is a closed-form leading-eigenvector update.
//! * [`pd_evd_solve`]: the same inner loop inside projected dual ascent on
//!   the PMI constraints.
//! * [`mecs_construct`]: grows a small constraint set by adding violated
//!   constraints and restoring feasibility with a smooth penalty.
//! * [`sgda_solve`]: smoothed gradient descent ascent over a constraint set.
//!
//! Constraint values are `g^H V g = Q_j(g) − Q_{j*}(g)`. A constraint counts
//! as violated when its value exceeds `1e-9 · Q_{j*}(g)`; smaller positive
//! values are treated as ties.

mod mecs;
mod mm;
mod power;
mod sgda;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::feedback::{ConstraintId, CprInstance};
use crate::{CMatrix, CVector, Result, SenseError};

pub use mecs::{mecs_construct, MecsResult};
pub use mm::{initial_point, mm_beta, mm_unconstrained_solve, pd_evd_solve};
pub use power::{power_method, power_method_from, PowerResult};
pub use sgda::{sgda_gradient, sgda_lagrangian, sgda_solve};

pub(crate) const VIOLATION_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgdaOptions {
    /// Smoothing weight; default `4 λ_max(Σ q U_{j*})`.
    pub p: Option<f64>,
    /// Primal step; default `1 / (2p)`.
    pub s1: Option<f64>,
    /// Dual step.
    pub s2: f64,
    /// Averaging weight of the auxiliary variable, in `(0, 1]`.
    pub beta_avg: f64,
    pub max_iters: usize,
    /// Restarts allowed after detected divergence.
    pub max_restarts: usize,
}

impl Default for SgdaOptions {
    fn default() -> Self {
        SgdaOptions {
            p: None,
            s1: None,
            s2: 1e-2,
            beta_avg: 0.9,
            max_iters: 2_000,
            max_restarts: 6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Relative change of `g` that ends an inner loop.
    pub inner_tol: f64,
    pub inner_max_iters: usize,
    pub outer_max_iters: usize,
    /// Dual ascent step; default `0.1 / mean(q)`.
    pub dual_step: Option<f64>,
    pub power_tol: f64,
    pub power_max_iters: usize,
    pub feas_max_iters: usize,
    /// Relative margin used inside the feasibility solve so the returned
    /// point satisfies the selected constraints strictly.
    pub feas_margin: f64,
    pub sgda: SgdaOptions,
    pub seed: u64,
    /// Record per-iteration objective and violation counts.
    pub trace: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            inner_tol: 1e-6,
            inner_max_iters: 200,
            outer_max_iters: 50,
            dual_step: None,
            power_tol: 1e-10,
            power_max_iters: 5_000,
            feas_max_iters: 500,
            feas_margin: 1e-6,
            sgda: SgdaOptions::default(),
            seed: 0,
            trace: false,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("inner_tol", self.inner_tol),
            ("power_tol", self.power_tol),
            ("sgda.s2", self.sgda.s2),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(SenseError::Config(format!("{name} must be positive")));
            }
        }
        for (name, v) in [("dual_step", self.dual_step), ("sgda.p", self.sgda.p), ("sgda.s1", self.sgda.s1)] {
            if let Some(v) = v {
                if !(v > 0.0) {
                    return Err(SenseError::Config(format!("{name} must be positive")));
                }
            }
        }
        if !(self.sgda.beta_avg > 0.0 && self.sgda.beta_avg <= 1.0) {
            return Err(SenseError::Config("sgda.beta_avg must lie in (0, 1]".into()));
        }
        if !(0.0..1.0).contains(&self.feas_margin) {
            return Err(SenseError::Config("feas_margin must lie in [0, 1)".into()));
        }
        if self.inner_max_iters == 0 || self.outer_max_iters == 0 || self.sgda.max_iters == 0 {
            return Err(SenseError::Config("iteration limits must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Violations {
    pub count: usize,
    /// `Σ max(Q_j − Q_{j*}, 0)` over the counted violations.
    pub total: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverFlags {
    /// Restarts after a non-positive leading eigenvalue.
    pub eig_restarts: usize,
    /// Some power iteration hit its iteration limit.
    pub power_not_converged: bool,
    /// The feasibility solve stalled before all constraints held.
    pub partial_feasibility: bool,
    /// Restarts after detected divergence.
    pub divergence_restarts: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub objective: f64,
    pub violation_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverReport {
    pub g_star: CVector,
    /// Reconstructed channel, `M x n_C`.
    pub h_star: CMatrix,
    /// CQI-fit objective at `g_star`.
    pub objective: f64,
    pub inner_iterations: usize,
    pub outer_iterations: usize,
    /// Over the full constraint set.
    pub violations: Violations,
    pub wall_time: f64,
    pub mecs_size: Option<usize>,
    pub flags: SolverFlags,
    pub trace: Vec<TraceRow>,
}

impl SolverReport {
    pub(crate) fn finish(
        instance: &CprInstance,
        g: CVector,
        inner: usize,
        outer: usize,
        started: std::time::Instant,
        flags: SolverFlags,
        trace: Vec<TraceRow>,
    ) -> Self {
        SolverReport {
            h_star: instance.reconstruct(&g),
            objective: instance.objective(&g),
            violations: count_violations(&g, instance, None),
            g_star: g,
            inner_iterations: inner,
            outer_iterations: outer,
            wall_time: started.elapsed().as_secs_f64(),
            mecs_size: None,
            flags,
            trace,
        }
    }
}

pub(crate) fn is_violation(value: f64, selected: f64) -> bool {
    value > VIOLATION_RTOL * selected
}

/// Violations of `g` over the full set (`set = None`) or a subset.
pub fn count_violations(g: &CVector, instance: &CprInstance, set: Option<&[ConstraintId]>) -> Violations {
    let mut out = Violations::default();
    let mut add = |v: f64, sel: f64| {
        if is_violation(v, sel) {
            out.count += 1;
            out.total += v;
        }
    };
    match set {
        None => {
            for b in 0..instance.n_blocks() {
                let powers = instance.powers(b, g);
                let pmi = instance.blocks[b].pmi;
                let sel = powers[pmi];
                for (j, &p) in powers.iter().enumerate() {
                    if j != pmi {
                        add(p - sel, sel);
                    }
                }
            }
        }
        Some(ids) => {
            for &id in ids {
                add(
                    instance.constraint_value(id, g),
                    instance.selected_power(id.block, g),
                );
            }
        }
    }
    out
}

/// All constraints violated at `g`, in block-then-codeword order.
pub fn violated_constraints(g: &CVector, instance: &CprInstance) -> Vec<ConstraintId> {
    let mut out = Vec::new();
    for b in 0..instance.n_blocks() {
        let powers = instance.powers(b, g);
        let pmi = instance.blocks[b].pmi;
        let sel = powers[pmi];
        for (j, &p) in powers.iter().enumerate() {
            if j != pmi && is_violation(p - sel, sel) {
                out.push(ConstraintId { block: b, codeword: j });
            }
        }
    }
    out
}

/// Two-stage solve: MECS construction followed by SGDA on that set.
pub fn mecs_sgda_solve(instance: &CprInstance, opts: &SolverOptions) -> Result<SolverReport> {
    let started = std::time::Instant::now();
    let mecs = mecs_construct(instance, opts)?;
    let mut report = sgda_solve(instance, &mecs.set, opts, &mecs.g)?;
    report.mecs_size = Some(mecs.set.len());
    report.flags.partial_feasibility = mecs.partial;
    report.outer_iterations += mecs.rounds;
    report.wall_time = started.elapsed().as_secs_f64();
    Ok(report)
}

/// Multi-carrier solve over `vec(G)`; the report's `h_star` is `D̃ G F^H`.
pub fn solve_multicarrier(instance: &CprInstance, opts: &SolverOptions) -> Result<SolverReport> {
    mecs_sgda_solve(instance, opts)
}

/// Writes a solver trace as CSV with columns `iter,objective,violation_count`.
pub fn write_trace<W: Write>(rows: &[TraceRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn check_instance(instance: &CprInstance) -> Result<()> {
    if instance.blocks.is_empty() {
        return Err(SenseError::invalid("instance has no measurements"));
    }
    if instance.n_codewords < 2 {
        return Err(SenseError::invalid("codebook needs at least two codewords"));
    }
    if instance.blocks.iter().any(|b| !(b.target >= 0.0) || !b.target.is_finite()) {
        return Err(SenseError::invalid("CQI targets must be finite and nonnegative"));
    }
    Ok(())
}
