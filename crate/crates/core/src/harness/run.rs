//! Monte-Carlo experiment driver.
//!
//! Every trial draws (or re-targets) a scenario, builds the basis, and for
//! each precoder draw simulates `max(T)` feedback rounds once; each `T` in
//! the sweep uses the first `T` rounds. Trials run on a worker pool with
//! seeds derived from `(seed, trial, draw)`, and a single writer emits rows
//! in trial order, so the output does not depend on the worker count.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::sync::mpsc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Algorithm, ExperimentConfig, PrecoderKind};
use super::overhead::{compute_overhead, OverheadReport};
use crate::basis::{basis_from_paths, build_basis, build_delay_basis, idft_matrix, BasisMatrix, BasisSource, DelayBasis};
use crate::channel::{gen_scenario, load_csi_dataset, ReferenceUser, Scenario};
use crate::codebook::{build_type1_codebook, Type1Codebook};
use crate::feedback::{
    assemble_cpr_instance, assemble_multicarrier_instance, simulate_carrier_round, simulate_group_round,
    simulate_round, CprInstance, FeedbackRecord, Grouping,
};
use crate::linalg::{derive_seed, rng_from_seed, SenseRng};
use crate::metrics::{evaluate, to_db};
use crate::precoder::{gen_gaussian_precoder, gen_hybrid_precoder, gen_subcarrier_precoders, Precoder};
use crate::solvers::{
    mecs_construct, mecs_sgda_solve, mm_unconstrained_solve, pd_evd_solve, SolverOptions, SolverReport,
};
use crate::{CMatrix, CVector, Result, SenseError, C64};

/// One CSV row. Column order is the file format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub algorithm: String,
    #[serde(rename = "T")]
    pub t: usize,
    pub trial: usize,
    pub seed: u64,
    pub correlation: f64,
    pub nmse_r: f64,
    pub violations_count: usize,
    pub violation_total: f64,
    pub mecs_size: Option<usize>,
    pub wall_time_s: f64,
}

pub const RESULT_COLUMNS: [&str; 10] = [
    "algorithm",
    "T",
    "trial",
    "seed",
    "correlation",
    "nmse_r",
    "violations_count",
    "violation_total",
    "mecs_size",
    "wall_time_s",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub algorithm: String,
    #[serde(rename = "T")]
    pub t: usize,
    pub count: usize,
    pub mean_correlation: f64,
    pub mean_nmse_r: f64,
    pub mean_nmse_r_db: f64,
    pub mean_violations_count: f64,
    pub mean_violation_total: f64,
    pub mean_mecs_size: Option<f64>,
    pub mean_wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub trials: usize,
    pub rows: usize,
    pub groups: Vec<GroupSummary>,
    pub overhead: Option<OverheadReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    pub summary: Summary,
}

/// Means per `(algorithm, T)`, ordered by `T` then algorithm name.
pub fn summarize(rows: &[ResultRow], trials: usize, overhead: Option<OverheadReport>) -> Summary {
    let mut groups: BTreeMap<(usize, String), Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.t, r.algorithm.clone())).or_default().push(r);
    }
    let groups = groups
        .into_iter()
        .map(|((t, algorithm), rs)| {
            let n = rs.len() as f64;
            let mean = |f: &dyn Fn(&ResultRow) -> f64| rs.iter().map(|r| f(r)).sum::<f64>() / n;
            let mecs: Vec<f64> = rs.iter().filter_map(|r| r.mecs_size.map(|m| m as f64)).collect();
            let mean_nmse = mean(&|r| r.nmse_r);
            GroupSummary {
                algorithm,
                t,
                count: rs.len(),
                mean_correlation: mean(&|r| r.correlation),
                mean_nmse_r: mean_nmse,
                mean_nmse_r_db: to_db(mean_nmse),
                mean_violations_count: mean(&|r| r.violations_count as f64),
                mean_violation_total: mean(&|r| r.violation_total),
                mean_mecs_size: (!mecs.is_empty()).then(|| mecs.iter().sum::<f64>() / mecs.len() as f64),
                mean_wall_time_s: mean(&|r| r.wall_time_s),
            }
        })
        .collect();
    Summary {
        trials,
        rows: rows.len(),
        groups,
        overhead,
    }
}

/// Users available for re-targeting when running on an external dataset.
fn dataset_pool(config: &ExperimentConfig) -> Result<Option<Vec<ReferenceUser>>> {
    let Some(path) = &config.dataset else { return Ok(None) };
    let sc = load_csi_dataset(path, Some(*config.geometry()))?;
    let mut users = vec![ReferenceUser {
        position: sc.tu.position,
        channel: sc.tu.channel,
        type2: None,
    }];
    users.extend(sc.rus);
    Ok(Some(users))
}

fn trial_scenario(config: &ExperimentConfig, trial: usize, pool: Option<&[ReferenceUser]>) -> Result<Scenario> {
    let seed = derive_seed(config.seed, &[trial as u64]);
    match pool {
        Some(users) => {
            let mut sc = Scenario::retarget(users, trial % users.len(), seed)?;
            sc.keep_nearest(config.scenario.n_ru);
            Ok(sc)
        }
        None => gen_scenario(&config.scenario, seed),
    }
}

fn flat_basis(config: &ExperimentConfig, sc: &Scenario) -> Result<BasisMatrix> {
    let l = config.basis_dim;
    match config.basis {
        BasisSource::RuCsi => build_basis(&sc.ru_csi_matrix(0), l, BasisSource::RuCsi),
        BasisSource::RuType2 => {
            let m = sc
                .ru_type2_matrix(0)
                .ok_or_else(|| SenseError::Config("reference users carry no Type-II codewords".into()))?;
            build_basis(&m, l, BasisSource::RuType2)
        }
        BasisSource::TuPaths => {
            let paths = sc
                .tu
                .paths
                .as_ref()
                .ok_or_else(|| SenseError::Config("basis = tu_paths needs generated scenarios".into()))?;
            basis_from_paths(sc.geometry(), paths, l)
        }
        BasisSource::Identity => Ok(BasisMatrix::identity(sc.tu.channel.ports())),
    }
}

fn delay_basis(config: &ExperimentConfig, sc: &Scenario) -> Result<DelayBasis> {
    let (n_l, l) = (config.delay_taps, config.spatial_dim);
    match config.basis {
        BasisSource::RuCsi => {
            let hs: Vec<CMatrix> = sc.rus.iter().map(|r| r.channel.matrix.clone()).collect();
            build_delay_basis(&hs, n_l, l)
        }
        BasisSource::RuType2 => {
            let hs = sc
                .rus
                .iter()
                .map(|r| r.type2.clone())
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| SenseError::Config("reference users carry no Type-II codewords".into()))?;
            build_delay_basis(&hs, n_l, l)
        }
        BasisSource::Identity => {
            let m = sc.tu.channel.ports();
            let n_c = sc.tu.channel.carriers();
            Ok(DelayBasis {
                d_tilde: CMatrix::identity(m, m),
                f: idft_matrix(n_c, n_l),
                per_carrier: vec![CMatrix::identity(m, m); n_c],
            })
        }
        BasisSource::TuPaths => Err(SenseError::Config(
            "basis = tu_paths is only available for flat channels".into(),
        )),
    }
}

fn identity_precoder(m: usize) -> Precoder {
    Precoder {
        w: CMatrix::identity(m, m),
        w1: CMatrix::identity(m, m),
        w2: CMatrix::identity(m, m),
        sigma_w: 1.0,
    }
}

fn baseline_codebook(config: &ExperimentConfig, cb: &Type1Codebook, m: usize) -> Result<Type1Codebook> {
    if cb.ports() == m {
        return Ok(cb.clone());
    }
    let g = config.geometry();
    if !g.dual_polarized {
        return Err(SenseError::Config(
            "type1_baseline needs a dual-polarized array or a codebook with one port per antenna".into(),
        ));
    }
    build_type1_codebook(g.n_horizontal, g.n_vertical, config.codebook.o1, config.codebook.o2)
}

/// Type-I estimate per carrier: `sqrt(q) u_{j*}` from an identity-precoder round.
fn type1_baseline(
    config: &ExperimentConfig,
    cb: &Type1Codebook,
    h: &CMatrix,
    rng: &mut SenseRng,
) -> Result<CMatrix> {
    let m = h.nrows();
    let cb = baseline_codebook(config, cb, m)?;
    let p = identity_precoder(m);
    let mut out = CMatrix::zeros(m, h.ncols());
    for k in 0..h.ncols() {
        let r = simulate_round(&h.column(k).into_owned(), &p, &cb, config.estimation, None, 0, rng)?;
        let u = cb.codeword(r.pmi) * C64::new(r.cqi_hat.sqrt(), 0.0);
        out.set_column(k, &u);
    }
    Ok(out)
}

fn solve(alg: Algorithm, instance: &CprInstance, opts: &SolverOptions) -> Result<SolverReport> {
    match alg {
        Algorithm::MmUnconstrained | Algorithm::CbycMmUnconstrained => mm_unconstrained_solve(instance, opts),
        Algorithm::PdEvd => pd_evd_solve(instance, opts, None),
        Algorithm::PdEvdMecs => {
            let started = Instant::now();
            let mecs = mecs_construct(instance, opts)?;
            let mut r = pd_evd_solve(instance, opts, Some(&mecs.set))?;
            r.mecs_size = Some(mecs.set.len());
            r.flags.partial_feasibility = mecs.partial;
            r.wall_time = started.elapsed().as_secs_f64();
            Ok(r)
        }
        Algorithm::MecsSgda | Algorithm::CbycMecsSgda => mecs_sgda_solve(instance, opts),
        Algorithm::Type1Baseline => unreachable!("baseline is not a solver"),
    }
}

struct Draw {
    records: Vec<FeedbackRecord>,
    flat: Option<Vec<Precoder>>,
    multi: Option<Vec<Vec<Precoder>>>,
}

fn simulate_draw(
    config: &ExperimentConfig,
    sc: &Scenario,
    cb: &Type1Codebook,
    flat: Option<&BasisMatrix>,
    delay: Option<&DelayBasis>,
    rng: &mut SenseRng,
) -> Result<Draw> {
    let h = &sc.tu.channel.matrix;
    let (m, n_p) = (h.nrows(), cb.ports());
    let t_max = config.max_rounds();
    let quant = config.quantizer.as_ref();
    if let Some(basis) = flat {
        let mut pre = Vec::with_capacity(t_max);
        let mut records = Vec::with_capacity(t_max);
        let h0 = h.column(0).into_owned();
        for t in 0..t_max {
            let p = match config.precoder {
                PrecoderKind::Hybrid => gen_hybrid_precoder(basis, n_p, config.sigma_w, rng)?,
                PrecoderKind::Gaussian => gen_gaussian_precoder(m, n_p, config.sigma_w, rng)?,
            };
            records.push(simulate_round(&h0, &p, cb, config.estimation, quant, t, rng)?);
            pre.push(p);
        }
        return Ok(Draw { records, flat: Some(pre), multi: None });
    }
    let db = delay.expect("multi-carrier draw needs a delay basis");
    let n_c = h.ncols();
    let mut pre = Vec::with_capacity(t_max);
    let mut records = Vec::new();
    let cols: Vec<CVector> = (0..n_c).map(|k| h.column(k).into_owned()).collect();
    for t in 0..t_max {
        let ps = match config.precoder {
            PrecoderKind::Hybrid => gen_subcarrier_precoders(db, n_p, config.sigma_w, rng)?,
            PrecoderKind::Gaussian => vec![gen_gaussian_precoder(m, n_p, config.sigma_w, rng)?; n_c],
        };
        match config.grouping {
            Grouping::PerCarrier => {
                for k in 0..n_c {
                    records.push(simulate_carrier_round(&cols[k], &ps[k], cb, config.estimation, quant, t, k, rng)?);
                }
            }
            Grouping::Groups(size) => {
                for g in 0..n_c / size {
                    let members: Vec<(CVector, &Precoder)> =
                        (g * size..(g + 1) * size).map(|k| (cols[k].clone(), &ps[k])).collect();
                    records.push(simulate_group_round(&members, cb, config.estimation, quant, t, g, rng)?);
                }
            }
        }
        pre.push(ps);
    }
    Ok(Draw { records, flat: None, multi: Some(pre) })
}

fn carrier_by_carrier(
    alg: Algorithm,
    config: &ExperimentConfig,
    draw: &Draw,
    db: &DelayBasis,
    cb: &Type1Codebook,
    t: usize,
    opts: &SolverOptions,
) -> Result<(CMatrix, usize, f64, usize, f64)> {
    let pre = draw.multi.as_ref().expect("multi-carrier precoders");
    let n_c = db.carriers();
    let mut h_star = CMatrix::zeros(db.ports(), n_c);
    let (mut count, mut total, mut mecs, mut wall) = (0, 0.0, 0, 0.0);
    for k in 0..n_c {
        let basis = BasisMatrix {
            d: db.per_carrier[k].clone(),
            source: config.basis,
            singular_values: Vec::new(),
        };
        let recs: Vec<FeedbackRecord> = draw
            .records
            .iter()
            .filter(|r| r.carrier == Some(k) && r.round < t)
            .copied()
            .collect();
        let ps: Vec<Precoder> = recs.iter().map(|r| pre[r.round][k].clone()).collect();
        let inst = assemble_cpr_instance(&recs, &basis, &ps, cb, config.targets)?;
        let rep = solve(alg, &inst, opts)?;
        h_star.set_column(k, &rep.h_star.column(0));
        count += rep.violations.count;
        total += rep.violations.total;
        mecs += rep.mecs_size.unwrap_or(0);
        wall += rep.wall_time;
    }
    Ok((h_star, count, total, mecs, wall))
}

/// All rows of one trial: the baseline first, then draw-major, `T`, algorithm.
pub fn run_trial(config: &ExperimentConfig, trial: usize, pool: Option<&[ReferenceUser]>) -> Result<Vec<ResultRow>> {
    let sc = trial_scenario(config, trial, pool)?;
    let p = config.codebook;
    let cb = build_type1_codebook(p.n1, p.n2, p.o1, p.o2)?;
    let h = &sc.tu.channel.matrix;
    if cb.ports() > h.nrows() {
        return Err(SenseError::Config(format!(
            "codebook has {} ports but the channel has {} antennas",
            cb.ports(),
            h.nrows()
        )));
    }
    let multicarrier = h.ncols() > 1;
    let flat = if multicarrier { None } else { Some(flat_basis(config, &sc)?) };
    let delay = if multicarrier { Some(delay_basis(config, &sc)?) } else { None };
    let trial_seed = derive_seed(config.seed, &[trial as u64]);
    let mut rows = Vec::new();

    if config.algorithms.contains(&Algorithm::Type1Baseline) {
        let seed = derive_seed(trial_seed, &[u64::MAX]);
        let started = Instant::now();
        let est = type1_baseline(config, &cb, h, &mut rng_from_seed(seed))?;
        let wall = started.elapsed().as_secs_f64();
        let e = evaluate(h, &est)?;
        rows.push(ResultRow {
            algorithm: Algorithm::Type1Baseline.name().into(),
            t: 0,
            trial,
            seed,
            correlation: e.correlation,
            nmse_r: e.nmse_r,
            violations_count: 0,
            violation_total: 0.0,
            mecs_size: None,
            wall_time_s: wall,
        });
    }

    let solvers: Vec<Algorithm> = config
        .algorithms
        .iter()
        .copied()
        .filter(|a| *a != Algorithm::Type1Baseline)
        .collect();
    if solvers.is_empty() {
        return Ok(rows);
    }
    for d in 0..config.draws {
        let seed = derive_seed(trial_seed, &[d as u64]);
        let mut rng = rng_from_seed(seed);
        let draw = simulate_draw(config, &sc, &cb, flat.as_ref(), delay.as_ref(), &mut rng)?;
        let full = match (&flat, &delay) {
            (Some(b), _) => assemble_cpr_instance(&draw.records, b, draw.flat.as_ref().unwrap(), &cb, config.targets)?,
            (None, Some(db)) => assemble_multicarrier_instance(
                &draw.records,
                db,
                draw.multi.as_ref().unwrap(),
                &cb,
                config.grouping,
                config.targets,
            )?,
            (None, None) => unreachable!(),
        };
        let opts = SolverOptions { seed, ..config.solver };
        for &t in &config.t_values {
            let inst = full.truncate_rounds(t);
            for &alg in &solvers {
                let (h_star, count, total, mecs, wall) = if alg.is_carrier_by_carrier() {
                    let (hs, c, tot, m, w) =
                        carrier_by_carrier(alg, config, &draw, delay.as_ref().unwrap(), &cb, t, &opts)?;
                    (hs, c, tot, Some(m), w)
                } else {
                    let rep = solve(alg, &inst, &opts)?;
                    (rep.h_star, rep.violations.count, rep.violations.total, rep.mecs_size, rep.wall_time)
                };
                let e = evaluate(h, &h_star)?;
                rows.push(ResultRow {
                    algorithm: alg.name().into(),
                    t,
                    trial,
                    seed,
                    correlation: e.correlation,
                    nmse_r: e.nmse_r,
                    violations_count: count,
                    violation_total: total,
                    mecs_size: if matches!(alg, Algorithm::CbycMmUnconstrained) { None } else { mecs },
                    wall_time_s: wall,
                });
            }
        }
    }
    Ok(rows)
}

pub fn write_rows<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Runs the sweep. With `out_dir`, rows stream to `results.csv` in trial
/// order and the summary goes to `summary.json`.
pub fn run_experiment(config: &ExperimentConfig, out_dir: Option<&Path>) -> Result<ExperimentOutput> {
    config.validate()?;
    let overhead = Some(compute_overhead(&config.overhead)?);
    let pool = dataset_pool(config)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = config.threads {
        builder = builder.num_threads(n);
    }
    let workers = builder
        .build()
        .map_err(|e| SenseError::Config(format!("cannot start worker pool: {e}")))?;

    let mut writer = match out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let mut w = csv::WriterBuilder::new().has_headers(false).from_path(dir.join("results.csv"))?;
            w.write_record(RESULT_COLUMNS)?;
            Some(w)
        }
        None => None,
    };

    let (tx, rx) = mpsc::channel::<(usize, Result<Vec<ResultRow>>)>();
    let rows = std::thread::scope(|scope| -> Result<Vec<ResultRow>> {
        let pool_ref = pool.as_deref();
        scope.spawn(move || {
            workers.install(|| {
                (0..config.trials).into_par_iter().for_each_with(tx, |tx, trial| {
                    let _ = tx.send((trial, run_trial(config, trial, pool_ref)));
                });
            });
        });
        // Reorder buffer: emit trial `next` as soon as it is available.
        let mut pending: BTreeMap<usize, Vec<ResultRow>> = BTreeMap::new();
        let mut all = Vec::new();
        let mut next = 0;
        let mut first_err = None;
        for (trial, res) in rx {
            match res {
                Ok(r) => {
                    pending.insert(trial, r);
                }
                Err(e) => {
                    first_err.get_or_insert(SenseError::Config(format!("trial {trial} failed: {e}")));
                }
            }
            while let Some(r) = pending.remove(&next) {
                if let Some(w) = writer.as_mut() {
                    for row in &r {
                        w.serialize(row)?;
                    }
                    w.flush()?;
                }
                all.extend(r);
                next += 1;
            }
        }
        match first_err {
            Some(e) => Err(e),
            None => Ok(all),
        }
    })?;

    let summary = summarize(&rows, config.trials, overhead);
    if let Some(dir) = out_dir {
        let f = std::fs::File::create(dir.join("summary.json"))?;
        serde_json::to_writer_pretty(f, &summary)?;
    }
    Ok(ExperimentOutput { rows, summary })
}
