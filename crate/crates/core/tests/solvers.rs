//! Solver behaviour on constructed instances with known answers.

use proptest::prelude::*;

use sense_core::basis::{idft_matrix, reconstruct_csi, BasisMatrix, BasisSource, DelayBasis};
use sense_core::codebook::{build_type1_codebook, Type1Codebook};
use sense_core::feedback::{
    assemble_cpr_instance, assemble_multicarrier_instance, simulate_carrier_round, simulate_group_round,
    simulate_round, CprInstance, Estimation, FeedbackRecord, Grouping, TargetSource,
};
use sense_core::linalg::{complex_gaussian_matrix, orthonormal_span, rng_from_seed, SenseRng};
use sense_core::metrics::{evaluate, nmse_r};
use sense_core::precoder::{gen_hybrid_precoder, gen_subcarrier_precoders, Precoder};
use sense_core::solvers::{
    count_violations, mecs_construct, mecs_sgda_solve, mm_unconstrained_solve, pd_evd_solve, power_method,
    sgda_gradient, sgda_lagrangian, sgda_solve, solve_multicarrier, SolverOptions,
};
use sense_core::{CMatrix, CVector, C64};

fn random_vector(n: usize, rng: &mut SenseRng) -> CVector {
    complex_gaussian_matrix(n, 1, 1.0, rng).column(0).into_owned()
}

struct Case {
    instance: CprInstance,
    g_true: CVector,
}

/// Flat instance with `h = D g_true` and `D` a random orthonormal `m x l`.
fn case(cb: &Type1Codebook, m: usize, l: usize, t: usize, est: Estimation, seed: u64) -> Case {
    let mut rng = rng_from_seed(seed);
    let basis = BasisMatrix {
        d: orthonormal_span(&complex_gaussian_matrix(m, l, 1.0, &mut rng), 1e-12),
        source: BasisSource::RuCsi,
        singular_values: vec![],
    };
    let g_true = random_vector(l, &mut rng);
    let h = &basis.d * &g_true;
    let mut pre = Vec::new();
    let mut recs = Vec::new();
    for r in 0..t {
        let p = gen_hybrid_precoder(&basis, cb.ports(), 1.0, &mut rng).unwrap();
        recs.push(simulate_round(&h, &p, cb, est, None, r, &mut rng).unwrap());
        pre.push(p);
    }
    let instance = assemble_cpr_instance(&recs, &basis, &pre, cb, TargetSource::Raw).unwrap();
    Case { instance, g_true }
}

fn small_codebook() -> Type1Codebook {
    build_type1_codebook(2, 1, 4, 1).unwrap()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

#[test]
fn mm_objective_never_increases() {
    let cb = small_codebook();
    let opts = SolverOptions { trace: true, ..Default::default() };
    for seed in 0..10 {
        let c = case(&cb, 8, 3, 6, Estimation::SnrDb(10.0), seed);
        let r = mm_unconstrained_solve(&c.instance, &opts).unwrap();
        assert_eq!(r.flags.eig_restarts, 0);
        for w in r.trace.windows(2) {
            assert!(
                w[1].objective <= w[0].objective * (1.0 + 1e-9) + 1e-15,
                "seed {seed}: iteration {} went from {} to {}",
                w[1].iter,
                w[0].objective,
                w[1].objective
            );
        }
    }
}

#[test]
fn mm_fits_a_single_round_exactly() {
    let cb = small_codebook();
    for seed in 0..10 {
        let c = case(&cb, 8, 3, 1, Estimation::Exact, 20 + seed);
        let r = mm_unconstrained_solve(&c.instance, &SolverOptions::default()).unwrap();
        let q = c.instance.blocks[0].target;
        let got = c.instance.selected_power(0, &r.g_star);
        assert!((got - q).abs() < 1e-8 * q, "seed {seed}: {got} vs {q}");
    }
}

#[test]
fn mm_recovers_noiseless_two_dimensional_coefficients() {
    let cb = small_codebook();
    let opts = SolverOptions { inner_tol: 1e-12, inner_max_iters: 5_000, ..Default::default() };
    for seed in 0..20 {
        let c = case(&cb, 8, 2, 12, Estimation::Exact, 40 + seed);
        let r = mm_unconstrained_solve(&c.instance, &opts).unwrap();
        let scale = c.instance.mean_target();
        assert!(r.objective < 1e-8 * scale * scale, "seed {seed}: objective {}", r.objective);
        let err = nmse_r(&c.g_true, &r.g_star).unwrap();
        assert!(err < 1e-3, "seed {seed}: nmse_r {err}");
    }
}

#[test]
fn pd_evd_first_pass_is_mm() {
    let cb = small_codebook();
    let opts = SolverOptions { outer_max_iters: 1, ..Default::default() };
    for seed in 0..5 {
        let c = case(&cb, 8, 3, 4, Estimation::SnrDb(10.0), 60 + seed);
        let mm = mm_unconstrained_solve(&c.instance, &opts).unwrap();
        let pd = pd_evd_solve(&c.instance, &opts, None).unwrap();
        assert_eq!(mm.g_star, pd.g_star);
        assert_eq!(mm.inner_iterations, pd.inner_iterations);
    }
}

#[test]
fn scalar_problem_matches_closed_form() {
    // With L = 1 every constraint is a sign condition independent of g, and
    // the objective Σ (q − a|g|²)² is minimised at |g|² = Σ q a / Σ a².
    // Exact PMIs keep the signs right; perturbed targets make the fit inexact.
    let cb = small_codebook();
    for seed in 0..10 {
        let mut c = case(&cb, 8, 1, 5, Estimation::Exact, 80 + seed);
        for (b, blk) in c.instance.blocks.iter_mut().enumerate() {
            blk.target *= 1.0 + 0.3 * ((b as f64 + seed as f64) * 1.7).sin();
        }
        let inst = &c.instance;
        let one = CVector::from_element(1, C64::new(1.0, 0.0));
        let a: Vec<f64> = (0..inst.n_blocks()).map(|b| inst.selected_power(b, &one)).collect();
        let num: f64 = inst.blocks.iter().zip(&a).map(|(blk, a)| blk.target * a).sum();
        let den: f64 = a.iter().map(|a| a * a).sum();
        let expected = num / den;
        for r in [
            mm_unconstrained_solve(inst, &SolverOptions::default()).unwrap(),
            pd_evd_solve(inst, &SolverOptions::default(), None).unwrap(),
        ] {
            let got = r.g_star[0].norm_sqr();
            assert!((got - expected).abs() < 1e-8 * expected, "seed {seed}: {got} vs {expected}");
        }
    }
}

#[test]
fn pd_evd_violates_no_more_than_mm_on_average() {
    let cb = small_codebook();
    let (mut mm, mut pd) = (Vec::new(), Vec::new());
    for seed in 0..20 {
        let c = case(&cb, 8, 3, 2, Estimation::Exact, 100 + seed);
        let opts = SolverOptions::default();
        mm.push(mm_unconstrained_solve(&c.instance, &opts).unwrap().violations.count as f64);
        pd.push(pd_evd_solve(&c.instance, &opts, None).unwrap().violations.count as f64);
    }
    assert!(mean(&pd) <= mean(&mm), "pd_evd {} vs mm {}", mean(&pd), mean(&mm));
}

#[test]
fn mecs_output_satisfies_every_constraint() {
    let cb = build_type1_codebook(4, 1, 4, 1).unwrap();
    for seed in 0..10 {
        for est in [Estimation::Exact, Estimation::SnrDb(5.0)] {
            let c = case(&cb, 12, 4, 3, est, 120 + seed);
            let full = c.instance.n_constraints();
            let m = mecs_construct(&c.instance, &SolverOptions::default()).unwrap();
            if est == Estimation::Exact {
                // The true coefficients are feasible, so the set must be too.
                assert!(!m.partial, "seed {seed}");
                assert_eq!(count_violations(&m.g, &c.instance, None).count, 0, "seed {seed}");
            }
            assert!(m.sizes.windows(2).all(|w| w[0] <= w[1]));
            assert_eq!(m.sizes.last().copied().unwrap_or(0), m.set.len());
            assert!(m.set.len() <= full && m.rounds <= full + 1);
            assert!(m.set.windows(2).all(|w| w[0] < w[1]));
        }
    }
}

#[test]
fn mecs_is_empty_when_the_start_is_feasible() {
    // L = 1 with exact feedback: every constraint holds for any nonzero g.
    let cb = small_codebook();
    let c = case(&cb, 8, 1, 3, Estimation::Exact, 140);
    let m = mecs_construct(&c.instance, &SolverOptions::default()).unwrap();
    assert!(m.set.is_empty());
    assert_eq!(m.rounds, 1);
}

#[test]
fn sgda_gradient_matches_finite_differences() {
    let cb = small_codebook();
    let c = case(&cb, 8, 3, 3, Estimation::SnrDb(10.0), 150);
    let inst = &c.instance;
    let set: Vec<_> = inst.all_constraints().step_by(2).collect();
    let mut rng = rng_from_seed(151);
    for _ in 0..10 {
        let g = random_vector(3, &mut rng);
        let z = random_vector(3, &mut rng);
        let nu: Vec<f64> = (0..set.len()).map(|i| (i % 3) as f64 * 0.7).collect();
        let p = 2.5;
        let grad = sgda_gradient(inst, &set, &nu, &z, p, &g);
        let f = |x: &CVector| sgda_lagrangian(inst, &set, &nu, &z, p, x);
        let h = 1e-6 * g.norm();
        let mut err: f64 = 0.0;
        for i in 0..3 {
            for unit in [C64::new(1.0, 0.0), C64::new(0.0, 1.0)] {
                let mut e = CVector::zeros(3);
                e[i] = unit * h;
                let fd = (f(&(&g + &e)) - f(&(&g - &e))) / (2.0 * h);
                // The gradient is ∂/∂Re + j ∂/∂Im, so the slope along e is Re(e^H ∇) / h.
                let analytic = (unit.conj() * grad[i]).re;
                err = err.max((fd - analytic).abs());
            }
        }
        assert!(err < 1e-5 * grad.norm().max(1.0), "error {err} against |grad| {}", grad.norm());
    }
}

#[test]
fn sgda_without_constraints_matches_mm_objective() {
    let cb = small_codebook();
    for seed in 0..20 {
        let c = case(&cb, 8, 3, 8, Estimation::SnrDb(5.0), 160 + seed);
        let inst = &c.instance;
        let mut m = CMatrix::zeros(3, 3);
        for b in 0..inst.n_blocks() {
            m += inst.selected_outer(b) * C64::new(inst.blocks[b].target, 0.0);
        }
        let p_default = 4.0 * power_method(&m, 1e-12, 10_000).value;
        let mut opts = SolverOptions { inner_tol: 1e-12, inner_max_iters: 2_000, ..Default::default() };
        let mm = mm_unconstrained_solve(inst, &opts).unwrap();
        opts.sgda.p = Some(1e-6 * p_default);
        opts.sgda.s1 = Some(1.0 / (2.0 * p_default));
        opts.sgda.max_iters = 50_000;
        let sg = sgda_solve(inst, &[], &opts, &mm_start(inst)).unwrap();
        let (a, b) = (sg.objective, mm.objective);
        let scale = inst.mean_target();
        assert!(
            (a - b).abs() <= 0.01 * a.max(b) + 1e-9 * scale * scale,
            "seed {seed}: sgda {a} vs mm {b}"
        );
    }
}

fn mm_start(inst: &CprInstance) -> CVector {
    sense_core::solvers::initial_point(inst, &SolverOptions::default())
}

#[test]
fn mecs_sgda_violates_far_less_than_mm_on_noiseless_instances() {
    let cb = build_type1_codebook(4, 1, 4, 1).unwrap();
    let (mut mm, mut sg) = (0.0, 0.0);
    for seed in 0..20 {
        let c = case(&cb, 12, 4, 2, Estimation::Exact, 200 + seed);
        let opts = SolverOptions::default();
        mm += mm_unconstrained_solve(&c.instance, &opts).unwrap().violations.total;
        sg += mecs_sgda_solve(&c.instance, &opts).unwrap().violations.total;
    }
    assert!(mm > 0.0);
    assert!(sg <= 0.1 * mm, "mecs_sgda {sg} vs mm {mm}");
}

#[test]
fn report_channel_is_basis_times_coefficients() {
    let cb = small_codebook();
    let c = case(&cb, 8, 3, 3, Estimation::SnrDb(10.0), 230);
    let r = mecs_sgda_solve(&c.instance, &SolverOptions::default()).unwrap();
    assert_eq!(r.h_star, c.instance.reconstruct(&r.g_star));
    assert_eq!(r.violations, count_violations(&r.g_star, &c.instance, None));
    assert!(r.mecs_size.is_some());
}

/// Brute-force violation count from the stored measurement vectors.
fn violation_oracle(g: &CVector, inst: &CprInstance) -> (usize, f64) {
    let mut count = 0;
    let mut total = 0.0;
    for blk in &inst.blocks {
        let power = |j: usize| -> f64 { blk.components.iter().map(|c| c.column(j).dotc(g).norm_sqr()).sum() };
        let sel = power(blk.pmi);
        for j in 0..inst.n_codewords {
            let v = power(j) - sel;
            if j != blk.pmi && v > 1e-9 * sel {
                count += 1;
                total += v;
            }
        }
    }
    (count, total)
}

#[test]
fn violation_count_matches_double_loop() {
    let cb = small_codebook();
    let c = case(&cb, 8, 3, 4, Estimation::SnrDb(5.0), 240);
    let mut rng = rng_from_seed(241);
    for _ in 0..20 {
        let g = random_vector(3, &mut rng);
        let v = count_violations(&g, &c.instance, None);
        let (count, total) = violation_oracle(&g, &c.instance);
        assert_eq!(v.count, count);
        assert!((v.total - total).abs() < 1e-12 * total.max(1.0));
        let subset: Vec<_> = c.instance.all_constraints().collect();
        assert_eq!(count_violations(&g, &c.instance, Some(&subset)).count, count);
    }
    assert_eq!(count_violations(&c.g_true, &case(&cb, 8, 3, 4, Estimation::Exact, 240).instance, None).count, 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn violation_count_ignores_phase_and_scale(seed in any::<u64>(), re in -3.0f64..3.0, im in -3.0f64..3.0) {
        prop_assume!(re.abs() + im.abs() > 1e-3);
        let cb = small_codebook();
        let c = case(&cb, 6, 3, 3, Estimation::SnrDb(5.0), seed);
        let mut rng = rng_from_seed(seed ^ 7);
        let g = random_vector(3, &mut rng);
        let scaled = &g * C64::new(re, im);
        prop_assert_eq!(
            count_violations(&g, &c.instance, None).count,
            count_violations(&scaled, &c.instance, None).count
        );
    }
}

/// Multi-carrier noiseless case over a shared random spatial basis.
fn multicarrier_case(
    cb: &Type1Codebook,
    grouping: Grouping,
    m: usize,
    n_c: usize,
    l: usize,
    n_l: usize,
    t: usize,
    seed: u64,
) -> (CprInstance, CMatrix) {
    let mut rng = rng_from_seed(seed);
    let d = orthonormal_span(&complex_gaussian_matrix(m, l, 1.0, &mut rng), 1e-12);
    let basis = DelayBasis {
        d_tilde: d.clone(),
        f: idft_matrix(n_c, n_l),
        per_carrier: vec![d; n_c],
    };
    let g = complex_gaussian_matrix(l, n_l, 1.0, &mut rng);
    let h = reconstruct_csi(&g, &basis).unwrap();
    let mut precoders: Vec<Vec<Precoder>> = Vec::new();
    let mut records: Vec<FeedbackRecord> = Vec::new();
    for r in 0..t {
        let ps = gen_subcarrier_precoders(&basis, cb.ports(), 1.0, &mut rng).unwrap();
        match grouping {
            Grouping::PerCarrier => {
                for (k, p) in ps.iter().enumerate() {
                    let hk = h.column(k).into_owned();
                    records.push(simulate_carrier_round(&hk, p, cb, Estimation::Exact, None, r, k, &mut rng).unwrap());
                }
            }
            Grouping::Groups(size) => {
                for grp in 0..n_c / size {
                    let members: Vec<(CVector, &Precoder)> =
                        (grp * size..(grp + 1) * size).map(|k| (h.column(k).into_owned(), &ps[k])).collect();
                    records.push(simulate_group_round(&members, cb, Estimation::Exact, None, r, grp, &mut rng).unwrap());
                }
            }
        }
        precoders.push(ps);
    }
    let inst = assemble_multicarrier_instance(&records, &basis, &precoders, cb, grouping, TargetSource::Raw).unwrap();
    (inst, h)
}

#[test]
fn single_carrier_multicarrier_solve_equals_flat_solve() {
    let cb = small_codebook();
    let c = case(&cb, 8, 3, 3, Estimation::SnrDb(10.0), 250);
    let d = match &c.instance.lift {
        sense_core::feedback::Lift::Flat { d } => d.clone(),
        _ => unreachable!(),
    };
    let mut mc = c.instance.clone();
    mc.lift = sense_core::feedback::Lift::Delay { d_tilde: d, f: idft_matrix(1, 1) };
    for b in &mut mc.blocks {
        b.carrier = Some(0);
    }
    let opts = SolverOptions::default();
    let flat = mecs_sgda_solve(&c.instance, &opts).unwrap();
    let joint = solve_multicarrier(&mc, &opts).unwrap();
    assert_eq!(flat.g_star, joint.g_star);
    assert!((flat.h_star - joint.h_star).norm() < 1e-12);
}

#[test]
fn joint_sensing_recovers_noiseless_multicarrier_channels() {
    let cb = build_type1_codebook(4, 2, 4, 4).unwrap();
    let mut corr = Vec::new();
    for seed in 0..20 {
        let (inst, h) = multicarrier_case(&cb, Grouping::PerCarrier, 16, 12, 5, 5, 4, 300 + seed);
        let r = solve_multicarrier(&inst, &SolverOptions::default()).unwrap();
        corr.push(evaluate(&h, &r.h_star).unwrap().correlation);
    }
    assert!(mean(&corr) >= 0.95, "mean correlation {}", mean(&corr));
}

#[test]
fn per_carrier_feedback_beats_one_group() {
    let cb = build_type1_codebook(2, 2, 4, 4).unwrap();
    let (mut per, mut grp) = (Vec::new(), Vec::new());
    for seed in 0..10 {
        let opts = SolverOptions::default();
        let (inst, h) = multicarrier_case(&cb, Grouping::PerCarrier, 8, 6, 3, 2, 2, 400 + seed);
        per.push(evaluate(&h, &solve_multicarrier(&inst, &opts).unwrap().h_star).unwrap().correlation);
        let (inst, h) = multicarrier_case(&cb, Grouping::Groups(6), 8, 6, 3, 2, 2, 400 + seed);
        grp.push(evaluate(&h, &solve_multicarrier(&inst, &opts).unwrap().h_star).unwrap().correlation);
    }
    assert!(mean(&per) >= mean(&grp), "per-carrier {} vs group {}", mean(&per), mean(&grp));
}
