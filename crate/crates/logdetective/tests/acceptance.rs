//! Acceptance gate: every criterion below pins the exit tolerances of the
//! toolkit and prints one pass line. Run with
//! `cargo test --test acceptance -- --nocapture` to see the lines.

mod common;

use common::*;
use logdetective::bounds::{optimize_split, BoundKind, TailSpectrum};
use logdetective::estimators::{
    estimate_half_samples, estimate_one_sample, estimate_plain_slq, logdetective, Branch,
};
use logdetective::lanczos::{lanczos_error_bound, quad_form_log};
use logdetective::nystrom::{leave_one_out_error, nystrom_build, preconditioned_operator};
use logdetective::operator::{dense_eigenvalues, dense_eigh, trace_log_exact, SpsdOperator};
use logdetective::rng::{gaussian_vector, sample_gaussian_matrix};
use logdetective::testmat::{
    gaps_reference_spectrum, gen_algebraic, gen_gaps, gen_geometric, gen_rbf,
};
use logdetective::util::map_indexed;

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

#[test]
fn criterion_01_oracle_self_consistency() {
    // Analytic trace log(A+I) vs the dense eigendecomposition oracle at
    // n = 1000 for the three synthetic diagonal families. The gaps family
    // is checked on its diagonal representative (sorted gamma_j / mu).
    let n = 1000;
    let cases: Vec<(&str, SpsdOperator)> = vec![
        ("alg", gen_algebraic(n, 1e-2).unwrap()),
        ("geom", gen_geometric(n, 1e-4).unwrap()),
        (
            "gaps_diag",
            SpsdOperator::from_diagonal(
                gaps_reference_spectrum(n, n, 1e-6)
                    .unwrap()
                    .eigenvalues()
                    .to_vec(),
            )
            .unwrap(),
        ),
    ];
    for (name, op) in &cases {
        let analytic = trace_log_exact(op.known_spectrum().unwrap());
        let spectrum = dense_eigenvalues(op.to_dense().unwrap().as_ref()).unwrap();
        let via_oracle = trace_log_exact(&spectrum);
        let rel = rel_err(via_oracle, analytic);
        assert!(
            rel <= 1e-10,
            "{name}: oracle {via_oracle} vs analytic {analytic} (rel {rel:e})"
        );
    }
    println!("PASS criterion 1: oracle self-consistency at 1e-10 for alg/geom/gaps_diag");
}

#[test]
fn criterion_02_exact_capture_one_sample() {
    // A of exact rank 20 at n = 500: one-sample with ell = 40, m = 10
    // matches the oracle to 1e-7 relative on 10/10 seeds.
    let n = 500;
    let z = sample_gaussian_matrix(n, 20, 12345).unwrap();
    let mut a = faer::Mat::<f64>::zeros(n, n);
    faer::linalg::matmul::matmul(
        a.as_mut(),
        faer::Accum::Replace,
        z.matrix(),
        z.matrix().transpose(),
        1.0,
        faer::Par::Seq,
    );
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    let op = SpsdOperator::from_dense(a).unwrap();
    let (spectrum, _) = dense_eigh(op.to_dense().unwrap().as_ref()).unwrap();
    let exact = trace_log_exact(&spectrum);
    let mut worst = 0.0f64;
    for seed in 0..10 {
        let fork = op.fork_counter();
        let r = estimate_one_sample(&fork, 40, 10, seed).unwrap();
        worst = worst.max(rel_err(r.value, exact));
    }
    assert!(
        worst <= 1e-7,
        "worst relative error {worst:e} over 10 seeds"
    );
    println!("PASS criterion 2: exact-capture one-sample within 1e-7 (worst {worst:.3e})");
}

#[test]
fn criterion_03_girard_hutchinson_unbiasedness() {
    // n = 60, m = n: 5000 single-probe estimates, mean within 4 standard
    // errors of the oracle.
    let n = 60;
    let op = gen_algebraic(n, 1e-2).unwrap();
    let exact = trace_log_exact(op.known_spectrum().unwrap());
    let values: Vec<f64> = map_indexed(5000, |seed| {
        let fork = op.fork_counter();
        estimate_plain_slq(&fork, 1, n, seed as u64).unwrap().value
    });
    let m = mean(&values);
    let se = sample_std(&values) / (values.len() as f64).sqrt();
    assert!(
        (m - exact).abs() <= 4.0 * se,
        "mean {m} vs exact {exact}, se {se}"
    );
    println!(
        "PASS criterion 3: single-probe mean {m:.6} vs exact {exact:.6} within 4 se ({se:.2e})"
    );
}

#[test]
fn criterion_04_lanczos_apriori_bound() {
    // Preconditioned geometric example, n = 1000, ell = 200: the empirical
    // quadrature error must stay below the a-priori bound for m in 2..=10
    // over 20 probe seeds, with kappa from the dense oracle.
    //
    // Known limitation, kept faithful instead of loosened: at m = 10 the
    // bound evaluates to ~7.4 * eps * ||w||^2, inside the rounding envelope
    // of any 64-bit Lanczos/oracle evaluation, and the measured values there
    // are dominated by floating-point noise on top of a near-tight true
    // error. Seeds whose noise lands unfavorably exceed the bound by tens of
    // percent; m <= 9 passes with orders-of-magnitude margin.
    let n = 1000;
    let op = gen_geometric(n, 1e-4).unwrap();
    let omega = sample_gaussian_matrix(n, 200, 777).unwrap();
    let factors = nystrom_build(&op, &omega).unwrap();
    let mhat_dense = dense_preconditioned_matrix(&op, &factors);
    let (spec, vecs) = dense_eigh(mhat_dense.as_ref()).unwrap();
    let eigs = spec.eigenvalues();
    let kappa = eigs[0] / eigs[n - 1];
    let precond = preconditioned_operator(&op, &factors);
    let mut violations: Vec<String> = Vec::new();
    let mut worst_margin = f64::INFINITY;
    for seed in 0..20u64 {
        let w = gaussian_vector(n, 4000 + seed);
        let w_norm_sq: f64 = w.iter().map(|x| x * x).sum();
        let exact_quad = quadratic_form_from_eigh(eigs, &vecs, &w, f64::ln);
        for m in 2..=10usize {
            let q = quad_form_log(&precond, &w, m, true).unwrap();
            let lanc = (q.value - exact_quad).abs();
            let bound = lanczos_error_bound(kappa, m, w_norm_sq).unwrap();
            if lanc > bound {
                violations.push(format!(
                    "seed {seed}, m {m}: empirical {lanc:.3e} > bound {bound:.3e} ({:.2}x)",
                    lanc / bound
                ));
            }
            worst_margin = worst_margin.min(bound / lanc.max(f64::MIN_POSITIVE));
        }
    }
    assert!(
        violations.is_empty(),
        "Lanczos a-priori bound violated at {} of 180 samples (kappa(M_hat) = {kappa:.9}; \
         the m = 10 bound sits at the f64 noise floor of ~eps*||w||^2):\n{}",
        violations.len(),
        violations.join("\n")
    );
    println!(
        "PASS criterion 4: Lanczos error within a-priori bound, kappa(M_hat) = {kappa:.6}, worst margin {worst_margin:.2e}x"
    );
}

#[test]
fn criterion_05_one_sample_bound_satisfaction() {
    // Geometric and RBF examples at n = 1000, ell in {100, 200, 400},
    // m = 30, 100 seeds: the sample mean of the squared one-sample error
    // stays below 2x the (k, p)-optimized expectation bound.
    //
    // Known limitation, kept faithful instead of loosened: on the geometric
    // example at ell = 400 the optimized bound dives to ~3e-21 absolute
    // (~7e-24 relative to the answer), while the stabilization shift
    // nu = eps*||Y||_F floors the achievable squared error near 5e-16 —
    // 64-bit arithmetic cannot even represent the answer that accurately.
    // The remaining five configurations validate the bound with margin.
    let n = 1000;
    let cases: Vec<(&str, SpsdOperator)> = vec![
        ("geom", gen_geometric(n, 1e-4).unwrap()),
        ("rbf", gen_rbf(n, 1e-4, 1e-2, 31, 1).unwrap()),
    ];
    let mut violations: Vec<String> = Vec::new();
    for (name, op) in &cases {
        let spectrum = match op.known_spectrum() {
            Some(s) => s.clone(),
            None => dense_eigenvalues(op.to_dense().unwrap().as_ref()).unwrap(),
        };
        let exact = trace_log_exact(&spectrum);
        let ts = TailSpectrum::new(&spectrum);
        for &ell in &[100usize, 200, 400] {
            let (_, _, bound) = optimize_split(&ts, ell, BoundKind::OneSample).unwrap();
            let sq_errors: Vec<f64> = map_indexed(100, |seed| {
                let fork = op.fork_counter();
                let r = estimate_one_sample(&fork, ell, 30, seed as u64).unwrap();
                (r.value - exact).powi(2)
            });
            let mean_sq = mean(&sq_errors);
            println!(
                "  criterion 5 [{name}, ell={ell}]: mean err^2 {mean_sq:.3e} vs 2 x bound {:.3e}",
                2.0 * bound
            );
            if mean_sq > 2.0 * bound {
                violations.push(format!(
                    "{name}, ell {ell}: mean squared error {mean_sq:.3e} above 2 x bound {:.3e}",
                    2.0 * bound
                ));
            }
        }
    }
    assert!(
        violations.is_empty(),
        "one-sample bound violated in {} of 6 configurations (the geometric ell = 400 bound \
         lies below the f64 representation floor of the target value):\n{}",
        violations.len(),
        violations.join("\n")
    );
    println!("PASS criterion 5: one-sample errors within 2x the optimized bound");
}

#[test]
fn criterion_06_leave_one_out_fidelity() {
    // Algebraic-decay diagonal at n = 500, ell = 50: the median over 100
    // seeds of estimate/truth stays within a factor 3.
    let n = 500;
    let op = gen_algebraic(n, 1.0).unwrap();
    let a = op.to_dense().unwrap();
    let mut ratios: Vec<f64> = map_indexed(100, |seed| {
        let omega = sample_gaussian_matrix(n, 50, 2000 + seed as u64).unwrap();
        let factors = nystrom_build(&op.fork_counter(), &omega).unwrap();
        let est = leave_one_out_error(&op, &omega, factors.sketch()).unwrap();
        let truth = frobenius_error_to_dense(&a, &factors);
        est.value / truth
    });
    let med = median(&mut ratios);
    assert!(
        (1.0 / 3.0..=3.0).contains(&med),
        "median estimate/truth ratio {med} outside [1/3, 3]"
    );
    println!("PASS criterion 6: leave-one-out median ratio {med:.3} within factor 3");
}

#[test]
fn criterion_07_logdetective_branch_selection() {
    // beta = 3/4, m = 10, ell = 400 at n = 1000: geometric decay must take
    // the one-sample branch in >= 90/100 seeds, the flat spectrum 10*I the
    // mixed branch in >= 90/100 seeds.
    let n = 1000;
    let geom = gen_geometric(n, 1e-4).unwrap();
    let flat = SpsdOperator::from_diagonal(vec![10.0; n]).unwrap();
    let count_branches = |op: &SpsdOperator| -> (usize, usize) {
        let branches: Vec<Branch> = map_indexed(100, |seed| {
            let fork = op.fork_counter();
            logdetective(&fork, 400, 10, 0.75, seed as u64)
                .unwrap()
                .branch
        });
        let one = branches.iter().filter(|b| **b == Branch::OneSample).count();
        let mixed = branches.iter().filter(|b| **b == Branch::Mixed).count();
        (one, mixed)
    };
    let (geom_one, _) = count_branches(&geom);
    let (_, flat_mixed) = count_branches(&flat);
    assert!(
        geom_one >= 90,
        "geometric decay picked one-sample only {geom_one}/100 times"
    );
    assert!(
        flat_mixed >= 90,
        "flat spectrum picked mixed only {flat_mixed}/100 times"
    );
    println!(
        "PASS criterion 7: branch selection geom one_sample {geom_one}/100, flat mixed {flat_mixed}/100"
    );
}

#[test]
fn criterion_08_strategy_ordering_at_fixed_budget() {
    // Geometric example, n = 1000, total budget 410 (ell = 400, m = 10),
    // 100 trials: mean relative error ordering
    // one_sample < half_samples < plain SLQ (matched matvecs).
    let n = 1000;
    let op = gen_geometric(n, 1e-4).unwrap();
    let exact = trace_log_exact(op.known_spectrum().unwrap());
    let (ell, m) = (400usize, 10usize);
    let total = ell + m;

    let errors = |which: &str| -> Vec<f64> {
        map_indexed(100, |seed| {
            let fork = op.fork_counter();
            let value = match which {
                "one_sample" => {
                    estimate_one_sample(&fork, ell, m, seed as u64)
                        .unwrap()
                        .value
                }
                "half_samples" => {
                    estimate_half_samples(&fork, ell, m, seed as u64)
                        .unwrap()
                        .value
                }
                _ => {
                    estimate_plain_slq(&fork, total / m, m, seed as u64)
                        .unwrap()
                        .value
                }
            };
            rel_err(value, exact)
        })
    };
    let one = mean(&errors("one_sample"));
    let half = mean(&errors("half_samples"));
    let slq = mean(&errors("plain_slq"));
    assert!(
        one < half && half < slq,
        "ordering violated: one_sample {one:e}, half_samples {half:e}, plain_slq {slq:e}"
    );
    println!(
        "PASS criterion 8: mean rel errors one_sample {one:.3e} < half_samples {half:.3e} < plain_slq {slq:.3e}"
    );
}

#[test]
fn criterion_09_budget_accounting_property() {
    // 200 random parameter tuples: the matvec-counter delta equals the
    // documented budget formula exactly for every strategy.
    let mut state = 0xACCE55u64;
    let next = |state: &mut u64, lo: usize, hi: usize| {
        *state = logdetective::rng::mix64(*state);
        lo + (*state % (hi - lo + 1) as u64) as usize
    };
    let mut checked = 0usize;
    for case in 0..200 {
        let n = next(&mut state, 60, 160);
        let ell = next(&mut state, 4, 30);
        let m = next(&mut state, 1, 10);
        let seed = (case * 7919) as u64;
        // Smooth full-rank spectrum: no early Lanczos breakdown.
        let vals: Vec<f64> = (0..n)
            .map(|i| 0.4 + 3.0 * ((i * 2654435761 + case) % 997) as f64 / 997.0)
            .collect();
        let op = SpsdOperator::from_diagonal(vals).unwrap();

        let n_probes = next(&mut state, 1, 4);
        let fork = op.fork_counter();
        let r = estimate_plain_slq(&fork, n_probes, m, seed).unwrap();
        assert_eq!(r.matvecs_used, (n_probes * m) as u64);
        assert_eq!(fork.matvec_count(), r.matvecs_used);

        let fork = op.fork_counter();
        let r = logdetective::estimate_lowrank(&fork, ell + m, seed).unwrap();
        assert_eq!(r.matvecs_used, (ell + m) as u64);

        let fork = op.fork_counter();
        let r = estimate_one_sample(&fork, ell, m, seed).unwrap();
        assert_eq!(r.matvecs_used, (ell + m) as u64);

        let alpha = [0.25, 0.5, 0.75][next(&mut state, 0, 2)];
        let rank = ((alpha * ell as f64) + 1e-9).floor() as usize;
        if rank >= 1 {
            let fork = op.fork_counter();
            let r = logdetective::estimate_alpha_rank(&fork, ell, m, alpha, seed).unwrap();
            let n_probes = (ell + m - rank) / m;
            assert_eq!(r.matvecs_used, (rank + n_probes * m) as u64);
            assert!(r.matvecs_used <= (ell + m) as u64);
        }

        let rank = (ell + m) / 2;
        let n_probes = (ell + m - rank) / m;
        if n_probes >= 1 {
            let fork = op.fork_counter();
            let r = estimate_half_samples(&fork, ell, m, seed).unwrap();
            assert_eq!(r.matvecs_used, (rank + n_probes * m) as u64);
        }

        let r2 = ((0.5625 * ell as f64) + 1e-9).floor() as usize;
        if r2 >= 2 {
            let fork = op.fork_counter();
            let r = logdetective(&fork, ell, m, 0.75, seed).unwrap();
            let r1 = ((0.75 * ell as f64) + 1e-9).floor() as usize;
            let expected = match r.branch {
                Branch::OneSample => (ell + m) as u64,
                _ => (r1 + ((ell + m - r1) / m) * m) as u64,
            };
            assert_eq!(
                r.matvecs_used, expected,
                "case {case} branch {:?}",
                r.branch
            );
        }
        checked += 1;
    }
    assert_eq!(checked, 200);
    println!("PASS criterion 9: budget formulas exact on 200 random tuples");
}

#[test]
fn criterion_10_gaps_conditioning() {
    // Example Gaps at n = 4000, mu = 1e-6: dense-oracle kappa(A+I) within
    // [1e7, 1e9].
    let n = 4000;
    let op = gen_gaps(n, n, 1e-2, 1e-6, 0).unwrap();
    let dense = op.to_dense().unwrap();
    let spectrum = dense_eigenvalues(dense.as_ref()).unwrap();
    let lam = spectrum.eigenvalues();
    let kappa = (1.0 + lam[0]) / (1.0 + lam[n - 1]);
    assert!(
        (1e7..=1e9).contains(&kappa),
        "kappa(A+I) = {kappa:e} outside [1e7, 1e9]"
    );
    println!("PASS criterion 10: gaps conditioning kappa(A+I) = {kappa:.3e} in [1e7, 1e9]");
}
