//! Emits the quadrature-convergence comparison as CSV: for a grid of
//! preconditioner ranks, the mean Lanczos quadrature error at m = 10 and
//! m = 50 against the dense logarithm of the (fixed) preconditioned matrix,
//! and the mean single-probe trace-estimation error, all over 100 Gaussian
//! probes and normalized by the exact trace-log. Shows where extra Lanczos
//! steps stop paying off relative to the trace-estimation noise.
//!
//! Usage: cargo run --release --example lanczos_convergence [n] > lanczos.csv
//! (paper-scale runs use n = 4000; the default keeps it quick)

use logdetective::lanczos::quad_form_log;
use logdetective::nystrom::{apply_precond_inv_sqrt, nystrom_build, preconditioned_operator};
use logdetective::operator::{dense_eigh, trace_log_exact};
use logdetective::rng::{gaussian_vector, sample_gaussian_matrix};
use logdetective::testmat::gen_geometric;

fn main() {
    let n: usize = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(1000);
    let op = gen_geometric(n, 1e-4).unwrap();
    let exact = trace_log_exact(op.known_spectrum().unwrap());
    let a = op.to_dense().unwrap();

    println!("ell,mean_lanc_m10,mean_lanc_m50,mean_tracest");
    let mut ell = n / 10;
    while ell <= n.min(1000) {
        let omega = sample_gaussian_matrix(n, ell, 777).unwrap();
        let factors = nystrom_build(&op, &omega).unwrap();
        let precond = preconditioned_operator(&op, &factors);

        // Dense log(M_hat) through the eigendecomposition of the
        // materialized preconditioned matrix.
        let mut half = faer::Mat::<f64>::zeros(n, n);
        for j in 0..n {
            let col: Vec<f64> = (0..n)
                .map(|i| a[(i, j)] + if i == j { 1.0 } else { 0.0 })
                .collect();
            let s = apply_precond_inv_sqrt(&factors, &col);
            for i in 0..n {
                half[(i, j)] = s[i];
            }
        }
        let mut mhat = faer::Mat::<f64>::zeros(n, n);
        for i in 0..n {
            let row: Vec<f64> = (0..n).map(|j| half[(i, j)]).collect();
            let s = apply_precond_inv_sqrt(&factors, &row);
            for j in 0..n {
                mhat[(i, j)] = s[j];
            }
        }
        for i in 0..n {
            for j in 0..i {
                let v = 0.5 * (mhat[(i, j)] + mhat[(j, i)]);
                mhat[(i, j)] = v;
                mhat[(j, i)] = v;
            }
        }
        let (spec, vecs) = dense_eigh(mhat.as_ref()).unwrap();
        let trace_log_m: f64 = spec.eigenvalues().iter().map(|l| l.ln()).sum();

        let mut sums = (0.0f64, 0.0f64, 0.0f64);
        let probes = 100;
        for seed in 0..probes as u64 {
            let w = gaussian_vector(n, 9_000 + seed);
            let mut wq = 0.0;
            for k in 0..n {
                let mut proj = 0.0;
                for i in 0..n {
                    proj += vecs[(i, k)] * w[i];
                }
                wq += proj * proj * spec.eigenvalues()[k].ln();
            }
            let q10 = quad_form_log(&precond, &w, 10, true).unwrap().value;
            let q50 = quad_form_log(&precond, &w, 50.min(n), true).unwrap().value;
            sums.0 += (q10 - wq).abs();
            sums.1 += (q50 - wq).abs();
            sums.2 += (trace_log_m - wq).abs();
        }
        let norm = probes as f64 * exact;
        println!(
            "{ell},{:e},{:e},{:e}",
            sums.0 / norm,
            sums.1 / norm,
            sums.2 / norm
        );
        ell += n / 10;
    }
}
