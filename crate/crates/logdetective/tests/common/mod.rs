//! Shared dense-oracle helpers for the integration suites.

#![allow(dead_code)]

use faer::Mat;
use logdetective::nystrom::{apply_precond_inv_sqrt, NystromFactors};
use logdetective::operator::LinearOperator;
use logdetective::operator::SpsdOperator;

/// Dense materialization of `M_hat = P^{-1/2} (A + I) P^{-1/2}`,
/// symmetrized to the oracle's tolerance.
pub fn dense_preconditioned_matrix(op: &SpsdOperator, factors: &NystromFactors) -> Mat<f64> {
    let n = op.dim();
    let a = op.to_dense().expect("oracle-sized operator");
    let mut half = Mat::<f64>::zeros(n, n);
    for j in 0..n {
        let col: Vec<f64> = (0..n)
            .map(|i| a[(i, j)] + if i == j { 1.0 } else { 0.0 })
            .collect();
        let s = apply_precond_inv_sqrt(factors, &col);
        for i in 0..n {
            half[(i, j)] = s[i];
        }
    }
    let mut out = Mat::<f64>::zeros(n, n);
    for i in 0..n {
        let row: Vec<f64> = (0..n).map(|j| half[(i, j)]).collect();
        let s = apply_precond_inv_sqrt(factors, &row);
        for j in 0..n {
            out[(i, j)] = s[j];
        }
    }
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (out[(i, j)] + out[(j, i)]);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// `w^T f(B) w` evaluated through a dense eigendecomposition `(lambda, U)`.
pub fn quadratic_form_from_eigh(
    eigenvalues: &[f64],
    vectors: &Mat<f64>,
    w: &[f64],
    f: impl Fn(f64) -> f64,
) -> f64 {
    let n = w.len();
    let mut acc = 0.0;
    for k in 0..n {
        let mut proj = 0.0;
        for i in 0..n {
            proj += vectors[(i, k)] * w[i];
        }
        acc += proj * proj * f(eigenvalues[k]);
    }
    acc
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn sample_std(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)).sqrt()
}

pub fn median(xs: &mut Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs[xs.len() / 2]
}

/// `||A - U diag(lam) U^T||_F` against a dense reference.
pub fn frobenius_error_to_dense(a: &Mat<f64>, factors: &NystromFactors) -> f64 {
    let approx = factors.reconstruct_dense();
    let n = a.nrows();
    let mut acc = 0.0;
    for j in 0..n {
        for i in 0..n {
            acc += (a[(i, j)] - approx[(i, j)]).powi(2);
        }
    }
    acc.sqrt()
}
