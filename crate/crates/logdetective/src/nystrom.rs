//! Nystrom low-rank approximation `A_hat = A Omega (Omega^T A Omega)^+ Omega^T A`,
//! the induced preconditioner `P_hat = A_hat + I`, sketch enlargement, and the
//! zero-matvec leave-one-out estimate of `||A - A_hat||_F`.

use faer::{Mat, MatRef};

use crate::error::{LogDetError, Result};
use crate::operator::{LinearOperator, SpsdOperator};
use crate::rng::GaussianMatrix;
use crate::util::{frobenius_norm, NeumaierSum};

/// Escalation retries after a Cholesky breakdown (shift grows 10x each time).
const SHIFT_RETRIES: usize = 3;

/// Below this Frobenius norm the sketch is treated as exactly zero.
const ZERO_SKETCH_FLOOR: f64 = 1e-290;

/// Eigenform of the rank-`l` Nystrom approximation plus the retained sketch.
///
/// `A_hat = U diag(lam_hat) U^T` with `U` having orthonormal columns and
/// `lam_hat` non-negative, non-increasing. `Omega` and `Y = A Omega` are kept
/// so the approximation can be enlarged and its error estimated without new
/// matvecs. `shift` is the stabilization shift actually used.
#[derive(Debug, Clone)]
pub struct NystromFactors {
    basis: Mat<f64>,
    lam_hat: Vec<f64>,
    omega: GaussianMatrix,
    sketch: Mat<f64>,
    shift: f64,
}

impl NystromFactors {
    pub fn rank(&self) -> usize {
        self.lam_hat.len()
    }

    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    /// Orthonormal eigenbasis of the approximation (n-by-rank).
    pub fn basis(&self) -> MatRef<'_, f64> {
        self.basis.as_ref()
    }

    /// Eigenvalues of `A_hat`, non-increasing, all >= 0.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.lam_hat
    }

    pub fn omega(&self) -> &GaussianMatrix {
        &self.omega
    }

    /// Retained sketch `Y = A Omega` (unshifted).
    pub fn sketch(&self) -> MatRef<'_, f64> {
        self.sketch.as_ref()
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// Dense `A_hat` for oracles and tests.
    pub fn reconstruct_dense(&self) -> Mat<f64> {
        let n = self.dim();
        let r = self.rank();
        let mut scaled = Mat::<f64>::zeros(n, r);
        for k in 0..r {
            for i in 0..n {
                scaled[(i, k)] = self.basis[(i, k)] * self.lam_hat[k];
            }
        }
        let mut out = Mat::<f64>::zeros(n, n);
        faer::linalg::matmul::matmul(
            out.as_mut(),
            faer::Accum::Replace,
            scaled.as_ref(),
            self.basis.as_ref().transpose(),
            1.0,
            faer::Par::Seq,
        );
        out
    }
}

/// Cholesky of `Omega^T (Y + nu Omega)` with the shift escalating 10x on
/// breakdown. Returns the lower factor, the shifted sketch and the shift.
fn shifted_cholesky(
    omega: MatRef<'_, f64>,
    y: MatRef<'_, f64>,
    nu0: f64,
) -> Result<(Mat<f64>, Mat<f64>, f64)> {
    let mut nu = nu0;
    for attempt in 0..=SHIFT_RETRIES {
        let mut y_nu = y.to_owned();
        for j in 0..omega.ncols() {
            for i in 0..omega.nrows() {
                y_nu[(i, j)] += nu * omega[(i, j)];
            }
        }
        let mut gram = Mat::<f64>::zeros(omega.ncols(), omega.ncols());
        faer::linalg::matmul::matmul(
            gram.as_mut(),
            faer::Accum::Replace,
            omega.transpose(),
            y_nu.as_ref(),
            1.0,
            faer::Par::Seq,
        );
        for i in 0..gram.nrows() {
            for j in 0..i {
                let s = 0.5 * (gram[(i, j)] + gram[(j, i)]);
                gram[(i, j)] = s;
                gram[(j, i)] = s;
            }
        }
        match gram.llt(faer::Side::Lower) {
            Ok(llt) => {
                let l = llt.L().to_owned();
                return Ok((l, y_nu, nu));
            }
            Err(_) if attempt < SHIFT_RETRIES => {
                nu *= 10.0;
            }
            Err(_) => break,
        }
    }
    Err(LogDetError::Factorization(format!(
        "sketch Gram matrix stayed indefinite after {SHIFT_RETRIES} shift escalations (last shift {nu:e})"
    )))
}

/// Stable eigenform factorization of the sketch pair `(Omega, Y)`.
fn factorize(omega: GaussianMatrix, y: Mat<f64>) -> Result<NystromFactors> {
    let n = omega.rows();
    let r = omega.cols();
    let y_norm = frobenius_norm(y.as_ref());
    if y_norm <= ZERO_SKETCH_FLOOR {
        // A (numerically) zero operator: A_hat = 0 with a fixed orthonormal
        // basis so downstream invariants hold.
        let mut basis = Mat::<f64>::zeros(n, r);
        for k in 0..r.min(n) {
            basis[(k, k)] = 1.0;
        }
        return Ok(NystromFactors {
            basis,
            lam_hat: vec![0.0; r],
            omega,
            sketch: y,
            shift: 0.0,
        });
    }

    let nu0 = f64::EPSILON * y_norm;
    let (l, y_nu, nu) = shifted_cholesky(omega.matrix(), y.as_ref(), nu0)?;

    // B = Y_nu L^{-T}, computed as B^T = L^{-1} Y_nu^T.
    let mut bt = y_nu.transpose().to_owned();
    faer::linalg::triangular_solve::solve_lower_triangular_in_place(
        l.as_ref(),
        bt.as_mut(),
        faer::Par::Seq,
    );
    let b = bt.transpose().to_owned();
    let svd = b
        .thin_svd()
        .map_err(|e| LogDetError::Factorization(format!("thin SVD of the sketch failed: {e:?}")))?;
    let mut basis = Mat::<f64>::zeros(n, r);
    basis.copy_from(svd.U());
    let lam_hat: Vec<f64> = (0..r)
        .map(|i| {
            let s = svd.S()[i];
            (s * s - nu).max(0.0)
        })
        .collect();

    Ok(NystromFactors {
        basis,
        lam_hat,
        omega,
        sketch: y,
        shift: nu,
    })
}

/// Builds the rank-`omega.cols()` Nystrom approximation, consuming exactly
/// that many matvecs.
///
/// Pipeline: `Y = A Omega`; `nu = eps ||Y||_F`; `Y_nu = Y + nu Omega`;
/// Cholesky of `Omega^T Y_nu` (escalating `nu` 10x on breakdown, at most 3
/// times); `B = Y_nu C^{-1}`; thin SVD of `B`; `lam_hat = max(sigma^2 - nu, 0)`.
pub fn nystrom_build(op: &SpsdOperator, omega: &GaussianMatrix) -> Result<NystromFactors> {
    if omega.rows() != op.dim() {
        return Err(LogDetError::Dimension(format!(
            "sketch has {} rows for an operator of dimension {}",
            omega.rows(),
            op.dim()
        )));
    }
    if omega.cols() > op.dim() {
        return Err(LogDetError::Dimension(format!(
            "sketch rank {} exceeds operator dimension {}",
            omega.cols(),
            op.dim()
        )));
    }
    let y = op.apply_mat(omega.matrix());
    factorize(omega.clone(), y)
}

/// Enlarges the approximation with fresh sketch columns `psi`, consuming
/// exactly `psi.cols()` matvecs: the retained sketch is reused and only
/// `A psi` is computed. The result matches `nystrom_build` on the
/// concatenated sketch `[Omega psi]`.
pub fn nystrom_update(
    factors: &NystromFactors,
    op: &SpsdOperator,
    psi: &GaussianMatrix,
) -> Result<NystromFactors> {
    if psi.cols() == 0 {
        return Ok(factors.clone());
    }
    if psi.rows() != op.dim() || factors.dim() != op.dim() {
        return Err(LogDetError::Dimension(
            "update sketch dimension does not match the operator".into(),
        ));
    }
    let new_rank = factors.rank() + psi.cols();
    if new_rank > op.dim() {
        return Err(LogDetError::Dimension(format!(
            "enlarged rank {new_rank} exceeds operator dimension {}",
            op.dim()
        )));
    }
    let z = op.apply_mat(psi.matrix());
    let omega = factors.omega.hconcat(psi)?;
    let mut y = Mat::<f64>::zeros(op.dim(), new_rank);
    y.as_mut()
        .subcols_mut(0, factors.rank())
        .copy_from(factors.sketch.as_ref());
    y.as_mut()
        .subcols_mut(factors.rank(), psi.cols())
        .copy_from(z.as_ref());
    factorize(omega, y)
}

/// Estimated Frobenius error of a Nystrom approximation.
#[derive(Debug, Clone, Copy)]
pub struct FrobeniusErrorEstimate {
    /// Estimate of `||A - A_hat||_F` (non-negative).
    pub value: f64,
    /// Rank of the approximation the estimate refers to.
    pub rank_used: usize,
}

/// Leave-one-out estimate of `||A - A_hat||_F` from the retained sketch,
/// with zero additional matvecs:
/// `err_F^2 = (1/l) sum_i ||(A - A_hat^{(i)}) omega_i||^2`, where the i-th
/// term leaves column i out of `Omega`. Each residual has the closed form
/// `(A - A_hat^{(i)}) omega_i = Y G^{-1} e_i / (G^{-1})_{ii}` with
/// `G = Omega^T Y`, so one Cholesky of `G` covers all `l` terms.
pub fn leave_one_out_error(
    op: &SpsdOperator,
    omega: &GaussianMatrix,
    sketch: MatRef<'_, f64>,
) -> Result<FrobeniusErrorEstimate> {
    let l = omega.cols();
    if l < 2 {
        return Err(LogDetError::Parameter(
            "leave-one-out needs at least 2 sketch columns".into(),
        ));
    }
    if omega.rows() != op.dim() || sketch.nrows() != op.dim() || sketch.ncols() != l {
        return Err(LogDetError::Dimension(
            "sketch shapes do not match the operator".into(),
        ));
    }
    let y_norm = frobenius_norm(sketch);
    if y_norm <= ZERO_SKETCH_FLOOR {
        return Ok(FrobeniusErrorEstimate {
            value: 0.0,
            rank_used: l,
        });
    }
    let nu0 = f64::EPSILON * y_norm;
    let (lfac, y_nu, _nu) = shifted_cholesky(omega.matrix(), sketch, nu0)?;

    // W^T = G^{-1} Y_nu^T via the two triangular solves of the Cholesky.
    let mut wt = y_nu.transpose().to_owned();
    faer::linalg::triangular_solve::solve_lower_triangular_in_place(
        lfac.as_ref(),
        wt.as_mut(),
        faer::Par::Seq,
    );
    faer::linalg::triangular_solve::solve_upper_triangular_in_place(
        lfac.as_ref().transpose(),
        wt.as_mut(),
        faer::Par::Seq,
    );
    // (G^{-1})_{ii} = || L^{-1} e_i ||^2.
    let mut einv = Mat::<f64>::zeros(l, l);
    for i in 0..l {
        einv[(i, i)] = 1.0;
    }
    faer::linalg::triangular_solve::solve_lower_triangular_in_place(
        lfac.as_ref(),
        einv.as_mut(),
        faer::Par::Seq,
    );
    let mut acc = NeumaierSum::new();
    for i in 0..l {
        let mut dinv = 0.0;
        for k in i..l {
            dinv += einv[(k, i)] * einv[(k, i)];
        }
        let mut row_sq = 0.0;
        for j in 0..wt.ncols() {
            row_sq += wt[(i, j)] * wt[(i, j)];
        }
        acc.add(row_sq / (dinv * dinv));
    }
    let value = (acc.value() / l as f64).max(0.0).sqrt();
    Ok(FrobeniusErrorEstimate {
        value,
        rank_used: l,
    })
}

/// `trace log(P_hat) = sum_i log(1 + lam_hat_i)`; exact, O(rank).
pub fn trace_log_preconditioner(factors: &NystromFactors) -> f64 {
    let mut acc = NeumaierSum::new();
    for &lam in &factors.lam_hat {
        acc.add(lam.ln_1p());
    }
    acc.value()
}

/// `P_hat^{pow} v = v + U ((1 + lam_hat)^{pow} - 1) U^T v`, valid for any
/// real power because `P_hat = I + U diag(lam_hat) U^T` with orthonormal `U`.
pub fn apply_precond_pow(factors: &NystromFactors, v: &[f64], pow: f64) -> Vec<f64> {
    let n = factors.dim();
    let r = factors.rank();
    assert_eq!(v.len(), n, "vector length mismatch");
    let mut coeffs = vec![0.0; r];
    let mut proj = vec![0.0; r];
    for k in 0..r {
        coeffs[k] = (1.0 + factors.lam_hat[k]).powf(pow) - 1.0;
        let mut acc = 0.0;
        for i in 0..n {
            acc += factors.basis[(i, k)] * v[i];
        }
        proj[k] = acc;
    }
    let mut out = v.to_vec();
    for k in 0..r {
        let c = coeffs[k] * proj[k];
        if c != 0.0 {
            for i in 0..n {
                out[i] += c * factors.basis[(i, k)];
            }
        }
    }
    out
}

/// `P_hat^{-1/2} v`; zero matvecs with the base operator.
pub fn apply_precond_inv_sqrt(factors: &NystromFactors, v: &[f64]) -> Vec<f64> {
    apply_precond_pow(factors, v, -0.5)
}

/// The preconditioned operator `M_hat = P_hat^{-1/2} (A + I) P_hat^{-1/2}`.
/// Each apply consumes exactly one matvec of the base operator.
pub struct PreconditionedOperator<'a> {
    base: &'a SpsdOperator,
    factors: &'a NystromFactors,
}

impl LinearOperator for PreconditionedOperator<'_> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        let s = apply_precond_inv_sqrt(self.factors, v);
        self.base.apply_into(&s, out);
        for (o, &si) in out.iter_mut().zip(&s) {
            *o += si;
        }
        let t = apply_precond_inv_sqrt(self.factors, out);
        out.copy_from_slice(&t);
    }
}

/// Pairs an operator with Nystrom factors; dimensions must match.
pub fn preconditioned_operator<'a>(
    op: &'a SpsdOperator,
    factors: &'a NystromFactors,
) -> PreconditionedOperator<'a> {
    assert_eq!(
        op.dim(),
        factors.dim(),
        "operator/factors dimension mismatch"
    );
    PreconditionedOperator { base: op, factors }
}
