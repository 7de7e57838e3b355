//! m-step Lanczos tridiagonalization and Gauss quadrature for quadratic
//! forms `w^T log(B) w` with SPD operators `B`.

use faer::Mat;

use crate::error::{LogDetError, Result};
use crate::operator::LinearOperator;
use crate::util::{dot, norm2};

/// Relative breakdown threshold: `beta_j <= BREAKDOWN_REL * max(|alpha|,|beta|)`
/// seen so far means the Krylov space is (numerically) invariant.
const BREAKDOWN_REL: f64 = 1e-14;

/// Smallest Ritz value the logarithm quadrature accepts.
const RITZ_FLOOR: f64 = 1e-14;

/// Symmetric tridiagonal Lanczos matrix `T_m` (diagonal + off-diagonal).
#[derive(Debug, Clone)]
pub struct TridiagonalMatrix {
    diag: Vec<f64>,
    offdiag: Vec<f64>,
}

impl TridiagonalMatrix {
    pub fn order(&self) -> usize {
        self.diag.len()
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    pub fn off_diagonal(&self) -> &[f64] {
        &self.offdiag
    }

    /// Eigenvalues (ascending) paired with the squared first components of
    /// the corresponding eigenvectors: exactly the Gauss quadrature nodes
    /// and weights.
    pub fn nodes_and_weights(&self) -> Result<Vec<(f64, f64)>> {
        let m = self.order();
        let mut t = Mat::<f64>::zeros(m, m);
        for i in 0..m {
            t[(i, i)] = self.diag[i];
        }
        for i in 0..m - 1 {
            t[(i, i + 1)] = self.offdiag[i];
            t[(i + 1, i)] = self.offdiag[i];
        }
        let evd = t
            .self_adjoint_eigen(faer::Side::Lower)
            .map_err(|e| LogDetError::Factorization(format!("tridiagonal eigensolver: {e:?}")))?;
        Ok((0..m)
            .map(|j| (evd.S()[j], evd.U()[(0, j)].powi(2)))
            .collect())
    }
}

/// Runs `m` Lanczos steps with starting vector `w` (not normalized by the
/// caller; normalization happens internally and `||w||^2` is carried by the
/// quadrature). Consumes exactly one matvec per completed step; early
/// breakdown truncates the tridiagonal matrix.
///
/// `full_reorth` re-orthogonalizes every new vector against the whole basis
/// (two passes); at the small step counts used here the O(n m^2) cost is
/// negligible and ghost eigenvalues are suppressed.
pub fn lanczos_tridiag<B: LinearOperator + ?Sized>(
    op: &B,
    w: &[f64],
    m: usize,
    full_reorth: bool,
) -> Result<TridiagonalMatrix> {
    let n = op.dim();
    if w.len() != n {
        return Err(LogDetError::Dimension(format!(
            "start vector length {} does not match operator dimension {n}",
            w.len()
        )));
    }
    if m == 0 {
        return Err(LogDetError::Parameter("lanczos needs m >= 1".into()));
    }
    if m > n {
        return Err(LogDetError::Parameter(format!(
            "lanczos steps m = {m} exceed dimension n = {n}"
        )));
    }
    let wnorm = norm2(w);
    if wnorm == 0.0 || !wnorm.is_finite() {
        return Err(LogDetError::Validation(
            "lanczos start vector must be nonzero and finite".into(),
        ));
    }

    let mut diag = Vec::with_capacity(m);
    let mut offdiag = Vec::with_capacity(m.saturating_sub(1));
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(if full_reorth { m } else { 2 });

    let mut v: Vec<f64> = w.iter().map(|&x| x / wnorm).collect();
    let mut v_prev = vec![0.0; n];
    let mut beta_prev = 0.0;
    let mut u = vec![0.0; n];
    let mut running_max = 0.0f64;

    for step in 0..m {
        op.apply_into(&v, &mut u);
        // Recurrence on the shifted residual d = B v - v, so alpha = 1 + v^T d.
        // Algebraically identical to the textbook update; for operators at or
        // near the identity (captured preconditioned matrices) d vanishes
        // bitwise and the quadrature of the logarithm is exactly zero.
        for i in 0..n {
            u[i] -= v[i];
        }
        let alpha_shift = dot(&v, &u);
        let alpha = 1.0 + alpha_shift;
        for i in 0..n {
            u[i] -= alpha_shift * v[i] + beta_prev * v_prev[i];
        }
        if full_reorth {
            basis.push(v.clone());
            // Two Gram-Schmidt passes keep ||V^T V - I|| near machine level.
            for _ in 0..2 {
                for b in &basis {
                    let proj = dot(b, &u);
                    for i in 0..n {
                        u[i] -= proj * b[i];
                    }
                }
            }
        }
        let beta = norm2(&u);
        diag.push(alpha);
        running_max = running_max.max(alpha.abs()).max(beta);

        if step + 1 == m {
            break;
        }
        if beta <= BREAKDOWN_REL * running_max {
            // Invariant subspace reached; T is truncated to the steps taken.
            break;
        }
        offdiag.push(beta);
        std::mem::swap(&mut v_prev, &mut v);
        for i in 0..n {
            v[i] = u[i] / beta;
        }
        beta_prev = beta;
    }

    Ok(TridiagonalMatrix { diag, offdiag })
}

/// Result of one Lanczos quadrature evaluation.
#[derive(Debug, Clone, Copy)]
pub struct QuadFormResult {
    /// `||w||^2 e_1^T log(T_m) e_1`.
    pub value: f64,
    /// Steps actually taken (equals the matvecs consumed).
    pub m_used: usize,
    /// Squared norm of the start vector.
    pub w_norm_sq: f64,
}

/// Gauss quadrature approximation of `w^T log(B) w` from `m` Lanczos steps.
///
/// All Ritz values must be positive; a Ritz value at or below `1e-14` is a
/// numerical-domain error (`B` was not SPD on the probed subspace).
pub fn quad_form_log<B: LinearOperator + ?Sized>(
    op: &B,
    w: &[f64],
    m: usize,
    full_reorth: bool,
) -> Result<QuadFormResult> {
    let tri = lanczos_tridiag(op, w, m, full_reorth)?;
    let w_norm_sq = dot(w, w);
    let mut value = 0.0;
    for (theta, weight) in tri.nodes_and_weights()? {
        if theta <= RITZ_FLOOR {
            return Err(LogDetError::NumericalDomain(format!(
                "non-positive Ritz value {theta:e} in log quadrature"
            )));
        }
        value += weight * theta.ln();
    }
    Ok(QuadFormResult {
        value: w_norm_sq * value,
        m_used: tri.order(),
        w_norm_sq,
    })
}

/// A-priori Lanczos quadrature error bound for the logarithm:
/// `c_B ||w||^2 ((sqrt(k+1)-1)/(sqrt(k+1)+1))^{2m}` with
/// `c_B = 2 (sqrt(k+1)+1) log(2k)` and `k` the spectral condition number.
pub fn lanczos_error_bound(kappa: f64, m: usize, w_norm_sq: f64) -> Result<f64> {
    if !(kappa >= 1.0) {
        return Err(LogDetError::Validation(format!(
            "condition number must be >= 1, got {kappa}"
        )));
    }
    if m == 0 {
        return Err(LogDetError::Parameter("bound needs m >= 1".into()));
    }
    let s = (kappa + 1.0).sqrt();
    let ratio = (s - 1.0) / (s + 1.0);
    let c = 2.0 * (s + 1.0) * (2.0 * kappa).ln();
    Ok(c * w_norm_sq * ratio.powi(2 * m as i32))
}
