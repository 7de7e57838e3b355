//! Log-determinant estimation strategies with strict matvec accounting:
//! plain stochastic Lanczos quadrature, pure low-rank truncation, the
//! one-sample and alpha-rank Nystrom-preconditioned estimators, and the
//! adaptive strategy that picks between them from leave-one-out error
//! estimates at two ranks.

use crate::error::{LogDetError, Result};
use crate::lanczos::quad_form_log;
#[cfg(test)]
use crate::nystrom::NystromFactors;
use crate::nystrom::{
    leave_one_out_error, nystrom_build, nystrom_update, preconditioned_operator,
    trace_log_preconditioner,
};
use crate::operator::{LinearOperator, PlusIdentity, SpsdOperator};
use crate::rng::{derive_seed, gaussian_vector, GaussianMatrix, TAG_OMEGA, TAG_PROBE, TAG_PSI};
use crate::util::{fuzzy_floor, map_indexed};

/// Which allocation a result came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    OneSample,
    Mixed,
    LowRank,
    PlainSlq,
    HalfSamples,
}

impl Branch {
    pub fn as_str(&self) -> &'static str {
        match self {
            Branch::OneSample => "one_sample",
            Branch::Mixed => "mixed",
            Branch::LowRank => "lowrank",
            Branch::PlainSlq => "plain_slq",
            Branch::HalfSamples => "half_samples",
        }
    }
}

/// Side information recorded by the strategies.
#[derive(Debug, Clone, Copy, Default)]
pub struct Diagnostics {
    /// Leave-one-out error estimate at rank floor(beta^2 ell), when computed.
    pub err_f_small: Option<f64>,
    /// Leave-one-out error estimate at rank floor(beta ell), when computed.
    pub err_f_large: Option<f64>,
    /// Budget the floors left unused (< m matvecs).
    pub leftover_matvecs: usize,
    /// True when the leave-one-out estimate failed and the adaptive strategy
    /// fell back to the one-sample branch unconditionally.
    pub loo_fallback: bool,
}

/// Outcome of one estimation run. `value = t1 + t2` always.
#[derive(Debug, Clone, Copy)]
pub struct EstimateResult {
    /// Estimate of `trace log(A + I)`.
    pub value: f64,
    /// Preconditioner term `trace log(P_hat)` (0 for plain SLQ).
    pub t1: f64,
    /// Quadrature/residual term.
    pub t2: f64,
    /// Matvecs consumed, measured on the operator counter.
    pub matvecs_used: u64,
    pub branch: Branch,
    pub diagnostics: Diagnostics,
}

/// Budget parameters for one strategy cell, as the experiment harness
/// dispatches them.
#[derive(Debug, Clone, Copy)]
pub struct BudgetPlan {
    /// Preconditioner budget.
    pub ell: usize,
    /// Lanczos steps per quadratic form.
    pub m: usize,
    /// Adaptive split parameter, in (0, 1).
    pub beta: f64,
    /// Alpha-rank split, in [0, 1].
    pub alpha: f64,
    pub seed: u64,
}

impl BudgetPlan {
    /// Total matvec budget `ell + m`.
    pub fn total(&self) -> usize {
        self.ell + self.m
    }

    /// Validates the documented invariants. `bound_requested` additionally
    /// enforces the `ell >= 4` needed by the oversampling-split bounds.
    pub fn validate(&self, bound_requested: bool) -> Result<()> {
        if self.m == 0 {
            return Err(LogDetError::Parameter("m must be >= 1".into()));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(LogDetError::Parameter(format!(
                "beta must lie in (0, 1), got {}",
                self.beta
            )));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(LogDetError::Parameter(format!(
                "alpha must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        if bound_requested && self.ell < 4 {
            return Err(LogDetError::Parameter(format!(
                "ell >= 4 is required when a Nystrom bound is requested, got {}",
                self.ell
            )));
        }
        Ok(())
    }
}

fn omega_seed(seed: u64) -> u64 {
    derive_seed(seed, &[TAG_OMEGA])
}

fn psi_seed(seed: u64) -> u64 {
    derive_seed(seed, &[TAG_PSI])
}

fn probe_seed(seed: u64, index: usize) -> u64 {
    derive_seed(seed, &[TAG_PROBE, index as u64])
}

/// Mean of `n_probes` Lanczos log-quadratures with per-probe-indexed seeds.
/// Probes run concurrently under the `parallel` feature; the mean is always
/// reduced in index order, so the result is schedule-independent.
fn mean_probe_quadratures<B: LinearOperator>(
    op: &B,
    n_probes: usize,
    m: usize,
    seed: u64,
) -> Result<f64> {
    let dim = op.dim();
    let values: Vec<Result<f64>> = map_indexed(n_probes, |i| {
        let w = gaussian_vector(dim, probe_seed(seed, i));
        quad_form_log(op, &w, m, true).map(|q| q.value)
    });
    let mut sum = 0.0;
    for v in values {
        sum += v?;
    }
    Ok(sum / n_probes as f64)
}

/// Plain stochastic Lanczos quadrature on `A + I` with `n_probes` Gaussian
/// probes and `m` Lanczos steps each; consumes `n_probes * m` matvecs.
pub fn estimate_plain_slq(
    op: &SpsdOperator,
    n_probes: usize,
    m: usize,
    seed: u64,
) -> Result<EstimateResult> {
    if n_probes == 0 {
        return Err(LogDetError::Parameter(
            "plain SLQ needs at least one probe".into(),
        ));
    }
    let start = op.matvec_count();
    let shifted = PlusIdentity::new(op);
    let t2 = mean_probe_quadratures(&shifted, n_probes, m, seed)?;
    Ok(EstimateResult {
        value: t2,
        t1: 0.0,
        t2,
        matvecs_used: op.matvec_count() - start,
        branch: Branch::PlainSlq,
        diagnostics: Diagnostics::default(),
    })
}

/// Pure low-rank strategy: `trace log(A_hat + I)` at the full rank budget,
/// ignoring the residual. Always an underestimate (up to roundoff).
pub fn estimate_lowrank(
    op: &SpsdOperator,
    rank_budget: usize,
    seed: u64,
) -> Result<EstimateResult> {
    if rank_budget == 0 {
        return Err(LogDetError::Parameter("rank budget must be >= 1".into()));
    }
    let start = op.matvec_count();
    let omega = GaussianMatrix::sample(op.dim(), rank_budget, omega_seed(seed))?;
    let factors = nystrom_build(op, &omega)?;
    let t1 = trace_log_preconditioner(&factors);
    Ok(EstimateResult {
        value: t1,
        t1,
        t2: 0.0,
        matvecs_used: op.matvec_count() - start,
        branch: Branch::LowRank,
        diagnostics: Diagnostics::default(),
    })
}

/// One-sample strategy: rank-`ell` Nystrom preconditioner plus a single
/// Gaussian probe for `trace log(M_hat)`; `ell + m` matvecs.
pub fn estimate_one_sample(
    op: &SpsdOperator,
    ell: usize,
    m: usize,
    seed: u64,
) -> Result<EstimateResult> {
    if ell == 0 || m == 0 {
        return Err(LogDetError::Parameter(
            "one-sample needs ell >= 1 and m >= 1".into(),
        ));
    }
    let start = op.matvec_count();
    let omega = GaussianMatrix::sample(op.dim(), ell, omega_seed(seed))?;
    let factors = nystrom_build(op, &omega)?;
    let t1 = trace_log_preconditioner(&factors);
    let precond = preconditioned_operator(op, &factors);
    let t2 = mean_probe_quadratures(&precond, 1, m, seed)?;
    Ok(EstimateResult {
        value: t1 + t2,
        t1,
        t2,
        matvecs_used: op.matvec_count() - start,
        branch: Branch::OneSample,
        diagnostics: Diagnostics::default(),
    })
}

/// Shared core of the budget-splitting strategies: rank-`rank`
/// preconditioner plus `n_probes` quadratures of `m` steps each.
fn estimate_with_split(
    op: &SpsdOperator,
    rank: usize,
    n_probes: usize,
    m: usize,
    omega_stream: u64,
    probe_stream: u64,
    branch: Branch,
    leftover: usize,
) -> Result<EstimateResult> {
    let start = op.matvec_count();
    let (t1, t2) = if rank == 0 {
        let shifted = PlusIdentity::new(op);
        (
            0.0,
            mean_probe_quadratures(&shifted, n_probes, m, probe_stream)?,
        )
    } else {
        let omega = GaussianMatrix::sample(op.dim(), rank, omega_stream)?;
        let factors = nystrom_build(op, &omega)?;
        let t1 = trace_log_preconditioner(&factors);
        let precond = preconditioned_operator(op, &factors);
        (
            t1,
            mean_probe_quadratures(&precond, n_probes, m, probe_stream)?,
        )
    };
    Ok(EstimateResult {
        value: t1 + t2,
        t1,
        t2,
        matvecs_used: op.matvec_count() - start,
        branch,
        diagnostics: Diagnostics {
            leftover_matvecs: leftover,
            ..Diagnostics::default()
        },
    })
}

/// Alpha-rank strategy: rank `floor(alpha ell)` preconditioner and
/// `N = floor((ell + m - rank)/m)` probes, total budget at most `ell + m`.
/// `alpha = 0` degenerates to plain SLQ on `A + I`; `alpha = 1` to the
/// one-sample strategy.
pub fn estimate_alpha_rank(
    op: &SpsdOperator,
    ell: usize,
    m: usize,
    alpha: f64,
    seed: u64,
) -> Result<EstimateResult> {
    if ell == 0 || m == 0 {
        return Err(LogDetError::Parameter(
            "alpha-rank needs ell >= 1 and m >= 1".into(),
        ));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(LogDetError::Parameter(format!(
            "alpha must lie in [0, 1], got {alpha}"
        )));
    }
    let rank = fuzzy_floor(alpha * ell as f64);
    if alpha > 0.0 && rank == 0 {
        return Err(LogDetError::Parameter(format!(
            "floor(alpha*ell) = 0 at alpha = {alpha}, ell = {ell}; use alpha = 0 for pure SLQ"
        )));
    }
    let n_probes = (ell + m - rank) / m;
    if n_probes == 0 {
        return Err(LogDetError::Parameter(
            "no probe budget left: floor((ell+m-rank)/m) = 0".into(),
        ));
    }
    let leftover = ell + m - rank - n_probes * m;
    estimate_with_split(
        op,
        rank,
        n_probes,
        m,
        omega_seed(seed),
        seed,
        Branch::Mixed,
        leftover,
    )
}

/// Even budget split: rank `floor((ell + m)/2)` preconditioner, the rest in
/// probes.
pub fn estimate_half_samples(
    op: &SpsdOperator,
    ell: usize,
    m: usize,
    seed: u64,
) -> Result<EstimateResult> {
    if ell == 0 || m == 0 {
        return Err(LogDetError::Parameter(
            "half-samples needs ell >= 1 and m >= 1".into(),
        ));
    }
    let total = ell + m;
    let rank = total / 2;
    let n_probes = (total - rank) / m;
    if rank == 0 || n_probes == 0 {
        return Err(LogDetError::Parameter(format!(
            "half-samples cannot split a budget of {total} with m = {m}"
        )));
    }
    let leftover = total - rank - n_probes * m;
    estimate_with_split(
        op,
        rank,
        n_probes,
        m,
        omega_seed(seed),
        seed,
        Branch::HalfSamples,
        leftover,
    )
}

/// The adaptive switching test: comparing a rank-floor(beta^2 ell)
/// leave-one-out error against the rank-floor(beta ell) one, choose the
/// one-sample branch iff
/// `m / ((1-beta) beta ell + m) * err_small^2 >= err_large^2`.
/// Both error estimates must be non-negative; ties select one-sample.
pub fn switching_condition(
    err_f_small: f64,
    err_f_large: f64,
    ell: usize,
    m: usize,
    beta: f64,
) -> bool {
    debug_assert!(err_f_small >= 0.0 && err_f_large >= 0.0);
    let factor = m as f64 / ((1.0 - beta) * beta * ell as f64 + m as f64);
    factor * err_f_small * err_f_small >= err_f_large * err_f_large
}

/// Adaptive budget allocation:
/// 1. sketch at rank `floor(beta ell)` and build the Nystrom approximation;
/// 2. estimate the approximation error at ranks `floor(beta ell)` and
///    `floor(beta^2 ell)` (the latter from the leading sketch columns, zero
///    extra matvecs);
/// 3. if the switching condition favors it, enlarge the sketch to rank
///    `ell` and run a single probe (one-sample branch); otherwise keep rank
///    `floor(beta ell)` and spend the rest on probes (mixed branch).
///
/// A failed leave-one-out estimate never aborts: it degrades to the
/// unconditional one-sample branch with `diagnostics.loo_fallback = true`.
pub fn logdetective(
    op: &SpsdOperator,
    ell: usize,
    m: usize,
    beta: f64,
    seed: u64,
) -> Result<EstimateResult> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(LogDetError::Parameter(format!(
            "beta must lie in (0, 1), got {beta}"
        )));
    }
    if ell == 0 || m == 0 {
        return Err(LogDetError::Parameter(
            "logdetective needs ell >= 1 and m >= 1".into(),
        ));
    }
    let rank_large = fuzzy_floor(beta * ell as f64)
        .min(ell.saturating_sub(1))
        .max(1);
    let rank_small = fuzzy_floor(beta * beta * ell as f64).min(rank_large);
    if rank_small < 2 {
        return Err(LogDetError::Parameter(format!(
            "logdetective needs floor(beta^2 ell) >= 2, got {rank_small}"
        )));
    }
    let start = op.matvec_count();
    let omega = GaussianMatrix::sample(op.dim(), rank_large, omega_seed(seed))?;
    let factors = nystrom_build(op, &omega)?;

    let loo = (|| -> Result<(f64, f64)> {
        let large = leave_one_out_error(op, &omega, factors.sketch())?;
        let omega_small = omega.leading_columns(rank_small)?;
        let sketch_small = factors.sketch().subcols(0, rank_small);
        let small = leave_one_out_error(op, &omega_small, sketch_small)?;
        Ok((small.value, large.value))
    })();

    let (diag_small, diag_large, take_one_sample, loo_fallback) = match loo {
        Ok((small, large)) => (
            Some(small),
            Some(large),
            switching_condition(small, large, ell, m, beta),
            false,
        ),
        Err(_) => (None, None, true, true),
    };

    let (t1, t2, branch, leftover) = if take_one_sample {
        let psi = GaussianMatrix::sample(op.dim(), ell - rank_large, psi_seed(seed))?;
        let enlarged = nystrom_update(&factors, op, &psi)?;
        let t1 = trace_log_preconditioner(&enlarged);
        let precond = preconditioned_operator(op, &enlarged);
        let t2 = mean_probe_quadratures(&precond, 1, m, seed)?;
        (t1, t2, Branch::OneSample, 0)
    } else {
        let t1 = trace_log_preconditioner(&factors);
        let n_probes = (ell + m - rank_large) / m;
        let precond = preconditioned_operator(op, &factors);
        let t2 = mean_probe_quadratures(&precond, n_probes, m, seed)?;
        (t1, t2, Branch::Mixed, ell + m - rank_large - n_probes * m)
    };

    Ok(EstimateResult {
        value: t1 + t2,
        t1,
        t2,
        matvecs_used: op.matvec_count() - start,
        branch,
        diagnostics: Diagnostics {
            err_f_small: diag_small,
            err_f_large: diag_large,
            leftover_matvecs: leftover,
            loo_fallback,
        },
    })
}

/// Mixed-branch core with an explicit preconditioner, exposed for the
/// fixed-sketch variance tests.
#[cfg(test)]
pub(crate) fn mixed_t2_with_factors(
    op: &SpsdOperator,
    factors: &NystromFactors,
    n_probes: usize,
    m: usize,
    probe_stream: u64,
) -> Result<f64> {
    let precond = preconditioned_operator(op, factors);
    mean_probe_quadratures(&precond, n_probes, m, probe_stream)
}
