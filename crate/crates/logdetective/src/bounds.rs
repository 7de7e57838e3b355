//! Closed-form variance/error expressions evaluated from a known spectrum:
//! the idealized one-sample / low-rank / alpha-rank errors and the
//! oversampling-split bounds for the Nystrom-preconditioned strategies,
//! plus the exhaustive (k, p) split optimization.

use crate::error::{LogDetError, Result};
use crate::operator::Spectrum;
use crate::util::{fuzzy_floor, NeumaierSum};

/// A spectrum with cached compensated suffix sums of `lambda`, `lambda^2`,
/// `log(1+lambda)` and `log^2(1+lambda)`. `tail_*(k)` sums everything after
/// the leading `k` eigenvalues; indices past `n` saturate to empty tails.
#[derive(Debug, Clone)]
pub struct TailSpectrum {
    lam: Vec<f64>,
    tail_lam: Vec<f64>,
    tail_lam_sq: Vec<f64>,
    tail_log: Vec<f64>,
    tail_log_sq: Vec<f64>,
}

impl TailSpectrum {
    pub fn new(spectrum: &Spectrum) -> Self {
        let lam = spectrum.eigenvalues().to_vec();
        let n = lam.len();
        let mut tail_lam = vec![0.0; n + 1];
        let mut tail_lam_sq = vec![0.0; n + 1];
        let mut tail_log = vec![0.0; n + 1];
        let mut tail_log_sq = vec![0.0; n + 1];
        let mut s1 = NeumaierSum::new();
        let mut s2 = NeumaierSum::new();
        let mut s3 = NeumaierSum::new();
        let mut s4 = NeumaierSum::new();
        // Accumulate from the smallest eigenvalue upward so tiny tail terms
        // are not absorbed by the large head.
        for i in (0..n).rev() {
            let l = lam[i];
            let lg = l.ln_1p();
            s1.add(l);
            s2.add(l * l);
            s3.add(lg);
            s4.add(lg * lg);
            tail_lam[i] = s1.value();
            tail_lam_sq[i] = s2.value();
            tail_log[i] = s3.value();
            tail_log_sq[i] = s4.value();
        }
        Self {
            lam,
            tail_lam,
            tail_lam_sq,
            tail_log,
            tail_log_sq,
        }
    }

    pub fn len(&self) -> usize {
        self.lam.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lam.is_empty()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.lam
    }

    /// `sum_{i > k} lambda_i` (nuclear norm of the trailing block).
    pub fn tail_nuclear(&self, k: usize) -> f64 {
        *self.tail_lam.get(k).unwrap_or(&0.0)
    }

    /// `sum_{i > k} lambda_i^2`.
    pub fn tail_sq(&self, k: usize) -> f64 {
        *self.tail_lam_sq.get(k).unwrap_or(&0.0)
    }

    /// `sum_{i > k} log(1 + lambda_i)`.
    pub fn tail_log_nuclear(&self, k: usize) -> f64 {
        *self.tail_log.get(k).unwrap_or(&0.0)
    }

    /// `sum_{i > k} log^2(1 + lambda_i)`.
    pub fn tail_log_sq(&self, k: usize) -> f64 {
        *self.tail_log_sq.get(k).unwrap_or(&0.0)
    }

    /// `lambda_{k+1}` (spectral norm of the trailing block), 0 past the end.
    pub fn tail_spectral(&self, k: usize) -> f64 {
        self.lam.get(k).copied().unwrap_or(0.0)
    }
}

/// Idealized one-sample variance with the best rank-`ell` preconditioner:
/// `2 sum_{i > ell} log^2(1 + lambda_i)`.
pub fn ideal_one_sample_var(spec: &TailSpectrum, ell: usize) -> Result<f64> {
    if ell > spec.len() {
        return Err(LogDetError::Parameter(format!(
            "rank {ell} exceeds spectrum length {}",
            spec.len()
        )));
    }
    Ok(2.0 * spec.tail_log_sq(ell))
}

/// Idealized low-rank (truncation) error at the given rank:
/// `sum_{i > rank} log(1 + lambda_i)`.
pub fn ideal_lowrank_err(spec: &TailSpectrum, rank: usize) -> Result<f64> {
    if rank > spec.len() {
        return Err(LogDetError::Parameter(format!(
            "rank {rank} exceeds spectrum length {}",
            spec.len()
        )));
    }
    Ok(spec.tail_log_nuclear(rank))
}

/// Idealized alpha-rank variance:
/// `(2m / ((1-alpha) ell + m)) sum_{i > floor(alpha ell)} log^2(1+lambda_i)`.
pub fn ideal_alpha_rank_var(spec: &TailSpectrum, ell: usize, m: usize, alpha: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(LogDetError::Parameter(format!(
            "alpha must be in [0, 1], got {alpha}"
        )));
    }
    if m == 0 {
        return Err(LogDetError::Parameter("m must be >= 1".into()));
    }
    let r = fuzzy_floor(alpha * ell as f64);
    if r > spec.len() {
        return Err(LogDetError::Parameter(format!(
            "rank floor(alpha*ell) = {r} exceeds spectrum length {}",
            spec.len()
        )));
    }
    let denom = (1.0 - alpha) * ell as f64 + m as f64;
    Ok(2.0 * m as f64 / denom * spec.tail_log_sq(r))
}

/// Expected squared-error bound for the Nystrom one-sample strategy with
/// oversampling split `ell = k + p`:
/// `2 (1 + k/(p-1)) log(1 + 2e^2(k+p)/(p^2-1) ||T_k||_* + (1 + 2k/(p-1)) ||T_k||_2) ||log(T_k + I)||_*`
/// where `T_k` is the trailing block after the leading `k` eigenvalues.
pub fn bound_one_sample(spec: &TailSpectrum, k: usize, p: usize) -> Result<f64> {
    if p < 2 {
        return Err(LogDetError::Parameter(format!(
            "oversampling p must be >= 2, got {p}"
        )));
    }
    if k + p < 4 {
        return Err(LogDetError::Parameter(format!(
            "the bound needs k + p >= 4, got {}",
            k + p
        )));
    }
    let kf = k as f64;
    let pf = p as f64;
    let e_sq = std::f64::consts::E * std::f64::consts::E;
    let head = 1.0 + kf / (pf - 1.0);
    let inner = 1.0
        + 2.0 * e_sq * (kf + pf) / (pf * pf - 1.0) * spec.tail_nuclear(k)
        + (1.0 + 2.0 * kf / (pf - 1.0)) * spec.tail_spectral(k);
    Ok(2.0 * head * inner.ln() * spec.tail_log_nuclear(k))
}

/// Expected squared-error bound for the alpha-rank strategy: the one-sample
/// bound at rank `floor(alpha ell) = k + p` scaled by `m/((1-alpha) ell + m)`.
pub fn bound_alpha_rank(
    spec: &TailSpectrum,
    ell: usize,
    m: usize,
    alpha: f64,
    k: usize,
    p: usize,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(LogDetError::Parameter(format!(
            "alpha must be in [0, 1], got {alpha}"
        )));
    }
    if m == 0 {
        return Err(LogDetError::Parameter("m must be >= 1".into()));
    }
    let r = fuzzy_floor(alpha * ell as f64);
    if k + p != r {
        return Err(LogDetError::Parameter(format!(
            "split k + p = {} must equal floor(alpha*ell) = {r}",
            k + p
        )));
    }
    if r < 4 {
        return Err(LogDetError::Parameter(format!(
            "the alpha-rank bound needs floor(alpha*ell) >= 4, got {r}"
        )));
    }
    let scale = m as f64 / ((1.0 - alpha) * ell as f64 + m as f64);
    Ok(scale * bound_one_sample(spec, k, p)?)
}

/// Expectation bound for the low-rank strategy at rank `k + p`:
/// `(1 + k/(p-1)) ||log(T_k + I)||_*`.
pub fn bound_lowrank(spec: &TailSpectrum, k: usize, p: usize) -> Result<f64> {
    if p < 2 {
        return Err(LogDetError::Parameter(format!(
            "oversampling p must be >= 2, got {p}"
        )));
    }
    Ok((1.0 + k as f64 / (p as f64 - 1.0)) * spec.tail_log_nuclear(k))
}

/// Which bound [`optimize_split`] scans.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundKind {
    OneSample,
    LowRank,
    AlphaRank { ell: usize, m: usize, alpha: f64 },
}

/// Exhaustive scan over `k + p = total`, `p >= 2`, returning the minimizing
/// `(k, p, value)`. Ties break toward the smaller `k`.
pub fn optimize_split(
    spec: &TailSpectrum,
    total: usize,
    which: BoundKind,
) -> Result<(usize, usize, f64)> {
    if total < 4 {
        return Err(LogDetError::Parameter(format!(
            "split optimization needs total >= 4, got {total}"
        )));
    }
    let mut best: Option<(usize, usize, f64)> = None;
    for k in 0..=(total - 2) {
        let p = total - k;
        let value = match which {
            BoundKind::OneSample => bound_one_sample(spec, k, p)?,
            BoundKind::LowRank => bound_lowrank(spec, k, p)?,
            BoundKind::AlphaRank { ell, m, alpha } => bound_alpha_rank(spec, ell, m, alpha, k, p)?,
        };
        match best {
            Some((_, _, b)) if value >= b => {}
            _ => best = Some((k, p, value)),
        }
    }
    Ok(best.expect("total >= 4 guarantees at least one split"))
}
