//! Test operators: diagonal families with algebraic/geometric/gapped decay
//! and RBF / Matern kernel matrices on Gaussian point clouds, all already
//! scaled by the regularization (`A = H / mu`).

use faer::Mat;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{LogDetError, Result};
use crate::operator::{Spectrum, SpsdOperator};
use crate::rng::{derive_seed, TAG_POINTS, TAG_SPARSE};

/// Kernel matrices are materialized densely; desk-scale guard.
pub const MAX_KERNEL_DIM: usize = 10_000;

/// Declarative description of a test operator, the unit of the experiment
/// config schema.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum MatrixSpec {
    /// Diagonal `lambda_i = i^{-2} / mu`.
    Alg { n: usize, mu: f64 },
    /// Diagonal `lambda_i = e^{-0.1 i} / mu`.
    Geom { n: usize, mu: f64 },
    /// `(1/mu) sum_j gamma_j x_j x_j^T` with sparse unit vectors and the
    /// four-piece gap coefficient table.
    Gaps {
        n: usize,
        k_terms: usize,
        density: f64,
        mu: f64,
        seed: u64,
    },
    /// RBF kernel `exp(-||x_i - x_j||^2 / sigma_sq2)` on `n` points drawn
    /// from `N(0, I_d)`, divided by `mu`. `sigma_sq2` is the denominator
    /// `2 sigma^2`.
    #[serde(alias = "rbf_d")]
    Rbf {
        n: usize,
        sigma_sq2: f64,
        mu: f64,
        seed: u64,
        #[serde(default = "default_dim")]
        d: usize,
    },
    /// Matern kernel (half-integer smoothness 1/2, 3/2 or 5/2) on Gaussian
    /// points, divided by `mu`.
    #[serde(alias = "matern_d")]
    Matern {
        n: usize,
        nu: f64,
        theta: f64,
        mu: f64,
        seed: u64,
        #[serde(default = "default_dim")]
        d: usize,
    },
    /// Explicit eigenvalue list (testing family; expresses e.g. A = 0).
    Diag { values: Vec<f64> },
}

fn default_dim() -> usize {
    1
}

impl MatrixSpec {
    pub fn dim(&self) -> usize {
        match self {
            MatrixSpec::Alg { n, .. }
            | MatrixSpec::Geom { n, .. }
            | MatrixSpec::Gaps { n, .. }
            | MatrixSpec::Rbf { n, .. }
            | MatrixSpec::Matern { n, .. } => *n,
            MatrixSpec::Diag { values } => values.len(),
        }
    }

    /// Stable identifier used for CSV rows and the oracle cache key.
    pub fn id_string(&self) -> String {
        match self {
            MatrixSpec::Alg { n, mu } => format!("alg_n{n}_mu{mu:e}"),
            MatrixSpec::Geom { n, mu } => format!("geom_n{n}_mu{mu:e}"),
            MatrixSpec::Gaps {
                n,
                k_terms,
                density,
                mu,
                seed,
            } => {
                format!("gaps_n{n}_k{k_terms}_rho{density:e}_mu{mu:e}_seed{seed}")
            }
            MatrixSpec::Rbf {
                n,
                sigma_sq2,
                mu,
                seed,
                d,
            } => {
                format!("rbf_n{n}_d{d}_s{sigma_sq2:e}_mu{mu:e}_seed{seed}")
            }
            MatrixSpec::Matern {
                n,
                nu,
                theta,
                mu,
                seed,
                d,
            } => {
                format!("matern_n{n}_d{d}_nu{nu}_theta{theta:e}_mu{mu:e}_seed{seed}")
            }
            MatrixSpec::Diag { values } => {
                let mut h = 0xcbf2_9ce4_8422_2325u64;
                for v in values {
                    h ^= v.to_bits();
                    h = h.wrapping_mul(0x0000_0100_0000_01b3);
                }
                format!("diag_n{}_h{h:016x}", values.len())
            }
        }
    }

    pub fn build(&self) -> Result<SpsdOperator> {
        match *self {
            MatrixSpec::Alg { n, mu } => gen_algebraic(n, mu),
            MatrixSpec::Geom { n, mu } => gen_geometric(n, mu),
            MatrixSpec::Gaps {
                n,
                k_terms,
                density,
                mu,
                seed,
            } => gen_gaps(n, k_terms, density, mu, seed),
            MatrixSpec::Rbf {
                n,
                sigma_sq2,
                mu,
                seed,
                d,
            } => gen_rbf(n, sigma_sq2, mu, seed, d),
            MatrixSpec::Matern {
                n,
                nu,
                theta,
                mu,
                seed,
                d,
            } => gen_matern(n, nu, theta, mu, seed, d),
            MatrixSpec::Diag { ref values } => SpsdOperator::from_diagonal(values.clone()),
        }
    }
}

fn check_mu(mu: f64) -> Result<()> {
    if !(mu > 0.0) {
        return Err(LogDetError::Parameter(format!(
            "regularization mu must be positive, got {mu}"
        )));
    }
    Ok(())
}

/// Diagonal operator with algebraic decay `lambda_i = i^{-2} / mu`.
pub fn gen_algebraic(n: usize, mu: f64) -> Result<SpsdOperator> {
    if n == 0 {
        return Err(LogDetError::Dimension("n must be >= 1".into()));
    }
    check_mu(mu)?;
    SpsdOperator::from_diagonal((1..=n).map(|i| (i as f64).powi(-2) / mu).collect())
}

/// Diagonal operator with geometric decay `lambda_i = e^{-0.1 i} / mu`.
pub fn gen_geometric(n: usize, mu: f64) -> Result<SpsdOperator> {
    if n == 0 {
        return Err(LogDetError::Dimension("n must be >= 1".into()));
    }
    check_mu(mu)?;
    SpsdOperator::from_diagonal((1..=n).map(|i| (-0.1 * i as f64).exp() / mu).collect())
}

/// The gap-family coefficient for (1-indexed) term `j`.
pub fn gaps_gamma(j: usize) -> f64 {
    let jf = j as f64;
    let scale = match j {
        1..=200 => 1e2,
        201..=400 => 1.0,
        401..=600 => 1e-2,
        _ => 1e-6,
    };
    scale / (jf * jf)
}

/// Reference spectrum of the gap family's diagonal representative: the
/// sorted `gamma_j / mu`, zero-padded to `n`. With orthonormal directions
/// these are exactly the eigenvalues; the sparse random construction below
/// matches them up to small cross terms.
pub fn gaps_reference_spectrum(n: usize, k_terms: usize, mu: f64) -> Result<Spectrum> {
    check_mu(mu)?;
    if k_terms > n || k_terms == 0 {
        return Err(LogDetError::Parameter(format!(
            "k_terms must be in [1, n] = [1, {n}], got {k_terms}"
        )));
    }
    let mut vals: Vec<f64> = (1..=k_terms).map(|j| gaps_gamma(j) / mu).collect();
    vals.resize(n, 0.0);
    Spectrum::from_unsorted(vals)
}

/// Sparse rank-one-sum operator `(1/mu) sum_j gamma_j x_j x_j^T` with
/// controlled eigenvalue gaps and clusters. Each `x_j` has
/// `max(1, round(density * n))` nonzeros at uniformly chosen positions,
/// i.i.d. standard normal values, normalized to unit length (so the
/// spectrum tracks the `gamma_j` table and `kappa(A+I) ~ gamma_1/mu`).
pub fn gen_gaps(
    n: usize,
    k_terms: usize,
    density: f64,
    mu: f64,
    seed: u64,
) -> Result<SpsdOperator> {
    if n == 0 {
        return Err(LogDetError::Dimension("n must be >= 1".into()));
    }
    check_mu(mu)?;
    if !(density > 0.0 && density <= 1.0) {
        return Err(LogDetError::Parameter(format!(
            "density must be in (0, 1], got {density}"
        )));
    }
    if k_terms > n || k_terms == 0 {
        return Err(LogDetError::Parameter(format!(
            "k_terms must be in [1, n] = [1, {n}], got {k_terms}"
        )));
    }
    let nnz = ((density * n as f64).round() as usize).clamp(1, n);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[TAG_SPARSE]));
    let mut terms = Vec::with_capacity(k_terms);
    for j in 1..=k_terms {
        let picked = rand::seq::index::sample(&mut rng, n, nnz);
        let mut idx: Vec<u32> = picked.iter().map(|i| i as u32).collect();
        idx.sort_unstable();
        let mut val: Vec<f64> = (0..nnz).map(|_| rng.sample(StandardNormal)).collect();
        let norm: f64 = val.iter().map(|v| v * v).sum::<f64>().sqrt();
        for v in val.iter_mut() {
            *v /= norm;
        }
        terms.push(crate::operator::RankOneTerm {
            gamma: gaps_gamma(j),
            idx,
            val,
        });
    }
    SpsdOperator::from_sparse_rank_one_terms(n, terms, 1.0 / mu)
}

/// Test hook for rank-one-sum operators with explicit vectors.
pub fn rank_one_sum_operator(
    n: usize,
    terms: Vec<(f64, Vec<(usize, f64)>)>,
    scale: f64,
) -> Result<SpsdOperator> {
    let terms = terms
        .into_iter()
        .map(|(gamma, entries)| {
            let idx = entries.iter().map(|&(i, _)| i as u32).collect();
            let val = entries.iter().map(|&(_, v)| v).collect();
            crate::operator::RankOneTerm { gamma, idx, val }
        })
        .collect();
    SpsdOperator::from_sparse_rank_one_terms(n, terms, scale)
}

fn sample_points(n: usize, d: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[TAG_POINTS]));
    (0..n * d).map(|_| rng.sample(StandardNormal)).collect()
}

fn squared_distance(points: &[f64], d: usize, i: usize, j: usize) -> f64 {
    let mut acc = 0.0;
    for t in 0..d {
        let diff = points[i * d + t] - points[j * d + t];
        acc += diff * diff;
    }
    acc
}

fn dense_kernel<F: Fn(f64) -> f64>(
    n: usize,
    d: usize,
    points: &[f64],
    mu: f64,
    kernel_of_r2: F,
) -> Result<SpsdOperator> {
    if n > MAX_KERNEL_DIM {
        return Err(LogDetError::SizeGuard(format!(
            "kernel matrices are materialized densely; n = {n} exceeds {MAX_KERNEL_DIM}"
        )));
    }
    let mut h = Mat::<f64>::zeros(n, n);
    for i in 0..n {
        h[(i, i)] = 1.0 / mu;
        for j in 0..i {
            let v = kernel_of_r2(squared_distance(points, d, i, j)) / mu;
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    SpsdOperator::from_dense(h)
}

/// RBF kernel values for an explicit squared distance (unit diagonal).
pub fn rbf_kernel_value(r_sq: f64, sigma_sq2: f64) -> f64 {
    (-r_sq / sigma_sq2).exp()
}

/// Matern kernel value at distance `r` for half-integer `nu`.
pub fn matern_kernel_value(r: f64, nu: f64, theta: f64) -> Result<f64> {
    let x = r / theta;
    if (nu - 0.5).abs() < 1e-12 {
        Ok((-x).exp())
    } else if (nu - 1.5).abs() < 1e-12 {
        let s = 3.0f64.sqrt() * x;
        Ok((1.0 + s) * (-s).exp())
    } else if (nu - 2.5).abs() < 1e-12 {
        let s = 5.0f64.sqrt() * x;
        Ok((1.0 + s + s * s / 3.0) * (-s).exp())
    } else {
        Err(LogDetError::Parameter(format!(
            "unsupported Matern smoothness nu = {nu}; supported: 1/2, 3/2, 5/2"
        )))
    }
}

/// Dense RBF kernel operator on `n` points from `N(0, I_d)`, scaled by
/// `1/mu`. `sigma_sq2` is the denominator `2 sigma^2` from the kernel.
pub fn gen_rbf(n: usize, sigma_sq2: f64, mu: f64, seed: u64, d: usize) -> Result<SpsdOperator> {
    if n == 0 || d == 0 {
        return Err(LogDetError::Dimension("n and d must be >= 1".into()));
    }
    check_mu(mu)?;
    if !(sigma_sq2 > 0.0) {
        return Err(LogDetError::Parameter(format!(
            "kernel bandwidth 2*sigma^2 must be positive, got {sigma_sq2}"
        )));
    }
    let points = sample_points(n, d, seed);
    dense_kernel(n, d, &points, mu, |r2| rbf_kernel_value(r2, sigma_sq2))
}

/// Dense Matern kernel operator (half-integer `nu`), scaled by `1/mu`.
pub fn gen_matern(
    n: usize,
    nu: f64,
    theta: f64,
    mu: f64,
    seed: u64,
    d: usize,
) -> Result<SpsdOperator> {
    if n == 0 || d == 0 {
        return Err(LogDetError::Dimension("n and d must be >= 1".into()));
    }
    check_mu(mu)?;
    if !(theta > 0.0) {
        return Err(LogDetError::Parameter(format!(
            "length scale theta must be positive, got {theta}"
        )));
    }
    // Validate nu before sampling points so the error is immediate.
    matern_kernel_value(1.0, nu, theta)?;
    let points = sample_points(n, d, seed);
    dense_kernel(n, d, &points, mu, |r2| {
        matern_kernel_value(r2.sqrt(), nu, theta).expect("nu validated above")
    })
}
