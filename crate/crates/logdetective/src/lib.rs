//! Matrix-free estimation of the regularized log-determinant
//! `log det(A + I)` for symmetric positive semidefinite operators.
//!
//! The toolkit combines a Nystrom low-rank preconditioner with stochastic
//! Lanczos quadrature (SLQ): `trace log(A+I) = trace log(P) +
//! trace log(P^{-1/2} (A+I) P^{-1/2})`, where the first term is exact and
//! cheap in the Nystrom eigenbasis and the second is estimated from Gaussian
//! probes on the well-conditioned preconditioned operator. The adaptive
//! `logdetective` strategy measures the preconditioner quality with a
//! leave-one-out error estimate at two ranks and decides between spending
//! the remaining budget on one high-rank preconditioner plus a single probe,
//! or on a lower-rank preconditioner plus several probes.
//!
//! ```
//! use logdetective::{estimate_one_sample, logdetective, trace_log_exact};
//! use logdetective::testmat::gen_geometric;
//!
//! let a = gen_geometric(1000, 1e-4).unwrap();
//! let exact = trace_log_exact(a.known_spectrum().unwrap());
//!
//! // Fixed allocation: rank-400 preconditioner + one probe, 10 Lanczos steps.
//! let fixed = estimate_one_sample(&a, 400, 10, 7).unwrap();
//! assert!((fixed.value - exact).abs() / exact < 1e-6);
//!
//! // Adaptive allocation with the same budget; geometric decay selects the
//! // one-sample branch, so the whole budget is spent.
//! let adaptive = logdetective(&a, 400, 10, 0.75, 7).unwrap();
//! assert_eq!(adaptive.matvecs_used, 410);
//! assert!((adaptive.value - exact).abs() / exact < 1e-6);
//! ```
//!
//! Modules:
//! - [`operator`]: matvec-counted SPSD operators, seeded Gaussian sampling,
//!   dense eigendecomposition oracle.
//! - [`nystrom`]: Nystrom factors, sketch enlargement, leave-one-out error
//!   estimation, the induced preconditioner.
//! - [`lanczos`]: tridiagonalization and Gauss quadrature for
//!   `w^T log(B) w`, plus the a-priori convergence bound.
//! - [`estimators`]: the estimation strategies and the adaptive budget
//!   allocator with strict matvec accounting.
//! - [`bounds`]: closed-form variance/error expressions evaluated from a
//!   known spectrum, with oversampling-split optimization.
//! - [`testmat`]: synthetic and kernel test operators.
//! - [`experiment`]: configuration-driven sweep/trial runner with
//!   deterministic CSV output.

pub mod bounds;
pub mod error;
pub mod estimators;
pub mod experiment;
pub mod lanczos;
pub mod nystrom;
pub mod operator;
pub mod rng;
pub mod testmat;
pub mod util;

pub use error::{LogDetError, Result};
pub use estimators::{
    estimate_alpha_rank, estimate_half_samples, estimate_lowrank, estimate_one_sample,
    estimate_plain_slq, logdetective, switching_condition, Branch, BudgetPlan, EstimateResult,
};
pub use lanczos::{
    lanczos_error_bound, lanczos_tridiag, quad_form_log, QuadFormResult, TridiagonalMatrix,
};
pub use nystrom::{
    apply_precond_inv_sqrt, apply_precond_pow, leave_one_out_error, nystrom_build, nystrom_update,
    preconditioned_operator, trace_log_preconditioner, FrobeniusErrorEstimate, NystromFactors,
    PreconditionedOperator,
};
pub use operator::{
    dense_eigenvalues, dense_eigh, trace_log_exact, LinearOperator, PlusIdentity, Spectrum,
    SpsdOperator, MAX_DENSE_DIM,
};
pub use rng::{derive_trial_seed, gaussian_vector, sample_gaussian_matrix, GaussianMatrix};
