//! Configuration-driven experiment runner: sweeps strategies over a budget
//! grid, runs seeded trials, and emits deterministic CSV records, summaries
//! and bound curves.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bounds::{optimize_split, BoundKind, TailSpectrum};
use crate::error::{LogDetError, Result};
use crate::estimators::{
    estimate_alpha_rank, estimate_half_samples, estimate_lowrank, estimate_one_sample,
    estimate_plain_slq, logdetective, Branch, BudgetPlan, EstimateResult,
};
use crate::operator::{dense_eigenvalues, trace_log_exact, LinearOperator, Spectrum, SpsdOperator};
use crate::rng::derive_trial_seed;
use crate::testmat::MatrixSpec;
use crate::util::{fuzzy_floor, map_indexed, map_indexed_sequential};

/// Estimation strategies the runner can dispatch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyName {
    OneSample,
    Lowrank,
    AlphaRank,
    HalfSamples,
    PlainSlq,
    Logdetective,
}

impl StrategyName {
    fn as_str(&self) -> &'static str {
        match self {
            StrategyName::OneSample => "one_sample",
            StrategyName::Lowrank => "lowrank",
            StrategyName::AlphaRank => "alpha_rank",
            StrategyName::HalfSamples => "half_samples",
            StrategyName::PlainSlq => "plain_slq",
            StrategyName::Logdetective => "logdetective",
        }
    }
}

fn default_beta() -> f64 {
    0.75
}

/// One strategy descriptor: the budget grid plus strategy parameters.
/// Every grid point `ell` runs with total budget `ell + m`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategySpec {
    pub name: StrategyName,
    pub ell_grid: Vec<usize>,
    pub m: usize,
    /// Adaptive split parameter (logdetective); defaults to 3/4.
    #[serde(default = "default_beta")]
    pub beta: f64,
    /// Rank fraction for `alpha_rank` (required there, ignored elsewhere).
    #[serde(default)]
    pub alpha: Option<f64>,
}

impl StrategySpec {
    /// Unique label: seeds, CSV grouping and summaries key off this, so the
    /// parametrized strategies carry their parameter (several alpha or beta
    /// variants can share one config).
    pub fn label(&self) -> String {
        match self.name {
            StrategyName::AlphaRank => {
                format!("alpha_rank[a={}]", self.alpha.unwrap_or(f64::NAN))
            }
            StrategyName::Logdetective => format!("logdetective[b={}]", self.beta),
            _ => self.name.as_str().to_string(),
        }
    }

    /// The budget bundle dispatched for one grid point.
    pub fn plan(&self, ell: usize, seed: u64) -> BudgetPlan {
        BudgetPlan {
            ell,
            m: self.m,
            beta: self.beta,
            alpha: self.alpha.unwrap_or(1.0),
            seed,
        }
    }

    fn validate(&self, emit_bounds: bool) -> Result<()> {
        if self.ell_grid.is_empty() {
            return Err(LogDetError::Config(format!(
                "strategy {} has an empty ell grid",
                self.label()
            )));
        }
        if !self.ell_grid.windows(2).all(|w| w[0] < w[1]) {
            return Err(LogDetError::Config(format!(
                "strategy {}: ell grid must be strictly increasing",
                self.label()
            )));
        }
        if matches!(self.name, StrategyName::AlphaRank) && self.alpha.is_none() {
            return Err(LogDetError::Config(
                "strategy alpha_rank requires an alpha field".into(),
            ));
        }
        let has_bound = matches!(
            self.name,
            StrategyName::OneSample | StrategyName::Lowrank | StrategyName::AlphaRank
        );
        for &ell in &self.ell_grid {
            self.plan(ell, 0)
                .validate(emit_bounds && has_bound)
                .map_err(|e| LogDetError::Config(format!("strategy {}: {e}", self.label())))?;
            if matches!(self.name, StrategyName::Logdetective)
                && fuzzy_floor(self.beta * self.beta * ell as f64) < 2
            {
                return Err(LogDetError::Config(format!(
                    "logdetective needs floor(beta^2 ell) >= 2; ell = {ell}, beta = {}",
                    self.beta
                )));
            }
        }
        Ok(())
    }
}

fn default_trials() -> usize {
    100
}

/// Totals grid for the `bounds` subcommand.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundSweepConfig {
    /// Total matvec budgets (each splits as `ell + m` internally).
    pub total_grid: Vec<usize>,
    pub m: usize,
}

/// Top-level experiment configuration (JSON on disk).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub matrix: MatrixSpec,
    #[serde(default)]
    pub strategies: Vec<StrategySpec>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub base_seed: u64,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
    #[serde(default)]
    pub emit_bounds: bool,
    /// Sidecar cache for the dense-oracle exact values, keyed by matrix id.
    #[serde(default)]
    pub oracle_cache: Option<PathBuf>,
    #[serde(default)]
    pub bounds: Option<BoundSweepConfig>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| LogDetError::Config(format!("cannot parse config JSON: {e}")))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| {
            LogDetError::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(LogDetError::Config("trials must be >= 1".into()));
        }
        for s in &self.strategies {
            s.validate(self.emit_bounds)?;
        }
        if let Some(b) = &self.bounds {
            if b.total_grid.is_empty() {
                return Err(LogDetError::Config(
                    "bounds.total_grid must be nonempty".into(),
                ));
            }
            if !b.total_grid.windows(2).all(|w| w[0] < w[1]) {
                return Err(LogDetError::Config(
                    "bounds.total_grid must be strictly increasing".into(),
                ));
            }
            if b.m == 0 || b.total_grid[0] <= b.m + 3 {
                return Err(LogDetError::Config(
                    "bounds sweep needs m >= 1 and totals > m + 3".into(),
                ));
            }
        }
        Ok(())
    }
}

/// One CSV row of the records file.
#[derive(Debug, Clone)]
pub struct ExperimentRecord {
    pub matrix_id: String,
    pub n: usize,
    pub strategy: String,
    pub ell: usize,
    pub m: usize,
    pub beta: Option<f64>,
    pub seed: u64,
    pub trial: usize,
    pub estimate: f64,
    pub exact: f64,
    pub abs_error: f64,
    /// `|estimate - exact| / |exact|`; falls back to the absolute error when
    /// `exact == 0` (then `rel_is_abs` is set).
    pub rel_error: f64,
    pub rel_is_abs: bool,
    pub matvecs_used: u64,
    pub branch: Branch,
}

/// Aggregate over the trials of one (strategy, ell) cell. The mean is over
/// the full set of trials; the deviation discards the best and worst 10%.
#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub strategy: String,
    pub ell: usize,
    pub mean_rel_error: f64,
    pub trimmed_std: f64,
    /// Share of trials resolved through the one-sample branch.
    pub branch_fraction: f64,
}

/// One bound-curve row.
#[derive(Debug, Clone)]
pub struct BoundRecord {
    pub matrix_id: String,
    pub n: usize,
    pub total: usize,
    pub m: usize,
    /// `one_sample` (square root of the squared-error bound) or `lowrank`.
    pub kind: String,
    pub k: usize,
    pub p: usize,
    /// Raw optimized bound value (squared error for one_sample).
    pub bound: f64,
    /// Plot-ready value: sqrt (for one_sample) and division by the exact
    /// trace-log; stays absolute when the exact value is zero.
    pub normalized: f64,
    pub exact: f64,
    pub exact_is_zero: bool,
}

/// All artifacts of one run.
#[derive(Debug)]
pub struct ExperimentOutput {
    pub records: Vec<ExperimentRecord>,
    pub summary: Vec<SummaryRow>,
    pub bound_records: Vec<BoundRecord>,
    pub exact: f64,
}

/// Round-trip-exact float formatting (17 significant digits).
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub const RECORDS_HEADER: &str = "matrix_id,n,strategy,ell,m,beta,seed,trial,estimate,exact,abs_error,rel_error,rel_is_abs,matvecs_used,branch";
pub const SUMMARY_HEADER: &str = "strategy,ell,mean_rel_error,trimmed_std,branch_fraction";
pub const BOUNDS_HEADER: &str = "matrix_id,n,total,m,kind,k,p,bound,normalized,exact,exact_is_zero";

impl ExperimentRecord {
    fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.matrix_id,
            self.n,
            self.strategy,
            self.ell,
            self.m,
            self.beta.map(format_float).unwrap_or_default(),
            self.seed,
            self.trial,
            format_float(self.estimate),
            format_float(self.exact),
            format_float(self.abs_error),
            format_float(self.rel_error),
            self.rel_is_abs,
            self.matvecs_used,
            self.branch.as_str()
        )
    }
}

impl SummaryRow {
    fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.strategy,
            self.ell,
            format_float(self.mean_rel_error),
            format_float(self.trimmed_std),
            format_float(self.branch_fraction)
        )
    }
}

impl BoundRecord {
    fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.matrix_id,
            self.n,
            self.total,
            self.m,
            self.kind,
            self.k,
            self.p,
            format_float(self.bound),
            format_float(self.normalized),
            format_float(self.exact),
            self.exact_is_zero
        )
    }
}

pub fn records_to_csv(records: &[ExperimentRecord]) -> String {
    let mut out = String::from(RECORDS_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

pub fn summary_to_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

pub fn bounds_to_csv(rows: &[BoundRecord]) -> String {
    let mut out = String::from(BOUNDS_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

/// Exact `trace log(A + I)` for the operator: the analytic spectrum when the
/// generator provides one, otherwise the dense eigendecomposition oracle.
pub fn exact_trace_log(op: &SpsdOperator) -> Result<f64> {
    if let Some(s) = op.known_spectrum() {
        return Ok(trace_log_exact(s));
    }
    let spectrum = dense_eigenvalues(op.to_dense()?.as_ref())?;
    Ok(trace_log_exact(&spectrum))
}

/// Full spectrum for bound evaluation (analytic or dense oracle).
pub fn operator_spectrum(op: &SpsdOperator) -> Result<Spectrum> {
    if let Some(s) = op.known_spectrum() {
        return Ok(s.clone());
    }
    dense_eigenvalues(op.to_dense()?.as_ref())
}

fn load_cache(path: &Path) -> BTreeMap<String, f64> {
    fs::read_to_string(path)
        .ok()
        .and_then(|text| serde_json::from_str(&text).ok())
        .unwrap_or_default()
}

/// Cached exact value, keyed by the matrix id in a JSON sidecar file.
pub fn exact_trace_log_cached(
    spec: &MatrixSpec,
    op: &SpsdOperator,
    cache_path: Option<&Path>,
) -> Result<f64> {
    let key = spec.id_string();
    if let Some(path) = cache_path {
        let mut cache = load_cache(path);
        if let Some(&v) = cache.get(&key) {
            return Ok(v);
        }
        let v = exact_trace_log(op)?;
        cache.insert(key, v);
        let text = serde_json::to_string_pretty(&cache)
            .map_err(|e| LogDetError::Config(format!("cannot serialize oracle cache: {e}")))?;
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                fs::create_dir_all(dir)?;
            }
        }
        fs::write(path, text)?;
        Ok(v)
    } else {
        exact_trace_log(op)
    }
}

fn dispatch(
    strategy: &StrategySpec,
    op: &SpsdOperator,
    ell: usize,
    seed: u64,
) -> Result<EstimateResult> {
    let m = strategy.m;
    match strategy.name {
        StrategyName::OneSample => estimate_one_sample(op, ell, m, seed),
        StrategyName::Lowrank => estimate_lowrank(op, ell + m, seed),
        StrategyName::AlphaRank => {
            estimate_alpha_rank(op, ell, m, strategy.alpha.expect("validated"), seed)
        }
        StrategyName::HalfSamples => estimate_half_samples(op, ell, m, seed),
        StrategyName::PlainSlq => estimate_plain_slq(op, (ell + m) / m, m, seed),
        StrategyName::Logdetective => logdetective(op, ell, m, strategy.beta, seed),
    }
}

fn record_for(
    config: &ExperimentConfig,
    strategy: &StrategySpec,
    op: &SpsdOperator,
    matrix_id: &str,
    exact: f64,
    ell: usize,
    trial: usize,
) -> Result<ExperimentRecord> {
    let label = strategy.label();
    let seed = derive_trial_seed(config.base_seed, &label, ell, trial);
    let fork = op.fork_counter();
    let result = dispatch(strategy, &fork, ell, seed)?;
    debug_assert_eq!(result.matvecs_used, fork.matvec_count());
    let abs_error = (result.value - exact).abs();
    let (rel_error, rel_is_abs) = if exact != 0.0 {
        (abs_error / exact.abs(), false)
    } else {
        (abs_error, true)
    };
    Ok(ExperimentRecord {
        matrix_id: matrix_id.to_string(),
        n: op.dim(),
        strategy: label,
        ell,
        m: strategy.m,
        beta: matches!(strategy.name, StrategyName::Logdetective).then_some(strategy.beta),
        seed,
        trial,
        estimate: result.value,
        exact,
        abs_error,
        rel_error,
        rel_is_abs,
        matvecs_used: result.matvecs_used,
        branch: result.branch,
    })
}

/// Trims `floor(0.1 * len)` entries from each end of the sorted errors and
/// returns the sample standard deviation of the rest (0 when fewer than two
/// values remain).
fn trimmed_std(errors: &[f64]) -> f64 {
    let mut sorted = errors.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let t = sorted.len() / 10;
    let kept = &sorted[t..sorted.len() - t];
    if kept.len() < 2 {
        return 0.0;
    }
    let mean: f64 = kept.iter().sum::<f64>() / kept.len() as f64;
    (kept.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (kept.len() as f64 - 1.0)).sqrt()
}

fn summarize(records: &[ExperimentRecord]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(String, usize), Vec<&ExperimentRecord>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.strategy.clone(), r.ell))
            .or_default()
            .push(r);
    }
    groups
        .into_iter()
        .map(|((strategy, ell), rs)| {
            let errs: Vec<f64> = rs.iter().map(|r| r.rel_error).collect();
            let mean = errs.iter().sum::<f64>() / errs.len() as f64;
            let one_sample = rs.iter().filter(|r| r.branch == Branch::OneSample).count() as f64;
            SummaryRow {
                strategy,
                ell,
                mean_rel_error: mean,
                trimmed_std: trimmed_std(&errs),
                branch_fraction: one_sample / rs.len() as f64,
            }
        })
        .collect()
}

fn strategy_bound_rows(
    config: &ExperimentConfig,
    ts: &TailSpectrum,
    matrix_id: &str,
    n: usize,
    exact: f64,
) -> Result<Vec<BoundRecord>> {
    let mut rows = Vec::new();
    for strategy in &config.strategies {
        for &ell in &strategy.ell_grid {
            let m = strategy.m;
            let entry = match strategy.name {
                StrategyName::OneSample => Some((
                    optimize_split(ts, ell, BoundKind::OneSample)?,
                    true,
                    "one_sample",
                )),
                StrategyName::Lowrank => Some((
                    optimize_split(ts, ell + m, BoundKind::LowRank)?,
                    false,
                    "lowrank",
                )),
                StrategyName::AlphaRank => {
                    let alpha = strategy.alpha.expect("validated");
                    let rank = fuzzy_floor(alpha * ell as f64);
                    if rank >= 4 {
                        Some((
                            optimize_split(ts, rank, BoundKind::AlphaRank { ell, m, alpha })?,
                            true,
                            "alpha_rank",
                        ))
                    } else {
                        None
                    }
                }
                _ => None,
            };
            if let Some(((k, p, bound), take_sqrt, kind)) = entry {
                let raw = if take_sqrt { bound.sqrt() } else { bound };
                let normalized = if exact != 0.0 { raw / exact } else { raw };
                rows.push(BoundRecord {
                    matrix_id: matrix_id.to_string(),
                    n,
                    total: ell + m,
                    m,
                    kind: kind.to_string(),
                    k,
                    p,
                    bound,
                    normalized,
                    exact,
                    exact_is_zero: exact == 0.0,
                });
            }
        }
    }
    Ok(rows)
}

fn run_inner(config: &ExperimentConfig, parallel: bool) -> Result<ExperimentOutput> {
    config.validate()?;
    let op = config.matrix.build()?;
    let matrix_id = config.matrix.id_string();
    let exact = exact_trace_log_cached(&config.matrix, &op, config.oracle_cache.as_deref())?;

    let mut tasks: Vec<(usize, usize, usize)> = Vec::new();
    for (si, s) in config.strategies.iter().enumerate() {
        for &ell in &s.ell_grid {
            for trial in 0..config.trials {
                tasks.push((si, ell, trial));
            }
        }
    }

    let job = |i: usize| -> Result<ExperimentRecord> {
        let (si, ell, trial) = tasks[i];
        record_for(
            config,
            &config.strategies[si],
            &op,
            &matrix_id,
            exact,
            ell,
            trial,
        )
    };
    let results: Vec<Result<ExperimentRecord>> = if parallel {
        map_indexed(tasks.len(), job)
    } else {
        map_indexed_sequential(tasks.len(), job)
    };
    let mut records = Vec::with_capacity(results.len());
    for r in results {
        records.push(r?);
    }
    // Emission order is (strategy, ell, trial) regardless of config order
    // or scheduling.
    records.sort_by(|a, b| (&a.strategy, a.ell, a.trial).cmp(&(&b.strategy, b.ell, b.trial)));

    let summary = summarize(&records);
    let bound_records = if config.emit_bounds {
        let spectrum = operator_spectrum(&op)?;
        let ts = TailSpectrum::new(&spectrum);
        strategy_bound_rows(config, &ts, &matrix_id, op.dim(), exact)?
    } else {
        Vec::new()
    };

    Ok(ExperimentOutput {
        records,
        summary,
        bound_records,
        exact,
    })
}

/// Runs every (strategy, ell, trial) cell; trials execute on the rayon pool
/// when the `parallel` feature is enabled. Records are emitted in
/// (strategy, ell, trial) order regardless of scheduling, so the CSV bytes
/// are identical to the sequential runner's.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    run_inner(config, true)
}

/// Always-sequential twin of [`run_experiment`] (benchmark baseline and
/// determinism check).
pub fn run_experiment_sequential(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    run_inner(config, false)
}

/// Bound sweep reproducing the optimized dashed curves: for each total
/// budget, the square-rooted one-sample bound optimized over `k + p =
/// total - m` and the low-rank bound optimized over `k + p = total`, both
/// normalized by the exact trace-log (kept absolute with a flag when the
/// exact value is zero).
pub fn run_bound_sweep(
    matrix: &MatrixSpec,
    total_grid: &[usize],
    m: usize,
    oracle_cache: Option<&Path>,
) -> Result<Vec<BoundRecord>> {
    if m == 0 {
        return Err(LogDetError::Parameter("bound sweep needs m >= 1".into()));
    }
    let op = matrix.build()?;
    let matrix_id = matrix.id_string();
    let exact = exact_trace_log_cached(matrix, &op, oracle_cache)?;
    let spectrum = operator_spectrum(&op)?;
    let ts = TailSpectrum::new(&spectrum);
    let mut rows = Vec::new();
    for &total in total_grid {
        if total <= m + 3 {
            return Err(LogDetError::Parameter(format!(
                "total budget {total} leaves no valid one-sample split (needs total - m >= 4)"
            )));
        }
        let (k, p, v) = optimize_split(&ts, total - m, BoundKind::OneSample)?;
        let raw = v.sqrt();
        rows.push(BoundRecord {
            matrix_id: matrix_id.clone(),
            n: op.dim(),
            total,
            m,
            kind: "one_sample".into(),
            k,
            p,
            bound: v,
            normalized: if exact != 0.0 { raw / exact } else { raw },
            exact,
            exact_is_zero: exact == 0.0,
        });
        let (k, p, v) = optimize_split(&ts, total, BoundKind::LowRank)?;
        rows.push(BoundRecord {
            matrix_id: matrix_id.clone(),
            n: op.dim(),
            total,
            m,
            kind: "lowrank".into(),
            k,
            p,
            bound: v,
            normalized: if exact != 0.0 { v / exact } else { v },
            exact,
            exact_is_zero: exact == 0.0,
        });
    }
    Ok(rows)
}

/// Derived output path helpers shared with the CLI.
pub fn summary_path(records_path: &Path) -> PathBuf {
    records_path.with_extension("summary.csv")
}

pub fn bounds_path(records_path: &Path) -> PathBuf {
    records_path.with_extension("bounds.csv")
}

pub fn default_oracle_cache_path(records_path: &Path) -> PathBuf {
    records_path.with_extension("oracle.json")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            matrix: MatrixSpec::Geom { n: 120, mu: 1e-2 },
            strategies: vec![
                StrategySpec {
                    name: StrategyName::OneSample,
                    ell_grid: vec![12, 20],
                    m: 4,
                    beta: 0.75,
                    alpha: None,
                },
                StrategySpec {
                    name: StrategyName::Logdetective,
                    ell_grid: vec![20],
                    m: 4,
                    beta: 0.75,
                    alpha: None,
                },
            ],
            trials: 6,
            base_seed: 99,
            output_path: None,
            emit_bounds: true,
            oracle_cache: None,
            bounds: None,
        }
    }

    #[test]
    fn identical_configs_give_identical_bytes() {
        let cfg = small_config();
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(records_to_csv(&a.records), records_to_csv(&b.records));
        assert_eq!(summary_to_csv(&a.summary), summary_to_csv(&b.summary));
        assert_eq!(
            bounds_to_csv(&a.bound_records),
            bounds_to_csv(&b.bound_records)
        );
    }

    #[test]
    fn parallel_and_sequential_runs_are_byte_identical() {
        let cfg = small_config();
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment_sequential(&cfg).unwrap();
        assert_eq!(records_to_csv(&a.records), records_to_csv(&b.records));
        assert_eq!(summary_to_csv(&a.summary), summary_to_csv(&b.summary));
    }

    #[test]
    fn zero_matrix_records_are_flagged_absolute() {
        let cfg = ExperimentConfig {
            matrix: MatrixSpec::Diag {
                values: vec![0.0; 40],
            },
            strategies: vec![StrategySpec {
                name: StrategyName::OneSample,
                ell_grid: vec![6],
                m: 3,
                beta: 0.75,
                alpha: None,
            }],
            trials: 1,
            base_seed: 5,
            output_path: None,
            emit_bounds: false,
            oracle_cache: None,
            bounds: None,
        };
        let out = run_experiment(&cfg).unwrap();
        assert_eq!(out.exact, 0.0);
        for r in &out.records {
            assert_eq!(r.estimate, 0.0);
            assert_eq!(r.rel_error, 0.0);
            assert!(r.rel_is_abs);
        }
    }

    #[test]
    fn budget_honesty_in_records() {
        let cfg = small_config();
        let out = run_experiment(&cfg).unwrap();
        for r in &out.records {
            assert!(r.matvecs_used <= (r.ell + r.m) as u64);
            if r.strategy == "one_sample" {
                assert_eq!(r.matvecs_used, (r.ell + r.m) as u64);
            }
        }
    }

    #[test]
    fn trimming_keeps_exactly_eighty_of_hundred() {
        let errors: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let t = errors.len() / 10;
        assert_eq!(errors.len() - 2 * t, 80);
        // trimmed_std over 10..=89: mean 49.5, var of that window.
        let kept: Vec<f64> = (10..90).map(|i| i as f64).collect();
        let mean: f64 = kept.iter().sum::<f64>() / 80.0;
        let want = (kept.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 79.0).sqrt();
        assert!((trimmed_std(&errors) - want).abs() < 1e-12);
    }

    #[test]
    fn oracle_cache_round_trips() {
        let dir = std::env::temp_dir().join(format!("logdet_cache_{}", std::process::id()));
        let path = dir.join("oracle.json");
        let spec = MatrixSpec::Geom { n: 64, mu: 1e-2 };
        let op = spec.build().unwrap();
        let a = exact_trace_log_cached(&spec, &op, Some(&path)).unwrap();
        let b = exact_trace_log_cached(&spec, &op, Some(&path)).unwrap();
        assert_eq!(a, b);
        let cache = load_cache(&path);
        assert_eq!(cache.len(), 1);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn zero_matrix_bound_sweep_is_flagged() {
        let spec = MatrixSpec::Diag {
            values: vec![0.0; 30],
        };
        let rows = run_bound_sweep(&spec, &[10, 14], 4, None).unwrap();
        for r in &rows {
            assert!(r.exact_is_zero);
            assert_eq!(r.bound, 0.0);
            assert_eq!(r.normalized, 0.0);
        }
    }

    #[test]
    fn bound_sweep_one_sample_curve_is_monotone_on_algebraic_decay() {
        let spec = MatrixSpec::Alg { n: 1200, mu: 1e-2 };
        let totals: Vec<usize> = (1..=10).map(|i| 10 + 100 * i).collect();
        let rows = run_bound_sweep(&spec, &totals, 10, None).unwrap();
        let one_sample: Vec<f64> = rows
            .iter()
            .filter(|r| r.kind == "one_sample")
            .map(|r| r.normalized)
            .collect();
        assert_eq!(one_sample.len(), 10);
        for w in one_sample.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12), "bound curve rose: {w:?}");
        }
    }

    #[test]
    fn config_validation_catches_bad_grids() {
        let mut cfg = small_config();
        cfg.strategies[0].ell_grid = vec![10, 10];
        assert!(matches!(cfg.validate(), Err(LogDetError::Config(_))));
        let mut cfg = small_config();
        cfg.trials = 0;
        assert!(matches!(cfg.validate(), Err(LogDetError::Config(_))));
        let mut cfg = small_config();
        cfg.strategies[0].name = StrategyName::AlphaRank;
        assert!(matches!(cfg.validate(), Err(LogDetError::Config(_))));
    }

    #[test]
    fn config_json_round_trip() {
        let text = r#"{
            "matrix": {"family": "geom", "n": 100, "mu": 1e-4},
            "strategies": [
                {"name": "one_sample", "ell_grid": [10, 20], "m": 5},
                {"name": "alpha_rank", "ell_grid": [20], "m": 5, "alpha": 0.5}
            ],
            "trials": 3,
            "base_seed": 7,
            "emit_bounds": false
        }"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.strategies[1].label(), "alpha_rank[a=0.5]");
        assert_eq!(cfg.trials, 3);
    }
}
