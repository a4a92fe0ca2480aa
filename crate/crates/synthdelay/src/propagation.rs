//! Granger-causality tests between airport delay series.
//!
//! For an ordered airport pair (a, b), the test asks whether a's past delays
//! improve the prediction of b's next delay beyond b's own past: a
//! restricted autoregression of b on its own lags is compared against an
//! unrestricted one that adds a's lags, via the F-test on residual sums of
//! squares. Small p-values mean a's history carries real predictive
//! information — the statistical footprint of delay propagation.
//!
//! Series are day × 24 matrices. By default, lagged rows are built within
//! each day only and pooled across days, so no artificial overnight
//! dependencies are created; full concatenation across midnights is
//! available for sensitivity checks. A whole-matrix shuffle surrogate
//! provides the no-structure baseline.

use std::collections::BTreeMap;
use std::io;

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::linalg::lstsq;
use crate::matrix::HOURS;
use crate::rng::Stream;
use crate::special::f_tail;

/// How the day × 24 matrix becomes regression rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConcatMode {
    /// Lagged rows only within each day, pooled across days (no
    /// cross-midnight lags).
    PerDayPooled,
    /// One long series across day boundaries.
    FullConcat,
}

/// Which data a result was computed on; carried through to reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesKind {
    Real,
    Synthetic,
    Shuffled,
}

impl SeriesKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SeriesKind::Real => "real",
            SeriesKind::Synthetic => "synthetic",
            SeriesKind::Shuffled => "shuffled",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GcConfig {
    /// Number of lags L in both models.
    #[serde(default = "default_max_lag")]
    pub max_lag: usize,
    #[serde(default = "default_concat_mode")]
    pub concat_mode: ConcatMode,
    /// Seed for [`shuffle_surrogate`].
    #[serde(default)]
    pub rng_seed: u64,
    /// Choose the lag in 1..=6 by BIC on the unrestricted model instead of
    /// using `max_lag` directly.
    #[serde(default)]
    pub select_lag_bic: bool,
    /// Difference each series once before building lag rows.
    #[serde(default)]
    pub first_difference: bool,
}

fn default_max_lag() -> usize {
    3
}
fn default_concat_mode() -> ConcatMode {
    ConcatMode::PerDayPooled
}

impl Default for GcConfig {
    fn default() -> Self {
        GcConfig {
            max_lag: default_max_lag(),
            concat_mode: default_concat_mode(),
            rng_seed: 0,
            select_lag_bic: false,
            first_difference: false,
        }
    }
}

/// Largest lag the BIC search considers.
const BIC_MAX_LAG: usize = 6;

impl GcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_lag == 0 {
            return Err(Error::Config("max_lag must be at least 1".into()));
        }
        let effective_max = if self.select_lag_bic { BIC_MAX_LAG } else { self.max_lag };
        if self.concat_mode == ConcatMode::PerDayPooled {
            let day_len = if self.first_difference { HOURS - 1 } else { HOURS };
            if effective_max >= day_len {
                return Err(Error::Config(format!(
                    "lag {effective_max} leaves no in-day rows (day length {day_len})"
                )));
            }
        }
        Ok(())
    }
}

/// Outcome of one directional test.
#[derive(Debug, Clone, Serialize)]
pub struct GcTest {
    pub f_stat: f64,
    /// Upper-tail probability in (0, 1].
    pub p_value: f64,
    /// Regression rows actually used.
    pub n_obs: usize,
    /// Lag order the statistics were computed at (BIC choice if enabled).
    pub lag: usize,
    /// Rank-deficient design (e.g. a constant series): p forced to 1.
    pub degenerate: bool,
}

/// [`GcTest`] for one ordered airport pair.
#[derive(Debug, Clone, Serialize)]
pub struct GcResult {
    /// Direction source → target: "does `source`'s past predict `target`?"
    pub source: String,
    pub target: String,
    pub f_stat: f64,
    pub p_value: f64,
    pub n_obs: usize,
    pub lag: usize,
    pub degenerate: bool,
    pub series_kind: SeriesKind,
}

/// Turns a day × 24 matrix into one or more 1-D segments according to the
/// concatenation mode, applying first-differencing inside each segment.
fn segments(m: &ArrayView2<f64>, cfg: &GcConfig) -> Vec<Vec<f64>> {
    let raw: Vec<Vec<f64>> = match cfg.concat_mode {
        ConcatMode::PerDayPooled => m.rows().into_iter().map(|r| r.to_vec()).collect(),
        ConcatMode::FullConcat => vec![m.iter().copied().collect()],
    };
    if !cfg.first_difference {
        return raw;
    }
    raw.into_iter()
        .map(|s| s.windows(2).map(|w| w[1] - w[0]).collect())
        .collect()
}

/// Builds the response and the two nested design matrices at lag `lag`.
/// Column order: intercept, y lags 1..L, then (unrestricted only) x lags.
fn lag_rows(
    xs: &[Vec<f64>],
    ys: &[Vec<f64>],
    lag: usize,
) -> (Vec<f64>, Array2<f64>, Array2<f64>) {
    let n: usize = ys.iter().map(|s| s.len().saturating_sub(lag)).sum();
    let mut target = Vec::with_capacity(n);
    let mut restricted = Array2::zeros((n, lag + 1));
    let mut unrestricted = Array2::zeros((n, 2 * lag + 1));
    let mut row = 0;
    for (xseg, yseg) in xs.iter().zip(ys) {
        for t in lag..yseg.len() {
            target.push(yseg[t]);
            restricted[[row, 0]] = 1.0;
            unrestricted[[row, 0]] = 1.0;
            for l in 1..=lag {
                restricted[[row, l]] = yseg[t - l];
                unrestricted[[row, l]] = yseg[t - l];
                unrestricted[[row, lag + l]] = xseg[t - l];
            }
            row += 1;
        }
    }
    (target, restricted, unrestricted)
}

fn f_test_at(xs: &[Vec<f64>], ys: &[Vec<f64>], lag: usize) -> Result<GcTest> {
    let (target, restricted, unrestricted) = lag_rows(xs, ys, lag);
    let n = target.len();
    if n <= 2 * lag + 1 {
        return Err(Error::InvalidArgument(format!(
            "need more than {} observations at lag {lag}, got {n}",
            2 * lag + 1
        )));
    }
    let fit_r = lstsq(&restricted, &target);
    let fit_u = lstsq(&unrestricted, &target);
    if fit_r.rank_deficient || fit_u.rank_deficient {
        return Ok(GcTest { f_stat: 0.0, p_value: 1.0, n_obs: n, lag, degenerate: true });
    }
    let d2 = (n - 2 * lag - 1) as f64;
    // a numerically perfect unrestricted fit leaves no residual scale to
    // test against; call it degenerate rather than fabricating F = ∞
    let scale: f64 = target.iter().map(|v| v * v).sum();
    if fit_u.rss <= 1e-28 * scale.max(1.0) {
        return Ok(GcTest { f_stat: 0.0, p_value: 1.0, n_obs: n, lag, degenerate: true });
    }
    let f_stat = (((fit_r.rss - fit_u.rss) / lag as f64) / (fit_u.rss / d2)).max(0.0);
    let p_value = f_tail(f_stat, lag, n - 2 * lag - 1).max(f64::MIN_POSITIVE);
    Ok(GcTest { f_stat, p_value, n_obs: n, lag, degenerate: false })
}

/// Tests whether `x`'s past helps predict `y` beyond `y`'s own past.
///
/// Both matrices must be aligned day-for-day with 24 hourly columns. With
/// `select_lag_bic` the lag is chosen in 1..=6 by BIC of the unrestricted
/// model on a common row set (built at lag 6), then the reported statistics
/// are refit at the chosen lag over all rows that lag admits.
pub fn gc_test(x: ArrayView2<f64>, y: ArrayView2<f64>, cfg: &GcConfig) -> Result<GcTest> {
    cfg.validate()?;
    if x.dim() != y.dim() {
        return Err(Error::InvalidArgument(format!(
            "series shapes differ: {:?} vs {:?}",
            x.dim(),
            y.dim()
        )));
    }
    if x.ncols() != HOURS {
        return Err(Error::InvalidArgument(format!(
            "series must have {HOURS} columns (got {})",
            x.ncols()
        )));
    }
    if x.nrows() == 0 {
        return Err(Error::InvalidArgument("series have no days".into()));
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("series contain non-finite values".into()));
    }

    let xs = segments(&x, cfg);
    let ys = segments(&y, cfg);

    let lag = if cfg.select_lag_bic {
        select_lag(&xs, &ys)?
    } else {
        cfg.max_lag
    };
    f_test_at(&xs, &ys, lag)
}

/// BIC lag selection on the unrestricted model over a common row set.
fn select_lag(xs: &[Vec<f64>], ys: &[Vec<f64>]) -> Result<usize> {
    // build rows once at the largest candidate so every candidate is scored
    // on identical responses, the standard requirement for comparable BICs
    let (target, _, design_max) = lag_rows(xs, ys, BIC_MAX_LAG);
    let n = target.len();
    if n <= 2 * BIC_MAX_LAG + 1 {
        return Err(Error::InvalidArgument(format!(
            "lag selection needs more than {} observations, got {n}",
            2 * BIC_MAX_LAG + 1
        )));
    }
    let mut best = (f64::INFINITY, 1usize);
    for lag in 1..=BIC_MAX_LAG {
        // columns: intercept, y lags 1..lag, x lags 1..lag
        let mut cols: Vec<usize> = (0..=lag).collect();
        cols.extend(BIC_MAX_LAG + 1..BIC_MAX_LAG + 1 + lag);
        let mut design = Array2::zeros((n, cols.len()));
        for (ci, &src) in cols.iter().enumerate() {
            for r in 0..n {
                design[[r, ci]] = design_max[[r, src]];
            }
        }
        let fit = lstsq(&design, &target);
        if fit.rank_deficient {
            continue;
        }
        let k = (2 * lag + 1) as f64;
        let bic = n as f64 * (fit.rss / n as f64).max(f64::MIN_POSITIVE).ln()
            + k * (n as f64).ln();
        if bic < best.0 {
            best = (bic, lag);
        }
    }
    Ok(best.1)
}

/// Runs [`gc_test`] for every ordered airport pair, in parallel. Results are
/// ordered lexicographically by (source, target).
pub fn gc_matrix(
    matrices: &BTreeMap<String, Array2<f64>>,
    cfg: &GcConfig,
    kind: SeriesKind,
) -> Result<Vec<GcResult>> {
    cfg.validate()?;
    if matrices.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "propagation testing needs at least 2 airports (got {})",
            matrices.len()
        )));
    }
    let codes: Vec<&String> = matrices.keys().collect();
    let mut pairs = Vec::new();
    for a in &codes {
        for b in &codes {
            if a != b {
                pairs.push((*a, *b));
            }
        }
    }
    pairs
        .into_par_iter()
        .map(|(a, b)| {
            let t = gc_test(matrices[a].view(), matrices[b].view(), cfg)?;
            Ok(GcResult {
                source: a.clone(),
                target: b.clone(),
                f_stat: t.f_stat,
                p_value: t.p_value,
                n_obs: t.n_obs,
                lag: t.lag,
                degenerate: t.degenerate,
                series_kind: kind,
            })
        })
        .collect()
}

/// Destroys all temporal structure: every cell of the matrix is permuted
/// uniformly at random across the whole matrix. Shape and value multiset are
/// preserved exactly.
pub fn shuffle_surrogate(m: ArrayView2<f64>, rng: &mut Stream) -> Array2<f64> {
    let (rows, cols) = m.dim();
    let mut values: Vec<f64> = m.iter().copied().collect();
    rng.shuffle(&mut values);
    Array2::from_shape_vec((rows, cols), values).expect("same element count")
}

/// CSV export: one row per result with the log10 p-value precomputed.
pub fn write_gc_csv<W: io::Write>(results: &[GcResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let fail = |e: csv::Error| Error::format("propagation csv", e.to_string());
    w.write_record([
        "source", "target", "f_stat", "p_value", "log10_p", "n_obs", "lag",
        "degenerate", "series_kind",
    ])
    .map_err(fail)?;
    for r in results {
        w.write_record([
            r.source.clone(),
            r.target.clone(),
            r.f_stat.to_string(),
            r.p_value.to_string(),
            r.p_value.log10().to_string(),
            r.n_obs.to_string(),
            r.lag.to_string(),
            r.degenerate.to_string(),
            r.series_kind.as_str().to_string(),
        ])
        .map_err(fail)?;
    }
    w.flush().map_err(|e| Error::format("propagation csv", e.to_string()))?;
    Ok(())
}

/// Histogram of log10 p-values as JSON, for plot reproduction. Bins span
/// [lo, 0] with equal widths; values below `lo` land in the first bin.
pub fn log10_p_histogram(results: &[GcResult], lo: f64, n_bins: usize) -> serde_json::Value {
    assert!(n_bins >= 1 && lo < 0.0, "need at least one bin over a negative range");
    let width = -lo / n_bins as f64;
    let mut counts = vec![0usize; n_bins];
    for r in results {
        let v = r.p_value.log10();
        let idx = ((v - lo) / width).floor();
        let idx = (idx.max(0.0) as usize).min(n_bins - 1);
        counts[idx] += 1;
    }
    let edges: Vec<f64> = (0..=n_bins).map(|i| lo + width * i as f64).collect();
    json!({
        "bin_edges": edges,
        "counts": counts,
        "total": results.len(),
        "kind": results.first().map(|r| r.series_kind.as_str()),
    })
}
