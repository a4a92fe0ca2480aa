//! Fidelity metrics comparing synthetic data sets against their source:
//! maximum-correlation score, a 2D principal-component projection for visual
//! inspection, and pairwise airport cross-classification.
//!
//! Each report type knows how to export itself as CSV (one row per scored
//! item) and as a compact JSON summary, so the CLI and downstream notebooks
//! share the exact numbers the library computed.

use std::collections::BTreeMap;
use std::io;

use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::discriminator::{discriminative_score, DiscriminatorConfig};
use crate::error::{Error, Result};
use crate::linalg::jacobi_eigh;
use crate::matrix::HOURS;
use crate::rng::derive_seed;
use crate::stats;

fn check_columns(name: &str, m: &ArrayView2<f64>) -> Result<()> {
    if m.nrows() == 0 {
        return Err(Error::InvalidArgument(format!("{name} matrix is empty")));
    }
    if m.ncols() != HOURS {
        return Err(Error::InvalidArgument(format!(
            "{name} matrix must have {HOURS} columns (got {})",
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "{name} matrix contains non-finite values"
        )));
    }
    Ok(())
}

/// Per-row maximum correlation of synthetic days against all real days.
#[derive(Debug, Clone, Serialize)]
pub struct CorrelationReport {
    /// For each synthetic row, its highest Pearson correlation against any
    /// real row. Constant rows correlate 0 with everything by convention.
    pub per_synthetic_max: Vec<f64>,
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

impl CorrelationReport {
    /// One CSV row per synthetic day: `synthetic_row,max_correlation`.
    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let fail = |e: csv::Error| Error::format("correlation csv", e.to_string());
        w.write_record(["synthetic_row", "max_correlation"]).map_err(fail)?;
        for (i, c) in self.per_synthetic_max.iter().enumerate() {
            w.write_record([i.to_string(), c.to_string()]).map_err(fail)?;
        }
        w.flush().map_err(|e| Error::format("correlation csv", e.to_string()))?;
        Ok(())
    }

    pub fn summary_json(&self) -> serde_json::Value {
        json!({
            "count": self.per_synthetic_max.len(),
            "median": self.median,
            "min": self.min,
            "max": self.max,
        })
    }
}

/// Computes, for every synthetic row, its Pearson correlation against every
/// real row, keeping the maximum.
pub fn correlation_score(
    real: ArrayView2<f64>,
    synthetic: ArrayView2<f64>,
) -> Result<CorrelationReport> {
    check_columns("real", &real)?;
    check_columns("synthetic", &synthetic)?;

    let real_rows: Vec<Vec<f64>> = real.rows().into_iter().map(|r| r.to_vec()).collect();
    let per_synthetic_max: Vec<f64> = synthetic
        .rows()
        .into_iter()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|srow| {
            let s = srow.to_vec();
            real_rows
                .iter()
                .map(|r| stats::pearson(&s, r))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();

    let median = stats::median(&per_synthetic_max);
    let min = per_synthetic_max.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = per_synthetic_max.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(CorrelationReport { per_synthetic_max, median, min, max })
}

/// Real and synthetic days projected onto the top two principal components
/// of their combined distribution.
#[derive(Debug, Clone)]
pub struct ProjectionResult {
    /// (n_real + n_synth) × 2, real rows first.
    pub coordinates: Array2<f64>,
    /// `true` = real, aligned with coordinate rows.
    pub labels: Vec<bool>,
    /// Fraction of total variance captured by each of the two components;
    /// non-increasing, each in [0, 1].
    pub explained_variance: [f64; 2],
    /// Set when the combined data had no variance at all; coordinates are
    /// zero and explained variance is 0 in that case.
    pub degenerate: bool,
}

impl ProjectionResult {
    /// CSV of `x,y,label` rows ready for external plotting.
    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let fail = |e: csv::Error| Error::format("projection csv", e.to_string());
        w.write_record(["x", "y", "label"]).map_err(fail)?;
        for (row, &real) in self.coordinates.rows().into_iter().zip(&self.labels) {
            let label = if real { "real" } else { "synthetic" };
            w.write_record([row[0].to_string(), row[1].to_string(), label.to_string()])
                .map_err(fail)?;
        }
        w.flush().map_err(|e| Error::format("projection csv", e.to_string()))?;
        Ok(())
    }

    pub fn summary_json(&self) -> serde_json::Value {
        json!({
            "rows": self.labels.len(),
            "explained_variance": self.explained_variance,
            "degenerate": self.degenerate,
        })
    }
}

/// Projects real and synthetic rows into 2D via principal components of the
/// concatenated data.
///
/// The combined matrix is centered by its own mean; its 24×24 sample
/// covariance is eigendecomposed (cyclic Jacobi), and rows are projected
/// onto the two leading eigenvectors. Each eigenvector's sign is fixed so
/// its largest-magnitude entry is positive, making the output reproducible
/// across runs and row orders.
pub fn pca_project(
    real: ArrayView2<f64>,
    synthetic: ArrayView2<f64>,
) -> Result<ProjectionResult> {
    check_columns("real", &real)?;
    check_columns("synthetic", &synthetic)?;
    let n = real.nrows() + synthetic.nrows();
    if n < 3 {
        return Err(Error::InvalidArgument(format!(
            "projection needs at least 3 combined rows (got {n})"
        )));
    }

    let mut combined = Array2::zeros((n, HOURS));
    for (i, row) in real.rows().into_iter().enumerate() {
        combined.row_mut(i).assign(&row);
    }
    for (i, row) in synthetic.rows().into_iter().enumerate() {
        combined.row_mut(real.nrows() + i).assign(&row);
    }
    let mut labels = vec![true; real.nrows()];
    labels.extend(std::iter::repeat_n(false, synthetic.nrows()));

    let mean = combined.mean_axis(Axis(0)).expect("non-empty data");
    for mut row in combined.rows_mut() {
        row -= &mean;
    }

    let cov = combined.t().dot(&combined) / (n - 1) as f64;
    let (eigenvalues, eigenvectors) = jacobi_eigh(&cov);
    let total: f64 = eigenvalues.iter().map(|l| l.max(0.0)).sum();

    // no variance anywhere: all rows identical
    let scale = combined.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if total <= 1e-24 * (1.0 + scale * scale) {
        return Ok(ProjectionResult {
            coordinates: Array2::zeros((n, 2)),
            labels,
            explained_variance: [0.0, 0.0],
            degenerate: true,
        });
    }

    // top-2 eigenvectors with the deterministic sign convention
    let mut basis = Array2::zeros((HOURS, 2));
    for c in 0..2 {
        let col = eigenvectors.column(c);
        let lead = col
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        let sign = if col[lead] < 0.0 { -1.0 } else { 1.0 };
        for r in 0..HOURS {
            basis[[r, c]] = sign * col[r];
        }
    }

    let coordinates = combined.dot(&basis);
    let share = |i: usize| (eigenvalues[i].max(0.0) / total).clamp(0.0, 1.0);
    Ok(ProjectionResult {
        coordinates,
        labels,
        explained_variance: [share(0), share(1)],
        degenerate: false,
    })
}

/// One airport pair's separability, measured on real and on synthetic data.
#[derive(Debug, Clone, Serialize)]
pub struct PairAccuracy {
    pub airport_a: String,
    pub airport_b: String,
    pub accuracy_real: f64,
    pub accuracy_synth: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CrossClassReport {
    /// Every unordered airport pair in lexicographic order.
    pub pairs: Vec<PairAccuracy>,
}

impl CrossClassReport {
    /// Pearson correlation between real-data and synthetic-data pair
    /// accuracies — the headline number of the cross-classification study.
    pub fn accuracy_correlation(&self) -> f64 {
        let real: Vec<f64> = self.pairs.iter().map(|p| p.accuracy_real).collect();
        let synth: Vec<f64> = self.pairs.iter().map(|p| p.accuracy_synth).collect();
        stats::pearson(&real, &synth)
    }

    /// One CSV row per pair:
    /// `airport_a,airport_b,accuracy_real,accuracy_synth`.
    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let fail = |e: csv::Error| Error::format("cross-classification csv", e.to_string());
        w.write_record(["airport_a", "airport_b", "accuracy_real", "accuracy_synth"])
            .map_err(fail)?;
        for p in &self.pairs {
            w.write_record([
                p.airport_a.clone(),
                p.airport_b.clone(),
                p.accuracy_real.to_string(),
                p.accuracy_synth.to_string(),
            ])
            .map_err(fail)?;
        }
        w.flush()
            .map_err(|e| Error::format("cross-classification csv", e.to_string()))?;
        Ok(())
    }

    pub fn summary_json(&self) -> serde_json::Value {
        json!({
            "pairs": self.pairs.len(),
            "accuracy_correlation": self.accuracy_correlation(),
        })
    }
}

/// For every unordered airport pair, trains the classifier to tell airport A
/// days from airport B days — once on real data and once on synthetic data —
/// and reports held-out accuracy for both.
///
/// If the synthetic data preserves what makes airports distinguishable, the
/// two accuracies track each other across pairs. Each training uses a single
/// half/half split with a seed derived from the pair and data kind, so the
/// report is deterministic; pairs run in parallel.
pub fn cross_classification(
    real: &BTreeMap<String, Array2<f64>>,
    synthetic: &BTreeMap<String, Array2<f64>>,
    cfg: &DiscriminatorConfig,
) -> Result<CrossClassReport> {
    cfg.validate()?;
    if real.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "cross-classification needs at least 2 airports (got {})",
            real.len()
        )));
    }
    if real.len() != synthetic.len()
        || !real.keys().zip(synthetic.keys()).all(|(a, b)| a == b)
    {
        let missing: Vec<&String> = real
            .keys()
            .filter(|k| !synthetic.contains_key(*k))
            .chain(synthetic.keys().filter(|k| !real.contains_key(*k)))
            .collect();
        return Err(Error::InvalidArgument(format!(
            "real and synthetic airport sets differ (unmatched: {missing:?})"
        )));
    }
    for (code, m) in real.iter().chain(synthetic.iter()) {
        check_columns(code, &m.view())?;
        if m.nrows() < 2 {
            return Err(Error::InvalidArgument(format!(
                "airport {code} needs at least 2 rows to split"
            )));
        }
    }

    let codes: Vec<&String> = real.keys().collect();
    let mut pair_codes = Vec::new();
    for i in 0..codes.len() {
        for j in i + 1..codes.len() {
            pair_codes.push((codes[i], codes[j]));
        }
    }

    let pairs: Result<Vec<PairAccuracy>> = pair_codes
        .into_par_iter()
        .enumerate()
        .map(|(pi, (a, b))| {
            let one = |kind_tag: u64, data: &BTreeMap<String, Array2<f64>>| {
                let pair_cfg = DiscriminatorConfig {
                    rng_seed: derive_seed(cfg.rng_seed, &[20, pi as u64, kind_tag]),
                    ..cfg.clone()
                };
                // airport B plays the positive class; one split, one score
                discriminative_score(data[b].view(), data[a].view(), &pair_cfg, 1)
                    .map(|d| d.scores[0])
            };
            Ok(PairAccuracy {
                airport_a: a.clone(),
                airport_b: b.clone(),
                accuracy_real: one(0, real)?,
                accuracy_synth: one(1, synthetic)?,
            })
        })
        .collect();

    Ok(CrossClassReport { pairs: pairs? })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array2};

    fn noise_matrix(n: usize, mean: f64, sd: f64, seed: u64) -> Array2<f64> {
        let mut rng = Stream::new(seed);
        let mut m = Array2::zeros((n, HOURS));
        for v in m.iter_mut() {
            *v = rng.normal_scaled(mean, sd);
        }
        m
    }

    #[test]
    fn correlation_of_a_copy_is_one() {
        let real = noise_matrix(12, 5.0, 3.0, 1);
        let rep = correlation_score(real.view(), real.view()).unwrap();
        assert_eq!(rep.per_synthetic_max.len(), 12);
        for c in &rep.per_synthetic_max {
            assert_abs_diff_eq!(*c, 1.0, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(rep.median, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn correlation_of_a_negated_row_is_minus_one() {
        let mut real = Array2::zeros((1, HOURS));
        for (h, v) in real.row_mut(0).iter_mut().enumerate() {
            *v = h as f64;
        }
        let synth = -&real;
        let rep = correlation_score(real.view(), synth.view()).unwrap();
        assert_abs_diff_eq!(rep.per_synthetic_max[0], -1.0, epsilon = 1e-12);
        assert_eq!(rep.min, rep.max);
    }

    #[test]
    fn constant_rows_correlate_zero() {
        let real = noise_matrix(5, 0.0, 1.0, 2);
        let synth = Array2::from_elem((2, HOURS), 7.0);
        let rep = correlation_score(real.view(), synth.view()).unwrap();
        assert_eq!(rep.per_synthetic_max, vec![0.0, 0.0]);
    }

    #[test]
    fn correlation_ignores_real_row_order() {
        let real = noise_matrix(10, 1.0, 2.0, 3);
        let synth = noise_matrix(6, 1.0, 2.0, 4);
        let rep_a = correlation_score(real.view(), synth.view()).unwrap();

        let mut perm: Vec<usize> = (0..10).collect();
        Stream::new(5).shuffle(&mut perm);
        let mut shuffled = Array2::zeros(real.dim());
        for (dst, &src) in perm.iter().enumerate() {
            shuffled.row_mut(dst).assign(&real.row(src));
        }
        let rep_b = correlation_score(shuffled.view(), synth.view()).unwrap();
        assert_eq!(rep_a.per_synthetic_max, rep_b.per_synthetic_max);
    }

    #[test]
    fn correlation_summaries_are_consistent_and_bounded() {
        let real = noise_matrix(20, 0.0, 5.0, 6);
        let synth = noise_matrix(15, 0.0, 5.0, 7);
        let rep = correlation_score(real.view(), synth.view()).unwrap();
        for c in &rep.per_synthetic_max {
            assert!((-1.0..=1.0).contains(c));
            assert!(*c >= rep.min && *c <= rep.max);
        }
        assert!(rep.min <= rep.median && rep.median <= rep.max);
    }

    #[test]
    fn correlation_rejects_bad_input() {
        let good = noise_matrix(3, 0.0, 1.0, 8);
        let empty = Array2::<f64>::zeros((0, HOURS));
        assert!(correlation_score(empty.view(), good.view()).is_err());
        assert!(correlation_score(good.view(), empty.view()).is_err());
        let narrow = Array2::<f64>::zeros((3, 10));
        assert!(correlation_score(narrow.view(), good.view()).is_err());
    }

    #[test]
    fn correlation_csv_has_one_row_per_synthetic_day() {
        let real = noise_matrix(4, 0.0, 1.0, 9);
        let synth = noise_matrix(4, 0.0, 1.0, 90);
        let rep = correlation_score(real.view(), synth.view()).unwrap();
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 5); // header + 4 rows
        assert_eq!(lines[0], "synthetic_row,max_correlation");
        assert!(lines[1].starts_with("0,"));
        // decimal separator is '.', never ','
        assert!(lines[1][2..].contains('.') && !lines[1][2..].contains(','));
    }

    #[test]
    fn projection_of_a_line_is_rank_one() {
        // points along one direction in 24-space
        let mut dir = [0.0; HOURS];
        for (h, d) in dir.iter_mut().enumerate() {
            *d = (h as f64 * 0.7).sin();
        }
        let mut rng = Stream::new(10);
        let make = |rng: &mut Stream, n: usize| {
            let mut m = Array2::zeros((n, HOURS));
            for i in 0..n {
                let t = rng.uniform(-5.0, 5.0);
                for h in 0..HOURS {
                    m[[i, h]] = 3.0 + t * dir[h];
                }
            }
            m
        };
        let real = make(&mut rng, 30);
        let synth = make(&mut rng, 20);
        let proj = pca_project(real.view(), synth.view()).unwrap();
        assert!(!proj.degenerate);
        assert_abs_diff_eq!(proj.explained_variance[0], 1.0, epsilon = 1e-9);
        for row in proj.coordinates.rows() {
            assert!(row[1].abs() <= 1e-9, "second coordinate {}", row[1]);
        }
    }

    #[test]
    fn projection_of_isotropic_noise_spreads_variance_evenly() {
        let real = noise_matrix(2500, 0.0, 1.0, 11);
        let synth = noise_matrix(2500, 0.0, 1.0, 12);
        let proj = pca_project(real.view(), synth.view()).unwrap();
        for ev in proj.explained_variance {
            assert_abs_diff_eq!(ev, 1.0 / HOURS as f64, epsilon = 0.02);
        }
        assert!(proj.explained_variance[0] >= proj.explained_variance[1]);
    }

    #[test]
    fn projection_of_identical_clouds_is_exchangeable() {
        // same distribution both sides: per-label means of each coordinate
        // agree within 3 standard errors
        let real = noise_matrix(800, 2.0, 1.5, 13);
        let synth = noise_matrix(800, 2.0, 1.5, 14);
        let proj = pca_project(real.view(), synth.view()).unwrap();
        for c in 0..2 {
            let vals = |want: bool| -> Vec<f64> {
                proj.coordinates
                    .rows()
                    .into_iter()
                    .zip(&proj.labels)
                    .filter(|(_, &l)| l == want)
                    .map(|(r, _)| r[c])
                    .collect()
            };
            let r = vals(true);
            let s = vals(false);
            let se = (stats::variance(&r) / r.len() as f64
                + stats::variance(&s) / s.len() as f64)
                .sqrt();
            let gap = (stats::mean(&r) - stats::mean(&s)).abs();
            assert!(gap <= 3.0 * se, "coordinate {c}: gap {gap}, 3·SE {}", 3.0 * se);
        }
    }

    #[test]
    fn projection_flags_fully_degenerate_data() {
        let real = Array2::from_elem((5, HOURS), 4.0);
        let synth = Array2::from_elem((4, HOURS), 4.0);
        let proj = pca_project(real.view(), synth.view()).unwrap();
        assert!(proj.degenerate);
        assert_eq!(proj.explained_variance, [0.0, 0.0]);
        assert!(proj.coordinates.iter().all(|&v| v == 0.0));
        assert_eq!(proj.labels.len(), 9);
    }

    #[test]
    fn projection_respects_row_identity_under_permutation() {
        // permuting real rows permutes coordinates the same way (the fitted
        // basis is unchanged because the combined data is the same multiset)
        let real = noise_matrix(40, 0.0, 2.0, 15);
        let synth = noise_matrix(10, 0.0, 2.0, 16);
        let a = pca_project(real.view(), synth.view()).unwrap();

        let mut perm: Vec<usize> = (0..40).collect();
        Stream::new(17).shuffle(&mut perm);
        let mut shuffled = Array2::zeros(real.dim());
        for (dst, &src) in perm.iter().enumerate() {
            shuffled.row_mut(dst).assign(&real.row(src));
        }
        let b = pca_project(shuffled.view(), synth.view()).unwrap();
        for (dst, &src) in perm.iter().enumerate() {
            for c in 0..2 {
                assert_abs_diff_eq!(
                    b.coordinates[[dst, c]],
                    a.coordinates[[src, c]],
                    epsilon = 1e-9
                );
            }
        }
    }

    #[test]
    fn projection_needs_three_rows() {
        let one = noise_matrix(1, 0.0, 1.0, 18);
        assert!(pca_project(one.view(), one.view()).is_err());
    }

    #[test]
    fn projection_csv_labels_both_classes() {
        let real = noise_matrix(3, 0.0, 1.0, 19);
        let synth = noise_matrix(2, 0.0, 1.0, 20);
        let proj = pca_project(real.view(), synth.view()).unwrap();
        let mut buf = Vec::new();
        proj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 6);
        assert_eq!(text.lines().filter(|l| l.ends_with(",real")).count(), 3);
        assert_eq!(text.lines().filter(|l| l.ends_with(",synthetic")).count(), 2);
    }

    fn quick_cfg(seed: u64) -> DiscriminatorConfig {
        DiscriminatorConfig {
            filters: 4,
            epochs: 15,
            rng_seed: seed,
            ..Default::default()
        }
    }

    #[test]
    fn identical_airports_are_indistinguishable() {
        let base = noise_matrix(120, 10.0, 4.0, 21);
        let mut real = BTreeMap::new();
        real.insert("AAA".to_string(), base.clone());
        real.insert("BBB".to_string(), noise_matrix(120, 10.0, 4.0, 22));
        let synthetic = real.clone();
        let rep = cross_classification(&real, &synthetic, &quick_cfg(23)).unwrap();
        assert_eq!(rep.pairs.len(), 1);
        let p = &rep.pairs[0];
        assert!(
            (p.accuracy_real - 0.5).abs() <= 0.1,
            "real accuracy {} not near chance",
            p.accuracy_real
        );
        assert!(
            (p.accuracy_synth - 0.5).abs() <= 0.1,
            "synthetic accuracy {} not near chance",
            p.accuracy_synth
        );
    }

    #[test]
    fn disjoint_airports_are_separable() {
        let mut real = BTreeMap::new();
        real.insert("LOW".to_string(), noise_matrix(80, 0.0, 1.0, 24));
        real.insert("HGH".to_string(), noise_matrix(80, 100.0, 1.0, 25));
        let mut synthetic = BTreeMap::new();
        synthetic.insert("LOW".to_string(), noise_matrix(80, 0.0, 1.0, 26));
        synthetic.insert("HGH".to_string(), noise_matrix(80, 100.0, 1.0, 27));
        let rep = cross_classification(&real, &synthetic, &quick_cfg(28)).unwrap();
        let p = &rep.pairs[0];
        assert!(p.accuracy_real >= 0.95, "real accuracy {}", p.accuracy_real);
        assert!(p.accuracy_synth >= 0.95, "synthetic accuracy {}", p.accuracy_synth);
    }

    #[test]
    fn pairs_cover_every_unordered_combination() {
        let mut real = BTreeMap::new();
        let mut synthetic = BTreeMap::new();
        for (i, code) in ["ONE", "TWO", "THR", "FOU"].iter().enumerate() {
            real.insert(code.to_string(), noise_matrix(10, i as f64, 1.0, 30 + i as u64));
            synthetic.insert(code.to_string(), noise_matrix(10, i as f64, 1.0, 40 + i as u64));
        }
        let cheap = DiscriminatorConfig { epochs: 1, filters: 2, ..quick_cfg(29) };
        let rep = cross_classification(&real, &synthetic, &cheap).unwrap();
        assert_eq!(rep.pairs.len(), 6);
        // lexicographic, a < b
        let listed: Vec<(String, String)> = rep
            .pairs
            .iter()
            .map(|p| (p.airport_a.clone(), p.airport_b.clone()))
            .collect();
        for (a, b) in &listed {
            assert!(a < b);
        }
        let mut sorted = listed.clone();
        sorted.sort();
        assert_eq!(listed, sorted);
        for p in &rep.pairs {
            assert!((0.0..=1.0).contains(&p.accuracy_real));
            assert!((0.0..=1.0).contains(&p.accuracy_synth));
        }
        // csv export: header + 6 pairs
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 7);
    }

    #[test]
    fn cross_classification_rejects_mismatched_airports() {
        let mut real = BTreeMap::new();
        real.insert("AAA".to_string(), noise_matrix(10, 0.0, 1.0, 50));
        real.insert("BBB".to_string(), noise_matrix(10, 0.0, 1.0, 51));
        let mut synthetic = real.clone();
        synthetic.remove("BBB");
        synthetic.insert("CCC".to_string(), noise_matrix(10, 0.0, 1.0, 52));
        let cfg = quick_cfg(53);
        assert!(cross_classification(&real, &synthetic, &cfg).is_err());

        let only_one: BTreeMap<String, Array2<f64>> =
            real.iter().take(1).map(|(k, v)| (k.clone(), v.clone())).collect();
        assert!(cross_classification(&only_one, &only_one, &cfg).is_err());
    }

    #[test]
    fn accuracy_correlation_tracks_pair_ordering() {
        let rep = CrossClassReport {
            pairs: vec![
                PairAccuracy {
                    airport_a: "A".into(),
                    airport_b: "B".into(),
                    accuracy_real: 0.5,
                    accuracy_synth: 0.52,
                },
                PairAccuracy {
                    airport_a: "A".into(),
                    airport_b: "C".into(),
                    accuracy_real: 0.7,
                    accuracy_synth: 0.68,
                },
                PairAccuracy {
                    airport_a: "B".into(),
                    airport_b: "C".into(),
                    accuracy_real: 0.9,
                    accuracy_synth: 0.88,
                },
            ],
        };
        assert!(rep.accuracy_correlation() > 0.99);
        let sum = rep.summary_json();
        assert_eq!(sum["pairs"], 3);
    }
}
