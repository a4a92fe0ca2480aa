//! Small-sample descriptive statistics shared across the pipeline:
//! means, medians, Pearson/Spearman correlation, Kolmogorov–Smirnov
//! statistics and their large-sample critical values.

pub fn mean(xs: &[f64]) -> f64 {
    assert!(!xs.is_empty(), "mean of empty slice");
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population variance (divide by n).
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
}

pub fn std_dev(xs: &[f64]) -> f64 {
    variance(xs).sqrt()
}

/// Median; the even case averages the two middle order statistics.
pub fn median(xs: &[f64]) -> f64 {
    assert!(!xs.is_empty(), "median of empty slice");
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("NaN in median input"));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Pearson correlation. Zero-variance input on either side yields 0 by
/// convention (the least-claiming value where the coefficient is undefined).
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "pearson: length mismatch");
    assert!(!x.is_empty(), "pearson of empty slices");
    let n = x.len() as f64;
    let mx = mean(x);
    let my = mean(y);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return 0.0;
    }
    // guard rounding: |r| may exceed 1 by a few ulps on collinear input
    (sxy / (sxx * syy).sqrt() / n * n).clamp(-1.0, 1.0)
}

/// Ranks with ties sharing their average rank (1-based).
fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).expect("NaN in rank input"));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation (average ranks for ties).
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Two-sample Kolmogorov–Smirnov statistic: sup |F_a − F_b|.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    assert!(!a.is_empty() && !b.is_empty(), "ks_two_sample on empty sample");
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(|x, y| x.partial_cmp(y).expect("NaN in KS input"));
    sb.sort_by(|x, y| x.partial_cmp(y).expect("NaN in KS input"));
    let (na, nb) = (sa.len() as f64, sb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < sa.len() && j < sb.len() {
        let t = sa[i].min(sb[j]);
        while i < sa.len() && sa[i] <= t {
            i += 1;
        }
        while j < sb.len() && sb[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// One-sample KS statistic against the uniform distribution on [0, 1]:
/// max of D⁺ and D⁻ over the sorted sample.
pub fn ks_uniform(samples: &[f64]) -> f64 {
    assert!(!samples.is_empty(), "ks_uniform on empty sample");
    let mut s = samples.to_vec();
    s.sort_by(|x, y| x.partial_cmp(y).expect("NaN in KS input"));
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (k, &x) in s.iter().enumerate() {
        let x = x.clamp(0.0, 1.0);
        d = d.max((k as f64 + 1.0) / n - x); // D+
        d = d.max(x - k as f64 / n); // D-
    }
    d
}

/// Large-sample KS coefficient c(α) with c·√((n+m)/(n·m)) (two-sample) or
/// c/√n (one-sample) as the rejection threshold.
pub fn ks_coefficient(alpha: f64) -> f64 {
    // standard asymptotic table values
    if (alpha - 0.01).abs() < 1e-12 {
        1.6277
    } else if (alpha - 0.05).abs() < 1e-12 {
        1.358
    } else if (alpha - 0.10).abs() < 1e-12 {
        1.224
    } else {
        panic!("no tabulated KS coefficient for alpha {alpha}")
    }
}

pub fn ks_two_sample_critical(alpha: f64, n: usize, m: usize) -> f64 {
    ks_coefficient(alpha) * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

pub fn ks_one_sample_critical(alpha: f64, n: usize) -> f64 {
    ks_coefficient(alpha) / (n as f64).sqrt()
}
