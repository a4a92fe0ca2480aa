//! Generation of single synthetic daily delay vectors.
//!
//! The first `night_hours` values are drawn directly from the multiset of
//! historically observed values at the same hour — night traffic is too
//! sparse to condition on, and the previous day is out of scope because
//! vectors are generated one day at a time. Every later hour is sampled
//! conditionally: the real values of the *previous* hour are split into
//! `n_quantiles` bins, the bin holding the synthetic value just generated
//! selects the historical next-hour distribution, and a uniform draw inside
//! one of that distribution's own quantile bins produces the new value. The
//! `RandomDraw` variant skips all conditioning and resamples every hour
//! unconditionally — the degraded baseline used in ablation comparisons.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{DelayMatrix, Kind, HOURS};
use crate::rng::Stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Night-hour resampling plus quantile-conditioned sampling.
    Full,
    /// Unconditional resampling at every hour.
    RandomDraw,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Leading hours filled by plain historical resampling.
    #[serde(default = "default_night_hours")]
    pub night_hours: usize,
    /// Quantile bins used both for conditioning and for value generation.
    #[serde(default = "default_n_quantiles")]
    pub n_quantiles: usize,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default = "default_variant")]
    pub variant: Variant,
}

fn default_night_hours() -> usize {
    4
}
fn default_n_quantiles() -> usize {
    10
}
fn default_variant() -> Variant {
    Variant::Full
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            night_hours: default_night_hours(),
            n_quantiles: default_n_quantiles(),
            rng_seed: 0,
            variant: default_variant(),
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.night_hours >= HOURS {
            return Err(Error::InvalidArgument(format!(
                "night_hours must be < {HOURS}, got {}",
                self.night_hours
            )));
        }
        if self.n_quantiles < 2 {
            return Err(Error::InvalidArgument(format!(
                "n_quantiles must be ≥ 2, got {}",
                self.n_quantiles
            )));
        }
        Ok(())
    }
}

/// One generated day of 24 hourly delays.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayVector {
    pub values: [f64; HOURS],
    pub airport: String,
    pub kind: Kind,
}

/// Quantile edges over `samples` at probabilities 0, 1/k, …, 1, using linear
/// interpolation between order statistics (h = (n−1)·p). `edges[0]` is the
/// minimum, `edges[k]` the maximum; edges are non-decreasing. Duplicate
/// edges (zero-width bins) are legal on small or constant samples.
pub fn quantile_edges(samples: &[f64], k: usize) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("quantile_edges on empty sample".into()));
    }
    if k < 1 {
        return Err(Error::InvalidArgument("quantile_edges needs k ≥ 1".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("NaN in quantile input"));
    Ok(edges_from_sorted(&sorted, k))
}

fn edges_from_sorted(sorted: &[f64], k: usize) -> Vec<f64> {
    let n = sorted.len();
    (0..=k)
        .map(|i| {
            let h = (n - 1) as f64 * i as f64 / k as f64;
            let lo = h.floor() as usize;
            let hi = h.ceil() as usize;
            if lo == hi {
                sorted[lo]
            } else {
                sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
            }
        })
        .collect()
}

/// Index of the bin containing `x` under `edges` (k+1 entries, k bins).
/// Values below the first edge clamp to bin 0, values at or above the last
/// edge clamp to the last bin, and ties at an interior edge go to the higher
/// bin — so zero-width bins are never selected by location.
pub fn locate_bin(edges: &[f64], x: f64) -> usize {
    debug_assert!(edges.len() >= 2, "locate_bin needs at least one bin");
    let k = edges.len() - 1;
    let above = edges.partition_point(|e| *e <= x);
    above.saturating_sub(1).min(k - 1)
}

/// What hour-t sampling falls back to when conditioning is impossible.
#[derive(Debug, Clone)]
enum BinDist {
    /// Quantile edges of the conditional next-hour set.
    Edges(Vec<f64>),
    /// Conditional set empty even after widening: resample the hour multiset.
    Unconditional,
}

/// Precomputed per-matrix sampling tables. Building the context once and
/// generating many vectors from it is the intended hot path; the refinement
/// loop regenerates tens of thousands of vectors against one matrix.
#[derive(Debug, Clone)]
pub struct SamplerContext {
    cfg: SamplerConfig,
    airport: String,
    kind: Kind,
    /// Masked-true observations per hour, unsorted (multiset for resampling).
    hour_values: Vec<Vec<f64>>,
    /// For each hour t ≥ night_hours: quantile edges over masked d(t−1),
    /// or None when the previous hour has no observations.
    prev_edges: Vec<Option<Vec<f64>>>,
    /// For each hour t ≥ night_hours and each previous-hour bin: the
    /// distribution to draw the new value from.
    cond: Vec<Vec<BinDist>>,
}

impl SamplerContext {
    pub fn new(real: &DelayMatrix, cfg: &SamplerConfig) -> Result<SamplerContext> {
        cfg.validate()?;
        real.validate()?;
        let k = cfg.n_quantiles;

        let hour_values: Vec<Vec<f64>> =
            (0..HOURS).map(|h| real.masked_hour_values(h)).collect();

        let mut prev_edges: Vec<Option<Vec<f64>>> = vec![None; HOURS];
        let mut cond: Vec<Vec<BinDist>> = vec![Vec::new(); HOURS];

        for t in cfg.night_hours.max(1)..HOURS {
            let prev = &hour_values[t - 1];
            if prev.is_empty() {
                continue; // conditioning impossible; generation falls back
            }
            let edges = quantile_edges(prev, k)?;

            // partition days into previous-hour bins, keeping only days
            // where hour t itself was observed
            let mut next_by_bin: Vec<Vec<f64>> = vec![Vec::new(); k];
            for d in 0..real.days() {
                if real.mask[[d, t - 1]] && real.mask[[d, t]] {
                    let bin = locate_bin(&edges, real.values[[d, t - 1]]);
                    next_by_bin[bin].push(real.values[[d, t]]);
                }
            }

            let mut dists = Vec::with_capacity(k);
            for b in 0..k {
                // widen to the union of adjacent bins when a bin is empty
                let mut set: Vec<f64> = next_by_bin[b].clone();
                if set.is_empty() {
                    if b > 0 {
                        set.extend_from_slice(&next_by_bin[b - 1]);
                    }
                    if b + 1 < k {
                        set.extend_from_slice(&next_by_bin[b + 1]);
                    }
                }
                if set.is_empty() {
                    dists.push(BinDist::Unconditional);
                } else {
                    set.sort_by(|a, b| a.partial_cmp(b).expect("NaN in delay data"));
                    dists.push(BinDist::Edges(edges_from_sorted(&set, k)));
                }
            }
            prev_edges[t] = Some(edges);
            cond[t] = dists;
        }

        Ok(SamplerContext {
            cfg: *cfg,
            airport: real.airport.clone(),
            kind: real.kind,
            hour_values,
            prev_edges,
            cond,
        })
    }

    /// Draws one element of the hour multiset; empty hours yield the fill
    /// value 0 (the output vector is dense by contract).
    fn resample_hour(&self, t: usize, rng: &mut Stream) -> f64 {
        let pool = &self.hour_values[t];
        if pool.is_empty() {
            0.0
        } else {
            pool[rng.index(pool.len())]
        }
    }

    /// Uniform draw inside a uniformly chosen quantile bin: half-open in
    /// every bin except the last, which is closed so the maximum stays
    /// reachable.
    fn draw_from_edges(&self, edges: &[f64], rng: &mut Stream) -> f64 {
        let k = edges.len() - 1;
        let b = rng.index(k);
        if b + 1 == k {
            rng.uniform_closed(edges[b], edges[b + 1])
        } else {
            rng.uniform(edges[b], edges[b + 1])
        }
    }

    /// Generates one synthetic daily vector from this context.
    pub fn generate(&self, rng: &mut Stream) -> DelayVector {
        let mut values = [0.0; HOURS];
        let night = match self.cfg.variant {
            Variant::Full => self.cfg.night_hours,
            Variant::RandomDraw => HOURS,
        };
        // hour 0 has no predecessor within the day, so it is resampled even
        // when night_hours is 0
        for (t, v) in values.iter_mut().enumerate().take(night.clamp(1, HOURS)) {
            *v = self.resample_hour(t, rng);
        }
        for t in night.max(1)..HOURS {
            values[t] = match (&self.prev_edges[t], self.cfg.variant) {
                (_, Variant::RandomDraw) => unreachable!("night covers all hours"),
                (None, _) => self.resample_hour(t, rng),
                (Some(edges), _) => {
                    let bin = locate_bin(edges, values[t - 1]);
                    match &self.cond[t][bin] {
                        BinDist::Edges(e) => self.draw_from_edges(e, rng),
                        BinDist::Unconditional => self.resample_hour(t, rng),
                    }
                }
            };
        }
        DelayVector { values, airport: self.airport.clone(), kind: self.kind }
    }
}

/// One-shot convenience over [`SamplerContext`]: builds the tables and
/// generates a single vector. Callers generating many vectors should build
/// the context once.
pub fn generate_vector(
    real: &DelayMatrix,
    cfg: &SamplerConfig,
    rng: &mut Stream,
) -> Result<DelayVector> {
    Ok(SamplerContext::new(real, cfg)?.generate(rng))
}
