//! Deterministic benchmark processes.
//!
//! Real per-airport delay data is proprietary, so the test-suite and the
//! bundled demos run on small synthetic processes with known structure: an
//! AR(1) level riding a daily profile (realistic hour-to-hour memory), a
//! directionally coupled pair (known causality), families with graded mean
//! shifts (known separability ordering), and plain white noise (known
//! absence of structure). Everything is seeded and reproducible.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use ndarray::Array2;

use crate::matrix::{consecutive_dates, DelayMatrix, Kind, Unit, HOURS};
use crate::rng::Stream;

fn start_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2015, 1, 1).expect("valid date")
}

/// Smooth daily shape: quiet nights, a morning ramp and an evening peak.
fn daily_profile(hour: usize, amplitude: f64) -> f64 {
    let t = hour as f64 / HOURS as f64 * std::f64::consts::TAU;
    // two harmonics give an asymmetric, airport-like double hump
    amplitude * (0.6 * (t - 1.3).sin() + 0.4 * (2.0 * t - 0.7).sin()).max(-0.8)
}

/// The standard benchmark: an AR(1) level (φ 0.85, innovation σ 4) carried
/// across day boundaries, added to a daily profile of amplitude 12 around a
/// base delay of 10. 600 days reproduce the scale used by the acceptance
/// checks.
pub fn ar1_profile(days: usize, seed: u64) -> DelayMatrix {
    ar1_profile_with(days, seed, 0.85, 4.0, 10.0, 12.0, "TOY", Kind::Departure)
}

#[allow(clippy::too_many_arguments)]
pub fn ar1_profile_with(
    days: usize,
    seed: u64,
    phi: f64,
    sigma: f64,
    base: f64,
    amplitude: f64,
    airport: &str,
    kind: Kind,
) -> DelayMatrix {
    let mut rng = Stream::new(seed);
    let mut values = Array2::zeros((days, HOURS));
    let mut level = 0.0;
    for d in 0..days {
        for h in 0..HOURS {
            level = phi * level + rng.normal_scaled(0.0, sigma);
            values[[d, h]] = base + daily_profile(h, amplitude) + level;
        }
    }
    DelayMatrix::dense(
        airport,
        kind,
        Unit::Minutes,
        values,
        consecutive_dates(start_date(), days),
    )
    .expect("toy matrix is always valid")
}

/// A directionally coupled pair: the source is an AR(1)-profile process and
/// the destination adds `beta` times the source's previous hour (within the
/// day), so source→destination carries real lag-1 information while the
/// reverse direction carries none beyond chance.
pub fn coupled_chain(days: usize, beta: f64, seed: u64) -> (DelayMatrix, DelayMatrix) {
    let src = ar1_profile_with(days, seed, 0.85, 4.0, 10.0, 12.0, "SRC", Kind::Departure);
    let mut rng = Stream::new(seed.wrapping_add(0x9E3779B97F4A7C15));
    let mut values = Array2::zeros((days, HOURS));
    let mut level = 0.0;
    for d in 0..days {
        for h in 0..HOURS {
            level = 0.7 * level + rng.normal_scaled(0.0, 2.0);
            let upstream = if h >= 1 { src.values[[d, h - 1]] } else { 0.0 };
            values[[d, h]] = 8.0 + daily_profile(h, 6.0) + level + beta * upstream;
        }
    }
    let dst = DelayMatrix::dense(
        "DST",
        Kind::Departure,
        Unit::Minutes,
        values,
        consecutive_dates(start_date(), days),
    )
    .expect("toy matrix is always valid");
    (src, dst)
}

/// A directionally coupled pair stripped down to the bare phenomenon:
/// `dst(t) = base + beta·(src(t−1) − base) + noise`, with every hour of
/// `src` (and every own-noise term of `dst`) an independent draw.
///
/// The lagged cross-airport term is the only dependence anywhere, which is
/// exactly what causality-calibration checks need. Own-series persistence
/// would be a nuisance: the generator resamples early-morning hours
/// independently (real night traffic is too sparse to carry memory), so a
/// persistent family makes even honest synthetic data serially unlike its
/// original, and a whole-matrix shuffle erases persistence too — either
/// way the surrogate comparison would pick up the nuisance rather than the
/// coupling. With mutually independent hours and one marginal everywhere
/// (`dst`'s hour 0 carries no upstream term, so its own noise is widened
/// to match), shuffling leaves each matrix's joint distribution untouched
/// and the comparison isolates the coupling itself.
pub fn propagation_pair(days: usize, beta: f64, seed: u64) -> (DelayMatrix, DelayMatrix) {
    const BASE: f64 = 10.0;
    const SIGMA: f64 = 4.0;
    let own = |stream_tag: u64, sigma_h0: f64| {
        let mut rng = Stream::derived(seed, &[stream_tag]);
        let mut values = Array2::zeros((days, HOURS));
        for d in 0..days {
            for h in 0..HOURS {
                let sigma = if h == 0 { sigma_h0 } else { SIGMA };
                values[[d, h]] = BASE + rng.normal_scaled(0.0, sigma);
            }
        }
        values
    };
    let src_values = own(1, SIGMA);
    let mut dst_values = own(2, SIGMA * (1.0 + beta * beta).sqrt());
    for d in 0..days {
        for h in 1..HOURS {
            dst_values[[d, h]] += beta * (src_values[[d, h - 1]] - BASE);
        }
    }
    let dates = consecutive_dates(start_date(), days);
    let src = DelayMatrix::dense("SRC", Kind::Departure, Unit::Minutes, src_values, dates.clone())
        .expect("toy matrix is always valid");
    let dst = DelayMatrix::dense("DST", Kind::Departure, Unit::Minutes, dst_values, dates)
        .expect("toy matrix is always valid");
    (src, dst)
}

/// A family of airports sharing one process shape but with graded mean
/// offsets, so every pair's separability is ordered by the offset gap.
/// Codes are APA, APB, … in shift order.
pub fn mean_shift_family(
    days: usize,
    shifts: &[f64],
    seed: u64,
) -> BTreeMap<String, DelayMatrix> {
    assert!(shifts.len() <= 26, "at most 26 codes available");
    let mut family = BTreeMap::new();
    for (i, &shift) in shifts.iter().enumerate() {
        let code = format!("AP{}", (b'A' + i as u8) as char);
        let m = ar1_profile_with(
            days,
            seed.wrapping_add(i as u64),
            0.6,
            3.0,
            10.0 + shift,
            8.0,
            &code,
            Kind::Arrival,
        );
        family.insert(code, m);
    }
    family
}

/// Airports with i.i.d. Gaussian delays — no temporal or cross-airport
/// structure at all. Codes are APA, APB, …
pub fn independent_family(days: usize, n: usize, seed: u64) -> BTreeMap<String, DelayMatrix> {
    assert!(n <= 26, "at most 26 codes available");
    let mut family = BTreeMap::new();
    for i in 0..n {
        let code = format!("AP{}", (b'A' + i as u8) as char);
        let mut rng = Stream::derived(seed, &[i as u64]);
        let mut values = Array2::zeros((days, HOURS));
        for v in values.iter_mut() {
            *v = rng.normal_scaled(10.0, 5.0);
        }
        let m = DelayMatrix::dense(
            code.as_str(),
            Kind::Arrival,
            Unit::Minutes,
            values,
            consecutive_dates(start_date(), days),
        )
        .expect("toy matrix is always valid");
        family.insert(code, m);
    }
    family
}
