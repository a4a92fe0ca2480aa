//! Core domain types: per-airport delay matrices and region metadata.

use chrono::NaiveDate;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hours in a daily delay vector; every matrix has exactly this many columns.
pub const HOURS: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Departure,
    Arrival,
}

impl Kind {
    /// Short tag used in output file names (`EUArr.npy`, `EUDep.npy`).
    pub fn file_tag(self) -> &'static str {
        match self {
            Kind::Departure => "Dep",
            Kind::Arrival => "Arr",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Unit {
    Seconds,
    Minutes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegionName {
    EU,
    US,
}

/// A data region ties together its delay unit and expected day count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub name: RegionName,
    pub unit: Unit,
    pub expected_days: usize,
}

impl Region {
    /// European region: delays in seconds, 610 days of coverage.
    pub fn eu() -> Region {
        Region { name: RegionName::EU, unit: Unit::Seconds, expected_days: 610 }
    }

    /// US region: delays in minutes, 1825 days of coverage.
    pub fn us() -> Region {
        Region { name: RegionName::US, unit: Unit::Minutes, expected_days: 1825 }
    }

    pub fn from_name(name: RegionName) -> Region {
        match name {
            RegionName::EU => Region::eu(),
            RegionName::US => Region::us(),
        }
    }

    pub fn tag(&self) -> &'static str {
        match self.name {
            RegionName::EU => "EU",
            RegionName::US => "US",
        }
    }

    /// Rejects matrices whose unit contradicts the region.
    pub fn check_unit(&self, m: &DelayMatrix) -> Result<()> {
        if m.unit != self.unit {
            return Err(Error::InvalidArgument(format!(
                "matrix for {} declares unit {:?} but region {} uses {:?}",
                m.airport,
                m.unit,
                self.tag(),
                self.unit
            )));
        }
        Ok(())
    }
}

/// Per-airport matrix of hourly average delays: one row per day, one column
/// per hour. `mask[d][h]` is true where at least one operation happened in
/// that hour; unmasked cells hold the fill value 0 and are excluded from all
/// downstream statistics.
#[derive(Debug, Clone)]
pub struct DelayMatrix {
    pub airport: String,
    pub kind: Kind,
    pub unit: Unit,
    pub values: Array2<f64>,
    pub mask: Array2<bool>,
    pub day_labels: Vec<NaiveDate>,
}

impl DelayMatrix {
    pub fn new(
        airport: impl Into<String>,
        kind: Kind,
        unit: Unit,
        values: Array2<f64>,
        mask: Array2<bool>,
        day_labels: Vec<NaiveDate>,
    ) -> Result<DelayMatrix> {
        let airport = airport.into();
        check_airport_code(&airport)?;
        let m = DelayMatrix { airport, kind, unit, values, mask, day_labels };
        m.validate()?;
        Ok(m)
    }

    /// Convenience for fully observed data (mask all true).
    pub fn dense(
        airport: impl Into<String>,
        kind: Kind,
        unit: Unit,
        values: Array2<f64>,
        day_labels: Vec<NaiveDate>,
    ) -> Result<DelayMatrix> {
        let mask = Array2::from_elem(values.dim(), true);
        DelayMatrix::new(airport, kind, unit, values, mask, day_labels)
    }

    pub fn days(&self) -> usize {
        self.values.nrows()
    }

    /// Masked-true values of one hour column, in day order.
    pub fn masked_hour_values(&self, hour: usize) -> Vec<f64> {
        assert!(hour < HOURS, "hour {hour} out of range");
        (0..self.days())
            .filter(|&d| self.mask[[d, hour]])
            .map(|d| self.values[[d, hour]])
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let inv = |msg: String| Err(Error::InvalidArgument(msg));
        if self.values.ncols() != HOURS {
            return inv(format!(
                "delay matrix must have {HOURS} columns, got {}",
                self.values.ncols()
            ));
        }
        if self.mask.dim() != self.values.dim() {
            return inv(format!(
                "mask shape {:?} differs from values shape {:?}",
                self.mask.dim(),
                self.values.dim()
            ));
        }
        if self.day_labels.len() != self.days() {
            return inv(format!(
                "{} day labels for {} rows",
                self.day_labels.len(),
                self.days()
            ));
        }
        for w in self.day_labels.windows(2) {
            if w[1] <= w[0] {
                return inv(format!("day labels not strictly increasing at {} → {}", w[0], w[1]));
            }
        }
        for ((d, h), &v) in self.values.indexed_iter() {
            if !v.is_finite() {
                return inv(format!("non-finite value at day {d}, hour {h}"));
            }
            if !self.mask[[d, h]] && v != 0.0 {
                return inv(format!(
                    "unmasked cell at day {d}, hour {h} holds {v} instead of the fill value 0"
                ));
            }
        }
        Ok(())
    }
}

pub(crate) fn check_airport_code(code: &str) -> Result<()> {
    let ok = !code.is_empty()
        && code
            .chars()
            .all(|c| c.is_ascii_digit() || c.is_ascii_uppercase());
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "airport code {code:?} must be non-empty uppercase alphanumeric"
        )))
    }
}

/// Consecutive calendar dates, a convenience for synthetic matrices.
pub fn consecutive_dates(start: NaiveDate, days: usize) -> Vec<NaiveDate> {
    (0..days)
        .map(|d| start + chrono::Days::new(d as u64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn dates(n: usize) -> Vec<NaiveDate> {
        consecutive_dates(NaiveDate::from_ymd_opt(2015, 1, 1).unwrap(), n)
    }

    #[test]
    fn region_constants_pair_unit_and_days() {
        assert_eq!(Region::eu().unit, Unit::Seconds);
        assert_eq!(Region::eu().expected_days, 610);
        assert_eq!(Region::us().unit, Unit::Minutes);
        assert_eq!(Region::us().expected_days, 1825);
    }

    #[test]
    fn region_rejects_unit_mismatch() {
        let m = DelayMatrix::dense(
            "AAA",
            Kind::Arrival,
            Unit::Minutes,
            Array2::zeros((2, HOURS)),
            dates(2),
        )
        .unwrap();
        assert!(Region::eu().check_unit(&m).is_err());
        assert!(Region::us().check_unit(&m).is_ok());
    }

    #[test]
    fn wrong_column_count_is_rejected() {
        let r = DelayMatrix::dense(
            "AAA",
            Kind::Arrival,
            Unit::Minutes,
            Array2::zeros((2, 23)),
            dates(2),
        );
        assert!(r.is_err());
    }

    #[test]
    fn unmasked_cells_must_hold_zero() {
        let values = array![[1.0, 0.0], [0.0, 0.0]];
        let values = {
            let mut v = Array2::zeros((2, HOURS));
            v[[0, 0]] = values[[0, 0]];
            v
        };
        let mut mask = Array2::from_elem((2, HOURS), true);
        mask[[0, 0]] = false; // value 1.0 hides under an unmasked cell
        let r = DelayMatrix::new("AAA", Kind::Arrival, Unit::Minutes, values, mask, dates(2));
        assert!(r.is_err());
    }

    #[test]
    fn day_labels_must_strictly_increase() {
        let mut labels = dates(3);
        labels[2] = labels[1];
        let r = DelayMatrix::dense(
            "AAA",
            Kind::Arrival,
            Unit::Minutes,
            Array2::zeros((3, HOURS)),
            labels,
        );
        assert!(r.is_err());
    }

    #[test]
    fn airport_codes_are_validated() {
        assert!(check_airport_code("LHR").is_ok());
        assert!(check_airport_code("K2X9").is_ok());
        assert!(check_airport_code("").is_err());
        assert!(check_airport_code("lhr").is_err());
        assert!(check_airport_code("A-B").is_err());
    }

    #[test]
    fn masked_hour_values_skip_unmasked_cells() {
        let mut values = Array2::zeros((3, HOURS));
        values[[0, 5]] = 1.0;
        values[[2, 5]] = 3.0;
        let mut mask = Array2::from_elem((3, HOURS), true);
        mask[[1, 5]] = false;
        let m =
            DelayMatrix::new("AAA", Kind::Arrival, Unit::Minutes, values, mask, dates(3)).unwrap();
        assert_eq!(m.masked_hour_values(5), vec![1.0, 3.0]);
    }
}
