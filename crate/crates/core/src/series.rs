//! Uniformly sampled hourly trajectories.

use thiserror::Error;

use crate::scalar::Real;

/// Semantic tag carried by a [`Series`]; fixes the admissible value range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesLabel {
    /// Normalized price/penalty signal, in `[0, 1]`.
    Price,
    /// Baseline demand, nonnegative.
    Baseline,
    /// Reference (purchased) demand, nonnegative.
    DemandRef,
    /// Predicted demand, nonnegative.
    DemandPred,
    /// Per-unit feeder voltage, unconstrained.
    Voltage,
    /// Ambient temperature, unconstrained.
    Ambient,
    /// Thermal load draw, nonnegative.
    Load,
    /// Electrical power, nonnegative.
    Power,
}

impl SeriesLabel {
    pub fn name(self) -> &'static str {
        match self {
            SeriesLabel::Price => "price",
            SeriesLabel::Baseline => "baseline",
            SeriesLabel::DemandRef => "demand_ref",
            SeriesLabel::DemandPred => "demand_pred",
            SeriesLabel::Voltage => "voltage",
            SeriesLabel::Ambient => "ambient",
            SeriesLabel::Load => "load",
            SeriesLabel::Power => "power",
        }
    }

    fn admits<T: Real>(self, v: T) -> bool {
        if !v.is_finite() {
            return false;
        }
        match self {
            SeriesLabel::Price => v >= T::zero() && v <= T::one(),
            SeriesLabel::Baseline
            | SeriesLabel::DemandRef
            | SeriesLabel::DemandPred
            | SeriesLabel::Load
            | SeriesLabel::Power => v >= T::zero(),
            SeriesLabel::Voltage | SeriesLabel::Ambient => true,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SeriesError {
    #[error("{label} series: value {value} at index {index} is outside the admissible range")]
    OutOfRange {
        label: &'static str,
        value: f64,
        index: usize,
    },
}

/// An hourly trajectory: `values[t]` is the sample for hour `start_hour + t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Series<T> {
    start_hour: i64,
    values: Vec<T>,
    label: SeriesLabel,
}

impl<T: Real> Series<T> {
    /// Build a series, checking every sample against the label's range.
    pub fn new(label: SeriesLabel, start_hour: i64, values: Vec<T>) -> Result<Self, SeriesError> {
        for (index, &v) in values.iter().enumerate() {
            if !label.admits(v) {
                return Err(SeriesError::OutOfRange {
                    label: label.name(),
                    value: v.as_f64(),
                    index,
                });
            }
        }
        Ok(Self {
            start_hour,
            values,
            label,
        })
    }

    pub fn label(&self) -> SeriesLabel {
        self.label
    }

    pub fn start_hour(&self) -> i64 {
        self.start_hour
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Sample at offset `t` from the series start.
    pub fn at(&self, t: usize) -> T {
        self.values[t]
    }

    /// Sub-series of `len` samples starting `offset` hours in.
    ///
    /// # Panics
    /// Panics if the window exceeds the series.
    pub fn window(&self, offset: usize, len: usize) -> Series<T> {
        assert!(
            offset + len <= self.values.len(),
            "window [{}, {}) exceeds series of length {}",
            offset,
            offset + len,
            self.values.len()
        );
        Series {
            start_hour: self.start_hour + offset as i64,
            values: self.values[offset..offset + len].to_vec(),
            label: self.label,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn price_range_enforced() {
        let err = Series::new(SeriesLabel::Price, 0, vec![0.2, 1.4]).unwrap_err();
        assert_eq!(
            err,
            SeriesError::OutOfRange {
                label: "price",
                value: 1.4,
                index: 1
            }
        );
        assert!(Series::new(SeriesLabel::Price, 0, vec![0.0, 1.0]).is_ok());
    }

    #[test]
    fn demand_nonnegative() {
        assert!(Series::new(SeriesLabel::Baseline, 0, vec![0.0, 2.5]).is_ok());
        assert!(Series::new(SeriesLabel::DemandRef, 0, vec![-0.1]).is_err());
    }

    #[test]
    fn ambient_unconstrained() {
        assert!(Series::new(SeriesLabel::Ambient, 0, vec![-12.5, 30.0]).is_ok());
        assert!(Series::new(SeriesLabel::Ambient, 0, vec![f64::NAN]).is_err());
    }

    #[test]
    fn window_shifts_start() {
        let s = Series::new(SeriesLabel::Load, 5, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let w = s.window(1, 2);
        assert_eq!(w.start_hour(), 6);
        assert_eq!(w.values(), &[2.0, 3.0]);
    }
}
