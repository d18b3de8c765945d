//! Entity frequency series and the fame measure built on top of them.
//!
//! Fame over a window of `N` days is `ln(1 + mean daily frequency)`. With a
//! one-day window it is simply the logged daily frequency.

mod equivalence;
mod group;

pub use equivalence::{fame_equivalence, EquivalencePoint};
pub use group::{
    group_aggregate_frequencies, group_fame_series, GroupDefinition, GroupFameKind,
    GroupFameSeries,
};

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Window used for peak fame unless the caller says otherwise.
pub const DEFAULT_PEAK_WINDOW: usize = 5;

/// Daily reference counts of one entity, contiguous from `start_date`.
///
/// Counts may be fractional. Days without references must be present as `0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencySeries {
    entity_id: String,
    start_date: NaiveDate,
    values: Vec<f64>,
}

impl FrequencySeries {
    pub fn new(entity_id: impl Into<String>, start_date: NaiveDate, values: Vec<f64>) -> Result<Self> {
        let entity_id = entity_id.into();
        if values.is_empty() {
            return Err(Error::invalid(format!("series `{entity_id}` is empty")));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::invalid(format!(
                "series `{entity_id}` has invalid frequency {v} at index {i}"
            )));
        }
        Ok(FrequencySeries {
            entity_id,
            start_date,
            values,
        })
    }

    pub fn entity_id(&self) -> &str {
        &self.entity_id
    }

    pub fn start_date(&self) -> NaiveDate {
        self.start_date
    }

    pub fn end_date(&self) -> NaiveDate {
        self.date_at(self.values.len() - 1)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn date_at(&self, index: usize) -> NaiveDate {
        self.start_date + Duration::days(index as i64)
    }

    /// Index of `date`, if the series covers it.
    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        let offset = (date - self.start_date).num_days();
        (offset >= 0 && (offset as usize) < self.values.len()).then_some(offset as usize)
    }

    /// The sub-series covering `[start, end)` by index.
    pub fn slice(&self, start: usize, end: usize) -> Result<FrequencySeries> {
        if start >= end || end > self.values.len() {
            return Err(Error::invalid(format!(
                "slice {start}..{end} outside series `{}` of length {}",
                self.entity_id,
                self.values.len()
            )));
        }
        Ok(FrequencySeries {
            entity_id: self.entity_id.clone(),
            start_date: self.date_at(start),
            values: self.values[start..end].to_vec(),
        })
    }
}

/// A fame magnitude together with the window it was measured over.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FameValue {
    pub value: f64,
    pub window: usize,
}

/// Inclusive calendar-day range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateRange {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateRange {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self> {
        if end < start {
            return Err(Error::invalid(format!("date range {start}..={end} is reversed")));
        }
        Ok(DateRange { start, end })
    }

    pub fn days(&self) -> usize {
        (self.end - self.start).num_days() as usize + 1
    }
}

/// `ln(1 + mean)`, the fame of a window whose mean daily frequency is `mean`.
pub fn fame_from_mean(mean: f64) -> f64 {
    (1.0 + mean).ln()
}

pub(crate) fn check_window(window: usize) -> Result<()> {
    if window == 0 {
        return Err(Error::invalid("fame window must be at least one day"));
    }
    Ok(())
}

/// Mean frequency over every full window, indexed by the window's first day.
pub(crate) fn window_means(values: &[f64], window: usize) -> Vec<f64> {
    values
        .windows(window)
        .map(|w| w.iter().sum::<f64>() / window as f64)
        .collect()
}

/// Fame of the `window` days ending at `end_index` (inclusive).
pub fn fame(series: &FrequencySeries, window: usize, end_index: usize) -> Result<FameValue> {
    check_window(window)?;
    if end_index >= series.len() {
        return Err(Error::invalid(format!(
            "end index {end_index} beyond series `{}` of length {}",
            series.entity_id,
            series.len()
        )));
    }
    if end_index + 1 < window {
        return Err(Error::InsufficientData {
            needed: window,
            available: end_index + 1,
        });
    }
    let w = &series.values[end_index + 1 - window..=end_index];
    let mean = w.iter().sum::<f64>() / window as f64;
    Ok(FameValue {
        value: fame_from_mean(mean),
        window,
    })
}

/// Sliding-window fame; element `j` is the fame of the window ending at
/// index `j + window - 1`.
pub fn fame_series(series: &FrequencySeries, window: usize) -> Result<Vec<FameValue>> {
    check_window(window)?;
    if series.is_empty() {
        return Err(Error::invalid("empty series"));
    }
    if window > series.len() {
        return Err(Error::InsufficientData {
            needed: window,
            available: series.len(),
        });
    }
    Ok(window_means(&series.values, window)
        .into_iter()
        .map(|m| FameValue {
            value: fame_from_mean(m),
            window,
        })
        .collect())
}

/// Maximum windowed fame over all full windows inside `period`.
pub fn peak_fame(series: &FrequencySeries, period: DateRange, window: usize) -> Result<FameValue> {
    check_window(window)?;
    let (Some(first), Some(last)) = (series.index_of(period.start), series.index_of(period.end)) else {
        return Err(Error::invalid(format!(
            "period {}..={} not covered by series `{}` ({}..={})",
            period.start,
            period.end,
            series.entity_id,
            series.start_date,
            series.end_date()
        )));
    };
    let span = &series.values[first..=last];
    if span.len() < window {
        return Err(Error::InsufficientData {
            needed: window,
            available: span.len(),
        });
    }
    let best = window_means(span, window)
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(FameValue {
        value: fame_from_mean(best),
        window,
    })
}

/// Average daily frequency over the whole series (the raw "average fame").
pub fn average_frequency(series: &FrequencySeries) -> f64 {
    series.values.iter().sum::<f64>() / series.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::E;

    fn day(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    fn series(values: Vec<f64>) -> FrequencySeries {
        FrequencySeries::new("e", day(2007, 1, 1), values).unwrap()
    }

    #[test]
    fn average_fames_use_natural_log() {
        let busy = series(vec![0.963; 365]);
        let f = fame(&busy, 365, 364).unwrap().value;
        assert!((f - 0.675).abs() < 1e-3, "{f}");
        let quiet = series(vec![0.263; 365]);
        let f = fame(&quiet, 365, 364).unwrap().value;
        assert!((f - 0.234).abs() < 1e-3, "{f}");
    }

    #[test]
    fn all_zero_window_has_zero_fame() {
        let s = series(vec![0.0; 10]);
        assert_eq!(fame(&s, 7, 9).unwrap().value, 0.0);
    }

    #[test]
    fn window_longer_than_history_is_insufficient_data() {
        let s = series(vec![1.0; 4]);
        assert!(matches!(fame(&s, 5, 3), Err(Error::InsufficientData { needed: 5, available: 4 })));
        assert!(matches!(fame(&s, 0, 3), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn unit_window_fame_series() {
        let s = series(vec![E - 1.0, 0.0]);
        let fs: Vec<f64> = fame_series(&s, 1).unwrap().iter().map(|f| f.value).collect();
        assert!((fs[0] - 1.0).abs() < 1e-15);
        assert_eq!(fs[1], 0.0);
    }

    #[test]
    fn constant_series_has_constant_fame() {
        let s = series(vec![3.5; 50]);
        for w in [1, 7, 30, 50] {
            for f in fame_series(&s, w).unwrap() {
                assert!((f.value - 4.5f64.ln()).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn ramp_matches_direct_recomputation() {
        let vals: Vec<f64> = (0..40).map(|i| 0.25 * i as f64).collect();
        let s = series(vals.clone());
        let w = 6;
        let fs = fame_series(&s, w).unwrap();
        assert_eq!(fs.len(), 35);
        for (j, f) in fs.iter().enumerate() {
            let mut total = 0.0;
            for v in &vals[j..j + w] {
                total += v;
            }
            let expected = (1.0 + total / w as f64).ln();
            assert!((f.value - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn fame_series_rejects_oversized_window() {
        let s = series(vec![1.0; 3]);
        assert!(fame_series(&s, 4).is_err());
    }

    #[test]
    fn single_spike_peak_fame() {
        let mut vals = vec![0.0; 365];
        vals[200] = 40.0;
        let s = series(vals);
        let period = DateRange::new(day(2007, 1, 1), day(2007, 12, 31)).unwrap();
        let p = peak_fame(&s, period, DEFAULT_PEAK_WINDOW).unwrap();
        assert!((p.value - (1.0 + 40.0 / 5.0f64).ln()).abs() < 1e-14);
    }

    #[test]
    fn peak_fame_errors() {
        let s = series(vec![1.0; 30]);
        let short = DateRange::new(day(2007, 1, 1), day(2007, 1, 3)).unwrap();
        assert!(matches!(peak_fame(&s, short, 5), Err(Error::InsufficientData { .. })));
        let outside = DateRange::new(day(2006, 12, 1), day(2007, 1, 10)).unwrap();
        assert!(peak_fame(&s, outside, 5).is_err());
    }

    #[test]
    fn series_validation() {
        assert!(FrequencySeries::new("x", day(2007, 1, 1), vec![]).is_err());
        assert!(FrequencySeries::new("x", day(2007, 1, 1), vec![1.0, -0.5]).is_err());
        assert!(FrequencySeries::new("x", day(2007, 1, 1), vec![f64::NAN]).is_err());
        let s = series(vec![1.0; 3]);
        assert_eq!(s.end_date(), day(2007, 1, 3));
        assert_eq!(s.index_of(day(2007, 1, 2)), Some(1));
        assert_eq!(s.index_of(day(2006, 12, 31)), None);
    }

    proptest! {
        #[test]
        fn peak_fame_equals_exhaustive_window_scan(
            vals in prop::collection::vec(0.0f64..500.0, 10..120),
            window in 1usize..10,
        ) {
            prop_assume!(window <= vals.len());
            let s = series(vals.clone());
            let period = DateRange::new(s.start_date(), s.end_date()).unwrap();
            let got = peak_fame(&s, period, window).unwrap().value;
            let mut best = f64::NEG_INFINITY;
            for start in 0..=vals.len() - window {
                let m: f64 = vals[start..start + window].iter().sum::<f64>() / window as f64;
                best = best.max((1.0 + m).ln());
            }
            prop_assert!((got - best).abs() < 1e-12);
        }

        #[test]
        fn fame_is_monotone_in_each_frequency(
            vals in prop::collection::vec(0.0f64..100.0, 1..30),
            idx in 0usize..30,
            bump in 0.0f64..50.0,
        ) {
            let idx = idx % vals.len();
            let w = vals.len();
            let before = fame(&series(vals.clone()), w, w - 1).unwrap().value;
            let mut raised = vals.clone();
            raised[idx] += bump;
            let after = fame(&series(raised), w, w - 1).unwrap().value;
            prop_assert!(after >= before);
        }

        #[test]
        fn unit_window_is_logged_frequency(vals in prop::collection::vec(0.0f64..1e6, 1..50)) {
            let s = series(vals.clone());
            for (i, v) in vals.iter().enumerate() {
                prop_assert_eq!(fame(&s, 1, i).unwrap().value, (1.0 + v).ln());
            }
        }
    }
}
