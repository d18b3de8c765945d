use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::dist::{empirical_ccdf, fit_powerlaw_tail, powerlaw_tail_prob, EmpiricalCcdf, PowerLawTailFit};
use crate::error::{Error, Result};
use crate::io::SeriesMap;
use crate::series::GroupDefinition;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatioKind {
    /// Peak windowed mean over the horizon divided by the historical mean.
    PeakOverHist,
    /// Mean over the horizon divided by the historical mean.
    AvgOverHist,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioParams {
    pub kind: RatioKind,
    pub horizon_days: usize,
    /// Window of the peak fame, used by [`RatioKind::PeakOverHist`].
    pub peak_window: usize,
    pub historical_span: usize,
    pub x_min: f64,
}

impl Default for RatioParams {
    fn default() -> Self {
        RatioParams {
            kind: RatioKind::PeakOverHist,
            horizon_days: 365,
            peak_window: 5,
            historical_span: 365,
            x_min: 1.0,
        }
    }
}

impl RatioParams {
    pub fn validate(&self) -> Result<()> {
        if self.horizon_days == 0 || self.historical_span == 0 || self.peak_window == 0 {
            return Err(Error::invalid("ratio spans and windows must be at least one day"));
        }
        if self.kind == RatioKind::PeakOverHist && self.peak_window > self.horizon_days {
            return Err(Error::invalid(format!(
                "peak window {} exceeds horizon {}",
                self.peak_window, self.horizon_days
            )));
        }
        if !(self.x_min > 0.0 && self.x_min.is_finite()) {
            return Err(Error::invalid(format!("x_min must be positive, got {}", self.x_min)));
        }
        Ok(())
    }
}

/// Power-law tail of a fame-change ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioModel {
    pub kind: RatioKind,
    pub horizon_days: usize,
    pub peak_window: usize,
    pub tail: PowerLawTailFit,
}

impl RatioModel {
    pub fn published(kind: RatioKind, horizon_days: usize, peak_window: usize, slope: f64, intercept: f64, x_min: f64) -> Result<Self> {
        Ok(RatioModel {
            kind,
            horizon_days,
            peak_window,
            tail: PowerLawTailFit::from_coefficients(slope, intercept, x_min)?,
        })
    }

    /// `Pr(R > ratio)` over one horizon.
    pub fn prob(&self, ratio: f64) -> Result<f64> {
        powerlaw_tail_prob(&self.tail, ratio)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioObservation {
    pub entity_id: String,
    /// Raw mean daily frequency over the historical span.
    pub historical: f64,
    /// Peak windowed mean or plain mean over the horizon.
    pub future: f64,
    pub ratio: f64,
}

/// Per-entity ratios around one anchor date. The historical span ends the day
/// before `anchor`; the horizon starts on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioSample {
    pub anchor: NaiveDate,
    pub observations: Vec<RatioObservation>,
    /// Members with zero historical fame, left out of the ratios.
    pub zero_history: Vec<String>,
}

impl RatioSample {
    pub fn ratios(&self) -> Vec<f64> {
        self.observations.iter().map(|o| o.ratio).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioFit {
    pub model: RatioModel,
    pub sample: RatioSample,
    pub ccdf: EmpiricalCcdf,
}

/// Latest anchor at which every member still has a full horizon of data.
pub fn default_ratio_anchor(series_map: &SeriesMap, group: &GroupDefinition, params: &RatioParams) -> Result<NaiveDate> {
    let members = group.resolve(series_map)?;
    let end = members
        .iter()
        .map(|s| s.end_date())
        .min()
        .expect("groups are non-empty");
    Ok(end - Duration::days(params.horizon_days as i64 - 1))
}

pub fn ratio_sample(
    series_map: &SeriesMap,
    group: &GroupDefinition,
    params: &RatioParams,
    anchor: NaiveDate,
) -> Result<RatioSample> {
    params.validate()?;
    let (span, horizon) = (params.historical_span, params.horizon_days);
    let mut observations = Vec::new();
    let mut zero_history = Vec::new();
    for s in group.resolve(series_map)? {
        let offset = (anchor - s.start_date()).num_days();
        if offset < span as i64 || offset as usize + horizon > s.len() {
            return Err(Error::invalid(format!(
                "`{}` ({} to {}) does not cover {span} days before and {horizon} days from {anchor}",
                s.entity_id(),
                s.start_date(),
                s.end_date()
            )));
        }
        let offset = offset as usize;
        let v = s.values();
        let historical = v[offset - span..offset].iter().sum::<f64>() / span as f64;
        if historical == 0.0 {
            zero_history.push(s.entity_id().to_string());
            continue;
        }
        let ahead = &v[offset..offset + horizon];
        let future = match params.kind {
            RatioKind::AvgOverHist => ahead.iter().sum::<f64>() / horizon as f64,
            RatioKind::PeakOverHist => ahead
                .windows(params.peak_window)
                .map(|w| w.iter().sum::<f64>() / params.peak_window as f64)
                .fold(0.0, f64::max),
        };
        observations.push(RatioObservation {
            entity_id: s.entity_id().to_string(),
            historical,
            future,
            ratio: future / historical,
        });
    }
    if observations.is_empty() {
        return Err(Error::DegenerateSample(format!(
            "no member of `{}` has positive historical fame before {anchor}",
            group.name()
        )));
    }
    Ok(RatioSample {
        anchor,
        observations,
        zero_history,
    })
}

/// Computes the ratio of every member at `anchor` and fits a power-law tail
/// above `params.x_min` to their CCDF.
pub fn fit_ratio_model(
    series_map: &SeriesMap,
    group: &GroupDefinition,
    params: &RatioParams,
    anchor: NaiveDate,
) -> Result<RatioFit> {
    let sample = ratio_sample(series_map, group, params, anchor)?;
    let ccdf = empirical_ccdf(&sample.ratios())?;
    let tail = fit_powerlaw_tail(&ccdf, params.x_min)?;
    Ok(RatioFit {
        model: RatioModel {
            kind: params.kind,
            horizon_days: params.horizon_days,
            peak_window: params.peak_window,
            tail,
        },
        sample,
        ccdf,
    })
}

/// Chance of at least one event over `n` periods, given chance `one_period`
/// per period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extrapolation {
    pub n: u32,
    pub one_period: f64,
    /// First-order `min(1, n p)`.
    pub linear: f64,
    /// `1 - (1 - p)^n`.
    pub exact: f64,
}

pub fn extrapolate_n_periods(prob_one_period: f64, n: u32) -> Result<Extrapolation> {
    if !(0.0..=1.0).contains(&prob_one_period) {
        return Err(Error::invalid(format!("probability {prob_one_period} is outside [0, 1]")));
    }
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    let p = prob_one_period;
    Ok(Extrapolation {
        n,
        one_period: p,
        linear: (n as f64 * p).min(1.0),
        // -expm1(n ln(1 - p)) keeps precision for tiny p
        exact: -(n as f64 * (-p).ln_1p()).exp_m1(),
    })
}
