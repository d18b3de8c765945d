use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::{empirical_ccdf, expected_count, fit_powerlaw_tail, powerlaw_tail_prob, EmpiricalCcdf, PowerLawTailFit};
use crate::error::{Error, Result};
use crate::io::SeriesMap;

/// Cohort selection for the forward model: entity-days whose mean frequency
/// over the `w_m` days ending that day lies in `[m_l, m_u)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForwardFameParams {
    pub m_l: f64,
    pub m_u: f64,
    pub w_m: usize,
    pub w_f: usize,
    /// Lower end of the power-law tail fitted to next-period fame.
    pub x_min: f64,
}

impl ForwardFameParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.m_l >= 0.0 && self.m_l < self.m_u) {
            return Err(Error::invalid(format!(
                "historical fame bounds need 0 <= m_l < m_u, got [{}, {})",
                self.m_l, self.m_u
            )));
        }
        if self.w_m == 0 || self.w_f == 0 {
            return Err(Error::invalid("fame windows must be at least one day"));
        }
        if !(self.x_min > 0.0 && self.x_min.is_finite()) {
            return Err(Error::invalid(format!("x_min must be positive, got {}", self.x_min)));
        }
        Ok(())
    }
}

/// Power-law tail of the next-period fame of a historical-fame cohort.
/// Fame here is the raw mean daily frequency over the window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForwardFameModel {
    pub m_l: f64,
    pub m_u: f64,
    pub w_m: usize,
    pub w_f: usize,
    pub tail: PowerLawTailFit,
    pub cohort_size: usize,
}

impl ForwardFameModel {
    /// Model from externally supplied tail coefficients.
    pub fn published(params: &ForwardFameParams, slope: f64, intercept: f64, cohort_size: usize) -> Result<Self> {
        params.validate()?;
        Ok(ForwardFameModel {
            m_l: params.m_l,
            m_u: params.m_u,
            w_m: params.w_m,
            w_f: params.w_f,
            tail: PowerLawTailFit::from_coefficients(slope, intercept, params.x_min)?,
            cohort_size,
        })
    }
}

/// Next-period mean frequencies over `w_f` days for every cohort entity-day,
/// in entity-id then date order.
pub fn forward_fame_cohort(series_map: &SeriesMap, params: &ForwardFameParams) -> Result<Vec<f64>> {
    params.validate()?;
    let (w_m, w_f) = (params.w_m, params.w_f);
    let per_entity: Vec<Vec<f64>> = series_map
        .par_iter()
        .map(|(_, s)| {
            let v = s.values();
            let mut prefix = Vec::with_capacity(v.len() + 1);
            prefix.push(0.0);
            for x in v {
                prefix.push(prefix.last().unwrap() + x);
            }
            let mean = |from: usize, to: usize| (prefix[to] - prefix[from]) / (to - from) as f64;
            // d is the last day of the historical window
            (w_m.saturating_sub(1)..v.len().saturating_sub(w_f))
                .filter(|&d| {
                    let hist = mean(d + 1 - w_m, d + 1);
                    hist >= params.m_l && hist < params.m_u
                })
                .map(|d| mean(d + 1, d + 1 + w_f))
                .collect()
        })
        .collect();
    Ok(per_entity.into_iter().flatten().collect())
}

/// Collects the cohort and fits a power-law tail above `x_min` to the CCDF of
/// its next-period fame. Returns the model with the CCDF it was fitted to.
pub fn fit_forward_fame(series_map: &SeriesMap, params: &ForwardFameParams) -> Result<(ForwardFameModel, EmpiricalCcdf)> {
    let cohort = forward_fame_cohort(series_map, params)?;
    if cohort.is_empty() {
        return Err(Error::DegenerateSample(format!(
            "no entity-day has historical fame in [{}, {})",
            params.m_l, params.m_u
        )));
    }
    let ccdf = empirical_ccdf(&cohort)?;
    let tail = fit_powerlaw_tail(&ccdf, params.x_min)?;
    Ok((
        ForwardFameModel {
            m_l: params.m_l,
            m_u: params.m_u,
            w_m: params.w_m,
            w_f: params.w_f,
            tail,
            cohort_size: cohort.len(),
        },
        ccdf,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamousEstimate {
    pub threshold: f64,
    pub prob: f64,
    pub expected_count: f64,
}

/// Probability that a cohort member's next-period fame exceeds `threshold`,
/// and the expected number of such members.
pub fn become_famous_prob(model: &ForwardFameModel, threshold: f64) -> Result<FamousEstimate> {
    let prob = powerlaw_tail_prob(&model.tail, threshold)?;
    Ok(FamousEstimate {
        threshold,
        prob,
        expected_count: expected_count(prob, model.cohort_size as f64),
    })
}
