//! Text tables and plot-data CSV.

use std::io::Write;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::dist::{powerlaw_tail_prob, CcdfPoint, PowerLawTailFit};
use crate::error::{Error, Result};
use crate::forecast::{FamousEstimate, ForwardFameModel, MaxFameReport, RatioBacktest};
use crate::pulse::{pulse_shape, Pulse, PulseExtent};
use crate::series::FrequencySeries;

/// Renders rows as a table with a header rule. The first column is
/// left-aligned, the rest right-aligned.
pub fn aligned_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let cols = header.len();
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: &mut dyn Iterator<Item = &str>| {
        let mut out = String::new();
        for (i, cell) in cells.take(cols).enumerate() {
            if i > 0 {
                out.push_str("  ");
            }
            if i == 0 {
                out.push_str(&format!("{cell:<w$}", w = widths[i]));
            } else {
                out.push_str(&format!("{cell:>w$}", w = widths[i]));
            }
        }
        out.trim_end().to_string()
    };
    let mut out = line(&mut header.iter().copied());
    out.push('\n');
    out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (cols - 1)));
    out.push('\n');
    for row in rows {
        out.push_str(&line(&mut row.iter().map(String::as_str)));
        out.push('\n');
    }
    out
}

/// Four decimals, or scientific notation for small non-zero values.
pub fn format_prob(p: f64) -> String {
    if p != 0.0 && p.abs() < 1e-3 {
        format!("{p:.2E}")
    } else {
        format!("{p:.4}")
    }
}

/// Entity, peak days and the three probability columns, ordered by peak days.
pub fn max_fame_table(report: &MaxFameReport) -> String {
    let mut rows: Vec<_> = report.rows.iter().collect();
    rows.sort_by(|a, b| {
        b.empirical_peak_days
            .cmp(&a.empirical_peak_days)
            .then_with(|| a.entity_id.cmp(&b.entity_id))
    });
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.entity_id.clone(),
                r.empirical_peak_days.to_string(),
                format_prob(r.empirical_prob),
                format_prob(r.prob_lognormal),
                format_prob(r.prob_hmm),
            ]
        })
        .collect();
    aligned_table(&["Entity", "Days_M", "Pr(Real)", "Pr(LN)", "Pr(HMM)"], &cells)
}

/// One row per (model, threshold): the historical range, fitted line and
/// the predicted probability and count.
pub fn forward_fame_table(entries: &[(ForwardFameModel, FamousEstimate)]) -> String {
    let cells: Vec<Vec<String>> = entries
        .iter()
        .map(|(m, e)| {
            vec![
                format!("{}-{}", m.m_l, m.m_u),
                format!("{:.3}", m.tail.slope),
                format!("{:.3}", m.tail.intercept),
                m.cohort_size.to_string(),
                e.threshold.to_string(),
                format_prob(e.prob),
                format!("{:.1}", e.expected_count),
            ]
        })
        .collect();
    aligned_table(
        &["Range", "Slope", "Y-intercept", "Cohort", "Threshold", "Prob_M", "Cnts_M"],
        &cells,
    )
}

/// Threshold, empirical count and probability, slope, model count and
/// probability.
pub fn ratio_backtest_table(bt: &RatioBacktest) -> String {
    let slope = format!("{:.3}", bt.training.model.tail.slope);
    let cells: Vec<Vec<String>> = bt
        .rows
        .iter()
        .map(|r| {
            vec![
                r.threshold.to_string(),
                r.empirical_count.to_string(),
                format_prob(r.empirical_prob),
                slope.clone(),
                format!("{:.1}", r.model_count),
                format_prob(r.model_prob),
            ]
        })
        .collect();
    aligned_table(&["T", "Cnts", "Prob", "Slope", "Cnts_M", "Prob_M"], &cells)
}

/// CCDF points with an optional fitted probability, as `x,prob,fitted_prob`.
/// The fitted column is empty where `fitted` returns `None`.
pub fn write_ccdf_csv<W: Write>(writer: W, points: &[CcdfPoint], fitted: impl Fn(f64) -> Option<f64>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["x", "prob", "fitted_prob"])?;
    for p in points {
        let f = fitted(p.x).map(|v| format!("{v}")).unwrap_or_default();
        w.write_record([format!("{}", p.x), format!("{}", p.prob), f])?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))
}

/// The tail points of a CCDF on log10 axes with the fitted line, as
/// `log10_x,log10_prob,fitted`.
pub fn write_loglog_csv<W: Write>(writer: W, points: &[CcdfPoint], fit: &PowerLawTailFit) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["log10_x", "log10_prob", "fitted"])?;
    for p in points.iter().filter(|p| p.x >= fit.x_min) {
        let lx = p.x.log10();
        w.write_record([
            format!("{lx}"),
            format!("{}", p.prob.log10()),
            format!("{}", fit.slope * lx + fit.intercept),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))
}

/// `fitted_prob` closure for a power-law tail; empty below `x_min`.
pub fn powerlaw_fitted(fit: &PowerLawTailFit) -> impl Fn(f64) -> Option<f64> + '_ {
    move |x| powerlaw_tail_prob(fit, x).ok()
}

/// Observed pulse segment against its fitted curve, as `t,observed,fitted`
/// with `t = 1..=len`.
pub fn write_pulse_csv<W: Write>(writer: W, values: &[f64], pulse: &Pulse) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["t", "observed", "fitted"])?;
    for (k, obs) in values[pulse.start_index..=pulse.end_index].iter().enumerate() {
        let t = (k + 1) as f64;
        w.write_record([
            (k + 1).to_string(),
            format!("{obs}"),
            format!("{}", pulse_shape(pulse.height, pulse.rise_days, t)),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))
}

/// Date-keyed pulse record for JSON reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseRecord {
    pub start_date: NaiveDate,
    pub peak_date: NaiveDate,
    pub end_date: NaiveDate,
    pub height: f64,
    pub rise_days: f64,
    pub residual: f64,
}

impl PulseRecord {
    pub fn new(series: &FrequencySeries, pulse: &Pulse) -> Self {
        PulseRecord {
            start_date: series.date_at(pulse.start_index),
            peak_date: series.date_at(pulse.peak_index),
            end_date: series.date_at(pulse.end_index),
            height: pulse.height,
            rise_days: pulse.rise_days,
            residual: pulse.residual,
        }
    }
}

/// Date-keyed extent of a detected, not yet fitted, pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtentRecord {
    pub start_date: NaiveDate,
    pub peak_date: NaiveDate,
    pub end_date: NaiveDate,
}

impl ExtentRecord {
    pub fn new(series: &FrequencySeries, extent: &PulseExtent) -> Self {
        ExtentRecord {
            start_date: series.date_at(extent.start_index),
            peak_date: series.date_at(extent.peak_index),
            end_date: series.date_at(extent.end_index),
        }
    }
}
