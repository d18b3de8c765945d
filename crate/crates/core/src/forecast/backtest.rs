use std::collections::BTreeMap;

use chrono::{Duration, NaiveDate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ratio::{fit_ratio_model, ratio_sample, RatioFit, RatioParams, RatioSample};
use super::{max_fame_prob_hmm, max_fame_prob_lognormal, strict_argmax};
use crate::dist::{expected_count, LogNormalFit};
use crate::error::{Error, Result};
use crate::hmm::{label_states, train_hmm, HmmModel, TrainOptions};
use crate::io::SeriesMap;
use crate::pulse::{detect_and_fit, PulseDetectionParams};
use crate::series::{fame_from_mean, window_means, FrequencySeries, GroupDefinition};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaxFameBacktestOptions {
    /// Fame window in days for both training fits and peak-day counting.
    pub window: usize,
    pub pulse: PulseDetectionParams,
    pub train: TrainOptions,
}

impl Default for MaxFameBacktestOptions {
    fn default() -> Self {
        MaxFameBacktestOptions {
            window: 1,
            pulse: PulseDetectionParams::default(),
            train: TrainOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxFameRow {
    pub entity_id: String,
    pub prob_hmm: f64,
    pub prob_lognormal: f64,
    pub empirical_peak_days: usize,
    pub empirical_prob: f64,
}

/// A member that one of the models could not be trained for. Its
/// probability under that model is reported as 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UntrainableEntity {
    pub entity_id: String,
    pub model: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxFameReport {
    pub group: String,
    pub split_date: NaiveDate,
    pub window: usize,
    pub training_days: usize,
    pub post_split_days: usize,
    /// Post-split days on which the top fame was shared, so no member scored.
    pub tie_days: usize,
    /// Sorted by entity id.
    pub rows: Vec<MaxFameRow>,
    pub untrainable: Vec<UntrainableEntity>,
}

impl MaxFameReport {
    /// Mean absolute error of (HMM, log-normal) probabilities against the
    /// empirical peak-day probabilities.
    pub fn mean_absolute_errors(&self) -> (f64, f64) {
        let n = self.rows.len() as f64;
        let hmm = self.rows.iter().map(|r| (r.prob_hmm - r.empirical_prob).abs()).sum::<f64>() / n;
        let ln = self.rows.iter().map(|r| (r.prob_lognormal - r.empirical_prob).abs()).sum::<f64>() / n;
        (hmm, ln)
    }
}

/// The report together with the models it was computed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxFameBacktest {
    pub report: MaxFameReport,
    pub lognormal_fits: BTreeMap<String, LogNormalFit>,
    pub hmm_models: BTreeMap<String, HmmModel>,
}

struct Trained {
    lognormal: Result<LogNormalFit>,
    hmm: Result<HmmModel>,
}

fn train_member(pre: &FrequencySeries, options: &MaxFameBacktestOptions) -> Trained {
    let logs: Vec<f64> = window_means(pre.values(), options.window)
        .into_iter()
        .map(fame_from_mean)
        .collect();
    let lognormal = LogNormalFit::from_log_values(&logs);
    let hmm = detect_and_fit(pre, &options.pulse).and_then(|pulses| {
        let path = label_states(pre, &pulses)?;
        train_hmm(pre, &path, &pulses, &options.train)
    });
    Trained { lognormal, hmm }
}

/// Per-member models for the max-fame forecasts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxFameModels {
    pub lognormal_fits: BTreeMap<String, LogNormalFit>,
    pub hmm_models: BTreeMap<String, HmmModel>,
    pub untrainable: Vec<UntrainableEntity>,
}

impl MaxFameModels {
    /// `(log-normal, HMM)` probabilities; members without a model get 0.
    pub fn probabilities(&self) -> Result<(BTreeMap<String, f64>, BTreeMap<String, f64>)> {
        let ln = if self.lognormal_fits.is_empty() {
            BTreeMap::new()
        } else {
            max_fame_prob_lognormal(&self.lognormal_fits)?
        };
        let hmm = if self.hmm_models.is_empty() {
            BTreeMap::new()
        } else {
            max_fame_prob_hmm(&self.hmm_models)?
        };
        Ok((ln, hmm))
    }
}

/// Fits the log-normal model of windowed log fame and trains an HMM from
/// detected pulses for every series. Failures are collected, not raised.
pub fn train_max_fame_models(series: &[FrequencySeries], options: &MaxFameBacktestOptions) -> MaxFameModels {
    let trained: Vec<Trained> = series.par_iter().map(|s| train_member(s, options)).collect();
    let mut lognormal_fits = BTreeMap::new();
    let mut hmm_models = BTreeMap::new();
    let mut untrainable = Vec::new();
    for (s, t) in series.iter().zip(trained) {
        let id = s.entity_id().to_string();
        match t.lognormal {
            Ok(f) => {
                lognormal_fits.insert(id.clone(), f);
            }
            Err(e) => untrainable.push(UntrainableEntity {
                entity_id: id.clone(),
                model: "lognormal".into(),
                reason: e.to_string(),
            }),
        }
        match t.hmm {
            Ok(m) => {
                hmm_models.insert(id.clone(), m);
            }
            Err(e) => untrainable.push(UntrainableEntity {
                entity_id: id,
                model: "hmm".into(),
                reason: e.to_string(),
            }),
        }
    }
    untrainable.sort_by(|a, b| (&a.entity_id, &a.model).cmp(&(&b.entity_id, &b.model)));
    MaxFameModels {
        lognormal_fits,
        hmm_models,
        untrainable,
    }
}

/// Trains the log-normal and HMM max-fame models on every member's data
/// before `split_date`, then counts the days from `split_date` on where each
/// member holds the strict group maximum of windowed fame.
///
/// Only the date range covered by every member is used.
pub fn backtest_max_fame(
    series_map: &SeriesMap,
    group: &GroupDefinition,
    split_date: NaiveDate,
    options: &MaxFameBacktestOptions,
) -> Result<MaxFameBacktest> {
    options.pulse.validate()?;
    if options.window == 0 {
        return Err(Error::invalid("fame window must be at least one day"));
    }
    let members = group.resolve(series_map)?;
    let start = members.iter().map(|s| s.start_date()).max().expect("groups are non-empty");
    let end = members.iter().map(|s| s.end_date()).min().expect("groups are non-empty");
    if split_date > end {
        return Err(Error::InsufficientData {
            needed: 1,
            available: 0,
        });
    }
    let training_days = (split_date - start).num_days().max(0) as usize;
    if training_days < options.window + 2 {
        return Err(Error::InsufficientData {
            needed: options.window + 2,
            available: training_days,
        });
    }
    let days = (end - start).num_days() as usize + 1;
    let aligned: Vec<FrequencySeries> = members
        .iter()
        .map(|s| {
            let offset = s.index_of(start).expect("start inside every member");
            s.slice(offset, offset + days)
        })
        .collect::<Result<_>>()?;

    let pre: Vec<FrequencySeries> = aligned
        .iter()
        .map(|s| s.slice(0, training_days))
        .collect::<Result<_>>()?;
    let models = train_max_fame_models(&pre, options);
    let (prob_ln, prob_hmm) = models.probabilities()?;

    // windowed means: index t is the window ending on day t + window - 1
    let means: Vec<Vec<f64>> = aligned.iter().map(|s| window_means(s.values(), options.window)).collect();
    let mut peak_days = vec![0usize; aligned.len()];
    let mut tie_days = 0;
    let mut column = vec![0.0; aligned.len()];
    for day in training_days..days {
        let t = day + 1 - options.window;
        for (c, m) in column.iter_mut().zip(&means) {
            *c = m[t];
        }
        match strict_argmax(&column) {
            Some(i) => peak_days[i] += 1,
            None => tie_days += 1,
        }
    }
    let post_split_days = days - training_days;

    let mut rows: Vec<MaxFameRow> = aligned
        .iter()
        .zip(&peak_days)
        .map(|(s, &d)| MaxFameRow {
            entity_id: s.entity_id().to_string(),
            prob_hmm: prob_hmm.get(s.entity_id()).copied().unwrap_or(0.0),
            prob_lognormal: prob_ln.get(s.entity_id()).copied().unwrap_or(0.0),
            empirical_peak_days: d,
            empirical_prob: d as f64 / post_split_days as f64,
        })
        .collect();
    rows.sort_by(|a, b| a.entity_id.cmp(&b.entity_id));

    Ok(MaxFameBacktest {
        report: MaxFameReport {
            group: group.name().to_string(),
            split_date,
            window: options.window,
            training_days,
            post_split_days,
            tie_days,
            rows,
            untrainable: models.untrainable,
        },
        lognormal_fits: models.lognormal_fits,
        hmm_models: models.hmm_models,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioBacktestRow {
    pub threshold: f64,
    pub empirical_count: usize,
    pub empirical_prob: f64,
    pub model_count: f64,
    pub model_prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioBacktest {
    pub split_date: NaiveDate,
    /// Fit on the horizon that ends the day before the split.
    pub training: RatioFit,
    /// Ratios over the horizon that starts on the split date.
    pub test: RatioSample,
    pub rows: Vec<RatioBacktestRow>,
}

/// Fits a ratio model on the last full horizon before `split_date` and
/// compares its exceedance predictions with the ratios realised over the
/// horizon starting at `split_date`.
pub fn backtest_ratio_model(
    series_map: &SeriesMap,
    group: &GroupDefinition,
    split_date: NaiveDate,
    thresholds: &[f64],
    params: &RatioParams,
) -> Result<RatioBacktest> {
    let training = fit_ratio_model(
        series_map,
        group,
        params,
        split_date - Duration::days(params.horizon_days as i64),
    )?;
    let test = ratio_sample(series_map, group, params, split_date)?;
    let n = test.observations.len();
    let rows = thresholds
        .iter()
        .map(|&threshold| {
            let model_prob = training.model.prob(threshold)?;
            let empirical_count = test.observations.iter().filter(|o| o.ratio > threshold).count();
            Ok(RatioBacktestRow {
                threshold,
                empirical_count,
                empirical_prob: empirical_count as f64 / n as f64,
                model_count: expected_count(model_prob, n as f64),
                model_prob,
            })
        })
        .collect::<Result<_>>()?;
    Ok(RatioBacktest {
        split_date,
        training,
        test,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{powerlaw_tail_prob, LogNormalFit};
    use crate::forecast::RatioKind;
    use crate::hmm::{simulate_with, SimulationOptions};

    fn start() -> NaiveDate {
        NaiveDate::from_ymd_opt(2005, 1, 1).unwrap()
    }

    fn model(beta: f64, normal_mu: f64, height_mu: f64) -> HmmModel {
        HmmModel::new(
            beta,
            0.2,
            LogNormalFit::new(normal_mu, 0.3).unwrap(),
            LogNormalFit::new(height_mu, 0.5).unwrap(),
            LogNormalFit::new(3f64.ln(), 0.3).unwrap(),
        )
        .unwrap()
    }

    /// Members share the pulse process but differ in their Normal level,
    /// which falls off like a power law with rank.
    fn heavy_tail_group(n: usize, days: usize, seed: u64) -> (SeriesMap, GroupDefinition) {
        let map: SeriesMap = (0..n)
            .map(|i| {
                let level = 40.0 * ((i + 1) as f64).powf(-1.2);
                let opts = SimulationOptions {
                    entity_id: format!("c{i:02}"),
                    start_date: start(),
                    ..Default::default()
                };
                let sim = simulate_with(&model(0.01, level.ln_1p(), 6.0), days, seed * 100 + i as u64, &opts).unwrap();
                (opts.entity_id, sim.series)
            })
            .collect();
        let group = GroupDefinition::new("cities", map.keys().cloned()).unwrap();
        (map, group)
    }

    #[test]
    fn dominant_member_takes_every_day() {
        let mk = |id: &str, base: f64| {
            let v = (0..200).map(|i| base + ((i * 7) % 5) as f64).collect();
            (id.to_string(), FrequencySeries::new(id, start(), v).unwrap())
        };
        let map: SeriesMap = [mk("a", 100.0), mk("b", 1.0), mk("c", 2.0)].into_iter().collect();
        let g = GroupDefinition::new("g", ["a", "b", "c"]).unwrap();
        let bt = backtest_max_fame(&map, &g, start() + Duration::days(150), &Default::default()).unwrap();
        let r = &bt.report;
        assert_eq!(r.post_split_days, 50);
        assert_eq!(r.tie_days, 0);
        let probs: Vec<f64> = r.rows.iter().map(|x| x.empirical_prob).collect();
        assert_eq!(probs, vec![1.0, 0.0, 0.0]);
        // no pulses anywhere: every HMM is untrainable
        assert_eq!(r.untrainable.iter().filter(|u| u.model == "hmm").count(), 3);
        assert!(r.rows.iter().all(|x| x.prob_hmm == 0.0));
    }

    #[test]
    fn ties_are_counted() {
        let v: Vec<f64> = (0..40).map(|i| (i % 3) as f64).collect();
        let map: SeriesMap = ["a", "b"]
            .iter()
            .map(|id| (id.to_string(), FrequencySeries::new(*id, start(), v.clone()).unwrap()))
            .collect();
        let g = GroupDefinition::new("g", ["a", "b"]).unwrap();
        let bt = backtest_max_fame(&map, &g, start() + Duration::days(30), &Default::default()).unwrap();
        assert_eq!(bt.report.tie_days, 10);
        assert!(bt.report.rows.iter().all(|r| r.empirical_peak_days == 0));
    }

    #[test]
    fn no_post_split_data() {
        let (map, g) = heavy_tail_group(3, 100, 1);
        assert!(backtest_max_fame(&map, &g, start() + Duration::days(100), &Default::default()).is_err());
    }

    #[test]
    fn model_columns_match_closed_forms() {
        let (map, g) = heavy_tail_group(6, 2000, 2);
        let opts = MaxFameBacktestOptions {
            pulse: PulseDetectionParams {
                k_sigma: 3.0,
                ..Default::default()
            },
            ..Default::default()
        };
        let bt = backtest_max_fame(&map, &g, start() + Duration::days(1500), &opts).unwrap();
        let hmm = max_fame_prob_hmm(&bt.hmm_models).unwrap();
        let ln = max_fame_prob_lognormal(&bt.lognormal_fits).unwrap();
        for row in &bt.report.rows {
            assert_eq!(row.prob_hmm, hmm.get(&row.entity_id).copied().unwrap_or(0.0));
            assert_eq!(row.prob_lognormal, ln[&row.entity_id]);
        }
        let total: f64 = bt.report.rows.iter().map(|r| r.empirical_prob).sum::<f64>()
            + bt.report.tie_days as f64 / bt.report.post_split_days as f64;
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hmm_beats_lognormal_on_heavy_tail_group() {
        let opts = MaxFameBacktestOptions {
            pulse: PulseDetectionParams {
                k_sigma: 3.0,
                ..Default::default()
            },
            ..Default::default()
        };
        let wins = (1..=10)
            .filter(|&seed| {
                let (map, g) = heavy_tail_group(15, 4000, seed);
                let bt = backtest_max_fame(&map, &g, start() + Duration::days(3000), &opts).unwrap();
                let (hmm, ln) = bt.report.mean_absolute_errors();
                hmm <= ln
            })
            .count();
        assert!(wins >= 8, "{wins}/10");
    }

    fn ratio_corpus(n: usize, days: usize) -> (SeriesMap, GroupDefinition) {
        let map: SeriesMap = (0..n)
            .map(|i| {
                let u = ((i * 7919) % n) as f64 / n as f64 + 0.5 / n as f64;
                let level = 20.0 * u.powf(1.0 / 1.5);
                let opts = SimulationOptions {
                    entity_id: format!("p{i:03}"),
                    start_date: start(),
                    ..Default::default()
                };
                let sim = simulate_with(&model(0.004, level.ln_1p(), 3.5), days, 7000 + i as u64, &opts).unwrap();
                (opts.entity_id, sim.series)
            })
            .collect();
        let group = GroupDefinition::new("people", map.keys().cloned()).unwrap();
        (map, group)
    }

    #[test]
    fn ratio_backtest_counts() {
        let (map, g) = ratio_corpus(400, 3 * 365);
        let params = RatioParams {
            kind: RatioKind::PeakOverHist,
            x_min: 2.0,
            ..Default::default()
        };
        let split = start() + Duration::days(2 * 365);
        let bt = backtest_ratio_model(&map, &g, split, &[2.0, 5.0, 10.0, 1e6], &params).unwrap();
        // in-sample: the fitted line stays close to the training CCDF
        let fit = &bt.training;
        for p in fit.ccdf.points.iter().filter(|p| p.x >= params.x_min) {
            let model = powerlaw_tail_prob(&fit.model.tail, p.x).unwrap();
            assert!((model.log10() - p.prob.log10()).abs() < 1.0, "{p:?} vs {model}");
        }
        assert!(fit.model.tail.r_squared > 0.8, "{:?}", fit.model.tail);
        for row in &bt.rows {
            if row.empirical_count >= 10 {
                let rel = (row.model_count - row.empirical_count as f64).abs() / row.empirical_count as f64;
                assert!(rel <= 0.5, "{row:?}");
            }
        }
        let last = bt.rows.last().unwrap();
        assert_eq!(last.empirical_count, 0);
        assert_eq!(last.empirical_prob, 0.0);
        assert!(last.model_count > 0.0 && last.model_count.is_finite());
        assert!(backtest_ratio_model(&map, &g, split, &[1.0], &params).is_err());
    }
}
