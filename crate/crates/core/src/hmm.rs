//! Two-state news generator.
//!
//! An entity is either in the `Normal` state, where daily frequencies are
//! i.i.d. draws with `ln(1 + f) ~ N(mu, sigma)`, or in the `Peak` state, where
//! it emits a pulse curve with height and rise time drawn from log-normal
//! distributions. `beta` is the Normal -> Peak transition probability and
//! `gamma` the Peak -> Normal one.
//!
//! Training uses pulse-detection labels rather than EM over hidden states.

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::dist::{fit_lognormal, LogNormalFit};
use crate::error::{Error, Result};
use crate::pulse::{pulse_shape, Pulse, PulseExtent, PulseFit};
use crate::series::FrequencySeries;

/// Rise times below this are rejected when sampling.
pub const MIN_RISE_DAYS: f64 = 0.5;
const RISE_REJECTION_LIMIT: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum State {
    Normal,
    Peak,
}

/// Hidden state for every day of a series.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatePath {
    pub states: Vec<State>,
}

impl StatePath {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn peak_days(&self) -> usize {
        self.states.iter().filter(|s| **s == State::Peak).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HmmModel {
    pub beta: f64,
    pub gamma: f64,
    /// Fit of `ln(1 + f)` over Normal days.
    pub normal_log_fame: LogNormalFit,
    /// Fit over pulse heights `H`.
    pub peak_height_dist: LogNormalFit,
    /// Fit over pulse rise times `q`.
    pub rise_time_dist: LogNormalFit,
}

impl HmmModel {
    pub fn new(
        beta: f64,
        gamma: f64,
        normal_log_fame: LogNormalFit,
        peak_height_dist: LogNormalFit,
        rise_time_dist: LogNormalFit,
    ) -> Result<Self> {
        let model = HmmModel {
            beta,
            gamma,
            normal_log_fame,
            peak_height_dist,
            rise_time_dist,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::invalid(format!("beta must lie in [0, 1], got {}", self.beta)));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::invalid(format!("gamma must lie in (0, 1], got {}", self.gamma)));
        }
        for (name, fit) in [
            ("normal_log_fame", &self.normal_log_fame),
            ("peak_height_dist", &self.peak_height_dist),
            ("rise_time_dist", &self.rise_time_dist),
        ] {
            if !fit.mu.is_finite() || !(fit.sigma > 0.0 && fit.sigma.is_finite()) {
                return Err(Error::invalid(format!("{name} has invalid parameters {fit:?}")));
            }
        }
        Ok(())
    }

    /// Rows are the current state (Normal, Peak), columns the next one.
    pub fn transition_matrix(&self) -> [[f64; 2]; 2] {
        [[1.0 - self.beta, self.beta], [self.gamma, 1.0 - self.gamma]]
    }

    /// Median daily frequency in the Normal state.
    pub fn normal_median(&self) -> f64 {
        self.normal_log_fame.mu.exp() - 1.0
    }

    /// Level below which a decaying pulse counts as finished: the Normal-state
    /// median, floored at 1% of the pulse height so the pulse always ends.
    pub fn pulse_exit_level(&self, height: f64) -> f64 {
        self.normal_median().max(0.01 * height)
    }

    /// Days a pulse with the given parameters lasts under [`PeakExit::PulseEnd`].
    pub fn pulse_length(&self, height: f64, rise_days: f64) -> usize {
        let level = self.pulse_exit_level(height);
        let mut t = 1usize;
        while (t as f64) < rise_days || pulse_shape(height, rise_days, (t + 1) as f64) >= level {
            t += 1;
        }
        t
    }
}

/// Labels days inside any pulse extent as Peak and all others as Normal.
pub fn label_states(series: &FrequencySeries, pulses: &[Pulse]) -> Result<StatePath> {
    let extents: Vec<PulseExtent> = pulses.iter().map(Pulse::extent).collect();
    label_extents(series.len(), &extents)
}

pub fn label_extents(len: usize, extents: &[PulseExtent]) -> Result<StatePath> {
    let mut sorted = extents.to_vec();
    sorted.sort_by_key(|e| e.start_index);
    for e in &sorted {
        if e.start_index > e.end_index || e.end_index >= len {
            return Err(Error::invalid(format!(
                "pulse extent {}..={} does not fit a series of length {len}",
                e.start_index, e.end_index
            )));
        }
    }
    for pair in sorted.windows(2) {
        if pair[1].start_index <= pair[0].end_index {
            return Err(Error::invalid(format!(
                "pulse extents {}..={} and {}..={} overlap",
                pair[0].start_index, pair[0].end_index, pair[1].start_index, pair[1].end_index
            )));
        }
    }
    let mut states = vec![State::Normal; len];
    for e in &sorted {
        states[e.start_index..=e.end_index].fill(State::Peak);
    }
    Ok(StatePath { states })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainOptions {
    /// Accept models where `beta >= gamma`.
    pub allow_beta_not_below_gamma: bool,
}

/// Estimates an [`HmmModel`] from a labelled series and its fitted pulses.
pub fn train_hmm(
    series: &FrequencySeries,
    path: &StatePath,
    pulses: &[Pulse],
    options: &TrainOptions,
) -> Result<HmmModel> {
    if path.len() != series.len() {
        return Err(Error::invalid(format!(
            "state path has {} days but series `{}` has {}",
            path.len(),
            series.entity_id(),
            series.len()
        )));
    }
    if pulses.is_empty() {
        return Err(Error::UntrainablePeakState(format!(
            "series `{}` has no pulses",
            series.entity_id()
        )));
    }

    let (mut normal_out, mut normal_to_peak, mut peak_out, mut peak_to_normal) = (0usize, 0usize, 0usize, 0usize);
    for pair in path.states.windows(2) {
        match (pair[0], pair[1]) {
            (State::Normal, next) => {
                normal_out += 1;
                normal_to_peak += usize::from(next == State::Peak);
            }
            (State::Peak, next) => {
                peak_out += 1;
                peak_to_normal += usize::from(next == State::Normal);
            }
        }
    }
    let normal_logs: Vec<f64> = series
        .values()
        .iter()
        .zip(&path.states)
        .filter(|(_, s)| **s == State::Normal)
        .map(|(f, _)| f.ln_1p())
        .collect();
    if normal_logs.is_empty() || normal_out == 0 {
        return Err(Error::DegenerateSample(format!(
            "series `{}` has no Normal day with a successor",
            series.entity_id()
        )));
    }
    if peak_out == 0 {
        return Err(Error::UntrainablePeakState(format!(
            "series `{}` has no Peak day with a successor",
            series.entity_id()
        )));
    }
    let beta = normal_to_peak as f64 / normal_out as f64;
    let gamma = peak_to_normal as f64 / peak_out as f64;
    if gamma == 0.0 {
        return Err(Error::UntrainablePeakState(format!(
            "series `{}` never leaves the Peak state",
            series.entity_id()
        )));
    }
    if !options.allow_beta_not_below_gamma && beta >= gamma {
        return Err(Error::invalid(format!(
            "trained beta {beta} is not below gamma {gamma} for `{}`",
            series.entity_id()
        )));
    }

    let normal_log_fame = LogNormalFit::from_log_values(&normal_logs)?;
    let peak_fit = |what: &str, xs: Vec<f64>| {
        fit_lognormal(&xs).map_err(|e| {
            Error::UntrainablePeakState(format!("{what} of `{}`: {e}", series.entity_id()))
        })
    };
    let peak_height_dist = peak_fit("pulse heights", pulses.iter().map(|p| p.height).collect())?;
    let rise_time_dist = peak_fit("pulse rise times", pulses.iter().map(|p| p.rise_days).collect())?;

    HmmModel::new(beta, gamma, normal_log_fame, peak_height_dist, rise_time_dist)
}

/// Long-run fraction of Peak days, `beta / (beta + gamma)`.
pub fn stationary_peak_prob(model: &HmmModel) -> f64 {
    let total = model.beta + model.gamma;
    if total > 0.0 {
        model.beta / total
    } else {
        0.0
    }
}

/// Expected days from a Normal day until the first Peak day, `1 / beta`.
pub fn expected_hitting_time(model: &HmmModel) -> Result<f64> {
    if !(model.beta > 0.0) {
        return Err(Error::invalid("beta is 0: the Peak state is never reached"));
    }
    Ok(1.0 / model.beta)
}

/// How a simulated entity leaves the Peak state.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeakExit {
    /// Stay in Peak until the pulse has peaked and decayed below
    /// [`HmmModel::pulse_exit_level`]; `gamma` is not used.
    #[default]
    PulseEnd,
    /// Leave Peak with probability `gamma` after every Peak day.
    Geometric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationOptions {
    pub entity_id: String,
    pub start_date: NaiveDate,
    pub peak_exit: PeakExit,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        SimulationOptions {
            entity_id: "simulated".into(),
            start_date: NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid date"),
            peak_exit: PeakExit::PulseEnd,
        }
    }
}

/// Simulated series together with its generation record.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub series: FrequencySeries,
    pub path: StatePath,
    /// Emitted pulses with their true `H` and `q`; residuals are 0.
    pub pulses: Vec<Pulse>,
    pub seed: u64,
}

impl Simulation {
    pub fn record(&self, model: &HmmModel, peak_exit: PeakExit) -> GenerationRecord {
        GenerationRecord {
            entity_id: self.series.entity_id().to_string(),
            start_date: self.series.start_date(),
            seed: self.seed,
            peak_exit,
            model: *model,
            states: self.path.states.clone(),
            pulses: self.pulses.clone(),
        }
    }
}

/// Serializable generation record of one simulated series: the true state of
/// every day and the pulses that were emitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub entity_id: String,
    pub start_date: NaiveDate,
    pub seed: u64,
    pub peak_exit: PeakExit,
    pub model: HmmModel,
    pub states: Vec<State>,
    pub pulses: Vec<Pulse>,
}

impl GenerationRecord {
    pub fn path(&self) -> StatePath {
        StatePath {
            states: self.states.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct ActivePulse {
    start: usize,
    height: f64,
    rise_days: f64,
    t: usize,
    peak_index: usize,
    peak_value: f64,
}

/// Day-by-day generator. Starts in the Normal state.
///
/// Randomness comes from a ChaCha8 stream seeded with the given `u64`, so a
/// `(model, seed)` pair always yields the same days.
#[derive(Debug, Clone)]
pub struct HmmGenerator {
    model: HmmModel,
    exit: PeakExit,
    rng: ChaCha8Rng,
    normal: Normal<f64>,
    heights: LogNormal<f64>,
    rises: LogNormal<f64>,
    state: State,
    day: usize,
    active: Option<ActivePulse>,
    last_height: Option<f64>,
    finished: Vec<Pulse>,
}

impl HmmGenerator {
    pub fn new(model: &HmmModel, seed: u64, exit: PeakExit) -> Result<Self> {
        model.validate()?;
        let bad = |e: rand_distr::NormalError| Error::invalid(e.to_string());
        Ok(HmmGenerator {
            model: *model,
            exit,
            rng: ChaCha8Rng::seed_from_u64(seed),
            normal: Normal::new(model.normal_log_fame.mu, model.normal_log_fame.sigma).map_err(bad)?,
            heights: LogNormal::new(model.peak_height_dist.mu, model.peak_height_dist.sigma).map_err(bad)?,
            rises: LogNormal::new(model.rise_time_dist.mu, model.rise_time_dist.sigma).map_err(bad)?,
            state: State::Normal,
            day: 0,
            active: None,
            last_height: None,
            finished: Vec::new(),
        })
    }

    fn sample_rise(&mut self) -> f64 {
        for _ in 0..RISE_REJECTION_LIMIT {
            let q = self.rises.sample(&mut self.rng);
            if q >= MIN_RISE_DAYS {
                return q;
            }
        }
        MIN_RISE_DAYS
    }

    fn close_pulse(&mut self, end: usize) {
        if let Some(p) = self.active.take() {
            let extent = PulseExtent {
                start_index: p.start,
                peak_index: p.peak_index,
                end_index: end,
            };
            self.finished.push(Pulse::new(
                extent,
                PulseFit {
                    height: p.height,
                    rise_days: p.rise_days,
                    residual: 0.0,
                },
            ));
        }
    }

    /// Emits one day and advances the chain.
    pub fn step(&mut self) -> (State, f64) {
        let day = self.day;
        self.day += 1;
        match self.state {
            State::Normal => {
                let value = (self.normal.sample(&mut self.rng).exp() - 1.0).max(0.0);
                if self.rng.random::<f64>() < self.model.beta {
                    self.state = State::Peak;
                }
                self.last_height = None;
                (State::Normal, value)
            }
            State::Peak => {
                if self.active.is_none() {
                    let height = self.heights.sample(&mut self.rng);
                    let rise_days = self.sample_rise();
                    self.active = Some(ActivePulse {
                        start: day,
                        height,
                        rise_days,
                        t: 1,
                        peak_index: day,
                        peak_value: f64::NEG_INFINITY,
                    });
                }
                let p = self.active.as_mut().expect("pulse is active");
                let value = pulse_shape(p.height, p.rise_days, p.t as f64);
                if value > p.peak_value {
                    p.peak_value = value;
                    p.peak_index = day;
                }
                let (height, rise_days, t) = (p.height, p.rise_days, p.t);
                p.t += 1;
                self.last_height = Some(height);
                let leave = match self.exit {
                    PeakExit::PulseEnd => {
                        t as f64 >= rise_days
                            && pulse_shape(height, rise_days, (t + 1) as f64) < self.model.pulse_exit_level(height)
                    }
                    PeakExit::Geometric => self.rng.random::<f64>() < self.model.gamma,
                };
                if leave {
                    self.close_pulse(day);
                    self.state = State::Normal;
                }
                (State::Peak, value)
            }
        }
    }

    /// Height `H` of the pulse emitted on the latest day, if it was a Peak day.
    pub fn last_pulse_height(&self) -> Option<f64> {
        self.last_height
    }

    /// Pulses completed so far.
    pub fn pulses(&self) -> &[Pulse] {
        &self.finished
    }
}

pub fn simulate(model: &HmmModel, days: usize, seed: u64) -> Result<Simulation> {
    simulate_with(model, days, seed, &SimulationOptions::default())
}

pub fn simulate_with(model: &HmmModel, days: usize, seed: u64, options: &SimulationOptions) -> Result<Simulation> {
    if days == 0 {
        return Err(Error::invalid("simulation needs at least one day"));
    }
    let mut generator = HmmGenerator::new(model, seed, options.peak_exit)?;
    let (states, values): (Vec<State>, Vec<f64>) = (0..days).map(|_| generator.step()).unzip();
    generator.close_pulse(days - 1);
    Ok(Simulation {
        series: FrequencySeries::new(options.entity_id.clone(), options.start_date, values)?,
        path: StatePath { states },
        pulses: generator.finished,
        seed,
    })
}

/// Number of Normal days before the first Peak day of a fresh run, or `None`
/// if none occurs within `max_days`.
pub fn first_passage_days(model: &HmmModel, seed: u64, max_days: usize) -> Result<Option<usize>> {
    let mut generator = HmmGenerator::new(model, seed, PeakExit::PulseEnd)?;
    Ok((0..max_days).find(|_| generator.step().0 == State::Peak))
}

/// `1 / E[pulse length]` under [`PeakExit::PulseEnd`], estimated from
/// `samples` seeded pulse draws. This is the Peak -> Normal rate that
/// simulation with pulse-driven exits actually realises.
pub fn effective_gamma(model: &HmmModel, samples: usize, seed: u64) -> Result<f64> {
    if samples == 0 {
        return Err(Error::invalid("effective_gamma needs at least one sample"));
    }
    let mut generator = HmmGenerator::new(model, seed, PeakExit::PulseEnd)?;
    let total: usize = (0..samples)
        .map(|_| {
            let h = generator.heights.sample(&mut generator.rng);
            let q = generator.sample_rise();
            model.pulse_length(h, q)
        })
        .sum();
    Ok(samples as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn model(beta: f64, gamma: f64) -> HmmModel {
        HmmModel::new(
            beta,
            gamma,
            LogNormalFit::new(2.0, 0.5).unwrap(),
            LogNormalFit::new(200f64.ln(), 0.4).unwrap(),
            LogNormalFit::new(3f64.ln(), 0.3).unwrap(),
        )
        .unwrap()
    }

    fn series(values: Vec<f64>) -> FrequencySeries {
        FrequencySeries::new("e", NaiveDate::from_ymd_opt(2010, 1, 1).unwrap(), values).unwrap()
    }

    fn extent(s: usize, e: usize) -> PulseExtent {
        PulseExtent {
            start_index: s,
            peak_index: s,
            end_index: e,
        }
    }

    fn geometric() -> SimulationOptions {
        SimulationOptions {
            peak_exit: PeakExit::Geometric,
            ..Default::default()
        }
    }

    #[test]
    fn labels_from_extents() {
        assert!(label_extents(30, &[]).unwrap().states.iter().all(|s| *s == State::Normal));
        let p = label_extents(30, &[extent(10, 20)]).unwrap();
        assert_eq!(p.peak_days(), 11);
        assert_eq!(p.states[9], State::Normal);
        assert_eq!(p.states[10], State::Peak);
        assert_eq!(p.states[20], State::Peak);
        assert_eq!(p.states[21], State::Normal);
        assert!(label_extents(30, &[extent(5, 12), extent(12, 15)]).is_err());
        assert!(label_extents(30, &[extent(25, 30)]).is_err());
    }

    #[test]
    fn alternating_path_transitions_every_day() {
        let values: Vec<f64> = (0..40).map(|i| 1.0 + (i % 7) as f64).collect();
        let s = series(values.clone());
        let pulses: Vec<Pulse> = (0..40)
            .filter(|i| i % 2 == 1)
            .map(|i| {
                Pulse::new(
                    extent(i, i),
                    PulseFit {
                        height: values[i] + i as f64,
                        rise_days: 1.0 + (i % 3) as f64,
                        residual: 0.0,
                    },
                )
            })
            .collect();
        let path = label_states(&s, &pulses).unwrap();
        let opts = TrainOptions {
            allow_beta_not_below_gamma: true,
        };
        let m = train_hmm(&s, &path, &pulses, &opts).unwrap();
        assert_eq!(m.beta, 1.0);
        assert_eq!(m.gamma, 1.0);
        // the default options reject beta >= gamma
        assert!(train_hmm(&s, &path, &pulses, &TrainOptions::default()).is_err());
    }

    #[test]
    fn untrainable_paths() {
        let s = series((0..30).map(|i| (i % 5) as f64).collect());
        let path = label_states(&s, &[]).unwrap();
        assert!(matches!(
            train_hmm(&s, &path, &[], &TrainOptions::default()),
            Err(Error::UntrainablePeakState(_))
        ));
        let all_peak = StatePath {
            states: vec![State::Peak; 30],
        };
        let one = Pulse::new(
            extent(0, 29),
            PulseFit {
                height: 3.0,
                rise_days: 2.0,
                residual: 0.0,
            },
        );
        assert!(train_hmm(&s, &all_peak, &[one], &TrainOptions::default()).is_err());
    }

    #[test]
    fn geometric_round_trip_recovers_transitions() {
        let truth = model(0.01, 0.2);
        let mut passed = 0;
        for seed in 0..20 {
            let sim = simulate_with(&truth, 50_000, seed, &geometric()).unwrap();
            let m = train_hmm(&sim.series, &sim.path, &sim.pulses, &TrainOptions::default()).unwrap();
            if ((m.beta - 0.01) / 0.01).abs() <= 0.2 && ((m.gamma - 0.2) / 0.2).abs() <= 0.1 {
                passed += 1;
            }
        }
        assert!(passed >= 18, "{passed}/20");
    }

    #[test]
    fn beta_zero_stays_normal() {
        let m = model(0.0, 0.2);
        let sim = simulate(&m, 10_000, 4).unwrap();
        assert_eq!(sim.path.peak_days(), 0);
        assert!(sim.pulses.is_empty());
        let logs: Vec<f64> = sim.series.values().iter().map(|f| f.ln_1p()).collect();
        let mean = logs.iter().sum::<f64>() / logs.len() as f64;
        let se = 0.5 / (logs.len() as f64).sqrt();
        assert!((mean - 2.0).abs() < 3.0 * se, "{mean}");
    }

    #[test]
    fn same_seed_same_output() {
        let m = model(0.02, 0.2);
        assert_eq!(simulate(&m, 3000, 8).unwrap(), simulate(&m, 3000, 8).unwrap());
        assert_ne!(simulate(&m, 3000, 8).unwrap().series, simulate(&m, 3000, 9).unwrap().series);
    }

    #[test]
    fn long_run_peak_fraction() {
        let m = model(0.01, 0.2);
        let sim = simulate_with(&m, 100_000, 17, &geometric()).unwrap();
        let frac = sim.path.peak_days() as f64 / 100_000.0;
        let expected = stationary_peak_prob(&m);
        assert!((frac / expected - 1.0).abs() < 0.1, "{frac} vs {expected}");

        let g = effective_gamma(&m, 50_000, 3).unwrap();
        let sim = simulate(&m, 100_000, 17).unwrap();
        let frac = sim.path.peak_days() as f64 / 100_000.0;
        let expected = 0.01 / (0.01 + g);
        assert!((frac / expected - 1.0).abs() < 0.1, "{frac} vs {expected}");
    }

    #[test]
    fn pulse_end_emits_whole_pulses() {
        let m = model(0.01, 0.2);
        let sim = simulate(&m, 20_000, 5).unwrap();
        let path = label_states(&sim.series, &sim.pulses).unwrap();
        assert_eq!(path, sim.path);
        for p in &sim.pulses[..sim.pulses.len() - 1] {
            assert_eq!(p.end_index - p.start_index + 1, m.pulse_length(p.height, p.rise_days));
        }
    }

    #[test]
    fn closed_forms() {
        assert!((stationary_peak_prob(&model(0.3, 0.3)) - 0.5).abs() < 1e-15);
        assert!((stationary_peak_prob(&model(0.01, 0.2)) - 0.047_619).abs() < 1e-6);
        assert_eq!(expected_hitting_time(&model(0.5, 0.6)).unwrap(), 2.0);
        assert!((expected_hitting_time(&model(0.01, 0.2)).unwrap() - 100.0).abs() < 1e-9);
        assert!(expected_hitting_time(&model(0.0, 0.2)).is_err());
        assert_eq!(model(0.1, 0.4).transition_matrix(), [[0.9, 0.1], [0.4, 0.6]]);
    }

    #[test]
    fn first_passage_mean() {
        let m = model(0.05, 0.2);
        let total: usize = (0..10_000)
            .map(|seed| first_passage_days(&m, seed, 100_000).unwrap().unwrap())
            .sum();
        let mean = total as f64 / 10_000.0;
        assert!((mean / 20.0 - 1.0).abs() < 0.05, "{mean}");
    }

    #[test]
    fn model_json_round_trip() {
        let m = model(0.01, 0.2);
        let back: HmmModel = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);
    }

    proptest! {
        #[test]
        fn labels_match_membership(
            cuts in prop::collection::btree_set(0usize..200, 0..12),
        ) {
            let cuts: Vec<usize> = cuts.into_iter().collect();
            let extents: Vec<PulseExtent> = cuts.chunks_exact(2).map(|c| extent(c[0], c[1])).collect();
            let path = label_extents(200, &extents).unwrap();
            for (i, s) in path.states.iter().enumerate() {
                let inside = extents.iter().any(|e| e.start_index <= i && i <= e.end_index);
                prop_assert_eq!(*s == State::Peak, inside);
            }
        }

        #[test]
        fn emissions_are_non_negative(seed in any::<u64>(), beta in 0.0f64..0.5, mu in -1.0f64..3.0) {
            let m = HmmModel { normal_log_fame: LogNormalFit::new(mu, 1.0).unwrap(), ..model(beta, 0.3) };
            let sim = simulate(&m, 500, seed).unwrap();
            prop_assert!(sim.series.values().iter().all(|v| *v >= 0.0 && v.is_finite()));
        }
    }
}
