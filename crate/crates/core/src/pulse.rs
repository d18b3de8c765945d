//! News pulse detection and pulse-curve fitting.
//!
//! A pulse is modelled as `x(t) = H (t/q)^q e^(q - t)`: it rises from zero,
//! peaks at day `q` with height `H` and decays afterwards. This is the curve
//! `A t^q e^(-t)` with amplitude `A = H (e/q)^q`.
//!
//! Detection runs in three passes over a frequency series:
//!
//! 1. peaks are strict local maxima (plateaus report their leftmost day) that
//!    exceed `k_sigma` times the standard deviation of the whole series;
//! 2. peaks no more than `group_distance` days apart form one peak group;
//! 3. each group is widened day by day, backward and forward, while the
//!    length-`ma_length` moving average taken on the outward side keeps
//!    strictly decreasing. Extents that overlap afterwards are merged.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::brent_minimize;
use crate::series::FrequencySeries;
use crate::stats::population_std;

const FIT_MAX_ITER: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseDetectionParams {
    /// Peaks must exceed `k_sigma` standard deviations of the series.
    pub k_sigma: f64,
    /// Peaks at most this many days apart are grouped into one pulse.
    pub group_distance: usize,
    /// Length of the moving average that bounds a pulse's extent.
    pub ma_length: usize,
}

impl Default for PulseDetectionParams {
    /// `K = 5`, `t = 20`, `N = 10`.
    fn default() -> Self {
        PulseDetectionParams {
            k_sigma: 5.0,
            group_distance: 20,
            ma_length: 10,
        }
    }
}

impl PulseDetectionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.k_sigma > 0.0 && self.k_sigma.is_finite()) || self.group_distance == 0 || self.ma_length == 0 {
            return Err(Error::invalid(format!("pulse detection parameters must be positive: {self:?}")));
        }
        Ok(())
    }
}

/// Index extent of a detected pulse, inclusive on both ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PulseExtent {
    pub start_index: usize,
    pub peak_index: usize,
    pub end_index: usize,
}

impl PulseExtent {
    pub fn len(&self) -> usize {
        self.end_index - self.start_index + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, index: usize) -> bool {
        (self.start_index..=self.end_index).contains(&index)
    }
}

/// Least-squares pulse-curve parameters for one segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseFit {
    pub height: f64,
    pub rise_days: f64,
    /// Sum of squared residuals.
    pub residual: f64,
}

/// A detected pulse with its fitted curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    pub start_index: usize,
    pub peak_index: usize,
    pub end_index: usize,
    pub height: f64,
    pub rise_days: f64,
    pub amplitude: f64,
    pub residual: f64,
}

impl Pulse {
    pub fn new(extent: PulseExtent, fit: PulseFit) -> Self {
        Pulse {
            start_index: extent.start_index,
            peak_index: extent.peak_index,
            end_index: extent.end_index,
            height: fit.height,
            rise_days: fit.rise_days,
            amplitude: amplitude(fit.height, fit.rise_days),
            residual: fit.residual,
        }
    }

    pub fn extent(&self) -> PulseExtent {
        PulseExtent {
            start_index: self.start_index,
            peak_index: self.peak_index,
            end_index: self.end_index,
        }
    }
}

/// `A = H (e/q)^q`.
pub fn amplitude(height: f64, rise_days: f64) -> f64 {
    height * (rise_days * (1.0 - rise_days.ln())).exp()
}

/// Pulse curve value `H (t/q)^q e^(q - t)` at day `t >= 0`.
pub fn pulse_shape(height: f64, rise_days: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    height * log_shape(rise_days, t).exp()
}

/// `ln((t/q)^q e^(q - t))`
fn log_shape(q: f64, t: f64) -> f64 {
    q * (t / q).ln() + q - t
}

pub fn detect_pulses(series: &FrequencySeries, params: &PulseDetectionParams) -> Result<Vec<PulseExtent>> {
    detect_pulses_in(series.values(), params)
}

/// [`detect_pulses`] over a bare slice.
pub fn detect_pulses_in(values: &[f64], params: &PulseDetectionParams) -> Result<Vec<PulseExtent>> {
    params.validate()?;
    let n = values.len();
    if n <= 2 * params.ma_length {
        return Err(Error::InsufficientData {
            needed: 2 * params.ma_length + 1,
            available: n,
        });
    }
    let sigma = population_std(values);
    if sigma == 0.0 {
        return Ok(Vec::new());
    }
    let threshold = params.k_sigma * sigma;

    let peaks: Vec<usize> = local_maxima(values)
        .into_iter()
        .filter(|&i| values[i] > threshold)
        .collect();

    let mut groups: Vec<Vec<usize>> = Vec::new();
    for p in peaks {
        match groups.last_mut() {
            Some(g) if p - g[g.len() - 1] <= params.group_distance => g.push(p),
            _ => groups.push(vec![p]),
        }
    }

    let mut extents: Vec<PulseExtent> = Vec::with_capacity(groups.len());
    for g in groups {
        let first = g[0];
        let last = g[g.len() - 1];
        let peak = highest(values, &g);
        let start = extend_backward(values, first, params.ma_length);
        let end = extend_forward(values, last, params.ma_length);
        let ext = PulseExtent {
            start_index: start,
            peak_index: peak,
            end_index: end,
        };
        match extents.last_mut() {
            Some(prev) if ext.start_index <= prev.end_index => {
                prev.end_index = prev.end_index.max(ext.end_index);
                if values[ext.peak_index] > values[prev.peak_index] {
                    prev.peak_index = ext.peak_index;
                }
            }
            _ => extents.push(ext),
        }
    }
    Ok(extents)
}

/// Strict local maxima; a plateau counts once, at its leftmost day, when
/// both of its outer neighbours are lower. The first and last day never
/// qualify.
fn local_maxima(values: &[f64]) -> Vec<usize> {
    let n = values.len();
    let mut out = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if values[i] > values[i - 1] {
            let mut j = i + 1;
            while j < n && values[j] == values[i] {
                j += 1;
            }
            if j < n && values[j] < values[i] {
                out.push(i);
            }
            i = j;
        } else {
            i += 1;
        }
    }
    out
}

fn highest(values: &[f64], idx: &[usize]) -> usize {
    let mut best = idx[0];
    for &i in &idx[1..] {
        if values[i] > values[best] {
            best = i;
        }
    }
    best
}

/// Mean of the `len` days ending at `i` (fewer at the series start).
fn trailing_mean(values: &[f64], i: usize, len: usize) -> f64 {
    let lo = (i + 1).saturating_sub(len);
    let w = &values[lo..=i];
    w.iter().sum::<f64>() / w.len() as f64
}

/// Mean of the `len` days starting at `i` (fewer at the series end).
fn leading_mean(values: &[f64], i: usize, len: usize) -> f64 {
    let hi = (i + len).min(values.len());
    let w = &values[i..hi];
    w.iter().sum::<f64>() / w.len() as f64
}

fn extend_backward(values: &[f64], from: usize, ma_length: usize) -> usize {
    let mut cur = from;
    let mut ma = trailing_mean(values, cur, ma_length);
    while cur > 0 {
        let next = trailing_mean(values, cur - 1, ma_length);
        if next >= ma {
            break;
        }
        cur -= 1;
        ma = next;
    }
    cur
}

fn extend_forward(values: &[f64], from: usize, ma_length: usize) -> usize {
    let mut cur = from;
    let mut ma = leading_mean(values, cur, ma_length);
    while cur + 1 < values.len() {
        let next = leading_mean(values, cur + 1, ma_length);
        if next >= ma {
            break;
        }
        cur += 1;
        ma = next;
    }
    cur
}

/// Least-squares fit of the pulse curve to `segment`, with day offsets
/// `t = 1..=len` and uniform weights.
///
/// `H` enters linearly, so for each candidate `q` the best height is solved in
/// closed form and only `q` is searched: a scan over `[0.5, len]` seeded with
/// the day of the maximum, then a bounded Brent refinement around the best
/// scan point. `H` is kept in `(0, 10 * max]`.
pub fn fit_pulse(segment: &[f64]) -> Result<PulseFit> {
    let len = segment.len();
    if len < 3 {
        return Err(Error::InsufficientData { needed: 3, available: len });
    }
    if let Some(bad) = segment.iter().find(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("segment contains {bad}")));
    }
    let (argmax, max) = segment
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, v)| if v > best.1 { (i, v) } else { best });
    if !(max > 0.0) {
        return Err(Error::invalid("pulse segment has no positive value"));
    }

    let (q_lo, q_hi) = (0.5, len as f64);
    let (h_lo, h_hi) = (max * 1e-12, 10.0 * max);
    let profile = |q: f64| -> (f64, f64) {
        let (mut ss, mut so) = (0.0, 0.0);
        for (k, obs) in segment.iter().enumerate() {
            let s = log_shape(q, (k + 1) as f64).exp();
            ss += s * s;
            so += s * obs;
        }
        let h = (so / ss).clamp(h_lo, h_hi);
        let ssr = segment
            .iter()
            .enumerate()
            .map(|(k, obs)| {
                let d = h * log_shape(q, (k + 1) as f64).exp() - obs;
                d * d
            })
            .sum::<f64>();
        (h, ssr)
    };

    let steps = (8 * len).max(64);
    let mut grid: Vec<f64> = (0..=steps)
        .map(|i| q_lo + (q_hi - q_lo) * i as f64 / steps as f64)
        .collect();
    grid.push((argmax as f64 + 1.0).clamp(q_lo, q_hi));
    grid.sort_by(f64::total_cmp);
    let best = (0..grid.len())
        .min_by(|&a, &b| profile(grid[a]).1.total_cmp(&profile(grid[b]).1))
        .expect("grid is non-empty");
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(grid.len() - 1)];
    let refined = brent_minimize(|q| profile(q).1, lo, hi, 1e-12, FIT_MAX_ITER)?;
    let q = refined.params[0];
    let (height, residual) = profile(q);
    Ok(PulseFit {
        height,
        rise_days: q,
        residual,
    })
}

/// Fits the pulse curve over an extent of `series`.
pub fn fit_extent(values: &[f64], extent: PulseExtent) -> Result<Pulse> {
    let fit = fit_pulse(&values[extent.start_index..=extent.end_index])?;
    Ok(Pulse::new(extent, fit))
}

/// Detection followed by a curve fit of every detected extent.
pub fn detect_and_fit(series: &FrequencySeries, params: &PulseDetectionParams) -> Result<Vec<Pulse>> {
    detect_pulses(series, params)?
        .into_iter()
        .map(|e| fit_extent(series.values(), e))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    /// Triangular spike `height - 20|d|` centred on `at`.
    fn add_spike(values: &mut [f64], at: usize, height: f64) {
        for d in -4i64..=4 {
            let i = (at as i64 + d) as usize;
            values[i] += (height - 20.0 * d.unsigned_abs() as f64).max(0.0);
        }
    }

    #[test]
    fn default_parameters() {
        let p = PulseDetectionParams::default();
        assert_eq!((p.k_sigma, p.group_distance, p.ma_length), (5.0, 20, 10));
    }

    #[test]
    fn constant_series_has_no_pulses() {
        assert!(detect_pulses_in(&[3.0; 100], &PulseDetectionParams::default()).unwrap().is_empty());
    }

    #[test]
    fn short_series_is_rejected() {
        assert!(matches!(
            detect_pulses_in(&[1.0; 20], &PulseDetectionParams::default()),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn single_spike_extent_follows_moving_average() {
        let mut v = vec![0.0; 300];
        add_spike(&mut v, 50, 100.0);
        let found = detect_pulses_in(&v, &PulseDetectionParams::default()).unwrap();
        // trailing means at 50..=44: 30, 20, 12, 6, 2, 0, 0 -> stop at 45;
        // leading means mirror that and stop at 55.
        assert_eq!(
            found,
            vec![PulseExtent {
                start_index: 45,
                peak_index: 50,
                end_index: 55
            }]
        );
    }

    #[test]
    fn nearby_spikes_merge_distant_spikes_split() {
        let params = PulseDetectionParams::default();
        let mut near = vec![0.0; 300];
        add_spike(&mut near, 50, 100.0);
        add_spike(&mut near, 65, 100.0);
        let found = detect_pulses_in(&near, &params).unwrap();
        assert_eq!(found.len(), 1);
        assert_eq!((found[0].start_index, found[0].end_index), (45, 70));

        let mut far = vec![0.0; 300];
        add_spike(&mut far, 50, 100.0);
        add_spike(&mut far, 80, 100.0);
        let found = detect_pulses_in(&far, &params).unwrap();
        let spans: Vec<_> = found.iter().map(|p| (p.start_index, p.peak_index, p.end_index)).collect();
        assert_eq!(spans, vec![(45, 50, 55), (75, 80, 85)]);
    }

    #[test]
    fn plateau_peak_reports_leftmost_day() {
        let mut v = vec![0.0; 100];
        v[40] = 50.0;
        v[41] = 80.0;
        v[42] = 80.0;
        v[43] = 50.0;
        assert_eq!(local_maxima(&v), vec![41]);
        let found = detect_pulses_in(&v, &PulseDetectionParams::default()).unwrap();
        assert_eq!(found[0].peak_index, 41);
    }

    #[test]
    fn higher_threshold_can_split_a_chained_group() {
        // the weak middle spike chains 50 and 80 at K=3 but not at K=5
        let mut v = vec![0.0; 400];
        add_spike(&mut v, 50, 100.0);
        add_spike(&mut v, 65, 60.0);
        add_spike(&mut v, 80, 100.0);
        let low = PulseDetectionParams { k_sigma: 3.0, ..Default::default() };
        let high = PulseDetectionParams { k_sigma: 5.0, ..Default::default() };
        let sigma = population_std(&v);
        assert!(60.0 > 3.0 * sigma && 60.0 < 5.0 * sigma && 100.0 > 5.0 * sigma);
        assert_eq!(detect_pulses_in(&v, &low).unwrap().len(), 1);
        assert_eq!(detect_pulses_in(&v, &high).unwrap().len(), 2);
    }

    #[test]
    fn shape_values() {
        assert_eq!(pulse_shape(100.0, 5.0, 5.0), 100.0);
        assert_eq!(pulse_shape(100.0, 5.0, 0.0), 0.0);
        let v = pulse_shape(100.0, 5.0, 10.0);
        let expected = 100.0 * 32.0 * (-5.0f64).exp();
        assert!((v - expected).abs() < 1e-12);
        assert!((v - 21.56).abs() < 0.01);
        // A t^q e^-t form
        let a = amplitude(100.0, 5.0);
        assert!((a * 10f64.powf(5.0) * (-10.0f64).exp() - v).abs() < 1e-9);
    }

    #[test]
    fn noiseless_round_trip() {
        for (h, q) in [(100.0, 5.0), (37.0, 3.4), (800.0, 9.25)] {
            let seg: Vec<f64> = (1..=30).map(|t| pulse_shape(h, q, t as f64)).collect();
            let fit = fit_pulse(&seg).unwrap();
            assert!((fit.height / h - 1.0).abs() < 0.01, "{fit:?}");
            assert!((fit.rise_days / q - 1.0).abs() < 0.02, "{fit:?}");
            let scale: f64 = seg.iter().map(|v| v * v).sum();
            assert!(fit.residual <= 1e-12 * scale, "{fit:?}");
        }
    }

    #[test]
    fn lone_spike_fits_at_its_offset() {
        let seg = [0.0, 0.0, 50.0, 0.0, 0.0, 0.0];
        let fit = fit_pulse(&seg).unwrap();
        assert!((fit.rise_days - 3.0).abs() < 0.5, "{fit:?}");
        assert!(fit.residual > 100.0, "{fit:?}");
    }

    #[test]
    fn fit_rejects_bad_segments() {
        assert!(fit_pulse(&[1.0, 2.0]).is_err());
        assert!(fit_pulse(&[0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn noisy_round_trip_over_seeds() {
        let noise = Normal::new(0.0, 2.0).unwrap();
        let mut ok = 0;
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let seg: Vec<f64> = (1..=30)
                .map(|t| pulse_shape(100.0, 5.0, t as f64) + noise.sample(&mut rng))
                .collect();
            let fit = fit_pulse(&seg).unwrap();
            if (fit.height / 100.0 - 1.0).abs() <= 0.05 {
                ok += 1;
            }
        }
        assert!(ok >= 18, "{ok}/20");
    }

    proptest! {
        #[test]
        fn shape_peaks_at_rise_day(h in 0.1f64..1e4, q in 0.5f64..40.0) {
            let mut best = (0.0, f64::NEG_INFINITY);
            for k in 0..=4000 {
                let t = k as f64 * 0.025;
                let v = pulse_shape(h, q, t);
                if v > best.1 {
                    best = (t, v);
                }
            }
            prop_assert!((best.0 - q).abs() <= 0.025);
            prop_assert!(best.1 <= h * (1.0 + 1e-12));
            prop_assert!((pulse_shape(h, q, q) - h).abs() <= 1e-9 * h);
        }

        #[test]
        fn extents_are_sorted_and_disjoint(
            base in prop::collection::vec(0.0f64..5.0, 60..300),
            spikes in prop::collection::vec((0usize..300, 20.0f64..400.0), 0..8),
            k in 1.0f64..6.0,
        ) {
            let mut v = base.clone();
            for (at, h) in spikes {
                let i = at % v.len();
                v[i] += h;
            }
            let params = PulseDetectionParams { k_sigma: k, ..Default::default() };
            let found = detect_pulses_in(&v, &params).unwrap();
            for p in &found {
                prop_assert!(p.start_index <= p.peak_index && p.peak_index <= p.end_index);
            }
            for w in found.windows(2) {
                prop_assert!(w[0].end_index < w[1].start_index);
            }
        }

        #[test]
        fn raising_threshold_keeps_peaks_inside_lower_threshold_pulses(
            base in prop::collection::vec(0.0f64..5.0, 60..300),
            spikes in prop::collection::vec((0usize..300, 20.0f64..400.0), 0..8),
            k_lo in 1.0f64..4.0,
            dk in 0.0f64..3.0,
        ) {
            let mut v = base.clone();
            for (at, h) in spikes {
                let i = at % v.len();
                v[i] += h;
            }
            let lo = detect_pulses_in(&v, &PulseDetectionParams { k_sigma: k_lo, ..Default::default() }).unwrap();
            let hi = detect_pulses_in(&v, &PulseDetectionParams { k_sigma: k_lo + dk, ..Default::default() }).unwrap();
            for p in &hi {
                prop_assert!(lo.iter().any(|q| q.contains(p.peak_index)));
            }
        }

        #[test]
        fn raising_threshold_never_adds_isolated_pulses(
            heights in prop::collection::vec(20.0f64..400.0, 1..6),
            k_lo in 1.0f64..4.0,
            dk in 0.0f64..3.0,
        ) {
            // spikes spaced beyond the grouping distance cannot chain
            let mut v = vec![1.0; 80 * heights.len() + 80];
            for (j, h) in heights.iter().enumerate() {
                v[60 + 80 * j] += h;
            }
            let lo = detect_pulses_in(&v, &PulseDetectionParams { k_sigma: k_lo, ..Default::default() }).unwrap();
            let hi = detect_pulses_in(&v, &PulseDetectionParams { k_sigma: k_lo + dk, ..Default::default() }).unwrap();
            prop_assert!(hi.len() <= lo.len());
        }
    }
}
