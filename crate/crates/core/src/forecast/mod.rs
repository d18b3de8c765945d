//! Forecasts built on the fitted models: which group member holds the
//! maximum fame, how likely low-fame entities are to become famous, and how
//! large fame jumps relative to history can get.

mod backtest;
mod forward;
mod ratio;

pub use backtest::{
    backtest_max_fame, backtest_ratio_model, train_max_fame_models, MaxFameBacktest, MaxFameBacktestOptions,
    MaxFameModels, MaxFameReport, MaxFameRow, RatioBacktest, RatioBacktestRow, UntrainableEntity,
};
pub use forward::{
    become_famous_prob, fit_forward_fame, forward_fame_cohort, FamousEstimate, ForwardFameModel,
    ForwardFameParams,
};
pub use ratio::{
    default_ratio_anchor, extrapolate_n_periods, fit_ratio_model, ratio_sample, Extrapolation, RatioFit, RatioKind,
    RatioModel, RatioObservation, RatioParams, RatioSample,
};

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dist::LogNormalFit;
use crate::error::{Error, Result};
use crate::hmm::{stationary_peak_prob, HmmGenerator, HmmModel, PeakExit};
use crate::stats::normal_cdf;

pub const DEFAULT_MC_SAMPLES: usize = 1_000_000;

/// Monte Carlo probability estimate with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub samples: usize,
    pub seed: u64,
}

fn check_untruncated(fit: &LogNormalFit) -> Result<()> {
    if let Some(x_l) = fit.truncation_point {
        return Err(Error::invalid(format!(
            "comparison needs untruncated fits, got truncation point {x_l}"
        )));
    }
    if !(fit.sigma > 0.0) || !fit.mu.is_finite() {
        return Err(Error::invalid(format!("invalid fit {fit:?}")));
    }
    Ok(())
}

/// `Pr(F_i > F_j)` for independent normal log-fames,
/// `Phi((mu_i - mu_j) / sqrt(sigma_i^2 + sigma_j^2))`.
pub fn pr_greater_lognormal(fit_i: &LogNormalFit, fit_j: &LogNormalFit) -> Result<f64> {
    check_untruncated(fit_i)?;
    check_untruncated(fit_j)?;
    Ok(pr_greater_unchecked(fit_i, fit_j))
}

fn pr_greater_unchecked(fit_i: &LogNormalFit, fit_j: &LogNormalFit) -> f64 {
    let scale = fit_i.sigma.hypot(fit_j.sigma);
    normal_cdf((fit_i.mu - fit_j.mu) / scale)
}

/// Sampling estimate of [`pr_greater_lognormal`].
pub fn pr_greater_lognormal_mc(
    fit_i: &LogNormalFit,
    fit_j: &LogNormalFit,
    samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    check_untruncated(fit_i)?;
    check_untruncated(fit_j)?;
    if samples == 0 {
        return Err(Error::invalid("Monte Carlo needs at least one sample"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = Normal::new(fit_i.mu, fit_i.sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let b = Normal::new(fit_j.mu, fit_j.sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let wins = (0..samples)
        .filter(|_| a.sample(&mut rng) > b.sample(&mut rng))
        .count();
    Ok(binomial_estimate(wins, samples, seed))
}

fn binomial_estimate(hits: usize, samples: usize, seed: u64) -> McEstimate {
    let p = hits as f64 / samples as f64;
    McEstimate {
        estimate: p,
        std_error: (p * (1.0 - p) / samples as f64).sqrt(),
        samples,
        seed,
    }
}

/// Probability that each entity holds the group maximum, as the product of
/// its pairwise win probabilities. The pairwise events share `F_i`, so the
/// product treats them as independent; [`joint_max_fame_lognormal_mc`]
/// measures the error this introduces.
pub fn max_fame_prob_lognormal(fits: &BTreeMap<String, LogNormalFit>) -> Result<BTreeMap<String, f64>> {
    if fits.is_empty() {
        return Err(Error::invalid("max-fame probabilities need at least one entity"));
    }
    for fit in fits.values() {
        check_untruncated(fit)?;
    }
    Ok(fits
        .iter()
        .map(|(id, fi)| {
            let p = fits
                .iter()
                .filter(|(other, _)| *other != id)
                .map(|(_, fj)| pr_greater_unchecked(fi, fj))
                .product::<f64>();
            (id.clone(), p)
        })
        .collect())
}

/// Fraction of joint draws in which each entity has the strictly largest log
/// fame.
pub fn joint_max_fame_lognormal_mc(
    fits: &BTreeMap<String, LogNormalFit>,
    samples: usize,
    seed: u64,
) -> Result<BTreeMap<String, McEstimate>> {
    if fits.is_empty() || samples == 0 {
        return Err(Error::invalid("joint Monte Carlo needs entities and samples"));
    }
    let dists = fits
        .values()
        .map(|f| {
            check_untruncated(f)?;
            Normal::new(f.mu, f.sigma).map_err(|e| Error::invalid(e.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut wins = vec![0usize; dists.len()];
    let mut draw = vec![0.0; dists.len()];
    for _ in 0..samples {
        for (d, x) in dists.iter().zip(draw.iter_mut()) {
            *x = d.sample(&mut rng);
        }
        if let Some(i) = strict_argmax(&draw) {
            wins[i] += 1;
        }
    }
    Ok(fits
        .keys()
        .zip(wins)
        .map(|(id, w)| (id.clone(), binomial_estimate(w, samples, seed)))
        .collect())
}

/// Index of the unique largest value, or `None` on a tie for the top.
pub(crate) fn strict_argmax(xs: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    let mut tied = false;
    for (i, x) in xs.iter().enumerate() {
        match best {
            None => best = Some(i),
            Some(b) if *x > xs[b] => {
                best = Some(i);
                tied = false;
            }
            Some(b) if *x == xs[b] => tied = true,
            _ => {}
        }
    }
    if tied {
        None
    } else {
        best
    }
}

/// Probability that each entity is in its Peak state with a higher peak than
/// every other entity that is also peaking:
///
/// `P_i * prod_{j != i} (1 - P_j + P_j * Pr(H_i > H_j))`
///
/// with `P_i` the stationary Peak probability and `Pr(H_i > H_j)` compared on
/// the log-normal peak-height fits.
pub fn max_fame_prob_hmm(models: &BTreeMap<String, HmmModel>) -> Result<BTreeMap<String, f64>> {
    if models.is_empty() {
        return Err(Error::invalid("max-fame probabilities need at least one entity"));
    }
    for m in models.values() {
        m.validate()?;
    }
    Ok(models
        .iter()
        .map(|(id, mi)| {
            let p_i = stationary_peak_prob(mi);
            let p = models
                .iter()
                .filter(|(other, _)| *other != id)
                .map(|(_, mj)| {
                    let p_j = stationary_peak_prob(mj);
                    1.0 - p_j + p_j * pr_greater_unchecked(&mi.peak_height_dist, &mj.peak_height_dist)
                })
                .product::<f64>();
            (id.clone(), p_i * p)
        })
        .collect())
}

/// Simulates every entity independently for `days` days and counts, per
/// entity, the days on which it is peaking with a pulse height strictly
/// above that of every other peaking entity. Entity `k` (in id order) uses
/// seed `seed + k`.
pub fn joint_max_fame_hmm_sim(
    models: &BTreeMap<String, HmmModel>,
    days: usize,
    seed: u64,
    exit: PeakExit,
) -> Result<BTreeMap<String, McEstimate>> {
    if models.is_empty() || days == 0 {
        return Err(Error::invalid("joint simulation needs entities and days"));
    }
    let mut generators = models
        .values()
        .enumerate()
        .map(|(k, m)| HmmGenerator::new(m, seed.wrapping_add(k as u64), exit))
        .collect::<Result<Vec<_>>>()?;
    let mut wins = vec![0usize; generators.len()];
    let mut heights = vec![0.0; generators.len()];
    for _ in 0..days {
        for (g, h) in generators.iter_mut().zip(heights.iter_mut()) {
            g.step();
            *h = g.last_pulse_height().unwrap_or(f64::NEG_INFINITY);
        }
        if heights.iter().any(|h| h.is_finite()) {
            if let Some(i) = strict_argmax(&heights) {
                wins[i] += 1;
            }
        }
    }
    Ok(models
        .keys()
        .zip(wins)
        .map(|(id, w)| (id.clone(), binomial_estimate(w, days, seed)))
        .collect())
}
