//! The two-state news generator: simulate, recover the model from detected
//! pulses, and compare long-run behaviour with the closed forms.

use newsfame::dist::LogNormalFit;
use newsfame::hmm::{
    effective_gamma, expected_hitting_time, first_passage_days, label_states, simulate, stationary_peak_prob,
    train_hmm, HmmModel, TrainOptions,
};
use newsfame::pulse::{detect_and_fit, PulseDetectionParams};

fn main() -> newsfame::Result<()> {
    let model = HmmModel::new(
        0.01,
        0.2,
        LogNormalFit::new(1.0, 0.4)?,
        LogNormalFit::new(5.5, 0.5)?,
        LogNormalFit::new(1.0, 0.3)?,
    )?;
    let sim = simulate(&model, 20_000, 42)?;
    let peak_days = sim.path.peak_days();
    println!(
        "simulated {} days, {} pulses, {} peak days",
        sim.series.len(),
        sim.pulses.len(),
        peak_days
    );

    // the true state path is known here; real data only has detected pulses
    let truth = train_hmm(&sim.series, &sim.path, &sim.pulses, &TrainOptions::default())?;
    println!("trained on true states: beta {:.4} gamma {:.4}", truth.beta, truth.gamma);

    let pulses = detect_and_fit(&sim.series, &PulseDetectionParams::default())?;
    let path = label_states(&sim.series, &pulses)?;
    let detected = train_hmm(&sim.series, &path, &pulses, &TrainOptions::default())?;
    println!(
        "trained on {} detected pulses: beta {:.4} gamma {:.4} median height {:.0}",
        pulses.len(),
        detected.beta,
        detected.gamma,
        detected.peak_height_dist.median()
    );

    let g = effective_gamma(&model, 20_000, 1)?;
    let with_pulse_exit = HmmModel { gamma: g, ..model };
    println!(
        "peak fraction {:.4}; stationary value with effective gamma {g:.3}: {:.4}",
        peak_days as f64 / sim.series.len() as f64,
        stationary_peak_prob(&with_pulse_exit)
    );

    let runs = 2_000;
    let mean = (0..runs)
        .map(|s| first_passage_days(&model, s, 1_000_000).map(|d| d.unwrap() as f64))
        .sum::<newsfame::Result<f64>>()?
        / runs as f64;
    println!("mean days to first pulse {mean:.1}, closed form {:.1}", expected_hitting_time(&model)?);
    Ok(())
}
