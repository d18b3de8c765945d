//! Detecting news pulses in a noisy series and fitting the pulse shape
//! `H (t/q)^q e^(q - t)` to each.

use chrono::NaiveDate;
use newsfame::pulse::{detect_and_fit, pulse_shape, PulseDetectionParams};
use newsfame::report::PulseRecord;
use newsfame::series::FrequencySeries;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> newsfame::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut values: Vec<f64> = (0..400).map(|_| rng.random_range(0.0..4.0f64).round()).collect();
    let injected = [(60usize, 300.0, 4.0), (200, 400.0, 2.0), (310, 250.0, 7.0)];
    for &(at, h, q) in &injected {
        for t in 1..60 {
            if let Some(v) = values.get_mut(at + t - 1) {
                *v += pulse_shape(h, q, t as f64).round();
            }
        }
    }
    let series = FrequencySeries::new("storm", NaiveDate::from_ymd_opt(2008, 1, 1).unwrap(), values)?;

    let params = PulseDetectionParams::default();
    println!("detection with K = {}, t = {}, N = {}", params.k_sigma, params.group_distance, params.ma_length);
    let pulses = detect_and_fit(&series, &params)?;
    println!("{} pulses (injected {})", pulses.len(), injected.len());
    for p in &pulses {
        let r = PulseRecord::new(&series, p);
        println!(
            "  {} .. {} peak {}  H {:>7.1}  q {:>5.2}  rmse {:>6.2}",
            r.start_date,
            r.end_date,
            r.peak_date,
            r.height,
            r.rise_days,
            (r.residual / p.extent().len() as f64).sqrt()
        );
    }
    Ok(())
}
