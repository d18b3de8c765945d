//! Log-normal, truncated log-normal and power-law tail fits, with CCDF
//! plot data.

use newsfame::dist::{
    empirical_ccdf, fit_lognormal, fit_powerlaw_tail, fit_truncated_lognormal, lognormal_tail_prob,
    powerlaw_tail_prob, LogNormalFit,
};
use newsfame::report::write_loglog_csv;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Pareto};

fn main() -> newsfame::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);

    let sample: Vec<f64> = LogNormal::new(1.5, 0.8).unwrap().sample_iter(&mut rng).take(10_000).collect();
    let fit = fit_lognormal(&sample)?;
    println!("log-normal moments: mu {:.3} sigma {:.3} (true 1.5, 0.8)", fit.mu, fit.sigma);
    println!("Pr(X > 20) = {:.4}", lognormal_tail_prob(&fit, 20f64.ln()));

    // keep only the upper part of the log sample and recover the full model
    let cut = 1.5;
    let logs: Vec<f64> = sample.iter().map(|x| x.ln()).filter(|l| *l >= cut).collect();
    let naive = LogNormalFit::from_log_values(&logs)?;
    let trunc = fit_truncated_lognormal(&logs, cut)?;
    println!(
        "above ln x = {cut}: moments give mu {:.3} sigma {:.3}, truncated MLE gives mu {:.3} sigma {:.3}",
        naive.mu, naive.sigma, trunc.mu, trunc.sigma
    );

    let pareto: Vec<f64> = Pareto::new(1.0, 2.0).unwrap().sample_iter(&mut rng).take(50_000).collect();
    let ccdf = empirical_ccdf(&pareto)?;
    let tail = fit_powerlaw_tail(&ccdf, 1.0)?;
    println!(
        "power-law tail: slope {:.3} intercept {:.3} r^2 {:.4}",
        tail.slope, tail.intercept, tail.r_squared
    );
    println!("Pr(X > 100) = {:.2e} (true 1e-4)", powerlaw_tail_prob(&tail, 100.0)?);

    let mut csv = Vec::new();
    write_loglog_csv(&mut csv, &ccdf.points, &tail)?;
    let text = String::from_utf8(csv).unwrap();
    println!("\nlog-log plot data ({} rows), head:", text.lines().count() - 1);
    for line in text.lines().take(4) {
        println!("  {line}");
    }
    Ok(())
}
