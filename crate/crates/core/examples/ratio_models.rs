//! Fame-change ratios: fit the tail of peak-over-history ratios, extrapolate
//! the one-year probability over several years, and backtest.

use chrono::{Duration, NaiveDate};
use newsfame::dist::LogNormalFit;
use newsfame::forecast::{
    backtest_ratio_model, extrapolate_n_periods, fit_ratio_model, RatioKind, RatioModel, RatioParams,
};
use newsfame::hmm::{simulate_with, HmmModel, SimulationOptions};
use newsfame::io::SeriesMap;
use newsfame::report::ratio_backtest_table;
use newsfame::series::GroupDefinition;

fn main() -> newsfame::Result<()> {
    let start = NaiveDate::from_ymd_opt(2005, 1, 1).unwrap();
    let n = 300;
    let map: SeriesMap = (0..n)
        .map(|i| {
            let u = (i as f64 + 0.5) / n as f64;
            let level = 20.0 * u.powf(1.0 / 1.5);
            let model = HmmModel::new(
                0.004,
                0.2,
                LogNormalFit::new(f64::ln_1p(level), 0.3)?,
                LogNormalFit::new(3.5, 0.5)?,
                LogNormalFit::new(3f64.ln(), 0.3)?,
            )?;
            let opts = SimulationOptions {
                entity_id: format!("p{i:03}"),
                start_date: start,
                ..Default::default()
            };
            Ok((opts.entity_id.clone(), simulate_with(&model, 3 * 365, 500 + i as u64, &opts)?.series))
        })
        .collect::<newsfame::Result<_>>()?;
    let group = GroupDefinition::new("people", map.keys().cloned())?;
    let params = RatioParams {
        x_min: 2.0,
        ..Default::default()
    };

    let fit = fit_ratio_model(&map, &group, &params, start + Duration::days(2 * 365))?;
    println!(
        "peak/history ratio tail from {} entities: slope {:.3}, {} with no history",
        fit.sample.observations.len(),
        fit.model.tail.slope,
        fit.sample.zero_history.len()
    );
    for t in [2.0, 5.0, 10.0] {
        let p = fit.model.prob(t)?;
        let ten = extrapolate_n_periods(p, 10)?;
        println!("  Pr(ratio > {t:>4}) = {p:.4}; over 10 years {:.4} (linear {:.4})", ten.exact, ten.linear);
    }

    let published = RatioModel::published(RatioKind::PeakOverHist, 365, 5, -1.2, -0.3, 1.0)?;
    let p = published.prob(1000.0)?;
    let x = extrapolate_n_periods(p, 5)?;
    println!("published-style model: one year {p:.3e}, five years {:.3e}", x.exact);

    let bt = backtest_ratio_model(&map, &group, start + Duration::days(2 * 365), &[2.0, 5.0, 10.0], &params)?;
    println!("\n{}", ratio_backtest_table(&bt));
    Ok(())
}
