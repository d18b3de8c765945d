//! Which member of a group will hold the group's top fame: the log-normal
//! product formula and the HMM formula, each against its simulation oracle,
//! and a backtest on a synthetic group.

use std::collections::BTreeMap;

use chrono::{Duration, NaiveDate};
use newsfame::dist::LogNormalFit;
use newsfame::forecast::{
    backtest_max_fame, joint_max_fame_hmm_sim, joint_max_fame_lognormal_mc, max_fame_prob_hmm,
    max_fame_prob_lognormal, MaxFameBacktestOptions,
};
use newsfame::hmm::{simulate_with, HmmModel, PeakExit, SimulationOptions};
use newsfame::io::SeriesMap;
use newsfame::pulse::PulseDetectionParams;
use newsfame::report::max_fame_table;
use newsfame::series::GroupDefinition;

fn model(beta: f64, normal_mu: f64, height_mu: f64) -> newsfame::Result<HmmModel> {
    HmmModel::new(
        beta,
        0.2,
        LogNormalFit::new(normal_mu, 0.3)?,
        LogNormalFit::new(height_mu, 0.5)?,
        LogNormalFit::new(3f64.ln(), 0.3)?,
    )
}

fn main() -> newsfame::Result<()> {
    let fits: BTreeMap<String, LogNormalFit> = [("a", 1.0, 0.3), ("b", 2.0, 0.3), ("c", 3.0, 0.5)]
        .into_iter()
        .map(|(id, mu, sigma)| Ok((id.to_string(), LogNormalFit::new(mu, sigma)?)))
        .collect::<newsfame::Result<_>>()?;
    let formula = max_fame_prob_lognormal(&fits)?;
    let oracle = joint_max_fame_lognormal_mc(&fits, 200_000, 1)?;
    println!("log-normal: entity  formula  joint MC");
    for (id, p) in &formula {
        println!("            {id:<6}  {p:.4}   {:.4}", oracle[id].estimate);
    }

    let models: BTreeMap<String, HmmModel> = [("a", 0.02, 4.0), ("b", 0.01, 5.0), ("c", 0.005, 6.0)]
        .into_iter()
        .map(|(id, beta, h)| Ok((id.to_string(), model(beta, 1.0, h)?)))
        .collect::<newsfame::Result<_>>()?;
    let formula = max_fame_prob_hmm(&models)?;
    let sim = joint_max_fame_hmm_sim(&models, 100_000, 7, PeakExit::Geometric)?;
    println!("HMM:        entity  formula  joint sim");
    for (id, p) in &formula {
        println!("            {id:<6}  {p:.4}   {:.4}", sim[id].estimate);
    }

    // a group whose normal levels fall off like a power law with rank
    let start = NaiveDate::from_ymd_opt(2005, 1, 1).unwrap();
    let map: SeriesMap = (0..15)
        .map(|i| {
            let level = 40.0 * ((i + 1) as f64).powf(-1.2);
            let opts = SimulationOptions {
                entity_id: format!("city{i:02}"),
                start_date: start,
                ..Default::default()
            };
            let s = simulate_with(&model(0.01, f64::ln_1p(level), 6.0)?, 4000, 100 + i as u64, &opts)?;
            Ok((opts.entity_id, s.series))
        })
        .collect::<newsfame::Result<_>>()?;
    let group = GroupDefinition::new("cities", map.keys().cloned())?;
    let options = MaxFameBacktestOptions {
        pulse: PulseDetectionParams {
            k_sigma: 3.0,
            ..Default::default()
        },
        ..Default::default()
    };
    let bt = backtest_max_fame(&map, &group, start + Duration::days(3000), &options)?;
    println!("\n{}", max_fame_table(&bt.report));
    let (hmm, ln) = bt.report.mean_absolute_errors();
    println!("MAE: log-normal {ln:.4}, HMM {hmm:.4}");
    Ok(())
}
