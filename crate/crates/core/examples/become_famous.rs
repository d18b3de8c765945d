//! Chance that an entity of modest fame becomes famous next period: the
//! forward-fame power-law model, from published coefficients and fitted on a
//! simulated corpus.

use chrono::NaiveDate;
use newsfame::dist::{expected_count, powerlaw_tail_prob, LogNormalFit, PowerLawTailFit};
use newsfame::forecast::{become_famous_prob, fit_forward_fame, ForwardFameModel, ForwardFameParams};
use newsfame::hmm::{simulate_with, HmmModel, SimulationOptions};
use newsfame::io::SeriesMap;
use newsfame::report::forward_fame_table;

fn main() -> newsfame::Result<()> {
    let published = [(0.0, 20.0, -1.415, 0.079, 1_022_651), (50.0, 100.0, -2.313, 4.218, 53_153)];
    let mut rows = Vec::new();
    for (m_l, m_u, slope, intercept, cohort) in published {
        let params = ForwardFameParams {
            m_l,
            m_u,
            w_m: 1,
            w_f: 1,
            x_min: 1.0,
        };
        let model = ForwardFameModel::published(&params, slope, intercept, cohort)?;
        rows.push((model, become_famous_prob(&model, 3000.0)?));
    }
    println!("{}", forward_fame_table(&rows));

    // population-scale arithmetic with a published tail
    let tail = PowerLawTailFit::from_coefficients(-1.734, 0.362, 1.0)?;
    let p = powerlaw_tail_prob(&tail, 20_000.0)?;
    println!("peak fame above 20000: p = {p:.3e}, about {:.0} people in 3e8", expected_count(p, 3e8));

    let model = HmmModel::new(
        0.01,
        0.2,
        LogNormalFit::new(0.5, 0.8)?,
        LogNormalFit::new(4.0, 1.2)?,
        LogNormalFit::new(1.0, 0.4)?,
    )?;
    let map: SeriesMap = (0..200)
        .map(|i| {
            let opts = SimulationOptions {
                entity_id: format!("e{i:03}"),
                start_date: NaiveDate::from_ymd_opt(2005, 1, 1).unwrap(),
                ..Default::default()
            };
            Ok((opts.entity_id.clone(), simulate_with(&model, 730, i, &opts)?.series))
        })
        .collect::<newsfame::Result<_>>()?;
    let params = ForwardFameParams {
        m_l: 0.0,
        m_u: 5.0,
        w_m: 1,
        w_f: 5,
        x_min: 2.0,
    };
    let (fitted, ccdf) = fit_forward_fame(&map, &params)?;
    println!(
        "\nfitted on {} cohort days ({} distinct values): slope {:.3} intercept {:.3}",
        fitted.cohort_size,
        ccdf.points.len(),
        fitted.tail.slope,
        fitted.tail.intercept
    );
    let rows: Vec<_> = [20.0, 50.0, 100.0]
        .into_iter()
        .map(|t| Ok((fitted, become_famous_prob(&fitted, t)?)))
        .collect::<newsfame::Result<_>>()?;
    println!("{}", forward_fame_table(&rows));
    Ok(())
}
