//! Fame of single entities and of a group: windowed fame, peak fame, group
//! aggregates and the fame-equivalence curve.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use newsfame::io::SeriesMap;
use newsfame::series::{
    average_frequency, fame_equivalence, fame_from_mean, fame_series, group_fame_series, peak_fame, DateRange,
    FrequencySeries, GroupDefinition, GroupFameKind,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> newsfame::Result<()> {
    let start = NaiveDate::from_ymd_opt(2005, 1, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);

    // a handful of entities whose daily counts differ by orders of magnitude
    let levels = [0.5, 0.9, 3.0, 12.0, 60.0];
    let map: SeriesMap = levels
        .iter()
        .enumerate()
        .map(|(i, &level)| {
            let values = (0..730)
                .map(|_| (level * rng.random_range(0.0..2.0f64)).round())
                .collect();
            let id = format!("entity{i}");
            (id.clone(), FrequencySeries::new(id, start, values).unwrap())
        })
        .collect();

    println!("{:<8} {:>9} {:>7} {:>10}", "entity", "avg freq", "fame", "peak fame");
    for s in map.values() {
        let avg = average_frequency(s);
        let period = DateRange::new(s.start_date(), s.end_date())?;
        let peak = peak_fame(s, period, 5)?;
        println!("{:<8} {avg:>9.3} {:>7.3} {:>10.3}", s.entity_id(), fame_from_mean(avg), peak.value);
    }

    // an entity mentioned 0.963 times a day on average
    println!("\nfame at average 0.963: {:.4}", fame_from_mean(0.963));

    let weekly = fame_series(&map["entity3"], 7)?;
    println!("entity3: {} weekly fame values, first {:.3}", weekly.len(), weekly[0].value);

    let group = GroupDefinition::new("all", map.keys().cloned())?;
    for kind in [GroupFameKind::Total, GroupFameKind::Average, GroupFameKind::Maximum] {
        let g = group_fame_series(&group, &map, kind, 30)?;
        let mean = g.values.iter().map(|v| v.value).sum::<f64>() / g.values.len() as f64;
        println!("group {kind:?} fame over 30-day windows: mean {mean:.3}");
    }

    let per_entity: BTreeMap<String, f64> = map
        .iter()
        .map(|(id, s)| (id.clone(), fame_from_mean(average_frequency(s))))
        .collect();
    let curve = fame_equivalence(&group, &per_entity)?;
    for p in curve.iter().filter(|p| [20.0, 40.0, 60.0, 80.0].contains(&p.alpha_pct)) {
        println!("bottom {:>3}% ~ top {:>5.1}%", p.alpha_pct, p.beta_pct);
    }
    Ok(())
}
