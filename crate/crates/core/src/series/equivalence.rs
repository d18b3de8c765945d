use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::GroupDefinition;
use crate::error::{Error, Result};

/// The bottom `alpha_pct` percent of a group holds as much accumulated fame
/// as the top `beta_pct` percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquivalencePoint {
    pub alpha_pct: f64,
    pub beta_pct: f64,
}

/// Fame-equivalence curve for `alpha_pct = 1, 2, ..., 100`.
///
/// Entities are sorted by fame (ties by entity id). Both the bottom and the
/// top accumulations are piecewise linear in the number of entities, so a
/// percentage that cuts through an entity takes the matching fraction of its
/// fame. For each bottom mass the largest top share not exceeding it is
/// reported, which makes the curve monotone and ends it at (100, 100).
pub fn fame_equivalence(
    group: &GroupDefinition,
    per_entity_fame: &BTreeMap<String, f64>,
) -> Result<Vec<EquivalencePoint>> {
    if group.size() < 2 {
        return Err(Error::invalid("fame equivalence needs at least two entities"));
    }
    let mut ranked: Vec<(&str, f64)> = Vec::with_capacity(group.size());
    for m in group.members() {
        let f = *per_entity_fame.get(m).ok_or_else(|| Error::MissingEntity(m.clone()))?;
        if !(f.is_finite() && f >= 0.0) {
            return Err(Error::invalid(format!("fame of `{m}` is {f}")));
        }
        ranked.push((m.as_str(), f));
    }
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(b.0)));

    let total: f64 = ranked.iter().map(|r| r.1).sum();
    if total <= 0.0 {
        return Err(Error::DegenerateSample(
            "every entity has zero fame; equivalence is undefined".into(),
        ));
    }
    let n = ranked.len();
    let ascending: Vec<f64> = ranked.iter().map(|r| r.1).collect();
    let descending: Vec<f64> = ascending.iter().rev().copied().collect();
    let bottom_prefix = prefix_sums(&ascending);
    let top_prefix = prefix_sums(&descending);

    Ok((1..=100)
        .map(|alpha| {
            let units = alpha as f64 * n as f64 / 100.0;
            let mass = accumulate(&ascending, &bottom_prefix, units);
            let top_units = invert_top(&descending, &top_prefix, mass, total);
            EquivalencePoint {
                alpha_pct: alpha as f64,
                beta_pct: 100.0 * top_units / n as f64,
            }
        })
        .collect())
}

fn prefix_sums(xs: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(xs.len() + 1);
    out.push(0.0);
    let mut acc = 0.0;
    for x in xs {
        acc += x;
        out.push(acc);
    }
    out
}

/// Accumulated fame of the first `units` entities (fractional allowed).
fn accumulate(sorted: &[f64], prefix: &[f64], units: f64) -> f64 {
    let whole = (units.floor() as usize).min(sorted.len());
    let frac = units - whole as f64;
    let partial = if whole < sorted.len() { frac * sorted[whole] } else { 0.0 };
    prefix[whole] + partial
}

/// Largest `v` with `top(v) <= mass`.
fn invert_top(descending: &[f64], prefix: &[f64], mass: f64, total: f64) -> f64 {
    let n = descending.len();
    if mass >= total * (1.0 - 1e-12) {
        return n as f64;
    }
    // first k with prefix[k + 1] > mass
    let k = prefix[1..].partition_point(|&p| p <= mass);
    if k >= n {
        return n as f64;
    }
    k as f64 + ((mass - prefix[k]) / descending[k]).clamp(0.0, 1.0)
}
