use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{check_window, fame_from_mean, window_means, FameValue, FrequencySeries};
use crate::error::{Error, Result};

/// A named set of entities, e.g. "Top 50 U.S. Cities".
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GroupFile", into = "GroupFile")]
pub struct GroupDefinition {
    name: String,
    members: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct GroupFile {
    name: String,
    members: Vec<String>,
}

impl TryFrom<GroupFile> for GroupDefinition {
    type Error = Error;

    fn try_from(file: GroupFile) -> Result<Self> {
        GroupDefinition::new(file.name, file.members)
    }
}

impl From<GroupDefinition> for GroupFile {
    fn from(g: GroupDefinition) -> Self {
        GroupFile {
            name: g.name,
            members: g.members,
        }
    }
}

impl GroupDefinition {
    pub fn new<S: Into<String>>(name: impl Into<String>, members: impl IntoIterator<Item = S>) -> Result<Self> {
        let name = name.into();
        let members: Vec<String> = members.into_iter().map(Into::into).collect();
        if members.is_empty() {
            return Err(Error::invalid(format!("group `{name}` has no members")));
        }
        let mut seen = BTreeSet::new();
        for m in &members {
            if !seen.insert(m.as_str()) {
                return Err(Error::invalid(format!("group `{name}` lists `{m}` twice")));
            }
        }
        Ok(GroupDefinition { name, members })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn members(&self) -> &[String] {
        &self.members
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }

    /// Looks up every member's series, failing on the first missing one.
    pub fn resolve<'a>(
        &self,
        series_map: &'a BTreeMap<String, FrequencySeries>,
    ) -> Result<Vec<&'a FrequencySeries>> {
        self.members
            .iter()
            .map(|m| series_map.get(m).ok_or_else(|| Error::MissingEntity(m.clone())))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupFameKind {
    Total,
    Average,
    Maximum,
}

/// Aggregate fame of a group at each time step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupFameSeries {
    pub kind: GroupFameKind,
    pub window: usize,
    /// Date of the last day of the first full window.
    pub first_date: NaiveDate,
    pub values: Vec<FameValue>,
}

/// Raw aggregate (sum, mean or max) of the members' windowed mean
/// frequencies, over the date range every member covers.
///
/// Returns the date of the first aggregate along with the values.
pub fn group_aggregate_frequencies(
    group: &GroupDefinition,
    series_map: &BTreeMap<String, FrequencySeries>,
    kind: GroupFameKind,
    window: usize,
) -> Result<(NaiveDate, Vec<f64>)> {
    check_window(window)?;
    let members = group.resolve(series_map)?;
    let start = members.iter().map(|s| s.start_date()).max().expect("non-empty group");
    let end = members.iter().map(|s| s.end_date()).min().expect("non-empty group");
    if end < start {
        return Err(Error::invalid(format!(
            "members of group `{}` share no common dates",
            group.name()
        )));
    }
    let days = (end - start).num_days() as usize + 1;
    if days < window {
        return Err(Error::InsufficientData {
            needed: window,
            available: days,
        });
    }
    let means: Vec<Vec<f64>> = members
        .iter()
        .map(|s| {
            let offset = s.index_of(start).expect("start inside every member");
            window_means(&s.values()[offset..offset + days], window)
        })
        .collect();
    let steps = days - window + 1;
    let n = members.len() as f64;
    let agg = (0..steps)
        .map(|t| {
            let column = means.iter().map(|m| m[t]);
            match kind {
                GroupFameKind::Total => column.sum(),
                GroupFameKind::Average => column.sum::<f64>() / n,
                GroupFameKind::Maximum => column.fold(f64::NEG_INFINITY, f64::max),
            }
        })
        .collect();
    Ok((start + chrono::Duration::days(window as i64 - 1), agg))
}

/// Group fame over time: aggregate raw windowed frequencies across members,
/// then apply `ln(1 + ·)`.
pub fn group_fame_series(
    group: &GroupDefinition,
    series_map: &BTreeMap<String, FrequencySeries>,
    kind: GroupFameKind,
    window: usize,
) -> Result<GroupFameSeries> {
    let (first_date, agg) = group_aggregate_frequencies(group, series_map, kind, window)?;
    Ok(GroupFameSeries {
        kind,
        window,
        first_date,
        values: agg
            .into_iter()
            .map(|a| FameValue {
                value: fame_from_mean(a),
                window,
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::fame_series;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn day(d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2008, 1, d).unwrap()
    }

    fn map_of(series: Vec<FrequencySeries>) -> BTreeMap<String, FrequencySeries> {
        series.into_iter().map(|s| (s.entity_id().to_string(), s)).collect()
    }

    #[test]
    fn group_definition_rejects_bad_membership() {
        assert!(GroupDefinition::new("g", Vec::<String>::new()).is_err());
        assert!(GroupDefinition::new("g", ["a", "b", "a"]).is_err());
        let g = GroupDefinition::new("g", ["a", "b"]).unwrap();
        assert_eq!(g.size(), 2);
    }

    #[test]
    fn group_json_round_trip_validates() {
        let g: GroupDefinition = serde_json::from_str(r#"{"name":"cities","members":["a","b"]}"#).unwrap();
        assert_eq!(g.members(), ["a", "b"]);
        assert_eq!(serde_json::to_string(&g).unwrap(), r#"{"name":"cities","members":["a","b"]}"#);
        assert!(serde_json::from_str::<GroupDefinition>(r#"{"name":"x","members":[]}"#).is_err());
    }

    #[test]
    fn single_member_group_equals_entity_fame() {
        let s = FrequencySeries::new("a", day(1), vec![1.0, 4.0, 0.0, 9.0, 2.0]).unwrap();
        let map = map_of(vec![s.clone()]);
        let g = GroupDefinition::new("solo", ["a"]).unwrap();
        let own = fame_series(&s, 2).unwrap();
        for kind in [GroupFameKind::Total, GroupFameKind::Average, GroupFameKind::Maximum] {
            let gs = group_fame_series(&g, &map, kind, 2).unwrap();
            assert_eq!(gs.values, own);
            assert_eq!(gs.first_date, day(2));
        }
    }

    #[test]
    fn two_constant_members() {
        let map = map_of(vec![
            FrequencySeries::new("a", day(1), vec![3.0; 4]).unwrap(),
            FrequencySeries::new("b", day(1), vec![1.0; 4]).unwrap(),
        ]);
        let g = GroupDefinition::new("pair", ["a", "b"]).unwrap();
        let at = |kind| group_fame_series(&g, &map, kind, 1).unwrap().values[0].value;
        assert!((at(GroupFameKind::Total) - 5f64.ln()).abs() < 1e-15);
        assert!((at(GroupFameKind::Average) - 3f64.ln()).abs() < 1e-15);
        assert!((at(GroupFameKind::Maximum) - 4f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn missing_member_is_named() {
        let map = map_of(vec![FrequencySeries::new("a", day(1), vec![1.0]).unwrap()]);
        let g = GroupDefinition::new("g", ["a", "ghost"]).unwrap();
        match group_fame_series(&g, &map, GroupFameKind::Total, 1) {
            Err(Error::MissingEntity(m)) => assert_eq!(m, "ghost"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn misaligned_members_use_common_range() {
        let map = map_of(vec![
            FrequencySeries::new("a", day(1), vec![1.0, 2.0, 3.0, 4.0]).unwrap(),
            FrequencySeries::new("b", day(3), vec![10.0, 20.0, 30.0]).unwrap(),
        ]);
        let g = GroupDefinition::new("g", ["a", "b"]).unwrap();
        let (first, agg) = group_aggregate_frequencies(&g, &map, GroupFameKind::Total, 1).unwrap();
        assert_eq!(first, day(3));
        assert_eq!(agg, vec![13.0, 24.0]);
    }

    #[test]
    fn ten_member_group_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n_days = 60;
        let window = 4;
        let members: Vec<FrequencySeries> = (0..10)
            .map(|i| {
                let vals = (0..n_days).map(|_| rng.random_range(0.0..50.0)).collect();
                FrequencySeries::new(format!("e{i}"), day(1), vals).unwrap()
            })
            .collect();
        let map = map_of(members.clone());
        let g = GroupDefinition::new("ten", members.iter().map(|s| s.entity_id().to_string())).unwrap();
        let total = group_fame_series(&g, &map, GroupFameKind::Total, window).unwrap();
        let avg = group_fame_series(&g, &map, GroupFameKind::Average, window).unwrap();
        let max = group_fame_series(&g, &map, GroupFameKind::Maximum, window).unwrap();
        for t in 0..=n_days - window {
            let per: Vec<f64> = members
                .iter()
                .map(|s| s.values()[t..t + window].iter().sum::<f64>() / window as f64)
                .collect();
            let sum: f64 = per.iter().sum();
            let mx = per.iter().cloned().fold(0.0, f64::max);
            assert!((total.values[t].value - (1.0 + sum).ln()).abs() < 1e-12);
            assert!((avg.values[t].value - (1.0 + sum / 10.0).ln()).abs() < 1e-12);
            assert!((max.values[t].value - (1.0 + mx).ln()).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn total_dominates_max_dominates_mean(
            rows in prop::collection::vec(prop::collection::vec(0.0f64..1e4, 12), 1..8),
            window in 1usize..6,
        ) {
            let members: Vec<FrequencySeries> = rows
                .iter()
                .enumerate()
                .map(|(i, r)| FrequencySeries::new(format!("m{i}"), day(1), r.clone()).unwrap())
                .collect();
            let map = map_of(members);
            let g = GroupDefinition::new("p", map.keys().cloned()).unwrap();
            let (_, sum) = group_aggregate_frequencies(&g, &map, GroupFameKind::Total, window).unwrap();
            let (_, mx) = group_aggregate_frequencies(&g, &map, GroupFameKind::Maximum, window).unwrap();
            let (_, mean) = group_aggregate_frequencies(&g, &map, GroupFameKind::Average, window).unwrap();
            for t in 0..sum.len() {
                prop_assert!(sum[t] >= mx[t] * (1.0 - 1e-12));
                prop_assert!(mx[t] >= mean[t] * (1.0 - 1e-12));
            }
            let ft = group_fame_series(&g, &map, GroupFameKind::Total, window).unwrap();
            let fm = group_fame_series(&g, &map, GroupFameKind::Maximum, window).unwrap();
            let fa = group_fame_series(&g, &map, GroupFameKind::Average, window).unwrap();
            for t in 0..sum.len() {
                prop_assert!(ft.values[t].value + 1e-12 >= fm.values[t].value);
                prop_assert!(fm.values[t].value + 1e-12 >= fa.values[t].value);
            }
        }
    }
}
