//! Group colors, overall ratings and list ranking.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use crate::checks::evaluate_checks;
use crate::error::{Error, Result};
use crate::model::{CheckGroup, CheckResult, Color, Outcome, RankingScheme};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiteRating {
    pub site_ref: String,
    /// Normalized URL, used as the final tie-break.
    pub url: String,
    pub group_ratings: BTreeMap<CheckGroup, Color>,
    pub overall: Color,
}

impl SiteRating {
    /// Rates every group from one run's results. A group with no results
    /// under the active catalog is rated neutral.
    pub fn from_results(site_ref: impl Into<String>, url: impl Into<String>, results: &[CheckResult]) -> Self {
        let group_ratings: BTreeMap<CheckGroup, Color> = CheckGroup::ALL
            .into_iter()
            .map(|g| {
                let in_group: Vec<CheckResult> =
                    results.iter().filter(|r| r.group == g).cloned().collect();
                (g, rate_group(&in_group).unwrap_or(Color::Neutral))
            })
            .collect();
        let overall = overall_color(&group_ratings);
        SiteRating {
            site_ref: site_ref.into(),
            url: url.into(),
            group_ratings,
            overall,
        }
    }

    pub fn color(&self, group: CheckGroup) -> Color {
        self.group_ratings.get(&group).copied().unwrap_or(Color::Neutral)
    }
}

/// Rates one group's results.
pub fn rate_group(results: &[CheckResult]) -> Result<Color> {
    if results.is_empty() {
        return Err(Error::EmptyGroup);
    }
    if results.iter().any(|r| r.critical && r.outcome == Outcome::Fail) {
        return Ok(Color::Red);
    }
    if results.iter().all(|r| r.outcome == Outcome::Pass) {
        return Ok(Color::Green);
    }
    if results
        .iter()
        .all(|r| matches!(r.outcome, Outcome::Neutral | Outcome::Error))
    {
        return Ok(Color::Neutral);
    }
    Ok(Color::Yellow)
}

/// The worst group color; neutral when there are no groups.
pub fn overall_color(groups: &BTreeMap<CheckGroup, Color>) -> Color {
    groups.values().copied().max().unwrap_or(Color::Neutral)
}

/// Row comparison under a scheme: colors in priority order, then URL.
pub fn compare_ratings(a: &SiteRating, b: &SiteRating, scheme: &RankingScheme) -> Ordering {
    scheme
        .group_order
        .iter()
        .map(|&g| a.color(g).cmp(&b.color(g)))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.url.cmp(&b.url))
        .then_with(|| a.site_ref.cmp(&b.site_ref))
}

/// Site refs ordered best first.
pub fn rank_sites(ratings: &[SiteRating], scheme: &RankingScheme) -> Vec<String> {
    let mut rows: Vec<&SiteRating> = ratings.iter().collect();
    rows.sort_by(|a, b| compare_ratings(a, b, scheme));
    rows.into_iter().map(|r| r.site_ref.clone()).collect()
}

pub type ColorCounts = BTreeMap<Color, usize>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ListStats {
    pub sites: usize,
    pub groups: BTreeMap<CheckGroup, ColorCounts>,
    pub overall: ColorCounts,
}

fn zero_counts() -> ColorCounts {
    Color::ALL.into_iter().map(|c| (c, 0)).collect()
}

/// Per-group color counts plus overall counts.
pub fn aggregate_list_stats(ratings: &[SiteRating]) -> ListStats {
    let mut groups: BTreeMap<CheckGroup, ColorCounts> =
        CheckGroup::ALL.into_iter().map(|g| (g, zero_counts())).collect();
    let mut overall = zero_counts();
    for r in ratings {
        for g in CheckGroup::ALL {
            *groups.get_mut(&g).unwrap().entry(r.color(g)).or_default() += 1;
        }
        *overall.entry(r.overall).or_default() += 1;
    }
    ListStats {
        sites: ratings.len(),
        groups,
        overall,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use CheckGroup::*;
    use Color::*;

    fn result(outcome: Outcome, critical: bool) -> CheckResult {
        CheckResult {
            check_id: "x".into(),
            group: NoTrack,
            outcome,
            critical,
            evidence: String::new(),
        }
    }

    fn rating(url: &str, colors: [Color; 4]) -> SiteRating {
        let group_ratings: BTreeMap<_, _> = CheckGroup::ALL.into_iter().zip(colors).collect();
        SiteRating {
            site_ref: url.into(),
            url: url.into(),
            overall: overall_color(&group_ratings),
            group_ratings,
        }
    }

    #[test]
    fn group_colors() {
        use Outcome::{Fail, Pass};
        assert_eq!(rate_group(&[result(Pass, true), result(Pass, false)]).unwrap(), Green);
        assert_eq!(rate_group(&[result(Fail, true), result(Pass, false)]).unwrap(), Red);
        assert_eq!(rate_group(&[result(Fail, false), result(Pass, true)]).unwrap(), Yellow);
        let all_neutral = [result(Outcome::Neutral, true), result(Outcome::Error, false)];
        assert_eq!(rate_group(&all_neutral).unwrap(), Neutral);
        assert_eq!(rate_group(&[result(Outcome::Neutral, false), result(Pass, false)]).unwrap(), Yellow);
        assert!(matches!(rate_group(&[]), Err(crate::Error::EmptyGroup)));
    }

    #[test]
    fn overall_is_worst_group() {
        assert_eq!(rating("a", [Green, Yellow, Green, Green]).overall, Yellow);
        assert_eq!(rating("a", [Green, Yellow, Neutral, Green]).overall, Neutral);
        assert_eq!(rating("a", [Red, Yellow, Neutral, Green]).overall, Red);
    }

    #[test]
    fn lexicographic_by_group_order() {
        let a = rating("https://a/", [Green, Green, Green, Green]);
        let b = rating("https://b/", [Green, Yellow, Green, Green]);
        let input = vec![b.clone(), a.clone()];
        assert_eq!(rank_sites(&input, &RankingScheme::default()), ["https://a/", "https://b/"]);
        let late = RankingScheme::new("t", &[NoTrack, EncWeb, EncMail, Attacks]).unwrap();
        assert_eq!(rank_sites(&input, &late), ["https://a/", "https://b/"]);
    }

    #[test]
    fn ties_break_by_url() {
        let input = vec![rating("https://z/", [Green; 4]), rating("https://m/", [Green; 4])];
        assert_eq!(rank_sites(&input, &RankingScheme::default()), ["https://m/", "https://z/"]);
    }

    #[test]
    fn stats_count_colors() {
        let empty = aggregate_list_stats(&[]);
        assert!(empty.groups.values().all(|c| c.values().all(|&n| n == 0)));
        let s = aggregate_list_stats(&[rating("a", [Green; 4]), rating("b", [Green, Red, Green, Neutral])]);
        assert_eq!(s.groups[&NoTrack][&Green], 2);
        assert_eq!(s.groups[&Attacks][&Red], 1);
        assert_eq!(s.overall[&Red], 1);
    }
}
