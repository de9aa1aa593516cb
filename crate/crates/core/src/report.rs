//! The per-site results document shared by the HTTP API and `scan --json`.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::catalog::Catalog;
use crate::facts::ScanFacts;
use crate::model::{CheckGroup, CheckResult, Color, Outcome, RunStatus, ScanRun};
use crate::ranking::SiteRating;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckDetail {
    pub check_id: String,
    pub group: CheckGroup,
    pub outcome: Outcome,
    pub critical: bool,
    pub evidence: String,
    pub documentation_key: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: String,
    pub status: RunStatus,
    pub started_at: DateTime<Utc>,
    pub finished_at: Option<DateTime<Utc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl From<&ScanRun> for RunSummary {
    fn from(run: &ScanRun) -> Self {
        RunSummary {
            run_id: run.id.clone(),
            status: run.status,
            started_at: run.started_at,
            finished_at: run.finished_at,
            note: run.note.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteResults {
    pub site_id: String,
    pub url: String,
    pub final_url: Option<String>,
    /// Latest run that produced check results, if any.
    pub run: Option<RunSummary>,
    pub group_ratings: BTreeMap<CheckGroup, Color>,
    pub overall: Option<Color>,
    pub checks: Vec<CheckDetail>,
    pub facts: Option<ScanFacts>,
    /// Every run of the site, oldest first.
    pub history: Vec<RunSummary>,
    pub blacklisted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotation: Option<String>,
}

pub fn check_details(results: &[CheckResult], catalog: &Catalog) -> Vec<CheckDetail> {
    results
        .iter()
        .map(|r| {
            let entry = catalog.get(&r.check_id);
            CheckDetail {
                check_id: r.check_id.clone(),
                group: r.group,
                outcome: r.outcome,
                critical: r.critical,
                evidence: r.evidence.clone(),
                documentation_key: format!("checks/{}", r.check_id),
                description: entry.map(|e| e.description.clone()).unwrap_or_default(),
            }
        })
        .collect()
}

impl SiteResults {
    /// Builds the document from a site's run history (any order). The
    /// newest run with check results supplies the checks, so a blacklisted
    /// site keeps showing its last real scan.
    pub fn build(
        site_id: &str,
        url: &str,
        runs: &[ScanRun],
        blacklist_note: Option<&str>,
        catalog: &Catalog,
    ) -> Self {
        let mut history: Vec<&ScanRun> = runs.iter().collect();
        history.sort_by(|a, b| a.started_at.cmp(&b.started_at).then_with(|| a.id.cmp(&b.id)));
        let latest = history
            .iter()
            .rev()
            .find(|r| r.status == RunStatus::Done && !r.check_results.is_empty())
            .copied();
        let blacklisted = blacklist_note.is_some()
            || history.last().is_some_and(|r| r.status == RunStatus::Blacklisted);
        let annotation = blacklisted.then(|| {
            let mut text = "The site operator opted out of scanning; results are from the last scan before the opt-out.".to_string();
            if let Some(note) = blacklist_note.filter(|n| !n.is_empty()) {
                text.push_str(" Note: ");
                text.push_str(note);
            }
            text
        });
        let rating = latest.map(|r| SiteRating::from_results(site_id, url, &r.check_results));
        SiteResults {
            site_id: site_id.to_string(),
            url: url.to_string(),
            final_url: latest
                .and_then(|r| r.facts.content.as_ref())
                .map(|c| c.final_url.clone()),
            run: latest.map(RunSummary::from),
            group_ratings: rating.as_ref().map(|r| r.group_ratings.clone()).unwrap_or_default(),
            overall: rating.map(|r| r.overall),
            checks: latest
                .map(|r| check_details(&r.check_results, catalog))
                .unwrap_or_default(),
            facts: latest.map(|r| r.facts.clone()),
            history: history.into_iter().map(RunSummary::from).collect(),
            blacklisted,
            annotation,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::check_catalog;
    use crate::checks::evaluate_checks;
    use chrono::TimeZone;

    fn run(id: &str, secs: i64, status: RunStatus) -> ScanRun {
        let started_at = Utc.timestamp_opt(secs, 0).unwrap();
        ScanRun {
            id: id.into(),
            site_ref: "s1".into(),
            list_ref: None,
            started_at,
            finished_at: Some(started_at),
            status,
            facts: ScanFacts::default(),
            check_results: if status == RunStatus::Done {
                evaluate_checks(&ScanFacts::default(), &check_catalog())
            } else {
                vec![]
            },
            note: None,
        }
    }

    #[test]
    fn newest_done_run_wins() {
        let runs = [run("r2", 200, RunStatus::Done), run("r1", 100, RunStatus::Done)];
        let doc = SiteResults::build("s1", "https://a/", &runs, None, &check_catalog());
        assert_eq!(doc.run.unwrap().run_id, "r2");
        assert_eq!(doc.history.iter().map(|h| h.run_id.as_str()).collect::<Vec<_>>(), ["r1", "r2"]);
        assert_eq!(doc.checks.len(), check_catalog().len());
        assert!(!doc.blacklisted);
    }

    #[test]
    fn blacklisted_site_keeps_last_results() {
        let runs = [run("r1", 100, RunStatus::Done), run("r2", 200, RunStatus::Blacklisted)];
        let doc = SiteResults::build("s1", "https://a/", &runs, Some("requested by operator"), &check_catalog());
        assert_eq!(doc.run.unwrap().run_id, "r1");
        assert!(doc.blacklisted);
        assert!(doc.annotation.unwrap().contains("requested by operator"));
    }
}
