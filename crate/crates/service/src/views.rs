//! Read models built from the store: rankings, per-site results and the
//! open-data export document.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sitebench_core::report::SiteResults;
use sitebench_core::{rank_sites, Catalog, CheckGroup, Color, RankingScheme, ScanRun, SiteRating};

use crate::orchestrator::Blacklist;
use crate::store::{Store, StoreError, StoredList, StoredSite};

pub const EXPORT_FORMAT: &str = "sitebench.list.v1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankingRow {
    pub site_id: String,
    pub url: String,
    pub final_url: Option<String>,
    pub properties: BTreeMap<String, Option<String>>,
    /// False for sites without a completed scan; their colors are unknown.
    pub scanned: bool,
    pub group_ratings: BTreeMap<CheckGroup, Color>,
    pub overall: Option<Color>,
    pub run_id: Option<String>,
    pub scanned_at: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ranking {
    pub list_id: String,
    pub order: [CheckGroup; 4],
    pub rows: Vec<RankingRow>,
}

pub fn site_results(
    store: &Store,
    catalog: &Catalog,
    blacklist: &Blacklist,
    site: &StoredSite,
) -> Result<SiteResults, StoreError> {
    let runs = store.runs_for_site(&site.id)?;
    let note = blacklist.lookup(&site.url);
    Ok(SiteResults::build(&site.id, site.url.as_str(), &runs, note.as_deref(), catalog))
}

/// Rows ranked under `scheme`; never-scanned sites follow in URL order.
pub fn ranking(
    store: &Store,
    catalog: &Catalog,
    blacklist: &Blacklist,
    list: &StoredList,
    scheme: &RankingScheme,
) -> Result<Ranking, StoreError> {
    let mut rows: BTreeMap<String, RankingRow> = BTreeMap::new();
    let mut rated = Vec::new();
    let mut unscanned = Vec::new();
    for site in &list.sites {
        let results = site_results(store, catalog, blacklist, site)?;
        let row = RankingRow {
            site_id: site.id.clone(),
            url: site.url.to_string(),
            final_url: results.final_url.clone().or_else(|| site.final_url.clone()),
            properties: site.properties.clone(),
            scanned: results.overall.is_some(),
            group_ratings: results.group_ratings.clone(),
            overall: results.overall,
            run_id: results.run.as_ref().map(|r| r.run_id.clone()),
            scanned_at: results.run.as_ref().and_then(|r| r.finished_at),
        };
        match row.overall {
            Some(overall) => rated.push(SiteRating {
                site_ref: site.id.clone(),
                url: row.url.clone(),
                group_ratings: row.group_ratings.clone(),
                overall,
            }),
            None => unscanned.push((row.url.clone(), site.id.clone())),
        }
        rows.insert(site.id.clone(), row);
    }
    unscanned.sort();
    let order = rank_sites(&rated, scheme)
        .into_iter()
        .chain(unscanned.into_iter().map(|(_, id)| id));
    Ok(Ranking {
        list_id: list.id.clone(),
        order: scheme.group_order,
        rows: order.filter_map(|id| rows.remove(&id)).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportList {
    pub id: String,
    pub title: String,
    pub description: String,
    pub tags: BTreeSet<String>,
    pub property_schema: Vec<String>,
    pub private: bool,
    pub rescan_enabled: bool,
    pub honor_robots: bool,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportSite {
    pub site_id: String,
    pub url: String,
    pub final_url: Option<String>,
    pub properties: BTreeMap<String, Option<String>>,
    /// Latest completed run, with facts and check results.
    pub latest_run: Option<ScanRun>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportDoc {
    pub format: String,
    pub list: ExportList,
    /// Catalog check ids in catalog order.
    pub catalog: Vec<String>,
    pub sites: Vec<ExportSite>,
    pub ranking: Ranking,
}

pub fn export_doc(
    store: &Store,
    catalog: &Catalog,
    blacklist: &Blacklist,
    list: &StoredList,
) -> Result<ExportDoc, StoreError> {
    let ranking = ranking(store, catalog, blacklist, list, &RankingScheme::default())?;
    let mut sites = Vec::new();
    for site in &list.sites {
        let latest_run = store
            .runs_for_site(&site.id)?
            .into_iter()
            .rev()
            .find(|r| r.status == sitebench_core::RunStatus::Done && !r.check_results.is_empty());
        sites.push(ExportSite {
            site_id: site.id.clone(),
            url: site.url.to_string(),
            final_url: site.final_url.clone(),
            properties: site.properties.clone(),
            latest_run,
        });
    }
    Ok(ExportDoc {
        format: EXPORT_FORMAT.into(),
        list: ExportList {
            id: list.id.clone(),
            title: list.title.clone(),
            description: list.description.clone(),
            tags: list.tags.clone(),
            property_schema: list.property_schema.clone(),
            private: list.private,
            rescan_enabled: list.rescan_enabled,
            honor_robots: list.honor_robots,
            created_at: list.created_at,
        },
        catalog: catalog.entries().iter().map(|e| e.check_id.clone()).collect(),
        sites,
        ranking,
    })
}

/// Leading CSV columns before the properties and per-check columns.
pub const CSV_SITE_COLUMNS: [&str; 9] = [
    "site_id",
    "url",
    "final_url",
    "scanned_at",
    "overall",
    "NoTrack",
    "Attacks",
    "EncWeb",
    "EncMail",
];

/// One row per site in ranking order: site columns, one column per list
/// property, then one outcome column per catalog check.
pub fn export_csv(doc: &ExportDoc) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let header: Vec<&str> = CSV_SITE_COLUMNS
        .iter()
        .copied()
        .chain(doc.list.property_schema.iter().map(String::as_str))
        .chain(doc.catalog.iter().map(String::as_str))
        .collect();
    w.write_record(&header).expect("in-memory write");
    let sites: BTreeMap<&str, &ExportSite> = doc.sites.iter().map(|s| (s.site_id.as_str(), s)).collect();
    for row in &doc.ranking.rows {
        let site = sites.get(row.site_id.as_str());
        let color = |c: Option<Color>| c.map(|c| c.to_string()).unwrap_or_default();
        let mut rec = vec![
            row.site_id.clone(),
            row.url.clone(),
            row.final_url.clone().unwrap_or_default(),
            row.scanned_at.map(|t| t.to_rfc3339()).unwrap_or_default(),
            color(row.overall),
        ];
        rec.extend(CheckGroup::ALL.iter().map(|g| color(row.group_ratings.get(g).copied())));
        rec.extend(
            doc.list
                .property_schema
                .iter()
                .map(|k| row.properties.get(k).cloned().flatten().unwrap_or_default()),
        );
        let outcomes: BTreeMap<&str, String> = site
            .and_then(|s| s.latest_run.as_ref())
            .map(|r| {
                r.check_results
                    .iter()
                    .map(|c| (c.check_id.as_str(), c.outcome.to_string()))
                    .collect()
            })
            .unwrap_or_default();
        rec.extend(doc.catalog.iter().map(|id| outcomes.get(id.as_str()).cloned().unwrap_or_default()));
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8 csv")
}
