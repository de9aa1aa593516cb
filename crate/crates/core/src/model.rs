//! Shared domain types.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::facts::ScanFacts;
use crate::site_url::SiteUrl;

/// Themed bundle of checks rated with a single color.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CheckGroup {
    NoTrack,
    Attacks,
    EncWeb,
    EncMail,
}

impl CheckGroup {
    pub const ALL: [CheckGroup; 4] = [
        CheckGroup::NoTrack,
        CheckGroup::Attacks,
        CheckGroup::EncWeb,
        CheckGroup::EncMail,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CheckGroup::NoTrack => "NoTrack",
            CheckGroup::Attacks => "Attacks",
            CheckGroup::EncWeb => "EncWeb",
            CheckGroup::EncMail => "EncMail",
        }
    }
}

impl fmt::Display for CheckGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CheckGroup {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        CheckGroup::ALL
            .into_iter()
            .find(|g| g.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown check group {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Pass,
    Fail,
    Neutral,
    Error,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Pass => "pass",
            Outcome::Fail => "fail",
            Outcome::Neutral => "neutral",
            Outcome::Error => "error",
        })
    }
}

/// Group rating color. The derived order is the ranking order:
/// green sorts first, red last, neutral between yellow and red.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum Color {
    Green,
    Yellow,
    Neutral,
    Red,
}

impl Color {
    pub const ALL: [Color; 4] = [Color::Green, Color::Yellow, Color::Neutral, Color::Red];

    pub fn as_str(self) -> &'static str {
        match self {
            Color::Green => "green",
            Color::Yellow => "yellow",
            Color::Neutral => "neutral",
            Color::Red => "red",
        }
    }
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Evaluated outcome of one catalog check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckResult {
    pub check_id: String,
    pub group: CheckGroup,
    pub outcome: Outcome,
    pub critical: bool,
    pub evidence: String,
}

/// A site and its user-defined properties.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Site {
    pub url: SiteUrl,
    #[serde(default)]
    pub final_url: Option<String>,
    #[serde(default)]
    pub properties: BTreeMap<String, Option<String>>,
}

impl Site {
    pub fn new(url: SiteUrl) -> Self {
        Site {
            url,
            final_url: None,
            properties: BTreeMap::new(),
        }
    }
}

/// A named collection of sites that are scanned and ranked together.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiteList {
    pub id: String,
    pub title: String,
    pub description: String,
    pub tags: BTreeSet<String>,
    pub sites: Vec<Site>,
    pub property_schema: Vec<String>,
    pub access_token_hash: String,
    pub private: bool,
    pub rescan_enabled: bool,
    pub honor_robots: bool,
    pub created_at: DateTime<Utc>,
}

impl SiteList {
    /// Checks the list invariants and fills missing property values with
    /// explicit nulls so every site carries exactly the schema's keys.
    pub fn validate(&mut self) -> Result<()> {
        if self.sites.is_empty() {
            return Err(Error::EmptyList);
        }
        if self.access_token_hash.is_empty() {
            return Err(Error::MissingTokenHash);
        }
        let mut seen = HashSet::new();
        for site in &self.sites {
            if !seen.insert(site.url.as_str().to_string()) {
                return Err(Error::DuplicateSite(site.url.to_string()));
            }
        }
        let schema: BTreeSet<&String> = self.property_schema.iter().collect();
        for site in &mut self.sites {
            site.properties.retain(|k, _| schema.contains(k));
            for key in &self.property_schema {
                site.properties.entry(key.clone()).or_insert(None);
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Queued,
    Running,
    Done,
    Failed,
    Blacklisted,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::Queued => "queued",
            RunStatus::Running => "running",
            RunStatus::Done => "done",
            RunStatus::Failed => "failed",
            RunStatus::Blacklisted => "blacklisted",
        }
    }
}

impl FromStr for RunStatus {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "queued" => RunStatus::Queued,
            "running" => RunStatus::Running,
            "done" => RunStatus::Done,
            "failed" => RunStatus::Failed,
            "blacklisted" => RunStatus::Blacklisted,
            other => return Err(format!("unknown status {other:?}")),
        })
    }
}

/// One execution of all scan modules against one site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRun {
    pub id: String,
    pub site_ref: String,
    pub list_ref: Option<String>,
    pub started_at: DateTime<Utc>,
    pub finished_at: Option<DateTime<Utc>>,
    pub status: RunStatus,
    pub facts: ScanFacts,
    pub check_results: Vec<CheckResult>,
    /// Free-text annotation, e.g. why a run failed or was skipped.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Kind tag for ranking schemes. Only group-order ranking ships.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    #[default]
    GroupOrder,
}

/// A priority order over the check groups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankingScheme {
    pub name: String,
    #[serde(default)]
    pub kind: SchemeKind,
    pub group_order: [CheckGroup; 4],
}

impl Default for RankingScheme {
    fn default() -> Self {
        RankingScheme {
            name: "default".into(),
            kind: SchemeKind::GroupOrder,
            group_order: CheckGroup::ALL,
        }
    }
}

impl RankingScheme {
    pub fn new(name: impl Into<String>, order: &[CheckGroup]) -> Result<Self> {
        let describe = || {
            order
                .iter()
                .map(|g| g.as_str())
                .collect::<Vec<_>>()
                .join(",")
        };
        if order.len() != 4 {
            return Err(Error::InvalidGroupOrder(describe()));
        }
        let unique: HashSet<_> = order.iter().collect();
        if unique.len() != 4 {
            return Err(Error::InvalidGroupOrder(describe()));
        }
        Ok(RankingScheme {
            name: name.into(),
            kind: SchemeKind::GroupOrder,
            group_order: [order[0], order[1], order[2], order[3]],
        })
    }

    /// Parses a comma-separated group order such as `EncWeb,NoTrack,Attacks,EncMail`.
    pub fn parse_order(text: &str) -> Result<Self> {
        let groups = text
            .split(',')
            .map(|s| s.parse::<CheckGroup>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| Error::InvalidGroupOrder(text.to_string()))?;
        RankingScheme::new("custom", &groups).map_err(|_| Error::InvalidGroupOrder(text.to_string()))
    }
}
