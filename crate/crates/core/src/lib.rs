//! Pure domain logic for sitebench: the shared model, the check catalog,
//! tracker filter lists, fact extraction from fetched pages, DNS policy
//! parsing, GeoIP lookup and the rating/ranking engine.
//!
//! Nothing in this crate performs network I/O. The `sitebench-scanner`
//! crate produces the raw inputs (response bundles, DNS answers, TLS probe
//! outcomes) and everything here turns them into facts, check results and
//! rankings.

pub mod catalog;
pub mod checks;
pub mod content;
pub mod csv_list;
pub mod dns;
pub mod error;
pub mod facts;
pub mod filter;
pub mod geo;
pub mod html;
pub mod leaks;
pub mod model;
pub mod psl;
pub mod ranking;
pub mod report;
pub mod robots;
pub mod signatures;
pub mod site_url;
pub mod version;

pub use catalog::{Catalog, CatalogEntry};
pub use error::{Error, Result};
pub use facts::{
    ContentFacts, DnsFacts, GeoFacts, LeakFacts, MailTlsFacts, ProtocolState, ScanFacts,
    TlsFacts, TlsVersion,
};
pub use filter::{FilterRule, FilterSet, RuleKind};
pub use model::{
    CheckGroup, CheckResult, Color, Outcome, RankingScheme, RunStatus, ScanRun, Site, SiteList,
};
pub use ranking::{aggregate_list_stats, evaluate_checks, rank_sites, rate_group, SiteRating};
pub use site_url::{normalize_url, SiteUrl};
