#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use chrono::{DateTime, TimeZone, Utc};
use http_body_util::BodyExt;
use serde_json::Value;
use sitebench_core::checks::evaluate_checks;
use sitebench_core::{Catalog, CheckGroup, RunStatus, ScanFacts, ScanRun, Site, SiteList};
use sitebench_fixtures::oracle::{ranking_fixture, OracleRow};
use sitebench_fixtures::scenarios::fixture_filters;
use sitebench_fixtures::World;
use sitebench_scanner::Scanner;
use sitebench_service::api::{router, AppState};
use sitebench_service::orchestrator::{Blacklist, Clock, ManualClock, Orchestrator, OrchestratorSettings, RateLimiter};
use sitebench_service::store::{JobState, Store};
use tower::ServiceExt;

pub const INTERVAL: Duration = Duration::from_secs(600);

pub fn t0() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 3, 1, 12, 0, 0).unwrap()
}

pub fn offline_scanner() -> Scanner {
    let mut dialer = sitebench_scanner::Dialer::new();
    dialer.overrides_only = true;
    Scanner::new(Default::default(), dialer, sitebench_scanner::net::webpki_trust_store(), fixture_filters())
}

pub fn orchestrator_with(scanner: Scanner, clock: Arc<ManualClock>) -> Arc<Orchestrator> {
    let clock: Arc<dyn Clock> = clock;
    Arc::new(Orchestrator {
        store: Arc::new(Store::in_memory().unwrap()),
        scanner: Arc::new(scanner),
        clock,
        limiter: Arc::new(RateLimiter::new(INTERVAL)),
        blacklist: Arc::new(Blacklist::in_memory()),
        settings: OrchestratorSettings::default(),
    })
}

pub fn world_orchestrator(world: &World) -> (Arc<Orchestrator>, Arc<ManualClock>) {
    let clock = Arc::new(ManualClock::new(t0()));
    (orchestrator_with(world.scanner(fixture_filters()), clock.clone()), clock)
}

pub fn site_list(urls: &[&str], honor_robots: bool) -> SiteList {
    SiteList {
        id: String::new(),
        title: "fixture list".into(),
        description: String::new(),
        tags: Default::default(),
        sites: urls.iter().map(|u| Site::new(u.parse().unwrap())).collect(),
        property_schema: vec![],
        access_token_hash: "sha256$00$00".into(),
        private: false,
        rescan_enabled: true,
        honor_robots,
        created_at: t0(),
    }
}

/// Replays job arrivals against the orchestrator's claim loop on a
/// simulated clock. Each arrival is `(host index, path index, seconds
/// since the previous arrival)`. Every claimed job is completed at once.
/// Returns every start as `(host, time)` plus the number of jobs left
/// unstarted.
pub fn simulate_arrivals(arrivals: &[(usize, usize, u64)]) -> (Vec<(String, DateTime<Utc>)>, usize) {
    let clock = Arc::new(ManualClock::new(t0()));
    let orch = orchestrator_with(offline_scanner(), clock.clone());
    let mut starts = Vec::new();
    let drain = |starts: &mut Vec<(String, DateTime<Utc>)>| {
        while let Some(job) = orch.claim().unwrap() {
            starts.push((job.host.clone(), clock.now()));
            orch.store.set_job_state(&job.id, JobState::Done).unwrap();
        }
    };
    for (host, path, gap) in arrivals {
        clock.advance(Duration::from_secs(*gap));
        let url = format!("https://h{host}.test/p{path}").parse().unwrap();
        let site = orch.store.unlisted_site(&url).unwrap();
        orch.enqueue_scan(&site).unwrap();
        drain(&mut starts);
    }
    for _ in 0..2000 {
        if orch.store.jobs_in_state(JobState::Queued).unwrap().is_empty() {
            break;
        }
        clock.advance(Duration::from_secs(60));
        drain(&mut starts);
    }
    let left = orch.store.jobs_in_state(JobState::Queued).unwrap().len();
    (starts, left)
}

/// Per-host start pairs closer than the interval.
pub fn rate_violations(starts: &[(String, DateTime<Utc>)]) -> usize {
    let mut by_host: BTreeMap<&str, Vec<DateTime<Utc>>> = BTreeMap::new();
    for (h, t) in starts {
        by_host.entry(h).or_default().push(*t);
    }
    let gap = chrono::Duration::from_std(INTERVAL).unwrap();
    by_host
        .values_mut()
        .map(|ts| {
            ts.sort();
            ts.windows(2).filter(|w| w[1] - w[0] < gap).count()
        })
        .sum()
}

pub fn app(orch: &Arc<Orchestrator>) -> Router {
    router(AppState { orch: orch.clone() })
}

pub struct Reply {
    pub status: StatusCode,
    pub headers: axum::http::HeaderMap,
    pub body: Vec<u8>,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_slice(&self.body).unwrap_or(Value::Null)
    }

    pub fn text(&self) -> String {
        String::from_utf8_lossy(&self.body).into_owned()
    }
}

pub async fn call(app: &Router, method: Method, uri: &str, token: Option<&str>, body: Option<(&str, String)>) -> Reply {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(t) = token {
        req = req.header("authorization", format!("Bearer {t}"));
    }
    let req = match body {
        Some((ct, b)) => req.header("content-type", ct).body(Body::from(b)).unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    Reply { status, headers, body }
}

pub async fn post_json(app: &Router, uri: &str, token: Option<&str>, v: Value) -> Reply {
    call(app, Method::POST, uri, token, Some(("application/json", v.to_string()))).await
}

pub async fn get(app: &Router, uri: &str, token: Option<&str>) -> Reply {
    call(app, Method::GET, uri, token, None).await
}

/// A list of `urls` stored with a fresh token. Returns the list and the
/// raw token.
pub fn stored_list(orch: &Orchestrator, urls: &[&str], private: bool) -> (sitebench_service::store::StoredList, String) {
    let (raw, hash) = sitebench_service::token::generate();
    let mut list = site_list(urls, false);
    list.access_token_hash = hash;
    list.private = private;
    (orch.store.insert_list(&list).unwrap(), raw)
}

pub fn done_run(site_id: &str, list_id: Option<&str>, at: DateTime<Utc>, facts: ScanFacts, catalog: &Catalog) -> ScanRun {
    ScanRun {
        id: format!("run-{site_id}-{}", at.timestamp_micros()),
        site_ref: site_id.into(),
        list_ref: list_id.map(str::to_string),
        started_at: at,
        finished_at: Some(at),
        status: RunStatus::Done,
        check_results: evaluate_checks(&facts, catalog),
        facts,
        note: None,
    }
}

/// Stores the ranking fixture as a list with one finished run per site.
/// Returns the list id, its token and the expected rows keyed by site id.
pub fn seed_ranking(orch: &Orchestrator, private: bool) -> (String, String, Vec<OracleRow>) {
    let fixture = ranking_fixture();
    let urls: Vec<&str> = fixture.iter().map(|(u, _, _)| u.as_str()).collect();
    let (list, token) = stored_list(orch, &urls, private);
    let mut rows = Vec::new();
    for (site, (url, facts, colors)) in list.sites.iter().zip(fixture) {
        let run = done_run(&site.id, Some(&list.id), t0(), facts, &orch.scanner.catalog);
        orch.store.put_run(&run).unwrap();
        rows.push(OracleRow { site_ref: site.id.clone(), url: site.url.to_string(), colors });
        let _ = url;
    }
    (list.id, token, rows)
}

/// Ranked site ids and colors from a ranking document.
pub fn ranked(doc: &Value) -> Vec<(String, Vec<String>)> {
    doc["rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| {
            let colors = CheckGroup::ALL
                .iter()
                .map(|g| r["group_ratings"][g.to_string()].as_str().unwrap_or("-").to_string())
                .collect();
            (r["site_id"].as_str().unwrap().to_string(), colors)
        })
        .collect()
}

pub fn order_param(order: &[CheckGroup]) -> String {
    order.iter().map(|g| g.to_string()).collect::<Vec<_>>().join(",")
}
