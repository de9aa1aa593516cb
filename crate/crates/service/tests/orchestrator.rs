mod common;

use std::sync::atomic::Ordering;
use std::sync::Arc;
use std::time::Duration;

use chrono::Utc;
use common::*;
use proptest::prelude::*;
use sitebench_core::{CheckGroup, Outcome, RunStatus, ScanFacts, ScanRun};
use sitebench_fixtures::scenarios::{clean_site, standard_sites, CLEAN_HOST, CLEAN_URL};
use sitebench_fixtures::{Page, PlainHttp, SiteFixture, World};
use sitebench_service::orchestrator::{Clock, ManualClock, ROBOTS_DENY_NOTE};
use sitebench_service::store::JobState;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn per_host_starts_respect_the_interval(
        arrivals in prop::collection::vec((0usize..10, 0usize..4, 0u64..400), 100),
    ) {
        let (starts, left) = simulate_arrivals(&arrivals);
        prop_assert_eq!(rate_violations(&starts), 0);
        prop_assert_eq!(left, 0, "every queued job eventually starts");
    }
}

#[test]
fn duplicate_enqueue_returns_the_active_job() {
    let orch = orchestrator_with(offline_scanner(), Arc::new(ManualClock::new(t0())));
    let site = orch.store.unlisted_site(&"https://a.example".parse().unwrap()).unwrap();
    let first = orch.enqueue_scan(&site).unwrap();
    let second = orch.enqueue_scan(&site).unwrap();
    assert_eq!(first.job().state, JobState::Queued);
    assert_eq!(first.job().id, second.job().id);
    assert!(!second.is_new());
}

fn robots_site(host: &str) -> SiteFixture {
    let mut s = SiteFixture::new(host)
        .page("/", Page::html("<html><body>hi</body></html>"))
        .page("/robots.txt", Page::new(200, "User-agent: *\nDisallow: /\n"));
    s.plain = PlainHttp::Serve;
    s
}

#[tokio::test(flavor = "multi_thread")]
async fn blacklisted_site_is_never_contacted() {
    let world = World::start(standard_sites()).await;
    let (orch, _) = world_orchestrator(&world);
    orch.blacklist.add(CLEAN_HOST, "operator asked").unwrap();
    let list = orch.store.insert_list(&site_list(&[CLEAN_URL], false)).unwrap();
    let job = orch.enqueue_scan(&list.sites[0]).unwrap();
    assert_eq!(job.job().state, JobState::Blacklisted);
    assert!(orch.run_pending().await.unwrap().is_empty());
    assert_eq!(world.total_requests(), 0);
    assert_eq!(world.total_connections(), 0);
    assert_eq!(world.dns.queries.load(Ordering::SeqCst), 0);
    let run = orch.store.run(&job.job().run_id).unwrap().unwrap();
    assert_eq!(run.status, RunStatus::Blacklisted);
    assert_eq!(run.note.as_deref(), Some("operator asked"));
}

#[tokio::test(flavor = "multi_thread")]
async fn honored_robots_deny_costs_exactly_one_request() {
    let world = World::start(vec![robots_site("robots.test")]).await;
    let (orch, _) = world_orchestrator(&world);
    let list = orch.store.insert_list(&site_list(&["http://robots.test/"], true)).unwrap();
    orch.enqueue_scan(&list.sites[0]).unwrap();
    let runs = orch.run_pending().await.unwrap();
    assert_eq!(runs.len(), 1);
    assert_eq!(runs[0].status, RunStatus::Failed);
    assert_eq!(runs[0].note.as_deref(), Some(ROBOTS_DENY_NOTE));
    let counters = world.counters("robots.test");
    assert_eq!(counters.requests(), 1);
    assert_eq!(counters.paths(), vec!["/robots.txt".to_string()]);
}

#[tokio::test(flavor = "multi_thread")]
async fn robots_is_ignored_unless_the_list_asks() {
    let world = World::start(vec![robots_site("robots.test")]).await;
    let (orch, _) = world_orchestrator(&world);
    let list = orch.store.insert_list(&site_list(&["http://robots.test/"], false)).unwrap();
    orch.enqueue_scan(&list.sites[0]).unwrap();
    let runs = orch.run_pending().await.unwrap();
    assert_eq!(runs[0].status, RunStatus::Done);
    assert!(!world.counters("robots.test").paths().contains(&"/robots.txt".to_string()));
}

#[tokio::test(flavor = "multi_thread")]
async fn missing_robots_allows() {
    let world = World::start(standard_sites()).await;
    let (orch, _) = world_orchestrator(&world);
    let decision = orch.check_robots(&CLEAN_URL.parse().unwrap(), true).await;
    assert_eq!(decision, sitebench_core::robots::RobotsDecision::Allow);
}

#[tokio::test(flavor = "multi_thread")]
async fn dead_smtp_still_completes_the_run() {
    let mut site = clean_site();
    // The MX resolves but nothing listens on port 25.
    site.mail = None;
    let world = World::start(vec![site]).await;
    let (orch, _) = world_orchestrator(&world);
    let list = orch.store.insert_list(&site_list(&[CLEAN_URL], false)).unwrap();
    orch.enqueue_scan(&list.sites[0]).unwrap();
    let runs = orch.run_pending().await.unwrap();
    let run = &runs[0];
    assert_eq!(run.status, RunStatus::Done);
    assert!(run.finished_at.is_some());
    for r in run.check_results.iter().filter(|r| r.group == CheckGroup::EncMail) {
        assert!(matches!(r.outcome, Outcome::Error | Outcome::Neutral | Outcome::Fail), "{} {:?}", r.check_id, r.outcome);
    }
    for r in run.check_results.iter().filter(|r| r.group == CheckGroup::EncWeb) {
        assert_eq!(r.outcome, Outcome::Pass, "{}", r.check_id);
    }
}

fn finished_run(site_id: &str, list_id: &str, at: chrono::DateTime<Utc>) -> ScanRun {
    ScanRun {
        id: uuid_like(at),
        site_ref: site_id.into(),
        list_ref: Some(list_id.into()),
        started_at: at,
        finished_at: Some(at),
        status: RunStatus::Done,
        facts: ScanFacts::default(),
        check_results: vec![],
        note: None,
    }
}

fn uuid_like(at: chrono::DateTime<Utc>) -> String {
    format!("run-{}", at.timestamp_micros())
}

#[test]
fn rescans_follow_the_interval_and_the_list_switch() {
    let clock = Arc::new(ManualClock::new(t0()));
    let orch = orchestrator_with(offline_scanner(), clock.clone());
    let day = chrono::Duration::days(1);
    let old = orch.store.insert_list(&site_list(&["https://old.example"], false)).unwrap();
    let fresh = orch.store.insert_list(&site_list(&["https://fresh.example"], false)).unwrap();
    let mut off = site_list(&["https://off.example"], false);
    off.rescan_enabled = false;
    let off = orch.store.insert_list(&off).unwrap();
    let now = clock.now();
    orch.store.put_run(&finished_run(&old.sites[0].id, &old.id, now - day * 8)).unwrap();
    orch.store.put_run(&finished_run(&fresh.sites[0].id, &fresh.id, now - day)).unwrap();
    orch.store.put_run(&finished_run(&off.sites[0].id, &off.id, now - day * 30)).unwrap();

    let jobs = orch.schedule_rescans().unwrap();
    assert_eq!(jobs.len(), 1);
    assert_eq!(jobs[0].site_id, old.sites[0].id);
    // Already queued: no second job.
    assert!(orch.schedule_rescans().unwrap().is_empty());
}

#[test]
fn orphaned_jobs_are_requeued() {
    let clock = Arc::new(ManualClock::new(t0()));
    let orch = orchestrator_with(offline_scanner(), clock.clone());
    let site = orch.store.unlisted_site(&"https://a.example".parse().unwrap()).unwrap();
    orch.enqueue_scan(&site).unwrap();
    let job = orch.claim().unwrap().unwrap();
    assert_eq!(orch.requeue_stale().unwrap(), 0);
    clock.advance(Duration::from_secs(3600));
    assert_eq!(orch.requeue_stale().unwrap(), 1);
    assert_eq!(orch.store.job(&job.id).unwrap().unwrap().state, JobState::Queued);
}
