//! Acceptance run. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

mod common;

use std::future::Future;
use std::time::{Duration, Instant};

use axum::http::{Method, StatusCode};
use common::*;
use proptest::strategy::{Strategy, ValueTree};
use proptest::test_runner::TestRunner;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::Value;
use sitebench_core::catalog::check_catalog;
use sitebench_core::filter::parse_filter_list;
use sitebench_core::model::RankingScheme;
use sitebench_core::{evaluate_checks, rank_sites, CheckGroup, Color, RunStatus, SiteRating};
use sitebench_fixtures::oracle::{
    all_group_orders, brute_force_rank, oracle_blocks, oracle_group_color, oracle_overall, ranking_fixture,
    rule_strategy, url_strategy, GenRule, OracleRow,
};
use sitebench_fixtures::scenarios::*;
use sitebench_fixtures::{Page, SiteFixture, World};
use sitebench_service::orchestrator::ROBOTS_DENY_NOTE;

const RANKING_LIMIT: Duration = Duration::from_secs(1);
const FILTER_CASES: u32 = 10_000;
const FILTER_LIMIT: Duration = Duration::from_secs(30);
const COVERAGE_LIMIT: Duration = Duration::from_secs(60);
const RATE_HOSTS: usize = 10;
const RATE_ARRIVALS: usize = 100;
const RATE_TRIALS: u64 = 20;
const RATE_MAX_GAP_SECS: u64 = 400;

type Verdict = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn ranking_semantics() -> Verdict {
    let catalog = check_catalog();
    let mut ratings = Vec::new();
    let mut rows = Vec::new();
    for (i, (url, facts, hand)) in ranking_fixture().into_iter().enumerate() {
        let results = evaluate_checks(&facts, &catalog);
        let site_ref = format!("site-{i}");
        let rating = SiteRating::from_results(&site_ref, &url, &results);
        let mut colors = [Color::Neutral; 4];
        for (k, g) in CheckGroup::ALL.into_iter().enumerate() {
            let in_group: Vec<_> = results.iter().filter(|r| r.group == g).map(|r| (r.outcome, r.critical)).collect();
            colors[k] = oracle_group_color(&in_group);
            check(colors[k] == hand[k] && rating.color(g) == hand[k], || {
                format!("{url} {g}: hand {} oracle {} engine {}", hand[k], colors[k], rating.color(g))
            })?;
        }
        check(rating.overall == oracle_overall(&colors), || format!("{url}: overall {}", rating.overall))?;
        ratings.push(rating);
        rows.push(OracleRow { site_ref, url, colors });
    }
    let orders = all_group_orders();
    for order in &orders {
        let scheme = RankingScheme::new("acceptance", order).map_err(|e| e.to_string())?;
        let got = rank_sites(&ratings, &scheme);
        let want = brute_force_rank(&rows, order);
        check(got == want, || format!("{order:?}: engine {got:?} oracle {want:?}"))?;
    }
    Ok(format!("{} sites, {} orders, exact match", rows.len(), orders.len()))
}

fn filter_oracle() -> Verdict {
    let strategy = (proptest::collection::vec(rule_strategy(), 1..6), url_strategy());
    let mut runner = TestRunner::deterministic();
    let mut mismatches = 0usize;
    let mut first = None;
    for _ in 0..FILTER_CASES {
        let (rules, url) = strategy.new_tree(&mut runner).map_err(|e| e.to_string())?.current();
        let parsed = url::Url::parse(&url).map_err(|e| e.to_string())?;
        let text = rules.iter().map(GenRule::text).collect::<Vec<_>>().join("\n");
        let set = parse_filter_list(&text).filters;
        let want = oracle_blocks(&rules, parsed.as_str());
        if set.matches_url(&parsed) != want || set.matches_linear(&parsed) != want {
            mismatches += 1;
            first.get_or_insert_with(|| format!("rules {text:?} url {parsed}"));
        }
    }
    check(mismatches == 0, || format!("{mismatches} mismatches, first: {}", first.unwrap_or_default()))?;
    Ok(format!("{FILTER_CASES} cases, 0 mismatches"))
}

fn vector(results: &[sitebench_core::CheckResult]) -> Vec<(String, sitebench_core::Outcome)> {
    results.iter().map(|r| (r.check_id.clone(), r.outcome)).collect()
}

fn expected(v: &[(&str, sitebench_core::Outcome)]) -> Vec<(String, sitebench_core::Outcome)> {
    v.iter().map(|(id, o)| (id.to_string(), *o)).collect()
}

async fn check_coverage() -> Verdict {
    let world = World::start(standard_sites()).await;
    let scanner = world.scanner(fixture_filters());
    let worst = scanner.scan(&WORST_URL.parse().unwrap()).await;
    let clean = scanner.scan(&CLEAN_URL.parse().unwrap()).await;
    let (got, want) = (vector(&worst.results), expected(&EXPECTED_WORST));
    for (g, w) in got.iter().zip(&want) {
        check(g == w, || format!("worst {}: got {:?} want {:?}", w.0, g.1, w.1))?;
    }
    check(got.len() == want.len(), || format!("worst: {} results, want {}", got.len(), want.len()))?;
    let (got, want) = (vector(&clean.results), expected(&expected_clean()));
    check(got == want, || "clean vector differs".into())?;

    let worst_rating = SiteRating::from_results("worst", WORST_URL, &worst.results);
    let clean_rating = SiteRating::from_results("clean", CLEAN_URL, &clean.results);
    for g in CheckGroup::ALL {
        check(worst_rating.color(g) == Color::Red, || format!("worst {g} is {}", worst_rating.color(g)))?;
        check(clean_rating.color(g) == Color::Green, || format!("clean {g} is {}", clean_rating.color(g)))?;
    }
    Ok(format!("{} checks per vector, worst red x4, clean green x4", want.len()))
}

fn rate_limiting() -> Verdict {
    let mut total = 0;
    for seed in 0..RATE_TRIALS {
        let mut rng = StdRng::seed_from_u64(seed);
        let arrivals: Vec<(usize, usize, u64)> = (0..RATE_ARRIVALS)
            .map(|_| (rng.random_range(0..RATE_HOSTS), rng.random_range(0..4), rng.random_range(0..RATE_MAX_GAP_SECS)))
            .collect();
        let (starts, left) = simulate_arrivals(&arrivals);
        let violations = rate_violations(&starts);
        check(left == 0, || format!("seed {seed}: {left} jobs never started"))?;
        check(violations == 0, || format!("seed {seed}: {violations} violations"))?;
        total += starts.len();
    }
    Ok(format!(
        "{RATE_TRIALS} trials x {RATE_ARRIVALS} arrivals over {RATE_HOSTS} hosts, {total} starts, 0 violations at {}s",
        INTERVAL.as_secs()
    ))
}

fn robots_site() -> SiteFixture {
    SiteFixture::new("robots.test")
        .page("/", Page::html("<html><body>private</body></html>"))
        .page("/robots.txt", Page::new(200, "User-agent: *\nDisallow: /\n"))
}

async fn blacklist_and_robots() -> Verdict {
    let mut sites = standard_sites();
    sites.push(robots_site());
    let world = World::start(sites).await;
    let (orch, _) = world_orchestrator(&world);
    orch.blacklist.add(CLEAN_HOST, "operator opted out").map_err(|e| e.to_string())?;
    let list = orch.store.insert_list(&site_list(&[CLEAN_URL], false)).map_err(|e| e.to_string())?;
    orch.enqueue_scan(&list.sites[0]).map_err(|e| e.to_string())?;
    orch.run_pending().await.map_err(|e| e.to_string())?;
    let (requests, connections) = (world.total_requests(), world.total_connections());
    check(requests == 0 && connections == 0, || format!("blacklisted: {requests} requests, {connections} connections"))?;

    let list = orch.store.insert_list(&site_list(&["http://robots.test/"], true)).map_err(|e| e.to_string())?;
    orch.enqueue_scan(&list.sites[0]).map_err(|e| e.to_string())?;
    let runs = orch.run_pending().await.map_err(|e| e.to_string())?;
    let run = runs.first().ok_or("robots job did not run")?;
    check(run.status == RunStatus::Failed && run.note.as_deref() == Some(ROBOTS_DENY_NOTE), || {
        format!("robots run {:?} {:?}", run.status, run.note)
    })?;
    let paths = world.counters("robots.test").paths();
    let total = world.total_requests();
    check(paths == ["/robots.txt"] && total == 1, || format!("robots: {total} requests {paths:?}"))?;
    Ok("blacklisted: 0 requests 0 connections; robots deny: 1 request".into())
}

fn rows_of(export: &Value) -> Vec<(Value, Value, Value)> {
    export["ranking"]["rows"]
        .as_array()
        .map(|rows| rows.iter().map(|r| (r["url"].clone(), r["group_ratings"].clone(), r["overall"].clone())).collect())
        .unwrap_or_default()
}

async fn api_round_trip() -> Verdict {
    let world = World::start(standard_sites()).await;
    let (orch, _) = world_orchestrator(&world);
    let app = app(&orch);
    let csv = format!("url,sector\n{CLEAN_URL},retail\n{WORST_URL},retail\n");
    let created = call(&app, Method::POST, "/api/v1/lists?title=Shops", None, Some(("text/csv", csv))).await;
    check(created.status == StatusCode::CREATED, || format!("create: {} {}", created.status, created.text()))?;
    let created = created.json();
    let id = created["list_id"].as_str().ok_or("no list id")?.to_string();
    let token = created["token"].as_str().ok_or("no token")?.to_string();

    let runs = orch.run_pending().await.map_err(|e| e.to_string())?;
    check(runs.len() == 2 && runs.iter().all(|r| r.status == RunStatus::Done), || format!("{} runs done", runs.len()))?;

    let first = get(&app, &format!("/api/v1/export/lists/{id}.json"), None).await;
    check(first.status == StatusCode::OK, || format!("export: {}", first.status))?;
    let imported = call(&app, Method::POST, "/api/v1/import", None, Some(("application/json", first.text()))).await;
    check(imported.status == StatusCode::CREATED, || format!("import: {} {}", imported.status, imported.text()))?;
    let new_id = imported.json()["list_id"].as_str().ok_or("no imported id")?.to_string();
    let second = get(&app, &format!("/api/v1/export/lists/{new_id}.json"), None).await.json();
    let first = first.json();
    let (a, b) = (rows_of(&first), rows_of(&second));
    check(a.len() == 2 && a == b, || format!("rankings differ:\n{a:?}\n{b:?}"))?;
    check(first["ranking"]["order"] == second["ranking"]["order"], || "orders differ".into())?;

    let wrong = "x".repeat(43);
    let list_uri = format!("/api/v1/lists/{id}");
    let scan_uri = format!("/api/v1/lists/{id}/scan");
    let put_body = || Some(("application/json", r#"{"description":"updated"}"#.to_string()));
    let mut cells = 0;
    for (label, method, uri, body, ok) in [
        ("PUT", Method::PUT, &list_uri, true, StatusCode::OK),
        ("POST scan", Method::POST, &scan_uri, false, StatusCode::ACCEPTED),
        ("DELETE", Method::DELETE, &list_uri, false, StatusCode::NO_CONTENT),
    ] {
        for (who, tok, want) in [("none", None, StatusCode::FORBIDDEN), ("wrong", Some(wrong.as_str()), StatusCode::FORBIDDEN), ("right", Some(token.as_str()), ok)] {
            let got = call(&app, method.clone(), uri, tok, if body { put_body() } else { None }).await.status;
            check(got == want, || format!("{label} with {who} token: {got}, want {want}"))?;
            cells += 1;
        }
    }
    Ok(format!("2 ranked rows identical after import; token matrix {cells}/9"))
}

async fn determinism() -> Verdict {
    let world = World::start(standard_sites()).await;
    let scanner = world.scanner(fixture_filters());
    let mut compared = 0;
    for url in [CLEAN_URL, WORST_URL] {
        let site = url.parse().unwrap();
        let a = serde_json::to_vec(&scanner.scan(&site).await.results).map_err(|e| e.to_string())?;
        let b = serde_json::to_vec(&scanner.scan(&site).await.results).map_err(|e| e.to_string())?;
        check(a == b, || format!("{url}: result vectors differ"))?;
        compared += a.len();
    }
    Ok(format!("clean and worst vectors byte-identical ({compared} bytes)"))
}

fn timed(name: &str, limit: Option<Duration>, f: impl FnOnce() -> Verdict) -> bool {
    let start = Instant::now();
    let mut verdict = f();
    let elapsed = start.elapsed();
    if let (Ok(_), Some(limit)) = (&verdict, limit) {
        if elapsed > limit {
            verdict = Err(format!("took {elapsed:.2?}, limit {limit:?}"));
        }
    }
    let (tag, detail) = match &verdict {
        Ok(d) => ("PASS", d),
        Err(d) => ("FAIL", d),
    };
    println!("{tag} {name} ({elapsed:.2?}): {detail}");
    verdict.is_ok()
}

fn block_on<F: Future<Output = Verdict>>(rt: &tokio::runtime::Runtime, f: F) -> Verdict {
    rt.block_on(f)
}

fn main() {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().expect("runtime");
    let results = [
        timed("ranking-semantics", Some(RANKING_LIMIT), ranking_semantics),
        timed("filter-oracle", Some(FILTER_LIMIT), filter_oracle),
        timed("check-coverage", Some(COVERAGE_LIMIT), || block_on(&rt, check_coverage())),
        timed("rate-limiting", None, rate_limiting),
        timed("blacklist-and-robots", None, || block_on(&rt, blacklist_and_robots())),
        timed("api-round-trip", None, || block_on(&rt, api_round_trip())),
        timed("determinism", None, || block_on(&rt, determinism())),
    ];
    let failed = results.iter().filter(|ok| !**ok).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
