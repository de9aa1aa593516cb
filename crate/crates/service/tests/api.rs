mod common;

use std::sync::Arc;
use std::time::Duration;

use axum::http::{Method, StatusCode};
use common::*;
use serde_json::{json, Value};
use sitebench_core::CheckGroup;
use sitebench_fixtures::oracle::{all_group_orders, all_pass_facts, brute_force_rank};
use sitebench_service::orchestrator::ManualClock;
use sitebench_service::views::{ExportDoc, CSV_SITE_COLUMNS};

fn fresh() -> (Arc<sitebench_service::Orchestrator>, Arc<ManualClock>, axum::Router) {
    let clock = Arc::new(ManualClock::new(t0()));
    let orch = orchestrator_with(offline_scanner(), clock.clone());
    let app = app(&orch);
    (orch, clock, app)
}

async fn create(app: &axum::Router, body: Value) -> (String, String) {
    let r = post_json(app, "/api/v1/lists", None, body).await;
    assert_eq!(r.status, StatusCode::CREATED, "{}", r.text());
    let v = r.json();
    (v["list_id"].as_str().unwrap().into(), v["token"].as_str().unwrap().into())
}

#[tokio::test]
async fn create_from_json_returns_a_token_once() {
    let (orch, _, app) = fresh();
    let r = post_json(
        &app,
        "/api/v1/lists",
        None,
        json!({
            "title": "Banks",
            "tags": ["finance"],
            "sites": ["Bank.example", { "url": "https://other.example/x", "properties": { "country": "DE" } }]
        }),
    )
    .await;
    assert_eq!(r.status, StatusCode::CREATED);
    let v = r.json();
    let token = v["token"].as_str().unwrap();
    assert_eq!(token.len(), 43);
    assert_eq!(v["site_ids"].as_array().unwrap().len(), 2);
    assert_eq!(v["property_schema"], json!(["country"]));
    assert_eq!(v["jobs"].as_array().unwrap().len(), 2);

    let list = get(&app, &format!("/api/v1/lists/{}", v["list_id"].as_str().unwrap()), None).await;
    assert_eq!(list.status, StatusCode::OK);
    let body = list.text();
    assert!(!body.contains(token));
    assert!(!body.contains("sha256$"));
    assert_eq!(list.json()["sites"][0]["url"], "https://bank.example/");
    assert_eq!(orch.store.jobs_in_state(sitebench_service::store::JobState::Queued).unwrap().len(), 2);
}

#[tokio::test]
async fn create_from_csv_takes_property_columns() {
    let (_, _, app) = fresh();
    let csv = "url,students\nhttps://uni-a.example,1200\nhttps://uni-b.example,\n".to_string();
    let r = call(&app, Method::POST, "/api/v1/lists?title=Universities&tags=edu,de", None, Some(("text/csv", csv))).await;
    assert_eq!(r.status, StatusCode::CREATED, "{}", r.text());
    let v = r.json();
    assert_eq!(v["property_schema"], json!(["students"]));
    let list = get(&app, &format!("/api/v1/lists/{}", v["list_id"].as_str().unwrap()), None).await.json();
    assert_eq!(list["title"], "Universities");
    assert_eq!(list["tags"], json!(["de", "edu"]));
    assert_eq!(list["sites"][0]["properties"]["students"], "1200");
}

#[tokio::test]
async fn bad_create_bodies_are_rejected() {
    let (_, _, app) = fresh();
    let empty = post_json(&app, "/api/v1/lists", None, json!({ "title": "t", "sites": [] })).await;
    assert_eq!(empty.status, StatusCode::UNPROCESSABLE_ENTITY);
    let bad_url = post_json(&app, "/api/v1/lists", None, json!({ "title": "t", "sites": ["ftp://x.example"] })).await;
    assert_eq!(bad_url.status, StatusCode::BAD_REQUEST);
    let garbage = call(&app, Method::POST, "/api/v1/lists", None, Some(("application/json", "{".into()))).await;
    assert_eq!(garbage.status, StatusCode::BAD_REQUEST);
    assert!(garbage.json()["error"].is_string());
}

#[tokio::test]
async fn search_hides_private_lists() {
    let (_, _, app) = fresh();
    create(&app, json!({ "title": "Bank list", "tags": ["finance"], "sites": ["a.example"] })).await;
    create(&app, json!({ "title": "Secret banks", "private": true, "sites": ["b.example"] })).await;
    create(&app, json!({ "title": "Schools", "tags": ["edu"], "sites": ["c.example"] })).await;

    let all = get(&app, "/api/v1/lists", None).await.json();
    assert_eq!(all["total"], 2);
    let banks = get(&app, "/api/v1/lists?q=bank", None).await.json();
    assert_eq!(banks["total"], 1);
    assert_eq!(banks["items"][0]["title"], "Bank list");
    let edu = get(&app, "/api/v1/lists?tag=edu", None).await.json();
    assert_eq!(edu["items"][0]["title"], "Schools");
}

#[tokio::test]
async fn token_matrix() {
    let (_, _, app) = fresh();
    let (public, pub_token) = create(&app, json!({ "title": "open", "sites": ["a.example"] })).await;
    let (private, priv_token) = create(&app, json!({ "title": "closed", "private": true, "sites": ["b.example"] })).await;
    let wrong = "A".repeat(43);

    for (id, token, private) in [(&public, &pub_token, false), (&private, &priv_token, true)] {
        let reads = [
            format!("/api/v1/lists/{id}"),
            format!("/api/v1/lists/{id}/ranking"),
            format!("/api/v1/lists/{id}/stats"),
            format!("/api/v1/export/lists/{id}.json"),
            format!("/api/v1/export/lists/{id}.csv"),
        ];
        for uri in &reads {
            let anon = get(&app, uri, None).await.status;
            let bad = get(&app, uri, Some(&wrong)).await.status;
            let good = get(&app, uri, Some(token)).await.status;
            let denied = if private { StatusCode::FORBIDDEN } else { StatusCode::OK };
            assert_eq!((anon, bad, good), (denied, denied, StatusCode::OK), "{uri}");
        }
        let put = |t: Option<String>| {
            let app = app.clone();
            let uri = format!("/api/v1/lists/{id}");
            async move { call(&app, Method::PUT, &uri, t.as_deref(), Some(("application/json", r#"{"title":"renamed"}"#.into()))).await.status }
        };
        assert_eq!(put(None).await, StatusCode::FORBIDDEN);
        assert_eq!(put(Some(wrong.clone())).await, StatusCode::FORBIDDEN);
        assert_eq!(put(Some(token.clone())).await, StatusCode::OK);
        // A token only unlocks its own list.
        let other = if private { &pub_token } else { &priv_token };
        assert_eq!(put(Some(other.clone())).await, StatusCode::FORBIDDEN);

        let scan = format!("/api/v1/lists/{id}/scan");
        assert_eq!(call(&app, Method::POST, &scan, None, None).await.status, StatusCode::FORBIDDEN);
        assert_eq!(call(&app, Method::POST, &scan, Some(token), None).await.status, StatusCode::ACCEPTED);

        let del = format!("/api/v1/lists/{id}");
        assert_eq!(call(&app, Method::DELETE, &del, Some(&wrong), None).await.status, StatusCode::FORBIDDEN);
        assert_eq!(call(&app, Method::DELETE, &del, Some(token), None).await.status, StatusCode::NO_CONTENT);
        assert_eq!(get(&app, &del, Some(token)).await.status, StatusCode::NOT_FOUND);
    }
}

#[tokio::test]
async fn update_replaces_sites_and_queues_new_ones() {
    let (_, _, app) = fresh();
    let (id, token) = create(&app, json!({ "title": "t", "sites": ["a.example"] })).await;
    let r = call(
        &app,
        Method::PUT,
        &format!("/api/v1/lists/{id}"),
        Some(&token),
        Some(("application/json", json!({ "sites": ["a.example", "b.example"], "tags": ["x"] }).to_string())),
    )
    .await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.text());
    let v = r.json();
    assert_eq!(v["sites"].as_array().unwrap().len(), 2);
    assert_eq!(v["tags"], json!(["x"]));
    assert_eq!(v["title"], "t");
}

#[tokio::test]
async fn ranking_matches_the_brute_force_oracle_for_every_order() {
    let (orch, _, app) = fresh();
    let (id, _, rows) = seed_ranking(&orch, false);
    for order in all_group_orders() {
        let doc = get(&app, &format!("/api/v1/lists/{id}/ranking?order={}", order_param(&order)), None).await;
        assert_eq!(doc.status, StatusCode::OK);
        let got = ranked(&doc.json());
        let ids: Vec<String> = got.iter().map(|(s, _)| s.clone()).collect();
        assert_eq!(ids, brute_force_rank(&rows, &order), "{order:?}");
        for (site, colors) in &got {
            let row = rows.iter().find(|r| &r.site_ref == site).unwrap();
            let want: Vec<String> = row.colors.iter().map(|c| c.to_string()).collect();
            assert_eq!(colors, &want, "colors do not depend on the order");
        }
    }
}

#[tokio::test]
async fn ranking_rejects_non_permutations() {
    let (orch, _, app) = fresh();
    let (id, _, _) = seed_ranking(&orch, false);
    for bad in ["NoTrack,NoTrack,EncWeb,EncMail", "NoTrack,Attacks", "Speed,NoTrack,EncWeb,EncMail"] {
        let r = get(&app, &format!("/api/v1/lists/{id}/ranking?order={bad}"), None).await;
        assert_eq!(r.status, StatusCode::BAD_REQUEST, "{bad}");
    }
}

#[tokio::test]
async fn unscanned_sites_rank_last() {
    let (orch, _, app) = fresh();
    let (list, _) = stored_list(&orch, &["https://a.example", "https://z.example", "https://m.example"], false);
    let z = &list.sites[1];
    let mut facts = all_pass_facts("z.example");
    facts.content.as_mut().unwrap().cookies_third_party = 1;
    orch.store.put_run(&done_run(&z.id, Some(&list.id), t0(), facts, &orch.scanner.catalog)).unwrap();
    let doc = get(&app, &format!("/api/v1/lists/{}/ranking", list.id), None).await.json();
    let urls: Vec<&str> = doc["rows"].as_array().unwrap().iter().map(|r| r["url"].as_str().unwrap()).collect();
    assert_eq!(urls, ["https://z.example/", "https://a.example/", "https://m.example/"]);
    assert_eq!(doc["rows"][1]["scanned"], false);
    assert!(doc["rows"][1]["overall"].is_null());

    let stats = get(&app, &format!("/api/v1/lists/{}/stats", list.id), None).await.json();
    assert_eq!(stats["unscanned"], 2);
}

#[tokio::test]
async fn site_results_show_the_latest_run_and_history() {
    let (orch, _, app) = fresh();
    let (list, _) = stored_list(&orch, &["https://a.example"], false);
    let site = &list.sites[0];
    let catalog = orch.scanner.catalog.clone();
    let mut first = all_pass_facts("a.example");
    first.content.as_mut().unwrap().cookies_third_party = 3;
    orch.store.put_run(&done_run(&site.id, Some(&list.id), t0(), first, &catalog)).unwrap();
    let later = t0() + chrono::Duration::days(7);
    orch.store.put_run(&done_run(&site.id, Some(&list.id), later, all_pass_facts("a.example"), &catalog)).unwrap();

    let r = get(&app, &format!("/api/v1/sites/{}/results", site.id), None).await;
    assert_eq!(r.status, StatusCode::OK);
    let v = r.json();
    assert_eq!(v["history"].as_array().unwrap().len(), 2);
    assert_eq!(v["overall"], "green");
    assert_eq!(v["run"]["run_id"], format!("run-{}-{}", site.id, later.timestamp_micros()));
    assert_eq!(v["checks"].as_array().unwrap().len(), catalog.entries().len());
    assert_eq!(v["blacklisted"], false);

    orch.blacklist.add("a.example", "asked to be left out").unwrap();
    let v = get(&app, &format!("/api/v1/sites/{}/results", site.id), None).await.json();
    assert_eq!(v["blacklisted"], true);
    assert!(v["annotation"].as_str().unwrap().contains("asked to be left out"));

    assert_eq!(get(&app, "/api/v1/sites/nope/results", None).await.status, StatusCode::NOT_FOUND);
    assert_eq!(get(&app, "/api/v1/runs/nope", None).await.status, StatusCode::NOT_FOUND);
    let run = get(&app, &format!("/api/v1/runs/run-{}-{}", site.id, later.timestamp_micros()), None).await;
    assert_eq!(run.status, StatusCode::OK);
}

#[tokio::test]
async fn export_documents_and_csv_layout() {
    let (orch, _, app) = fresh();
    let (id, _, rows) = seed_ranking(&orch, false);
    let r = get(&app, &format!("/api/v1/export/lists/{id}.json"), None).await;
    assert_eq!(r.status, StatusCode::OK);
    let doc: ExportDoc = serde_json::from_slice(&r.body).unwrap();
    assert_eq!(doc.sites.len(), rows.len());
    assert!(doc.sites.iter().all(|s| s.latest_run.is_some()));
    assert_eq!(doc.catalog.len(), orch.scanner.catalog.entries().len());

    let csv = get(&app, &format!("/api/v1/export/lists/{id}.csv"), None).await;
    assert!(csv.headers["content-type"].to_str().unwrap().starts_with("text/csv"));
    let text = csv.text();
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader.headers().unwrap().clone();
    assert_eq!(header.len(), CSV_SITE_COLUMNS.len() + doc.catalog.len());
    assert_eq!(&header[0], "site_id");
    assert_eq!(reader.records().count(), rows.len());

    assert_eq!(get(&app, &format!("/api/v1/export/lists/{id}.xml"), None).await.status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn import_reproduces_the_ranking() {
    let (orch, _, app) = fresh();
    let (id, _, _) = seed_ranking(&orch, false);
    let exported = get(&app, &format!("/api/v1/export/lists/{id}.json"), None).await.text();
    let r = call(&app, Method::POST, "/api/v1/import", None, Some(("application/json", exported.clone()))).await;
    assert_eq!(r.status, StatusCode::CREATED, "{}", r.text());
    let new_id = r.json()["list_id"].as_str().unwrap().to_string();
    assert_ne!(new_id, id);
    let a: Value = serde_json::from_str(&exported).unwrap();
    let b = get(&app, &format!("/api/v1/export/lists/{new_id}.json"), None).await.json();
    let strip = |d: &Value| -> Vec<(Value, Value, Value)> {
        d["ranking"]["rows"].as_array().unwrap().iter().map(|r| (r["url"].clone(), r["group_ratings"].clone(), r["overall"].clone())).collect()
    };
    assert_eq!(strip(&a), strip(&b));
    assert_eq!(a["ranking"]["order"], b["ranking"]["order"]);

    let bad = call(&app, Method::POST, "/api/v1/import", None, Some(("application/json", json!({ "format": "other" }).to_string()))).await;
    assert_eq!(bad.status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn single_scan_is_rate_limited_per_host() {
    let (orch, clock, app) = fresh();
    let scan = |url: &str| post_json(&app, "/api/v1/scan", None, json!({ "url": url }));
    let first = scan("https://one.example/").await;
    assert_eq!(first.status, StatusCode::ACCEPTED);
    assert!(first.json()["run_id"].is_string());
    // Still queued: a second request for the host is refused.
    let again = scan("https://one.example/other").await;
    assert_eq!(again.status, StatusCode::TOO_MANY_REQUESTS);
    assert!(again.headers.contains_key("retry-after"));

    let job = orch.claim().unwrap().unwrap();
    orch.store.set_job_state(&job.id, sitebench_service::store::JobState::Done).unwrap();
    let soon = scan("https://one.example/").await;
    assert_eq!(soon.status, StatusCode::TOO_MANY_REQUESTS);
    let wait: u64 = soon.headers["retry-after"].to_str().unwrap().parse().unwrap();
    assert_eq!(wait, INTERVAL.as_secs());
    clock.advance(INTERVAL + Duration::from_secs(1));
    assert_eq!(scan("https://one.example/").await.status, StatusCode::ACCEPTED);

    assert_eq!(scan("not a url at all").await.status, StatusCode::BAD_REQUEST);
    orch.blacklist.add("quiet.example", "").unwrap();
    let opted_out = scan("https://quiet.example/").await;
    assert_eq!(opted_out.status, StatusCode::OK);
    assert_eq!(opted_out.json()["state"], "blacklisted");
}

#[tokio::test]
async fn catalog_endpoint_lists_every_check() {
    let (orch, _, app) = fresh();
    let v = get(&app, "/api/v1/checks", None).await.json();
    let checks = v["checks"].as_array().unwrap();
    assert_eq!(checks.len(), orch.scanner.catalog.entries().len());
    for g in CheckGroup::ALL {
        assert!(checks.iter().any(|c| c["group"] == g.to_string()));
    }
}

#[test]
fn published_openapi_document_is_current() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../docs/openapi.json");
    let on_disk = std::fs::read_to_string(path).expect("docs/openapi.json");
    assert_eq!(on_disk, sitebench_service::openapi::pretty());
}

#[test]
fn openapi_covers_every_route() {
    let doc = sitebench_service::openapi::document();
    let paths = doc["paths"].as_object().unwrap();
    for p in [
        "/api/v1/lists",
        "/api/v1/lists/{id}",
        "/api/v1/lists/{id}/ranking",
        "/api/v1/lists/{id}/stats",
        "/api/v1/lists/{id}/scan",
        "/api/v1/sites/{id}/results",
        "/api/v1/runs/{id}",
        "/api/v1/export/lists/{file}",
        "/api/v1/import",
        "/api/v1/scan",
        "/api/v1/checks",
    ] {
        assert!(paths.contains_key(p), "{p}");
    }
}
