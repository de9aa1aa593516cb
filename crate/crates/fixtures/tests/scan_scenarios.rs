//! End-to-end scans of loopback fixture sites.

use sitebench_core::facts::{ProtocolState, ResolverStatus, TlsVersion};
use sitebench_core::{Outcome, SiteUrl};
use sitebench_fixtures::scenarios::*;
use sitebench_fixtures::{Page, PlainHttp, SiteFixture, World};
use sitebench_scanner::fetch::fetch_site;
use sitebench_scanner::tls::scan_web_tls;
use sitebench_scanner::{FetchLimits, ScanError};
use url::Url;

fn site(url: &str) -> SiteUrl {
    url.parse().unwrap()
}

fn outcomes(results: &[sitebench_core::CheckResult]) -> Vec<(String, Outcome)> {
    results.iter().map(|r| (r.check_id.clone(), r.outcome)).collect()
}

fn expected(v: &[(&str, Outcome)]) -> Vec<(String, Outcome)> {
    v.iter().map(|(id, o)| (id.to_string(), *o)).collect()
}

#[tokio::test(flavor = "multi_thread")]
async fn clean_site_passes_every_check() {
    let world = World::start(standard_sites()).await;
    let report = world.scanner(fixture_filters()).scan(&site(CLEAN_URL)).await;
    assert!(report.reachable);
    let failing: Vec<_> = report.results.iter().filter(|r| r.outcome != Outcome::Pass).collect();
    assert!(failing.is_empty(), "{failing:#?}");
    assert_eq!(outcomes(&report.results), expected(&expected_clean()));
}

#[tokio::test(flavor = "multi_thread")]
async fn worst_site_matches_expected_vector() {
    let world = World::start(standard_sites()).await;
    let report = world.scanner(fixture_filters()).scan(&site(WORST_URL)).await;
    assert!(report.reachable);
    let got = outcomes(&report.results);
    let want = expected(&EXPECTED_WORST);
    for (g, w) in got.iter().zip(&want) {
        assert_eq!(g, w, "evidence: {:?}", report.results.iter().find(|r| r.check_id == g.0).map(|r| &r.evidence));
    }
    assert_eq!(got.len(), want.len());
    let content = report.facts.content.as_ref().unwrap();
    assert!(content.tracker_hosts.contains(TRACKER_HOST));
    let tls = report.facts.tls.as_ref().unwrap();
    assert_eq!(tls.protocols[&TlsVersion::Ssl3], ProtocolState::Offered);
    assert_eq!(tls.protocols[&TlsVersion::Tls13], ProtocolState::Refused);
}

#[tokio::test(flavor = "multi_thread")]
async fn scans_are_deterministic() {
    let world = World::start(standard_sites()).await;
    let scanner = world.scanner(fixture_filters());
    let a = scanner.scan(&site(WORST_URL)).await;
    let b = scanner.scan(&site(WORST_URL)).await;
    assert_eq!(a.results, b.results);
    assert_eq!(a.facts, b.facts);
}

#[tokio::test(flavor = "multi_thread")]
async fn web_tls_uses_one_connection_per_probe() {
    let world = World::start(standard_sites()).await;
    let scanner = world.scanner(fixture_filters());
    world.reset_counters();
    let facts = scan_web_tls(&scanner.tls_config(), WORST_HOST).await;
    assert!(facts.https_offered);
    let conns = world.counters(WORST_HOST).connections();
    assert!(conns <= TlsVersion::PROBE_ORDER.len() + 2, "{conns} connections");
}

fn redirect_site(hops: usize) -> SiteFixture {
    let mut s = SiteFixture::new("hops.test");
    for i in 0..hops {
        let next = if i + 1 == hops { "/".to_string() } else { format!("/r{}", i + 1) };
        s = s.page(&format!("/r{i}"), Page::redirect(302, &next));
    }
    s = s.page("/", Page::html("<html><body>end</body></html>"));
    s.plain = PlainHttp::Serve;
    s
}

#[tokio::test(flavor = "multi_thread")]
async fn redirect_chains_are_followed_up_to_the_limit() {
    let world = World::start(vec![redirect_site(2)]).await;
    let client = world.scanner(fixture_filters()).http_client();
    let bundle = fetch_site(&client, &Url::parse("http://hops.test/r0").unwrap(), FetchLimits::default())
        .await
        .unwrap();
    assert_eq!(bundle.final_url.as_str(), "http://hops.test/");
    assert_eq!(bundle.redirect_chain.len(), 2);

    let world = World::start(vec![redirect_site(11)]).await;
    let client = world.scanner(fixture_filters()).http_client();
    let err = fetch_site(&client, &Url::parse("http://hops.test/r0").unwrap(), FetchLimits::default())
        .await
        .unwrap_err();
    assert!(matches!(err, ScanError::TooManyRedirects(_)), "{err:?}");
}

#[tokio::test(flavor = "multi_thread")]
async fn unknown_domain_is_unreachable_without_mail() {
    let world = World::start(standard_sites()).await;
    let report = world.scanner(fixture_filters()).scan(&site("http://nowhere.test/")).await;
    assert!(!report.reachable);
    let dns = report.facts.dns.as_ref().unwrap();
    assert_eq!(dns.status, ResolverStatus::NxDomain);
    assert_eq!(report.facts.mail.as_ref().unwrap().mx_host, None);
}

#[tokio::test(flavor = "multi_thread")]
async fn silent_resolver_marks_dns_checks_as_errors() {
    let mut quiet = SiteFixture::new("quiet.test").page("/", Page::html("<html></html>"));
    quiet.plain = PlainHttp::Serve;
    quiet.zone.silent = true;
    let world = World::start(vec![quiet]).await;
    let report = world.scanner(fixture_filters()).scan(&site("http://quiet.test/")).await;
    assert!(report.reachable);
    assert_eq!(report.facts.dns.as_ref().unwrap().status, ResolverStatus::Timeout);
    assert!(report.facts.mail.is_none());
    for id in ["dnssec", "spf", "dmarc", "mail_starttls"] {
        let r = report.results.iter().find(|r| r.check_id == id).unwrap();
        assert_eq!(r.outcome, Outcome::Error, "{id}");
    }
}

#[tokio::test(flavor = "multi_thread")]
async fn servers_are_geolocated_by_longest_prefix() {
    use sitebench_core::facts::ServerRole;
    use sitebench_core::geo::GeoDb;
    use std::sync::Arc;

    let world = World::start(standard_sites()).await;
    let mut scanner = world.scanner(fixture_filters());
    let db = GeoDb::parse(GEO_FIXTURE).unwrap();
    assert_eq!(db.len(), 10);
    scanner.geodb = Some(Arc::new(db));
    let report = scanner.scan(&site(CLEAN_URL)).await;
    let got: Vec<(ServerRole, String, Option<String>)> = report
        .facts
        .geo
        .unwrap()
        .locations
        .into_iter()
        .map(|l| (l.role, l.host, l.country_code))
        .collect();
    let cc = |s: &str| Some(s.to_string());
    assert_eq!(
        got,
        vec![
            (ServerRole::Web, "clean.test".into(), cc("DE")),
            (ServerRole::Mail, "mx.clean.test".into(), cc("AT")),
            (ServerRole::Ns, "ns1.clean.test".into(), cc("BE")),
        ]
    );
}
