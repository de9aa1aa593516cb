//! The canonical fixture sites and the outcomes a scan of each must yield.

use std::net::IpAddr;

use sitebench_core::filter::{parse_filter_list, BUNDLED_FILTER_LIST};
use sitebench_core::{FilterSet, Outcome, TlsVersion};

use crate::pki::CertKind;
use crate::site::{MailServer, Page, PlainHttp, SiteFixture, TlsProfile, Zone};

pub const CLEAN_HOST: &str = "clean.test";
pub const WORST_HOST: &str = "worst.test";
pub const TRACKER_HOST: &str = "tracker.evil.test";
pub const CLEAN_URL: &str = "http://clean.test/";
/// Entered over https so the page's plain-http image counts as mixed content;
/// port 80 still serves without redirecting.
pub const WORST_URL: &str = "https://worst.test/";

/// The bundled tracker list plus the fixture tracker hosts.
pub fn fixture_filter_text() -> String {
    format!("{BUNDLED_FILTER_LIST}\n||{TRACKER_HOST}^\n||ads.evil.test^\n")
}

pub fn fixture_filters() -> FilterSet {
    parse_filter_list(&fixture_filter_text()).filters
}

/// Ten-row CIDR to country table covering the fixture addresses.
pub const GEO_FIXTURE: &str = include_str!("../data/geo10.tsv");

fn ip(s: &str) -> IpAddr {
    s.parse().expect("fixture address")
}

pub fn clean_site() -> SiteFixture {
    let landing = Page::html(
        r#"<!doctype html>
<html><head><title>Clean</title>
<link rel="stylesheet" href="/css/site.css">
<script src="/js/jquery-3.7.1.min.js"></script>
<script src="/js/app.js"></script>
</head><body><img src="/img/logo.png" alt="logo"><p>Nothing to see.</p></body></html>"#,
    )
    .header("content-security-policy", "default-src 'self'")
    .header("x-xss-protection", "1; mode=block")
    .header("x-frame-options", "DENY")
    .header("x-content-type-options", "nosniff")
    .header("strict-transport-security", "max-age=31536000; includeSubDomains")
    .header("referrer-policy", "no-referrer")
    .header("set-cookie", "session=abc123; Secure; HttpOnly");

    let mut site = SiteFixture::new(CLEAN_HOST)
        .page("/", landing)
        .page("/js/jquery-3.7.1.min.js", Page::script("/*! jQuery v3.7.1 | (c) OpenJS Foundation */"))
        .page("/js/app.js", Page::script("document.addEventListener('DOMContentLoaded', function () {});"))
        .page("/css/site.css", Page::new(200, "body { margin: 0 }"))
        .page("/img/logo.png", Page::new(200, vec![0x89, b'P', b'N', b'G']));
    site.plain = PlainHttp::RedirectToHttps;
    site.tls = Some(TlsProfile::modern());
    site.mail = Some(MailServer {
        host: "mx.clean.test".into(),
        greeting: "220 mx.clean.test ESMTP ready".into(),
        starttls: true,
        tls: TlsProfile::modern(),
    });
    site.zone = Zone {
        addrs: vec![ip("192.0.2.10")],
        mx: vec![(10, "mx.clean.test".into())],
        ns: vec![("ns1.clean.test".into(), ip("198.51.100.53"))],
        mx_addrs: vec![("mx.clean.test".into(), ip("192.0.2.25"))],
        txt: vec!["v=spf1 mx -all".into()],
        dmarc: vec!["v=DMARC1; p=reject; rua=mailto:dmarc@clean.test".into()],
        validated: true,
        signed: true,
        silent: false,
    };
    site
}

pub const APACHE_STATUS: &str = "<!DOCTYPE HTML PUBLIC \"-//W3C//DTD HTML 3.2 Final//EN\">\n<html><head>\n<title>Apache Status</title>\n</head><body>\n<h1>Apache Server Status for worst.test (via 127.0.0.1)</h1>\n<dl><dt>Server Version: Apache/2.2.15 (Unix)</dt>\n<dt>Server MPM: Prefork</dt></dl>\n</body></html>\n";
pub const APACHE_INFO: &str = "<!DOCTYPE HTML PUBLIC \"-//W3C//DTD HTML 3.2 Final//EN\">\n<html><head><title>Server Information</title></head>\n<body><h1 align=\"center\">Apache Server Information</h1>\n<dl><dt><a name=\"server\"><strong>Server Settings</strong></a></dt></dl></body></html>\n";
pub const PHPINFO: &str = "<!DOCTYPE html PUBLIC \"-//W3C//DTD XHTML 1.0 Transitional//EN\">\n<html><head><title>phpinfo()</title></head>\n<body><div class=\"center\"><table><tr class=\"h\"><td><h1 class=\"p\">PHP Version 5.3.3</h1></td></tr></table></div></body></html>\n";

fn core_dump() -> Vec<u8> {
    let mut bytes = vec![0x7f, b'E', b'L', b'F', 2, 1, 1, 0];
    bytes.extend_from_slice(&[0; 8]);
    bytes.extend_from_slice(&[4, 0]);
    bytes.resize(256, 0);
    bytes
}

pub fn worst_site() -> SiteFixture {
    let landing = Page::html(format!(
        r#"<html><head>
<meta name="generator" content="WordPress 4.2.2">
<script src="/js/jquery-1.8.2.min.js"></script>
<script src="https://{TRACKER_HOST}/track.js"></script>
<script>document.cookie = "visitor=1; path=/";</script>
</head><body>
<img src="http://images.worst.test/banner.png">
<iframe src="https://ads.evil.test/frame"></iframe>
</body></html>"#
    ))
    .header("server", "Apache/2.2.15 (CentOS)")
    .header("x-powered-by", "PHP/5.3.3")
    .header("x-amz-cf-id", "Qf7Yb2yZ3Xx1")
    .header("set-cookie", "PHPSESSID=7d1f; path=/");

    let mut site = SiteFixture::new(WORST_HOST)
        .page("/", landing)
        .page("/js/jquery-1.8.2.min.js", Page::script("/*! jQuery v1.8.2 jquery.com | jquery.org/license */"))
        .page("/server-status/", Page::html(APACHE_STATUS))
        .page("/server-info/", Page::html(APACHE_INFO))
        .page("/test.php", Page::html(PHPINFO))
        .page("/phpinfo.php", Page::html(PHPINFO))
        .page("/.git/HEAD", Page::new(200, "ref: refs/heads/master\n"))
        .page("/.svn/entries", Page::new(200, "10\n\ndir\n1234\nhttp://svn.worst.test/repo/trunk\n"))
        .page("/core", Page::new(200, core_dump()).header("content-type", "application/octet-stream"));
    site.plain = PlainHttp::Serve;
    site.tls = Some(TlsProfile {
        versions: vec![TlsVersion::Ssl3, TlsVersion::Tls10, TlsVersion::Tls12],
        cert: CertKind::Expired,
    });
    site.mail = Some(MailServer {
        host: "mx.worst.test".into(),
        greeting: "220 mx.worst.test ESMTP Exim 4.80 Mon, 01 Jan 2018 00:00:00 +0000".into(),
        starttls: false,
        tls: TlsProfile::modern(),
    });
    site.zone = Zone {
        addrs: vec![ip("203.0.113.5")],
        mx: vec![(10, "mx.worst.test".into())],
        ns: vec![("ns1.worst.test".into(), ip("203.0.113.53"))],
        mx_addrs: vec![("mx.worst.test".into(), ip("203.0.113.25"))],
        ..Zone::default()
    };
    site
}

pub fn tracker_site() -> SiteFixture {
    let script = Page::script(
        r#"(function () {
  var c = document.createElement('canvas');
  var ctx = c.getContext('2d');
  ctx.fillText('sitebench', 2, 2);
  var id = c.toDataURL();
  var plugins = navigator.plugins.length;
  new Image().src = 'https://tracker.evil.test/p.gif?id=' + id.length + '&p=' + plugins;
})();"#,
    )
    .header("set-cookie", "uid=4242; Domain=evil.test; Path=/");
    let mut site = SiteFixture::new(TRACKER_HOST).page("/track.js", script);
    site.zone.addrs = vec![ip("198.51.100.7")];
    site
}

/// Everything the clean and worst scans need.
pub fn standard_sites() -> Vec<SiteFixture> {
    vec![clean_site(), worst_site(), tracker_site()]
}

/// Every check passes on the clean fixture.
pub fn expected_clean() -> Vec<(&'static str, Outcome)> {
    EXPECTED_WORST.iter().map(|(id, _)| (*id, Outcome::Pass)).collect()
}

/// Expected outcome of every catalog check on the worst-case fixture, in
/// catalog order.
pub const EXPECTED_WORST: [(&str, Outcome); 35] = [
    ("third_party_trackers", Outcome::Fail),
    ("third_party_hosts", Outcome::Fail),
    ("cookies_third_party", Outcome::Fail),
    ("fingerprinting", Outcome::Fail),
    ("cdn_usage", Outcome::Fail),
    ("header_csp", Outcome::Fail),
    ("header_xxss", Outcome::Fail),
    ("header_xfo", Outcome::Fail),
    ("header_xcto", Outcome::Fail),
    ("header_referrer_policy", Outcome::Fail),
    ("leak_server_status", Outcome::Fail),
    ("leak_server_info", Outcome::Fail),
    ("leak_test_php", Outcome::Fail),
    ("leak_phpinfo_php", Outcome::Fail),
    ("leak_git", Outcome::Fail),
    ("leak_svn", Outcome::Fail),
    ("leak_core", Outcome::Fail),
    ("server_banner", Outcome::Fail),
    ("generator_version", Outcome::Fail),
    ("outdated_libs", Outcome::Fail),
    ("dnssec", Outcome::Fail),
    ("spf", Outcome::Fail),
    ("dmarc", Outcome::Fail),
    // TLS is offered, just badly.
    ("https_offered", Outcome::Pass),
    ("https_redirect", Outcome::Fail),
    ("cert_valid", Outcome::Fail),
    ("hsts", Outcome::Fail),
    ("tls_legacy_protocols", Outcome::Fail),
    ("tls_poodle", Outcome::Fail),
    ("mixed_content", Outcome::Fail),
    ("mail_starttls", Outcome::Fail),
    ("mail_cert_valid", Outcome::Fail),
    // Without STARTTLS no mail protocol can be probed.
    ("mail_legacy_protocols", Outcome::Neutral),
    ("mail_poodle", Outcome::Neutral),
    ("mail_banner", Outcome::Fail),
];
