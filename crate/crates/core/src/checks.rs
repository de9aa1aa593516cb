//! Evaluation of raw scan facts into catalog check results.

use std::sync::LazyLock;

use regex::Regex;

use crate::catalog::Catalog;
use crate::facts::{
    ContentFacts, DmarcPolicy, DnsFacts, DnssecSignal, LeakFacts, MailTlsFacts, ProtocolMap,
    ProtocolState, ResolverStatus, ScanFacts, SpfPolicy, TlsFacts, TlsVersion,
};
use crate::leaks::LEAK_PATHS;
use crate::model::{CheckResult, Outcome};
use crate::version::is_outdated;

static VERSION_BANNER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)[a-z][a-z0-9_-]*[/ ]v?\d+(\.\d+)+").expect("regex"));

/// True when a banner names a product together with a dotted version,
/// e.g. `Apache/2.2.15` or `Postfix 3.4.13`.
pub fn discloses_version(banner: &str) -> bool {
    VERSION_BANNER.is_match(banner)
}

/// The part of an SMTP greeting after the reply code and the host name.
pub fn smtp_greeting_text(greeting: &str) -> &str {
    let line = greeting.lines().next().unwrap_or("");
    let rest = line.get(3..).unwrap_or("").trim_start_matches(['-', ' ']);
    match rest.split_once(char::is_whitespace) {
        Some((_host, tail)) => tail.trim(),
        None => "",
    }
}

type Eval = (Outcome, String);

fn pass(evidence: impl Into<String>) -> Eval {
    (Outcome::Pass, evidence.into())
}

fn fail(evidence: impl Into<String>) -> Eval {
    (Outcome::Fail, evidence.into())
}

fn neutral(evidence: impl Into<String>) -> Eval {
    (Outcome::Neutral, evidence.into())
}

fn missing(module: &str) -> Eval {
    (Outcome::Error, format!("{module} scan produced no facts"))
}

fn list<'a>(items: impl IntoIterator<Item = &'a String>) -> String {
    items.into_iter().map(String::as_str).collect::<Vec<_>>().join(", ")
}

fn content_check(id: &str, c: &ContentFacts) -> Eval {
    let header = |name: &str| c.header(name).map(str::trim);
    match id {
        "third_party_trackers" if c.tracker_hosts.is_empty() => pass("no tracker hosts"),
        "third_party_trackers" => fail(list(&c.tracker_hosts)),
        "third_party_hosts" if c.third_party_hosts.is_empty() => pass("no third-party hosts"),
        "third_party_hosts" => fail(list(&c.third_party_hosts)),
        "cookies_third_party" => {
            let ev = format!("{} third-party, {} first-party", c.cookies_third_party, c.cookies_first_party);
            if c.cookies_third_party == 0 { pass(ev) } else { fail(ev) }
        }
        "fingerprinting" if c.fingerprint_hits.is_empty() => pass("no fingerprinting patterns"),
        "fingerprinting" => fail(
            c.fingerprint_hits
                .iter()
                .map(|h| h.signature_id.as_str())
                .collect::<Vec<_>>()
                .join(", "),
        ),
        "cdn_usage" if c.cdn_hosts.is_empty() => pass("no CDN detected"),
        "cdn_usage" => fail(
            c.cdn_hosts
                .iter()
                .map(|h| format!("{} ({})", h.host, h.cdn))
                .collect::<Vec<_>>()
                .join(", "),
        ),
        "header_csp" => match header("Content-Security-Policy") {
            Some(v) if !v.is_empty() => pass(v),
            _ => fail("Content-Security-Policy missing"),
        },
        "header_xxss" => match header("X-XSS-Protection") {
            Some(v) if !v.is_empty() && !v.starts_with('0') => pass(v),
            Some(v) => fail(format!("X-XSS-Protection: {v}")),
            None => fail("X-XSS-Protection missing"),
        },
        "header_xfo" => match header("X-Frame-Options") {
            Some(v) if v.eq_ignore_ascii_case("deny") || v.eq_ignore_ascii_case("sameorigin") => pass(v),
            Some(v) => fail(format!("X-Frame-Options: {v}")),
            None => fail("X-Frame-Options missing"),
        },
        "header_xcto" => match header("X-Content-Type-Options") {
            Some(v) if v.eq_ignore_ascii_case("nosniff") => pass(v),
            Some(v) => fail(format!("X-Content-Type-Options: {v}")),
            None => fail("X-Content-Type-Options missing"),
        },
        "header_referrer_policy" => match header("Referrer-Policy") {
            Some(v) if !v.is_empty() && !v.eq_ignore_ascii_case("unsafe-url") => pass(v),
            Some(v) => fail(format!("Referrer-Policy: {v}")),
            None => fail("Referrer-Policy missing"),
        },
        "server_banner" => match &c.server_banner {
            Some(b) if discloses_version(b) => fail(format!("Server: {b}")),
            Some(b) => pass(format!("Server: {b}")),
            None => pass("no Server header"),
        },
        "generator_version" => match &c.generator {
            Some(g) if g.chars().any(|ch| ch.is_ascii_digit()) => fail(format!("generator: {g}")),
            Some(g) => pass(format!("generator: {g}")),
            None => pass("no generator meta tag"),
        },
        "outdated_libs" => {
            let old: Vec<String> = c
                .script_libs
                .iter()
                .filter(|l| is_outdated(&l.version, &l.latest))
                .map(|l| format!("{} {} (latest {})", l.name, l.version, l.latest))
                .collect();
            if old.is_empty() {
                pass(format!("{} libraries up to date", c.script_libs.len()))
            } else {
                fail(old.join(", "))
            }
        }
        "mixed_content" if c.mixed_content_urls.is_empty() => pass("no plain-HTTP subresources"),
        "mixed_content" => fail(list(&c.mixed_content_urls)),
        _ => unreachable!("not a content check: {id}"),
    }
}

fn leak_check(id: &str, l: &LeakFacts) -> Eval {
    let path = LEAK_PATHS
        .iter()
        .find(|(_, c)| *c == id)
        .map(|(p, _)| *p)
        .expect("leak check has a path");
    match l.finding(path) {
        None => (Outcome::Error, format!("{path} was not probed")),
        Some(f) if f.detected => fail(format!(
            "{path}: HTTP {} matched {:?}",
            f.http_status,
            f.signature.as_deref().unwrap_or_default()
        )),
        Some(f) if f.http_status == 0 => pass(format!("{path}: no response")),
        Some(f) => pass(format!("{path}: HTTP {}", f.http_status)),
    }
}

fn dns_check(id: &str, d: &DnsFacts) -> Eval {
    if d.status == ResolverStatus::Timeout {
        return (Outcome::Error, "resolver timed out".into());
    }
    match id {
        "dnssec" => match d.dnssec_signal {
            DnssecSignal::Validated => pass("answers validated by the resolver"),
            DnssecSignal::SignedUnvalidated => fail("RRSIG present but answers not validated"),
            DnssecSignal::Unsigned => fail("zone is not signed"),
            DnssecSignal::Unknown => (Outcome::Error, "DNSSEC state unknown".into()),
        },
        "spf" => {
            let rec = d.spf_record.clone().unwrap_or_else(|| "no SPF record".into());
            match d.spf_policy {
                SpfPolicy::HardFail | SpfPolicy::SoftFail => pass(rec),
                _ => fail(rec),
            }
        }
        "dmarc" => {
            let rec = d.dmarc_record.clone().unwrap_or_else(|| "no DMARC record".into());
            match d.dmarc_policy {
                DmarcPolicy::Quarantine | DmarcPolicy::Reject => pass(rec),
                _ => fail(rec),
            }
        }
        _ => unreachable!("not a DNS check: {id}"),
    }
}

fn describe(protocols: &ProtocolMap, versions: &[TlsVersion]) -> String {
    versions
        .iter()
        .map(|v| {
            let state = match protocols.get(v).copied().unwrap_or_default() {
                ProtocolState::Offered => "offered",
                ProtocolState::Refused => "refused",
                ProtocolState::Unknown => "unknown",
            };
            format!("{v} {state}")
        })
        .collect::<Vec<_>>()
        .join(", ")
}

/// Fails if any of `versions` is offered, passes if all are refused.
fn protocols_absent(protocols: &ProtocolMap, versions: &[TlsVersion]) -> Eval {
    let state = |v: &TlsVersion| protocols.get(v).copied().unwrap_or_default();
    let ev = describe(protocols, versions);
    if versions.iter().any(|v| state(v) == ProtocolState::Offered) {
        fail(ev)
    } else if versions.iter().all(|v| state(v) == ProtocolState::Refused) {
        pass(ev)
    } else {
        neutral(ev)
    }
}

const LEGACY_TLS: [TlsVersion; 2] = [TlsVersion::Tls10, TlsVersion::Tls11];

fn tls_check(id: &str, t: &TlsFacts) -> Eval {
    match id {
        "https_offered" if t.https_offered => pass("TLS handshake succeeded"),
        "https_offered" => fail("no TLS listener"),
        "https_redirect" if t.https_redirect => pass("plain HTTP redirects to HTTPS"),
        "https_redirect" => fail("plain HTTP does not redirect to HTTPS"),
        "cert_valid" if t.cert_valid => pass("certificate trusted, matching and current"),
        "cert_valid" if !t.https_offered => fail("no certificate"),
        "cert_valid" => {
            let mut why = Vec::new();
            if let Some(e) = &t.cert_error {
                why.push(e.clone());
            }
            if !t.cert_hostname_match {
                why.push("hostname mismatch".into());
            }
            if !t.cert_not_expired {
                why.push("expired or not yet valid".into());
            }
            fail(why.join("; "))
        }
        "hsts" => match (t.hsts_present, t.hsts_max_age) {
            (true, Some(age)) if age > 0 => pass(format!("max-age={age}")),
            (true, _) => fail("HSTS without a positive max-age"),
            (false, _) => fail("no Strict-Transport-Security header"),
        },
        "tls_legacy_protocols" => protocols_absent(&t.protocols, &LEGACY_TLS),
        "tls_poodle" => protocols_absent(&t.protocols, &[TlsVersion::Ssl3]),
        _ => unreachable!("not a TLS check: {id}"),
    }
}

fn mail_check(id: &str, m: &MailTlsFacts) -> Eval {
    let Some(mx) = &m.mx_host else {
        return neutral("no MX record");
    };
    match id {
        "mail_starttls" => match m.starttls_offered {
            Some(true) => pass(format!("{mx} offers STARTTLS")),
            Some(false) => fail(format!("{mx} does not offer STARTTLS")),
            None => (Outcome::Error, format!("could not talk SMTP to {mx}")),
        },
        "mail_cert_valid" => match (m.starttls_offered, m.cert_valid) {
            (Some(false), _) => fail("no STARTTLS, no certificate"),
            (_, Some(true)) => pass(format!("{mx} certificate trusted")),
            (_, Some(false)) => fail(format!("{mx} certificate not trusted")),
            (_, None) => (Outcome::Error, format!("no certificate obtained from {mx}")),
        },
        "mail_legacy_protocols" => protocols_absent(&m.protocols, &LEGACY_TLS),
        "mail_poodle" => protocols_absent(&m.protocols, &[TlsVersion::Ssl3]),
        "mail_banner" => match &m.banner {
            Some(b) if discloses_version(smtp_greeting_text(b)) => fail(b.trim()),
            Some(b) => pass(b.trim()),
            None => neutral("no SMTP greeting"),
        },
        _ => unreachable!("not a mail check: {id}"),
    }
}

/// Which fact bundle a check depends on.
fn source(id: &str) -> Option<&'static str> {
    Some(match id {
        "third_party_trackers" | "third_party_hosts" | "cookies_third_party" | "fingerprinting"
        | "cdn_usage" | "header_csp" | "header_xxss" | "header_xfo" | "header_xcto"
        | "header_referrer_policy" | "server_banner" | "generator_version" | "outdated_libs"
        | "mixed_content" => "content",
        "dnssec" | "spf" | "dmarc" => "dns",
        "https_offered" | "https_redirect" | "cert_valid" | "hsts" | "tls_legacy_protocols"
        | "tls_poodle" => "tls",
        id if id.starts_with("mail_") => "mail",
        id if id.starts_with("leak_") => "leaks",
        _ => return None,
    })
}

/// Evaluates one check. Returns `None` for ids no evaluator knows.
pub fn evaluate_check(check_id: &str, facts: &ScanFacts) -> Option<(Outcome, String)> {
    Some(match source(check_id)? {
        "content" => facts.content.as_ref().map_or_else(|| missing("content"), |c| content_check(check_id, c)),
        "dns" => facts.dns.as_ref().map_or_else(|| missing("dns"), |d| dns_check(check_id, d)),
        "tls" => facts.tls.as_ref().map_or_else(|| missing("tls"), |t| tls_check(check_id, t)),
        "mail" => facts.mail.as_ref().map_or_else(|| missing("mail"), |m| mail_check(check_id, m)),
        _ => facts.leaks.as_ref().map_or_else(|| missing("leaks"), |l| leak_check(check_id, l)),
    })
}

/// One result per catalog entry, in catalog order. Checks whose fact
/// bundle is missing get outcome `error`.
pub fn evaluate_checks(facts: &ScanFacts, catalog: &Catalog) -> Vec<CheckResult> {
    catalog
        .entries()
        .iter()
        .map(|entry| {
            let (outcome, evidence) = evaluate_check(&entry.check_id, facts)
                .unwrap_or_else(|| (Outcome::Error, "no evaluator for this check".into()));
            CheckResult {
                check_id: entry.check_id.clone(),
                group: entry.group,
                outcome,
                critical: entry.critical,
                evidence,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::check_catalog;
    use crate::facts::{MxRecord, ScanFacts};

    fn outcome(results: &[CheckResult], id: &str) -> Outcome {
        results.iter().find(|r| r.check_id == id).unwrap().outcome
    }

    #[test]
    fn every_catalog_check_has_an_evaluator() {
        for e in check_catalog().entries() {
            assert!(source(&e.check_id).is_some(), "{}", e.check_id);
        }
    }

    #[test]
    fn missing_bundles_are_errors() {
        let results = evaluate_checks(&ScanFacts::default(), &check_catalog());
        assert_eq!(results.len(), check_catalog().len());
        assert!(results.iter().all(|r| r.outcome == Outcome::Error));
    }

    #[test]
    fn trackers_fail_with_host_evidence() {
        let mut c = ContentFacts::default();
        c.tracker_hosts.insert("t.example".into());
        let facts = ScanFacts { content: Some(c), ..Default::default() };
        let r = evaluate_checks(&facts, &check_catalog());
        let t = r.iter().find(|r| r.check_id == "third_party_trackers").unwrap();
        assert_eq!((t.outcome, t.evidence.as_str()), (Outcome::Fail, "t.example"));
    }

    #[test]
    fn no_mx_makes_mail_neutral() {
        let facts = ScanFacts { mail: Some(MailTlsFacts::no_mx()), ..Default::default() };
        let r = evaluate_checks(&facts, &check_catalog());
        for id in ["mail_starttls", "mail_cert_valid", "mail_legacy_protocols", "mail_poodle", "mail_banner"] {
            assert_eq!(outcome(&r, id), Outcome::Neutral, "{id}");
        }
    }

    #[test]
    fn version_banners() {
        assert!(discloses_version("Apache/2.2.15 (CentOS)"));
        assert!(discloses_version("Microsoft-IIS/8.5"));
        assert!(discloses_version("Postfix v3.4.13"));
        assert!(!discloses_version("nginx"));
        assert!(!discloses_version("Apache"));
        assert!(!discloses_version("cloudflare"));
    }

    #[test]
    fn smtp_greeting_skips_host() {
        assert_eq!(smtp_greeting_text("220 mx1.example.com ESMTP Postfix 3.4.13\r\n"), "ESMTP Postfix 3.4.13");
        assert_eq!(smtp_greeting_text("220-mail.v2.example ESMTP"), "ESMTP");
        assert!(!discloses_version(smtp_greeting_text("220 mx.v2.example ESMTP ready")));
        assert_eq!(smtp_greeting_text("220"), "");
    }

    #[test]
    fn header_rules() {
        let mut c = ContentFacts::default();
        for (k, v) in [
            ("Content-Security-Policy", "default-src 'self'"),
            ("X-XSS-Protection", "0"),
            ("X-Frame-Options", "ALLOW-FROM https://x"),
            ("X-Content-Type-Options", "nosniff"),
            ("Referrer-Policy", "unsafe-url"),
        ] {
            c.security_headers.insert(k.into(), Some(v.into()));
        }
        let facts = ScanFacts { content: Some(c), ..Default::default() };
        let r = evaluate_checks(&facts, &check_catalog());
        assert_eq!(outcome(&r, "header_csp"), Outcome::Pass);
        assert_eq!(outcome(&r, "header_xxss"), Outcome::Fail);
        assert_eq!(outcome(&r, "header_xfo"), Outcome::Fail);
        assert_eq!(outcome(&r, "header_xcto"), Outcome::Pass);
        assert_eq!(outcome(&r, "header_referrer_policy"), Outcome::Fail);
    }

    #[test]
    fn protocol_rules() {
        let mut t = TlsFacts::unreachable();
        t.https_offered = true;
        assert_eq!(tls_check("tls_legacy_protocols", &t).0, Outcome::Neutral);
        t.protocols.insert(TlsVersion::Tls10, ProtocolState::Refused);
        t.protocols.insert(TlsVersion::Tls11, ProtocolState::Refused);
        t.protocols.insert(TlsVersion::Ssl3, ProtocolState::Refused);
        assert_eq!(tls_check("tls_legacy_protocols", &t).0, Outcome::Pass);
        assert_eq!(tls_check("tls_poodle", &t).0, Outcome::Pass);
        t.protocols.insert(TlsVersion::Tls11, ProtocolState::Offered);
        assert_eq!(tls_check("tls_legacy_protocols", &t).0, Outcome::Fail);
    }

    #[test]
    fn dns_timeout_is_error() {
        let mut d = DnsFacts::empty(ResolverStatus::Timeout);
        d.mx_records.push(MxRecord { preference: 10, host: "mx".into() });
        let facts = ScanFacts { dns: Some(d), ..Default::default() };
        let r = evaluate_checks(&facts, &check_catalog());
        assert_eq!(outcome(&r, "spf"), Outcome::Error);
        let facts = ScanFacts { dns: Some(DnsFacts::empty(ResolverStatus::NxDomain)), ..Default::default() };
        let r = evaluate_checks(&facts, &check_catalog());
        assert_eq!(outcome(&r, "spf"), Outcome::Fail);
        assert_eq!(outcome(&r, "dnssec"), Outcome::Fail);
    }
}
