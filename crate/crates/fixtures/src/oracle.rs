//! Reference implementations used to cross-check the production code.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use proptest::prelude::*;
use regex::Regex;
use sitebench_core::facts::{
    unknown_protocols, ContentFacts, DmarcPolicy, DnsFacts, DnssecSignal, LeakFacts, MailTlsFacts, MxRecord,
    ProtocolState, ResolverStatus, SpfPolicy, TlsFacts, TlsVersion, SECURITY_HEADERS,
};
use sitebench_core::leaks::LEAK_PATHS;
use sitebench_core::{CheckGroup, Color, Outcome, ScanFacts};

// ---------------------------------------------------------------------------
// Filter rules

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Part {
    Lit(String),
    Star,
    Sep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Start {
    Anywhere,
    UrlStart,
    Domain,
}

/// A rule built structurally, so its meaning does not depend on the
/// production parser.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenRule {
    pub exception: bool,
    pub start: Start,
    pub parts: Vec<Part>,
    pub end: bool,
    pub options: Option<String>,
}

/// Options that remove a rule from a third-party tracker list.
const DROP_OPTIONS: [&str; 4] = ["~third-party", "first-party", "1p", "badfilter"];

impl GenRule {
    pub fn text(&self) -> String {
        let mut s = String::new();
        if self.exception {
            s.push_str("@@");
        }
        s.push_str(match self.start {
            Start::Anywhere => "",
            Start::UrlStart => "|",
            Start::Domain => "||",
        });
        for p in &self.parts {
            match p {
                Part::Lit(l) => s.push_str(l),
                Part::Star => s.push('*'),
                Part::Sep => s.push('^'),
            }
        }
        if self.end {
            s.push('|');
        }
        if let Some(o) = &self.options {
            s.push('$');
            s.push_str(o);
        }
        s
    }

    pub fn active(&self) -> bool {
        self.options
            .as_deref()
            .is_none_or(|o| !o.split(',').any(|x| DROP_OPTIONS.contains(&x)))
    }

    /// Regex equivalent over the serialized URL. Generated literals are
    /// lowercase and URL hosts are serialized lowercase, so host case
    /// folding needs no special handling here.
    pub fn regex(&self) -> Regex {
        let mut re = String::from("(?s)");
        match self.start {
            Start::Anywhere => {}
            Start::UrlStart => re.push('^'),
            Start::Domain => re.push_str(r"^[a-z][a-z0-9+.\-]*://(?:[a-z0-9\-_]+\.)*"),
        }
        for p in &self.parts {
            match p {
                Part::Lit(l) => re.push_str(&regex::escape(l)),
                Part::Star => re.push_str(".*"),
                Part::Sep => re.push_str(r"(?:[^A-Za-z0-9_.%\-]|$)"),
            }
        }
        if self.end {
            re.push('$');
        }
        Regex::new(&re).expect("oracle regex")
    }
}

/// Naive decision: blocked iff an active blocking rule matches and no
/// active exception does.
pub fn oracle_blocks(rules: &[GenRule], url: &str) -> bool {
    let hit = |exc: bool| {
        rules
            .iter()
            .filter(|r| r.exception == exc && r.active())
            .any(|r| r.regex().is_match(url))
    };
    hit(false) && !hit(true)
}

const LABELS: [&str; 8] = ["ads", "track", "example", "cdn", "a", "b1", "x-y", "img"];
const TLDS: [&str; 4] = ["com", "net", "org", "test"];
const SEGMENTS: [&str; 10] = ["ads", "Ads", "banner", "img", "js", "pixel.gif", "a.js", "track", "%20x", "v1"];
const FRAGMENTS: [&str; 16] = [
    "ads", "example.com", "/banner", ".js", "track", "com/", "?id=", "=1", "-y", "b1.", "cdn.", "/ads/", "pixel", "net", "a", ":8080",
];
const OPTIONS: [&str; 6] = ["third-party", "script", "~third-party", "image,domain=example.com", "1p", "badfilter"];

pub fn host_strategy() -> impl Strategy<Value = String> {
    (prop::collection::vec(prop::sample::select(&LABELS[..]), 1..=3), prop::sample::select(&TLDS[..]))
        .prop_map(|(labels, tld)| format!("{}.{tld}", labels.join(".")))
}

pub fn url_strategy() -> impl Strategy<Value = String> {
    (
        prop::bool::ANY,
        host_strategy(),
        prop::option::weighted(0.15, Just(8080u16)),
        prop::collection::vec(prop::sample::select(&SEGMENTS[..]), 0..=3),
        prop::option::weighted(0.3, prop::sample::select(&["id=1", "x=ads", "q=Track&id=2"][..])),
    )
        .prop_map(|(https, host, port, segs, query)| {
            let mut u = format!("{}://{host}", if https { "https" } else { "http" });
            if let Some(p) = port {
                u.push_str(&format!(":{p}"));
            }
            u.push('/');
            u.push_str(&segs.join("/"));
            if let Some(q) = query {
                u.push('?');
                u.push_str(q);
            }
            u
        })
}

fn part_strategy() -> impl Strategy<Value = Part> {
    prop_oneof![
        6 => prop::sample::select(&FRAGMENTS[..]).prop_map(|f| Part::Lit(f.to_string())),
        6 => host_strategy().prop_map(Part::Lit),
        2 => Just(Part::Star),
        3 => Just(Part::Sep),
    ]
}

pub fn rule_strategy() -> impl Strategy<Value = GenRule> {
    (
        prop::bool::weighted(0.2),
        prop_oneof![Just(Start::Anywhere), Just(Start::UrlStart), Just(Start::Domain)],
        prop::collection::vec(part_strategy(), 1..=4),
        prop::bool::weighted(0.15),
        prop::option::weighted(0.2, prop::sample::select(&OPTIONS[..]).prop_map(str::to_string)),
    )
        .prop_map(|(exception, start, parts, end, options)| GenRule {
            exception,
            start,
            parts,
            end,
            options,
        })
        // `/.../` without an anchor is regex-rule syntax, outside the grammar.
        .prop_filter("regex-style rule", |r| {
            let body = r.text();
            let body = body.trim_start_matches("@@");
            let pattern = body.split('$').next().unwrap_or("");
            !(r.start == Start::Anywhere && pattern.len() >= 2 && pattern.starts_with('/') && pattern.ends_with('/'))
        })
}

// ---------------------------------------------------------------------------
// Ratings and ranking

fn badness(c: Color) -> u8 {
    match c {
        Color::Green => 0,
        Color::Yellow => 1,
        Color::Neutral => 2,
        Color::Red => 3,
    }
}

/// Group color straight from the rating rules.
pub fn oracle_group_color(results: &[(Outcome, bool)]) -> Color {
    let mut critical_fail = false;
    let mut passes = 0;
    let mut applicable = 0;
    for (o, critical) in results {
        match o {
            Outcome::Fail if *critical => critical_fail = true,
            Outcome::Pass => passes += 1,
            _ => {}
        }
        if matches!(o, Outcome::Pass | Outcome::Fail) {
            applicable += 1;
        }
    }
    if critical_fail {
        Color::Red
    } else if applicable == 0 {
        Color::Neutral
    } else if passes == results.len() {
        Color::Green
    } else {
        Color::Yellow
    }
}

pub fn oracle_overall(colors: &[Color]) -> Color {
    let mut worst = Color::Green;
    for c in colors {
        if badness(*c) > badness(worst) {
            worst = *c;
        }
    }
    worst
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleRow {
    pub site_ref: String,
    pub url: String,
    /// Indexed like `CheckGroup::ALL`.
    pub colors: [Color; 4],
}

fn group_index(g: CheckGroup) -> usize {
    CheckGroup::ALL.iter().position(|x| *x == g).expect("group")
}

fn key_cmp(a: &OracleRow, b: &OracleRow, order: &[CheckGroup]) -> Ordering {
    for g in order {
        let (x, y) = (badness(a.colors[group_index(*g)]), badness(b.colors[group_index(*g)]));
        if x != y {
            return x.cmp(&y);
        }
    }
    (a.url.as_str(), a.site_ref.as_str()).cmp(&(b.url.as_str(), b.site_ref.as_str()))
}

/// Places every row by counting how many rows beat it.
pub fn brute_force_rank(rows: &[OracleRow], order: &[CheckGroup]) -> Vec<String> {
    let mut slots: Vec<Option<String>> = vec![None; rows.len()];
    for row in rows {
        let ahead = rows.iter().filter(|o| key_cmp(o, row, order) == Ordering::Less).count();
        let mut pos = ahead;
        while slots[pos].is_some() {
            pos += 1;
        }
        slots[pos] = Some(row.site_ref.clone());
    }
    slots.into_iter().map(|s| s.expect("slot")).collect()
}

/// All orderings of the four groups.
pub fn all_group_orders() -> Vec<Vec<CheckGroup>> {
    fn permute(rest: Vec<CheckGroup>, prefix: Vec<CheckGroup>, out: &mut Vec<Vec<CheckGroup>>) {
        if rest.is_empty() {
            out.push(prefix);
            return;
        }
        for i in 0..rest.len() {
            let mut r = rest.clone();
            let g = r.remove(i);
            let mut p = prefix.clone();
            p.push(g);
            permute(r, p, out);
        }
    }
    let mut out = Vec::new();
    permute(CheckGroup::ALL.to_vec(), Vec::new(), &mut out);
    out
}

/// Per-group color counts recomputed from rows.
pub fn recount(rows: &[OracleRow]) -> BTreeMap<CheckGroup, BTreeMap<Color, usize>> {
    let mut out = BTreeMap::new();
    for g in CheckGroup::ALL {
        let counts: &mut BTreeMap<Color, usize> = out.entry(g).or_default();
        for c in Color::ALL {
            counts.insert(c, rows.iter().filter(|r| r.colors[group_index(g)] == c).count());
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Hand-assigned facts for the ranking fixture

/// Facts under which every catalog check passes.
pub fn all_pass_facts(host: &str) -> ScanFacts {
    let mut headers = BTreeMap::new();
    let values = [
        "default-src 'self'",
        "1; mode=block",
        "DENY",
        "nosniff",
        "max-age=31536000",
        "no-referrer",
    ];
    for (h, v) in SECURITY_HEADERS.iter().zip(values) {
        headers.insert(h.to_string(), Some(v.to_string()));
    }
    let content = ContentFacts {
        final_url: format!("https://{host}/"),
        security_headers: headers,
        ..ContentFacts::default()
    };
    let leaks = LeakFacts {
        findings: LEAK_PATHS
            .iter()
            .map(|(p, _)| sitebench_core::leaks::classify_probe(p, 404, b""))
            .collect(),
    };
    let mut protocols = unknown_protocols();
    for v in TlsVersion::PROBE_ORDER {
        let state = if v.is_legacy() {
            ProtocolState::Refused
        } else {
            ProtocolState::Offered
        };
        protocols.insert(v, state);
    }
    let tls = TlsFacts {
        https_offered: true,
        https_redirect: true,
        protocols: protocols.clone(),
        cert_valid: true,
        cert_hostname_match: true,
        cert_not_expired: true,
        hsts_present: true,
        hsts_max_age: Some(31536000),
        poodle_susceptible: false,
        cert_error: None,
    };
    let mail = MailTlsFacts {
        mx_host: Some(format!("mx.{host}")),
        starttls_offered: Some(true),
        protocols,
        cert_valid: Some(true),
        banner: Some(format!("220 mx.{host} ESMTP")),
    };
    let dns = DnsFacts {
        status: ResolverStatus::Ok,
        a_records: vec![[192, 0, 2, 1].into()],
        mx_records: vec![MxRecord {
            preference: 10,
            host: format!("mx.{host}"),
        }],
        ns_records: vec![format!("ns.{host}")],
        spf_record: Some("v=spf1 -all".into()),
        spf_policy: SpfPolicy::HardFail,
        dmarc_record: Some("v=DMARC1; p=reject".into()),
        dmarc_policy: DmarcPolicy::Reject,
        dnssec_signal: DnssecSignal::Validated,
    };
    ScanFacts {
        content: Some(content),
        leaks: Some(leaks),
        tls: Some(tls),
        mail: Some(mail),
        dns: Some(dns),
        geo: None,
        errors: Vec::new(),
    }
}

/// Six sites with hand-chosen flaws and the group colors (in
/// `CheckGroup::ALL` order) those flaws must produce.
pub fn ranking_fixture() -> Vec<(String, ScanFacts, [Color; 4])> {
    use Color::*;
    let site = |host: &str, edit: &dyn Fn(&mut ScanFacts), colors: [Color; 4]| {
        let mut f = all_pass_facts(host);
        edit(&mut f);
        (format!("https://{host}/"), f, colors)
    };
    vec![
        site("alpha.example", &|_| {}, [Green, Green, Green, Green]),
        site(
            "bravo.example",
            &|f| f.content.as_mut().unwrap().cookies_third_party = 2,
            [Yellow, Green, Green, Green],
        ),
        site(
            "charlie.example",
            &|f| {
                f.content.as_mut().unwrap().tracker_hosts.insert("t.ads.example".into());
            },
            [Red, Green, Green, Green],
        ),
        site(
            "delta.example",
            &|f| f.mail = Some(MailTlsFacts::no_mx()),
            [Green, Green, Green, Neutral],
        ),
        site(
            "echo.example",
            &|f| {
                let t = f.tls.as_mut().unwrap();
                t.hsts_present = false;
                t.hsts_max_age = None;
                let d = f.dns.as_mut().unwrap();
                d.spf_record = None;
                d.spf_policy = SpfPolicy::Absent;
            },
            [Green, Yellow, Yellow, Green],
        ),
        site(
            "foxtrot.example",
            &|f| {
                let t = f.tls.as_mut().unwrap();
                t.https_offered = false;
                t.cert_valid = false;
                f.mail.as_mut().unwrap().starttls_offered = Some(false);
            },
            [Green, Green, Red, Red],
        ),
    ]
}
