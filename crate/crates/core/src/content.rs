//! Turns a fetched landing page into [`ContentFacts`].

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use url::Url;

use crate::facts::{CdnHost, ContentFacts, FingerprintHit, ScriptLib, SECURITY_HEADERS};
use crate::filter::{classify_hosts, FilterSet};
use crate::html::{PageInfo, ResourceKind};
use crate::signatures::{CdnMatcher, SignatureSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CookieSource {
    SetCookie,
    Script,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservedCookie {
    pub name: String,
    /// Host of the response that set it, or the page host for script cookies.
    pub origin_host: String,
    pub source: CookieSource,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FetchedScript {
    pub url: Url,
    pub body: String,
}

/// Everything the content scanner observed while loading a site.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseBundle {
    pub final_url: Url,
    pub status: u16,
    /// Headers of the final response; names lowercased, order preserved.
    pub headers: Vec<(String, String)>,
    pub body: String,
    /// URLs that answered with a redirect, in order.
    pub redirect_chain: Vec<Url>,
    pub page: PageInfo,
    pub cookies: Vec<ObservedCookie>,
    pub scripts: Vec<FetchedScript>,
}

impl ResponseBundle {
    pub fn header(&self, name: &str) -> Option<String> {
        let values: Vec<&str> = self
            .headers
            .iter()
            .filter(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
            .collect();
        (!values.is_empty()).then(|| values.join(", "))
    }

    pub fn subresource_urls(&self) -> impl Iterator<Item = &Url> {
        self.page.subresources.iter().map(|s| &s.url)
    }
}

/// Parses the cookie name from a `Set-Cookie` header value.
pub fn set_cookie_name(value: &str) -> Option<String> {
    let pair = value.split(';').next()?;
    let (name, _) = pair.split_once('=')?;
    let name = name.trim();
    (!name.is_empty()).then(|| name.to_string())
}

fn snippet(text: &str, start: usize, end: usize) -> String {
    let mut lo = start.saturating_sub(40);
    while !text.is_char_boundary(lo) {
        lo -= 1;
    }
    let mut hi = (end + 40).min(text.len());
    while !text.is_char_boundary(hi) {
        hi += 1;
    }
    text[lo..hi].split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn extract_content_facts(
    bundle: &ResponseBundle,
    filters: &FilterSet,
    site_host: &str,
    signatures: &SignatureSet,
) -> ContentFacts {
    let psl = &signatures.public_suffixes;
    let site_domain = psl.registrable_domain(site_host);
    let is_third_party = |host: &str| psl.registrable_domain(host) != site_domain;

    let third_party_urls: Vec<&Url> = bundle
        .subresource_urls()
        .filter(|u| u.host_str().is_some_and(is_third_party))
        .collect();
    let third_party_hosts: BTreeSet<String> = third_party_urls
        .iter()
        .filter_map(|u| u.host_str().map(str::to_ascii_lowercase))
        .collect();
    let tracker_hosts = classify_hosts(filters, third_party_urls.iter().copied());

    let mut seen = HashSet::new();
    let (mut first, mut third) = (0, 0);
    for c in &bundle.cookies {
        if seen.insert((c.name.as_str(), c.origin_host.as_str())) {
            if is_third_party(&c.origin_host) {
                third += 1;
            } else {
                first += 1;
            }
        }
    }

    let security_headers = SECURITY_HEADERS
        .iter()
        .map(|h| (h.to_string(), bundle.header(h)))
        .collect();

    let mut mixed_content_urls = Vec::new();
    if bundle.final_url.scheme() == "https" {
        let mut seen = HashSet::new();
        for u in bundle.subresource_urls() {
            if u.scheme() == "http" && seen.insert(u.as_str()) {
                mixed_content_urls.push(u.to_string());
            }
        }
    }

    let sources: Vec<&str> = bundle
        .page
        .inline_scripts
        .iter()
        .map(String::as_str)
        .chain(bundle.scripts.iter().map(|s| s.body.as_str()))
        .collect();
    let fingerprint_hits = signatures
        .fingerprints
        .iter()
        .filter_map(|sig| {
            sources.iter().find_map(|src| {
                sig.pattern.find(src).map(|m| FingerprintHit {
                    signature_id: sig.id.clone(),
                    evidence: snippet(src, m.start(), m.end()),
                })
            })
        })
        .collect();

    let mut libs = BTreeSet::new();
    for sub in bundle
        .page
        .subresources
        .iter()
        .filter(|s| s.kind == ResourceKind::Script)
    {
        let file = sub
            .url
            .path_segments()
            .and_then(|mut segs| segs.next_back())
            .unwrap_or("");
        for lib in &signatures.libs {
            if let Some(c) = lib.filename.captures(file) {
                libs.insert(ScriptLib {
                    name: lib.name.clone(),
                    version: c[1].to_string(),
                    latest: lib.latest.clone(),
                });
            }
        }
    }
    for script in &bundle.scripts {
        for lib in &signatures.libs {
            if let Some(c) = lib.banner.as_ref().and_then(|b| b.captures(&script.body)) {
                if let Some(v) = c.get(1) {
                    libs.insert(ScriptLib {
                        name: lib.name.clone(),
                        version: v.as_str().to_string(),
                        latest: lib.latest.clone(),
                    });
                }
            }
        }
    }

    let final_host = bundle.final_url.host_str().unwrap_or_default().to_ascii_lowercase();
    let mut hosts: BTreeSet<String> = bundle
        .subresource_urls()
        .filter_map(|u| u.host_str().map(str::to_ascii_lowercase))
        .collect();
    hosts.insert(final_host.clone());
    let header_lines: Vec<String> = bundle
        .headers
        .iter()
        .map(|(k, v)| format!("{}: {}", k.to_ascii_lowercase(), v))
        .collect();
    let mut cdn_hosts = BTreeSet::new();
    for sig in &signatures.cdns {
        match &sig.matcher {
            CdnMatcher::HostSuffix(_) => {
                for h in hosts.iter().filter(|h| sig.matches_host(h)) {
                    cdn_hosts.insert(CdnHost {
                        host: h.clone(),
                        cdn: sig.name.clone(),
                    });
                }
            }
            CdnMatcher::Header(re) => {
                if header_lines.iter().any(|l| re.is_match(l)) {
                    cdn_hosts.insert(CdnHost {
                        host: final_host.clone(),
                        cdn: sig.name.clone(),
                    });
                }
            }
        }
    }

    ContentFacts {
        final_url: bundle.final_url.to_string(),
        redirect_chain: bundle.redirect_chain.iter().map(Url::to_string).collect(),
        third_party_hosts,
        tracker_hosts,
        cookies_first_party: first,
        cookies_third_party: third,
        security_headers,
        mixed_content_urls,
        fingerprint_hits,
        server_banner: bundle.header("server"),
        generator: bundle.page.generator.clone(),
        script_libs: libs.into_iter().collect(),
        cdn_hosts: cdn_hosts.into_iter().collect(),
    }
}
