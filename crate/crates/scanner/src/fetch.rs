//! Landing-page fetch with redirects, script download and leak probes.

use std::collections::HashSet;
use std::time::Duration;

use sitebench_core::content::{set_cookie_name, CookieSource, FetchedScript, ObservedCookie, ResponseBundle};
use sitebench_core::facts::LeakFacts;
use sitebench_core::html::{extract_page, ResourceKind};
use sitebench_core::leaks::{classify_probe, failed_probe, LEAK_BODY_LIMIT, LEAK_PATHS};
use url::Url;

use crate::error::ScanError;
use crate::http::{BodyPolicy, HttpClient, HttpResponse};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FetchLimits {
    pub max_redirects: usize,
    pub timeout: Duration,
    pub max_body: usize,
}

impl Default for FetchLimits {
    fn default() -> Self {
        FetchLimits {
            max_redirects: 10,
            timeout: Duration::from_secs(10),
            max_body: 5 * 1024 * 1024,
        }
    }
}

fn response_cookies(resp: &HttpResponse, url: &Url, out: &mut Vec<ObservedCookie>) {
    let host = url.host_str().unwrap_or_default().to_ascii_lowercase();
    for value in resp.header_all("set-cookie") {
        if let Some(name) = set_cookie_name(value) {
            out.push(ObservedCookie {
                name,
                origin_host: host.clone(),
                source: CookieSource::SetCookie,
            });
        }
    }
}

/// Loads `url`, following redirects, then downloads the page's external
/// scripts so their bodies and cookies can be analysed.
pub async fn fetch_site(client: &HttpClient, url: &Url, limits: FetchLimits) -> Result<ResponseBundle, ScanError> {
    let mut current = url.clone();
    let mut redirect_chain = Vec::new();
    let mut cookies = Vec::new();
    let resp = loop {
        let resp = client.get(&current, BodyPolicy::Limit(limits.max_body)).await?;
        response_cookies(&resp, &current, &mut cookies);
        match resp.is_redirect().then(|| resp.location(&current)).flatten() {
            Some(next) => {
                redirect_chain.push(current);
                if redirect_chain.len() > limits.max_redirects {
                    return Err(ScanError::TooManyRedirects(limits.max_redirects));
                }
                current = next;
            }
            None => break resp,
        }
    };

    let body = String::from_utf8_lossy(&resp.body).into_owned();
    let page = extract_page(&body, &current);
    let page_host = current.host_str().unwrap_or_default().to_ascii_lowercase();
    for (i, name) in page.script_cookies.iter().enumerate() {
        cookies.push(ObservedCookie {
            name: name.clone().unwrap_or_else(|| format!("document.cookie#{i}")),
            origin_host: page_host.clone(),
            source: CookieSource::Script,
        });
    }

    let mut scripts = Vec::new();
    let mut seen = HashSet::new();
    for sub in page.subresources.iter().filter(|s| s.kind == ResourceKind::Script) {
        if !seen.insert(sub.url.as_str()) {
            continue;
        }
        match client.get(&sub.url, BodyPolicy::Truncate(limits.max_body)).await {
            Ok(r) => {
                response_cookies(&r, &sub.url, &mut cookies);
                if (200..300).contains(&r.status) {
                    scripts.push(FetchedScript {
                        url: sub.url.clone(),
                        body: String::from_utf8_lossy(&r.body).into_owned(),
                    });
                }
            }
            Err(e) => tracing::debug!(url = %sub.url, error = %e, "script fetch failed"),
        }
    }

    Ok(ResponseBundle {
        final_url: current,
        status: resp.status,
        headers: resp.headers,
        body,
        redirect_chain,
        page,
        cookies,
        scripts,
    })
}

/// One GET per well-known leak path on the origin of `base`.
pub async fn probe_leaks(client: &HttpClient, base: &Url) -> LeakFacts {
    let mut findings = Vec::with_capacity(LEAK_PATHS.len());
    for (path, _) in LEAK_PATHS {
        let finding = match base.join(path) {
            Ok(url) => match client.get(&url, BodyPolicy::Truncate(LEAK_BODY_LIMIT)).await {
                Ok(resp) => classify_probe(path, resp.status, &resp.body),
                Err(_) => failed_probe(path),
            },
            Err(_) => failed_probe(path),
        };
        findings.push(finding);
    }
    LeakFacts { findings }
}
