//! Static extraction of subresources, inline scripts and metadata from a
//! landing page. No script is executed.

use std::sync::LazyLock;

use regex::Regex;
use scraper::{Html, Selector};
use serde::{Deserialize, Serialize};
use url::Url;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResourceKind {
    Script,
    Img,
    Link,
    Iframe,
    Css,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subresource {
    pub url: Url,
    pub kind: ResourceKind,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageInfo {
    /// In document order; duplicates preserved.
    pub subresources: Vec<Subresource>,
    pub inline_scripts: Vec<String>,
    /// One entry per `document.cookie = ...` assignment; the cookie name
    /// when it is a string literal.
    pub script_cookies: Vec<Option<String>>,
    pub generator: Option<String>,
}

static RESOURCES: LazyLock<Selector> = LazyLock::new(|| {
    Selector::parse("script[src], img[src], link[href], iframe[src]").expect("selector")
});
static INLINE_SCRIPTS: LazyLock<Selector> =
    LazyLock::new(|| Selector::parse("script:not([src])").expect("selector"));
static STYLES: LazyLock<Selector> = LazyLock::new(|| Selector::parse("style").expect("selector"));
static STYLE_ATTRS: LazyLock<Selector> =
    LazyLock::new(|| Selector::parse("[style]").expect("selector"));
static META: LazyLock<Selector> = LazyLock::new(|| Selector::parse("meta[name]").expect("selector"));
static BASE: LazyLock<Selector> = LazyLock::new(|| Selector::parse("base[href]").expect("selector"));

static CSS_URL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r#"url\(\s*(?:"([^"]*)"|'([^']*)'|([^)'"\s]+))\s*\)"#).expect("regex")
});
static COOKIE_ASSIGN: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"document\.cookie\s*=").expect("regex"));
static COOKIE_LITERAL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r#"^\s*["'`]\s*([A-Za-z0-9_\-.!#$%&*+^|~]+)\s*="#).expect("regex")
});

fn resolve(base: &Url, raw: &str) -> Option<Url> {
    let raw = raw.trim();
    if raw.is_empty() || raw.starts_with('#') {
        return None;
    }
    let url = base.join(raw).ok()?;
    matches!(url.scheme(), "http" | "https").then_some(url)
}

/// Finds `url(...)` references in a CSS fragment.
pub fn css_urls(css: &str) -> impl Iterator<Item = &str> {
    CSS_URL.captures_iter(css).filter_map(|c| {
        c.get(1)
            .or_else(|| c.get(2))
            .or_else(|| c.get(3))
            .map(|m| m.as_str())
    })
}

/// Cookie assignments in a script: `Some(name)` for literal names.
pub fn script_cookie_assignments(script: &str) -> Vec<Option<String>> {
    COOKIE_ASSIGN
        .find_iter(script)
        .filter(|m| !script[m.end()..].starts_with('='))
        .map(|m| {
            COOKIE_LITERAL
                .captures(&script[m.end()..])
                .map(|c| c[1].to_string())
        })
        .collect()
}

pub fn extract_page(html: &str, page_url: &Url) -> PageInfo {
    let doc = Html::parse_document(html);
    let base = doc
        .select(&BASE)
        .next()
        .and_then(|b| b.value().attr("href"))
        .and_then(|h| page_url.join(h).ok())
        .unwrap_or_else(|| page_url.clone());

    let mut info = PageInfo::default();
    for el in doc.select(&RESOURCES) {
        let (kind, attr) = match el.value().name() {
            "script" => (ResourceKind::Script, "src"),
            "img" => (ResourceKind::Img, "src"),
            "link" => (ResourceKind::Link, "href"),
            _ => (ResourceKind::Iframe, "src"),
        };
        if let Some(url) = el.value().attr(attr).and_then(|v| resolve(&base, v)) {
            info.subresources.push(Subresource { url, kind });
        }
    }

    let mut css = Vec::new();
    for el in doc.select(&STYLES) {
        css.push(el.text().collect::<String>());
    }
    for el in doc.select(&STYLE_ATTRS) {
        if let Some(s) = el.value().attr("style") {
            css.push(s.to_string());
        }
    }
    for block in &css {
        for raw in css_urls(block) {
            if let Some(url) = resolve(&base, raw) {
                info.subresources.push(Subresource {
                    url,
                    kind: ResourceKind::Css,
                });
            }
        }
    }

    for el in doc.select(&INLINE_SCRIPTS) {
        let text: String = el.text().collect();
        if !text.trim().is_empty() {
            info.script_cookies.extend(script_cookie_assignments(&text));
            info.inline_scripts.push(text);
        }
    }

    info.generator = doc
        .select(&META)
        .find(|m| {
            m.value()
                .attr("name")
                .is_some_and(|n| n.eq_ignore_ascii_case("generator"))
        })
        .and_then(|m| m.value().attr("content"))
        .map(|c| c.trim().to_string())
        .filter(|c| !c.is_empty());
    info
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> Url {
        Url::parse("https://example.org/dir/page.html").unwrap()
    }

    #[test]
    fn extracts_script_src() {
        let info = extract_page(r#"<script src="https://t.example/a.js"></script>"#, &base());
        assert_eq!(info.subresources.len(), 1);
        assert_eq!(info.subresources[0].url.as_str(), "https://t.example/a.js");
        assert_eq!(info.subresources[0].kind, ResourceKind::Script);
    }

    #[test]
    fn resolves_relative_and_skips_non_http() {
        let html = r#"<img src="i.png"><link rel="stylesheet" href="/s.css">
            <iframe src="javascript:void(0)"></iframe><img src="data:image/png;base64,AA">
            <a href="https://ignored.example/">x</a>"#;
        let urls: Vec<_> = extract_page(html, &base())
            .subresources
            .into_iter()
            .map(|s| s.url.to_string())
            .collect();
        assert_eq!(urls, ["https://example.org/dir/i.png", "https://example.org/s.css"]);
    }

    #[test]
    fn honors_base_href() {
        let html = r#"<head><base href="https://cdn.example.org/x/"></head><script src="a.js"></script>"#;
        let info = extract_page(html, &base());
        assert_eq!(info.subresources[0].url.as_str(), "https://cdn.example.org/x/a.js");
    }

    #[test]
    fn inline_css_urls() {
        let html = r#"<style>body{background:url("http://x.example/bg.png")}
            .a{background:url( '/b.png' )} .c{background:url(c.gif)}</style>
            <div style="background-image:url(https://y.example/d.png)"></div>"#;
        let info = extract_page(html, &base());
        let urls: Vec<_> = info.subresources.iter().map(|s| s.url.as_str()).collect();
        assert_eq!(
            urls,
            [
                "http://x.example/bg.png",
                "https://example.org/b.png",
                "https://example.org/dir/c.gif",
                "https://y.example/d.png"
            ]
        );
        assert!(info.subresources.iter().all(|s| s.kind == ResourceKind::Css));
    }

    #[test]
    fn inline_scripts_and_cookie_assignments() {
        let html = r#"<script>document.cookie = "uid=42; path=/"; if (document.cookie == "") {}
            document.cookie = name + "=1";</script><script src="x.js"></script>"#;
        let info = extract_page(html, &base());
        assert_eq!(info.inline_scripts.len(), 1);
        assert_eq!(info.script_cookies, [Some("uid".to_string()), None]);
    }

    #[test]
    fn generator_meta() {
        let html = r#"<meta name="Generator" content="WordPress 4.7.2">"#;
        assert_eq!(extract_page(html, &base()).generator.as_deref(), Some("WordPress 4.7.2"));
        assert_eq!(extract_page("<p>hi</p>", &base()).generator, None);
    }
}
