//! Canonical site URLs.
//!
//! A site URL is an absolute `http`/`https` URL with a lowercase host, no
//! default port, no fragment and the path preserved. Host-only input such as
//! `EXAMPLE.org` defaults to `https`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use url::Url;

use crate::error::{Error, Result};

/// A normalized absolute site URL. Ordering and equality follow the
/// canonical text form, which makes it usable as a deduplication key.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct SiteUrl(Url);

impl SiteUrl {
    pub fn as_url(&self) -> &Url {
        &self.0
    }

    pub fn as_str(&self) -> &str {
        self.0.as_str()
    }

    pub fn host(&self) -> &str {
        self.0.host_str().unwrap_or_default()
    }

    pub fn scheme(&self) -> &str {
        self.0.scheme()
    }

    pub fn is_https(&self) -> bool {
        self.0.scheme() == "https"
    }

    /// Resolves `path` against this URL, keeping scheme/host/port.
    pub fn join(&self, path: &str) -> Result<Url> {
        self.0
            .join(path)
            .map_err(|e| Error::MalformedUrl(format!("{path}: {e}")))
    }

    pub fn into_url(self) -> Url {
        self.0
    }
}

impl PartialOrd for SiteUrl {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SiteUrl {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.as_str().cmp(other.0.as_str())
    }
}

impl fmt::Display for SiteUrl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.0.as_str())
    }
}

impl fmt::Debug for SiteUrl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SiteUrl({})", self.0)
    }
}

impl FromStr for SiteUrl {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        normalize_url(s)
    }
}

impl Serialize for SiteUrl {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for SiteUrl {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        normalize_url(&raw).map_err(serde::de::Error::custom)
    }
}

/// Normalizes user-supplied text into a [`SiteUrl`].
pub fn normalize_url(raw: &str) -> Result<SiteUrl> {
    let trimmed = raw.trim();
    if trimmed.is_empty() {
        return Err(Error::MalformedUrl(raw.to_string()));
    }
    let candidate = if trimmed.contains("://") {
        trimmed.to_string()
    } else {
        format!("https://{trimmed}")
    };
    // The WHATWG parser would read "https:///path" as host "path".
    let authority = candidate.split_once("://").map_or("", |(_, rest)| rest);
    if authority.is_empty() || authority.starts_with(['/', '\\']) {
        return Err(Error::MalformedUrl(raw.to_string()));
    }
    let mut url = Url::parse(&candidate).map_err(|_| Error::MalformedUrl(raw.to_string()))?;
    if !matches!(url.scheme(), "http" | "https") {
        return Err(Error::MalformedUrl(raw.to_string()));
    }
    match url.host_str() {
        Some(h) if !h.is_empty() && !h.chars().any(char::is_whitespace) => {}
        _ => return Err(Error::MalformedUrl(raw.to_string())),
    }
    // The url crate lowercases domains and drops default ports while parsing.
    url.set_fragment(None);
    if !url.username().is_empty() || url.password().is_some() {
        return Err(Error::MalformedUrl(raw.to_string()));
    }
    Ok(SiteUrl(url))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn host_only_defaults_to_https_and_lowercases() {
        assert_eq!(normalize_url("EXAMPLE.org").unwrap().as_str(), "https://example.org/");
    }

    #[test]
    fn strips_default_port_and_fragment() {
        assert_eq!(
            normalize_url("http://example.org:80/a#frag").unwrap().as_str(),
            "http://example.org/a"
        );
        assert_eq!(
            normalize_url("https://example.org:443/").unwrap().as_str(),
            "https://example.org/"
        );
    }

    #[test]
    fn keeps_non_default_port_and_query() {
        assert_eq!(
            normalize_url("http://Example.org:8080/x?y=1").unwrap().as_str(),
            "http://example.org:8080/x?y=1"
        );
    }

    #[test]
    fn rejects_garbage() {
        assert!(matches!(normalize_url("ht!tp://"), Err(Error::MalformedUrl(_))));
        assert!(normalize_url("").is_err());
        assert!(normalize_url("   ").is_err());
        assert!(normalize_url("ftp://example.org/").is_err());
        assert!(normalize_url("https://exa mple.org/").is_err());
        assert!(normalize_url("https:///path").is_err());
    }

    #[test]
    fn serde_round_trip_normalizes() {
        let u: SiteUrl = serde_json::from_str("\"HTTP://A.Example:80/\"").unwrap();
        assert_eq!(serde_json::to_string(&u).unwrap(), "\"http://a.example/\"");
    }

    proptest! {
        #[test]
        fn normalization_is_idempotent(
            scheme in prop::sample::select(vec!["", "http://", "https://", "HTTPS://"]),
            labels in prop::collection::vec("[a-zA-Z0-9]{1,8}", 1..4),
            tld in "[a-zA-Z]{2,5}",
            port in prop::option::of(prop::sample::select(vec![80u16, 443, 8080])),
            path in "(/[a-zA-Z0-9._~-]{0,6}){0,3}",
            frag in prop::option::of("[a-z]{0,4}"),
        ) {
            let mut raw = format!("{scheme}{}.{tld}", labels.join("."));
            if let Some(p) = port { raw.push_str(&format!(":{p}")); }
            raw.push_str(&path);
            if let Some(f) = frag { raw.push('#'); raw.push_str(&f); }
            let once = normalize_url(&raw).unwrap();
            let twice = normalize_url(once.as_str()).unwrap();
            prop_assert_eq!(once, twice);
        }
    }
}
