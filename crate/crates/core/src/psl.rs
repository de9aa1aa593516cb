//! Registrable-domain computation from a public suffix list snapshot.
//!
//! The file format is one rule per line: plain suffixes (`co.uk`),
//! wildcards (`*.ck`) and exceptions (`!www.ck`). `//` starts a comment.
//! Hosts that match no rule fall back to the implicit `*` rule, so the TLD
//! alone is treated as the public suffix.

use std::collections::HashSet;
use std::net::IpAddr;

/// Bundled snapshot; replace with a full list via the signatures directory.
pub const BUNDLED_PUBLIC_SUFFIXES: &str = include_str!("../data/signatures/public_suffix.dat");

#[derive(Debug, Clone, Default)]
pub struct PublicSuffixList {
    rules: HashSet<String>,
    wildcards: HashSet<String>,
    exceptions: HashSet<String>,
}

impl PublicSuffixList {
    pub fn parse(text: &str) -> Self {
        let mut psl = PublicSuffixList::default();
        for line in text.lines() {
            let rule = line.split_whitespace().next().unwrap_or("");
            if rule.is_empty() || rule.starts_with("//") {
                continue;
            }
            let rule = rule.to_ascii_lowercase();
            if let Some(exc) = rule.strip_prefix('!') {
                psl.exceptions.insert(exc.to_string());
            } else if let Some(wild) = rule.strip_prefix("*.") {
                psl.wildcards.insert(wild.to_string());
            } else {
                psl.rules.insert(rule);
            }
        }
        psl
    }

    pub fn bundled() -> Self {
        Self::parse(BUNDLED_PUBLIC_SUFFIXES)
    }

    /// Number of labels in the public suffix of `labels`.
    fn suffix_len(&self, labels: &[&str]) -> usize {
        let mut best = 1;
        for i in 0..labels.len() {
            let candidate = labels[i..].join(".");
            let len = labels.len() - i;
            if self.exceptions.contains(&candidate) {
                // An exception rule's suffix is the rule minus its first label.
                return len - 1;
            }
            if self.rules.contains(&candidate) {
                best = best.max(len);
            }
            if i + 1 < labels.len() {
                let parent = labels[i + 1..].join(".");
                if self.wildcards.contains(&parent) {
                    best = best.max(len);
                }
            }
        }
        best
    }

    /// The public suffix of `host`.
    pub fn public_suffix(&self, host: &str) -> String {
        let host = normalize_host(host);
        let labels: Vec<&str> = host.split('.').collect();
        let n = self.suffix_len(&labels).min(labels.len());
        labels[labels.len() - n..].join(".")
    }

    /// The registrable domain (public suffix plus one label). IP addresses
    /// and hosts that are themselves public suffixes map to themselves.
    pub fn registrable_domain(&self, host: &str) -> String {
        let host = normalize_host(host);
        if host.parse::<IpAddr>().is_ok() || host.starts_with('[') {
            return host;
        }
        let labels: Vec<&str> = host.split('.').collect();
        let n = self.suffix_len(&labels);
        if n >= labels.len() {
            return host;
        }
        labels[labels.len() - n - 1..].join(".")
    }

    pub fn same_site(&self, a: &str, b: &str) -> bool {
        self.registrable_domain(a) == self.registrable_domain(b)
    }
}

fn normalize_host(host: &str) -> String {
    host.trim().trim_end_matches('.').to_ascii_lowercase()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn psl() -> PublicSuffixList {
        PublicSuffixList::parse("// test\ncom\norg\nnet\nco.uk\nuk\n*.ck\n!www.ck\ntest\n")
    }

    #[test]
    fn simple_suffixes() {
        let p = psl();
        assert_eq!(p.registrable_domain("cdn.example.org"), "example.org");
        assert_eq!(p.registrable_domain("example.org"), "example.org");
        assert_eq!(p.registrable_domain("a.b.example.co.uk"), "example.co.uk");
        assert_eq!(p.registrable_domain("t.other.net"), "other.net");
    }

    #[test]
    fn wildcard_and_exception_rules() {
        let p = psl();
        assert_eq!(p.registrable_domain("a.b.foo.ck"), "b.foo.ck");
        assert_eq!(p.registrable_domain("www.ck"), "www.ck");
        assert_eq!(p.registrable_domain("x.www.ck"), "www.ck");
    }

    #[test]
    fn unknown_tld_uses_implicit_rule() {
        let p = psl();
        assert_eq!(p.registrable_domain("a.b.unlisted"), "b.unlisted");
    }

    #[test]
    fn suffix_and_ip_hosts_map_to_themselves() {
        let p = psl();
        assert_eq!(p.registrable_domain("co.uk"), "co.uk");
        assert_eq!(p.registrable_domain("192.0.2.1"), "192.0.2.1");
        assert_eq!(p.registrable_domain("Example.ORG."), "example.org");
    }

    #[test]
    fn bundled_snapshot_loads() {
        let p = PublicSuffixList::bundled();
        assert_eq!(p.registrable_domain("www.bbc.co.uk"), "bbc.co.uk");
        assert_eq!(p.registrable_domain("static.clean.test"), "clean.test");
        assert!(p.same_site("a.example.org", "b.example.org"));
    }
}
