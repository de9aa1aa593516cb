//! The check catalog: every check the evaluator emits, its group, whether a
//! failure is critical, and the documentation shown next to results.
//!
//! Critical checks by default: `third_party_trackers`, `https_offered`,
//! `https_redirect`, `cert_valid`, `mail_starttls` and every `leak_*` check.
//! A failing critical check turns its group red.
//!
//! The catalog can be overridden with a text file, one line per check:
//!
//! ```text
//! # check_id <TAB> group <TAB> critical|normal
//! cookies_third_party    NoTrack    critical
//! ```
//!
//! Lines only override the listed checks; unknown ids are rejected.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::CheckGroup;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub check_id: String,
    pub group: CheckGroup,
    pub critical: bool,
    pub description: String,
}

impl CatalogEntry {
    /// Stable key for looking up the long-form check documentation.
    pub fn documentation_key(&self) -> String {
        format!("checks/{}", self.check_id)
    }
}

use CheckGroup::*;

const DEFAULT_ENTRIES: &[(&str, CheckGroup, bool, &str)] = &[
    ("third_party_trackers", NoTrack, true, "No third-party host matches the tracker and advertiser filter list."),
    ("third_party_hosts", NoTrack, false, "The landing page embeds no resources from third-party hosts."),
    ("cookies_third_party", NoTrack, false, "No cookies are set by third-party hosts."),
    ("fingerprinting", NoTrack, false, "Page scripts contain no known browser-fingerprinting patterns."),
    ("cdn_usage", NoTrack, false, "Neither the site nor its embedded content is served from a known CDN."),
    ("header_csp", Attacks, false, "A Content-Security-Policy header is sent."),
    ("header_xxss", Attacks, false, "X-XSS-Protection is sent and does not disable the filter."),
    ("header_xfo", Attacks, false, "X-Frame-Options is DENY or SAMEORIGIN."),
    ("header_xcto", Attacks, false, "X-Content-Type-Options is nosniff."),
    ("header_referrer_policy", Attacks, false, "A Referrer-Policy other than unsafe-url is sent."),
    ("leak_server_status", Attacks, true, "/server-status/ does not expose the Apache status page."),
    ("leak_server_info", Attacks, true, "/server-info/ does not expose the Apache configuration page."),
    ("leak_test_php", Attacks, true, "/test.php does not expose PHP configuration output."),
    ("leak_phpinfo_php", Attacks, true, "/phpinfo.php does not expose PHP configuration output."),
    ("leak_git", Attacks, true, "The /.git/ repository metadata is not readable."),
    ("leak_svn", Attacks, true, "The /.svn/ working copy metadata is not readable."),
    ("leak_core", Attacks, true, "No core dump is readable at /core."),
    ("server_banner", Attacks, false, "The Server header does not disclose a software version."),
    ("generator_version", Attacks, false, "The HTML generator meta tag does not disclose a CMS version."),
    ("outdated_libs", Attacks, false, "No detected client-side script library is older than the latest known release."),
    ("dnssec", Attacks, false, "DNS answers for the site are DNSSEC-validated."),
    ("spf", Attacks, false, "An SPF record ends in -all or ~all."),
    ("dmarc", Attacks, false, "A DMARC record requests quarantine or reject."),
    ("https_offered", EncWeb, true, "The site accepts HTTPS connections."),
    ("https_redirect", EncWeb, true, "Plain HTTP requests are redirected to HTTPS."),
    ("cert_valid", EncWeb, true, "The certificate chains to a trusted root, matches the host and has not expired."),
    ("hsts", EncWeb, false, "A Strict-Transport-Security header with a positive max-age is sent."),
    ("tls_legacy_protocols", EncWeb, false, "TLS 1.0 and TLS 1.1 are not offered."),
    ("tls_poodle", EncWeb, false, "SSLv3 is not offered, so POODLE does not apply."),
    ("mixed_content", EncWeb, false, "The HTTPS page embeds no plain-HTTP resources."),
    ("mail_starttls", EncMail, true, "The primary mail server offers STARTTLS."),
    ("mail_cert_valid", EncMail, false, "The mail server certificate is trusted, matches and has not expired."),
    ("mail_legacy_protocols", EncMail, false, "The mail server offers neither TLS 1.0 nor TLS 1.1."),
    ("mail_poodle", EncMail, false, "The mail server does not offer SSLv3."),
    ("mail_banner", EncMail, false, "The SMTP greeting does not disclose a software version."),
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Catalog {
    entries: Vec<CatalogEntry>,
}

impl Default for Catalog {
    fn default() -> Self {
        Catalog {
            entries: DEFAULT_ENTRIES
                .iter()
                .map(|(id, group, critical, description)| CatalogEntry {
                    check_id: (*id).to_string(),
                    group: *group,
                    critical: *critical,
                    description: (*description).to_string(),
                })
                .collect(),
        }
    }
}

/// The built-in catalog.
pub fn check_catalog() -> Catalog {
    Catalog::default()
}

impl Catalog {
    pub fn entries(&self) -> &[CatalogEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, check_id: &str) -> Option<&CatalogEntry> {
        self.entries.iter().find(|e| e.check_id == check_id)
    }

    pub fn group_of(&self, check_id: &str) -> Option<CheckGroup> {
        self.get(check_id).map(|e| e.group)
    }

    pub fn in_group(&self, group: CheckGroup) -> impl Iterator<Item = &CatalogEntry> {
        self.entries.iter().filter(move |e| e.group == group)
    }

    /// Applies a `check_id <TAB> group <TAB> critical|normal` override file
    /// on top of the built-in catalog.
    pub fn with_overrides(mut self, text: &str) -> Result<Self> {
        let mut seen = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| Error::CatalogConfig {
                line: line_no,
                message,
            };
            let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
            if cols.len() != 3 {
                return Err(err(format!("expected 3 tab-separated columns, got {}", cols.len())));
            }
            let group: CheckGroup = cols[1].parse().map_err(err)?;
            let critical = match cols[2] {
                "critical" => true,
                "normal" => false,
                other => return Err(err(format!("criticality must be critical|normal, got {other:?}"))),
            };
            if let Some(prev) = seen.insert(cols[0].to_string(), line_no) {
                return Err(err(format!("{} already configured on line {prev}", cols[0])));
            }
            let entry = self
                .entries
                .iter_mut()
                .find(|e| e.check_id == cols[0])
                .ok_or_else(|| err(format!("unknown check id {:?}", cols[0])))?;
            entry.group = group;
            entry.critical = critical;
        }
        Ok(self)
    }

    /// Renders the catalog in the override file format.
    pub fn to_config(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&e.check_id);
            out.push('\t');
            out.push_str(e.group.as_str());
            out.push('\t');
            out.push_str(if e.critical { "critical" } else { "normal" });
            out.push('\n');
        }
        out
    }
}
