//! Raw facts gathered by the scan modules. Each bundle is optional in a
//! [`ScanFacts`]; an absent bundle means that scanner failed.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::net::IpAddr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScanFacts {
    pub content: Option<ContentFacts>,
    pub leaks: Option<LeakFacts>,
    pub tls: Option<TlsFacts>,
    pub mail: Option<MailTlsFacts>,
    pub dns: Option<DnsFacts>,
    pub geo: Option<GeoFacts>,
    /// Per-module failures, in execution order.
    #[serde(default)]
    pub errors: Vec<ModuleError>,
}

impl ScanFacts {
    pub fn is_empty(&self) -> bool {
        self.content.is_none()
            && self.leaks.is_none()
            && self.tls.is_none()
            && self.mail.is_none()
            && self.dns.is_none()
            && self.geo.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModuleError {
    pub module: String,
    pub kind: String,
    pub message: String,
}

/// Security headers inspected on the landing page.
pub const SECURITY_HEADERS: [&str; 6] = [
    "Content-Security-Policy",
    "X-XSS-Protection",
    "X-Frame-Options",
    "X-Content-Type-Options",
    "Strict-Transport-Security",
    "Referrer-Policy",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FingerprintHit {
    pub signature_id: String,
    pub evidence: String,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ScriptLib {
    pub name: String,
    pub version: String,
    /// Latest version known to the library table at scan time.
    pub latest: String,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CdnHost {
    pub host: String,
    pub cdn: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ContentFacts {
    pub final_url: String,
    pub redirect_chain: Vec<String>,
    pub third_party_hosts: BTreeSet<String>,
    pub tracker_hosts: BTreeSet<String>,
    pub cookies_first_party: usize,
    pub cookies_third_party: usize,
    /// Keyed by canonical header name; `None` when the header was absent.
    pub security_headers: BTreeMap<String, Option<String>>,
    pub mixed_content_urls: Vec<String>,
    pub fingerprint_hits: Vec<FingerprintHit>,
    pub server_banner: Option<String>,
    pub generator: Option<String>,
    pub script_libs: Vec<ScriptLib>,
    pub cdn_hosts: Vec<CdnHost>,
}

impl ContentFacts {
    pub fn header(&self, name: &str) -> Option<&str> {
        self.security_headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .and_then(|(_, v)| v.as_deref())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeakFinding {
    pub path: String,
    pub detected: bool,
    pub signature: Option<String>,
    pub http_status: u16,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeakFacts {
    pub findings: Vec<LeakFinding>,
}

impl LeakFacts {
    pub fn finding(&self, path: &str) -> Option<&LeakFinding> {
        self.findings.iter().find(|f| f.path == path)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TlsVersion {
    #[serde(rename = "SSLv3")]
    Ssl3,
    #[serde(rename = "TLS1.0")]
    Tls10,
    #[serde(rename = "TLS1.1")]
    Tls11,
    #[serde(rename = "TLS1.2")]
    Tls12,
    #[serde(rename = "TLS1.3")]
    Tls13,
}

impl TlsVersion {
    /// Highest first; the order probes are issued in.
    pub const PROBE_ORDER: [TlsVersion; 5] = [
        TlsVersion::Tls13,
        TlsVersion::Tls12,
        TlsVersion::Tls11,
        TlsVersion::Tls10,
        TlsVersion::Ssl3,
    ];

    pub fn wire(self) -> u16 {
        match self {
            TlsVersion::Ssl3 => 0x0300,
            TlsVersion::Tls10 => 0x0301,
            TlsVersion::Tls11 => 0x0302,
            TlsVersion::Tls12 => 0x0303,
            TlsVersion::Tls13 => 0x0304,
        }
    }

    pub fn from_wire(v: u16) -> Option<Self> {
        Some(match v {
            0x0300 => TlsVersion::Ssl3,
            0x0301 => TlsVersion::Tls10,
            0x0302 => TlsVersion::Tls11,
            0x0303 => TlsVersion::Tls12,
            0x0304 => TlsVersion::Tls13,
            _ => return None,
        })
    }

    pub fn is_legacy(self) -> bool {
        matches!(self, TlsVersion::Ssl3 | TlsVersion::Tls10 | TlsVersion::Tls11)
    }
}

impl fmt::Display for TlsVersion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TlsVersion::Ssl3 => "SSLv3",
            TlsVersion::Tls10 => "TLS1.0",
            TlsVersion::Tls11 => "TLS1.1",
            TlsVersion::Tls12 => "TLS1.2",
            TlsVersion::Tls13 => "TLS1.3",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolState {
    Offered,
    Refused,
    #[default]
    Unknown,
}

pub type ProtocolMap = BTreeMap<TlsVersion, ProtocolState>;

pub fn unknown_protocols() -> ProtocolMap {
    TlsVersion::PROBE_ORDER
        .iter()
        .map(|v| (*v, ProtocolState::Unknown))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TlsFacts {
    pub https_offered: bool,
    pub https_redirect: bool,
    pub protocols: ProtocolMap,
    pub cert_valid: bool,
    pub cert_hostname_match: bool,
    pub cert_not_expired: bool,
    pub hsts_present: bool,
    pub hsts_max_age: Option<u64>,
    pub poodle_susceptible: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cert_error: Option<String>,
}

impl TlsFacts {
    /// Facts for a host with no reachable TLS listener.
    pub fn unreachable() -> Self {
        TlsFacts {
            https_offered: false,
            https_redirect: false,
            protocols: unknown_protocols(),
            cert_valid: false,
            cert_hostname_match: false,
            cert_not_expired: false,
            hsts_present: false,
            hsts_max_age: None,
            poodle_susceptible: false,
            cert_error: None,
        }
    }

    pub fn protocol(&self, v: TlsVersion) -> ProtocolState {
        self.protocols.get(&v).copied().unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MailTlsFacts {
    pub mx_host: Option<String>,
    pub starttls_offered: Option<bool>,
    pub protocols: ProtocolMap,
    pub cert_valid: Option<bool>,
    /// SMTP greeting line as sent by the server.
    pub banner: Option<String>,
}

impl MailTlsFacts {
    pub fn no_mx() -> Self {
        MailTlsFacts {
            mx_host: None,
            starttls_offered: None,
            protocols: unknown_protocols(),
            cert_valid: None,
            banner: None,
        }
    }

    pub fn protocol(&self, v: TlsVersion) -> ProtocolState {
        self.protocols.get(&v).copied().unwrap_or_default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpfPolicy {
    HardFail,
    SoftFail,
    Neutral,
    PassAll,
    Absent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DmarcPolicy {
    None,
    Quarantine,
    Reject,
    Absent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DnssecSignal {
    Validated,
    SignedUnvalidated,
    Unsigned,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResolverStatus {
    #[default]
    Ok,
    NxDomain,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MxRecord {
    pub preference: u16,
    pub host: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DnsFacts {
    pub status: ResolverStatus,
    pub a_records: Vec<IpAddr>,
    /// Sorted ascending by preference, ties by host.
    pub mx_records: Vec<MxRecord>,
    pub ns_records: Vec<String>,
    pub spf_record: Option<String>,
    pub spf_policy: SpfPolicy,
    pub dmarc_record: Option<String>,
    pub dmarc_policy: DmarcPolicy,
    pub dnssec_signal: DnssecSignal,
}

impl DnsFacts {
    pub fn empty(status: ResolverStatus) -> Self {
        DnsFacts {
            status,
            a_records: Vec::new(),
            mx_records: Vec::new(),
            ns_records: Vec::new(),
            spf_record: None,
            spf_policy: SpfPolicy::Absent,
            dmarc_record: None,
            dmarc_policy: DmarcPolicy::Absent,
            dnssec_signal: if status == ResolverStatus::Timeout {
                DnssecSignal::Unknown
            } else {
                DnssecSignal::Unsigned
            },
        }
    }

    /// Lowest preference wins; equal preferences resolve to the
    /// lexicographically smallest host.
    pub fn primary_mx(&self) -> Option<&str> {
        self.mx_records.iter().min().map(|mx| mx.host.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ServerRole {
    Web,
    Mail,
    Ns,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GeoLocation {
    pub role: ServerRole,
    pub host: String,
    pub ip: IpAddr,
    /// ISO 3166 alpha-2 code, `None` when no range matched.
    pub country_code: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeoFacts {
    pub locations: Vec<GeoLocation>,
}
