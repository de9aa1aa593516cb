//! Declarative description of a fixture site.

use std::collections::BTreeMap;
use std::net::IpAddr;

use sitebench_core::TlsVersion;

use crate::pki::CertKind;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Page {
    pub status: u16,
    pub headers: Vec<(String, String)>,
    pub body: Vec<u8>,
}

impl Page {
    pub fn new(status: u16, body: impl Into<Vec<u8>>) -> Self {
        Page {
            status,
            headers: Vec::new(),
            body: body.into(),
        }
    }

    pub fn html(body: impl Into<Vec<u8>>) -> Self {
        Page::new(200, body).header("content-type", "text/html; charset=utf-8")
    }

    pub fn script(body: impl Into<Vec<u8>>) -> Self {
        Page::new(200, body).header("content-type", "application/javascript")
    }

    pub fn redirect(status: u16, location: &str) -> Self {
        Page::new(status, Vec::new()).header("location", location)
    }

    pub fn header(mut self, name: &str, value: &str) -> Self {
        self.headers.push((name.to_string(), value.to_string()));
        self
    }
}

/// What the plain-HTTP port does.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlainHttp {
    Serve,
    RedirectToHttps,
    /// Nothing listens on port 80.
    Closed,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TlsProfile {
    pub versions: Vec<TlsVersion>,
    pub cert: CertKind,
}

impl TlsProfile {
    pub fn modern() -> Self {
        TlsProfile {
            versions: vec![TlsVersion::Tls12, TlsVersion::Tls13],
            cert: CertKind::Valid,
        }
    }

    pub fn offers(&self, v: TlsVersion) -> bool {
        self.versions.contains(&v)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MailServer {
    pub host: String,
    /// Full first greeting line, including the 220 code.
    pub greeting: String,
    pub starttls: bool,
    pub tls: TlsProfile,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Zone {
    pub addrs: Vec<IpAddr>,
    pub mx: Vec<(u16, String)>,
    pub ns: Vec<(String, IpAddr)>,
    /// Address records for the MX hosts.
    pub mx_addrs: Vec<(String, IpAddr)>,
    pub txt: Vec<String>,
    pub dmarc: Vec<String>,
    /// Answers carry the authenticated-data flag.
    pub validated: bool,
    /// Answers carry an RRSIG record.
    pub signed: bool,
    /// The stub never answers queries for this zone.
    pub silent: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SiteFixture {
    pub host: String,
    pub pages: BTreeMap<String, Page>,
    pub plain: PlainHttp,
    pub tls: Option<TlsProfile>,
    pub mail: Option<MailServer>,
    pub zone: Zone,
}

impl SiteFixture {
    /// A site serving `pages` over plain HTTP and modern TLS, without mail.
    pub fn new(host: &str) -> Self {
        SiteFixture {
            host: host.to_string(),
            pages: BTreeMap::new(),
            plain: PlainHttp::Serve,
            tls: Some(TlsProfile::modern()),
            mail: None,
            zone: Zone {
                addrs: vec![IpAddr::from([192, 0, 2, 1])],
                ..Zone::default()
            },
        }
    }

    pub fn page(mut self, path: &str, page: Page) -> Self {
        self.pages.insert(path.to_string(), page);
        self
    }

    pub fn not_found(&self) -> Page {
        Page::new(404, "not found").header("content-type", "text/plain")
    }

    pub fn lookup(&self, path: &str) -> Page {
        self.pages.get(path).cloned().unwrap_or_else(|| self.not_found())
    }
}
