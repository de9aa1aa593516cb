//! Test support for sitebench: loopback HTTP/TLS/SMTP/DNS servers that
//! impersonate whole sites, the canonical clean and worst-case scenarios,
//! and independent oracles for filter matching and ranking.

pub mod dns_server;
pub mod oracle;
pub mod pki;
pub mod scenarios;
pub mod servers;
pub mod site;
pub mod world;

pub use pki::{CertKind, TestCa};
pub use site::{MailServer, Page, PlainHttp, SiteFixture, TlsProfile, Zone};
pub use world::World;
