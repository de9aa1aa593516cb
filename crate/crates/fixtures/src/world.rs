//! Starts every listener for a set of fixture sites and wires a scanner to
//! them.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use sitebench_core::FilterSet;
use sitebench_scanner::tls::{HTTPS_PORT, HTTP_PORT, SMTP_PORT};
use sitebench_scanner::{Dialer, FetchLimits, Scanner, ScannerConfig};
use tokio::net::{TcpListener, UdpSocket};
use tokio::task::JoinHandle;

use crate::dns_server::{run_dns, DnsZoneData};
use crate::pki::TestCa;
use crate::servers::{run_https, run_plain_http, run_smtp, HostCounters, TlsEndpoint};
use crate::site::{PlainHttp, SiteFixture};

pub struct World {
    pub ca: TestCa,
    pub dialer: Dialer,
    pub resolver: SocketAddr,
    pub dns: Arc<DnsZoneData>,
    counters: HashMap<String, Arc<HostCounters>>,
    tasks: Vec<JoinHandle<()>>,
}

async fn listener() -> TcpListener {
    TcpListener::bind("127.0.0.1:0").await.expect("bind fixture listener")
}

impl World {
    pub async fn start(sites: Vec<SiteFixture>) -> World {
        let ca = TestCa::new();
        let mut dialer = Dialer::new();
        dialer.overrides_only = true;
        let mut counters = HashMap::new();
        let mut tasks = Vec::new();

        let dns = Arc::new(DnsZoneData::from_sites(&sites));
        let udp = UdpSocket::bind("127.0.0.1:0").await.expect("bind DNS stub");
        let resolver = udp.local_addr().expect("DNS addr");
        tasks.push(tokio::spawn(run_dns(udp, dns.clone())));

        for site in sites {
            let site = Arc::new(site);
            let host_counters: Arc<HostCounters> = counters
                .entry(site.host.clone())
                .or_insert_with(|| Arc::new(HostCounters::default()))
                .clone();
            if site.plain != PlainHttp::Closed {
                let l = listener().await;
                dialer.add_override(&site.host, HTTP_PORT, l.local_addr().unwrap());
                tasks.push(tokio::spawn(run_plain_http(l, site.clone(), host_counters.clone())));
            }
            if let Some(profile) = &site.tls {
                let endpoint = Arc::new(TlsEndpoint::new(profile.clone(), ca.issue(&site.host, profile.cert)));
                let l = listener().await;
                dialer.add_override(&site.host, HTTPS_PORT, l.local_addr().unwrap());
                tasks.push(tokio::spawn(run_https(l, site.clone(), endpoint, host_counters.clone())));
            }
            if let Some(mail) = &site.mail {
                let mail_counters = counters
                    .entry(mail.host.clone())
                    .or_insert_with(|| Arc::new(HostCounters::default()))
                    .clone();
                let endpoint = Arc::new(TlsEndpoint::new(mail.tls.clone(), ca.issue(&mail.host, mail.tls.cert)));
                let l = listener().await;
                dialer.add_override(&mail.host, SMTP_PORT, l.local_addr().unwrap());
                tasks.push(tokio::spawn(run_smtp(
                    l,
                    mail.greeting.clone(),
                    mail.host.clone(),
                    mail.starttls,
                    endpoint,
                    mail_counters,
                )));
            }
        }

        World {
            ca,
            dialer,
            resolver,
            dns,
            counters,
            tasks,
        }
    }

    pub fn counters(&self, host: &str) -> Arc<HostCounters> {
        self.counters.get(host).cloned().unwrap_or_default()
    }

    pub fn total_requests(&self) -> usize {
        self.counters.values().map(|c| c.requests()).sum()
    }

    pub fn total_connections(&self) -> usize {
        self.counters.values().map(|c| c.connections()).sum()
    }

    pub fn reset_counters(&self) {
        self.counters.values().for_each(|c| c.reset());
    }

    /// Scanner settings with short timeouts suited to loopback fixtures.
    pub fn scanner_config(&self) -> ScannerConfig {
        ScannerConfig {
            limits: FetchLimits {
                timeout: Duration::from_secs(5),
                ..FetchLimits::default()
            },
            probe_timeout: Duration::from_secs(5),
            resolver: self.resolver,
            dns_timeout: Duration::from_millis(800),
            ..ScannerConfig::default()
        }
    }

    pub fn scanner(&self, filters: FilterSet) -> Scanner {
        Scanner::new(self.scanner_config(), self.dialer.clone(), self.ca.root_store(), filters)
    }
}

impl Drop for World {
    fn drop(&mut self) {
        for t in &self.tasks {
            t.abort();
        }
    }
}
