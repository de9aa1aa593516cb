//! Network side of sitebench. Each module gathers one fact bundle; the
//! [`Scanner`] runs them in order and hands the facts to the core crate for
//! evaluation.

pub mod dns;
pub mod error;
pub mod fetch;
pub mod http;
pub mod net;
pub mod tls;
pub mod tls_wire;

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use rustls::RootCertStore;
use sitebench_core::catalog::{check_catalog, Catalog};
use sitebench_core::content::extract_content_facts;
use sitebench_core::facts::{GeoFacts, MailTlsFacts, ModuleError, ResolverStatus, ScanFacts, ServerRole};
use sitebench_core::geo::{geolocate, GeoDb};
use sitebench_core::signatures::SignatureSet;
use sitebench_core::{evaluate_checks, CheckResult, FilterSet, SiteUrl};

pub use error::ScanError;
pub use fetch::FetchLimits;
pub use net::Dialer;

pub const DEFAULT_USER_AGENT: &str = "sitebench/0.1 (+https://sitebench.invalid/opt-out)";

#[derive(Debug, Clone)]
pub struct ScannerConfig {
    pub limits: FetchLimits,
    /// Per-connection budget for TLS and SMTP probes.
    pub probe_timeout: Duration,
    pub user_agent: String,
    pub helo_name: String,
    pub resolver: SocketAddr,
    pub dns_timeout: Duration,
}

impl Default for ScannerConfig {
    fn default() -> Self {
        ScannerConfig {
            limits: FetchLimits::default(),
            probe_timeout: Duration::from_secs(10),
            user_agent: DEFAULT_USER_AGENT.to_string(),
            helo_name: "sitebench.invalid".to_string(),
            resolver: ([127, 0, 0, 1], 53).into(),
            dns_timeout: Duration::from_secs(5),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Scanner {
    pub config: ScannerConfig,
    pub dialer: Dialer,
    pub roots: Arc<RootCertStore>,
    pub filters: Arc<FilterSet>,
    pub signatures: Arc<SignatureSet>,
    pub geodb: Option<Arc<GeoDb>>,
    pub catalog: Arc<Catalog>,
}

#[derive(Debug, Clone)]
pub struct ScanReport {
    pub facts: ScanFacts,
    pub results: Vec<CheckResult>,
    /// False when the landing page could not be reached at all.
    pub reachable: bool,
}

fn module_error(module: &str, e: &ScanError) -> ModuleError {
    ModuleError {
        module: module.to_string(),
        kind: e.kind().to_string(),
        message: e.to_string(),
    }
}

impl Scanner {
    pub fn new(config: ScannerConfig, dialer: Dialer, roots: RootCertStore, filters: FilterSet) -> Self {
        Scanner {
            config,
            dialer,
            roots: Arc::new(roots),
            filters: Arc::new(filters),
            signatures: Arc::new(SignatureSet::bundled()),
            geodb: None,
            catalog: Arc::new(check_catalog()),
        }
    }

    pub fn http_client(&self) -> http::HttpClient {
        let mut dialer = self.dialer.clone();
        dialer.connect_timeout.get_or_insert(self.config.limits.timeout);
        http::HttpClient::new(
            dialer,
            self.config.user_agent.clone(),
            self.config.limits.timeout,
            net::permissive_config(),
        )
    }

    pub fn tls_config(&self) -> tls::TlsProbeConfig {
        let mut dialer = self.dialer.clone();
        dialer.connect_timeout.get_or_insert(self.config.probe_timeout);
        tls::TlsProbeConfig {
            dialer,
            roots: self.roots.clone(),
            timeout: self.config.probe_timeout,
            user_agent: self.config.user_agent.clone(),
            helo_name: self.config.helo_name.clone(),
        }
    }

    pub fn resolver(&self) -> dns::Resolver {
        dns::Resolver::new(self.config.resolver, self.config.dns_timeout)
    }

    /// Body of `/robots.txt` on the site's origin, if it answers 2xx.
    pub async fn fetch_robots(&self, site: &SiteUrl) -> Option<String> {
        let url = site.join("/robots.txt").ok()?;
        let resp = self
            .http_client()
            .get(&url, http::BodyPolicy::Truncate(512 * 1024))
            .await
            .ok()?;
        (200..300)
            .contains(&resp.status)
            .then(|| String::from_utf8_lossy(&resp.body).into_owned())
    }

    /// Runs every scan module against `site` and evaluates the catalog.
    pub async fn scan(&self, site: &SiteUrl) -> ScanReport {
        let mut facts = ScanFacts::default();
        let host = site.host().to_string();
        let domain = self.signatures.public_suffixes.registrable_domain(&host);
        let resolver = self.resolver();

        let dns = dns::resolve_dns(&resolver, &host, &domain).await;
        if dns.status == ResolverStatus::Timeout {
            facts.errors.push(module_error("dns", &ScanError::Timeout));
        }

        let client = self.http_client();
        let mut reachable = true;
        match fetch::fetch_site(&client, site.as_url(), self.config.limits).await {
            Ok(bundle) => {
                let final_host = bundle.final_url.host_str().unwrap_or(&host).to_string();
                facts.content = Some(extract_content_facts(&bundle, &self.filters, &final_host, &self.signatures));
                facts.leaks = Some(fetch::probe_leaks(&client, &bundle.final_url).await);
            }
            Err(e) => {
                reachable = !e.is_unreachable();
                facts.errors.push(module_error("content", &e));
                facts.errors.push(module_error("leaks", &e));
            }
        }

        let tls_cfg = self.tls_config();
        facts.tls = Some(tls::scan_web_tls(&tls_cfg, &host).await);

        let primary_mx = dns.primary_mx().map(str::to_string);
        facts.mail = match dns.status {
            ResolverStatus::Timeout => {
                facts.errors.push(module_error("mail", &ScanError::Dns("MX lookup failed".into())));
                None
            }
            ResolverStatus::NxDomain => Some(MailTlsFacts::no_mx()),
            ResolverStatus::Ok => {
                let mail = tls::scan_mail_tls(&tls_cfg, primary_mx.as_deref()).await;
                if mail.mx_host.is_some() && mail.starttls_offered.is_none() {
                    facts.errors.push(module_error(
                        "mail",
                        &ScanError::ConnectionFailed(format!("{}:{}", primary_mx.as_deref().unwrap_or(""), tls::SMTP_PORT)),
                    ));
                }
                Some(mail)
            }
        };

        if let Some(db) = &self.geodb {
            facts.geo = Some(self.locate(&resolver, &host, &dns, primary_mx.as_deref(), db).await);
        }
        facts.dns = Some(dns);

        let results = evaluate_checks(&facts, &self.catalog);
        ScanReport {
            facts,
            results,
            reachable,
        }
    }

    async fn locate(
        &self,
        resolver: &dns::Resolver,
        host: &str,
        dns: &sitebench_core::DnsFacts,
        mx: Option<&str>,
        db: &GeoDb,
    ) -> GeoFacts {
        let mut ips: Vec<_> = dns
            .a_records
            .iter()
            .map(|ip| (ServerRole::Web, host.to_string(), *ip))
            .collect();
        if let Some(mx) = mx {
            for ip in resolver.addresses(mx).await {
                ips.push((ServerRole::Mail, mx.to_string(), ip));
            }
        }
        for ns in &dns.ns_records {
            for ip in resolver.addresses(ns).await {
                ips.push((ServerRole::Ns, ns.clone(), ip));
            }
        }
        geolocate(&ips, db)
    }
}
